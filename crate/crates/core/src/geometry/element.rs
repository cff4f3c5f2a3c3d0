//! Lagrange shape functions on a physical triangle.

/// Barycentric gradients of a triangle, constant over the element.
pub fn barycentric_gradients(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    [
        [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
        [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
        [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
    ]
}

/// Local edge `k` joins local vertices `EDGES[k]`.
pub const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

pub fn local_dim(order: usize) -> usize {
    if order == 1 { 3 } else { 6 }
}

/// Shape function values at barycentric point `l`.
pub fn values(order: usize, l: [f64; 3]) -> Vec<f64> {
    if order == 1 {
        return l.to_vec();
    }
    let mut v = Vec::with_capacity(6);
    for i in 0..3 {
        v.push(l[i] * (2.0 * l[i] - 1.0));
    }
    for (i, j) in EDGES {
        v.push(4.0 * l[i] * l[j]);
    }
    v
}

/// Shape function gradients at barycentric point `l`.
pub fn gradients(order: usize, l: [f64; 3], g: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
    if order == 1 {
        return g.to_vec();
    }
    let mut d = Vec::with_capacity(6);
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        d.push([s * g[i][0], s * g[i][1]]);
    }
    for (i, j) in EDGES {
        d.push([
            4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
            4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
        ]);
    }
    d
}

/// Physical point for barycentric coordinates `l`.
pub fn point(p: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}
