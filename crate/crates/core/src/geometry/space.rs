use std::collections::HashMap;

use faer::Mat;

use super::element;
use super::mesh::Mesh;
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::quadrature;

/// Relative singular value cutoff used for every null-space and rank decision.
pub const RANK_RTOL: f64 = 1e-9;

/// Angle (radians) above which two adjacent facet normals make a corner.
pub const CORNER_ANGLE: f64 = 1e-8;

/// How boundary velocities are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// `v_τ = 0`: only the normal component is free.
    Slip,
    /// `v = 0` at every boundary node.
    NoSlip,
}

/// A sparse row over full velocity DOFs.
pub type SparseRow = Vec<(usize, f64)>;

/// Per-element precomputed quadrature tables.
#[derive(Debug, Clone)]
pub struct ElementTable {
    /// Global node of each local shape function.
    pub nodes: Vec<usize>,
    pub points: Vec<[f64; 2]>,
    /// Quadrature weights already multiplied by the element area.
    pub weights: Vec<f64>,
    /// `values[q][a]`
    pub values: Vec<Vec<f64>>,
    /// `grads[q][a]`
    pub grads: Vec<Vec<[f64; 2]>>,
}

/// Boundary nodes with lumped weights and node normals.
#[derive(Debug, Clone)]
pub struct BoundaryNodes {
    pub nodes: Vec<usize>,
    pub normals: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub clamped: Vec<bool>,
}

/// Constrained, discretely divergence-free velocity space.
///
/// The basis columns are orthonormal in the Euclidean coefficient inner
/// product. They are ordered so that the first `trace_rank` columns carry a
/// nonzero boundary normal trace and the remaining ones vanish on the
/// boundary.
#[derive(Debug, Clone)]
pub struct ReducedSpace {
    mesh: Mesh,
    order: usize,
    nodes: Vec<[f64; 2]>,
    tables: Vec<ElementTable>,
    boundary: BoundaryNodes,
    tangential: Vec<SparseRow>,
    div_rows: Vec<SparseRow>,
    basis: Matrix,
    trace: Matrix,
    trace_rank: usize,
}

pub fn build_reduced_space(mesh: &Mesh, order: usize) -> Result<ReducedSpace> {
    build_reduced_space_with(mesh, order, BoundaryMode::Slip)
}

pub fn build_reduced_space_with(mesh: &Mesh, order: usize, mode: BoundaryMode) -> Result<ReducedSpace> {
    if order != 1 && order != 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    // nodes: vertices, then (order 2) one midpoint per edge
    let mut nodes: Vec<[f64; 2]> = mesh.vertices().to_vec();
    let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elem_nodes = Vec::with_capacity(mesh.triangles().len());
    for tri in mesh.triangles() {
        let mut en: Vec<usize> = tri.to_vec();
        if order == 2 {
            for (i, j) in element::EDGES {
                let (a, b) = (tri[i].min(tri[j]), tri[i].max(tri[j]));
                let id = *edge_node.entry((a, b)).or_insert_with(|| {
                    let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                    nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    nodes.len() - 1
                });
                en.push(id);
            }
        }
        elem_nodes.push(en);
    }
    let n_nodes = nodes.len();
    let full_dim = 2 * n_nodes;

    let tables = build_tables(mesh, order, &elem_nodes);
    let boundary = boundary_nodes(mesh, order, &edge_node, mode);

    let mut is_boundary = vec![None; n_nodes];
    for (i, &n) in boundary.nodes.iter().enumerate() {
        is_boundary[n] = Some(i);
    }

    // explicit parametrization of the constrained (not yet div-free) space
    let mut free: Vec<(usize, [f64; 2])> = Vec::new();
    let mut tangential = Vec::new();
    for n in 0..n_nodes {
        match is_boundary[n] {
            None => {
                free.push((n, [1.0, 0.0]));
                free.push((n, [0.0, 1.0]));
            }
            Some(i) if boundary.clamped[i] => {
                tangential.push(vec![(2 * n, 1.0)]);
                tangential.push(vec![(2 * n + 1, 1.0)]);
            }
            Some(i) => {
                let nrm = boundary.normals[i];
                free.push((n, nrm));
                tangential.push(vec![(2 * n, -nrm[1]), (2 * n + 1, nrm[0])]);
            }
        }
    }

    let div_rows = divergence_rows(mesh, order, &elem_nodes);

    let mut dof_to_free: Vec<Vec<(usize, f64)>> = vec![Vec::new(); full_dim];
    for (c, &(n, d)) in free.iter().enumerate() {
        for k in 0..2 {
            if d[k] != 0.0 {
                dof_to_free[2 * n + k].push((c, d[k]));
            }
        }
    }
    let mut a = Mat::from_fn(div_rows.len(), free.len(), |_, _| 0.0);
    for (r, row) in div_rows.iter().enumerate() {
        for &(dof, v) in row {
            for &(c, s) in &dof_to_free[dof] {
                a[(r, c)] += v * s;
            }
        }
    }
    let null = linalg::null_space(&a, RANK_RTOL)?;
    if null.ncols() == 0 {
        return Err(Error::EmptySpace);
    }
    let rdim = null.ncols();
    let mut basis = Mat::from_fn(full_dim, rdim, |_, _| 0.0);
    for (c, &(n, d)) in free.iter().enumerate() {
        for k in 0..2 {
            if d[k] != 0.0 {
                for j in 0..rdim {
                    basis[(2 * n + k, j)] += d[k] * null[(c, j)];
                }
            }
        }
    }

    let (basis, trace, trace_rank) = rotate_by_trace(&boundary, basis)?;

    Ok(ReducedSpace {
        mesh: mesh.clone(),
        order,
        nodes,
        tables,
        boundary,
        tangential,
        div_rows,
        basis,
        trace,
        trace_rank,
    })
}

fn trace_matrix(boundary: &BoundaryNodes, basis: &Matrix) -> Matrix {
    Mat::from_fn(boundary.nodes.len(), basis.ncols(), |i, j| {
        let n = boundary.nodes[i];
        let nrm = boundary.normals[i];
        nrm[0] * basis[(2 * n, j)] + nrm[1] * basis[(2 * n + 1, j)]
    })
}

/// Rotates the basis by the right singular vectors of its trace matrix, so
/// that trace-carrying columns come first.
fn rotate_by_trace(boundary: &BoundaryNodes, basis: Matrix) -> Result<(Matrix, Matrix, usize)> {
    let t = trace_matrix(boundary, &basis);
    let (k, _, v) = linalg::svd_right(&t, RANK_RTOL)?;
    let basis = &basis * &v;
    let mut trace = trace_matrix(boundary, &basis);
    for j in k..trace.ncols() {
        for i in 0..trace.nrows() {
            trace[(i, j)] = 0.0;
        }
    }
    Ok((basis, trace, k))
}

fn build_tables(mesh: &Mesh, order: usize, elem_nodes: &[Vec<usize>]) -> Vec<ElementTable> {
    let rule = quadrature::triangle_degree4();
    (0..mesh.triangles().len())
        .map(|t| {
            let p = mesh.triangle_points(t);
            let area = mesh.triangle_area(t);
            let g = element::barycentric_gradients(&p);
            ElementTable {
                nodes: elem_nodes[t].clone(),
                points: rule.iter().map(|q| element::point(&p, q.bary)).collect(),
                weights: rule.iter().map(|q| q.weight * area).collect(),
                values: rule.iter().map(|q| element::values(order, q.bary)).collect(),
                grads: rule.iter().map(|q| element::gradients(order, q.bary, &g)).collect(),
            }
        })
        .collect()
}

fn boundary_nodes(
    mesh: &Mesh,
    order: usize,
    edge_node: &HashMap<(usize, usize), usize>,
    mode: BoundaryMode,
) -> BoundaryNodes {
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut out = BoundaryNodes { nodes: vec![], normals: vec![], weights: vec![], clamped: vec![] };
    let mut adjacent: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut visit = |node: usize, nrm: [f64; 2], w: f64, out: &mut BoundaryNodes| {
        let i = *index.entry(node).or_insert_with(|| {
            out.nodes.push(node);
            out.weights.push(0.0);
            adjacent.push(Vec::new());
            out.nodes.len() - 1
        });
        out.weights[i] += w;
        adjacent[i].push(nrm);
    };
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        let len = mesh.facet_length(f);
        let nrm = mesh.normals()[f];
        if order == 1 {
            visit(facet.a, nrm, 0.5 * len, &mut out);
            visit(facet.b, nrm, 0.5 * len, &mut out);
        } else {
            let mid = edge_node[&(facet.a.min(facet.b), facet.a.max(facet.b))];
            visit(facet.a, nrm, len / 6.0, &mut out);
            visit(mid, nrm, 4.0 * len / 6.0, &mut out);
            visit(facet.b, nrm, len / 6.0, &mut out);
        }
    }
    for normals in &adjacent {
        let mut s = [0.0, 0.0];
        for n in normals {
            s[0] += n[0];
            s[1] += n[1];
        }
        let len = s[0].hypot(s[1]);
        let corner = normals.iter().any(|n| {
            let cross = n[0] * normals[0][1] - n[1] * normals[0][0];
            let dot = n[0] * normals[0][0] + n[1] * normals[0][1];
            cross.atan2(dot).abs() > CORNER_ANGLE
        });
        out.clamped.push(corner || mode == BoundaryMode::NoSlip || len == 0.0);
        out.normals.push(if len > 0.0 { [s[0] / len, s[1] / len] } else { [0.0, 0.0] });
    }
    out
}

fn divergence_rows(mesh: &Mesh, order: usize, elem_nodes: &[Vec<usize>]) -> Vec<SparseRow> {
    let mut rows = Vec::new();
    for (t, en) in elem_nodes.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let g = element::barycentric_gradients(&p);
        let s = mesh.triangle_area(t).sqrt();
        let points: Vec<[f64; 3]> = if order == 1 {
            vec![[1.0 / 3.0; 3]]
        } else {
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        };
        for l in points {
            let d = element::gradients(order, l, &g);
            let mut row = Vec::with_capacity(2 * en.len());
            for (a, &n) in en.iter().enumerate() {
                row.push((2 * n, s * d[a][0]));
                row.push((2 * n + 1, s * d[a][1]));
            }
            rows.push(row);
        }
    }
    rows
}

impl ReducedSpace {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn full_dim(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// `full_dim x reduced_dim`, orthonormal columns.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn tables(&self) -> &[ElementTable] {
        &self.tables
    }

    pub fn boundary(&self) -> &BoundaryNodes {
        &self.boundary
    }

    /// Rows encoding `v_τ = 0` (and full clamping at corners).
    pub fn tangential_constraints(&self) -> &[SparseRow] {
        &self.tangential
    }

    /// Rows of the discrete divergence (one per pressure DOF, scaled by √area).
    pub fn div_matrix(&self) -> &[SparseRow] {
        &self.div_rows
    }

    /// Dense `n_boundary x reduced_dim` map to nodal normal traces.
    pub fn trace_matrix(&self) -> &Matrix {
        &self.trace
    }

    /// Number of leading basis columns with nonzero normal trace.
    pub fn trace_rank(&self) -> usize {
        self.trace_rank
    }

    /// Full coefficient vector of a reduced field.
    pub fn lift(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.reduced_dim(), v.len())?;
        Ok(linalg::matvec(&self.basis, v))
    }

    /// Euclidean projection of full coefficients onto the reduced basis.
    pub fn restrict(&self, full: &[f64]) -> Result<Vec<f64>> {
        check_len(self.full_dim(), full.len())?;
        Ok(linalg::matvec_t(&self.basis, full))
    }

    /// Nodal interpolant of a vector field, in full coefficients.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_dim()];
        for (n, p) in self.nodes.iter().enumerate() {
            let v = f(p[0], p[1]);
            out[2 * n] = v[0];
            out[2 * n + 1] = v[1];
        }
        out
    }

    /// `v_n` at every boundary node, in the order of [`BoundaryNodes::nodes`].
    pub fn normal_trace(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.reduced_dim(), v.len())?;
        Ok(linalg::matvec(&self.trace, v))
    }

    /// Keeps at most `max_dim` columns: the trace-carrying ones first, then
    /// interior ones.
    pub fn truncated(&self, max_dim: usize) -> Result<Self> {
        if max_dim == 0 {
            return Err(Error::EmptySpace);
        }
        let keep = max_dim.min(self.reduced_dim());
        let basis = Mat::from_fn(self.full_dim(), keep, |i, j| self.basis[(i, j)]);
        let (basis, trace, trace_rank) = rotate_by_trace(&self.boundary, basis)?;
        Ok(Self { basis, trace, trace_rank, ..self.clone() })
    }

    /// Max-norm of `div_matrix · basis`.
    pub fn divergence_defect(&self) -> f64 {
        sparse_rows_defect(&self.div_rows, &self.basis)
    }

    /// Max-norm of `tangential_constraints · basis`.
    pub fn tangential_defect(&self) -> f64 {
        sparse_rows_defect(&self.tangential, &self.basis)
    }
}

fn sparse_rows_defect(rows: &[SparseRow], basis: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for row in rows {
        for j in 0..basis.ncols() {
            let s: f64 = row.iter().map(|&(i, v)| v * basis[(i, j)]).sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::{generate_mesh, Domain};

    fn space(n: usize, order: usize) -> ReducedSpace {
        build_reduced_space(&generate_mesh(Domain::UnitSquare, n, n).unwrap(), order).unwrap()
    }

    #[test]
    fn corners_are_clamped() {
        let mesh = generate_mesh(Domain::UnitSquare, 1, 1).unwrap();
        let b = boundary_nodes(&mesh, 1, &HashMap::new(), BoundaryMode::Slip);
        assert_eq!(b.nodes.len(), 4);
        assert!(b.clamped.iter().all(|&c| c));
    }

    #[test]
    fn constraints_annihilate_basis() {
        for order in [1, 2] {
            let s = space(4, order);
            assert!(s.divergence_defect() <= 1e-10, "order {order}");
            assert!(s.tangential_defect() <= 1e-10);
            assert!(linalg::orthonormality_defect(s.basis()) <= 1e-10);
        }
    }

    #[test]
    fn boundary_weights_sum_to_perimeter() {
        for order in [1, 2] {
            let s = build_reduced_space(
                &generate_mesh(Domain::Channel { length: 2.0, height: 0.5 }, 4, 2).unwrap(),
                order,
            )
            .unwrap();
            let w: f64 = s.boundary().weights.iter().sum();
            assert!((w - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_columns_lead() {
        let s = space(3, 2);
        let k = s.trace_rank();
        assert!(k >= 1);
        for j in k..s.reduced_dim() {
            let v: Vec<f64> = (0..s.reduced_dim()).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            let full = s.lift(&v).unwrap();
            for (i, &n) in s.boundary().nodes.iter().enumerate() {
                let nrm = s.boundary().normals[i];
                assert!((nrm[0] * full[2 * n] + nrm[1] * full[2 * n + 1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn no_slip_has_no_trace() {
        let mesh = generate_mesh(Domain::UnitSquare, 3, 3).unwrap();
        let s = build_reduced_space_with(&mesh, 2, BoundaryMode::NoSlip).unwrap();
        assert_eq!(s.trace_rank(), 0);
    }

    #[test]
    fn unsupported_order() {
        let mesh = generate_mesh(Domain::UnitSquare, 1, 1).unwrap();
        assert_eq!(build_reduced_space(&mesh, 3).unwrap_err(), Error::UnsupportedOrder(3));
    }

    #[test]
    fn truncation_keeps_trace_columns_first() {
        let s = space(2, 2);
        let t = s.truncated(4).unwrap();
        assert_eq!(t.reduced_dim(), 4.min(s.reduced_dim()));
        assert!(t.divergence_defect() <= 1e-10);
    }
}
