use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Rectangular domains supported by the structured generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    UnitSquare,
    Channel { length: f64, height: f64 },
}

impl Domain {
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            Domain::UnitSquare => (1.0, 1.0),
            Domain::Channel { length, height } => (length, height),
        }
    }
}

/// A boundary edge `a -> b`, oriented so that the domain lies to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub a: usize,
    pub b: usize,
    pub triangle: usize,
}

/// Triangulation of a polygonal domain with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<BoundaryFacet>,
    normals: Vec<[f64; 2]>,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b { (a, b) } else { (b, a) }
}

impl Mesh {
    /// Builds a mesh from raw data, deriving facet ownership and normals, and
    /// validates every invariant.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area {area}")));
            }
        }

        // directed edge -> owning triangle, plus undirected multiplicity
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                directed.insert((a, b), t);
                *count.entry(edge_key(a, b)).or_default() += 1;
            }
        }
        if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!("edge {e:?} shared by {c} triangles")));
        }
        let n_open = count.values().filter(|&&c| c == 1).count();

        let mut facets = Vec::with_capacity(boundary_edges.len());
        let mut seen = HashMap::new();
        for &(a, b) in &boundary_edges {
            if a >= nv || b >= nv || a == b {
                return Err(Error::InvalidMesh(format!("bad boundary edge ({a}, {b})")));
            }
            if count.get(&edge_key(a, b)) != Some(&1) {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({a}, {b}) does not belong to exactly one triangle"
                )));
            }
            if seen.insert(edge_key(a, b), ()).is_some() {
                return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) listed twice")));
            }
            // orient along the owning triangle so the outward side is on the right
            let f = match (directed.get(&(a, b)), directed.get(&(b, a))) {
                (Some(&t), _) => BoundaryFacet { a, b, triangle: t },
                (None, Some(&t)) => BoundaryFacet { a: b, b: a, triangle: t },
                (None, None) => unreachable!(),
            };
            facets.push(f);
        }
        if facets.len() != n_open {
            return Err(Error::InvalidMesh(format!(
                "{} open edges but {} boundary facets listed",
                n_open,
                facets.len()
            )));
        }

        let mut out_deg = vec![0usize; nv];
        let mut in_deg = vec![0usize; nv];
        for f in &facets {
            out_deg[f.a] += 1;
            in_deg[f.b] += 1;
        }
        if (0..nv).any(|v| out_deg[v] != in_deg[v] || out_deg[v] > 1) {
            return Err(Error::InvalidMesh("boundary facets do not form closed loops".into()));
        }

        let normals = facets
            .iter()
            .map(|f| {
                let (p, q) = (vertices[f.a], vertices[f.b]);
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let len = dx.hypot(dy);
                [dy / len, -dx / len]
            })
            .collect();

        Ok(Self { vertices, triangles, facets, normals })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_points(t);
        signed_area(p, q, r)
    }

    pub fn facet_length(&self, i: usize) -> f64 {
        let f = self.facets[i];
        let (p, q) = (self.vertices[f.a], self.vertices[f.b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// `|O|`
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// `|Γ|`
    pub fn boundary_length(&self) -> f64 {
        (0..self.facets.len()).map(|i| self.facet_length(i)).sum()
    }

    /// Returns a copy with every coordinate multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let vertices = self.vertices.iter().map(|p| [s * p[0], s * p[1]]).collect();
        let edges = self.facets.iter().map(|f| (f.a, f.b)).collect();
        Self::new(vertices, self.triangles.clone(), edges)
    }

    /// Plain-text export: `v x y`, `t i j k`, `b i j` with 1-based indices.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.vertices {
            let _ = writeln!(s, "v {:e} {:e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        for f in &self.facets {
            let _ = writeln!(s, "b {} {}", f.a + 1, f.b + 1);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut edges = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let err = |msg: &str| Error::MeshParse { line: line_no, msg: msg.to_string() };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let index = |s: &str| -> Result<usize> {
                let i: usize = s.parse().map_err(|_| err(&format!("bad index '{s}'")))?;
                i.checked_sub(1).ok_or_else(|| err("indices are 1-based"))
            };
            match (tag, rest.len()) {
                ("v", 2) => {
                    let x: f64 = rest[0].parse().map_err(|_| err("bad coordinate"))?;
                    let y: f64 = rest[1].parse().map_err(|_| err("bad coordinate"))?;
                    vertices.push([x, y]);
                }
                ("t", 3) => triangles.push([index(rest[0])?, index(rest[1])?, index(rest[2])?]),
                ("b", 2) => edges.push((index(rest[0])?, index(rest[1])?)),
                _ => return Err(err(&format!("unrecognized record '{line}'"))),
            }
        }
        Self::new(vertices, triangles, edges)
    }
}

/// Structured crossed mesh: every cell of an `nx` x `ny` grid is split into
/// four triangles through its center.
pub fn generate_mesh(domain: Domain, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::ZeroResolution { nx, ny });
    }
    let (lx, ly) = domain.extent();
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::InvalidMesh(format!("bad domain extent {lx} x {ly}")));
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let center = |i: usize, j: usize| (nx + 1) * (ny + 1) + j * nx + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 * hx, j as f64 * hy]);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
        }
    }

    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (bl, br, tr, tl) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            let c = center(i, j);
            triangles.push([bl, br, c]);
            triangles.push([br, tr, c]);
            triangles.push([tr, tl, c]);
            triangles.push([tl, bl, c]);
        }
    }

    // counter-clockwise walk around the rectangle
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        edges.push((grid(i, 0), grid(i + 1, 0)));
    }
    for j in 0..ny {
        edges.push((grid(nx, j), grid(nx, j + 1)));
    }
    for i in (0..nx).rev() {
        edges.push((grid(i + 1, ny), grid(i, ny)));
    }
    for j in (0..ny).rev() {
        edges.push((grid(0, j + 1), grid(0, j)));
    }

    Mesh::new(vertices, triangles, edges)
}
