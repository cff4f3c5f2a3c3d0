//! Assembly and evaluation of the curl-curl, mass, convection and power forms.
//!
//! Reduced fields are coefficient vectors in the space basis. Most evaluations
//! lift to full nodal coefficients, loop over elements at the quadrature
//! points, and (for functionals) apply the transposed basis.

use std::sync::OnceLock;

use crate::error::{check_len, Error, Result};
use crate::geometry::ReducedSpace;
use crate::linalg::{self, Cholesky, Csr, Matrix};
use crate::par;

/// Velocity and scalar curl at every quadrature point, element by element.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub u: Vec<[f64; 2]>,
    pub curl: Vec<f64>,
}

pub fn qp_weights(space: &ReducedSpace) -> Vec<f64> {
    space.tables().iter().flat_map(|t| t.weights.iter().copied()).collect()
}

pub fn qp_points(space: &ReducedSpace) -> Vec<[f64; 2]> {
    space.tables().iter().flat_map(|t| t.points.iter().copied()).collect()
}

/// Point values of a field given by full nodal coefficients.
pub fn evaluate_full(space: &ReducedSpace, full: &[f64]) -> Result<PointField> {
    check_len(space.full_dim(), full.len())?;
    let per_elem = par::map_slice(space.tables(), |tab| {
        let mut out = Vec::with_capacity(tab.weights.len());
        for q in 0..tab.weights.len() {
            let (mut u, mut curl) = ([0.0, 0.0], 0.0);
            for (a, &n) in tab.nodes.iter().enumerate() {
                let (ux, uy) = (full[2 * n], full[2 * n + 1]);
                let nv = tab.values[q][a];
                let g = tab.grads[q][a];
                u[0] += nv * ux;
                u[1] += nv * uy;
                curl += g[0] * uy - g[1] * ux;
            }
            out.push((u, curl));
        }
        out
    });
    let mut field = PointField { u: Vec::new(), curl: Vec::new() };
    for (u, c) in per_elem.into_iter().flatten() {
        field.u.push(u);
        field.curl.push(c);
    }
    Ok(field)
}

pub fn evaluate(space: &ReducedSpace, v: &[f64]) -> Result<PointField> {
    evaluate_full(space, &space.lift(v)?)
}

/// Full nodal vector `F` with `F·φ = Σ_q w_q (coef_u[q]·φ(x_q) + coef_curl[q] curl φ(x_q))`.
pub fn assemble_full(space: &ReducedSpace, coef_u: &[[f64; 2]], coef_curl: Option<&[f64]>) -> Vec<f64> {
    let tables = space.tables();
    let nq = tables.first().map_or(0, |t| t.weights.len());
    let local = par::map_range(tables.len(), |e| {
        let tab = &tables[e];
        let mut loc = vec![0.0; 2 * tab.nodes.len()];
        for q in 0..nq {
            let idx = e * nq + q;
            let w = tab.weights[q];
            let cu = coef_u[idx];
            let cc = coef_curl.map_or(0.0, |c| c[idx]);
            for a in 0..tab.nodes.len() {
                let nv = tab.values[q][a];
                let g = tab.grads[q][a];
                loc[2 * a] += w * (cu[0] * nv - cc * g[1]);
                loc[2 * a + 1] += w * (cu[1] * nv + cc * g[0]);
            }
        }
        loc
    });
    let mut full = vec![0.0; space.full_dim()];
    for (tab, loc) in tables.iter().zip(&local) {
        for (a, &n) in tab.nodes.iter().enumerate() {
            full[2 * n] += loc[2 * a];
            full[2 * n + 1] += loc[2 * a + 1];
        }
    }
    full
}

/// Reduced representer of the functional defined by point coefficients.
pub fn assemble(space: &ReducedSpace, coef_u: &[[f64; 2]], coef_curl: Option<&[f64]>) -> Vec<f64> {
    linalg::matvec_t(space.basis(), &assemble_full(space, coef_u, coef_curl))
}

fn assemble_matrix_full(space: &ReducedSpace, stiffness: bool) -> Csr {
    let tables = space.tables();
    let local = par::map_slice(tables, |tab| {
        let nl = 2 * tab.nodes.len();
        let mut loc = vec![0.0; nl * nl];
        for q in 0..tab.weights.len() {
            let w = tab.weights[q];
            // shape function i = 2a + c: value / curl
            let phi = |i: usize| -> ([f64; 2], f64) {
                let (a, c) = (i / 2, i % 2);
                let nv = tab.values[q][a];
                let g = tab.grads[q][a];
                if c == 0 { ([nv, 0.0], -g[1]) } else { ([0.0, nv], g[0]) }
            };
            for i in 0..nl {
                let (vi, ci) = phi(i);
                for j in 0..nl {
                    let (vj, cj) = phi(j);
                    loc[i * nl + j] += if stiffness {
                        w * ci * cj
                    } else {
                        w * (vi[0] * vj[0] + vi[1] * vj[1])
                    };
                }
            }
        }
        loc
    });
    let mut trip = Vec::new();
    for (tab, loc) in tables.iter().zip(&local) {
        let nl = 2 * tab.nodes.len();
        let dof = |i: usize| 2 * tab.nodes[i / 2] + i % 2;
        for i in 0..nl {
            for j in 0..nl {
                let v = loc[i * nl + j];
                if v != 0.0 {
                    trip.push((dof(i), dof(j), v));
                }
            }
        }
    }
    Csr::from_triplets(space.full_dim(), space.full_dim(), trip)
}

/// Full (unreduced) curl-curl stiffness.
pub fn curl_stiffness_full(space: &ReducedSpace) -> Csr {
    assemble_matrix_full(space, true)
}

/// Full (unreduced) velocity mass matrix.
pub fn mass_full(space: &ReducedSpace) -> Csr {
    assemble_matrix_full(space, false)
}

fn reduce(space: &ReducedSpace, full: &Csr) -> Matrix {
    let z = space.basis();
    let az = full.mul_dense(z);
    let mut r = z.transpose() * &az;
    linalg::symmetrize(&mut r);
    r
}

/// `K` with `vᵀKv = ∫ |curl v|²`.
pub fn assemble_curl_stiffness(space: &ReducedSpace) -> Matrix {
    reduce(space, &curl_stiffness_full(space))
}

/// `M` with `vᵀMv = ∫ |v|²`.
pub fn assemble_mass(space: &ReducedSpace) -> Matrix {
    reduce(space, &mass_full(space))
}

/// `b(u, v, w) = ∫ curl u (v₁w₂ − v₂w₁)` on full nodal coefficients.
pub fn eval_b_full(space: &ReducedSpace, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let (pu, pv, pw) = (evaluate_full(space, u)?, evaluate_full(space, v)?, evaluate_full(space, w)?);
    let wts = qp_weights(space);
    Ok((0..wts.len())
        .map(|q| wts[q] * pu.curl[q] * (pv.u[q][0] * pw.u[q][1] - pv.u[q][1] * pw.u[q][0]))
        .sum())
}

pub fn eval_b(space: &ReducedSpace, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    for x in [u, v, w] {
        check_len(space.reduced_dim(), x.len())?;
    }
    eval_b_full(space, &space.lift(u)?, &space.lift(v)?, &space.lift(w)?)
}

/// Reduced vector `g` with `gᵀv = b(w, w, v)`.
pub fn convection_load(space: &ReducedSpace, w: &[f64]) -> Result<Vec<f64>> {
    let pw = evaluate(space, w)?;
    let coef: Vec<[f64; 2]> = pw
        .u
        .iter()
        .zip(&pw.curl)
        .map(|(u, &c)| [-c * u[1], c * u[0]])
        .collect();
    Ok(assemble(space, &coef, None))
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `|u|^{p−1} u` for a point value.
pub fn power_point(u: [f64; 2], p: f64) -> [f64; 2] {
    let n = u[0].hypot(u[1]);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let s = n.powf(p - 1.0);
    [s * u[0], s * u[1]]
}

/// Gateaux derivative of `u ↦ |u|^{p−1} u` at `u` in direction `v`.
pub fn power_gateaux_point(u: [f64; 2], v: [f64; 2], p: f64) -> [f64; 2] {
    if p == 1.0 {
        return v;
    }
    let n = u[0].hypot(u[1]);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let a = n.powf(p - 1.0);
    let b = (p - 1.0) * n.powf(p - 3.0) * (u[0] * v[0] + u[1] * v[1]);
    [a * v[0] + b * u[0], a * v[1] + b * u[1]]
}

/// `∫ |u|^{p−1} u·v` on full nodal coefficients.
pub fn eval_power_full(space: &ReducedSpace, u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let (pu, pv) = (evaluate_full(space, u)?, evaluate_full(space, v)?);
    let wts = qp_weights(space);
    Ok((0..wts.len())
        .map(|q| {
            let c = power_point(pu.u[q], p);
            wts[q] * (c[0] * pv.u[q][0] + c[1] * pv.u[q][1])
        })
        .sum())
}

pub fn eval_power(space: &ReducedSpace, u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    check_len(space.reduced_dim(), u.len())?;
    check_len(space.reduced_dim(), v.len())?;
    eval_power_full(space, &space.lift(u)?, &space.lift(v)?, p)
}

/// Reduced vector `g` with `gᵀv = ∫ |u|^{p−1} u·v`.
pub fn power_load(space: &ReducedSpace, u: &[f64], p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    let pu = evaluate(space, u)?;
    let coef: Vec<[f64; 2]> = pu.u.iter().map(|&x| power_point(x, p)).collect();
    Ok(assemble(space, &coef, None))
}

/// `‖u‖_{L^p}` by quadrature.
pub fn lp_norm(space: &ReducedSpace, u: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let pu = evaluate(space, u)?;
    let wts = qp_weights(space);
    let s: f64 = pu.u.iter().zip(&wts).map(|(x, w)| w * x[0].hypot(x[1]).powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// Reduced load vector of an analytic body force.
pub fn load_vector(space: &ReducedSpace, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let coef: Vec<[f64; 2]> = qp_points(space).iter().map(|x| f(x[0], x[1])).collect();
    assemble(space, &coef, None)
}

/// The space together with its factored stiffness and mass matrices.
#[derive(Debug)]
pub struct AssembledForms {
    space: ReducedSpace,
    k: Matrix,
    m: Matrix,
    k_chol: Cholesky,
    m_chol: Cholesky,
    lambda0: OnceLock<Result<f64>>,
}

impl AssembledForms {
    pub fn new(space: ReducedSpace) -> Result<Self> {
        let k = assemble_curl_stiffness(&space);
        let m = assemble_mass(&space);
        let k_chol = Cholesky::new(&k)?;
        let m_chol = Cholesky::new(&m)?;
        Ok(Self { space, k, m, k_chol, m_chol, lambda0: OnceLock::new() })
    }

    pub fn space(&self) -> &ReducedSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.reduced_dim()
    }

    /// Curl-curl stiffness `K`.
    pub fn k(&self) -> &Matrix {
        &self.k
    }

    /// Mass matrix `M`.
    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn k_factor(&self) -> &Cholesky {
        &self.k_chol
    }

    pub fn m_factor(&self) -> &Cholesky {
        &self.m_chol
    }

    /// Principal trace eigenvalue `λ₀`, computed on first use.
    pub fn lambda0(&self) -> Result<f64> {
        self.lambda0
            .get_or_init(|| crate::constants::compute_principal_eigenvalue(self))
            .clone()
    }

    /// `‖v‖_V = ‖curl v‖_{L²}`
    pub fn norm_v(&self, v: &[f64]) -> f64 {
        linalg::quad_form(&self.k, v).max(0.0).sqrt()
    }

    /// `‖v‖_H = ‖v‖_{L²}`
    pub fn norm_h(&self, v: &[f64]) -> f64 {
        linalg::quad_form(&self.m, v).max(0.0).sqrt()
    }

    /// Dual norm `sup gᵀv / ‖v‖_V = (gᵀK⁻¹g)^{1/2}`.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        linalg::dot(g, &self.k_chol.solve(g)).max(0.0).sqrt()
    }

    /// Reduced field `C'(u)v`, projected back to the basis with `M`.
    pub fn power_gateaux(&self, u: &[f64], v: &[f64], p: f64) -> Result<Vec<f64>> {
        check_exponent(p)?;
        check_len(self.dim(), u.len())?;
        check_len(self.dim(), v.len())?;
        let (pu, pv) = (evaluate(&self.space, u)?, evaluate(&self.space, v)?);
        let coef: Vec<[f64; 2]> = pu
            .u
            .iter()
            .zip(&pv.u)
            .map(|(&a, &b)| power_gateaux_point(a, b, p))
            .collect();
        Ok(self.m_chol.solve(&assemble(&self.space, &coef, None)))
    }

    /// Reduced field `C(u) = |u|^{p−1}u`, projected with `M`.
    pub fn power_field(&self, u: &[f64], p: f64) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        Ok(self.m_chol.solve(&power_load(&self.space, u, p)?))
    }
}
