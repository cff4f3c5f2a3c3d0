//! Auxiliary problem with a frozen convection field: minimization of the
//! discrete energy by monotone accelerated proximal gradient, and the
//! hemivariational residual used to certify its output.
//!
//! The reduced basis splits as `v = (a, y)`: the first `k = trace_rank`
//! coordinates carry the boundary normal trace, the rest have zero trace. The
//! proximal metric is block diagonal, `γ TᵀWT` on `a` (lumped boundary weights
//! `W`, free trace rows `T`) and the exact `μK + αM` block on `y`, so the
//! boundary prox splits into scalar problems coupled only by the single flux
//! constraint that the divergence-free trace space imposes.

use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::{self, ModelParams};
use crate::error::{check_len, Error, Result};
use crate::forms::{self, AssembledForms};
use crate::linalg::{self, Cholesky, Matrix};
use crate::superpotential::Superpotential;

/// Traces within this distance (relative to `max(1, ‖s‖∞)`) of a kink are
/// treated as lying on it.
pub const KINK_SNAP: f64 = 1e-12;

/// Step-size factors shared by every solve.
const SHRINK: f64 = 0.5;
const GROW: f64 = 1.25;
const MIN_STEP: f64 = 1e-14;

/// Multiple of the unit roundoff below which the mapping norm is noise.
const ROUNDING_FACTOR: f64 = 256.0;

/// Problem-independent pieces of the proximal step: trace coordinates and the
/// factored metric.
#[derive(Debug)]
struct ProxGeometry {
    k: usize,
    free: Vec<usize>,
    weights: Vec<f64>,
    /// Free trace rows restricted to the first `k` columns, `nf x k`.
    tf: Matrix,
    /// Thin SVD factors of `tf`: left vectors, inverse singular values, right
    /// vectors. They map trace values back to coefficients without forming
    /// the normal equations.
    svd_u: Matrix,
    svd_inv: Vec<f64>,
    svd_v: Matrix,
    /// Unit vector spanning the orthogonal complement of the trace range.
    constraint: Option<Vec<f64>>,
    /// Scale of the boundary block of the metric.
    gamma: f64,
    q: Matrix,
    qyy: Option<Cholesky>,
}

fn inv_sqrt(a: &Matrix) -> Result<Matrix> {
    let (vals, u) = linalg::sym_eigen(a)?;
    if vals.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(Error::Linalg("metric block is not positive definite".into()));
    }
    let n = a.nrows();
    let d = Mat::from_fn(n, n, |i, j| u[(i, j)] / vals[j].sqrt());
    Ok(&d * u.transpose())
}

impl ProxGeometry {
    fn new(forms: &AssembledForms, params: &ModelParams) -> Result<Self> {
        let space = forms.space();
        let n = forms.dim();
        let k = space.trace_rank();
        let bnd = space.boundary();
        let free: Vec<usize> = (0..bnd.nodes.len()).filter(|&i| !bnd.clamped[i]).collect();
        let weights: Vec<f64> = free.iter().map(|&i| bnd.weights[i]).collect();
        let t = space.trace_matrix();
        let tf = Mat::from_fn(free.len(), k, |i, j| t[(free[i], j)]);

        let mut q = Mat::from_fn(n, n, |i, j| params.mu * forms.k()[(i, j)] + params.alpha * forms.m()[(i, j)]);
        linalg::symmetrize(&mut q);

        let (svd_u, svd_inv, svd_v, constraint, gamma) = if k == 0 {
            (Mat::zeros(free.len(), 0), Vec::new(), Mat::zeros(0, 0), None, 1.0)
        } else {
            let (sv, u, v) = linalg::svd_full(&tf)?;
            if !(sv[k - 1] > 0.0) {
                return Err(Error::Linalg("trace matrix is rank deficient".into()));
            }
            let extra = free.len() - k;
            if extra > 1 {
                return Err(Error::Linalg(format!(
                    "trace space has {extra} linear constraints; the boundary prox supports at most one"
                )));
            }
            let constraint = (extra == 1).then(|| (0..free.len()).map(|i| u[(i, k)]).collect());
            let mut ha = Mat::from_fn(k, k, |i, j| (0..free.len()).map(|r| tf[(r, i)] * weights[r] * tf[(r, j)]).sum());
            linalg::symmetrize(&mut ha);
            let s = inv_sqrt(&ha)?;
            let qaa = Mat::from_fn(k, k, |i, j| q[(i, j)]);
            let mut b = &s * &qaa * &s;
            linalg::symmetrize(&mut b);
            let top = linalg::sym_eigenvalues(&b)?.last().copied().unwrap_or(1.0);
            let uk = Mat::from_fn(free.len(), k, |i, j| u[(i, j)]);
            let inv = sv[..k].iter().map(|s| 1.0 / s).collect();
            (uk, inv, v, constraint, top.max(f64::MIN_POSITIVE))
        };
        let qyy = if k < n {
            Some(Cholesky::new(&Mat::from_fn(n - k, n - k, |i, j| q[(k + i, k + j)]))?)
        } else {
            None
        };
        Ok(Self { k, free, weights, tf, svd_u, svd_inv, svd_v, constraint, gamma, q, qyy })
    }

    /// Coefficients `a` with `tf·a = s` for `s` in the trace range.
    fn coefficients(&self, s: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = (0..self.k).map(|j| self.svd_inv[j] * (0..s.len()).map(|i| self.svd_u[(i, j)] * s[i]).sum::<f64>()).collect();
        (0..self.k).map(|i| (0..self.k).map(|j| self.svd_v[(i, j)] * c[j]).sum()).collect()
    }

    /// Trace-space representative `tf·(tfᵀtf)⁻¹·g` of a coefficient gradient.
    fn trace_gradient(&self, g: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = (0..self.k).map(|j| self.svd_inv[j] * (0..self.k).map(|i| self.svd_v[(i, j)] * g[i]).sum::<f64>()).collect();
        (0..self.svd_u.nrows()).map(|i| (0..self.k).map(|j| self.svd_u[(i, j)] * c[j]).sum()).collect()
    }

    fn traces(&self, v: &[f64]) -> Vec<f64> {
        (0..self.free.len()).map(|i| (0..self.k).map(|j| self.tf[(i, j)] * v[j]).sum()).collect()
    }

    /// `‖v‖²_H`
    fn metric_sq(&self, v: &[f64]) -> f64 {
        let s = self.traces(v);
        let ha: f64 = s.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum();
        let k = self.k;
        let n = v.len();
        let mut hy = 0.0;
        for i in k..n {
            for j in k..n {
                hy += v[i] * self.q[(i, j)] * v[j];
            }
        }
        self.gamma * ha + hy
    }
}

/// Energy of the auxiliary problem with a frozen convection field `w`.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy<'a> {
    forms: &'a AssembledForms,
    params: ModelParams,
    sp: Superpotential,
    load: Vec<f64>,
    frozen_w: Vec<f64>,
    geometry: Arc<ProxGeometry>,
    certified: bool,
}

/// `load = f − convection_load(w)` on a freshly built metric.
pub fn build_energy<'a>(
    forms: &'a AssembledForms,
    sp: Superpotential,
    params: ModelParams,
    f: &[f64],
    w: &[f64],
) -> Result<DiscreteEnergy<'a>> {
    params.validate()?;
    sp.validate()?;
    let n = forms.dim();
    check_len(n, f.len())?;
    check_len(n, w.len())?;
    let geometry = Arc::new(ProxGeometry::new(forms, &params)?);
    let certified = certify(forms, &params, &sp);
    let mut e = DiscreteEnergy { forms, params, sp, load: Vec::new(), frozen_w: Vec::new(), geometry, certified };
    e.set_load(f, w)?;
    Ok(e)
}

fn certify(forms: &AssembledForms, params: &ModelParams, sp: &Superpotential) -> bool {
    if !sp.satisfies_relaxed_monotonicity() {
        return false;
    }
    let m = sp.declared_constants().m;
    let Ok(lambda0) = forms.lambda0() else {
        // no boundary trace: J is constant and only the damping condition matters
        return params.kappa == 0.0 || constants::varrho(params, 1.0).is_ok_and(|v| params.alpha > v);
    };
    let vr = if params.kappa == 0.0 { 0.0 } else { constants::varrho(params, 1.0).unwrap_or(f64::INFINITY) };
    params.effective_viscosity(lambda0, m) > 0.0 && params.alpha > vr
}

impl<'a> DiscreteEnergy<'a> {
    /// Same operator with a new right side, reusing the factored metric.
    pub fn with_load(&self, f: &[f64], w: &[f64]) -> Result<Self> {
        let mut e = self.clone();
        e.set_load(f, w)?;
        Ok(e)
    }

    fn set_load(&mut self, f: &[f64], w: &[f64]) -> Result<()> {
        let n = self.forms.dim();
        check_len(n, f.len())?;
        check_len(n, w.len())?;
        self.load = if w.iter().all(|&x| x == 0.0) {
            f.to_vec()
        } else {
            linalg::sub(f, &forms::convection_load(self.forms.space(), w)?)
        };
        self.frozen_w = w.to_vec();
        Ok(())
    }

    pub fn forms(&self) -> &'a AssembledForms {
        self.forms
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn superpotential(&self) -> &Superpotential {
        &self.sp
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn frozen_w(&self) -> &[f64] {
        &self.frozen_w
    }

    pub fn dim(&self) -> usize {
        self.forms.dim()
    }

    /// Whether the base condition and relaxed monotonicity hold, so that the
    /// energy has a unique minimizer and the iteration is covered by theory.
    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// `μK + αM`
    pub fn quadratic(&self) -> &Matrix {
        &self.geometry.q
    }

    /// Smooth part `F` (everything except `J`) and its gradient.
    pub fn smooth(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim(), v.len())?;
        let space = self.forms.space();
        let pf = forms::evaluate(space, v)?;
        let wts = forms::qp_weights(space);
        let ModelParams { beta, kappa, r, q, .. } = self.params;
        let mut val = 0.0;
        let coef: Vec<[f64; 2]> = pf
            .u
            .iter()
            .zip(&wts)
            .map(|(u, &w)| {
                let nrm = u[0].hypot(u[1]);
                if nrm == 0.0 {
                    return [0.0, 0.0];
                }
                val += w * (beta / (r + 1.0) * nrm.powf(r + 1.0) + kappa / (q + 1.0) * nrm.powf(q + 1.0));
                let s = beta * nrm.powf(r - 1.0) + kappa * nrm.powf(q - 1.0);
                [s * u[0], s * u[1]]
            })
            .collect();
        let mut grad = forms::assemble(space, &coef, None);
        let qv = linalg::matvec(&self.geometry.q, v);
        val += 0.5 * linalg::dot(&qv, v) - linalg::dot(&self.load, v);
        for i in 0..grad.len() {
            grad[i] += qv[i] - self.load[i];
        }
        Ok((val, grad))
    }

    /// Rounding level of `change(x, d)`: the unit roundoff times the sizes
    /// of the linear terms and of the boundary traces it is built from.
    fn change_noise(&self, x: &[f64], g: &[f64], d: &[f64]) -> Result<f64> {
        let space = self.forms.space();
        let s = space.normal_trace(x)?;
        let w = &space.boundary().weights;
        let bnd: f64 = s
            .iter()
            .zip(w)
            .map(|(&si, wi)| {
                let (l, r) = self.sp.one_sided(si);
                wi * si.abs() * l.abs().max(r.abs())
            })
            .sum();
        let lin: f64 = g.iter().zip(d).map(|(a, b)| (a * b).abs()).sum();
        Ok(ROUNDING_FACTOR * f64::EPSILON * (bnd + lin))
    }

    /// `J(v) = Σ wᵢ j(v_n(xᵢ))`
    /// Traces are snapped onto kinks first (see [`snap_to_kinks`]).
    pub fn boundary_term(&self, v: &[f64]) -> Result<f64> {
        let space = self.forms.space();
        let mut s = space.normal_trace(v)?;
        let scale = linalg::max_abs(&s).max(1.0);
        snap_to_kinks(&self.sp, &mut s, scale);
        Ok(space.boundary().weights.iter().zip(&s).map(|(w, &x)| w * self.sp.value(x)).sum())
    }

    /// Smallest prox-gradient mapping norm resolvable in double precision
    /// at `v`: a small multiple of the unit roundoff times the V*-size of the
    /// gradient's terms.
    pub fn rounding_floor(&self, v: &[f64]) -> Result<f64> {
        let space = self.forms.space();
        let pf = forms::evaluate(space, v)?;
        let ModelParams { beta, kappa, r, q, .. } = self.params;
        let coef: Vec<[f64; 2]> = pf
            .u
            .iter()
            .map(|u| {
                let nrm = u[0].hypot(u[1]);
                if nrm == 0.0 {
                    return [0.0, 0.0];
                }
                let s = beta * nrm.powf(r - 1.0) + kappa.abs() * nrm.powf(q - 1.0);
                [s * u[0], s * u[1]]
            })
            .collect();
        let power = forms::assemble(space, &coef, None);
        let qv = linalg::matvec(&self.geometry.q, v);
        let size = self.forms.dual_norm(&qv) + self.forms.dual_norm(&power) + self.forms.dual_norm(&self.load);
        Ok(ROUNDING_FACTOR * f64::EPSILON * size)
    }

    /// `E(v)`
    pub fn value(&self, v: &[f64]) -> Result<f64> {
        Ok(self.smooth(v)?.0 + self.boundary_term(v)?)
    }

    /// Minimizer of `⟨g, z⟩ + ‖z − x‖²_H/(2τ) + J(z)`.
    fn prox_step(&self, x: &[f64], g: &[f64], tau: f64) -> Result<Vec<f64>> {
        let geo = &*self.geometry;
        let (n, k) = (x.len(), geo.k);
        let mut z = vec![0.0; n];
        if let Some(qyy) = &geo.qyy {
            let dy = qyy.solve(&g[k..]);
            for i in k..n {
                z[i] = x[i] - tau * dy[i - k];
            }
        }
        if k == 0 {
            return Ok(z);
        }
        let step = tau / geo.gamma;
        let sx = geo.traces(x);
        let gs = geo.trace_gradient(&g[..k]);
        let target: Vec<f64> =
            sx.iter().zip(&gs).zip(&geo.weights).map(|((s, g), w)| s - step * g / w).collect();
        let s = match &geo.constraint {
            None => target.iter().map(|&t| self.sp.prox(1.0, t, step)).collect::<Result<Vec<_>>>()?,
            Some(c) => self.constrained_prox(&target, c, step)?,
        };
        z[..k].copy_from_slice(&geo.coefficients(&s));
        Ok(z)
    }

    /// Nodewise prox with a multiplier enforcing `cᵀs = 0`, found by bisection
    /// on the monotone map `λ ↦ cᵀs(λ)`.
    fn constrained_prox(&self, target: &[f64], c: &[f64], step: f64) -> Result<Vec<f64>> {
        let w = &self.geometry.weights;
        let eval = |lam: f64| -> Result<(Vec<f64>, f64)> {
            let s = (0..target.len())
                .map(|i| self.sp.prox(1.0, target[i] - step * lam * c[i] / w[i], step))
                .collect::<Result<Vec<_>>>()?;
            let h = linalg::dot(c, &s);
            Ok((s, h))
        };
        let (s0, h0) = eval(0.0)?;
        let mut s = if h0 == 0.0 {
            s0
        } else {
            let dir = h0.signum();
            let wmax = w.iter().cloned().fold(0.0, f64::max);
            let mut delta = (h0.abs() * wmax / step).max(f64::MIN_POSITIVE);
            let (mut lo, mut hi) = (0.0, delta);
            let mut found = false;
            for _ in 0..2100 {
                let (_, h) = eval(dir * hi)?;
                if h * dir <= 0.0 {
                    found = true;
                    break;
                }
                lo = hi;
                delta *= 2.0;
                hi += delta;
            }
            if !found {
                return Err(Error::Linalg("flux multiplier bracket not found".into()));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (_, h) = eval(dir * mid)?;
                if h * dir > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            eval(dir * 0.5 * (lo + hi))?.0
        };
        let h = linalg::dot(c, &s);
        linalg::axpy(-h, c, &mut s);
        Ok(s)
    }

    /// `F(x + d) − F(x)`, evaluated from the increment so that it stays
    /// accurate when `d` is far below the rounding level of `F(x)`.
    pub fn smooth_change(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        let n = self.dim();
        check_len(n, x.len())?;
        check_len(n, d.len())?;
        let space = self.forms.space();
        let px = forms::evaluate(space, x)?;
        let pd = forms::evaluate(space, d)?;
        let wts = forms::qp_weights(space);
        let ModelParams { beta, kappa, r, q, .. } = self.params;
        let mut power = 0.0;
        for i in 0..wts.len() {
            let (u, du) = (px.u[i], pd.u[i]);
            let b = u[0].hypot(u[1]);
            let a = (u[0] + du[0]).hypot(u[1] + du[1]);
            let sum = a + b;
            let diff = if sum > 0.0 { (du[0] * (2.0 * u[0] + du[0]) + du[1] * (2.0 * u[1] + du[1])) / sum } else { 0.0 };
            let mut term = beta * pow_change(b, diff, r + 1.0) / (r + 1.0);
            if kappa != 0.0 {
                term += kappa * pow_change(b, diff, q + 1.0) / (q + 1.0);
            }
            power += wts[i] * term;
        }
        let mid: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + 0.5 * b).collect();
        let quad = linalg::dot(&linalg::matvec(&self.geometry.q, &mid), d) - linalg::dot(&self.load, d);
        Ok(quad + power)
    }

    /// `J(x + d) − J(x)`, evaluated from the increment.
    pub fn boundary_change(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        let space = self.forms.space();
        let sx = space.normal_trace(x)?;
        let sd = space.normal_trace(d)?;
        let w = &space.boundary().weights;
        let mut a = sx.clone();
        let mut b: Vec<f64> = sx.iter().zip(&sd).map(|(x, d)| x + d).collect();
        let scale = linalg::max_abs(&a).max(linalg::max_abs(&b)).max(1.0);
        snap_to_kinks(&self.sp, &mut a, scale);
        snap_to_kinks(&self.sp, &mut b, scale);
        Ok((0..sx.len())
            .map(|i| {
                let ds = if a[i] == sx[i] && b[i] == sx[i] + sd[i] { sd[i] } else { b[i] - a[i] };
                w[i] * j_change(&self.sp, a[i], ds)
            })
            .sum())
    }

    /// `E(x + d) − E(x)`
    pub fn change(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        Ok(self.smooth_change(x, d)? + self.boundary_change(x, d)?)
    }

    /// Accepted step `(z, F(z) − F(x), τ)` from `x` with gradient `g`,
    /// halving `τ` until the quadratic upper model holds.
    fn backtrack(&self, x: &[f64], g: &[f64], mut tau: f64) -> Result<(Vec<f64>, f64, f64)> {
        loop {
            if tau < MIN_STEP {
                return Err(Error::StepTooLarge(tau));
            }
            let z = match self.prox_step(x, g, tau) {
                Ok(z) => z,
                Err(Error::StepTooLarge(_)) => {
                    tau *= SHRINK;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let d = linalg::sub(&z, x);
            let df = self.smooth_change(x, &d)?;
            let model = linalg::dot(g, &d) + self.geometry.metric_sq(&d) / (2.0 * tau);
            if df <= model + 1e-12 * model.abs() {
                return Ok((z, df, tau));
            }
            tau *= SHRINK;
        }
    }
}

/// Moves traces lying within `KINK_SNAP · scale` of a kink onto it, so that
/// rounding in the trace map cannot leave an exact kink.
pub fn snap_to_kinks(sp: &Superpotential, s: &mut [f64], scale: f64) {
    for x in s.iter_mut() {
        for &kink in sp.kinks() {
            if (*x - kink).abs() <= KINK_SNAP * scale {
                *x = kink;
            }
        }
    }
}

/// `(b + δ)^p − b^p` for `b ≥ 0`, `b + δ ≥ 0`.
fn pow_change(b: f64, delta: f64, p: f64) -> f64 {
    let a = b + delta;
    if b == 0.0 || a <= 0.0 {
        return a.max(0.0).powf(p) - b.powf(p);
    }
    b.powf(p) * (p * (delta / b).ln_1p()).exp_m1()
}

/// `j(s + ds) − j(s)`
fn j_change(sp: &Superpotential, s: f64, ds: f64) -> f64 {
    let z = s + ds;
    match *sp {
        Superpotential::Quadratic { c } => c * ds * (s + 0.5 * ds),
        Superpotential::AbsVal { c } => {
            if s >= 0.0 && z >= 0.0 {
                c * ds
            } else if s <= 0.0 && z <= 0.0 {
                -c * ds
            } else {
                c * (z.abs() - s.abs())
            }
        }
        Superpotential::CosNonconvex { delta } => {
            ds * (s + 0.5 * ds) + 2.0 * delta * (s + 0.5 * ds).sin() * (0.5 * ds).sin()
        }
        Superpotential::JumpDown { .. } => sp.value(z) - sp.value(s),
    }
}

/// Outcome of [`minimize_energy`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub v: Vec<f64>,
    pub iterations: usize,
    /// V-norm of the prox-gradient mapping at the last checked iterate; `v`
    /// is the prox step taken from it whenever that step did not raise `E`.
    pub final_decrement: f64,
    pub energy: f64,
    /// Energy of every accepted iterate, starting with `E(v0)` and advanced by
    /// the exact increments.
    pub energy_history: Vec<f64>,
    pub certified: bool,
}

/// Monotone FISTA with backtracking; stops once the prox-gradient mapping at
/// the current iterate is below `tol` in the V-norm, or below the rounding
/// floor of [`DiscreteEnergy::rounding_floor`] when that is larger.
pub fn minimize_energy(energy: &DiscreteEnergy, v0: &[f64], tol: f64, max_iter: usize) -> Result<InnerSolution> {
    check_len(energy.dim(), v0.len())?;
    let forms = energy.forms;
    let mut x = v0.to_vec();
    // running energy of the accepted sequence, advanced by exact increments
    let mut ex = energy.value(&x)?;
    let mut history = vec![ex];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut tau = 0.5;
    let mut last_mapping = f64::INFINITY;

    for it in 1..=max_iter {
        let (_, gy) = energy.smooth(&y)?;
        let (z, _, tau_used) = energy.backtrack(&y, &gy, tau)?;
        let proxy = forms.norm_v(&linalg::sub(&z, &y)) / tau_used;
        let de = energy.change(&x, &linalg::sub(&z, &x))?;

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = de <= 0.0;
        if accepted {
            let x_prev = std::mem::replace(&mut x, z);
            ex += de;
            history.push(ex);
            y = x.clone();
            for i in 0..y.len() {
                y[i] += ((t - 1.0) / t_next) * (x[i] - x_prev[i]);
            }
            t = t_next;
        } else {
            // restart from the best point
            t = 1.0;
            y = x.clone();
        }
        tau = (tau_used * GROW).min(1.0);

        if proxy <= tol || !accepted {
            let (_, gx) = energy.smooth(&x)?;
            let (zx, _, tx) = energy.backtrack(&x, &gx, tau)?;
            let dx = linalg::sub(&zx, &x);
            let gm = forms.norm_v(&dx) / tx;
            last_mapping = gm;
            let de = energy.change(&x, &dx)?;
            // a rejected step whose increase is pure rounding leaves nothing
            // to gain in double precision
            let stalled = de > 0.0 && de <= energy.change_noise(&x, &gx, &dx)?;
            let converged = stalled || gm <= tol.max(energy.rounding_floor(&x)?);
            if de <= 0.0 {
                x = zx;
                ex += de;
                history.push(ex);
                y = x.clone();
                t = 1.0;
            }
            if converged {
                let e = energy.value(&x)?;
                return Ok(InnerSolution {
                    v: x,
                    iterations: it,
                    final_decrement: gm,
                    energy: e,
                    energy_history: history,
                    certified: energy.certified,
                });
            }
        }
    }
    Err(Error::MaxIterExceeded { iterations: max_iter, residual: last_mapping, best: x })
}

/// Largest violation of the hemivariational inequality at `v` over the
/// `±` coordinate directions and `n_directions` random directions, all of unit
/// V-norm; clipped below at 0.
pub fn hvi_residual(energy: &DiscreteEnergy, v: &[f64], n_directions: usize, seed: u64) -> Result<f64> {
    let n = energy.dim();
    check_len(n, v.len())?;
    let forms = energy.forms;
    let space = forms.space();
    let (_, g) = energy.smooth(v)?;
    let weights = &space.boundary().weights;
    let mut s = space.normal_trace(v)?;
    let scale = linalg::max_abs(&s).max(1.0);
    snap_to_kinks(&energy.sp, &mut s, scale);

    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * n + n_directions);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let nv = forms.norm_v(&e);
        if nv > 0.0 {
            dirs.push(linalg::scale(1.0 / nv, &e));
            dirs.push(linalg::scale(-1.0 / nv, &e));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_directions {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = forms.norm_v(&d);
        if nv > 0.0 {
            dirs.push(linalg::scale(1.0 / nv, &d));
        }
    }

    let mut worst = 0.0f64;
    for d in &dirs {
        let td = space.normal_trace(d)?;
        let j0: f64 = weights.iter().zip(s.iter().zip(&td)).map(|(w, (&a, &b))| w * energy.sp.j0(a, b)).sum();
        worst = worst.max(-linalg::dot(&g, d) - j0);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_reduced_space, generate_mesh, Domain};

    fn forms(n: usize) -> AssembledForms {
        let mesh = generate_mesh(Domain::UnitSquare, n, n).unwrap();
        AssembledForms::new(build_reduced_space(&mesh, 1).unwrap()).unwrap()
    }

    fn params(kappa: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, kappa, 3.0, 2.0).unwrap()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_data_gives_zero_minimizer() {
        let fm = forms(3);
        let zero = vec![0.0; fm.dim()];
        let e = build_energy(&fm, Superpotential::Quadratic { c: 1.0 }, params(0.0), &zero, &zero).unwrap();
        assert_eq!(e.load(), &zero[..]);
        assert_eq!(e.value(&zero).unwrap(), 0.0);
        let sol = minimize_energy(&e, &random(fm.dim(), 1), 1e-9, 5000).unwrap();
        assert!(fm.norm_v(&sol.v) <= 1e-9, "{}", fm.norm_v(&sol.v));
    }

    #[test]
    fn smooth_gradient_matches_finite_differences() {
        let fm = forms(2);
        let n = fm.dim();
        let e = build_energy(&fm, Superpotential::Quadratic { c: 0.0 }, params(-0.5), &random(n, 2), &random(n, 3))
            .unwrap();
        let v = random(n, 4);
        let d = random(n, 5);
        let (_, g) = e.smooth(&v).unwrap();
        let h = 1e-6;
        let fp = e.smooth(&linalg::add(&v, &linalg::scale(h, &d))).unwrap().0;
        let fm_ = e.smooth(&linalg::sub(&v, &linalg::scale(h, &d))).unwrap().0;
        let fd = (fp - fm_) / (2.0 * h);
        assert!((fd - linalg::dot(&g, &d)).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn accepted_energies_never_increase() {
        let fm = forms(3);
        let n = fm.dim();
        let e = build_energy(&fm, Superpotential::AbsVal { c: 0.3 }, params(-0.2), &random(n, 6), &vec![0.0; n])
            .unwrap();
        let sol = minimize_energy(&e, &vec![0.0; n], 1e-8, 5000).unwrap();
        for w in sol.energy_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(hvi_residual(&e, &sol.v, 20, 1).unwrap() <= 1e-6);
    }

    #[test]
    fn nonsmooth_prox_respects_flux_constraint() {
        let fm = forms(3);
        let n = fm.dim();
        let e = build_energy(&fm, Superpotential::AbsVal { c: 1.0 }, params(0.0), &vec![0.0; n], &vec![0.0; n])
            .unwrap();
        let x = random(n, 7);
        let g = random(n, 8);
        let z = e.prox_step(&x, &g, 0.3).unwrap();
        assert_eq!(z.len(), n);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cos_nonconvex_two_starts_agree() {
        let fm = forms(3);
        let n = fm.dim();
        let p = ModelParams::new(1.0, 4.0, 1.0, 0.0, 3.0, 2.0).unwrap();
        let e = build_energy(&fm, Superpotential::CosNonconvex { delta: 2.0 }, p, &random(n, 9), &vec![0.0; n])
            .unwrap();
        let a = minimize_energy(&e, &vec![0.0; n], 1e-9, 20000).unwrap();
        let b = minimize_energy(&e, &linalg::scale(3.0, &random(n, 10)), 1e-9, 20000).unwrap();
        assert!(e.is_certified());
        assert!(fm.norm_v(&linalg::sub(&a.v, &b.v)) <= 1e-6);
    }

    #[test]
    fn residual_registers_perturbation() {
        let fm = forms(2);
        let n = fm.dim();
        let e = build_energy(&fm, Superpotential::AbsVal { c: 0.5 }, params(0.0), &random(n, 11), &vec![0.0; n])
            .unwrap();
        let sol = minimize_energy(&e, &vec![0.0; n], 1e-10, 10000).unwrap();
        assert!(hvi_residual(&e, &sol.v, 10, 2).unwrap() <= 1e-8);
        let bad = linalg::add(&sol.v, &linalg::scale(5.0, &random(n, 12)));
        assert!(hvi_residual(&e, &bad, 10, 2).unwrap() > 0.0);
    }

    #[test]
    fn jump_down_is_uncertified() {
        let fm = forms(2);
        let n = fm.dim();
        let e = build_energy(&fm, Superpotential::JumpDown { gap: 1.0 }, params(0.0), &vec![0.0; n], &vec![0.0; n])
            .unwrap();
        assert!(!e.is_certified());
    }

    #[test]
    fn rejects_bad_lengths() {
        let fm = forms(2);
        let n = fm.dim();
        let r = build_energy(&fm, Superpotential::AbsVal { c: 0.5 }, params(0.0), &vec![0.0; n + 1], &vec![0.0; n]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
