//! Model parameters, spectral constants and the well-posedness regime checks.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::{self, AssembledForms};
use crate::linalg;
use crate::par;

/// Coefficients `(μ, α, β, κ, r, q)` of the damped and pumped flow model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Viscosity `μ > 0`.
    pub mu: f64,
    /// Darcy coefficient `α > 0`.
    pub alpha: f64,
    /// Forchheimer coefficient `β > 0`.
    pub beta: f64,
    /// Pumping coefficient `κ ≤ 0`.
    pub kappa: f64,
    /// Absorption exponent `r ≥ 1`.
    pub r: f64,
    /// Pumping exponent `1 ≤ q < r` (unchecked against `r` when `κ = 0`).
    pub q: f64,
}

impl ModelParams {
    pub fn new(mu: f64, alpha: f64, beta: f64, kappa: f64, r: f64, q: f64) -> Result<Self> {
        let p = Self { mu, alpha, beta, kappa, r, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let all = [self.mu, self.alpha, self.beta, self.kappa, self.r, self.q];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.kappa > 0.0 {
            return bad("kappa must be <= 0");
        }
        if !(self.r >= 1.0 && self.q >= 1.0) {
            return bad("exponents must satisfy r >= 1 and q >= 1");
        }
        // q only enters through the κ-term
        if self.kappa != 0.0 && !(self.q < self.r) {
            return bad("exponents must satisfy q < r when kappa != 0");
        }
        Ok(())
    }

    /// `μ − m/λ₀`
    pub fn effective_viscosity(&self, lambda0: f64, m: f64) -> f64 {
        self.mu - m / lambda0
    }
}

/// `x^e` with the convention `0⁰ = 1`.
fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 { 1.0 } else { x.powf(e) }
}

/// Damping threshold `ϱ_{θ,r}`; `θ = 1` gives `ϱ_r`.
pub fn varrho(p: &ModelParams, theta: f64) -> Result<f64> {
    if !(p.r > 1.0 && p.r > p.q && p.q >= 1.0) {
        return Err(Error::InvalidParams(format!("varrho needs r > 1 and r > q >= 1 (r = {}, q = {})", p.r, p.q)));
    }
    if !(theta > 0.0 && theta <= 2.0 && p.beta > 0.0) {
        return Err(Error::InvalidParams(format!("varrho needs 0 < theta <= 2 and beta > 0 (theta = {theta})")));
    }
    let (r, q) = (p.r, p.q);
    let k = p.kappa.abs();
    let a = 2.0 * (r - q) / (r - 1.0);
    let b = pow0(4.0 * (q - 1.0) / (theta * p.beta * (r - 1.0)), (q - 1.0) / (r - q));
    let c = pow0(k * q * 2f64.powf(q - 1.0), (r - 1.0) / (r - q));
    Ok(a * b * c)
}

/// Supercritical threshold `ϱ̂_{θ,r}`, defined for `r > 3`.
pub fn varrho_hat(p: &ModelParams, lambda0: f64, m: f64, theta: f64) -> Result<f64> {
    if !(p.r > 3.0) {
        return Err(Error::InvalidParams(format!("varrho_hat needs r > 3 (r = {})", p.r)));
    }
    if !(p.mu * lambda0 > m) {
        return Err(Error::InvalidParams("varrho_hat needs mu * lambda0 > m".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParams(format!("varrho_hat needs 0 < theta <= 1 (theta = {theta})")));
    }
    let r = p.r;
    let mu_eff = p.effective_viscosity(lambda0, m);
    Ok((1.0 / mu_eff).powf((r - 1.0) / (r - 3.0))
        * ((r - 3.0) / (r - 1.0))
        * (8.0 / (theta * p.beta * (r - 1.0))).powf(2.0 / (r - 3.0)))
}

/// `ρ = min{μ − m/λ₀, β/2^r}`
pub fn strong_monotonicity_constant(p: &ModelParams, lambda0: f64, m: f64) -> f64 {
    p.effective_viscosity(lambda0, m).min(p.beta / 2f64.powf(p.r))
}

/// Geometric and data inputs shared by the ball, contraction and global-regime
/// formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    pub lambda0: f64,
    pub cb: f64,
    /// Relaxed monotonicity constant of the superpotential.
    pub m: f64,
    /// Growth constant of the superpotential.
    pub c0: f64,
    /// `|Γ|`
    pub boundary_length: f64,
    /// `|O|`
    pub area: f64,
    /// `‖f‖_{V*}`
    pub f_norm: f64,
    /// Spatial dimension used for the branch logic (2 for this solver).
    pub dim: usize,
    /// Unnamed interpolation constant of the subcritical global condition.
    pub gn_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallConstants {
    pub rho_f: f64,
    pub sigma_f: f64,
    pub upsilon_f: f64,
    /// Left side of the smallness condition for the active branch; the
    /// condition reads `smallness <= bound`.
    pub smallness: f64,
    pub smallness_bound: f64,
    pub second_branch: bool,
}

/// Whether `r` lies beyond `(d+2)/(d−2)` (never in 2D).
pub fn is_second_branch(r: f64, dim: usize) -> bool {
    dim > 2 && r > (dim as f64 + 2.0) / (dim as f64 - 2.0)
}

/// `c₀|Γ|^{1/2}λ₀^{−1/2} + ‖f‖_{V*}`
pub fn data_size(inp: &ConstantInputs) -> f64 {
    inp.c0 * inp.boundary_length.sqrt() / inp.lambda0.sqrt() + inp.f_norm
}

pub fn ball_and_contraction(p: &ModelParams, inp: &ConstantInputs) -> Result<BallConstants> {
    if !(p.mu * inp.lambda0 > inp.m) {
        return Err(Error::InvalidParams("ball radius needs mu * lambda0 > m".into()));
    }
    let (r, q) = (p.r, p.q);
    let mu_eff = p.effective_viscosity(inp.lambda0, inp.m);
    let k = p.kappa.abs();
    let pump = if k == 0.0 { 0.0 } else { (2.0 * k.powf((r + 1.0) / (r - q)) * inp.area / mu_eff).sqrt() };
    let x = data_size(inp);
    let second_branch = is_second_branch(r, inp.dim);
    let mut braces = pump + 2f64.sqrt() * x / mu_eff;
    if second_branch {
        let kt = if k == 0.0 { 0.0 } else { k.powf(1.0 / (r - q)) * inp.area.powf(1.0 / (r + 1.0)) };
        braces += (2.0 / p.beta).sqrt() * (kt + x.powf(2.0 / (r + 1.0)) / mu_eff.powf(1.0 / (r + 1.0)));
    }
    let rho_f = 2.0 * braces;
    let sigma_f = 2f64.sqrt() * inp.cb * rho_f / mu_eff;
    let upsilon_f = pump + x / mu_eff;
    let (smallness, smallness_bound) = if second_branch {
        let s = sigma_f
            + (2.0 / p.beta).sqrt() * inp.cb.powf(2.0 / (r + 1.0)) * rho_f.powf((3.0 - r) / (r + 1.0))
                / mu_eff.powf(1.0 / (r + 1.0));
        (s, 0.5)
    } else {
        (2.0 * 2f64.sqrt() * inp.cb * rho_f, mu_eff)
    };
    Ok(BallConstants { rho_f, sigma_f, upsilon_f, smallness, smallness_bound, second_branch })
}

/// Right side of the uniform energy bound
/// `(μ−m/λ₀)‖u‖²_V + β‖u‖^{r+1}_{L^{r+1}} ≤ 2|κ|^{(r+1)/(r−q)}|O| + X²/(μ−m/λ₀)`.
pub fn uniform_bound_rhs(p: &ModelParams, inp: &ConstantInputs) -> f64 {
    let mu_eff = p.effective_viscosity(inp.lambda0, inp.m);
    let k = p.kappa.abs();
    let pump = if k == 0.0 { 0.0 } else { 2.0 * k.powf((p.r + 1.0) / (p.r - p.q)) * inp.area };
    pump + data_size(inp).powi(2) / mu_eff
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Smallness condition holds: the Picard map is a contraction on `K_f`.
    ContractionSmallData,
    /// `r ∈ [1, 3]` global condition (depends on the data through `υ_f`).
    GlobalSubcritical,
    /// `r > 3` global condition, independent of the data.
    GlobalSupercritical,
    Infeasible,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ContractionSmallData => "contraction_small_data",
            Regime::GlobalSubcritical => "global_subcritical",
            Regime::GlobalSupercritical => "global_supercritical",
            Regime::Infeasible => "infeasible",
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Regime::GlobalSubcritical | Regime::GlobalSupercritical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub lambda0: f64,
    pub cb: f64,
    pub mu_eff: f64,
    pub varrho_r: f64,
    pub varrho_2r: f64,
    pub varrho_half_r: f64,
    pub varrho_hat_half_r: Option<f64>,
    pub rho: f64,
    pub rho_f: f64,
    pub sigma_f: f64,
    pub upsilon_f: f64,
    pub smallness: f64,
    pub smallness_bound: f64,
    pub base_ok: bool,
    pub smallness_ok: bool,
    /// Global condition threshold on `α` for the branch matching `r`.
    pub global_alpha_threshold: f64,
    pub global_ok: bool,
    pub regime: Regime,
    pub reason: String,
}

impl ConstantsReport {
    /// Two-column `name,value` rows.
    pub fn rows(&self) -> Vec<(String, String)> {
        let f = |x: f64| format!("{x:e}");
        let b = |x: bool| if x { "true".to_string() } else { "false".to_string() };
        vec![
            ("lambda0".into(), f(self.lambda0)),
            ("C_b".into(), f(self.cb)),
            ("mu_eff".into(), f(self.mu_eff)),
            ("varrho_r".into(), f(self.varrho_r)),
            ("varrho_2_r".into(), f(self.varrho_2r)),
            ("varrho_half_r".into(), f(self.varrho_half_r)),
            ("varrho_hat_half_r".into(), self.varrho_hat_half_r.map_or("nan".into(), f)),
            ("rho".into(), f(self.rho)),
            ("rho_f".into(), f(self.rho_f)),
            ("sigma_f".into(), f(self.sigma_f)),
            ("upsilon_f".into(), f(self.upsilon_f)),
            ("smallness_lhs".into(), f(self.smallness)),
            ("smallness_rhs".into(), f(self.smallness_bound)),
            ("base_condition".into(), b(self.base_ok)),
            ("smallness_condition".into(), b(self.smallness_ok)),
            ("global_alpha_threshold".into(), f(self.global_alpha_threshold)),
            ("global_condition".into(), b(self.global_ok)),
            ("regime".into(), self.regime.as_str().into()),
            ("reason".into(), self.reason.clone()),
        ]
    }
}

/// Evaluates, in order, the base condition, the smallness condition and the
/// global-regime conditions, and reports which one fired.
pub fn regime_check(p: &ModelParams, inp: &ConstantInputs) -> ConstantsReport {
    let mu_eff = p.effective_viscosity(inp.lambda0, inp.m);
    let nan = f64::NAN;
    let varrho_r = varrho(p, 1.0).unwrap_or(nan);
    let varrho_2r = varrho(p, 2.0).unwrap_or(nan);
    let varrho_half_r = varrho(p, 0.5).unwrap_or(nan);
    let varrho_hat_half_r = if p.r > 3.0 { varrho_hat(p, inp.lambda0, inp.m, 0.5).ok() } else { None };
    let mut rep = ConstantsReport {
        lambda0: inp.lambda0,
        cb: inp.cb,
        mu_eff,
        varrho_r,
        varrho_2r,
        varrho_half_r,
        varrho_hat_half_r,
        rho: strong_monotonicity_constant(p, inp.lambda0, inp.m),
        rho_f: nan,
        sigma_f: nan,
        upsilon_f: nan,
        smallness: nan,
        smallness_bound: nan,
        base_ok: false,
        smallness_ok: false,
        global_alpha_threshold: nan,
        global_ok: false,
        regime: Regime::Infeasible,
        reason: String::new(),
    };

    // κ = 0 makes every ϱ vanish, including the r = 1 case where the closed
    // form is undefined
    let vr = if p.kappa == 0.0 { 0.0 } else { varrho_r };
    rep.base_ok = mu_eff > 0.0 && p.alpha > vr;
    if !rep.base_ok {
        rep.reason = if mu_eff > 0.0 {
            format!("base condition: alpha = {} <= varrho_r = {vr}", p.alpha)
        } else {
            format!("base condition: mu * lambda0 = {} <= m = {}", p.mu * inp.lambda0, inp.m)
        };
        return rep;
    }

    let ball = ball_and_contraction(p, inp).expect("base condition checked");
    rep.rho_f = ball.rho_f;
    rep.sigma_f = ball.sigma_f;
    rep.upsilon_f = ball.upsilon_f;
    rep.smallness = ball.smallness;
    rep.smallness_bound = ball.smallness_bound;
    rep.smallness_ok = ball.smallness <= ball.smallness_bound;

    let d = inp.dim as f64;
    let zero_kappa = |x: f64| if p.kappa == 0.0 { 0.0 } else { x };
    if p.r <= 3.0 {
        let t = zero_kappa(varrho_2r)
            + inp.gn_constant * ball.upsilon_f.powf(8.0 / (4.0 - d)) / mu_eff.powf((4.0 + d) / (4.0 - d));
        rep.global_alpha_threshold = t;
        rep.global_ok = p.alpha > t;
    } else {
        let t = zero_kappa(varrho_half_r) + varrho_hat_half_r.unwrap_or(f64::INFINITY);
        let alt = p.beta > 2.0 / mu_eff && p.alpha > zero_kappa(varrho_2r) + 1.0 / mu_eff;
        rep.global_alpha_threshold = t;
        rep.global_ok = p.alpha > t || alt;
    }

    if rep.smallness_ok {
        rep.regime = Regime::ContractionSmallData;
        rep.reason = format!("smallness condition: {:e} <= {:e}", ball.smallness, ball.smallness_bound);
    } else if rep.global_ok {
        rep.regime = if p.r <= 3.0 { Regime::GlobalSubcritical } else { Regime::GlobalSupercritical };
        rep.reason = format!("global condition: alpha = {} > {:e}", p.alpha, rep.global_alpha_threshold);
    } else {
        rep.reason = format!(
            "smallness condition fails ({:e} > {:e}) and global condition fails (alpha threshold {:e})",
            ball.smallness, ball.smallness_bound, rep.global_alpha_threshold
        );
    }
    rep
}

/// Smallest `λ` with `∫ |curl v|² = λ Σ wᵢ v_n(xᵢ)²` over fields with nonzero
/// trace.
pub fn principal_eigenvalue(forms: &AssembledForms) -> Result<f64> {
    forms.lambda0()
}

pub(crate) fn compute_principal_eigenvalue(forms: &AssembledForms) -> Result<f64> {
    let space = forms.space();
    let t = space.trace_matrix();
    let w = &space.boundary().weights;
    let nb = t.nrows();
    if space.trace_rank() == 0 {
        return Err(Error::NoBoundaryDofs);
    }
    // λ₀⁻¹ = λ_max(W^{1/2} T K⁻¹ Tᵀ W^{1/2})
    let tt = Mat::from_fn(t.ncols(), nb, |i, j| t[(j, i)] * w[j].sqrt());
    let x = forms.k_factor().solve_mat(&tt);
    let mut g = tt.transpose() * &x;
    linalg::symmetrize(&mut g);
    let ev = linalg::sym_eigenvalues(&g)?;
    let top = ev.last().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::NoBoundaryDofs);
    }
    Ok(1.0 / top)
}

/// `Σ wᵢ v_n(xᵢ)²`
pub fn trace_norm_sq(forms: &AssembledForms, v: &[f64]) -> Result<f64> {
    let s = forms.space().normal_trace(v)?;
    Ok(forms.space().boundary().weights.iter().zip(&s).map(|(w, x)| w * x * x).sum())
}

fn random_unit(forms: &AssembledForms, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..forms.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = forms.norm_v(&v);
    linalg::scale(1.0 / n, &v)
}

/// `b(u, v, w)` and the three partial representers, used by the C_b search.
struct Trilinear<'a> {
    forms: &'a AssembledForms,
}

impl Trilinear<'_> {
    fn value(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        forms::eval_b(self.forms.space(), u, v, w).unwrap_or(0.0)
    }

    /// Maximizer over `‖x‖_V = 1` of the linear functional `g`, with sign
    /// chosen so that `gᵀx ≥ 0`.
    fn maximize(&self, g: &[f64]) -> Option<Vec<f64>> {
        let x = self.forms.k_factor().solve(g);
        let n = linalg::dot(g, &x).max(0.0).sqrt();
        (n > 0.0).then(|| linalg::scale(1.0 / n, &x))
    }

    fn step(&self, u: &mut Vec<f64>, v: &mut Vec<f64>, w: &mut Vec<f64>) {
        let space = self.forms.space();
        let pv = forms::evaluate(space, v).unwrap();
        let pw = forms::evaluate(space, w).unwrap();
        let cross: Vec<f64> = pv.u.iter().zip(&pw.u).map(|(a, b)| a[0] * b[1] - a[1] * b[0]).collect();
        let zeros = vec![[0.0, 0.0]; cross.len()];
        if let Some(x) = self.maximize(&forms::assemble(space, &zeros, Some(&cross))) {
            *u = x;
        }
        let pu = forms::evaluate(space, u).unwrap();
        let pw = forms::evaluate(space, w).unwrap();
        let cv: Vec<[f64; 2]> = pu.curl.iter().zip(&pw.u).map(|(c, b)| [c * b[1], -c * b[0]]).collect();
        if let Some(x) = self.maximize(&forms::assemble(space, &cv, None)) {
            *v = x;
        }
        let pv = forms::evaluate(space, v).unwrap();
        let cw: Vec<[f64; 2]> = pu.curl.iter().zip(&pv.u).map(|(c, a)| [-c * a[1], c * a[0]]).collect();
        if let Some(x) = self.maximize(&forms::assemble(space, &cw, None)) {
            *w = x;
        }
    }
}

/// Number of alternating maximization sweeps applied to the best sample.
pub const CB_SWEEPS: usize = 50;

/// Sampled lower estimate of `sup |b(u,v,w)| / (‖u‖_V ‖v‖_V ‖w‖_V)`.
pub fn estimate_cb(forms: &AssembledForms, n_samples: usize, seed: u64) -> f64 {
    let tri = Trilinear { forms };
    let samples = par::map_range(n_samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let u = random_unit(forms, &mut rng);
        let v = random_unit(forms, &mut rng);
        let w = random_unit(forms, &mut rng);
        let val = tri.value(&u, &v, &w).abs();
        (val, u, v, w)
    });
    let mut best = 0.0f64;
    let mut start = None;
    for (val, u, v, w) in samples {
        if val > best || start.is_none() {
            best = best.max(val);
            start = Some((u, v, w));
        }
    }
    if let Some((mut u, mut v, mut w)) = start {
        for _ in 0..CB_SWEEPS {
            tri.step(&mut u, &mut v, &mut w);
            let val = tri.value(&u, &v, &w).abs();
            best = best.max(val);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_reduced_space, build_reduced_space_with, generate_mesh, BoundaryMode, Domain};

    fn params(beta: f64, kappa: f64, r: f64, q: f64) -> ModelParams {
        ModelParams { mu: 1.0, alpha: 1.0, beta, kappa, r, q }
    }

    #[test]
    fn varrho_hand_values() {
        assert!((varrho(&params(1.0, -1.0, 3.0, 2.0), 1.0).unwrap() - 32.0).abs() < 1e-12);
        let q1 = params(1.0, -0.7, 3.0, 1.0);
        for theta in [0.5, 1.0, 2.0] {
            assert!((varrho(&q1, theta).unwrap() - 1.4).abs() < 1e-14);
        }
        assert_eq!(varrho(&params(1.0, 0.0, 3.0, 2.0), 1.0).unwrap(), 0.0);
        assert!(varrho(&params(1.0, -1.0, 2.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn varrho_special_thetas_match_displayed_forms() {
        let p = params(1.7, -0.8, 4.0, 2.5);
        let (r, q, b, k) = (p.r, p.q, p.beta, p.kappa.abs());
        let tail = (k * q * 2f64.powf(q - 1.0)).powf((r - 1.0) / (r - q));
        let disp = |c: f64| 2.0 * (r - q) / (r - 1.0) * (c * (q - 1.0) / (b * (r - 1.0))).powf((q - 1.0) / (r - q)) * tail;
        assert!((varrho(&p, 2.0).unwrap() - disp(2.0)).abs() < 1e-12 * disp(2.0));
        assert!((varrho(&p, 0.5).unwrap() - disp(8.0)).abs() < 1e-12 * disp(8.0));
        assert!((varrho(&p, 1.0).unwrap() - disp(4.0)).abs() < 1e-12 * disp(4.0));
        let hat = varrho_hat(&p, 2.0, 0.5, 0.5).unwrap();
        let mu_eff: f64 = 1.0 - 0.25;
        let want = (1.0 / mu_eff).powf(3.0) * (1.0 / 3.0) * (16.0 / (b * 3.0)).powf(2.0);
        assert!((hat - want).abs() < 1e-12 * want);
    }

    #[test]
    fn varrho_hat_hand_value() {
        let p = ModelParams { mu: 1.0, alpha: 1.0, beta: 8.0, kappa: -1.0, r: 5.0, q: 2.0 };
        assert!((varrho_hat(&p, 3.7, 0.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(varrho_hat(&ModelParams { r: 3.0, ..p }, 1.0, 0.0, 1.0).is_err());
        assert!(varrho_hat(&p, 2.0, 2.0, 1.0).is_err());
    }

    fn inputs(f_norm: f64) -> ConstantInputs {
        ConstantInputs {
            lambda0: 1.0,
            cb: 1.0,
            m: 0.0,
            c0: 0.0,
            boundary_length: 4.0,
            area: 1.0,
            f_norm,
            dim: 2,
            gn_constant: 1.0,
        }
    }

    #[test]
    fn ball_hand_values() {
        let p = params(1.0, -1.0, 3.0, 2.0);
        let b = ball_and_contraction(&p, &inputs(0.0)).unwrap();
        assert!((b.rho_f - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let b = ball_and_contraction(&params(1.0, 0.0, 3.0, 2.0), &inputs(0.0)).unwrap();
        assert_eq!((b.rho_f, b.sigma_f), (0.0, 0.0));
        // σ_f = √2 C_b ρ_f / μ'
        let p0 = params(1.0, 0.0, 3.0, 2.0);
        let b = ball_and_contraction(&p0, &inputs(0.1 / (2.0 * 2f64.sqrt()))).unwrap();
        assert!((b.rho_f - 0.1).abs() < 1e-15);
        assert!((b.sigma_f - 0.141_421_356_237_309_5).abs() < 1e-12);
        let mut i2 = inputs(0.05);
        i2.cb = 2.0;
        let b2 = ball_and_contraction(&p0, &i2).unwrap();
        let b1 = ball_and_contraction(&p0, &inputs(0.05)).unwrap();
        assert_eq!(b2.sigma_f, 2.0 * b1.sigma_f);
    }

    #[test]
    fn regimes() {
        let mut inp = inputs(1e-3);
        inp.m = 2.0;
        assert_eq!(regime_check(&params(1.0, 0.0, 3.0, 2.0), &inp).regime, Regime::Infeasible);
        let rep = regime_check(&params(1.0, 0.0, 3.0, 2.0), &inputs(1e-3));
        assert_eq!(rep.regime, Regime::ContractionSmallData);
        assert!(rep.sigma_f < 1.0);
        let p = ModelParams { mu: 1.0, alpha: 50.0, beta: 4.0, kappa: -0.5, r: 5.0, q: 2.0 };
        let rep = regime_check(&p, &inputs(1e6));
        assert!(!rep.smallness_ok);
        assert_eq!(rep.regime, Regime::GlobalSupercritical);
    }

    #[test]
    fn eigenvalue_needs_trace() {
        let mesh = generate_mesh(Domain::UnitSquare, 2, 2).unwrap();
        let s = build_reduced_space_with(&mesh, 2, BoundaryMode::NoSlip).unwrap();
        let f = AssembledForms::new(s).unwrap();
        assert_eq!(principal_eigenvalue(&f).unwrap_err(), Error::NoBoundaryDofs);
    }

    #[test]
    fn eigenvalue_scales_inversely_with_size() {
        let mesh = generate_mesh(Domain::UnitSquare, 4, 4).unwrap();
        let f1 = AssembledForms::new(build_reduced_space(&mesh, 2).unwrap()).unwrap();
        let f2 = AssembledForms::new(build_reduced_space(&mesh.scaled(2.0).unwrap(), 2).unwrap()).unwrap();
        let (l1, l2) = (principal_eigenvalue(&f1).unwrap(), principal_eigenvalue(&f2).unwrap());
        assert!((l2 / l1 - 0.5).abs() < 1e-9, "{l1} {l2}");
    }
}
