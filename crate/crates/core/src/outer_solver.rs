//! Picard iteration on the convection term, its error estimators, homotopy
//! continuation in the load, and the data-dependence check.

use crate::constants::{self, ConstantInputs, ConstantsReport, ModelParams};
use crate::error::{check_len, Error, Result};
use crate::forms::{self, AssembledForms};
use crate::inner_solver::{build_energy, hvi_residual, minimize_energy, DiscreteEnergy};
use crate::linalg;
use crate::superpotential::Superpotential;

/// Slack added to the uniform bound before it is declared violated.
pub const BOUND_SLACK: f64 = 1e-8;
/// Smallest homotopy step before giving up.
pub const MIN_HOMOTOPY_STEP: f64 = 1.0 / 1024.0;

/// Everything fixed across the solves of one model: the assembled space, the
/// coefficients, the superpotential and the discrete constants.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSetup<'a> {
    pub forms: &'a AssembledForms,
    pub params: ModelParams,
    pub sp: Superpotential,
    /// Discrete trilinear constant (usually from `estimate_cb`).
    pub cb: f64,
    /// Interpolation constant of the subcritical global condition.
    pub gn_constant: f64,
}

impl ProblemSetup<'_> {
    pub fn constant_inputs(&self, f: &[f64]) -> Result<ConstantInputs> {
        check_len(self.forms.dim(), f.len())?;
        let mesh = self.forms.space().mesh();
        let c = self.sp.declared_constants();
        Ok(ConstantInputs {
            lambda0: self.forms.lambda0()?,
            cb: self.cb,
            m: c.m,
            c0: c.c0,
            boundary_length: mesh.boundary_length(),
            area: mesh.area(),
            f_norm: self.forms.dual_norm(f),
            dim: 2,
            gn_constant: self.gn_constant,
        })
    }

    pub fn regime(&self, f: &[f64]) -> Result<ConstantsReport> {
        Ok(constants::regime_check(&self.params, &self.constant_inputs(f)?))
    }

    /// `(μ − m/λ₀)‖u‖²_V + β‖u‖^{r+1}_{L^{r+1}}` and the right side of the
    /// uniform bound for load `f`.
    pub fn uniform_bound(&self, f: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let inp = self.constant_inputs(f)?;
        let p = &self.params;
        let mu_eff = p.effective_viscosity(inp.lambda0, inp.m);
        let nv = self.forms.norm_v(u);
        let lr = forms::lp_norm(self.forms.space(), u, p.r + 1.0)?;
        let lhs = mu_eff * nv * nv + p.beta * lr.powf(p.r + 1.0);
        Ok((lhs, constants::uniform_bound_rhs(p, &inp)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target accuracy of the final iterate in the V-norm.
    pub tol: f64,
    pub kmax: usize,
    /// Prox-gradient mapping tolerance of each inner solve.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Run even when the contraction certificate fails.
    pub force: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, kmax: 200, inner_tol: 1e-11, inner_max_iter: 100_000, force: false }
    }
}

/// One Picard step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `‖u_k − u_{k−1}‖_V`
    pub step_v: f64,
    pub norm_v: f64,
    /// `‖u_k‖_{L^{r+1}}`
    pub norm_lr1: f64,
    /// Inner energy at `u_k` (convection frozen at `u_{k−1}`).
    pub energy: f64,
    pub inner_iters: usize,
    /// `σ/(1−σ)·‖u_k − u_{k−1}‖_V`
    pub apost: f64,
    /// `σ^k/(1−σ)·‖u_1 − u_0‖_V`
    pub apriori: f64,
}

pub const ITERATES_HEADER: &str = "k,step_V,norm_V,norm_Lr1,energy,inner_iters,apost,apriori";

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iterates: Vec<IterationRecord>,
    pub sigma_f: f64,
    pub rho_f: f64,
    pub converged: bool,
    pub constants: ConstantsReport,
}

impl IterationReport {
    pub fn iterates_csv(&self) -> String {
        let mut s = format!("{ITERATES_HEADER}\n");
        for r in &self.iterates {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{},{:e},{:e}\n",
                r.k, r.step_v, r.norm_v, r.norm_lr1, r.energy, r.inner_iters, r.apost, r.apriori
            ));
        }
        s
    }
}

/// `dof,value` rendering of a reduced field.
pub fn field_csv(u: &[f64]) -> String {
    let mut s = String::from("dof,value\n");
    for (i, v) in u.iter().enumerate() {
        s.push_str(&format!("{i},{v:e}\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub report: IterationReport,
    pub u: Vec<f64>,
}

/// Fixed-point iteration `u_k = Φ(u_{k−1})` where `Φ(w)` minimizes the energy
/// with convection frozen at `w`. Stops once the a-posteriori bound guarantees
/// `‖u_k − u*‖_V ≤ tol`.
pub fn picard_solve(setup: &ProblemSetup, f: &[f64], u0: Option<&[f64]>, opts: &SolverOptions) -> Result<PicardOutcome> {
    let constants = setup.regime(f)?;
    let sigma = constants.sigma_f;
    if !(sigma < 1.0) && !opts.force {
        return Err(Error::NotContractive(sigma));
    }
    let n = setup.forms.dim();
    let u0 = match u0 {
        Some(u) => {
            check_len(n, u.len())?;
            u.to_vec()
        }
        None => vec![0.0; n],
    };
    let base = build_energy(setup.forms, setup.sp, setup.params, f, &u0)?;
    picard_from(setup, &base, f, u0, opts, constants)
}

fn picard_from(
    setup: &ProblemSetup,
    base: &DiscreteEnergy,
    f: &[f64],
    u0: Vec<f64>,
    opts: &SolverOptions,
    constants: ConstantsReport,
) -> Result<PicardOutcome> {
    let forms = setup.forms;
    let sigma = constants.sigma_f;
    let contractive = sigma < 1.0;
    let threshold = if contractive { opts.tol * (1.0 - sigma) / sigma.max(1e-16) } else { opts.tol };
    let mut report = IterationReport {
        iterates: Vec::new(),
        sigma_f: sigma,
        rho_f: constants.rho_f,
        converged: false,
        constants,
    };
    let mut prev = u0;
    let mut first_step = f64::NAN;
    for k in 1..=opts.kmax {
        let energy = base.with_load(f, &prev)?;
        let sol = minimize_energy(&energy, &prev, opts.inner_tol, opts.inner_max_iter)?;
        let step = forms.norm_v(&linalg::sub(&sol.v, &prev));
        if k == 1 {
            first_step = step;
        }
        let (apost, apriori) = if contractive {
            (sigma / (1.0 - sigma) * step, sigma.powi(k as i32) / (1.0 - sigma) * first_step)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        report.iterates.push(IterationRecord {
            k,
            step_v: step,
            norm_v: forms.norm_v(&sol.v),
            norm_lr1: forms::lp_norm(forms.space(), &sol.v, setup.params.r + 1.0)?,
            energy: sol.energy,
            inner_iters: sol.iterations,
            apost,
            apriori,
        });
        prev = sol.v;
        if step <= threshold {
            report.converged = true;
            return Ok(PicardOutcome { report, u: prev });
        }
    }
    let residual = report.iterates.last().map_or(f64::NAN, |r| r.step_v);
    Err(Error::MaxIterExceeded { iterations: opts.kmax, residual, best: prev })
}

/// Residual of the full (non-frozen) hemivariational inequality at `u`.
pub fn full_residual(setup: &ProblemSetup, f: &[f64], u: &[f64], n_directions: usize, seed: u64) -> Result<f64> {
    let e = build_energy(setup.forms, setup.sp, setup.params, f, u)?;
    hvi_residual(&e, u, n_directions, seed)
}

/// One accepted continuation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomotopyStep {
    pub t: f64,
    pub picard_iters: usize,
    pub norm_v: f64,
    /// Left and right sides of the uniform bound at this `t`.
    pub bound_lhs: f64,
    pub bound_rhs: f64,
}

pub const HOMOTOPY_HEADER: &str = "t,picard_iters,norm_V,bound_lhs,bound_rhs";

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyReport {
    pub steps: Vec<HomotopyStep>,
    /// Picard report of the final `t = 1` solve.
    pub last: IterationReport,
    pub u: Vec<f64>,
}

impl HomotopyReport {
    pub fn steps_csv(&self) -> String {
        let mut s = format!("{HOMOTOPY_HEADER}\n");
        for h in &self.steps {
            s.push_str(&format!("{:e},{},{:e},{:e},{:e}\n", h.t, h.picard_iters, h.norm_v, h.bound_lhs, h.bound_rhs));
        }
        s
    }
}

/// Continuation in `t` with load `t·f` on a uniform grid of `t_steps` steps,
/// warm-starting each solve from the previous one. A failed solve halves the
/// step, down to [`MIN_HOMOTOPY_STEP`]. The uniform bound is checked at every
/// accepted `t`.
pub fn homotopy_solve(setup: &ProblemSetup, f: &[f64], t_steps: usize, opts: &SolverOptions) -> Result<HomotopyReport> {
    if t_steps == 0 {
        return Err(Error::InvalidParams("homotopy needs at least one step".into()));
    }
    let full = setup.regime(f)?;
    if !full.regime.is_global() && !full.smallness_ok && !opts.force {
        return Err(Error::NotContractive(full.sigma_f));
    }
    let n = setup.forms.dim();
    let base = build_energy(setup.forms, setup.sp, setup.params, f, &vec![0.0; n])?;
    let inner = SolverOptions { force: true, ..*opts };
    // t is tracked as an integer multiple of the smallest allowed step
    let unit = (1.0 / MIN_HOMOTOPY_STEP) as usize * t_steps;
    let nominal = unit / t_steps;
    let min_h = t_steps;
    let mut h = nominal;
    let mut pos = 0usize;
    let mut u = vec![0.0; n];
    let mut steps = Vec::new();
    let mut last = None;
    while pos < unit {
        let next = (pos + h).min(unit);
        let t_next = next as f64 / unit as f64;
        let ft = linalg::scale(t_next, f);
        let constants = setup.regime(&ft)?;
        match picard_from(setup, &base, &ft, u.clone(), &inner, constants) {
            Ok(out) => {
                let (lhs, rhs) = setup.uniform_bound(&ft, &out.u)?;
                if !(lhs <= rhs + BOUND_SLACK) {
                    return Err(Error::BoundViolated { t: t_next, lhs, rhs });
                }
                steps.push(HomotopyStep {
                    t: t_next,
                    picard_iters: out.report.iterates.len(),
                    norm_v: setup.forms.norm_v(&out.u),
                    bound_lhs: lhs,
                    bound_rhs: rhs,
                });
                pos = next;
                u = out.u;
                last = Some(out.report);
                h = (2 * h).min(nominal);
            }
            Err(Error::MaxIterExceeded { .. } | Error::StepTooLarge(_)) if h / 2 >= min_h => {
                h /= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(HomotopyReport { steps, last: last.expect("at least one step"), u })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataDependence {
    /// `‖u₁ − u₂‖_V`
    pub distance: f64,
    /// `√2·‖f₁ − f₂‖_{V*}/(μ − m/λ₀)`
    pub bound: f64,
    /// `distance ≤ bound + 2·tol`
    pub holds: bool,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Solves for two loads and checks
/// `(μ − m/λ₀)/2·‖u₁ − u₂‖²_V ≤ ‖f₁ − f₂‖²_{V*}/(μ − m/λ₀)`, allowing the
/// solve tolerance on the distance.
pub fn data_dependence_check(setup: &ProblemSetup, f1: &[f64], f2: &[f64], opts: &SolverOptions) -> Result<DataDependence> {
    let u1 = picard_solve(setup, f1, None, opts)?.u;
    let u2 = picard_solve(setup, f2, None, opts)?.u;
    let inp = setup.constant_inputs(f1)?;
    let mu_eff = setup.params.effective_viscosity(inp.lambda0, inp.m);
    let distance = setup.forms.norm_v(&linalg::sub(&u1, &u2));
    let bound = 2f64.sqrt() * setup.forms.dual_norm(&linalg::sub(f1, f2)) / mu_eff;
    Ok(DataDependence { distance, bound, holds: distance <= bound + 2.0 * opts.tol, u1, u2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_reduced_space, generate_mesh, Domain};

    fn forms(n: usize) -> AssembledForms {
        let mesh = generate_mesh(Domain::UnitSquare, n, n).unwrap();
        AssembledForms::new(build_reduced_space(&mesh, 1).unwrap()).unwrap()
    }

    fn setup(fm: &AssembledForms, sp: Superpotential) -> ProblemSetup<'_> {
        ProblemSetup {
            forms: fm,
            params: ModelParams::new(1.0, 1.0, 1.0, 0.0, 3.0, 1.0).unwrap(),
            sp,
            cb: constants::estimate_cb(fm, 16, 1),
            gn_constant: 1.0,
        }
    }

    fn vortex(fm: &AssembledForms, s: f64) -> Vec<f64> {
        forms::load_vector(fm.space(), |x, y| [-s * (y - 0.5), s * (x - 0.5)])
    }

    #[test]
    fn zero_problem_converges_at_once() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::Quadratic { c: 0.0 });
        let f = vec![0.0; fm.dim()];
        let out = picard_solve(&st, &f, None, &SolverOptions::default()).unwrap();
        assert_eq!(out.report.iterates.len(), 1);
        assert!(out.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn small_data_contracts() {
        let fm = forms(4);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let f = vortex(&fm, 0.5);
        let out = picard_solve(&st, &f, None, &SolverOptions::default()).unwrap();
        assert!(out.report.converged);
        assert!(out.report.sigma_f < 1.0);
        for w in out.report.iterates.windows(2).skip(1) {
            assert!(w[1].step_v <= 1.05 * w[0].step_v);
        }
        for r in &out.report.iterates {
            assert!(r.apriori >= r.apost - 1e-10);
        }
    }

    #[test]
    fn two_starts_agree() {
        let fm = forms(4);
        let st = setup(&fm, Superpotential::Quadratic { c: 0.5 });
        let f = vortex(&fm, 0.5);
        let opts = SolverOptions::default();
        let a = picard_solve(&st, &f, None, &opts).unwrap();
        let u0 = linalg::scale(0.1, &vec![1.0; fm.dim()]);
        let b = picard_solve(&st, &f, Some(&u0), &opts).unwrap();
        assert!(fm.norm_v(&linalg::sub(&a.u, &b.u)) <= 2.0 * opts.tol);
    }

    #[test]
    fn large_data_is_not_contractive() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let f = vortex(&fm, 1e4);
        assert!(matches!(picard_solve(&st, &f, None, &SolverOptions::default()), Err(Error::NotContractive(_))));
    }

    #[test]
    fn single_step_homotopy_matches_picard() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let f = vortex(&fm, 0.5);
        let opts = SolverOptions::default();
        let h = homotopy_solve(&st, &f, 1, &opts).unwrap();
        let p = picard_solve(&st, &f, None, &opts).unwrap();
        assert!(fm.norm_v(&linalg::sub(&h.u, &p.u)) <= 2.0 * opts.tol);
    }

    #[test]
    fn zero_load_homotopy_stays_at_zero() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::Quadratic { c: 0.0 });
        let f = vec![0.0; fm.dim()];
        let h = homotopy_solve(&st, &f, 4, &SolverOptions::default()).unwrap();
        assert_eq!(h.steps.len(), 4);
        assert!(h.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identical_loads_have_zero_distance() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let f = vortex(&fm, 0.5);
        let d = data_dependence_check(&st, &f, &f, &SolverOptions::default()).unwrap();
        assert_eq!(d.distance, 0.0);
        assert!(d.holds && d.bound >= 0.0);
    }

    #[test]
    fn homotopy_reaches_large_data() {
        let fm = forms(4);
        let mut st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        st.params = ModelParams::new(1.0, 5.0, 5.0, 0.0, 5.0, 1.0).unwrap();
        let f = vortex(&fm, 60.0);
        let rep = st.regime(&f).unwrap();
        assert!(!rep.smallness_ok && rep.regime.is_global());
        let h = homotopy_solve(&st, &f, 5, &SolverOptions::default()).unwrap();
        assert_eq!(h.steps.last().unwrap().t, 1.0);
        assert!(h.steps.iter().all(|s| s.bound_lhs <= s.bound_rhs));
        assert!(full_residual(&st, &f, &h.u, 16, 3).unwrap() <= 1e-6);
    }

    #[test]
    fn perturbed_and_doubled_loads_obey_the_bound() {
        let fm = forms(4);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let f = vortex(&fm, 0.5);
        let opts = SolverOptions::default();
        let mut g = f.clone();
        let last = g.len() - 1;
        g[last] += 1e-3;
        let d = data_dependence_check(&st, &f, &g, &opts).unwrap();
        assert!(d.holds && d.distance > 0.0, "{} {}", d.distance, d.bound);
        let d = data_dependence_check(&st, &f, &linalg::scale(2.0, &f), &opts).unwrap();
        assert!(d.holds);
    }

    #[test]
    fn csv_headers() {
        let fm = forms(3);
        let st = setup(&fm, Superpotential::AbsVal { c: 0.1 });
        let out = picard_solve(&st, &vortex(&fm, 0.5), None, &SolverOptions::default()).unwrap();
        let csv = out.report.iterates_csv();
        assert!(csv.starts_with("k,step_V,norm_V,norm_Lr1,energy,inner_iters,apost,apriori\n"));
        assert_eq!(csv.lines().count(), out.report.iterates.len() + 1);
        assert!(field_csv(&out.u).starts_with("dof,value\n0,"));
    }
}
