//! Brute-force checks at tiny scale: a dense minimizer that never touches the
//! proximal machinery, a seeded suite of the pointwise and integral
//! inequalities the analysis relies on, and the minimizer/HVI equivalence
//! check that ties the two together.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::ModelParams;
use crate::error::{Error, Result};
use crate::forms::{self, AssembledForms};
use crate::inner_solver::{build_energy, hvi_residual, minimize_energy, DiscreteEnergy};
use crate::linalg;
use crate::par;
use crate::superpotential::Superpotential;

pub const MAX_ORACLE_DIM: usize = 6;
/// Grid points per axis of the coarse search.
pub const GRID_POINTS: usize = 21;
/// Largest violation accepted by [`inequality_suite`].
pub const SUITE_TOLERANCE: f64 = 1e-9;

const MAX_SWEEPS: usize = 4000;
const ORACLE_SEED: u64 = 0x6f72_6163_6c65;

/// One restart of the dense oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub v: Vec<f64>,
    pub energy: f64,
}

/// Best point over a tensor grid search followed by `n_restarts` coordinate
/// descent polishes.
pub fn dense_minimize_oracle(energy: &DiscreteEnergy, n_restarts: usize, grid_half_width: f64) -> Result<Vec<f64>> {
    let runs = dense_multistart(energy, n_restarts, grid_half_width)?;
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.energy < a.energy { b } else { a })
        .expect("at least one run");
    Ok(best.v)
}

/// Every polished restart: the first starts from the best grid point, the
/// others from seeded uniform points in the grid box.
pub fn dense_multistart(energy: &DiscreteEnergy, n_restarts: usize, grid_half_width: f64) -> Result<Vec<OracleRun>> {
    let n = energy.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge { max: MAX_ORACLE_DIM, got: n });
    }
    if !(grid_half_width > 0.0 && grid_half_width.is_finite()) {
        return Err(Error::InvalidParams(format!("grid half width must be positive, got {grid_half_width}")));
    }
    let start = grid_search(energy, grid_half_width)?;
    let mut starts = vec![start];
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    for _ in 1..n_restarts.max(1) {
        starts.push((0..n).map(|_| rng.gen_range(-grid_half_width..=grid_half_width)).collect());
    }
    let runs = par::map_range(starts.len(), |i| polish(energy, starts[i].clone(), ORACLE_SEED + i as u64));
    runs.into_iter().collect()
}

fn grid_search(energy: &DiscreteEnergy, half_width: f64) -> Result<Vec<f64>> {
    let n = energy.dim();
    let total = GRID_POINTS.pow(n as u32);
    let step = 2.0 * half_width / (GRID_POINTS - 1) as f64;
    let point = |mut idx: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for x in v.iter_mut() {
            *x = -half_width + step * (idx % GRID_POINTS) as f64;
            idx /= GRID_POINTS;
        }
        v
    };
    let values = par::map_range(total, |i| energy.value(&point(i)));
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if v < best.0 {
            best = (v, i);
        }
    }
    Ok(point(best.1))
}

/// Exact one-dimensional minimization of `t ↦ E(x + t d)`.
struct LineSearch<'e, 'a> {
    energy: &'e DiscreteEnergy<'a>,
    x: Vec<f64>,
    d: Vec<f64>,
    s0: Vec<f64>,
    ds: Vec<f64>,
}

impl LineSearch<'_, '_> {
    fn new<'e, 'a>(energy: &'e DiscreteEnergy<'a>, x: &[f64], d: &[f64]) -> Result<LineSearch<'e, 'a>> {
        let space = energy.forms().space();
        Ok(LineSearch {
            energy,
            x: x.to_vec(),
            d: d.to_vec(),
            s0: space.normal_trace(x)?,
            ds: space.normal_trace(d)?,
        })
    }

    fn point(&self, t: f64) -> Vec<f64> {
        self.x.iter().zip(&self.d).map(|(a, b)| a + t * b).collect()
    }

    fn value(&self, t: f64) -> Result<f64> {
        self.energy.value(&self.point(t))
    }

    /// One-sided derivative at `t`, from the right when `right` is set.
    fn slope(&self, t: f64, right: bool) -> Result<f64> {
        let (_, g) = self.energy.smooth(&self.point(t))?;
        let w = &self.energy.forms().space().boundary().weights;
        let sp = self.energy.superpotential();
        let mut s = linalg::dot(&g, &self.d);
        for i in 0..self.s0.len() {
            let ds = self.ds[i];
            if ds == 0.0 {
                continue;
            }
            let (lo, hi) = sp.one_sided(self.s0[i] + t * ds);
            // moving right in t moves the trace in the direction of ds
            let jd = if (ds > 0.0) == right { hi } else { lo };
            s += w[i] * jd * ds;
        }
        Ok(s)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let kinks = self.energy.superpotential().kinks();
        let mut out = Vec::new();
        for i in 0..self.s0.len() {
            if self.ds[i] != 0.0 {
                for &k in kinks {
                    out.push((k - self.s0[i]) / self.ds[i]);
                }
            }
        }
        out.retain(|t| t.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn minimize(&self) -> Result<(f64, f64)> {
        let mut hi = 1.0;
        while self.slope(hi, false)? < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidParams("energy is not coercive along a search line".into()));
            }
        }
        let mut lo = -1.0;
        while self.slope(lo, true)? > 0.0 {
            lo *= 2.0;
            if lo < -1e12 {
                return Err(Error::InvalidParams("energy is not coercive along a search line".into()));
            }
        }
        let mut nodes = vec![lo];
        nodes.extend(self.breakpoints().into_iter().filter(|&t| t > lo && t < hi));
        nodes.push(hi);

        // (t, stationary) candidates
        let mut cands: Vec<(f64, bool)> = vec![(0.0, false)];
        for (i, &t) in nodes.iter().enumerate() {
            let kink_min = i > 0 && i + 1 < nodes.len() && self.slope(t, false)? <= 0.0 && self.slope(t, true)? >= 0.0;
            cands.push((t, kink_min));
        }
        for win in nodes.windows(2) {
            let (mut a, mut b) = (win[0], win[1]);
            if !(self.slope(a, true)? < 0.0 && self.slope(b, false)? > 0.0) {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if self.slope(m, true)? < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            cands.push((0.5 * (a + b), true));
        }

        let mut scored = Vec::with_capacity(cands.len());
        for (t, stationary) in cands {
            scored.push((self.value(t)?, t, stationary));
        }
        let best = scored.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        // among values tied up to rounding, prefer a certified stationary point
        let tie = 1e-14 * best.abs().max(1.0);
        let pick = scored
            .iter()
            .filter(|c| c.0 <= best + tie)
            .max_by(|a, b| a.2.cmp(&b.2).then(b.0.total_cmp(&a.0)))
            .expect("nonempty");
        Ok((pick.1, pick.0))
    }
}

fn unit_v(forms: &AssembledForms, v: Vec<f64>) -> Option<Vec<f64>> {
    let n = forms.norm_v(&v);
    (n > 0.0).then(|| linalg::scale(1.0 / n, &v))
}

/// Directions spanning the null space of the boundary rows whose traces sit on
/// a kink.
fn active_directions(energy: &DiscreteEnergy, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let space = energy.forms().space();
    let kinks = energy.superpotential().kinks();
    if kinks.is_empty() {
        return Ok(Vec::new());
    }
    let s = space.normal_trace(x)?;
    let scale = linalg::max_abs(&s).max(1.0);
    let t = space.trace_matrix();
    let n = x.len();
    let rows: Vec<usize> = (0..s.len())
        .filter(|&i| kinks.iter().any(|k| (s[i] - k).abs() <= 1e-9 * scale))
        .filter(|&i| (0..n).any(|j| t[(i, j)] != 0.0))
        .collect();
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let a = Mat::from_fn(rows.len(), n, |i, j| t[(rows[i], j)]);
    let ns = linalg::null_space(&a, 1e-9)?;
    Ok((0..ns.ncols()).map(|c| (0..n).map(|i| ns[(i, c)]).collect()).collect())
}

fn polish(energy: &DiscreteEnergy, mut x: Vec<f64>, seed: u64) -> Result<OracleRun> {
    let forms = energy.forms();
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fx = energy.value(&x)?;
    for _ in 0..MAX_SWEEPS {
        let start = x.clone();
        let mut dirs: Vec<Vec<f64>> = (0..n)
            .filter_map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                unit_v(forms, e)
            })
            .collect();
        dirs.extend(active_directions(energy, &x)?.into_iter().filter_map(|d| unit_v(forms, d)));
        for _ in 0..n {
            if let Some(d) = unit_v(forms, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()) {
                dirs.push(d);
            }
        }
        for d in &dirs {
            let ls = LineSearch::new(energy, &x, d)?;
            let (t, val) = ls.minimize()?;
            if val <= fx && t != 0.0 {
                x = ls.point(t);
                fx = val;
            }
        }
        // pattern move along the sweep displacement
        if let Some(d) = unit_v(forms, linalg::sub(&x, &start)) {
            let ls = LineSearch::new(energy, &x, &d)?;
            let (t, val) = ls.minimize()?;
            if val <= fx && t != 0.0 {
                x = ls.point(t);
                fx = val;
            }
        }
        if forms.norm_v(&linalg::sub(&x, &start)) <= 1e-13 * (1.0 + forms.norm_v(&x)) {
            break;
        }
    }
    Ok(OracleRun { v: x, energy: fx })
}

/// Worst violation of one inequality over the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityResult {
    pub name: String,
    pub worst_violation: f64,
}

impl InequalityResult {
    pub fn passed(&self) -> bool {
        self.worst_violation <= SUITE_TOLERANCE
    }
}

/// Exponents covered by the suite.
pub const SUITE_R: [f64; 4] = [1.0, 2.0, 3.0, 5.0];
pub const SUITE_Q: [f64; 2] = [1.0, 2.0];

/// Superpotentials covered by default: every built-in one that satisfies the
/// relaxed monotonicity hypothesis.
pub fn default_superpotentials() -> Vec<Superpotential> {
    vec![
        Superpotential::Quadratic { c: 1.5 },
        Superpotential::AbsVal { c: 0.7 },
        Superpotential::CosNonconvex { delta: 2.0 },
    ]
}

pub fn inequality_suite(seed: u64, n_samples: usize) -> Result<Vec<InequalityResult>> {
    inequality_suite_with(seed, n_samples, &default_superpotentials())
}

struct Accumulator(Vec<(String, f64)>);

impl Accumulator {
    fn record(&mut self, name: String, violation: f64) {
        let v = if violation.is_nan() { f64::INFINITY } else { violation.max(0.0) };
        match self.0.iter_mut().find(|(n, _)| *n == name) {
            Some(e) => e.1 = e.1.max(v),
            None => self.0.push((name, v)),
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for (n, v) in other.0 {
            self.record(n, v);
        }
    }
}

/// Suite on the 4x4 first-order unit-square space, with the given
/// superpotentials for the boundary inequalities.
pub fn inequality_suite_with(seed: u64, n_samples: usize, sps: &[Superpotential]) -> Result<Vec<InequalityResult>> {
    if n_samples == 0 {
        return Err(Error::InvalidParams("inequality suite needs at least one sample".into()));
    }
    let mesh = crate::geometry::generate_mesh(crate::geometry::Domain::UnitSquare, 4, 4)?;
    let space = crate::geometry::build_reduced_space(&mesh, 1)?;
    let area = mesh.area();
    let n = space.reduced_dim();
    let wts = forms::qp_weights(&space);

    let per_sample = par::map_range(n_samples, |i| -> Result<Accumulator> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut acc = Accumulator(Vec::new());
        let amp = rng.gen_range(0.1..2.0);
        let u: Vec<f64> = (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (pu, pv) = (forms::evaluate(&space, &u)?, forms::evaluate(&space, &v)?);
        let diff = linalg::sub(&u, &v);

        for &r in &SUITE_R {
            let lhs = forms::eval_power(&space, &u, &diff, r)? - forms::eval_power(&space, &v, &diff, r)?;
            let (mut wu, mut wv, mut lr) = (0.0, 0.0, 0.0);
            for q in 0..wts.len() {
                let (a, b) = (pu.u[q], pv.u[q]);
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                wu += wts[q] * a[0].hypot(a[1]).powf(r - 1.0) * d2;
                wv += wts[q] * b[0].hypot(b[1]).powf(r - 1.0) * d2;
                lr += wts[q] * d2.sqrt().powf(r + 1.0);
            }
            let tag = format!("r={r}");
            acc.record(format!("power_monotonicity[{tag}]"), 0.5 * wu + 0.5 * wv - lhs);
            acc.record(format!("power_strong_monotonicity[{tag}]"), lr / 2f64.powf(r - 1.0) - lhs);
            acc.record(format!("power_split[{tag}]"), lr - 2f64.powf(r - 2.0) * (wu + wv));

            let beta_min = |q: f64| 2.0 * (q + 1.0) / (r + 1.0);
            for &q in SUITE_Q.iter().filter(|&&q| q < r) {
                let kappa = rng.gen_range(0.0..3.0);
                let beta = rng.gen_range(beta_min(q)..beta_min(q) + 3.0);
                let lq = forms::lp_norm(&space, &u, q + 1.0)?.powf(q + 1.0);
                let lr1 = forms::lp_norm(&space, &u, r + 1.0)?;
                let holder = kappa * area.powf((r - q) / (r + 1.0)) * lr1.powf(q + 1.0);
                let young = 0.5 * beta * lr1.powf(r + 1.0) + kappa.powf((r + 1.0) / (r - q)) * area;
                let qtag = format!("r={r},q={q}");
                acc.record(format!("pumping_holder[{qtag}]"), kappa * lq - holder);
                acc.record(format!("pumping_young[{qtag}]"), holder - young);
            }
        }

        let b_uvv = forms::eval_b(&space, &u, &v, &v)?;
        acc.record("b_vanishes_on_diagonal".into(), b_uvv.abs());
        let b_uvw = forms::eval_b(&space, &u, &v, &w)?;
        let b_uwv = forms::eval_b(&space, &u, &w, &v)?;
        acc.record("b_antisymmetry".into(), (b_uvw + b_uwv).abs());

        for sp in sps {
            let (x1, x2, d1, d2) = sample_scalars(&mut rng, sp);
            let name = sp.name();
            acc.record(format!("j0_subadditivity[{name}]"), sp.j0(x1, d1 + d2) - sp.j0(x1, d1) - sp.j0(x1, d2));
            let m = sp.declared_constants().m;
            acc.record(
                format!("relaxed_monotonicity[{name}]"),
                sp.j0(x1, x2 - x1) + sp.j0(x2, x1 - x2) - m * (x1 - x2).powi(2),
            );
            let c = sp.declared_constants();
            acc.record(format!("j0_growth[{name}]"), sp.j0(x1, d1).abs() - (c.c0 + c.c1 * x1.abs()) * d1.abs());
        }
        Ok(acc)
    });

    let mut total = Accumulator(Vec::new());
    for acc in per_sample {
        total.merge(acc?);
    }
    Ok(total.0.into_iter().map(|(name, worst_violation)| InequalityResult { name, worst_violation }).collect())
}

/// Scalar samples that hit the kinks with positive probability.
fn sample_scalars(rng: &mut ChaCha8Rng, sp: &Superpotential) -> (f64, f64, f64, f64) {
    let pick = |rng: &mut ChaCha8Rng| {
        let kinks = sp.kinks();
        if !kinks.is_empty() && rng.gen_bool(0.2) {
            kinks[rng.gen_range(0..kinks.len())]
        } else {
            rng.gen_range(-4.0..4.0)
        }
    };
    let x1 = pick(rng);
    let x2 = pick(rng);
    (x1, x2, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

/// CSV rendering `name,worst_violation,pass`.
pub fn suite_csv(results: &[InequalityResult]) -> String {
    let mut s = String::from("name,worst_violation,pass\n");
    for r in results {
        s.push_str(&format!("{},{:e},{}\n", r.name, r.worst_violation, r.passed()));
    }
    s
}

/// Worst relative `M`-norm discrepancy between `power_gateaux` and central
/// differences of `power_field` with step `h`, over `n_pairs` random pairs.
pub fn gateaux_check(forms: &AssembledForms, p: f64, n_pairs: usize, h: f64, seed: u64) -> Result<f64> {
    let n = forms.dim();
    let errs = par::map_range(n_pairs, |i| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = forms.power_gateaux(&u, &v, p)?;
        let plus = forms.power_field(&linalg::add(&u, &linalg::scale(h, &v)), p)?;
        let minus = forms.power_field(&linalg::sub(&u, &linalg::scale(h, &v)), p)?;
        let fd = linalg::scale(0.5 / h, &linalg::sub(&plus, &minus));
        let denom = forms.norm_h(&exact);
        Ok(if denom > 0.0 { forms.norm_h(&linalg::sub(&fd, &exact)) / denom } else { forms.norm_h(&fd) })
    });
    errs.into_iter().try_fold(0.0f64, |acc, e| Ok(acc.max(e?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceStatus {
    Agree,
    Disagree,
    /// The energy is not covered by the well-posedness theory, so no verdict
    /// is given.
    Uncertified,
}

impl EquivalenceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquivalenceStatus::Agree => "agree",
            EquivalenceStatus::Disagree => "disagree",
            EquivalenceStatus::Uncertified => "uncertified",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub status: EquivalenceStatus,
    pub distance_v: f64,
    pub solver_residual: f64,
    pub oracle_residual: f64,
    pub solver_energy: f64,
    pub oracle_energy: f64,
    pub solver: Vec<f64>,
    pub oracle: Vec<f64>,
}

/// Tolerances of the equivalence check.
pub const EQUIV_DISTANCE: f64 = 1e-6;
pub const EQUIV_RESIDUAL: f64 = 1e-8;
const EQUIV_INNER_TOL: f64 = 1e-11;
const EQUIV_RESTARTS: usize = 4;
const EQUIV_DIRECTIONS: usize = 32;

/// Minimizes the energy both with the inner solver and with the dense oracle
/// and compares the two minimizers.
pub fn equivalence_check(
    forms: &AssembledForms,
    params: ModelParams,
    sp: Superpotential,
    f: &[f64],
    w: &[f64],
) -> Result<EquivalenceReport> {
    let energy = build_energy(forms, sp, params, f, w)?;
    let n = energy.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge { max: MAX_ORACLE_DIM, got: n });
    }
    let zero = vec![0.0; n];
    if !energy.is_certified() {
        return Ok(EquivalenceReport {
            status: EquivalenceStatus::Uncertified,
            distance_v: f64::NAN,
            solver_residual: f64::NAN,
            oracle_residual: f64::NAN,
            solver_energy: f64::NAN,
            oracle_energy: f64::NAN,
            solver: zero.clone(),
            oracle: zero,
        });
    }
    let solved = minimize_energy(&energy, &zero, EQUIV_INNER_TOL, 200_000)?;
    let half_width = 2.0 * linalg::max_abs(&solved.v).max(1.0);
    let oracle = dense_minimize_oracle(&energy, EQUIV_RESTARTS, half_width)?;
    let distance_v = forms.norm_v(&linalg::sub(&solved.v, &oracle));
    let solver_residual = hvi_residual(&energy, &solved.v, EQUIV_DIRECTIONS, ORACLE_SEED)?;
    let oracle_residual = hvi_residual(&energy, &oracle, EQUIV_DIRECTIONS, ORACLE_SEED)?;
    let ok = distance_v <= EQUIV_DISTANCE && solver_residual <= EQUIV_RESIDUAL && oracle_residual <= EQUIV_RESIDUAL;
    Ok(EquivalenceReport {
        status: if ok { EquivalenceStatus::Agree } else { EquivalenceStatus::Disagree },
        distance_v,
        solver_residual,
        oracle_residual,
        solver_energy: solved.energy,
        oracle_energy: energy.value(&oracle)?,
        solver: solved.v,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_reduced_space, generate_mesh, Domain};

    fn tiny() -> AssembledForms {
        let mesh = generate_mesh(Domain::UnitSquare, 2, 2).unwrap();
        AssembledForms::new(build_reduced_space(&mesh, 1).unwrap()).unwrap()
    }

    #[test]
    fn rejects_large_spaces() {
        let mesh = generate_mesh(Domain::UnitSquare, 3, 3).unwrap();
        let fm = AssembledForms::new(build_reduced_space(&mesh, 1).unwrap()).unwrap();
        let n = fm.dim();
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.0, 2.0, 1.0).unwrap();
        let e = build_energy(&fm, Superpotential::AbsVal { c: 1.0 }, p, &vec![0.0; n], &vec![0.0; n]).unwrap();
        assert!(matches!(dense_minimize_oracle(&e, 1, 1.0), Err(Error::DimensionTooLarge { max: 6, .. })));
    }

    #[test]
    fn zero_data_gives_origin() {
        let fm = tiny();
        let n = fm.dim();
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.0, 3.0, 1.0).unwrap();
        let e = build_energy(&fm, Superpotential::Quadratic { c: 1.0 }, p, &vec![0.0; n], &vec![0.0; n]).unwrap();
        let v = dense_minimize_oracle(&e, 2, 1.0).unwrap();
        assert!(fm.norm_v(&v) <= 1e-10, "{v:?}");
    }

    #[test]
    fn pure_quadratic_matches_linear_solve() {
        let fm = tiny();
        let n = fm.dim();
        // r = 1 makes the β-term quadratic
        let p = ModelParams { mu: 1.0, alpha: 2.0, beta: 0.5, kappa: 0.0, r: 1.0, q: 1.0 };
        let f: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.2).collect();
        let sp = Superpotential::Quadratic { c: 0.8 };
        let e = build_energy(&fm, sp, p, &f, &vec![0.0; n]).unwrap();
        let v = dense_minimize_oracle(&e, 2, 2.0).unwrap();
        // (μK + (α+β)M + c TᵀWT) v = f
        let t = fm.space().trace_matrix();
        let wts = &fm.space().boundary().weights;
        let a = Mat::from_fn(n, n, |i, j| {
            let tw: f64 = (0..t.nrows()).map(|r| t[(r, i)] * wts[r] * t[(r, j)]).sum();
            fm.k()[(i, j)] + 2.5 * fm.m()[(i, j)] + 0.8 * tw
        });
        let exact = linalg::Cholesky::new(&a).unwrap().solve(&f);
        assert!(linalg::norm2(&linalg::sub(&v, &exact)) <= 1e-8, "{v:?} {exact:?}");
    }

    #[test]
    fn nonconvex_multistart_agrees() {
        let fm = tiny();
        let n = fm.dim();
        let p = ModelParams::new(1.0, 4.0, 1.0, 0.0, 3.0, 1.0).unwrap();
        let f: Vec<f64> = (0..n).map(|i| 1.0 - 0.7 * i as f64).collect();
        let e = build_energy(&fm, Superpotential::CosNonconvex { delta: 2.0 }, p, &f, &vec![0.0; n]).unwrap();
        let runs = dense_multistart(&e, 10, 3.0).unwrap();
        for a in &runs {
            for b in &runs {
                assert!(fm.norm_v(&linalg::sub(&a.v, &b.v)) <= 1e-6);
            }
        }
    }

    #[test]
    fn suite_passes_and_detects_jump() {
        let rep = inequality_suite(1, 200).unwrap();
        for r in &rep {
            assert!(r.passed(), "{} {}", r.name, r.worst_violation);
        }
        let with_jump = inequality_suite_with(1, 200, &[Superpotential::JumpDown { gap: 1.0 }]).unwrap();
        let rm = with_jump.iter().find(|r| r.name == "relaxed_monotonicity[jump_down]").unwrap();
        assert!(!rm.passed());
    }

    #[test]
    fn linear_case_is_exact() {
        let rep = inequality_suite(3, 200).unwrap();
        for r in rep.iter().filter(|r| r.name.contains("[r=1]")) {
            assert!(r.worst_violation <= 1e-13, "{} {}", r.name, r.worst_violation);
        }
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(suite_csv(&inequality_suite(7, 50).unwrap()), suite_csv(&inequality_suite(7, 50).unwrap()));
    }

    #[test]
    fn absval_equivalence() {
        let fm = tiny();
        let n = fm.dim();
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.0, 3.0, 1.0).unwrap();
        let f: Vec<f64> = (0..n).map(|i| 2.0 - 1.3 * i as f64).collect();
        let rep = equivalence_check(&fm, p, Superpotential::AbsVal { c: 0.4 }, &f, &vec![0.0; n]).unwrap();
        assert_eq!(rep.status, EquivalenceStatus::Agree, "{rep:?}");
    }

    #[test]
    fn uncertified_is_not_a_pass() {
        let fm = tiny();
        let n = fm.dim();
        let p = ModelParams::new(1.0, 0.01, 1.0, -5.0, 3.0, 2.0).unwrap();
        let rep = equivalence_check(&fm, p, Superpotential::AbsVal { c: 0.4 }, &vec![1.0; n], &vec![0.0; n]).unwrap();
        assert_eq!(rep.status, EquivalenceStatus::Uncertified);
    }
}
