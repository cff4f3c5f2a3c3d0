//! Boundary superpotentials `j(ξ)` with interval-valued Clarke subdifferentials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::geometry::ReducedSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Superpotential {
    /// `c ξ² / 2`
    Quadratic { c: f64 },
    /// `c |ξ|`
    AbsVal { c: f64 },
    /// `ξ²/2 − δ cos ξ`, nonconvex for `δ > 1`.
    CosNonconvex { delta: f64 },
    /// `−gap · max(ξ, 0)`: a downward jump in the subdifferential, which
    /// violates relaxed monotonicity for every finite `m`.
    JumpDown { gap: f64 },
}

/// Growth and monotonicity constants `(c₀, c₁, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisConstants {
    pub c0: f64,
    pub c1: f64,
    pub m: f64,
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }
}

impl Superpotential {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Superpotential::Quadratic { c } => ("c", c),
            Superpotential::AbsVal { c } => ("c", c),
            Superpotential::CosNonconvex { delta } => ("delta", delta),
            Superpotential::JumpDown { gap } => ("gap", gap),
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("superpotential {name} must be finite and >= 0, got {v}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Superpotential::Quadratic { .. } => "quadratic",
            Superpotential::AbsVal { .. } => "absval",
            Superpotential::CosNonconvex { .. } => "cos_nonconvex",
            Superpotential::JumpDown { .. } => "jump_down",
        }
    }

    pub fn value(&self, xi: f64) -> f64 {
        match *self {
            Superpotential::Quadratic { c } => 0.5 * c * xi * xi,
            Superpotential::AbsVal { c } => c * xi.abs(),
            Superpotential::CosNonconvex { delta } => 0.5 * xi * xi - delta * xi.cos(),
            Superpotential::JumpDown { gap } => -gap * xi.max(0.0),
        }
    }

    /// Declared `(c₀, c₁, m)`. For `JumpDown` the declared `m = 0` is false by
    /// construction.
    pub fn declared_constants(&self) -> HypothesisConstants {
        match *self {
            Superpotential::Quadratic { c } => HypothesisConstants { c0: 0.0, c1: c, m: 0.0 },
            Superpotential::AbsVal { c } => HypothesisConstants { c0: c, c1: 0.0, m: 0.0 },
            Superpotential::CosNonconvex { delta } => {
                HypothesisConstants { c0: delta, c1: 1.0, m: (delta - 1.0).max(0.0) }
            }
            Superpotential::JumpDown { gap } => HypothesisConstants { c0: gap, c1: 0.0, m: 0.0 },
        }
    }

    /// Whether the relaxed monotonicity hypothesis holds with the declared `m`.
    pub fn satisfies_relaxed_monotonicity(&self) -> bool {
        match *self {
            Superpotential::JumpDown { gap } => gap == 0.0,
            _ => true,
        }
    }

    /// Points where `j` is not differentiable.
    pub fn kinks(&self) -> &'static [f64] {
        match self {
            Superpotential::AbsVal { .. } | Superpotential::JumpDown { .. } => &[0.0],
            _ => &[],
        }
    }

    /// One-sided derivatives `(j'(ξ−), j'(ξ+))`.
    pub fn one_sided(&self, xi: f64) -> (f64, f64) {
        match *self {
            Superpotential::Quadratic { c } => (c * xi, c * xi),
            Superpotential::AbsVal { c } => {
                if xi > 0.0 {
                    (c, c)
                } else if xi < 0.0 {
                    (-c, -c)
                } else {
                    (-c, c)
                }
            }
            Superpotential::CosNonconvex { delta } => {
                let d = xi + delta * xi.sin();
                (d, d)
            }
            Superpotential::JumpDown { gap } => {
                if xi > 0.0 {
                    (-gap, -gap)
                } else if xi < 0.0 {
                    (0.0, 0.0)
                } else {
                    (0.0, -gap)
                }
            }
        }
    }

    /// Clarke subdifferential: the interval between the one-sided derivatives.
    pub fn subdifferential(&self, xi: f64) -> Interval {
        let (a, b) = self.one_sided(xi);
        Interval { lo: a.min(b), hi: a.max(b) }
    }

    /// Generalized directional derivative `j⁰(ξ; d) = max{ζ d : ζ ∈ ∂j(ξ)}`.
    pub fn j0(&self, xi: f64, dir: f64) -> f64 {
        let s = self.subdifferential(xi);
        (s.lo * dir).max(s.hi * dir)
    }

    /// Minimizer of `(ξ − target)²/(2 step) + weight · j(ξ)`.
    pub fn prox(&self, weight: f64, target: f64, step: f64) -> Result<f64> {
        let tw = step * weight;
        let m = self.declared_constants().m;
        if tw * m >= 1.0 {
            return Err(Error::StepTooLarge(tw * m));
        }
        Ok(match *self {
            Superpotential::Quadratic { c } => target / (1.0 + tw * c),
            Superpotential::AbsVal { c } => target.signum() * (target.abs() - tw * c).max(0.0),
            Superpotential::CosNonconvex { delta } => prox_cos(delta, tw, target),
            Superpotential::JumpDown { gap } => {
                let obj = |x: f64| (x - target).powi(2) / (2.0 * step) + weight * self.value(x);
                let left = target.min(0.0);
                let right = (target + tw * gap).max(0.0);
                if obj(right) < obj(left) { right } else { left }
            }
        })
    }
}

/// Root of `(ξ − t) + tw (ξ + δ sin ξ) = 0`, strictly increasing when `tw·(δ − 1) < 1`.
fn prox_cos(delta: f64, tw: f64, t: f64) -> f64 {
    let g = |x: f64| x - t + tw * (x + delta * x.sin());
    let dg = |x: f64| 1.0 + tw * (1.0 + delta * x.cos());
    let mut lo = (t - tw * delta) / (1.0 + tw);
    let mut hi = (t + tw * delta) / (1.0 + tw);
    let mut x = t / (1.0 + tw);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - gx / dg(x);
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Sampled estimates of the hypothesis constants and pass/fail against the
/// declared values.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisEstimate {
    pub c0_fit: f64,
    pub c1_fit: f64,
    pub m_fit: f64,
    pub h3_pass: bool,
    pub h4_pass: bool,
}

pub fn estimate_hypothesis_constants(
    sp: &Superpotential,
    n_samples: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<HypothesisEstimate> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || n_samples < 2 {
        return Err(Error::DegenerateRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n_samples).map(|_| rng.gen_range(lo..hi)).collect();
    xs.extend(sp.kinks().iter().copied().filter(|k| *k >= lo && *k <= hi));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let subs: Vec<Interval> = xs.iter().map(|&x| sp.subdifferential(x)).collect();

    let mut m_fit = 0.0f64;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let dx = xs[j] - xs[i];
            // worst case: smallest (ζ_j − ζ_i) with ξ_j > ξ_i
            let dz = subs[j].lo - subs[i].hi;
            m_fit = m_fit.max(-dz / dx);
        }
    }

    // minimal affine majorant of (|ξ|, max|ζ|): the supporting line of the
    // upper hull at the midpoint of the |ξ| range
    let mut pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(&subs)
        .map(|(x, s)| (x.abs(), s.lo.abs().max(s.hi.abs())))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hull = upper_hull(&pts);
    let x_mid = 0.5 * (pts[0].0 + pts[pts.len() - 1].0);
    let (mut c0_fit, mut c1_fit) = (hull[0].1, 0.0);
    for w in hull.windows(2) {
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        if w[0].0 <= x_mid && x_mid <= w[1].0 {
            c1_fit = slope.max(0.0);
            c0_fit = w[0].1 - c1_fit * w[0].0;
            break;
        }
    }
    if c1_fit == 0.0 {
        c0_fit = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    }
    c0_fit = c0_fit.max(0.0);

    let d = sp.declared_constants();
    let h3_pass = pts.iter().all(|&(x, z)| z <= (d.c0 + d.c1 * x) * (1.0 + 1e-9) + 1e-12);
    let h4_pass = m_fit <= d.m * (1.0 + 1e-6);
    Ok(HypothesisEstimate { c0_fit, c1_fit, m_fit, h3_pass, h4_pass })
}

fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        if h.last().is_some_and(|l| l.0 == p.0) {
            let l = h.pop().unwrap();
            h.push(if l.1 >= p.1 { l } else { p });
        } else {
            h.push(p);
        }
    }
    h
}

/// `J(v) = Σ wᵢ j(v_n(xᵢ))` with lumped boundary weights.
pub fn discrete_j(space: &ReducedSpace, sp: &Superpotential, v: &[f64]) -> Result<f64> {
    let s = space.normal_trace(v)?;
    Ok(space.boundary().weights.iter().zip(&s).map(|(w, &x)| w * sp.value(x)).sum())
}

/// `Σ wᵢ j⁰(u_n(xᵢ); v_n(xᵢ))`.
pub fn discrete_j0(space: &ReducedSpace, sp: &Superpotential, u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(space.reduced_dim(), u.len())?;
    let su = space.normal_trace(u)?;
    let sv = space.normal_trace(v)?;
    Ok(space
        .boundary()
        .weights
        .iter()
        .zip(su.iter().zip(&sv))
        .map(|(w, (&a, &b))| w * sp.j0(a, b))
        .sum())
}
