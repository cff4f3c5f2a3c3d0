//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line and
//! returns the CSV artifact it produced; the last criterion re-runs them all
//! and compares the artifacts byte for byte.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use cbfed_core::constants::{self, ModelParams};
use cbfed_core::forcing::Forcing;
use cbfed_core::forms::AssembledForms;
use cbfed_core::geometry::{build_reduced_space, generate_mesh, Domain};
use cbfed_core::linalg;
use cbfed_core::oracle::{self, EquivalenceStatus};
use cbfed_core::outer_solver::{self, ProblemSetup, SolverOptions};
use cbfed_core::superpotential::Superpotential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const CB_SAMPLES: usize = 50;

struct Outcome {
    passed: bool,
    detail: String,
    csv: String,
    elapsed: Duration,
}

fn report(id: usize, name: &str, o: &Outcome) {
    println!(
        "criterion {id:2} {name:<28} {} ({:.2?}) {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.elapsed,
        o.detail
    );
}

fn unit_square(n: usize, order: usize) -> AssembledForms {
    let mesh = generate_mesh(Domain::UnitSquare, n, n).unwrap();
    AssembledForms::new(build_reduced_space(&mesh, order).unwrap()).unwrap()
}

/// Vortex plus shear: a field whose convection is not a pure gradient.
fn mixed_load(forms: &AssembledForms) -> Vec<f64> {
    let space = forms.space();
    linalg::add(&Forcing::Vortex { amplitude: 1.0 }.load(space), &Forcing::Shear { amplitude: 1.0 }.load(space))
}

fn criterion_inequalities() -> Outcome {
    let start = Instant::now();
    let results = oracle::inequality_suite(SEED, 1000).unwrap();
    let elapsed = start.elapsed();
    let worst = results.iter().map(|r| r.worst_violation).fold(0.0, f64::max);
    let all = results.iter().all(|r| r.passed());
    Outcome {
        passed: all && worst <= 1e-9 && elapsed < Duration::from_secs(10),
        detail: format!("{} entries, worst violation {worst:e}", results.len()),
        csv: oracle::suite_csv(&results),
        elapsed,
    }
}

fn criterion_gateaux() -> Outcome {
    let start = Instant::now();
    let forms = unit_square(8, 1);
    let mut csv = String::from("r,worst_relative_error\n");
    let mut worst = 0.0f64;
    for r in oracle::SUITE_R {
        let e = oracle::gateaux_check(&forms, r, 100, 1e-5, SEED).unwrap();
        worst = worst.max(e);
        writeln!(csv, "{r},{e:e}").unwrap();
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: worst <= 1e-6 && elapsed < Duration::from_secs(5),
        detail: format!("worst relative error {worst:e}"),
        csv,
        elapsed,
    }
}

fn tiny_instance(i: usize, rng: &mut ChaCha8Rng) -> (AssembledForms, ModelParams, Superpotential) {
    let forms = if i % 2 == 0 { unit_square(2, 1) } else { unit_square(1, 2) };
    let r = oracle::SUITE_R[(i / 4) % 4];
    let sp = match i % 4 {
        0 => Superpotential::Quadratic { c: rng.gen_range(0.0..2.0) },
        1 => Superpotential::AbsVal { c: rng.gen_range(0.1..1.5) },
        2 => Superpotential::CosNonconvex { delta: rng.gen_range(0.5..1.5) },
        _ => Superpotential::JumpDown { gap: 2.0 },
    };
    let kappa = if i % 3 == 0 && r > 1.0 { -0.2 } else { 0.0 };
    let params = ModelParams::new(1.0, rng.gen_range(2.0..5.0), rng.gen_range(0.5..2.0), kappa, r, 1.0).unwrap();
    (forms, params, sp)
}

fn criterion_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut csv = String::from("instance,kind,r,dim,status,distance_v,solver_residual,oracle_residual\n");
    let mut passed = true;
    let (mut agree, mut gated) = (0, 0);
    for i in 0..20 {
        let (forms, params, sp) = tiny_instance(i, &mut rng);
        let n = forms.dim();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let rep = oracle::equivalence_check(&forms, params, sp, &f, &w).unwrap();
        // the negative control must be refused, every other instance must agree
        let ok = match sp {
            Superpotential::JumpDown { .. } => rep.status == EquivalenceStatus::Uncertified,
            _ => rep.status == EquivalenceStatus::Agree,
        };
        match rep.status {
            EquivalenceStatus::Agree => agree += 1,
            EquivalenceStatus::Uncertified => gated += 1,
            EquivalenceStatus::Disagree => {}
        }
        passed &= ok && n <= oracle::MAX_ORACLE_DIM;
        writeln!(
            csv,
            "{i},{},{},{n},{},{:e},{:e},{:e}",
            sp.name(),
            params.r,
            rep.status.as_str(),
            rep.distance_v,
            rep.solver_residual,
            rep.oracle_residual
        )
        .unwrap();
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: passed && elapsed < Duration::from_secs(60),
        detail: format!("{agree} agree, {gated} negative controls refused"),
        csv,
        elapsed,
    }
}

/// Small-data instance on the 8x8 mesh with σ_f = 0.3 by construction.
fn contraction_setup(forms: &AssembledForms) -> (ProblemSetup<'_>, Vec<f64>) {
    let setup = ProblemSetup {
        forms,
        params: ModelParams::new(1.0, 1.0, 1.0, 0.0, 3.0, 1.0).unwrap(),
        sp: Superpotential::Quadratic { c: 0.0 },
        cb: constants::estimate_cb(forms, CB_SAMPLES, SEED),
        gn_constant: 1.0,
    };
    let unit = mixed_load(forms);
    let inp = setup.constant_inputs(&unit).unwrap();
    let mu_eff = setup.params.effective_viscosity(inp.lambda0, inp.m);
    // σ_f = 4·C_b·X/μ'² with X = ‖f‖ when κ = 0 and c₀ = 0
    let target = 0.3 * mu_eff * mu_eff / (4.0 * setup.cb);
    let f = linalg::scale(target / forms.dual_norm(&unit), &unit);
    (setup, f)
}

struct PicardRun {
    report: outer_solver::IterationReport,
    u: Vec<f64>,
    reference: Vec<f64>,
}

fn run_contraction(forms: &AssembledForms) -> (ProblemSetup<'_>, Vec<f64>, PicardRun) {
    let (setup, f) = contraction_setup(forms);
    let opts = SolverOptions::default();
    let out = outer_solver::picard_solve(&setup, &f, None, &opts).unwrap();
    let tight = SolverOptions { tol: opts.tol / 100.0, inner_tol: opts.inner_tol / 100.0, ..opts };
    let reference = outer_solver::picard_solve(&setup, &f, None, &tight).unwrap().u;
    (setup, f, PicardRun { report: out.report, u: out.u, reference })
}

fn criterion_contraction(forms: &AssembledForms, run: &PicardRun, elapsed: Duration) -> Outcome {
    let rep = &run.report;
    let sigma = rep.sigma_f;
    let mut csv = format!("sigma_f,{sigma:e}\nk,ratio,true_error,apost,apriori\n");
    let mut passed = rep.converged && sigma <= 0.5;
    let mut worst_ratio = 0.0f64;
    let iterates = replay_iterates(forms, rep.iterates.len());
    let dist = |a: &[f64], b: &[f64]| forms.norm_v(&linalg::sub(a, b));
    for (idx, rec) in rep.iterates.iter().enumerate() {
        let k = rec.k;
        let true_err = dist(&iterates[idx], &run.reference);
        let ratio = if k >= 2 {
            let prev = dist(&iterates[idx - 1], &run.u);
            if prev > 0.0 { dist(&iterates[idx], &run.u) / prev } else { 0.0 }
        } else {
            f64::NAN
        };
        if k >= 2 {
            worst_ratio = worst_ratio.max(ratio);
            passed &= ratio <= sigma * 1.05;
        }
        passed &= true_err <= rec.apost + 1e-10;
        passed &= rec.apriori >= rec.apost - 1e-10;
        writeln!(csv, "{k},{ratio:e},{true_err:e},{:e},{:e}", rec.apost, rec.apriori).unwrap();
    }
    Outcome {
        passed: passed && elapsed < Duration::from_secs(60),
        detail: format!("sigma_f {sigma:.3}, {} steps, worst ratio {worst_ratio:e}", rep.iterates.len()),
        csv,
        elapsed,
    }
}

/// The Picard iterates of the contraction instance, recomputed step by step.
fn replay_iterates(forms: &AssembledForms, count: usize) -> Vec<Vec<f64>> {
    let (setup, f) = contraction_setup(forms);
    let mut out = Vec::with_capacity(count);
    let mut prev = vec![0.0; forms.dim()];
    for _ in 0..count {
        let opts = SolverOptions { kmax: 1, tol: f64::INFINITY, ..SolverOptions::default() };
        let next = outer_solver::picard_solve(&setup, &f, Some(&prev), &opts).unwrap().u;
        out.push(next.clone());
        prev = next;
    }
    out
}

fn criterion_self_map(run: &PicardRun) -> Outcome {
    let start = Instant::now();
    let rho = run.report.rho_f;
    let mut csv = format!("rho_f,{rho:e}\nk,norm_V\n");
    let mut worst = 0.0f64;
    for r in &run.report.iterates {
        worst = worst.max(r.norm_v);
        writeln!(csv, "{},{:e}", r.k, r.norm_v).unwrap();
    }
    Outcome {
        passed: worst <= rho + 1e-8,
        detail: format!("max norm {worst:e} vs rho_f {rho:e}"),
        csv,
        elapsed: start.elapsed(),
    }
}

fn homotopy_setup(forms: &AssembledForms) -> (ProblemSetup<'_>, Vec<f64>) {
    let setup = ProblemSetup {
        forms,
        params: ModelParams::new(1.0, 5.0, 5.0, 0.0, 5.0, 1.0).unwrap(),
        sp: Superpotential::AbsVal { c: 0.1 },
        cb: constants::estimate_cb(forms, CB_SAMPLES, SEED),
        gn_constant: 1.0,
    };
    let unit = mixed_load(forms);
    let inp = setup.constant_inputs(&unit).unwrap();
    let mu_eff = setup.params.effective_viscosity(inp.lambda0, inp.m);
    // smallness reads 8·C_b·X ≤ μ'² when κ = 0
    let threshold = mu_eff * mu_eff / (8.0 * setup.cb) - constants::data_size(&constants::ConstantInputs { f_norm: 0.0, ..inp });
    let f = linalg::scale(10.0 * threshold / forms.dual_norm(&unit), &unit);
    (setup, f)
}

fn criterion_homotopy(forms: &AssembledForms) -> (Outcome, Vec<f64>) {
    let start = Instant::now();
    let (setup, f) = homotopy_setup(forms);
    let rep = setup.regime(&f).unwrap();
    let h = outer_solver::homotopy_solve(&setup, &f, 10, &SolverOptions::default()).unwrap();
    let residual = outer_solver::full_residual(&setup, &f, &h.u, 32, SEED).unwrap();
    let elapsed = start.elapsed();
    let bounds_ok = h.steps.iter().all(|s| s.bound_lhs <= s.bound_rhs + outer_solver::BOUND_SLACK);
    let reached = h.steps.last().is_some_and(|s| s.t == 1.0);
    let mut csv = h.steps_csv();
    writeln!(csv, "final_residual,{residual:e}").unwrap();
    let outcome = Outcome {
        passed: rep.regime.is_global()
            && !rep.smallness_ok
            && reached
            && bounds_ok
            && residual <= 1e-6
            && elapsed < Duration::from_secs(300),
        detail: format!(
            "regime {}, smallness {:.2} > {:.2}, {} steps, residual {residual:e}",
            rep.regime.as_str(),
            rep.smallness,
            rep.smallness_bound,
            h.steps.len()
        ),
        csv,
        elapsed,
    };
    (outcome, h.u)
}

fn criterion_energy_bound(forms: &AssembledForms, contraction_u: &[f64], homotopy_u: &[f64]) -> Outcome {
    let start = Instant::now();
    let mut csv = String::from("case,lhs,rhs\n");
    let mut passed = true;
    let (s1, f1) = contraction_setup(forms);
    let (s2, f2) = homotopy_setup(forms);
    for (name, setup, f, u) in [("contraction", s1, f1, contraction_u), ("homotopy", s2, f2, homotopy_u)] {
        let (lhs, rhs) = setup.uniform_bound(&f, u).unwrap();
        passed &= lhs <= rhs + 1e-8;
        writeln!(csv, "{name},{lhs:e},{rhs:e}").unwrap();
    }
    Outcome { passed, detail: "both final fields".into(), csv, elapsed: start.elapsed() }
}

fn criterion_data_dependence(forms: &AssembledForms) -> Outcome {
    let start = Instant::now();
    let (setup, f) = contraction_setup(forms);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut csv = String::from("pair,delta_dual,distance,bound,holds\n");
    let mut passed = true;
    let opts = SolverOptions::default();
    for pair in 0..5 {
        let size = 10f64.powi(-(pair as i32) - 1);
        let dir: Vec<f64> = (0..f.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = linalg::add(&f, &linalg::scale(size * setup.forms.dual_norm(&f) / forms.dual_norm(&dir), &dir));
        let d = outer_solver::data_dependence_check(&setup, &f, &g, &opts).unwrap();
        passed &= d.holds;
        writeln!(
            csv,
            "{pair},{:e},{:e},{:e},{}",
            forms.dual_norm(&linalg::sub(&g, &f)),
            d.distance,
            d.bound,
            d.holds
        )
        .unwrap();
    }
    let elapsed = start.elapsed();
    Outcome { passed: passed && elapsed < Duration::from_secs(120), detail: "5 pairs".into(), csv, elapsed }
}

fn criterion_lambda0() -> Outcome {
    let start = Instant::now();
    let mut csv = String::from("mesh,lambda0,worst_trace_slack\n");
    let mut lambdas = Vec::new();
    let mut passed = true;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for n in [8, 16] {
        let forms = unit_square(n, 1);
        let l0 = constants::principal_eigenvalue(&forms).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let v: Vec<f64> = (0..forms.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nv = forms.norm_v(&v);
            let slack = constants::trace_norm_sq(&forms, &v).unwrap() - nv * nv / l0;
            worst = worst.max(slack);
        }
        passed &= worst <= 1e-10;
        lambdas.push(l0);
        writeln!(csv, "{n}x{n},{l0:e},{worst:e}").unwrap();
    }
    let rel = (lambdas[0] - lambdas[1]).abs() / lambdas[1];
    Outcome {
        passed: passed && rel < 0.02,
        detail: format!("lambda0 {:.5} vs {:.5}, relative change {rel:.2e}", lambdas[0], lambdas[1]),
        csv,
        elapsed: start.elapsed(),
    }
}

/// Runs criteria 1 to 9, printing their lines, and returns their artifacts.
fn run_all(print: bool) -> (bool, Vec<String>) {
    let forms = unit_square(8, 1);
    let mut outcomes = Vec::new();
    outcomes.push(("inequality suite", criterion_inequalities()));
    outcomes.push(("gateaux derivative", criterion_gateaux()));
    outcomes.push(("minimization equivalence", criterion_equivalence()));
    let start = Instant::now();
    let (_, _, run) = run_contraction(&forms);
    let contraction = criterion_contraction(&forms, &run, start.elapsed());
    outcomes.push(("contraction rate", contraction));
    outcomes.push(("self map", criterion_self_map(&run)));
    let (homotopy, homotopy_u) = criterion_homotopy(&forms);
    outcomes.push(("uniform energy bound", criterion_energy_bound(&forms, &run.u, &homotopy_u)));
    outcomes.push(("homotopy reach", homotopy));
    outcomes.push(("data dependence", criterion_data_dependence(&forms)));
    outcomes.push(("lambda0 stability", criterion_lambda0()));
    let mut all = true;
    for (i, (name, o)) in outcomes.iter().enumerate() {
        if print {
            report(i + 1, name, o);
        }
        all &= o.passed;
    }
    (all, outcomes.into_iter().map(|(_, o)| o.csv).collect())
}

fn main() {
    let (first_ok, first) = run_all(true);
    let start = Instant::now();
    let (_, second) = run_all(false);
    let identical = first == second;
    let o = Outcome {
        passed: identical,
        detail: format!("{} artifacts compared", first.len()),
        csv: String::new(),
        elapsed: start.elapsed(),
    };
    report(10, "determinism", &o);
    if !(first_ok && identical) {
        eprintln!("acceptance criteria failed");
        std::process::exit(1);
    }
}
