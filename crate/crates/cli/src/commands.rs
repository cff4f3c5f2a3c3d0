//! Subcommand bodies. Each returns the one-line summary printed on success.

use std::path::Path;
use std::sync::Mutex;

use cbfed_core::constants::{self, ConstantsReport, Regime};
use cbfed_core::forms::AssembledForms;
use cbfed_core::geometry::{build_reduced_space, generate_mesh};
use cbfed_core::oracle;
use cbfed_core::outer_solver::{self, field_csv, ProblemSetup};

use crate::config::Config;
use crate::error::CliError;
use crate::output::{self, RunDir};

/// Random directions used when reporting the final residual.
const RESIDUAL_DIRECTIONS: usize = 32;

struct Prepared {
    forms: AssembledForms,
    load: Vec<f64>,
    cb: f64,
}

impl Prepared {
    fn new(cfg: &Config) -> Result<Self, CliError> {
        let mesh = generate_mesh(cfg.mesh.domain(), cfg.mesh.nx, cfg.mesh.ny)?;
        let forms = AssembledForms::new(build_reduced_space(&mesh, cfg.mesh.order)?)?;
        let load = cfg.forcing().load(forms.space());
        let cb = constants::estimate_cb(&forms, cfg.cb_samples, cfg.seed);
        Ok(Self { forms, load, cb })
    }

    fn setup(&self, cfg: &Config) -> ProblemSetup<'_> {
        ProblemSetup {
            forms: &self.forms,
            params: cfg.params,
            sp: cfg.superpotential(),
            cb: self.cb,
            gn_constant: cfg.gn_constant,
        }
    }
}

fn constants_csv(report: &ConstantsReport) -> String {
    let mut rows = report.rows();
    rows.insert(2, ("C_b_source".into(), "empirical".into()));
    output::key_value_csv("quantity,value", &rows)
}

fn infeasible(report: &ConstantsReport) -> bool {
    !report.base_ok || report.regime == Regime::Infeasible
}

pub fn mesh_info(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let dir = RunDir::create(out)?;
    let mesh = generate_mesh(cfg.mesh.domain(), cfg.mesh.nx, cfg.mesh.ny)?;
    let space = build_reduced_space(&mesh, cfg.mesh.order)?;
    let rows: Vec<(String, String)> = vec![
        ("vertices".into(), mesh.vertices().len().to_string()),
        ("triangles".into(), mesh.triangles().len().to_string()),
        ("boundary_facets".into(), mesh.boundary_facets().len().to_string()),
        ("area".into(), format!("{:e}", mesh.area())),
        ("boundary_length".into(), format!("{:e}", mesh.boundary_length())),
        ("order".into(), space.order().to_string()),
        ("full_dim".into(), space.full_dim().to_string()),
        ("reduced_dim".into(), space.reduced_dim().to_string()),
        ("trace_rank".into(), space.trace_rank().to_string()),
        ("boundary_nodes".into(), space.boundary().nodes.len().to_string()),
        ("divergence_defect".into(), format!("{:e}", space.divergence_defect())),
        ("tangential_defect".into(), format!("{:e}", space.tangential_defect())),
    ];
    dir.write("mesh_info.csv", &output::key_value_csv("quantity,value", &rows))?;
    dir.write("mesh.txt", &mesh.to_text())?;
    Ok(format!(
        "mesh-info: {} triangles, reduced dimension {}, trace rank {}",
        mesh.triangles().len(),
        space.reduced_dim(),
        space.trace_rank()
    ))
}

pub fn constants(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let dir = RunDir::create(out)?;
    let prep = Prepared::new(cfg)?;
    let report = prep.setup(cfg).regime(&prep.load)?;
    dir.write("constants.csv", &constants_csv(&report))?;
    if infeasible(&report) {
        return Err(CliError::Infeasible(report.reason));
    }
    Ok(format!(
        "constants: regime {}, sigma_f {:e}, rho_f {:e} (C_b empirical)",
        report.regime.as_str(),
        report.sigma_f,
        report.rho_f
    ))
}

pub fn solve(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let dir = RunDir::create(out)?;
    let prep = Prepared::new(cfg)?;
    let setup = prep.setup(cfg);
    let report = setup.regime(&prep.load)?;
    dir.write("constants.csv", &constants_csv(&report))?;
    if !report.base_ok {
        return Err(CliError::Infeasible(report.reason));
    }
    let outcome = outer_solver::picard_solve(&setup, &prep.load, None, &cfg.solver)?;
    let rep = &outcome.report;
    dir.write("iterates.csv", &rep.iterates_csv())?;
    dir.write("field.csv", &field_csv(&outcome.u))?;
    dir.write("convergence.dat", &output::convergence_dat(rep))?;
    dir.write("convergence.gp", output::CONVERGENCE_GP)?;
    let last = rep.iterates.last().expect("at least one iterate");
    Ok(format!(
        "solve: converged in {} iterations, final step {:e}, sigma_f {:e} (C_b empirical)",
        rep.iterates.len(),
        last.step_v,
        rep.sigma_f
    ))
}

pub fn homotopy(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let dir = RunDir::create(out)?;
    let prep = Prepared::new(cfg)?;
    let setup = prep.setup(cfg);
    let report = setup.regime(&prep.load)?;
    dir.write("constants.csv", &constants_csv(&report))?;
    if !report.base_ok {
        return Err(CliError::Infeasible(report.reason));
    }
    let h = outer_solver::homotopy_solve(&setup, &prep.load, cfg.homotopy_steps, &cfg.solver)?;
    let residual = outer_solver::full_residual(&setup, &prep.load, &h.u, RESIDUAL_DIRECTIONS, cfg.seed)?;
    let mut steps = h.steps_csv();
    steps.push_str(&format!("# final_residual {residual:e}\n"));
    dir.write("homotopy.csv", &steps)?;
    dir.write("iterates.csv", &h.last.iterates_csv())?;
    dir.write("field.csv", &field_csv(&h.u))?;
    dir.write("convergence.dat", &output::convergence_dat(&h.last))?;
    dir.write("convergence.gp", output::CONVERGENCE_GP)?;
    Ok(format!(
        "homotopy: reached t = 1 in {} steps, final residual {residual:e}, regime {}",
        h.steps.len(),
        report.regime.as_str()
    ))
}

const SWEEP_HEADER: &str = "index,value,regime,sigma_f,rho_f,smallness_lhs,smallness_rhs,global_alpha_threshold";

pub fn sweep(cfg: &Config, out: &Path, threads: usize) -> Result<String, CliError> {
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::BadConfig { line: None, msg: "sweep needs sweep.key, sweep.from, sweep.to and sweep.points".into() })?;
    let dir = RunDir::create(out)?;
    let values: Vec<f64> = (0..spec.points)
        .map(|i| {
            if spec.points == 1 {
                spec.from
            } else {
                spec.from + (spec.to - spec.from) * i as f64 / (spec.points - 1) as f64
            }
        })
        .collect();
    let point_cfgs = values.iter().map(|&v| cfg.with_value(&spec.key, v)).collect::<Result<Vec<_>, _>>()?;

    let rows: Mutex<Vec<Option<Result<ConstantsReport, CliError>>>> = Mutex::new((0..spec.points).map(|_| None).collect());
    let next = Mutex::new(0usize);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, spec.points) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("sweep counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= spec.points {
                    break;
                }
                let result = Prepared::new(&point_cfgs[i]).and_then(|prep| {
                    let report = prep.setup(&point_cfgs[i]).regime(&prep.load)?;
                    dir.write(&format!("sweep/point_{i:03}.csv"), &constants_csv(&report))?;
                    Ok(report)
                });
                rows.lock().expect("sweep rows")[i] = Some(result);
            });
        }
    });

    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut dat = String::from("# value sigma_f smallness_ratio\n");
    let mut feasible = 0;
    for (i, row) in rows.into_inner().expect("sweep rows").into_iter().enumerate() {
        let r = row.expect("every point visited")?;
        if !infeasible(&r) {
            feasible += 1;
        }
        csv.push_str(&format!(
            "{i},{:e},{},{:e},{:e},{:e},{:e},{:e}\n",
            values[i],
            r.regime.as_str(),
            r.sigma_f,
            r.rho_f,
            r.smallness,
            r.smallness_bound,
            r.global_alpha_threshold
        ));
        dat.push_str(&format!("{:e} {:e} {:e}\n", values[i], r.sigma_f, r.smallness / r.smallness_bound));
    }
    dir.write("sweep.csv", &csv)?;
    dir.write("regime.dat", &dat)?;
    dir.write("regime.gp", output::REGIME_GP)?;
    Ok(format!("sweep: {} points over {}, {feasible} feasible", spec.points, spec.key))
}

pub fn verify(seed: u64, samples: usize, out: &Path) -> Result<String, CliError> {
    let dir = RunDir::create(out)?;
    let results = oracle::inequality_suite(seed, samples)?;
    dir.write("verify.csv", &oracle::suite_csv(&results))?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let worst = results.iter().map(|r| r.worst_violation).fold(0.0, f64::max);
    if !failed.is_empty() {
        return Err(CliError::Verification(format!("{} entries failed: {}", failed.len(), failed.join(" "))));
    }
    Ok(format!("verify: {} entries passed, worst violation {worst:e}", results.len()))
}
