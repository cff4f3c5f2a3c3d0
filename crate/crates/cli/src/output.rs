//! Run directory writers: CSV artifacts and gnuplot inputs.

use std::fs;
use std::path::{Path, PathBuf};

use cbfed_core::outer_solver::IterationReport;

use crate::error::CliError;

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
    }
}

/// Quotes a CSV field when it contains a separator or a quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn key_value_csv(header: &str, rows: &[(String, String)]) -> String {
    let mut out = format!("{header}\n");
    for (k, v) in rows {
        out.push_str(&format!("{},{}\n", csv_field(k), csv_field(v)));
    }
    out
}

/// Whitespace-separated convergence history: `k step_V apost apriori`.
pub fn convergence_dat(report: &IterationReport) -> String {
    let mut out = String::from("# k step_V apost apriori\n");
    for r in &report.iterates {
        out.push_str(&format!("{} {:e} {:e} {:e}\n", r.k, r.step_v, r.apost, r.apriori));
    }
    out
}

pub const CONVERGENCE_GP: &str = "\
set terminal pngcairo size 800,600
set output 'convergence.png'
set logscale y
set xlabel 'k'
set ylabel 'V-norm'
set key top right
plot 'convergence.dat' using 1:2 with linespoints title 'step', \\
     '' using 1:3 with lines title 'a-posteriori bound', \\
     '' using 1:4 with lines title 'a-priori bound'
";

pub const REGIME_GP: &str = "\
set terminal pngcairo size 800,600
set output 'regime.png'
set logscale y
set xlabel 'swept value'
set ylabel 'contraction factor'
set key top left
plot 'regime.dat' using 1:2 with linespoints title 'sigma_f', \\
     '' using 1:3 with linespoints title 'smallness ratio', \\
     1 with lines dashtype 2 title 'threshold'
";
