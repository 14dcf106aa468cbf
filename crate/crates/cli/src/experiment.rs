//! The experiment subcommands: settings to `ExperimentSpec`, run, CSV out.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use restricted_loss::sim::{
    self, default_grid, default_reps, lattice, CellKind, ExperimentSpec, GridPoint, Study, SweepResult,
};
use restricted_loss::CiKind;

use crate::config::{join_numbers, ConfigFile, Settings};
use crate::CliError;

/// Which experiment a subcommand runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Study(Study),
    /// The binomial study on the coverage grid.
    Coverage,
}

impl Experiment {
    pub fn study(&self) -> Study {
        match self {
            Experiment::Study(s) => *s,
            Experiment::Coverage => Study::BinomialProbability,
        }
    }

    pub fn command(&self) -> &'static str {
        match self {
            Experiment::Study(s) => s.name(),
            Experiment::Coverage => "coverage",
        }
    }
}

/// Every setting the experiment understands with its built-in default.
/// The normal study's default grid depends on `a`, so it is filled in later.
fn defaults(exp: Experiment) -> Vec<(&'static str, String)> {
    let study = exp.study();
    let base = ExperimentSpec::new(study);
    let x = &base.extras;
    let mut d = vec![
        ("n", base.n.to_string()),
        ("reps", default_reps(study).to_string()),
        ("seed", base.seed.to_string()),
        ("workers", "auto".to_string()),
        ("estimators", base.estimators.join(",")),
    ];
    let axis = |i: usize| {
        let mut v: Vec<f64> = Vec::new();
        for p in default_grid(study, x) {
            let c = if i == 0 {
                p.p1
            } else {
                p.p2.expect("two-parameter grid")
            };
            if !v.contains(&c) {
                v.push(c);
            }
        }
        join_numbers(v)
    };
    match exp {
        Experiment::Study(Study::BinomialProbability) => {
            d.push(("grid", axis(0)));
            d.push(("ci-kinds", kinds(&x.ci_kinds)));
            d.push(("level", x.level.to_string()));
        }
        Experiment::Coverage => {
            d.push(("grid", join_numbers((1..20).map(|i| i as f64 / 20.0))));
            d.push(("ci-kinds", kinds(&x.ci_kinds)));
            d.push(("level", x.level.to_string()));
        }
        Experiment::Study(Study::RestrictedNormalMean) => {
            d.push(("grid", String::new()));
            d.push(("sigma2", x.sigma2.to_string()));
            d.push(("a", x.a.to_string()));
        }
        Experiment::Study(s @ (Study::GammaParams | Study::WeibullParams)) => {
            d.push(("grid", axis(0)));
            d.push(("grid2", axis(1)));
            d.push(("prior-shape", x.prior_shape.to_string()));
            d.push(("prior-rate", x.prior_rate.to_string()));
            d.push(("grid-nodes", x.grid_nodes.to_string()));
            d.push(("params", "all".to_string()));
            if s == Study::WeibullParams {
                d.push(("k-list", join_numbers(x.k_list.iter().copied())));
            }
        }
    }
    d
}

fn kinds(ks: &[CiKind]) -> String {
    ks.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")
}

/// Resolves the settings of an experiment subcommand.
pub fn settings(exp: Experiment, flags: &BTreeMap<String, String>, file: &ConfigFile) -> Result<Settings, CliError> {
    let mut s = Settings::resolve(&defaults(exp), flags, file)?;
    if exp.study() == Study::RestrictedNormalMean && s.get("grid").is_empty() {
        let mut x = ExperimentSpec::new(Study::RestrictedNormalMean).extras;
        x.a = s.parse("a")?;
        let grid = default_grid(Study::RestrictedNormalMean, &x).into_iter().map(|p| p.p1);
        s.set("grid", join_numbers(grid));
    }
    Ok(s)
}

pub fn spec_from(exp: Experiment, s: &Settings) -> Result<ExperimentSpec, CliError> {
    let study = exp.study();
    let mut spec = ExperimentSpec::new(study);
    spec.n = s.parse("n")?;
    spec.reps = s.parse("reps")?;
    spec.seed = s.parse("seed")?;
    spec.workers = match s.get("workers") {
        "auto" => None,
        _ => Some(s.parse("workers")?),
    };
    spec.estimators = s.parse_list("estimators")?;
    let g1: Vec<f64> = s.parse_list("grid")?;
    let x = &mut spec.extras;
    match study {
        Study::BinomialProbability => {
            spec.grid = g1.into_iter().map(GridPoint::one).collect();
            x.ci_kinds = s
                .parse_list::<String>("ci-kinds")?
                .iter()
                .map(|k| CiKind::from_name(k).ok_or_else(|| CliError::Usage(format!("unknown interval kind '{k}'"))))
                .collect::<Result<_, _>>()?;
            x.level = s.parse("level")?;
        }
        Study::RestrictedNormalMean => {
            spec.grid = g1.into_iter().map(GridPoint::one).collect();
            x.sigma2 = s.parse("sigma2")?;
            x.a = s.parse("a")?;
        }
        Study::GammaParams | Study::WeibullParams => {
            spec.grid = lattice(&g1, &s.parse_list::<f64>("grid2")?);
            x.prior_shape = s.parse("prior-shape")?;
            x.prior_rate = s.parse("prior-rate")?;
            x.grid_nodes = s.parse("grid-nodes")?;
            x.params = match s.get("params") {
                "all" => Vec::new(),
                _ => s.parse_list("params")?,
            };
            if study == Study::WeibullParams {
                x.k_list = s.parse_list("k-list")?;
            }
        }
    }
    Ok(spec)
}

/// Runs the experiment, writes the CSV (to `output` or the standard stream)
/// and prints a summary.
pub fn run(exp: Experiment, s: &Settings, output: Option<&std::path::Path>) -> Result<(), CliError> {
    let spec = spec_from(exp, s)?;
    let result = sim::run_study(&spec)?;
    match output {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_output(&mut w, exp, s, &result).map_err(|e| CliError::Io(e.to_string()))?;
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            summarize(io::stdout().lock(), exp, &result, Some(path)).map_err(|e| CliError::Io(e.to_string()))?;
        }
        None => {
            write_output(io::stdout().lock(), exp, s, &result).map_err(|e| CliError::Io(e.to_string()))?;
            summarize(io::stderr().lock(), exp, &result, None).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn write_output(mut w: impl Write, exp: Experiment, s: &Settings, r: &SweepResult) -> io::Result<()> {
    s.write_header(&mut w, exp.command())?;
    r.write_csv(w)
}

fn summarize(mut w: impl Write, exp: Experiment, r: &SweepResult, path: Option<&std::path::Path>) -> io::Result<()> {
    let spec = &r.spec;
    writeln!(
        w,
        "{}: {} grid points, {} replications each, n = {}, seed {}, {} aborted replications",
        exp.command(),
        spec.grid.len(),
        spec.reps,
        spec.n,
        spec.seed,
        r.aborted
    )?;
    // averages over the grid per estimator, in first-appearance order
    let mut names: Vec<(&str, Option<f64>, CellKind)> = Vec::new();
    for c in &r.cells {
        if !names.iter().any(|(n, k, _)| *n == c.estimator && *k == c.k) {
            names.push((&c.estimator, c.k, c.kind));
        }
    }
    for (name, k, kind) in names {
        let cells: Vec<_> = r.cells.iter().filter(|c| c.estimator == name && c.k == k).collect();
        let mean = cells.iter().map(|c| c.mse).sum::<f64>() / cells.len() as f64;
        let label = match k {
            Some(k) => format!("{name} (k = {k})"),
            None => name.to_string(),
        };
        let what = if kind == CellKind::Difference {
            "mean MSE difference"
        } else {
            "mean MSE"
        };
        write!(w, "  {label}: {what} {mean:.6e}")?;
        let mut kinds: Vec<CiKind> = Vec::new();
        for c in &cells {
            for (kind, _) in &c.coverage {
                if !kinds.contains(kind) {
                    kinds.push(*kind);
                }
            }
        }
        for kind in kinds {
            let min = cells
                .iter()
                .flat_map(|c| c.coverage.iter().filter(|(k, _)| *k == kind).map(|(_, v)| *v))
                .fold(f64::INFINITY, f64::min);
            write!(w, ", min {} coverage {min:.4}", kind.name())?;
        }
        writeln!(w)?;
    }
    if let Some(p) = path {
        writeln!(w, "wrote {}", p.display())?;
    }
    Ok(())
}
