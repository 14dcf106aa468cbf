//! The non-simulation subcommands: `estimate`, `losses`, `samplesize` and
//! `verify`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};

use restricted_loss::estimators::{
    historical_placebo_rate, interval_estimate, precautionary_estimate, required_sample_size, scale_mean,
};
use restricted_loss::moments::{truncated_normal_grid, ANALYTIC_GRID_NODES};
use restricted_loss::spaces::symmetric_counterpart;
use restricted_loss::verify::{run_family, Family};
use restricted_loss::{LossFunction, LossKind, ParameterSpace, PosteriorModel};

use crate::config::{ConfigFile, Settings};
use crate::CliError;

fn io_err(e: io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn pair(s: &Settings, key: &str) -> Result<Option<(f64, f64)>, CliError> {
    if s.get(key).is_empty() {
        return Ok(None);
    }
    match s.parse_list::<f64>(key)?[..] {
        [a, b] => Ok(Some((a, b))),
        _ => Err(CliError::Usage(format!(
            "{key} takes two numbers, got '{}'",
            s.get(key)
        ))),
    }
}

pub fn estimate(flags: &BTreeMap<String, String>, file: &ConfigFile) -> Result<(), CliError> {
    let defaults = [
        ("beta", String::new()),
        ("truncnorm", String::new()),
        ("mc", String::new()),
        ("loss", "sq".to_string()),
        ("k", "1".to_string()),
        ("interval", String::new()),
    ];
    let s = Settings::resolve(&defaults, flags, file)?;
    let given: Vec<&str> = ["beta", "truncnorm", "mc"]
        .into_iter()
        .filter(|k| !s.get(k).is_empty())
        .collect();
    if given.len() != 1 {
        return Err(CliError::Usage(
            "give exactly one of --beta, --truncnorm and --mc".into(),
        ));
    }
    let loss = s.get("loss");
    let k = match loss {
        "scale" => Some(s.parse::<f64>("k")?),
        "sq" | "prec" | "iq" => None,
        other => return Err(CliError::Usage(format!("unknown loss '{other}' (sq, prec, scale, iq)"))),
    };
    let interval = pair(&s, "interval")?;
    if loss == "iq" && interval.is_none() {
        return Err(CliError::Usage("--loss iq needs --interval a b".into()));
    }

    let posterior = match given[0] {
        "beta" => match s.parse_list::<u64>("beta")?[..] {
            [x, n] => PosteriorModel::BetaConjugate {
                successes: x,
                trials: n,
            },
            _ => return Err(CliError::Usage("--beta takes two counts: x n".into())),
        },
        "truncnorm" => match s.parse_list::<f64>("truncnorm")?[..] {
            // E[θ^-k] needs the density itself, so the scale mean integrates it
            [c, sd, a, b] if k.is_some() => {
                PosteriorModel::Grid1D(truncated_normal_grid(c, sd, a, b, ANALYTIC_GRID_NODES)?)
            }
            [c, sd, a, b] => PosteriorModel::TruncatedNormal {
                center: c,
                sd,
                lower: a,
                upper: b,
            },
            _ => return Err(CliError::Usage("--truncnorm takes four numbers: center sd a b".into())),
        },
        _ => {
            let path = s.get("mc");
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
            let samples = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| CliError::Usage(format!("bad sample '{t}' in {path}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            PosteriorModel::MonteCarlo(samples)
        }
    };
    let m = posterior.moments(k)?;
    let (point, risk) = match loss {
        "sq" => (m.m1, Some(m.variance())),
        "prec" => {
            let e = precautionary_estimate(&m)?;
            (e.point, e.achieved_risk)
        }
        "scale" => {
            let e = scale_mean(&m)?;
            (e.point, e.achieved_risk)
        }
        _ => {
            let (a, b) = interval.expect("checked");
            let e = interval_estimate(&m, a, b)?;
            (e.point, e.achieved_risk)
        }
    };
    let mut out = io::stdout().lock();
    s.write_header(&mut out, "estimate").map_err(io_err)?;
    let risk = risk.map(|r| r.to_string()).unwrap_or_else(|| "NA".into());
    writeln!(out, "{point} {risk}").map_err(io_err)
}

fn loss_kind(s: &Settings) -> Result<LossKind, CliError> {
    let interval = || -> Result<(f64, f64), CliError> {
        pair(s, "interval")?.ok_or_else(|| CliError::Usage("interval losses need --interval a b".into()))
    };
    Ok(match s.get("loss") {
        "sq" => LossKind::SquaredError,
        "prec" => LossKind::Precautionary,
        "scale" => LossKind::ScaleFamily { k: s.parse("k")? },
        "sip" => LossKind::ScaleInvariantPrecautionary,
        "nsq" => LossKind::NormalizedSquared,
        "stein" => LossKind::Stein,
        "brown" => LossKind::BrownLog,
        "iq" => {
            let (a, b) = interval()?;
            LossKind::IntervalSquared { a, b }
        }
        "iq-brown" => {
            let (a, b) = interval()?;
            LossKind::IntervalBrownLogit { a, b }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown loss '{other}' (sq, prec, scale, sip, nsq, stein, brown, iq, iq-brown)"
            )))
        }
    })
}

/// Tabulates a loss over decisions `d` at fixed `θ`, with each decision's
/// symmetric counterpart and the loss there.
pub fn losses(flags: &BTreeMap<String, String>, file: &ConfigFile) -> Result<(), CliError> {
    let defaults = [
        ("loss", "scale".to_string()),
        ("k", "1".to_string()),
        ("interval", "0,1".to_string()),
        ("theta", String::new()),
        ("from", String::new()),
        ("to", String::new()),
        ("points", "201".to_string()),
    ];
    let s = Settings::resolve(&defaults, flags, file)?;
    let loss = LossFunction::new(loss_kind(&s)?)?;
    let space = loss.space().clone();
    let theta: f64 = match s.get("theta") {
        "" => match space {
            ParameterSpace::Interval { a, b } => 0.5 * (a + b),
            _ => 1.0,
        },
        _ => s.parse("theta")?,
    };
    let (lo, hi) = match space {
        ParameterSpace::PositiveHalfLine => (theta / 10.0, 10.0 * theta),
        ParameterSpace::Interval { a, b } => (a + 1e-3 * (b - a), b - 1e-3 * (b - a)),
        _ => (theta - 3.0, theta + 3.0),
    };
    let from = if s.get("from").is_empty() { lo } else { s.parse("from")? };
    let to = if s.get("to").is_empty() { hi } else { s.parse("to")? };
    let points: usize = s.parse("points")?;
    if points < 2 || !(from < to) {
        return Err(CliError::Usage(format!(
            "need points >= 2 and from < to, got {points}, ({from}, {to})"
        )));
    }
    let geometric = space == ParameterSpace::PositiveHalfLine && from > 0.0;
    let mut out = io::stdout().lock();
    s.write_header(&mut out, "losses").map_err(io_err)?;
    writeln!(out, "theta,d,loss,counterpart,loss_at_counterpart").map_err(io_err)?;
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let d = if geometric {
            from * (to / from).powf(t)
        } else {
            from + t * (to - from)
        };
        let value = loss.evaluate_scalar(theta, d)?;
        let (c, lc) = match symmetric_counterpart(&space, theta, d) {
            Ok(c) => (format!("{c:e}"), format!("{:e}", loss.evaluate_scalar(theta, c)?)),
            Err(_) => (String::new(), String::new()),
        };
        writeln!(out, "{theta:e},{d:e},{value:e},{c},{lc}").map_err(io_err)?;
    }
    Ok(())
}

pub fn samplesize(flags: &BTreeMap<String, String>, file: &ConfigFile) -> Result<(), CliError> {
    let defaults = [
        ("x", String::new()),
        ("n", String::new()),
        ("interval", "0.1,1".to_string()),
        ("target", "0.5".to_string()),
        ("alpha", "0.05".to_string()),
        ("power", "0.9".to_string()),
        ("p-placebo", String::new()),
    ];
    let s = Settings::resolve(&defaults, flags, file)?;
    let target: f64 = s.parse("target")?;
    let alpha: f64 = s.parse("alpha")?;
    let power: f64 = s.parse("power")?;
    let mut out = io::stdout().lock();
    if !s.get("p-placebo").is_empty() {
        let p: f64 = s.parse("p-placebo")?;
        let n = required_sample_size(target, p, alpha, 1.0 - power)?;
        s.write_header(&mut out, "samplesize").map_err(io_err)?;
        return writeln!(out, "p_placebo={p} n={n}").map_err(io_err);
    }
    if s.get("x").is_empty() || s.get("n").is_empty() {
        return Err(CliError::Usage("give --x and --n, or --p-placebo".into()));
    }
    let (x, n): (u64, u64) = (s.parse("x")?, s.parse("n")?);
    let interval = pair(&s, "interval")?.expect("defaulted");
    let naive =
        historical_placebo_rate(x, n, None).and_then(|p| Ok((p, required_sample_size(target, p, alpha, 1.0 - power)?)));
    let iq = historical_placebo_rate(x, n, Some(interval))
        .and_then(|p| Ok((p, required_sample_size(target, p, alpha, 1.0 - power)?)));
    s.write_header(&mut out, "samplesize").map_err(io_err)?;
    let mut first_error = None;
    for (name, r) in [("naive", naive), ("iq", iq)] {
        match r {
            Ok((p, size)) => writeln!(out, "p_{name}={p} n_{name}={size}").map_err(io_err)?,
            Err(e) => {
                writeln!(out, "p_{name}=NA n_{name}=NA").map_err(io_err)?;
                if first_error.is_some() {
                    eprintln!("{name}: {e}");
                }
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn verify(flags: &BTreeMap<String, String>, file: &ConfigFile) -> Result<(), CliError> {
    let defaults = [("family", "all".to_string()), ("seed", "1".to_string())];
    let s = Settings::resolve(&defaults, flags, file)?;
    let seed: u64 = s.parse("seed")?;
    let families: Vec<Family> = match s.get("family") {
        "all" => Family::ALL.to_vec(),
        _ => s
            .parse_list::<String>("family")?
            .iter()
            .map(|f| {
                Family::from_name(f).ok_or_else(|| {
                    let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
                    CliError::Usage(format!("unknown family '{f}' (known: {})", known.join(", ")))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let mut out = io::stdout().lock();
    s.write_header(&mut out, "verify").map_err(io_err)?;
    let mut failed = 0;
    for f in families {
        let report = run_family(f, seed);
        if !report.passed() {
            failed += 1;
        }
        writeln!(out, "{report}").map_err(io_err)?;
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
