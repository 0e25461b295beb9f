//! Experiment configuration, MPC files and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::harness::{ExperimentConfig, RmseReport};
use crate::observation::{MeasuredMpc, Observation, ObserverSets};

/// Header of MPC files.
pub const MPC_HEADER: [&str; 8] = ["node", "observer", "mpc", "delay_ns", "dir_x", "dir_y", "dir_z", "sigma_ns"];

/// Header of report files.
pub const REPORT_HEADER: &str = "sweep_var,sweep_value,estimator,rmse_m,bias_m,median_abs_err_m,trials,failures,stderr_m";

/// Parses and validates a JSON experiment configuration; missing keys take their defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate().map_err(|e| match e {
        Error::ConfigInvalid { field, message } => Error::Validation { field, message },
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    A,
    B,
}

fn schema(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: u64, field: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| schema(line, format!("invalid {field} `{s}`")))
}

fn parse_optional_f64(line: u64, field: &str, s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    let v: f64 = parse_num(line, field, s)?;
    if !v.is_finite() {
        return Err(schema(line, format!("{field} must be finite")));
    }
    Ok(Some(v))
}

/// Reads MPC sets from CSV text.
///
/// Observers appear in ascending observer index. Within each observer and
/// side, MPCs are ordered by MPC index, so rows with equal MPC indices on
/// both sides form an associated pair.
pub fn read_mpc_str(text: &str) -> Result<Observation> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != MPC_HEADER {
        return Err(Error::Schema(format!(
            "header must be `{}`, got `{}`",
            MPC_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: BTreeMap<usize, BTreeMap<(Node, usize), MeasuredMpc>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let node = match rec.get(0) {
            Some("A") | Some("a") => Node::A,
            Some("B") | Some("b") => Node::B,
            other => return Err(schema(line, format!("node must be A or B, got `{}`", other.unwrap_or("")))),
        };
        let observer: usize = parse_num(line, "observer", &rec[1])?;
        let mpc: usize = parse_num(line, "mpc", &rec[2])?;
        let delay: f64 = parse_num(line, "delay_ns", &rec[3])?;
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(schema(line, format!("delay_ns must be finite and non-negative, got {delay}")));
        }
        let comps = [
            parse_optional_f64(line, "dir_x", &rec[4])?,
            parse_optional_f64(line, "dir_y", &rec[5])?,
            parse_optional_f64(line, "dir_z", &rec[6])?,
        ];
        let dir = match comps {
            [Some(x), Some(y), Some(z)] => {
                let v = Vec3::new(x, y, z);
                let n = v.norm();
                if !(n > 0.0) {
                    return Err(schema(line, "direction must be non-zero"));
                }
                Some(v / n)
            }
            [None, None, None] => None,
            _ => return Err(schema(line, "direction components must be all present or all absent")),
        };
        let sigma = parse_optional_f64(line, "sigma_ns", &rec[7])?;
        if sigma.is_some_and(|s| s < 0.0) {
            return Err(schema(line, "sigma_ns must be non-negative"));
        }
        let m = MeasuredMpc {
            delay_ns: delay,
            dir,
            sigma_ns: sigma,
            observer_dir: None,
        };
        if groups.entry(observer).or_default().insert((node, mpc), m).is_some() {
            return Err(schema(line, format!("duplicate row for node {node:?}, observer {observer}, mpc {mpc}")));
        }
    }
    let observers = groups
        .into_values()
        .map(|rows| {
            let mut sets = ObserverSets::default();
            for ((node, _), m) in rows {
                match node {
                    Node::A => sets.a.push(m),
                    Node::B => sets.b.push(m),
                }
            }
            sets
        })
        .collect();
    Ok(Observation { observers })
}

pub fn read_mpc_file(path: &Path) -> Result<Observation> {
    read_mpc_str(&std::fs::read_to_string(path)?)
}

/// Renders an observation as MPC CSV with full float precision.
pub fn mpc_to_csv_string(obs: &Observation) -> String {
    let mut out = MPC_HEADER.join(",");
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    for (o, s) in obs.observers.iter().enumerate() {
        for (node, set) in [("A", &s.a), ("B", &s.b)] {
            for (k, m) in set.iter().enumerate() {
                let (x, y, z) = match m.dir {
                    Some(d) => (Some(d.x), Some(d.y), Some(d.z)),
                    None => (None, None, None),
                };
                let _ = writeln!(
                    out,
                    "{node},{o},{k},{:?},{},{},{},{}",
                    m.delay_ns,
                    opt(x),
                    opt(y),
                    opt(z),
                    opt(m.sigma_ns)
                );
            }
        }
    }
    out
}

pub fn write_mpc_file(obs: &Observation, path: &Path) -> Result<()> {
    std::fs::write(path, mpc_to_csv_string(obs))?;
    Ok(())
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    }
}

/// Renders a report as CSV, rows sorted by sweep value and estimator name.
pub fn report_to_csv_string(report: &RmseReport) -> String {
    let mut rows: Vec<_> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.estimator.name().cmp(b.estimator.name()))
    });
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            report.sweep_var,
            format_sig9(r.sweep_value),
            r.estimator.name(),
            format_sig9(r.rmse_m),
            format_sig9(r.bias_m),
            format_sig9(r.median_abs_err_m),
            r.trials,
            r.failures,
            format_sig9(r.stderr_m)
        );
    }
    out
}

pub fn write_report_csv(report: &RmseReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_csv_string(report))?;
    Ok(())
}
