//! Subcommand execution and exit-code mapping.

use std::io::Write;
use std::path::Path;

use gchs::bracket::StructuralSystem;
use gchs::dynamics::{format_g17, induced_canonical_system, integrate_checked};
use gchs::error::Error as GchsError;
use gchs::expr;
use gchs::fields::ScalarField;
use gchs::geodesic::{integrate_geodesic_checked, GeodesicState};
use gchs::manifold::Metric;
use gchs::presets;
use gchs::report::{run_identity_suite, SuiteOptions};

use crate::config::{Format, ScenarioArgs, ScenarioConfig};

pub enum Kind {
    Geodesic,
    Gchs,
    Check,
}

const EXIT_OK: i32 = 0;
const EXIT_IDENTITY_FAILURE: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_RUNTIME: i32 = 3;

pub fn dispatch(args: ScenarioArgs, kind: Kind) -> i32 {
    let cfg = match ScenarioConfig::resolve(&args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    if args.dump_config {
        print!("{}", cfg.dump());
        return EXIT_OK;
    }
    let result = match kind {
        Kind::Geodesic => cmd_geodesic(&cfg),
        Kind::Gchs => cmd_gchs(&cfg),
        Kind::Check => cmd_check(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn from_gchs(err: GchsError) -> CliError {
    let code = match err {
        GchsError::BlowUp { .. } | GchsError::OutOfChart | GchsError::SingularMetric { .. } => {
            EXIT_RUNTIME
        }
        _ => EXIT_CONFIG,
    };
    CliError {
        code,
        message: err.to_string(),
    }
}

fn load_manifold(cfg: &ScenarioConfig) -> Result<Metric, CliError> {
    let name = cfg
        .manifold
        .as_deref()
        .ok_or_else(|| config_err("--manifold is required (preset name or metric file)"))?;
    if presets::MANIFOLD_PRESETS.contains(&name) {
        presets::manifold_preset(name, cfg.dim).map_err(|e| config_err(e.to_string()))
    } else if Path::new(name).exists() {
        expr::load_metric(Path::new(name)).map_err(|e| config_err(e.to_string()))
    } else {
        Err(config_err(format!(
            "manifold '{name}' is neither a preset {:?} nor a readable file",
            presets::MANIFOLD_PRESETS
        )))
    }
}

fn load_system(cfg: &ScenarioConfig) -> Result<Option<StructuralSystem>, CliError> {
    let Some(name) = cfg.system.as_deref() else {
        return Ok(None);
    };
    let sys = if presets::SYSTEM_PRESETS.contains(&name) {
        let dim = cfg.dim.or_else(|| cfg.x0.as_ref().map(|v| v.len()));
        presets::system_preset(name, dim).map_err(|e| config_err(e.to_string()))?
    } else if Path::new(name).exists() {
        expr::load_system(Path::new(name), cfg.fd_step).map_err(|e| config_err(e.to_string()))?
    } else {
        return Err(config_err(format!(
            "system '{name}' is neither a preset {:?} nor a readable file",
            presets::SYSTEM_PRESETS
        )));
    };
    Ok(Some(sys))
}

fn write_output(cfg: &ScenarioConfig, body: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError {
            code: EXIT_RUNTIME,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{body}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn geodesic_csv(metric: &Metric, states: &[GeodesicState]) -> String {
    let n = metric.dim();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("v{i}")));
    cols.push("speed2".into());
    let mut out = cols.join(",");
    out.push('\n');
    for s in states {
        let mut row = vec![format_g17(s.t)];
        row.extend(s.x.iter().map(|v| format_g17(*v)));
        row.extend(s.v.iter().map(|v| format_g17(*v)));
        row.push(format_g17(s.speed2(metric).unwrap_or(f64::NAN)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn geodesic_json(metric: &Metric, states: &[GeodesicState]) -> String {
    let n = metric.dim();
    let mut records = Vec::with_capacity(states.len());
    for s in states {
        let mut obj = serde_json::Map::new();
        obj.insert("t".into(), s.t.into());
        for i in 0..n {
            obj.insert(format!("x{}", i + 1), s.x[i].into());
        }
        for i in 0..n {
            obj.insert(format!("v{}", i + 1), s.v[i].into());
        }
        obj.insert("speed2".into(), s.speed2(metric).unwrap_or(f64::NAN).into());
        records.push(serde_json::Value::Object(obj));
    }
    let mut body = serde_json::to_string_pretty(&records).expect("serializable");
    body.push('\n');
    body
}

fn cmd_geodesic(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let metric = load_manifold(cfg)?;
    let x0 = cfg
        .x0
        .as_ref()
        .ok_or_else(|| config_err("--x0 is required"))?;
    let v0 = cfg
        .v0
        .as_ref()
        .ok_or_else(|| config_err("--v0 is required"))?;
    if x0.len() != metric.dim() || v0.len() != metric.dim() {
        return Err(config_err(format!(
            "x0/v0 must have {} components for manifold '{}'",
            metric.dim(),
            metric.name()
        )));
    }

    let (states, failure) =
        integrate_geodesic_checked(&metric, x0, v0, cfg.t0, cfg.t1, cfg.dt).map_err(from_gchs)?;
    let body = match cfg.format {
        Format::Csv => geodesic_csv(&metric, &states),
        Format::Json => geodesic_json(&metric, &states),
    };
    write_output(cfg, &body)?;
    if let Some(err) = failure {
        if let Some(last) = states.last() {
            eprintln!(
                "error: {err}; last valid state t = {}, x = {:?}, v = {:?}",
                last.t, last.x, last.v
            );
        } else {
            eprintln!("error: {err}");
        }
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

/// Resolve one --track token: the Hamiltonian, the structure function, a
/// coordinate name, or an expression over x1..xm.
fn tracked_field(token: &str, sys: &StructuralSystem) -> Result<ScalarField, CliError> {
    match token {
        "H" => Ok(sys.hamiltonian().clone()),
        "s" => Ok(sys.structure_function().clone()),
        other => {
            let e = expr::parse_expr(other, sys.dim())
                .map_err(|e| config_err(format!("--track '{other}': {e}")))?;
            Ok(ScalarField::new(move |x: &[f64]| e.eval(x)).named(other))
        }
    }
}

fn cmd_gchs(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let sys = match load_system(cfg)? {
        Some(sys) => sys,
        None => {
            // with only a manifold, run its induced canonical system
            let metric = load_manifold(cfg).map_err(|_| {
                config_err("--system is required (preset name, file, or give --manifold)")
            })?;
            let n = metric.dim();
            let h =
                ScalarField::new(move |x: &[f64]| 0.5 * x[n..].iter().map(|p| p * p).sum::<f64>())
                    .named("H");
            induced_canonical_system(&metric, h)
        }
    };
    let x0 = cfg
        .x0
        .as_ref()
        .ok_or_else(|| config_err("--x0 is required"))?;
    if x0.len() != sys.dim() {
        return Err(config_err(format!(
            "x0 must have {} components for this system",
            sys.dim()
        )));
    }
    let mut fields = Vec::new();
    for token in &cfg.track {
        fields.push(tracked_field(token, &sys)?);
    }

    let (traj, failure) =
        integrate_checked(&sys, &fields, x0, cfg.t0, cfg.t1, cfg.dt).map_err(from_gchs)?;
    let mut buf = Vec::new();
    match cfg.format {
        Format::Csv => traj.write_csv(&mut buf),
        Format::Json => traj.write_json(&mut buf),
    }
    .map_err(from_gchs)?;
    write_output(cfg, &String::from_utf8_lossy(&buf))?;
    if let Some(err) = failure {
        if let Some(last) = traj.final_state() {
            eprintln!(
                "error: {err}; last valid state t = {}, x = {:?}",
                last.t, last.x
            );
        } else {
            eprintln!("error: {err}");
        }
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn cmd_check(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let metric = load_manifold(cfg)?;
    let sys = load_system(cfg)?;
    let opts = SuiteOptions {
        samples: cfg.samples,
        ..SuiteOptions::default()
    };
    let report = run_identity_suite(&metric, sys.as_ref(), opts).map_err(from_gchs)?;
    println!("{}", report.render_table());
    if let Some(path) = &cfg.output {
        std::fs::write(path, report.to_json() + "\n").map_err(|e| CliError {
            code: EXIT_RUNTIME,
            message: format!("cannot write {}: {e}", path.display()),
        })?;
    }
    if report.all_pass() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_IDENTITY_FAILURE)
    }
}
