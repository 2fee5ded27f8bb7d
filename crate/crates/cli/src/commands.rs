use std::f64::consts::PI;
use std::path::Path;

use delaytherm::chareq::spectral_abscissa;
use delaytherm::model::{SystemSpec, Variant};
use delaytherm::presets::{self, default_xi, preset_eigenvalues, PresetName};
use delaytherm::regions::{predict, rational_grid, sweep_grid, Budget, SweepParams, Thresholds};
use delaytherm::resolvent::{growth_exponent_fit, log_grid, mode_peaks, resolvent_sweep};
use delaytherm::suites::{run_suite, SuiteName, SuiteReport, ALL_SUITES};
use delaytherm::timesim::{simulate as run_simulation, InitialData, RunStatus};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{manifest, manifest_path, num, opt_num, print_json, write_json, Table};
use crate::{CheckArgs, PresetsArgs, ResolventArgs, SimulateArgs, SpecArgs, SpectrumArgs, SweepArgs};

fn eigenvalues(length: f64, power: i32, j_max: usize) -> Result<Vec<f64>, CliError> {
    if !(length.is_finite() && length > 0.0) {
        return Err(CliError::Validation(format!("length must be > 0, got {length}")));
    }
    if !(1..=8).contains(&power) {
        return Err(CliError::Validation(format!("power must lie in 1..=8, got {power}")));
    }
    if j_max == 0 {
        return Err(CliError::Validation("j-max must be at least 1".into()));
    }
    Ok((1..=j_max).map(|j| (j as f64 * PI / length).powi(power)).collect())
}

/// Resolves the system flags into a system and its eigenvalue list.
pub fn build_spec(args: &SpecArgs) -> Result<(SystemSpec, Vec<f64>), CliError> {
    let (variant, point, eigs) = match &args.preset {
        Some(name) => {
            let p: PresetName = name.parse()?;
            if args.variant.is_some() || args.power.is_some() {
                return Err(CliError::Validation("--variant and --power are fixed by --preset".into()));
            }
            (p.variant(), Some(p.point()), preset_eigenvalues(p, args.length.unwrap_or(1.0), args.j_max)?)
        }
        None => {
            let v: Variant = args
                .variant
                .as_deref()
                .ok_or_else(|| CliError::Validation("either --preset or --variant is required".into()))?
                .parse()?;
            (v, None, eigenvalues(args.length.unwrap_or(PI), args.power.unwrap_or(4), args.j_max)?)
        }
    };
    let beta = args.beta.or(point.map(|p| p.0)).ok_or_else(|| CliError::Validation("--beta is required".into()))?;
    let alpha =
        args.alpha.or(point.map(|p| p.1)).ok_or_else(|| CliError::Validation("--alpha is required".into()))?;
    let a = args.a.unwrap_or(match variant {
        Variant::DelayElastic => 1.0,
        Variant::DelayHeat => 2.0,
    });
    let xi = args.xi.unwrap_or_else(|| default_xi(variant, a, args.tau));
    let spec = if args.probe {
        SystemSpec::probe(variant, beta, alpha, a, args.kappa, args.tau, xi)?
    } else {
        SystemSpec::new(variant, beta, alpha, a, args.kappa, args.tau, xi)?
    };
    Ok((spec, eigs))
}

fn spec_json(spec: &SystemSpec, eigs: &[f64]) -> Value {
    json!({
        "spec": spec,
        "region": spec.region().as_str(),
        "eigenvalues": eigs,
    })
}

/// Writes the table and, when it goes to a file, the manifest next to it and
/// a short JSON summary on stdout.
fn finish<C: serde::Serialize>(
    command: &str,
    config: &C,
    output: Option<&Path>,
    table: &Table,
    result: Value,
) -> Result<(), CliError> {
    table.emit(output)?;
    if let Some(path) = output {
        write_json(&manifest_path(path), &manifest(command, config, &result)?)?;
        print_json(&result)?;
    }
    Ok(())
}

pub fn spectrum(args: &SpectrumArgs) -> Result<(), CliError> {
    let (spec, eigs) = build_spec(&args.spec)?;
    let ab = spectral_abscissa(&spec, &eigs, None)?;
    let mut table = Table::new(&["j", "lambda", "root_re", "root_im", "residual", "converged"]);
    for (j, (lam, root)) in eigs.iter().zip(&ab.per_mode).enumerate() {
        table.push(vec![
            (j + 1).to_string(),
            num(*lam),
            opt_num(root.map(|r| r.value.re)),
            opt_num(root.map(|r| r.value.im)),
            opt_num(root.map(|r| r.residual)),
            root.map_or_else(String::new, |r| r.converged.to_string()),
        ]);
    }
    let result = json!({
        "system": spec_json(&spec, &eigs),
        "abscissa": ab.value,
        "witness_mode": ab.witness.map(|j| j + 1),
        "prediction": predict(&spec),
    });
    finish("spectrum", args, args.output.as_deref(), &table, result)
}

pub fn resolvent(args: &ResolventArgs) -> Result<(), CliError> {
    let (spec, eigs) = build_spec(&args.spec)?;
    let peaks = mode_peaks(&spec, &eigs, args.n_rho, args.per_decade)?;
    let samples: Vec<_> = peaks.iter().map(|p| p.as_sample()).collect();
    let fit = match growth_exponent_fit(&samples) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let mut table = Table::new(&["j", "lambda", "omega", "norm"]);
    if args.full {
        if !(args.decades > 0.0 && args.decades.is_finite()) {
            return Err(CliError::Validation(format!("decades must be > 0, got {}", args.decades)));
        }
        let top = eigs.iter().copied().fold(0.0, f64::max).sqrt();
        let grid = log_grid(0.1, top * 10f64.powf(args.decades), args.per_decade)?;
        for s in resolvent_sweep(&spec, &eigs, &grid, args.n_rho)? {
            table.push(vec![(s.mode_index + 1).to_string(), num(s.lambda_j), num(s.omega), num(s.norm)]);
        }
    } else {
        for p in &peaks {
            table.push(vec![(p.mode_index + 1).to_string(), num(p.lambda_j), num(p.omega), num(p.norm)]);
        }
    }
    let result = json!({
        "system": spec_json(&spec, &eigs),
        "envelope_max": peaks.iter().map(|p| p.norm).fold(0.0, f64::max),
        "growth_fit": fit,
    });
    finish("resolvent", args, args.output.as_deref(), &table, result)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, eigs) = build_spec(&args.spec)?;
    if args.every == 0 {
        return Err(CliError::Validation("every must be at least 1".into()));
    }
    let init = InitialData::smooth_default(&spec, &eigs)?;
    let traj = run_simulation(&spec, &eigs, &init, args.t_end, args.dt)?;
    let series = traj.energy_series(args.every)?;
    let mut table = Table::new(&["t", "E"]);
    for (t, e) in series.times.iter().zip(&series.energy) {
        table.push(vec![num(*t), num(*e)]);
    }
    if let Some(path) = &args.modes_output {
        let mut modes = Table::new(&["t", "j", "u", "v", "theta"]);
        for k in (0..traj.times.len()).step_by(args.every) {
            for (j, st) in traj.states.iter().enumerate() {
                let [u, v, th] = st[k];
                modes.push(vec![num(traj.times[k]), (j + 1).to_string(), num(u), num(v), num(th)]);
            }
        }
        modes.emit(Some(path))?;
    }
    let status = match traj.status {
        RunStatus::Completed => json!({ "completed": true }),
        RunStatus::BlowUp { t } => json!({ "completed": false, "blow_up_at": t }),
    };
    if let RunStatus::BlowUp { t } = traj.status {
        eprintln!("delaytherm: solution exceeded the blow-up bound at t = {t}; output truncated");
    }
    let result = json!({
        "system": spec_json(&spec, &eigs),
        "step": traj.dt,
        "t_end": traj.t_end(),
        "status": status,
        "energy_initial": series.energy.first(),
        "energy_final": series.energy.last(),
    });
    finish("simulate", args, args.output.as_deref(), &table, result)
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let variant: Variant = args.variant.parse()?;
    let budget: Budget = args.budget.parse()?;
    if args.grid < 2 {
        return Err(CliError::Validation(format!("grid needs at least 2 points per side, got {}", args.grid)));
    }
    let eigs = eigenvalues(args.length, args.power, args.j_max)?;
    let params = SweepParams { variant, a: args.a, kappa: args.kappa, tau: args.tau, xi: args.xi, probe: args.probe };
    // Validate the shared parameters once, at a point inside Q.
    let xi = args.xi.unwrap_or_else(|| default_xi(variant, args.a, args.tau));
    if args.probe {
        SystemSpec::probe(variant, 0.5, 0.5, args.a, args.kappa, args.tau, xi)?;
    } else {
        SystemSpec::new(variant, 0.5, 0.5, args.a, args.kappa, args.tau, xi)?;
    }
    let th = Thresholds { n_rho: args.n_rho, ..Thresholds::default() };
    let points = rational_grid(args.grid as i64 - 1)?;
    let table = sweep_grid(&params, &points, &eigs, budget, &th);
    let csv = table.to_csv();
    let summary = table.summary();
    let result = json!({ "summary": summary, "eigenvalues": eigs });
    match &args.output {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
            write_json(&manifest_path(path), &manifest("sweep", args, &json!({ "summary": summary, "rows": table.rows, "eigenvalues": eigs }))?)?;
            print_json(&result)?;
        }
        None => print!("{csv}"),
    }
    if summary.inconclusive > 0 {
        eprintln!("delaytherm: {} point(s) inconclusive", summary.inconclusive);
    }
    Ok(())
}

pub fn presets(args: &PresetsArgs) -> Result<(), CliError> {
    let list = presets::list();
    match &args.output {
        Some(path) => {
            let mut table = Table::new(&["name", "variant", "beta", "alpha", "eigenvalues", "expectation"]);
            for p in &list {
                table.push(vec![
                    p.name.into(),
                    p.variant.into(),
                    p.beta.to_string(),
                    p.alpha.to_string(),
                    p.eigenvalues.into(),
                    serde_json::to_string(&p.expectation)?,
                ]);
            }
            finish("presets", args, Some(path), &table, json!(list))
        }
        None => print_json(&json!(list)),
    }
}

fn report_json(r: &SuiteReport) -> Value {
    json!({
        "suite": r.suite.as_str(),
        "seed": r.seed,
        "passed": r.passed(),
        "properties": r.properties,
    })
}

pub fn check(args: &CheckArgs) -> Result<(), CliError> {
    let names: Vec<SuiteName> = if args.suite == "all" { ALL_SUITES.to_vec() } else { vec![args.suite.parse()?] };
    let reports: Vec<SuiteReport> = names.iter().map(|&n| run_suite(n, args.seed)).collect::<Result<_, _>>()?;
    let passed = reports.iter().all(|r| r.passed());
    let value = if reports.len() == 1 {
        report_json(&reports[0])
    } else {
        json!({ "seed": args.seed, "passed": passed, "suites": reports.iter().map(report_json).collect::<Vec<_>>() })
    };
    match &args.output {
        Some(path) => {
            write_json(path, &value)?;
            write_json(&manifest_path(path), &manifest("check", args, &json!({ "passed": passed }))?)?;
        }
        None => print_json(&value)?,
    }
    if passed {
        Ok(())
    } else {
        let failed: Vec<String> = reports
            .iter()
            .flat_map(|r| r.properties.iter().filter(|p| !p.ok()).map(move |p| format!("{}: {}", r.suite.as_str(), p.name)))
            .collect();
        Err(CliError::Numerical(format!("property failures: {}", failed.join("; "))))
    }
}
