use std::path::Path;

use affine_sobolev::energy::{
    affine_sobolev_j2, energy_report, energy_via_sampled_min, gram_matrix, j2_by_sphere_integral, min_directions,
    SampledMinOptions, DEFAULT_MAX_CONDITION, ENERGY_CSV_HEADER,
};
use affine_sobolev::field::measure::MeasureOptions;
use affine_sobolev::field::stencil::lp_norm_pow;
use affine_sobolev::field::{liminf_measure_estimate, ScalarField, UnimodularTransform};
use affine_sobolev::profiles::{brezis_lieb_masses, extract_profiles, normalize_sequence, ProfileReport};
use affine_sobolev::solvers::{
    classical_ground_state, critical_bubble_check, ground_state, penalty_ground_state, solve_affine_poisson,
    SolveReport,
};
use serde_json::{json, Value};

use crate::config::{default_transforms, matrix, ProblemConfig};
use crate::CliError;

/// Everything a command produces; nothing is written until it exists.
pub struct Outcome {
    pub report: Value,
    pub trace: Option<String>,
    pub fields: Vec<(String, ScalarField)>,
    pub converged: bool,
}

impl Outcome {
    fn diagnostic(report: Value) -> Self {
        Outcome { report, trace: None, fields: Vec::new(), converged: true }
    }
}

pub fn run(command: &str, cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    match command {
        "energy" => energy(cfg, base),
        "j2-check" => j2_check(cfg, base),
        "invariance" => invariance(cfg, seed, base),
        "poisson" => poisson(cfg, seed, base),
        "ground-state" => ground(cfg, seed, base),
        "penalty" => penalty(cfg, seed, base),
        "critical-check" => critical(cfg, seed),
        "profiles" => profiles(cfg, base),
        "liminf" => liminf(cfg, seed, base),
        other => Err(CliError::Config(format!("unknown command {other}"))),
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn input_field(cfg: &ProblemConfig, base: &Path) -> Result<ScalarField, CliError> {
    let source = cfg.field.as_ref().ok_or_else(|| CliError::Config("missing field".into()))?;
    let grid = if cfg.grid.is_some() { Some(cfg.grid()?) } else { None };
    source.build(grid.as_ref(), base)
}

fn energy(cfg: &ProblemConfig, base: &Path) -> Result<Outcome, CliError> {
    let u = input_field(cfg, base)?;
    let r = energy_report(&u)?;
    let trace = format!("{ENERGY_CSV_HEADER}\n{}\n", r.csv_row("field"));
    Ok(Outcome { trace: Some(trace), ..Outcome::diagnostic(to_value(&r)) })
}

fn j2_check(cfg: &ProblemConfig, base: &Path) -> Result<Outcome, CliError> {
    let u = input_field(cfg, base)?;
    let closed = affine_sobolev_j2(&gram_matrix(&u))?;
    let directions = cfg.directions.unwrap_or_else(|| min_directions(u.dim()));
    let sphere = j2_by_sphere_integral(&u, directions)?;
    let rel = if closed.value > 0.0 { (sphere - closed.value).abs() / closed.value } else { sphere.abs() };
    Ok(Outcome::diagnostic(json!({
        "closed_form": closed.value,
        "degenerate": closed.degenerate,
        "sphere_integral": sphere,
        "directions": directions,
        "relative_difference": rel,
    })))
}

fn invariance(cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    let u = input_field(cfg, base)?;
    let opts = SampledMinOptions {
        max_condition: cfg.max_condition.unwrap_or(DEFAULT_MAX_CONDITION),
        ..Default::default()
    };
    let r = energy_via_sampled_min(&u, cfg.samples.unwrap_or(200), seed, &opts)?;
    let mut trace = String::from("sample,grad_norm_sq\n");
    for (i, s) in r.samples.iter().enumerate() {
        trace.push_str(&format!("{i},{s:.16e}\n"));
    }
    let mut report = to_value(&r);
    report["normalizer_attains_min"] = json!(r.at_normalizer <= r.sampled_min);
    report["gram"] = to_value(gram_matrix(&u).matrix());
    Ok(Outcome { trace: Some(trace), ..Outcome::diagnostic(report) })
}

fn solved(r: SolveReport, extra: Option<(&str, Value)>) -> Outcome {
    let mut report = to_value(&r);
    if let Some((k, v)) = extra {
        report[k] = v;
    }
    let mut fields = vec![("minimizer".to_string(), r.minimizer.clone())];
    if let Some(s) = &r.rescaled {
        fields.push(("rescaled".to_string(), s.clone()));
    }
    Outcome { report, trace: Some(r.trace_csv()), fields, converged: r.converged }
}

fn poisson(cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    let mask = cfg.mask(base)?;
    let source = cfg.f.as_ref().ok_or_else(|| CliError::Config("missing f".into()))?;
    let f = source.build(Some(mask.grid()), base)?;
    if !f.grid().same_as(mask.grid()) {
        return Err(CliError::Config("f grid differs from the configured grid".into()));
    }
    Ok(solved(solve_affine_poisson(&f, &mask, &cfg.solver_config(seed))?, None))
}

fn ground(cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    let mask = cfg.mask(base)?;
    let p = cfg.exponent()?;
    let solver = cfg.solver_config(seed);
    let r = ground_state(p, &mask, &solver)?;
    let extra = if cfg.classical {
        let c = classical_ground_state(p, &mask, &solver)?;
        Some(("classical", json!({ "objective": c.objective, "converged": c.converged, "pde_residual": c.pde_residual })))
    } else {
        None
    };
    Ok(solved(r, extra))
}

fn penalty(cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    let n = cfg.dim()?;
    let p = cfg.exponent()?;
    let solver = cfg.solver_config(seed);
    let source = cfg.v.as_ref().ok_or_else(|| CliError::Config("missing V".into()))?;
    let v = source.build(n, solver.box_halfwidth, cfg.h.unwrap_or(0.1), base)?;
    Ok(solved(penalty_ground_state(&v, p, &solver)?, None))
}

fn critical(cfg: &ProblemConfig, seed: u64) -> Result<Outcome, CliError> {
    let n = cfg.dim()?;
    let mats = match &cfg.transforms {
        Some(list) => list.iter().map(|m| matrix(m, n)).collect::<Result<Vec<_>, _>>()?,
        None => default_transforms(n, cfg.bubble.max_condition, seed),
    };
    let ts = mats
        .into_iter()
        .map(UnimodularTransform::from_matrix)
        .collect::<affine_sobolev::Result<Vec<_>>>()?;
    let r = critical_bubble_check(n, &ts, &cfg.bubble)?;
    let mut trace = String::from("index,condition,affine_quotient,gradient_quotient,deviation\n");
    for (i, e) in r.entries.iter().enumerate() {
        trace.push_str(&format!(
            "{i},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            e.condition, e.affine_quotient, e.gradient_quotient, e.deviation
        ));
    }
    Ok(Outcome { trace: Some(trace), ..Outcome::diagnostic(to_value(&r)) })
}

fn profiles(cfg: &ProblemConfig, base: &Path) -> Result<Outcome, CliError> {
    if cfg.fields.is_empty() {
        return Err(CliError::Config("missing fields".into()));
    }
    let p = cfg.exponent()?;
    let grid = if cfg.grid.is_some() { Some(cfg.grid()?) } else { None };
    let raw = cfg.fields.iter().map(|f| f.build(grid.as_ref(), base)).collect::<Result<Vec<_>, _>>()?;
    let mut skipped = Vec::new();
    let seq = if cfg.normalize {
        let mut out = Vec::new();
        for (k, e) in normalize_sequence(&raw)?.into_iter().enumerate() {
            match e.field {
                Some(f) => out.push(f),
                None => skipped.push(k),
            }
        }
        out
    } else {
        raw
    };
    let e = extract_profiles(&seq, p, &cfg.profiles)?;
    let mut report = to_value(&ProfileReport::from(&e));
    report["skipped_degenerate"] = json!(skipped);
    // mass accounting needs ‖u_k‖_p = 1 on the tail
    let tail = &seq[seq.len().saturating_sub(cfg.profiles.tail.max(1))..];
    report["masses"] = match brezis_lieb_masses(&e.items, tail, p) {
        Ok(m) => to_value(&m),
        Err(affine_sobolev::Error::Precondition(_)) => Value::Null,
        Err(err) => return Err(err.into()),
    };
    let mut trace = String::from("round,residual_mass\n");
    for (i, m) in e.residual_history.iter().enumerate() {
        trace.push_str(&format!("{i},{m:.16e}\n"));
    }
    let fields = e.items.iter().enumerate().map(|(i, it)| (format!("profile_{i}"), it.profile.clone())).collect();
    let norms = tail.iter().map(|u| lp_norm_pow(u, p)).collect::<affine_sobolev::Result<Vec<_>>>()?;
    report["tail_lp_mass"] = json!(norms);
    Ok(Outcome { report, trace: Some(trace), fields, converged: true })
}

fn liminf(cfg: &ProblemConfig, seed: u64, base: &Path) -> Result<Outcome, CliError> {
    let n = cfg.dim()?;
    let region = cfg.region.as_ref().ok_or_else(|| CliError::Config("missing region".into()))?.region(n, base)?;
    let maps = cfg.maps.as_ref().ok_or_else(|| CliError::Config("missing maps".into()))?.build(n)?;
    let prefix = cfg.prefix.unwrap_or(maps.len());
    if prefix == 0 || prefix > maps.len() {
        return Err(CliError::Config(format!("prefix {prefix} outside 1..={}", maps.len())));
    }
    let samples = cfg.samples.unwrap_or(100_000);
    let opts = MeasureOptions { window: cfg.window.as_ref().map(|w| (w.lo.clone(), w.hi.clone())), seed };
    let mut trace = String::from("prefix,estimate,std_error\n");
    let mut last = None;
    for k in 1..=prefix {
        let e = liminf_measure_estimate(region.as_ref(), &maps, k, samples, &opts)?;
        trace.push_str(&format!("{k},{:.16e},{:.16e}\n", e.estimate, e.std_error));
        last = Some(e);
    }
    let last = last.expect("prefix ≥ 1");
    Ok(Outcome { trace: Some(trace), ..Outcome::diagnostic(to_value(&last)) })
}
