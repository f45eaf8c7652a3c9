use std::path::PathBuf;

use clap::Args;
use levelcross::closedform::{
    compare_with_oracle, floquet_report, match_initial, FundamentalSystem, MatchedSolution, OracleComparison,
    SeriesSystem,
};
use levelcross::heun::{map_to_heun, termination_search, Integrability};
use levelcross::oracle::{integrate_with_stops, OdeOptions};
use levelcross::{Sign, StateVector};
use rayon::prelude::*;

use crate::config::{Field, FieldArgs, FileConfig, Format, Initial, ModelKind, RunArgs, Settings};
use crate::output::{fmt_real, indexed_path, Document, Meta, MetaValue};
use crate::CliError;

pub const DEFAULT_MAX_TERMS: usize = 64;
pub const DEFAULT_N_MAX: usize = 4;
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

/// A rendered-to-be document and where it goes; `None` means stdout.
#[derive(Debug, Clone)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub doc: Document,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub outputs: Vec<Output>,
    pub format: Format,
    /// Some comparison exceeded its threshold.
    pub failed: bool,
}

impl Report {
    fn single(settings: &Settings, doc: Document) -> Self {
        Report { outputs: vec![Output { path: settings.output.clone(), doc }], format: settings.format, failed: false }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DetuningArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated Δ1 values; one file per value (out_1.csv, out_2.csv, ...)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "LIST")]
    pub delta1_values: Vec<f64>,
    /// Write a sweep as one long table with a delta1 column
    #[arg(long)]
    pub combined: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial state at the window start [default: ground]
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
}

#[derive(Debug, Clone, Args)]
pub struct ClosedFormArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial state at the window start [default: ground]
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
    /// Cap on Beta-series terms for the general and n3 models [default: 64]
    #[arg(long)]
    pub max_terms: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FloquetArgs {
    #[command(flatten)]
    pub common: Common,
    /// Start of the period used for the monodromy [default: window start]
    #[arg(long, allow_negative_numbers = true)]
    pub t_ref: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct HeunMapArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct TerminateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest termination order N [default: 4]
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial state at the window start [default: ground]
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
    /// Cap on Beta-series terms for the general and n3 models [default: 64]
    #[arg(long)]
    pub max_terms: Option<usize>,
    /// Largest admissible |a2 exact − a2 numerical| [default: 1e-8]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated U0 values compared in parallel, one row each
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub u0_values: Vec<f64>,
}

fn sweep(flag: Vec<f64>, file: &Option<Vec<f64>>) -> Vec<f64> {
    if flag.is_empty() {
        file.clone().unwrap_or_default()
    } else {
        flag
    }
}

/// Fixes the swept parameter of the base field to the first sweep value.
fn seed_sweep(slot: &mut Option<f64>, values: &[f64], name: &str) -> Result<(), CliError> {
    if let Some(&first) = values.first() {
        if slot.is_some() {
            return Err(CliError::Config(format!("--{name} conflicts with --{name}-values")));
        }
        *slot = Some(first);
    }
    Ok(())
}

fn initial(flag: Option<Initial>, file: &FileConfig) -> Initial {
    flag.or(file.run.initial).unwrap_or(Initial::Ground)
}

fn max_terms(flag: Option<usize>, file: &FileConfig) -> Result<usize, CliError> {
    let n = flag.or(file.run.max_terms).unwrap_or(DEFAULT_MAX_TERMS);
    if n < 2 {
        return Err(CliError::Config(format!("max_terms must be ≥ 2, got {n}")));
    }
    Ok(n)
}

fn field_meta(command: &str, field: &Field) -> Result<Meta, CliError> {
    let mut meta = Meta::new(command);
    field.describe(&mut meta)?;
    Ok(meta)
}

fn state_columns(doc: Document, times: &[f64], states: &[StateVector]) -> Document {
    let col = |f: fn(&StateVector) -> f64| states.iter().map(f).collect::<Vec<f64>>();
    doc.real("t", times.to_vec())
        .real("re_a1", col(|s| s.a1.re))
        .real("im_a1", col(|s| s.a1.im))
        .real("re_a2", col(|s| s.a2.re))
        .real("im_a2", col(|s| s.a2.im))
        .real("pop2", col(|s| s.population2()))
        .real("norm", col(|s| s.norm_sqr()))
}

pub fn detuning(args: DetuningArgs, file: &FileConfig) -> Result<Report, CliError> {
    let values = sweep(args.delta1_values, &file.run.delta1_values);
    let combined = args.combined || file.run.combined.unwrap_or(false);
    let mut field_args = args.common.field;
    seed_sweep(&mut field_args.delta1, &values, "delta1")?;
    // Only the n3 detuning depends on U0.
    let model = field_args.model.or(file.field.model);
    if model != Some(ModelKind::N3) && field_args.u0.is_none() && file.field.u0.is_none() {
        field_args.u0 = Some(1.0);
    }
    let settings = Settings::resolve(field_args, args.common.run, file)?;
    let times = settings.times();

    let fields: Vec<Field> = if values.is_empty() {
        vec![settings.field]
    } else {
        values
            .iter()
            .map(|&d1| Field::from_args(&FieldArgs { delta1: Some(d1), ..settings.field_args.clone() }))
            .collect::<Result<_, _>>()?
    };
    let curves: Vec<Vec<f64>> = fields
        .iter()
        .map(|s| times.iter().map(|&t| s.detuning_at(t)).collect::<levelcross::Result<Vec<f64>>>())
        .collect::<levelcross::Result<_>>()?;

    let mut run_meta = Meta::default();
    run_meta.push("t_start", MetaValue::Real(settings.window.0));
    run_meta.push("t_end", MetaValue::Real(settings.window.1));
    run_meta.push("samples", MetaValue::Int(settings.samples as i64));

    if combined && !values.is_empty() {
        // Parameters that depend on Δ1 live in the table, not the header.
        let mut meta = Meta::new("detuning");
        for (k, v) in field_meta("detuning", &fields[0])?.entries() {
            if !["tool", "command", "a", "delta1", "scaled_a", "scaled_delta1"].contains(&k.as_str()) {
                meta.push(k, v.clone());
            }
        }
        meta.extend(run_meta);
        let n = times.len();
        let delta1: Vec<f64> = values.iter().flat_map(|&d| std::iter::repeat_n(d, n)).collect();
        let t: Vec<f64> = values.iter().flat_map(|_| times.iter().copied()).collect();
        let doc = Document::new(meta).real("delta1", delta1).real("t", t).real("delta_t", curves.concat());
        return Ok(Report::single(&settings, doc));
    }

    if values.is_empty() {
        let mut meta = field_meta("detuning", &fields[0])?;
        meta.extend(run_meta);
        let doc = Document::new(meta).real("t", times).real("delta_t", curves.into_iter().next().unwrap_or_default());
        return Ok(Report::single(&settings, doc));
    }

    let base = settings
        .output
        .clone()
        .ok_or_else(|| CliError::Config("a Δ1 sweep writes one file per value and needs --output".into()))?;
    let outputs = fields
        .iter()
        .zip(curves)
        .enumerate()
        .map(|(k, (field, curve))| {
            let mut meta = field_meta("detuning", field)?;
            meta.push("curve", MetaValue::Int(k as i64 + 1));
            meta.extend(run_meta.clone());
            let doc = Document::new(meta).real("t", times.clone()).real("delta_t", curve);
            Ok(Output { path: Some(indexed_path(&base, k + 1, settings.format)), doc })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Report { outputs, format: settings.format, failed: false })
}

pub fn simulate(args: SimulateArgs, file: &FileConfig) -> Result<Report, CliError> {
    let settings = Settings::resolve(args.common.field, args.common.run, file)?;
    let init = initial(args.initial, file);
    let times = settings.times();
    let traj = integrate_with_stops(&settings.field, init.state(), settings.window, &times, &settings.ode)?;
    let states = times.iter().map(|&t| traj.at(t)).collect::<levelcross::Result<Vec<_>>>()?;

    let mut meta = field_meta("simulate", &settings.field)?;
    settings.describe_run(&mut meta);
    meta.push("initial", MetaValue::Text(init.name().into()));
    meta.push("norm_drift", MetaValue::Real(traj.norm_drift));
    Ok(Report::single(&settings, state_columns(Document::new(meta), &times, &states)))
}

fn sample<S: FundamentalSystem>(m: &MatchedSolution<S>, times: &[f64]) -> levelcross::Result<Vec<StateVector>> {
    times.iter().map(|&t| m.state(t)).collect()
}

/// The exact fundamental system: the quasi-polynomial for n2, a terminated
/// Beta series otherwise.
fn solution_name(field: &Field) -> &'static str {
    match field {
        Field::N2(_) => "quasi-polynomial",
        _ => "beta-series",
    }
}

fn closed_form_states(
    field: &Field,
    init: StateVector,
    t_start: f64,
    times: &[f64],
    max_terms: usize,
) -> levelcross::Result<Vec<StateVector>> {
    match field {
        Field::N2(c) => sample(&match_initial(*c, init, t_start)?, times),
        _ => sample(&match_initial(SeriesSystem::new(&field.general()?, max_terms)?, init, t_start)?, times),
    }
}

pub fn closed_form(args: ClosedFormArgs, file: &FileConfig) -> Result<Report, CliError> {
    let settings = Settings::resolve(args.common.field, args.common.run, file)?;
    let init = initial(args.initial, file);
    let terms = max_terms(args.max_terms, file)?;
    let times = settings.times();
    let states = closed_form_states(&settings.field, init.state(), settings.window.0, &times, terms)?;

    let mut meta = field_meta("closed-form", &settings.field)?;
    meta.push("t_start", MetaValue::Real(settings.window.0));
    meta.push("t_end", MetaValue::Real(settings.window.1));
    meta.push("samples", MetaValue::Int(settings.samples as i64));
    meta.push("initial", MetaValue::Text(init.name().into()));
    meta.push("solution", MetaValue::Text(solution_name(&settings.field).into()));
    Ok(Report::single(&settings, state_columns(Document::new(meta), &times, &states)))
}

pub fn floquet(args: FloquetArgs, file: &FileConfig) -> Result<Report, CliError> {
    let settings = Settings::resolve(args.common.field, args.common.run, file)?;
    let Field::N2(cfg) = settings.field else {
        return Err(CliError::Config("floquet has analytic exponents for model n2 only".into()));
    };
    let t_ref = args.t_ref.or(file.run.t_ref).unwrap_or(settings.window.0);
    let rep = floquet_report(&cfg, t_ref, &settings.ode)?;
    let missing = || CliError::Internal("monodromy fields missing from the report".into());
    let mut exps = rep.oracle_exponents.ok_or_else(missing)?;
    exps.sort_by(f64::total_cmp);
    let mus = rep.monodromy_eigs.ok_or_else(missing)?;
    // Scaled frequencies times Δ give physical ones.
    let d = cfg.delta;

    let mut meta = field_meta("floquet", &settings.field)?;
    meta.push("t_ref", MetaValue::Real(t_ref));
    meta.push("rtol", MetaValue::Real(settings.ode.rtol));
    meta.push("atol", MetaValue::Real(settings.ode.atol));
    meta.push("scaled_lambda1", MetaValue::Real(rep.lambda1));
    meta.push("scaled_lambda2", MetaValue::Real(rep.lambda2));
    let doc = Document::new(meta)
        .real("lambda1", vec![rep.lambda1 * d])
        .real("lambda2", vec![rep.lambda2 * d])
        .real("exponent1", vec![exps[0] * d])
        .real("exponent2", vec![exps[1] * d])
        .real("residual_mod_delta", vec![rep.residual_mod_delta.ok_or_else(missing)? * d])
        .real("modulus_defect", vec![rep.modulus_defect.ok_or_else(missing)?])
        .real("re_mu1", vec![mus[0].re])
        .real("im_mu1", vec![mus[0].im])
        .real("re_mu2", vec![mus[1].re])
        .real("im_mu2", vec![mus[1].im]);
    Ok(Report::single(&settings, doc))
}

pub fn heun_map(args: HeunMapArgs, file: &FileConfig) -> Result<Report, CliError> {
    let settings = Settings::resolve(args.common.field, args.common.run, file)?;
    let g = settings.field.general()?;
    let maps = [Sign::Plus, Sign::Minus].map(|s| map_to_heun(&g, s));
    // Real inputs give real Heun parameters; the imaginary parts are zero.
    let col = |f: &dyn Fn(usize) -> f64| (0..2).map(f).collect::<Vec<f64>>();
    let doc = Document::new(field_meta("heun-map", &settings.field)?)
        .int("sign", vec![1, -1])
        .real("a", col(&|i| maps[i].0.a))
        .real("q", col(&|i| maps[i].0.q.re))
        .real("alpha", col(&|i| maps[i].0.alpha.re))
        .real("beta", col(&|i| maps[i].0.beta.re))
        .real("gamma", col(&|i| maps[i].0.gamma.re))
        .real("delta", col(&|i| maps[i].0.delta.re))
        .real("epsilon", col(&|i| maps[i].0.epsilon.re))
        .real("alpha1", col(&|i| maps[i].1.alpha1));
    Ok(Report::single(&settings, doc))
}

fn integrability_name(i: Integrability) -> &'static str {
    match i {
        Integrability::Trivial => "trivial",
        Integrability::Unconditional => "unconditional",
        Integrability::Conditional => "conditional",
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(";")
}

pub fn terminate(args: TerminateArgs, file: &FileConfig) -> Result<Report, CliError> {
    let settings = Settings::resolve(args.common.field, args.common.run, file)?;
    let n_max = args.n_max.or(file.run.n_max).unwrap_or(DEFAULT_N_MAX);
    let records = termination_search(&settings.field.general()?, n_max)?;

    let mut meta = field_meta("terminate", &settings.field)?;
    meta.push("n_max", MetaValue::Int(n_max as i64));
    let doc = Document::new(meta)
        .int("n", records.iter().map(|r| r.n as i64).collect())
        .text("integrability", records.iter().map(|r| integrability_name(r.integrability).into()).collect())
        .int("constraint_roots", records.iter().map(|r| r.constraint_roots.len() as i64).collect())
        .text("admissible_a", records.iter().map(|r| join(&r.admissible_a)).collect())
        .real("u0_drift", records.iter().map(|r| r.u0_drift).collect())
        .text("gamma_delta_admissible", records.iter().map(|r| join(&r.gamma_delta_admissible)).collect());
    Ok(Report::single(&settings, doc))
}

fn compare_point(
    field: &Field,
    init: StateVector,
    window: (f64, f64),
    samples: usize,
    ode: &OdeOptions,
    max_terms: usize,
) -> levelcross::Result<OracleComparison> {
    match field {
        Field::N2(c) => compare_with_oracle(&match_initial(*c, init, window.0)?, field, window.1, samples, ode),
        _ => {
            let sys = SeriesSystem::new(&field.general()?, max_terms)?;
            compare_with_oracle(&match_initial(sys, init, window.0)?, field, window.1, samples, ode)
        }
    }
}

pub fn compare(args: CompareArgs, file: &FileConfig) -> Result<Report, CliError> {
    let values = sweep(args.u0_values, &file.run.u0_values);
    let mut field_args = args.common.field;
    seed_sweep(&mut field_args.u0, &values, "u0")?;
    let settings = Settings::resolve(field_args, args.common.run, file)?;
    let init = initial(args.initial, file);
    let terms = max_terms(args.max_terms, file)?;
    let threshold = args.threshold.or(file.run.threshold).unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0) {
        return Err(CliError::Config(format!("threshold must be > 0, got {threshold}")));
    }

    let fields: Vec<Field> = if values.is_empty() {
        vec![settings.field]
    } else {
        values
            .iter()
            .map(|&u0| Field::from_args(&FieldArgs { u0: Some(u0), ..settings.field_args.clone() }))
            .collect::<Result<_, _>>()?
    };
    // Independent points; collect keeps input order so output is deterministic.
    let results = fields
        .par_iter()
        .map(|s| compare_point(s, init.state(), settings.window, settings.samples, &settings.ode, terms))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<levelcross::Result<Vec<_>>>()?;
    let pass: Vec<bool> = results.iter().map(|r| r.max_deviation <= threshold).collect();

    let mut meta = Meta::new("compare");
    for (k, v) in field_meta("compare", &settings.field)?.entries() {
        if !["tool", "command", "u0", "scaled_u0"].contains(&k.as_str()) {
            meta.push(k, v.clone());
        }
    }
    settings.describe_run(&mut meta);
    meta.push("initial", MetaValue::Text(init.name().into()));
    meta.push("solution", MetaValue::Text(solution_name(&settings.field).into()));
    meta.push("threshold", MetaValue::Real(threshold));
    let delta = settings.field.general()?.delta;
    let doc = Document::new(meta)
        .real("u0", fields.iter().map(|s| s.general().map(|g| g.u0)).collect::<levelcross::Result<_>>()?)
        .real("scaled_u0", fields.iter().map(|s| s.general().map(|g| g.u0 / delta)).collect::<levelcross::Result<_>>()?)
        .real("max_deviation", results.iter().map(|r| r.max_deviation).collect())
        .real("norm_drift", results.iter().map(|r| r.norm_drift).collect())
        .text("verdict", pass.iter().map(|&p| if p { "PASS" } else { "FAIL" }.into()).collect());
    let mut report = Report::single(&settings, doc);
    report.failed = pass.iter().any(|p| !p);
    Ok(report)
}
