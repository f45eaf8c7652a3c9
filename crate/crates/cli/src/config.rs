use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use levelcross::fields::{detuning_n3, n3_singular_point, FieldConfig, N2Config, N3Config};
use levelcross::oracle::{Drive, OdeOptions};
use levelcross::tol::{ODE_ATOL, ODE_RTOL};
use levelcross::{Sign, StateVector};
use serde::Deserialize;

use crate::output::{Meta, MetaValue};
use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Six-parameter family (U0, a, Δ1, Δ2, Δ, t0).
    General,
    /// Unconditionally solvable member, Δ2 = 2Δ and a fixed by Δ1/Δ.
    N2,
    /// Conditionally solvable member, Δ2 = 3 and a fixed by (U0, Δ1). Δ = 1, t0 = 0.
    N3,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::General => "general",
            ModelKind::N2 => "n2",
            ModelKind::N3 => "n3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Plus,
    Minus,
}

impl From<Branch> for Sign {
    fn from(b: Branch) -> Sign {
        match b {
            Branch::Plus => Sign::Plus,
            Branch::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    /// a1 = 1, a2 = 0.
    Ground,
    /// a1 = 0, a2 = 1.
    Excited,
}

impl Initial {
    pub fn state(self) -> StateVector {
        match self {
            Initial::Ground => StateVector::ground(),
            Initial::Excited => StateVector::excited(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Initial::Ground => "ground",
            Initial::Excited => "excited",
        }
    }
}

/// Field parameters in physical units. Every flag is optional so that a
/// config file can supply it; the same struct is the `[field]` table.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldArgs {
    /// Field family [default: n2]
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Rabi frequency U0 (> 0)
    #[arg(long)]
    pub u0: Option<f64>,
    /// Singular point a (> 0, ≠ 1); general model only
    #[arg(long)]
    pub a: Option<f64>,
    /// Carrier detuning Δ1
    #[arg(long, allow_negative_numbers = true)]
    pub delta1: Option<f64>,
    /// Modulation depth Δ2; general model only
    #[arg(long, allow_negative_numbers = true)]
    pub delta2: Option<f64>,
    /// Modulation frequency Δ (> 0) [default: 1]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Time shift t0 [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    /// Square-root branch of the N = 3 field [default: plus]
    #[arg(long, value_enum)]
    pub branch: Option<Branch>,
}

impl FieldArgs {
    /// Fields set here win over those in `file`.
    pub fn or(self, file: FieldArgs) -> FieldArgs {
        FieldArgs {
            model: self.model.or(file.model),
            u0: self.u0.or(file.u0),
            a: self.a.or(file.a),
            delta1: self.delta1.or(file.delta1),
            delta2: self.delta2.or(file.delta2),
            delta: self.delta.or(file.delta),
            t0: self.t0.or(file.t0),
            branch: self.branch.or(file.branch),
        }
    }
}

/// Time window, sampling, output and integrator tolerances.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Start of the time window [default: t0]
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    /// End of the time window; excludes --periods
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Window length in drive periods [default: 1]
    #[arg(long)]
    pub periods: Option<f64>,
    /// Number of equally spaced sample times, both ends included [default: 1001]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file; stdout when absent
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format [default: from the output extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Relative tolerance of the numerical integrator
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the numerical integrator
    #[arg(long)]
    pub atol: Option<f64>,
}

/// The `[run]` table: the common run settings plus every command option.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunFile {
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub periods: Option<f64>,
    pub samples: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub initial: Option<Initial>,
    pub t_ref: Option<f64>,
    pub n_max: Option<usize>,
    pub max_terms: Option<usize>,
    pub threshold: Option<f64>,
    pub delta1_values: Option<Vec<f64>>,
    pub u0_values: Option<Vec<f64>>,
    pub combined: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub field: FieldArgs,
    pub run: RunFile,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// A validated field of one of the three families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    General(FieldConfig),
    N2(N2Config),
    N3(N3Config),
}

fn required(v: Option<f64>, name: &str, model: ModelKind) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("model {} needs --{name}", model.name())))
}

fn forbidden(set: bool, name: &str, model: ModelKind) -> Result<(), CliError> {
    if set {
        return Err(CliError::Config(format!("--{name} cannot be set for model {}", model.name())));
    }
    Ok(())
}

impl Field {
    pub fn from_args(f: &FieldArgs) -> Result<Self, CliError> {
        let model = f.model.unwrap_or(ModelKind::N2);
        let u0 = required(f.u0, "u0", model)?;
        let delta1 = required(f.delta1, "delta1", model)?;
        let delta = f.delta.unwrap_or(1.0);
        let t0 = f.t0.unwrap_or(0.0);
        if model != ModelKind::N3 {
            forbidden(f.branch.is_some(), "branch", model)?;
        }
        let field = match model {
            ModelKind::General => {
                let a = required(f.a, "a", model)?;
                let delta2 = required(f.delta2, "delta2", model)?;
                Field::General(FieldConfig::new(u0, a, delta1, delta2, delta, t0).map_err(CliError::invalid)?)
            }
            ModelKind::N2 => {
                forbidden(f.a.is_some(), "a", model)?;
                forbidden(f.delta2.is_some(), "delta2", model)?;
                Field::N2(N2Config::new(u0, delta1, delta, t0).map_err(CliError::invalid)?)
            }
            ModelKind::N3 => {
                forbidden(f.a.is_some(), "a", model)?;
                forbidden(f.delta2.is_some(), "delta2", model)?;
                if delta != 1.0 || t0 != 0.0 {
                    return Err(CliError::Config("model n3 is defined for delta = 1, t0 = 0 only".into()));
                }
                let branch = f.branch.unwrap_or(Branch::Plus).into();
                Field::N3(N3Config::new(u0, delta1, branch).map_err(CliError::invalid)?)
            }
        };
        Ok(field)
    }

    pub fn model(&self) -> ModelKind {
        match self {
            Field::General(_) => ModelKind::General,
            Field::N2(_) => ModelKind::N2,
            Field::N3(_) => ModelKind::N3,
        }
    }

    pub fn period(&self) -> f64 {
        match self {
            Field::General(c) => c.period(),
            Field::N2(c) => c.period(),
            Field::N3(c) => c.period(),
        }
    }

    pub fn t0(&self) -> f64 {
        match self {
            Field::General(c) => c.t0,
            Field::N2(c) => c.t0,
            Field::N3(_) => 0.0,
        }
    }

    pub fn detuning_at(&self, t: f64) -> levelcross::Result<f64> {
        match self {
            Field::N3(c) => detuning_n3(c.u0, c.delta1, c.branch, t),
            _ => Ok(self.detuning(t)),
        }
    }

    /// The field as a member of the general family.
    pub fn general(&self) -> levelcross::Result<FieldConfig> {
        match self {
            Field::General(c) => Ok(*c),
            Field::N2(c) => Ok(c.to_field_config()),
            Field::N3(c) => {
                let a = n3_singular_point(c.u0, c.delta1, c.branch)?;
                FieldConfig::new(c.u0, a, c.delta1, 3.0, 1.0, 0.0)
            }
        }
    }

    /// Physical parameters followed by their Δ-scaled counterparts.
    pub fn describe(&self, meta: &mut Meta) -> levelcross::Result<()> {
        let g = self.general()?;
        meta.push("model", MetaValue::Text(self.model().name().into()));
        if let Field::N3(c) = self {
            meta.push("branch", MetaValue::Text(c.branch.to_string()));
        }
        for (k, v) in
            [("u0", g.u0), ("a", g.a), ("delta1", g.delta1), ("delta2", g.delta2), ("delta", g.delta), ("t0", g.t0)]
        {
            meta.push(k, MetaValue::Real(v));
        }
        let s = g.scaled();
        for (k, v) in [("scaled_u0", s.u0), ("scaled_a", s.a), ("scaled_delta1", s.delta1), ("scaled_delta2", s.delta2)]
        {
            meta.push(k, MetaValue::Real(v));
        }
        Ok(())
    }
}

impl Drive for Field {
    fn rabi(&self, t: f64) -> f64 {
        match self {
            Field::General(c) => c.rabi(t),
            Field::N2(c) => c.rabi(t),
            Field::N3(c) => c.rabi(t),
        }
    }

    fn detuning(&self, t: f64) -> f64 {
        match self {
            Field::General(c) => c.detuning(t),
            Field::N2(c) => c.detuning(t),
            Field::N3(c) => c.detuning(t),
        }
    }
}

/// Run settings after merging flags, file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub field_args: FieldArgs,
    pub field: Field,
    pub window: (f64, f64),
    pub samples: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub ode: OdeOptions,
}

impl Settings {
    /// `field` and `run` already carry flag values; `file` fills the gaps.
    pub fn resolve(field: FieldArgs, run: RunArgs, file: &FileConfig) -> Result<Self, CliError> {
        let field_args = field.or(file.field.clone());
        let field = Field::from_args(&field_args)?;
        let f = &file.run;

        let t_start = run.t_start.or(f.t_start).unwrap_or(field.t0());
        let t_end = match (run.t_end.or(f.t_end), run.periods.or(f.periods)) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either t_end or periods, not both".into())),
            (Some(t), None) => t,
            (None, p) => {
                let p = p.unwrap_or(1.0);
                if !(p > 0.0) || !p.is_finite() {
                    return Err(CliError::Config(format!("periods must be > 0, got {p}")));
                }
                t_start + p * field.period()
            }
        };
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(CliError::Config(format!("empty time window [{t_start}, {t_end}]")));
        }

        let samples = run.samples.or(f.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples < 2 {
            return Err(CliError::Config(format!("need at least 2 samples, got {samples}")));
        }

        let output = run.output.or_else(|| f.output.clone());
        let from_ext = output
            .as_ref()
            .and_then(|p| p.extension())
            .filter(|e| e.eq_ignore_ascii_case("json"))
            .map(|_| Format::Json);
        let format = run.format.or(f.format).or(from_ext).unwrap_or(Format::Csv);

        let rtol = run.rtol.or(f.rtol).unwrap_or(ODE_RTOL);
        let atol = run.atol.or(f.atol).unwrap_or(ODE_ATOL);
        if !(rtol > 0.0 && atol > 0.0) {
            return Err(CliError::Config(format!("tolerances must be > 0, got rtol {rtol}, atol {atol}")));
        }

        Ok(Self {
            field_args,
            field,
            window: (t_start, t_end),
            samples,
            output,
            format,
            ode: OdeOptions::with_tolerances(rtol, atol),
        })
    }

    /// `samples` equally spaced times; the last one is exactly the window end.
    pub fn times(&self) -> Vec<f64> {
        let (a, b) = self.window;
        let n = self.samples;
        let mut t: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
        t[n - 1] = b;
        t
    }

    /// Window, sampling and tolerances.
    pub fn describe_run(&self, meta: &mut Meta) {
        meta.push("t_start", MetaValue::Real(self.window.0));
        meta.push("t_end", MetaValue::Real(self.window.1));
        meta.push("samples", MetaValue::Int(self.samples as i64));
        meta.push("rtol", MetaValue::Real(self.ode.rtol));
        meta.push("atol", MetaValue::Real(self.ode.atol));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n2(u0: f64, delta1: f64) -> FieldArgs {
        FieldArgs { u0: Some(u0), delta1: Some(delta1), ..FieldArgs::default() }
    }

    #[test]
    fn flags_override_file_and_file_overrides_defaults() {
        let file: FileConfig =
            toml::from_str("[field]\nu0 = 2.0\ndelta1 = 3.0\ndelta = 2.0\n[run]\nsamples = 11\nrtol = 1e-9\n").unwrap();
        let flags = FieldArgs { delta1: Some(5.0), ..FieldArgs::default() };
        let run = RunArgs { samples: Some(21), ..RunArgs::default() };
        let s = Settings::resolve(flags, run, &file).unwrap();
        assert_eq!(s.field, Field::N2(N2Config::new(2.0, 5.0, 2.0, 0.0).unwrap()));
        assert_eq!(s.samples, 21);
        assert_eq!(s.ode.rtol, 1e-9);
        assert_eq!(s.ode.atol, ODE_ATOL);
        assert_eq!(s.format, Format::Csv);
    }

    #[test]
    fn default_window_is_one_period_from_t0() {
        let f = FieldArgs { delta: Some(2.0), t0: Some(0.5), ..n2(1.0, 3.0) };
        let s = Settings::resolve(f, RunArgs::default(), &FileConfig::default()).unwrap();
        assert_eq!(s.window, (0.5, 0.5 + std::f64::consts::PI));
        let t = s.times();
        assert_eq!(t.len(), DEFAULT_SAMPLES);
        assert_eq!((t[0], t[t.len() - 1]), s.window);
    }

    #[test]
    fn json_extension_selects_json() {
        let run = RunArgs { output: Some("x/out.JSON".into()), ..RunArgs::default() };
        let s = Settings::resolve(n2(1.0, 2.0), run, &FileConfig::default()).unwrap();
        assert_eq!(s.format, Format::Json);
    }

    #[test]
    fn invalid_inputs_are_config_errors() {
        let none = FileConfig::default();
        let bad = [
            (n2(1.0, 0.5), RunArgs::default()),
            (n2(0.0, 2.0), RunArgs::default()),
            (FieldArgs { branch: Some(Branch::Minus), ..n2(1.0, 2.0) }, RunArgs::default()),
            (n2(1.0, 2.0), RunArgs { rtol: Some(0.0), ..RunArgs::default() }),
            (n2(1.0, 2.0), RunArgs { periods: Some(-1.0), ..RunArgs::default() }),
            (n2(1.0, 2.0), RunArgs { t_start: Some(3.0), t_end: Some(2.0), ..RunArgs::default() }),
        ];
        for (f, r) in bad {
            assert!(matches!(Settings::resolve(f.clone(), r, &none), Err(CliError::Config(_))), "{f:?}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[run]\nsample = 3\n").is_err());
        assert!(toml::from_str::<FileConfig>("[fields]\nu0 = 3.0\n").is_err());
    }

    #[test]
    fn n3_spec_embeds_in_general_family() {
        let f = FieldArgs { model: Some(ModelKind::N3), ..n2(0.5, -3.0) };
        let field = Field::from_args(&f).unwrap();
        let g = field.general().unwrap();
        assert_eq!((g.delta2, g.delta, g.t0), (3.0, 1.0, 0.0));
        for t in [0.0, 0.7, 2.9] {
            let d = field.detuning_at(t).unwrap() - levelcross::fields::detuning_general(&g, t);
            assert!(d.abs() < 1e-10, "{d}");
        }
    }
}
