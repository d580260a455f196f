//! `jointmeas` command-line front end.
//!
//! Every command prints a human-readable table (`--format text`), a
//! schema-versioned JSON document (`--format json`) or a CSV table
//! (`--format csv`, header row first, LF line endings, floats with 17
//! significant digits). Exit status is 0 on success, 1 for computation or
//! contract errors and 2 for usage errors.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coexistence::{
    busch_criterion, joint_feasibility, model_marginal_coexistence, perpendicular_criterion,
    CriterionResult, FeasibilityResult, SearchConfig, UnbiasedPair, PERPENDICULAR_TOL,
};
use crate::marginals::{
    contrasts, interference_direction, marginals, payoff_check, reconstruct_sharp_probs, variance,
    BinaryPovm, Contrasts, PayoffReport, SharpProbabilities, Unsharpness,
};
use crate::montecarlo::{
    convergence_study, estimate, loglog_slope, sample_counts, ConvergenceRow, CountTable,
    EstimateReport,
};
use crate::qubit::{norm, Effect, QubitState, Vec3};
use crate::scheme::{
    derived_coefficients, four_effects, validate_scheme, DerivedCoefficients, SchemeParams,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance on state normalization accepted from the command line.
pub const STATE_NORM_TOL: f64 = 1e-9;

/// Largest deviation `validate` accepts before failing.
pub const ORACLE_TOL: f64 = 1e-10;

pub const MAX_SWEEP_ROWS: u64 = 10_000_000;

/// Header of the `payoff-sweep` CSV output.
pub const SWEEP_HEADER: &str =
    "theta_o,phi_o,theta_p,phi_p,phi,A,B,N1,N2,C1,C2,C3,U1,U2,U3,identity_residual";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Computation(#[from] crate::Error),
    #[error("{0}")]
    Check(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "jointmeas",
    version,
    about = "Joint unsharp measurement of complementary qubit observables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Four-outcome POVM, coefficients and contrasts.
    Effects {
        #[command(flatten)]
        angles: AngleArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Marginal POVMs, pay-off relations and model coexistence margins.
    Marginals {
        #[command(flatten)]
        angles: AngleArgs,
        #[command(flatten)]
        state: OptionalStateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check the closed-form effects against the two-qubit oracle.
    Validate {
        #[command(flatten)]
        angles: AngleArgs,
        #[arg(long, default_value_t = 1000)]
        random_states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Contrasts and pay-off residuals over a grid of angles.
    PayoffSweep {
        #[command(flatten)]
        grid: SweepArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Analytic coexistence of two unbiased binary POVMs.
    Coexist {
        /// Pauli vector of the first POVM, `x,y,z`.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// Pauli vector of the second POVM, `x,y,z`.
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Numerical joint measurability search for two arbitrary binary POVMs.
    Feasibility {
        /// First `+` effect, `f0,f1,f2,f3`.
        #[arg(long, allow_hyphen_values = true)]
        e: String,
        /// Second `+` effect, `f0,f1,f2,f3`.
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, default_value_t = 15)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simulate a counting run and reconstruct the sharp probabilities.
    Simulate {
        #[command(flatten)]
        angles: AngleArgs,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, short = 'n', default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Reconstruction RMSE against the number of counted pairs.
    Converge {
        #[command(flatten)]
        angles: AngleArgs,
        #[command(flatten)]
        state: StateArgs,
        /// Comma-separated sample sizes.
        #[arg(long, default_value = "1000,10000,100000,1000000")]
        n_list: String,
        #[arg(long, default_value_t = 50)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AngleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta_o: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_o: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub theta_p: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_p: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: f64,
    /// Interpret angles in degrees.
    #[arg(long)]
    pub degrees: bool,
}

impl AngleArgs {
    fn params(&self) -> CliResult<SchemeParams> {
        let k = angle_unit(self.degrees);
        params_from([self.theta_o, self.phi_o, self.theta_p, self.phi_p, self.phi].map(|a| a * k))
    }
}

fn angle_unit(degrees: bool) -> f64 {
    if degrees {
        PI / 180.0
    } else {
        1.0
    }
}

fn params_from(a: [f64; 5]) -> CliResult<SchemeParams> {
    // 180° converted through π/180 can land one ulp above π
    let clamp = |t: f64| if t > PI && t - PI < 1e-12 { PI } else { t };
    SchemeParams::new(clamp(a[0]), a[1], clamp(a[2]), a[3], a[4])
        .map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct StateArgs {
    /// Pure input state `re(α),im(α),re(β),im(β)`.
    #[arg(long, allow_hyphen_values = true)]
    pub pure: Option<String>,
    /// Mixed input state as a Bloch vector `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub bloch: Option<String>,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct OptionalStateArgs {
    /// Pure input state `re(α),im(α),re(β),im(β)`.
    #[arg(long, allow_hyphen_values = true)]
    pub pure: Option<String>,
    /// Mixed input state as a Bloch vector `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub bloch: Option<String>,
}

fn parse_state(pure: Option<&str>, bloch: Option<&str>) -> CliResult<Option<QubitState>> {
    match (pure, bloch) {
        (Some(p), None) => {
            let v = parse_list::<4>("--pure", p)?;
            QubitState::pure_renormalized(
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
                STATE_NORM_TOL,
            )
            .map(Some)
            .map_err(|e| CliError::Usage(e.to_string()))
        }
        (None, Some(b)) => {
            let r = parse_list::<3>("--bloch", b)?;
            let len = norm(&r);
            if len.is_nan() || len > 1.0 + STATE_NORM_TOL {
                return Err(CliError::Usage(format!(
                    "Bloch vector length {len} exceeds 1"
                )));
            }
            let r = if len > 1.0 { r.map(|x| x / len) } else { r };
            Ok(Some(QubitState::mixed(r)?))
        }
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(CliError::Usage("give either --pure or --bloch".into())),
    }
}

fn parse_list<const N: usize>(flag: &str, s: &str) -> CliResult<[f64; N]> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{flag}: {e}")))?;
    if vals.len() != N {
        return Err(CliError::Usage(format!(
            "{flag}: expected {N} comma-separated numbers, got {}",
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("{flag}: values must be finite")));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(&vals);
    Ok(out)
}

/// Each angle is either a single value or `start:stop:count`.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub theta_o: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi_o: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub theta_p: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi_p: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi: String,
    #[arg(long)]
    pub degrees: bool,
}

/// Expands `v` or `start:stop:count` into grid values.
pub fn parse_axis(flag: &str, spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |t: &str| -> CliResult<f64> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("{flag}: {e}")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Usage(format!("{flag}: values must be finite")))
        }
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, n] => {
            let (lo, hi) = (num(a)?, num(b)?);
            let n: u64 = n
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("{flag}: count: {e}")))?;
            if n == 0 {
                return Err(CliError::Usage(format!(
                    "{flag}: grid count must be at least 1"
                )));
            }
            if n > MAX_SWEEP_ROWS {
                return Err(CliError::Usage(format!(
                    "{flag}: grid count {n} exceeds {MAX_SWEEP_ROWS}"
                )));
            }
            if n == 1 {
                return Ok(vec![lo]);
            }
            Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect())
        }
        _ => Err(CliError::Usage(format!(
            "{flag}: expected value or start:stop:count"
        ))),
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_table(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Check(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EffectRecord {
    pub outcome: String,
    pub f0: f64,
    pub f: Vec3,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub valid: bool,
}

impl EffectRecord {
    pub fn new(outcome: &str, e: &Effect) -> Self {
        let (lambda_min, lambda_max) = e.eigenvalues();
        Self {
            outcome: outcome.to_string(),
            f0: e.f0,
            f: e.f,
            lambda_min,
            lambda_max,
            valid: e.is_valid(),
        }
    }

    pub fn effect(&self) -> Effect {
        Effect::new(self.f0, self.f)
    }

    fn csv_row(&self) -> Vec<String> {
        vec![
            self.outcome.clone(),
            fmt_f64(self.f0),
            fmt_f64(self.f[0]),
            fmt_f64(self.f[1]),
            fmt_f64(self.f[2]),
            fmt_f64(self.lambda_min),
            fmt_f64(self.lambda_max),
            self.valid.to_string(),
        ]
    }

    fn text_row(&self) -> String {
        format!(
            "  F{:<3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}  [{:.6}, {:.6}]  {}\n",
            self.outcome,
            self.f0,
            self.f[0],
            self.f[1],
            self.f[2],
            self.lambda_min,
            self.lambda_max,
            if self.valid { "valid" } else { "INVALID" }
        )
    }
}

const EFFECT_CSV_HEADER: &str = "outcome,f0,f1,f2,f3,lambda_min,lambda_max,valid";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EffectsOutput {
    pub schema: u32,
    pub command: String,
    pub params: SchemeParams,
    pub coefficients: DerivedCoefficients,
    pub effects: Vec<EffectRecord>,
    pub complete: bool,
    pub contrasts: Contrasts,
}

pub fn effects_output(p: &SchemeParams) -> EffectsOutput {
    let povm = four_effects(p);
    let c = derived_coefficients(p);
    let labels = ["++", "+-", "-+", "--"];
    EffectsOutput {
        schema: SCHEMA_VERSION,
        command: "effects".into(),
        params: *p,
        coefficients: c,
        effects: labels
            .iter()
            .zip(povm.effects())
            .map(|(l, e)| EffectRecord::new(l, &e))
            .collect(),
        complete: povm.validate().is_ok(),
        contrasts: contrasts(&c),
    }
}

fn render_effects(o: &EffectsOutput, format: Format) -> CliResult<String> {
    match format {
        Format::Json => to_json(o),
        Format::Csv => Ok(csv_table(
            EFFECT_CSV_HEADER,
            &o.effects
                .iter()
                .map(EffectRecord::csv_row)
                .collect::<Vec<_>>(),
        )),
        Format::Text => {
            let c = &o.coefficients;
            let mut s = String::new();
            writeln!(
                s,
                "coefficients: A={:.6} B={:.6} N1={:.6} N2={:.6}",
                c.A, c.B, c.N1, c.N2
            )
            .unwrap();
            writeln!(s, "  (W={:.6} X={:.6} Y={:.6} Z={:.6})", c.W, c.X, c.Y, c.Z).unwrap();
            writeln!(s, "effects (f0, f1, f2, f3)  [lambda_min, lambda_max]:").unwrap();
            for e in &o.effects {
                s.push_str(&e.text_row());
            }
            writeln!(s, "complete: {}", o.complete).unwrap();
            let ct = &o.contrasts;
            writeln!(
                s,
                "contrasts: C1={:.6} C2={:.6} C3={:.6}",
                ct.c1, ct.c2, ct.c3
            )
            .unwrap();
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MarginalRecord {
    pub marginal: u8,
    pub plus: EffectRecord,
    pub minus: EffectRecord,
    pub contrast: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateReport {
    pub bloch: Vec3,
    pub marginal_probabilities: [f64; 3],
    pub variance_first: f64,
    pub reconstruction: Option<SharpProbabilities>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MarginalsOutput {
    pub schema: u32,
    pub command: String,
    pub params: SchemeParams,
    pub coefficients: DerivedCoefficients,
    pub marginals: Vec<MarginalRecord>,
    pub contrasts: Contrasts,
    pub unsharpness: Unsharpness,
    pub payoff: PayoffReport,
    pub interference_direction: Option<Vec3>,
    pub pair13: FeasibilityResult,
    pub pair23: FeasibilityResult,
    pub state: Option<StateReport>,
}

fn marginals_output(p: &SchemeParams, state: Option<&QubitState>) -> CliResult<MarginalsOutput> {
    let c = derived_coefficients(p);
    let m = marginals(&four_effects(p))?;
    let ct = contrasts(&c);
    let coexist = model_marginal_coexistence(p, &SearchConfig::default())?;
    let record = |k: u8, b: &BinaryPovm| MarginalRecord {
        marginal: k,
        plus: EffectRecord::new("+", &b.plus),
        minus: EffectRecord::new("-", &b.minus),
        contrast: b.contrast(),
    };
    let state = match state {
        None => None,
        Some(s) => {
            let p1 = m.first.plus.expectation(s)?;
            let p2 = m.second.plus.expectation(s)?;
            let p3 = m.third.plus.expectation(s)?;
            Some(StateReport {
                bloch: s.bloch_vector(),
                marginal_probabilities: [p1, p2, p3],
                variance_first: variance(&m.first, s)?,
                reconstruction: reconstruct_sharp_probs(p1, p3, &c).ok(),
            })
        }
    };
    Ok(MarginalsOutput {
        schema: SCHEMA_VERSION,
        command: "marginals".into(),
        params: *p,
        coefficients: c,
        marginals: vec![
            record(1, &m.first),
            record(2, &m.second),
            record(3, &m.third),
        ],
        contrasts: ct,
        unsharpness: ct.unsharpness(),
        payoff: payoff_check(&ct),
        interference_direction: interference_direction(&c).ok().map(|d| d.n),
        pair13: coexist.pair13,
        pair23: coexist.pair23,
        state,
    })
}

fn render_marginals(o: &MarginalsOutput, format: Format) -> CliResult<String> {
    match format {
        Format::Json => to_json(o),
        Format::Csv => {
            let rows: Vec<Vec<String>> = o
                .marginals
                .iter()
                .flat_map(|m| {
                    [&m.plus, &m.minus].map(|e| {
                        let mut r = vec![m.marginal.to_string()];
                        r.extend(e.csv_row());
                        r.push(fmt_f64(m.contrast));
                        r
                    })
                })
                .collect();
            Ok(csv_table(
                &format!("marginal,{EFFECT_CSV_HEADER},contrast"),
                &rows,
            ))
        }
        Format::Text => {
            let mut s = String::new();
            for m in &o.marginals {
                writeln!(s, "marginal {} (contrast {:.6}):", m.marginal, m.contrast).unwrap();
                s.push_str(&m.plus.text_row());
                s.push_str(&m.minus.text_row());
            }
            let (ct, u, pr) = (&o.contrasts, &o.unsharpness, &o.payoff);
            writeln!(
                s,
                "contrasts:   C1={:.6} C2={:.6} C3={:.6}",
                ct.c1, ct.c2, ct.c3
            )
            .unwrap();
            writeln!(
                s,
                "unsharpness: U1={:.6} U2={:.6} U3={:.6}",
                u.u1, u.u2, u.u3
            )
            .unwrap();
            writeln!(
                s,
                "pay-off: identity residual {:.3e}, pair slacks {:.6} / {:.6}, U-form {}",
                pr.identity_residual,
                pr.pair1_slack,
                pr.pair2_slack,
                if pr.u_form_ok { "ok" } else { "VIOLATED" }
            )
            .unwrap();
            match o.interference_direction {
                Some(n) => writeln!(
                    s,
                    "interference direction: ({:.6}, {:.6}, {:.6})",
                    n[0], n[1], n[2]
                )
                .unwrap(),
                None => writeln!(
                    s,
                    "interference direction: undefined (third marginal trivial)"
                )
                .unwrap(),
            }
            writeln!(
                s,
                "coexistence (1,3): feasible={} margin={:.3e}",
                o.pair13.feasible, o.pair13.margin
            )
            .unwrap();
            writeln!(
                s,
                "coexistence (2,3): feasible={} margin={:.3e}",
                o.pair23.feasible, o.pair23.margin
            )
            .unwrap();
            if let Some(st) = &o.state {
                let q = st.marginal_probabilities;
                writeln!(
                    s,
                    "state r=({:.6}, {:.6}, {:.6})",
                    st.bloch[0], st.bloch[1], st.bloch[2]
                )
                .unwrap();
                writeln!(
                    s,
                    "  marginal + probabilities: {:.6} {:.6} {:.6}",
                    q[0], q[1], q[2]
                )
                .unwrap();
                writeln!(s, "  variance of marginal 1: {:.6}", st.variance_first).unwrap();
                if let Some(r) = &st.reconstruction {
                    writeln!(
                        s,
                        "  p(sigma3=+)={:.6} p(sigma_n=+)={:.6}",
                        r.p_sigma3_plus, r.p_n_plus
                    )
                    .unwrap();
                }
            }
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidateOutput {
    pub schema: u32,
    pub command: String,
    pub params: SchemeParams,
    pub seed: u64,
    pub n_states: usize,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn render_validate(o: &ValidateOutput, format: Format) -> CliResult<String> {
    match format {
        Format::Json => to_json(o),
        Format::Csv => Ok(csv_table(
            "n_states,seed,max_abs_deviation,tolerance,passed",
            &[vec![
                o.n_states.to_string(),
                o.seed.to_string(),
                fmt_f64(o.max_abs_deviation),
                fmt_f64(o.tolerance),
                o.passed.to_string(),
            ]],
        )),
        Format::Text => Ok(format!(
            "{} random states (seed {}): max_abs_deviation={:.3e} ({})\n",
            o.n_states,
            o.seed,
            o.max_abs_deviation,
            if o.passed { "ok" } else { "FAILED" }
        )),
    }
}

/// Rows of the pay-off sweep, in axis order `theta_o` (slowest) to `phi`.
pub fn payoff_sweep(axes: &[Vec<f64>; 5], degrees: bool) -> CliResult<Vec<Vec<String>>> {
    let total = axes
        .iter()
        .try_fold(1u64, |acc, a| acc.checked_mul(a.len() as u64));
    match total {
        Some(t) if t <= MAX_SWEEP_ROWS => {}
        _ => {
            return Err(CliError::Usage(format!(
                "sweep exceeds {MAX_SWEEP_ROWS} rows"
            )))
        }
    }
    let k = angle_unit(degrees);
    let mut rows = Vec::new();
    for &t_o in &axes[0] {
        for &p_o in &axes[1] {
            for &t_p in &axes[2] {
                for &p_p in &axes[3] {
                    for &ph in &axes[4] {
                        let p = params_from([t_o * k, p_o * k, t_p * k, p_p * k, ph * k])?;
                        let c = derived_coefficients(&p);
                        let ct = contrasts(&c);
                        let u = ct.unsharpness();
                        let pr = payoff_check(&ct);
                        rows.push(
                            [
                                p.theta_o,
                                p.phi_o,
                                p.theta_p,
                                p.phi_p,
                                p.phi,
                                c.A,
                                c.B,
                                c.N1,
                                c.N2,
                                ct.c1,
                                ct.c2,
                                ct.c3,
                                u.u1,
                                u.u2,
                                u.u3,
                                pr.identity_residual,
                            ]
                            .iter()
                            .map(|&x| fmt_f64(x))
                            .collect(),
                        );
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoexistOutput {
    pub schema: u32,
    pub command: String,
    pub a: Vec3,
    pub b: Vec3,
    pub criterion: CriterionResult,
    pub perpendicular: Option<CriterionResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeasibilityOutput {
    pub schema: u32,
    pub command: String,
    pub e_plus: Effect,
    pub f_plus: Effect,
    pub config: SearchConfig,
    pub result: FeasibilityResult,
    pub joint_effects: Vec<EffectRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateOutput {
    pub schema: u32,
    pub command: String,
    pub params: SchemeParams,
    pub bloch: Vec3,
    pub seed: u64,
    pub counts: CountTable,
    pub estimate: EstimateReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvergeOutput {
    pub schema: u32,
    pub command: String,
    pub params: SchemeParams,
    pub bloch: Vec3,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
    pub slope_sigma3: Option<f64>,
    pub slope_n: Option<f64>,
}

/// Executes a parsed command line, writing output to `stdout` or to the
/// `--output` file.
pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> CliResult<()> {
    let (text, output, check) = execute(&cli.command)?;
    match &output.output {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    match check {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

fn execute(cmd: &Command) -> CliResult<(String, &OutputArgs, Option<String>)> {
    let fmt = |o: &OutputArgs, default: Format| o.format.unwrap_or(default);
    Ok(match cmd {
        Command::Effects { angles, output } => {
            let o = effects_output(&angles.params()?);
            (render_effects(&o, fmt(output, Format::Text))?, output, None)
        }
        Command::Marginals {
            angles,
            state,
            output,
        } => {
            let p = angles.params()?;
            let s = parse_state(state.pure.as_deref(), state.bloch.as_deref())?;
            let o = marginals_output(&p, s.as_ref())?;
            (
                render_marginals(&o, fmt(output, Format::Text))?,
                output,
                None,
            )
        }
        Command::Validate {
            angles,
            random_states,
            seed,
            output,
        } => {
            let p = angles.params()?;
            if *random_states == 0 {
                return Err(CliError::Usage("--random-states must be at least 1".into()));
            }
            let r = validate_scheme(&p, *random_states, *seed)?;
            let passed = r.max_abs_deviation <= ORACLE_TOL;
            let o = ValidateOutput {
                schema: SCHEMA_VERSION,
                command: "validate".into(),
                params: p,
                seed: *seed,
                n_states: r.n_states,
                max_abs_deviation: r.max_abs_deviation,
                tolerance: ORACLE_TOL,
                passed,
            };
            let check = (!passed).then(|| {
                format!(
                    "oracle deviation {:e} exceeds {ORACLE_TOL:e}",
                    r.max_abs_deviation
                )
            });
            (
                render_validate(&o, fmt(output, Format::Text))?,
                output,
                check,
            )
        }
        Command::PayoffSweep { grid, output } => {
            let axes = [
                parse_axis("--theta-o", &grid.theta_o)?,
                parse_axis("--phi-o", &grid.phi_o)?,
                parse_axis("--theta-p", &grid.theta_p)?,
                parse_axis("--phi-p", &grid.phi_p)?,
                parse_axis("--phi", &grid.phi)?,
            ];
            let rows = payoff_sweep(&axes, grid.degrees)?;
            let text = match fmt(output, Format::Csv) {
                Format::Csv | Format::Text => csv_table(SWEEP_HEADER, &rows),
                Format::Json => {
                    let cols: Vec<&str> = SWEEP_HEADER.split(',').collect();
                    let records: Vec<serde_json::Map<String, serde_json::Value>> = rows
                        .iter()
                        .map(|r| {
                            cols.iter()
                                .zip(r)
                                .map(|(k, v)| {
                                    (k.to_string(), serde_json::json!(v.parse::<f64>().unwrap()))
                                })
                                .collect()
                        })
                        .collect();
                    to_json(
                        &serde_json::json!({ "schema": SCHEMA_VERSION, "command": "payoff-sweep", "rows": records }),
                    )?
                }
            };
            (text, output, None)
        }
        Command::Coexist { a, b, output } => {
            let a = parse_list::<3>("--a", a)?;
            let b = parse_list::<3>("--b", b)?;
            let pair = UnbiasedPair::new(a, b).map_err(|e| CliError::Usage(e.to_string()))?;
            let criterion = busch_criterion(&pair);
            let perpendicular = if crate::qubit::dot(&a, &b).abs() <= PERPENDICULAR_TOL {
                Some(perpendicular_criterion(&pair)?)
            } else {
                None
            };
            let o = CoexistOutput {
                schema: SCHEMA_VERSION,
                command: "coexist".into(),
                a,
                b,
                criterion,
                perpendicular,
            };
            let verdict = |c: &CriterionResult| {
                if c.coexistent {
                    "coexistent"
                } else {
                    "not coexistent"
                }
            };
            let text = match fmt(output, Format::Text) {
                Format::Json => to_json(&o)?,
                Format::Csv => csv_table(
                    "a1,a2,a3,b1,b2,b3,lhs,coexistent,perpendicular_lhs",
                    &[a.iter()
                        .chain(b.iter())
                        .map(|&x| fmt_f64(x))
                        .chain([
                            fmt_f64(criterion.lhs),
                            criterion.coexistent.to_string(),
                            fmt_opt(perpendicular.map(|p| p.lhs)),
                        ])
                        .collect()],
                ),
                Format::Text => {
                    let mut s = format!("{} (lhs={:.6})\n", verdict(&criterion), criterion.lhs);
                    if let Some(p) = perpendicular {
                        writeln!(
                            s,
                            "perpendicular pair: |a|^2+|b|^2={:.6}, {}",
                            p.lhs,
                            verdict(&p)
                        )
                        .unwrap();
                    }
                    s
                }
            };
            (text, output, None)
        }
        Command::Feasibility {
            e,
            f,
            grid,
            iterations,
            tolerance,
            seed,
            output,
        } => {
            let ev = parse_list::<4>("--e", e)?;
            let fv = parse_list::<4>("--f", f)?;
            let e_plus = Effect::new(ev[0], [ev[1], ev[2], ev[3]]);
            let f_plus = Effect::new(fv[0], [fv[1], fv[2], fv[3]]);
            let cfg = SearchConfig {
                grid_resolution: *grid,
                refine_iterations: *iterations,
                tolerance: *tolerance,
                seed: *seed,
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let result = joint_feasibility(&e_plus, &f_plus, &cfg)?;
            let labels = ["++", "+-", "-+", "--"];
            let joint: Vec<EffectRecord> = labels
                .iter()
                .zip(crate::coexistence::joint_effects(
                    &e_plus,
                    &f_plus,
                    &result.witness,
                ))
                .map(|(l, g)| EffectRecord::new(l, &g))
                .collect();
            let o = FeasibilityOutput {
                schema: SCHEMA_VERSION,
                command: "feasibility".into(),
                e_plus,
                f_plus,
                config: cfg,
                result,
                joint_effects: joint,
            };
            let text = match fmt(output, Format::Text) {
                Format::Json => to_json(&o)?,
                Format::Csv => {
                    let w = result.witness;
                    csv_table(
                        "feasible,margin,g0,g1,g2,g3",
                        &[vec![
                            result.feasible.to_string(),
                            fmt_f64(result.margin),
                            fmt_f64(w.f0),
                            fmt_f64(w.f[0]),
                            fmt_f64(w.f[1]),
                            fmt_f64(w.f[2]),
                        ]],
                    )
                }
                Format::Text => {
                    let mut s = format!(
                        "{} (margin={:.3e})\njoint effects from witness:\n",
                        if result.feasible {
                            "feasible"
                        } else {
                            "infeasible"
                        },
                        result.margin
                    );
                    for r in &o.joint_effects {
                        s.push_str(&r.text_row());
                    }
                    s
                }
            };
            (text, output, None)
        }
        Command::Simulate {
            angles,
            state,
            shots,
            seed,
            output,
        } => {
            let p = angles.params()?;
            let s = parse_state(state.pure.as_deref(), state.bloch.as_deref())?
                .expect("state group is required");
            if *shots == 0 {
                return Err(CliError::Usage("--shots must be at least 1".into()));
            }
            let counts = sample_counts(&four_effects(&p), &s, *shots, *seed)?;
            let est = estimate(&counts, &derived_coefficients(&p))?;
            let o = SimulateOutput {
                schema: SCHEMA_VERSION,
                command: "simulate".into(),
                params: p,
                bloch: s.bloch_vector(),
                seed: *seed,
                counts,
                estimate: est,
            };
            let text = match fmt(output, Format::Text) {
                Format::Json => to_json(&o)?,
                Format::Csv => csv_table(
                    "n_total,n_pp,n_pm,n_mp,n_mm,p_hat_1,p_hat_2,p_hat_3,p_sigma3_hat,se_sigma3,p_n_hat,se_n",
                    &[vec![
                        counts.n_total.to_string(),
                        counts.n_pp.to_string(),
                        counts.n_pm.to_string(),
                        counts.n_mp.to_string(),
                        counts.n_mm.to_string(),
                        fmt_f64(est.p_hat_1),
                        fmt_f64(est.p_hat_2),
                        fmt_f64(est.p_hat_3),
                        fmt_opt(est.p_sigma3_hat),
                        fmt_opt(est.se_sigma3),
                        fmt_opt(est.p_n_hat),
                        fmt_opt(est.se_n),
                    ]],
                ),
                Format::Text => {
                    let mut t = String::new();
                    writeln!(
                        t,
                        "counts: N++={} N+-={} N-+={} N--={} (N={})",
                        counts.n_pp, counts.n_pm, counts.n_mp, counts.n_mm, counts.n_total
                    )
                    .unwrap();
                    writeln!(t, "marginal frequencies: {:.6} {:.6} {:.6}", est.p_hat_1, est.p_hat_2, est.p_hat_3).unwrap();
                    let show = |v: Option<f64>, se: Option<f64>| match (v, se) {
                        (Some(v), Some(se)) => format!("{v:.6} +/- {se:.6}"),
                        _ => "n/a (marginal trivial)".to_string(),
                    };
                    writeln!(t, "p(sigma3=+)  = {}", show(est.p_sigma3_hat, est.se_sigma3)).unwrap();
                    writeln!(t, "p(sigma_n=+) = {}", show(est.p_n_hat, est.se_n)).unwrap();
                    t
                }
            };
            (text, output, None)
        }
        Command::Converge {
            angles,
            state,
            n_list,
            reps,
            seed,
            output,
        } => {
            let p = angles.params()?;
            let s = parse_state(state.pure.as_deref(), state.bloch.as_deref())?
                .expect("state group is required");
            let ns: Vec<u64> = n_list
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("--n-list: {e}")))?;
            if ns.is_empty() || ns.iter().any(|&n| n < 10) {
                return Err(CliError::Usage(
                    "--n-list entries must be at least 10".into(),
                ));
            }
            if *reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let rows = convergence_study(&p, &s, &ns, *reps, *seed)?;
            let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let slope = |ys: Vec<f64>| loglog_slope(&xs, &ys);
            let o = ConvergeOutput {
                schema: SCHEMA_VERSION,
                command: "converge".into(),
                params: p,
                bloch: s.bloch_vector(),
                reps: *reps,
                seed: *seed,
                slope_sigma3: slope(rows.iter().map(|r| r.rmse_sigma3).collect()),
                slope_n: slope(rows.iter().map(|r| r.rmse_n).collect()),
                rows,
            };
            let text = match fmt(output, Format::Csv) {
                Format::Json => to_json(&o)?,
                Format::Csv => csv_table(
                    "n,rmse_sigma3,rmse_n",
                    &o.rows
                        .iter()
                        .map(|r| vec![r.n.to_string(), fmt_f64(r.rmse_sigma3), fmt_f64(r.rmse_n)])
                        .collect::<Vec<_>>(),
                ),
                Format::Text => {
                    let mut t = format!("{:>12} {:>14} {:>14}\n", "n", "rmse_sigma3", "rmse_n");
                    for r in &o.rows {
                        writeln!(
                            t,
                            "{:>12} {:>14.6e} {:>14.6e}",
                            r.n, r.rmse_sigma3, r.rmse_n
                        )
                        .unwrap();
                    }
                    if let (Some(a), Some(b)) = (o.slope_sigma3, o.slope_n) {
                        writeln!(t, "log-log slope: sigma3 {a:.4}, sigma_n {b:.4}").unwrap();
                    }
                    t
                }
            };
            (text, output, None)
        }
    })
}
