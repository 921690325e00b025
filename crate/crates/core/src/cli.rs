//! Command-line runner. Every command resolves a [`RunConfig`] (JSON file,
//! then flags), runs deterministically from it, and writes self-describing
//! outputs.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::acceptance::{self, CriterionResult};
use crate::dynamics::{
    detuning_sweep, ensemble_detunings, population_scan, stark_state, state_metrics, t_ab,
    FourierVariant, PropagateOptions, Sampling, StarkMapping, TrapModel,
};
use crate::error::{Error, Result};
use crate::pulses::sequence_unitary;
use crate::qmath::{
    basis, distance_mod_phase, haar_special_unitary, purify, purity, trace_distance,
    DensityMatrix3, MatrixRecord, Unitary3,
};
use crate::report::{bar_chart, csv_with_header, line_plot, Series};
use crate::synth::{decompose_with_steps, named_gate, Scheme};
use crate::tomo::{
    averaging_study, mle_reconstruct, read_fractions_csv, sample_fractions, simulate_fractions,
    state_overlap, AveragingConfig, MleOptions, Noise, ReadoutSet, TomographyData,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Recomposition distance above which `decompose` reports a numerical failure.
pub const DECOMPOSE_LIMIT: f64 = 1e-9;
/// `P1(t_AB)` above which `scan` reports a numerical failure.
pub const SCAN_LIMIT: f64 = 1e-9;
/// Halved-step fidelity gap above which `detuning` reports a numerical failure.
pub const SWEEP_LIMIT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "qutrit",
    version,
    about = "Qutrit gate compilation, pulse simulation and tomography"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it the primary table goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also write an SVG plot (requires --out).
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a gate into three pulses and a virtual phase.
    Decompose(DecomposeArgs),
    /// Populations under a resonant dual-tone drive versus time.
    Scan(ScanArgs),
    /// Average Fourier-gate fidelity versus a deliberate detuning.
    Detuning(DetuningArgs),
    /// Fourier-gate purity and fidelity under the trap Stark-shift ensemble.
    Stark(StarkArgs),
    /// Simulated read-out fractions and maximum-likelihood reconstruction.
    Tomography(TomographyArgs),
    /// Reconstruction metrics versus the number of averaged scans.
    Averaging(AveragingArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Selftest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Single,
    Dual,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OperatorArg {
    #[value(name = "F_I")]
    FI,
    #[value(name = "F_II")]
    FII,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StateSource {
    /// Ideal gate output.
    Ideal,
    /// Stark-ensemble output.
    Stark,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Quadrature,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MappingArg {
    Common,
    Opposite,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Named gate, or `random` for a seeded Haar-random SU(3) element.
    #[arg(long)]
    pub gate: Option<String>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rabi_hz: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Scan length in units of t_AB.
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub input: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetuningArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub rabi_hz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StarkArgs {
    #[arg(long)]
    pub rabi_hz: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingMode>,
    #[arg(long, value_enum)]
    pub mapping: Option<MappingArg>,
    #[arg(long)]
    pub include_scalar: bool,
    /// Multiply the center-to-edge shift spread.
    #[arg(long)]
    pub spread_scale: Option<f64>,
    /// Also reconstruct each state from simulated read-outs.
    #[arg(long)]
    pub tomography: bool,
    /// Multinomial atom count for the reconstruction data.
    #[arg(long)]
    pub atoms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TomographyArgs {
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    #[arg(long)]
    pub input: Option<usize>,
    #[arg(long, value_enum)]
    pub source: Option<StateSource>,
    /// Multinomial atom count; omit for exact fractions.
    #[arg(long)]
    pub atoms: Option<u64>,
    /// Reconstruct from this fractions CSV instead of simulating.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Plain fixed-point iteration without the gradient race.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Debug, Args)]
pub struct AveragingArgs {
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    #[arg(long)]
    pub input: Option<usize>,
    #[arg(long, value_enum)]
    pub source: Option<StateSource>,
    #[arg(long)]
    pub scans: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub atoms: Option<u64>,
    /// Exact fractions (no shot noise).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub gate: String,
    /// Row-major `[re, im]` entries; overrides `gate`.
    pub entries: Option<Vec<[f64; 2]>>,
    pub scheme: Scheme,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            gate: "fourier".into(),
            entries: None,
            scheme: Scheme::DualTone,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub alpha: f64,
    pub beta: f64,
    pub rabi_hz: f64,
    pub points: usize,
    pub span: f64,
    pub input: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha: 0.19 * PI,
            beta: 0.0,
            rabi_hz: 2.0e3,
            points: 201,
            span: 1.5,
            input: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetuningConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub rabi_hz: f64,
}

impl Default for DetuningConfig {
    fn default() -> Self {
        Self {
            min: -0.05,
            max: 0.05,
            points: 21,
            rabi_hz: 2.0e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarkConfig {
    pub trap: TrapModel,
    pub rabi_hz: f64,
    pub sampling: SamplingMode,
    pub tomography: bool,
    pub atoms: Option<u64>,
}

impl Default for StarkConfig {
    fn default() -> Self {
        Self {
            trap: TrapModel::default(),
            rabi_hz: 2.0e3,
            sampling: SamplingMode::Quadrature,
            tomography: false,
            atoms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub operator: FourierVariant,
    pub input: usize,
    pub source: StateSource,
    pub atoms: Option<u64>,
    pub data: Option<PathBuf>,
    pub mle: MleOptions,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            operator: FourierVariant::DualTone,
            input: 0,
            source: StateSource::Ideal,
            atoms: None,
            data: None,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AveragingCliConfig {
    pub operator: FourierVariant,
    pub input: usize,
    pub source: StateSource,
    pub scans: usize,
    pub replicates: usize,
    pub atoms: Option<u64>,
    pub mle: MleOptions,
}

impl Default for AveragingCliConfig {
    fn default() -> Self {
        let d = AveragingConfig::default();
        Self {
            operator: FourierVariant::DualTone,
            input: 0,
            source: StateSource::Stark,
            scans: d.max_scans,
            replicates: d.replicates,
            atoms: d.atoms,
            mle: d.mle,
        }
    }
}

/// Everything a run depends on. Serialized into every output header.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub svg: bool,
    pub decompose: DecomposeConfig,
    pub scan: ScanConfig,
    pub detuning: DetuningConfig,
    pub stark: StarkConfig,
    pub tomography: TomographyConfig,
    pub averaging: AveragingCliConfig,
}

fn operator(o: OperatorArg) -> FourierVariant {
    match o {
        OperatorArg::FI => FourierVariant::SingleTone,
        OperatorArg::FII => FourierVariant::DualTone,
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Load `--config` if given, then apply every flag that was set.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.common.config {
            Some(p) => Self::from_json(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        let c = &cli.common;
        set(&mut cfg.seed, c.seed.map(Some));
        set(&mut cfg.out, c.out.clone().map(Some));
        set(&mut cfg.format, c.format);
        cfg.svg |= c.svg;
        match &cli.command {
            Command::Decompose(a) => {
                set(&mut cfg.decompose.gate, a.gate.clone());
                if a.gate.is_some() {
                    cfg.decompose.entries = None;
                }
                set(
                    &mut cfg.decompose.scheme,
                    a.scheme.map(|s| match s {
                        SchemeArg::Single => Scheme::SingleTone,
                        SchemeArg::Dual => Scheme::DualTone,
                    }),
                );
            }
            Command::Scan(a) => {
                let s = &mut cfg.scan;
                set(&mut s.alpha, a.alpha);
                set(&mut s.beta, a.beta);
                set(&mut s.rabi_hz, a.rabi_hz);
                set(&mut s.points, a.points);
                set(&mut s.span, a.span);
                set(&mut s.input, a.input);
            }
            Command::Detuning(a) => {
                let d = &mut cfg.detuning;
                set(&mut d.min, a.min);
                set(&mut d.max, a.max);
                set(&mut d.points, a.points);
                set(&mut d.rabi_hz, a.rabi_hz);
            }
            Command::Stark(a) => {
                let s = &mut cfg.stark;
                set(&mut s.rabi_hz, a.rabi_hz);
                set(&mut s.trap.samples, a.samples);
                set(&mut s.sampling, a.sampling);
                set(
                    &mut s.trap.mapping,
                    a.mapping.map(|m| match m {
                        MappingArg::Common => StarkMapping::Common,
                        MappingArg::Opposite => StarkMapping::Opposite,
                    }),
                );
                s.trap.include_scalar |= a.include_scalar;
                if let Some(k) = a.spread_scale {
                    if !(k >= 0.0 && k.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "spread scale must be non-negative, got {k}"
                        )));
                    }
                    s.trap = s.trap.with_spread_scaled(k);
                }
                s.tomography |= a.tomography;
                set(&mut s.atoms, a.atoms.map(Some));
            }
            Command::Tomography(a) => {
                let t = &mut cfg.tomography;
                set(&mut t.operator, a.operator.map(operator));
                set(&mut t.input, a.input);
                set(&mut t.source, a.source);
                set(&mut t.atoms, a.atoms.map(Some));
                set(&mut t.data, a.data.clone().map(Some));
                set(&mut t.mle.max_iters, a.max_iters);
                if a.plain {
                    t.mle.accelerate = false;
                }
            }
            Command::Averaging(a) => {
                let v = &mut cfg.averaging;
                set(&mut v.operator, a.operator.map(operator));
                set(&mut v.input, a.input);
                set(&mut v.source, a.source);
                set(&mut v.scans, a.scans);
                set(&mut v.replicates, a.replicates);
                set(&mut v.atoms, a.atoms.map(Some));
                if a.exact {
                    v.atoms = None;
                }
            }
            Command::Selftest => {}
        }
        if cfg.svg && cfg.out.is_none() {
            return Err(Error::InvalidArgument("--svg needs --out".into()));
        }
        Ok(cfg)
    }

    fn require_seed(&self, why: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument(format!("{why} needs --seed")))
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn level(name: &str, n: usize) -> Result<usize> {
    if n <= 2 {
        Ok(n)
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be 0, 1 or 2, got {n}"
        )))
    }
}

/// Files produced by a command; the first is the primary table.
pub struct Output {
    pub files: Vec<(String, String)>,
    /// Set when a numerical tolerance was exceeded.
    pub failure: Option<String>,
    /// Printed to stdout regardless of `--out`.
    pub console: Option<String>,
}

impl Output {
    fn new(files: Vec<(String, String)>) -> Self {
        Self {
            files,
            failure: None,
            console: None,
        }
    }
}

struct Ctx<'a> {
    command: &'static str,
    cfg: &'a RunConfig,
}

impl Ctx<'_> {
    fn meta(&self, extra: Vec<(&str, String)>) -> Vec<(String, String)> {
        let config = json!({ "command": self.command, "config": self.cfg });
        let mut m = vec![
            ("qutrit".to_string(), self.command.to_string()),
            ("config".to_string(), config.to_string()),
        ];
        m.extend(extra.into_iter().map(|(k, v)| (k.to_string(), v)));
        m
    }

    /// Primary table in the configured format.
    fn table<T: Serialize>(
        &self,
        stem: &str,
        extra: Vec<(&str, String)>,
        rows: &[T],
        results: serde_json::Value,
    ) -> Result<(String, String)> {
        match self.cfg.format {
            Format::Csv => Ok((
                format!("{stem}.csv"),
                csv_with_header(&self.meta(extra), rows)?,
            )),
            Format::Json => {
                let meta: serde_json::Map<String, serde_json::Value> = extra
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
                    .collect();
                let doc = json!({
                    "command": self.command,
                    "config": self.cfg,
                    "metadata": meta,
                    "rows": rows,
                    "results": results,
                });
                Ok((
                    format!("{stem}.json"),
                    serde_json::to_string_pretty(&doc)? + "\n",
                ))
            }
        }
    }
}

fn e(v: f64) -> String {
    format!("{v:.6e}")
}

#[derive(Serialize)]
struct PulseRow {
    step: usize,
    channel: String,
    angle: f64,
    phase: f64,
    zeroed_row: usize,
    zeroed_col: usize,
    residual: f64,
}

fn target_gate(cfg: &RunConfig) -> Result<Unitary3> {
    let d = &cfg.decompose;
    if let Some(entries) = &d.entries {
        let m = MatrixRecord {
            entries: entries.clone(),
        }
        .to_matrix()?;
        return Unitary3::new(m);
    }
    if d.gate == "random" {
        let seed = cfg.require_seed("gate 'random'")?;
        return Ok(haar_special_unitary(&mut ChaCha8Rng::seed_from_u64(seed)));
    }
    named_gate(&d.gate)
}

fn cmd_decompose(ctx: &Ctx) -> Result<Output> {
    let u = target_gate(ctx.cfg)?;
    let (seq, steps) = decompose_with_steps(&u, ctx.cfg.decompose.scheme)?;
    let dist = distance_mod_phase(&sequence_unitary(&seq), &u);
    let rows: Vec<PulseRow> = steps
        .iter()
        .map(|s| PulseRow {
            step: s.index,
            channel: s.pulse.channel().to_string(),
            angle: s.pulse.angle(),
            phase: s.pulse.phase(),
            zeroed_row: s.row,
            zeroed_col: s.basis.0,
            residual: s.residual,
        })
        .collect();
    let extra = vec![
        (
            "virtual_phase",
            format!(
                "eta={} epsilon={}",
                seq.virtual_phase.eta, seq.virtual_phase.epsilon
            ),
        ),
        ("global_phase", seq.global_phase.to_string()),
        ("distance_mod_phase", e(dist)),
    ];
    let results = json!({
        "sequence": seq,
        "target": MatrixRecord::from(u.matrix()),
        "distance_mod_phase": dist,
    });
    let primary = ctx.table("decompose", extra, &rows, results)?;
    let mut out = Output::new(vec![primary, ("sequence.txt".into(), seq.to_string())]);
    if dist > DECOMPOSE_LIMIT {
        out.failure = Some(format!(
            "recomposition distance {dist:.3e} exceeds {DECOMPOSE_LIMIT:.0e}"
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ScanRow {
    t: f64,
    p0: f64,
    p1: f64,
    p2: f64,
}

fn cmd_scan(ctx: &Ctx) -> Result<Output> {
    let s = &ctx.cfg.scan;
    let rabi = TAU * positive("rabi_hz", s.rabi_hz)?;
    positive("span", s.span)?;
    if s.points < 2 {
        return Err(Error::InvalidArgument(
            "scan needs at least 2 points".into(),
        ));
    }
    let drive = crate::pulses::ab_couplings(s.alpha, s.beta, rabi)?;
    let psi = basis(level("input", s.input)?);
    let tab = t_ab(drive.omega_a, drive.omega_b);
    let grid: Vec<f64> = (0..s.points)
        .map(|k| s.span * tab * k as f64 / (s.points - 1) as f64)
        .collect();
    let pops = population_scan(drive.omega_a, drive.omega_b, &psi, &grid)?;
    let at_tab = population_scan(drive.omega_a, drive.omega_b, &psi, &[tab])?[0];
    let rows: Vec<ScanRow> = grid
        .iter()
        .zip(&pops)
        .map(|(&t, p)| ScanRow {
            t,
            p0: p[0],
            p1: p[1],
            p2: p[2],
        })
        .collect();
    let extra = vec![
        ("t_ab", e(tab)),
        (
            "populations_at_t_ab",
            format!("{} {} {}", e(at_tab[0]), e(at_tab[1]), e(at_tab[2])),
        ),
    ];
    let results = json!({ "t_ab": tab, "populations_at_t_ab": at_tab });
    let mut files = vec![ctx.table("scan", extra, &rows, results)?];
    if ctx.cfg.svg {
        let series: Vec<Series> = (0..3)
            .map(|k| Series {
                name: ["P0", "P1", "P2"][k],
                points: grid
                    .iter()
                    .zip(&pops)
                    .map(|(&t, p)| (t * 1e6, p[k]))
                    .collect(),
            })
            .collect();
        files.push((
            "scan.svg".into(),
            line_plot(
                "Dual-tone populations",
                "t (us)",
                "population",
                &series,
                &[tab * 1e6],
            ),
        ));
    }
    let mut out = Output::new(files);
    if at_tab[1] > SCAN_LIMIT {
        out.failure = Some(format!(
            "P1(t_AB) = {:.3e} exceeds {SCAN_LIMIT:.0e}",
            at_tab[1]
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct DetuningRow {
    operator: &'static str,
    delta_over_omega: f64,
    fidelity: f64,
    reference_fidelity: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_detuning(ctx: &Ctx) -> Result<Output> {
    let d = &ctx.cfg.detuning;
    let rabi = TAU * positive("rabi_hz", d.rabi_hz)?;
    if d.points == 0 || !(d.min <= d.max) || !d.min.is_finite() || !d.max.is_finite() {
        return Err(Error::InvalidArgument(
            "detuning grid needs min <= max and points >= 1".into(),
        ));
    }
    let grid = linspace(d.min, d.max, d.points);
    let mut rows = Vec::new();
    let mut gap = 0.0f64;
    let mut over = 0.0f64;
    for v in [FourierVariant::SingleTone, FourierVariant::DualTone] {
        for p in detuning_sweep(&v.sequence(), &grid, rabi, &PropagateOptions::default())? {
            gap = gap.max((p.fidelity - p.reference_fidelity).abs());
            over = over.max(p.fidelity - 1.0);
            rows.push(DetuningRow {
                operator: v.label(),
                delta_over_omega: p.delta_over_omega,
                fidelity: p.fidelity,
                reference_fidelity: p.reference_fidelity,
            });
        }
    }
    let extra = vec![("max_halved_step_gap", e(gap))];
    let results = json!({ "max_halved_step_gap": gap });
    let mut files = vec![ctx.table("detuning", extra, &rows, results)?];
    if ctx.cfg.svg {
        let series: Vec<Series> = ["F_I", "F_II"]
            .iter()
            .map(|&name| Series {
                name,
                points: rows
                    .iter()
                    .filter(|r| r.operator == name)
                    .map(|r| (r.delta_over_omega, r.fidelity))
                    .collect(),
            })
            .collect();
        files.push((
            "detuning.svg".into(),
            line_plot(
                "Average fidelity versus detuning",
                "Delta / Omega",
                "fidelity",
                &series,
                &[],
            ),
        ));
    }
    let mut out = Output::new(files);
    if gap > SWEEP_LIMIT || over > 1e-12 {
        out.failure = Some(format!(
            "halved-step gap {gap:.3e} (limit {SWEEP_LIMIT:.0e}) or fidelity above 1 by {over:.3e}"
        ));
    }
    Ok(out)
}

fn sampling(cfg: &RunConfig, mode: SamplingMode) -> Result<Sampling> {
    Ok(match mode {
        SamplingMode::Quadrature => Sampling::Quadrature,
        SamplingMode::Random => Sampling::Random {
            seed: cfg.require_seed("random sampling")?,
        },
    })
}

fn ensemble_state(
    cfg: &RunConfig,
    variant: FourierVariant,
    input: usize,
) -> Result<DensityMatrix3> {
    let s = &cfg.stark;
    let rabi = TAU * positive("rabi_hz", s.rabi_hz)?;
    let spec = ensemble_detunings(&s.trap, sampling(cfg, s.sampling)?)?;
    stark_state(variant, input, &spec, rabi, &PropagateOptions::exact())
}

fn noise(cfg: &RunConfig, atoms: Option<u64>, stream: u64) -> Result<Noise> {
    Ok(match atoms {
        None => Noise::Exact,
        Some(atoms) => Noise::Multinomial {
            atoms,
            seed: cfg.require_seed("multinomial noise")?.wrapping_add(stream),
        },
    })
}

#[derive(Serialize)]
struct StarkCsvRow {
    operator: &'static str,
    input: usize,
    source: &'static str,
    purity: f64,
    fidelity: f64,
    fidelity_pure: f64,
}

fn cmd_stark(ctx: &Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let s = &cfg.stark;
    let rabi = TAU * positive("rabi_hz", s.rabi_hz)?;
    let spec = ensemble_detunings(&s.trap, sampling(cfg, s.sampling)?)?;
    let set = ReadoutSet::standard();
    let mut rows = Vec::new();
    for (k, (variant, input, ..)) in acceptance::STARK_TABLE.iter().enumerate() {
        let gate = variant.sequence().unitary();
        let rho = stark_state(*variant, *input, &spec, rabi, &PropagateOptions::exact())?;
        let (p, f, fp) = state_metrics(&rho, &gate, *input);
        rows.push(StarkCsvRow {
            operator: variant.label(),
            input: *input,
            source: "ensemble",
            purity: p,
            fidelity: f,
            fidelity_pure: fp,
        });
        if s.tomography {
            let data = simulate_fractions(&rho, &set, &noise(cfg, s.atoms, k as u64)?)?;
            let rec = mle_reconstruct(&data, &set, &MleOptions::default())?.rho;
            let (p, f, fp) = state_metrics(&rec, &gate, *input);
            rows.push(StarkCsvRow {
                operator: variant.label(),
                input: *input,
                source: "tomography",
                purity: p,
                fidelity: f,
                fidelity_pure: fp,
            });
        }
    }
    let extra = vec![
        ("samples", spec.samples.len().to_string()),
        ("mean_tensor_shift_hz", e(spec.mean_tensor_hz)),
    ];
    let results = json!({ "mean_tensor_shift_hz": spec.mean_tensor_hz });
    Ok(Output::new(
        vec![ctx.table("stark", extra, &rows, results)?],
    ))
}

#[derive(Serialize)]
struct EntryRow {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
    target_re: f64,
    target_im: f64,
}

fn source_state(
    cfg: &RunConfig,
    source: StateSource,
    variant: FourierVariant,
    input: usize,
) -> Result<DensityMatrix3> {
    match source {
        StateSource::Ideal => {
            DensityMatrix3::pure(&variant.sequence().unitary().apply(&basis(input)))
        }
        StateSource::Stark => ensemble_state(cfg, variant, input),
    }
}

fn cmd_tomography(ctx: &Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let t = &cfg.tomography;
    let input = level("input", t.input)?;
    let set = ReadoutSet::standard();
    let target_psi = t.operator.sequence().unitary().apply(&basis(input));
    let target = DensityMatrix3::pure(&target_psi)?;

    let (scans, source) = match &t.data {
        Some(path) => {
            let scans = read_fractions_csv(std::fs::File::open(path)?)?;
            (scans, None)
        }
        None => {
            let rho = source_state(cfg, t.source, t.operator, input)?;
            let data = match t.atoms {
                None => simulate_fractions(&rho, &set, &Noise::Exact)?,
                Some(atoms) => {
                    let seed = cfg.require_seed("multinomial noise")?;
                    sample_fractions(&rho, &set, atoms, 0, &mut ChaCha8Rng::seed_from_u64(seed))?
                }
            };
            (vec![data], Some(rho))
        }
    };
    let data = TomographyData::average(&scans)?;
    let rec = mle_reconstruct(&data, &set, &t.mle)?;
    let pure = purify(&rec.rho);
    let fidelity = state_overlap(rec.rho.matrix(), &target_psi);
    let fidelity_pure = state_overlap(&pure.matrix, &target_psi);
    let p = purity(&rec.rho);
    let rows: Vec<EntryRow> = (0..9)
        .map(|k| {
            let (r, c) = (k / 3, k % 3);
            let z = rec.rho.matrix()[(r, c)];
            let w = target.matrix()[(r, c)];
            EntryRow {
                row: r,
                col: c,
                re: z.re,
                im: z.im,
                target_re: w.re,
                target_im: w.im,
            }
        })
        .collect();
    let mut extra = vec![
        ("fidelity", e(fidelity)),
        ("purity", e(p)),
        ("fidelity_pure", e(fidelity_pure)),
        ("iterations", rec.iterations.to_string()),
        ("stop", format!("{:?}", rec.stop)),
        ("regularizations", rec.regularizations.to_string()),
        ("scans", scans.len().to_string()),
    ];
    let source_distance = source
        .as_ref()
        .map(|s| trace_distance(rec.rho.matrix(), s.matrix()));
    if let Some(d) = source_distance {
        extra.push(("trace_distance_to_source", e(d)));
    }
    let results = json!({
        "fidelity": fidelity,
        "purity": p,
        "fidelity_pure": fidelity_pure,
        "iterations": rec.iterations,
        "stop": rec.stop,
        "regularizations": rec.regularizations,
        "trace_distance_to_source": source_distance,
        "rho": MatrixRecord::from(rec.rho.matrix()),
    });
    let mut files = vec![ctx.table("tomography", extra, &rows, results)?];
    let mut fractions = Vec::new();
    crate::tomo::write_fractions_csv(&mut fractions, &scans)?;
    let header = csv_with_header::<EntryRow>(&ctx.meta(vec![]), &[])?;
    files.push((
        "fractions.csv".into(),
        header + &String::from_utf8(fractions).expect("csv output is UTF-8"),
    ));
    if ctx.cfg.svg {
        let labels: Vec<String> = rows.iter().map(|r| format!("{}{}", r.row, r.col)).collect();
        let series = [
            ("Re rho", rows.iter().map(|r| r.re).collect()),
            ("Re target", rows.iter().map(|r| r.target_re).collect()),
            ("Im rho", rows.iter().map(|r| r.im).collect()),
            ("Im target", rows.iter().map(|r| r.target_im).collect()),
        ];
        files.push((
            "tomography.svg".into(),
            bar_chart("Reconstructed density matrix", "value", &labels, &series),
        ));
    }
    Ok(Output::new(files))
}

#[derive(Serialize)]
struct AveragingRow {
    scans: usize,
    fidelity_mean: f64,
    fidelity_spread: f64,
    fidelity_residual: f64,
    purity_mean: f64,
    purity_spread: f64,
    purity_residual: f64,
    fidelity_pure_mean: f64,
    fidelity_pure_spread: f64,
    fidelity_pure_residual: f64,
}

fn cmd_averaging(ctx: &Ctx) -> Result<Output> {
    let cfg = ctx.cfg;
    let a = &cfg.averaging;
    let input = level("input", a.input)?;
    let seed = match a.atoms {
        Some(_) => cfg.require_seed("multinomial noise")?,
        None => cfg.seed.unwrap_or(0),
    };
    let rho = source_state(cfg, a.source, a.operator, input)?;
    let target = a.operator.sequence().unitary().apply(&basis(input));
    let study = AveragingConfig {
        max_scans: a.scans,
        replicates: a.replicates,
        atoms: a.atoms,
        seed,
        mle: a.mle,
    };
    let pts = averaging_study(&rho, &target, &ReadoutSet::standard(), &study)?;
    let rows: Vec<AveragingRow> = pts
        .iter()
        .map(|p| AveragingRow {
            scans: p.scans,
            fidelity_mean: p.fidelity.mean,
            fidelity_spread: p.fidelity.spread,
            fidelity_residual: p.fidelity.residual,
            purity_mean: p.purity.mean,
            purity_spread: p.purity.spread,
            purity_residual: p.purity.residual,
            fidelity_pure_mean: p.fidelity_pure.mean,
            fidelity_pure_spread: p.fidelity_pure.spread,
            fidelity_pure_residual: p.fidelity_pure.residual,
        })
        .collect();
    let mut files = vec![ctx.table("averaging", vec![], &rows, json!({ "points": pts }))?];
    if ctx.cfg.svg {
        let series = [
            Series {
                name: "F residual",
                points: pts
                    .iter()
                    .map(|p| (p.scans as f64, p.fidelity.residual))
                    .collect(),
            },
            Series {
                name: "F spread",
                points: pts
                    .iter()
                    .map(|p| (p.scans as f64, p.fidelity.spread))
                    .collect(),
            },
        ];
        files.push((
            "averaging.svg".into(),
            line_plot("Scan averaging", "scans averaged", "fidelity", &series, &[]),
        ));
    }
    Ok(Output::new(files))
}

#[derive(Serialize)]
struct SelftestRow<'a> {
    id: u8,
    title: &'a str,
    passed: bool,
    detail: &'a str,
}

fn cmd_selftest(ctx: &Ctx) -> Result<Output> {
    let seed = ctx.cfg.seed.unwrap_or(acceptance::DEFAULT_SEED);
    let results: Vec<CriterionResult> = acceptance::run_all(seed);
    let table = acceptance::report(&results);
    let rows: Vec<SelftestRow> = results
        .iter()
        .map(|r| SelftestRow {
            id: r.id,
            title: r.title,
            passed: r.ok(),
            detail: &r.detail,
        })
        .collect();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.ok())
        .map(|r| r.id.to_string())
        .collect();
    let primary = ctx.table(
        "selftest",
        vec![("seed", seed.to_string())],
        &rows,
        json!({}),
    )?;
    let mut out = Output::new(vec![primary]);
    out.console = Some(table);
    if !failed.is_empty() {
        out.failure = Some(format!("criteria failed: {}", failed.join(", ")));
    }
    Ok(out)
}

fn write_outputs(out: &Output, dir: Option<&Path>) -> Result<()> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, content) in &out.files {
                std::fs::write(dir.join(name), content)?;
            }
        }
        None => {
            if out.console.is_none() {
                if let Some((_, content)) = out.files.first() {
                    print!("{content}");
                }
            }
        }
    }
    if let Some(c) = &out.console {
        print!("{c}");
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<Output> {
    let cfg = RunConfig::resolve(cli)?;
    let (command, f): (&'static str, fn(&Ctx) -> Result<Output>) = match cli.command {
        Command::Decompose(_) => ("decompose", cmd_decompose),
        Command::Scan(_) => ("scan", cmd_scan),
        Command::Detuning(_) => ("detuning", cmd_detuning),
        Command::Stark(_) => ("stark", cmd_stark),
        Command::Tomography(_) => ("tomography", cmd_tomography),
        Command::Averaging(_) => ("averaging", cmd_averaging),
        Command::Selftest => ("selftest", cmd_selftest),
    };
    let out = f(&Ctx { command, cfg: &cfg })?;
    write_outputs(&out, cfg.out.as_deref())?;
    Ok(out)
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_RUNTIME,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            });
        }
    };
    match execute(&cli) {
        Ok(out) => match out.failure {
            Some(msg) => {
                eprintln!("numerical tolerance failure: {msg}");
                ExitCode::from(EXIT_NUMERICAL)
            }
            None => ExitCode::from(EXIT_OK),
        },
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
