//! Command-line front end for the `dcbell` binary.

use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{bell_value, canonical_bell, canonical_settings, optimize_settings, AngleSettings, BellReport};
use crate::config::{OverlapSpec, RunConfig, SettingsSpec, StateSource};
use crate::error::{Error, Result};
use crate::hybrid::{HybridState, SchmidtForm};
use crate::montecarlo::{estimate_bell_with, Estimate, McConfig};
use crate::protocol::{run_protocol, Calibration};
use crate::spdc::{run_pipeline, SpdcConfig};

#[derive(Debug, Parser)]
#[command(name = "dcbell", version, about = "CHSH tests on polarization–continuum entangled states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// canonical | optimize | explicit α,α′,β,β′ (radians).
    #[arg(long, num_args = 1..=2, value_name = "MODE")]
    pub settings: Option<Vec<String>>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for event blocks and sweep points.
    #[arg(long, value_name = "K", default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct McArgs {
    /// Random seed; required, either here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Events per run.
    #[arg(long)]
    pub events: Option<u64>,
    /// Feed exact probabilities through the estimators instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Skip calibration and use the true Schmidt form.
    #[arg(long)]
    pub true_kappa: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Z,
    Theta,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Schmidt coefficients and overlap of the configured state.
    Schmidt(#[command(flatten)] Common),
    /// Bell value from direct joint probabilities.
    Bell(#[command(flatten)] Common),
    /// Four-photon protocol with exact coincidence ratios.
    Protocol(#[command(flatten)] Common),
    /// Monte Carlo coincidence experiment.
    Mc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Sweep the overlap or mixing angle of a Gaussian/Hermite-Gaussian state.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Number of intervals; the sweep has steps + 1 points.
        #[arg(long)]
        steps: usize,
        /// Fixed mixing angle when sweeping z.
        #[arg(long, default_value_t = FRAC_PI_4)]
        theta: f64,
        /// Fixed real overlap when sweeping θ.
        #[arg(long, default_value_t = 0.0)]
        z: f64,
    },
    /// Run the down-conversion source and write the heralded state record.
    SpdcGen(#[command(flatten)] Common),
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dcbell: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let workers = match &cli.command {
        Command::Schmidt(c) | Command::Bell(c) | Command::Protocol(c) | Command::SpdcGen(c) => c.workers,
        Command::Mc { common, .. } | Command::Sweep { common, .. } => common.workers,
    };
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Schmidt(c) => cmd_schmidt(&c),
        Command::Bell(c) => cmd_bell(&c),
        Command::Protocol(c) => cmd_protocol(&c),
        Command::Mc { common, mc } => cmd_mc(&common, &mc),
        Command::Sweep { common, mc, param, from, to, steps, theta, z } => {
            cmd_sweep(&common, &mc, &SweepSpec { param, from, to, steps, theta, z })
        }
        Command::SpdcGen(c) => cmd_spdc_gen(&c),
    })
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => return Err(Error::Config("--config PATH is required".into())),
    };
    if let Some(s) = &c.settings {
        cfg.settings = parse_settings(s)?;
    }
    Ok(cfg)
}

/// Parses the `--settings` values.
pub fn parse_settings(words: &[String]) -> Result<SettingsSpec> {
    let bad = || Error::Config(format!("bad --settings {:?}; use canonical, optimize or explicit a,a',b,b'", words.join(" ")));
    match words {
        [m] if m == "canonical" => Ok(SettingsSpec::Canonical),
        [m] if m == "optimize" => Ok(SettingsSpec::Optimize),
        [m, list] if m == "explicit" => {
            let vals: Vec<f64> = list
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            let arr: [f64; 4] = vals.try_into().map_err(|_| bad())?;
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(bad());
            }
            Ok(SettingsSpec::Explicit(arr))
        }
        _ => Err(bad()),
    }
}

fn settings_for(cfg: &RunConfig, s: &SchmidtForm) -> Result<AngleSettings> {
    match cfg.fixed_settings()? {
        Some(st) => Ok(st),
        None => Ok(optimize_settings(s.kappa1, s.kappa2)?.0),
    }
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtReport {
    pub theta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_product: f64,
    pub z: ComplexValue,
    pub z_abs: f64,
    /// `√2(2κ₁κ₂+1)`.
    pub canonical_bell: f64,
    /// Canonical settings give `B > 2`, i.e. `κ₁κ₂ > (√2−1)/2`.
    pub violation_possible: bool,
    /// `2√(1+4κ₁²κ₂²)`, reached by optimized settings.
    pub optimal_bell: f64,
    /// Product state: `κ₂ = 0`.
    pub degenerate: bool,
    /// `κ₁ = κ₂`: the Schmidt basis is not unique.
    pub equal_coefficients: bool,
    pub linear_polarizer_realizable: bool,
}

pub fn schmidt_report(state: &HybridState, s: &SchmidtForm) -> SchmidtReport {
    let z = state.overlap_z();
    let b = canonical_bell(s.kappa1, s.kappa2);
    let p = s.kappa_product();
    SchmidtReport {
        theta: state.theta(),
        kappa1: s.kappa1,
        kappa2: s.kappa2,
        kappa_product: p,
        z: z.into(),
        z_abs: z.norm(),
        canonical_bell: b,
        violation_possible: b > 2.0,
        optimal_bell: 2.0 * (1.0 + 4.0 * p * p).sqrt(),
        degenerate: s.degenerate,
        equal_coefficients: (s.kappa1 - s.kappa2).abs() < 1e-12,
        linear_polarizer_realizable: s.linear_polarizer_realizable,
    }
}

fn state_and_schmidt(cfg: &RunConfig) -> Result<(HybridState, SchmidtForm)> {
    let state = cfg.build_state()?;
    let s = state.schmidt_decompose();
    s.validate(&state)?;
    Ok((state, s))
}

fn cmd_schmidt(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let (state, s) = state_and_schmidt(&cfg)?;
    emit_json(&schmidt_report(&state, &s), c.out.as_deref())
}

fn cmd_bell(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let (state, s) = state_and_schmidt(&cfg)?;
    let settings = settings_for(&cfg, &s)?;
    emit_json(&bell_value(&state, &s, &settings)?, c.out.as_deref())
}

fn cmd_protocol(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let (state, s) = state_and_schmidt(&cfg)?;
    let settings = settings_for(&cfg, &s)?;
    emit_json(&run_protocol(&state, &s, &settings)?, c.out.as_deref())
}

/// JSON written by `mc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
    pub seed: u64,
    pub exact: bool,
    pub settings: AngleSettings,
    pub correlations: [Estimate; 4],
    pub calibration: Option<Calibration>,
    pub analytic: BellReport,
}

fn mc_seed(cfg: &RunConfig, mc: &McArgs) -> Result<u64> {
    mc.seed
        .or(cfg.monte_carlo.seed)
        .ok_or_else(|| Error::Config("Monte Carlo runs need an explicit --seed N (or monte_carlo.seed)".into()))
}

const DEFAULT_EVENTS: u64 = 100_000;

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn cmd_mc(c: &Common, mc: &McArgs) -> Result<()> {
    let cfg = load_config(c)?;
    let seed = mc_seed(&cfg, mc)?;
    let n = mc.events.or(cfg.monte_carlo.n_events).unwrap_or(DEFAULT_EVENTS);
    let (state, s) = state_and_schmidt(&cfg)?;
    let settings = settings_for(&cfg, &s)?;

    if mc.exact {
        let proto = run_protocol(&state, &s, &settings)?;
        let analytic = bell_value(&state, &s, &settings)?;
        let corr = proto.correlations.map(|v| Estimate { value: v, std_error: 0.0, n_events: 0, seed });
        let report = McReport {
            value: proto.bell_value,
            std_error: 0.0,
            n_events: 0,
            seed,
            exact: true,
            settings,
            correlations: corr,
            calibration: None,
            analytic,
        };
        return emit_json(&report, c.out.as_deref());
    }

    let est = estimate_bell_with(&state, &s, &settings, &McConfig { n_events: n, seed, calibrate: !mc.true_kappa })?;
    let report = McReport {
        value: est.estimate.value,
        std_error: est.estimate.std_error,
        n_events: est.estimate.n_events,
        seed,
        exact: false,
        settings,
        correlations: est.correlations,
        calibration: est.calibration,
        analytic: est.analytic,
    };
    if let Some(out) = &c.out {
        est.counts.write_quadruples_csv(BufWriter::new(File::create(side_path(out, "counts"))?))?;
        est.counts.write_singles_csv(BufWriter::new(File::create(side_path(out, "singles"))?))?;
    }
    emit_json(&report, c.out.as_deref())
}

#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub theta: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub kappa_product: f64,
    pub b_canonical: f64,
    pub b_mc: Option<f64>,
    pub b_mc_std: Option<f64>,
}

fn sweep_row(
    grid: &std::sync::Arc<crate::continuum::Grid>,
    spec: &SweepSpec,
    x: f64,
    mc: Option<(McConfig, bool)>,
    fixed: Option<AngleSettings>,
) -> Result<SweepRow> {
    let (theta, z) = match spec.param {
        SweepParam::Z => (spec.theta, x),
        SweepParam::Theta => (x, spec.z),
    };
    let state = HybridState::with_overlap(theta, Complex64::new(z, 0.0), grid)?;
    let s = state.schmidt_decompose();
    let b_canonical = bell_value(&state, &s, &canonical_settings())?.bell_value;
    let (mut b_mc, mut b_mc_std) = (None, None);
    if let Some((cfg, exact)) = mc {
        if !s.degenerate {
            let settings = match fixed {
                Some(st) => st,
                None => optimize_settings(s.kappa1, s.kappa2)?.0,
            };
            if exact {
                b_mc = Some(run_protocol(&state, &s, &settings)?.bell_value);
                b_mc_std = Some(0.0);
            } else {
                let e = estimate_bell_with(&state, &s, &settings, &cfg)?.estimate;
                b_mc = Some(e.value);
                b_mc_std = Some(e.std_error);
            }
        }
    }
    Ok(SweepRow { param: x, kappa_product: s.kappa_product(), b_canonical, b_mc, b_mc_std })
}

/// Evaluates a sweep; points are independent and computed in parallel, in order.
///
/// The swept state is `HybridState::with_overlap` on the configured grid; the
/// config's state source is not used.
pub fn sweep(cfg: &RunConfig, spec: &SweepSpec, mc: &McArgs) -> Result<Vec<SweepRow>> {
    if spec.steps == 0 || !(spec.from.is_finite() && spec.to.is_finite()) || spec.from == spec.to {
        return Err(Error::Config(format!(
            "empty sweep range: --from {} --to {} --steps {}",
            spec.from, spec.to, spec.steps
        )));
    }
    let grid = cfg.grid()?;
    let fixed = cfg.fixed_settings()?;
    let mc_cfg = if mc.exact {
        Some((McConfig { n_events: 0, seed: 0, calibrate: false }, true))
    } else if mc.events.is_some() || mc.seed.is_some() {
        let n = mc.events.or(cfg.monte_carlo.n_events).unwrap_or(DEFAULT_EVENTS);
        Some((McConfig { n_events: n, seed: mc_seed(cfg, mc)?, calibrate: !mc.true_kappa }, false))
    } else {
        None
    };
    let xs: Vec<f64> = (0..=spec.steps)
        .map(|k| if k == spec.steps { spec.to } else { spec.from + (spec.to - spec.from) * k as f64 / spec.steps as f64 })
        .collect();
    xs.par_iter().map(|&x| sweep_row(&grid, spec, x, mc_cfg, fixed)).collect()
}

fn cmd_sweep(c: &Common, mc: &McArgs, spec: &SweepSpec) -> Result<()> {
    let cfg = match &c.config {
        Some(_) => load_config(c)?,
        None => {
            let mut cfg = RunConfig::from_state(StateSource::Overlap { theta: spec.theta, z: OverlapSpec::Real(spec.z) });
            if let Some(s) = &c.settings {
                cfg.settings = parse_settings(s)?;
            }
            cfg
        }
    };
    let rows = sweep(&cfg, spec, mc)?;
    let mut w = csv::Writer::from_writer(open_out(c.out.as_deref())?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the heralded state record; a summary goes to stderr.
fn cmd_spdc_gen(c: &Common) -> Result<()> {
    let cfg = match &c.config {
        None => SpdcConfig::default_config(),
        Some(p) => match SpdcConfig::from_file(p) {
            Ok(cfg) => cfg,
            Err(_) => {
                let run = RunConfig::load(p)?;
                match run.state {
                    StateSource::Spdc { .. } => {
                        let state = run.build_state()?;
                        return finish_spdc(c, &state, None);
                    }
                    _ => return Err(Error::Config("spdc-gen needs an SPDC config or a config with an spdc state source".into())),
                }
            }
        },
    };
    let out = run_pipeline(&cfg)?;
    finish_spdc(c, &out.state, Some(out.heralding_probability))
}

fn finish_spdc(c: &Common, state: &HybridState, heralding: Option<f64>) -> Result<()> {
    let s = state.schmidt_decompose();
    s.validate(state)?;
    eprintln!(
        "theta = {:.6}, |z| = {:.6}, kappa1 = {:.6}, kappa2 = {:.6}, kappa_product = {:.6}{}",
        state.theta(),
        state.overlap_z().norm(),
        s.kappa1,
        s.kappa2,
        s.kappa_product(),
        heralding.map(|p| format!(", heralding = {p:.6}")).unwrap_or_default()
    );
    emit_json(&state.to_record(), c.out.as_deref())
}

