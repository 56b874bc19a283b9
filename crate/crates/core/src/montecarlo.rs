//! Seeded coincidence-counting simulation and the estimators built on it.
//!
//! Random numbers come from ChaCha8 keyed by the seed, with one stream per run
//! and a fixed number of draws per event, so event `k` of a run always sees the
//! same numbers. Runs are cut into blocks that are simulated in parallel and
//! merged by summing counts: the result does not depend on the thread count.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{bell_value, rotated_u, AngleSettings, BellReport, Outcome, CHSH_SIGNS};
use crate::error::{Error, Result};
use crate::hybrid::{HybridState, Polarization, SchmidtForm, DEGENERATE_KAPPA};
use crate::protocol::{
    calibrate, hom_coincidence, measured_angles, stripping_polarizer_angle, Calibration,
};

/// Events per parallel work unit.
pub const BLOCK_EVENTS: u64 = 1 << 14;

const SINGLES_STREAM: u64 = 1 << 32;
const STRIP_STREAM: u64 = SINGLES_STREAM + (1 << 16);
const CALIBRATION_RUNS: usize = 8;

fn uniform(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Simulates `n` events of one run and returns how many fell in each class.
///
/// Every event consumes exactly `draws` 64-bit words, so the stream position of
/// an event depends only on its index.
fn run_events<const K: usize>(
    seed: u64,
    stream: u64,
    n: u64,
    draws: usize,
    classify: impl Fn(&[f64]) -> usize + Sync,
) -> [u64; K] {
    let blocks = n.div_ceil(BLOCK_EVENTS);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let start = b * BLOCK_EVENTS;
            rng.set_word_pos(u128::from(start) * draws as u128 * 2);
            let end = (start + BLOCK_EVENTS).min(n);
            let mut counts = [0u64; K];
            let mut u = [0.0f64; 4];
            for _ in start..end {
                for slot in u[..draws].iter_mut() {
                    *slot = uniform(rng.next_u64());
                }
                counts[classify(&u[..draws])] += 1;
            }
            counts
        })
        .reduce(
            || [0; K],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Output pair of a singles measurement: the polarizer detector `T` together with
/// one of the beam-splitter outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SinglesPort {
    #[serde(rename = "T_Tbar")]
    TestContinuum,
    #[serde(rename = "T_Abar")]
    AuxContinuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglesRow {
    pub angle: f64,
    pub port: SinglesPort,
    pub counts: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupleRow {
    pub setting_alpha: f64,
    pub setting_beta: f64,
    pub i: u8,
    pub j: u8,
    pub counts: u64,
    pub total: u64,
}

/// Simulated coincidence counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub singles: Vec<SinglesRow>,
    pub quadruples: Vec<QuadrupleRow>,
    /// Generated quadruple events per setting.
    pub total_quadruples: u64,
}

impl CountTable {
    fn passed_at(&self, angle: f64) -> Option<(u64, u64)> {
        let rows: Vec<_> = self.singles.iter().filter(|r| r.angle == angle).collect();
        if rows.is_empty() {
            return None;
        }
        Some((rows.iter().map(|r| r.counts).sum(), rows[0].total))
    }

    /// Singles estimate of `P₁(α)` from the runs at `α` and `α + π/2`:
    /// `N_α / (N_α + N_{α+π/2})`, each summed over both output ports.
    pub fn p1_estimate(&self, alpha: f64) -> Result<Estimate> {
        let (m, n) = self
            .passed_at(alpha)
            .ok_or_else(|| Error::invalid(format!("no singles run at {alpha}")))?;
        let (mp, np) = self
            .passed_at(alpha + FRAC_PI_2)
            .ok_or_else(|| Error::invalid(format!("no singles run at {}", alpha + FRAC_PI_2)))?;
        singles_ratio(m, n, mp, np)
    }

    pub fn write_quadruples_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.quadruples {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_singles_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.singles {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A point estimate with its first-order standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
    pub seed: u64,
}

/// `m/(m+m')` with delta-method variance from the two binomial counts.
fn singles_ratio(m: u64, n: u64, mp: u64, np: u64) -> Result<Estimate> {
    if n == 0 || np == 0 {
        return Err(Error::invalid("singles runs need events"));
    }
    let sum = (m + mp) as f64;
    if sum == 0.0 {
        return Err(Error::degenerate("no singles passed at either polarizer angle"));
    }
    let (mf, mpf) = (m as f64, mp as f64);
    let var_m = mf * (1.0 - mf / n as f64);
    let var_mp = mpf * (1.0 - mpf / np as f64);
    let var = (mpf * mpf * var_m + mf * mf * var_mp) / sum.powi(4);
    Ok(Estimate { value: mf / sum, std_error: var.max(0.0).sqrt(), n_events: n + np, seed: 0 })
}

fn check_events(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("n_events must be positive"))
    } else {
        Ok(())
    }
}

fn singles_counts(state: &HybridState, u: &Polarization, n: u64, seed: u64, stream: u64) -> [u64; 3] {
    let p = state.project_polarization(u).norm_sqr().min(1.0);
    run_events::<3>(seed, stream, n, 2, |x| {
        if x[0] < p {
            if x[1] < 0.5 {
                1
            } else {
                2
            }
        } else {
            0
        }
    })
}

fn push_singles(table: &mut CountTable, angle: f64, counts: [u64; 3], n: u64) {
    table.singles.push(SinglesRow { angle, port: SinglesPort::TestContinuum, counts: counts[1], total: n });
    table.singles.push(SinglesRow { angle, port: SinglesPort::AuxContinuum, counts: counts[2], total: n });
}

/// Blocks mode `ā` and counts `T` coincidences with each beam-splitter output,
/// `n_events` trials at `α` and another `n_events` at `α + π/2`.
pub fn simulate_singles(state: &HybridState, s: &SchmidtForm, alpha: f64, n_events: u64, seed: u64) -> Result<CountTable> {
    check_events(n_events)?;
    s.check_matches(state)?;
    let mut table = CountTable::default();
    for (k, angle) in [alpha, alpha + FRAC_PI_2].into_iter().enumerate() {
        let u = rotated_u(s, angle, Outcome::First);
        let counts = singles_counts(state, &u, n_events, seed, SINGLES_STREAM + k as u64);
        push_singles(&mut table, angle, counts, n_events);
    }
    Ok(table)
}

/// Per-event probabilities of one four-photon setting.
#[derive(Debug, Clone, Copy)]
struct QuadrupleProbs {
    p_t: f64,
    p_a: f64,
    one_each: f64,
}

fn quadruple_probs(state: &HybridState, u_t: &Polarization, u_a: &Polarization) -> Result<QuadrupleProbs> {
    let x = state.project_polarization(u_t);
    let y = state.project_polarization(u_a);
    let (p_t, p_a) = (x.norm_sqr(), y.norm_sqr());
    let one_each = if p_t > 1e-24 && p_a > 1e-24 {
        let x = x.scaled(Complex64::new(p_t.sqrt().recip(), 0.0));
        let y = y.scaled(Complex64::new(p_a.sqrt().recip(), 0.0));
        hom_coincidence(&x, &y)?
    } else {
        0.0
    };
    Ok(QuadrupleProbs { p_t: p_t.min(1.0), p_a: p_a.min(1.0), one_each })
}

fn quadruple_counts(p: QuadrupleProbs, n: u64, seed: u64, stream: u64) -> u64 {
    run_events::<2>(seed, stream, n, 3, |x| usize::from(x[0] < p.p_t && x[1] < p.p_a && x[2] < p.one_each))[1]
}

/// Four-photon trials at `(α, β)`: polarizer `t` at `α`, polarizer `a` at the
/// stripping angle for `β`, one-photon-per-port post-selection at the beam
/// splitter. Uses the true Schmidt basis and coefficients.
pub fn simulate_quadruples(
    state: &HybridState,
    s: &SchmidtForm,
    alpha: f64,
    beta: f64,
    n_events: u64,
    seed: u64,
) -> Result<CountTable> {
    check_events(n_events)?;
    if s.degenerate {
        return Err(Error::degenerate("four-photon simulation needs κ₂ > 0"));
    }
    s.check_matches(state)?;
    let strip = stripping_polarizer_angle(beta, s.kappa1, s.kappa2);
    let probs = quadruple_probs(state, &rotated_u(s, alpha, Outcome::First), &rotated_u(s, strip, Outcome::First))?;
    let counts = quadruple_counts(probs, n_events, seed, 0);
    Ok(CountTable {
        singles: Vec::new(),
        quadruples: vec![QuadrupleRow { setting_alpha: alpha, setting_beta: beta, i: 1, j: 2, counts, total: n_events }],
        total_quadruples: n_events,
    })
}

/// How polarizer angles are turned into polarization vectors.
#[derive(Debug, Clone, Copy)]
enum Frame<'a> {
    /// Rotations of the true Schmidt vectors.
    Schmidt(&'a SchmidtForm),
    /// Linear polarizers read off a dial whose zero was set by calibration.
    Lab { origin: f64 },
}

impl Frame<'_> {
    fn polarizer(&self, angle: f64) -> Polarization {
        match *self {
            Frame::Schmidt(s) => rotated_u(s, angle, Outcome::First),
            Frame::Lab { origin } => {
                let (sn, cs) = (origin + angle).sin_cos();
                [Complex64::new(cs, 0.0), Complex64::new(sn, 0.0)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    /// Trials per run.
    pub n_events: u64,
    pub seed: u64,
    /// Estimate κ and the polarizer origin from simulated scans; otherwise use the
    /// true Schmidt form.
    pub calibrate: bool,
}

/// Monte Carlo Bell estimate together with the analytic reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub estimate: Estimate,
    pub correlations: [Estimate; 4],
    pub analytic: BellReport,
    pub calibration: Option<Calibration>,
    pub counts: CountTable,
}

/// Simulated polarizer scan over `δ = kπ/16`, fitted by [`calibrate`].
fn run_calibration(state: &HybridState, n: u64, seed: u64, table: &mut CountTable) -> Result<Calibration> {
    let frame = Frame::Lab { origin: 0.0 };
    let mut scan = Vec::with_capacity(2 * CALIBRATION_RUNS);
    for r in 0..CALIBRATION_RUNS {
        let delta = r as f64 * PI / 16.0;
        let c0 = singles_counts(state, &frame.polarizer(delta), n, seed, SINGLES_STREAM + 2 * r as u64);
        let c1 = singles_counts(state, &frame.polarizer(delta + FRAC_PI_2), n, seed, SINGLES_STREAM + 2 * r as u64 + 1);
        push_singles(table, delta, c0, n);
        push_singles(table, delta + FRAC_PI_2, c1, n);
        let p = singles_ratio(c0[1] + c0[2], n, c1[1] + c1[2], n)?.value;
        scan.push((delta, p));
        scan.push((delta + FRAC_PI_2, 1.0 - p));
    }
    // The harmonic amplitude has standard error ≈ 1/(4√n); flag anything under 4σ.
    calibrate(&scan, 1.0 / (n as f64).sqrt())
}

/// Simulated CHSH experiment: calibration, stripping from the estimated κ, 16
/// four-photon runs, reconstruction of each joint probability and delta-method
/// error propagation.
pub fn estimate_bell(
    state: &HybridState,
    s: &SchmidtForm,
    settings: &AngleSettings,
    n_per_setting: u64,
    seed: u64,
) -> Result<BellEstimate> {
    estimate_bell_with(state, s, settings, &McConfig { n_events: n_per_setting, seed, calibrate: true })
}

pub fn estimate_bell_with(state: &HybridState, s: &SchmidtForm, settings: &AngleSettings, cfg: &McConfig) -> Result<BellEstimate> {
    let n = cfg.n_events;
    check_events(n)?;
    if s.degenerate {
        return Err(Error::degenerate("Bell estimate needs an entangled state (κ₂ > 0)"));
    }
    s.check_matches(state)?;
    let analytic = bell_value(state, s, settings)?;

    let mut table = CountTable { total_quadruples: n, ..CountTable::default() };
    let (frame, k1, k2, calibration) = if cfg.calibrate {
        let cal = run_calibration(state, n, cfg.seed, &mut table)?;
        (Frame::Lab { origin: cal.alpha_origin }, cal.kappa1, cal.kappa2, Some(cal))
    } else {
        (Frame::Schmidt(s), s.kappa1, s.kappa2, None)
    };
    if !(k2 > DEGENERATE_KAPPA) {
        return Err(Error::degenerate("calibration found κ₂ = 0; stripping is undefined"));
    }

    // Measurement plan: (setting slot, sign, test angle, stripping angle).
    let mut plan = Vec::with_capacity(16);
    for (slot, (alpha, beta)) in settings.pairs().into_iter().enumerate() {
        for i in Outcome::ALL {
            for j in Outcome::ALL {
                let (a, b) = measured_angles(i, j, alpha, beta);
                plan.push((slot, i, j, alpha, beta, a, stripping_polarizer_angle(b, k1, k2)));
            }
        }
    }

    let mut strips: Vec<f64> = Vec::new();
    for p in &plan {
        if !strips.contains(&p.6) {
            strips.push(p.6);
        }
    }
    let mut p1s = Vec::with_capacity(strips.len());
    for (m, &strip) in strips.iter().enumerate() {
        let stream = STRIP_STREAM + 2 * m as u64;
        let c0 = singles_counts(state, &frame.polarizer(strip), n, cfg.seed, stream);
        let c1 = singles_counts(state, &frame.polarizer(strip + FRAC_PI_2), n, cfg.seed, stream + 1);
        push_singles(&mut table, strip, c0, n);
        push_singles(&mut table, strip + FRAC_PI_2, c1, n);
        p1s.push(singles_ratio(c0[1] + c0[2], n, c1[1] + c1[2], n)?);
    }

    let mut corr = [0.0f64; 4];
    let mut corr_var_r = [0.0f64; 4];
    // ∂C_slot/∂P̂₁(strip m), for the shared-singles part of the variance.
    let mut grad_p = vec![[0.0f64; 4]; strips.len()];
    for (q, &(slot, i, j, alpha, beta, a, strip)) in plan.iter().enumerate() {
        let probs = quadruple_probs(state, &frame.polarizer(a), &frame.polarizer(strip))?;
        let counts = quadruple_counts(probs, n, cfg.seed, q as u64);
        table.quadruples.push(QuadrupleRow {
            setting_alpha: alpha,
            setting_beta: beta,
            i: i.index(),
            j: j.index(),
            counts,
            total: n,
        });
        let m = strips.iter().position(|&x| x == strip).expect("strip angle recorded");
        let p = p1s[m].value;
        if !(p > 0.0) {
            return Err(Error::degenerate("stripping polarizer passed no singles"));
        }
        let r = counts as f64 / n as f64;
        let sign = i.sign() * j.sign();
        corr[slot] += sign * 2.0 * r / p;
        corr_var_r[slot] += (2.0 / p).powi(2) * r * (1.0 - r) / n as f64;
        grad_p[m][slot] += -sign * 2.0 * r / (p * p);
    }

    let mut correlations = [Estimate { value: 0.0, std_error: 0.0, n_events: 4 * n, seed: cfg.seed }; 4];
    for slot in 0..4 {
        let shared: f64 = grad_p.iter().zip(&p1s).map(|(g, e)| (g[slot] * e.std_error).powi(2)).sum();
        correlations[slot].value = corr[slot];
        correlations[slot].std_error = (corr_var_r[slot] + shared).sqrt();
    }
    let value: f64 = corr.iter().zip(CHSH_SIGNS).map(|(c, w)| c * w).sum();
    let var_r: f64 = corr_var_r.iter().sum();
    let var_p: f64 = grad_p
        .iter()
        .zip(&p1s)
        .map(|(g, e)| {
            let d: f64 = g.iter().zip(CHSH_SIGNS).map(|(x, w)| x * w).sum();
            (d * e.std_error).powi(2)
        })
        .sum();

    Ok(BellEstimate {
        estimate: Estimate { value, std_error: (var_r + var_p).sqrt(), n_events: 16 * n, seed: cfg.seed },
        correlations,
        analytic,
        calibration,
        counts: table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::canonical_settings;
    use crate::continuum::{make_grid, GridKind};
    use crate::protocol::four_photon_probability;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn state(theta: f64, z: f64) -> HybridState {
        let g = make_grid(GridKind::UniformTrapezoid, 256, (-8.0, 8.0)).unwrap();
        HybridState::with_overlap(theta, Complex64::new(z, 0.0), &g).unwrap()
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        assert_eq!(uniform(0), 0.0);
        assert!(uniform(u64::MAX) < 1.0);
    }

    #[test]
    fn product_state_passes_everything_at_zero() {
        let st = state(0.0, 0.0);
        let s = st.schmidt_decompose();
        let t = simulate_singles(&st, &s, 0.0, 10_000, 1).unwrap();
        let (m, _) = t.passed_at(0.0).unwrap();
        let (mp, _) = t.passed_at(FRAC_PI_2).unwrap();
        assert_eq!((m, mp), (10_000, 0));
        assert_eq!(t.p1_estimate(0.0).unwrap().value, 1.0);
    }

    #[test]
    fn singles_estimate_is_binomially_close() {
        // κ₁² = 0.75 needs cos²θ-type weights; use z = 0 so κ₁ = cosθ.
        let st = state((0.75f64).sqrt().acos(), 0.0);
        let s = st.schmidt_decompose();
        let t = simulate_singles(&st, &s, 0.0, 1_000_000, 7).unwrap();
        let e = t.p1_estimate(0.0).unwrap();
        assert!((e.value - 0.75).abs() < 3.0 * (0.75f64 * 0.25 / 1e6).sqrt(), "{}", e.value);
        assert!(e.std_error > 0.0);
    }

    #[test]
    fn runs_are_deterministic_and_partition_free() {
        let st = state(0.7, 0.3);
        let s = st.schmidt_decompose();
        let a = simulate_quadruples(&st, &s, 0.2, 0.5, 100_003, 42).unwrap();
        let b = simulate_quadruples(&st, &s, 0.2, 0.5, 100_003, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| simulate_quadruples(&st, &s, 0.2, 0.5, 100_003, 42).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn quadruple_rate_matches_closed_form() {
        let st = state(FRAC_PI_4, 0.0);
        let s = st.schmidt_decompose();
        let n = 1_000_000u64;
        let t = simulate_quadruples(&st, &s, 0.0, FRAC_PI_8, n, 3).unwrap();
        let p = four_photon_probability(&st, &s, 0.0, FRAC_PI_8).unwrap();
        assert!((p - 0.0183058).abs() < 1e-6);
        let rate = t.quadruples[0].counts as f64 / n as f64;
        assert!((rate - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{rate} vs {p}");

        // Seeds s and s+1 agree within a two-sample 6σ bound.
        let u = simulate_quadruples(&st, &s, 0.0, FRAC_PI_8, n, 4).unwrap();
        let rate2 = u.quadruples[0].counts as f64 / n as f64;
        assert_ne!(t, u);
        assert!((rate - rate2).abs() < 6.0 * (2.0 * p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn stripped_setting_gives_no_quadruples() {
        let st = state(0.9, 0.2);
        let s = st.schmidt_decompose();
        let beta = 0.5;
        let alpha = (s.kappa1 * f64::tan(beta) / s.kappa2).atan();
        let t = simulate_quadruples(&st, &s, alpha, beta, 200_000, 9).unwrap();
        assert_eq!(t.quadruples[0].counts, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let st = state(0.0, 0.0);
        let s = st.schmidt_decompose();
        assert!(matches!(simulate_quadruples(&st, &s, 0.0, 0.1, 10, 1), Err(Error::DegenerateInput(_))));
        assert!(matches!(simulate_singles(&st, &s, 0.0, 0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            estimate_bell(&st, &s, &canonical_settings(), 10, 1),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn csv_has_expected_columns() {
        let st = state(FRAC_PI_4, 0.0);
        let s = st.schmidt_decompose();
        let t = simulate_quadruples(&st, &s, 0.0, FRAC_PI_8, 1000, 3).unwrap();
        let mut buf = Vec::new();
        t.write_quadruples_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("setting_alpha,setting_beta,i,j,counts,total\n"));
    }
}
