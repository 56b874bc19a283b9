//! Four-photon indirect measurement of the continuum basis.
//!
//! The test pair `(t, t̄)` and an identical auxiliary pair `(a, ā)` each pass a
//! polarizer on their polarization photon. The auxiliary polarizer is set to the
//! stripping angle, which leaves photon `ā` exactly in `|f₁^β⟩`. Photons `t̄` and `ā`
//! then meet on a 50:50 beam splitter; by two-photon interference only the
//! `|f₂^β⟩` part of `t̄` can leave with one photon per output port, so the
//! four-fold coincidence rate measures `P₁₂(α,β)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chsh::{canonical_bell, rotated_f, rotated_u, AngleSettings, Outcome, CHSH_SIGNS};
use crate::continuum::Bundle;
use crate::error::{Error, Result};
use crate::hybrid::{HybridState, SchmidtForm, DEGENERATE_KAPPA};

/// Optical modes of the four-photon setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    /// `t`: polarization photon of the test pair.
    TestPolarization,
    /// `t̄`: continuum photon of the test pair.
    TestContinuum,
    /// `a`: polarization photon of the auxiliary pair.
    AuxPolarization,
    /// `ā`: continuum photon of the auxiliary pair.
    AuxContinuum,
    /// `T`: after the test polarizer.
    TestDetector,
    /// `T̄`: beam-splitter output.
    TestContinuumPort,
    /// `A`: after the stripping polarizer.
    AuxDetector,
    /// `Ā`: beam-splitter output.
    AuxContinuumPort,
}

impl ModeLabel {
    pub fn symbol(self) -> &'static str {
        match self {
            ModeLabel::TestPolarization => "t",
            ModeLabel::TestContinuum => "t̄",
            ModeLabel::AuxPolarization => "a",
            ModeLabel::AuxContinuum => "ā",
            ModeLabel::TestDetector => "T",
            ModeLabel::TestContinuumPort => "T̄",
            ModeLabel::AuxDetector => "A",
            ModeLabel::AuxContinuumPort => "Ā",
        }
    }
}

/// `P₁(α) = κ₁² cos²α + κ₂² sin²α`.
pub fn singles_probability(alpha: f64, kappa1: f64, kappa2: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    kappa1 * kappa1 * c * c + kappa2 * kappa2 * s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Polarizer reading at which the singles rate peaks, in `[0, π)`.
    pub alpha_origin: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// The scan was flat within the noise floor: `κ₁ = κ₂` and the origin is arbitrary.
    pub degenerate: bool,
}

/// Fits `κ₁² cos²(δ−δ₀) + κ₂² sin²(δ−δ₀)` to a polarizer scan of `(δ, P₁)` pairs.
///
/// The model is linear in `(1, cos2δ, sin2δ)`; the peak sits at half the phase of
/// the harmonic and its height gives `κ₁²`. A harmonic amplitude below
/// `noise_floor` marks the scan as flat.
pub fn calibrate(scan: &[(f64, f64)], noise_floor: f64) -> Result<Calibration> {
    if scan.len() < 8 {
        return Err(Error::invalid(format!("calibration needs >= 8 scan points, got {}", scan.len())));
    }
    if scan.iter().any(|(a, p)| !(a.is_finite() && p.is_finite())) {
        return Err(Error::invalid("scan values must be finite"));
    }
    let lo = scan.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = scan.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < FRAC_PI_2 - 1e-12 {
        return Err(Error::invalid("calibration scan must cover at least half a period (π/2)"));
    }

    // Normal equations for least squares on the basis (1, cos2δ, sin2δ).
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(a, p) in scan {
        let (s2, c2) = (2.0 * a).sin_cos();
        let row = [1.0, c2, s2];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * p;
        }
    }
    let coef = solve3(ata, atb)
        .ok_or_else(|| Error::invalid("scan angles do not determine the harmonic fit"))?;
    let amplitude = coef[1].hypot(coef[2]);
    if amplitude < noise_floor {
        let k = FRAC_1_SQRT_2;
        return Ok(Calibration { alpha_origin: 0.0, kappa1: k, kappa2: k, degenerate: true });
    }
    let origin = (0.5 * coef[2].atan2(coef[1])).rem_euclid(PI);
    let k1sq = (coef[0] + amplitude).clamp(0.5, 1.0);
    Ok(Calibration {
        alpha_origin: if origin >= PI { 0.0 } else { origin },
        kappa1: k1sq.sqrt(),
        kappa2: (1.0 - k1sq).sqrt(),
        degenerate: false,
    })
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *slot = det(&mk) / d;
    }
    Some(out)
}

/// The continuum photon left behind after a polarizer passes `|u₁^α⟩`.
#[derive(Debug, Clone)]
pub struct ProjectedPairState {
    /// `√P₁(α)`.
    pub prefactor: f64,
    pub polarizer_angle: f64,
    /// Amplitude on `|f₁^β⟩`.
    pub c11: Complex64,
    /// Amplitude on `|f₂^β⟩`.
    pub c12: Complex64,
    /// The normalized surviving continuum photon.
    pub photon: Bundle,
}

fn project_unchecked(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> Result<ProjectedPairState> {
    let remainder = state.project_polarization(&rotated_u(s, alpha, Outcome::First));
    let p1 = remainder.norm_sqr();
    if !(p1 > 1e-24) {
        return Err(Error::degenerate(format!("polarizer at {alpha} rad passes nothing")));
    }
    let prefactor = p1.sqrt();
    let photon = remainder.scaled(Complex64::new(1.0 / prefactor, 0.0));
    let c11 = rotated_f(s, beta, Outcome::First).inner_unchecked(&photon);
    let c12 = rotated_f(s, beta, Outcome::Second).inner_unchecked(&photon);
    Ok(ProjectedPairState { prefactor, polarizer_angle: alpha, c11, c12, photon })
}

/// Projects the polarization photon on `|u₁^α⟩` and expands the surviving
/// continuum photon over `{|f₁^β⟩, |f₂^β⟩}`.
pub fn project_polarizer(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> Result<ProjectedPairState> {
    s.check_matches(state)?;
    project_unchecked(state, s, alpha, beta)
}

/// Stripping-polarizer angle `s` with `κ₁ tanβ = κ₂ tan s`, in `(−π/2, π/2)`.
///
/// Rejects `β` within 1e-6 of `π/2 (mod π)`, where `tanβ` diverges.
pub fn stripping_angle(beta: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    if !(kappa2 > DEGENERATE_KAPPA) {
        return Err(Error::degenerate("stripping needs κ₂ > 0 (product state)"));
    }
    if !beta.is_finite() || (beta.rem_euclid(PI) - FRAC_PI_2).abs() <= 1e-6 {
        return Err(Error::invalid(format!("stripping undefined at β = {beta} (tanβ diverges)")));
    }
    Ok(stripping_polarizer_angle(beta, kappa1, kappa2))
}

/// Polarizer angle whose projection leaves the partner photon in `|f₁^β⟩`.
///
/// Same condition as [`stripping_angle`], solved with `atan2` so that it stays
/// defined at `β = π/2`, where the answer is `π/2`. Returned in `(−π/2, π/2]`.
pub fn stripping_polarizer_angle(beta: f64, kappa1: f64, kappa2: f64) -> f64 {
    let (sb, cb) = beta.sin_cos();
    let mut s = (kappa1 * sb).atan2(kappa2 * cb);
    if s > FRAC_PI_2 {
        s -= PI;
    } else if s <= -FRAC_PI_2 {
        s += PI;
    }
    s
}

/// The two stripping angles for a CHSH run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrippingConfig {
    pub s: f64,
    pub s_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl StrippingConfig {
    pub fn new(beta: f64, beta_prime: f64, kappa1: f64, kappa2: f64) -> Result<Self> {
        Ok(StrippingConfig {
            s: stripping_angle(beta, kappa1, kappa2)?,
            s_prime: stripping_angle(beta_prime, kappa1, kappa2)?,
            beta,
            beta_prime,
            kappa1,
            kappa2,
        })
    }

    pub fn for_settings(settings: &AngleSettings, kappa1: f64, kappa2: f64) -> Result<Self> {
        StrippingConfig::new(settings.beta, settings.beta_prime, kappa1, kappa2)
    }

    /// Residual of `κ₁ tanβ = κ₂ tan s` for both angle pairs.
    pub fn residual(&self) -> f64 {
        let r = |b: f64, s: f64| (self.kappa1 * b.tan() - self.kappa2 * s.tan()).abs();
        r(self.beta, self.s).max(r(self.beta_prime, self.s_prime))
    }
}

/// Index of a single-photon mode `(port, bundle)` in the two-photon tensor.
/// Port 0 is `T̄`, port 1 is `Ā`; bundle 0 is `f₁^β`, bundle 1 is `f₂^β`.
fn mode(port: usize, bundle: usize) -> usize {
    2 * port + bundle
}

const PORT_TBAR: usize = 0;
const PORT_ABAR: usize = 1;

/// Two-photon state after the beam splitter, as a symmetric amplitude tensor over
/// the four single-photon modes `(port, bundle)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonOutput {
    /// `S = (A + Aᵀ)/2` with `|Ψ⟩ = Σ_kl S_kl a†_k a†_l |0⟩`.
    pub symmetric: [[Complex64; 4]; 4],
}

impl TwoPhotonOutput {
    /// Amplitude `⟨0| a_k a_l |Ψ⟩` for distinct modes.
    fn pair_amplitude(&self, k: usize, l: usize) -> Complex64 {
        self.symmetric[k][l] * 2.0
    }

    /// Amplitude for bundle `m` in `T̄` and bundle `n` in `Ā`.
    pub fn one_each_amplitude(&self, m: usize, n: usize) -> Complex64 {
        self.pair_amplitude(mode(PORT_TBAR, m), mode(PORT_ABAR, n))
    }

    pub fn one_each_probability(&self) -> f64 {
        (0..2)
            .flat_map(|m| (0..2).map(move |n| (m, n)))
            .map(|(m, n)| self.one_each_amplitude(m, n).norm_sqr())
            .sum()
    }

    fn both_in(&self, port: usize) -> f64 {
        let a = mode(port, 0);
        let b = mode(port, 1);
        // Same mode twice: |⟨0|a_k a_k|Ψ⟩|²/2 = 2|S_kk|².
        2.0 * self.symmetric[a][a].norm_sqr()
            + 2.0 * self.symmetric[b][b].norm_sqr()
            + self.pair_amplitude(a, b).norm_sqr()
    }

    pub fn both_in_tbar_probability(&self) -> f64 {
        self.both_in(PORT_TBAR)
    }

    pub fn both_in_abar_probability(&self) -> f64 {
        self.both_in(PORT_ABAR)
    }
}

/// 50:50 beam splitter acting on photon `t̄` (bundle coefficients `in_tbar`) and
/// photon `ā` (`in_abar`), both expanded over `{f₁^β, f₂^β}`:
/// `|f⟩_t̄ → (|f⟩_Ā + i|f⟩_T̄)/√2`, `|f⟩_ā → (i|f⟩_Ā + |f⟩_T̄)/√2`.
pub fn beamsplitter(in_tbar: [Complex64; 2], in_abar: [Complex64; 2]) -> Result<TwoPhotonOutput> {
    for (name, v) in [("t̄", &in_tbar), ("ā", &in_abar)] {
        let n = v[0].norm_sqr() + v[1].norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("input {name} is not normalized (norm² = {n})")));
        }
    }
    let r = FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, 1.0);
    // Port transfer coefficients [T̄, Ā] for each input.
    let from_tbar = [i * r, Complex64::new(r, 0.0)];
    let from_abar = [Complex64::new(r, 0.0), i * r];

    let mut raw = [[Complex64::new(0.0, 0.0); 4]; 4];
    for p in 0..2 {
        for m in 0..2 {
            for q in 0..2 {
                for n in 0..2 {
                    raw[mode(p, m)][mode(q, n)] = from_tbar[p] * in_tbar[m] * from_abar[q] * in_abar[n];
                }
            }
        }
    }
    let mut symmetric = [[Complex64::new(0.0, 0.0); 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            symmetric[k][l] = (raw[k][l] + raw[l][k]) * 0.5;
        }
    }
    Ok(TwoPhotonOutput { symmetric })
}

fn check_unit(b: &Bundle, name: &str) -> Result<()> {
    let n = b.norm_sqr();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("{name} is not normalized (norm² = {n})")));
    }
    Ok(())
}

/// One-photon-per-port probability for bundles `x` (in `t̄`) and `y` (in `ā`):
/// `(1 − |⟨x|y⟩|²)/2`.
pub fn hom_coincidence(x: &Bundle, y: &Bundle) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    let z = x.inner(y)?;
    Ok(0.5 * (1.0 - z.norm_sqr()))
}

/// The same probability obtained by expanding both photons over an orthonormal
/// pair spanning them and pushing them through [`beamsplitter`].
pub fn hom_coincidence_two_boson(x: &Bundle, y: &Bundle) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    let z = x.inner(y)?;
    let rest = Bundle::combine(Complex64::new(1.0, 0.0), y, -z, x)?;
    let rest_norm = rest.norm();
    let along = if rest_norm > 1e-12 {
        rest.scaled(Complex64::new(1.0 / rest_norm, 0.0)).inner(y)?
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut yv = [z, along];
    // Absorb rounding so the coefficient vector is exactly unit.
    let n = (yv[0].norm_sqr() + yv[1].norm_sqr()).sqrt();
    yv = [yv[0] / n, yv[1] / n];
    let out = beamsplitter([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], yv)?;
    Ok(out.one_each_probability())
}

/// Every intermediate of one four-photon measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPhotonOutcome {
    pub alpha: f64,
    pub beta: f64,
    pub strip_angle: f64,
    pub p1_alpha: f64,
    pub p1_s: f64,
    /// One-photon-per-port probability at the beam splitter.
    pub one_each: f64,
    /// `P_TT̄AĀ(α,β)`.
    pub probability: f64,
}

/// Composes both polarizer projections, the beam splitter and the one-per-port
/// post-selection, with the auxiliary polarizer at `strip_angle`.
pub fn four_photon_pipeline(
    state: &HybridState,
    s: &SchmidtForm,
    alpha: f64,
    beta: f64,
    strip_angle: f64,
) -> Result<FourPhotonOutcome> {
    s.check_matches(state)?;
    four_photon_pipeline_unchecked(state, s, alpha, beta, strip_angle)
}

pub(crate) fn four_photon_pipeline_unchecked(
    state: &HybridState,
    s: &SchmidtForm,
    alpha: f64,
    beta: f64,
    strip_angle: f64,
) -> Result<FourPhotonOutcome> {
    let test = project_unchecked(state, s, alpha, beta)?;
    let aux = project_unchecked(state, s, strip_angle, beta)?;
    let unit = |c: [Complex64; 2]| {
        let n = (c[0].norm_sqr() + c[1].norm_sqr()).sqrt();
        [c[0] / n, c[1] / n]
    };
    let out = beamsplitter(unit([test.c11, test.c12]), unit([aux.c11, aux.c12]))?;
    let one_each = out.one_each_probability();
    let p1_alpha = test.prefactor * test.prefactor;
    let p1_s = aux.prefactor * aux.prefactor;
    Ok(FourPhotonOutcome {
        alpha,
        beta,
        strip_angle,
        p1_alpha,
        p1_s,
        one_each,
        probability: p1_alpha * p1_s * one_each,
    })
}

/// `P_TT̄AĀ(α,β)` from the composed pipeline, stripping at the exact angle.
pub fn four_photon_probability(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> Result<f64> {
    if s.degenerate {
        return Err(Error::degenerate("four-photon protocol needs κ₂ > 0"));
    }
    s.check_matches(state)?;
    let strip = stripping_polarizer_angle(beta, s.kappa1, s.kappa2);
    Ok(four_photon_pipeline_unchecked(state, s, alpha, beta, strip)?.probability)
}

/// `P₁(α) P₁(s) c₁₂² / 2` from the Schmidt coefficients alone.
pub fn four_photon_closed_form(alpha: f64, beta: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    if !(kappa2 > DEGENERATE_KAPPA) {
        return Err(Error::degenerate("four-photon protocol needs κ₂ > 0"));
    }
    let strip = stripping_polarizer_angle(beta, kappa1, kappa2);
    let p1s = singles_probability(strip, kappa1, kappa2);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let amp = -kappa1 * ca * sb + kappa2 * sa * cb;
    // c₁₂² P₁(α) = amp².
    Ok(p1s * amp * amp / 2.0)
}

fn check_p1s(p1_s: f64) -> Result<()> {
    if p1_s > 0.0 && p1_s <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("P₁(s) must lie in (0, 1], got {p1_s}")))
    }
}

/// `P₁₂ = (2/P₁(s)) · N_αβ / N`.
pub fn reconstruct_joint(counts4: u64, total4: u64, p1_s: f64) -> Result<f64> {
    if total4 == 0 {
        return Err(Error::invalid("total four-photon count must be positive"));
    }
    if counts4 > total4 {
        return Err(Error::invalid("four-fold count exceeds the total"));
    }
    reconstruct_joint_from_ratio(counts4 as f64 / total4 as f64, p1_s)
}

/// [`reconstruct_joint`] with the count ratio supplied directly.
pub fn reconstruct_joint_from_ratio(ratio: f64, p1_s: f64) -> Result<f64> {
    check_p1s(p1_s)?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(format!("coincidence ratio must lie in [0, 1], got {ratio}")));
    }
    Ok(2.0 * ratio / p1_s)
}

/// Angles at which a `P₁₂`-style measurement yields `P_ij(α,β)`:
/// the outcome-2 polarizer is the outcome-1 polarizer turned by π/2, and likewise
/// `f₁^β = −f₂^{β+π/2}`.
pub fn measured_angles(i: Outcome, j: Outcome, alpha: f64, beta: f64) -> (f64, f64) {
    let a = match i {
        Outcome::First => alpha,
        Outcome::Second => alpha + FRAC_PI_2,
    };
    let b = match j {
        Outcome::First => beta + FRAC_PI_2,
        Outcome::Second => beta,
    };
    (a, b)
}

/// One reconstructed joint probability with its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub i: u8,
    pub j: u8,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "P4")]
    pub p4: f64,
    #[serde(rename = "P1_alpha")]
    pub p1_alpha: f64,
    #[serde(rename = "P1_s")]
    pub p1_s: f64,
    #[serde(rename = "reconstructed_P")]
    pub reconstructed_p: f64,
}

fn measure_joint(state: &HybridState, s: &SchmidtForm, i: Outcome, j: Outcome, alpha: f64, beta: f64) -> Result<SettingRecord> {
    let (a, b) = measured_angles(i, j, alpha, beta);
    let strip = stripping_polarizer_angle(b, s.kappa1, s.kappa2);
    let out = four_photon_pipeline_unchecked(state, s, a, b, strip)?;
    Ok(SettingRecord {
        i: i.index(),
        j: j.index(),
        alpha: a,
        beta: b,
        p4: out.probability,
        p1_alpha: out.p1_alpha,
        p1_s: out.p1_s,
        reconstructed_p: reconstruct_joint_from_ratio(out.probability, out.p1_s)?,
    })
}

fn checked(state: &HybridState, s: &SchmidtForm) -> Result<()> {
    if s.degenerate {
        return Err(Error::degenerate("four-photon protocol needs κ₂ > 0 (product state)"));
    }
    s.check_matches(state)
}

/// Reconstructed joint probability `P_ij(α,β)` using exact coincidence ratios.
pub fn reconstructed_joint(state: &HybridState, s: &SchmidtForm, i: Outcome, j: Outcome, alpha: f64, beta: f64) -> Result<f64> {
    checked(state, s)?;
    Ok(measure_joint(state, s, i, j, alpha, beta)?.reconstructed_p)
}

/// `C(α,β)` assembled from four reconstructed joint probabilities.
pub fn full_correlation(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> Result<f64> {
    checked(state, s)?;
    let mut c = 0.0;
    for i in Outcome::ALL {
        for j in Outcome::ALL {
            c += i.sign() * j.sign() * measure_joint(state, s, i, j, alpha, beta)?.reconstructed_p;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrippingPair {
    pub s: f64,
    pub s_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub settings: AngleSettings,
    pub stripping: StrippingPair,
    pub per_setting: Vec<SettingRecord>,
    pub correlations: [f64; 4],
    pub bell_value: f64,
    pub kappa_product: f64,
    /// `√2(2κ₁κ₂+1)` for comparison.
    pub canonical_bell: f64,
}

/// Runs the full protocol with exact probabilities in place of count ratios.
pub fn run_protocol(state: &HybridState, s: &SchmidtForm, settings: &AngleSettings) -> Result<ProtocolReport> {
    checked(state, s)?;
    let mut per_setting = Vec::with_capacity(16);
    let mut correlations = [0.0; 4];
    for (slot, (alpha, beta)) in settings.pairs().into_iter().enumerate() {
        for i in Outcome::ALL {
            for j in Outcome::ALL {
                let rec = measure_joint(state, s, i, j, alpha, beta)?;
                correlations[slot] += i.sign() * j.sign() * rec.reconstructed_p;
                per_setting.push(rec);
            }
        }
    }
    let bell_value = correlations.iter().zip(CHSH_SIGNS).map(|(c, s)| c * s).sum();
    Ok(ProtocolReport {
        settings: *settings,
        stripping: StrippingPair {
            s: stripping_polarizer_angle(settings.beta, s.kappa1, s.kappa2),
            s_prime: stripping_polarizer_angle(settings.beta_prime, s.kappa1, s.kappa2),
        },
        per_setting,
        correlations,
        bell_value,
        kappa_product: s.kappa_product(),
        canonical_bell: canonical_bell(s.kappa1, s.kappa2),
    })
}
