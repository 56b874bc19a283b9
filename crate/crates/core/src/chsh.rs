//! CHSH analysis in rotated Schmidt bases.
//!
//! Both parties are measured in Schmidt bases rotated by real angles, so every
//! correlation depends only on `κ₁κ₂` and the doubled angles:
//! `C(α,β) = 2κ₁κ₂ sin2α sin2β + cos2α cos2β`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::Bundle;
use crate::error::{Error, Result};
use crate::hybrid::{HybridState, Polarization, SchmidtForm};

/// Which vector of a rotated basis pair, `|·₁^α⟩` or `|·₂^α⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    First,
    Second,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::First, Outcome::Second];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Outcome::First),
            2 => Ok(Outcome::Second),
            _ => Err(Error::invalid(format!("outcome index must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Outcome::First => 1,
            Outcome::Second => 2,
        }
    }

    /// `+1` for the first outcome, `-1` for the second.
    pub fn sign(self) -> f64 {
        match self {
            Outcome::First => 1.0,
            Outcome::Second => -1.0,
        }
    }
}

/// The four CHSH measurement angles, in radians, reduced modulo π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSettings {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

fn reduce(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    // rem_euclid can round up to exactly π.
    if r >= PI { 0.0 } else { r }
}

impl AngleSettings {
    pub fn new(alpha: f64, alpha_prime: f64, beta: f64, beta_prime: f64) -> Result<Self> {
        if ![alpha, alpha_prime, beta, beta_prime].iter().all(|a| a.is_finite()) {
            return Err(Error::invalid("angle settings must be finite"));
        }
        Ok(AngleSettings {
            alpha: reduce(alpha),
            alpha_prime: reduce(alpha_prime),
            beta: reduce(beta),
            beta_prime: reduce(beta_prime),
        })
    }

    /// The four `(α, β)` pairs in CHSH order: `(α,β), (α,β′), (α′,β), (α′,β′)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.alpha, self.beta),
            (self.alpha, self.beta_prime),
            (self.alpha_prime, self.beta),
            (self.alpha_prime, self.beta_prime),
        ]
    }
}

/// Signs of the four correlations in the Bell combination.
pub const CHSH_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

/// `α = 0, α′ = π/4, β = π/8, β′ = 3π/8`.
pub fn canonical_settings() -> AngleSettings {
    AngleSettings {
        alpha: 0.0,
        alpha_prime: FRAC_PI_4,
        beta: FRAC_PI_8,
        beta_prime: FRAC_PI_8 + FRAC_PI_4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub correlations: [f64; 4],
    pub bell_value: f64,
    pub violation: bool,
    pub kappa_product: f64,
    /// `bell_value − 2`.
    pub margin: f64,
    pub settings: AngleSettings,
}

impl BellReport {
    pub fn from_correlations(correlations: [f64; 4], kappa_product: f64, settings: AngleSettings) -> Self {
        let bell_value: f64 = correlations.iter().zip(CHSH_SIGNS).map(|(c, s)| s * c).sum();
        BellReport {
            correlations,
            bell_value,
            violation: bell_value > 2.0,
            kappa_product,
            margin: bell_value - 2.0,
            settings,
        }
    }
}

/// `u₁^α = cosα u₁ + sinα u₂`, `u₂^α = −sinα u₁ + cosα u₂`.
pub fn rotated_u(s: &SchmidtForm, alpha: f64, which: Outcome) -> Polarization {
    let (sa, ca) = alpha.sin_cos();
    let (a, b) = match which {
        Outcome::First => (ca, sa),
        Outcome::Second => (-sa, ca),
    };
    [s.u1[0] * a + s.u2[0] * b, s.u1[1] * a + s.u2[1] * b]
}

/// The same rotation applied to the continuum Schmidt bundles.
pub fn rotated_f(s: &SchmidtForm, beta: f64, which: Outcome) -> Bundle {
    let (sb, cb) = beta.sin_cos();
    let (a, b) = match which {
        Outcome::First => (cb, sb),
        Outcome::Second => (-sb, cb),
    };
    Bundle::combine(Complex64::new(a, 0.0), &s.f1, Complex64::new(b, 0.0), &s.f2)
        .expect("Schmidt bundles share a grid")
}

fn joint_unchecked(state: &HybridState, s: &SchmidtForm, i: Outcome, j: Outcome, alpha: f64, beta: f64) -> f64 {
    let remainder = state.project_polarization(&rotated_u(s, alpha, i));
    rotated_f(s, beta, j).inner_unchecked(&remainder).norm_sqr()
}

/// `P_ij(α,β) = |⟨u_i^α|⟨f_j^β|ψ⟩|²`, evaluated by projecting on the grid.
pub fn joint_probability(
    state: &HybridState,
    s: &SchmidtForm,
    i: Outcome,
    j: Outcome,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    s.check_matches(state)?;
    Ok(joint_unchecked(state, s, i, j, alpha, beta))
}

fn correlation_unchecked(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> f64 {
    let mut c = 0.0;
    for i in Outcome::ALL {
        let remainder = state.project_polarization(&rotated_u(s, alpha, i));
        for j in Outcome::ALL {
            let p = rotated_f(s, beta, j).inner_unchecked(&remainder).norm_sqr();
            c += i.sign() * j.sign() * p;
        }
    }
    c.clamp(-1.0, 1.0)
}

/// `C(α,β) = P₁₁ − P₁₂ − P₂₁ + P₂₂`.
pub fn correlation(state: &HybridState, s: &SchmidtForm, alpha: f64, beta: f64) -> Result<f64> {
    s.check_matches(state)?;
    Ok(correlation_unchecked(state, s, alpha, beta))
}

/// Bell value from four directly computed correlations.
pub fn bell_value(state: &HybridState, s: &SchmidtForm, settings: &AngleSettings) -> Result<BellReport> {
    s.check_matches(state)?;
    let pairs = settings.pairs();
    let correlations = pairs.map(|(a, b)| correlation_unchecked(state, s, a, b));
    Ok(BellReport::from_correlations(correlations, s.kappa_product(), *settings))
}

pub fn closed_form_correlation(kappa1: f64, kappa2: f64, alpha: f64, beta: f64) -> f64 {
    let (s2a, c2a) = (2.0 * alpha).sin_cos();
    let (s2b, c2b) = (2.0 * beta).sin_cos();
    2.0 * kappa1 * kappa2 * s2a * s2b + c2a * c2b
}

/// Closed-form Bell value in terms of `κ₁κ₂` and the doubled angles.
pub fn closed_form_bell(kappa1: f64, kappa2: f64, st: &AngleSettings) -> f64 {
    let k = 2.0 * kappa1 * kappa2;
    let (sa, ca) = (2.0 * st.alpha).sin_cos();
    let (sap, cap) = (2.0 * st.alpha_prime).sin_cos();
    let (sb, cb) = (2.0 * st.beta).sin_cos();
    let (sbp, cbp) = (2.0 * st.beta_prime).sin_cos();
    k * (sa * (sb - sbp) + sap * (sb + sbp)) + ca * (cb - cbp) + cap * (cb + cbp)
}

/// `√2 (2κ₁κ₂ + 1)`, the value at the canonical settings.
pub fn canonical_bell(kappa1: f64, kappa2: f64) -> f64 {
    std::f64::consts::SQRT_2 * (2.0 * kappa1 * kappa2 + 1.0)
}

const GRID_STEPS: usize = 36;
const REFINE_TOL: f64 = 1e-7;

fn check_kappas(kappa1: f64, kappa2: f64) -> Result<()> {
    let ok = kappa1.is_finite()
        && kappa2.is_finite()
        && kappa2 >= 0.0
        && kappa1 >= kappa2
        && (kappa1 * kappa1 + kappa2 * kappa2 - 1.0).abs() <= 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "Schmidt coefficients must satisfy κ₁ ≥ κ₂ ≥ 0 and κ₁² + κ₂² = 1, got ({kappa1}, {kappa2})"
        )))
    }
}

/// Maximizes the closed-form Bell value over all four angles.
///
/// A coarse π/36 grid over `[0, π)⁴` seeds a compass search whose step is halved
/// until it drops below 1e-7. The grid stage runs in parallel over blocks of `α`;
/// blocks are merged in order, keeping the lexicographically first maximum.
pub fn optimize_settings(kappa1: f64, kappa2: f64) -> Result<(AngleSettings, f64)> {
    check_kappas(kappa1, kappa2)?;
    let k = 2.0 * kappa1 * kappa2;
    let step = PI / GRID_STEPS as f64;
    let trig: Vec<(f64, f64)> = (0..GRID_STEPS).map(|n| (2.0 * step * n as f64).sin_cos()).collect();

    let eval = |a: usize, ap: usize, b: usize, bp: usize| {
        let (sa, ca) = trig[a];
        let (sap, cap) = trig[ap];
        let (sb, cb) = trig[b];
        let (sbp, cbp) = trig[bp];
        k * (sa * (sb - sbp) + sap * (sb + sbp)) + ca * (cb - cbp) + cap * (cb + cbp)
    };

    let block_best: Vec<(f64, [usize; 4])> = (0..GRID_STEPS)
        .into_par_iter()
        .map(|a| {
            let mut best = (f64::NEG_INFINITY, [a, 0, 0, 0]);
            for ap in 0..GRID_STEPS {
                for b in 0..GRID_STEPS {
                    for bp in 0..GRID_STEPS {
                        let v = eval(a, ap, b, bp);
                        if v > best.0 {
                            best = (v, [a, ap, b, bp]);
                        }
                    }
                }
            }
            best
        })
        .collect();
    let (_, idx) = block_best
        .into_iter()
        .fold((f64::NEG_INFINITY, [0; 4]), |acc, cand| if cand.0 > acc.0 { cand } else { acc });

    let objective = |x: &[f64; 4]| {
        closed_form_bell(
            kappa1,
            kappa2,
            &AngleSettings { alpha: x[0], alpha_prime: x[1], beta: x[2], beta_prime: x[3] },
        )
    };
    let mut x = idx.map(|n| n as f64 * step);
    let mut best = objective(&x);
    let mut delta = 0.5 * step;
    while delta >= REFINE_TOL {
        let mut improved = false;
        for coord in 0..4 {
            for dir in [1.0, -1.0] {
                let mut trial = x;
                trial[coord] += dir * delta;
                let v = objective(&trial);
                if v > best {
                    best = v;
                    x = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    let settings = AngleSettings::new(x[0], x[1], x[2], x[3])?;
    Ok((settings, closed_form_bell(kappa1, kappa2, &settings)))
}
