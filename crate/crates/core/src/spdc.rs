//! Heralded polarization–spectrum states from a two-crystal down-conversion source.
//!
//! The type I crystal contributes `Φ(ω₁,ω₂)` to the `|H⟩` arm and the type II
//! crystal `Ψ(ω₁,ω₂)` to the `|V⟩` arm. Each is a Gaussian pump envelope in
//! `ω₁+ω₂` times Gaussian phase matching in each frequency. Passing photon 1
//! through a spectral filter leaves photon 2 in `cosθ|H⟩h + sinθ|V⟩v`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{make_grid, Bundle, Grid, GridKind};
use crate::error::{Error, Result};
use crate::hybrid::HybridState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub center: f64,
    pub width: f64,
}

/// Phase matching of one crystal. `weight` scales the amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub center1: f64,
    pub center2: f64,
    pub width1: f64,
    pub width2: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    /// `exp(−Δ²/(2b²))`.
    Gaussian,
    /// Unit response for `|Δ| ≤ b/2`.
    Rectangular,
}

/// Filter as written in a config; a missing bandwidth means 5% of the ω₁ span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub center: f64,
    pub shape: FilterShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridsConfig {
    pub n1: usize,
    pub range1: (f64, f64),
    pub n2: usize,
    pub range2: (f64, f64),
    #[serde(default = "default_kind")]
    pub kind: GridKind,
}

fn default_kind() -> GridKind {
    GridKind::UniformTrapezoid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcConfig {
    pub pump: PumpSpec,
    pub crystal1: CrystalSpec,
    pub crystal2: CrystalSpec,
    pub filter: FilterConfig,
    pub grids: GridsConfig,
}

const DEFAULT_CONFIG: &str = include_str!("../configs/spdc_default.json");

impl SpdcConfig {
    /// The shipped symmetric-crystal configuration.
    pub fn default_config() -> SpdcConfig {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled SPDC config parses")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<SpdcConfig> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn filter_spec(&self) -> Result<FilterSpec> {
        let (lo, hi) = self.grids.range1;
        let bandwidth = self.filter.bandwidth.unwrap_or(0.05 * (hi - lo));
        FilterSpec::new(self.filter.center, self.filter.shape, bandwidth)
    }
}

/// Spectral response `f(ω₁ − ω₀)` of the heralding filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub omega0: f64,
    pub shape: FilterShape,
    pub bandwidth: f64,
}

impl FilterSpec {
    pub fn new(omega0: f64, shape: FilterShape, bandwidth: f64) -> Result<Self> {
        if !omega0.is_finite() {
            return Err(Error::invalid("filter center must be finite"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("filter bandwidth must be positive, got {bandwidth}")));
        }
        Ok(FilterSpec { omega0, shape, bandwidth })
    }

    /// The narrowest filter a grid can resolve: bandwidth equal to its widest node gap.
    pub fn narrowest(grid: &Grid, omega0: f64, shape: FilterShape) -> Result<Self> {
        FilterSpec::new(omega0, shape, max_gap(grid))
    }

    pub fn response(&self, omega1: f64) -> f64 {
        let d = omega1 - self.omega0;
        match self.shape {
            FilterShape::Gaussian => (-d * d / (2.0 * self.bandwidth * self.bandwidth)).exp(),
            FilterShape::Rectangular => {
                if d.abs() <= 0.5 * self.bandwidth {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn max_gap(grid: &Grid) -> f64 {
    grid.points().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Joint spectral amplitudes sampled on `grid1 × grid2`, row-major in ω₁.
#[derive(Debug, Clone, PartialEq)]
pub struct BiAmplitude {
    grid1: Arc<Grid>,
    grid2: Arc<Grid>,
    phi: Vec<Complex64>,
    psi: Vec<Complex64>,
}

impl BiAmplitude {
    pub fn new(grid1: Arc<Grid>, grid2: Arc<Grid>, phi: Vec<Complex64>, psi: Vec<Complex64>) -> Result<Self> {
        let n = grid1.len() * grid2.len();
        if phi.len() != n || psi.len() != n {
            return Err(Error::invalid(format!("amplitude matrices must hold {n} entries")));
        }
        Ok(BiAmplitude { grid1, grid2, phi, psi })
    }

    pub fn grid1(&self) -> &Arc<Grid> {
        &self.grid1
    }

    pub fn grid2(&self) -> &Arc<Grid> {
        &self.grid2
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn phi_at(&self, i: usize, j: usize) -> Complex64 {
        self.phi[i * self.grid2.len() + j]
    }

    pub fn psi_at(&self, i: usize, j: usize) -> Complex64 {
        self.psi[i * self.grid2.len() + j]
    }

    /// `Σ w₁w₂ (|Φ|² + |Ψ|²)`.
    pub fn norm_sqr(&self) -> f64 {
        let n2 = self.grid2.len();
        let w1 = self.grid1.weights();
        let w2 = self.grid2.weights();
        (0..self.phi.len())
            .map(|k| w1[k / n2] * w2[k % n2] * (self.phi[k].norm_sqr() + self.psi[k].norm_sqr()))
            .sum()
    }

    /// Elementwise `a·self + b·other`; grids must be shared.
    pub fn combine(&self, a: Complex64, other: &BiAmplitude, b: Complex64) -> Result<BiAmplitude> {
        if !(self.grid1.same_as(&other.grid1) && self.grid2.same_as(&other.grid2)) {
            return Err(Error::invalid("amplitudes live on different grids"));
        }
        let mix = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Ok(BiAmplitude {
            grid1: self.grid1.clone(),
            grid2: self.grid2.clone(),
            phi: mix(&self.phi, &other.phi),
            psi: mix(&self.psi, &other.psi),
        })
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_crystal(name: &str, c: &CrystalSpec) -> Result<()> {
    check_positive(&format!("{name}.width1"), c.width1)?;
    check_positive(&format!("{name}.width2"), c.width2)?;
    if !(c.center1.is_finite() && c.center2.is_finite()) {
        return Err(Error::invalid(format!("{name} centers must be finite")));
    }
    if !(c.weight >= 0.0 && c.weight.is_finite()) {
        return Err(Error::invalid(format!("{name}.weight must be non-negative")));
    }
    Ok(())
}

/// Samples and jointly normalizes `Φ` and `Ψ` for the configured source.
pub fn generate_joint_amplitudes(cfg: &SpdcConfig) -> Result<BiAmplitude> {
    check_positive("pump.width", cfg.pump.width)?;
    if !cfg.pump.center.is_finite() {
        return Err(Error::invalid("pump.center must be finite"));
    }
    check_crystal("crystal1", &cfg.crystal1)?;
    check_crystal("crystal2", &cfg.crystal2)?;
    let g = &cfg.grids;
    let grid1 = make_grid(g.kind, g.n1, g.range1)?;
    let grid2 = make_grid(g.kind, g.n2, g.range2)?;

    let pump = cfg.pump;
    let sample = |c: &CrystalSpec| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(grid1.len() * grid2.len());
        for &w1 in grid1.points() {
            for &w2 in grid2.points() {
                let d = w1 + w2 - pump.center;
                let e1 = w1 - c.center1;
                let e2 = w2 - c.center2;
                let arg = d * d / (4.0 * pump.width * pump.width)
                    + e1 * e1 / (4.0 * c.width1 * c.width1)
                    + e2 * e2 / (4.0 * c.width2 * c.width2);
                out.push(Complex64::new(c.weight * (-arg).exp(), 0.0));
            }
        }
        out
    };
    let mut amp = BiAmplitude::new(grid1.clone(), grid2.clone(), sample(&cfg.crystal1), sample(&cfg.crystal2))?;
    let n = amp.norm_sqr();
    if !(n > 1e-300) {
        return Err(Error::invalid("source amplitudes vanish on the grid"));
    }
    let scale = n.sqrt().recip();
    for x in amp.phi.iter_mut().chain(amp.psi.iter_mut()) {
        *x *= scale;
    }
    Ok(amp)
}

/// Photon-2 amplitudes heralded by photon 1 passing the filter.
#[derive(Debug, Clone)]
pub struct FilteredPair {
    /// `Φ_ω₀(ω₂) = ∫dω₁ f*(ω₁−ω₀) Φ(ω₁,ω₂)`, unnormalized.
    pub phi: Bundle,
    /// `Ψ_ω₀(ω₂)`, unnormalized.
    pub psi: Bundle,
    /// Probability that photon 1 is transmitted: `Σ w₁w₂ |f|² (|Φ|² + |Ψ|²)`.
    pub heralding_probability: f64,
}

/// Projects photon 1 onto the filter response.
pub fn apply_filter(amp: &BiAmplitude, filt: &FilterSpec) -> Result<FilteredPair> {
    let (lo, hi) = amp.grid1.range();
    if !(filt.omega0 >= lo && filt.omega0 <= hi) {
        return Err(Error::invalid(format!("filter center {} lies outside [{lo}, {hi}]", filt.omega0)));
    }
    let n2 = amp.grid2.len();
    let w1 = amp.grid1.weights();
    let w2 = amp.grid2.weights();
    let resp: Vec<f64> = amp.grid1.points().iter().map(|&w| filt.response(w)).collect();

    // One ω₂ column per task; each sum runs over ω₁ in a fixed order.
    let cols: Vec<(Complex64, Complex64, f64)> = (0..n2)
        .into_par_iter()
        .map(|j| {
            let mut p = Complex64::new(0.0, 0.0);
            let mut q = Complex64::new(0.0, 0.0);
            let mut pass = 0.0;
            for (i, (&f, &w)) in resp.iter().zip(w1).enumerate() {
                let (a, b) = (amp.phi_at(i, j), amp.psi_at(i, j));
                p += a * (w * f);
                q += b * (w * f);
                pass += w * f * f * (a.norm_sqr() + b.norm_sqr());
            }
            (p, q, pass * w2[j])
        })
        .collect();

    let phi = Bundle::new(amp.grid2.clone(), cols.iter().map(|c| c.0).collect())?;
    let psi = Bundle::new(amp.grid2.clone(), cols.iter().map(|c| c.1).collect())?;
    let heralding_probability = cols.iter().map(|c| c.2).sum();
    Ok(FilteredPair { phi, psi, heralding_probability })
}

/// Reads the heralded amplitudes as `cosθ·h = Φ_ω₀`, `sinθ·v = Ψ_ω₀` up to a
/// common normalization. A vanishing arm borrows the other arm's bundle.
pub fn to_hybrid_state(phi: &Bundle, psi: &Bundle) -> Result<HybridState> {
    if !phi.shares_grid(psi) {
        return Err(Error::invalid("Φ_ω₀ and Ψ_ω₀ must share one grid"));
    }
    let (np, nq) = (phi.norm(), psi.norm());
    let tiny = 1e-150;
    if np <= tiny && nq <= tiny {
        return Err(Error::degenerate("nothing passes the filter (both heralded amplitudes vanish)"));
    }
    let theta = nq.atan2(np);
    let h = if np > tiny { phi.normalized()? } else { psi.normalized()? };
    let v = if nq > tiny { psi.normalized()? } else { h.clone() };
    HybridState::new(theta, h, v)
}

/// Output of the full source pipeline.
#[derive(Debug, Clone)]
pub struct SpdcOutput {
    pub state: HybridState,
    pub heralding_probability: f64,
}

/// Generate, filter and reduce in one go.
pub fn run_pipeline(cfg: &SpdcConfig) -> Result<SpdcOutput> {
    let amp = generate_joint_amplitudes(cfg)?;
    let filtered = apply_filter(&amp, &cfg.filter_spec()?)?;
    let state = to_hybrid_state(&filtered.phi, &filtered.psi)?;
    Ok(SpdcOutput { state, heralding_probability: filtered.heralding_probability })
}
