//! Polarization–continuum two-photon states and their Schmidt form.
//!
//! The state is `cosθ |H⟩⊗h + sinθ |V⟩⊗v` with unit bundles `h`, `v`. Because the
//! polarization party is two-dimensional, the Schmidt sum has at most two terms and
//! follows from the 2×2 reduced density matrix of the polarization photon.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuum::{sample_function, Bundle, Family, Grid};
use crate::error::{Error, Result};

/// Normalization tolerance for state constituents.
pub const NORM_TOL: f64 = 1e-10;

/// Below this the second Schmidt coefficient is treated as zero.
pub const DEGENERATE_KAPPA: f64 = 1e-12;

/// Complex 2-vector in the `{H, V}` basis.
pub type Polarization = [Complex64; 2];

/// 2×2 complex matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct HybridState {
    theta: f64,
    h: Bundle,
    v: Bundle,
}

impl HybridState {
    pub fn new(theta: f64, h: Bundle, v: Bundle) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("mixing angle must be finite"));
        }
        if !h.shares_grid(&v) {
            return Err(Error::invalid("h and v must share one grid"));
        }
        for (name, b) in [("h", &h), ("v", &v)] {
            let n = b.norm_sqr();
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::invalid(format!("{name} is not unit-normalized (norm² = {n})")));
            }
        }
        let state = HybridState { theta, h, v };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::numerical(format!("state norm² {norm} differs from 1")));
        }
        Ok(state)
    }

    /// State with a prescribed overlap `z = ⟨h|v⟩`, built from a Gaussian and its
    /// first Hermite-Gaussian partner centred on the grid.
    pub fn with_overlap(theta: f64, z: Complex64, grid: &Arc<Grid>) -> Result<Self> {
        if z.norm() > 1.0 + 1e-15 {
            return Err(Error::invalid(format!("|z| = {} exceeds 1", z.norm())));
        }
        let (lo, hi) = grid.range();
        let mu = 0.5 * (lo + hi);
        let sigma = (hi - lo) / 16.0;
        let g0 = sample_function(&Family::Gaussian { mu, sigma, chirp: 0.0 }, grid)?;
        let g1 = sample_function(&Family::HermiteGaussian { order: 1, mu, sigma }, grid)?;
        let perp = (1.0 - z.norm_sqr()).max(0.0).sqrt();
        let v = Bundle::combine(z, &g0, Complex64::new(perp, 0.0), &g1)?.normalized()?;
        HybridState::new(theta, g0, v)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn h(&self) -> &Bundle {
        &self.h
    }

    pub fn v(&self) -> &Bundle {
        &self.v
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.h.grid()
    }

    /// The continuum amplitudes attached to `|H⟩` and `|V⟩`: `(cosθ·h, sinθ·v)`.
    pub fn components(&self) -> [Bundle; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.h.scaled(Complex64::new(c, 0.0)), self.v.scaled(Complex64::new(s, 0.0))]
    }

    /// `⟨ψ|ψ⟩` evaluated on the grid.
    pub fn norm_sqr(&self) -> f64 {
        let (s, c) = self.theta.sin_cos();
        c * c * self.h.norm_sqr() + s * s * self.v.norm_sqr()
    }

    /// Continuum amplitude left after projecting the polarization photon onto `u`:
    /// `⟨u|ψ⟩ = u_H*·cosθ·h + u_V*·sinθ·v`.
    pub fn project_polarization(&self, u: &Polarization) -> Bundle {
        let (s, c) = self.theta.sin_cos();
        // Grids are shared by construction.
        Bundle::combine(u[0].conj() * c, &self.h, u[1].conj() * s, &self.v)
            .expect("h and v share a grid")
    }

    pub fn overlap_z(&self) -> Complex64 {
        self.h.inner_unchecked(&self.v)
    }

    pub fn reduced_density_a(&self) -> Matrix2 {
        let (s, c) = self.theta.sin_cos();
        let z = self.overlap_z();
        let off = z.conj() * (c * s);
        [
            [Complex64::new(c * c, 0.0), off],
            [off.conj(), Complex64::new(s * s, 0.0)],
        ]
    }

    pub fn schmidt_decompose(&self) -> SchmidtForm {
        schmidt_decompose(self)
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            theta: self.theta,
            grid: (**self.grid()).clone(),
            h: self.h.amplitudes().to_vec(),
            v: self.v.amplitudes().to_vec(),
        }
    }
}

/// Free-function form of [`HybridState::overlap_z`].
pub fn overlap_z(state: &HybridState) -> Complex64 {
    state.overlap_z()
}

/// Free-function form of [`HybridState::reduced_density_a`].
pub fn reduced_density_a(state: &HybridState) -> Matrix2 {
    state.reduced_density_a()
}

/// Serializable snapshot of a [`HybridState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub theta: f64,
    pub grid: Grid,
    pub h: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl StateRecord {
    pub fn into_state(self) -> Result<HybridState> {
        let grid = Arc::new(Grid::from_parts(
            self.grid.kind(),
            self.grid.points().to_vec(),
            self.grid.weights().to_vec(),
        )?);
        let h = Bundle::new(Arc::clone(&grid), self.h)?;
        let v = Bundle::new(grid, self.v)?;
        HybridState::new(self.theta, h, v)
    }
}

/// `κ₁|u₁⟩|f₁⟩ + κ₂|u₂⟩|f₂⟩`.
#[derive(Debug, Clone)]
pub struct SchmidtForm {
    pub kappa1: f64,
    pub kappa2: f64,
    pub u1: Polarization,
    pub u2: Polarization,
    pub f1: Bundle,
    pub f2: Bundle,
    /// Set when `κ₂` vanishes and `f₂` is a constructed stand-in.
    pub degenerate: bool,
    /// The polarization Schmidt vectors are linear polarizations (real `z`).
    pub linear_polarizer_realizable: bool,
}

impl SchmidtForm {
    pub fn kappa_product(&self) -> f64 {
        self.kappa1 * self.kappa2
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f1.grid()
    }

    /// `‖ψ − κ₁u₁⊗f₁ − κ₂u₂⊗f₂‖` over the joint polarization × grid space.
    pub fn reconstruction_error(&self, state: &HybridState) -> Result<f64> {
        let comps = state.components();
        let mut total = 0.0;
        for (p, comp) in comps.iter().enumerate() {
            let model = Bundle::combine(
                self.u1[p] * self.kappa1,
                &self.f1,
                self.u2[p] * self.kappa2,
                &self.f2,
            )?;
            total += comp.distance(&model)?.powi(2);
        }
        Ok(total.sqrt())
    }

    /// Rejects a decomposition that was not computed from `state`.
    pub fn check_matches(&self, state: &HybridState) -> Result<()> {
        if !self.f1.shares_grid(state.h()) {
            return Err(Error::invalid("Schmidt form and state live on different grids"));
        }
        let rho = state.reduced_density_a();
        let expect = quad_form(&rho, &self.u1);
        if (expect - self.kappa1 * self.kappa1).abs() > 1e-8 {
            return Err(Error::invalid("Schmidt form does not belong to this state"));
        }
        Ok(())
    }

    /// Checks every structural invariant of the decomposition against `state`.
    pub fn validate(&self, state: &HybridState) -> Result<()> {
        let k = self.kappa1 * self.kappa1 + self.kappa2 * self.kappa2;
        if !(self.kappa1 >= self.kappa2 && self.kappa2 >= 0.0) || (k - 1.0).abs() > 1e-10 {
            return Err(Error::numerical(format!(
                "Schmidt coefficients ({}, {}) out of order or unnormalized",
                self.kappa1, self.kappa2
            )));
        }
        let uu = dot(&self.u1, &self.u2).norm();
        let u11 = dot(&self.u1, &self.u1).re - 1.0;
        let u22 = dot(&self.u2, &self.u2).re - 1.0;
        let ff = self.f1.inner(&self.f2)?.norm();
        let f11 = self.f1.norm_sqr() - 1.0;
        let f22 = self.f2.norm_sqr() - 1.0;
        let worst = [uu, u11.abs(), u22.abs(), ff, f11.abs(), f22.abs()]
            .into_iter()
            .fold(0.0, f64::max);
        if worst > 1e-9 {
            return Err(Error::numerical(format!("Schmidt vectors not orthonormal (off by {worst})")));
        }
        let err = self.reconstruction_error(state)?;
        if err > 1e-9 {
            return Err(Error::numerical(format!("Schmidt reconstruction error {err}")));
        }
        Ok(())
    }
}

fn dot(a: &Polarization, b: &Polarization) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn quad_form(m: &Matrix2, u: &Polarization) -> f64 {
    let mu = [m[0][0] * u[0] + m[0][1] * u[1], m[1][0] * u[0] + m[1][1] * u[1]];
    dot(u, &mu).re
}

/// Rotates `u` so its first component with magnitude above 1e-12 is real positive.
fn fix_phase(u: Polarization) -> Polarization {
    let lead = if u[0].norm() > 1e-12 { u[0] } else { u[1] };
    let phase = lead.conj() / lead.norm();
    [u[0] * phase, u[1] * phase]
}

fn unit(u: Polarization) -> Polarization {
    let n = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
    [u[0] / n, u[1] / n]
}

/// Closed-form eigen-decomposition of a 2×2 Hermitian matrix with trace 1.
///
/// Returns `(λ₊, λ₋, u₊, u₋)` with `λ₊ ≥ λ₋`.
fn hermitian_eigen(m: &Matrix2) -> (f64, f64, Polarization, Polarization) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1];
    let half_gap = ((0.5 * (a - d)).powi(2) + b.norm_sqr()).sqrt();
    let lam_plus = 0.5 * (a + d) + half_gap;
    // det / λ₊ avoids cancellation for the small eigenvalue.
    let det = (a * d - b.norm_sqr()).max(0.0);
    let lam_minus = if lam_plus > 0.0 { det / lam_plus } else { 0.0 };

    let cand1 = [b, Complex64::new(lam_plus - a, 0.0)];
    let cand2 = [Complex64::new(lam_plus - d, 0.0), b.conj()];
    let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
    let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
    let best = if n1 >= n2 { (cand1, n1) } else { (cand2, n2) };
    let u_plus = if best.1 < 1e-28 { [ONE, ZERO] } else { fix_phase(unit(best.0)) };
    let u_minus = fix_phase([-u_plus[1].conj(), u_plus[0].conj()]);
    (lam_plus, lam_minus, u_plus, u_minus)
}

/// Unit bundle orthogonal to `f1`, built from low-order Hermite-Gaussians.
fn orthogonal_fallback(f1: &Bundle) -> Bundle {
    let grid = f1.grid();
    let (lo, hi) = grid.range();
    let mu = 0.5 * (lo + hi);
    let sigma = (hi - lo) / 16.0;
    for order in 1..8 {
        let g = sample_function(&Family::HermiteGaussian { order, mu, sigma }, grid)
            .expect("fallback family is valid on any grid");
        let overlap = f1.inner_unchecked(&g);
        let rest = Bundle::combine(Complex64::new(1.0, 0.0), &g, -overlap, f1).expect("same grid");
        if rest.norm() > 1e-3 {
            return rest.normalized().expect("non-zero norm");
        }
    }
    unreachable!("a unit bundle overlaps at most one of eight orthonormal functions fully")
}

pub fn schmidt_decompose(state: &HybridState) -> SchmidtForm {
    let rho = state.reduced_density_a();
    let (lam1, lam2, u1, u2) = hermitian_eigen(&rho);
    let kappa1 = lam1.max(0.0).sqrt();
    let kappa2 = lam2.max(0.0).sqrt();

    let p1 = state.project_polarization(&u1);
    let f1 = p1.normalized().expect("dominant Schmidt term has weight >= 1/2");

    let degenerate = kappa2 <= DEGENERATE_KAPPA;
    let f2 = if degenerate {
        orthogonal_fallback(&f1)
    } else {
        let p2 = state.project_polarization(&u2);
        let leak = f1.inner_unchecked(&p2);
        Bundle::combine(Complex64::new(1.0, 0.0), &p2, -leak, &f1)
            .expect("same grid")
            .normalized()
            .unwrap_or_else(|_| orthogonal_fallback(&f1))
    };

    SchmidtForm {
        kappa1,
        kappa2,
        u1,
        u2,
        f1,
        f2,
        degenerate,
        linear_polarizer_realizable: state.overlap_z().im.abs() <= 1e-9,
    }
}
