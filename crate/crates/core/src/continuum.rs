//! Discretized continuum space.
//!
//! A [`Grid`] holds quadrature nodes and weights over a one-dimensional continuum
//! label `q`; a [`Bundle`] is a complex amplitude function sampled on those nodes.
//! Inner products are quadrature sums `Σ_k w_k a_k* b_k`, so every quantity built
//! from bundles only ever sees the grid through its weights.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance when matching tabulated nodes against grid nodes.
pub const NODE_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    UniformTrapezoid,
    GaussLegendre,
}

/// Quadrature nodes and weights over a closed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    kind: GridKind,
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds an `n`-node grid of the requested kind over `range`.
pub fn make_grid(kind: GridKind, n: usize, range: (f64, f64)) -> Result<Arc<Grid>> {
    Grid::new(kind, n, range).map(Arc::new)
}

impl Grid {
    pub fn new(kind: GridKind, n: usize, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = range;
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::invalid(format!("degenerate grid range [{lo}, {hi}]")));
        }
        let (points, weights) = match kind {
            GridKind::UniformTrapezoid => trapezoid_rule(n, lo, hi),
            GridKind::GaussLegendre => gauss_legendre_rule(n, lo, hi),
        };
        Ok(Grid { kind, points, weights })
    }

    /// Rebuilds a grid from stored nodes and weights, checking the invariants.
    pub fn from_parts(kind: GridKind, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != weights.len() {
            return Err(Error::invalid("grid needs >= 2 nodes and one weight per node"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid nodes must be strictly increasing"));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("grid weights must be positive and finite"));
        }
        Ok(Grid { kind, points, weights })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    /// Quadrature sum of a real function.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&q, &w)| w * f(q))
            .sum()
    }

    /// Two grids are interchangeable when their nodes and weights agree exactly.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || (self.points == other.points && self.weights == other.weights)
    }
}

fn trapezoid_rule(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let points = (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + h * k as f64 })
        .collect();
    let weights = (0..n)
        .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
        .collect();
    (points, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gauss_legendre_rule(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        // Tricomi initial guess, then Newton.
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    // The guesses run from +1 down to -1.
    let points = nodes.iter().rev().map(|x| mid + half * x).collect();
    let weights = weights.iter().rev().map(|w| half * w).collect();
    (points, weights)
}

/// A complex amplitude function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    grid: Arc<Grid>,
    amps: Vec<Complex64>,
}

impl Bundle {
    pub fn new(grid: Arc<Grid>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::invalid(format!(
                "bundle has {} amplitudes for a {}-node grid",
                amps.len(),
                grid.len()
            )));
        }
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("bundle amplitudes must be finite"));
        }
        Ok(Bundle { grid, amps })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amps = grid.points().iter().map(|&q| f(q)).collect();
        Bundle::new(grid, amps)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); grid.len()];
        Bundle { grid, amps }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn shares_grid(&self, other: &Bundle) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    fn check_grid(&self, other: &Bundle) -> Result<()> {
        if self.shares_grid(other) {
            Ok(())
        } else {
            Err(Error::invalid("bundles live on different grids"))
        }
    }

    /// `∫ dq self*(q) other(q)` by quadrature.
    pub fn inner(&self, other: &Bundle) -> Result<Complex64> {
        self.check_grid(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Bundle) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .zip(self.grid.weights())
            .map(|((a, b), &w)| a.conj() * b * w)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .iter()
            .zip(self.grid.weights())
            .map(|(a, &w)| a.norm_sqr() * w)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Bundle> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::degenerate("cannot normalize a zero-norm bundle"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Bundle {
        Bundle {
            grid: Arc::clone(&self.grid),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// `a·x + b·y` for bundles on a shared grid.
    pub fn combine(a: Complex64, x: &Bundle, b: Complex64, y: &Bundle) -> Result<Bundle> {
        x.check_grid(y)?;
        Ok(Bundle {
            grid: Arc::clone(&x.grid),
            amps: x.amps.iter().zip(&y.amps).map(|(p, q)| a * p + b * q).collect(),
        })
    }

    /// Largest weighted pointwise deviation, `sqrt(Σ w |a - b|²)`.
    pub fn distance(&self, other: &Bundle) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .zip(self.grid.weights())
            .map(|((a, b), &w)| (a - b).norm_sqr() * w)
            .sum::<f64>()
            .sqrt())
    }
}

/// Free-function form of [`Bundle::inner`].
pub fn inner(a: &Bundle, b: &Bundle) -> Result<Complex64> {
    a.inner(b)
}

/// Free-function form of [`Bundle::normalized`].
pub fn normalize(b: &Bundle) -> Result<Bundle> {
    b.normalized()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Built-in amplitude function families. Every family is normalized on sampling.
///
/// Gaussians follow the amplitude convention `exp(-(q-μ)²/(4σ²))`, so `σ` is the
/// standard deviation of the probability density `|b(q)|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Gaussian {
        mu: f64,
        sigma: f64,
        /// Quadratic phase `exp(i·chirp·(q-μ)²)`.
        #[serde(default)]
        chirp: f64,
    },
    HermiteGaussian {
        order: u32,
        mu: f64,
        sigma: f64,
    },
    /// Real superposition of Gaussians, each with its own signed weight.
    GaussianMixture { components: Vec<MixtureComponent> },
    /// Raw amplitudes, one per grid node.
    Tabulated { amplitudes: Vec<Complex64> },
}

fn gaussian_amp(q: f64, mu: f64, sigma: f64) -> f64 {
    let d = q - mu;
    (-d * d / (4.0 * sigma * sigma)).exp()
}

/// Physicists' Hermite polynomial `H_n(x)`.
fn hermite(order: u32, x: f64) -> f64 {
    let mut h0 = 1.0;
    if order == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..order {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("width must be positive, got {sigma}")))
    }
}

/// Samples a family on `grid` and normalizes the result.
pub fn sample_function(family: &Family, grid: &Arc<Grid>) -> Result<Bundle> {
    let raw = match family {
        Family::Gaussian { mu, sigma, chirp } => {
            check_sigma(*sigma)?;
            if !(mu.is_finite() && chirp.is_finite()) {
                return Err(Error::invalid("gaussian parameters must be finite"));
            }
            Bundle::from_fn(Arc::clone(grid), |q| {
                let d = q - mu;
                Complex64::from_polar(gaussian_amp(q, *mu, *sigma), chirp * d * d)
            })?
        }
        Family::HermiteGaussian { order, mu, sigma } => {
            check_sigma(*sigma)?;
            let scale = 1.0 / (std::f64::consts::SQRT_2 * sigma);
            Bundle::from_fn(Arc::clone(grid), |q| {
                let x = (q - mu) * scale;
                Complex64::new(hermite(*order, x) * gaussian_amp(q, *mu, *sigma), 0.0)
            })?
        }
        Family::GaussianMixture { components } => {
            if components.is_empty() {
                return Err(Error::invalid("gaussian mixture needs at least one component"));
            }
            for c in components {
                check_sigma(c.sigma)?;
            }
            Bundle::from_fn(Arc::clone(grid), |q| {
                let v: f64 = components
                    .iter()
                    .map(|c| c.weight * gaussian_amp(q, c.mu, c.sigma))
                    .sum();
                Complex64::new(v, 0.0)
            })?
        }
        Family::Tabulated { amplitudes } => {
            if amplitudes.len() != grid.len() {
                return Err(Error::invalid(format!(
                    "tabulated data has {} values for a {}-node grid",
                    amplitudes.len(),
                    grid.len()
                )));
            }
            Bundle::new(Arc::clone(grid), amplitudes.clone())?
        }
    };
    raw.normalized().map_err(|_| {
        Error::invalid("sampled function vanishes on the grid; check its parameters")
    })
}

#[derive(Debug, Deserialize)]
struct TabulatedRow {
    q: f64,
    re: f64,
    im: f64,
}

/// Loads a tabulated bundle from a CSV file with a `q,re,im` header.
///
/// Nodes must coincide with the grid nodes within [`NODE_MATCH_TOL`].
pub fn load_tabulated_csv(path: impl AsRef<Path>, grid: &Arc<Grid>) -> Result<Bundle> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    for required in ["q", "re", "im"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::invalid(format!("tabulated CSV is missing column `{required}`")));
        }
    }
    let mut amplitudes = Vec::with_capacity(grid.len());
    for (k, row) in reader.deserialize::<TabulatedRow>().enumerate() {
        let row = row?;
        let Some(&node) = grid.points().get(k) else {
            return Err(Error::invalid("tabulated CSV has more rows than grid nodes"));
        };
        if (row.q - node).abs() > NODE_MATCH_TOL {
            return Err(Error::invalid(format!(
                "tabulated node {} at row {k} does not match grid node {node}",
                row.q
            )));
        }
        amplitudes.push(Complex64::new(row.re, row.im));
    }
    sample_function(&Family::Tabulated { amplitudes }, grid)
}

/// Writes a bundle as `q,re,im` CSV.
pub fn write_tabulated_csv(path: impl AsRef<Path>, bundle: &Bundle) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["q", "re", "im"])?;
    for (q, a) in bundle.grid().points().iter().zip(bundle.amplitudes()) {
        w.write_record([q.to_string(), a.re.to_string(), a.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn default_grid() -> Arc<Grid> {
        make_grid(GridKind::UniformTrapezoid, 512, (-8.0, 8.0)).unwrap()
    }

    #[test]
    fn trapezoid_three_nodes() {
        let g = Grid::new(GridKind::UniformTrapezoid, 3, (0.0, 1.0)).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn trapezoid_integrates_constant_to_span() {
        for n in [2, 7, 100, 513] {
            let g = Grid::new(GridKind::UniformTrapezoid, n, (-3.0, 5.5)).unwrap();
            let total = g.integrate(|_| 1.0);
            assert!((total - 8.5).abs() / 8.5 <= 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn gauss_legendre_two_point() {
        let g = Grid::new(GridKind::GaussLegendre, 2, (-1.0, 1.0)).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((g.points()[0] + r).abs() < 1e-15);
        assert!((g.points()[1] - r).abs() < 1e-15);
        assert!((g.weights()[0] - 1.0).abs() < 1e-15);
        assert!((g.weights()[1] - 1.0).abs() < 1e-15);
        assert!((g.integrate(|q| q * q) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        for n in [3usize, 8, 20] {
            let g = Grid::new(GridKind::GaussLegendre, n, (-0.5, 2.0)).unwrap();
            let deg = 2 * n - 1;
            let got = g.integrate(|q| q.powi(deg as i32));
            let exact = (2f64.powi(deg as i32 + 1) - (-0.5f64).powi(deg as i32 + 1)) / (deg + 1) as f64;
            assert!((got - exact).abs() <= 1e-11 * exact.abs().max(1.0), "n={n} {got} {exact}");
            assert!(g.points().windows(2).all(|w| w[1] > w[0]));
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(matches!(Grid::new(GridKind::UniformTrapezoid, 1, (0.0, 1.0)), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new(GridKind::GaussLegendre, 4, (1.0, 1.0)), Err(Error::InvalidArgument(_))));
        assert!(matches!(Grid::new(GridKind::GaussLegendre, 4, (2.0, 1.0)), Err(Error::InvalidArgument(_))));
        assert!(Grid::from_parts(GridKind::UniformTrapezoid, vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Grid::from_parts(GridKind::UniformTrapezoid, vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_self_overlap_and_norm() {
        let g = default_grid();
        let b = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
        assert!((b.inner(&b).unwrap() - c(1.0)).norm() < 1e-10);
    }

    #[test]
    fn even_odd_orthogonal() {
        let g = default_grid();
        let even = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
        let odd = sample_function(&Family::HermiteGaussian { order: 1, mu: 0.0, sigma: 1.0 }, &g).unwrap();
        assert!(even.inner(&odd).unwrap().norm() < 1e-12);
    }

    #[test]
    fn displaced_gaussian_overlap() {
        // Analytic overlap exp(-(Δμ)²/(8σ²)); oracle evaluated on a 4001-node grid.
        let fine = make_grid(GridKind::UniformTrapezoid, 4001, (-12.0, 12.0)).unwrap();
        let a = sample_function(&Family::Gaussian { mu: -1.0, sigma: 1.0, chirp: 0.0 }, &fine).unwrap();
        let b = sample_function(&Family::Gaussian { mu: 1.0, sigma: 1.0, chirp: 0.0 }, &fine).unwrap();
        let analytic = (-0.5f64).exp();
        assert!((a.inner(&b).unwrap() - c(analytic)).norm() < 1e-12);

        let g = default_grid();
        let a = sample_function(&Family::Gaussian { mu: -1.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
        let b = sample_function(&Family::Gaussian { mu: 1.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
        assert!((a.inner(&b).unwrap().re - 0.60653).abs() < 1e-5);
        assert!((a.inner(&b).unwrap() - c(analytic)).norm() < 1e-10);
    }

    #[test]
    fn chirped_overlap_matches_analytic() {
        // <g0|g_c> = 1/sqrt(1 - 2 i c σ²) for the amplitude convention above.
        let g = make_grid(GridKind::UniformTrapezoid, 2001, (-10.0, 10.0)).unwrap();
        let chirp = 0.3;
        let plain = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
        let chirped = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp }, &g).unwrap();
        let z = plain.inner(&chirped).unwrap();
        let analytic = Complex64::new(1.0, -2.0 * chirp).sqrt().inv();
        assert!((z - analytic).norm() < 1e-10, "{z} vs {analytic}");
        assert!(z.norm() < 1.0);
        assert!(z.im.abs() > 1e-3);
    }

    #[test]
    fn quadrature_error_does_not_grow_with_resolution() {
        let analytic = (-0.5f64).exp();
        let mut prev = f64::INFINITY;
        for n in [64, 128, 256, 512] {
            let g = make_grid(GridKind::GaussLegendre, n, (-7.0, 7.0)).unwrap();
            let a = sample_function(&Family::Gaussian { mu: -1.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
            let b = sample_function(&Family::Gaussian { mu: 1.0, sigma: 1.0, chirp: 0.0 }, &g).unwrap();
            let err = (a.inner(&b).unwrap() - c(analytic)).norm();
            assert!(err <= prev + 1e-15, "n={n}: {err} > {prev}");
            prev = err;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn normalize_behaviour() {
        let g = default_grid();
        let b = sample_function(&Family::Gaussian { mu: 0.3, sigma: 0.8, chirp: 0.1 }, &g).unwrap();
        let again = normalize(&b).unwrap();
        assert!(again.distance(&b).unwrap() < 1e-12);

        let scaled = b.scaled(Complex64::new(0.0, 3.0));
        let r = normalize(&scaled).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-12);
        // Dividing by a positive norm keeps the 3i phase.
        let expected = b.scaled(Complex64::new(0.0, 1.0));
        assert!(r.distance(&expected).unwrap() < 1e-12);

        let zero = Bundle::zeros(Arc::clone(&g));
        assert!(matches!(normalize(&zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let g1 = default_grid();
        let g2 = make_grid(GridKind::UniformTrapezoid, 256, (-8.0, 8.0)).unwrap();
        let a = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g1).unwrap();
        let b = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g2).unwrap();
        assert!(matches!(a.inner(&b), Err(Error::InvalidArgument(_))));
        // Structurally equal grids behind different allocations are accepted.
        let g3 = make_grid(GridKind::UniformTrapezoid, 512, (-8.0, 8.0)).unwrap();
        let d = sample_function(&Family::Gaussian { mu: 0.0, sigma: 1.0, chirp: 0.0 }, &g3).unwrap();
        assert!(a.inner(&d).is_ok());
    }

    #[test]
    fn invalid_family_parameters() {
        let g = default_grid();
        assert!(sample_function(&Family::Gaussian { mu: 0.0, sigma: 0.0, chirp: 0.0 }, &g).is_err());
        assert!(sample_function(&Family::HermiteGaussian { order: 2, mu: 0.0, sigma: -1.0 }, &g).is_err());
        assert!(sample_function(&Family::Tabulated { amplitudes: vec![c(1.0); 3] }, &g).is_err());
        assert!(sample_function(&Family::GaussianMixture { components: vec![] }, &g).is_err());
    }

    #[test]
    fn hermite_family_is_orthonormal() {
        let g = default_grid();
        let fams: Vec<Bundle> = (0..5)
            .map(|order| sample_function(&Family::HermiteGaussian { order, mu: 0.2, sigma: 0.9 }, &g).unwrap())
            .collect();
        for (i, a) in fams.iter().enumerate() {
            for (j, b) in fams.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b).unwrap() - c(expected)).norm() < 1e-10, "{i},{j}");
            }
        }
    }

    #[test]
    fn tabulated_csv_round_trip_and_node_check() {
        let g = make_grid(GridKind::UniformTrapezoid, 65, (-6.0, 6.0)).unwrap();
        let b = sample_function(&Family::Gaussian { mu: 0.5, sigma: 1.0, chirp: 0.2 }, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        write_tabulated_csv(&path, &b).unwrap();
        let back = load_tabulated_csv(&path, &g).unwrap();
        assert!(back.distance(&b).unwrap() < 1e-12);

        let other = make_grid(GridKind::UniformTrapezoid, 65, (-6.0, 6.1)).unwrap();
        assert!(matches!(load_tabulated_csv(&path, &other), Err(Error::InvalidArgument(_))));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "x,re,im\n0,1,0\n").unwrap();
        assert!(load_tabulated_csv(&bad, &g).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inner_is_conjugate_symmetric_and_sesquilinear(
                mu1 in -2.0f64..2.0, mu2 in -2.0f64..2.0,
                s1 in 0.5f64..1.5, s2 in 0.5f64..1.5,
                ch in -0.5f64..0.5,
                are in -3.0f64..3.0, aim in -3.0f64..3.0,
            ) {
                let g = make_grid(GridKind::UniformTrapezoid, 256, (-8.0, 8.0)).unwrap();
                let a = sample_function(&Family::Gaussian { mu: mu1, sigma: s1, chirp: ch }, &g).unwrap();
                let b = sample_function(&Family::Gaussian { mu: mu2, sigma: s2, chirp: 0.0 }, &g).unwrap();
                let ab = a.inner(&b).unwrap();
                let ba = b.inner(&a).unwrap();
                prop_assert!((ab - ba.conj()).norm() < 1e-14);
                let alpha = Complex64::new(are, aim);
                let lhs = a.scaled(alpha).inner(&b).unwrap();
                prop_assert!((lhs - alpha.conj() * ab).norm() < 1e-13);
                let aa = a.inner(&a).unwrap();
                prop_assert!(aa.im.abs() < 1e-15 && aa.re >= 0.0);
            }

            #[test]
            fn normalize_is_idempotent(mu in -2.0f64..2.0, s in 0.3f64..2.0, k in 0.1f64..10.0) {
                let g = make_grid(GridKind::GaussLegendre, 200, (-10.0, 10.0)).unwrap();
                let b = sample_function(&Family::Gaussian { mu, sigma: s, chirp: 0.1 }, &g).unwrap().scaled(Complex64::new(k, 0.0));
                let once = b.normalized().unwrap();
                let twice = once.normalized().unwrap();
                prop_assert!(once.distance(&twice).unwrap() < 1e-12);
                prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }
}
