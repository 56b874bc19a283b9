//! JSON run configuration. Angles are radians; relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chsh::{canonical_settings, AngleSettings};
use crate::continuum::{load_tabulated_csv, make_grid, sample_function, Bundle, Family, Grid, GridKind};
use crate::error::{Error, Result};
use crate::hybrid::{HybridState, StateRecord};
use crate::spdc::{run_pipeline, SpdcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_grid_kind")]
    pub kind: GridKind,
    pub n: usize,
    pub range: (f64, f64),
}

fn default_grid_kind() -> GridKind {
    GridKind::UniformTrapezoid
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { kind: GridKind::UniformTrapezoid, n: 512, range: (-10.0, 10.0) }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        make_grid(self.kind, self.n, self.range)
    }
}

/// A continuum bundle given either analytically or as a `q,re,im` CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BundleSpec {
    Csv { csv: PathBuf },
    Family(Family),
}

/// Overlap `z = ⟨h|v⟩`; a bare number is real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverlapSpec {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl OverlapSpec {
    pub fn value(self) -> Complex64 {
        match self {
            OverlapSpec::Real(x) => Complex64::new(x, 0.0),
            OverlapSpec::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSource {
    /// `cosθ|H⟩h + sinθ|V⟩v` with explicit bundles.
    Direct { theta: f64, h: BundleSpec, v: BundleSpec },
    /// Gaussian `h` and a `v` with the requested overlap.
    Overlap { theta: f64, z: OverlapSpec },
    /// Heralded state from the down-conversion source; `config` is inline or a path.
    Spdc { config: SpdcSource },
    /// A state written earlier by `spdc-gen`.
    Record { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpdcSource {
    Path(PathBuf),
    Inline(Box<SpdcConfig>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingsSpec {
    Canonical,
    Optimize,
    /// `[α, α′, β, β′]`.
    Explicit([f64; 4]),
}

impl Default for SettingsSpec {
    fn default() -> Self {
        SettingsSpec::Canonical
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    #[serde(default)]
    pub n_events: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub state: StateSource,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub settings: SettingsSpec,
    #[serde(default)]
    pub monte_carlo: MonteCarloSpec,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| config_err(path, e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn from_state(state: StateSource) -> RunConfig {
        RunConfig {
            state,
            grid: None,
            settings: SettingsSpec::default(),
            monte_carlo: MonteCarloSpec::default(),
            base_dir: PathBuf::new(),
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        match &self.state {
            StateSource::Direct { h, v, .. } => {
                for b in [h, v] {
                    if let BundleSpec::Csv { csv } = b {
                        out.push(self.resolve(csv));
                    }
                }
            }
            StateSource::Spdc { config: SpdcSource::Path(p) } | StateSource::Record { path: p } => {
                out.push(self.resolve(p))
            }
            _ => {}
        }
        out
    }

    fn check_files(&self) -> Result<()> {
        for f in self.referenced_files() {
            if !f.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        self.grid.unwrap_or_default().build()
    }

    fn bundle(&self, spec: &BundleSpec, grid: &Arc<Grid>) -> Result<Bundle> {
        match spec {
            BundleSpec::Csv { csv } => load_tabulated_csv(self.resolve(csv), grid),
            BundleSpec::Family(f) => sample_function(f, grid),
        }
    }

    /// Builds the configured state.
    pub fn build_state(&self) -> Result<HybridState> {
        match &self.state {
            StateSource::Direct { theta, h, v } => {
                let grid = self.grid()?;
                HybridState::new(*theta, self.bundle(h, &grid)?, self.bundle(v, &grid)?)
            }
            StateSource::Overlap { theta, z } => HybridState::with_overlap(*theta, z.value(), &self.grid()?),
            StateSource::Spdc { config } => {
                let cfg = match config {
                    SpdcSource::Inline(c) => **c,
                    SpdcSource::Path(p) => SpdcConfig::from_file(self.resolve(p))?,
                };
                Ok(run_pipeline(&cfg)?.state)
            }
            StateSource::Record { path } => {
                let path = self.resolve(path);
                let text = std::fs::read_to_string(&path)?;
                let rec: StateRecord = serde_json::from_str(&text).map_err(|e| config_err(&path, e))?;
                rec.into_state()
            }
        }
    }

    /// Angle settings, unless they must be optimized for the state.
    pub fn fixed_settings(&self) -> Result<Option<AngleSettings>> {
        match self.settings {
            SettingsSpec::Canonical => Ok(Some(canonical_settings())),
            SettingsSpec::Optimize => Ok(None),
            SettingsSpec::Explicit([a, ap, b, bp]) => AngleSettings::new(a, ap, b, bp).map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_source() {
        let direct = r#"{
            "state": {"source": "direct", "theta": 0.7,
                      "h": {"family": "gaussian", "mu": -1.0, "sigma": 1.0},
                      "v": {"family": "gaussian", "mu": 1.0, "sigma": 1.0}},
            "grid": {"n": 256, "range": [-10, 10]},
            "settings": {"explicit": [0, 0.5, 0.2, 0.9]},
            "monte_carlo": {"n_events": 1000, "seed": 3}
        }"#;
        let cfg: RunConfig = serde_json::from_str(direct).unwrap();
        let st = cfg.build_state().unwrap();
        assert!((st.overlap_z().re - (-0.5f64).exp()).abs() < 1e-9);
        assert!(cfg.fixed_settings().unwrap().is_some());

        let ov: RunConfig =
            serde_json::from_str(r#"{"state": {"source": "overlap", "theta": 0.785, "z": {"re": 0.3, "im": 0.4}}, "settings": "optimize"}"#)
                .unwrap();
        assert!((ov.build_state().unwrap().overlap_z() - Complex64::new(0.3, 0.4)).norm() < 1e-9);
        assert!(ov.fixed_settings().unwrap().is_none());
    }

    #[test]
    fn rejects_unknown_and_missing() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"state": {"source": "overlap", "theta": 1, "z": 0}, "bogus": 1}"#).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"state": {"source": "record", "path": "missing.json"}}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
    }
}
