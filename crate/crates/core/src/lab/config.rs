//! Closed-world experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::div_adjoint;
use crate::flows::{FlowConfig, FlowKind};
use crate::grid::{
    band_limited_perturbation, linalg, GridSpec, Mat3, MetricField, StencilOrder, SymTensorField, VectorField,
};
use crate::spectral::SpectrumOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Curvature,
    Lambda,
    Spectrum,
    Decompose,
    Secondvar,
    Flow,
    Stability,
    Monotonicity,
    GaugeTransfer,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Self::Curvature,
        Self::Lambda,
        Self::Spectrum,
        Self::Decompose,
        Self::Secondvar,
        Self::Flow,
        Self::Stability,
        Self::Monotonicity,
        Self::GaugeTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Curvature => "curvature",
            Self::Lambda => "lambda",
            Self::Spectrum => "spectrum",
            Self::Decompose => "decompose",
            Self::Secondvar => "secondvar",
            Self::Flow => "flow",
            Self::Stability => "stability",
            Self::Monotonicity => "monotonicity",
            Self::GaugeTransfer => "gauge-transfer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    /// Side length of a cubic torus; ignored when `lengths` is given. Defaults to 2 pi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(default)]
    pub stencil: StencilOrder,
    /// Constant background metric as rows; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// Band-limited random symmetric tensor.
    #[default]
    Band,
    /// `delta* X` with `X` band-limited.
    Gauge,
    /// `e^{phi} g0` with `phi` band-limited.
    Conformal,
    /// `amplitude cos(x) E` with a fixed symmetric `E`.
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_wavenumber")]
    pub max_wavenumber: u32,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub kind: PerturbationKind,
    /// Removes the node mean of the perturbation.
    #[serde(default)]
    pub zero_mean: bool,
    /// Constant symmetric tensor (stored components) added to the background.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
}

fn default_wavenumber() -> u32 {
    2
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { seed: 0, max_wavenumber: 2, amplitude: 0.0, kind: PerturbationKind::Band, zero_mean: false, shift: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(default = "default_kind")]
    pub kind: FlowKind,
    #[serde(default = "default_safety")]
    pub dt_safety: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_update_period: Option<f64>,
    /// Uses `A = 2 / gap` from the background spectrum when no period is given.
    #[serde(default)]
    pub auto_reference_update: bool,
    #[serde(default)]
    pub track_lambda: bool,
}

fn default_kind() -> FlowKind {
    FlowKind::DeTurck
}
fn default_safety() -> f64 {
    0.5
}
fn default_t_end() -> f64 {
    1.0
}
fn default_record_every() -> usize {
    10
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            dt_safety: default_safety(),
            t_end: default_t_end(),
            record_every: default_record_every(),
            reference_update_period: None,
            auto_reference_update: false,
            track_lambda: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_tol: Option<f64>,
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default = "default_max_basis")]
    pub max_basis: usize,
    #[serde(default = "default_max_restarts")]
    pub max_restarts: usize,
}

fn default_k() -> usize {
    8
}
fn default_block() -> usize {
    8
}
fn default_max_basis() -> usize {
    96
}
fn default_max_restarts() -> usize {
    200
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            k: default_k(),
            eig_tol: None,
            block: default_block(),
            max_basis: default_max_basis(),
            max_restarts: default_max_restarts(),
        }
    }
}

/// Assertion thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `lambda(t_{j+1}) >= lambda(t_j) - lambda_slack (1 + |lambda|)`.
    pub lambda_slack: f64,
    /// Curvature and DeTurck term of flat metrics.
    pub flatness: f64,
    pub zero_mode: f64,
    /// Frozen `C` in `|g1 - g0| <= C sup |g~ - g0|`.
    pub reference_ratio: f64,
    /// Relative agreement of lambda and Vol between gauges.
    pub transfer_rel: f64,
    /// Relative agreement of the `|Ric|` decay rates.
    pub rate_rel: f64,
    /// Relative reconstruction error of the decomposition.
    pub decomposition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lambda_slack: 1e-8,
            flatness: 1e-12,
            zero_mode: 1e-12,
            reference_ratio: 1.0,
            transfer_rel: 1e-6,
            rate_rel: 0.1,
            decomposition: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
}

/// One experiment: what to run, on which grid, from which initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything a run needs before it starts. Seeds must fit a TOML
    /// integer so that the echoed config stays loadable.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.background()?;
        if let Some(s) = self.seeds().into_iter().find(|&s| s > i64::MAX as u64) {
            return Err(Error::Config(format!("seed {s} exceeds {}", i64::MAX)));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        let lengths = match (&g.lengths, g.side) {
            (Some(l), _) => l.clone(),
            (None, side) => vec![side.unwrap_or(2.0 * PI); g.dim],
        };
        let spec = GridSpec::new(g.dim, g.points, &lengths).map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec.with_stencil(g.stencil))
    }

    pub fn background(&self) -> Result<MetricField> {
        let grid = self.grid_spec()?;
        let dim = grid.dim();
        let Some(rows) = &self.grid.metric else {
            return Ok(MetricField::identity(&grid));
        };
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("grid.metric must be {dim}x{dim}")));
        }
        let mut m: Mat3 = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in 0..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Config("grid.metric must be symmetric".into()));
                }
                m[i][j] = rows[i][j];
            }
        }
        MetricField::constant(&grid, &m).map_err(|e| Error::Config(format!("grid.metric: {e}")))
    }

    /// Perturbation tensor for the given seed; the background is needed for
    /// the gauge and conformal kinds.
    pub fn perturbation_tensor(&self, seed: u64) -> Result<SymTensorField> {
        let p = &self.perturbation;
        let grid = self.grid_spec()?;
        let g0 = self.background()?;
        let dim = grid.dim();
        let mut h = match p.kind {
            PerturbationKind::Band => band_limited_perturbation(&grid, seed, p.max_wavenumber, p.amplitude)?,
            PerturbationKind::Gauge => {
                let raw = band_limited_perturbation(&grid, seed, p.max_wavenumber, p.amplitude)?;
                let mut x = VectorField::zeros(&grid);
                for node in 0..grid.node_count() {
                    let src = raw.at(node)[..dim].to_vec();
                    x.at_mut(node).copy_from_slice(&src);
                }
                div_adjoint(&x, &g0)?
            }
            PerturbationKind::Conformal => {
                let raw = band_limited_perturbation(&grid, seed, p.max_wavenumber, p.amplitude)?;
                let mut h = SymTensorField::zeros(&grid);
                for node in 0..grid.node_count() {
                    let s = raw.at(node)[0].exp() - 1.0;
                    let g = g0.matrix(node);
                    let mut m = [[0.0; 3]; 3];
                    for i in 0..dim {
                        for j in 0..dim {
                            m[i][j] = s * g[i][j];
                        }
                    }
                    h.set_matrix(node, &m);
                }
                h
            }
            PerturbationKind::Mode => {
                let nc = linalg::sym_components(dim);
                let e: Vec<f64> = (0..nc).map(|c| [1.0, 0.5, -0.3, 0.2, 0.4, -0.6][c]).collect();
                let k = 2.0 * PI / grid.side_lengths()[0];
                SymTensorField::from_fn(&grid, |x, v| {
                    let c = p.amplitude * (k * x[0]).cos();
                    for (vi, ei) in v.iter_mut().zip(&e) {
                        *vi = c * ei;
                    }
                })
            }
        };
        if p.zero_mean {
            let mean = h.node_mean();
            for node in 0..grid.node_count() {
                for (v, m) in h.at_mut(node).iter_mut().zip(&mean) {
                    *v -= m;
                }
            }
        }
        if let Some(shift) = &p.shift {
            let c = SymTensorField::constant(&grid, shift)
                .map_err(|_| Error::Config(format!("perturbation.shift needs {} components", h.components())))?;
            h = h.add(&c)?;
        }
        Ok(h)
    }

    pub fn initial_metric(&self, seed: u64) -> Result<MetricField> {
        self.background()?.perturbed(&self.perturbation_tensor(seed)?)
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        let s = &self.spectrum;
        SpectrumOptions {
            k: s.k,
            eig_tol: s.eig_tol,
            block: s.block,
            max_basis: s.max_basis,
            max_restarts: s.max_restarts,
            ..Default::default()
        }
    }

    /// Flow settings with `A` left to the caller when it is automatic.
    pub fn flow_config(&self) -> Result<FlowConfig> {
        let f = &self.flow;
        let mut cfg = FlowConfig::new(f.kind, self.background()?);
        cfg.dt_safety = f.dt_safety;
        cfg.t_end = f.t_end;
        cfg.record_every = f.record_every;
        cfg.reference_update_period = f.reference_update_period;
        cfg.track_lambda = f.track_lambda;
        Ok(cfg)
    }

    /// Seeds of the independent runs.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.sweep {
            Some(s) if !s.seeds.is_empty() => s.seeds.clone(),
            _ => vec![self.perturbation.seed],
        }
    }
}
