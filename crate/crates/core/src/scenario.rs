//! JSON scenario files: test signal, noise, diffusion and solver settings.

use serde::{Deserialize, Serialize};

use crate::baselines::SgFilterSpec;
use crate::datagen::{PearsonPeakSpec, DEFAULT_KNOT_COUNT};
use crate::diffusion::{DiffusionConfig, DiffusionMode, DEFAULT_DT, DEFAULT_EDGE_K};
use crate::error::{Error, Result};
use crate::lssvr::{Formulation, LssvrConfig, Nonlinearity, TrainingRule};
use crate::metrics::DEFAULT_INTERVAL;

pub const DEFAULT_GRID: usize = 201;
pub const DEFAULT_RENDER_GRID: usize = 401;
pub const DEFAULT_PROJECTION_RIDGE: f64 = 1e-10;

const BUNDLED: &[(&str, &str)] = &[
    ("testcase1", include_str!("../scenarios/testcase1.json")),
    ("testcase2", include_str!("../scenarios/testcase2.json")),
    ("sine", include_str!("../scenarios/sine.json")),
];

/// Clean signal of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    /// Sum of Pearson VII peaks, specified on `window` and mapped onto [0, 1].
    Pearson {
        peaks: Vec<PearsonPeakSpec>,
        #[serde(default = "unit_window")]
        window: [f64; 2],
    },
    /// `sin(pi x)`, the heat-equation reference.
    Sine,
}

fn unit_window() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    pub seed: u64,
    #[serde(default = "default_knots")]
    pub knot_count: usize,
    /// Knot standard deviation; `0.08 * max |clean|` when absent.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

fn default_knots() -> usize {
    DEFAULT_KNOT_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub signal: SignalSource,
    pub noise: NoiseSettings,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_diffusion")]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub solver: LssvrConfig,
    #[serde(default = "default_ridge")]
    pub projection_ridge: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default = "default_render_grid")]
    pub render_grid: usize,
    #[serde(default = "default_baseline")]
    pub baseline: SgFilterSpec,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_render_grid() -> usize {
    DEFAULT_RENDER_GRID
}
fn default_ridge() -> f64 {
    DEFAULT_PROJECTION_RIDGE
}
fn default_interval() -> [f64; 2] {
    DEFAULT_INTERVAL
}
fn default_baseline() -> SgFilterSpec {
    SgFilterSpec {
        half_width: 4,
        degree: 2,
    }
}
fn default_diffusion() -> DiffusionConfig {
    DiffusionConfig::new(
        DiffusionMode::PmExponential {
            edge: DEFAULT_EDGE_K,
        },
        DEFAULT_DT,
        16,
    )
}

/// Names of the scenarios compiled into the library.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid(format!("no bundled scenario named `{name}`")))?;
    Scenario::from_json(text)
}

impl Scenario {
    /// Parses and validates; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scn: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::scenario(
                if path.is_empty() { ".".into() } else { path },
                e.inner().to_string(),
            )
        })?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let at = |path: &str, err: Error| match err {
            Error::InvalidInput(m) => Error::scenario(path, m),
            other => other,
        };
        if let SignalSource::Pearson { peaks, window } = &self.signal {
            for (i, p) in peaks.iter().enumerate() {
                p.validate()
                    .map_err(|e| at(&format!("signal.peaks[{i}]"), e))?;
            }
            if !(window[1] > window[0]) {
                return Err(Error::scenario(
                    "signal.window",
                    "window must be increasing",
                ));
            }
        }
        if self.noise.knot_count < 3 {
            return Err(Error::scenario(
                "noise.knot_count",
                "at least 3 knots are required",
            ));
        }
        if let Some(a) = self.noise.amplitude {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::scenario(
                    "noise.amplitude",
                    "must be finite and nonnegative",
                ));
            }
        }
        if self.grid < 2 {
            return Err(Error::scenario("grid", "at least 2 samples are required"));
        }
        if self.render_grid < 2 {
            return Err(Error::scenario(
                "render_grid",
                "at least 2 samples are required",
            ));
        }
        self.diffusion.validate().map_err(|e| at("diffusion", e))?;
        if !(self.diffusion.dt > 0.0) {
            return Err(Error::scenario(
                "diffusion.dt",
                "time step must be positive",
            ));
        }
        if self.diffusion.steps == 0 {
            return Err(Error::scenario(
                "diffusion.steps",
                "at least one step is required",
            ));
        }
        self.solver.validate().map_err(|e| at("solver", e))?;
        if self.grid < self.solver.order + 1 {
            return Err(Error::scenario(
                "grid",
                format!(
                    "projection onto order {} needs at least {} samples",
                    self.solver.order,
                    self.solver.order + 1
                ),
            ));
        }
        if !(self.projection_ridge >= 0.0) || !self.projection_ridge.is_finite() {
            return Err(Error::scenario(
                "projection_ridge",
                "must be finite and nonnegative",
            ));
        }
        crate::lssvr::snapshot_steps(&self.snapshots, self.diffusion.dt, self.diffusion.steps)
            .map_err(|e| at("snapshots", e))?;
        let [a, b] = self.interval;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::scenario(
                "interval",
                "must be an increasing subinterval of [0, 1]",
            ));
        }
        self.baseline.validate().map_err(|e| at("baseline", e))?;
        Ok(())
    }

    /// Replaces the edge constant of a Perona-Malik mode, or the
    /// diffusivity of the isotropic one.
    pub fn set_edge_constant(&mut self, value: f64) {
        self.diffusion.mode = match self.diffusion.mode {
            DiffusionMode::Isotropic { .. } => DiffusionMode::Isotropic { k: value },
            DiffusionMode::PmExponential { .. } => DiffusionMode::PmExponential { edge: value },
            DiffusionMode::PmRational { .. } => DiffusionMode::PmRational { edge: value },
        };
    }

    pub fn is_collocation(&self) -> bool {
        self.solver.formulation == Formulation::Collocation
    }

    /// Uses `count` equidistant collocation points.
    pub fn set_training_count(&mut self, count: usize) {
        self.solver.training = match self.solver.training {
            TrainingRule::Equidistant { .. } => TrainingRule::Equidistant { count },
            TrainingRule::LegendreRoots { .. } => TrainingRule::LegendreRoots { count },
        };
    }

    pub fn uses_picard(&self) -> bool {
        matches!(self.solver.nonlinearity, Nonlinearity::Picard { .. })
    }
}
