//! Diffusion coefficients and the 1-D right-hand side
//! `u_t = d/dx (c(|u_x|) u_x) = c u_xx + (dc/dx) u_x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EDGE_K: f64 = 0.5;
pub const DEFAULT_DT: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionMode {
    /// Constant diffusivity: the heat equation `u_t = k u_xx`.
    Isotropic { k: f64 },
    /// `c(s) = exp(-(s/K)^2)`.
    PmExponential {
        #[serde(rename = "K")]
        edge: f64,
    },
    /// `c(s) = 1 / (1 + (s/K)^2)`.
    PmRational {
        #[serde(rename = "K")]
        edge: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub mode: DiffusionMode,
    pub dt: f64,
    pub steps: usize,
    /// Implicit weight of the theta scheme; 1/2 is Crank-Nicolson.
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    0.5
}

impl DiffusionConfig {
    pub fn new(mode: DiffusionMode, dt: f64, steps: usize) -> Self {
        Self {
            mode,
            dt,
            steps,
            theta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.mode {
            DiffusionMode::Isotropic { k } if !(k >= 0.0 && k.is_finite()) => {
                return Err(Error::invalid(format!(
                    "diffusivity k must be nonnegative, got {k}"
                )))
            }
            DiffusionMode::PmExponential { edge } | DiffusionMode::PmRational { edge }
                if !positive(edge) =>
            {
                return Err(Error::invalid(format!(
                    "edge constant K must be positive, got {edge}"
                )))
            }
            _ => {}
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!(
                "time step must be nonnegative, got {}",
                self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn coeff(&self, s: f64) -> f64 {
        pm_coeff(self, s)
    }

    pub fn coeff_deriv(&self, s: f64) -> f64 {
        pm_coeff_deriv(self, s)
    }

    /// Diffusivity and its spatial derivative at a point with local
    /// gradient `u_x` and curvature `u_xx`: `(c(|u_x|), c'(|u_x|) sgn(u_x) u_xx)`.
    pub fn frozen_fields(&self, u_x: f64, u_xx: f64) -> (f64, f64) {
        let s = u_x.abs();
        let sign = if u_x == 0.0 { 0.0 } else { u_x.signum() };
        (self.coeff(s), self.coeff_deriv(s) * sign * u_xx)
    }
}

/// Diffusion coefficient `c(s)` at gradient magnitude `s`.
pub fn pm_coeff(config: &DiffusionConfig, s: f64) -> f64 {
    match config.mode {
        DiffusionMode::Isotropic { k } => k,
        DiffusionMode::PmExponential { edge } => (-(s / edge).powi(2)).exp(),
        DiffusionMode::PmRational { edge } => 1.0 / (1.0 + (s / edge).powi(2)),
    }
}

/// `dc/ds`.
pub fn pm_coeff_deriv(config: &DiffusionConfig, s: f64) -> f64 {
    match config.mode {
        DiffusionMode::Isotropic { .. } => 0.0,
        DiffusionMode::PmExponential { edge } => -2.0 * s / (edge * edge) * pm_coeff(config, s),
        DiffusionMode::PmRational { edge } => {
            let c = pm_coeff(config, s);
            -2.0 * s / (edge * edge) * c * c
        }
    }
}

/// `F(u_x, u_xx) = c(|u_x|) u_xx + c'(|u_x|) sgn(u_x) u_xx u_x`.
pub fn pde_rhs(config: &DiffusionConfig, u_x: f64, u_xx: f64) -> f64 {
    let (c, dc_dx) = config.frozen_fields(u_x, u_xx);
    c * u_xx + dc_dx * u_x
}
