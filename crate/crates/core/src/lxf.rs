//! Lax-Friedrichs scheme with dimensional splitting.

use crate::congestion::CongestionModel;
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::nonlocal::InterfaceVelocities;
use crate::scheme::{split_step, CflBounds, StepOutput, SweepState};
use crate::velocity::{SampledVelocity, VelocityNorms};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LxfConfig {
    pub epsilon: f64,
    /// Viscosity in x; `None` selects the smallest admissible value.
    pub alpha: Option<f64>,
    /// Viscosity in y; `None` selects the smallest admissible value.
    pub beta: Option<f64>,
    pub cfl_safety: f64,
    pub y_sweep: SweepState,
}

impl LxfConfig {
    pub fn new(epsilon: f64) -> Self {
        LxfConfig {
            epsilon,
            alpha: None,
            beta: None,
            cfl_safety: 1.0,
            y_sweep: SweepState::Previous,
        }
    }
}

/// `1/2 [v (u + w) + J (f(u) + f(w))] - visc/2 (w - u)`.
#[inline]
pub fn lxf_flux(v: f64, j: f64, u: f64, w: f64, visc: f64, model: &CongestionModel) -> f64 {
    0.5 * (v * (u + w) + j * (model.f(u) + model.f(w))) - 0.5 * visc * (w - u)
}

/// Time step and viscosities chosen for a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LxfCfl {
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub bounds: CflBounds,
}

fn viscosities(config: &LxfConfig, norms: &VelocityNorms, model: &CongestionModel) -> Result<(f64, f64)> {
    let el = config.epsilon * model.lipschitz_constant();
    let (amin, bmin) = (norms.v1_sup + el, norms.v2_sup + el);
    let alpha = config.alpha.unwrap_or(amin);
    let beta = config.beta.unwrap_or(bmin);
    if alpha < amin * (1.0 - 1e-12) {
        return Err(Error::Config(format!("alpha = {alpha} is below ||v_1|| + eps L_f = {amin}")));
    }
    if beta < bmin * (1.0 - 1e-12) {
        return Err(Error::Config(format!("beta = {beta} is below ||v_2|| + eps L_f = {bmin}")));
    }
    Ok((alpha, beta))
}

fn bounds_for(config: &LxfConfig, norms: &VelocityNorms, model: &CongestionModel, grid: &Grid, alpha: f64, beta: f64) -> CflBounds {
    let el2 = 2.0 * config.epsilon * model.lipschitz_constant();
    CflBounds {
        lambda_x: (1.0 / alpha).min(1.0 / (el2 + grid.dx * norms.v1_sup)) / 3.0,
        lambda_y: (1.0 / beta).min(1.0 / (el2 + grid.dy * norms.v2_sup)) / 3.0,
        rule: "Lax-Friedrichs",
    }
}

pub fn lxf_cfl_dt(config: &LxfConfig, norms: &VelocityNorms, model: &CongestionModel, grid: &Grid) -> Result<LxfCfl> {
    let (alpha, beta) = viscosities(config, norms, model)?;
    let bounds = bounds_for(config, norms, model, grid, alpha, beta);
    Ok(LxfCfl {
        dt: bounds.dt(grid.dx, grid.dy, config.cfl_safety)?,
        alpha,
        beta,
        bounds,
    })
}

#[derive(Debug, Clone)]
pub struct LxfScheme {
    pub config: LxfConfig,
    pub alpha: f64,
    pub beta: f64,
    pub bounds: CflBounds,
}

impl LxfScheme {
    pub fn new(config: LxfConfig, norms: &VelocityNorms, model: &CongestionModel, grid: &Grid) -> Result<Self> {
        if !(config.epsilon >= 0.0 && config.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", config.epsilon)));
        }
        if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {}", config.cfl_safety)));
        }
        let (alpha, beta) = viscosities(&config, norms, model)?;
        Ok(LxfScheme {
            config,
            alpha,
            beta,
            bounds: bounds_for(&config, norms, model, grid, alpha, beta),
        })
    }

    pub fn step(
        &self,
        field: &DensityField,
        j: &InterfaceVelocities,
        vel: &SampledVelocity,
        model: &CongestionModel,
        dt: f64,
    ) -> Result<StepOutput> {
        self.bounds.check(dt, field.grid.dx, field.grid.dy)?;
        let (a, b) = (self.alpha, self.beta);
        let fx = |v: f64, jv: f64, u: f64, w: f64, fu: f64, fw: f64| {
            0.5 * (v * (u + w) + jv * (fu + fw)) - 0.5 * a * (w - u)
        };
        let fy = |v: f64, jv: f64, u: f64, w: f64, fu: f64, fw: f64| {
            0.5 * (v * (u + w) + jv * (fu + fw)) - 0.5 * b * (w - u)
        };
        split_step(field, j, vel, model, dt, self.config.y_sweep, fx, fy)
    }
}
