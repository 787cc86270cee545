//! Upwind Roe-type scheme with dimensional splitting.

use crate::congestion::CongestionModel;
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::nonlocal::InterfaceVelocities;
use crate::scheme::{split_step, CflBounds, StepOutput, SweepState};
use crate::velocity::{SampledVelocity, VelocityNorms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CflMode {
    /// `lambda <= 1 / (2 (eps + ||v||))`, enough for positivity.
    Positivity,
    /// `lambda <= 1 / (3 (eps L_f + ||v||))`, needed for the BV estimate.
    #[default]
    Bv,
}

impl CflMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "positivity" => Ok(CflMode::Positivity),
            "bv" => Ok(CflMode::Bv),
            _ => Err(Error::Config(format!("cfl_mode must be 'positivity' or 'bv', got '{s}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CflMode::Positivity => "positivity",
            CflMode::Bv => "bv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoeConfig {
    pub epsilon: f64,
    pub cfl_mode: CflMode,
    pub cfl_safety: f64,
    pub y_sweep: SweepState,
}

impl RoeConfig {
    pub fn new(epsilon: f64) -> Self {
        RoeConfig {
            epsilon,
            cfl_mode: CflMode::Bv,
            cfl_safety: 1.0,
            y_sweep: SweepState::Previous,
        }
    }
}

/// `V(v, u, w) = v u + min(0, v) (w - u)`.
#[inline]
pub fn roe_linear_flux(v: f64, u: f64, w: f64) -> f64 {
    v * u + v.min(0.0) * (w - u)
}

/// `F(u, w, J) = J f(u) + min(0, J) (f(w) - f(u))`.
#[inline]
pub fn roe_nonlocal_flux(u: f64, w: f64, j: f64, model: &CongestionModel) -> f64 {
    let fu = model.f(u);
    j * fu + j.min(0.0) * (model.f(w) - fu)
}

/// Full interface flux `V + F`.
#[inline]
pub fn roe_flux(v: f64, j: f64, u: f64, w: f64, model: &CongestionModel) -> f64 {
    roe_linear_flux(v, u, w) + roe_nonlocal_flux(u, w, j, model)
}

pub fn roe_cfl_bounds(config: &RoeConfig, norms: &VelocityNorms, model: &CongestionModel) -> CflBounds {
    let eps = config.epsilon;
    match config.cfl_mode {
        CflMode::Positivity => CflBounds {
            lambda_x: 1.0 / (2.0 * (eps + norms.v1_sup)),
            lambda_y: 1.0 / (2.0 * (eps + norms.v2_sup)),
            rule: "Roe positivity",
        },
        CflMode::Bv => {
            let el = eps * model.lipschitz_constant();
            CflBounds {
                lambda_x: 1.0 / (3.0 * (el + norms.v1_sup)),
                lambda_y: 1.0 / (3.0 * (el + norms.v2_sup)),
                rule: "Roe BV",
            }
        }
    }
}

pub fn roe_cfl_dt(config: &RoeConfig, norms: &VelocityNorms, model: &CongestionModel, grid: &Grid) -> Result<f64> {
    roe_cfl_bounds(config, norms, model).dt(grid.dx, grid.dy, config.cfl_safety)
}

#[derive(Debug, Clone)]
pub struct RoeScheme {
    pub config: RoeConfig,
    pub bounds: CflBounds,
}

impl RoeScheme {
    pub fn new(config: RoeConfig, norms: &VelocityNorms, model: &CongestionModel) -> Result<Self> {
        if !(config.epsilon >= 0.0 && config.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", config.epsilon)));
        }
        if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {}", config.cfl_safety)));
        }
        Ok(RoeScheme {
            config,
            bounds: roe_cfl_bounds(&config, norms, model),
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
        let flux = |v: f64, jv: f64, u: f64, w: f64, fu: f64, fw: f64| {
            roe_linear_flux(v, u, w) + jv * fu + jv.min(0.0) * (fw - fu)
        };
        split_step(field, j, vel, model, dt, self.config.y_sweep, flux, flux)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l1_norm, Grid};
    use crate::velocity::StaticField;

    fn atan() -> CongestionModel {
        CongestionModel::atan(50.0, 1.0).unwrap()
    }

    fn norms(v: f64) -> VelocityNorms {
        VelocityNorms { v1_sup: v, v2_sup: v, ..Default::default() }
    }

    #[test]
    fn linear_flux_upwinds() {
        assert!((roe_linear_flux(0.42, 2.0, 5.0) - 0.84).abs() < 1e-15);
        assert!((roe_linear_flux(-0.42, 2.0, 5.0) + 2.1).abs() < 1e-15);
        for v in [-0.3, 0.0, 0.7] {
            assert_eq!(roe_linear_flux(v, 1.5, 1.5), v * 1.5);
        }
    }

    #[test]
    fn nonlocal_flux_upwinds() {
        let m = atan();
        assert_eq!(roe_nonlocal_flux(0.9, 1.2, 0.3, &m), 0.3 * m.f(0.9));
        assert!((roe_nonlocal_flux(0.9, 1.2, -0.3, &m) + 0.3 * m.f(1.2)).abs() < 1e-15);
        let s = CongestionModel::spline(0.5, 1.6, 1.0).unwrap();
        for j in [-0.8, 0.0, 0.8] {
            assert_eq!(roe_nonlocal_flux(0.4, 0.4, j, &s), 0.0);
        }
    }

    #[test]
    fn table_time_steps() {
        let dx = Grid::new(10, 10, 0.01, 0.01, 0.0, 0.0).unwrap();
        let cfg = RoeConfig::new(0.83);
        let dt = roe_cfl_dt(&cfg, &norms(0.42), &atan(), &dx).unwrap();
        assert!((dt / 2.37e-4 - 1.0).abs() < 0.02, "{dt}");
        let spline = CongestionModel::spline(0.5, 1.6, 1.0).unwrap();
        let dt = roe_cfl_dt(&cfg, &norms(0.42), &spline, &dx).unwrap();
        assert!((dt / 1.63e-3 - 1.0).abs() < 0.06, "{dt}");
    }

    #[test]
    fn positivity_step_without_collisions() {
        let g = Grid::new(10, 10, 0.01, 0.02, 0.0, 0.0).unwrap();
        let cfg = RoeConfig { cfl_mode: CflMode::Positivity, cfl_safety: 0.5, ..RoeConfig::new(0.0) };
        let dt = roe_cfl_dt(&cfg, &norms(0.5), &atan(), &g).unwrap();
        assert!((dt - 0.5 * 0.01 / (2.0 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn constant_state_is_preserved_away_from_walls() {
        let g = Grid::new(12, 8, 0.01, 0.01, 0.0, 0.0).unwrap();
        let field = DensityField::constant(g, 0.7);
        let vf = StaticField::Uniform { v1: 0.42, v2: 0.0 };
        let vel = vf.sample(&g);
        let m = atan();
        let scheme = RoeScheme::new(RoeConfig::new(0.0), &norms(0.42), &m).unwrap();
        let j = InterfaceVelocities::zeros(g.nx, g.ny, 0.0);
        let dt = roe_cfl_dt(&scheme.config, &norms(0.42), &m, &g).unwrap();
        let out = scheme.step(&field, &j, &vel, &m, dt).unwrap();
        for jj in 0..g.ny {
            for i in 1..g.nx - 1 {
                assert_eq!(out.full.get(i, jj), 0.7);
            }
        }
        assert!((l1_norm(&out.full) - l1_norm(&field)).abs() < 1e-14);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = Grid::new(12, 8, 0.01, 0.01, 0.0, 0.0).unwrap();
        let m = atan();
        let scheme = RoeScheme::new(RoeConfig::new(0.83), &norms(0.42), &m).unwrap();
        let field = DensityField::zeros(g);
        let vel = StaticField::Uniform { v1: 0.42, v2: 0.0 }.sample(&g);
        let j = InterfaceVelocities::zeros(g.nx, g.ny, 0.83);
        let err = scheme.step(&field, &j, &vel, &m, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Cfl { direction: "x", .. }));
        assert!(err.to_string().contains("Roe BV"));
    }

    #[test]
    fn shape_mismatch_is_a_contract_error() {
        let g = Grid::new(12, 8, 0.01, 0.01, 0.0, 0.0).unwrap();
        let m = atan();
        let scheme = RoeScheme::new(RoeConfig::new(0.83), &norms(0.42), &m).unwrap();
        let vel = StaticField::Uniform { v1: 0.42, v2: 0.0 }.sample(&g);
        let j = InterfaceVelocities::zeros(6, 8, 0.83);
        let r = scheme.step(&DensityField::zeros(g), &j, &vel, &m, 1e-5);
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
