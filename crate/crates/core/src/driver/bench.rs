//! Reference setups used by the experiments and the acceptance suite.

use crate::congestion::{CongestionModel, HeavisideKind};
use crate::error::Result;
use crate::grid::Grid;
use crate::lxf::{lxf_cfl_dt, LxfConfig};
use crate::roe::{roe_cfl_dt, RoeConfig};
use crate::scheme::SchemeKind;
use crate::velocity::{field_norms, DiverterParams, Rect, StaticField};

use super::config::{Bump, FieldSpec, InitialSpec, RunConfig};
use super::run::Setup;

pub const BELT_SPEED: f64 = 0.42;
pub const COLLISION_EPSILON: f64 = 0.83;

/// Diverter hanging from the far belt edge at 45 degrees.
pub fn diverter(height: f64) -> DiverterParams {
    DiverterParams::from_angle(BELT_SPEED, (0.30, height), 45.0, 0.30, 0.03)
}

/// A 4 x 7 block of overlapping bumps upstream of the diverter, the top
/// row running along the belt border.
pub fn upstream_parts() -> Vec<Bump> {
    let mut v = Vec::new();
    for j in 0..7 {
        for i in 0..4 {
            let (x, y) = (0.05 + 0.05 * i as f64, 0.62 - 0.05 * j as f64);
            v.push(Bump { x, y, mass: 1.0, width: 0.025 });
        }
    }
    v
}

fn base(width: f64, dx: f64, scheme: SchemeKind, t_end: f64) -> RunConfig {
    RunConfig {
        domain: Rect { x0: 0.0, y0: 0.0, x1: width, y1: 0.64 },
        dx,
        dy: dx,
        scheme,
        epsilon: COLLISION_EPSILON,
        heaviside: HeavisideKind::Atan { slope: 50.0 },
        field: FieldSpec::Diverter(diverter(0.64)),
        initial: InitialSpec {
            bumps: upstream_parts(),
            normalize: true,
            ..Default::default()
        },
        t_end,
        x_d: Some(0.52),
        ..Default::default()
    }
}

/// Square belt section with the diverter, run for half a second.
pub fn congestion_benchmark(dx: f64, scheme: SchemeKind) -> RunConfig {
    base(0.64, dx, scheme, 0.5)
}

/// Long belt section on which the redirected parts leave the diverter. The
/// downstream wall is far enough away that diffused mass does not pile up
/// against it before `t_end`.
pub fn diverter_benchmark(dx: f64, scheme: SchemeKind) -> RunConfig {
    base(1.92, dx, scheme, 1.5)
}

/// Collision-free transport of one bump past `x_d = 0.48`.
pub fn advection_control(dx: f64) -> RunConfig {
    RunConfig {
        domain: Rect { x0: 0.0, y0: 0.0, x1: 1.28, y1: 0.64 },
        dx,
        dy: dx,
        epsilon: 0.0,
        field: FieldSpec::Uniform { v1: BELT_SPEED, v2: 0.0 },
        initial: InitialSpec {
            bumps: vec![Bump { x: 0.30, y: 0.32, mass: 1.0, width: 0.06 }],
            normalize: true,
            ..Default::default()
        },
        t_end: 1.0,
        x_d: Some(0.48),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflRow {
    pub scheme: SchemeKind,
    pub heaviside: &'static str,
    pub lipschitz: f64,
    pub dt: f64,
}

/// Time steps of both schemes with both Heaviside approximations, using
/// the grid, field and `epsilon` of `config`.
pub fn cfl_table(config: &RunConfig) -> Result<Vec<CflRow>> {
    let grid: Grid = config.grid()?;
    let setup_field = match &config.field {
        FieldSpec::Uniform { v1, v2 } => StaticField::Uniform { v1: *v1, v2: *v2 },
        _ => Setup::new(&RunConfig { initial: InitialSpec::default(), ..config.clone() })?.field,
    };
    let norms = field_norms(&setup_field, Rect::of_grid(&grid), config.norm_samples)?;
    let models = [
        ("atan", CongestionModel::new(HeavisideKind::Atan { slope: 50.0 }, config.rho_max)?),
        ("poly", CongestionModel::new(HeavisideKind::Spline { d_l: 0.5, d_r: 1.6 }, config.rho_max)?),
    ];
    let mut rows = Vec::new();
    for (name, m) in &models {
        let rc = RoeConfig { cfl_mode: config.cfl_mode, cfl_safety: config.cfl_safety, ..RoeConfig::new(config.epsilon) };
        rows.push(CflRow {
            scheme: SchemeKind::Roe,
            heaviside: name,
            lipschitz: m.lipschitz_constant(),
            dt: roe_cfl_dt(&rc, &norms, m, &grid)?,
        });
        let lc = LxfConfig { cfl_safety: config.cfl_safety, ..LxfConfig::new(config.epsilon) };
        rows.push(CflRow {
            scheme: SchemeKind::Lxf,
            heaviside: name,
            lipschitz: m.lipschitz_constant(),
            dt: lxf_cfl_dt(&lc, &norms, m, &grid)?.dt,
        });
    }
    Ok(rows)
}
