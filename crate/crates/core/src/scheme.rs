//! Dimensional splitting shared by both schemes.

use rayon::prelude::*;

use crate::congestion::CongestionModel;
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::nonlocal::InterfaceVelocities;
use crate::velocity::SampledVelocity;

/// Which state supplies the y-sweep flux arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepState {
    /// `rho^n`, as the algorithm is printed.
    #[default]
    Previous,
    /// `rho^{n+1/2}`, the state the discrete entropy inequality is stated for.
    Intermediate,
}

impl SweepState {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "previous" => Ok(SweepState::Previous),
            "intermediate" => Ok(SweepState::Intermediate),
            _ => Err(Error::Config(format!(
                "y_sweep_state must be 'previous' or 'intermediate', got '{s}'"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepState::Previous => "previous",
            SweepState::Intermediate => "intermediate",
        }
    }
}

/// Largest admissible `dt / dx` and `dt / dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflBounds {
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub rule: &'static str,
}

impl CflBounds {
    /// `safety * min(lambda_x dx, lambda_y dy)`.
    pub fn dt(&self, dx: f64, dy: f64, safety: f64) -> Result<f64> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {safety}")));
        }
        let dt = safety * (self.lambda_x * dx).min(self.lambda_y * dy);
        if !dt.is_finite() {
            return Err(Error::Config(format!(
                "the {} condition gives no finite time step (every speed is zero)",
                self.rule
            )));
        }
        Ok(dt)
    }

    pub fn check(&self, dt: f64, dx: f64, dy: f64) -> Result<()> {
        let slack = 1.0 + 1e-12;
        let (lx, ly) = (dt / dx, dt / dy);
        if lx > self.lambda_x * slack {
            return Err(Error::Cfl { direction: "x", lambda: lx, bound: self.lambda_x, rule: self.rule });
        }
        if ly > self.lambda_y * slack {
            return Err(Error::Cfl { direction: "y", lambda: ly, bound: self.lambda_y, rule: self.rule });
        }
        Ok(())
    }
}

/// States produced by one split step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub half: DensityField,
    pub full: DensityField,
}

fn check_shapes(field: &DensityField, j: &InterfaceVelocities, vel: &SampledVelocity) -> Result<()> {
    let g = field.grid;
    if j.nx != g.nx || j.ny != g.ny || vel.nx != g.nx || vel.ny != g.ny {
        return Err(Error::Contract(format!(
            "interface data shaped for {}x{} / {}x{}, field is {}x{}",
            j.nx, j.ny, vel.nx, vel.ny, g.nx, g.ny
        )));
    }
    Ok(())
}

/// Numerical fluxes at every interior x-interface; walls carry zero flux.
/// `fv` holds `f(rho)` for every cell of `state`.
pub(crate) fn x_fluxes<F>(state: &DensityField, fv: &[f64], j: &InterfaceVelocities, vel: &SampledVelocity, flux: &F) -> Vec<f64>
where
    F: Fn(f64, f64, f64, f64, f64, f64) -> f64 + Sync,
{
    let g = state.grid;
    let w = g.nx + 1;
    let mut out = vec![0.0; w * g.ny];
    out.par_chunks_mut(w).enumerate().for_each(|(row, fl)| {
        let r = state.row(row);
        let f = &fv[row * g.nx..(row + 1) * g.nx];
        for i in 1..g.nx {
            fl[i] = flux(vel.v1(i, row), j.j1(i, row), r[i - 1], r[i], f[i - 1], f[i]);
        }
    });
    out
}

/// Numerical fluxes at every interior y-interface, row-major over `(J, i)`.
pub(crate) fn y_fluxes<F>(state: &DensityField, fv: &[f64], j: &InterfaceVelocities, vel: &SampledVelocity, flux: &F) -> Vec<f64>
where
    F: Fn(f64, f64, f64, f64, f64, f64) -> f64 + Sync,
{
    let g = state.grid;
    let mut out = vec![0.0; g.nx * (g.ny + 1)];
    out.par_chunks_mut(g.nx).enumerate().for_each(|(jj, fl)| {
        if jj == 0 || jj == g.ny {
            return;
        }
        let (below, above) = (state.row(jj - 1), state.row(jj));
        let (fb, fa) = (&fv[(jj - 1) * g.nx..jj * g.nx], &fv[jj * g.nx..(jj + 1) * g.nx]);
        for (i, f) in fl.iter_mut().enumerate() {
            *f = flux(vel.v2(i, jj), j.j2(i, jj), below[i], above[i], fb[i], fa[i]);
        }
    });
    out
}

fn congestion_values(state: &DensityField, model: &CongestionModel) -> Vec<f64> {
    let mut out = vec![0.0; state.values.len()];
    out.par_chunks_mut(state.grid.nx)
        .zip(state.values.par_chunks(state.grid.nx))
        .for_each(|(o, r)| o.iter_mut().zip(r).for_each(|(o, &u)| *o = model.f(u)));
    out
}

/// x-sweep then y-sweep with fluxes `fx`, `fy` of signature
/// `(v, J, u, w, f(u), f(w))`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn split_step<FX, FY>(
    field: &DensityField,
    j: &InterfaceVelocities,
    vel: &SampledVelocity,
    model: &CongestionModel,
    dt: f64,
    state: SweepState,
    fx: FX,
    fy: FY,
) -> Result<StepOutput>
where
    FX: Fn(f64, f64, f64, f64, f64, f64) -> f64 + Sync,
    FY: Fn(f64, f64, f64, f64, f64, f64) -> f64 + Sync,
{
    check_shapes(field, j, vel)?;
    let g = field.grid;
    let (lx, ly) = (dt / g.dx, dt / g.dy);

    let f_prev = congestion_values(field, model);
    let flx = x_fluxes(field, &f_prev, j, vel, &fx);
    let mut half = field.clone();
    half.values
        .par_chunks_mut(g.nx)
        .enumerate()
        .for_each(|(row, out)| {
            let f = &flx[row * (g.nx + 1)..(row + 1) * (g.nx + 1)];
            for (i, v) in out.iter_mut().enumerate() {
                *v -= lx * (f[i + 1] - f[i]);
            }
        });

    let fly = match state {
        SweepState::Previous => y_fluxes(field, &f_prev, j, vel, &fy),
        SweepState::Intermediate => y_fluxes(&half, &congestion_values(&half, model), j, vel, &fy),
    };
    let mut full = half.clone();
    full.values
        .par_chunks_mut(g.nx)
        .enumerate()
        .for_each(|(row, out)| {
            let lo = &fly[row * g.nx..(row + 1) * g.nx];
            let hi = &fly[(row + 1) * g.nx..(row + 2) * g.nx];
            for (i, v) in out.iter_mut().enumerate() {
                *v -= ly * (hi[i] - lo[i]);
            }
        });
    half.time = field.time + dt;
    full.time = field.time + dt;
    Ok(StepOutput { half, full })
}

/// Either scheme behind one interface.
#[derive(Debug, Clone)]
pub enum Scheme {
    Roe(crate::roe::RoeScheme),
    Lxf(crate::lxf::LxfScheme),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Roe,
    Lxf,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "roe" => Ok(SchemeKind::Roe),
            "lxf" => Ok(SchemeKind::Lxf),
            _ => Err(Error::Config(format!("scheme must be 'roe' or 'lxf', got '{s}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Roe => "roe",
            SchemeKind::Lxf => "lxf",
        }
    }
}

impl Scheme {
    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::Roe(_) => SchemeKind::Roe,
            Scheme::Lxf(_) => SchemeKind::Lxf,
        }
    }

    pub fn bounds(&self) -> CflBounds {
        match self {
            Scheme::Roe(s) => s.bounds,
            Scheme::Lxf(s) => s.bounds,
        }
    }

    pub fn sweep_state(&self) -> SweepState {
        match self {
            Scheme::Roe(s) => s.config.y_sweep,
            Scheme::Lxf(s) => s.config.y_sweep,
        }
    }

    /// Numerical flux of the x sweep (`y_axis = false`) or the y sweep.
    pub fn interface_flux(
        &self,
        y_axis: bool,
        v: f64,
        j: f64,
        u: f64,
        w: f64,
        model: &CongestionModel,
    ) -> f64 {
        match self {
            Scheme::Roe(_) => crate::roe::roe_flux(v, j, u, w, model),
            Scheme::Lxf(s) => {
                let visc = if y_axis { s.beta } else { s.alpha };
                crate::lxf::lxf_flux(v, j, u, w, visc, model)
            }
        }
    }

    pub fn step(
        &self,
        field: &DensityField,
        j: &InterfaceVelocities,
        vel: &SampledVelocity,
        model: &CongestionModel,
        dt: f64,
    ) -> Result<StepOutput> {
        match self {
            Scheme::Roe(s) => s.step(field, j, vel, model, dt),
            Scheme::Lxf(s) => s.step(field, j, vel, model, dt),
        }
    }
}
