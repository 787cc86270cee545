use std::fmt::Write as _;

use crate::diagnostics::{bounds::stability_coefficient, theoretical_bounds};
use crate::error::{Error, Result};
use crate::grid::{l1_distance, l1_norm, DensityField, Grid};
use crate::scheme::SchemeKind;

use super::config::RunConfig;
use super::run::{run_setup, RunReport, SeriesPoint, Setup};

/// Output grid `0, h, 2h, ...` closed by `t_end`.
pub fn output_times(t_end: f64, every: f64) -> Vec<f64> {
    let n = (t_end / every + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * every).filter(|&t| t <= t_end).collect();
    if t_end - t[t.len() - 1] > 1e-9 * every {
        t.push(t_end);
    }
    t
}

/// Piecewise linear interpolation of `field` of a time series.
pub fn interpolate(series: &[SeriesPoint], field: impl Fn(&SeriesPoint) -> f64, t: f64) -> f64 {
    let k = series.partition_point(|p| p.t < t);
    if k == 0 {
        return field(&series[0]);
    }
    if k == series.len() {
        return field(&series[series.len() - 1]);
    }
    let (a, b) = (&series[k - 1], &series[k]);
    let w = (t - a.t) / (b.t - a.t);
    (1.0 - w) * field(a) + w * field(b)
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Averages `fine` onto the coarser grid `coarse`, which must nest it.
pub fn restrict(fine: &DensityField, coarse: Grid) -> Result<DensityField> {
    let g = fine.grid;
    let rx = (coarse.dx / g.dx).round() as usize;
    let ry = (coarse.dy / g.dy).round() as usize;
    if rx == 0 || ry == 0 || coarse.nx * rx != g.nx || coarse.ny * ry != g.ny {
        return Err(Error::Config(format!(
            "a {}x{} grid does not nest a {}x{} grid",
            coarse.nx, coarse.ny, g.nx, g.ny
        )));
    }
    let mut out = DensityField::zeros(coarse);
    out.time = fine.time;
    let w = 1.0 / (rx * ry) as f64;
    for j in 0..coarse.ny {
        for i in 0..coarse.nx {
            let mut acc = 0.0;
            for b in 0..ry {
                for a in 0..rx {
                    acc += fine.get(i * rx + a, j * ry + b);
                }
            }
            out.set(i, j, acc * w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub dx: f64,
    pub u_l1: f64,
    pub u_l2: f64,
    pub u_linf: f64,
    /// `||rho - R rho_fine||_L1` at `t_end`, `R` the cell-average restriction.
    pub field_l1: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub finest: f64,
    pub times: Vec<f64>,
    pub u_rho: Vec<Vec<f64>>,
    pub errors: Vec<LevelError>,
    /// Empirical orders of `u_l1` between consecutive levels.
    pub u_orders: Vec<f64>,
    /// Empirical orders of `field_l1` between consecutive levels.
    pub field_orders: Vec<f64>,
}

fn order(e0: f64, e1: f64, ratio: f64) -> f64 {
    if e0 > 0.0 && e1 > 0.0 && ratio > 1.0 {
        (e0 / e1).ln() / ratio.ln()
    } else {
        f64::NAN
    }
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dx,steps,u_l1,u_l2,u_linf,field_l1,u_order,field_order\n");
        for (k, e) in self.errors.iter().enumerate() {
            let (uo, fo) = if k == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (self.u_orders[k - 1], self.field_orders[k - 1])
            };
            let _ = writeln!(
                s,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.dx, e.steps, e.u_l1, e.u_l2, e.u_linf, e.field_l1, uo, fo
            );
        }
        s
    }

    pub fn u_series_csv(&self, levels: &[f64]) -> String {
        let mut s = String::from("t");
        for l in levels {
            let _ = write!(s, ",u_rho_{l}");
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:.16e}");
            for u in &self.u_rho {
                let _ = write!(s, ",{:.16e}", u[k]);
            }
            s.push('\n');
        }
        s
    }
}

/// Self-convergence of `U_rho` against the finest of `levels`.
///
/// Levels are listed coarse to fine; each must be the previous one halved,
/// or repeated.
pub fn convergence_study(config: &RunConfig, levels: &[f64]) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 levels, got {}", levels.len())));
    }
    for w in levels.windows(2) {
        let r = w[0] / w[1];
        if !((r - 2.0).abs() < 1e-9 || (r - 1.0).abs() < 1e-12) {
            return Err(Error::Config(format!("levels {} and {} are not nested by halving", w[0], w[1])));
        }
    }
    let mut runs: Vec<(Setup, RunReport)> = Vec::with_capacity(levels.len());
    for &dx in levels {
        let mut c = config.clone();
        c.dx = dx;
        c.dy = dx;
        c.out_dir = None;
        c.diagnostics.entropy = false;
        c.diagnostics.appendix = false;
        c.diagnostics.snapshots = false;
        let setup = Setup::new(&c)?;
        let report = run_setup(&setup, None)?;
        runs.push((setup, report));
    }
    let times = output_times(config.t_end, config.output_every);
    let u_rho: Vec<Vec<f64>> = runs
        .iter()
        .map(|(_, r)| times.iter().map(|&t| interpolate(&r.series, |p| p.u_rho, t)).collect())
        .collect();
    let finest = &u_rho[u_rho.len() - 1];
    let fine_state = &runs[runs.len() - 1].1.final_state;
    let mut errors = Vec::new();
    for (k, (setup, report)) in runs.iter().enumerate().take(runs.len() - 1) {
        let e: Vec<f64> = u_rho[k].iter().zip(finest).map(|(a, b)| (a - b).abs()).collect();
        let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
        let projected = restrict(fine_state, setup.grid)?;
        errors.push(LevelError {
            dx: levels[k],
            u_l1: trapezoid(&times, &e),
            u_l2: trapezoid(&times, &e2).sqrt(),
            u_linf: e.iter().cloned().fold(0.0, f64::max),
            field_l1: l1_distance(&report.final_state, &projected)?,
            steps: report.steps,
        });
    }
    let u_orders = errors.windows(2).map(|w| order(w[0].u_l1, w[1].u_l1, w[0].dx / w[1].dx)).collect();
    let field_orders = errors.windows(2).map(|w| order(w[0].field_l1, w[1].field_l1, w[0].dx / w[1].dx)).collect();
    Ok(ConvergenceTable {
        finest: levels[levels.len() - 1],
        times,
        u_rho,
        errors,
        u_orders,
        field_orders,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub roe: RunReport,
    pub lxf: RunReport,
    pub times: Vec<f64>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,u_rho_roe,u_rho_lxf,linf_roe,linf_lxf\n");
        for &t in &self.times {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                interpolate(&self.roe.series, |p| p.u_rho, t),
                interpolate(&self.lxf.series, |p| p.u_rho, t),
                interpolate(&self.roe.series, |p| p.linf, t),
                interpolate(&self.lxf.series, |p| p.linf, t),
            );
        }
        s
    }
}

/// Both schemes on identical data, each with its own time step.
pub fn compare_schemes(config: &RunConfig) -> Result<Comparison> {
    let run = |kind: SchemeKind| -> Result<RunReport> {
        let mut c = config.clone();
        c.scheme = kind;
        let dir = config.out_dir.as_ref().map(|d| d.join(kind.as_str()));
        let setup = Setup::new(&c)?;
        run_setup(&setup, dir.as_deref())
    };
    let cmp = Comparison {
        roe: run(SchemeKind::Roe)?,
        lxf: run(SchemeKind::Lxf)?,
        times: output_times(config.t_end, config.output_every),
    };
    if let Some(dir) = &config.out_dir {
        let p = dir.join("comparison.csv");
        std::fs::write(&p, cmp.to_csv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(cmp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub t: f64,
    pub l1_distance: f64,
    pub bound: f64,
    pub a_t: f64,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.l1_distance <= self.bound + crate::diagnostics::ABS_TOL + crate::diagnostics::REL_TOL * self.bound
    }
}

/// Runs `rho0` and `sigma0` side by side with the same time step and
/// records their L1 distance against the Lipschitz-dependence bound.
pub fn stability_experiment(config: &RunConfig, rho0: DensityField, sigma0: DensityField) -> Result<Vec<StabilityReport>> {
    rho0.ensure_same_grid(&sigma0)?;
    let a = Setup::with_initial(config, rho0)?;
    let b = Setup::with_initial(config, sigma0)?;
    let inputs = a.bound_inputs();
    let sigma_mass = l1_norm(&b.initial);
    let d0 = l1_distance(&a.initial, &b.initial)?;
    let kind = a.scheme.kind();
    let report = |t: f64, d: f64| {
        let cx = theoretical_bounds(&inputs, t, kind).cx;
        let a_t = stability_coefficient(&inputs, sigma_mass, cx);
        let growth = t * a_t;
        // 0 * inf is taken as 0: identical data stay identical.
        let bound = if d0 == 0.0 { 0.0 } else { d0 * growth.exp() };
        StabilityReport { t, l1_distance: d, bound, a_t }
    };
    let mut out = vec![report(0.0, d0)];
    let (mut sa, mut sb) = (a.simulation(), b.simulation());
    let every = config.output_every;
    let mut next = 1usize;
    loop {
        let (ra, rb) = (sa.step()?, sb.step()?);
        if ra.is_none() || rb.is_none() {
            break;
        }
        let t = sa.state.time;
        if t >= next as f64 * every - 1e-9 * every || sa.finished() {
            out.push(report(t, l1_distance(&sa.state, &sb.state)?));
            while next as f64 * every <= t + 1e-9 * every {
                next += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_grid_is_closed_by_t_end() {
        assert_eq!(output_times(0.2, 0.05).len(), 5);
        let t = output_times(0.12, 0.05);
        assert_eq!(t.len(), 4);
        assert_eq!(t[3], 0.12);
    }

    #[test]
    fn restriction_preserves_mass() {
        let fine = Grid::new(8, 4, 0.5, 0.5, 0.0, 0.0).unwrap();
        let coarse = Grid::new(4, 2, 1.0, 1.0, 0.0, 0.0).unwrap();
        let f = DensityField::from_fn(fine, |x, y| x * x + y);
        let r = restrict(&f, coarse).unwrap();
        assert!((l1_norm(&r) - l1_norm(&f)).abs() < 1e-12);
        assert!(restrict(&f, Grid::new(3, 2, 1.0, 1.0, 0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn interpolation_is_linear() {
        let s = [
            SeriesPoint { t: 0.0, u_rho: 1.0, linf: 0.0 },
            SeriesPoint { t: 1.0, u_rho: 0.0, linf: 2.0 },
        ];
        assert_eq!(interpolate(&s, |p| p.u_rho, 0.25), 0.75);
        assert_eq!(interpolate(&s, |p| p.linf, 5.0), 2.0);
    }
}
