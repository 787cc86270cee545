use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::congestion::CongestionModel;
use crate::diagnostics::{
    appendix_checks, entropy_residual, margin, outflow_mass, region_mass, theoretical_bounds, BoundInputs,
};
use crate::error::{Error, Result};
use crate::grid::{discrete_tv, l1_distance, l1_norm, linf_norm, mass, project_initial_datum, read_snapshot, write_snapshot, DensityField, Grid, TimeGrid};
use crate::lxf::{LxfConfig, LxfScheme};
use crate::mollifier::{KernelNorms, MollifierSpec};
use crate::nonlocal::{InterfaceVelocities, NonlocalOperator};
use crate::roe::{RoeConfig, RoeScheme};
use crate::scheme::{Scheme, SchemeKind, StepOutput};
use crate::velocity::{field_norms, Rect, SampledVelocity, StaticField, TabulatedField, VelocityNorms};

use super::config::{FieldSpec, RunConfig};

pub const CSV_HEADER: &str = "t,mass,linf,tv,u_rho,entropy_resid,linf_margin,tv_margin";

/// Everything derived from a config before the first step.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub grid: Grid,
    pub model: CongestionModel,
    pub spec: MollifierSpec,
    pub kernel: KernelNorms,
    pub field: StaticField,
    pub norms: VelocityNorms,
    pub velocity: SampledVelocity,
    pub operator: NonlocalOperator,
    pub scheme: Scheme,
    pub time: TimeGrid,
    pub initial: DensityField,
}

fn static_field(spec: &FieldSpec, grid: &Grid) -> Result<StaticField> {
    match spec {
        FieldSpec::Uniform { v1, v2 } => Ok(StaticField::Uniform { v1: *v1, v2: *v2 }),
        FieldSpec::Diverter(p) => StaticField::conveyor_diverter(*p),
        FieldSpec::File { v1, v2 } => {
            let (a, b) = (read_snapshot(v1)?, read_snapshot(v2)?);
            if a.grid.nx != grid.nx || a.grid.ny != grid.ny {
                return Err(Error::Config(format!(
                    "tabulated field is {}x{}, the run grid is {}x{}",
                    a.grid.nx, a.grid.ny, grid.nx, grid.ny
                )));
            }
            Ok(StaticField::Tabulated(TabulatedField::new(&a, &b)?))
        }
    }
}

/// Initial cell averages described by `config`, normalised if requested.
pub fn initial_datum(config: &RunConfig, grid: Grid) -> Result<DensityField> {
    let ic = &config.initial;
    let mut rho = match &ic.file {
        Some(path) => {
            let f = read_snapshot(path)?;
            let g = f.grid;
            if g.nx != grid.nx || g.ny != grid.ny || !grid.same_spacing(g.dx, g.dy) {
                return Err(Error::Config(format!(
                    "initial.file is a {}x{} grid with spacing {} x {}, expected {}x{} with {} x {}",
                    g.nx, g.ny, g.dx, g.dy, grid.nx, grid.ny, grid.dx, grid.dy
                )));
            }
            if f.values.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidInput("initial.file contains negative densities".into()));
            }
            DensityField::from_values(grid, f.values, 0.0)?
        }
        None => project_initial_datum(|x, y| ic.eval(x, y), grid, ic.quad_order)?,
    };
    if ic.normalize {
        let peak = match ic.file {
            Some(_) => linf_norm(&rho),
            None => ic.peak(config.domain),
        };
        if peak > 0.0 {
            rho.scale(config.rho_max / peak);
        }
    }
    Ok(rho)
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let grid = config.grid()?;
        let initial = initial_datum(config, grid)?;
        Self::with_initial(config, initial)
    }

    pub fn with_initial(config: &RunConfig, initial: DensityField) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        if initial.grid != grid {
            return Err(Error::Contract("initial datum is not on the run grid".into()));
        }
        let model = config.model()?;
        let spec = config.mollifier()?;
        let field = static_field(&config.field, &grid)?;
        let norms = field_norms(&field, Rect::of_grid(&grid), config.norm_samples)?;
        let velocity = field.sample(&grid);
        let operator = NonlocalOperator::new(grid, spec, config.epsilon, config.convolution)?;
        let (scheme, dt) = match config.scheme {
            SchemeKind::Roe => {
                let rc = RoeConfig {
                    epsilon: config.epsilon,
                    cfl_mode: config.cfl_mode,
                    cfl_safety: config.cfl_safety,
                    y_sweep: config.y_sweep,
                };
                let s = RoeScheme::new(rc, &norms, &model)?;
                let dt = s.bounds.dt(grid.dx, grid.dy, config.cfl_safety)?;
                (Scheme::Roe(s), dt)
            }
            SchemeKind::Lxf => {
                let lc = LxfConfig {
                    epsilon: config.epsilon,
                    alpha: config.lxf_alpha,
                    beta: config.lxf_beta,
                    cfl_safety: config.cfl_safety,
                    y_sweep: config.y_sweep,
                };
                let s = LxfScheme::new(lc, &norms, &model, &grid)?;
                let dt = s.bounds.dt(grid.dx, grid.dy, config.cfl_safety)?;
                (Scheme::Lxf(s), dt)
            }
        };
        Ok(Setup {
            config: config.clone(),
            grid,
            kernel: spec.sup_norms(),
            model,
            spec,
            field,
            norms,
            velocity,
            operator,
            scheme,
            time: TimeGrid::new(dt, config.t_end)?,
            initial,
        })
    }

    pub fn bound_inputs(&self) -> BoundInputs {
        BoundInputs {
            epsilon: self.config.epsilon,
            lipschitz: self.model.lipschitz_constant(),
            kernel: self.kernel,
            velocity: self.norms,
            mass0: l1_norm(&self.initial),
            linf0: linf_norm(&self.initial),
            tv0: discrete_tv(&self.initial),
        }
    }

    pub fn simulation(&self) -> Simulation<'_> {
        Simulation {
            setup: self,
            state: self.initial.clone(),
            steps_done: 0,
        }
    }
}

/// Data of one completed step, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub index: usize,
    pub dt: f64,
    pub prev: DensityField,
    pub j: InterfaceVelocities,
    pub out: StepOutput,
    pub convolution_secs: f64,
    pub sweep_secs: f64,
}

/// Time loop over a [`Setup`].
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub setup: &'a Setup,
    pub state: DensityField,
    pub steps_done: usize,
}

impl Simulation<'_> {
    pub fn finished(&self) -> bool {
        self.steps_done >= self.setup.time.total_steps()
    }

    /// Advances one step; `None` once `t_end` has been reached.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        if self.finished() {
            return Ok(None);
        }
        let s = self.setup;
        let n = self.steps_done;
        let dt = if n < s.time.n_steps { s.time.dt } else { s.time.remainder() };
        let t0 = Instant::now();
        let j = s.operator.evaluate(&self.state, n)?;
        let t1 = Instant::now();
        let mut out = s.scheme.step(&self.state, &j, &s.velocity, &s.model, dt)?;
        let t2 = Instant::now();
        if out.full.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: n });
        }
        let time = s.time.time_at(n + 1);
        out.half.time = time;
        out.full.time = time;
        let prev = std::mem::replace(&mut self.state, out.full.clone());
        self.steps_done += 1;
        Ok(Some(StepRecord {
            index: n,
            dt,
            prev,
            j,
            out,
            convolution_secs: (t1 - t0).as_secs_f64(),
            sweep_secs: (t2 - t1).as_secs_f64(),
        }))
    }
}

/// One row of the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub linf: f64,
    pub tv: f64,
    pub u_rho: f64,
    pub entropy_resid: f64,
    pub linf_margin: f64,
    pub tv_margin: f64,
}

/// Bound checks accumulated since the previous output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub time: f64,
    pub mass_drift: f64,
    pub linf_margin: f64,
    pub tv_margin: f64,
    pub time_continuity_margin: f64,
    pub entropy_max_positive_residual: f64,
    pub appendix_max_violation: f64,
}

impl BoundReport {
    fn fresh(time: f64) -> Self {
        BoundReport {
            time,
            mass_drift: 0.0,
            linf_margin: f64::INFINITY,
            tv_margin: f64::INFINITY,
            time_continuity_margin: f64::INFINITY,
            entropy_max_positive_residual: 0.0,
            appendix_max_violation: 0.0,
        }
    }

    fn merge(&mut self, o: &BoundReport) {
        self.time = self.time.max(o.time);
        self.mass_drift = self.mass_drift.max(o.mass_drift);
        self.linf_margin = self.linf_margin.min(o.linf_margin);
        self.tv_margin = self.tv_margin.min(o.tv_margin);
        self.time_continuity_margin = self.time_continuity_margin.min(o.time_continuity_margin);
        self.entropy_max_positive_residual = self.entropy_max_positive_residual.max(o.entropy_max_positive_residual);
        self.appendix_max_violation = self.appendix_max_violation.max(o.appendix_max_violation);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub convolution: f64,
    pub sweeps: f64,
    pub diagnostics: f64,
    pub output: f64,
}

/// `U_rho` and `||rho||_inf` after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub u_rho: f64,
    pub linf: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub steps: usize,
    pub rows: Vec<DiagnosticsRow>,
    pub bounds: Vec<BoundReport>,
    /// Worst values over the whole run.
    pub worst: BoundReport,
    pub series: Vec<SeriesPoint>,
    pub snapshots: Vec<(f64, Option<PathBuf>)>,
    pub timings: Timings,
    pub final_state: DensityField,
}

/// Runs the configured simulation, writing outputs if `config.out_dir` is set.
pub fn advance(config: &RunConfig) -> Result<RunReport> {
    let setup = Setup::new(config)?;
    run_setup(&setup, config.out_dir.as_deref())
}

struct Recorder<'a> {
    setup: &'a Setup,
    inputs: BoundInputs,
    x_d: f64,
    region0: f64,
    pending: BoundReport,
    worst: BoundReport,
}

impl Recorder<'_> {
    fn u_rho(&self, f: &DensityField) -> f64 {
        if self.region0 > 0.0 {
            outflow_mass(f, self.x_d, self.region0).unwrap_or(0.0)
        } else {
            0.0
        }
    }

    fn mass_drift(&self, f: &DensityField) -> f64 {
        let m = mass(f);
        let m0 = self.inputs.mass0;
        if m0 > 0.0 {
            (m - m0).abs() / m0
        } else {
            m.abs()
        }
    }

    fn state_margins(&self, f: &DensityField) -> (f64, f64) {
        let b = theoretical_bounds(&self.inputs, f.time, self.setup.scheme.kind());
        (
            margin(b.linf_bound(self.inputs.linf0, f.time), linf_norm(f)),
            margin(b.cx, discrete_tv(f)),
        )
    }

    fn observe_step(&mut self, rec: &StepRecord) -> Result<()> {
        let s = self.setup;
        let d = &s.config.diagnostics;
        let state = &rec.out.full;
        let mut r = BoundReport::fresh(state.time);
        r.mass_drift = self.mass_drift(state);
        if d.bounds {
            let (lm, tm) = self.state_margins(state);
            r.linf_margin = lm;
            r.tv_margin = tm;
            let ct = theoretical_bounds(&self.inputs, rec.prev.time, s.scheme.kind()).ct;
            let diff = l1_distance(state, &rec.prev)?;
            r.time_continuity_margin = margin(2.0 * rec.dt * ct, diff);
        }
        if d.entropy {
            for &k in &d.kappas {
                let e = entropy_residual(&s.scheme, &s.model, &rec.prev, &rec.out, &rec.j, &s.velocity, rec.dt, k)?;
                r.entropy_max_positive_residual = r.entropy_max_positive_residual.max(e.max(0.0));
            }
        }
        self.pending.merge(&r);
        self.worst.merge(&r);
        Ok(())
    }

    fn observe_appendix(&mut self, rec: &StepRecord) {
        let g = self.setup.grid;
        let v = appendix_checks(&rec.j, &self.setup.kernel, l1_norm(&rec.prev), g.dx, g.dy).max();
        self.pending.appendix_max_violation = self.pending.appendix_max_violation.max(v);
        self.worst.appendix_max_violation = self.worst.appendix_max_violation.max(v);
    }

    fn row(&mut self, f: &DensityField) -> (DiagnosticsRow, BoundReport) {
        let mut b = std::mem::replace(&mut self.pending, BoundReport::fresh(f.time));
        b.time = f.time;
        if !self.setup.config.diagnostics.bounds {
            b.linf_margin = f64::NAN;
            b.tv_margin = f64::NAN;
            b.time_continuity_margin = f64::NAN;
        }
        let row = DiagnosticsRow {
            t: f.time,
            mass: mass(f),
            linf: linf_norm(f),
            tv: discrete_tv(f),
            u_rho: self.u_rho(f),
            entropy_resid: if self.setup.config.diagnostics.entropy {
                b.entropy_max_positive_residual
            } else {
                f64::NAN
            },
            linf_margin: b.linf_margin,
            tv_margin: b.tv_margin,
        };
        (row, b)
    }
}

fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}.txt")
}

/// Drives `setup` to `t_end`, recording diagnostics at output times.
pub fn run_setup(setup: &Setup, out_dir: Option<&Path>) -> Result<RunReport> {
    let cfg = &setup.config;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let x_d = cfg.outflow_x();
    let mut rec = Recorder {
        setup,
        inputs: setup.bound_inputs(),
        x_d,
        region0: region_mass(&setup.initial, x_d),
        pending: BoundReport::fresh(0.0),
        worst: BoundReport::fresh(0.0),
    };
    let mut timings = Timings::default();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut snapshots = Vec::new();
    let mut series = Vec::new();

    let emit = |f: &DensityField,
                    rec: &mut Recorder,
                    rows: &mut Vec<DiagnosticsRow>,
                    bounds: &mut Vec<BoundReport>,
                    snapshots: &mut Vec<(f64, Option<PathBuf>)>,
                    timings: &mut Timings|
     -> Result<()> {
        let (row, b) = rec.row(f);
        rows.push(row);
        bounds.push(b);
        let t = Instant::now();
        let path = match out_dir {
            Some(dir) if cfg.diagnostics.snapshots => {
                let p = dir.join(snapshot_name(snapshots.len()));
                write_snapshot(&p, f)?;
                Some(p)
            }
            _ => None,
        };
        snapshots.push((f.time, path));
        timings.output += t.elapsed().as_secs_f64();
        Ok(())
    };

    let t = Instant::now();
    let f0 = &setup.initial;
    rec.pending.mass_drift = 0.0;
    if cfg.diagnostics.bounds {
        let (lm, tm) = rec.state_margins(f0);
        rec.pending.linf_margin = lm;
        rec.pending.tv_margin = tm;
        rec.worst.linf_margin = lm;
        rec.worst.tv_margin = tm;
    }
    series.push(SeriesPoint { t: 0.0, u_rho: rec.u_rho(f0), linf: linf_norm(f0) });
    timings.diagnostics += t.elapsed().as_secs_f64();
    emit(f0, &mut rec, &mut rows, &mut bounds, &mut snapshots, &mut timings)?;

    let mut next_output = 1usize;
    let mut sim = setup.simulation();
    while let Some(step) = sim.step()? {
        timings.convolution += step.convolution_secs;
        timings.sweeps += step.sweep_secs;
        let t = Instant::now();
        rec.observe_step(&step)?;
        let state = &step.out.full;
        series.push(SeriesPoint { t: state.time, u_rho: rec.u_rho(state), linf: linf_norm(state) });
        let due = state.time >= next_output as f64 * cfg.output_every - 1e-9 * cfg.output_every || sim.finished();
        if due && cfg.diagnostics.appendix {
            rec.observe_appendix(&step);
        }
        timings.diagnostics += t.elapsed().as_secs_f64();
        if due {
            emit(state, &mut rec, &mut rows, &mut bounds, &mut snapshots, &mut timings)?;
            while next_output as f64 * cfg.output_every <= state.time + 1e-9 * cfg.output_every {
                next_output += 1;
            }
        }
    }

    let report = RunReport {
        scheme: setup.scheme.kind(),
        dt: setup.time.dt,
        steps: sim.steps_done,
        rows,
        bounds,
        worst: rec.worst,
        series,
        snapshots,
        timings,
        final_state: sim.state,
    };
    if let Some(dir) = out_dir {
        write_outputs(dir, setup, &report)?;
    }
    Ok(report)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let cells = [r.t, r.mass, r.linf, r.tv, r.u_rho, r.entropy_resid, r.linf_margin, r.tv_margin];
        let cells: Vec<String> = cells.iter().map(|&v| num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Resolved parameters, derived constants and the output index.
pub fn manifest(setup: &Setup, report: &RunReport) -> String {
    let mut s = String::new();
    let g = setup.grid;
    let inputs = setup.bound_inputs();
    let b0 = theoretical_bounds(&inputs, 0.0, setup.scheme.kind());
    let bt = theoretical_bounds(&inputs, setup.config.t_end, setup.scheme.kind());
    let cfl = setup.scheme.bounds();
    s.push_str("# resolved configuration\n");
    s.push_str(&setup.config.to_text());
    s.push_str("# derived\n");
    let _ = writeln!(s, "nx = {}\nny = {}", g.nx, g.ny);
    let _ = writeln!(s, "lipschitz = {}", num(setup.model.lipschitz_constant()));
    let _ = writeln!(s, "lipschitz_at = {}", num(setup.model.lipschitz_argmax()));
    let _ = writeln!(s, "dt = {}", num(setup.time.dt));
    let _ = writeln!(s, "n_steps = {}", setup.time.n_steps);
    let _ = writeln!(s, "final_step = {}", num(setup.time.remainder()));
    let _ = writeln!(s, "cfl_rule = {}", cfl.rule);
    let _ = writeln!(s, "lambda_x_max = {}\nlambda_y_max = {}", num(cfl.lambda_x), num(cfl.lambda_y));
    if let Scheme::Lxf(l) = &setup.scheme {
        let _ = writeln!(s, "alpha = {}\nbeta = {}", num(l.alpha), num(l.beta));
    }
    let k = setup.kernel;
    let _ = writeln!(
        s,
        "kernel.grad_sup = {}\nkernel.hess_sup = {}\nkernel.third_sup = {}\nkernel.laplacian_sup = {}\nkernel.grad_l1 = {}",
        num(k.grad_sup),
        num(k.hess_sup),
        num(k.third_sup),
        num(k.laplacian_sup),
        num(k.grad_l1)
    );
    let v = setup.norms;
    let _ = writeln!(
        s,
        "velocity.speed_sup = {}\nvelocity.grad_sup = {}\nvelocity.hess_sup = {}",
        num(v.speed_sup()),
        num(v.grad_sup()),
        num(v.hess_sup())
    );
    let _ = writeln!(s, "mass0 = {}\nlinf0 = {}\ntv0 = {}", num(inputs.mass0), num(inputs.linf0), num(inputs.tv0));
    let _ = writeln!(s, "outflow.x = {}", num(setup.config.outflow_x()));
    let _ = writeln!(s, "bounds.c_inf = {}\nbounds.k1 = {}\nbounds.k2 = {}", num(b0.c_inf), num(b0.k1), num(b0.k2));
    let _ = writeln!(s, "bounds.cx_t_end = {}\nbounds.ct_t_end = {}", num(bt.cx), num(bt.ct));
    let _ = writeln!(s, "steps_taken = {}", report.steps);
    let w = report.worst;
    let _ = writeln!(
        s,
        "worst.mass_drift = {}\nworst.linf_margin = {}\nworst.tv_margin = {}\nworst.time_continuity_margin = {}\nworst.entropy_residual = {}\nworst.appendix_ratio = {}",
        num(w.mass_drift),
        num(w.linf_margin),
        num(w.tv_margin),
        num(w.time_continuity_margin),
        num(w.entropy_max_positive_residual),
        num(w.appendix_max_violation)
    );
    let t = report.timings;
    let _ = writeln!(
        s,
        "timing.convolution = {:.3}\ntiming.sweeps = {:.3}\ntiming.diagnostics = {:.3}\ntiming.output = {:.3}",
        t.convolution, t.sweeps, t.diagnostics, t.output
    );
    for (t, p) in &report.snapshots {
        if let Some(p) = p {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(s, "snapshot = {} {}", num(*t), name);
        }
    }
    s
}

fn write_outputs(dir: &Path, setup: &Setup, report: &RunReport) -> Result<()> {
    let csv = dir.join("diagnostics.csv");
    fs::write(&csv, diagnostics_csv(&report.rows)).map_err(|e| Error::io(&csv, e))?;
    let bounds = dir.join("bounds.csv");
    let mut s = String::from("t,mass_drift,linf_margin,tv_margin,time_continuity_margin,entropy_resid,appendix_ratio\n");
    for b in &report.bounds {
        let cells = [
            b.time,
            b.mass_drift,
            b.linf_margin,
            b.tv_margin,
            b.time_continuity_margin,
            b.entropy_max_positive_residual,
            b.appendix_max_violation,
        ];
        let cells: Vec<String> = cells.iter().map(|&v| num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(&bounds, s).map_err(|e| Error::io(&bounds, e))?;
    let m = dir.join("manifest.txt");
    fs::write(&m, manifest(setup, report)).map_err(|e| Error::io(&m, e))
}
