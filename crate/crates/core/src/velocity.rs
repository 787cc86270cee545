//! Static belt velocity fields and sampled sup norms of their derivatives.

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`; C2 on the line.
#[inline]
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

/// A straight diverter from an attachment point to its free tip `(x_d, y_d)`.
///
/// Inside a strip of half-width `blend_width` around the segment the belt
/// velocity loses its component normal to the segment, so parts slide along
/// the diverter towards the tip. Outside the strip the field is `(v_t, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiverterParams {
    pub v_t: f64,
    pub start: (f64, f64),
    pub tip: (f64, f64),
    pub blend_width: f64,
}

impl DiverterParams {
    /// Diverter hanging from `start` at `theta_deg` below the belt direction.
    pub fn from_angle(v_t: f64, start: (f64, f64), theta_deg: f64, length: f64, blend_width: f64) -> Self {
        let th = theta_deg.to_radians();
        DiverterParams {
            v_t,
            start,
            tip: (start.0 + length * th.cos(), start.1 - length * th.sin()),
            blend_width,
        }
    }

    pub fn length(&self) -> f64 {
        (self.tip.0 - self.start.0).hypot(self.tip.1 - self.start.1)
    }

    /// Angle between the belt direction and the segment, in degrees.
    pub fn theta_deg(&self) -> f64 {
        (self.start.1 - self.tip.1).atan2(self.tip.0 - self.start.0).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiverterField {
    pub params: DiverterParams,
    dir: (f64, f64),
    normal: (f64, f64),
    len: f64,
}

impl DiverterField {
    pub fn new(params: DiverterParams) -> Result<Self> {
        let DiverterParams { v_t, blend_width, .. } = params;
        if !(v_t > 0.0 && v_t.is_finite()) {
            return Err(Error::Config(format!("belt speed must be positive, got {v_t}")));
        }
        if !(blend_width > 0.0 && blend_width.is_finite()) {
            return Err(Error::Config(format!("blend width must be positive, got {blend_width}")));
        }
        let len = params.length();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Config("diverter segment has zero length".into()));
        }
        let theta = params.theta_deg();
        if !(theta > 0.0 && theta < 90.0) {
            return Err(Error::Config(format!(
                "diverter angle must lie strictly between 0 and 90 degrees, got {theta}"
            )));
        }
        let dir = ((params.tip.0 - params.start.0) / len, (params.tip.1 - params.start.1) / len);
        Ok(DiverterField {
            params,
            dir,
            normal: (-dir.1, dir.0),
            len,
        })
    }

    pub fn direction(&self) -> (f64, f64) {
        self.dir
    }

    /// Blend weight: one on the segment core, zero outside the strip.
    pub fn weight(&self, x: f64, y: f64) -> f64 {
        let b = self.params.blend_width;
        let (rx, ry) = (x - self.params.start.0, y - self.params.start.1);
        let s = rx * self.dir.0 + ry * self.dir.1;
        let z = rx * self.normal.0 + ry * self.normal.1;
        let across = 1.0 - smoothstep(z.abs() / b);
        if across == 0.0 {
            return 0.0;
        }
        let along = smoothstep((s + b) / b) * smoothstep((self.len + b - s) / b);
        across * along
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let v = self.params.v_t;
        let w = self.weight(x, y);
        if w == 0.0 {
            return (v, 0.0);
        }
        let (n1, n2) = self.normal;
        let c = w * v * n1;
        (v - c * n1, -c * n2)
    }
}

/// Cell-centered samples turned into a C2 field: one discrete [1 4 1]/6
/// smoothing pass followed by cubic B-spline evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedField {
    pub grid: Grid,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl TabulatedField {
    pub fn new(v1: &DensityField, v2: &DensityField) -> Result<Self> {
        v1.ensure_same_grid(v2)?;
        let g = v1.grid;
        Ok(TabulatedField {
            grid: g,
            c1: smooth_pass(&g, &v1.values),
            c2: smooth_pass(&g, &v2.values),
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let g = &self.grid;
        let u = (x - g.x0) / g.dx - 0.5;
        let w = (y - g.y0) / g.dy - 0.5;
        let (iu, iw) = (u.floor() as i64, w.floor() as i64);
        let mut a = (0.0, 0.0);
        for dj in -1..=2 {
            let jj = (iw + dj).clamp(0, g.ny as i64 - 1) as usize;
            let by = bspline3(w - (iw + dj) as f64);
            for di in -1..=2 {
                let ii = (iu + di).clamp(0, g.nx as i64 - 1) as usize;
                let b = bspline3(u - (iu + di) as f64) * by;
                let k = g.index(ii, jj);
                a.0 += b * self.c1[k];
                a.1 += b * self.c2[k];
            }
        }
        a
    }
}

fn bspline3(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0
    } else if t < 2.0 {
        let r = 2.0 - t;
        r * r * r / 6.0
    } else {
        0.0
    }
}

fn smooth_pass(g: &Grid, v: &[f64]) -> Vec<f64> {
    let at = |i: i64, j: i64| {
        let i = i.clamp(0, g.nx as i64 - 1) as usize;
        let j = j.clamp(0, g.ny as i64 - 1) as usize;
        v[g.index(i, j)]
    };
    let w = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
    let mut out = vec![0.0; v.len()];
    for j in 0..g.ny as i64 {
        for i in 0..g.nx as i64 {
            let mut acc = 0.0;
            for (dj, wy) in (-1..=1).zip(w) {
                for (di, wx) in (-1..=1).zip(w) {
                    acc += wx * wy * at(i + di, j + dj);
                }
            }
            out[g.index(i as usize, j as usize)] = acc;
        }
    }
    out
}

/// Static transport field `v^stat`.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticField {
    Uniform { v1: f64, v2: f64 },
    Diverter(DiverterField),
    Tabulated(TabulatedField),
}

impl StaticField {
    pub fn conveyor_diverter(params: DiverterParams) -> Result<Self> {
        Ok(StaticField::Diverter(DiverterField::new(params)?))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            StaticField::Uniform { v1, v2 } => (*v1, *v2),
            StaticField::Diverter(d) => d.eval(x, y),
            StaticField::Tabulated(t) => t.eval(x, y),
        }
    }

    /// Samples `v_1` at x-interfaces and `v_2` at y-interfaces of `grid`.
    pub fn sample(&self, grid: &Grid) -> SampledVelocity {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut v1 = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            let (_, y) = grid.cell_center(0, j);
            for i in 0..=nx {
                v1.push(self.eval(grid.x_interface(i), y).0);
            }
        }
        let mut v2 = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            let y = grid.y_interface(j);
            for i in 0..nx {
                let (x, _) = grid.cell_center(i, 0);
                v2.push(self.eval(x, y).1);
            }
        }
        SampledVelocity { nx, ny, v1, v2 }
    }
}

/// Static velocities at the interfaces of one grid, laid out like the
/// collision velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledVelocity {
    pub nx: usize,
    pub ny: usize,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl SampledVelocity {
    #[inline]
    pub fn v1(&self, i: usize, j: usize) -> f64 {
        self.v1[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn v2(&self, i: usize, j: usize) -> f64 {
        self.v2[j * self.nx + i]
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn of_grid(g: &Grid) -> Self {
        Rect {
            x0: g.x0,
            y0: g.y0,
            x1: g.x0 + g.width(),
            y1: g.y0 + g.height(),
        }
    }
}

/// Sampled sup norms of a static field and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityNorms {
    /// `sup |v_1|`, `sup |v_2|`, not inflated.
    pub v1_sup: f64,
    pub v2_sup: f64,
    /// `jac[k][l] = sup |d_l v_k|`.
    pub jac: [[f64; 2]; 2],
    /// `hess[k] = [sup |d_xx v_k|, sup |d_xy v_k|, sup |d_yy v_k|]`.
    pub hess: [[f64; 3]; 2],
}

impl VelocityNorms {
    /// `||v||_inf`, taken componentwise.
    pub fn speed_sup(&self) -> f64 {
        self.v1_sup.max(self.v2_sup)
    }

    /// `||grad v||_inf := max_k (sup |d_x v_k| + sup |d_y v_k|)`.
    pub fn grad_sup(&self) -> f64 {
        (self.jac[0][0] + self.jac[0][1]).max(self.jac[1][0] + self.jac[1][1])
    }

    /// Largest second partial derivative over both components.
    pub fn hess_sup(&self) -> f64 {
        self.hess.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }

    pub fn dv1_dx(&self) -> f64 {
        self.jac[0][0]
    }

    pub fn dv2_dy(&self) -> f64 {
        self.jac[1][1]
    }
}

const MIN_NORM_SAMPLES: usize = 10_000;
const DERIVATIVE_INFLATION: f64 = 1.01;

/// Sup norms on a dense tensor sample of `domain` with central differences.
///
/// Derivative norms are inflated by 1%. Speed norms are reported as sampled,
/// since the CFL restriction uses them directly.
pub fn field_norms(field: &StaticField, domain: Rect, samples: usize) -> Result<VelocityNorms> {
    if samples < MIN_NORM_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_NORM_SAMPLES} samples are required, got {samples}"
        )));
    }
    if let StaticField::Uniform { v1, v2 } = field {
        return Ok(VelocityNorms {
            v1_sup: v1.abs(),
            v2_sup: v2.abs(),
            ..Default::default()
        });
    }
    let n = (samples as f64).sqrt().ceil() as usize;
    let (lx, ly) = (domain.x1 - domain.x0, domain.y1 - domain.y0);
    let h = 1e-5 * lx.max(ly).max(1e-3);
    let mut out = VelocityNorms::default();
    for b in 0..n {
        let y = domain.y0 + ly * b as f64 / (n - 1) as f64;
        for a in 0..n {
            let x = domain.x0 + lx * a as f64 / (n - 1) as f64;
            let c = field.eval(x, y);
            let xp = field.eval(x + h, y);
            let xm = field.eval(x - h, y);
            let yp = field.eval(x, y + h);
            let ym = field.eval(x, y - h);
            let pp = field.eval(x + h, y + h);
            let pm = field.eval(x + h, y - h);
            let mp = field.eval(x - h, y + h);
            let mm = field.eval(x - h, y - h);
            let comp = |p: (f64, f64), k: usize| if k == 0 { p.0 } else { p.1 };
            let vals = [c.0.abs(), c.1.abs()];
            out.v1_sup = out.v1_sup.max(vals[0]);
            out.v2_sup = out.v2_sup.max(vals[1]);
            for k in 0..2 {
                let (ce, xp, xm, yp, ym) = (comp(c, k), comp(xp, k), comp(xm, k), comp(yp, k), comp(ym, k));
                let dx = (xp - xm) / (2.0 * h);
                let dy = (yp - ym) / (2.0 * h);
                let dxx = (xp - 2.0 * ce + xm) / (h * h);
                let dyy = (yp - 2.0 * ce + ym) / (h * h);
                let dxy = (comp(pp, k) - comp(pm, k) - comp(mp, k) + comp(mm, k)) / (4.0 * h * h);
                out.jac[k][0] = out.jac[k][0].max(dx.abs());
                out.jac[k][1] = out.jac[k][1].max(dy.abs());
                out.hess[k][0] = out.hess[k][0].max(dxx.abs());
                out.hess[k][1] = out.hess[k][1].max(dxy.abs());
                out.hess[k][2] = out.hess[k][2].max(dyy.abs());
            }
        }
    }
    for row in out.jac.iter_mut() {
        row.iter_mut().for_each(|v| *v *= DERIVATIVE_INFLATION);
    }
    for row in out.hess.iter_mut() {
        row.iter_mut().for_each(|v| *v *= DERIVATIVE_INFLATION);
    }
    Ok(out)
}
