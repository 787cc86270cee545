//! Uniform Cartesian mesh, cell-averaged density fields and discrete norms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Uniform mesh over the rectangle `[x0, x0 + nx*dx] x [y0, y0 + ny*dy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least one cell per direction, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Grid { nx, ny, dx, dy, x0, y0 })
    }

    /// Grid with spacing `dx` covering `[x0, x0 + lx] x [y0, y0 + ly]`.
    ///
    /// The extents must be integer multiples of the spacing up to rounding.
    pub fn covering(x0: f64, y0: f64, lx: f64, ly: f64, dx: f64) -> Result<Self> {
        let count = |len: f64| -> Result<usize> {
            let n = (len / dx).round();
            if n < 1.0 || ((n * dx - len).abs() > 1e-9 * len.max(dx)) {
                return Err(Error::Config(format!(
                    "domain length {len} is not a multiple of dx = {dx}"
                )));
            }
            Ok(n as usize)
        };
        Grid::new(count(lx)?, count(ly)?, dx, dx, x0, y0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0 + (i as f64 + 0.5) * self.dx,
            self.y0 + (j as f64 + 0.5) * self.dy,
        )
    }

    /// x-coordinate of the interface between cells `i-1` and `i`.
    pub fn x_interface(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// y-coordinate of the interface between cells `j-1` and `j`.
    pub fn y_interface(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    /// Row-major linear index, `i` fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// True if both grids share spacing up to a relative `1e-12`.
    pub fn same_spacing(&self, dx: f64, dy: f64) -> bool {
        (self.dx - dx).abs() <= 1e-12 * self.dx && (self.dy - dy).abs() <= 1e-12 * self.dy
    }
}

/// Piecewise constant density on a [`Grid`], stored row-major with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn zeros(grid: Grid) -> Self {
        DensityField {
            grid,
            values: vec![0.0; grid.len()],
            time: 0.0,
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        DensityField {
            grid,
            values: vec![c; grid.len()],
            time: 0.0,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at cell ({}, {})",
                k % grid.nx,
                k / grid.nx
            )));
        }
        Ok(DensityField { grid, values, time })
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        DensityField { grid, values, time: 0.0 }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn ensure_same_grid(&self, other: &DensityField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Contract("fields live on different grids".into()));
        }
        Ok(())
    }
}

fn gauss_legendre(order: usize) -> Result<(&'static [f64], &'static [f64])> {
    const N1: [f64; 1] = [0.0];
    const W1: [f64; 1] = [2.0];
    const N2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    const W2: [f64; 2] = [1.0, 1.0];
    const N3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    match order {
        1 => Ok((&N1, &W1)),
        2 => Ok((&N2, &W2)),
        3 => Ok((&N3, &W3)),
        _ => Err(Error::InvalidInput(format!(
            "quadrature order must be 1, 2 or 3, got {order}"
        ))),
    }
}

/// Cell averages of `rho0` by tensor Gauss-Legendre quadrature.
pub fn project_initial_datum<F>(rho0: F, grid: Grid, quad_order: usize) -> Result<DensityField>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (nodes, weights) = gauss_legendre(quad_order)?;
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(grid.nx)
        .enumerate()
        .try_for_each(|(j, row)| -> Result<()> {
            for (i, out) in row.iter_mut().enumerate() {
                let (cx, cy) = grid.cell_center(i, j);
                let mut acc = 0.0;
                for (ny, wy) in nodes.iter().zip(weights) {
                    let y = cy + 0.5 * grid.dy * ny;
                    for (nx, wx) in nodes.iter().zip(weights) {
                        let x = cx + 0.5 * grid.dx * nx;
                        let v = rho0(x, y);
                        if !v.is_finite() || v < 0.0 {
                            return Err(Error::InvalidInput(format!(
                                "initial density {v} at ({x}, {y}) is not a finite non-negative value"
                            )));
                        }
                        acc += wx * wy * v;
                    }
                }
                *out = 0.25 * acc;
            }
            Ok(())
        })?;
    Ok(DensityField { grid, values, time: 0.0 })
}

pub fn l1_norm(field: &DensityField) -> f64 {
    field.values.iter().map(|v| v.abs()).sum::<f64>() * field.grid.cell_area()
}

/// Mass `sum rho dx dy`; equals the L1 norm for non-negative fields.
pub fn mass(field: &DensityField) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_area()
}

pub fn linf_norm(field: &DensityField) -> f64 {
    field.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `sum |rho - sigma| dx dy`.
pub fn l1_distance(a: &DensityField, b: &DensityField) -> Result<f64> {
    a.ensure_same_grid(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        * a.grid.cell_area())
}

/// Discrete total variation `sum dy |rho_{i+1,j} - rho_ij| + dx |rho_{i,j+1} - rho_ij|`.
pub fn discrete_tv(field: &DensityField) -> f64 {
    let g = field.grid;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..g.ny {
        let row = field.row(j);
        for i in 0..g.nx {
            if i + 1 < g.nx {
                sx += (row[i + 1] - row[i]).abs();
            }
            if j + 1 < g.ny {
                sy += (field.values[g.index(i, j + 1)] - row[i]).abs();
            }
        }
    }
    g.dy * sx + g.dx * sy
}

fn fmt_num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

/// Serializes a field in the snapshot text format.
pub fn snapshot_to_string(field: &DensityField) -> String {
    let g = field.grid;
    let mut out = String::with_capacity(24 * (g.len() + 8));
    let _ = write!(out, "# {} {} ", g.nx, g.ny);
    for (k, v) in [g.dx, g.dy, g.x0, g.y0, field.time].into_iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        fmt_num(&mut out, v);
    }
    out.push('\n');
    for j in 0..g.ny {
        for (i, v) in field.row(j).iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            fmt_num(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

pub fn write_snapshot(path: &Path, field: &DensityField) -> Result<()> {
    fs::write(path, snapshot_to_string(field)).map_err(|e| Error::io(path, e))
}

pub fn parse_snapshot(text: &str, origin: &str) -> Result<DensityField> {
    let perr = |line: usize, message: String| Error::Parse {
        location: format!("{origin}:{line}"),
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty snapshot".into()))?;
    let fields: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| perr(1, "header must start with '#'".into()))?
        .split_whitespace()
        .collect();
    if fields.len() != 7 {
        return Err(perr(1, format!("header needs 7 entries, found {}", fields.len())));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|e| perr(1, format!("{s}: {e}")));
    let num = |s: &str| s.parse::<f64>().map_err(|e| perr(1, format!("{s}: {e}")));
    let grid = Grid::new(
        int(fields[0])?,
        int(fields[1])?,
        num(fields[2])?,
        num(fields[3])?,
        num(fields[4])?,
        num(fields[5])?,
    )?;
    let time = num(fields[6])?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (ln, line) in lines {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| perr(ln + 1, format!("{tok}: {e}")))?,
            );
        }
        if values.len() - before != grid.nx {
            return Err(perr(
                ln + 1,
                format!("expected {} values, found {}", grid.nx, values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(perr(0, format!("expected {} rows, found {rows}", grid.ny)));
    }
    DensityField::from_values(grid, values, time)
}

pub fn read_snapshot(path: &Path) -> Result<DensityField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, &path.display().to_string())
}

/// Fixed time step with one shortened final step landing on `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub t_end: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
        }
        let n_steps = (t_end / dt).floor() as usize;
        Ok(TimeGrid { dt, n_steps, t_end })
    }

    /// Length of the trailing partial step, zero when `t_end` is a multiple of `dt`.
    pub fn remainder(&self) -> f64 {
        let r = self.t_end - self.n_steps as f64 * self.dt;
        if r <= 1e-12 * self.t_end {
            0.0
        } else {
            r
        }
    }

    pub fn total_steps(&self) -> usize {
        self.n_steps + usize::from(self.remainder() > 0.0)
    }

    /// Step sizes in order; the last may be shorter than `dt`.
    pub fn step_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        let rem = self.remainder();
        (0..self.total_steps()).map(move |n| if n < self.n_steps { self.dt } else { rem })
    }

    /// Time reached after `n` steps.
    pub fn time_at(&self, n: usize) -> f64 {
        if n >= self.total_steps() {
            self.t_end
        } else {
            n as f64 * self.dt
        }
    }
}
