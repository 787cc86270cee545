//! The collision operator `I(rho) = -eps grad(eta * rho) / sqrt(1 + |grad(eta * rho)|^2)`
//! evaluated at cell interfaces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::mollifier::{build_stencil, KernelStencil, MollifierSpec, SampleShift};

/// Both components of `grad(eta * rho)` on a target array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientPair {
    pub fn at(&self, tx: usize, ty: usize) -> (f64, f64) {
        let k = ty * self.width + tx;
        (self.gx[k], self.gy[k])
    }
}

/// Collision velocities frozen for one time step.
///
/// `j1` lives on x-interfaces, `(nx + 1) x ny`, and `j2` on y-interfaces,
/// `nx x (ny + 1)`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceVelocities {
    pub nx: usize,
    pub ny: usize,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub epsilon: f64,
    pub time_index: usize,
}

impl InterfaceVelocities {
    pub fn zeros(nx: usize, ny: usize, epsilon: f64) -> Self {
        InterfaceVelocities {
            nx,
            ny,
            j1: vec![0.0; (nx + 1) * ny],
            j2: vec![0.0; nx * (ny + 1)],
            epsilon,
            time_index: 0,
        }
    }

    /// First component at the x-interface `i` (between cells `i-1` and `i`) of row `j`.
    #[inline]
    pub fn j1(&self, i: usize, j: usize) -> f64 {
        self.j1[j * (self.nx + 1) + i]
    }

    /// Second component at the y-interface `j` of column `i`.
    #[inline]
    pub fn j2(&self, i: usize, j: usize) -> f64 {
        self.j2[j * self.nx + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.j1
            .iter()
            .chain(&self.j2)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_spacing(field: &DensityField, stencil: &KernelStencil) -> Result<()> {
    if !field.grid.same_spacing(stencil.dx, stencil.dy) {
        return Err(Error::Contract(format!(
            "stencil spacing ({}, {}) does not match grid spacing ({}, {})",
            stencil.dx, stencil.dy, field.grid.dx, field.grid.dy
        )));
    }
    Ok(())
}

/// Direct quadrature `dx dy sum_{k,l} rho_kl grad eta(target - center_kl)`.
pub fn convolve_gradient(field: &DensityField, stencil: &KernelStencil) -> Result<GradientPair> {
    check_spacing(field, stencil)?;
    let g = field.grid;
    let (w, h) = stencil.target_shape(g.nx, g.ny);
    let area = g.cell_area();
    let (nx, ny) = (g.nx as i64, g.ny as i64);
    let (lag_x, lag_y) = (stencil.x_lag(), stencil.y_lag());
    let sw = stencil.width();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    gx.par_chunks_mut(w)
        .zip(gy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(ty, (row_x, row_y))| {
            for tx in 0..w {
                let (mut ax, mut ay) = (0.0, 0.0);
                for l in stencil.y_range.0..=stencil.y_range.1 {
                    let ky = ty as i64 - lag_y - l;
                    if ky < 0 || ky >= ny {
                        continue;
                    }
                    let src = field.row(ky as usize);
                    let base = (l - stencil.y_range.0) as usize * sw;
                    for m in stencil.x_range.0..=stencil.x_range.1 {
                        let kx = tx as i64 - lag_x - m;
                        if kx < 0 || kx >= nx {
                            continue;
                        }
                        let rho = src[kx as usize];
                        let s = base + (m - stencil.x_range.0) as usize;
                        ax += rho * stencil.deta_dx[s];
                        ay += rho * stencil.deta_dy[s];
                    }
                }
                row_x[tx] = area * ax;
                row_y[tx] = area * ay;
            }
        });
    Ok(GradientPair { width: w, height: h, gx, gy })
}

/// Same quantity as [`convolve_gradient`] through two 1D passes, using the
/// rank-one structure of the Gaussian derivative kernels.
pub fn convolve_gradient_fast(field: &DensityField, stencil: &KernelStencil) -> Result<GradientPair> {
    check_spacing(field, stencil)?;
    let g = field.grid;
    let (w, h) = stencil.target_shape(g.nx, g.ny);
    let area = g.cell_area();
    let (nx, ny) = (g.nx as i64, g.ny as i64);
    let (lag_x, lag_y) = (stencil.x_lag(), stencil.y_lag());
    let (fx_a, fy_a) = (&stencil.dx_factors.0, &stencil.dx_factors.1);
    let (fx_b, fy_b) = (&stencil.dy_factors.0, &stencil.dy_factors.1);

    // Pass 1: along x for every source row.
    let mut ta = vec![0.0; w * g.ny];
    let mut tb = vec![0.0; w * g.ny];
    ta.par_chunks_mut(w)
        .zip(tb.par_chunks_mut(w))
        .enumerate()
        .for_each(|(ky, (ra, rb))| {
            let src = field.row(ky);
            // Tap-outer order keeps the per-target summation order of the
            // direct loop while letting the inner loop vectorise.
            for (s, m) in (stencil.x_range.0..=stencil.x_range.1).enumerate() {
                // Targets whose source column kx = tx - lag - m lies on the grid.
                let t0 = (lag_x + m).max(0);
                let t1 = (lag_x + m + nx - 1).min(w as i64 - 1);
                if t0 > t1 {
                    continue;
                }
                let (t0, t1) = (t0 as usize, t1 as usize);
                let k0 = (t0 as i64 - lag_x - m) as usize;
                let src = &src[k0..k0 + (t1 - t0 + 1)];
                let (ca, cb) = (fx_a[s], fx_b[s]);
                for ((oa, ob), &rho) in ra[t0..=t1].iter_mut().zip(&mut rb[t0..=t1]).zip(src) {
                    *oa += rho * ca;
                    *ob += rho * cb;
                }
            }
        });

    // Pass 2: along y.
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    gx.par_chunks_mut(w)
        .zip(gy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(ty, (row_x, row_y))| {
            for (s, l) in (stencil.y_range.0..=stencil.y_range.1).enumerate() {
                let ky = ty as i64 - lag_y - l;
                if ky < 0 || ky >= ny {
                    continue;
                }
                let base = ky as usize * w;
                let (ca, cb) = (fy_a[s], fy_b[s]);
                for tx in 0..w {
                    row_x[tx] += ca * ta[base + tx];
                    row_y[tx] += cb * tb[base + tx];
                }
            }
            row_x.iter_mut().for_each(|v| *v *= area);
            row_y.iter_mut().for_each(|v| *v *= area);
        });
    Ok(GradientPair { width: w, height: h, gx, gy })
}

/// `-eps g / sqrt(1 + |g|^2)`.
#[inline]
pub fn collision_operator(g: (f64, f64), epsilon: f64) -> (f64, f64) {
    let d = (1.0 + g.0 * g.0 + g.1 * g.1).sqrt();
    (-epsilon * g.0 / d, -epsilon * g.1 / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    Direct,
    #[default]
    Separable,
}

/// Interface stencils for one grid, reused every step.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub grid: Grid,
    pub spec: MollifierSpec,
    pub epsilon: f64,
    pub method: ConvolutionMethod,
    x_stencil: KernelStencil,
    y_stencil: KernelStencil,
}

impl NonlocalOperator {
    pub fn new(grid: Grid, spec: MollifierSpec, epsilon: f64, method: ConvolutionMethod) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {epsilon}")));
        }
        Ok(NonlocalOperator {
            grid,
            spec,
            epsilon,
            method,
            x_stencil: build_stencil(&spec, &grid, SampleShift::XInterface)?,
            y_stencil: build_stencil(&spec, &grid, SampleShift::YInterface)?,
        })
    }

    pub fn stencils(&self) -> (&KernelStencil, &KernelStencil) {
        (&self.x_stencil, &self.y_stencil)
    }

    pub fn interface_gradients(&self, field: &DensityField) -> Result<(GradientPair, GradientPair)> {
        if field.grid != self.grid {
            return Err(Error::Contract("field grid differs from operator grid".into()));
        }
        let conv = match self.method {
            ConvolutionMethod::Direct => convolve_gradient,
            ConvolutionMethod::Separable => convolve_gradient_fast,
        };
        Ok((conv(field, &self.x_stencil)?, conv(field, &self.y_stencil)?))
    }

    pub fn evaluate(&self, field: &DensityField, time_index: usize) -> Result<InterfaceVelocities> {
        let (gx, gy) = self.interface_gradients(field)?;
        let eps = self.epsilon;
        let j1 = gx
            .gx
            .iter()
            .zip(&gx.gy)
            .map(|(&a, &b)| collision_operator((a, b), eps).0)
            .collect();
        let j2 = gy
            .gx
            .iter()
            .zip(&gy.gy)
            .map(|(&a, &b)| collision_operator((a, b), eps).1)
            .collect();
        Ok(InterfaceVelocities {
            nx: self.grid.nx,
            ny: self.grid.ny,
            j1,
            j2,
            epsilon: eps,
            time_index,
        })
    }
}

/// One-shot evaluation through the direct quadrature.
pub fn build_interface_velocities(
    field: &DensityField,
    spec: &MollifierSpec,
    epsilon: f64,
) -> Result<InterfaceVelocities> {
    NonlocalOperator::new(field.grid, *spec, epsilon, ConvolutionMethod::Direct)?.evaluate(field, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (Grid, MollifierSpec) {
        (Grid::new(n, n, 0.01, 0.01, 0.0, 0.0).unwrap(), MollifierSpec::new(1e4).unwrap())
    }

    #[test]
    fn zero_field_gives_zero() {
        let (g, spec) = setup(16);
        let z = DensityField::zeros(g);
        let st = build_stencil(&spec, &g, SampleShift::XInterface).unwrap();
        for pair in [convolve_gradient(&z, &st).unwrap(), convolve_gradient_fast(&z, &st).unwrap()] {
            assert!(pair.gx.iter().chain(&pair.gy).all(|&v| v == 0.0));
        }
        let j = build_interface_velocities(&z, &spec, 0.83).unwrap();
        assert_eq!(j.max_abs(), 0.0);
    }

    #[test]
    fn delta_reproduces_stencil() {
        let (g, spec) = setup(32);
        let mut f = DensityField::zeros(g);
        let (ci, cj) = (15usize, 16usize);
        f.set(ci, cj, 1.0 / g.cell_area());
        for shift in [SampleShift::XInterface, SampleShift::YInterface, SampleShift::CellCenter] {
            let st = build_stencil(&spec, &g, shift).unwrap();
            let direct = convolve_gradient(&f, &st).unwrap();
            let fast = convolve_gradient_fast(&f, &st).unwrap();
            for l in st.y_range.0..=st.y_range.1 {
                for m in st.x_range.0..=st.x_range.1 {
                    let tx = ci as i64 + st.x_lag() + m;
                    let ty = cj as i64 + st.y_lag() + l;
                    let (sx, sy) = st.sample(m, l);
                    let (dx, dy) = direct.at(tx as usize, ty as usize);
                    assert!((dx - sx).abs() <= 1e-9 * sx.abs().max(1.0));
                    assert!((dy - sy).abs() <= 1e-9 * sy.abs().max(1.0));
                    let (fx, fy) = fast.at(tx as usize, ty as usize);
                    assert!((fx - sx).abs() < 1e-10 * sx.abs().max(1.0));
                    assert!((fy - sy).abs() < 1e-10 * sy.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn symmetric_data_has_zero_normal_gradient() {
        let (g, spec) = setup(20);
        // Mirror symmetric about the interface x = 0.10 (index 10).
        let f = DensityField::from_fn(g, |x, y| {
            let d = (x - 0.10).abs();
            (-(d * 40.0).powi(2)).exp() * (1.0 + y)
        });
        let st = build_stencil(&spec, &g, SampleShift::XInterface).unwrap();
        let pair = convolve_gradient(&f, &st).unwrap();
        for ty in 0..g.ny {
            assert!(pair.at(10, ty).0.abs() < 1e-12);
        }
    }

    #[test]
    fn collision_operator_examples() {
        assert_eq!(collision_operator((0.0, 0.0), 0.83), (0.0, 0.0));
        let (a, b) = collision_operator((1e6, 0.0), 1.0);
        assert!((a + 1.0).abs() < 1e-6 && b == 0.0);
        let (a, b) = collision_operator((1.0, 0.0), 0.83);
        assert!((a + 0.83 / 2f64.sqrt()).abs() < 1e-15);
        assert!((a + 0.586_899).abs() < 1e-6);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn mismatched_spacing_is_rejected() {
        let (g, spec) = setup(16);
        let other = Grid::new(16, 16, 0.011, 0.01, 0.0, 0.0).unwrap();
        let st = build_stencil(&spec, &other, SampleShift::XInterface).unwrap();
        let f = DensityField::zeros(g);
        assert!(matches!(convolve_gradient(&f, &st), Err(Error::Contract(_))));
        assert!(convolve_gradient_fast(&f, &st).is_err());
    }

    #[test]
    fn velocities_are_bounded_by_epsilon() {
        let (g, spec) = setup(24);
        let f = DensityField::from_fn(g, |x, y| 50.0 * ((x * 91.0).sin() * (y * 37.0).cos()).abs());
        let j = build_interface_velocities(&f, &spec, 0.83).unwrap();
        assert!(j.max_abs() <= 0.83);
        assert_eq!(j.j1.len(), 25 * 24);
        assert_eq!(j.j2.len(), 24 * 25);
    }
}
