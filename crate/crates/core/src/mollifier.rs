//! Gaussian mollifier, its analytic derivatives and truncated sample stencils.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Default stencil cutoff in standard deviations.
pub const DEFAULT_TRUNCATION_SIGMAS: f64 = 6.0;
/// Smallest admissible cutoff in standard deviations.
pub const MIN_TRUNCATION_SIGMAS: f64 = 4.0;

const RADIAL_SCAN_POINTS: usize = 100_000;
const NORM_INFLATION: f64 = 1.01;

/// `eta(x, y) = sigma / (2 pi) * exp(-sigma (x^2 + y^2) / 2)` cut off at `truncation_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub sigma: f64,
    pub truncation_radius: f64,
}

/// Partial derivatives of one order, in lexicographic order of the multi-index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivatives {
    /// `[d_x, d_y]`
    First([f64; 2]),
    /// `[d_xx, d_xy, d_yy]`
    Second([f64; 3]),
    /// `[d_xxx, d_xxy, d_xyy, d_yyy]`
    Third([f64; 4]),
}

/// Sup norms of the mollifier derivatives and the L1 norm of its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub grad_sup: f64,
    pub hess_sup: f64,
    pub third_sup: f64,
    pub laplacian_sup: f64,
    pub grad_l1: f64,
}

impl MollifierSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        Self::check_sigma(sigma)?;
        Ok(MollifierSpec {
            sigma,
            truncation_radius: DEFAULT_TRUNCATION_SIGMAS / sigma.sqrt(),
        })
    }

    pub fn with_radius(sigma: f64, truncation_radius: f64) -> Result<Self> {
        Self::check_sigma(sigma)?;
        let min = MIN_TRUNCATION_SIGMAS / sigma.sqrt();
        if !(truncation_radius >= min * (1.0 - 1e-12)) || !truncation_radius.is_finite() {
            return Err(Error::Config(format!(
                "truncation radius {truncation_radius} is below {MIN_TRUNCATION_SIGMAS} standard deviations ({min})"
            )));
        }
        Ok(MollifierSpec { sigma, truncation_radius })
    }

    fn check_sigma(sigma: f64) -> Result<()> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        1.0 / self.sigma.sqrt()
    }

    #[inline]
    pub fn eta(&self, x: f64, y: f64) -> f64 {
        self.sigma / (2.0 * PI) * (-0.5 * self.sigma * (x * x + y * y)).exp()
    }

    #[inline]
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let s = self.sigma;
        let e = self.eta(x, y);
        [-s * x * e, -s * y * e]
    }

    pub fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        let s = self.sigma;
        let e = self.eta(x, y);
        [
            (s * s * x * x - s) * e,
            s * s * x * y * e,
            (s * s * y * y - s) * e,
        ]
    }

    pub fn third(&self, x: f64, y: f64) -> [f64; 4] {
        let s = self.sigma;
        let (s2, s3) = (s * s, s * s * s);
        let e = self.eta(x, y);
        [
            (-s3 * x * x * x + 3.0 * s2 * x) * e,
            (-s3 * x * x * y + s2 * y) * e,
            (-s3 * x * y * y + s2 * x) * e,
            (-s3 * y * y * y + 3.0 * s2 * y) * e,
        ]
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let s = self.sigma;
        s * (s * (x * x + y * y) - 2.0) * self.eta(x, y)
    }

    pub fn eta_derivatives(&self, x: f64, y: f64, order: usize) -> Result<Derivatives> {
        match order {
            1 => Ok(Derivatives::First(self.gradient(x, y))),
            2 => Ok(Derivatives::Second(self.hessian(x, y))),
            3 => Ok(Derivatives::Third(self.third(x, y))),
            _ => Err(Error::InvalidInput(format!(
                "derivative order must be 1, 2 or 3, got {order}"
            ))),
        }
    }

    /// Sup norms from a radial scan out to the truncation radius, inflated by 1%.
    ///
    /// Euclidean and Frobenius norms are rotation invariant, so scanning along
    /// the positive x-axis covers the whole plane.
    pub fn sup_norms(&self) -> KernelNorms {
        let r_max = self.truncation_radius;
        let (mut g, mut h, mut t, mut l) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for k in 0..=RADIAL_SCAN_POINTS {
            let r = r_max * k as f64 / RADIAL_SCAN_POINTS as f64;
            let [gx, gy] = self.gradient(r, 0.0);
            g = g.max(gx.hypot(gy));
            let [hxx, hxy, hyy] = self.hessian(r, 0.0);
            h = h.max((hxx * hxx + 2.0 * hxy * hxy + hyy * hyy).sqrt());
            let [a, b, c, d] = self.third(r, 0.0);
            t = t.max((a * a + 3.0 * b * b + 3.0 * c * c + d * d).sqrt());
            l = l.max(self.laplacian(r, 0.0).abs());
        }
        KernelNorms {
            grad_sup: NORM_INFLATION * g,
            hess_sup: NORM_INFLATION * h,
            third_sup: NORM_INFLATION * t,
            laplacian_sup: NORM_INFLATION * l,
            grad_l1: self.grad_l1(),
        }
    }

    /// `int |grad eta| dA` by composite Simpson in the radial variable.
    fn grad_l1(&self) -> f64 {
        let r_max = self.truncation_radius.max(12.0 * self.std_dev());
        let n = RADIAL_SCAN_POINTS;
        let h = r_max / n as f64;
        let integrand = |r: f64| {
            let [gx, _] = self.gradient(r, 0.0);
            gx.abs() * 2.0 * PI * r
        };
        let mut acc = integrand(0.0) + integrand(r_max);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(k as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Location of stencil samples relative to cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleShift {
    /// Targets are x-interfaces; sample points shifted by `dx/2` in x.
    XInterface,
    /// Targets are y-interfaces; sample points shifted by `dy/2` in y.
    YInterface,
    /// Targets are cell centers.
    CellCenter,
}

impl SampleShift {
    /// Shift in units of the cell size; kept in index space so that mirrored
    /// sample points are bitwise negatives of each other.
    fn offsets(self) -> (f64, f64) {
        match self {
            SampleShift::XInterface => (0.5, 0.0),
            SampleShift::YInterface => (0.0, 0.5),
            SampleShift::CellCenter => (0.0, 0.0),
        }
    }
}

/// Samples of `d_x eta` and `d_y eta` at `((m + sx) dx, (l + sy) dy)` for `m` in
/// `x_range`, `l` in `y_range`.
///
/// A target at x-index `t` receives source cell `t - m` (cell centers) or
/// `t - 1 - m` (interfaces) from sample `m`; y likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStencil {
    pub shift: SampleShift,
    pub dx: f64,
    pub dy: f64,
    pub x_range: (i64, i64),
    pub y_range: (i64, i64),
    /// Row-major over `(l, m)`, `m` fastest.
    pub deta_dx: Vec<f64>,
    pub deta_dy: Vec<f64>,
    /// Rank-one factors: `deta_dx[l][m] = dx_x[m] * dx_y[l]`, same for `deta_dy`.
    pub dx_factors: (Vec<f64>, Vec<f64>),
    pub dy_factors: (Vec<f64>, Vec<f64>),
}

impl KernelStencil {
    pub fn width(&self) -> usize {
        (self.x_range.1 - self.x_range.0 + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y_range.1 - self.y_range.0 + 1) as usize
    }

    pub fn sample_point(&self, m: i64, l: i64) -> (f64, f64) {
        let (sx, sy) = self.shift.offsets();
        ((m as f64 + sx) * self.dx, (l as f64 + sy) * self.dy)
    }

    /// `(d_x eta, d_y eta)` at stencil offset `(m, l)`.
    pub fn sample(&self, m: i64, l: i64) -> (f64, f64) {
        let k = (l - self.y_range.0) as usize * self.width() + (m - self.x_range.0) as usize;
        (self.deta_dx[k], self.deta_dy[k])
    }

    /// Source index shift: source = target - `lag` - m along x.
    pub fn x_lag(&self) -> i64 {
        i64::from(self.shift == SampleShift::XInterface)
    }

    pub fn y_lag(&self) -> i64 {
        i64::from(self.shift == SampleShift::YInterface)
    }

    /// Target array dimensions for a grid of `nx x ny` cells.
    pub fn target_shape(&self, nx: usize, ny: usize) -> (usize, usize) {
        match self.shift {
            SampleShift::XInterface => (nx + 1, ny),
            SampleShift::YInterface => (nx, ny + 1),
            SampleShift::CellCenter => (nx, ny),
        }
    }
}

/// Samples the mollifier gradient on the stencil matching `grid` and `shift`.
pub fn build_stencil(spec: &MollifierSpec, grid: &Grid, shift: SampleShift) -> Result<KernelStencil> {
    let r = spec.truncation_radius;
    let half_extent = 0.5 * grid.width().min(grid.height());
    if r >= half_extent {
        return Err(Error::Config(format!(
            "truncation radius {r} is not below half the domain extent {half_extent}"
        )));
    }
    let kx = (r / grid.dx).ceil() as i64;
    let ky = (r / grid.dy).ceil() as i64;
    let x_range = match shift {
        SampleShift::XInterface => (-kx - 1, kx),
        _ => (-kx, kx),
    };
    let y_range = match shift {
        SampleShift::YInterface => (-ky - 1, ky),
        _ => (-ky, ky),
    };
    let (sx, sy) = shift.offsets();
    let s = spec.sigma;
    let xs: Vec<f64> = (x_range.0..=x_range.1).map(|m| (m as f64 + sx) * grid.dx).collect();
    let ys: Vec<f64> = (y_range.0..=y_range.1).map(|l| (l as f64 + sy) * grid.dy).collect();
    let gauss = |t: f64| (-0.5 * s * t * t).exp();
    let norm = s / (2.0 * PI);
    let dx_x: Vec<f64> = xs.iter().map(|&x| -norm * s * x * gauss(x)).collect();
    let dx_y: Vec<f64> = ys.iter().map(|&y| gauss(y)).collect();
    let dy_x: Vec<f64> = xs.iter().map(|&x| norm * gauss(x)).collect();
    let dy_y: Vec<f64> = ys.iter().map(|&y| -s * y * gauss(y)).collect();
    let mut deta_dx = Vec::with_capacity(xs.len() * ys.len());
    let mut deta_dy = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let [gx, gy] = spec.gradient(x, y);
            deta_dx.push(gx);
            deta_dy.push(gy);
        }
    }
    Ok(KernelStencil {
        shift,
        dx: grid.dx,
        dy: grid.dy,
        x_range,
        y_range,
        deta_dx,
        deta_dy,
        dx_factors: (dx_x, dx_y),
        dy_factors: (dy_x, dy_y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> MollifierSpec {
        MollifierSpec::new(1e4).unwrap()
    }

    fn grid(n: usize, h: f64) -> Grid {
        Grid::new(n, n, h, h, 0.0, 0.0).unwrap()
    }

    #[test]
    fn gradient_vanishes_on_axis() {
        let m = spec();
        for y in [-0.03, 0.0, 0.011] {
            assert_eq!(m.gradient(0.0, y)[0], 0.0);
        }
    }

    #[test]
    fn gradient_peak_location_and_value() {
        let m = spec();
        let expected = 1e4f64.powf(1.5) / (2.0 * PI * 1f64.exp().sqrt());
        let at_peak = m.gradient(0.01, 0.0)[0].abs();
        assert!((at_peak - expected).abs() < 1e-9 * expected);
        let mut best = (0.0, 0.0);
        for k in 0..=200_000 {
            let x = 0.05 * k as f64 / 200_000.0;
            let v = m.gradient(x, 0.0)[0].abs();
            if v > best.1 {
                best = (x, v);
            }
        }
        assert!((best.0 - 0.01).abs() < 1e-6);
        assert!((best.1 / 9.653e4 - 1.0).abs() < 1e-4);
    }

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_central_differences() {
        let m = spec();
        let (x, y) = (0.007, -0.004);
        let h = 1e-5;
        let g = m.gradient(x, y);
        let hs = m.hessian(x, y);
        let t = m.third(x, y);
        let checks = [
            (central(|u| m.eta(u, y), x, h), g[0]),
            (central(|v| m.eta(x, v), y, h), g[1]),
            (central(|u| m.gradient(u, y)[0], x, h), hs[0]),
            (central(|v| m.gradient(x, v)[0], y, h), hs[1]),
            (central(|v| m.gradient(x, v)[1], y, h), hs[2]),
            (central(|u| m.hessian(u, y)[0], x, h), t[0]),
            (central(|v| m.hessian(x, v)[0], y, h), t[1]),
            (central(|u| m.hessian(u, y)[2], x, h), t[2]),
            (central(|v| m.hessian(x, v)[2], y, h), t[3]),
        ];
        for (fd, exact) in checks {
            assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
        assert!((m.laplacian(x, y) - (hs[0] + hs[2])).abs() < 1e-9 * hs[0].abs());
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        let m = spec();
        let (x, y) = (0.006, 0.002);
        let exact = m.gradient(x, y)[0];
        let err = |h: f64| (central(|u| m.eta(u, y), x, h) - exact).abs();
        let ratio = err(2e-4) / err(1e-4);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        assert!(spec().eta_derivatives(0.0, 0.0, 4).is_err());
        assert!(matches!(
            spec().eta_derivatives(0.0, 0.0, 2),
            Ok(Derivatives::Second(_))
        ));
    }

    #[test]
    fn sup_norms_match_closed_forms() {
        let s: f64 = 1e4;
        let n = spec().sup_norms();
        let grad = s.powf(1.5) / (2.0 * PI * 1f64.exp().sqrt());
        assert!((n.grad_sup / grad - 1.01).abs() < 1e-6);
        let hess = 2f64.sqrt() * s * s / (2.0 * PI);
        assert!((n.hess_sup / hess - 1.01).abs() < 1e-6);
        assert!((n.laplacian_sup / (s * s / PI) - 1.01).abs() < 1e-6);
        assert!((n.grad_l1 - (PI * s / 2.0).sqrt()).abs() < 1e-6 * n.grad_l1);
        assert!(n.third_sup > 0.0);
    }

    #[test]
    fn gradient_norm_scales_with_sigma() {
        let a = MollifierSpec::new(1e4).unwrap().sup_norms().grad_sup;
        let b = MollifierSpec::new(2e4).unwrap().sup_norms().grad_sup;
        assert!((b / a - 2f64.powf(1.5)).abs() < 1e-6);
    }

    #[test]
    fn short_radius_is_rejected() {
        assert!(MollifierSpec::with_radius(1e4, 0.03).is_err());
        assert!(MollifierSpec::with_radius(1e4, 0.04).is_ok());
        assert!(MollifierSpec::new(0.0).is_err());
    }

    #[test]
    fn center_stencil_is_odd_in_x() {
        let st = build_stencil(&spec(), &grid(32, 0.01), SampleShift::CellCenter).unwrap();
        let (lo, hi) = st.x_range;
        assert_eq!(lo, -hi);
        for l in st.y_range.0..=st.y_range.1 {
            assert_eq!(st.sample(0, l).0, 0.0);
            for m in 1..=hi {
                assert_eq!(st.sample(m, l).0, -st.sample(-m, l).0);
            }
        }
    }

    #[test]
    fn interface_stencil_is_symmetric() {
        let st = build_stencil(&spec(), &grid(32, 0.01), SampleShift::XInterface).unwrap();
        let (lo, hi) = st.x_range;
        assert_eq!(lo, -hi - 1);
        for m in lo..=hi {
            let (x, _) = st.sample_point(m, 0);
            let (xm, _) = st.sample_point(-m - 1, 0);
            assert!((x + xm).abs() < 1e-15);
            assert_eq!(st.sample(m, 0).0, -st.sample(-m - 1, 0).0);
        }
    }

    #[test]
    fn separable_factors_reproduce_samples() {
        let st = build_stencil(&spec(), &grid(32, 0.01), SampleShift::YInterface).unwrap();
        let w = st.width();
        for (l, (fy_dx, fy_dy)) in st.dx_factors.1.iter().zip(&st.dy_factors.1).enumerate() {
            for m in 0..w {
                let k = l * w + m;
                let a = st.dx_factors.0[m] * fy_dx;
                let b = st.dy_factors.0[m] * fy_dy;
                assert!((a - st.deta_dx[k]).abs() <= 1e-12 * st.deta_dx[k].abs().max(1.0));
                assert!((b - st.deta_dy[k]).abs() <= 1e-12 * st.deta_dy[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn boundary_samples_are_negligible() {
        let st = build_stencil(&spec(), &grid(32, 0.01), SampleShift::XInterface).unwrap();
        let peak = st.deta_dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (w, h) = (st.width(), st.height());
        for l in 0..h {
            for m in 0..w {
                if l == 0 || m == 0 || l + 1 == h || m + 1 == w {
                    let k = l * w + m;
                    assert!(st.deta_dx[k].abs() < 1e-6 * peak);
                    assert!(st.deta_dy[k].abs() < 1e-6 * peak);
                }
            }
        }
    }

    fn stencil_l1_mass(h: f64, shift: SampleShift) -> f64 {
        let n = (0.2 / h).round() as usize;
        let st = build_stencil(&spec(), &grid(n, h), shift).unwrap();
        st.deta_dx.iter().map(|v| v.abs()).sum::<f64>() * st.dx * st.dy
    }

    #[test]
    fn stencil_l1_mass_matches_kernel_norm() {
        let exact = (2.0 * 1e4 / PI).sqrt();
        // |d_x eta| has a kink on the sample line x = 0, so point sampling at
        // one standard deviation is only accurate to a few percent.
        let coarse = stencil_l1_mass(0.01, SampleShift::XInterface);
        assert!((coarse / exact - 1.0).abs() < 0.05, "{coarse} vs {exact}");
        for shift in [SampleShift::XInterface, SampleShift::CellCenter] {
            let fine = stencil_l1_mass(0.0025, shift);
            assert!((fine / exact - 1.0).abs() < 0.01, "{fine} vs {exact}");
        }
    }

    #[test]
    fn wider_truncation_barely_changes_sums() {
        let g = grid(40, 0.01);
        let sum_abs = |sigmas: f64| {
            let m = MollifierSpec::with_radius(1e4, sigmas / 100.0).unwrap();
            let st = build_stencil(&m, &g, SampleShift::XInterface).unwrap();
            st.deta_dx.iter().map(|v| v.abs()).sum::<f64>()
        };
        let (s5, s6, s7) = (sum_abs(5.0), sum_abs(6.0), sum_abs(7.0));
        assert!((s6 - s5).abs() < 1e-4 * s6);
        assert!((s7 - s6).abs() < 1e-6 * s7);
    }

    #[test]
    fn radius_too_large_for_domain() {
        assert!(build_stencil(&spec(), &grid(8, 0.01), SampleShift::CellCenter).is_err());
    }

    #[test]
    fn stencils_are_reproducible() {
        let g = grid(20, 0.01);
        let a = build_stencil(&spec(), &g, SampleShift::XInterface).unwrap();
        let b = build_stencil(&spec(), &g, SampleShift::XInterface).unwrap();
        assert_eq!(a, b);
    }
}
