//! Smooth Heaviside approximations and the congestion flux `f(r) = r H(r)`.
//!
//! `H` is stored with the shift by `rho_max` built in, so `H(rho_max) = 1/2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SCAN_POINTS: usize = 1_000_000;
const SCAN_RANGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeavisideKind {
    /// `H(u) = atan(slope (u - rho_max)) / pi + 1/2`.
    Atan { slope: f64 },
    /// Clamped cubic spline through `(d_l, 0)`, `(rho_max, 1/2)`, `(d_r, 1)`.
    Spline { d_l: f64, d_r: f64 },
    /// `H = 1`, so `f(r) = r`. For testing.
    One,
}

/// Hermite data of one cubic piece on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    ya: f64,
    yb: f64,
    sa: f64,
    sb: f64,
}

impl Piece {
    fn eval(&self, u: f64) -> (f64, f64) {
        let h = self.b - self.a;
        let t = (u - self.a) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.ya + h10 * h * self.sa + h01 * self.yb + h11 * h * self.sb;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let d = (d00 * self.ya + d01 * self.yb) / h + d10 * self.sa + d11 * self.sb;
        (v, d)
    }

    /// Smallest derivative on the piece; the derivative is quadratic in `t`.
    fn min_slope(&self) -> f64 {
        let mut m = self.sa.min(self.sb);
        for k in 1..1000 {
            let u = self.a + (self.b - self.a) * k as f64 / 1000.0;
            m = m.min(self.eval(u).1);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionModel {
    pub kind: HeavisideKind,
    pub rho_max: f64,
    pieces: Option<[Piece; 2]>,
    lipschitz: f64,
    lipschitz_at: f64,
}

impl CongestionModel {
    pub fn new(kind: HeavisideKind, rho_max: f64) -> Result<Self> {
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(Error::Config(format!("rho_max must be positive, got {rho_max}")));
        }
        let pieces = match kind {
            HeavisideKind::Atan { slope } => {
                if !(slope > 0.0 && slope.is_finite()) {
                    return Err(Error::Config(format!("heaviside slope must be positive, got {slope}")));
                }
                None
            }
            HeavisideKind::Spline { d_l, d_r } => Some(spline_pieces(d_l, rho_max, d_r)?),
            HeavisideKind::One => None,
        };
        let mut model = CongestionModel {
            kind,
            rho_max,
            pieces,
            lipschitz: 0.0,
            lipschitz_at: 0.0,
        };
        let (at, l) = model.locate_lipschitz();
        model.lipschitz = l;
        model.lipschitz_at = at;
        Ok(model)
    }

    pub fn atan(slope: f64, rho_max: f64) -> Result<Self> {
        Self::new(HeavisideKind::Atan { slope }, rho_max)
    }

    pub fn spline(d_l: f64, d_r: f64, rho_max: f64) -> Result<Self> {
        Self::new(HeavisideKind::Spline { d_l, d_r }, rho_max)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            HeavisideKind::Atan { .. } => "atan",
            HeavisideKind::Spline { .. } => "spline",
            HeavisideKind::One => "one",
        }
    }

    /// `(H(u), H'(u))`.
    #[inline]
    pub fn heaviside_with_slope(&self, u: f64) -> (f64, f64) {
        match self.kind {
            HeavisideKind::Atan { slope } => {
                let z = slope * (u - self.rho_max);
                ((z).atan() / PI + 0.5, slope / (PI * (1.0 + z * z)))
            }
            HeavisideKind::Spline { d_l, d_r } => {
                if u <= d_l {
                    (0.0, 0.0)
                } else if u >= d_r {
                    (1.0, 0.0)
                } else {
                    let [left, right] = self.pieces.expect("spline pieces");
                    if u <= self.rho_max {
                        left.eval(u)
                    } else {
                        right.eval(u)
                    }
                }
            }
            HeavisideKind::One => (1.0, 0.0),
        }
    }

    #[inline]
    pub fn heaviside(&self, u: f64) -> f64 {
        self.heaviside_with_slope(u).0
    }

    /// `f(r) = r H(r)` without the sign check, for the scheme inner loops.
    #[inline]
    pub fn f(&self, r: f64) -> f64 {
        r * self.heaviside(r)
    }

    /// `f'(r) = H(r) + r H'(r)` without the sign check.
    #[inline]
    pub fn df(&self, r: f64) -> f64 {
        let (h, dh) = self.heaviside_with_slope(r);
        h + r * dh
    }

    pub fn f_eval(&self, r: f64) -> Result<f64> {
        Self::check_density(r)?;
        Ok(self.f(r))
    }

    pub fn f_prime(&self, r: f64) -> Result<f64> {
        Self::check_density(r)?;
        Ok(self.df(r))
    }

    fn check_density(r: f64) -> Result<()> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("density must be non-negative, got {r}")));
        }
        Ok(())
    }

    /// Cached `sup |f'|` over `[0, 4 rho_max]`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    /// Density at which the Lipschitz constant is attained.
    pub fn lipschitz_argmax(&self) -> f64 {
        self.lipschitz_at
    }

    fn locate_lipschitz(&self) -> (f64, f64) {
        let hi = SCAN_RANGE * self.rho_max;
        let step = hi / SCAN_POINTS as f64;
        let mut best = (0.0, self.df(0.0).abs());
        for k in 1..=SCAN_POINTS {
            let r = k as f64 * step;
            let v = self.df(r).abs();
            if v > best.1 {
                best = (r, v);
            }
        }
        let (a, b) = ((best.0 - step).max(0.0), (best.0 + step).min(hi));
        let (r, v) = golden_max(|r| self.df(r).abs(), a, b);
        if v > best.1 {
            (r, v)
        } else {
            best
        }
    }
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-15 * b.abs().max(1.0) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    let r = 0.5 * (a + b);
    (r, g(r))
}

/// Two Hermite cubics with zero end slopes whose common slope at `mid` makes
/// the second derivative continuous there.
fn spline_pieces(d_l: f64, mid: f64, d_r: f64) -> Result<[Piece; 2]> {
    if !(d_l.is_finite() && d_r.is_finite() && d_l < mid && mid < d_r) {
        return Err(Error::Config(format!(
            "spline knots must satisfy d_l < rho_max < d_r, got {d_l}, {mid}, {d_r}"
        )));
    }
    let (h1, h2) = (mid - d_l, d_r - mid);
    let m = 3.0 * (1.0 / (h1 * h1) + 1.0 / (h2 * h2)) / (4.0 * (1.0 / h1 + 1.0 / h2));
    let left = Piece { a: d_l, b: mid, ya: 0.0, yb: 0.5, sa: 0.0, sb: m };
    let right = Piece { a: mid, b: d_r, ya: 0.5, yb: 1.0, sa: m, sb: 0.0 };
    if left.min_slope() < -1e-12 || right.min_slope() < -1e-12 {
        return Err(Error::Config(format!(
            "spline with knots {d_l}, {mid}, {d_r} is not monotone"
        )));
    }
    Ok([left, right])
}
