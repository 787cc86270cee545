#![allow(dead_code)]

use std::f64::consts::PI;

use beltflow::grid::{DensityField, Grid};
use beltflow::mollifier::MollifierSpec;
use rand::Rng;

/// Sum of `cos^2` bumps, each vanishing outside its radius.
pub fn compact_bumps(grid: Grid, rng: &mut impl Rng, count: usize, peak: f64) -> DensityField {
    let (w, h) = (grid.width(), grid.height());
    let bumps: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let r = rng.gen_range(0.04..0.15) * w.min(h);
            let x = grid.x0 + rng.gen_range(r..w - r);
            let y = grid.y0 + rng.gen_range(r..h - r);
            (x, y, r, rng.gen_range(0.1..peak))
        })
        .collect();
    DensityField::from_fn(grid, |x, y| {
        bumps
            .iter()
            .map(|&(cx, cy, r, a)| {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                if d < r {
                    a * (0.5 * PI * d / r).cos().powi(2)
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Cellwise independent values in `[0, max)`.
pub fn noise(grid: Grid, rng: &mut impl Rng, max: f64) -> DensityField {
    let values = (0..grid.len()).map(|_| rng.gen_range(0.0..max)).collect();
    DensityField::from_values(grid, values, 0.0).unwrap()
}

/// Noise on some cells, zero elsewhere, plus a smooth background.
pub fn mixed(grid: Grid, rng: &mut impl Rng) -> DensityField {
    let mut f = compact_bumps(grid, rng, 4, 1.4);
    let p = rng.gen_range(0.0..0.5);
    for v in f.values.iter_mut() {
        if rng.gen_bool(p) {
            *v += rng.gen_range(0.0..1.2);
        }
    }
    f
}

/// Collision velocities by summing over every pair of target interface and
/// source cell, keeping the pairs inside the truncation box.
pub fn naive_velocities(field: &DensityField, spec: &MollifierSpec, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let g = field.grid;
    let r = spec.truncation_radius;
    let (kx, ky) = ((r / g.dx).ceil(), (r / g.dy).ceil());
    let s = spec.sigma;
    let grad = |x: f64, y: f64| {
        let e = s / (2.0 * PI) * (-0.5 * s * (x * x + y * y)).exp();
        (-s * x * e, -s * y * e)
    };
    let convolve = |tx: f64, ty: f64, hx: f64, hy: f64| {
        let (mut gx, mut gy) = (0.0, 0.0);
        for l in 0..g.ny {
            for k in 0..g.nx {
                let (cx, cy) = g.cell_center(k, l);
                let (ddx, ddy) = (tx - cx, ty - cy);
                if ddx.abs() > hx * (1.0 + 1e-9) || ddy.abs() > hy * (1.0 + 1e-9) {
                    continue;
                }
                let (a, b) = grad(ddx, ddy);
                let w = field.get(k, l) * g.dx * g.dy;
                gx += w * a;
                gy += w * b;
            }
        }
        (gx, gy)
    };
    let norm = |gx: f64, gy: f64| (1.0 + gx * gx + gy * gy).sqrt();
    let mut j1 = Vec::with_capacity((g.nx + 1) * g.ny);
    for jj in 0..g.ny {
        for i in 0..=g.nx {
            let (gx, gy) = convolve(g.x_interface(i), g.cell_center(0, jj).1, (kx + 0.5) * g.dx, ky * g.dy);
            j1.push(-eps * gx / norm(gx, gy));
        }
    }
    let mut j2 = Vec::with_capacity(g.nx * (g.ny + 1));
    for jj in 0..=g.ny {
        for i in 0..g.nx {
            let (gx, gy) = convolve(g.cell_center(i, 0).0, g.y_interface(jj), kx * g.dx, (ky + 0.5) * g.dy);
            j2.push(-eps * gy / norm(gx, gy));
        }
    }
    (j1, j2)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
