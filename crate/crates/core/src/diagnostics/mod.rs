//! Runtime checks of the a priori estimates and derived functionals.

mod appendix;
pub mod bounds;
mod entropy;

pub use appendix::{appendix_checks, AppendixRatios};
pub use bounds::{theoretical_bounds, BoundInputs, TheoreticalBounds};
pub use entropy::{entropy_residual, entropy_tolerance};

use crate::error::{Error, Result};
use crate::grid::DensityField;

/// Absolute slack allowed on every inequality check.
pub const ABS_TOL: f64 = 1e-8;
/// Relative slack allowed on every inequality check.
pub const REL_TOL: f64 = 1e-12;

/// `bound - value`, shifted so that a margin `>= 0` means the check passed.
pub fn margin(bound: f64, value: f64) -> f64 {
    if bound.is_infinite() && bound > 0.0 {
        return f64::INFINITY;
    }
    bound - value + ABS_TOL + REL_TOL * bound.abs()
}

/// Mass in cells whose center lies at or upstream of `x_d`.
pub fn region_mass(field: &DensityField, x_d: f64) -> f64 {
    let g = field.grid;
    let mut acc = 0.0;
    for j in 0..g.ny {
        let row = field.row(j);
        for (i, v) in row.iter().enumerate() {
            if g.cell_center(i, j).0 <= x_d {
                acc += v;
            }
        }
    }
    acc * g.cell_area()
}

/// Upstream mass normalised by its initial value.
pub fn outflow_mass(field: &DensityField, x_d: f64, initial_mass_in_region: f64) -> Result<f64> {
    if !(initial_mass_in_region > 0.0) {
        return Err(Error::Config(format!(
            "no initial mass upstream of x_d = {x_d}; the outflow functional is undefined"
        )));
    }
    Ok(region_mass(field, x_d) / initial_mass_in_region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn outflow_is_one_initially_and_zero_downstream() {
        let g = Grid::new(20, 10, 0.05, 0.05, 0.0, 0.0).unwrap();
        let f = DensityField::from_fn(g, |x, y| if x < 0.4 { 1.0 + y } else { 0.0 });
        let m0 = region_mass(&f, 0.5);
        assert_eq!(outflow_mass(&f, 0.5, m0).unwrap(), 1.0);
        let moved = DensityField::from_fn(g, |x, _| if x > 0.6 { 1.0 } else { 0.0 });
        assert!(outflow_mass(&moved, 0.5, m0).unwrap().abs() < 1e-12);
        assert!(outflow_mass(&moved, 0.5, 0.0).is_err());
    }

    #[test]
    fn margin_handles_infinite_bounds() {
        assert_eq!(margin(f64::INFINITY, 3.0), f64::INFINITY);
        assert!(margin(1.0, 1.0) > 0.0);
        assert!(margin(1.0, 1.1) < 0.0);
    }
}
