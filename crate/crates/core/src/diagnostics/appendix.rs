use crate::mollifier::KernelNorms;
use crate::nonlocal::InterfaceVelocities;

/// Largest ratio of observed to admissible value for each family of
/// discrete estimates on `J`. A ratio `<= 1` means the estimate holds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AppendixRatios {
    pub sup: f64,
    /// First differences along the normal direction.
    pub first_along: f64,
    /// First differences across, tangential to the interface.
    pub first_across: f64,
    pub second: f64,
    pub mixed: f64,
}

impl AppendixRatios {
    pub fn max(&self) -> f64 {
        self.sup
            .max(self.first_along)
            .max(self.first_across)
            .max(self.second)
            .max(self.mixed)
    }

    pub fn entries(&self) -> [(&'static str, f64); 5] {
        [
            ("sup", self.sup),
            ("first_along", self.first_along),
            ("first_across", self.first_across),
            ("second", self.second),
            ("mixed", self.mixed),
        ]
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates the estimates for `J = J[rho]` with `mass = ||rho||_L1`.
pub fn appendix_checks(j: &InterfaceVelocities, kernel: &KernelNorms, mass: f64, dx: f64, dy: f64) -> AppendixRatios {
    let eps = j.epsilon;
    let (nx, ny) = (j.nx, j.ny);
    let c = 2.0 * kernel.third_sup * mass + 3.0 * kernel.hess_sup.powi(2) * mass * mass;
    let first = |h: f64| 2.0 * eps * h * kernel.hess_sup * mass;
    let j1 = |i: usize, jj: usize| j.j1(i, jj);
    let j2 = |i: usize, jj: usize| j.j2(i, jj);

    let mut r = AppendixRatios {
        sup: ratio(j.max_abs(), eps),
        ..Default::default()
    };

    let mut along: f64 = 0.0;
    let mut across: f64 = 0.0;
    let mut second: f64 = 0.0;
    let mut mixed: f64 = 0.0;
    for jj in 0..ny {
        for i in 0..nx {
            along = along.max((j1(i + 1, jj) - j1(i, jj)).abs() / dx);
            if i >= 1 {
                second = second.max((j1(i + 1, jj) - 2.0 * j1(i, jj) + j1(i - 1, jj)).abs() / (dx * dx));
            }
        }
        for i in 0..=nx {
            if jj + 1 < ny {
                across = across.max((j1(i, jj + 1) - j1(i, jj)).abs() / dy);
                if i >= 1 {
                    let m = j1(i, jj) - j1(i, jj + 1) - j1(i - 1, jj) + j1(i - 1, jj + 1);
                    mixed = mixed.max(m.abs() / (dx * dy));
                }
            }
        }
    }
    for jj in 0..=ny {
        for i in 0..nx {
            if jj < ny {
                along = along.max((j2(i, jj + 1) - j2(i, jj)).abs() / dy);
                if jj >= 1 {
                    second = second.max((j2(i, jj + 1) - 2.0 * j2(i, jj) + j2(i, jj - 1)).abs() / (dy * dy));
                }
            }
            if i + 1 < nx {
                across = across.max((j2(i + 1, jj) - j2(i, jj)).abs() / dx);
                if jj >= 1 {
                    let m = j2(i, jj) - j2(i + 1, jj) - j2(i, jj - 1) + j2(i + 1, jj - 1);
                    mixed = mixed.max(m.abs() / (dx * dy));
                }
            }
        }
    }
    // All differences are already divided by their step, so the
    // admissible values are taken at unit spacing.
    r.first_along = ratio(along, first(1.0));
    r.first_across = ratio(across, first(1.0));
    r.second = ratio(second, 2.0 * eps * c);
    r.mixed = ratio(mixed, 2.0 * eps * c);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l1_norm, DensityField, Grid};
    use crate::mollifier::MollifierSpec;
    use crate::nonlocal::build_interface_velocities;

    #[test]
    fn estimates_hold_for_a_smooth_bump() {
        let g = Grid::new(48, 40, 0.01, 0.01, 0.0, 0.0).unwrap();
        let f = DensityField::from_fn(g, |x, y| (-((x - 0.22).powi(2) + (y - 0.2).powi(2)) / 0.004).exp());
        let spec = MollifierSpec::new(1e4).unwrap();
        let j = build_interface_velocities(&f, &spec, 0.83).unwrap();
        let r = appendix_checks(&j, &spec.sup_norms(), l1_norm(&f), g.dx, g.dy);
        for (name, v) in r.entries() {
            assert!(v.is_finite() && v <= 1.0, "{name}: {v}");
        }
        assert!(r.sup > 0.0);
    }

    #[test]
    fn zero_density_gives_zero_ratios() {
        let j = InterfaceVelocities::zeros(5, 4, 0.5);
        let k = MollifierSpec::new(1e4).unwrap().sup_norms();
        assert_eq!(appendix_checks(&j, &k, 0.0, 0.01, 0.01).max(), 0.0);
    }
}
