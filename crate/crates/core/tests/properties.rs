mod common;

use beltflow::congestion::CongestionModel;
use beltflow::diagnostics::bounds::{theoretical_bounds, BoundInputs};
use beltflow::diagnostics::{appendix_checks, entropy_residual, entropy_tolerance};
use beltflow::driver::{FieldSpec, RunConfig, Setup};
use beltflow::grid::{discrete_tv, l1_norm, DensityField, Grid};
use beltflow::mollifier::MollifierSpec;
use beltflow::nonlocal::{ConvolutionMethod, NonlocalOperator};
use beltflow::scheme::{SchemeKind, SweepState};
use beltflow::velocity::{Rect, VelocityNorms};
use proptest::prelude::*;

const N: usize = 16;
const H: f64 = 0.01;

fn grid() -> Grid {
    Grid::new(N, N, H, H, 0.0, 0.0).unwrap()
}

fn field_strategy(max: f64) -> impl Strategy<Value = DensityField> {
    prop::collection::vec(0.0..max, N * N).prop_map(|v| DensityField::from_values(grid(), v, 0.0).unwrap())
}

fn uniform_config(kind: SchemeKind, eps: f64, v1: f64, v2: f64) -> RunConfig {
    RunConfig {
        domain: Rect { x0: 0.0, y0: 0.0, x1: N as f64 * H, y1: N as f64 * H },
        dx: H,
        dy: H,
        scheme: kind,
        epsilon: eps,
        field: FieldSpec::Uniform { v1, v2 },
        t_end: 1.0,
        ..Default::default()
    }
}

fn kind_strategy() -> impl Strategy<Value = SchemeKind> {
    prop_oneof![Just(SchemeKind::Roe), Just(SchemeKind::Lxf)]
}

fn mirror_x(f: &DensityField) -> DensityField {
    let g = f.grid;
    let mut out = f.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.set(i, j, f.get(g.nx - 1 - i, j));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norms_are_homogeneous(f in field_strategy(2.0), c in 0.0f64..10.0) {
        let mut g = f.clone();
        g.scale(c);
        prop_assert!((l1_norm(&g) - c * l1_norm(&f)).abs() <= 1e-12 * (1.0 + c * l1_norm(&f)));
        prop_assert!((discrete_tv(&g) - c * discrete_tv(&f)).abs() <= 1e-12 * (1.0 + c * discrete_tv(&f)));
    }

    #[test]
    fn tv_ignores_constant_shifts(f in field_strategy(2.0), c in 0.0f64..3.0) {
        let mut g = f.clone();
        g.values.iter_mut().for_each(|v| *v += c);
        prop_assert!((discrete_tv(&g) - discrete_tv(&f)).abs() <= 1e-12 * (1.0 + discrete_tv(&f)));
        prop_assert_eq!(discrete_tv(&DensityField::constant(grid(), c)), 0.0);
    }

    #[test]
    fn steps_conserve_mass_and_positivity(
        f in field_strategy(1.8),
        kind in kind_strategy(),
        eps in 0.0f64..1.0,
        v1 in -0.6f64..0.6,
        v2 in -0.6f64..0.6,
    ) {
        prop_assume!(v1.abs() + v2.abs() > 1e-3);
        let setup = Setup::with_initial(&uniform_config(kind, eps, v1, v2), f).unwrap();
        let m0 = l1_norm(&setup.initial);
        let mut sim = setup.simulation();
        for _ in 0..20 {
            sim.step().unwrap();
            prop_assert!(sim.state.min() >= 0.0);
        }
        prop_assert!((l1_norm(&sim.state) - m0).abs() <= 1e-13 * m0.max(1e-300));
    }

    #[test]
    fn steps_commute_with_reflection(
        f in field_strategy(1.8),
        kind in kind_strategy(),
        v1 in 0.05f64..0.6,
    ) {
        let a = Setup::with_initial(&uniform_config(kind, 0.83, v1, 0.0), f.clone()).unwrap();
        let b = Setup::with_initial(&uniform_config(kind, 0.83, -v1, 0.0), mirror_x(&f)).unwrap();
        let (mut sa, mut sb) = (a.simulation(), b.simulation());
        for _ in 0..5 {
            sa.step().unwrap();
            sb.step().unwrap();
        }
        let back = mirror_x(&sb.state);
        prop_assert!(common::max_abs_diff(&sa.state.values, &back.values) < 1e-12);
    }

    #[test]
    fn separable_convolution_matches_direct(f in field_strategy(2.0)) {
        let spec = MollifierSpec::new(1e4).unwrap();
        let d = NonlocalOperator::new(grid(), spec, 0.83, ConvolutionMethod::Direct).unwrap().evaluate(&f, 0).unwrap();
        let s = NonlocalOperator::new(grid(), spec, 0.83, ConvolutionMethod::Separable).unwrap().evaluate(&f, 0).unwrap();
        prop_assert!(common::max_abs_diff(&d.j1, &s.j1) < 1e-10);
        prop_assert!(common::max_abs_diff(&d.j2, &s.j2) < 1e-10);
        prop_assert!(d.max_abs() <= 0.83);
    }

    #[test]
    fn collision_inequalities_hold(f in field_strategy(2.0), eps in 0.01f64..2.0) {
        let spec = MollifierSpec::new(1e4).unwrap();
        let j = NonlocalOperator::new(grid(), spec, eps, ConvolutionMethod::Separable).unwrap().evaluate(&f, 0).unwrap();
        let r = appendix_checks(&j, &spec.sup_norms(), l1_norm(&f), H, H);
        for (name, v) in r.entries() {
            prop_assert!(v <= 1.0, "{} = {}", name, v);
        }
    }

    #[test]
    fn collision_ratios_do_not_depend_on_epsilon(f in field_strategy(2.0), eps in 0.01f64..2.0) {
        let spec = MollifierSpec::new(1e4).unwrap();
        let k = spec.sup_norms();
        let eval = |e: f64| {
            let j = NonlocalOperator::new(grid(), spec, e, ConvolutionMethod::Separable).unwrap().evaluate(&f, 0).unwrap();
            appendix_checks(&j, &k, l1_norm(&f), H, H)
        };
        let (a, b) = (eval(1.0), eval(eps));
        for ((name, x), (_, y)) in a.entries().into_iter().zip(b.entries()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "{}: {} vs {}", name, x, y);
        }
    }

    #[test]
    fn first_difference_ratios_are_scale_invariant_for_dilute_data(f in field_strategy(1.0), c in 0.1f64..10.0) {
        let spec = MollifierSpec::new(1e4).unwrap();
        let k = spec.sup_norms();
        let eval = |s: f64| {
            let mut g = f.clone();
            g.scale(s);
            let j = NonlocalOperator::new(grid(), spec, 0.83, ConvolutionMethod::Separable).unwrap().evaluate(&g, 0).unwrap();
            appendix_checks(&j, &k, l1_norm(&g), H, H)
        };
        let (a, b) = (eval(1e-9), eval(1e-9 * c));
        prop_assert!((a.first_along - b.first_along).abs() <= 1e-6 * a.first_along);
        prop_assert!((a.first_across - b.first_across).abs() <= 1e-6 * a.first_across);
    }

    #[test]
    fn entropy_inequality_holds_for_intermediate_sweep(
        f in field_strategy(1.8),
        kind in kind_strategy(),
        kappa in 0.0f64..2.5,
        v1 in -0.6f64..0.6,
        v2 in -0.6f64..0.6,
    ) {
        prop_assume!(v1.abs() + v2.abs() > 1e-3);
        let cfg = RunConfig { y_sweep: SweepState::Intermediate, ..uniform_config(kind, 0.83, v1, v2) };
        let setup = Setup::with_initial(&cfg, f).unwrap();
        let rec = setup.simulation().step().unwrap().unwrap();
        let r = entropy_residual(&setup.scheme, &setup.model, &rec.prev, &rec.out, &rec.j, &setup.velocity, rec.dt, kappa).unwrap();
        prop_assert!(r <= entropy_tolerance(kappa), "residual {}", r);
    }

    #[test]
    fn bv_constant_grows_with_time(t1 in 0.0f64..1e-6, dt in 0.0f64..1e-6, tv0 in 0.0f64..10.0) {
        let inputs = BoundInputs {
            epsilon: 0.83,
            lipschitz: CongestionModel::atan(50.0, 1.0).unwrap().lipschitz_constant(),
            kernel: MollifierSpec::new(1e4).unwrap().sup_norms(),
            velocity: VelocityNorms { v1_sup: 0.42, v2_sup: 0.2, jac: [[14.0, 7.0], [7.0, 14.0]], hess: [[400.0; 3]; 2] },
            mass0: 0.1,
            linf0: 1.0,
            tv0,
        };
        for kind in [SchemeKind::Roe, SchemeKind::Lxf] {
            let a = theoretical_bounds(&inputs, t1, kind);
            let b = theoretical_bounds(&inputs, t1 + dt, kind);
            prop_assert!(b.cx >= a.cx && a.cx >= tv0 * (1.0 - 1e-15));
            prop_assert!(b.linf_bound(1.0, t1 + dt) >= a.linf_bound(1.0, t1));
            prop_assert!(a.ct >= 0.0);
        }
    }
}
