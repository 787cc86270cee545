use crate::mollifier::KernelNorms;
use crate::scheme::SchemeKind;
use crate::velocity::VelocityNorms;

/// Everything the closed-form estimates depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub lipschitz: f64,
    pub kernel: KernelNorms,
    pub velocity: VelocityNorms,
    /// `||rho_0||_L1`.
    pub mass0: f64,
    /// `||rho_0||_inf`.
    pub linf0: f64,
    /// Discrete total variation of `rho_0`.
    pub tv0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalBounds {
    pub c_inf: f64,
    pub k1: f64,
    pub k2: f64,
    pub cx: f64,
    pub ct: f64,
    pub cxt: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c1 ||rho_0|| + c2 ||rho_0||^2`.
    pub c: f64,
}

impl TheoreticalBounds {
    pub fn linf_bound(&self, linf0: f64, t: f64) -> f64 {
        linf0 * (self.c_inf * t).exp()
    }
}

/// `(2 k2 / k1) (exp(2 t k1) - 1)`, continuous at `k1 = 0`.
fn growth(k1: f64, k2: f64, t: f64) -> f64 {
    if k1 == 0.0 {
        4.0 * k2 * t
    } else {
        2.0 * k2 * (2.0 * t * k1).exp_m1() / k1
    }
}

pub fn theoretical_bounds(p: &BoundInputs, t: f64, kind: SchemeKind) -> TheoreticalBounds {
    let eps = p.epsilon;
    let lf = p.lipschitz;
    let m = p.mass0;
    let KernelNorms { hess_sup, third_sup, .. } = p.kernel;
    let v = &p.velocity;
    let c1 = 2.0 * third_sup;
    let c2 = 3.0 * hess_sup * hess_sup;
    let c = c1 * m + c2 * m * m;
    let k2 = (4.0 * eps * c + 3.0 * v.hess_sup()) * m;
    let div = v.dv1_dx() + v.dv2_dy();
    let (c_inf, k1, ct_kernel) = match kind {
        SchemeKind::Roe => (
            div + 4.0 * eps * hess_sup * m,
            6.0 * (v.grad_sup() + 2.0 * eps * lf * hess_sup * m),
            2.0 * eps * hess_sup * m,
        ),
        SchemeKind::Lxf => (
            div + 4.0 * eps * lf * hess_sup * m,
            2.0 * v.grad_sup() + 4.0 * eps * lf * hess_sup * m,
            eps * hess_sup * m,
        ),
    };
    let cx = (2.0 * t * k1).exp() * p.tv0 + growth(k1, k2, t);
    let ct = 2.0 * (v.speed_sup() + eps * lf) * cx + (v.grad_sup() + ct_kernel) * m;
    TheoreticalBounds {
        c_inf,
        k1,
        k2,
        cx,
        ct,
        cxt: t * (cx + 2.0 * ct),
        c1,
        c2,
        c,
    }
}

/// Growth coefficient of the L1 stability estimate, with the total
/// variation of the first solution replaced by its bound `cx`.
pub fn stability_coefficient(p: &BoundInputs, sigma_mass0: f64, cx: f64) -> f64 {
    let k = &p.kernel;
    2.0 * p.epsilon * k.grad_sup * p.mass0
        + p.epsilon * p.lipschitz * k.laplacian_sup * (1.0 + sigma_mass0 * k.grad_l1) * cx
}
