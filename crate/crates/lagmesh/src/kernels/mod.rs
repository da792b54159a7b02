//! Matern and surface-spline kernels, their derivatives, and the
//! polynomial/Vandermonde machinery for conditionally positive definite
//! interpolation.

pub mod bessel;
pub mod poly;

pub use bessel::bessel_k;
pub use poly::{polynomial_basis, vandermonde, PolynomialBasis, VandermondeSystem};

use crate::error::{Error, Result};

/// Kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Matern,
    SurfaceSpline,
}

impl KernelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::Matern => "matern",
            KernelFamily::SurfaceSpline => "surface_spline",
        }
    }
}

/// A radial kernel of order m in dimension d.
///
/// Matern: kappa(x) = scale * K_{m-d/2}(|x|) |x|^{m-d/2}.
/// Surface spline: phi(x) = sign * scale * |x|^{2m-d} (d odd) or
/// sign * scale * |x|^{2m-d} log|x| (d even), with the sign chosen so the
/// quadratic form is positive on coefficient vectors annihilating
/// polynomials of degree m-1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub m: u32,
    pub d: u32,
    pub sign: f64,
    pub scale: f64,
}

impl Kernel {
    pub fn matern(m: u32, d: u32) -> Kernel {
        assert!(2 * m > d, "Matern requires 2m > d");
        Kernel {
            family: KernelFamily::Matern,
            m,
            d,
            sign: 1.0,
            scale: 1.0,
        }
    }

    /// Surface spline with the CPD-positive default sign.
    pub fn surface_spline(m: u32, d: u32) -> Kernel {
        assert!(2 * m > d, "surface spline requires 2m > d");
        Kernel {
            family: KernelFamily::SurfaceSpline,
            m,
            d,
            sign: cpd_sign(m, d),
            scale: 1.0,
        }
    }

    pub fn with_sign(mut self, sign: f64) -> Kernel {
        self.sign = sign;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Kernel {
        self.scale = scale;
        self
    }

    /// Matern smoothness order nu = m - d/2.
    pub fn matern_nu(&self) -> f64 {
        self.m as f64 - self.d as f64 / 2.0
    }

    /// Dimension of the polynomial side-condition space (surface spline),
    /// zero for Matern.
    pub fn poly_dim(&self) -> usize {
        match self.family {
            KernelFamily::Matern => 0,
            KernelFamily::SurfaceSpline => poly::dim_pi(self.m as usize - 1, self.d as usize),
        }
    }

    /// For derivatives of order >= 2m - d the kernel is singular at 0.
    pub fn singular_order(&self) -> i64 {
        2 * self.m as i64 - self.d as i64
    }
}

/// Sign that makes the surface spline conditionally positive definite with
/// respect to polynomials of degree m-1: (-1)^{ceil((2m-d)/2)} for d odd,
/// (-1)^{(2m-d)/2 + 1} for d even.
fn cpd_sign(m: u32, d: u32) -> f64 {
    let beta = 2 * m as i64 - d as i64;
    let exponent = if d % 2 == 1 {
        (beta + 1) / 2
    } else {
        beta / 2 + 1
    };
    if exponent % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Gamma function at positive integer and half-integer arguments.
fn gamma_half(two_z: u32) -> f64 {
    assert!(two_z > 0);
    if two_z % 2 == 0 {
        let n = (two_z / 2) as usize;
        (1..n).map(|k| k as f64).product()
    } else {
        // Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let n = ((two_z - 1) / 2) as u64;
        let mut val = std::f64::consts::PI.sqrt();
        for k in 1..=n {
            val *= (2 * k - 1) as f64 / 2.0;
        }
        val
    }
}

/// Evaluate the kernel at `x`.
pub fn eval_kernel(k: &Kernel, x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    eval_kernel_radial(k, r)
}

/// Evaluate the kernel as a function of the radius.
pub fn eval_kernel_radial(k: &Kernel, r: f64) -> f64 {
    radial_profile(k, 0, r)
        .expect("order-0 radial profile is total")
        * k.sign
        * k.scale
}

/// F_j(r): the j-th iterate of F -> F'/r applied to the unsigned,
/// unscaled radial profile F_0. Every partial derivative of a radial
/// function is a polynomial combination of these.
///
/// Matern: F_0(r) = K_nu(r) r^nu gives F_j = (-1)^j K_{|nu-j|}(r) r^{nu-j}.
/// Surface spline d odd: F_j = E(E-2)...(E-2j+2) r^{E-2j}, E = 2m-d.
/// Surface spline d even: F_j = a_j r^{E-2j} ln r + b_j r^{E-2j} with
/// a_{j+1} = (E-2j) a_j, b_{j+1} = a_j + (E-2j) b_j.
///
/// Returns None when the value at r = 0 does not exist (the caller decides
/// whether that is an error).
fn radial_profile(k: &Kernel, j: u32, r: f64) -> Option<f64> {
    match k.family {
        KernelFamily::Matern => {
            let nu = k.matern_nu();
            let mu = nu - j as f64; // order after j lowering steps
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if r == 0.0 {
                if mu > 0.0 {
                    // limit of K_mu(r) r^mu as r -> 0+
                    let two_mu = (2.0 * mu).round() as u32;
                    Some(sign * 2f64.powf(mu - 1.0) * gamma_half(two_mu))
                } else {
                    None
                }
            } else {
                let knu = bessel_k(mu.abs(), r).expect("valid order and radius");
                Some(sign * knu * r.powf(mu))
            }
        }
        KernelFamily::SurfaceSpline => {
            let e = 2 * k.m as i64 - k.d as i64;
            let p = e - 2 * j as i64; // power of r carried by F_j
            if k.d % 2 == 1 {
                let mut c = 1.0;
                for step in 0..j as i64 {
                    c *= (e - 2 * step) as f64;
                }
                if r == 0.0 {
                    if c == 0.0 {
                        Some(0.0)
                    } else if p > 0 {
                        Some(0.0)
                    } else if p == 0 {
                        Some(c)
                    } else {
                        None
                    }
                } else {
                    Some(c * r.powi(p as i32))
                }
            } else {
                let (mut a, mut b) = (1.0, 0.0);
                for step in 0..j as i64 {
                    let factor = (e - 2 * step) as f64;
                    let na = factor * a;
                    let nb = a + factor * b;
                    a = na;
                    b = nb;
                }
                if r == 0.0 {
                    if a == 0.0 && b == 0.0 {
                        Some(0.0)
                    } else if p > 0 {
                        Some(0.0)
                    } else {
                        // r^0 ln r or negative powers diverge
                        None
                    }
                } else {
                    Some(r.powi(p as i32) * (a * r.ln() + b))
                }
            }
        }
    }
}

/// One term of the closed-form derivative of a radial function:
/// coefficient * x^monomial * F_level(r).
#[derive(Clone, Debug)]
struct RadialTerm {
    coeff: f64,
    monomial: Vec<u32>,
    level: u32,
}

/// Symbolic differentiation of sum_i c_i x^{gamma_i} F_{k_i}(r) with respect
/// to coordinate `axis`, using d/dx_i F_k(r) = x_i F_{k+1}(r).
fn differentiate_terms(terms: &[RadialTerm], axis: usize) -> Vec<RadialTerm> {
    let mut out: Vec<RadialTerm> = Vec::new();
    for t in terms {
        if t.monomial[axis] > 0 {
            let mut m = t.monomial.clone();
            m[axis] -= 1;
            push_term(
                &mut out,
                RadialTerm {
                    coeff: t.coeff * t.monomial[axis] as f64,
                    monomial: m,
                    level: t.level,
                },
            );
        }
        let mut m = t.monomial.clone();
        m[axis] += 1;
        push_term(
            &mut out,
            RadialTerm {
                coeff: t.coeff,
                monomial: m,
                level: t.level + 1,
            },
        );
    }
    out
}

fn push_term(out: &mut Vec<RadialTerm>, t: RadialTerm) {
    for existing in out.iter_mut() {
        if existing.level == t.level && existing.monomial == t.monomial {
            existing.coeff += t.coeff;
            return;
        }
    }
    out.push(t);
}

/// Evaluate D^alpha k at `x`. The multi-index `alpha` has one entry per
/// coordinate. Exact closed-form radial calculus for every order; at a
/// kernel center the derivative exists only for |alpha| < 2m - d.
pub fn eval_kernel_derivative(k: &Kernel, alpha: &[usize], x: &[f64]) -> Result<f64> {
    assert_eq!(alpha.len(), x.len());
    let order: usize = alpha.iter().sum();
    if order == 0 {
        return Ok(eval_kernel(k, x));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 && order as i64 >= k.singular_order() {
        return Err(Error::KernelDerivativeSingularity {
            order,
            threshold: k.singular_order(),
        });
    }

    let dim = x.len();
    let mut terms = vec![RadialTerm {
        coeff: 1.0,
        monomial: vec![0; dim],
        level: 0,
    }];
    for (axis, &count) in alpha.iter().enumerate() {
        for _ in 0..count {
            terms = differentiate_terms(&terms, axis);
        }
    }

    let mut total = 0.0;
    for t in &terms {
        if r == 0.0 {
            // monomial factors vanish in the limit; only pure-profile terms
            // survive, and those profiles are finite here (checked above)
            if t.monomial.iter().any(|&e| e > 0) {
                continue;
            }
            match radial_profile(k, t.level, 0.0) {
                Some(f) => total += t.coeff * f,
                None => {
                    return Err(Error::KernelDerivativeSingularity {
                        order,
                        threshold: k.singular_order(),
                    })
                }
            }
        } else {
            let mono: f64 = t
                .monomial
                .iter()
                .zip(x.iter())
                .map(|(&e, &v)| v.powi(e as i32))
                .product();
            let f = radial_profile(k, t.level, r).expect("nonzero radius");
            total += t.coeff * mono * f;
        }
    }
    Ok(total * k.sign * k.scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn surface_spline_values() {
        // d=1, m=1, sign*scale = 1: |x|
        let k = Kernel::surface_spline(1, 1).with_sign(1.0);
        assert_eq!(eval_kernel(&k, &[2.0]), 2.0);
        assert_eq!(eval_kernel(&k, &[0.0]), 0.0);
        // d=2, m=2: |x|^2 log |x| vanishes at |x| = 1 regardless of sign
        let k = Kernel::surface_spline(2, 2);
        assert_eq!(eval_kernel(&k, &[1.0, 0.0]), 0.0);
        assert_eq!(eval_kernel(&k, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn matern_nu_half_closed_form() {
        // d=3, m=2: nu = 1/2, kappa(x) = sqrt(pi/2) e^{-r}
        let k = Kernel::matern(2, 3);
        let expect = |r: f64| (std::f64::consts::PI / 2.0).sqrt() * (-r).exp();
        for r in [0.01, 0.5, 1.0, 3.0] {
            let got = eval_kernel(&k, &[r, 0.0, 0.0]);
            assert!(
                (got - expect(r)).abs() <= 1e-10 * expect(r),
                "r = {r}: {got} vs {}",
                expect(r)
            );
        }
        assert!((eval_kernel(&k, &[1.0, 0.0, 0.0]) - 0.4610685).abs() < 1e-7);
    }

    #[test]
    fn matern_value_at_zero_is_limit() {
        // limit 2^{nu-1} Gamma(nu)
        for (m, d) in [(1u32, 1u32), (2, 1), (2, 2), (3, 2), (2, 3)] {
            let k = Kernel::matern(m, d);
            let nu = k.matern_nu();
            let expect = 2f64.powf(nu - 1.0) * gamma_half((2.0 * nu).round() as u32);
            let at_zero = eval_kernel(&k, &vec![0.0; d as usize]);
            assert!((at_zero - expect).abs() <= 1e-12 * expect);
            // continuity: tiny radius approaches the limit
            let mut x = vec![0.0; d as usize];
            x[0] = 1e-8;
            let near = eval_kernel(&k, &x);
            assert!(
                (near - expect).abs() <= 1e-6 * expect,
                "m={m} d={d}: near={near} limit={expect}"
            );
        }
    }

    #[test]
    fn radial_symmetry_random_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let kernels = [
            Kernel::matern(2, 2),
            Kernel::matern(3, 2),
            Kernel::matern(1, 1),
            Kernel::surface_spline(2, 2),
            Kernel::surface_spline(2, 1),
        ];
        for k in &kernels {
            for _ in 0..200 {
                let x: Vec<f64> = (0..k.d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                let a = eval_kernel(k, &x);
                let b = eval_kernel(k, &neg);
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn derivative_order_zero_equals_value() {
        let k = Kernel::matern(2, 2);
        let x = [0.3, -0.4];
        assert_eq!(
            eval_kernel_derivative(&k, &[0, 0], &x).unwrap(),
            eval_kernel(&k, &x)
        );
    }

    #[test]
    fn surface_spline_cubic_derivative() {
        // d=1, m=2, raw phi = |x|^3 (cpd sign is +1 here): d/dx at 2 -> 12
        let k = Kernel::surface_spline(2, 1);
        assert_eq!(k.sign, 1.0);
        let got = eval_kernel_derivative(&k, &[1], &[2.0]).unwrap();
        assert!((got - 12.0).abs() < 1e-12);
        // odd function: at -2 -> -12... derivative of |x|^3 is 3x|x|, even? no:
        // d/dx |x|^3 = 3 x^2 sign(x), at -2: -12
        let got = eval_kernel_derivative(&k, &[1], &[-2.0]).unwrap();
        assert!((got + 12.0).abs() < 1e-12);
    }

    #[test]
    fn matern_first_derivative_closed_form() {
        // d=3, m=2: kappa = sqrt(pi/2) e^{-r}; d/dx1 at (1,0,0) = -sqrt(pi/2) e^{-1}
        let k = Kernel::matern(2, 3);
        let got = eval_kernel_derivative(&k, &[1, 0, 0], &[1.0, 0.0, 0.0]).unwrap();
        let expect = -(std::f64::consts::PI / 2.0).sqrt() * (-1.0_f64).exp();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    /// Central finite difference of a partial derivative in one axis.
    fn fd_derivative(k: &Kernel, alpha: &[usize], x: &[f64], axis: usize, h: f64) -> f64 {
        let mut lo = alpha.to_vec();
        lo[axis] -= 1;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[axis] += h;
        xm[axis] -= h;
        let fp = eval_kernel_derivative(k, &lo, &xp).unwrap();
        let fm = eval_kernel_derivative(k, &lo, &xm).unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kernels = [
            Kernel::matern(2, 2),
            Kernel::matern(3, 2),
            Kernel::matern(2, 1),
            Kernel::surface_spline(2, 2),
            Kernel::surface_spline(3, 2),
            Kernel::surface_spline(2, 1),
        ];
        for k in &kernels {
            let d = k.d as usize;
            let max_order = (k.m as usize).min(3);
            for _ in 0..40 {
                // keep away from the center where profiles get steep
                let x: Vec<f64> = (0..d)
                    .map(|_| {
                        let v: f64 = rng.gen_range(0.3..1.5);
                        if rng.gen_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect();
                for order in 1..=max_order {
                    // random multi-index of this total order
                    let mut alpha = vec![0usize; d];
                    for _ in 0..order {
                        alpha[rng.gen_range(0..d)] += 1;
                    }
                    let axis = alpha.iter().position(|&a| a > 0).unwrap();
                    let exact = eval_kernel_derivative(k, &alpha, &x).unwrap();
                    let fd = fd_derivative(k, &alpha, &x, axis, 1e-5);
                    let denom = exact.abs().max(1.0);
                    assert!(
                        ((exact - fd) / denom).abs() <= 1e-5,
                        "{:?} m={} d={} alpha={alpha:?} x={x:?}: exact={exact} fd={fd}",
                        k.family,
                        k.m,
                        k.d
                    );
                }
            }
        }
    }

    #[test]
    fn singularity_signaled_at_center() {
        // |x| in d=1: first derivative undefined at 0 (2m-d = 1)
        let k = Kernel::surface_spline(1, 1);
        assert!(matches!(
            eval_kernel_derivative(&k, &[1], &[0.0]),
            Err(Error::KernelDerivativeSingularity { .. })
        ));
        // |x|^3: second derivative 6|x| fine at 0, third singular
        let k = Kernel::surface_spline(2, 1);
        assert_eq!(eval_kernel_derivative(&k, &[2], &[0.0]).unwrap(), 0.0);
        assert!(eval_kernel_derivative(&k, &[3], &[0.0]).is_err());
        // Matern d=2 m=2 (2m-d = 2): gradient at 0 exists and is 0
        let k = Kernel::matern(2, 2);
        assert_eq!(eval_kernel_derivative(&k, &[1, 0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(eval_kernel_derivative(&k, &[2, 0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn cpd_sign_table() {
        // d=1, m=1: -|x| ; d=1, m=2: +|x|^3 ; d=2, m=2: +r^2 log r ; d=2, m=3: -r^4 log r
        assert_eq!(Kernel::surface_spline(1, 1).sign, -1.0);
        assert_eq!(Kernel::surface_spline(2, 1).sign, 1.0);
        assert_eq!(Kernel::surface_spline(2, 2).sign, 1.0);
        assert_eq!(Kernel::surface_spline(3, 2).sign, -1.0);
    }
}
