//! Modified Bessel function of the second kind for the orders that arise
//! from Matern kernels: nonnegative integers and half-integers.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// K_nu(r) for nu a nonnegative integer or half-integer.
///
/// Half-integer orders use the closed form
/// K_{n+1/2}(r) = sqrt(pi/(2r)) e^{-r} sum_k (n+k)!/(k!(n-k)!) (2r)^{-k}.
/// Integer orders use the power/log series for r < 2 and a trapezoidal
/// evaluation of the integral representation
/// K_n(r) = int_0^inf e^{-r cosh t} cosh(n t) dt for r >= 2, where the
/// integrand is even and analytic so the trapezoid converges geometrically.
pub fn bessel_k(nu: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::BesselDomain(r));
    }
    if !(nu >= 0.0) || (2.0 * nu).fract() != 0.0 {
        return Err(Error::UnsupportedOrder(nu));
    }
    let two_nu = (2.0 * nu).round() as u32;
    if two_nu % 2 == 1 {
        Ok(bessel_k_half_integer((two_nu - 1) / 2, r))
    } else {
        Ok(bessel_k_integer(two_nu / 2, r))
    }
}

/// K_{n+1/2}(r), exact closed form.
fn bessel_k_half_integer(n: u32, r: f64) -> f64 {
    let pref = (std::f64::consts::PI / (2.0 * r)).sqrt() * (-r).exp();
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..=n as u64 {
        // (n+k)! / (k! (n-k)!) / (2r)^k built up iteratively
        let n = n as u64;
        term *= ((n + k) * (n + 1 - k)) as f64 / (k as f64 * 2.0 * r);
        sum += term;
    }
    pref * sum
}

fn bessel_k_integer(n: u32, r: f64) -> f64 {
    if r < TABLE_LO {
        bessel_k_integer_series(n, r)
    } else if n < MAX_TABLE_ORDER as u32 && r <= TABLE_HI {
        // Chebyshev acceleration of the quadrature (collocation assembly
        // evaluates this tens of millions of times)
        table_for(n as usize).eval(r)
    } else {
        bessel_k_integer_quadrature(n, r)
    }
}

const MAX_TABLE_ORDER: usize = 8;
const TABLE_LO: f64 = 0.25;
const TABLE_HI: f64 = 64.0;
const CHEB_DEGREE: usize = 32;

/// Piecewise-Chebyshev fit of e^r K_n(r) over octave intervals of [2, 64].
struct KTable {
    intervals: Vec<(f64, f64, [f64; CHEB_DEGREE])>,
}

impl KTable {
    fn build(n: u32) -> KTable {
        let breaks = [TABLE_LO, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, TABLE_HI];
        let mut intervals = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut samples = [0.0; CHEB_DEGREE];
            for (j, s) in samples.iter_mut().enumerate() {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / CHEB_DEGREE as f64;
                let x = 0.5 * (a + b) + 0.5 * (b - a) * theta.cos();
                // the series is the accurate primitive below r = 2
                let kv = if x < 2.0 {
                    bessel_k_integer_series(n, x)
                } else {
                    bessel_k_integer_quadrature(n, x)
                };
                *s = x.exp() * kv;
            }
            let mut coeffs = [0.0; CHEB_DEGREE];
            for (k, c) in coeffs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, s) in samples.iter().enumerate() {
                    let theta = std::f64::consts::PI * (j as f64 + 0.5) / CHEB_DEGREE as f64;
                    acc += s * (k as f64 * theta).cos();
                }
                *c = 2.0 * acc / CHEB_DEGREE as f64;
            }
            intervals.push((a, b, coeffs));
        }
        KTable { intervals }
    }

    fn eval(&self, r: f64) -> f64 {
        let (a, b, coeffs) = self
            .intervals
            .iter()
            .find(|(a, b, _)| r >= *a && r <= *b)
            .expect("r within table range");
        let t = (2.0 * r - a - b) / (b - a);
        clenshaw(coeffs, t) * (-r).exp()
    }
}

fn clenshaw(coeffs: &[f64; CHEB_DEGREE], t: f64) -> f64 {
    let (mut b0, mut b1) = (0.0_f64, 0.0_f64);
    for &c in coeffs.iter().skip(1).rev() {
        let tmp = b0;
        b0 = 2.0 * t * b0 - b1 + c;
        b1 = tmp;
    }
    t * b0 - b1 + 0.5 * coeffs[0]
}

fn table_for(n: usize) -> &'static KTable {
    use std::sync::OnceLock;
    static TABLES: [OnceLock<KTable>; MAX_TABLE_ORDER] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    TABLES[n].get_or_init(|| KTable::build(n as u32))
}

/// Modified Bessel function of the first kind, integer order (power series).
fn bessel_i_integer(n: u32, r: f64) -> f64 {
    let half = r / 2.0;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let x2 = half * half;
    for k in 1..200 {
        term *= x2 / (k as f64 * (k as f64 + n as f64));
        sum += term;
        if term.abs() < sum.abs() * 1e-18 {
            break;
        }
    }
    sum
}

/// Power/log series, DLMF 10.31.2. Accurate for small arguments; the
/// cancellation against the log term stays benign below r = 2.
fn bessel_k_integer_series(n: u32, r: f64) -> f64 {
    let half = r / 2.0;
    let log_half = half.ln();
    let n_us = n as usize;

    // finite sum: (1/2)(r/2)^{-n} sum_{k=0}^{n-1} (n-k-1)!/k! (-r^2/4)^k
    let mut finite = 0.0;
    if n > 0 {
        let mut coeff = factorial(n_us - 1); // k = 0 term: (n-1)!/0!
        let mut power = half.powi(-(n as i32)) * 0.5;
        for k in 0..n_us {
            finite += coeff * power;
            if k + 1 < n_us {
                // (n-k-1)!/k! -> (n-k-2)!/(k+1)!
                coeff /= ((n_us - k - 1) * (k + 1)) as f64;
                power *= -(half * half);
            }
        }
    }

    // log term: (-1)^{n+1} ln(r/2) I_n(r)
    let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
    let log_term = -sign_n * log_half * bessel_i_integer(n, r);

    // psi series: (-1)^n (1/2)(r/2)^n sum_k (psi(k+1)+psi(n+k+1))/(k!(n+k)!) (r^2/4)^k
    let mut psi_k = -EULER_GAMMA; // psi(1)
    let mut psi_nk = -EULER_GAMMA + (1..=n_us).map(|j| 1.0 / j as f64).sum::<f64>(); // psi(n+1)
    let mut base = half.powi(n as i32) * 0.5 / factorial(n_us); // (r/2)^n / (2 n!)
    let mut psi_sum = (psi_k + psi_nk) * base;
    let x2 = half * half;
    for k in 1..200 {
        base *= x2 / (k as f64 * (k + n_us) as f64);
        psi_k += 1.0 / k as f64;
        psi_nk += 1.0 / (k + n_us) as f64;
        let term = (psi_k + psi_nk) * base;
        psi_sum += term;
        if term.abs() < psi_sum.abs() * 1e-18 + 1e-300 {
            break;
        }
    }
    finite + log_term + sign_n * psi_sum
}

/// Trapezoidal rule on the even analytic integrand e^{-r cosh t} cosh(nt).
/// The error decays like exp(-pi^2/step), far below 1e-10 at step 0.1.
fn bessel_k_integer_quadrature(n: u32, r: f64) -> f64 {
    let step = 0.1_f64;
    let nf = n as f64;
    let mut sum = 0.5 * (-r).exp(); // t = 0 term at half weight (even fold)
    let mut t = step;
    while t <= 60.0 {
        let expo = -r * t.cosh();
        // cosh(nt) <= e^{nt}: once the integrand underflows we are done
        if expo + nf * t < -745.0 {
            break;
        }
        sum += expo.exp() * (nf * t).cosh();
        t += step;
    }
    sum * step
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
