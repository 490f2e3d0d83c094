//! Scalar special functions used throughout the crate.
//!
//! Hermite polynomials follow the **probabilists'** convention
//! (`H_q(x) = (-1)^q φ(x)^{-1} d^q/dx^q φ(x)`, so `H_2(x) = x² - 1`), which is
//! the one that makes `E[H_n(Z₁) H_m(Z₂)] = n! ρⁿ δ_nm` for unit Gaussians. The
//! physicists' polynomials differ by a factor `2^{q/2}` and a rescaled argument;
//! do not mix the two.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI, FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_FRAC_2_PI: f64 = 0.797_884_560_802_865_4;

/// Legendre polynomial `P_ℓ(t)` by the upward three-term recurrence.
pub fn legendre_eval(ell: usize, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("Legendre argument {t} outside [-1, 1]")));
    }
    let t = t.clamp(-1.0, 1.0);
    if ell == 0 {
        return Ok(1.0);
    }
    let (mut prev, mut cur) = (1.0, t);
    for k in 1..ell {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * t * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Fills `out[ℓ] = P_ℓ(t)` for `ℓ < out.len()`. The caller guarantees `|t| ≤ 1`.
pub fn legendre_table(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for ell in 2..out.len() {
        let k = (ell - 1) as f64;
        out[ell] = ((2.0 * k + 1.0) * t * out[ell - 1] - k * out[ell - 2]) / (k + 1.0);
    }
}

/// Bessel function of the first kind of order zero.
///
/// Power series up to `x = 8`; beyond that the Hankel asymptotic form
/// `J₀(x) = √(2/πx) (P(x) cos χ − Q(x) sin χ)`, `χ = x − π/4`, with `P` and `Q`
/// given by the Cephes rational approximants of the asymptotic series.
/// Negative arguments are reflected (`J₀` is even).
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 8.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let k = k as f64;
            term *= -y / (k * k);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && term.abs() < 1e-17 {
                break;
            }
        }
        return sum;
    }
    let w = 5.0 / x;
    let z = w * w;
    let p = polevl(z, &J0_PP) / polevl(z, &J0_PQ);
    let q = polevl(z, &J0_QP) / p1evl(z, &J0_QQ);
    let xn = x - FRAC_PI_4;
    (p * xn.cos() - w * q * xn.sin()) * SQRT_FRAC_2_PI / x.sqrt()
}

fn polevl(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn p1evl(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(1.0, |acc, &c| acc * x + c)
}

const J0_PP: [f64; 7] = [
    7.969_367_292_973_471e-4,
    8.283_523_921_074_408e-2,
    1.239_533_716_464_143,
    5.447_250_030_587_687,
    8.747_165_001_998_17,
    5.303_240_382_353_949,
    1.0,
];
const J0_PQ: [f64; 7] = [
    9.244_088_105_588_637e-4,
    8.562_884_743_544_745e-2,
    1.253_527_439_010_589_5,
    5.470_977_403_304_171,
    8.761_908_832_370_695,
    5.306_052_882_353_947,
    1.0,
];
const J0_QP: [f64; 8] = [
    -1.136_638_388_984_691_6e-2,
    -1.282_527_186_705_093_1,
    -1.955_395_442_577_359_7e1,
    -9.320_601_521_237_683e1,
    -1.776_811_679_804_880_6e2,
    -1.470_775_051_549_511_8e2,
    -5.141_053_267_665_993e1,
    -6.050_143_506_007_285,
];
const J0_QQ: [f64; 7] = [
    6.431_782_561_181_78e1,
    8.564_300_259_769_806e2,
    3.882_401_836_054_016_3e3,
    7.240_467_741_956_525e3,
    5.930_727_011_873_169e3,
    2.062_093_316_603_278_3e3,
    2.420_057_402_402_914e2,
];

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite_eval(q: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return prev;
    }
    for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[q] = H_q(x)` for `q < out.len()`.
#[inline]
pub fn hermite_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = x * out[k - 1] - (k - 1) as f64 * out[k - 2];
    }
}

/// Standard Gaussian density.
pub fn gaussian_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard Gaussian distribution function.
pub fn gaussian_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Complementary error function.
///
/// A positive-term series for `erf` below 2 and a continued fraction above;
/// both keep the absolute error near 1e-16 and the continued fraction keeps
/// the relative error small in the upper tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        return 1.0 - erf_series(x);
    }
    if x > 27.5 {
        return 0.0;
    }
    // erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut t = x;
    for k in (1..=120).rev() {
        t = x + 0.5 * k as f64 / t;
    }
    (-x * x).exp() / (PI.sqrt() * t)
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/√π e^{-x²} Σ_n 2ⁿ x^{2n+1} / (2n+1)!!
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Inverse of [`gaussian_cdf`]; `p = 0` and `p = 1` map to `∓∞`.
pub fn gaussian_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Acklam's rational initial guess.
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    let p_low = 0.024_25;
    let mut z = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement against the accurate distribution function, using the
    // tail that keeps relative precision.
    for _ in 0..2 {
        let resid = if p < 0.5 { gaussian_cdf(z) - p } else { (1.0 - p) - 0.5 * erfc(z * FRAC_1_SQRT_2) };
        let u = resid / gaussian_pdf(z);
        z -= u / (1.0 + 0.5 * z * u);
    }
    z
}

/// Hermite coefficient `J_q(z) = ∫ 1{u ≤ z} H_q(u) φ(u) du` of the indicator.
///
/// For `q ≥ 1` this is `-H_{q-1}(z) φ(z)`; for `q = 0` it is `Φ(z)`.
pub fn indicator_hermite_coeff(q: usize, z: f64) -> f64 {
    if q == 0 {
        indicator_mean_coeff(z)
    } else {
        -hermite_eval(q - 1, z) * gaussian_pdf(z)
    }
}

/// Zeroth indicator coefficient, `J_0(z) = Φ(z)`.
pub fn indicator_mean_coeff(z: f64) -> f64 {
    gaussian_cdf(z)
}

/// Split of `P_ℓ(cos θ)` into Hilb's Bessel approximant and its remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbDecomposition {
    /// `(θ / sin θ)^{1/2} J₀((ℓ + ½) θ)`
    pub main_term: f64,
    /// `P_ℓ(cos θ) − main_term`
    pub error: f64,
}

pub fn hilb_decompose(ell: usize, theta: f64) -> Result<HilbDecomposition> {
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(Error::Domain(format!("Hilb angle {theta} outside (0, π/2]")));
    }
    let main_term = (theta / theta.sin()).sqrt() * bessel_j0((ell as f64 + 0.5) * theta);
    let exact = legendre_eval(ell, theta.cos())?;
    Ok(HilbDecomposition { main_term, error: exact - main_term })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_eval(5, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(legendre_eval(2, 0.5).unwrap(), -0.125, epsilon = 1e-15);
        for &x in &[0.1, 0.37, 0.8, 0.99] {
            let a = legendre_eval(3, x).unwrap();
            let b = legendre_eval(3, -x).unwrap();
            assert_abs_diff_eq!(a, -b, epsilon = 1e-15);
        }
        assert!(legendre_eval(3, 1.1).is_err());
        assert!(legendre_eval(3, 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn legendre_table_matches_scalar() {
        let mut tab = vec![0.0; 40];
        legendre_table(0.3, &mut tab);
        for (ell, v) in tab.iter().enumerate() {
            assert_abs_diff_eq!(*v, legendre_eval(ell, 0.3).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn legendre_bounded_by_one() {
        let mut tab = vec![0.0; 4097];
        for i in 0..=200 {
            let t = -1.0 + 2.0 * i as f64 / 200.0;
            legendre_table(t, &mut tab);
            let m = tab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(m <= 1.0 + 1e-12, "t = {t}: max |P| = {m}");
        }
    }

    #[test]
    fn j0_basics() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-10);
        let v = bessel_j0(50.0);
        assert!(v.abs() <= 50f64.powf(-0.5));
        // continuity across the series/asymptotic split
        assert_abs_diff_eq!(bessel_j0(8.0), bessel_j0(8.0 + 1e-12), epsilon = 1e-12);
        for i in 1..2000 {
            let x = i as f64 * 0.05;
            let v = bessel_j0(x);
            assert!(v.abs() <= 1.0);
            assert!(v.abs() <= x.powf(-0.5) + 1e-15, "x = {x}");
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(3, 2.0), 2.0);
        assert_eq!(hermite_eval(4, 0.0), 3.0);
        let mut tab = [0.0; 7];
        hermite_table(1.3, &mut tab);
        for (q, v) in tab.iter().enumerate() {
            assert_abs_diff_eq!(*v, hermite_eval(q, 1.3), epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_examples() {
        assert_abs_diff_eq!(gaussian_pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-16);
        assert_eq!(gaussian_cdf(0.0), 0.5);
        for &z in &[-6.0, -2.5, -1.0, -0.3, 0.0, 0.7, 1.5, 4.0] {
            assert_abs_diff_eq!(gaussian_cdf(z) + gaussian_cdf(-z), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.975, 0.999_999] {
            let z = gaussian_quantile(p);
            let back = if p < 0.5 { gaussian_cdf(z) } else { 1.0 - 0.5 * erfc(z * FRAC_1_SQRT_2) };
            assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-12, "p = {p}");
        }
        assert_abs_diff_eq!(gaussian_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-12);
    }

    #[test]
    fn indicator_coefficients() {
        assert_abs_diff_eq!(indicator_hermite_coeff(1, 0.0), -0.398_942_280_401_432_7, epsilon = 1e-16);
        assert_eq!(indicator_hermite_coeff(2, 0.0), 0.0);
        assert_eq!(indicator_hermite_coeff(0, 0.0), 0.5);
        assert_eq!(indicator_mean_coeff(0.0), 0.5);
    }

    #[test]
    fn hilb_domain_and_small_angle() {
        assert!(hilb_decompose(10, 0.0).is_err());
        assert!(hilb_decompose(10, 1.6).is_err());
        let d = hilb_decompose(1, 1e-6).unwrap();
        assert_abs_diff_eq!(d.main_term, 1.0, epsilon = 1e-10);
        assert!(d.error.abs() < 1e-10);
        let d = hilb_decompose(64, 0.3).unwrap();
        assert_abs_diff_eq!(d.main_term + d.error, legendre_eval(64, 0.3f64.cos()).unwrap(), epsilon = 1e-15);
    }
}
