//! Exact-arithmetic oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub struct Factorials(Vec<BigInt>);

impl Factorials {
    pub fn up_to(n: usize) -> Self {
        let mut f = vec![BigInt::one()];
        for k in 1..=n {
            let next = &f[k - 1] * BigInt::from(k);
            f.push(next);
        }
        Self(f)
    }

    pub fn get(&self, n: i64) -> &BigInt {
        &self.0[usize::try_from(n).expect("nonnegative factorial argument")]
    }
}

/// `(l1 l2 l3; 0 0 0)²` from the general Racah sum, in exact rationals.
pub fn racah_zero_sq(f: &Factorials, l1: i64, l2: i64, l3: i64) -> BigRational {
    if l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return BigRational::zero();
    }
    let delta = BigRational::new(
        f.get(l1 + l2 - l3) * f.get(l1 - l2 + l3) * f.get(-l1 + l2 + l3),
        f.get(l1 + l2 + l3 + 1).clone(),
    );
    let kmin = 0.max(l2 - l3).max(l1 - l3);
    let kmax = (l1 + l2 - l3).min(l1).min(l2);
    let mut s = BigRational::zero();
    for k in kmin..=kmax {
        let den = f.get(k)
            * f.get(l3 - l2 + k)
            * f.get(l3 - l1 + k)
            * f.get(l1 + l2 - l3 - k)
            * f.get(l1 - k)
            * f.get(l2 - k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            s += term;
        } else {
            s -= term;
        }
    }
    let prod = f.get(l1) * f.get(l2) * f.get(l3);
    let prod = BigRational::from_integer(&prod * &prod);
    delta * prod * &s * s
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

/// `J₀(x)` from 50 terms of its power series in exact rationals; `x` is
/// taken as an exact binary fraction.
pub fn j0_series_exact(x: f64) -> f64 {
    let xr = BigRational::from_float(x).expect("finite argument");
    let q = &xr * &xr / BigRational::from_integer(BigInt::from(4));
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..=50i64 {
        term = -term * &q / BigRational::from_integer(BigInt::from(k * k));
        sum += &term;
    }
    to_f64(&sum)
}

/// `Var[ν_{j;3}]` as a triple sum of squared 3j symbols over the band:
/// `48π² Σ a_a a_b a_c · 2 (a b c; 0 0 0)²` with `a_ℓ = w_ℓ(2ℓ+1)/4π`.
pub fn q3_variance_by_wigner(p: &needlets::BandProfile) -> f64 {
    use needlets::cubature::CompensatedSum;
    use needlets::wigner::{wigner3j_zero_sq, TripleIndex};
    use std::f64::consts::PI;
    let coef: Vec<(usize, f64)> = p
        .ells
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, p.normalized_weight(i) * (2 * l + 1) as f64 / (4.0 * PI)))
        .collect();
    let mut s = CompensatedSum::new();
    for &(a, ca) in &coef {
        for &(b, cb) in &coef {
            for &(c, cc) in &coef {
                let w = wigner3j_zero_sq(TripleIndex::new(a, b, c));
                if w != 0.0 {
                    s.add(ca * cb * cc * 2.0 * w);
                }
            }
        }
    }
    48.0 * PI * PI * s.value()
}

/// `2 Σ w_ℓ² (2ℓ+1)`, the variance of `ν_{j;2}` from its chi-square form.
pub fn q2_variance_by_decomposition(p: &needlets::BandProfile) -> f64 {
    p.ells.iter().enumerate().map(|(i, &l)| 2.0 * p.normalized_weight(i).powi(2) * (2 * l + 1) as f64).sum()
}
