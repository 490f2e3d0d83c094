//! Wigner 3j symbols with all magnetic numbers zero.
//!
//! For even `L = ℓ₁ + ℓ₂ + ℓ₃` with `g = L/2` the square of the symbol is
//!
//! ```text
//! (ℓ₁ ℓ₂ ℓ₃; 0 0 0)² = ∏ᵢ (L − 2ℓᵢ)! / (L + 1)! · [ g! / ∏ᵢ (g − ℓᵢ)! ]²
//! ```
//!
//! and it vanishes for odd `L` or when the triangle inequality fails. The
//! factorials are handled in log space so that arbitrarily large degrees are
//! safe.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Three multipole degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripleIndex {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl TripleIndex {
    pub fn new(l1: usize, l2: usize, l3: usize) -> Self {
        Self { l1, l2, l3 }
    }

    /// `|ℓᵢ − ℓₖ| ≤ ℓₘ ≤ ℓᵢ + ℓₖ` for every permutation.
    pub fn triangle_ok(&self) -> bool {
        let (a, b, c) = (self.l1, self.l2, self.l3);
        a <= b + c && b <= a + c && c <= a + b
    }

    pub fn parity_even(&self) -> bool {
        (self.l1 + self.l2 + self.l3).is_multiple_of(2)
    }
}

impl From<(usize, usize, usize)> for TripleIndex {
    fn from((l1, l2, l3): (usize, usize, usize)) -> Self {
        Self::new(l1, l2, l3)
    }
}

const LN_FACT_TABLE: usize = 1024;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(LN_FACT_TABLE);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        out.push(0.0);
        for k in 1..LN_FACT_TABLE {
            let y = (k as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            out.push(sum);
        }
        out
    })
}

/// `ln n!`: tabulated for small `n`, Stirling series beyond.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE {
        return ln_fact_table()[n];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// Square of the 3j symbol `(ℓ₁ ℓ₂ ℓ₃; 0 0 0)`; exactly 0 off the selection rules.
pub fn wigner3j_zero_sq(t: TripleIndex) -> f64 {
    if !t.triangle_ok() || !t.parity_even() {
        return 0.0;
    }
    let big_l = t.l1 + t.l2 + t.l3;
    let g = big_l / 2;
    let ls = [t.l1, t.l2, t.l3];
    let mut ln = 2.0 * ln_factorial(g) - ln_factorial(big_l + 1);
    for &l in &ls {
        ln += ln_factorial(big_l - 2 * l) - 2.0 * ln_factorial(g - l);
    }
    ln.exp()
}

/// High-frequency limit of `ℓ² (⌊ℓx₁⌋ ⌊ℓx₂⌋ ⌊ℓx₃⌋; 0 0 0)²` along even sums.
///
/// Returns `0` outside the triangle region and `+∞` on its boundary, where
/// the density has an integrable inverse-square-root singularity.
pub fn wigner3j_scaled_limit(x1: f64, x2: f64, x3: f64) -> f64 {
    let f = [x1 + x2 - x3, x1 - x2 + x3, -x1 + x2 + x3, x1 + x2 + x3];
    if f.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return 0.0;
    }
    let prod = f[0] * f[1] * f[2] * f[3];
    if prod == 0.0 {
        return f64::INFINITY;
    }
    2.0 / (PI * prod.sqrt())
}
