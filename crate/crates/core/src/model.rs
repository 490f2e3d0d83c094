//! Angular power spectrum, needlet window and band normalization.

use std::f64::consts::PI;

use crate::cubature::{compensated_sum, integrate_adaptive, CompensatedSum};
use crate::error::{Error, Result};
use crate::specfun::legendre_table;

/// Largest supported scale index.
pub const MAX_SCALE: u32 = 20;

/// Angular power spectrum `ℓ ↦ C_ℓ`.
pub trait Spectrum: Send + Sync {
    fn cl(&self, ell: usize) -> f64;
}

/// `C_ℓ = ℓ^{-α} P(ℓ) / Q(ℓ)` with `P`, `Q` of equal degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    alpha: f64,
    num_coeffs: Vec<f64>,
    den_coeffs: Vec<f64>,
    g_limit: f64,
}

const POSITIVITY_CHECK_RANGE: usize = 1 << 16;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl PowerSpectrum {
    /// Coefficients are in ascending order: `P(ℓ) = Σ_k num_coeffs[k] ℓᵏ`.
    pub fn new(alpha: f64, num_coeffs: Vec<f64>, den_coeffs: Vec<f64>) -> Result<Self> {
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("spectral index alpha = {alpha} must exceed 2")));
        }
        if num_coeffs.is_empty() || num_coeffs.len() != den_coeffs.len() {
            return Err(Error::InvalidConfig(
                "numerator and denominator polynomials must be non-empty and of equal degree".into(),
            ));
        }
        if num_coeffs.iter().chain(&den_coeffs).any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("polynomial coefficients must be finite".into()));
        }
        let (lp, lq) = (*num_coeffs.last().unwrap(), *den_coeffs.last().unwrap());
        if lp == 0.0 || lq == 0.0 || lp / lq <= 0.0 {
            return Err(Error::InvalidConfig("leading coefficients must be nonzero and of the same sign".into()));
        }
        for ell in 1..=POSITIVITY_CHECK_RANGE {
            let x = ell as f64;
            if !(poly(&num_coeffs, x) > 0.0 && poly(&den_coeffs, x) > 0.0) {
                return Err(Error::InvalidConfig(format!("P or Q is not positive at ell = {ell}")));
            }
        }
        Ok(Self { alpha, num_coeffs, den_coeffs, g_limit: lp / lq })
    }

    /// `C_ℓ = ℓ^{-α}`.
    pub fn pure_power(alpha: f64) -> Result<Self> {
        Self::new(alpha, vec![1.0], vec![1.0])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_coeffs(&self) -> &[f64] {
        &self.num_coeffs
    }

    pub fn den_coeffs(&self) -> &[f64] {
        &self.den_coeffs
    }

    /// `lim ℓ^α C_ℓ`.
    pub fn g_limit(&self) -> f64 {
        self.g_limit
    }

    /// `P(x) / Q(x)` at real `x`.
    pub fn shape(&self, x: f64) -> f64 {
        poly(&self.num_coeffs, x) / poly(&self.den_coeffs, x)
    }

    /// `sup_{x∈[1/2,2]} |dʳ/dxʳ g_j(x)|` with `g_j(x) = P(2ʲx)/Q(2ʲx)`.
    ///
    /// Estimated by central finite differences on a grid; a diagnostic only.
    pub fn g_derivative_sup(&self, j: u32, order: u32) -> f64 {
        let scale = f64::from(j).exp2();
        let g = |x: f64| self.shape(scale * x);
        let h = 1e-2;
        let mut sup = 0.0f64;
        for i in 0..=200 {
            let x = 0.5 + 1.5 * f64::from(i) / 200.0;
            let d = if order == 0 {
                g(x)
            } else {
                // r-th central difference
                let r = order as i32;
                let mut acc = 0.0;
                let mut binom = 1.0;
                for k in 0..=r {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * g(x + (f64::from(r) / 2.0 - f64::from(k)) * h);
                    binom = binom * f64::from(r - k) / f64::from(k + 1);
                }
                acc / h.powi(r)
            };
            sup = sup.max(d.abs());
        }
        sup
    }
}

impl Spectrum for PowerSpectrum {
    fn cl(&self, ell: usize) -> f64 {
        if ell == 0 {
            return 0.0;
        }
        let x = ell as f64;
        x.powf(-self.alpha) * self.shape(x)
    }
}

/// `C_ℓ` of a spectrum; zero at `ℓ = 0`.
pub fn spectrum_eval<S: Spectrum + ?Sized>(s: &S, ell: usize) -> f64 {
    s.cl(ell)
}

/// A needlet weight `b` supported on `[1/2, 2]`.
pub trait Window: Send + Sync {
    fn b_squared(&self, x: f64) -> f64;

    fn b(&self, x: f64) -> f64 {
        self.b_squared(x).sqrt()
    }
}

/// The standard smooth window built from the bump `exp(−1/(1−t²))`.
///
/// With `ψ(u) = ∫_{-1}^u f / ∫_{-1}^1 f` the weight is
/// `b²(ξ) = ψ(4ξ − 3)` on `[1/2, 1]` and `ψ(3 − 2ξ)` on `[1, 2]`, so that
/// `Σ_j b²(ℓ/2ʲ) = 1` for every `ℓ ≥ 2`. `ψ` is tabulated on `[−1, 0]` and
/// extended by `ψ(u) = 1 − ψ(−u)`, which makes the partition of unity hold to
/// rounding regardless of interpolation error.
#[derive(Debug, Clone)]
pub struct NeedletWindow {
    grid_size: usize,
    h: f64,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

pub const DEFAULT_WINDOW_GRID: usize = 16_384;

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / ((1.0 - t) * (1.0 + t))).exp()
    }
}

/// `ψ(u)` by direct adaptive quadrature; used to validate the cached table.
pub fn psi_direct(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let total = 2.0 * integrate_adaptive(bump, -1.0, 0.0, 1e-15, 0.0).expect("bump quadrature").value;
    if u <= 0.0 {
        integrate_adaptive(bump, -1.0, u, 1e-15, 0.0).expect("bump quadrature").value / total
    } else {
        1.0 - integrate_adaptive(bump, -1.0, -u, 1e-15, 0.0).expect("bump quadrature").value / total
    }
}

impl NeedletWindow {
    /// `grid_size` points cover `[−1, 1]`; half of them are stored.
    pub fn new(grid_size: usize) -> Result<Self> {
        if !(64..=1 << 24).contains(&grid_size) {
            return Err(Error::InvalidConfig(format!("window grid size {grid_size} outside [64, 2^24]")));
        }
        let cells = grid_size / 2;
        let h = 1.0 / cells as f64;
        let gl = crate::cubature::gauss_legendre(10)?;
        let mut cum = CompensatedSum::new();
        let mut raw = Vec::with_capacity(cells + 1);
        raw.push(0.0);
        for i in 0..cells {
            let a = -1.0 + i as f64 * h;
            cum.add(gl.integrate(a, a + h, bump));
            raw.push(cum.value());
        }
        let z = 2.0 * raw[cells];
        let psi = raw.iter().map(|v| v / z).collect();
        let dpsi = (0..=cells).map(|i| bump(-1.0 + i as f64 * h) / z).collect();
        Ok(Self { grid_size, h, psi, dpsi })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Cached `ψ(u)` for `u ∈ [−1, 1]`.
    pub fn psi(&self, u: f64) -> f64 {
        if u <= -1.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else if u <= 0.0 {
            self.psi_left(u)
        } else {
            1.0 - self.psi_left(-u)
        }
    }

    // Cubic Hermite interpolation on [−1, 0] using the exact derivative.
    fn psi_left(&self, u: f64) -> f64 {
        let cells = self.psi.len() - 1;
        let s = (u + 1.0) / self.h;
        let i = (s.floor() as usize).min(cells - 1);
        let t = s - i as f64;
        let (p0, p1) = (self.psi[i], self.psi[i + 1]);
        let (m0, m1) = (self.dpsi[i] * self.h, self.dpsi[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
        v.clamp(0.0, 0.5)
    }
}

impl Default for NeedletWindow {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_GRID).expect("default grid size is valid")
    }
}

impl Window for NeedletWindow {
    fn b_squared(&self, x: f64) -> f64 {
        if !(x > 0.5 && x < 2.0) {
            0.0
        } else if x <= 1.0 {
            self.psi(4.0 * x - 3.0)
        } else {
            self.psi(3.0 - 2.0 * x)
        }
    }
}

/// `b² ≡ 1` on `[1/2, 2]`; violates the partition of unity but has closed-form integrals.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatWindow;

impl Window for FlatWindow {
    fn b_squared(&self, x: f64) -> f64 {
        if (0.5..=2.0).contains(&x) {
            1.0
        } else {
            0.0
        }
    }
}

/// `b(x)`; zero outside `[1/2, 2]`.
pub fn window_eval<W: Window + ?Sized>(w: &W, x: f64) -> f64 {
    w.b(x)
}

/// Multipoles contributing to scale `j` and their variance shares.
#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile {
    pub j: u32,
    /// `2^{j−1}` (excluded: `b(1/2) = 0`).
    pub ell_min: usize,
    /// `2^{j+1}` (excluded: `b(2) = 0`).
    pub ell_max: usize,
    /// `Σ_ℓ b²(ℓ/2ʲ) C_ℓ (2ℓ+1)/(4π)`.
    pub b_j: f64,
    /// Multipoles strictly inside the band, ascending.
    pub ells: Vec<usize>,
    /// `b(ℓ/2ʲ)` for each entry of `ells`.
    pub window: Vec<f64>,
    /// `C_ℓ` for each entry of `ells`.
    pub cl: Vec<f64>,
    /// `b²(ℓ/2ʲ) C_ℓ (2ℓ+1)/(4π)` for each entry of `ells`.
    pub weights: Vec<f64>,
}

impl BandProfile {
    /// `w_ℓ = b²(ℓ/2ʲ) C_ℓ / B_j`; then `Σ w_ℓ(2ℓ+1) = 4π`.
    pub fn normalized_weight(&self, idx: usize) -> f64 {
        let b = self.window[idx];
        b * b * self.cl[idx] / self.b_j
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        (0..self.ells.len()).map(|i| self.normalized_weight(i)).collect()
    }

    /// Largest multipole with a nonzero weight.
    pub fn degree(&self) -> usize {
        self.ells.last().copied().unwrap_or(0)
    }
}

pub fn band_profile<S, W>(s: &S, w: &W, j: u32) -> Result<BandProfile>
where
    S: Spectrum + ?Sized,
    W: Window + ?Sized,
{
    if j == 0 || j > MAX_SCALE {
        return Err(Error::Domain(format!("scale j = {j} outside [1, {MAX_SCALE}]")));
    }
    let ell_min = 1usize << (j - 1);
    let ell_max = 1usize << (j + 1);
    let scale = f64::from(j).exp2();
    let mut ells = Vec::with_capacity(ell_max - ell_min);
    let mut window = Vec::with_capacity(ell_max - ell_min);
    let mut cl = Vec::with_capacity(ell_max - ell_min);
    let mut weights = Vec::with_capacity(ell_max - ell_min);
    for ell in ell_min + 1..ell_max {
        let b2 = w.b_squared(ell as f64 / scale);
        let c = s.cl(ell);
        ells.push(ell);
        window.push(b2.sqrt());
        cl.push(c);
        weights.push(b2 * c * (2 * ell + 1) as f64 / (4.0 * PI));
    }
    let b_j = compensated_sum(weights.iter().copied());
    if !(b_j > 0.0 && b_j.is_finite()) {
        return Err(Error::Degenerate(format!("band normalization B_{j} = {b_j} is not positive")));
    }
    Ok(BandProfile { j, ell_min, ell_max, b_j, ells, window, cl, weights })
}

/// Normalized needlet covariance `ρ̃_j(t) = B_j^{-1} Σ_ℓ b² C_ℓ (2ℓ+1)/(4π) P_ℓ(t)`.
pub fn rho_tilde(p: &BandProfile, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("correlation argument {t} outside [-1, 1]")));
    }
    let mut scratch = vec![0.0; p.degree() + 1];
    Ok(rho_tilde_with(p, t.clamp(-1.0, 1.0), &mut scratch))
}

/// [`rho_tilde`] with a caller-provided Legendre buffer of length `≥ degree + 1`.
pub(crate) fn rho_tilde_with(p: &BandProfile, t: f64, scratch: &mut [f64]) -> f64 {
    let n = p.degree() + 1;
    legendre_table(t, &mut scratch[..n]);
    let mut s = CompensatedSum::new();
    for (ell, wt) in p.ells.iter().zip(&p.weights) {
        s.add(wt * scratch[*ell]);
    }
    s.value() / p.b_j
}

/// `∫_{1/2}^{2} b²(x) x^{1−α} dx`.
pub fn band_integral<W: Window + ?Sized>(w: &W, alpha: f64) -> Result<f64> {
    let f = |x: f64| w.b_squared(x) * x.powf(1.0 - alpha);
    let lo = integrate_adaptive(f, 0.5, 1.0, 1e-13, 0.0)?;
    let hi = integrate_adaptive(f, 1.0, 2.0, 1e-13, 0.0)?;
    Ok(lo.value + hi.value)
}

/// `lim_j 2^{j(α−2)} B_j = (G/2π) ∫ b²(x) x^{1−α} dx`.
pub fn band_scaling_limit<W: Window + ?Sized>(w: &W, alpha: f64, g_limit: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must exceed 2")));
    }
    Ok(g_limit / (2.0 * PI) * band_integral(w, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn window() -> &'static NeedletWindow {
        static W: std::sync::OnceLock<NeedletWindow> = std::sync::OnceLock::new();
        W.get_or_init(NeedletWindow::default)
    }

    #[test]
    fn spectrum_examples() {
        let s = PowerSpectrum::pure_power(3.0).unwrap();
        assert_eq!(s.cl(2), 0.125);
        assert_eq!(s.g_limit(), 1.0);
        assert_eq!(s.g_derivative_sup(5, 2), 0.0);
        let s = PowerSpectrum::new(2.5, vec![1.0, 1.0], vec![2.0, 1.0]).unwrap();
        let ell = 1_000_000usize;
        assert_relative_eq!((ell as f64).powf(2.5) * s.cl(ell), 1.0, max_relative = 2e-6);
    }

    #[test]
    fn spectrum_validation() {
        assert!(PowerSpectrum::pure_power(2.0).is_err());
        assert!(PowerSpectrum::new(3.0, vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(PowerSpectrum::new(3.0, vec![-5.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(PowerSpectrum::new(3.0, vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn window_examples() {
        let w = window();
        assert_abs_diff_eq!(w.b(1.0), 1.0, epsilon = 1e-15);
        assert_eq!(w.b(0.5), 0.0);
        assert_eq!(w.b(2.0), 0.0);
        assert_eq!(w.b(0.1), 0.0);
        let s: f64 = (1..=14).map(|j| w.b_squared(100.0 / f64::from(j).exp2())).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cache_matches_direct() {
        let w = window();
        for i in 0..=40 {
            let u = -1.0 + 2.0 * f64::from(i) / 40.0 + 0.0123;
            let u = u.min(1.0);
            assert_abs_diff_eq!(w.psi(u), psi_direct(u), epsilon = 1e-12);
        }
    }

    #[test]
    fn partition_of_unity() {
        let w = window();
        for ell in 3..=4096usize {
            let s: f64 = (1..=14).map(|j| w.b_squared(ell as f64 / f64::from(j).exp2())).sum();
            assert!((s - 1.0).abs() < 1e-12, "ell = {ell}: {s}");
        }
    }

    #[test]
    fn band_profile_direct_sum() {
        let s = PowerSpectrum::pure_power(3.0).unwrap();
        let p = band_profile(&s, window(), 4).unwrap();
        let direct: f64 = (9..=31)
            .map(|l| {
                let lf = l as f64;
                window().b_squared(lf / 16.0) * lf.powi(-3) * (2.0 * lf + 1.0) / (4.0 * PI)
            })
            .sum();
        assert_relative_eq!(p.b_j, direct, max_relative = 1e-13);
        assert!(band_profile(&s, window(), 0).is_err());
        assert!(band_profile(&s, window(), 21).is_err());
        let total: f64 = p.ells.iter().zip(p.normalized_weights()).map(|(l, w)| w * (2 * l + 1) as f64).sum();
        assert_relative_eq!(total, 4.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn rho_tilde_examples() {
        let s = PowerSpectrum::pure_power(3.0).unwrap();
        let p = band_profile(&s, window(), 5).unwrap();
        assert_relative_eq!(rho_tilde(&p, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        let t = (PI / 2.0).cos();
        let direct: f64 =
            p.ells.iter().zip(&p.weights).map(|(l, w)| w * crate::specfun::legendre_eval(*l, t).unwrap()).sum::<f64>()
                / p.b_j;
        assert_abs_diff_eq!(rho_tilde(&p, t).unwrap(), direct, epsilon = 1e-12);
        assert!(rho_tilde(&p, 1.5).is_err());
    }

    #[test]
    fn scaling_limit_flat_and_zero() {
        assert_relative_eq!(band_scaling_limit(&FlatWindow, 3.0, 1.0).unwrap(), 3.0 / (4.0 * PI), max_relative = 1e-12);
        assert_eq!(band_scaling_limit(window(), 3.0, 0.0).unwrap(), 0.0);
        let s = PowerSpectrum::pure_power(3.0).unwrap();
        let p = band_profile(&s, window(), 14).unwrap();
        let lim = band_scaling_limit(window(), 3.0, 1.0).unwrap();
        assert_relative_eq!(16384.0 * p.b_j, lim, max_relative = 5e-3);
    }

    proptest! {
        #[test]
        fn window_nonneg_and_bounded(x in -1.0f64..3.0) {
            let v = window().b_squared(x);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
        }

        #[test]
        fn rho_is_a_correlation(t in -1.0f64..1.0, j in 2u32..8) {
            let s = PowerSpectrum::pure_power(3.0).unwrap();
            let p = band_profile(&s, window(), j).unwrap();
            prop_assert!(rho_tilde(&p, t).unwrap().abs() <= 1.0 + 1e-12);
        }
    }
}
