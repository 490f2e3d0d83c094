//! High-frequency variance constants `c_q`, exact finite-scale variances and
//! the Legendre-to-Bessel limit diagnostic.
//!
//! With `g(x) = b²(x) x^{1−α}` and `I = ∫_{1/2}^{2} g`, the constants are
//!
//! ```text
//! c₂ = 8π²/I² ∫ b⁴(x) x^{1−2α} dx
//! c₃ = 16π/I³ ∫∫∫_{P₃} g(x₁)g(x₂)g(x₃) / √Π₃(x₁,x₂,x₃)
//! c₄ = 32/I⁴ ∫⁴ ∏ g(xᵢ) ∫₀⁴ y K(x₁,x₂,y) K(x₃,x₄,y) dy
//! c_q = 8π²/I^q ∫_q ∏ g(x_k) ∫₀^∞ ∏ J₀(x_k ψ) ψ dψ
//! ```
//!
//! where `Π₃ = (x₁+x₂−x₃)(x₁−x₂+x₃)(−x₁+x₂+x₃)(x₁+x₂+x₃)` and `K = Π₃^{-1/2}`
//! on the triangle region. Because `g` is smooth and vanishes to all orders at
//! both ends of its support, every inner integral below is a smooth function
//! of the outer variables once the inverse-square-root edges are removed by a
//! Chebyshev substitution.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::cubature::{compensated_sum, gauss_legendre, integrate_adaptive, CompensatedSum, GaussLegendreRule};
use crate::error::{Error, Result};
use crate::model::{band_integral, band_profile, rho_tilde_with, Spectrum, Window};
use crate::specfun::bessel_j0;

/// Which formula produced a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    ClosedQ2,
    WignerQ3,
    BesselQ3,
    WignerQ4,
    BesselGeneric,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::ClosedQ2 => "closed_q2",
            Route::WignerQ3 => "wigner_q3",
            Route::BesselQ3 => "bessel_q3",
            Route::WignerQ4 => "wigner_q4",
            Route::BesselGeneric => "bessel_generic",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstant {
    pub q: usize,
    pub value: f64,
    pub quadrature_error: f64,
    pub route: Route,
    /// Set when `value < 10 · quadrature_error`, i.e. positivity is not resolved.
    pub flagged: bool,
}

impl AsymptoticConstant {
    fn new(q: usize, value: f64, quadrature_error: f64, route: Route) -> Self {
        Self { q, value, quadrature_error, route, flagged: value < 10.0 * quadrature_error }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} must exceed 2")))
    }
}

/// `g(x) = b²(x) x^{1−α}`.
struct Profile<'a, W: Window + ?Sized> {
    w: &'a W,
    alpha: f64,
}

impl<W: Window + ?Sized> Profile<'_, W> {
    #[inline]
    fn g(&self, x: f64) -> f64 {
        if !(x > 0.5 && x < 2.0) {
            return 0.0;
        }
        self.w.b_squared(x) * x.powf(1.0 - self.alpha)
    }
}

/// Gauss rule on `[1/2, 2]` made of `panels` equal panels of `per_panel` nodes.
fn panel_rule(a: f64, b: f64, panels: usize, base: &GaussLegendreRule) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * base.n);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Quadrature resolution for the triangle-kernel constants.
#[derive(Debug, Clone, Copy)]
struct Resolution {
    outer_panels: usize,
    outer_nodes: usize,
    inner_nodes: usize,
}

const COARSE: Resolution = Resolution { outer_panels: 12, outer_nodes: 16, inner_nodes: 48 };
const FINE: Resolution = Resolution { outer_panels: 18, outer_nodes: 20, inner_nodes: 72 };

/// `∫_{lo}^{hi} g(x) / √((hi' − x)(x − lo') (x + lo')(hi' + x)) dx` over the
/// triangle range `(lo', hi') = (|a−b|, a+b)` clipped to the support of `g`,
/// via `x = m − r cos u`, which absorbs the two inverse-square-root edges.
fn triangle_inner<W: Window + ?Sized>(prof: &Profile<W>, a: f64, b: f64, rule: &GaussLegendreRule) -> f64 {
    let d = (a - b).abs();
    let s = a + b;
    let lo = d.max(0.5);
    let hi = s.min(2.0);
    if hi <= lo {
        return 0.0;
    }
    let m = 0.5 * (s + d);
    let r = 0.5 * (s - d);
    let u_of = |x: f64| ((m - x) / r).clamp(-1.0, 1.0).acos();
    let (ua, ub) = (u_of(lo), u_of(hi));
    rule.integrate(ua, ub, |u| {
        let x = m - r * u.cos();
        prof.g(x) / ((x + d) * (s + x)).sqrt()
    })
}

fn c3_wigner_at<W: Window + ?Sized>(prof: &Profile<W>, res: Resolution) -> Result<f64> {
    let base = gauss_legendre(res.outer_nodes)?;
    let inner = gauss_legendre(res.inner_nodes)?;
    let outer = panel_rule(0.5, 2.0, res.outer_panels, &base);
    let gs: Vec<f64> = outer.iter().map(|&(x, _)| prof.g(x)).collect();
    let rows: Vec<f64> = outer
        .par_iter()
        .zip(&gs)
        .map(|(&(x1, w1), &g1)| {
            if g1 == 0.0 {
                return 0.0;
            }
            let mut s = CompensatedSum::new();
            for (&(x2, w2), &g2) in outer.iter().zip(&gs) {
                if g2 != 0.0 {
                    s.add(w2 * g2 * triangle_inner(prof, x1, x2, &inner));
                }
            }
            w1 * g1 * s.value()
        })
        .collect();
    Ok(compensated_sum(rows))
}

fn c3_bessel_at<W: Window + ?Sized>(prof: &Profile<W>, res: Resolution) -> Result<f64> {
    let base = gauss_legendre(res.outer_nodes)?;
    let inner = gauss_legendre(res.inner_nodes)?;
    let outer = panel_rule(0.5, 2.0, res.outer_panels, &base);
    let gs: Vec<f64> = outer.iter().map(|&(x, _)| prof.g(x)).collect();
    let rows: Vec<f64> = outer
        .par_iter()
        .zip(&gs)
        .map(|(&(x1, w1), &g1)| {
            if g1 == 0.0 {
                return 0.0;
            }
            let mut s = CompensatedSum::new();
            for (&(x2, w2), &g2) in outer.iter().zip(&gs) {
                if g2 == 0.0 {
                    continue;
                }
                // x₃ = |x₁ e^{iγ} − x₂|; the Jacobian x₁x₂ sin γ / x₃ against the
                // closed form 1/(2πΔ), Δ = x₁x₂ sin γ / 2, leaves 1/(π x₃).
                let (ga, gb) = gamma_range(x1, x2);
                if gb <= ga {
                    continue;
                }
                let v = inner.integrate(ga, gb, |gam| {
                    let x3 = law_of_cosines(x1, x2, gam);
                    prof.g(x3) / (PI * x3)
                });
                s.add(w2 * g2 * v);
            }
            w1 * g1 * s.value()
        })
        .collect();
    Ok(compensated_sum(rows))
}

fn law_of_cosines(a: f64, b: f64, gamma: f64) -> f64 {
    // (a − b)² + 4ab sin²(γ/2) avoids cancellation near γ = 0
    let h = (0.5 * gamma).sin();
    ((a - b) * (a - b) + 4.0 * a * b * h * h).sqrt()
}

/// Angles `γ` for which the third side lies in `[1/2, 2]`.
fn gamma_range(a: f64, b: f64) -> (f64, f64) {
    let angle = |c: f64| ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0).acos();
    (angle(0.5), angle(2.0))
}

/// Triangle area by Kahan's stable Heron formula; `NaN` outside the triangle region.
pub fn triangle_area(x1: f64, x2: f64, x3: f64) -> f64 {
    let mut s = [x1, x2, x3];
    s.sort_by(|p, q| q.total_cmp(p));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p < 0.0 {
        f64::NAN
    } else {
        0.25 * p.sqrt()
    }
}

/// `∫₀^∞ J₀(x₁ψ)J₀(x₂ψ)J₀(x₃ψ) ψ dψ = 1/(2πΔ)` on the triangle region, else 0.
pub fn triple_bessel_closed_form(x1: f64, x2: f64, x3: f64) -> f64 {
    let area = triangle_area(x1, x2, x3);
    if area.is_nan() {
        0.0
    } else if area == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * PI * area)
    }
}

/// `c₂` from two one-dimensional integrals.
pub fn c2<W: Window + ?Sized>(w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    check_alpha(alpha)?;
    let f = |x: f64| {
        let b2 = w.b_squared(x);
        b2 * b2 * x.powf(1.0 - 2.0 * alpha)
    };
    let lo = integrate_adaptive(f, 0.5, 1.0, 1e-13, 0.0)?;
    let hi = integrate_adaptive(f, 1.0, 2.0, 1e-13, 0.0)?;
    let i = band_integral(w, alpha)?;
    let value = 8.0 * PI * PI * (lo.value + hi.value) / (i * i);
    let err = value * ((lo.error + hi.error) / (lo.value + hi.value) + 2e-13);
    Ok(AsymptoticConstant::new(2, value, err, Route::ClosedQ2))
}

fn two_resolutions(coarse: f64, fine: f64, q: usize, scale: f64, route: Route) -> AsymptoticConstant {
    let value = fine * scale;
    let err = ((fine - coarse) * scale).abs().max(1e-14 * value.abs());
    AsymptoticConstant::new(q, value, err, route)
}

/// `c₃` from the limit density of the zero-m 3j symbols.
pub fn c3_wigner<W: Window + ?Sized>(w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    check_alpha(alpha)?;
    let prof = Profile { w, alpha };
    let i = band_integral(w, alpha)?;
    let scale = 16.0 * PI / i.powi(3);
    let coarse = c3_wigner_at(&prof, COARSE)?;
    let fine = c3_wigner_at(&prof, FINE)?;
    Ok(two_resolutions(coarse, fine, 3, scale, Route::WignerQ3))
}

/// `c₃` from the closed form of the triple Bessel integral.
pub fn c3_bessel<W: Window + ?Sized>(w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    check_alpha(alpha)?;
    let prof = Profile { w, alpha };
    let i = band_integral(w, alpha)?;
    let scale = 8.0 * PI * PI / i.powi(3);
    let coarse = c3_bessel_at(&prof, COARSE)?;
    let fine = c3_bessel_at(&prof, FINE)?;
    Ok(two_resolutions(coarse, fine, 3, scale, Route::BesselQ3))
}

/// `h(y) = ∫∫ g(x₁)g(x₂) K(x₁,x₂,y) dx₁dx₂`.
fn pair_kernel<W: Window + ?Sized>(prof: &Profile<W>, y: f64, outer: &[(f64, f64)], inner: &GaussLegendreRule) -> f64 {
    let mut s = CompensatedSum::new();
    for &(x1, w1) in outer {
        let g1 = prof.g(x1);
        if g1 != 0.0 {
            s.add(w1 * g1 * triangle_inner(prof, x1, y, inner));
        }
    }
    s.value()
}

fn c4_at<W: Window + ?Sized>(prof: &Profile<W>, res: Resolution) -> Result<f64> {
    let base = gauss_legendre(res.outer_nodes)?;
    let inner = gauss_legendre(res.inner_nodes)?;
    let outer = panel_rule(0.5, 2.0, res.outer_panels, &base);
    let ys = panel_rule(0.0, 4.0, 2 * res.outer_panels, &base);
    let terms: Vec<f64> = ys
        .par_iter()
        .map(|&(y, wy)| {
            let h = pair_kernel(prof, y, &outer, &inner);
            wy * y * h * h
        })
        .collect();
    Ok(compensated_sum(terms))
}

/// `c₄`, with the four-fold outer integral factorized through `y`:
/// `c₄ = 32/I⁴ ∫₀⁴ y h(y)² dy`.
pub fn c4<W: Window + ?Sized>(w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    check_alpha(alpha)?;
    let prof = Profile { w, alpha };
    let i = band_integral(w, alpha)?;
    let scale = 32.0 / i.powi(4);
    let coarse = c4_at(&prof, COARSE)?;
    let fine = c4_at(&prof, FINE)?;
    Ok(two_resolutions(coarse, fine, 4, scale, Route::WignerQ4))
}

/// Settings of the Hankel-transform route.
#[derive(Debug, Clone, Copy)]
struct TransformResolution {
    x_panels: usize,
    psi_panel: f64,
    psi_max: f64,
}

/// `F(ψ) = ∫ g(x) J₀(xψ) dx` on a grid of `ψ` and the moment `∫ ψ F(ψ)^q dψ`.
///
/// `g` is smooth with compact support, so `F` decays faster than any power
/// of `ψ` and the moment converges for every `q ≥ 2` once the order of
/// integration is swapped.
fn hankel_moment<W: Window + ?Sized>(prof: &Profile<W>, q: usize, res: TransformResolution) -> Result<(f64, f64)> {
    let g16 = gauss_legendre(16)?;
    let xs = panel_rule(0.5, 2.0, res.x_panels, &g16);
    let gx: Vec<(f64, f64)> = xs.iter().map(|&(x, w)| (x, w * prof.g(x))).filter(|p| p.1 != 0.0).collect();
    let panels = (res.psi_max / res.psi_panel).ceil() as usize;
    let contributions: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let lo = p as f64 * res.psi_panel;
            g16.integrate(lo, lo + res.psi_panel, |psi| {
                let f = compensated_sum(gx.iter().map(|&(x, wg)| wg * bessel_j0(x * psi)));
                psi * f.powi(q as i32)
            })
        })
        .collect();
    let total = compensated_sum(contributions.iter().copied());
    // observed tail: the last tenth of the range
    let tail_start = contributions.len() - contributions.len() / 10;
    let tail = contributions[tail_start..].iter().map(|c| c.abs()).sum::<f64>();
    Ok((total, tail))
}

const TRANSFORM_COARSE: TransformResolution = TransformResolution { x_panels: 40, psi_panel: 0.5, psi_max: 300.0 };
const TRANSFORM_FINE: TransformResolution = TransformResolution { x_panels: 60, psi_panel: 0.4, psi_max: 400.0 };

fn transform_route<W: Window + ?Sized>(q: usize, w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    check_alpha(alpha)?;
    let prof = Profile { w, alpha };
    let i = band_integral(w, alpha)?;
    let scale = 8.0 * PI * PI / i.powi(q as i32);
    let (coarse, _) = hankel_moment(&prof, q, TRANSFORM_COARSE)?;
    let (fine, tail) = hankel_moment(&prof, q, TRANSFORM_FINE)?;
    let err = ((fine - coarse).abs() + tail).max(1e-14 * fine.abs()) * scale;
    Ok(AsymptoticConstant::new(q, fine * scale, err, Route::BesselGeneric))
}

/// `c_q` for `q ≥ 5` from the Bessel-product formula.
///
/// The `ψ`-integral is taken innermost over the Hankel transform
/// `F(ψ) = ∫ g(x) J₀(xψ) dx`, which turns the `q`-fold outer integral into
/// `∫ ψ F(ψ)^q dψ`.
pub fn cq_bessel<W: Window + ?Sized>(q: usize, w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    if q <= 4 {
        return Err(Error::Domain(format!(
            "the Bessel-product route needs q >= 5 for absolute convergence, got q = {q}"
        )));
    }
    transform_route(q, w, alpha)
}

/// The Bessel-product route for any `q ≥ 2`, used as an independent check of
/// the closed and triangle-kernel routes.
pub fn cq_transform<W: Window + ?Sized>(q: usize, w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    if q < 2 {
        return Err(Error::Domain(format!("q = {q} must be at least 2")));
    }
    transform_route(q, w, alpha)
}

/// `c_q` by the canonical route for its order.
pub fn constant<W: Window + ?Sized>(q: usize, w: &W, alpha: f64) -> Result<AsymptoticConstant> {
    match q {
        0 | 1 => Err(Error::Domain(format!("q = {q} must be at least 2"))),
        2 => c2(w, alpha),
        3 => c3_wigner(w, alpha),
        4 => c4(w, alpha),
        _ => cq_bessel(q, w, alpha),
    }
}

/// Analytic bound on the truncated tail of the Bessel-product integral,
/// `∏ x_k^{-1/2} Ψ^{2−q/2} / (q/2 − 2)`, from `|J₀(x)| ≤ x^{-1/2}`.
pub fn bessel_tail_bound(xs: &[f64], psi_max: f64) -> f64 {
    let q = xs.len() as f64;
    if q <= 4.0 {
        return f64::INFINITY;
    }
    let prod: f64 = xs.iter().map(|x| x.powf(-0.5)).product();
    prod * psi_max.powf(2.0 - q / 2.0) / (q / 2.0 - 2.0)
}

/// `Var[ν_{j;q}] = 8π² q! ∫_{-1}^{1} ρ̃_j(t)^q dt`, exact up to rounding.
pub fn variance_exact<S, W>(j: u32, q: usize, s: &S, w: &W) -> Result<f64>
where
    S: Spectrum + ?Sized,
    W: Window + ?Sized,
{
    if q < 2 {
        return Err(Error::Domain(format!("q = {q} must be at least 2")));
    }
    let p = band_profile(s, w, j)?;
    let n = (q * p.degree()).div_ceil(2) + 1;
    if n > crate::cubature::MAX_GL_NODES {
        return Err(Error::Resource(format!(
            "exact variance at j = {j}, q = {q} needs {n} Gauss nodes (cap {})",
            crate::cubature::MAX_GL_NODES
        )));
    }
    let rule = gauss_legendre(n)?;
    let terms: Vec<f64> = rule
        .nodes
        .par_iter()
        .zip(&rule.weights)
        .map_init(|| vec![0.0; p.degree() + 1], |buf, (&t, &wt)| wt * rho_tilde_with(&p, t, buf).powi(q as i32))
        .collect();
    let fact: f64 = (2..=q).map(|k| k as f64).product();
    Ok(8.0 * PI * PI * fact * compensated_sum(terms))
}

/// `2^{2j} Var[ν_{j;q}] / q!`, which tends to `c_q`.
pub fn scaled_variance(j: u32, q: usize, variance: f64) -> f64 {
    let fact: f64 = (2..=q).map(|k| k as f64).product();
    f64::from(2 * j).exp2() * variance / fact
}

/// `∫₀^Ψ ∏ J₀(x_k ψ) ψ dψ` by Gauss panels a fraction of a period wide.
pub fn bessel_product_integral(xs: &[f64], psi_max: f64) -> Result<f64> {
    let x_max = xs.iter().copied().fold(0.0, f64::max);
    if xs.is_empty() || !(x_max > 0.0) {
        return Err(Error::Domain("Bessel product needs positive arguments".into()));
    }
    let g16 = gauss_legendre(16)?;
    let width = PI / x_max;
    let panels = (psi_max / width).ceil() as usize;
    let parts: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let lo = p as f64 * width;
            g16.integrate(lo, (lo + width).min(psi_max), |psi| {
                psi * xs.iter().map(|&x| bessel_j0(x * psi)).product::<f64>()
            })
        })
        .collect();
    Ok(compensated_sum(parts))
}

/// One row of the Legendre-to-Bessel comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub ell: usize,
    pub degrees: Vec<usize>,
    /// `ℓ² ∫₀^{π/2} ∏ P_{ℓ_k}(cos θ) sin θ dθ`
    pub legendre_half: f64,
    /// `ℓ² ∫₀^{π} ∏ P_{ℓ_k}(cos θ) sin θ dθ`
    pub legendre_full: f64,
    /// `∫₀^∞ ∏ J₀(x_k ψ) ψ dψ`
    pub bessel: f64,
    /// `|legendre_half − bessel|`
    pub gap: f64,
}

const BESSEL_LIMIT_PSI_MAX: f64 = 1e5;

/// Compares `ℓ² ∫ ∏ P_{⌊ℓx_k⌋}(cos θ) sin θ dθ` with its Bessel limit.
pub fn legendre_bessel_limit_check(xs: &[f64], ells: &[usize]) -> Result<Vec<LimitRow>> {
    if xs.len() <= 4 {
        return Err(Error::Domain(format!("limit check needs q > 4 arguments, got {}", xs.len())));
    }
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("limit check arguments must be positive".into()));
    }
    let bessel = bessel_product_integral(xs, BESSEL_LIMIT_PSI_MAX)?;
    ells.iter()
        .map(|&ell| {
            let degrees: Vec<usize> = xs.iter().map(|&x| (ell as f64 * x).floor() as usize).collect();
            let total: usize = degrees.iter().sum();
            let rule = gauss_legendre(total / 2 + 1)?;
            let max_deg = *degrees.iter().max().unwrap_or(&0);
            let mut buf = vec![0.0; max_deg + 1];
            let mut prod_at = |t: f64| {
                crate::specfun::legendre_table(t, &mut buf);
                degrees.iter().map(|&d| buf[d]).product::<f64>()
            };
            let l2 = (ell * ell) as f64;
            let half = l2 * rule.integrate(0.0, 1.0, &mut prod_at);
            let full = l2 * rule.integrate(-1.0, 1.0, &mut prod_at);
            Ok(LimitRow { ell, degrees, legendre_half: half, legendre_full: full, bessel, gap: (half - bessel).abs() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactVarianceRow {
    pub j: u32,
    pub q: usize,
    pub var_exact: f64,
    pub scaled: f64,
    /// `scaled / c_q`
    pub ratio_to_cq: f64,
}

/// Exact variances for every `(j, q)`, scaled and compared with `c_q`.
pub fn exact_variance_table<S, W>(s: &S, w: &W, alpha: f64, js: &[u32], qs: &[usize]) -> Result<Vec<ExactVarianceRow>>
where
    S: Spectrum + ?Sized,
    W: Window + ?Sized,
{
    let consts = qs.iter().map(|&q| constant(q, w, alpha).map(|c| c.value)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(js.len() * qs.len());
    for &j in js {
        for (&q, &c) in qs.iter().zip(&consts) {
            let var_exact = variance_exact(j, q, s, w)?;
            let scaled = scaled_variance(j, q, var_exact);
            rows.push(ExactVarianceRow { j, q, var_exact, scaled, ratio_to_cq: scaled / c });
        }
    }
    Ok(rows)
}

pub const CONSTANTS_HEADER: &str = "q,route,c_q,error_estimate";
pub const EXACT_VARIANCE_HEADER: &str = "j,q,var_exact,scaled,ratio_to_cq";

pub fn write_constants_csv<Wr: std::io::Write>(rows: &[AsymptoticConstant], mut out: Wr) -> Result<()> {
    writeln!(out, "{CONSTANTS_HEADER}")?;
    for c in rows {
        writeln!(out, "{},{},{:.16e},{:.16e}", c.q, c.route, c.value, c.quadrature_error)?;
    }
    Ok(())
}

pub fn write_exact_variance_csv<Wr: std::io::Write>(rows: &[ExactVarianceRow], mut out: Wr) -> Result<()> {
    writeln!(out, "{EXACT_VARIANCE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", r.j, r.q, r.var_exact, r.scaled, r.ratio_to_cq)?;
    }
    Ok(())
}
