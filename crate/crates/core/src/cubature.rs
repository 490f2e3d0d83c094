//! Gauss–Legendre rules, the exact product rule on the sphere, compensated
//! summation and an adaptive Gauss–Kronrod integrator.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_GL_NODES: usize = 20_000;
pub const MAX_SPHERE_DEGREE: usize = 40_000;

/// Neumaier's improved Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendreRule {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendreRule {
    /// `∫_a^b f` with the rule mapped affinely onto `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        let mut s = CompensatedSum::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s.add(w * f(m + h * x));
        }
        h * s.value()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.n - 1
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<GaussLegendreRule> {
    if n == 0 || n > MAX_GL_NODES {
        return Err(Error::Domain(format!("Gauss-Legendre node count {n} outside [1, {MAX_GL_NODES}]")));
    }
    if n == 1 {
        return Ok(GaussLegendreRule { n, nodes: vec![0.0], weights: vec![2.0] });
    }
    let nf = n as f64;
    let half = n / 2;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let roots: Vec<(f64, f64)> = (0..half)
        .into_par_iter()
        .map(|i| {
            let k = (i + 1) as f64;
            // Tricomi's estimate of the k-th largest root
            let theta = PI * (4.0 * k - 1.0) / (4.0 * nf + 2.0);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut converged = false;
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1e-3) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NonConvergence(format!("Gauss-Legendre root {i} of n = {n}")));
            }
            let (_, dp) = legendre_with_derivative(n, x);
            Ok((x, 2.0 / ((1.0 - x * x) * dp * dp)))
        })
        .collect::<Result<_>>()?;
    for (i, (x, w)) in roots.into_iter().enumerate() {
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    Ok(GaussLegendreRule { n, nodes, weights })
}

/// Product rule on S²: Gauss–Legendre in `cos θ` times equispaced azimuths.
///
/// Nodes are stored ring-major: node `r * n_phi + k` sits at
/// `θ = acos(cos_theta[r])`, `φ = 2πk / n_phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// Gauss weights in `cos θ` (sum to 2).
    pub theta_weights: Vec<f64>,
    pub n_phi: usize,
    pub exact_degree: usize,
}

impl SphereRule {
    pub fn n_theta(&self) -> usize {
        self.cos_theta.len()
    }

    pub fn node_count(&self) -> usize {
        self.n_theta() * self.n_phi
    }

    /// Weight carried by every node of ring `r`.
    pub fn ring_weight(&self, r: usize) -> f64 {
        self.theta_weights[r] * 2.0 * PI / self.n_phi as f64
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }

    /// `(θ, φ)` of node `i`.
    pub fn node(&self, i: usize) -> (f64, f64) {
        let (r, k) = (i / self.n_phi, i % self.n_phi);
        (self.cos_theta[r].acos(), self.phi(k))
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.ring_weight(i / self.n_phi)
    }

    /// Unit vector of node `i`.
    pub fn unit_vector(&self, i: usize) -> [f64; 3] {
        let (r, k) = (i / self.n_phi, i % self.n_phi);
        let (s, c) = (self.sin_theta[r], self.cos_theta[r]);
        let phi = self.phi(k);
        [s * phi.cos(), s * phi.sin(), c]
    }
}

/// The smallest product rule integrating all spherical polynomials of degree `≤ d`.
pub fn sphere_rule_for_degree(d: usize) -> Result<SphereRule> {
    if d > MAX_SPHERE_DEGREE {
        return Err(Error::Resource(format!("sphere rule degree {d} exceeds {MAX_SPHERE_DEGREE}")));
    }
    let n_theta = (d + 2) / 2;
    let gl = gauss_legendre(n_theta)?;
    let sin_theta = gl.nodes.iter().map(|&x| ((1.0 - x) * (1.0 + x)).sqrt()).collect();
    Ok(SphereRule { cos_theta: gl.nodes, sin_theta, theta_weights: gl.weights, n_phi: d + 1, exact_degree: d })
}

/// `Σ wᵢ vᵢ` over the nodes of `rule`.
///
/// Each ring is summed separately and the ring totals are combined in ring
/// order, so the result does not depend on the size of the thread pool.
pub fn integrate_sphere(rule: &SphereRule, values: &[f64]) -> Result<f64> {
    if values.len() != rule.node_count() {
        return Err(Error::LengthMismatch { expected: rule.node_count(), actual: values.len() });
    }
    let rings: Vec<f64> = values
        .par_chunks(rule.n_phi)
        .enumerate()
        .map(|(r, ring)| rule.ring_weight(r) * compensated_sum(ring.iter().copied()))
        .collect();
    Ok(compensated_sum(rings))
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

const GK_XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WGK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WGK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive 7/15-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the interval with the worst error estimate until the total
/// estimate falls below `max(abs_tol, rel_tol · |value|)`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quadrature> {
    let (v, e) = gk15(&mut f, a, b);
    let mut segs = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let value: f64 = compensated_sum(segs.iter().map(|s| s.2));
        let error: f64 = segs.iter().map(|s| s.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature { value, error });
        }
        let (idx, _) = segs.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (sa, sb, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (sa + sb);
        let (v1, e1) = gk15(&mut f, sa, mid);
        let (v2, e2) = gk15(&mut f, mid, sb);
        segs.push((sa, mid, v1, e1));
        segs.push((mid, sb, v2, e2));
    }
    Err(Error::NonConvergence(format!("adaptive quadrature on [{a}, {b}]")))
}
