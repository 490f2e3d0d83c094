//! Monte Carlo driver, sample statistics and the tables built from them.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asymptotics::{constant, scaled_variance, variance_exact};
use crate::cubature::sphere_rule_for_degree;
use crate::error::{Error, Result};
use crate::fieldsim::{sample_alm, stream_seed, SynthesisPlan};
use crate::model::{band_profile, BandProfile, NeedletWindow, PowerSpectrum, Spectrum, Window};
use crate::polyspectra::{empirical_measure, polyspectra_all, required_degree, truncated_expansion_from};
use crate::specfun::{gaussian_cdf, gaussian_pdf, gaussian_quantile};

pub const BOOTSTRAP_RESAMPLES: usize = 500;
pub const DEFAULT_Z_GRID: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

/// Everything needed to reproduce a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub num_coeffs: Vec<f64>,
    pub den_coeffs: Vec<f64>,
    pub window_grid: usize,
    pub js: Vec<u32>,
    pub qs: Vec<usize>,
    pub zs: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Highest chaos order of the truncated excursion expansion.
    pub expansion_order: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            num_coeffs: vec![1.0],
            den_coeffs: vec![1.0],
            window_grid: crate::model::DEFAULT_WINDOW_GRID,
            js: vec![4],
            qs: vec![2],
            zs: Vec::new(),
            replicates: 2000,
            master_seed: 0,
            expansion_order: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidConfig("at least 2 replicates are required".into()));
        }
        if self.js.is_empty() {
            return Err(Error::InvalidConfig("j list must not be empty".into()));
        }
        if let Some(&q) = self.qs.iter().find(|&&q| q < 2) {
            return Err(Error::InvalidConfig(format!("q must be >= 2 (got {q})")));
        }
        if !self.zs.is_empty() && self.expansion_order < 2 {
            return Err(Error::InvalidConfig("expansion order must be >= 2".into()));
        }
        for &j in &self.js {
            let d = self.rule_degree(j);
            if j == 0 || j > crate::model::MAX_SCALE || d > crate::cubature::MAX_SPHERE_DEGREE {
                return Err(Error::InvalidConfig(format!("scale j = {j} exceeds the cubature cap (degree {d})")));
            }
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<PowerSpectrum> {
        PowerSpectrum::new(self.alpha, self.num_coeffs.clone(), self.den_coeffs.clone())
    }

    pub fn window(&self) -> Result<NeedletWindow> {
        NeedletWindow::new(self.window_grid)
    }

    /// Highest polynomial order the rule must integrate exactly.
    pub fn max_order(&self) -> usize {
        let q = self.qs.iter().copied().max().unwrap_or(1);
        if self.zs.is_empty() {
            q
        } else {
            q.max(self.expansion_order)
        }
    }

    pub fn rule_degree(&self, j: u32) -> usize {
        required_degree(j, self.max_order())
    }
}

/// Per-replicate observables at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate_id: u64,
    /// `ν_{j;q}` in the order of the configured `q` list.
    pub nus: Vec<f64>,
    /// `Φ_j(z)` in the order of the configured `z` list.
    pub phis: Vec<f64>,
    pub defect: f64,
    /// `Φ̃_{j,N}(z)` in the order of the configured `z` list.
    pub truncated: Vec<f64>,
}

/// Precomputed state for simulating one scale.
pub struct ScaleRun {
    pub j: u32,
    pub profile: BandProfile,
    plan: SynthesisPlan,
    qs: Vec<usize>,
    zs: Vec<f64>,
    expansion_order: usize,
}

impl ScaleRun {
    pub fn new<S, W>(cfg: &ExperimentConfig, s: &S, w: &W, j: u32) -> Result<Self>
    where
        S: Spectrum + ?Sized,
        W: Window + ?Sized,
    {
        let profile = band_profile(s, w, j)?;
        let rule = Arc::new(sphere_rule_for_degree(cfg.rule_degree(j))?);
        let plan = SynthesisPlan::new(&profile, rule, cfg.max_order())?;
        Ok(Self { j, profile, plan, qs: cfg.qs.clone(), zs: cfg.zs.clone(), expansion_order: cfg.expansion_order })
    }

    pub fn node_count(&self) -> usize {
        self.plan.rule().node_count()
    }

    pub fn replicate<S: Spectrum + ?Sized>(
        &self,
        s: &S,
        master_seed: u64,
        replicate_id: u64,
    ) -> Result<ReplicateRecord> {
        let coeffs = sample_alm(s, self.profile.ell_min, self.profile.ell_max, master_seed, replicate_id);
        let field = self.plan.synthesize(&coeffs)?;
        let nus = polyspectra_all(&field, &self.qs)?;
        let mut phis = Vec::with_capacity(self.zs.len());
        let mut truncated = Vec::with_capacity(self.zs.len());
        let mut defect = empirical_measure(&field, 0.0).defect;
        if !self.zs.is_empty() {
            let orders: Vec<usize> = (2..=self.expansion_order).collect();
            let chaos = polyspectra_all(&field, &orders)?;
            for &z in &self.zs {
                let e = empirical_measure(&field, z);
                phis.push(e.phi_value);
                defect = e.defect;
                truncated.push(truncated_expansion_from(self.j, z, &chaos));
            }
        }
        Ok(ReplicateRecord { replicate_id, nus, phis, defect, truncated })
    }

    /// Replicates `ids` in order; parallel over replicates.
    pub fn replicates<S: Spectrum + ?Sized>(
        &self,
        s: &S,
        master_seed: u64,
        ids: std::ops::Range<u64>,
    ) -> Result<Vec<ReplicateRecord>> {
        ids.into_par_iter().map(|id| self.replicate(s, master_seed, id)).collect()
    }
}

/// Samples of every observable at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSamples {
    pub j: u32,
    pub records: Vec<ReplicateRecord>,
}

impl ScaleSamples {
    pub fn nu(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.nus[k]).collect()
    }

    pub fn phi(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.phis[k]).collect()
    }

    pub fn truncated(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.truncated[k]).collect()
    }
}

/// Which statistic a summary describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Polyspectrum(usize),
    Excursion(f64),
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Polyspectrum(q) => write!(f, "nu_q{q}"),
            Statistic::Excursion(z) => write!(f, "phi_z{z}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub j: u32,
    pub stat: Statistic,
    pub replicates: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub variance: f64,
    pub se_variance: f64,
    pub k4: f64,
    pub se_k4: f64,
    pub ks_distance: f64,
    pub wasserstein1: f64,
    pub se_ks: f64,
    pub se_wasserstein1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub scales: Vec<ScaleSamples>,
    pub summaries: Vec<McSummary>,
}

/// Runs every configured scale and summarizes the samples.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = cfg.spectrum()?;
    let w = cfg.window()?;
    let mut scales = Vec::with_capacity(cfg.js.len());
    for &j in &cfg.js {
        let run = ScaleRun::new(cfg, &s, &w, j)?;
        let records = run.replicates(&s, cfg.master_seed, 0..cfg.replicates as u64)?;
        scales.push(ScaleSamples { j, records });
    }
    let summaries = summarize(cfg, &scales)?;
    Ok(ExperimentReport { config: cfg.clone(), scales, summaries })
}

/// Summaries for every `(j, q)` and `(j, z)` of the samples.
pub fn summarize(cfg: &ExperimentConfig, scales: &[ScaleSamples]) -> Result<Vec<McSummary>> {
    let mut out = Vec::new();
    for sc in scales {
        for (k, &q) in cfg.qs.iter().enumerate() {
            let xs = sc.nu(k);
            let seed = stream_seed(cfg.master_seed, u64::from(sc.j), q as u64);
            out.push(summary(sc.j, Statistic::Polyspectrum(q), &xs, 0.0, seed)?);
        }
        for (k, &z) in cfg.zs.iter().enumerate() {
            let xs = sc.phi(k);
            let seed = stream_seed(cfg.master_seed, u64::from(sc.j), z.to_bits());
            out.push(summary(sc.j, Statistic::Excursion(z), &xs, 4.0 * PI * gaussian_cdf(z), seed)?);
        }
    }
    Ok(out)
}

/// Moments, k₄ and distances to N(0, 1) of `(x − center)/sd`.
pub fn summary(j: u32, stat: Statistic, xs: &[f64], center: f64, seed: u64) -> Result<McSummary> {
    let n = xs.len();
    let m = Moments::of(xs);
    let (k4, se_k4) = if n >= 8 { kstat_cum4_with_se(xs)? } else { (f64::NAN, f64::NAN) };
    let centered: Vec<f64> = xs.iter().map(|x| x - center).collect();
    let (ks, w1, se_ks, se_w1) = if n >= 100 && m.variance > 0.0 {
        let ks = ks_distance(&centered)?;
        let w1 = wasserstein1_empirical(&centered)?;
        let se_ks = bootstrap_se(&centered, BOOTSTRAP_RESAMPLES, seed, |s| ks_distance(s).unwrap_or(f64::NAN));
        let se_w1 =
            bootstrap_se(&centered, BOOTSTRAP_RESAMPLES, seed ^ 1, |s| wasserstein1_empirical(s).unwrap_or(f64::NAN));
        (ks, w1, se_ks, se_w1)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(McSummary {
        j,
        stat,
        replicates: n,
        mean: m.mean,
        se_mean: (m.variance / n as f64).sqrt(),
        variance: m.variance,
        se_variance: m.se_variance,
        k4,
        se_k4,
        ks_distance: ks,
        wasserstein1: w1,
        se_ks,
        se_wasserstein1: se_w1,
    })
}

/// Sample mean, unbiased variance and the standard error of the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_variance: f64,
    /// Unbiased sample skewness `k₃ / k₂^{3/2}`.
    pub skewness: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { f64::NAN };
        let se_variance =
            if n > 3 { ((m4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0).sqrt() } else { f64::NAN };
        let skewness = if n > 2 {
            let k3 = m3 * nf * nf / ((nf - 1.0) * (nf - 2.0));
            k3 / variance.powf(1.5)
        } else {
            f64::NAN
        };
        Self { n, mean, variance, se_variance, skewness }
    }
}

/// Sample covariance and its standard error.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), actual: ys.len() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { required: 3, actual: n });
    }
    let nf = n as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / nf, ys.iter().sum::<f64>() / nf);
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = prods.iter().sum::<f64>() / (nf - 1.0);
    let var_p = prods.iter().map(|p| (p - cov) * (p - cov)).sum::<f64>() / (nf - 1.0);
    Ok((cov, (var_p / nf).sqrt()))
}

fn kstat4_from_sums(n: f64, s1: f64, s2: f64, s3: f64, s4: f64) -> (f64, f64) {
    let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
    let num =
        -6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2 - 3.0 * n * (n - 1.0) * s2 * s2 - 4.0 * n * (n + 1.0) * s1 * s3
            + n * n * (n + 1.0) * s4;
    let k4 = num / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
    (k2, k4)
}

fn power_sums(xs: &[f64], shift: f64) -> [f64; 4] {
    let mut s = [0.0; 4];
    for &x in xs {
        let d = x - shift;
        let d2 = d * d;
        s[0] += d;
        s[1] += d2;
        s[2] += d2 * d;
        s[3] += d2 * d2;
    }
    s
}

/// Unbiased fourth k-statistic.
pub fn kstat_cum4(xs: &[f64]) -> Result<f64> {
    Ok(kstat_cum4_with_se(xs)?.0)
}

fn check_k4_len(xs: &[f64]) -> Result<()> {
    if xs.len() < 8 {
        return Err(Error::InsufficientSamples { required: 8, actual: xs.len() });
    }
    Ok(())
}

/// Leave-one-out `(k₂, k₄)` pairs for jackknife error bars.
fn jackknife_k2_k4(xs: &[f64]) -> (f64, f64, Vec<(f64, f64)>) {
    let n = xs.len() as f64;
    let shift = xs.iter().sum::<f64>() / n;
    let s = power_sums(xs, shift);
    let (k2, k4) = kstat4_from_sums(n, s[0], s[1], s[2], s[3]);
    let loo = xs
        .iter()
        .map(|&x| {
            let d = x - shift;
            let d2 = d * d;
            kstat4_from_sums(n - 1.0, s[0] - d, s[1] - d2, s[2] - d2 * d, s[3] - d2 * d2)
        })
        .collect();
    (k2, k4, loo)
}

fn jackknife_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    ((nf - 1.0) / nf * ss).sqrt()
}

/// `k₄` and its jackknife standard error.
pub fn kstat_cum4_with_se(xs: &[f64]) -> Result<(f64, f64)> {
    check_k4_len(xs)?;
    let (_, k4, loo) = jackknife_k2_k4(xs);
    Ok((k4, jackknife_se(loo.iter().map(|p| p.1), xs.len())))
}

/// `k₄ / k₂²` and its jackknife standard error.
pub fn cumulant_ratio_with_se(xs: &[f64]) -> Result<(f64, f64)> {
    check_k4_len(xs)?;
    let (k2, k4, loo) = jackknife_k2_k4(xs);
    if !(k2 > 0.0) {
        return Err(Error::Degenerate("zero sample variance".into()));
    }
    Ok((k4 / (k2 * k2), jackknife_se(loo.iter().map(|p| p.1 / (p.0 * p.0)), xs.len())))
}

fn scaled_sorted(xs: &[f64]) -> Result<Vec<f64>> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, actual: n });
    }
    let m = Moments::of(xs);
    let sd = m.variance.sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let mut ys: Vec<f64> = xs.iter().map(|x| x / sd).collect();
    ys.sort_by(f64::total_cmp);
    Ok(ys)
}

/// `sup_z |F_n(z) − Φ(z)|` for the samples divided by their sample standard
/// deviation. The samples are not re-centered, so a location offset shows up
/// in the distance.
pub fn ks_distance(xs: &[f64]) -> Result<f64> {
    let ys = scaled_sorted(xs)?;
    let n = ys.len() as f64;
    Ok(ys.iter().enumerate().fold(0.0f64, |d, (i, &y)| {
        let c = gaussian_cdf(y);
        d.max((i + 1) as f64 / n - c).max(c - i as f64 / n)
    }))
}

/// `∫ |y − z| φ(z) dz` over `[a, b]`.
fn abs_dev_integral(y: f64, a: f64, b: f64) -> f64 {
    // ∫_a^b (y − z) φ(z) dz = y (Φ(b) − Φ(a)) + φ(b) − φ(a)
    let signed = |lo: f64, hi: f64| {
        let cdf = |z: f64| {
            if z.is_infinite() {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                gaussian_cdf(z)
            }
        };
        let pdf = |z: f64| if z.is_infinite() { 0.0 } else { gaussian_pdf(z) };
        y * (cdf(hi) - cdf(lo)) + pdf(hi) - pdf(lo)
    };
    if y <= a {
        -signed(a, b)
    } else if y >= b {
        signed(a, b)
    } else {
        signed(a, y) - signed(y, b)
    }
}

/// `∫₀¹ |F_n^{-1}(p) − Φ^{-1}(p)| dp` for the samples divided by their
/// sample standard deviation (not re-centered), evaluated exactly.
pub fn wasserstein1_empirical(xs: &[f64]) -> Result<f64> {
    let ys = scaled_sorted(xs)?;
    let n = ys.len();
    let mut total = 0.0;
    let mut lo = f64::NEG_INFINITY;
    for (i, &y) in ys.iter().enumerate() {
        let hi = if i + 1 == n { f64::INFINITY } else { gaussian_quantile((i + 1) as f64 / n as f64) };
        total += abs_dev_integral(y, lo, hi);
        lo = hi;
    }
    Ok(total)
}

/// Bootstrap standard error of `stat` from `resamples` deterministic resamples.
pub fn bootstrap_se<F>(xs: &[f64], resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = xs.len();
    let vals: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, b, 0xb007));
            let sample: Vec<f64> = (0..n).map(|_| xs[rng.random_range(0..n)]).collect();
            stat(&sample)
        })
        .collect();
    let m = Moments::of(&vals);
    m.variance.sqrt()
}

/// Exact `Var`, `cum₄` and `cum₄/Var²` of `ν_{j;2} = Σ w_ℓ (χ²_{2ℓ+1} − (2ℓ+1))`.
pub fn q2_exact_cumulants(p: &BandProfile) -> (f64, f64, f64) {
    let (mut v, mut k4) = (0.0, 0.0);
    for (i, &l) in p.ells.iter().enumerate() {
        let w = p.normalized_weight(i);
        let d = (2 * l + 1) as f64;
        v += 2.0 * w * w * d;
        k4 += 48.0 * w.powi(4) * d;
    }
    (v, k4, k4 / (v * v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantRow {
    pub j: u32,
    pub q: usize,
    pub k4: f64,
    /// Standard error of `k4` (zero for exact rows).
    pub se: f64,
    pub k4_over_var2: f64,
    pub se_ratio: f64,
    /// `k4_over_var2` divided by the previous row's.
    pub ratio_to_previous: Option<f64>,
}

fn chain_ratios(rows: &mut [CumulantRow]) {
    for i in 1..rows.len() {
        rows[i].ratio_to_previous = Some(rows[i].k4_over_var2 / rows[i - 1].k4_over_var2);
    }
}

/// `cum₄/Var²` of `ν_{j;2}` from the exact chi-square decomposition.
pub fn cumulant_ratio_table_exact<S, W>(s: &S, w: &W, js: &[u32]) -> Result<Vec<CumulantRow>>
where
    S: Spectrum + ?Sized,
    W: Window + ?Sized,
{
    if js.len() < 2 {
        return Err(Error::InvalidConfig("the cumulant table needs at least two scales".into()));
    }
    let mut rows = js
        .iter()
        .map(|&j| {
            let p = band_profile(s, w, j)?;
            let (_, k4, r) = q2_exact_cumulants(&p);
            Ok(CumulantRow { j, q: 2, k4, se: 0.0, k4_over_var2: r, se_ratio: 0.0, ratio_to_previous: None })
        })
        .collect::<Result<Vec<_>>>()?;
    chain_ratios(&mut rows);
    Ok(rows)
}

/// `k₄/k₂²` with jackknife error bars from per-scale samples of `ν_{j;q}`.
pub fn cumulant_ratio_table_mc(q: usize, samples: &[(u32, Vec<f64>)]) -> Result<Vec<CumulantRow>> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig("the cumulant table needs at least two scales".into()));
    }
    let mut rows = samples
        .iter()
        .map(|(j, xs)| {
            let (k4, se) = kstat_cum4_with_se(xs)?;
            let (r, se_r) = cumulant_ratio_with_se(xs)?;
            Ok(CumulantRow { j: *j, q, k4, se, k4_over_var2: r, se_ratio: se_r, ratio_to_previous: None })
        })
        .collect::<Result<Vec<_>>>()?;
    chain_ratios(&mut rows);
    Ok(rows)
}

/// Cumulant table: exact for `q = 2`, otherwise from the report's samples.
pub fn cumulant_ratio_table(report: &ExperimentReport, q: usize) -> Result<Vec<CumulantRow>> {
    if q == 2 {
        let s = report.config.spectrum()?;
        let w = report.config.window()?;
        return cumulant_ratio_table_exact(&s, &w, &report.config.js);
    }
    let k = report
        .config
        .qs
        .iter()
        .position(|&x| x == q)
        .ok_or_else(|| Error::InvalidConfig(format!("q = {q} was not simulated")))?;
    let samples: Vec<(u32, Vec<f64>)> = report.scales.iter().map(|s| (s.j, s.nu(k))).collect();
    cumulant_ratio_table_mc(q, &samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionRow {
    pub j: u32,
    pub z: f64,
    pub mean: f64,
    pub se_mean: f64,
    /// `4πΦ(z)`.
    pub exact_mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub ks: f64,
    pub w1: f64,
    pub se_ks: f64,
    pub se_w1: f64,
    pub mean_defect: f64,
    pub se_defect: f64,
    /// `Var[Φ̃_{j,N}(z)] / Var[2ʲ Φ_j(z)]`.
    pub sigma_n_sq: f64,
}

/// Standardized excursion statistics per scale for one threshold.
pub fn excursion_clt_table(report: &ExperimentReport, z: f64) -> Result<Vec<ExcursionRow>> {
    let k = report
        .config
        .zs
        .iter()
        .position(|&x| x == z)
        .ok_or_else(|| Error::InvalidConfig(format!("z = {z} was not simulated")))?;
    report
        .scales
        .iter()
        .map(|sc| {
            let xs = sc.phi(k);
            let exact_mean = 4.0 * PI * gaussian_cdf(z);
            let sm = summary(
                sc.j,
                Statistic::Excursion(z),
                &xs,
                exact_mean,
                stream_seed(report.config.master_seed, u64::from(sc.j), z.to_bits()),
            )?;
            let m = Moments::of(&xs);
            let defects: Vec<f64> = sc.records.iter().map(|r| r.defect).collect();
            let d = Moments::of(&defects);
            let trunc = Moments::of(&sc.truncated(k));
            let scale = f64::from(sc.j).exp2();
            Ok(ExcursionRow {
                j: sc.j,
                z,
                mean: m.mean,
                se_mean: (m.variance / m.n as f64).sqrt(),
                exact_mean,
                variance: m.variance,
                skewness: m.skewness,
                ks: sm.ks_distance,
                w1: sm.wasserstein1,
                se_ks: sm.se_ks,
                se_w1: sm.se_wasserstein1,
                mean_defect: d.mean,
                se_defect: (d.variance / d.n as f64).sqrt(),
                sigma_n_sq: trunc.variance / (scale * scale * m.variance),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub j: u32,
    pub q: usize,
    pub var_mc: f64,
    pub se: f64,
    pub var_exact: f64,
    /// `2^{2j} var_exact / q!`
    pub scaled: f64,
    pub c_q: f64,
    /// `var_mc / var_exact`
    pub ratio: f64,
}

/// Monte Carlo variances against the exact values and the limit constant.
pub fn variance_table(report: &ExperimentReport) -> Result<Vec<VarianceRow>> {
    let s = report.config.spectrum()?;
    let w = report.config.window()?;
    let mut consts = Vec::new();
    for &q in &report.config.qs {
        consts.push(constant(q, &w, report.config.alpha)?.value);
    }
    let mut rows = Vec::new();
    for sc in &report.scales {
        for (k, &q) in report.config.qs.iter().enumerate() {
            let m = Moments::of(&sc.nu(k));
            let exact = variance_exact(sc.j, q, &s, &w)?;
            rows.push(VarianceRow {
                j: sc.j,
                q,
                var_mc: m.variance,
                se: m.se_variance,
                var_exact: exact,
                scaled: scaled_variance(sc.j, q, exact),
                c_q: consts[k],
                ratio: m.variance / exact,
            });
        }
    }
    Ok(rows)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub const VARIANCE_HEADER: &str = "j,q,var_mc,se,var_exact,scaled,c_q,ratio";
pub const CUMULANT_HEADER: &str = "j,q,k4,se,k4_over_var2";
pub const DISTANCE_HEADER: &str = "j,stat,ks,w1,se_boot";
pub const NU_SAMPLES_HEADER: &str = "replicate,j,q,nu";
pub const PHI_SAMPLES_HEADER: &str = "replicate,j,z,phi,defect";

pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], mut out: W) -> Result<()> {
    writeln!(out, "{VARIANCE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.j,
            r.q,
            fmt_f(r.var_mc),
            fmt_f(r.se),
            fmt_f(r.var_exact),
            fmt_f(r.scaled),
            fmt_f(r.c_q),
            fmt_f(r.ratio)
        )?;
    }
    Ok(())
}

pub fn write_cumulant_csv<W: Write>(rows: &[CumulantRow], mut out: W) -> Result<()> {
    writeln!(out, "{CUMULANT_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.j, r.q, fmt_f(r.k4), fmt_f(r.se), fmt_f(r.k4_over_var2))?;
    }
    Ok(())
}

/// Distance table; `se_boot` is the bootstrap standard error of the KS distance.
pub fn write_distance_csv<W: Write>(rows: &[McSummary], mut out: W) -> Result<()> {
    writeln!(out, "{DISTANCE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.j, r.stat, fmt_f(r.ks_distance), fmt_f(r.wasserstein1), fmt_f(r.se_ks))?;
    }
    Ok(())
}

pub fn write_nu_samples_csv<W: Write>(qs: &[usize], scales: &[ScaleSamples], mut out: W) -> Result<()> {
    writeln!(out, "{NU_SAMPLES_HEADER}")?;
    for sc in scales {
        for r in &sc.records {
            for (q, nu) in qs.iter().zip(&r.nus) {
                writeln!(out, "{},{},{},{}", r.replicate_id, sc.j, q, fmt_f(*nu))?;
            }
        }
    }
    Ok(())
}

pub fn write_phi_samples_csv<W: Write>(zs: &[f64], scales: &[ScaleSamples], mut out: W) -> Result<()> {
    writeln!(out, "{PHI_SAMPLES_HEADER}")?;
    for sc in scales {
        for r in &sc.records {
            for (z, phi) in zs.iter().zip(&r.phis) {
                writeln!(out, "{},{},{},{},{}", r.replicate_id, sc.j, z, fmt_f(*phi), fmt_f(r.defect))?;
            }
        }
    }
    Ok(())
}

pub const EXCURSION_HEADER: &str =
    "j,z,mean,se_mean,exact_mean,variance,skewness,ks,w1,se_ks,se_w1,mean_defect,se_defect,sigma_n_sq";

pub fn write_excursion_csv<W: Write>(rows: &[ExcursionRow], mut out: W) -> Result<()> {
    writeln!(out, "{EXCURSION_HEADER}")?;
    for r in rows {
        let vals = [
            r.mean,
            r.se_mean,
            r.exact_mean,
            r.variance,
            r.skewness,
            r.ks,
            r.w1,
            r.se_ks,
            r.se_w1,
            r.mean_defect,
            r.se_defect,
            r.sigma_n_sq,
        ];
        let cells: Vec<String> = vals.iter().map(|&v| fmt_f(v)).collect();
        writeln!(out, "{},{},{}", r.j, r.z, cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn kstat_on_gaussian_and_chisq() {
        let xs = normals(100_000, 1);
        let (k4, se) = kstat_cum4_with_se(&xs).unwrap();
        assert!(k4.abs() < 4.0 * se, "k4 = {k4} se = {se}");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chi = ChiSquared::new(5.0).unwrap();
        let ys: Vec<f64> = (0..100_000).map(|_| chi.sample(&mut rng) - 5.0).collect();
        let (k4, se) = kstat_cum4_with_se(&ys).unwrap();
        assert!((k4 - 240.0).abs() < 4.0 * se, "k4 = {k4} se = {se}");
        assert!(kstat_cum4(&xs[..7]).is_err());
    }

    #[test]
    fn kstat_is_shift_invariant() {
        let xs = normals(1000, 3);
        let ys: Vec<f64> = xs.iter().map(|x| x + 1e3).collect();
        assert_relative_eq!(kstat_cum4(&xs).unwrap(), kstat_cum4(&ys).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn distances() {
        let xs = normals(10_000, 4);
        let ks = ks_distance(&xs).unwrap();
        assert!(ks < 1.36 / 100.0, "ks = {ks}");
        let w1 = wasserstein1_empirical(&xs).unwrap();
        assert!(w1 < 0.05, "w1 = {w1}");
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        // scaled by sd ≈ 1, the shifted sample sits one unit off
        let expect = 2.0 * gaussian_cdf(0.5) - 1.0;
        assert!((ks_distance(&shifted).unwrap() - expect).abs() < 0.02);
        assert!(ks_distance(&[1.0; 200]).is_err());
    }

    #[test]
    fn wasserstein_of_a_point_mass() {
        // single sample at zero: E|Z| = √(2/π)
        let w = {
            let ys = [0.0f64];
            abs_dev_integral(ys[0], f64::NEG_INFINITY, f64::INFINITY)
        };
        assert_relative_eq!(w, (2.0 / PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn moments_and_covariance() {
        let xs = normals(50_000, 5);
        let m = Moments::of(&xs);
        assert!((m.variance - 1.0).abs() < 4.0 * m.se_variance);
        let ys = normals(50_000, 6);
        let (c, se) = covariance_with_se(&xs, &ys).unwrap();
        assert!(c.abs() < 4.0 * se);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig { qs: vec![1], ..Default::default() };
        assert!(c.validate().is_err());
        c.qs = vec![2];
        c.replicates = 1;
        assert!(c.validate().is_err());
        c.replicates = 10;
        c.js = vec![20];
        c.qs = vec![4];
        assert!(c.validate().is_err());
    }

    #[test]
    fn bootstrap_deterministic() {
        let xs = normals(200, 7);
        let a = bootstrap_se(&xs, 50, 9, |s| s.iter().sum::<f64>() / s.len() as f64);
        let b = bootstrap_se(&xs, 50, 9, |s| s.iter().sum::<f64>() / s.len() as f64);
        assert_eq!(a, b);
        assert!((a - 1.0 / 200f64.sqrt()).abs() < 0.03);
    }

    #[test]
    fn gaussian_ratios_vanish() {
        let samples: Vec<(u32, Vec<f64>)> = (0..3).map(|j| (j, normals(20_000, 10 + u64::from(j)))).collect();
        let rows = cumulant_ratio_table_mc(3, &samples).unwrap();
        for r in rows {
            assert!(r.k4_over_var2.abs() < 4.0 * r.se_ratio);
        }
    }
}
