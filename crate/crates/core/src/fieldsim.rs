//! Random harmonic coefficients and synthesis of the normalized needlet field
//! on the nodes of a [`SphereRule`].

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cubature::SphereRule;
use crate::error::{Error, Result};
use crate::model::{rho_tilde, BandProfile, Spectrum};

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for `(master_seed, replicate_id, stream)`.
pub fn stream_seed(master_seed: u64, replicate_id: u64, stream: u64) -> u64 {
    mix64(mix64(mix64(master_seed) ^ replicate_id) ^ stream)
}

/// `a_ℓm` for `ℓ_min ≤ ℓ ≤ ℓ_max`, `0 ≤ m ≤ ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    pub ell_min: usize,
    pub ell_max: usize,
    pub master_seed: u64,
    pub replicate_id: u64,
    alm: Vec<Vec<Complex64>>,
}

impl HarmonicCoeffs {
    /// All-zero coefficients.
    pub fn zeros(ell_min: usize, ell_max: usize) -> Self {
        let alm = (ell_min..=ell_max).map(|l| vec![Complex64::new(0.0, 0.0); l + 1]).collect();
        Self { ell_min, ell_max, master_seed: 0, replicate_id: 0, alm }
    }

    /// `a_ℓm` for `|m| ≤ ℓ`, using `a_{ℓ,−m} = (−1)^m conj(a_ℓm)`.
    pub fn get(&self, ell: usize, m: i64) -> Complex64 {
        if ell < self.ell_min || ell > self.ell_max || m.unsigned_abs() as usize > ell {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.alm[ell - self.ell_min][m.unsigned_abs() as usize];
        if m >= 0 {
            a
        } else if m % 2 == 0 {
            a.conj()
        } else {
            -a.conj()
        }
    }

    /// Sets `a_ℓm` for `m ≥ 0`; the imaginary part of `a_ℓ0` is dropped.
    pub fn set(&mut self, ell: usize, m: usize, value: Complex64) {
        let v = if m == 0 { Complex64::new(value.re, 0.0) } else { value };
        self.alm[ell - self.ell_min][m] = v;
    }

    /// `Σ_{m=−ℓ}^{ℓ} |a_ℓm|²`.
    pub fn power(&self, ell: usize) -> f64 {
        let row = &self.alm[ell - self.ell_min];
        row[0].norm_sqr() + 2.0 * row[1..].iter().map(|a| a.norm_sqr()).sum::<f64>()
    }
}

/// Gaussian coefficients with `E|a_ℓm|² = C_ℓ`.
///
/// Every multipole draws from its own ChaCha stream keyed by
/// `(master_seed, replicate_id, ℓ)`, so a replicate is reproducible in
/// isolation and independent of evaluation order.
pub fn sample_alm<S: Spectrum + ?Sized>(
    s: &S,
    ell_min: usize,
    ell_max: usize,
    master_seed: u64,
    replicate_id: u64,
) -> HarmonicCoeffs {
    let mut out = HarmonicCoeffs::zeros(ell_min, ell_max);
    out.master_seed = master_seed;
    out.replicate_id = replicate_id;
    for ell in ell_min..=ell_max {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(master_seed, replicate_id, ell as u64));
        let c = s.cl(ell);
        let sd0 = c.sqrt();
        let sd = (0.5 * c).sqrt();
        let row = &mut out.alm[ell - ell_min];
        let z: f64 = StandardNormal.sample(&mut rng);
        row[0] = Complex64::new(sd0 * z, 0.0);
        for a in row.iter_mut().skip(1) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *a = Complex64::new(sd * re, sd * im);
        }
    }
    out
}

/// Fills `out[ℓ − m] = λ_ℓ^m(cos θ)` for `m ≤ ℓ ≤ ℓ_max`, where
/// `Y_ℓm = λ_ℓ^m(cos θ) e^{imφ}` (Condon–Shortley phase included).
///
/// `lmm` carries `λ_m^m` in and is updated to `λ_{m+1}^{m+1}`, so successive
/// calls with increasing `m` reuse it.
fn assoc_legendre_column(m: usize, ell_max: usize, x: f64, sin_theta: f64, lmm: &mut f64, out: &mut [f64]) {
    let cur = *lmm;
    if ell_max >= m {
        out[0] = cur;
    }
    if ell_max > m {
        out[1] = x * ((2 * m + 3) as f64).sqrt() * cur;
    }
    for ell in m + 2..=ell_max {
        let lf = ell as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
        out[ell - m] = a * (x * out[ell - m - 1] - b * out[ell - m - 2]);
    }
    let m1 = (m + 1) as f64;
    *lmm = -((2.0 * m1 + 1.0) / (2.0 * m1)).sqrt() * sin_theta * cur;
}

/// Fully normalized `Y_ℓm(θ, φ)` for `0 ≤ m ≤ ℓ`.
pub fn spherical_harmonic(ell: usize, m: usize, theta: f64, phi: f64) -> Result<Complex64> {
    if m > ell {
        return Err(Error::Domain(format!("order m = {m} exceeds degree {ell}")));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("colatitude {theta} outside [0, pi]")));
    }
    let (x, s) = (theta.cos(), theta.sin());
    let mut lmm = 1.0 / (4.0 * PI).sqrt();
    for k in 0..m {
        let kf = (k + 1) as f64;
        lmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    let mut col = vec![0.0; ell - m + 1];
    assoc_legendre_column(m, ell, x, s, &mut lmm, &mut col);
    let mf = m as f64 * phi;
    Ok(Complex64::new(mf.cos(), mf.sin()) * col[ell - m])
}

/// The normalized field `β̃_j` at every node of a rule.
#[derive(Debug, Clone)]
pub struct FieldOnGrid {
    pub rule: Arc<SphereRule>,
    pub j: u32,
    pub b_j: f64,
    pub replicate_id: u64,
    /// Ring-major node values.
    pub values: Vec<f64>,
}

/// Precomputed ring profiles `b(ℓ/2ʲ) λ_ℓ^m(cos θ_r) / √B_j` for one band and rule.
#[derive(Debug, Clone)]
pub struct SynthesisPlan {
    rule: Arc<SphereRule>,
    j: u32,
    b_j: f64,
    ell_lo: usize,
    ell_hi: usize,
    /// Start of order `m` inside a ring block; ℓ runs over `max(m, ℓ_lo)..=ℓ_hi`.
    offsets: Vec<usize>,
    block: usize,
    /// Ring-major blocks of `block` entries.
    profiles: Vec<f64>,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

impl SynthesisPlan {
    /// `max_order` is the largest polynomial order of the field that the rule
    /// must integrate exactly.
    pub fn new(profile: &BandProfile, rule: Arc<SphereRule>, max_order: usize) -> Result<Self> {
        let required = max_order.max(1) * profile.ell_max;
        if rule.exact_degree < required {
            return Err(Error::Exactness { required, available: rule.exact_degree });
        }
        let (ell_lo, ell_hi) = match (profile.ells.first(), profile.ells.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::Degenerate("empty band".into())),
        };
        let mut offsets = Vec::with_capacity(ell_hi + 2);
        let mut acc = 0;
        for m in 0..=ell_hi {
            offsets.push(acc);
            acc += ell_hi + 1 - m.max(ell_lo);
        }
        offsets.push(acc);
        let block = acc;
        let scale = 1.0 / profile.b_j.sqrt();
        let mut profiles = vec![0.0; block * rule.n_theta()];
        profiles.par_chunks_mut(block.max(1)).enumerate().for_each(|(r, out)| {
            let (x, s) = (rule.cos_theta[r], rule.sin_theta[r]);
            let mut col = vec![0.0; ell_hi + 1];
            let mut lmm = 1.0 / (4.0 * PI).sqrt();
            for m in 0..=ell_hi {
                assoc_legendre_column(m, ell_hi, x, s, &mut lmm, &mut col);
                let base = offsets[m];
                for ell in m.max(ell_lo)..=ell_hi {
                    let b = profile.window[ell - ell_lo];
                    out[base + ell - m.max(ell_lo)] = scale * b * col[ell - m];
                }
            }
        });
        let n = rule.n_phi;
        let cos_tab = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let sin_tab = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        Ok(Self { rule, j: profile.j, b_j: profile.b_j, ell_lo, ell_hi, offsets, block, profiles, cos_tab, sin_tab })
    }

    pub fn rule(&self) -> &Arc<SphereRule> {
        &self.rule
    }

    /// Multipole range `(ℓ_lo, ℓ_hi)` the coefficients must cover.
    pub fn ell_range(&self) -> (usize, usize) {
        (self.ell_lo, self.ell_hi)
    }

    pub fn synthesize(&self, c: &HarmonicCoeffs) -> Result<FieldOnGrid> {
        if c.ell_min > self.ell_lo || c.ell_max < self.ell_hi {
            return Err(Error::Domain(format!(
                "coefficients cover [{}, {}] but the band needs [{}, {}]",
                c.ell_min, c.ell_max, self.ell_lo, self.ell_hi
            )));
        }
        // Coefficients laid out in plan order.
        let mut flat = vec![Complex64::new(0.0, 0.0); self.block];
        for m in 0..=self.ell_hi {
            let base = self.offsets[m];
            let lo = m.max(self.ell_lo);
            for ell in lo..=self.ell_hi {
                flat[base + ell - lo] = c.alm[ell - c.ell_min][m];
            }
        }
        let n_phi = self.rule.n_phi;
        let mut values = vec![0.0; self.rule.node_count()];
        values.par_chunks_mut(n_phi).enumerate().for_each_init(
            || vec![Complex64::new(0.0, 0.0); self.ell_hi + 1],
            |fm, (r, row)| {
                let prof = &self.profiles[r * self.block..(r + 1) * self.block];
                for (f, ab) in fm.iter_mut().zip(self.offsets.windows(2)) {
                    let (a, b) = (ab[0], ab[1]);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (p, z) in prof[a..b].iter().zip(&flat[a..b]) {
                        acc += z * *p;
                    }
                    *f = acc;
                }
                debug_assert!(fm[0].im.abs() < 1e-12);
                row.fill(fm[0].re);
                for (m, f) in fm.iter().enumerate().skip(1) {
                    let (re, im) = (2.0 * f.re, 2.0 * f.im);
                    let step = m % n_phi;
                    let mut idx = 0usize;
                    for v in row.iter_mut() {
                        *v += re * self.cos_tab[idx] - im * self.sin_tab[idx];
                        idx += step;
                        if idx >= n_phi {
                            idx -= n_phi;
                        }
                    }
                }
            },
        );
        Ok(FieldOnGrid { rule: Arc::clone(&self.rule), j: self.j, b_j: self.b_j, replicate_id: c.replicate_id, values })
    }
}

/// `β̃_j = B_j^{-1/2} Σ_ℓ b(ℓ/2ʲ) Σ_m a_ℓm Y_ℓm` at the nodes of `rule`.
pub fn synthesize_beta(
    profile: &BandProfile,
    coeffs: &HarmonicCoeffs,
    rule: Arc<SphereRule>,
    max_order: usize,
) -> Result<FieldOnGrid> {
    SynthesisPlan::new(profile, rule, max_order)?.synthesize(coeffs)
}

/// Sample correlation of one node pair with its model prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub node_a: usize,
    pub node_b: usize,
    /// Geodesic distance between the nodes.
    pub distance: f64,
    pub correlation: f64,
    pub std_error: f64,
    /// `ρ̃_j(cos d)`.
    pub predicted: f64,
}

pub const MIN_CORRELATION_REPLICATES: usize = 500;

/// Streaming moments for a fixed set of node pairs.
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    pairs: Vec<(usize, usize)>,
    // per pair: Σa, Σb, Σa², Σb², Σab
    sums: Vec<[f64; 5]>,
    count: usize,
}

impl CorrelationAccumulator {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        let sums = vec![[0.0; 5]; pairs.len()];
        Self { pairs, sums, count: 0 }
    }

    pub fn add(&mut self, field: &FieldOnGrid) -> Result<()> {
        for (&(a, b), s) in self.pairs.iter().zip(self.sums.iter_mut()) {
            let n = field.values.len();
            if a >= n || b >= n {
                return Err(Error::Domain(format!("node pair ({a}, {b}) outside a grid of {n} nodes")));
            }
            let (x, y) = (field.values[a], field.values[b]);
            s[0] += x;
            s[1] += y;
            s[2] += x * x;
            s[3] += y * y;
            s[4] += x * y;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self, profile: &BandProfile, rule: &SphereRule) -> Result<Vec<CorrelationEstimate>> {
        if self.count < MIN_CORRELATION_REPLICATES {
            return Err(Error::InsufficientSamples { required: MIN_CORRELATION_REPLICATES, actual: self.count });
        }
        let n = self.count as f64;
        self.pairs
            .iter()
            .zip(&self.sums)
            .map(|(&(a, b), s)| {
                let (ua, ub) = (rule.unit_vector(a), rule.unit_vector(b));
                let dot = (ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2]).clamp(-1.0, 1.0);
                let predicted = rho_tilde(profile, dot)?;
                let (correlation, std_error) = if a == b {
                    (1.0, 0.0)
                } else {
                    let (ma, mb) = (s[0] / n, s[1] / n);
                    let va = s[2] / n - ma * ma;
                    let vb = s[3] / n - mb * mb;
                    let cov = s[4] / n - ma * mb;
                    let r = cov / (va * vb).sqrt();
                    (r, (1.0 - r * r) / (n - 1.0).sqrt())
                };
                Ok(CorrelationEstimate {
                    node_a: a,
                    node_b: b,
                    distance: dot.acos(),
                    correlation,
                    std_error,
                    predicted,
                })
            })
            .collect()
    }
}

/// Sample correlations over replicate fields for the given node pairs.
pub fn empirical_correlation(
    fields: &[FieldOnGrid],
    pairs: &[(usize, usize)],
    profile: &BandProfile,
) -> Result<Vec<CorrelationEstimate>> {
    let first = fields.first().ok_or(Error::InsufficientSamples { required: MIN_CORRELATION_REPLICATES, actual: 0 })?;
    let mut acc = CorrelationAccumulator::new(pairs.to_vec());
    for f in fields {
        acc.add(f)?;
    }
    acc.finish(profile, &first.rule)
}

const DUMP_MAGIC: &[u8; 4] = b"NDLT";
const DUMP_VERSION: u32 = 1;

/// Field values read back from a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub j: u32,
    pub n_theta: u32,
    pub n_phi: u32,
    pub values: Vec<f64>,
}

/// Little-endian dump: `"NDLT"`, version, `j`, `n_theta`, `n_phi` as `u32`,
/// then the node values as `f64` in ring-major order.
pub fn write_field_binary<W: Write>(field: &FieldOnGrid, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    for v in [DUMP_VERSION, field.j, field.rule.n_theta() as u32, field.rule.n_phi as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R) -> Result<FieldDump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Domain("not a field dump (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    let mut next = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next(&mut r)?;
    if version != DUMP_VERSION {
        return Err(Error::Domain(format!("unsupported field dump version {version}")));
    }
    let (j, n_theta, n_phi) = (next(&mut r)?, next(&mut r)?, next(&mut r)?);
    let n = n_theta as usize * n_phi as usize;
    let mut values = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(FieldDump { j, n_theta, n_phi, values })
}
