//! Hermite polyspectra `ν_{j;q} = ∫ H_q(β̃_j) dσ`, the excursion area
//! `Φ_j(z) = ∫ 1{β̃_j ≤ z} dσ`, the defect and the truncated chaos expansion.

use rayon::prelude::*;

use crate::cubature::{compensated_sum, integrate_sphere, CompensatedSum};
use crate::error::{Error, Result};
use crate::fieldsim::FieldOnGrid;
use crate::specfun::{hermite_table, indicator_hermite_coeff};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyspectrumSample {
    pub j: u32,
    pub q: usize,
    pub value: f64,
    pub replicate_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionSample {
    pub j: u32,
    pub z: f64,
    /// `Φ_j(z) ∈ [0, 4π]`.
    pub phi_value: f64,
    /// `D_j = ∫ 1{β̃ > 0} − 1{β̃ < 0} dσ`.
    pub defect: f64,
    pub replicate_id: u64,
}

/// Exact-cubature degree needed for a polynomial of order `q` in `β̃_j`.
pub fn required_degree(j: u32, q: usize) -> usize {
    q * (1usize << (j + 1))
}

fn check_exactness(f: &FieldOnGrid, q: usize) -> Result<()> {
    let required = required_degree(f.j, q);
    if f.rule.exact_degree < required {
        return Err(Error::Exactness { required, available: f.rule.exact_degree });
    }
    Ok(())
}

/// `ν_{j;q}` for one field.
pub fn polyspectrum(f: &FieldOnGrid, q: usize) -> Result<PolyspectrumSample> {
    let value = polyspectra_all(f, &[q])?[0];
    Ok(PolyspectrumSample { j: f.j, q, value, replicate_id: f.replicate_id })
}

/// `ν_{j;q}` for every order in `qs`, sharing one Hermite pass over the nodes.
pub fn polyspectra_all(f: &FieldOnGrid, qs: &[usize]) -> Result<Vec<f64>> {
    let q_max = match qs.iter().max() {
        Some(&q) => q,
        None => return Ok(Vec::new()),
    };
    if let Some(&q) = qs.iter().find(|&&q| q < 2) {
        return Err(Error::Domain(format!("polyspectrum order q = {q} must be at least 2")));
    }
    check_exactness(f, q_max)?;
    let rule = &f.rule;
    let n_phi = rule.n_phi;
    let per_ring: Vec<Vec<f64>> = f
        .values
        .par_chunks(n_phi)
        .enumerate()
        .map(|(r, ring)| {
            let mut h = vec![0.0; q_max + 1];
            let mut sums = vec![CompensatedSum::new(); qs.len()];
            for &v in ring {
                hermite_table(v, &mut h);
                for (s, &q) in sums.iter_mut().zip(qs) {
                    s.add(h[q]);
                }
            }
            let w = rule.ring_weight(r);
            sums.iter().map(|s| w * s.value()).collect()
        })
        .collect();
    Ok((0..qs.len()).map(|k| compensated_sum(per_ring.iter().map(|r| r[k]))).collect())
}

/// `∫ β̃_j dσ`; zero up to rounding because no band contains `ℓ = 0`.
pub fn integrated_field(f: &FieldOnGrid) -> Result<f64> {
    integrate_sphere(&f.rule, &f.values)
}

/// `Φ_j(z)` and the defect by cubature of the indicators.
///
/// The indicator is not a polynomial, so unlike [`polyspectrum`] this is an
/// approximation whose accuracy improves with the density of the rule.
pub fn empirical_measure(f: &FieldOnGrid, z: f64) -> ExcursionSample {
    let rule = &f.rule;
    let n_phi = rule.n_phi;
    let per_ring: Vec<(f64, f64)> = f
        .values
        .par_chunks(n_phi)
        .enumerate()
        .map(|(r, ring)| {
            let w = rule.ring_weight(r);
            let below = ring.iter().filter(|&&v| v <= z).count() as f64;
            let pos = ring.iter().filter(|&&v| v > 0.0).count() as f64;
            let neg = ring.iter().filter(|&&v| v < 0.0).count() as f64;
            (w * below, w * (pos - neg))
        })
        .collect();
    ExcursionSample {
        j: f.j,
        z,
        phi_value: compensated_sum(per_ring.iter().map(|p| p.0)),
        defect: compensated_sum(per_ring.iter().map(|p| p.1)),
        replicate_id: f.replicate_id,
    }
}

/// `Φ̃_{j,N}(z) = 2ʲ Σ_{q=2}^{N} J_q(z)/q! · ν_{j;q}` from precomputed
/// `nus[k] = ν_{j;k+2}`.
pub fn truncated_expansion_from(j: u32, z: f64, nus: &[f64]) -> f64 {
    let mut fact = 1.0;
    let mut s = CompensatedSum::new();
    for (k, nu) in nus.iter().enumerate() {
        let q = k + 2;
        fact *= q as f64;
        s.add(indicator_hermite_coeff(q, z) / fact * nu);
    }
    f64::from(j).exp2() * s.value()
}

/// `Φ̃_{j,N}(z)` for one field.
pub fn truncated_expansion(f: &FieldOnGrid, z: f64, order: usize) -> Result<f64> {
    if order < 2 {
        return Err(Error::Domain(format!("expansion order N = {order} must be at least 2")));
    }
    let qs: Vec<usize> = (2..=order).collect();
    let nus = polyspectra_all(f, &qs)?;
    Ok(truncated_expansion_from(f.j, z, &nus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::sphere_rule_for_degree;
    use crate::fieldsim::{sample_alm, synthesize_beta, HarmonicCoeffs};
    use crate::model::{band_profile, NeedletWindow, PowerSpectrum};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(j: u32, q: usize, seed: u64) -> (crate::model::BandProfile, HarmonicCoeffs, FieldOnGrid) {
        let s = PowerSpectrum::pure_power(3.0).unwrap();
        let w = NeedletWindow::default();
        let p = band_profile(&s, &w, j).unwrap();
        let rule = Arc::new(sphere_rule_for_degree(required_degree(j, q)).unwrap());
        let c = sample_alm(&s, p.ell_min, p.ell_max, seed, 0);
        let f = synthesize_beta(&p, &c, rule, q).unwrap();
        (p, c, f)
    }

    #[test]
    fn q2_parseval() {
        let (p, c, f) = setup(4, 2, 11);
        let nu = polyspectrum(&f, 2).unwrap().value;
        let oracle: f64 = p
            .ells
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let w = p.normalized_weight(i);
                w * (c.power(l) / p.cl[i] - (2 * l + 1) as f64)
            })
            .sum();
        assert_relative_eq!(nu, oracle, max_relative = 1e-10);
    }

    #[test]
    fn zero_field_gives_hermite_constant() {
        let (p, _, f) = setup(3, 4, 1);
        let c = HarmonicCoeffs::zeros(p.ell_min, p.ell_max);
        let z = synthesize_beta(&p, &c, Arc::clone(&f.rule), 4).unwrap();
        assert_relative_eq!(polyspectrum(&z, 4).unwrap().value, 3.0 * 4.0 * PI, max_relative = 1e-13);
        assert_abs_diff_eq!(polyspectrum(&z, 3).unwrap().value, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn exactness_enforced() {
        let (_, _, f) = setup(3, 2, 1);
        assert!(matches!(polyspectrum(&f, 3), Err(Error::Exactness { .. })));
        assert!(polyspectrum(&f, 1).is_err());
        assert!(truncated_expansion(&f, 0.0, 3).is_err());
    }

    #[test]
    fn integrated_field_vanishes() {
        let (_, _, f) = setup(4, 2, 5);
        assert_abs_diff_eq!(integrated_field(&f).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn excursion_identities() {
        let (_, _, f) = setup(4, 3, 9);
        let e0 = empirical_measure(&f, 0.0);
        assert_abs_diff_eq!(e0.defect, 4.0 * PI - 2.0 * e0.phi_value, epsilon = 1e-12);
        let top = empirical_measure(&f, 10.0);
        assert_relative_eq!(top.phi_value, 4.0 * PI, max_relative = 1e-13);
        let mut prev = -1.0;
        for k in -30..=30 {
            let v = empirical_measure(&f, f64::from(k) * 0.1).phi_value;
            assert!(v >= prev && (0.0..=4.0 * PI + 1e-12).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn truncated_expansion_at_zero() {
        let (_, _, f) = setup(3, 3, 2);
        assert_eq!(truncated_expansion(&f, 0.0, 2).unwrap(), 0.0);
        let nus = polyspectra_all(&f, &[2, 3]).unwrap();
        let direct = 8.0 * (indicator_hermite_coeff(3, 0.0) / 6.0 * nus[1]);
        assert_relative_eq!(truncated_expansion(&f, 0.0, 3).unwrap(), direct, max_relative = 1e-14);
    }
}
