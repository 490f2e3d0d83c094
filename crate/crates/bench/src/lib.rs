//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use needlets::cubature::sphere_rule_for_degree;
use needlets::fieldsim::{sample_alm, HarmonicCoeffs, SynthesisPlan};
use needlets::model::band_profile;
use needlets::polyspectra::required_degree;
use needlets::{NeedletWindow, PowerSpectrum};

pub fn spectrum() -> PowerSpectrum {
    PowerSpectrum::pure_power(3.0).expect("valid exponent")
}

pub fn window() -> NeedletWindow {
    NeedletWindow::default()
}

/// Synthesis plan for scale `j` exact up to order `q`, and one draw of coefficients.
pub fn synthesis_fixture(j: u32, q: usize) -> (SynthesisPlan, HarmonicCoeffs) {
    let s = spectrum();
    let profile = band_profile(&s, &window(), j).expect("valid scale");
    let rule = Arc::new(sphere_rule_for_degree(required_degree(j, q)).expect("rule within cap"));
    let plan = SynthesisPlan::new(&profile, rule, q).expect("rule is exact enough");
    let coeffs = sample_alm(&s, profile.ell_min, profile.ell_max, 1, 0);
    (plan, coeffs)
}
