//! Closed-form results for the fully resonant V system.
//!
//! With both excited levels degenerate with the field mode, the
//! interaction-picture propagator of the three-level V system acts on
//! Fock states through scalar elements (a bright/dark-state reduction of
//! the Jaynes-Cummings problem). These expressions provide an
//! implementation-independent reference for the numerical propagation.
//!
//! Series are truncated at the same Fock level as the numerical model
//! and thermal weights are renormalized over the truncated window, so
//! the reference describes exactly the same model space.

use num_complex::Complex64 as C64;

use crate::field::{coherent_amplitudes, thermal_occupation};
use crate::error::Result;

/// Parameters of the closed-form series.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticParams {
    /// Matter-field coupling constant (hartree).
    pub lambda: f64,
    /// Mean photon number of the thermal weights.
    pub n_bar: f64,
    /// Truncation level of the series; must be at least the n_max of the
    /// numerical run it is compared against.
    pub n_terms: usize,
    /// Coherent amplitude for the coherent-field expressions.
    pub alpha: C64,
}

/// Scalar actions of the resonant propagator elements on |n>.
///
/// `s_fg` maps |n> to |n-1>, `s_gf` maps |n> to |n+1>; the rest are
/// diagonal.
#[derive(Clone, Copy, Debug)]
pub struct PropagatorElements {
    pub c_f: f64,
    pub c_fe: f64,
    pub s_fg: C64,
    pub s_gf: C64,
    pub c_g: f64,
}

pub fn propagator_elements(n: usize, lambda: f64, t: f64) -> PropagatorElements {
    let up = (2.0 * (n as f64 + 1.0)).sqrt() * lambda * t;
    let down = (2.0 * n as f64).sqrt() * lambda * t;
    let m_i_over_rt2 = C64::new(0.0, -1.0 / 2.0_f64.sqrt());
    PropagatorElements {
        c_f: 0.5 * (up.cos() + 1.0),
        c_fe: 0.5 * (up.cos() - 1.0),
        s_fg: m_i_over_rt2 * down.sin(),
        s_gf: m_i_over_rt2 * up.sin(),
        c_g: down.cos(),
    }
}

/// Excited-state coherence rho_fe(t) for a thermal field:
/// (1/2) sum_n p_n sin^2(sqrt(2n) lambda t).
pub fn coherence_fe_thermal(p: &AnalyticParams, t: f64) -> Result<f64> {
    let probs = thermal_occupation(p.n_bar, p.n_terms)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(n, &pn)| {
            let s = ((2.0 * n as f64).sqrt() * p.lambda * t).sin();
            0.5 * pn * s * s
        })
        .sum())
}

/// Excited-state coherence rho_fe(t) for a coherent field:
/// (1/2) e^{-nbar} sum_n nbar^n/n! sin^2(sqrt(2n) lambda t), evaluated
/// with the truncated, renormalized |c_n|^2 weights.
pub fn coherence_fe_coherent(p: &AnalyticParams, t: f64) -> f64 {
    let weights = coherent_weights(p);
    weights
        .iter()
        .enumerate()
        .map(|(n, &w)| {
            let s = ((2.0 * n as f64).sqrt() * p.lambda * t).sin();
            0.5 * w * s * s
        })
        .sum()
}

/// Ground-excited coherence rho_gf(t) for a coherent field, in the
/// interaction picture:
///
/// (i/sqrt(2)) e^{-|alpha|^2} sum_n alpha^n conj(alpha)^(n+1)
///     / sqrt(n! (n+1)!) sin(sqrt(2(n+1)) lambda t) cos(sqrt(2n) lambda t)
///
/// For a thermal field the same element vanishes identically.
pub fn coherence_gf_coherent(p: &AnalyticParams, t: f64) -> C64 {
    let amps = normalized_coherent_amplitudes(p);
    let mut sum = C64::new(0.0, 0.0);
    for n in 0..amps.len().saturating_sub(1) {
        let s = ((2.0 * (n as f64 + 1.0)).sqrt() * p.lambda * t).sin();
        let c = ((2.0 * n as f64).sqrt() * p.lambda * t).cos();
        sum += amps[n] * amps[n + 1].conj() * s * c;
    }
    C64::new(0.0, 1.0 / 2.0_f64.sqrt()) * sum
}

/// Diagonal of the reduced field state under thermal driving:
/// sum_n p_n sin^2(sqrt(2n) lt) |n-1><n-1| + sum_n p_n cos^2(sqrt(2n) lt) |n><n|.
pub fn field_diagonal_thermal(p: &AnalyticParams, t: f64) -> Result<Vec<f64>> {
    let probs = thermal_occupation(p.n_bar, p.n_terms)?;
    let mut diag = vec![0.0; p.n_terms + 1];
    for (n, &pn) in probs.iter().enumerate() {
        let x = (2.0 * n as f64).sqrt() * p.lambda * t;
        let s2 = x.sin() * x.sin();
        diag[n] += pn * (1.0 - s2);
        if n > 0 {
            diag[n - 1] += pn * s2;
        }
    }
    Ok(diag)
}

fn coherent_weights(p: &AnalyticParams) -> Vec<f64> {
    normalized_coherent_amplitudes(p)
        .iter()
        .map(|z| z.norm_sqr())
        .collect()
}

fn normalized_coherent_amplitudes(p: &AnalyticParams) -> Vec<C64> {
    let mut amps = coherent_amplitudes(p.alpha, p.n_terms);
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    amps
}
