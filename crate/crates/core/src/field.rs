//! Photon-mode state constructors: thermal, coherent, Fock, and cat
//! states in a truncated Fock basis, plus the Planck-law mean occupation
//! that ties a mode's n-bar to a wavelength and temperature.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{kron, DensityMatrix, HilbertLayout};
use crate::units;

/// Default bound on the probability weight lost to Fock-basis truncation.
pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Thermal,
    Coherent,
    Fock,
    Cat,
    Custom,
}

/// A single photon mode in a truncated Fock basis, tagged with its
/// preparation and mean occupation.
#[derive(Clone, Debug)]
pub struct FieldState {
    n_max: usize,
    matrix: Array2<C64>,
    n_bar: f64,
    kind: FieldKind,
    /// Fock amplitudes when the state is pure (coherent, Fock, cat).
    amplitudes: Option<Vec<C64>>,
}

impl FieldState {
    /// Thermal (chaotic) state with mean occupation `n_bar`, renormalized
    /// after truncation at Fock level `n_max`.
    pub fn thermal(n_bar: f64, n_max: usize) -> Result<Self> {
        let probs = thermal_occupation(n_bar, n_max)?;
        let k = n_max + 1;
        let mut matrix = Array2::zeros((k, k));
        for (n, &p) in probs.iter().enumerate() {
            matrix[[n, n]] = C64::new(p, 0.0);
        }
        Ok(Self {
            n_max,
            matrix,
            n_bar,
            kind: FieldKind::Thermal,
            amplitudes: None,
        })
    }

    /// Coherent state |alpha>, truncated and renormalized. Rejects the
    /// construction when the truncated weight exceeds `DEFAULT_LEAKAGE_TOL`.
    pub fn coherent(alpha: C64, n_max: usize) -> Result<Self> {
        Self::coherent_with_leakage(alpha, n_max, DEFAULT_LEAKAGE_TOL)
    }

    pub fn coherent_with_leakage(alpha: C64, n_max: usize, leakage_tol: f64) -> Result<Self> {
        let amps = coherent_amplitudes(alpha, n_max);
        let norm_sqr: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let leakage = 1.0 - norm_sqr;
        if leakage > leakage_tol {
            return Err(Error::TruncationLeakage {
                leakage,
                threshold: leakage_tol,
            });
        }
        Self::from_pure_amplitudes(amps, alpha.norm_sqr(), FieldKind::Coherent)
    }

    /// Fock state |n>.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidConfig(format!(
                "Fock level {n} above truncation {n_max}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); n_max + 1];
        amps[n] = C64::new(1.0, 0.0);
        Self::from_pure_amplitudes(amps, n as f64, FieldKind::Fock)
    }

    /// Vacuum |0>.
    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    /// Even Schroedinger cat state, the normalized |alpha> + |-alpha>.
    pub fn cat(alpha: C64, n_max: usize) -> Result<Self> {
        Self::cat_with_leakage(alpha, n_max, DEFAULT_LEAKAGE_TOL)
    }

    pub fn cat_with_leakage(alpha: C64, n_max: usize, leakage_tol: f64) -> Result<Self> {
        let plus = coherent_amplitudes(alpha, n_max);
        let minus = coherent_amplitudes(-alpha, n_max);
        let amps: Vec<C64> = plus.iter().zip(&minus).map(|(a, b)| a + b).collect();
        // untruncated norm^2 of |alpha> + |-alpha> is 2(1 + e^{-2|alpha|^2})
        let full_norm_sqr = 2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp());
        let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let leakage = 1.0 - kept / full_norm_sqr;
        if leakage > leakage_tol {
            return Err(Error::TruncationLeakage {
                leakage,
                threshold: leakage_tol,
            });
        }
        let mean = mean_of_amplitudes(&amps);
        Self::from_pure_amplitudes(amps, mean, FieldKind::Cat)
    }

    /// Arbitrary mode state; must satisfy the density-matrix invariants.
    pub fn custom(matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidConfig("field matrix must be square".into()));
        }
        let n_max = matrix.nrows() - 1;
        let rho = DensityMatrix::new(HilbertLayout::single(n_max + 1)?, matrix)?;
        let n_bar = rho
            .data()
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum();
        Ok(Self {
            n_max,
            matrix: rho.data().clone(),
            n_bar,
            kind: FieldKind::Custom,
            amplitudes: None,
        })
    }

    fn from_pure_amplitudes(mut amps: Vec<C64>, n_bar: f64, kind: FieldKind) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidConfig("zero field amplitude vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        let k = amps.len();
        let mut matrix = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                matrix[[i, j]] = amps[i] * amps[j].conj();
            }
        }
        Ok(Self {
            n_max: k - 1,
            matrix,
            n_bar,
            kind,
            amplitudes: Some(amps),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of retained Fock levels (n_max + 1).
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Fock amplitudes when the state was built as a pure vector.
    pub fn pure_amplitudes(&self) -> Option<&[C64]> {
        self.amplitudes.as_deref()
    }

    /// Diagonal occupation probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }

    /// Mean photon number of the truncated, renormalized state.
    pub fn mean_photon_number(&self) -> f64 {
        self.matrix
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_parts(
            HilbertLayout::single(self.levels()).expect("positive dimension"),
            self.matrix.clone(),
        )
        .expect("square matrix")
    }
}

fn mean_of_amplitudes(amps: &[C64]) -> f64 {
    let norm_sqr: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    amps.iter()
        .enumerate()
        .map(|(n, z)| n as f64 * z.norm_sqr())
        .sum::<f64>()
        / norm_sqr
}

/// Raw Boltzmann occupation p_n = n_bar^n / (1 + n_bar)^(n+1) for
/// n = 0..=n_max, without renormalization.
pub fn thermal_occupation_raw(n_bar: f64, n_max: usize) -> Result<Vec<f64>> {
    if n_bar < 0.0 || !n_bar.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean occupation must be finite and non-negative, got {n_bar}"
        )));
    }
    if n_bar == 0.0 {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        return Ok(p);
    }
    Ok((0..=n_max)
        .map(|n| n_bar.powi(n as i32) / (1.0 + n_bar).powi(n as i32 + 1))
        .collect())
}

/// Thermal occupation renormalized to sum to one over the truncated basis.
pub fn thermal_occupation(n_bar: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut p = thermal_occupation_raw(n_bar, n_max)?;
    let sum: f64 = p.iter().sum();
    for x in &mut p {
        *x /= sum;
    }
    Ok(p)
}

/// Closed-form truncated tail sum_{n > n_max} p_n = (n_bar/(1+n_bar))^(n_max+1).
pub fn thermal_tail(n_bar: f64, n_max: usize) -> f64 {
    if n_bar <= 0.0 {
        0.0
    } else {
        (n_bar / (1.0 + n_bar)).powi(n_max as i32 + 1)
    }
}

/// Truncated coherent-state amplitudes c_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!),
/// without renormalization.
pub fn coherent_amplitudes(alpha: C64, n_max: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Planck mean occupation of a mode, with an underflow flag for modes so
/// far into the Wien tail that the exponential overflows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanOccupation {
    pub n_bar: f64,
    pub underflow: bool,
}

/// n_bar = 1 / (e^{E/kT} - 1) with E = 45.56335 / lambda[nm] hartree.
pub fn planck_mean_occupation(wavelength_nm: f64, temperature_k: f64) -> Result<MeanOccupation> {
    if wavelength_nm <= 0.0 || !wavelength_nm.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    if temperature_k <= 0.0 || !temperature_k.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature_k}"
        )));
    }
    let energy = units::nm_to_hartree(wavelength_nm);
    let x = energy / (units::KB_AU_PER_K * temperature_k);
    if x > 700.0 {
        return Ok(MeanOccupation {
            n_bar: 0.0,
            underflow: true,
        });
    }
    Ok(MeanOccupation {
        n_bar: 1.0 / x.exp_m1(),
        underflow: false,
    })
}

/// Product state of two modes as a density matrix over two photon
/// subsystems.
pub fn two_mode_product(a: &FieldState, b: &FieldState) -> Result<DensityMatrix> {
    kron(&a.to_density_matrix(), &b.to_density_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn thermal_vacuum_limit() {
        let p = thermal_occupation(0.0, 5).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn thermal_closed_form_values() {
        // independent closed-form evaluation of 0.008^n / 1.008^(n+1)
        let p = thermal_occupation_raw(0.008, 9).unwrap();
        assert_relative_eq!(p[0], 0.992_063_492_063_492_1, max_relative = 1e-15);
        assert_relative_eq!(p[1], 7.873_519_778_281_683e-3, max_relative = 1e-15);
        for n in 0..8 {
            assert_relative_eq!(p[n + 1] / p[n], 0.008 / 1.008, max_relative = 1e-13);
        }
        let p72 = thermal_occupation_raw(0.0072, 6).unwrap();
        assert_relative_eq!(p72[0], 1.0 / 1.0072, max_relative = 1e-15);
    }

    #[test]
    fn thermal_is_strictly_decreasing_and_normalized() {
        let state = FieldState::thermal(0.3, 12).unwrap();
        let diag = state.diagonal();
        assert_abs_diff_eq!(diag.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        for w in diag.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn thermal_tail_matches_direct_sum() {
        let n_bar: f64 = 0.7;
        let n_max = 8;
        let direct: f64 = (n_max + 1..200)
            .map(|n| n_bar.powi(n as i32) / (1.0 + n_bar).powi(n as i32 + 1))
            .sum();
        assert_relative_eq!(thermal_tail(n_bar, n_max), direct, max_relative = 1e-12);
    }

    #[test]
    fn thermal_rejects_negative_n_bar() {
        assert!(thermal_occupation(-1.0, 4).is_err());
    }

    #[test]
    fn coherent_vacuum_limit() {
        let amps = coherent_amplitudes(C64::new(0.0, 0.0), 4);
        assert_eq!(amps[0], C64::new(1.0, 0.0));
        assert!(amps[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn coherent_preset_amplitudes() {
        let alpha = C64::new(0.008_f64.sqrt(), 0.0);
        let amps = coherent_amplitudes(alpha, 9);
        assert_relative_eq!(amps[0].re, 0.996_007_989_343_991_5, max_relative = 1e-15);
        assert_relative_eq!(amps[1].re, alpha.re * amps[0].re, max_relative = 1e-14);
    }

    #[test]
    fn coherent_mean_photon_number() {
        let alpha = C64::new(0.008_f64.sqrt(), 0.0);
        let state = FieldState::coherent(alpha, 9).unwrap();
        assert_abs_diff_eq!(state.mean_photon_number(), 0.008, epsilon = 1e-9);
        assert_abs_diff_eq!(state.purity(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn coherent_rejects_heavy_truncation() {
        // |alpha|^2 = 9 retains almost nothing below n = 3
        assert!(matches!(
            FieldState::coherent(C64::new(3.0, 0.0), 2),
            Err(Error::TruncationLeakage { .. })
        ));
    }

    #[test]
    fn planck_paper_conditions() {
        let a = planck_mean_occupation(495.9, 6000.0).unwrap();
        assert!(!a.underflow);
        assert_abs_diff_eq!(a.n_bar, 0.0080, epsilon = 5e-4);
        let b = planck_mean_occupation(486.1, 6000.0).unwrap();
        assert_abs_diff_eq!(b.n_bar, 0.0072, epsilon = 3e-4);
    }

    #[test]
    fn planck_frozen_mode_limit() {
        let cold = planck_mean_occupation(500.0, 1.0).unwrap();
        assert!(cold.underflow);
        assert_eq!(cold.n_bar, 0.0);
        assert!(planck_mean_occupation(-1.0, 300.0).is_err());
        assert!(planck_mean_occupation(500.0, 0.0).is_err());
    }

    #[test]
    fn cat_vacuum_limit() {
        let cat = FieldState::cat(C64::new(0.0, 0.0), 4).unwrap();
        let diag = cat.diagonal();
        assert_abs_diff_eq!(diag[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cat_has_even_photon_support() {
        let cat = FieldState::cat(C64::new(0.008_f64.sqrt(), 0.0), 9).unwrap();
        let diag = cat.diagonal();
        for n in (1..diag.len()).step_by(2) {
            assert_eq!(diag[n], 0.0);
        }
        // p0/p2 from the direct expansion: |c0|^2 / |c2|^2 = (2!/|alpha|^4)
        let a2 = 0.008_f64;
        assert_relative_eq!(diag[0] / diag[2], 2.0 / (a2 * a2), max_relative = 1e-10);
    }

    #[test]
    fn two_mode_product_of_thermals() {
        let t = FieldState::thermal(0.008, 5).unwrap();
        let joint = two_mode_product(&t, &t).unwrap();
        assert_eq!(joint.layout().dims(), &[6, 6]);
        let p = t.diagonal();
        for n in 0..6 {
            for m in 0..6 {
                let idx = n * 6 + m;
                assert_relative_eq!(
                    joint.data()[[idx, idx]].re,
                    p[n] * p[m],
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn two_mode_product_of_coherents_is_pure() {
        let c = FieldState::coherent(C64::new(0.1, 0.05), 9).unwrap();
        let joint = two_mode_product(&c, &c).unwrap();
        assert_abs_diff_eq!(joint.purity(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn vacuum_tensor_vacuum_is_ground_projector() {
        let v = FieldState::vacuum(3).unwrap();
        let joint = two_mode_product(&v, &v).unwrap();
        assert_abs_diff_eq!(joint.data()[[0, 0]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(joint.purity(), 1.0, epsilon = 1e-12);
    }
}
