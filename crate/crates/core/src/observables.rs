//! Derived quantities shared by both simulators: purity, vibrational
//! projections, the excited-state correlation function, and its
//! magnitude spectrum.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::molecular::MolTrajectory;
use crate::morse::VibrationalBasis;

/// Tr rho^2.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
}

/// Magnitude spectrum of a uniformly sampled real series.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Angular frequencies (hartree), monotone from zero.
    pub omega: Vec<f64>,
    /// Magnitudes |sigma(omega)| with the DC term retained.
    pub amplitude: Vec<f64>,
    pub window: Window,
    /// Frequency resolution 2 pi / T_total.
    pub resolution: f64,
}

impl Spectrum {
    /// Local maxima below the Nyquist frequency with amplitude at least
    /// `min_amplitude`, excluding the DC bin.
    pub fn peaks(&self, min_amplitude: f64) -> Vec<(f64, f64)> {
        let half = self.amplitude.len() / 2;
        let mut out = Vec::new();
        for j in 1..half {
            let a = self.amplitude[j];
            if a >= min_amplitude
                && a > self.amplitude[j - 1]
                && a >= self.amplitude[j + 1]
            {
                out.push((self.omega[j], a));
            }
        }
        out
    }

    /// The largest non-DC peak.
    pub fn dominant_peak(&self) -> Option<(f64, f64)> {
        self.peaks(0.0)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Discrete Fourier magnitude of a uniformly sampled series, normalized
/// as sigma_j = dt |sum_i C_i e^{-i omega_j t_i}| so that
/// sum |C_i|^2 dt = sum sigma_j^2 domega / (2 pi) (rectangular window).
pub fn spectrum(times: &[f64], series: &[f64], window: Window) -> Result<Spectrum> {
    if times.len() != series.len() || times.len() < 2 {
        return Err(Error::InvalidConfig(
            "spectrum needs at least two samples with matching time axis".into(),
        ));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::NonUniformSampling);
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::NonUniformSampling);
        }
    }
    let m = series.len();
    let mut buf: Vec<C64> = match window {
        Window::None => series.iter().map(|&x| C64::new(x, 0.0)).collect(),
        Window::Hann => series
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let w = 0.5
                    * (1.0
                        - (2.0 * std::f64::consts::PI * i as f64 / (m as f64 - 1.0)).cos());
                C64::new(x * w, 0.0)
            })
            .collect(),
    };
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let domega = 2.0 * std::f64::consts::PI / (m as f64 * dt);
    Ok(Spectrum {
        omega: (0..m).map(|j| j as f64 * domega).collect(),
        amplitude: buf.iter().map(|z| dt * z.norm()).collect(),
        window,
        resolution: domega,
    })
}

/// Project a coordinate-space excited block onto the lowest `count`
/// vibrational eigenstates: P_vw = <psi_v | rho_ee | psi_w> (dr-weighted).
pub fn vibrational_projection(
    block: &Array2<C64>,
    basis: &VibrationalBasis,
    count: usize,
) -> Result<Array2<C64>> {
    let n = basis.grid().n_points();
    if block.nrows() != n || block.ncols() != n {
        return Err(Error::InvalidConfig(format!(
            "block shape {:?} does not match the basis grid ({n} points)",
            block.dim()
        )));
    }
    if count > basis.count() {
        return Err(Error::InvalidConfig(format!(
            "projection onto {count} states but the basis holds {}",
            basis.count()
        )));
    }
    let dr = basis.grid().dr();
    // amplitudes a_v(j') = sum_j psi_v(j) block(j, j') dr
    let mut half = Array2::<C64>::zeros((count, n));
    for v in 0..count {
        let psi = basis.state(v);
        for j2 in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += psi[j] * block[[j, j2]];
            }
            half[[v, j2]] = acc * dr;
        }
    }
    let mut proj = Array2::<C64>::zeros((count, count));
    for v in 0..count {
        for w in 0..count {
            let psi = basis.state(w);
            let mut acc = C64::new(0.0, 0.0);
            for j2 in 0..n {
                acc += half[[v, j2]] * psi[j2];
            }
            proj[[v, w]] = acc * dr;
        }
    }
    Ok(proj)
}

/// <reference | block | reference> with the dr-weighted inner product.
pub fn correlation_from_block(block: &Array2<C64>, reference: &[f64], dr: f64) -> f64 {
    let n = reference.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for j2 in 0..n {
            acc += reference[j] * block[[j, j2]] * reference[j2];
        }
    }
    (acc * dr * dr).re
}

/// Excited-state correlation function C(t) = <psi_g0| rho_ee(t) |psi_g0>
/// reassembled from the stored per-component ground-state overlaps.
pub fn correlation_function(traj: &MolTrajectory) -> Vec<f64> {
    traj.ground_overlaps
        .iter()
        .map(|ov| {
            let mut c = 0.0;
            for (c_idx, &w) in traj.weights.iter().enumerate() {
                if c_idx >= ov.nrows() {
                    break;
                }
                for k in 0..ov.ncols() {
                    c += w * ov[[c_idx, k]].norm_sqr();
                }
            }
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldState;
    use crate::grid::Grid;
    use crate::hilbert::{kron, HilbertLayout};
    use crate::morse::{vibrational_eigensolve, MorseSurface};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn purity_of_projector_and_mixed_state() {
        let layout = HilbertLayout::single(4).unwrap();
        let pure = DensityMatrix::basis_projector(layout.clone(), 2).unwrap();
        assert_abs_diff_eq!(purity(&pure), 1.0, epsilon = 1e-15);
        let mixed = DensityMatrix::maximally_mixed(layout);
        assert_abs_diff_eq!(purity(&mixed), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn purity_of_truncated_thermal_state() {
        // frozen from the closed form sum of (n_bar^n / (1+n_bar)^(n+1))^2
        // renormalized over ten levels
        let t = FieldState::thermal(0.008, 9).unwrap();
        assert_relative_eq!(
            t.to_density_matrix().purity(),
            0.984_251_968_503_94,
            max_relative = 1e-12
        );
    }

    #[test]
    fn purity_is_multiplicative_under_kron() {
        let a = FieldState::thermal(0.3, 6).unwrap().to_density_matrix();
        let b = FieldState::thermal(0.05, 4).unwrap().to_density_matrix();
        let ab = kron(&a, &b).unwrap();
        assert_abs_diff_eq!(purity(&ab), purity(&a) * purity(&b), epsilon = 1e-10);
    }

    #[test]
    fn projection_of_single_eigenstate() {
        let grid = Grid::new(3.0, 15.0, 128).unwrap();
        let basis = vibrational_eigensolve(&MorseSurface::li2_excited(), &grid, 6394.0, 6)
            .unwrap();
        let n = grid.n_points();
        let mut block = Array2::<C64>::zeros((n, n));
        let psi = basis.state(3);
        for j in 0..n {
            for j2 in 0..n {
                block[[j, j2]] = C64::new(psi[j] * psi[j2], 0.0);
            }
        }
        let proj = vibrational_projection(&block, &basis, 6).unwrap();
        for v in 0..6 {
            for w in 0..6 {
                let expected = if v == 3 && w == 3 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(proj[[v, w]].re, expected, epsilon = 1e-8);
                assert_abs_diff_eq!(proj[[v, w]].im, 0.0, epsilon = 1e-12);
            }
        }
        let zero = Array2::<C64>::zeros((n, n));
        let zero_proj = vibrational_projection(&zero, &basis, 6).unwrap();
        assert!(zero_proj.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn correlation_from_block_is_projector_expectation() {
        let grid = Grid::new(3.0, 15.0, 64).unwrap();
        let basis =
            vibrational_eigensolve(&MorseSurface::li2_ground(), &grid, 6394.0, 2).unwrap();
        let n = grid.n_points();
        let psi0: Vec<f64> = basis.state(0).to_vec();
        let mut block = Array2::<C64>::zeros((n, n));
        for j in 0..n {
            for j2 in 0..n {
                block[[j, j2]] = C64::new(0.37 * psi0[j] * psi0[j2], 0.0);
            }
        }
        let c = correlation_from_block(&block, &psi0, grid.dr());
        assert_abs_diff_eq!(c, 0.37, epsilon = 1e-10);
    }

    #[test]
    fn spectrum_of_constant_is_dc_only() {
        let times: Vec<f64> = (0..128).map(|i| i as f64).collect();
        let series = vec![1.5; 128];
        let s = spectrum(&times, &series, Window::None).unwrap();
        assert!(s.amplitude[0] > 1.0);
        for j in 1..64 {
            assert!(s.amplitude[j] < 1e-10);
        }
        assert!(s.dominant_peak().is_none());
    }

    #[test]
    fn spectrum_of_cosine_peaks_at_its_frequency() {
        let dt = 0.5;
        let m = 1024;
        let omega0 = 0.7;
        let times: Vec<f64> = (0..m).map(|i| i as f64 * dt).collect();
        let series: Vec<f64> = times.iter().map(|&t| (omega0 * t).cos()).collect();
        let s = spectrum(&times, &series, Window::None).unwrap();
        let (peak_omega, _) = s.dominant_peak().unwrap();
        assert!((peak_omega - omega0).abs() <= s.resolution);
    }

    #[test]
    fn spectrum_satisfies_parseval() {
        let dt = 2.0;
        let times: Vec<f64> = (0..500).map(|i| i as f64 * dt).collect();
        let series: Vec<f64> = times
            .iter()
            .map(|&t| 0.3 + (0.11 * t).cos() + 0.5 * (0.31 * t).sin())
            .collect();
        let s = spectrum(&times, &series, Window::None).unwrap();
        let time_side: f64 = series.iter().map(|x| x * x).sum::<f64>() * dt;
        let freq_side: f64 = s.amplitude.iter().map(|a| a * a).sum::<f64>() * s.resolution
            / (2.0 * std::f64::consts::PI);
        assert_relative_eq!(time_side, freq_side, max_relative = 1e-8);
    }

    #[test]
    fn spectrum_rejects_non_uniform_sampling() {
        let times = vec![0.0, 1.0, 2.5, 3.0];
        let series = vec![0.0; 4];
        assert!(matches!(
            spectrum(&times, &series, Window::None),
            Err(Error::NonUniformSampling)
        ));
    }
}
