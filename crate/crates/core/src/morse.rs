//! Morse potential surfaces and a Fourier-grid vibrational eigensolver.
//!
//! The eigensolver diagonalizes T + V on the same periodic grid used for
//! dynamics, so the vibrational basis and the propagated wavefunctions
//! share one discretization. Eigenvalues converge exponentially in grid
//! density and are validated against the analytic Morse spectrum.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Morse surface V(r) = D (1 - e^{-b (r - r0)})^2 + T.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorseSurface {
    /// Dissociation energy D (hartree).
    pub depth: f64,
    /// Range parameter b (1/bohr).
    pub steepness: f64,
    /// Equilibrium distance r0 (bohr).
    pub r_eq: f64,
    /// Vertical offset T (hartree).
    pub t_shift: f64,
}

impl MorseSurface {
    /// Ground (X) surface of the Li2-derived two-state model.
    pub fn li2_ground() -> Self {
        Self {
            depth: 0.0378492,
            steepness: 0.4730844,
            r_eq: 5.0493478,
            t_shift: 0.0,
        }
    }

    /// Energy-shifted excited (A) surface of the same model.
    pub fn li2_excited() -> Self {
        Self {
            depth: 0.0426108,
            steepness: 0.3175063,
            r_eq: 5.8713786,
            t_shift: 0.0911267,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth <= 0.0 || self.steepness <= 0.0 {
            return Err(Error::InvalidConfig(
                "Morse depth and steepness must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let x = 1.0 - (-self.steepness * (r - self.r_eq)).exp();
        self.depth * x * x + self.t_shift
    }

    /// Pointwise evaluation on a grid.
    pub fn evaluate_on(&self, grid: &Grid) -> Vec<f64> {
        grid.points().iter().map(|&r| self.evaluate(r)).collect()
    }

    /// Harmonic frequency omega_0 = b sqrt(2 D / m).
    pub fn harmonic_frequency(&self, mass: f64) -> f64 {
        self.steepness * (2.0 * self.depth / mass).sqrt()
    }

    /// Analytic bound-state energy
    /// E_v = omega_0 (v + 1/2) - [omega_0 (v + 1/2)]^2 / (4 D) + T.
    pub fn analytic_level(&self, mass: f64, v: usize) -> f64 {
        let w0 = self.harmonic_frequency(mass);
        let x = w0 * (v as f64 + 0.5);
        x - x * x / (4.0 * self.depth) + self.t_shift
    }

    /// Number of bound states, floor(sqrt(2 m D)/b - 1/2) + 1 counting v = 0.
    pub fn bound_state_count(&self, mass: f64) -> usize {
        let v_max = (2.0 * mass * self.depth).sqrt() / self.steepness - 0.5;
        if v_max < 0.0 {
            0
        } else {
            v_max.floor() as usize + 1
        }
    }
}

/// Vibrational eigenpairs of one surface sampled on a grid. Rows of
/// `states` are orthonormal under the dr-weighted inner product.
#[derive(Clone, Debug)]
pub struct VibrationalBasis {
    energies: Vec<f64>,
    states: Array2<f64>,
    grid: Grid,
}

impl VibrationalBasis {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn count(&self) -> usize {
        self.energies.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn state(&self, v: usize) -> ArrayView1<'_, f64> {
        self.states.row(v)
    }

    /// dr-weighted overlap of two stored states.
    pub fn overlap(&self, v: usize, w: usize) -> f64 {
        self.state(v)
            .iter()
            .zip(self.state(w).iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.dr()
    }
}

/// Kinetic-energy matrix on the periodic grid, built from the momentum
/// representation: T = F^-1 diag(k^2 / 2m) F, a real symmetric circulant
/// returned as its first row.
pub(crate) fn kinetic_circulant_row(grid: &Grid, mass: f64) -> Vec<f64> {
    let n = grid.n_points();
    let mut planner = FftPlanner::new();
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<C64> = grid
        .momenta()
        .iter()
        .map(|&k| C64::new(k * k / (2.0 * mass), 0.0))
        .collect();
    inverse.process(&mut buf);
    // first circulant row; imaginary parts vanish by k <-> -k symmetry
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Solve for the lowest `count` vibrational eigenpairs of a surface.
pub fn vibrational_eigensolve(
    surface: &MorseSurface,
    grid: &Grid,
    mass: f64,
    count: usize,
) -> Result<VibrationalBasis> {
    surface.validate()?;
    if mass <= 0.0 {
        return Err(Error::InvalidConfig("mass must be positive".into()));
    }
    let available = surface.bound_state_count(mass);
    if count == 0 || count > available {
        return Err(Error::BoundStateCount {
            requested: count,
            available,
        });
    }

    let n = grid.n_points();
    let v = surface.evaluate_on(grid);
    let t_row = kinetic_circulant_row(grid, mass);
    let mut h = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            h[(j, k)] = t_row[(n + j - k) % n];
        }
        h[(j, j)] += v[j];
    }
    // symmetrize away circulant round-off
    for j in 0..n {
        for k in (j + 1)..n {
            let avg = 0.5 * (h[(j, k)] + h[(k, j)]);
            h[(j, k)] = avg;
            h[(k, j)] = avg;
        }
    }

    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = Vec::with_capacity(count);
    let mut states = Array2::<f64>::zeros((count, n));
    let inv_sqrt_dr = 1.0 / grid.dr().sqrt();
    for (row, &col) in order.iter().take(count).enumerate() {
        energies.push(eig.eigenvalues[col]);
        // fix the sign so the largest-magnitude lobe is positive
        let mut peak = 0.0_f64;
        for j in 0..n {
            let x = eig.eigenvectors[(j, col)];
            if x.abs() > peak.abs() {
                peak = x;
            }
        }
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            states[[row, j]] = sign * eig.eigenvectors[(j, col)] * inv_sqrt_dr;
        }
    }

    for (v_idx, row) in states.rows().into_iter().enumerate() {
        let edge = row[0].abs().max(row[n - 1].abs()) * grid.dr().sqrt();
        if edge > 1e-8 {
            return Err(Error::GridTooSmall {
                state: v_idx,
                amplitude: edge,
            });
        }
    }

    Ok(VibrationalBasis {
        energies,
        states,
        grid: *grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const MASS: f64 = 6394.0;

    fn default_grid() -> Grid {
        Grid::new(3.0, 15.0, 256).unwrap()
    }

    #[test]
    fn potential_minimum_and_asymptote() {
        let ground = MorseSurface::li2_ground();
        assert_eq!(ground.evaluate(ground.r_eq), 0.0);
        // dissociation limit approaches D
        assert_relative_eq!(ground.evaluate(1e6), 0.0378492, max_relative = 1e-12);
        let excited = MorseSurface::li2_excited();
        assert_eq!(excited.evaluate(excited.r_eq), 0.0911267);
    }

    #[test]
    fn harmonic_frequency_of_excited_surface() {
        let w0 = MorseSurface::li2_excited().harmonic_frequency(MASS);
        assert_relative_eq!(w0, 1.159_153e-3, max_relative = 1e-5);
    }

    #[test]
    fn eigenvalues_match_analytic_morse_spectrum() {
        let grid = default_grid();
        for surface in [MorseSurface::li2_ground(), MorseSurface::li2_excited()] {
            let basis = vibrational_eigensolve(&surface, &grid, MASS, 16).unwrap();
            for v in 0..16 {
                let analytic = surface.analytic_level(MASS, v);
                assert_abs_diff_eq!(basis.energies()[v], analytic, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn low_level_spacing_matches_reported_scale() {
        let grid = default_grid();
        let basis =
            vibrational_eigensolve(&MorseSurface::li2_excited(), &grid, MASS, 2).unwrap();
        let spacing = basis.energies()[1] - basis.energies()[0];
        assert!((spacing - 0.0011).abs() / 0.0011 < 0.05);
    }

    #[test]
    fn eigenfunctions_are_orthonormal_with_correct_node_counts() {
        let grid = default_grid();
        let basis =
            vibrational_eigensolve(&MorseSurface::li2_excited(), &grid, MASS, 8).unwrap();
        for v in 0..8 {
            for w in 0..8 {
                let expected = if v == w { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(basis.overlap(v, w), expected, epsilon = 1e-8);
            }
        }
        for v in 0..8 {
            let row = basis.state(v);
            let mut nodes = 0;
            let mut last: f64 = 0.0;
            for &x in row.iter() {
                // ignore the exponentially small tails
                if x.abs() < 1e-4 {
                    continue;
                }
                if last != 0.0 && x.signum() != last.signum() {
                    nodes += 1;
                }
                last = x;
            }
            assert_eq!(nodes, v, "state {v} has {nodes} sign changes");
        }
    }

    #[test]
    fn rejects_unbound_requests() {
        let grid = default_grid();
        let surface = MorseSurface::li2_excited();
        let available = surface.bound_state_count(MASS);
        assert!(matches!(
            vibrational_eigensolve(&surface, &grid, MASS, available + 1),
            Err(Error::BoundStateCount { .. })
        ));
    }

    #[test]
    fn narrow_grid_fails_edge_check() {
        // the outer turning point of v = 15 lies well beyond 7 bohr
        let grid = Grid::new(4.5, 7.0, 64).unwrap();
        let surface = MorseSurface::li2_excited();
        assert!(matches!(
            vibrational_eigensolve(&surface, &grid, MASS, 16),
            Err(Error::GridTooSmall { .. })
        ));
    }
}
