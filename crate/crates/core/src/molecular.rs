//! Two-surface Born-Oppenheimer molecule on a coordinate grid coupled to
//! one quantized mode.
//!
//! Propagation splits the kinetic term from the rest of the Hamiltonian
//! (symmetrized, so observables converge at second order in dt). The
//! remainder is diagonal in the coordinate, leaving one small
//! electronic (x) photon block per grid point that is eigendecomposed
//! once up front.
//!
//! The production path decomposes the initial state into pure components
//! (Fock components of a diagonal field, or the single vector of a pure
//! field) and evolves state vectors; a dense density-matrix path with
//! identical stepping is kept for cross-checks at test scale.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::Grid;
use crate::hilbert::DEFAULT_DIM_CAP;
use crate::morse::{vibrational_eigensolve, MorseSurface, VibrationalBasis};
use crate::observables;

/// Reduced mass of the Li2-derived model (electron masses).
pub const LI2_REDUCED_MASS: f64 = 6394.0;

/// How the mode energy is fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldTuning {
    /// Explicit mode energy (hartree).
    Energy(f64),
    /// Midway between two vibrational levels of the excited surface,
    /// measured from the ground-surface zero-point level.
    MidpointExcited { lower: usize, upper: usize },
}

#[derive(Clone, Debug)]
pub struct MolConfig {
    pub grid: Grid,
    pub ground: MorseSurface,
    pub excited: MorseSurface,
    /// Reduced mass (electron masses).
    pub reduced_mass: f64,
    /// Transition coupling (hartree), coordinate independent.
    pub lambda: f64,
    pub field: FieldState,
    pub tuning: FieldTuning,
    /// Time step and total propagation time (atomic units).
    pub dt: f64,
    pub t_final: f64,
    /// Observables are sampled every `sample_stride` steps.
    pub sample_stride: usize,
    /// Times at which the excited coordinate block and its vibrational
    /// projection are stored (snapped to the nearest sample).
    pub snapshot_times: Vec<f64>,
    /// Number of excited vibrational states kept in projections.
    pub projection_count: usize,
    pub dim_cap: usize,
}

impl MolConfig {
    /// Thermal scenario: lambda = 1e-4, n_bar = 0.0072 over seven Fock
    /// states, mode tuned midway between excited v = 3 and v = 4.
    pub fn thermal_preset() -> Self {
        Self::preset_with_field(FieldState::thermal(0.0072, 6).expect("preset field"))
    }

    /// Same scenario with a coherent field of equal mean photon number.
    pub fn coherent_preset() -> Self {
        let alpha = C64::new(0.0072_f64.sqrt(), 0.0);
        Self::preset_with_field(FieldState::coherent(alpha, 6).expect("preset field"))
    }

    fn preset_with_field(field: FieldState) -> Self {
        Self {
            grid: Grid::new(3.0, 15.0, 256).expect("preset grid"),
            ground: MorseSurface::li2_ground(),
            excited: MorseSurface::li2_excited(),
            reduced_mass: LI2_REDUCED_MASS,
            lambda: 1e-4,
            field,
            tuning: FieldTuning::MidpointExcited { lower: 3, upper: 4 },
            dt: 1.0,
            t_final: 65536.0,
            sample_stride: 16,
            snapshot_times: vec![16384.0, 32768.0, 49152.0, 65536.0],
            projection_count: 15,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ground.validate()?;
        self.excited.validate()?;
        if self.reduced_mass <= 0.0 {
            return Err(Error::InvalidConfig("reduced mass must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("coupling must be non-negative".into()));
        }
        if self.dt <= 0.0 || self.t_final < 0.0 {
            return Err(Error::InvalidConfig(
                "dt must be positive and t_final non-negative".into(),
            ));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride must be positive".into()));
        }
        if self.projection_count == 0 {
            return Err(Error::InvalidConfig(
                "projection_count must be positive".into(),
            ));
        }
        if let FieldTuning::MidpointExcited { lower, upper } = self.tuning {
            if lower >= upper {
                return Err(Error::InvalidConfig(format!(
                    "midpoint tuning requires lower < upper, got ({lower}, {upper})"
                )));
            }
        }
        Ok(())
    }

    /// Composite dimension 2 * levels * grid points.
    pub fn total_dim(&self) -> usize {
        2 * self.field.levels() * self.grid.n_points()
    }
}

/// Solved ingredients of a molecular run: initial vibrational state,
/// excited-state basis, and the resolved mode energy.
#[derive(Clone, Debug)]
pub struct MolSystem {
    pub cfg: MolConfig,
    /// Ground-surface v = 0 wavefunction (dr-normalized).
    pub psi_ground0: Vec<f64>,
    pub ground_energy0: f64,
    pub excited_basis: VibrationalBasis,
    pub omega_field: f64,
}

impl MolSystem {
    pub fn new(cfg: &MolConfig) -> Result<Self> {
        cfg.validate()?;
        let ground_basis = vibrational_eigensolve(&cfg.ground, &cfg.grid, cfg.reduced_mass, 1)?;
        let needed = match cfg.tuning {
            FieldTuning::MidpointExcited { upper, .. } => cfg.projection_count.max(upper + 1),
            FieldTuning::Energy(_) => cfg.projection_count,
        };
        let excited_basis =
            vibrational_eigensolve(&cfg.excited, &cfg.grid, cfg.reduced_mass, needed)?;
        let omega_field = match cfg.tuning {
            FieldTuning::Energy(e) => {
                if e <= 0.0 {
                    return Err(Error::InvalidConfig("mode energy must be positive".into()));
                }
                e
            }
            FieldTuning::MidpointExcited { lower, upper } => {
                0.5 * (excited_basis.energies()[lower] + excited_basis.energies()[upper])
                    - ground_basis.energies()[0]
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            psi_ground0: ground_basis.state(0).to_vec(),
            ground_energy0: ground_basis.energies()[0],
            excited_basis,
            omega_field,
        })
    }

    pub fn stepper(&self) -> Result<SplitStepper> {
        SplitStepper::new(
            &self.cfg.grid,
            &self.cfg.ground.evaluate_on(&self.cfg.grid),
            &self.cfg.excited.evaluate_on(&self.cfg.grid),
            self.omega_field,
            self.cfg.lambda,
            self.cfg.field.levels(),
            self.cfg.reduced_mass,
            self.cfg.dt,
        )
    }
}

/// Build the split-operator stepper for a configuration.
pub fn build_mol_stepper(cfg: &MolConfig) -> Result<SplitStepper> {
    MolSystem::new(cfg)?.stepper()
}

/// Symmetrized split-operator stepper over states indexed
/// (surface, photon, grid) with the grid index contiguous.
#[derive(Clone)]
pub struct SplitStepper {
    n: usize,
    k_levels: usize,
    dr: f64,
    dt: f64,
    /// e^{-i k^2 dt / 2m} with the inverse-FFT 1/n folded in.
    kin_phase: Vec<C64>,
    /// k^2 / 2m on the momentum grid.
    kin_energy: Vec<f64>,
    /// Per grid point: eigenvectors (row-major 2K x 2K) and eigenvalues
    /// of the potential + field + coupling block.
    block_u: Vec<Vec<f64>>,
    block_e: Vec<Vec<f64>>,
    phase_full: Vec<Vec<C64>>,
    phase_half: Vec<Vec<C64>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    gather: Vec<C64>,
    coeff: Vec<C64>,
    row_buf: Vec<C64>,
}

impl std::fmt::Debug for SplitStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepper")
            .field("n", &self.n)
            .field("k_levels", &self.k_levels)
            .field("dt", &self.dt)
            .finish()
    }
}

#[allow(clippy::too_many_arguments)]
impl SplitStepper {
    pub fn new(
        grid: &Grid,
        v_ground: &[f64],
        v_excited: &[f64],
        omega: f64,
        lambda: f64,
        k_levels: usize,
        mass: f64,
        dt: f64,
    ) -> Result<Self> {
        let n = grid.n_points();
        if v_ground.len() != n || v_excited.len() != n {
            return Err(Error::InvalidConfig(
                "potential arrays must match the grid".into(),
            ));
        }
        if k_levels == 0 {
            return Err(Error::InvalidConfig("need at least one Fock level".into()));
        }
        let dim = 2 * k_levels;
        let mut block_u = Vec::with_capacity(n);
        let mut block_e = Vec::with_capacity(n);
        let mut phase_full = Vec::with_capacity(n);
        let mut phase_half = Vec::with_capacity(n);
        for j in 0..n {
            let mut b = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..k_levels {
                b[(k, k)] = v_ground[j] + omega * (k as f64 + 0.5);
                b[(k_levels + k, k_levels + k)] = v_excited[j] + omega * (k as f64 + 0.5);
            }
            // Condon coupling: (e, k-1) <-> (g, k) with lambda sqrt(k)
            for k in 1..k_levels {
                let amp = lambda * (k as f64).sqrt();
                b[(k_levels + k - 1, k)] = amp;
                b[(k, k_levels + k - 1)] = amp;
            }
            let eig = b.symmetric_eigen();
            let mut u = vec![0.0; dim * dim];
            let mut e = vec![0.0; dim];
            for m in 0..dim {
                e[m] = eig.eigenvalues[m];
                for r in 0..dim {
                    u[r * dim + m] = eig.eigenvectors[(r, m)];
                }
            }
            phase_full.push(e.iter().map(|&x| C64::from_polar(1.0, -x * dt)).collect());
            phase_half.push(
                e.iter()
                    .map(|&x| C64::from_polar(1.0, -x * dt * 0.5))
                    .collect(),
            );
            block_u.push(u);
            block_e.push(e);
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n);
        let fft_inv = planner.plan_fft_inverse(n);
        let scratch_len = fft_fwd
            .get_inplace_scratch_len()
            .max(fft_inv.get_inplace_scratch_len());

        let kin_energy: Vec<f64> = grid.momenta().iter().map(|&k| k * k / (2.0 * mass)).collect();
        let kin_phase: Vec<C64> = kin_energy
            .iter()
            .map(|&e| C64::from_polar(1.0 / n as f64, -e * dt))
            .collect();

        Ok(Self {
            n,
            k_levels,
            dr: grid.dr(),
            dt,
            kin_phase,
            kin_energy,
            block_u,
            block_e,
            phase_full,
            phase_half,
            fft_fwd,
            fft_inv,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            gather: vec![C64::new(0.0, 0.0); dim],
            coeff: vec![C64::new(0.0, 0.0); dim],
            row_buf: vec![C64::new(0.0, 0.0); n],
        })
    }

    pub fn state_len(&self) -> usize {
        2 * self.k_levels * self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Raw 2K x 2K coordinate block at grid point `j` (row-major).
    pub fn block_matrix(&self, j: usize) -> Array2<f64> {
        let dim = 2 * self.k_levels;
        let mut out = Array2::zeros((dim, dim));
        for r in 0..dim {
            for m in 0..dim {
                // reassemble U diag(E) U^T
                let mut acc = 0.0;
                for q in 0..dim {
                    acc += self.block_u[j][r * dim + q]
                        * self.block_e[j][q]
                        * self.block_u[j][m * dim + q];
                }
                out[[r, m]] = acc;
            }
        }
        out
    }

    fn apply_block(&mut self, psi: &mut [C64], half: bool) {
        let dim = 2 * self.k_levels;
        let n = self.n;
        for j in 0..n {
            for m in 0..dim {
                self.gather[m] = psi[m * n + j];
            }
            let u = &self.block_u[j];
            let phases = if half {
                &self.phase_half[j]
            } else {
                &self.phase_full[j]
            };
            for m in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..dim {
                    acc += self.gather[r] * u[r * dim + m];
                }
                self.coeff[m] = acc * phases[m];
            }
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                let row = &u[r * dim..(r + 1) * dim];
                for m in 0..dim {
                    acc += self.coeff[m] * row[m];
                }
                psi[r * n + j] = acc;
            }
        }
    }

    fn apply_kinetic(&mut self, psi: &mut [C64]) {
        let n = self.n;
        for row in 0..2 * self.k_levels {
            let slice = &mut psi[row * n..(row + 1) * n];
            self.fft_fwd.process_with_scratch(slice, &mut self.scratch);
            for (x, p) in slice.iter_mut().zip(&self.kin_phase) {
                *x *= p;
            }
            self.fft_inv.process_with_scratch(slice, &mut self.scratch);
        }
    }

    /// Advance by `steps` symmetrized steps; interior half-kicks are
    /// merged into full kicks.
    pub fn advance(&mut self, psi: &mut [C64], steps: usize) {
        assert_eq!(psi.len(), self.state_len(), "state length mismatch");
        if steps == 0 {
            return;
        }
        self.apply_block(psi, true);
        for s in 1..=steps {
            self.apply_kinetic(psi);
            self.apply_block(psi, s == steps);
        }
    }

    /// dr-weighted norm squared.
    pub fn norm_sqr(&self, psi: &[C64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dr
    }

    /// <T> + <B>, dr-weighted.
    pub fn energy_expectation(&mut self, psi: &[C64]) -> f64 {
        let n = self.n;
        let dim = 2 * self.k_levels;
        let mut kinetic = 0.0;
        for row in 0..dim {
            self.row_buf.copy_from_slice(&psi[row * n..(row + 1) * n]);
            self.fft_fwd
                .process_with_scratch(&mut self.row_buf, &mut self.scratch);
            kinetic += self
                .row_buf
                .iter()
                .zip(&self.kin_energy)
                .map(|(z, &e)| e * z.norm_sqr())
                .sum::<f64>()
                / n as f64;
        }
        let mut potential = 0.0;
        for j in 0..n {
            for m in 0..dim {
                self.gather[m] = psi[m * n + j];
            }
            let u = &self.block_u[j];
            for m in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..dim {
                    acc += self.gather[r] * u[r * dim + m];
                }
                potential += self.block_e[j][m] * acc.norm_sqr();
            }
        }
        (kinetic + potential) * self.dr
    }
}

/// Snapshot of the excited-state block in coordinate space together with
/// its vibrational projection.
#[derive(Clone, Debug)]
pub struct MolSnapshot {
    pub time: f64,
    /// rho_ee(r, r'); trace times dr equals the excited population.
    pub excited_block: Array2<C64>,
    /// Projection onto the excited vibrational eigenstates.
    pub projection: Array2<C64>,
}

/// Resolved run metadata.
#[derive(Clone, Debug)]
pub struct MolRunInfo {
    pub omega_field: f64,
    pub ground_energy0: f64,
    pub excited_energies: Vec<f64>,
    /// Spacing of the two levels the mode is tuned between.
    pub level_spacing: f64,
}

#[derive(Clone, Debug)]
pub struct MolTrajectory {
    pub times: Vec<f64>,
    pub pop_g: Vec<f64>,
    pub pop_e: Vec<f64>,
    /// <psi_g0 | rho_ee(t) | psi_g0>
    pub correlation: Vec<f64>,
    pub energy: Vec<f64>,
    pub purity_total: Vec<f64>,
    /// Largest per-component norm deviation |<psi|psi> - 1|.
    pub norm_error_max: Vec<f64>,
    /// Upper bound on the largest element of the electronic g-e
    /// coherence block (exact for the dense path).
    pub ge_coherence_bound: Vec<f64>,
    /// Mixture weights (single entry 1.0 for pure or dense runs).
    pub weights: Vec<f64>,
    /// Per sample: overlaps <psi_g0 | psi_c[e, k, :]> dr, components x levels.
    pub ground_overlaps: Vec<Array2<C64>>,
    pub snapshots: Vec<MolSnapshot>,
    pub info: MolRunInfo,
}

impl MolTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

enum InitialField {
    /// Weighted Fock components of a diagonal field state.
    Mixture(Vec<(f64, usize)>),
    /// Amplitude vector of a pure field state.
    Pure(Vec<C64>),
    /// Neither diagonal nor known-pure.
    General,
}

fn classify_field(field: &FieldState) -> InitialField {
    if let Some(amps) = field.pure_amplitudes() {
        return InitialField::Pure(amps.to_vec());
    }
    let m = field.matrix();
    let mut offdiag: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                offdiag = offdiag.max(m[[i, j]].norm());
            }
        }
    }
    if offdiag < 1e-14 {
        let comps = m
            .diag()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re > 0.0)
            .map(|(k, z)| (z.re, k))
            .collect();
        InitialField::Mixture(comps)
    } else {
        InitialField::General
    }
}

struct Component {
    weight: f64,
    psi: Vec<C64>,
    stepper: SplitStepper,
}

/// Evolve the configured scenario as a mixture of pure components.
///
/// Falls back to the dense path when the initial field is neither
/// diagonal nor pure (and the composite dimension permits it).
pub fn propagate_mixture(cfg: &MolConfig) -> Result<MolTrajectory> {
    let system = MolSystem::new(cfg)?;
    let field_vectors: Vec<(f64, Vec<C64>)> = match classify_field(&cfg.field) {
        InitialField::Pure(amps) => vec![(1.0, amps)],
        InitialField::Mixture(comps) => {
            let k = cfg.field.levels();
            comps
                .into_iter()
                .map(|(w, level)| {
                    let mut v = vec![C64::new(0.0, 0.0); k];
                    v[level] = C64::new(1.0, 0.0);
                    (w, v)
                })
                .collect()
        }
        InitialField::General => {
            if cfg.total_dim() <= cfg.dim_cap {
                return propagate_dense(cfg);
            }
            return Err(Error::InvalidConfig(
                "initial field is neither diagonal nor pure and the dense \
                 fallback exceeds the dimension cap"
                    .into(),
            ));
        }
    };

    let n = cfg.grid.n_points();
    let stepper = system.stepper()?;
    let mut components: Vec<Component> = field_vectors
        .into_iter()
        .map(|(weight, amps)| {
            let mut psi = vec![C64::new(0.0, 0.0); stepper.state_len()];
            for (k, amp) in amps.iter().enumerate() {
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    psi[k * n + j] = amp * system.psi_ground0[j];
                }
            }
            Component {
                weight,
                psi,
                stepper: stepper.clone(),
            }
        })
        .collect();

    let mut recorder = Recorder::new(cfg, &system)?;
    recorder.sample(&mut components, 0)?;
    for window in 1..=recorder.n_windows {
        let stride = cfg.sample_stride;
        components
            .par_iter_mut()
            .for_each(|c| c.stepper.advance(&mut c.psi, stride));
        recorder.sample(&mut components, window)?;
    }
    Ok(recorder.finish(&components))
}

/// Observable accumulation shared across the sampling loop.
struct Recorder<'a> {
    cfg: &'a MolConfig,
    system: &'a MolSystem,
    n_windows: usize,
    snapshot_windows: Vec<usize>,
    traj: MolTrajectory,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a MolConfig, system: &'a MolSystem) -> Result<Self> {
        let n_steps = (cfg.t_final / cfg.dt).round() as usize;
        let n_windows = n_steps / cfg.sample_stride;
        let window_dt = cfg.sample_stride as f64 * cfg.dt;
        let mut snapshot_windows: Vec<usize> = cfg
            .snapshot_times
            .iter()
            .map(|&t| ((t / window_dt).round() as usize).min(n_windows))
            .collect();
        snapshot_windows.sort_unstable();
        snapshot_windows.dedup();
        let info = MolRunInfo {
            omega_field: system.omega_field,
            ground_energy0: system.ground_energy0,
            excited_energies: system.excited_basis.energies().to_vec(),
            level_spacing: match cfg.tuning {
                FieldTuning::MidpointExcited { lower, upper } => {
                    system.excited_basis.energies()[upper]
                        - system.excited_basis.energies()[lower]
                }
                FieldTuning::Energy(_) => {
                    let e = system.excited_basis.energies();
                    if e.len() > 4 {
                        e[4] - e[3]
                    } else {
                        0.0
                    }
                }
            },
        };
        Ok(Self {
            cfg,
            system,
            n_windows,
            snapshot_windows,
            traj: MolTrajectory {
                times: Vec::new(),
                pop_g: Vec::new(),
                pop_e: Vec::new(),
                correlation: Vec::new(),
                energy: Vec::new(),
                purity_total: Vec::new(),
                norm_error_max: Vec::new(),
                ge_coherence_bound: Vec::new(),
                weights: Vec::new(),
                ground_overlaps: Vec::new(),
                snapshots: Vec::new(),
                info,
            },
        })
    }

    fn sample(&mut self, components: &mut [Component], window: usize) -> Result<()> {
        let cfg = self.cfg;
        let n = cfg.grid.n_points();
        let k_levels = cfg.field.levels();
        let dr = cfg.grid.dr();
        let t = window as f64 * cfg.sample_stride as f64 * cfg.dt;
        let psi0 = &self.system.psi_ground0;

        let mut pop_g = 0.0;
        let mut pop_e = 0.0;
        let mut correlation = 0.0;
        let mut energy = 0.0;
        let mut norm_error: f64 = 0.0;
        let mut ge_bound = 0.0;
        let mut overlaps = Array2::<C64>::zeros((components.len(), k_levels));

        for (c_idx, comp) in components.iter_mut().enumerate() {
            let w = comp.weight;
            let norm = comp.stepper.norm_sqr(&comp.psi);
            norm_error = norm_error.max((norm - 1.0).abs());
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "component norm drifted to {norm} at t = {t}"
                )));
            }
            energy += w * comp.stepper.energy_expectation(&comp.psi);

            for k in 0..k_levels {
                let g_row = &comp.psi[k * n..(k + 1) * n];
                let e_row = &comp.psi[(k_levels + k) * n..(k_levels + k + 1) * n];
                let pg: f64 = g_row.iter().map(|z| z.norm_sqr()).sum();
                let pe: f64 = e_row.iter().map(|z| z.norm_sqr()).sum();
                pop_g += w * pg * dr;
                pop_e += w * pe * dr;

                let mut ov = C64::new(0.0, 0.0);
                for j in 0..n {
                    ov += psi0[j] * e_row[j];
                }
                ov *= dr;
                overlaps[[c_idx, k]] = ov;
                correlation += w * ov.norm_sqr();

                let gmax = g_row.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let emax = e_row.iter().map(|z| z.norm()).fold(0.0, f64::max);
                ge_bound += w * gmax * emax;
            }
        }

        // composite purity including cross-component overlaps
        let mut purity = 0.0;
        for (a, ca) in components.iter().enumerate() {
            for (b, cb) in components.iter().enumerate() {
                if b < a {
                    continue;
                }
                let mut ov = C64::new(0.0, 0.0);
                for (x, y) in ca.psi.iter().zip(&cb.psi) {
                    ov += x.conj() * y;
                }
                let term = ca.weight * cb.weight * (ov * dr).norm_sqr();
                purity += if a == b { term } else { 2.0 * term };
            }
        }

        if self.snapshot_windows.contains(&window) {
            let block = excited_block_of_components(components, n, k_levels);
            let projection = observables::vibrational_projection(
                &block,
                &self.system.excited_basis,
                cfg.projection_count,
            )?;
            self.traj.snapshots.push(MolSnapshot {
                time: t,
                excited_block: block,
                projection,
            });
        }

        self.traj.times.push(t);
        self.traj.pop_g.push(pop_g);
        self.traj.pop_e.push(pop_e);
        self.traj.correlation.push(correlation);
        self.traj.energy.push(energy);
        self.traj.purity_total.push(purity);
        self.traj.norm_error_max.push(norm_error);
        self.traj.ge_coherence_bound.push(ge_bound);
        self.traj.ground_overlaps.push(overlaps);
        Ok(())
    }

    fn finish(mut self, components: &[Component]) -> MolTrajectory {
        self.traj.weights = components.iter().map(|c| c.weight).collect();
        self.traj
    }
}

/// rho_ee(r, r') accumulated over components and photon levels.
fn excited_block_of_components(
    components: &[Component],
    n: usize,
    k_levels: usize,
) -> Array2<C64> {
    let mut block = Array2::<C64>::zeros((n, n));
    for comp in components {
        for k in 0..k_levels {
            let e_row = &comp.psi[(k_levels + k) * n..(k_levels + k + 1) * n];
            for j in 0..n {
                if e_row[j].norm_sqr() == 0.0 {
                    continue;
                }
                for j2 in 0..n {
                    block[[j, j2]] += comp.weight * e_row[j] * e_row[j2].conj();
                }
            }
        }
    }
    block
}

/// Extract rho_ee(r, r') from a mixture state (weights and component
/// state vectors laid out as in the stepper).
pub fn excited_block(
    weights: &[f64],
    states: &[Vec<C64>],
    n: usize,
    k_levels: usize,
) -> Result<Array2<C64>> {
    if weights.len() != states.len() {
        return Err(Error::InvalidConfig(
            "weights and states must have equal length".into(),
        ));
    }
    for psi in states {
        if psi.len() != 2 * k_levels * n {
            return Err(Error::InvalidConfig("state length mismatch".into()));
        }
    }
    let mut block = Array2::<C64>::zeros((n, n));
    for (w, psi) in weights.iter().zip(states) {
        for k in 0..k_levels {
            let e_row = &psi[(k_levels + k) * n..(k_levels + k + 1) * n];
            for j in 0..n {
                for j2 in 0..n {
                    block[[j, j2]] += *w * e_row[j] * e_row[j2].conj();
                }
            }
        }
    }
    Ok(block)
}

/// Dense density-matrix propagation with the same split stepping;
/// the correctness reference for `propagate_mixture` at test scale.
pub fn propagate_dense(cfg: &MolConfig) -> Result<MolTrajectory> {
    let system = MolSystem::new(cfg)?;
    let total = cfg.total_dim();
    if total > cfg.dim_cap {
        return Err(Error::DimensionCap {
            total,
            cap: cfg.dim_cap,
        });
    }
    let n = cfg.grid.n_points();
    let k_levels = cfg.field.levels();
    let dr = cfg.grid.dr();
    let stepper = system.stepper()?;

    // l2-normalized initial vibrational state
    let psi0: Vec<f64> = system.psi_ground0.iter().map(|x| x * dr.sqrt()).collect();
    let field = cfg.field.matrix();
    let mut rho = Array2::<C64>::zeros((total, total));
    for k in 0..k_levels {
        for k2 in 0..k_levels {
            let f = field[[k, k2]];
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                for j2 in 0..n {
                    rho[[k * n + j, k2 * n + j2]] = f * psi0[j] * psi0[j2];
                }
            }
        }
    }

    // dense Hamiltonian for the energy observable
    let t_row = crate::morse::kinetic_circulant_row(&cfg.grid, cfg.reduced_mass);
    let mut h = Array2::<f64>::zeros((total, total));
    for m in 0..2 * k_levels {
        for j in 0..n {
            for j2 in 0..n {
                h[[m * n + j, m * n + j2]] += t_row[(n + j - j2) % n];
            }
        }
    }
    for j in 0..n {
        let b = stepper.block_matrix(j);
        for m in 0..2 * k_levels {
            for m2 in 0..2 * k_levels {
                if b[[m, m2]] != 0.0 {
                    h[[m * n + j, m2 * n + j]] += b[[m, m2]];
                }
            }
        }
    }

    let n_steps = (cfg.t_final / cfg.dt).round() as usize;
    let n_windows = n_steps / cfg.sample_stride;
    let window_dt = cfg.sample_stride as f64 * cfg.dt;
    let mut snapshot_windows: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|&t| ((t / window_dt).round() as usize).min(n_windows))
        .collect();
    snapshot_windows.sort_unstable();
    snapshot_windows.dedup();

    let mut traj = MolTrajectory {
        times: Vec::new(),
        pop_g: Vec::new(),
        pop_e: Vec::new(),
        correlation: Vec::new(),
        energy: Vec::new(),
        purity_total: Vec::new(),
        norm_error_max: Vec::new(),
        ge_coherence_bound: Vec::new(),
        weights: vec![1.0],
        ground_overlaps: Vec::new(),
        snapshots: Vec::new(),
        info: MolRunInfo {
            omega_field: system.omega_field,
            ground_energy0: system.ground_energy0,
            excited_energies: system.excited_basis.energies().to_vec(),
            level_spacing: match cfg.tuning {
                FieldTuning::MidpointExcited { lower, upper } => {
                    system.excited_basis.energies()[upper]
                        - system.excited_basis.energies()[lower]
                }
                FieldTuning::Energy(_) => 0.0,
            },
        },
    };

    let sample = |traj: &mut MolTrajectory, rho: &Array2<C64>, window: usize| -> Result<()> {
        let t = window as f64 * window_dt;
        let mut pop_g = 0.0;
        let mut pop_e = 0.0;
        for k in 0..k_levels {
            for j in 0..n {
                pop_g += rho[[k * n + j, k * n + j]].re;
                let e_idx = (k_levels + k) * n + j;
                pop_e += rho[[e_idx, e_idx]].re;
            }
        }
        let mut correlation = 0.0;
        for k in 0..k_levels {
            for j in 0..n {
                for j2 in 0..n {
                    correlation += (psi0[j]
                        * rho[[(k_levels + k) * n + j, (k_levels + k) * n + j2]]
                        * psi0[j2])
                        .re;
                }
            }
        }
        let energy: f64 = h
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (v * rho[[j, i]]).re)
            .sum();
        let purity: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
        let trace: f64 = (0..total).map(|i| rho[[i, i]].re).sum();

        // exact elementwise max of the reduced g-e coherence block
        let mut ge_max: f64 = 0.0;
        for j in 0..n {
            for j2 in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..k_levels {
                    acc += rho[[k * n + j, (k_levels + k) * n + j2]];
                }
                ge_max = ge_max.max(acc.norm() / dr);
            }
        }

        if snapshot_windows.contains(&window) {
            let mut block = Array2::<C64>::zeros((n, n));
            for j in 0..n {
                for j2 in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..k_levels {
                        acc += rho[[(k_levels + k) * n + j, (k_levels + k) * n + j2]];
                    }
                    block[[j, j2]] = acc / dr;
                }
            }
            let projection = observables::vibrational_projection(
                &block,
                &system.excited_basis,
                cfg.projection_count,
            )?;
            traj.snapshots.push(MolSnapshot {
                time: t,
                excited_block: block,
                projection,
            });
        }

        traj.times.push(t);
        traj.pop_g.push(pop_g);
        traj.pop_e.push(pop_e);
        traj.correlation.push(correlation);
        traj.energy.push(energy);
        traj.purity_total.push(purity);
        traj.norm_error_max.push((trace - 1.0).abs());
        traj.ge_coherence_bound.push(ge_max);
        traj.ground_overlaps
            .push(Array2::zeros((0, k_levels)));
        Ok(())
    };

    sample(&mut traj, &rho, 0)?;
    for window in 1..=n_windows {
        for _ in 0..cfg.sample_stride {
            dense_step(&mut rho, &stepper);
        }
        sample(&mut traj, &rho, window)?;
    }
    Ok(traj)
}

/// rho <- A rho A^dag for one split step A.
fn dense_step(rho: &mut Array2<C64>, stepper: &SplitStepper) {
    apply_to_columns(rho, stepper);
    conj_transpose_in_place(rho);
    apply_to_columns(rho, stepper);
    conj_transpose_in_place(rho);
}

fn apply_to_columns(rho: &mut Array2<C64>, stepper: &SplitStepper) {
    let total = rho.nrows();
    let mut cols: Vec<Vec<C64>> = (0..total).map(|c| rho.column(c).to_vec()).collect();
    cols.par_iter_mut().for_each_init(
        || stepper.clone(),
        |st, col| st.advance(col, 1),
    );
    for (c, col) in cols.iter().enumerate() {
        for r in 0..total {
            rho[[r, c]] = col[r];
        }
    }
}

fn conj_transpose_in_place(rho: &mut Array2<C64>) {
    let nr = rho.nrows();
    for i in 0..nr {
        rho[[i, i]] = rho[[i, i]].conj();
        for j in (i + 1)..nr {
            let a = rho[[i, j]].conj();
            let b = rho[[j, i]].conj();
            rho[[i, j]] = b;
            rho[[j, i]] = a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_grid() -> Grid {
        Grid::new(3.0, 15.0, 64).unwrap()
    }

    fn small_config(field: FieldState) -> MolConfig {
        MolConfig {
            grid: small_grid(),
            field,
            projection_count: 5,
            dt: 1.0,
            t_final: 512.0,
            sample_stride: 8,
            snapshot_times: vec![],
            ..MolConfig::thermal_preset()
        }
    }

    #[test]
    fn stepper_blocks_are_hermitian_with_condon_coupling() {
        let cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        let stepper = build_mol_stepper(&cfg).unwrap();
        let k = cfg.field.levels();
        let b = stepper.block_matrix(20);
        for m in 0..2 * k {
            for m2 in 0..2 * k {
                assert_abs_diff_eq!(b[[m, m2]], b[[m2, m]], epsilon = 1e-12);
            }
        }
        // <e, k-1 | block | g, k> = lambda sqrt(k)
        assert_abs_diff_eq!(b[[k, 1]], cfg.lambda, epsilon = 1e-10);
        assert_abs_diff_eq!(b[[k + 1, 2]], cfg.lambda * 2.0_f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn uncoupled_blocks_leave_surfaces_independent() {
        let mut cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        cfg.lambda = 0.0;
        let stepper = build_mol_stepper(&cfg).unwrap();
        let k = cfg.field.levels();
        let b = stepper.block_matrix(10);
        for m in 0..2 * k {
            for m2 in 0..2 * k {
                if m != m2 {
                    assert_abs_diff_eq!(b[[m, m2]], 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn stationary_state_acquires_eigenvalue_phase() {
        // lambda = 0, one Fock level: an excited-surface eigenstate must
        // pick up exp(-i (E_v + omega/2) t) up to the splitting error
        let grid = Grid::new(3.0, 15.0, 128).unwrap();
        let mass = LI2_REDUCED_MASS;
        let excited = MorseSurface::li2_excited();
        let basis = vibrational_eigensolve(&excited, &grid, mass, 3).unwrap();
        let omega = 0.09;
        let dt = 0.1;
        let steps = 100;
        let mut stepper = SplitStepper::new(
            &grid,
            &MorseSurface::li2_ground().evaluate_on(&grid),
            &excited.evaluate_on(&grid),
            omega,
            0.0,
            1,
            mass,
            dt,
        )
        .unwrap();
        let n = grid.n_points();
        let mut psi = vec![C64::new(0.0, 0.0); 2 * n];
        for j in 0..n {
            psi[n + j] = C64::new(basis.state(2)[j], 0.0);
        }
        stepper.advance(&mut psi, steps);
        let mut overlap = C64::new(0.0, 0.0);
        for j in 0..n {
            overlap += basis.state(2)[j] * psi[n + j];
        }
        overlap *= grid.dr();
        let expected = C64::from_polar(1.0, -(basis.energies()[2] + 0.5 * omega) * dt * steps as f64);
        assert!((overlap - expected).norm() < 1e-6);
        assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn vacuum_field_never_excites() {
        let cfg = small_config(FieldState::vacuum(1).unwrap());
        let traj = propagate_mixture(&cfg).unwrap();
        for &p in &traj.pop_e {
            assert!(p.abs() < 1e-14);
        }
        for &c in &traj.correlation {
            assert!(c.abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_excitation_is_bounded_by_nonvacuum_weight() {
        let cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        let traj = propagate_mixture(&cfg).unwrap();
        let p0 = cfg.field.diagonal()[0];
        for &p in &traj.pop_e {
            assert!(p <= 1.0 - p0 + 1e-12);
            assert!(p >= -1e-14);
        }
    }

    #[test]
    fn mixture_matches_dense_path_on_fock_state() {
        let mut cfg = small_config(FieldState::fock(1, 2).unwrap());
        cfg.t_final = 256.0;
        cfg.sample_stride = 8;
        cfg.snapshot_times = vec![128.0, 256.0];
        let mix = propagate_mixture(&cfg).unwrap();
        let dense = propagate_dense(&cfg).unwrap();
        for k in 0..mix.len() {
            assert_abs_diff_eq!(mix.pop_e[k], dense.pop_e[k], epsilon = 1e-9);
            assert_abs_diff_eq!(mix.correlation[k], dense.correlation[k], epsilon = 1e-9);
        }
        for (a, b) in mix.snapshots.iter().zip(&dense.snapshots) {
            let mut max_dev: f64 = 0.0;
            for (x, y) in a.excited_block.iter().zip(b.excited_block.iter()) {
                max_dev = max_dev.max((x - y).norm());
            }
            assert!(max_dev < 1e-9, "blocks deviate by {max_dev:.2e}");
        }
    }

    #[test]
    fn dense_path_is_identity_at_t_zero() {
        let mut cfg = small_config(FieldState::thermal(0.0072, 1).unwrap());
        cfg.t_final = 0.0;
        cfg.snapshot_times = vec![0.0];
        let traj = propagate_dense(&cfg).unwrap();
        assert_eq!(traj.len(), 1);
        assert_abs_diff_eq!(traj.pop_g[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(traj.pop_e[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(traj.correlation[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dense_uncoupled_matter_sector_is_static() {
        let mut cfg = small_config(FieldState::thermal(0.0072, 1).unwrap());
        cfg.lambda = 0.0;
        cfg.dt = 0.25;
        cfg.t_final = 64.0;
        cfg.sample_stride = 32;
        let traj = propagate_dense(&cfg).unwrap();
        for k in 0..traj.len() {
            assert_abs_diff_eq!(traj.pop_g[k], 1.0, epsilon = 1e-8);
            assert!(traj.pop_e[k].abs() < 1e-14);
        }
    }

    #[test]
    fn norm_and_energy_are_conserved() {
        let cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        let traj = propagate_mixture(&cfg).unwrap();
        for &err in &traj.norm_error_max {
            assert!(err < 1e-10);
        }
        let e0 = traj.energy[0];
        for &e in &traj.energy {
            assert!((e - e0).abs() < 1e-7, "energy drift {:.2e}", (e - e0).abs());
        }
        // composite purity stays at its initial value
        let p0 = traj.purity_total[0];
        for &p in &traj.purity_total {
            assert!((p - p0).abs() < 1e-8);
        }
    }

    #[test]
    fn thermal_ge_coherence_bound_is_tiny() {
        let cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        let traj = propagate_mixture(&cfg).unwrap();
        for &b in &traj.ge_coherence_bound {
            assert!(b < 1e-12);
        }
    }

    #[test]
    fn excited_block_trace_matches_population() {
        let mut cfg = small_config(FieldState::thermal(0.0072, 2).unwrap());
        cfg.t_final = 512.0;
        cfg.snapshot_times = vec![512.0];
        let traj = propagate_mixture(&cfg).unwrap();
        let snap = traj.snapshots.last().unwrap();
        let trace: f64 = (0..cfg.grid.n_points())
            .map(|j| snap.excited_block[[j, j]].re)
            .sum::<f64>()
            * cfg.grid.dr();
        let last_pop = *traj.pop_e.last().unwrap();
        assert_abs_diff_eq!(trace, last_pop, epsilon = 1e-10);
        // diagonal of a reduced state is non-negative
        for j in 0..cfg.grid.n_points() {
            assert!(snap.excited_block[[j, j]].re >= -1e-12);
        }
    }
}
