//! Three-level V-type system coupled to one or two quantized field
//! modes under the dipole and rotating-wave approximations.
//!
//! The composite layout is matter (x) mode-1 (x) mode-2 with matter
//! indices g = 0, e = 1, f = 2. The Hamiltonian is time independent, so
//! trajectories are sampled from a single eigendecomposition with no
//! step-accumulated error.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::hilbert::{
    diagonalize, kron_with_cap, partial_trace, DensityMatrix, HilbertLayout, DEFAULT_DIM_CAP,
};
use crate::units;

pub const MATTER_DIM: usize = 3;
pub const IDX_G: usize = 0;
pub const IDX_E: usize = 1;
pub const IDX_F: usize = 2;

/// Coupling of the paper-scale presets (hartree).
pub const PRESET_LAMBDA: f64 = 1e-4;
/// e-f splitting of the presets (cm^-1).
pub const PRESET_SPLITTING_CM1: f64 = 250.0;
/// Mode wavelength of the presets (nm).
pub const PRESET_WAVELENGTH_NM: f64 = 495.9;
/// Thermal mean occupation of the presets.
pub const PRESET_N_BAR: f64 = 0.008;
/// Highest retained Fock level of the presets.
pub const PRESET_N_MAX: usize = 9;

/// One quantized mode attached to the V system.
#[derive(Clone, Debug)]
pub struct VMode {
    /// Mode energy (hartree).
    pub omega: f64,
    /// Coupling to the g-e transition (hartree).
    pub lambda_e: f64,
    /// Coupling to the g-f transition (hartree).
    pub lambda_f: f64,
    /// Initial state of the mode.
    pub field: FieldState,
}

#[derive(Clone, Debug)]
pub struct VConfig {
    /// Level energies (hartree); require omega_g < omega_e <= omega_f.
    pub omega_g: f64,
    pub omega_e: f64,
    pub omega_f: f64,
    /// One or two modes.
    pub modes: Vec<VMode>,
    /// Total propagation time and sampling interval (atomic units).
    pub t_final: f64,
    pub dt: f64,
    pub dim_cap: usize,
    /// Keep the composite state at every sample (tests, diagnostics).
    pub store_snapshots: bool,
}

impl VConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_g < self.omega_e && self.omega_e <= self.omega_f) {
            return Err(Error::InvalidConfig(format!(
                "level ordering requires omega_g < omega_e <= omega_f, got ({}, {}, {})",
                self.omega_g, self.omega_e, self.omega_f
            )));
        }
        if self.modes.is_empty() || self.modes.len() > 2 {
            return Err(Error::InvalidConfig(format!(
                "expected one or two modes, got {}",
                self.modes.len()
            )));
        }
        for (k, mode) in self.modes.iter().enumerate() {
            if mode.omega <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "mode {k}: omega must be positive"
                )));
            }
            if mode.lambda_e < 0.0 || mode.lambda_f < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "mode {k}: couplings must be non-negative"
                )));
            }
        }
        if self.dt <= 0.0 || self.t_final < 0.0 {
            return Err(Error::InvalidConfig(
                "dt must be positive and t_final non-negative".into(),
            ));
        }
        let total = self.layout().total();
        if total > self.dim_cap {
            return Err(Error::DimensionCap {
                total,
                cap: self.dim_cap,
            });
        }
        Ok(())
    }

    /// Composite layout: matter (x) one dim per mode.
    pub fn layout(&self) -> HilbertLayout {
        let mut dims = vec![MATTER_DIM];
        dims.extend(self.modes.iter().map(|m| m.field.levels()));
        HilbertLayout::new(dims).expect("positive dims")
    }

    /// Single-mode thermal scenario: 250 cm^-1 splitting, mode tuned
    /// midway, lambda = 1e-4, n_bar = 0.008 over ten Fock states.
    pub fn thermal_preset() -> Self {
        Self::single_mode_preset(
            FieldState::thermal(PRESET_N_BAR, PRESET_N_MAX).expect("preset field"),
        )
    }

    /// Single-mode coherent scenario with |alpha|^2 = 0.008 (real alpha).
    pub fn coherent_preset() -> Self {
        let alpha = C64::new(PRESET_N_BAR.sqrt(), 0.0);
        Self::single_mode_preset(FieldState::coherent(alpha, PRESET_N_MAX).expect("preset field"))
    }

    fn single_mode_preset(field: FieldState) -> Self {
        let omega = units::nm_to_hartree(PRESET_WAVELENGTH_NM);
        let split = units::cm1_to_hartree(PRESET_SPLITTING_CM1);
        Self {
            omega_g: 0.0,
            omega_e: omega - 0.5 * split,
            omega_f: omega + 0.5 * split,
            modes: vec![VMode {
                omega,
                lambda_e: PRESET_LAMBDA,
                lambda_f: PRESET_LAMBDA,
                field,
            }],
            t_final: 3.0 * vacuum_rabi_period(PRESET_LAMBDA),
            dt: 0.25 / PRESET_LAMBDA,
            dim_cap: DEFAULT_DIM_CAP,
            store_snapshots: false,
        }
    }

    /// Two modes at the common midway frequency, both coupled to both
    /// transitions with equal strength.
    pub fn two_mode_thermal_preset() -> Self {
        let field = || FieldState::thermal(PRESET_N_BAR, PRESET_N_MAX).expect("preset field");
        Self::two_mode_preset(field(), field())
    }

    pub fn two_mode_coherent_preset() -> Self {
        let alpha = C64::new(PRESET_N_BAR.sqrt(), 0.0);
        let field = || FieldState::coherent(alpha, PRESET_N_MAX).expect("preset field");
        Self::two_mode_preset(field(), field())
    }

    fn two_mode_preset(field_a: FieldState, field_b: FieldState) -> Self {
        let mut cfg = Self::single_mode_preset(field_a);
        let mode0 = cfg.modes[0].clone();
        cfg.modes.push(VMode {
            field: field_b,
            ..mode0
        });
        cfg
    }

    /// Variant of the two-mode coupling where mode 1 drives only g-e and
    /// mode 2 only g-f.
    pub fn with_mode_per_transition(mut self) -> Self {
        if self.modes.len() == 2 {
            self.modes[0].lambda_f = 0.0;
            self.modes[1].lambda_e = 0.0;
        }
        self
    }

    /// Fully resonant configuration (omega_e = omega_f = omega), the one
    /// the closed-form expressions describe.
    pub fn degenerate_resonant(field: FieldState, lambda: f64) -> Self {
        let omega = units::nm_to_hartree(PRESET_WAVELENGTH_NM);
        Self {
            omega_g: 0.0,
            omega_e: omega,
            omega_f: omega,
            modes: vec![VMode {
                omega,
                lambda_e: lambda,
                lambda_f: lambda,
                field,
            }],
            t_final: 3.0 * vacuum_rabi_period(lambda),
            dt: 0.25 / lambda,
            dim_cap: DEFAULT_DIM_CAP,
            store_snapshots: false,
        }
    }
}

/// Period of the n = 1 manifold oscillation, 2 pi / (sqrt(2) lambda).
pub fn vacuum_rabi_period(lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI / (2.0_f64.sqrt() * lambda)
}

/// Time series of the reduced-state observables of a V-system run.
#[derive(Clone, Debug, Default)]
pub struct VTrajectory {
    pub times: Vec<f64>,
    pub pop_g: Vec<f64>,
    pub pop_e: Vec<f64>,
    pub pop_f: Vec<f64>,
    /// <f| rho_M |e>
    pub coherence_fe: Vec<C64>,
    /// <g| rho_M |e>
    pub coherence_ge: Vec<C64>,
    /// <g| rho_M |f>
    pub coherence_gf: Vec<C64>,
    pub purity_matter: Vec<f64>,
    pub purity_field: Vec<f64>,
    pub trace_matter: Vec<f64>,
    pub trace_field: Vec<f64>,
    /// Purity of the composite state (constant under unitary evolution).
    pub purity_total: Vec<f64>,
    /// Tr[H rho], constant for the exact propagation.
    pub energy: Vec<f64>,
    /// Diagonal of the reduced (joint) field state.
    pub field_diagonal: Vec<Vec<f64>>,
    /// Largest off-diagonal magnitude of the reduced field state.
    pub field_offdiag_max: Vec<f64>,
    /// Per-sample deviations recorded by the conservation checks.
    pub trace_dev: Vec<f64>,
    pub herm_dev: Vec<f64>,
    /// Composite snapshots when requested.
    pub snapshots: Vec<DensityMatrix>,
}

impl VTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_coherence_fe(&self) -> f64 {
        self.coherence_fe.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Assemble the composite Hamiltonian of the configured V system.
pub fn build_v_hamiltonian(cfg: &VConfig) -> Result<Array2<C64>> {
    cfg.validate()?;
    let layout = cfg.layout();
    let total = layout.total();
    let level = [cfg.omega_g, cfg.omega_e, cfg.omega_f];
    let mut h = Array2::<C64>::zeros((total, total));

    for flat in 0..total {
        let idx = layout.unflatten(flat);
        let mut energy = level[idx[0]];
        for (mode, &n) in cfg.modes.iter().zip(&idx[1..]) {
            energy += mode.omega * (n as f64 + 0.5);
        }
        h[[flat, flat]] = C64::new(energy, 0.0);
    }

    // |i><g| a_k + h.c., i in {e, f}: couples (g, n_k) to (i, n_k - 1)
    for flat in 0..total {
        let idx = layout.unflatten(flat);
        if idx[0] != IDX_G {
            continue;
        }
        for (k, mode) in cfg.modes.iter().enumerate() {
            let n = idx[1 + k];
            if n == 0 {
                continue;
            }
            let amp = (n as f64).sqrt();
            for (matter, lambda) in [(IDX_E, mode.lambda_e), (IDX_F, mode.lambda_f)] {
                let mut up = idx.clone();
                up[0] = matter;
                up[1 + k] = n - 1;
                let row = layout.flatten(&up);
                h[[row, flat]] += C64::new(lambda * amp, 0.0);
                h[[flat, row]] += C64::new(lambda * amp, 0.0);
            }
        }
    }
    Ok(h)
}

/// Propagate a single-mode configuration.
pub fn run_v(cfg: &VConfig) -> Result<VTrajectory> {
    if cfg.modes.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "run_v expects one mode, got {}",
            cfg.modes.len()
        )));
    }
    run(cfg)
}

/// Propagate a two-mode configuration.
pub fn run_v_two_mode(cfg: &VConfig) -> Result<VTrajectory> {
    if cfg.modes.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "run_v_two_mode expects two modes, got {}",
            cfg.modes.len()
        )));
    }
    run(cfg)
}

fn run(cfg: &VConfig) -> Result<VTrajectory> {
    cfg.validate()?;
    let layout = cfg.layout();
    let h = build_v_hamiltonian(cfg)?;
    let propagator = diagonalize(&h, layout)?;

    let matter0 = DensityMatrix::basis_projector(HilbertLayout::single(MATTER_DIM)?, IDX_G)?;
    let mut rho0 = matter0;
    for mode in &cfg.modes {
        rho0 = kron_with_cap(&rho0, &mode.field.to_density_matrix(), cfg.dim_cap)?;
    }
    let prepared = propagator.prepare(&rho0)?;

    let n_steps = (cfg.t_final / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let field_keep: Vec<usize> = (1..=cfg.modes.len()).collect();

    let mut traj = VTrajectory::default();
    for step in 0..=n_steps {
        let t = step as f64 * cfg.dt;
        let rho = prepared.at(t)?;

        let tr = rho.trace();
        traj.trace_dev
            .push(((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt());
        traj.herm_dev.push(rho.hermiticity_deviation());
        traj.purity_total.push(rho.purity());

        let energy: f64 = h
            .indexed_iter()
            .map(|((i, j), v)| (v * rho.data()[[j, i]]).re)
            .sum();
        traj.energy.push(energy);

        let matter = partial_trace(&rho, &[0])?;
        let field = partial_trace(&rho, &field_keep)?;

        traj.times.push(t);
        traj.pop_g.push(matter.data()[[IDX_G, IDX_G]].re);
        traj.pop_e.push(matter.data()[[IDX_E, IDX_E]].re);
        traj.pop_f.push(matter.data()[[IDX_F, IDX_F]].re);
        traj.coherence_fe.push(matter.data()[[IDX_F, IDX_E]]);
        traj.coherence_ge.push(matter.data()[[IDX_G, IDX_E]]);
        traj.coherence_gf.push(matter.data()[[IDX_G, IDX_F]]);
        traj.purity_matter.push(matter.purity());
        traj.purity_field.push(field.purity());
        traj.trace_matter.push(matter.trace().re);
        traj.trace_field.push(field.trace().re);
        traj.field_diagonal
            .push(field.data().diag().iter().map(|z| z.re).collect());

        let fd = field.data();
        let mut offdiag: f64 = 0.0;
        for i in 0..fd.nrows() {
            for j in 0..fd.ncols() {
                if i != j {
                    offdiag = offdiag.max(fd[[i, j]].norm());
                }
            }
        }
        traj.field_offdiag_max.push(offdiag);

        if cfg.store_snapshots {
            traj.snapshots.push(rho);
        }
    }
    Ok(traj)
}
