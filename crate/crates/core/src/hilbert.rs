//! Tensor-product index algebra, density matrices, and exact unitary
//! propagation for composite quantum systems.
//!
//! States live on a [`HilbertLayout`], an ordered list of subsystem
//! dimensions with row-major composite indexing (outermost subsystem
//! first). Propagation diagonalizes the (time-independent) Hamiltonian
//! once, so evolution to any time is exact rather than step-accumulated.

use nalgebra::DMatrix;
use ndarray::{linalg::kron as matrix_kron, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default cap on the composite Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 16384;

/// Per-step tolerance on trace and Hermiticity during propagation.
pub const PROPAGATION_TOL: f64 = 1e-9;

/// Ordered subsystem dimensions with row-major composite index mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
    total: usize,
}

impl HilbertLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "subsystem dimensions must be positive and non-empty".into(),
            ));
        }
        let total = dims.iter().product();
        Ok(Self { dims, total })
    }

    /// Layout with a single subsystem.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Row-major strides: `stride[i]` is the flat-index increment of
    /// subsystem `i`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// Flat composite index of a multi-index (outermost first).
    ///
    /// Panics if the multi-index has the wrong arity or is out of range.
    pub fn flatten(&self, indices: &[usize]) -> usize {
        assert_eq!(indices.len(), self.dims.len(), "multi-index arity mismatch");
        let mut flat = 0;
        for (idx, dim) in indices.iter().zip(&self.dims) {
            assert!(idx < dim, "subsystem index out of range");
            flat = flat * dim + idx;
        }
        flat
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        assert!(flat < self.total, "flat index out of range");
        let mut out = vec![0; self.dims.len()];
        for (slot, dim) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % dim;
            flat /= dim;
        }
        out
    }

    /// Layout of `self` followed by `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            dims,
            total: self.total * other.total,
        }
    }
}

/// Hermitian, unit-trace, positive-semidefinite complex matrix over a
/// [`HilbertLayout`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    data: Array2<C64>,
}

impl DensityMatrix {
    /// Validating constructor: checks shape, Hermiticity (1e-12), trace
    /// (1e-10) and the purity window.
    pub fn new(layout: HilbertLayout, data: Array2<C64>) -> Result<Self> {
        let rho = Self::from_parts(layout, data)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape-checked constructor without the numeric invariant checks;
    /// for internal paths that preserve them structurally.
    pub(crate) fn from_parts(layout: HilbertLayout, data: Array2<C64>) -> Result<Self> {
        if data.nrows() != layout.total() || data.ncols() != layout.total() {
            return Err(Error::InvalidConfig(format!(
                "matrix shape {:?} does not match layout total {}",
                data.dim(),
                layout.total()
            )));
        }
        Ok(Self { layout, data })
    }

    /// Projector onto a single composite basis state.
    pub fn basis_projector(layout: HilbertLayout, flat_index: usize) -> Result<Self> {
        if flat_index >= layout.total() {
            return Err(Error::SubsystemOutOfRange {
                index: flat_index,
                count: layout.total(),
            });
        }
        let mut data = Array2::zeros((layout.total(), layout.total()));
        data[[flat_index, flat_index]] = C64::new(1.0, 0.0);
        Self::from_parts(layout, data)
    }

    /// Pure state from a ket; the ket is normalized first.
    pub fn from_ket(layout: HilbertLayout, ket: &Array1<C64>) -> Result<Self> {
        if ket.len() != layout.total() {
            return Err(Error::InvalidConfig(format!(
                "ket length {} does not match layout total {}",
                ket.len(),
                layout.total()
            )));
        }
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidConfig("cannot normalize a zero ket".into()));
        }
        let n = ket.len();
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                data[[i, j]] = ket[i] * ket[j].conj() / (norm * norm);
            }
        }
        Self::from_parts(layout, data)
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(layout: HilbertLayout) -> Self {
        let d = layout.total();
        let data = Array2::eye(d).mapv(|x: f64| C64::new(x / d as f64, 0.0));
        Self { layout, data }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    /// Max absolute deviation from Hermiticity.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.data.nrows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        dev
    }

    /// Tr rho^2. For a Hermitian matrix this is the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Smallest eigenvalue; O(n^3), intended for tests and diagnostics.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let n = self.data.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| self.data[[i, j]]);
        let eig = m.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .cloned()
            .reduce(f64::min)
            .ok_or_else(|| Error::EigenFailure("empty spectrum".into()))
    }

    /// Cheap invariant checks: Hermiticity, trace, and the purity window
    /// [1/d, 1]. Positive semidefiniteness is checked separately by
    /// [`validate_strict`](Self::validate_strict).
    pub fn validate(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > 1e-12 {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: 1e-12,
            });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::TraceDeviation {
                trace: tr.re,
                tolerance: 1e-10,
            });
        }
        let purity = self.purity();
        let lower = 1.0 / self.layout.total() as f64 - 1e-10;
        if !(lower..=1.0 + 1e-10).contains(&purity) {
            return Err(Error::InvalidConfig(format!(
                "purity {purity} outside [{lower}, 1]"
            )));
        }
        Ok(())
    }

    /// Full validation including the O(n^3) eigenvalue sweep.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        let min = self.min_eigenvalue()?;
        if min < -1e-10 {
            return Err(Error::InvalidConfig(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Tensor product of two density matrices; the result layout is the
/// concatenation of the factor layouts.
pub fn kron(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_with_cap(a: &DensityMatrix, b: &DensityMatrix, cap: usize) -> Result<DensityMatrix> {
    let layout = a.layout().concat(b.layout());
    if layout.total() > cap {
        return Err(Error::DimensionCap {
            total: layout.total(),
            cap,
        });
    }
    DensityMatrix::from_parts(layout, matrix_kron(a.data(), b.data()))
}

/// Trace out every subsystem not listed in `keep`. The kept subsystems
/// retain their original relative order; `keep` is deduplicated.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let n_sub = rho.layout().n_subsystems();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&i| i >= n_sub) {
        return Err(Error::SubsystemOutOfRange {
            index: bad,
            count: n_sub,
        });
    }
    let dims = rho.layout().dims();
    let strides = rho.layout().strides();
    let traced: Vec<usize> = (0..n_sub).filter(|i| !kept.contains(i)).collect();

    let offsets = |subsys: &[usize]| -> Vec<usize> {
        // flat offsets of every multi-index over the given subsystems
        let mut out = vec![0usize];
        for &i in subsys {
            let mut next = Vec::with_capacity(out.len() * dims[i]);
            for &base in &out {
                for v in 0..dims[i] {
                    next.push(base + v * strides[i]);
                }
            }
            out = next;
        }
        out
    };
    let kept_offsets = offsets(&kept);
    let traced_offsets = offsets(&traced);

    let out_layout = HilbertLayout::new(kept.iter().map(|&i| dims[i]).collect())?;
    let mut out = Array2::zeros((kept_offsets.len(), kept_offsets.len()));
    let data = rho.data();
    for (row, &ro) in kept_offsets.iter().enumerate() {
        for (col, &co) in kept_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &to in &traced_offsets {
                acc += data[[ro + to, co + to]];
            }
            out[[row, col]] = acc;
        }
    }
    DensityMatrix::from_parts(out_layout, out)
}

/// One-time eigendecomposition of a time-independent Hamiltonian;
/// implements exact evolution to arbitrary times.
#[derive(Clone, Debug)]
pub struct Propagator {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
    adjoint: Array2<C64>,
    layout: HilbertLayout,
}

/// Eigendecompose a Hermitian matrix over the given layout.
pub fn diagonalize(h: &Array2<C64>, layout: HilbertLayout) -> Result<Propagator> {
    let n = layout.total();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::InvalidConfig(format!(
            "Hamiltonian shape {:?} does not match layout total {n}",
            h.dim()
        )));
    }
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    if dev > 1e-10 {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: 1e-10,
        });
    }

    let m = DMatrix::from_fn(n, n, |i, j| h[[i, j]]);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, col]] = eig.eigenvectors[(row, k)];
        }
    }
    let adjoint = eigenvectors.t().mapv(|z| z.conj());

    let prop = Propagator {
        eigenvalues,
        eigenvectors,
        adjoint,
        layout,
    };
    let recon_err = prop.reconstruction_error(h);
    if recon_err > 1e-9 {
        return Err(Error::EigenFailure(format!(
            "reconstruction error {recon_err:.3e} above 1e-9"
        )));
    }
    Ok(prop)
}

impl Propagator {
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    /// Max-norm of U^dag U - I.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.adjoint.dot(&self.eigenvectors);
        let n = prod.nrows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((prod[[i, j]] - C64::new(expected, 0.0)).norm());
            }
        }
        dev
    }

    /// U diag(E) U^dag.
    pub fn reconstruct(&self) -> Array2<C64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &e) in scaled.columns_mut().into_iter().zip(self.eigenvalues.iter()) {
            col.mapv_inplace(|z| z * e);
        }
        scaled.dot(&self.adjoint)
    }

    fn reconstruction_error(&self, h: &Array2<C64>) -> f64 {
        let recon = self.reconstruct();
        recon
            .iter()
            .zip(h.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Transform a state into the eigenbasis once so that arbitrary-time
    /// sampling costs two matrix products per call.
    pub fn prepare(&self, rho: &DensityMatrix) -> Result<PreparedState<'_>> {
        if rho.layout() != &self.layout {
            return Err(Error::LayoutMismatch(
                self.layout.dims().to_vec(),
                rho.layout().dims().to_vec(),
            ));
        }
        let rho_eig = self.adjoint.dot(rho.data()).dot(&self.eigenvectors);
        Ok(PreparedState {
            propagator: self,
            rho_eig,
        })
    }

    /// rho(t) = e^{-iHt} rho e^{+iHt}, exact for any `t`.
    ///
    /// The result is checked against the per-step trace and Hermiticity
    /// tolerances; positivity is left to tests (it costs an O(n^3) sweep).
    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let evolved = self.prepare(rho)?.at(t)?;
        Ok(evolved)
    }
}

/// A density matrix held in the eigenbasis of its propagator.
pub struct PreparedState<'a> {
    propagator: &'a Propagator,
    rho_eig: Array2<C64>,
}

impl PreparedState<'_> {
    /// Sample the evolved state at time `t` (atomic units).
    pub fn at(&self, t: f64) -> Result<DensityMatrix> {
        let prop = self.propagator;
        let phases: Vec<C64> = prop
            .eigenvalues
            .iter()
            .map(|&e| C64::from_polar(1.0, -e * t))
            .collect();
        let n = phases.len();
        let mut m = self.rho_eig.clone();
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] *= phases[i] * phases[j].conj();
            }
        }
        let data = prop.eigenvectors.dot(&m).dot(&prop.adjoint);
        let rho = DensityMatrix::from_parts(prop.layout.clone(), data)?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > PROPAGATION_TOL || tr.im.abs() > PROPAGATION_TOL {
            return Err(Error::TraceDeviation {
                trace: tr.re,
                tolerance: PROPAGATION_TOL,
            });
        }
        let dev = rho.hermiticity_deviation();
        if dev > PROPAGATION_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: PROPAGATION_TOL,
            });
        }
        Ok(rho)
    }
}
