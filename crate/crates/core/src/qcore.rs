//! Truncated Fock-space linear algebra.
//!
//! Operators and states live on a tensor product of truncated harmonic
//! oscillator (or qubit) spaces. Subsystem 0 is the most significant factor of
//! the Kronecker product, so a composite basis index is
//! `i = i_0 * (d_1 d_2 ...) + i_1 * (d_2 ...) + ...`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PURE_NORM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-9;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "subsystem dimensions must be non-empty and positive, got {dims:?}"
        )));
    }
    Ok(dims.iter().product())
}

/// Dense operator on a (possibly composite) truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperator {
    dims: Vec<usize>,
    data: CMatrix,
}

impl QOperator {
    pub fn new(dims: Vec<usize>, data: CMatrix) -> Result<Self> {
        let n = check_dims(&dims)?;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, dims {dims:?} require {n}x{n}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Builds an operator and asserts Hermiticity to [`HERMITIAN_TOL`].
    pub fn hermitian(dims: Vec<usize>, data: CMatrix) -> Result<Self> {
        let op = Self::new(dims, data)?;
        op.assert_hermitian(HERMITIAN_TOL)?;
        Ok(op)
    }

    pub fn identity(dims: &[usize]) -> Result<Self> {
        let n = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: CMatrix::identity(n, n),
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: CMatrix::zeros(n, n),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.adjoint(),
        }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn assert_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_defect();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: &self.data * &other.data - &other.data * &self.data,
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: &self.data * &other.data,
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: &self.data + &other.data,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: &self.data * factor,
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Places `self` (a single-subsystem operator) at position `index` of a
    /// composite space with subsystem dimensions `dims`.
    pub fn embed(&self, index: usize, dims: &[usize]) -> Result<Self> {
        if self.dims.len() != 1 {
            return Err(Error::InvalidArgument(
                "embed expects a single-subsystem operator".into(),
            ));
        }
        if index >= dims.len() || dims[index] != self.dims[0] {
            return Err(Error::DimensionMismatch(format!(
                "cannot place a {}-level operator at slot {index} of {dims:?}",
                self.dims[0]
            )));
        }
        let parts: Vec<QOperator> = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                if k == index {
                    Ok(self.clone())
                } else {
                    QOperator::identity(&[d])
                }
            })
            .collect::<Result<_>>()?;
        tensor(&parts)
    }

    fn same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

// Operator arithmetic panics on mismatched dims, like matrix arithmetic in
// nalgebra; use the `try_*` methods where dims are not known statically.
impl Add for &QOperator {
    type Output = QOperator;
    fn add(self, rhs: &QOperator) -> QOperator {
        self.try_add(rhs).expect("operator dims must match")
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dims, rhs.dims, "operator dims must match");
        QOperator {
            dims: self.dims.clone(),
            data: &self.data - &rhs.data,
        }
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        self.matmul(rhs).expect("operator dims must match")
    }
}

impl Mul<f64> for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: f64) -> QOperator {
        self.scale(c(rhs, 0.0))
    }
}

impl Mul<C64> for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: C64) -> QOperator {
        self.scale(rhs)
    }
}

impl Neg for &QOperator {
    type Output = QOperator;
    fn neg(self) -> QOperator {
        self.scale(c(-1.0, 0.0))
    }
}

/// Truncated bosonic annihilation operator: `√k` on the `(k-1, k)` superdiagonal.
pub fn annihilation(dim: usize) -> Result<QOperator> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "annihilation needs dim >= 2, got {dim}"
        )));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for k in 1..dim {
        m[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
    }
    QOperator::new(vec![dim], m)
}

pub fn creation(dim: usize) -> Result<QOperator> {
    Ok(annihilation(dim)?.dagger())
}

pub fn number(dim: usize) -> Result<QOperator> {
    diagonal(dim, |n| n as f64)
}

/// Photon-number parity `exp(iπ a†a)`.
pub fn parity(dim: usize) -> Result<QOperator> {
    diagonal(dim, |n| if n % 2 == 0 { 1.0 } else { -1.0 })
}

pub fn diagonal(dim: usize, f: impl Fn(usize) -> f64) -> Result<QOperator> {
    let m = CMatrix::from_diagonal(&CVector::from_iterator(dim, (0..dim).map(|n| c(f(n), 0.0))));
    QOperator::new(vec![dim], m)
}

/// `|ket⟩⟨bra|` on a single subsystem.
pub fn projector(dim: usize, ket: usize, bra: usize) -> Result<QOperator> {
    if ket >= dim || bra >= dim {
        return Err(Error::InvalidArgument(format!(
            "level out of range for dim {dim}"
        )));
    }
    let mut m = CMatrix::zeros(dim, dim);
    m[(ket, bra)] = c(1.0, 0.0);
    QOperator::new(vec![dim], m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
enum StateData {
    Pure(CVector),
    Mixed(CMatrix),
}

/// A pure ket or a density matrix on a truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    dims: Vec<usize>,
    data: StateData,
}

impl QState {
    /// Pure state; the vector must already be normalized to [`PURE_NORM_TOL`].
    pub fn pure(dims: Vec<usize>, v: CVector) -> Result<Self> {
        let n = check_dims(&dims)?;
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs dims {dims:?}",
                v.len()
            )));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            dims,
            data: StateData::Pure(v),
        })
    }

    /// Pure state from an unnormalized vector.
    pub fn normalized(dims: Vec<usize>, v: CVector) -> Result<Self> {
        let norm = v.norm();
        if norm < 1e-14 {
            return Err(Error::DegenerateInput(
                "cannot normalize a zero vector".into(),
            ));
        }
        Self::pure(dims, v.unscale(norm))
    }

    /// Density matrix, validated for Hermiticity, unit trace and positivity.
    pub fn mixed(dims: Vec<usize>, rho: CMatrix) -> Result<Self> {
        let state = Self::mixed_unchecked(dims, rho)?;
        state.validate_density()?;
        Ok(state)
    }

    /// Density matrix with only the shape checked. Used by integrators whose
    /// output is validated separately.
    pub fn mixed_unchecked(dims: Vec<usize>, rho: CMatrix) -> Result<Self> {
        let n = check_dims(&dims)?;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, dims {dims:?}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(Self {
            dims,
            data: StateData::Mixed(rho),
        })
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidArgument(format!(
                "Fock level {n} outside dim {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[n] = c(1.0, 0.0);
        Self::pure(vec![dim], v)
    }

    pub fn kind(&self) -> StateKind {
        match self.data {
            StateData::Pure(_) => StateKind::Pure,
            StateData::Mixed(_) => StateKind::Mixed,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn ket(&self) -> Option<&CVector> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    /// Density matrix (`|ψ⟩⟨ψ|` for pure states).
    pub fn density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: StateData::Mixed(self.density_matrix()),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared(),
            StateData::Mixed(m) => m.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared().powi(2),
            StateData::Mixed(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    pub fn expect(&self, op: &QOperator) -> Result<C64> {
        if op.dims() != self.dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                op.dims(),
                self.dims
            )));
        }
        Ok(match &self.data {
            StateData::Pure(v) => v.dotc(&(op.data() * v)),
            StateData::Mixed(m) => (op.data() * m).trace(),
        })
    }

    /// Smallest eigenvalue of the density matrix (0 for pure states up to rounding).
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 0.0,
            StateData::Mixed(m) => {
                let herm = (m + m.adjoint()).unscale(2.0);
                herm.symmetric_eigenvalues()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Population per basis index, i.e. the diagonal of the density matrix.
    pub fn populations(&self) -> Vec<f64> {
        match &self.data {
            StateData::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            StateData::Mixed(m) => m.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    pub fn validate_density(&self) -> Result<()> {
        let StateData::Mixed(m) = &self.data else {
            let norm = self.trace().sqrt();
            if (norm - 1.0).abs() > PURE_NORM_TOL {
                return Err(Error::NotNormalized { norm });
            }
            return Ok(());
        };
        let defect = QOperator::new(self.dims.clone(), m.clone())?.hermiticity_defect();
        if defect > HERMITIAN_TOL.max(1e-10 * m.norm()) {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (deviation {defect:e})"
            )));
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}

/// Truncated coherent state `|α⟩`, renormalized after truncation.
///
/// Accuracy needs roughly `|α|² + 6|α| + 10 <= dim`.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<QState> {
    if dim < 1 {
        return Err(Error::InvalidArgument("dim must be positive".into()));
    }
    let mut v = CVector::zeros(dim);
    let mut amp = c(1.0, 0.0);
    v[0] = amp;
    for n in 1..dim {
        amp = amp * alpha / (n as f64).sqrt();
        v[n] = amp;
    }
    QState::normalized(vec![dim], v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Cat state `N(|α⟩ ± |−α⟩)`; even parity is the logical `|0̄⟩`.
pub fn cat_state(alpha: C64, parity: Parity, dim: usize) -> Result<QState> {
    let plus = coherent_state(alpha, dim)?;
    let minus = coherent_state(-alpha, dim)?;
    let (p, m) = (plus.ket().unwrap(), minus.ket().unwrap());
    let v = match parity {
        Parity::Even => p + m,
        Parity::Odd => p - m,
    };
    if v.norm() < 1e-10 {
        return Err(Error::DegenerateInput(format!(
            "odd cat state with alpha = {alpha} vanishes"
        )));
    }
    QState::normalized(vec![dim], v)
}

/// Kronecker composition; implemented for operators and states so that
/// operators and states can never be mixed in one product.
pub trait Tensor: Sized {
    fn tensor_pair(&self, other: &Self) -> Self;
}

impl Tensor for QOperator {
    fn tensor_pair(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        QOperator {
            dims,
            data: self.data.kronecker(&other.data),
        }
    }
}

impl Tensor for QState {
    fn tensor_pair(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let data = match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) => StateData::Pure(a.kronecker(b)),
            _ => StateData::Mixed(self.density_matrix().kronecker(&other.density_matrix())),
        };
        QState { dims, data }
    }
}

pub fn tensor<T: Tensor + Clone>(parts: &[T]) -> Result<T> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("tensor of an empty list".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, p| acc.tensor_pair(p)))
}

/// Reduced state on the subsystems listed in `keep` (in ascending order).
pub fn partial_trace(rho: &QState, keep: &[usize]) -> Result<QState> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "partial trace needs a non-empty keep set".into(),
        ));
    }
    let dims = rho.dims();
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "keep set {keep:?} out of range for {dims:?}"
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let nk: usize = kept_dims.iter().product();
    let nt: usize = traced.iter().map(|&k| dims[k]).product();

    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    // Full index offset contributed by a multi-index over a subset of subsystems.
    let offsets = |subset: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut flat| {
                let mut off = 0;
                for &k in subset.iter().rev() {
                    off += (flat % dims[k]) * strides[k];
                    flat /= dims[k];
                }
                off
            })
            .collect()
    };
    let keep_off = offsets(&keep, nk);
    let trace_off = offsets(&traced, nt);

    let full = rho.density_matrix();
    let mut out = CMatrix::zeros(nk, nk);
    for (a, &oa) in keep_off.iter().enumerate() {
        for (b, &ob) in keep_off.iter().enumerate() {
            let mut acc = C64::default();
            for &ot in &trace_off {
                acc += full[(oa + ot, ob + ot)];
            }
            out[(a, b)] = acc;
        }
    }
    QState::mixed_unchecked(kept_dims, out)
}

/// `⟨ψ|ρ|ψ⟩` against a pure target (squared-overlap convention).
pub fn state_fidelity(rho: &QState, target: &QState) -> Result<f64> {
    let psi = target
        .ket()
        .ok_or_else(|| Error::InvalidArgument("fidelity target must be a pure state".into()))?;
    if rho.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            rho.dims(),
            target.dims()
        )));
    }
    let f = match rho.ket() {
        Some(phi) => psi.dotc(phi).norm_sqr(),
        None => psi.dotc(&(rho.density_matrix() * psi)).re,
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Photon-number parity expectation `Tr(ρ e^{iπ a†a})` of a single mode.
pub fn parity_expectation(rho: &QState) -> Result<f64> {
    if rho.dims().len() != 1 {
        return Err(Error::InvalidArgument(
            "parity expectation needs a single subsystem".into(),
        ));
    }
    Ok(rho
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum())
}
