//! Lindblad master-equation evolution and decay fitting.
//!
//! The right-hand side is evaluated in matrix form,
//! `dρ/dt = B + B† + Σ κ_j L_j ρ L_j†` with `B = −i H_eff ρ` and
//! `H_eff = H − (i/2) Σ κ_j L_j† L_j`, which is the column-stacked Liouvillian
//! applied without materializing it. [`liouvillian`] builds the dense
//! superoperator for cross-checks.

mod fit;
mod rk;
mod sparse;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

pub use fit::{fit_exponential_decay, DecayFit};

use crate::error::{Error, Result};
use crate::qcore::{CMatrix, QOperator, QState, C64, HERMITIAN_TOL};
use rk::{Stepper, Tolerances};
use sparse::{Pattern, Triplets};

/// Piecewise-constant amplitude on `edges[k]..edges[k+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstant {
    edges: Vec<f64>,
    values: Vec<C64>,
}

impl PiecewiseConstant {
    pub fn new(edges: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if values.is_empty() || edges.len() != values.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} edges for {} segments",
                edges.len(),
                values.len()
            )));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("segment edges must increase".into()));
        }
        Ok(Self { edges, values })
    }

    /// Equal-width segments on `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, values: Vec<C64>) -> Result<Self> {
        let n = values.len();
        let edges = (0..=n)
            .map(|k| t0 + (t1 - t0) * k as f64 / n as f64)
            .collect();
        Self::new(edges, values)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Value at `t`; the right-continuous convention is used at interior edges,
    /// and times outside the edges clamp to the end segments.
    pub fn at(&self, t: f64) -> C64 {
        let k = self.edges[1..self.edges.len() - 1].partition_point(|&e| e <= t);
        self.values[k]
    }

    /// Value on the segment containing the midpoint of `[t0, t1]`.
    pub(crate) fn at_mid(&self, t0: f64, t1: f64) -> C64 {
        self.at(0.5 * (t0 + t1))
    }
}

/// Scalar time dependence of one drive term.
#[derive(Clone)]
pub enum Coefficient {
    Constant(C64),
    Function(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
    Piecewise(PiecewiseConstant),
}

impl Coefficient {
    pub fn real(x: f64) -> Self {
        Self::Constant(C64::new(x, 0.0))
    }

    pub fn function(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> C64 {
        match self {
            Self::Constant(c) => *c,
            Self::Function(f) => f(t),
            Self::Piecewise(p) => p.at(t),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            Self::Piecewise(p) => p.edges(),
            _ => &[],
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Function(_) => write!(f, "Function(..)"),
            Self::Piecewise(p) => write!(f, "Piecewise({} segments)", p.values.len()),
        }
    }
}

/// `H(t) = H_0 + Σ_k c_k(t) O_k` on `t_span`.
///
/// The caller is responsible for `Σ c_k(t) O_k` being Hermitian (real
/// coefficients on Hermitian operators, or conjugate pairs).
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    static_part: QOperator,
    drive_terms: Vec<(QOperator, Coefficient)>,
    t_span: (f64, f64),
}

impl TimeDependentHamiltonian {
    pub fn new(static_part: QOperator, t_span: (f64, f64)) -> Result<Self> {
        static_part.assert_hermitian(HERMITIAN_TOL * static_part.data().norm().max(1.0))?;
        if !(t_span.1 >= t_span.0) || !t_span.0.is_finite() || !t_span.1.is_finite() {
            return Err(Error::InvalidArgument(format!("bad time span {t_span:?}")));
        }
        Ok(Self {
            static_part,
            drive_terms: Vec::new(),
            t_span,
        })
    }

    pub fn with_drive(mut self, op: QOperator, coefficient: Coefficient) -> Result<Self> {
        if op.dims() != self.static_part.dims() {
            return Err(Error::DimensionMismatch(format!(
                "drive {:?} vs static {:?}",
                op.dims(),
                self.static_part.dims()
            )));
        }
        self.drive_terms.push((op, coefficient));
        Ok(self)
    }

    pub fn static_part(&self) -> &QOperator {
        &self.static_part
    }

    pub fn drive_terms(&self) -> &[(QOperator, Coefficient)] {
        &self.drive_terms
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    pub fn dims(&self) -> &[usize] {
        self.static_part.dims()
    }

    /// Dense `H(t)`.
    pub fn at(&self, t: f64) -> CMatrix {
        let mut h = self.static_part.data().clone();
        for (op, c) in &self.drive_terms {
            h += op.data() * c.at(t);
        }
        h
    }
}

/// Collapse operator `L` with rate `κ` (the dissipator uses `√κ L`). Stored
/// as its nonzero entries.
#[derive(Clone, Debug)]
pub struct CollapseOp {
    dims: Vec<usize>,
    entries: Vec<(usize, usize, C64)>,
    pub rate: f64,
}

impl CollapseOp {
    pub fn new(op: QOperator, rate: f64) -> Result<Self> {
        let entries = Triplets::from_dense(op.data(), 1.0).entries;
        Self::sparse(op.dims().to_vec(), entries, rate)
    }

    /// `L = Σ v |i⟩⟨j|` from `(i, j, v)` triplets; repeated positions add.
    pub fn sparse(dims: Vec<usize>, entries: Vec<(usize, usize, C64)>, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "collapse rate must be >= 0, got {rate}"
            )));
        }
        let n: usize = dims.iter().product();
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({i}, {j}) outside dimension {n}"
            )));
        }
        Ok(Self {
            dims,
            entries,
            rate,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dims.iter().product();
        let mut m = CMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    fn norm_squared(&self) -> f64 {
        self.to_triplets(1.0)
            .entries
            .iter()
            .map(|e| e.2.norm_sqr())
            .sum()
    }

    fn to_triplets(&self, scale: f64) -> Triplets {
        // Merge repeated positions so the jump term sees each entry once.
        let mut merged: std::collections::BTreeMap<(usize, usize), C64> = Default::default();
        for &(i, j, v) in &self.entries {
            *merged.entry((j, i)).or_default() += v;
        }
        Triplets {
            entries: merged
                .into_iter()
                .filter(|(_, v)| *v != C64::default())
                .map(|((j, i), v)| (i, j, v * scale))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Uniformly spaced output samples including both ends (≥ 2).
    pub n_samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Named Hermitian observables recorded at each sample.
    pub observables: Vec<(String, QOperator)>,
    /// Keep every sampled state; otherwise only the final one.
    pub store_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            n_samples: 2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 20_000_000,
            observables: Vec::new(),
            store_states: true,
        }
    }
}

impl EvolveOptions {
    pub fn samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn observe(mut self, name: impl Into<String>, op: QOperator) -> Self {
        self.observables.push((name.into(), op));
        self
    }

    pub fn final_only(mut self) -> Self {
        self.store_states = false;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Sampled states; empty unless `store_states` was set.
    pub states: Vec<QState>,
    pub final_state: QState,
    /// Real parts of the requested observables, one series per name.
    pub expectations: Vec<(String, Vec<f64>)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn expectation(&self, name: &str) -> Option<&[f64]> {
        self.expectations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// CSV with a `time` column followed by one column per observable.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.expectations.iter().map(|(n, _)| n.clone()));
        wr.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.expectations.iter().map(|(_, v)| format!("{:e}", v[k])));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pre-compressed right-hand side.
struct Rhs {
    pattern: Pattern,
    base: Vec<C64>,
    drives: Vec<(Vec<C64>, Coefficient)>,
    jumps: Vec<Triplets>,
    vals: Vec<C64>,
    b: CMatrix,
}

impl Rhs {
    fn new(h: &TimeDependentHamiltonian, collapse: &[CollapseOp]) -> Result<Self> {
        let n = h.static_part.dim();
        let mut anti = CMatrix::zeros(n, n);
        let mut jumps = Vec::new();
        for c in collapse {
            if c.dims() != h.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "collapse {:?} vs Hamiltonian {:?}",
                    c.dims(),
                    h.dims()
                )));
            }
            if c.rate == 0.0 {
                continue;
            }
            let l = c.to_triplets(c.rate.sqrt());
            // Σ κ L†L accumulated from the triplets: (L†L)_{kl} = Σ_i conj(L_ik) L_il.
            let mut by_row: std::collections::BTreeMap<usize, Vec<(usize, C64)>> =
                Default::default();
            for &(i, k, v) in &l.entries {
                by_row.entry(i).or_default().push((k, v));
            }
            for row in by_row.values() {
                for &(k, vk) in row {
                    for &(m, vm) in row {
                        anti[(k, m)] += vk.conj() * vm;
                    }
                }
            }
            jumps.push(l);
        }
        let mut heff = h.static_part.data().clone();
        heff -= anti * C64::new(0.0, 0.5);
        let mut mats: Vec<&CMatrix> = vec![&heff];
        mats.extend(h.drive_terms.iter().map(|(op, _)| op.data()));
        let pattern = Pattern::union(n, &mats);
        let base = pattern.gather(&heff);
        let drives = h
            .drive_terms
            .iter()
            .map(|(op, c)| (pattern.gather(op.data()), c.clone()))
            .collect();
        let vals = base.clone();
        Ok(Self {
            pattern,
            base,
            drives,
            jumps,
            vals,
            b: CMatrix::zeros(n, n),
        })
    }

    /// `window` is the integration interval containing `t`; piecewise
    /// coefficients take their value on it, so stages at a segment edge do
    /// not pick up the neighbouring segment.
    fn eval(&mut self, t: f64, window: (f64, f64), rho: &CMatrix, out: &mut CMatrix) {
        self.vals.copy_from_slice(&self.base);
        for (dv, c) in &self.drives {
            let a = match c {
                Coefficient::Piecewise(p) => p.at_mid(window.0, window.1),
                _ => c.at(t),
            };
            if a != C64::default() {
                for (v, d) in self.vals.iter_mut().zip(dv) {
                    *v += a * d;
                }
            }
        }
        // B = -i H_eff ρ
        self.pattern.mul_dense(&self.vals, rho, &mut self.b);
        let n = rho.nrows();
        let mi = C64::new(0.0, -1.0);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = mi * self.b[(i, j)] + (mi * self.b[(j, i)]).conj();
            }
        }
        for l in &self.jumps {
            l.sandwich_add(rho, out);
        }
    }
}

/// Integrates the Lindblad equation over the Hamiltonian's time span.
///
/// Piecewise-constant coefficients are integrated segment by segment, so the
/// adaptive stepper never straddles a discontinuity.
pub fn evolve(
    h: &TimeDependentHamiltonian,
    collapse: &[CollapseOp],
    rho0: &QState,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if rho0.dims() != h.dims() {
        return Err(Error::DimensionMismatch(format!(
            "state {:?} vs Hamiltonian {:?}",
            rho0.dims(),
            h.dims()
        )));
    }
    if opts.n_samples < 2 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 2".into(),
        ));
    }
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    for (name, op) in &opts.observables {
        if op.dims() != h.dims() {
            return Err(Error::DimensionMismatch(format!(
                "observable `{name}` has dims {:?}",
                op.dims()
            )));
        }
    }
    let (t0, t1) = h.t_span;
    let dims = h.dims().to_vec();
    let n = h.static_part.dim();
    let mut rhs = Rhs::new(h, collapse)?;
    let window = std::cell::Cell::new((t0, t1));
    let mut f = |t: f64, y: &CMatrix, out: &mut CMatrix| rhs.eval(t, window.get(), y, out);

    let samples: Vec<f64> = (0..opts.n_samples)
        .map(|k| {
            if k + 1 == opts.n_samples {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / (opts.n_samples - 1) as f64
            }
        })
        .collect();
    let mut breaks: Vec<f64> = h
        .drive_terms
        .iter()
        .flat_map(|(_, c)| c.breakpoints().iter().copied())
        .filter(|&b| b > t0 && b < t1)
        .collect();
    breaks.sort_by(f64::total_cmp);

    let tol = Tolerances {
        rel: opts.rel_tol,
        abs: opts.abs_tol,
        max_steps: opts.max_steps,
    };
    let mut stepper = Stepper::new(n);
    let mut y = rho0.density_matrix();
    let mut t = t0;
    let mut states = Vec::new();
    let mut expectations: Vec<(String, Vec<f64>)> = opts
        .observables
        .iter()
        .map(|(name, _)| (name.clone(), Vec::with_capacity(samples.len())))
        .collect();
    let mut bi = 0;
    for &ts in &samples {
        while bi < breaks.len() && breaks[bi] < ts {
            if breaks[bi] > t {
                window.set((t, breaks[bi]));
                stepper.integrate(&mut f, &mut y, t, breaks[bi], tol)?;
                t = breaks[bi];
            }
            bi += 1;
        }
        if ts > t {
            window.set((t, ts));
            stepper.integrate(&mut f, &mut y, t, ts, tol)?;
            t = ts;
        }
        for ((_, op), (_, series)) in opts.observables.iter().zip(expectations.iter_mut()) {
            series.push((op.data() * &y).trace().re);
        }
        if opts.store_states {
            states.push(QState::mixed_unchecked(dims.clone(), y.clone())?);
        }
    }
    let final_state = QState::mixed_unchecked(dims, y)?;
    Ok(Trajectory {
        times: samples,
        states,
        final_state,
        expectations,
        accepted_steps: stepper.accepted,
        rejected_steps: stepper.rejected,
    })
}

/// Options for [`evolve_constant`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantOptions {
    /// Truncation threshold on the Chebyshev coefficients.
    pub tol: f64,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        Self { tol: 1e-14 }
    }
}

/// Evolves a time-independent Lindblad problem for time `t` by a Chebyshev
/// expansion of `e^{t𝓛}`.
///
/// The Liouvillian spectrum lies close to `i[−R, R]` with `R` the spread of the
/// Hamiltonian's eigenvalues, so `e^{t𝓛} = Σ_k c_k T_k(𝓛/(iR))` with
/// `c_0 = J_0(Rt)`, `c_k = 2 i^k J_k(Rt)`. The cost is about `Rt` applications
/// of the right-hand side, independent of the accuracy-driven step size an
/// explicit Runge–Kutta scheme needs for oscillatory problems. Damping must be
/// weak compared with `R` (it shifts the spectrum off the imaginary axis).
pub fn evolve_constant(
    h: &QOperator,
    collapse: &[CollapseOp],
    rho0: &QState,
    t: f64,
    opts: &ConstantOptions,
) -> Result<QState> {
    if rho0.dims() != h.dims() {
        return Err(Error::DimensionMismatch(format!(
            "state {:?} vs Hamiltonian {:?}",
            rho0.dims(),
            h.dims()
        )));
    }
    if !(t >= 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "time must be >= 0 and tol > 0".into(),
        ));
    }
    let td = TimeDependentHamiltonian::new(h.clone(), (0.0, t))?;
    let mut rhs = Rhs::new(&td, collapse)?;
    let y0 = rho0.density_matrix();
    let damping: f64 = collapse.iter().map(|c| c.rate * c.norm_squared()).sum();
    let eig = h.data().clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &e| {
            (l.min(e), u.max(e))
        });
    let radius = (hi - lo) * 1.01 + 1e-3 * (hi - lo).max(1.0) + damping;
    let theta = radius * t;
    if theta == 0.0 {
        return QState::mixed_unchecked(rho0.dims().to_vec(), y0);
    }
    let bessel = bessel_j_sequence(theta, opts.tol);
    let n = h.dim();
    // With S = 𝓛/(iR), the iterates H_k = i^k T_k(S)ρ are Hermitian and obey
    // H_{k+1} = (2/R) 𝓛 H_k + H_{k−1}, so e^{t𝓛}ρ = J_0 H_0 + 2 Σ J_k H_k.
    let mut acc = &y0 * C64::new(bessel[0], 0.0);
    let mut prev = y0;
    let mut cur = CMatrix::zeros(n, n);
    rhs.eval(0.0, (0.0, t), &prev, &mut cur);
    cur /= C64::new(radius, 0.0);
    acc += &cur * C64::new(2.0 * bessel[1], 0.0);
    let mut next = CMatrix::zeros(n, n);
    let two_over_r = C64::new(2.0 / radius, 0.0);
    for &jk in &bessel[2..] {
        rhs.eval(0.0, (0.0, t), &cur, &mut next);
        next *= two_over_r;
        next += &prev;
        acc += &next * C64::new(2.0 * jk, 0.0);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    QState::mixed_unchecked(rho0.dims().to_vec(), acc)
}

/// `J_0(x) … J_K(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`. `K` is chosen so that the tail is below `tol`.
pub(crate) fn bessel_j_sequence(x: f64, tol: f64) -> Vec<f64> {
    // Past k ≈ x the terms decay super-exponentially; this margin reaches `tol`
    // for tol ≥ 1e-16.
    let kmax = (x + 12.0 * x.cbrt() + 8.0 * (-tol.log10()).max(1.0)).ceil() as usize + 2;
    let start = kmax + 20 + (kmax % 2);
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    let mut out: Vec<f64> = j[..=kmax].iter().map(|v| v / norm).collect();
    while out.len() > 2 && out.last().unwrap().abs() < tol * 1e-3 {
        out.pop();
    }
    out
}

/// Dense column-stacking Liouvillian of a time-independent problem:
/// `vec(dρ/dt) = 𝓛 vec(ρ)` with `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
pub fn liouvillian(h: &QOperator, collapse: &[CollapseOp]) -> Result<CMatrix> {
    let n = h.dim();
    let id = CMatrix::identity(n, n);
    let mi = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(h.data()) - h.data().transpose().kronecker(&id)) * mi;
    for c in collapse {
        if c.dims() != h.dims() {
            return Err(Error::DimensionMismatch("collapse operator dims".into()));
        }
        let a = &c.to_dense();
        let ada = a.adjoint() * a;
        let term = a.conjugate().kronecker(a)
            - id.kronecker(&ada) * C64::new(0.5, 0.0)
            - ada.transpose().kronecker(&id) * C64::new(0.5, 0.0);
        l += term * C64::new(c.rate, 0.0);
    }
    Ok(l)
}
