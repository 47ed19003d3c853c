//! GRAPE shaping of the two orthogonal two-photon drives `ℰ_p(t)`, `ℰ_p⊥(t)`.
//!
//! Pulses are optimized in the lossless model, where the map is unitary and the
//! gradient is exact, and re-scored under loss with [`evaluate_pulse`].

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catqubit::{cat_basis, kerr_cat_hamiltonian, loss_ops, CatQubitParams, ModeOps};
use crate::dynamics::{evolve, EvolveOptions};
use crate::error::{Error, Result};
use crate::pulse::{PulseSchedule, ADIABATIC_DURATION_FACTOR};
use crate::qcore::{annihilation, state_fidelity, CMatrix, CVector, QState, C64};

/// Default drive time `0.5/K` in units of `1/K`.
pub const DEFAULT_KT: f64 = 0.5;
pub const DEFAULT_SEGMENTS: usize = 64;
/// Default bound on `|ℰ_p|`, `|ℰ_p⊥|` in units of `ℰ_p⁰ = Kα²`.
pub const DEFAULT_BOUND_FACTOR: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct GrapeProblem {
    pub params: CatQubitParams,
    pub initial: QState,
    pub target: QState,
    pub total_time: f64,
    pub n_segments: usize,
    pub amplitude_bound: f64,
    /// Starting pulse, resampled onto `n_segments`.
    pub guess: PulseSchedule,
}

impl GrapeProblem {
    /// Starts from the adiabatic pulse with `1.3τ = total_time`.
    pub fn new(
        params: CatQubitParams,
        initial: QState,
        target: QState,
        total_time: f64,
        n_segments: usize,
        amplitude_bound: f64,
    ) -> Result<Self> {
        params.validate()?;
        if n_segments < 4 || !(total_time > 0.0) || !(amplitude_bound > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "GRAPE needs >= 4 segments, T > 0 and a positive bound (got {n_segments}, {total_time}, {amplitude_bound})"
            )));
        }
        for s in [&initial, &target] {
            if s.ket().is_none() || s.dims() != [params.dim] {
                return Err(Error::InvalidArgument(
                    "GRAPE states must be pure single-cavity kets".into(),
                ));
            }
        }
        let guess = PulseSchedule::adiabatic(params.ep0(), total_time / ADIABATIC_DURATION_FACTOR)?;
        Ok(Self {
            params,
            initial,
            target,
            total_time,
            n_segments,
            amplitude_bound,
            guess,
        })
    }

    /// `|0⟩ → |C_α⁺⟩` in `0.5/K`.
    pub fn drive(params: CatQubitParams) -> Result<Self> {
        let (vac, cat) = vacuum_and_cat(&params)?;
        let bound = DEFAULT_BOUND_FACTOR * params.ep0();
        Self::new(
            params,
            vac,
            cat,
            DEFAULT_KT / params.kerr,
            DEFAULT_SEGMENTS,
            bound,
        )
    }

    /// `|C_α⁺⟩ → |0⟩` in `0.5/K`, starting from the reversed adiabatic pulse.
    pub fn undrive(params: CatQubitParams) -> Result<Self> {
        let (vac, cat) = vacuum_and_cat(&params)?;
        let bound = DEFAULT_BOUND_FACTOR * params.ep0();
        let p = Self::new(
            params,
            cat,
            vac,
            DEFAULT_KT / params.kerr,
            DEFAULT_SEGMENTS,
            bound,
        )?;
        let guess = p.guess.reversed();
        Ok(p.with_guess(guess))
    }

    pub fn with_guess(mut self, guess: PulseSchedule) -> Self {
        self.guess = guess;
        self
    }

    /// The guess as a control vector `[ℰ_p; ℰ_p⊥]`, clipped to the bound.
    pub fn initial_controls(&self) -> Vec<f64> {
        let n = self.n_segments;
        let dt = self.total_time / n as f64;
        let scale = self.guess.duration() / self.total_time;
        let mid = |k: usize| (k as f64 + 0.5) * dt * scale;
        let b = self.amplitude_bound;
        (0..n)
            .map(|k| self.guess.e_p(mid(k)))
            .chain((0..n).map(|k| self.guess.e_p_perp(mid(k))))
            .map(|u| u.clamp(-b, b))
            .collect()
    }

    pub fn schedule(&self, controls: &[f64]) -> Result<PulseSchedule> {
        let n = self.n_segments;
        if controls.len() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "{} controls for {n} segments",
                controls.len()
            )));
        }
        PulseSchedule::uniform(
            self.total_time,
            controls[..n].to_vec(),
            controls[n..].to_vec(),
        )
    }
}

fn vacuum_and_cat(params: &CatQubitParams) -> Result<(QState, QState)> {
    let cat = cat_basis(params.alpha, params.dim)?[0].clone();
    Ok((
        QState::fock(params.dim, 0)?,
        QState::pure(vec![params.dim], cat)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeOptions {
    pub max_iters: usize,
    /// Converged when the fidelity gain over `window` iterations is below this.
    pub convergence_tol: f64,
    pub window: usize,
    /// Extra starts from the guess plus uniform noise of relative size `perturbation`.
    pub restarts: usize,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            convergence_tol: 1e-7,
            window: 10,
            restarts: 0,
            perturbation: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrapeResult {
    pub schedule: PulseSchedule,
    pub controls: Vec<f64>,
    pub fidelity: f64,
    /// Fidelity after each accepted iteration, starting with the initial guess.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Segment {
    vecs: CMatrix,
    phases: Vec<C64>,
    lambdas: Vec<C64>,
}

/// Lossless propagation model for one problem.
struct Model {
    h0: CMatrix,
    controls: [CMatrix; 2],
    psi0: CVector,
    target: CVector,
    dt: f64,
    n: usize,
}

impl Model {
    fn new(p: &GrapeProblem) -> Result<Self> {
        let ops = ModeOps::new(p.params.dim)?;
        Ok(Self {
            h0: (&ops.kerr * -p.params.kerr).into_data(),
            controls: [ops.sq.into_data(), ops.sq_perp.into_data()],
            psi0: p.initial.ket().unwrap().clone(),
            target: p.target.ket().unwrap().clone(),
            dt: p.total_time / p.n_segments as f64,
            n: p.n_segments,
        })
    }

    fn segment(&self, u: &[f64], k: usize) -> Segment {
        let h = &self.h0
            + &self.controls[0] * C64::new(u[k], 0.0)
            + &self.controls[1] * C64::new(u[self.n + k], 0.0);
        let eig = h.symmetric_eigen();
        let lambdas: Vec<C64> = eig
            .eigenvalues
            .iter()
            .map(|&w| C64::new(0.0, -w * self.dt))
            .collect();
        let phases = lambdas.iter().map(|l| l.exp()).collect();
        Segment {
            vecs: eig.eigenvectors,
            phases,
            lambdas,
        }
    }

    fn apply(seg: &Segment, psi: &CVector, adjoint: bool) -> CVector {
        let mut y = seg.vecs.ad_mul(psi);
        for (yi, p) in y.iter_mut().zip(&seg.phases) {
            *yi *= if adjoint { p.conj() } else { *p };
        }
        &seg.vecs * y
    }

    fn overlap(&self, u: &[f64]) -> C64 {
        let mut psi = self.psi0.clone();
        for k in 0..self.n {
            psi = Self::apply(&self.segment(u, k), &psi, false);
        }
        self.target.dotc(&psi)
    }

    fn fidelity(&self, u: &[f64]) -> f64 {
        self.overlap(u).norm_sqr()
    }

    /// Fidelity and its exact gradient. The segment derivative is
    /// `V (Γ ∘ V†(−i dt C)V) V†` with the divided differences
    /// `Γ_ab = (e^{λ_a} − e^{λ_b})/(λ_a − λ_b)`.
    fn fidelity_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let segs: Vec<Segment> = (0..self.n).map(|k| self.segment(u, k)).collect();
        let mut fw = Vec::with_capacity(self.n + 1);
        fw.push(self.psi0.clone());
        for s in &segs {
            let next = Self::apply(s, fw.last().unwrap(), false);
            fw.push(next);
        }
        let mut bw = vec![self.target.clone(); self.n + 1];
        for k in (0..self.n).rev() {
            bw[k] = Self::apply(&segs[k], &bw[k + 1], true);
        }
        let ov = self.target.dotc(&fw[self.n]);
        let mut grad = vec![0.0; 2 * self.n];
        let d = self.h0.nrows();
        let mi_dt = C64::new(0.0, -self.dt);
        for (k, s) in segs.iter().enumerate() {
            let x = s.vecs.ad_mul(&bw[k + 1]);
            let y = s.vecs.ad_mul(&fw[k]);
            let gamma = CMatrix::from_fn(d, d, |a, b| {
                let dl = s.lambdas[a] - s.lambdas[b];
                if dl.norm() > 1e-10 {
                    (s.phases[a] - s.phases[b]) / dl
                } else {
                    (s.phases[a] + s.phases[b]) * 0.5
                }
            });
            for (j, c) in self.controls.iter().enumerate() {
                let ct = s.vecs.ad_mul(&(c * &s.vecs));
                let mut acc = C64::default();
                for b in 0..d {
                    for a in 0..d {
                        acc += x[a].conj() * gamma[(a, b)] * ct[(a, b)] * y[b];
                    }
                }
                grad[j * self.n + k] = 2.0 * (ov.conj() * mi_dt * acc).re;
            }
        }
        (ov.norm_sqr(), grad)
    }
}

/// Lossless fidelity and gradient with respect to the control vector `[ℰ_p; ℰ_p⊥]`.
pub fn fidelity_and_gradient(problem: &GrapeProblem, controls: &[f64]) -> Result<(f64, Vec<f64>)> {
    if controls.len() != 2 * problem.n_segments {
        return Err(Error::DimensionMismatch(format!(
            "{} controls for {} segments",
            controls.len(),
            problem.n_segments
        )));
    }
    Ok(Model::new(problem)?.fidelity_and_gradient(controls))
}

/// Lossless fidelity of a control vector.
pub fn grape_fidelity(problem: &GrapeProblem, controls: &[f64]) -> Result<f64> {
    if controls.len() != 2 * problem.n_segments {
        return Err(Error::DimensionMismatch(format!(
            "{} controls for {} segments",
            controls.len(),
            problem.n_segments
        )));
    }
    Ok(Model::new(problem)?.fidelity(controls))
}

const ARMIJO_C1: f64 = 1e-4;
const LBFGS_MEMORY: usize = 10;

/// Projected L-BFGS ascent with backtracking (Armijo) line search. Controls are
/// scaled by the bound internally, so the feasible set is the unit box.
fn optimize_from(
    model: &Model,
    start: Vec<f64>,
    bound: f64,
    opts: &GrapeOptions,
) -> (Vec<f64>, Vec<f64>, bool) {
    let m = start.len();
    let objective = |x: &DVector<f64>| {
        let u: Vec<f64> = x.iter().map(|v| v * bound).collect();
        let (f, g) = model.fidelity_and_gradient(&u);
        // Minimize 1 − F.
        (
            1.0 - f,
            DVector::from_iterator(m, g.into_iter().map(|v| -v * bound)),
        )
    };
    let project = |x: &mut DVector<f64>| x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));

    let mut x = DVector::from_iterator(m, start.iter().map(|v| v / bound));
    project(&mut x);
    let (mut f, mut g) = objective(&x);
    let mut trace = vec![1.0 - f];
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut converged = false;

    for _ in 0..opts.max_iters {
        if f <= 1e-14 {
            converged = true;
            break;
        }
        // Bound-active coordinates: at the box edge with the descent direction pointing out.
        let active: Vec<bool> = x
            .iter()
            .zip(g.iter())
            .map(|(&xi, &gi)| (xi >= 1.0 && gi < 0.0) || (xi <= -1.0 && gi > 0.0))
            .collect();
        let mut gf = g.clone();
        gf.iter_mut().zip(&active).for_each(|(v, &a)| {
            if a {
                *v = 0.0
            }
        });
        if gf.amax() == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.is_empty();
            let mut d = if use_memory {
                -two_loop(&memory, &gf)
            } else {
                -gf.clone()
            };
            d.iter_mut().zip(&active).for_each(|(v, &a)| {
                if a {
                    *v = 0.0
                }
            });
            if d.dot(&gf) >= 0.0 {
                continue;
            }
            // Steepest-descent steps move at most 0.1 of the box.
            let mut step = if use_memory { 1.0 } else { 0.1 / d.amax() };
            for _ in 0..40 {
                let mut xn = &x + &d * step;
                project(&mut xn);
                let dx = &xn - &x;
                if dx.amax() == 0.0 {
                    break;
                }
                let (fn_, gn) = objective(&xn);
                if fn_ <= f + ARMIJO_C1 * g.dot(&dx) {
                    accepted = Some((xn, fn_, gn, dx));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            memory.clear();
        }
        let Some((xn, fn_, gn, dx)) = accepted else {
            converged = true;
            break;
        };
        let dg = &gn - &g;
        let sy = dx.dot(&dg);
        if sy > 1e-12 * dx.norm() * dg.norm() {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((dx, dg, 1.0 / sy));
        }
        x = xn;
        f = fn_;
        g = gn;
        trace.push(1.0 - f);
        let n = trace.len();
        if n > opts.window && trace[n - 1] - trace[n - 1 - opts.window] < opts.convergence_tol {
            converged = true;
            break;
        }
    }
    (x.iter().map(|v| v * bound).collect(), trace, converged)
}

fn two_loop(
    memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    g: &DVector<f64>,
) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push(a);
    }
    let (s, y, _) = memory.back().unwrap();
    q *= s.dot(y) / y.dot(y);
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    q
}

/// Maximizes the lossless transfer fidelity. Returns the best iterate over all
/// starts; `converged` is false when the best start ran out of iterations.
pub fn grape_optimize(problem: &GrapeProblem, opts: &GrapeOptions) -> Result<GrapeResult> {
    let model = Model::new(problem)?;
    let guess = problem.initial_controls();
    let bound = problem.amplitude_bound;
    let starts: Vec<Vec<f64>> = (0..=opts.restarts)
        .map(|r| {
            if r == 0 {
                return guess.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            guess
                .iter()
                .map(|u| {
                    (u + opts.perturbation * bound * rng.random_range(-1.0..1.0))
                        .clamp(-bound, bound)
                })
                .collect()
        })
        .collect();
    let runs: Vec<_> = starts
        .into_par_iter()
        .map(|s| optimize_from(&model, s, bound, opts))
        .collect();
    let (controls, trace, converged) = runs
        .into_iter()
        .reduce(|best, r| if r.1.last() > best.1.last() { r } else { best })
        .expect("at least one start");
    Ok(GrapeResult {
        schedule: problem.schedule(&controls)?,
        fidelity: *trace.last().unwrap(),
        iterations: trace.len() - 1,
        trace,
        controls,
        converged,
    })
}

/// Fidelity of `schedule` applied to the problem's initial state with
/// single-photon loss at rate `kappa`.
pub fn evaluate_pulse(problem: &GrapeProblem, schedule: &PulseSchedule, kappa: f64) -> Result<f64> {
    let params = problem.params.with_kappa(kappa);
    params.validate()?;
    let h = kerr_cat_hamiltonian(&params, schedule)?;
    let a = annihilation(params.dim)?;
    let opts = EvolveOptions::default()
        .rel_tol(1e-10)
        .abs_tol(1e-12)
        .final_only();
    let traj = evolve(&h, &loss_ops(&params, &a)?, &problem.initial, &opts)?;
    state_fidelity(&traj.final_state, &problem.target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CatQubitParams {
        CatQubitParams::new(1.0, 0.0, 2f64.sqrt(), 30).unwrap()
    }

    #[test]
    fn trivial_problem_is_solved_at_start() {
        let p = params();
        let vac = QState::fock(30, 0).unwrap();
        let zero = PulseSchedule::uniform(0.5, vec![0.0; 8], vec![0.0; 8]).unwrap();
        let prob = GrapeProblem::new(p, vac.clone(), vac, 0.5, 8, 10.0)
            .unwrap()
            .with_guess(zero);
        let r = grape_optimize(&prob, &GrapeOptions::default()).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
        assert!((evaluate_pulse(&prob, &r.schedule, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = params().with_dim(16);
        let prob = GrapeProblem::drive(p).unwrap();
        let prob = GrapeProblem {
            n_segments: 8,
            ..prob
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = prob
            .initial_controls()
            .iter()
            .map(|v| v + rng.random_range(-0.5..0.5))
            .collect();
        let (_, g) = fidelity_and_gradient(&prob, &u).unwrap();
        let h = 1e-5;
        for k in [0, 3, 7, 9, 14] {
            let mut up = u.clone();
            up[k] += h;
            let mut dn = u.clone();
            dn[k] -= h;
            let fd = (grape_fidelity(&prob, &up).unwrap() - grape_fidelity(&prob, &dn).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-3),
                "k={k}: {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let p = params();
        let vac = QState::fock(30, 0).unwrap();
        assert!(GrapeProblem::new(p, vac.clone(), vac.clone(), 0.5, 3, 1.0).is_err());
        assert!(GrapeProblem::new(p, vac.clone(), vac.clone(), 0.0, 8, 1.0).is_err());
        assert!(GrapeProblem::new(p, vac.clone(), vac.clone(), 0.5, 8, 0.0).is_err());
        assert!(GrapeProblem::new(p, vac.to_mixed(), vac, 0.5, 8, 1.0).is_err());
    }

    #[test]
    fn drive_reaches_target_and_respects_bound() {
        let prob = GrapeProblem::drive(params()).unwrap();
        let r = grape_optimize(&prob, &GrapeOptions::default()).unwrap();
        assert!(r.fidelity >= 0.999, "{}", r.fidelity);
        assert!(r.controls.iter().all(|u| u.abs() <= prob.amplitude_bound));
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        let lossless = evaluate_pulse(&prob, &r.schedule, 0.0).unwrap();
        assert!(
            (lossless - r.fidelity).abs() < 1e-6,
            "{lossless} vs {}",
            r.fidelity
        );
        let lossy = evaluate_pulse(&prob, &r.schedule, 1e-3).unwrap();
        let lossier = evaluate_pulse(&prob, &r.schedule, 1e-2).unwrap();
        assert!(lossless > lossy && lossy > lossier);
    }
}
