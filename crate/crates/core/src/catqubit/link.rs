//! Two-round single-photon heralding between two stationary qubits.
//!
//! Each node holds a logical qubit (`a`, `c`) that emits into a flying Fock
//! mode (`b`, `d`, truncated at 3 levels) with `|x⟩|0⟩ → |x⟩|x⟩`. The flying
//! modes pass a lossy channel, meet on a balanced beamsplitter and are
//! detected. A herald of exactly one click projects the qubits onto an odd
//! Bell state up to `|1̄1̄⟩` contamination; flipping both qubits and repeating
//! removes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    partial_trace, state_fidelity, tensor, CMatrix, CVector, QOperator, QState, C64,
};

const PHOTON_DIM: usize = 3;
// Subsystem order: a, b, c, d.
const DIMS: [usize; 4] = [2, PHOTON_DIM, 2, PHOTON_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    NumberResolving,
    Threshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkProtocol {
    /// Loss probability per arm, including detector inefficiency.
    pub loss_per_arm: [f64; 2],
    pub detectors: DetectorKind,
    /// Run the second (flip and repeat) round.
    pub two_step: bool,
    /// Optical phase picked up in arm `b`, the same in both rounds.
    pub arm_phase: f64,
}

impl LinkProtocol {
    pub fn new(loss: f64, detectors: DetectorKind) -> Self {
        Self {
            loss_per_arm: [loss, loss],
            detectors,
            two_step: true,
            arm_phase: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeraldedOutcome {
    /// Detector index (0 or 1) that clicked in each round.
    pub clicks: Vec<usize>,
    pub probability: f64,
    /// Normalized state of the two stationary qubits.
    pub state: QState,
    /// Odd Bell state `(|1̄0̄⟩ + s|0̄1̄⟩)/√2` expected for this click pattern.
    pub target: QState,
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct LinkProtocolResult {
    pub outcomes: Vec<HeraldedOutcome>,
    /// Total heralding probability over all accepted click patterns.
    pub success_probability: f64,
    /// Probability-weighted fidelity of the heralded states.
    pub fidelity: f64,
}

fn op(dim: usize, f: impl Fn(usize, usize) -> C64) -> QOperator {
    QOperator::new(vec![dim], CMatrix::from_fn(dim, dim, f)).expect("square by construction")
}

fn identity(dim: usize) -> QOperator {
    QOperator::identity(&[dim]).expect("positive dim")
}

fn full(parts: [QOperator; 4]) -> CMatrix {
    tensor(&parts).expect("non-empty").into_data()
}

/// Emission `|x⟩_q|0⟩_m → |x⟩_q|x⟩_m` on a fresh (vacuum) flying mode,
/// written as the isometry restricted to the vacuum input.
fn emission() -> CMatrix {
    // On qubit ⊗ photon (dim 6): swaps |1,0⟩ ↔ |1,1⟩ and fixes the rest.
    let mut u = CMatrix::identity(2 * PHOTON_DIM, 2 * PHOTON_DIM);
    let (i10, i11) = (PHOTON_DIM, PHOTON_DIM + 1);
    u[(i10, i10)] = C64::default();
    u[(i11, i11)] = C64::default();
    u[(i10, i11)] = C64::new(1.0, 0.0);
    u[(i11, i10)] = C64::new(1.0, 0.0);
    u
}

/// Amplitude-damping Kraus operators with transmittance `t`.
fn loss_kraus(t: f64) -> Vec<QOperator> {
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    (0..PHOTON_DIM)
        .map(|k| {
            op(PHOTON_DIM, |r, c| {
                if c >= k && r == c - k {
                    C64::new(
                        (binom(c, k) * t.powi((c - k) as i32) * (1.0 - t).powi(k as i32)).sqrt(),
                        0.0,
                    )
                } else {
                    C64::default()
                }
            })
        })
        .collect()
}

/// Balanced beamsplitter `exp(π/4 (b†d − b d†))` on the full space. The
/// generator conserves photon number, so the truncation is exact for up to
/// two photons in total.
fn beamsplitter() -> CMatrix {
    let b = op(PHOTON_DIM, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::default()
        }
    });
    let bd = b.dagger();
    let i2 = identity(2);
    let ip = identity(PHOTON_DIM);
    let bf = full([i2.clone(), b.clone(), i2.clone(), ip.clone()]);
    let bdf = full([i2.clone(), bd.clone(), i2.clone(), ip.clone()]);
    let df = full([i2.clone(), ip.clone(), i2.clone(), b]);
    let ddf = full([i2.clone(), ip, i2, bd]);
    let gen = (&bdf * &df - &bf * &ddf) * C64::new(std::f64::consts::FRAC_PI_4, 0.0);
    gen.exp()
}

/// Projector onto "detector `which` clicks, the other does not".
fn herald_projector(kind: DetectorKind, which: usize) -> CMatrix {
    let click = |n: usize| match kind {
        DetectorKind::NumberResolving => n == 1,
        DetectorKind::Threshold => n >= 1,
    };
    let proj = |pred: &dyn Fn(usize) -> bool| {
        op(PHOTON_DIM, |r, c| {
            if r == c && pred(r) {
                C64::new(1.0, 0.0)
            } else {
                C64::default()
            }
        })
    };
    let on = proj(&click);
    let off = proj(&|n| n == 0);
    let (pb, pd) = if which == 0 { (on, off) } else { (off, on) };
    let i2 = identity(2);
    full([i2.clone(), pb, i2, pd])
}

/// One emission–transmission–detection round on the stationary-qubit state
/// `rho_q` (dims `[2, 2]`). Returns the unnormalized post-click qubit states
/// for both detectors.
fn round(rho_q: &CMatrix, proto: &LinkProtocol) -> Result<[CMatrix; 2]> {
    // Attach vacuum flying modes: (a, c) ⊗ |0⟩_b|0⟩_d in the order (a, b, c, d).
    let idx = |a: usize, c: usize| (a * PHOTON_DIM * 2 + c) * PHOTON_DIM;
    let mut rho = CMatrix::zeros(36, 36);
    for q1 in 0..4 {
        for q2 in 0..4 {
            rho[(idx(q1 / 2, q1 % 2), idx(q2 / 2, q2 % 2))] = rho_q[(q1, q2)];
        }
    }
    // Emission at both nodes.
    let e = emission();
    let e_ab = reorder_node(&e, 0);
    let e_cd = reorder_node(&e, 1);
    let u = &e_cd * &e_ab;
    rho = &u * rho * u.adjoint();
    // Arm phase on b.
    if proto.arm_phase != 0.0 {
        let ph = op(PHOTON_DIM, |r, c| {
            if r == c {
                C64::from_polar(1.0, proto.arm_phase * r as f64)
            } else {
                C64::default()
            }
        });
        let i2 = identity(2);
        let p = full([i2.clone(), ph, i2, identity(PHOTON_DIM)]);
        rho = &p * rho * p.adjoint();
    }
    // Loss on each arm.
    for (arm, &loss) in proto.loss_per_arm.iter().enumerate() {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidArgument(format!(
                "loss per arm must be in [0, 1], got {loss}"
            )));
        }
        let mut next = CMatrix::zeros(36, 36);
        for k in loss_kraus(1.0 - loss) {
            let i2 = identity(2);
            let ip = identity(PHOTON_DIM);
            let kf = if arm == 0 {
                full([i2.clone(), k, i2, ip])
            } else {
                full([i2.clone(), ip, i2, k])
            };
            next += &kf * &rho * kf.adjoint();
        }
        rho = next;
    }
    let bs = beamsplitter();
    rho = &bs * rho * bs.adjoint();
    let mut out = [CMatrix::zeros(4, 4), CMatrix::zeros(4, 4)];
    for (which, slot) in out.iter_mut().enumerate() {
        let p = herald_projector(proto.detectors, which);
        let post = &p * &rho * &p;
        let st = QState::mixed_unchecked(DIMS.to_vec(), post)?;
        *slot = partial_trace(&st, &[0, 2])?.density_matrix();
    }
    Ok(out)
}

/// Lifts a qubit⊗photon operator on node 0 (`a, b`) or node 1 (`c, d`) to the
/// full four-mode space.
fn reorder_node(e: &CMatrix, node: usize) -> CMatrix {
    let n = 2 * PHOTON_DIM;
    let mut out = CMatrix::zeros(36, 36);
    for r in 0..n {
        for c in 0..n {
            let v = e[(r, c)];
            if v == C64::default() {
                continue;
            }
            for o in 0..n {
                let (ri, ci) = if node == 0 {
                    (r * n + o, c * n + o)
                } else {
                    (o * n + r, o * n + c)
                };
                out[(ri, ci)] += v;
            }
        }
    }
    out
}

fn bell(sign: f64) -> QState {
    // (|10⟩ + s|01⟩)/√2 in the order (a, c).
    let mut v = CVector::zeros(4);
    v[2] = C64::new(1.0, 0.0);
    v[1] = C64::new(sign, 0.0);
    QState::normalized(vec![2, 2], v).expect("non-zero")
}

/// Sign of the heralded odd Bell state for a click on `detector` in one
/// round with this beamsplitter convention.
fn click_sign(detector: usize) -> f64 {
    if detector == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Runs the heralding protocol with ideal logical operations and exact
/// photonics, starting from `|+⟩|+⟩` on the stationary qubits.
pub fn simulate_link_protocol(proto: &LinkProtocol) -> Result<LinkProtocolResult> {
    let plus = CVector::from_element(4, C64::new(0.5, 0.0));
    let rho0 = &plus * plus.adjoint();
    let first = round(&rho0, proto)?;
    let mut branches: Vec<(Vec<usize>, CMatrix)> = Vec::new();
    for (i, r1) in first.into_iter().enumerate() {
        if !proto.two_step {
            branches.push((vec![i], r1));
            continue;
        }
        let x = flip_both_qubits();
        let flipped = &x * r1 * x.adjoint();
        for (j, r2) in round(&flipped, proto)?.into_iter().enumerate() {
            branches.push((vec![i, j], r2));
        }
    }
    let mut outcomes = Vec::new();
    for (clicks, rho) in branches {
        let p = rho.trace().re;
        if p <= 1e-15 {
            continue;
        }
        let state = QState::mixed_unchecked(vec![2, 2], rho / C64::new(p, 0.0))?;
        let sign: f64 = clicks.iter().map(|&c| click_sign(c)).product();
        let target = bell(sign);
        let fidelity = state_fidelity(&state, &target)?;
        outcomes.push(HeraldedOutcome {
            clicks,
            probability: p,
            state,
            target,
            fidelity,
        });
    }
    let success: f64 = outcomes.iter().map(|o| o.probability).sum();
    let fidelity = if success > 0.0 {
        outcomes
            .iter()
            .map(|o| o.probability * o.fidelity)
            .sum::<f64>()
            / success
    } else {
        0.0
    };
    Ok(LinkProtocolResult {
        outcomes,
        success_probability: success,
        fidelity,
    })
}

fn flip_both_qubits() -> CMatrix {
    let x = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::default(),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::default(),
        ],
    );
    x.kronecker(&x)
}
