use std::f64::consts::{FRAC_PI_2, PI};

use super::*;
use crate::dynamics::{evolve_constant, ConstantOptions};
use crate::qcore::{parity_expectation, tensor};
use approx::assert_abs_diff_eq;

fn params(kappa_ratio: Option<f64>) -> CatQubitParams {
    let kappa = kappa_ratio.map_or(0.0, |r| 1.0 / r);
    CatQubitParams::new(1.0, kappa, 2f64.sqrt(), 20).unwrap()
}

fn small_two_mode() -> TwoModeOptions {
    TwoModeOptions { dim: 12 }
}

fn phase_invariant_overlap(u: &CMatrix, v: &CMatrix) -> f64 {
    (u.adjoint() * v).trace().norm() / u.nrows() as f64
}

#[test]
fn cnot_sequence_algebra_is_exact() {
    let u = twomode::sequence_unitary();
    assert_abs_diff_eq!(
        phase_invariant_overlap(&u, &ideal_cnot()),
        1.0,
        epsilon = 1e-12
    );
}

#[test]
fn gate_time_arithmetic() {
    let p = params(None);
    let e_x = p.ep0() / 10.0;
    assert_abs_diff_eq!(x_gate_time(p.alpha, FRAC_PI_2, e_x), 1.3884, epsilon = 1e-4);
    assert_abs_diff_eq!(
        x_gate_time(p.alpha, FRAC_PI_2, e_x),
        PI / (8.0 * p.alpha * e_x),
        epsilon = 1e-15
    );
    let e_c = p.ep0() / 15.0;
    assert_abs_diff_eq!(g_gate_time(p.alpha, FRAC_PI_2, e_c), 1.4726, epsilon = 1e-4);
    assert_abs_diff_eq!(z_gate_time(2.0, FRAC_PI_2), PI / 4.0, epsilon = 1e-15);
    assert_abs_diff_eq!(z_gate_time(1.0, -FRAC_PI_2), 1.5 * PI, epsilon = 1e-15);
    assert_abs_diff_eq!(p.ep0(), 2.0, epsilon = 1e-14);
}

#[test]
fn zero_angle_gates_are_identity() {
    let p = params(Some(1e3));
    let x = gate_x(&p, 0.0, 0.2).unwrap();
    assert_eq!(x.duration, 0.0);
    assert!(x.fidelities.iter().all(|f| (f - 1.0).abs() < 1e-12));
    let z = gate_z(&p, 0.0).unwrap();
    assert!((z.fidelity - 1.0).abs() < 1e-12);
    let g = gate_g(&p, 0.0, 0.1, &TwoModeOptions { dim: 8 }).unwrap();
    assert!((g.fidelity - 1.0).abs() < 1e-9);
}

#[test]
fn single_qubit_gates_without_loss() {
    let p = params(None);
    let x = gate_x(&p, FRAC_PI_2, p.ep0() / 10.0).unwrap();
    assert!(x.fidelity >= 0.99, "{x:?}");
    assert!(!x.leakage_flagged);
    let z = gate_z(&p, FRAC_PI_2).unwrap();
    assert!(z.fidelity >= 0.999, "{z:?}");
    assert_abs_diff_eq!(z.duration, PI / 2.0, epsilon = 1e-15);
    let zm = gate_z(&p, -FRAC_PI_2).unwrap();
    assert!(zm.fidelity >= 0.999, "{zm:?}");
}

fn evolve_logical(p: &CatQubitParams, h: &QOperator, t: f64, psi: &CVector) -> QState {
    let th = TimeDependentHamiltonian::new(h.clone(), (0.0, t)).unwrap();
    let rho = QState::normalized(vec![p.dim], psi.clone()).unwrap();
    evolve(&th, &[], &rho, &EvolveOptions::default().final_only())
        .unwrap()
        .final_state
}

#[test]
fn two_half_x_rotations_compose_to_x_pi() {
    let p = params(None);
    let e_x = p.ep0() / 10.0;
    let ops = ModeOps::new(p.dim).unwrap();
    let h = &ops.stabilized(&p) + &(&(&ops.a + &ops.ad) * e_x);
    let basis = cat_basis(p.alpha, p.dim).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = encode(&[C64::new(s, 0.0), C64::new(s, 0.0)], &basis);
    let t_half = x_gate_time(p.alpha, FRAC_PI_2, e_x);
    let once = evolve_logical(&p, &h, t_half, &plus);
    let twice = evolve_logical(&p, &h, t_half, &once_to_ket(&once));
    let full = evolve_logical(&p, &h, x_gate_time(p.alpha, PI, e_x), &plus);
    let f = state_fidelity(
        &twice,
        &QState::pure(vec![p.dim], once_to_ket(&full)).unwrap(),
    )
    .unwrap();
    assert!(f >= 0.99, "{f}");
}

// Dominant eigenvector of a (nearly pure) density matrix.
fn once_to_ket(s: &QState) -> CVector {
    let rho = s.density_matrix();
    let eig = nalgebra::SymmetricEigen::new(rho);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |m, (i, &v)| if v > m.1 { (i, v) } else { m });
    eig.eigenvectors.column(k).into_owned()
}

#[test]
fn gate_fidelity_decreases_with_loss() {
    let mut last = f64::INFINITY;
    for ratio in [None, Some(1e4), Some(1e3)] {
        let p = params(ratio);
        let f = gate_x(&p, FRAC_PI_2, p.ep0() / 10.0).unwrap().fidelity;
        assert!(f <= last + 1e-12, "{ratio:?}: {f} > {last}");
        last = f;
    }
}

#[test]
fn slow_drive_reaches_the_instantaneous_cat() {
    let p = params(None);
    let tau = 40.0 / 1.3;
    let pulse = adiabatic_drive_pulse(&p, tau).unwrap();
    let out = drive(&p, &pulse, &QState::fock(p.dim, 0).unwrap()).unwrap();
    let alpha_t = (pulse.e_p(pulse.duration()) / p.kerr).sqrt();
    let inst = cat_state(C64::new(alpha_t, 0.0), Parity::Even, p.dim).unwrap();
    let f_inst = state_fidelity(&out.state, &inst).unwrap();
    assert!(f_inst >= 0.999, "{f_inst}");
    // Against the nominal α = √2 the pulse's 94% plateau caps the overlap.
    assert!((out.fidelity - 0.998).abs() < 1e-3, "{}", out.fidelity);
    assert!(out.parity > 0.99);
}

#[test]
fn drive_preserves_parity_and_undrive_inverts() {
    let p = params(None);
    let pulse = adiabatic_drive_pulse(&p, 5.0).unwrap();
    let odd = drive(&p, &pulse, &QState::fock(p.dim, 1).unwrap()).unwrap();
    assert!(odd.parity < -0.99, "{}", odd.parity);
    assert!(parity_expectation(&odd.state).unwrap() < -0.99);

    let even = drive(&p, &pulse, &QState::fock(p.dim, 0).unwrap()).unwrap();
    let back_in = QState::pure(vec![p.dim], once_to_ket(&even.state)).unwrap();
    let back = undrive(&p, &pulse, &back_in).unwrap();
    assert!(
        back.fidelity >= even.fidelity.powi(2) - 1e-3,
        "{} vs {}",
        back.fidelity,
        even.fidelity
    );
    assert!(back.fidelity >= 0.999);

    let odd_cat = cat_state(C64::new(p.alpha, 0.0), Parity::Odd, p.dim).unwrap();
    let to_one = undrive(&p, &pulse, &odd_cat).unwrap();
    assert!(to_one.fidelity > 0.99, "{}", to_one.fidelity);
    assert!(to_one.state.populations()[1] > 0.99);
}

#[test]
fn drive_rejects_inputs_outside_the_code_space() {
    let p = params(None);
    let pulse = adiabatic_drive_pulse(&p, 5.0).unwrap();
    assert!(drive(&p, &pulse, &QState::fock(p.dim, 3).unwrap()).is_err());
    assert!(undrive(&p, &pulse, &QState::fock(p.dim, 3).unwrap()).is_err());
}

#[test]
fn truncation_overflow_is_reported() {
    let p = CatQubitParams::new(1.0, 0.0, 2.5, 8).unwrap();
    let pulse = adiabatic_drive_pulse(&p, 5.0).unwrap();
    let err = drive(&p, &pulse, &QState::fock(8, 0).unwrap()).unwrap_err();
    assert!(matches!(err, Error::TruncationOverflow { .. }), "{err}");
}

#[test]
fn product_channel_matches_joint_evolution() {
    let p = CatQubitParams::new(1.0, 0.02, 1.0, 6).unwrap();
    let ops = ModeOps::new(6).unwrap();
    let t = 0.7;
    let hx = &ops.stabilized(&p) + &(&(&ops.a + &ops.ad) * 0.3);
    let idle = ops.stabilized(&p);
    let c1 = vec![CollapseOp::new(ops.a.clone(), p.kappa).unwrap()];
    let s1 = (crate::dynamics::liouvillian(&hx, &c1).unwrap() * C64::new(t, 0.0)).exp();
    let s2 = (crate::dynamics::liouvillian(&idle, &c1).unwrap() * C64::new(t, 0.0)).exp();

    let psi1 = crate::qcore::coherent_state(C64::new(0.6, 0.1), 6).unwrap();
    let psi2 = crate::qcore::coherent_state(C64::new(-0.3, 0.4), 6).unwrap();
    let rho0 = tensor(&[psi1, psi2]).unwrap();
    let r = twomode::apply_channel_for_test(&s1, &rho0.density_matrix(), 6, 0);
    let r = twomode::apply_channel_for_test(&s2, &r, 6, 1);

    let dims = [6, 6];
    let h = &hx.embed(0, &dims).unwrap() + &idle.embed(1, &dims).unwrap();
    let collapse = vec![
        CollapseOp::new(ops.a.embed(0, &dims).unwrap(), p.kappa).unwrap(),
        CollapseOp::new(ops.a.embed(1, &dims).unwrap(), p.kappa).unwrap(),
    ];
    let th = TimeDependentHamiltonian::new(h, (0.0, t)).unwrap();
    let joint = evolve(
        &th,
        &collapse,
        &rho0,
        &EvolveOptions::default().rel_tol(1e-10).final_only(),
    )
    .unwrap();
    let diff = (joint.final_state.density_matrix() - r).norm();
    assert!(diff < 1e-7, "{diff}");
}

#[test]
fn g_gate_entangles_without_loss() {
    let p = params(None);
    let g = gate_g(&p, FRAC_PI_2, p.ep0() / 15.0, &small_two_mode()).unwrap();
    assert!(g.fidelity >= 0.99, "{g:?}");
    assert_abs_diff_eq!(g.duration, 1.4726, epsilon = 1e-4);
}

#[test]
fn cnot_truth_table_and_loss_ordering() {
    let lossless = params(None);
    let r = DriveRatios::for_kerr_ratio(1e3);
    let (e_x, e_c) = (r.e_x(&lossless), r.e_c(&lossless));
    let c0 = cnot(&lossless, e_x, e_c, &small_two_mode()).unwrap();
    // Inputs 0 and 2 are |0̄0̄⟩ and |1̄0̄⟩.
    assert!(c0.fidelities[0] >= 0.98, "{:?}", c0.fidelities);
    assert!(c0.fidelities[2] >= 0.98, "{:?}", c0.fidelities);
    let expected = 3.0 * x_gate_time(lossless.alpha, FRAC_PI_2, e_x)
        + x_gate_time(lossless.alpha, FRAC_PI_2, e_x)
        + z_gate_time(1.0, FRAC_PI_2)
        + z_gate_time(1.0, -FRAC_PI_2)
        + g_gate_time(lossless.alpha, FRAC_PI_2, e_c);
    assert_abs_diff_eq!(c0.duration, expected, epsilon = 1e-12);
    assert_abs_diff_eq!(
        cnot_duration(&lossless, e_x, e_c),
        expected,
        epsilon = 1e-12
    );

    let lo = cnot(&params(Some(1e3)), e_x, e_c, &small_two_mode()).unwrap();
    let hi = cnot(&params(Some(1e5)), e_x, e_c, &small_two_mode()).unwrap();
    assert!(
        hi.fidelity > lo.fidelity,
        "{} vs {}",
        hi.fidelity,
        lo.fidelity
    );
}

#[test]
fn drive_ratio_table() {
    assert_eq!(
        DriveRatios::for_kerr_ratio(1e3),
        DriveRatios { x: 10.0, c: 15.0 }
    );
    assert_eq!(
        DriveRatios::for_kerr_ratio(1e4),
        DriveRatios { x: 20.0, c: 25.0 }
    );
    assert_eq!(
        DriveRatios::for_kerr_ratio(1e5),
        DriveRatios { x: 45.0, c: 55.0 }
    );
}

#[test]
fn gate_report_rows_and_csv() {
    let p = CatQubitParams::new(1.0, 1e-3, 2f64.sqrt(), 16).unwrap();
    let opts = GateReportOptions {
        two_mode: TwoModeOptions { dim: 10 },
        ..Default::default()
    };
    let rows = gate_report(&p, DriveRatios::for_kerr_ratio(1e3), &opts).unwrap();
    assert_eq!(rows.len(), 6);
    let names: Vec<&str> = rows.iter().map(|r| r.operation.as_str()).collect();
    assert_eq!(
        names,
        ["drive", "undrive", "X_pi/2", "Z_pi/2", "G_pi/2", "CNOT"]
    );
    for r in &rows {
        assert!(r.fidelity > 0.9 && r.fidelity <= 1.0, "{r:?}");
        assert_abs_diff_eq!(r.duration_kt, r.duration_s * r.kerr, epsilon = 1e-12);
    }
    let mut buf = Vec::new();
    write_gate_report_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "operation,K,kappa,duration_s,duration_Kt,fidelity"
    );
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn lossless_protocol_heralds_odd_bell_states() {
    for det in [DetectorKind::NumberResolving, DetectorKind::Threshold] {
        let res = simulate_link_protocol(&LinkProtocol::new(0.0, det)).unwrap();
        assert_abs_diff_eq!(res.success_probability, 0.5, epsilon = 1e-12);
        for o in &res.outcomes {
            assert!(
                (o.fidelity - 1.0).abs() < 1e-9,
                "{:?}: {}",
                o.clicks,
                o.fidelity
            );
            let same = o.clicks[0] == o.clicks[1];
            let plus = bell_sign(&o.state);
            assert_eq!(plus > 0.0, same, "{:?}", o.clicks);
        }
    }
}

fn bell_sign(s: &QState) -> f64 {
    // Re⟨10|ρ|01⟩ is +½ for the + state and −½ for the − state.
    s.density_matrix()[(2, 1)].re.signum()
}

#[test]
fn two_step_protocol_is_robust_to_loss() {
    for loss in [0.0, 0.5, 0.9] {
        for det in [DetectorKind::NumberResolving, DetectorKind::Threshold] {
            let res = simulate_link_protocol(&LinkProtocol::new(loss, det)).unwrap();
            let eta = 1.0 - loss;
            assert!(
                (res.fidelity - 1.0).abs() < 1e-9,
                "loss {loss}: {}",
                res.fidelity
            );
            assert_abs_diff_eq!(res.success_probability, 0.5 * eta * eta, epsilon = 1e-12);
        }
    }
}

#[test]
fn single_round_with_loss_is_contaminated() {
    let proto = LinkProtocol {
        two_step: false,
        ..LinkProtocol::new(0.5, DetectorKind::Threshold)
    };
    let res = simulate_link_protocol(&proto).unwrap();
    assert!(res.fidelity < 0.99, "{}", res.fidelity);
    // |1̄1̄⟩ population is the contamination.
    let p11 = res.outcomes[0].state.density_matrix()[(3, 3)].re;
    assert!(p11 > 0.1, "{p11}");

    let ideal = LinkProtocol {
        two_step: false,
        ..LinkProtocol::new(0.0, DetectorKind::NumberResolving)
    };
    let res = simulate_link_protocol(&ideal).unwrap();
    assert!((res.fidelity - 1.0).abs() < 1e-9);
}

#[test]
fn arm_phase_cancels_between_rounds() {
    let proto = LinkProtocol {
        arm_phase: 0.83,
        ..LinkProtocol::new(0.3, DetectorKind::NumberResolving)
    };
    let res = simulate_link_protocol(&proto).unwrap();
    assert!((res.fidelity - 1.0).abs() < 1e-9, "{}", res.fidelity);
}

#[test]
fn chebyshev_propagation_matches_adaptive_rk_for_coupled_cavities() {
    let p = params(Some(1e2)).with_dim(7);
    let ops = ModeOps::new(7).unwrap();
    let idle = ops.stabilized(&p);
    let dims = [7, 7];
    let a1 = ops.a.embed(0, &dims).unwrap();
    let a2 = ops.a.embed(1, &dims).unwrap();
    let e_c = p.ep0() / 15.0;
    let h = &(&idle.embed(0, &dims).unwrap() + &idle.embed(1, &dims).unwrap())
        + &(&(&(&a1.dagger() * &a2) + &(&a1 * &a2.dagger())) * e_c);
    let collapse = vec![
        CollapseOp::new(a1, p.kappa).unwrap(),
        CollapseOp::new(a2, p.kappa).unwrap(),
    ];
    let basis = cat_basis(p.alpha, 7).unwrap();
    let psi = (basis[0].kronecker(&basis[1]) + basis[1].kronecker(&basis[1])).normalize();
    let rho0 = QState::pure(dims.to_vec(), psi).unwrap();
    let t = g_gate_time(p.alpha, FRAC_PI_2, e_c);
    let th = TimeDependentHamiltonian::new(h.clone(), (0.0, t)).unwrap();
    let reference = evolve(
        &th,
        &collapse,
        &rho0,
        &EvolveOptions::default()
            .rel_tol(1e-11)
            .abs_tol(1e-13)
            .final_only(),
    )
    .unwrap()
    .final_state
    .density_matrix();
    let fast = evolve_constant(&h, &collapse, &rho0, t, &ConstantOptions::default())
        .unwrap()
        .density_matrix();
    let diff = (fast - reference).norm();
    assert!(diff < 1e-8, "{diff}");
}
