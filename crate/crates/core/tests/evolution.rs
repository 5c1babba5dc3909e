//! Master-equation evolution, trajectories and fidelity metrics.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use holonomic::dynamics::{
    lindblad_evolve, propagate_unitary, trace_bright_state, DensityMatrix, LindbladSpec,
};
use holonomic::linalg::{matrix_exp, I, ONE, ZERO};
use holonomic::metrics::{
    bright_coefficient_closed_form, error_scaling_order, gate_fidelity_six_state,
    simulated_trace_fidelity, state_fidelity, trace_fidelity_dressed, trace_fidelity_series,
};
use holonomic::model::{ErrorModel, GateSpec};
use holonomic::pulses::{self, Protocol, Schedule};
use holonomic::{ComplexMatrix, Error, StateVector, C64};
use proptest::prelude::*;

fn plus3() -> StateVector {
    let h = C64::from(FRAC_1_SQRT_2);
    StateVector::new(vec![h, h, ZERO])
}

fn pure(psi: &StateVector) -> DensityMatrix {
    DensityMatrix::from_pure(psi).unwrap()
}

#[test]
fn noiseless_hadamard_takes_zero_to_plus() {
    let s = pulses::build_dcnhqc(&GateSpec::hadamard());
    let series = lindblad_evolve(
        &s,
        &ErrorModel::NONE,
        &LindbladSpec::three_level(0.0).unwrap(),
        &pure(&StateVector::basis(3, 0)),
        5,
    )
    .unwrap();
    assert_eq!(series.times.len(), 5);
    let target = plus3().projector();
    assert!(series.final_state().matrix().max_abs_diff(&target) < 1e-8);
}

// Values from an independent dense-expm prototype of the same model, frozen
// to six digits.
#[test]
fn decoherence_reference_values() {
    let noise = LindbladSpec::three_level(5e-4).unwrap();
    let h = pulses::build_dcnhqc(&GateSpec::hadamard());
    let s = pulses::build_dcnhqc(&GateSpec::s_gate());

    let rho = lindblad_evolve(&h, &ErrorModel::NONE, &noise, &pure(&StateVector::basis(3, 0)), 2)
        .unwrap();
    let f_h = state_fidelity(rho.final_state(), &plus3()).unwrap();
    assert!((f_h - 0.996856).abs() < 5e-6, "{f_h}");

    let rho = lindblad_evolve(&s, &ErrorModel::NONE, &noise, &pure(&plus3()), 2).unwrap();
    let h2 = C64::from(FRAC_1_SQRT_2);
    let target = StateVector::new(vec![h2, I * h2, ZERO]);
    let f_s = state_fidelity(rho.final_state(), &target).unwrap();
    assert!((f_s - 0.997317).abs() < 5e-6, "{f_s}");

    let fg_h = gate_fidelity_six_state(&h, &ErrorModel::NONE, &noise).unwrap();
    let fg_s = gate_fidelity_six_state(&s, &ErrorModel::NONE, &noise).unwrap();
    assert!((fg_h - 0.997383).abs() < 5e-6, "{fg_h}");
    assert!((fg_s - 0.997403).abs() < 5e-6, "{fg_s}");
}

#[test]
fn single_segment_matches_exponential() {
    let spec = GateSpec::new(1.0, 0.5, 1.3, 0.0).unwrap();
    let mut s = pulses::build_nhqc(&spec);
    s.segments.truncate(1);
    let seg = s.segments[0];
    let h = s.hamiltonian(&seg, s.omega_m);
    let u = matrix_exp(&h.scale(-I * seg.duration)).unwrap();
    assert!(propagate_unitary(&s, &ErrorModel::NONE).unwrap().max_abs_diff(&u) < 1e-12);

    let psi = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO]);
    let series = lindblad_evolve(&s, &ErrorModel::NONE, &LindbladSpec::noiseless(3), &pure(&psi), 2)
        .unwrap();
    let expected = u.apply(&psi).projector();
    assert!(series.final_state().matrix().max_abs_diff(&expected) < 1e-8);
}

#[test]
fn integrator_agrees_with_piecewise_exponentials() {
    let err = ErrorModel::new(0.07, -0.04).unwrap();
    for protocol in [Protocol::Nhqc, Protocol::Dcnhqc] {
        let s = pulses::build(protocol, &GateSpec::hadamard());
        let u = propagate_unitary(&s, &err).unwrap();
        let psi = plus3();
        let series = lindblad_evolve(&s, &err, &LindbladSpec::noiseless(3), &pure(&psi), 3).unwrap();
        let expected = u.apply(&psi).projector();
        assert!(series.final_state().matrix().max_abs_diff(&expected) < 1e-8);
    }
}

#[test]
fn sine_envelope_keeps_holonomy() {
    let spec = GateSpec::hadamard();
    let s = pulses::build_dcnhqc(&spec).with_envelope(holonomic::Envelope::Sine);
    let u = propagate_unitary(&s, &ErrorModel::NONE).unwrap();
    let ideal = holonomic::model::ideal_gate(&spec);
    assert!(u.restrict(&[0, 1]).max_abs_diff(&ideal) < 1e-8);
}

#[test]
fn bright_coefficient_example() {
    let spec = GateSpec::new(0.0, 0.0, FRAC_PI_2, 0.0).unwrap();
    let s = pulses::build_dcnhqc(&spec);
    let u = propagate_unitary(&s, &ErrorModel::amplitude(0.1)).unwrap();
    let b = spec.frame().bright;
    let m = b.inner(&u.apply(&b));
    assert!((m - C64::new(5.99e-4, 0.99940)).norm() < 1e-5, "{m}");
    let closed = bright_coefficient_closed_form(Protocol::Dcnhqc, FRAC_PI_2, 0.1);
    assert!((m - closed).norm() < 1e-12);
}

fn endpoint_gap(protocol: Protocol, gamma: f64, eps: f64) -> f64 {
    let spec = GateSpec::new(FRAC_PI_4, 0.0, gamma, 0.0).unwrap();
    let s = pulses::build(protocol, &spec);
    let tr = trace_bright_state(&s, &ErrorModel::amplitude(eps), 201).unwrap();
    let (a, b) = (tr.points[0], *tr.points.last().unwrap());
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

// Starting from the pole, the chord to the endpoint is `2|c_a|`, and
// `|c_a|² = 1 − |⟨b|U|b⟩|²`.
fn closed_form_gap(protocol: Protocol, gamma: f64, eps: f64) -> f64 {
    2.0 * (1.0 - bright_coefficient_closed_form(protocol, gamma, eps).norm_sqr()).sqrt()
}

#[test]
fn trajectories_close_only_without_error() {
    for gamma in [FRAC_PI_2, PI] {
        assert!(endpoint_gap(Protocol::Nhqc, gamma, 0.0) < 1e-8);
        assert!(endpoint_gap(Protocol::Dcnhqc, gamma, 0.0) < 1e-8);
        assert!(endpoint_gap(Protocol::Nhqc, gamma, 0.1) > 1e-3);
        for p in [Protocol::Nhqc, Protocol::Dcnhqc] {
            for eps in [-0.1, 0.05, 0.1] {
                let gap = endpoint_gap(p, gamma, eps);
                assert!((gap - closed_form_gap(p, gamma, eps)).abs() < 1e-10);
            }
        }
        let corrected = endpoint_gap(Protocol::Dcnhqc, gamma, 0.1);
        assert!(corrected < 0.1 && corrected < endpoint_gap(Protocol::Nhqc, gamma, 0.1) / 5.0);
        // Second order: halving epsilon quarters the gap.
        let ratio = corrected / endpoint_gap(Protocol::Dcnhqc, gamma, 0.05);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }
}

#[test]
fn trajectory_stays_in_the_bloch_ball() {
    let s = pulses::build_nhqc(&GateSpec::hadamard());
    let tr = trace_bright_state(&s, &ErrorModel::new(0.1, 0.1).unwrap(), 101).unwrap();
    assert_eq!(tr.points.len(), 101);
    for p in &tr.points {
        assert!(p.x * p.x + p.y * p.y + p.z * p.z <= 1.0 + 1e-9);
    }
    let csv = tr.to_csv_string().unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,y,z"));
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn state_fidelity_examples() {
    let plus = StateVector::new(vec![C64::from(FRAC_1_SQRT_2), C64::from(FRAC_1_SQRT_2)]);
    assert!((state_fidelity(&pure(&plus), &plus).unwrap() - 1.0).abs() < 1e-15);
    let mixed = DensityMatrix::new(ComplexMatrix::identity(2).scale_real(0.5)).unwrap();
    assert!((state_fidelity(&mixed, &plus).unwrap() - 0.5).abs() < 1e-15);
    assert!(state_fidelity(&mixed, &StateVector::basis(3, 0)).is_err());
}

#[test]
fn dressed_trace_fidelity_examples() {
    for p in [Protocol::Nhqc, Protocol::Dcnhqc] {
        assert_eq!(trace_fidelity_dressed(p, 1.0, 0.0), 1.0);
    }
    let nhqc = trace_fidelity_dressed(Protocol::Nhqc, FRAC_PI_2, 0.1);
    assert!((nhqc - 0.98784).abs() < 1e-5, "{nhqc}");
    let dc = trace_fidelity_dressed(Protocol::Dcnhqc, FRAC_PI_2, 0.1);
    assert!((dc - 0.99970).abs() < 1e-5, "{dc}");
    let series = trace_fidelity_series(Protocol::Dcnhqc, FRAC_PI_2, 0.1);
    assert!((series - 0.999696).abs() < 1e-6, "{series}");
}

#[test]
fn series_converges_to_exact() {
    for p in [Protocol::Nhqc, Protocol::Dcnhqc] {
        for gamma in [0.5, FRAC_PI_2, PI] {
            for eps in [1e-2, 5e-3, 2e-3, 1e-3] {
                let exact = trace_fidelity_dressed(p, gamma, eps);
                let series = trace_fidelity_series(p, gamma, eps);
                let rel = (exact - series).abs() / (1.0 - series);
                assert!(rel < 0.05, "{p:?} {gamma} {eps}: {rel}");
            }
        }
    }
}

#[test]
fn zero_phase_gate_has_no_infidelity() {
    let grid = [3e-3, 6e-3, 1e-2, 2e-2, 3e-2];
    for p in [Protocol::Nhqc, Protocol::Dcnhqc] {
        assert!(matches!(
            error_scaling_order(p, 0.0, &grid),
            Err(Error::DegenerateFit { .. })
        ));
        for &eps in &grid {
            assert!(1.0 - trace_fidelity_dressed(p, 0.0, eps) < 1e-15);
        }
    }
}

#[test]
fn fidelity_decreases_with_decoherence() {
    let s = pulses::build_dcnhqc(&GateSpec::s_gate());
    let mut last = 1.0 + 1e-9;
    for k in 0..6 {
        let noise = LindbladSpec::three_level(k as f64 * 1e-4).unwrap();
        let f = gate_fidelity_six_state(&s, &ErrorModel::amplitude(0.05), &noise).unwrap();
        assert!(f <= last + 1e-9, "Gamma {}: {f} > {last}", k as f64 * 1e-4);
        last = f;
    }
}

fn schedule_for(protocol: bool, hadamard: bool) -> Schedule {
    let spec = if hadamard { GateSpec::hadamard() } else { GateSpec::s_gate() };
    if protocol {
        pulses::build_dcnhqc(&spec)
    } else {
        pulses::build_nhqc(&spec)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_matrix_invariants_hold(
        dc in any::<bool>(), hadamard in any::<bool>(),
        gamma in 0.0f64..5e-4, eps in -0.1f64..0.1, delta in -0.1f64..0.1,
        re in prop::collection::vec(-1.0f64..1.0, 3), im in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let amps: Vec<C64> = re.iter().zip(&im).map(|(r, i)| C64::new(*r, *i)).collect();
        let psi = StateVector::new(amps);
        prop_assume!(psi.norm() > 1e-3);
        let psi = psi.normalize();
        let s = schedule_for(dc, hadamard);
        let series = lindblad_evolve(
            &s,
            &ErrorModel::new(eps, delta).unwrap(),
            &LindbladSpec::three_level(gamma).unwrap(),
            &pure(&psi),
            9,
        )
        .unwrap();
        prop_assert!(series.stats.max_trace_deviation < 1e-8);
        prop_assert!(series.stats.min_eigenvalue > -1e-8);
        for rho in &series.states {
            prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
            prop_assert!(rho.matrix().hermiticity_error() < 1e-9);
            prop_assert!(rho.min_eigenvalue().unwrap() > -1e-8);
        }
    }

    #[test]
    fn closed_form_matches_simulation(eps in -0.1f64..0.1, gamma in 0.05f64..PI, dc in any::<bool>()) {
        let p = if dc { Protocol::Dcnhqc } else { Protocol::Nhqc };
        let s = pulses::build(p, &GateSpec::new(0.0, 0.0, gamma, 0.0).unwrap());
        let sim = simulated_trace_fidelity(&s, &ErrorModel::amplitude(eps)).unwrap();
        prop_assert!((sim - trace_fidelity_dressed(p, gamma, eps)).abs() < 1e-10);
    }

    #[test]
    fn bright_coefficient_inside_unit_disc(x in -10.0f64..10.0, gamma in -PI..PI, eps in -0.5f64..0.5) {
        let (s, c) = x.sin_cos();
        prop_assert!((c.powi(4) + s * s + s * s * c * c - 1.0).abs() < 1e-14);
        let m = bright_coefficient_closed_form(Protocol::Dcnhqc, gamma, eps);
        prop_assert!(m.norm() <= 1.0 + 1e-14);
    }
}

#[test]
fn pure_state_constructor_rejects_garbage() {
    let bad = StateVector::new(vec![ONE, ONE]);
    assert!(matches!(DensityMatrix::from_pure(&bad), Err(Error::NotNormalized { .. })));
}
