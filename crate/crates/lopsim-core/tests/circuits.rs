use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use lopsim_core::circuit::{
    build_cswap_full, build_cswap_simplified, build_mach_zehnder, build_parity_encoder, build_partial_swap,
    build_ppbs_cnot, builtin, compile, cnot_complementary_encoding, cswap_with_components, extract_logical_operator,
    gates, measured_components, phase_distance, CircuitSpec, ControlEncoding, BUILTIN_CIRCUITS,
};
use lopsim_core::{c64, CMat};

fn fredkin_check(spec: &CircuitSpec) {
    let comp = compile(spec).unwrap();
    let op = extract_logical_operator(&comp, spec).unwrap();
    assert!(!op.structural_failure);
    let d = op.distance_to(&gates::fredkin());
    assert!(d < 1e-9, "distance {d}");
    for p in &op.per_input_probability {
        assert!((p - 1.0 / 162.0).abs() < 1e-9, "p = {p}");
    }
}

#[test]
fn simplified_cswap_is_fredkin_with_one_in_162() {
    fredkin_check(&build_cswap_simplified(ControlEncoding::SamePolarization));
}

#[test]
fn opposite_polarization_encoding_is_also_fredkin() {
    fredkin_check(&build_cswap_simplified(ControlEncoding::OppositePolarization));
}

#[test]
fn fredkin_is_an_involution_with_expected_eigenstructure() {
    let spec = build_cswap_simplified(ControlEncoding::SamePolarization);
    let op = extract_logical_operator(&compile(&spec).unwrap(), &spec).unwrap();
    let u = op.unitary();
    let u2 = u.matmul(&u);
    let ph = u2[(0, 0)];
    assert!(u2.max_abs_diff(&CMat::identity(8).scale(ph)) < 1e-9);
    let r = FRAC_1_SQRT_2;
    let mut anti = vec![c64(0.0, 0.0); 8];
    anti[0b101] = c64(r, 0.0);
    anti[0b110] = c64(-r, 0.0);
    let mut sym = vec![c64(0.0, 0.0); 8];
    sym[0b101] = c64(r, 0.0);
    sym[0b110] = c64(r, 0.0);
    let g = u[(0, 0)];
    let ua = u.apply(&anti);
    let us = u.apply(&sym);
    for i in 0..8 {
        assert!((ua[i] + g * anti[i]).norm() < 1e-9);
        assert!((us[i] - g * sym[i]).norm() < 1e-9);
    }
}

#[test]
fn full_cswap_branches_all_realise_fredkin() {
    let spec = build_cswap_full();
    let op = extract_logical_operator(&compile(&spec).unwrap(), &spec).unwrap();
    assert_eq!(op.branches.len(), 4);
    for b in &op.branches {
        let d = phase_distance(&b.normalized(), &gates::fredkin());
        assert!(d < 1e-9, "branch {:?}: distance {d}", b.branch.projections);
        assert!(b.non_unitarity() < 1e-9);
    }
    assert!((op.success_probability - 1.0 / 162.0).abs() < 1e-9, "{}", op.success_probability);
}

#[test]
fn parity_encoder_succeeds_with_one_half() {
    let spec = build_parity_encoder();
    let op = extract_logical_operator(&compile(&spec).unwrap(), &spec).unwrap();
    assert!(op.distance_to(&CMat::identity(2)) < 1e-12);
    assert!((op.success_probability - 0.5).abs() < 1e-12);
    for p in &op.per_input_probability {
        assert!((p - 0.5).abs() < 1e-12);
    }
}

#[test]
fn mach_zehnder_routes_by_phase() {
    let at = |phi: f64| {
        let s = build_mach_zehnder(phi);
        extract_logical_operator(&compile(&s).unwrap(), &s).unwrap().branches[0].matrix.clone()
    };
    assert!((at(0.0)[(0, 0)].norm_sqr() - 1.0).abs() < 1e-12);
    assert!((at(PI)[(1, 0)].norm_sqr() - 1.0).abs() < 1e-12);
    let samples: Vec<f64> = (0..=64).map(|k| at(2.0 * PI * k as f64 / 64.0)[(0, 0)].norm_sqr()).collect();
    let (mx, mn) = samples.iter().fold((0.0f64, 1.0f64), |(a, b), &x| (a.max(x), b.min(x)));
    assert!(((mx - mn) / (mx + mn) - 1.0).abs() < 1e-12);
    for (k, p) in samples.iter().enumerate() {
        let phi = 2.0 * PI * k as f64 / 64.0;
        assert!((p - (1.0 + phi.cos()) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn partial_swap_family() {
    let op = |phi: f64| {
        let s = build_partial_swap(phi);
        extract_logical_operator(&compile(&s).unwrap(), &s).unwrap()
    };
    let id = op(0.0);
    assert!(id.distance_to(&CMat::identity(4)) < 1e-9);
    let sw = op(PI);
    assert!(sw.distance_to(&gates::swap()) < 1e-9);
    let half = op(FRAC_PI_2);
    assert!(half.distance_to(&gates::sqrt_swap()) < 1e-9);
    let u = half.unitary();
    assert!(phase_distance(&u.matmul(&u), &gates::swap()) < 1e-9);
    for o in [&id, &sw, &half] {
        assert!((o.success_probability - 1.0 / 8.0).abs() < 1e-12);
    }
}

#[test]
fn ppbs_cnot_both_bases() {
    let s = build_ppbs_cnot();
    let op = extract_logical_operator(&compile(&s).unwrap(), &s).unwrap();
    assert!(op.distance_to(&gates::cnot()) < 1e-9);
    for p in &op.per_input_probability {
        assert!((p - 1.0 / 9.0).abs() < 1e-9);
    }
    let mut c = build_ppbs_cnot();
    let (i, o) = cnot_complementary_encoding();
    c.logical_inputs = i;
    c.logical_outputs = o;
    let op = extract_logical_operator(&compile(&c).unwrap(), &c).unwrap();
    let ideal = gates::permutation(4, gates::reversed_cnot_map);
    assert!(op.distance_to(&ideal) < 1e-9);
}

#[test]
fn measured_components_move_away_from_ideal_but_stay_close() {
    let spec =
        cswap_with_components(build_cswap_simplified(ControlEncoding::SamePolarization), &measured_components()).unwrap();
    let op = extract_logical_operator(&compile(&spec).unwrap(), &spec).unwrap();
    let d = op.distance_to(&gates::fredkin());
    assert!(d > 1e-6, "distance {d}");
    let m = &op.branches[0].matrix;
    let overlap = gates::fredkin().adjoint().matmul(m).trace().norm_sqr();
    let f = overlap / (8.0 * m.adjoint().matmul(m).trace().re);
    assert!(f > 0.9 && f < 1.0 - 1e-6, "process fidelity {f}");
}

#[test]
fn every_builtin_compiles() {
    for name in BUILTIN_CIRCUITS {
        let s = builtin(name).unwrap();
        compile(&s).unwrap();
    }
}
