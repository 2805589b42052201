use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use lopsim_core::measure::{sample_counts, subtract_single_source_events, CountRecord};
use lopsim_core::metrics::{
    concurrence, entanglement_class, gaussian_confidence, state_fidelity, truth_table_fidelity, EntanglementClass,
    SettingData, TruthTable,
};
use lopsim_core::optics::{beam_splitter, embed};
use lopsim_core::source::{apply_distinguishability, imperfect_entangled_pair, werner};
use lopsim_core::tomography::{reconstruct_linear, reconstruct_ml, simulate_tomography};
use lopsim_core::{c64, evolve_permanent, CMat, FockState, ModeRegistry, Occupation, Pol, TransferMatrix, C64};

fn bell() -> Vec<C64> {
    vec![c64(FRAC_1_SQRT_2, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(FRAC_1_SQRT_2, 0.0)]
}

#[test]
fn concurrence_of_reference_states() {
    let b = bell();
    assert!((concurrence(&CMat::outer(&b, &b)).unwrap() - 1.0).abs() < 1e-9);
    let prod = vec![c64(0.6, 0.0), c64(0.0, 0.8), c64(0.0, 0.0), c64(0.0, 0.0)];
    assert!(concurrence(&CMat::outer(&prod, &prod)).unwrap() < 1e-9);
    // Werner states: C = max(0, 2F − 1)
    for f in [0.3, 0.5, 0.75, 0.962] {
        let c = concurrence(&werner(&b, f).unwrap()).unwrap();
        assert!((c - (2.0 * f - 1.0).max(0.0)).abs() < 1e-9, "F = {f}: C = {c}");
    }
}

#[test]
fn werner_pair_has_requested_fidelity() {
    let rho = imperfect_entangled_pair(0.962).unwrap();
    assert!((state_fidelity(&rho, &bell()).unwrap() - 0.962).abs() < 1e-12);
    assert!(imperfect_entangled_pair(0.2).is_err());
}

#[test]
fn hom_coincidences_follow_overlap() {
    let names = ["a", "b"];
    let reg = Arc::new(ModeRegistry::new(&names, 2, 2).unwrap());
    let ports: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let bs = TransferMatrix::new(embed(beam_splitter(0.5).unwrap().matrix(), &reg, &ports).unwrap()).unwrap();
    let mut occ = vec![0u8; reg.len()];
    occ[reg.mode("a", Pol::H, 0).unwrap()] = 1;
    occ[reg.mode("b", Pol::H, 0).unwrap()] = 1;
    let input = FockState::basis(reg.clone(), &occ).unwrap();
    for s in [0.0, 0.5, 0.862f64.sqrt(), 1.0] {
        let out = evolve_permanent(&apply_distinguishability(&input, &["b"], s).unwrap(), &bs).unwrap();
        let coinc: f64 = out
            .terms()
            .filter(|(o, _)| {
                let c = o.counts();
                let on = |p: usize| (0..c.len()).any(|m| reg.port_of(m) == p && c[m] > 0);
                on(0) && on(1)
            })
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((coinc - (1.0 - s * s) / 2.0).abs() < 1e-12, "s = {s}: {coinc}");
    }
}

#[test]
fn exact_tomography_recovers_the_state() {
    let psi = [c64(0.5, 0.1), c64(0.0, 0.3), c64(-0.4, 0.2), c64(0.1, -0.2)];
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<C64> = psi.iter().map(|z| z / n).collect();
    let rho = CMat::outer(&psi, &psi);
    let data = simulate_tomography(&rho, None, 0).unwrap();
    let lin = reconstruct_linear(&data).unwrap();
    assert!(lin.max_abs_diff(&rho) < 1e-9);
    let ml = reconstruct_ml(&data, &lin, 50).unwrap();
    assert!(state_fidelity(&ml, &psi).unwrap() > 1.0 - 1e-6);
}

#[test]
fn sampled_tomography_is_seed_deterministic() {
    let rho = imperfect_entangled_pair(0.9).unwrap();
    let a = simulate_tomography(&rho, Some(1000), 3).unwrap();
    let b = simulate_tomography(&rho, Some(1000), 3).unwrap();
    let c = simulate_tomography(&rho, Some(1000), 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (_, counts) in &a.settings {
        assert_eq!(counts.iter().sum::<f64>(), 1000.0);
    }
}

#[test]
fn sampled_counts_sum_to_shots() {
    let p: BTreeMap<String, f64> = [("00", 0.1), ("01", 0.2), ("10", 0.0), ("11", 0.7)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let rec = sample_counts("ZZ", &p, 5000, 9, 2);
    assert_eq!(rec.iter().map(|r| r.count).sum::<u64>(), 5000);
    assert_eq!(rec.iter().find(|r| r.outcome == "10").unwrap().count, 0);
    assert_eq!(rec, sample_counts("ZZ", &p, 5000, 9, 2));
}

fn rec(outcome: &str, count: u64) -> CountRecord {
    CountRecord { setting_id: "ZZZ".into(), outcome: outcome.into(), count, shots: 0, seed: 0 }
}

#[test]
fn subtraction_floors_at_zero_and_reports() {
    let total = [rec("000", 10), rec("001", 3)];
    let a = [rec("000", 2), rec("001", 2)];
    let b = [rec("000", 1), rec("001", 4)];
    let s = subtract_single_source_events(&total, &a, &b).unwrap();
    assert_eq!(s.records[0].count, 7);
    assert_eq!(s.records[1].count, 0);
    assert_eq!((s.floored_outcomes, s.floored_mass), (1, 3));
    let other = [CountRecord { setting_id: "XXX".into(), ..rec("000", 1) }];
    assert!(subtract_single_source_events(&total, &other, &b).is_err());
}

#[test]
fn truth_table_fidelity_and_classes() {
    let rows: Vec<SettingData> =
        (0..4).map(|i| SettingData::poisson((0..4).map(|j| if i == j { 90.0 } else { 10.0 / 3.0 }).collect())).collect();
    let f = truth_table_fidelity(&TruthTable::from_rows(&rows), |i| i);
    assert!((f.value - 0.9).abs() < 1e-12);
    assert!(f.sigma > 0.0);
    assert_eq!(entanglement_class(0.2), EntanglementClass::ConsistentWithSeparable);
    assert_eq!(entanglement_class(0.4), EntanglementClass::RequiresBipartite);
    assert_eq!(entanglement_class(0.69), EntanglementClass::RequiresGenuineTripartite);
    assert!((gaussian_confidence(0.5, 0.1, 0.5) - 0.5).abs() < 1e-12);
}

#[test]
fn occupation_round_trip() {
    let o = Occupation::from_counts(&[0, 2, 1]);
    assert_eq!(o.total(), 3);
    assert_eq!(o.counts(), &[0, 2, 1]);
}
