use std::sync::Arc;

use lopsim_core::optics::{beam_splitter, embed};
use lopsim_core::{
    c64, evolve_permanent, evolve_sequential, inner_product, permanent, CMat, FockState, ModeRegistry, Occupation, Pol,
    TransferMatrix, C64,
};
use proptest::prelude::*;

fn registry(ports: usize, n_max: usize) -> Arc<ModeRegistry> {
    let names: Vec<String> = (0..ports).map(|i| format!("p{i}")).collect();
    Arc::new(ModeRegistry::new(&names, 1, n_max).unwrap())
}

/// Gram–Schmidt on the columns of an arbitrary complex matrix.
fn orthonormalize(raw: &[(f64, f64)], n: usize) -> CMat {
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..n {
        let mut v: Vec<C64> = (0..n).map(|i| c64(raw[j * n + i].0, raw[j * n + i].1)).collect();
        v[j] += c64(n as f64, 0.0);
        for c in &cols {
            let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    CMat::from_fn(n, n, |i, j| cols[j][i])
}

fn hom_pair(reg: &Arc<ModeRegistry>) -> FockState {
    let a = reg.mode("p0", Pol::H, 0).unwrap();
    let b = reg.mode("p1", Pol::H, 0).unwrap();
    let mut occ = vec![0u8; reg.len()];
    occ[a] = 1;
    occ[b] = 1;
    FockState::basis(reg.clone(), &occ).unwrap()
}

#[test]
fn balanced_beam_splitter_bunches_identical_photons() {
    let reg = registry(2, 2);
    let ports = vec!["p0".to_string(), "p1".to_string()];
    let bs = TransferMatrix::new(embed(beam_splitter(0.5).unwrap().matrix(), &reg, &ports).unwrap()).unwrap();
    let out = evolve_permanent(&hom_pair(&reg), &bs).unwrap();
    let a = reg.mode("p0", Pol::H, 0).unwrap();
    let b = reg.mode("p1", Pol::H, 0).unwrap();
    let mut coinc = vec![0u8; reg.len()];
    coinc[a] = 1;
    coinc[b] = 1;
    assert!(out.amplitude(&Occupation::from_counts(&coinc)).norm() < 1e-12);
    let mut both = vec![0u8; reg.len()];
    both[a] = 2;
    assert!((out.amplitude(&Occupation::from_counts(&both)).norm_sqr() - 0.5).abs() < 1e-12);
}

#[test]
fn truncation_is_reported() {
    let reg = registry(2, 1);
    let err = FockState::basis(reg.clone(), &[1, 0, 1, 0]);
    assert!(err.is_err() || err.unwrap().check_truncation().is_err());
}

#[test]
fn permanent_of_small_matrices() {
    let m = CMat::from_rows(&[[c64(1.0, 0.0), c64(2.0, 0.0)], [c64(3.0, 0.0), c64(4.0, 0.0)]]);
    assert!((permanent(&m).unwrap() - c64(10.0, 0.0)).norm() < 1e-12);
    assert!((permanent(&CMat::identity(5)).unwrap() - c64(1.0, 0.0)).norm() < 1e-12);
    let ones = CMat::from_fn(4, 4, |_, _| c64(1.0, 0.0));
    assert!((permanent(&ones).unwrap() - c64(24.0, 0.0)).norm() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_evolution_preserves_norm_and_agrees_with_sequential(
        ports in 1usize..=4,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
        photons in prop::collection::vec(0usize..8, 1..=4),
    ) {
        let reg = registry(ports, 4);
        let m = reg.len();
        let u = TransferMatrix::new(orthonormalize(&raw, m)).unwrap();
        let mut occ = vec![0u8; m];
        for p in &photons {
            occ[p % m] += 1;
        }
        let state = FockState::basis(reg.clone(), &occ).unwrap();
        let a = evolve_permanent(&state, &u).unwrap();
        let b = evolve_sequential(&state, &u).unwrap();
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-10);
        for (o, amp) in a.terms() {
            prop_assert!((amp - b.amplitude(o)).norm() < 1e-10);
        }
        prop_assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn unitary_evolution_preserves_inner_products(
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
        x in prop::collection::vec(0usize..6, 2),
        y in prop::collection::vec(0usize..6, 2),
    ) {
        let reg = registry(3, 2);
        let u = TransferMatrix::new(orthonormalize(&raw, 6)).unwrap();
        let basis = |ix: &[usize]| {
            let mut occ = vec![0u8; 6];
            ix.iter().for_each(|&i| occ[i] += 1);
            FockState::basis(reg.clone(), &occ).unwrap()
        };
        let (sx, sy) = (basis(&x), basis(&y));
        let before = inner_product(&sx, &sy).unwrap();
        let after = inner_product(&evolve_permanent(&sx, &u).unwrap(), &evolve_permanent(&sy, &u).unwrap()).unwrap();
        prop_assert!((before - after).norm() < 1e-10);
    }
}
