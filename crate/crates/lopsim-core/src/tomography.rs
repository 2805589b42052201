//! Two-qubit state tomography from Pauli-basis counts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::linalg::{c64, eigh, CMat, C64};
use crate::measure::{outcome_label, CountRecord};
use crate::metrics::{multinomial, pauli, validate_density};
use crate::Error;

const BASES: [char; 3] = ['X', 'Y', 'Z'];

/// Counts for the 9 local Pauli settings, outcomes "00".."11" where bit 0
/// is the +1 eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographyDataset {
    /// Setting id ("XZ" etc) → four outcome counts.
    pub settings: Vec<(String, [f64; 4])>,
    /// `None` in exact mode.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl TomographyDataset {
    pub fn to_records(&self) -> Vec<CountRecord> {
        let mut out = Vec::new();
        for (id, c) in &self.settings {
            for (k, v) in c.iter().enumerate() {
                out.push(CountRecord {
                    setting_id: id.clone(),
                    outcome: outcome_label(k, 2),
                    count: *v as u64,
                    shots: self.shots.unwrap_or(0),
                    seed: self.seed,
                });
            }
        }
        out
    }

    pub fn from_records(records: &[CountRecord]) -> Result<Self, Error> {
        let mut settings: Vec<(String, [f64; 4])> = Vec::new();
        for r in records {
            let k = usize::from_str_radix(&r.outcome, 2)
                .ok()
                .filter(|k| *k < 4 && r.outcome.len() == 2)
                .ok_or_else(|| Error::Parameter(alloc::format!("outcome `{}` is not a two-bit label", r.outcome)))?;
            match settings.iter_mut().find(|(id, _)| *id == r.setting_id) {
                Some((_, c)) => c[k] += r.count as f64,
                None => {
                    let mut c = [0.0; 4];
                    c[k] = r.count as f64;
                    settings.push((r.setting_id.clone(), c));
                }
            }
        }
        let shots = records.first().map(|r| r.shots);
        let seed = records.first().map_or(0, |r| r.seed);
        Ok(TomographyDataset { settings, shots, seed })
    }
}

/// Projector on the eigenvector of Pauli `b` with eigenvalue (−1)^bit.
fn basis_projector(b: char, bit: usize) -> CMat {
    let p = pauli(match b {
        'X' => 1,
        'Y' => 2,
        _ => 3,
    });
    let s = if bit == 0 { 1.0 } else { -1.0 };
    CMat::identity(2).add(&p.scale(c64(s, 0.0))).scale(c64(0.5, 0.0))
}

pub fn setting_ids() -> Vec<String> {
    let mut v = Vec::with_capacity(9);
    for a in BASES {
        for b in BASES {
            let mut s = String::new();
            s.push(a);
            s.push(b);
            v.push(s);
        }
    }
    v
}

pub fn born_probabilities(rho: &CMat, setting: &str) -> [f64; 4] {
    let mut ch = setting.chars();
    let (a, b) = (ch.next().unwrap_or('Z'), ch.next().unwrap_or('Z'));
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let proj = basis_projector(a, k >> 1).kron(&basis_projector(b, k & 1));
        *o = proj.matmul(rho).trace().re.max(0.0);
    }
    out
}

/// Multinomial counts per setting, or exact probabilities when `shots`
/// is `None`.
pub fn simulate_tomography(rho: &CMat, shots: Option<u64>, seed: u64) -> Result<TomographyDataset, Error> {
    validate_density(rho, 1e-8)?;
    if rho.rows() != 4 {
        return Err(Error::Contract("two-qubit state expected".into()));
    }
    let settings = setting_ids()
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let p = born_probabilities(rho, &id);
            let c = match shots {
                None => p,
                Some(n) => {
                    let mut rng = crate::measure::setting_rng(seed, i as u64);
                    let v = multinomial(&mut rng, n, &p);
                    [v[0], v[1], v[2], v[3]]
                }
            };
            (id, c)
        })
        .collect();
    Ok(TomographyDataset { settings, shots, seed })
}

/// ρ = ¼ Σ ⟨σᵢ⊗σⱼ⟩ σᵢ⊗σⱼ; Hermitian with unit trace, possibly not PSD.
pub fn reconstruct_linear(data: &TomographyDataset) -> Result<CMat, Error> {
    let get = |id: &str| -> Result<[f64; 4], Error> {
        data.settings
            .iter()
            .find(|(s, _)| s == id)
            .map(|(_, c)| {
                let t: f64 = c.iter().sum();
                if t > 0.0 {
                    [c[0] / t, c[1] / t, c[2] / t, c[3] / t]
                } else {
                    [0.0; 4]
                }
            })
            .ok_or_else(|| Error::MissingSetting(id.to_string()))
    };
    let mut p = [[[0.0; 4]; 3]; 3];
    for (i, a) in BASES.iter().enumerate() {
        for (j, b) in BASES.iter().enumerate() {
            let mut id = String::new();
            id.push(*a);
            id.push(*b);
            p[i][j] = get(&id)?;
        }
    }
    let mut rho = CMat::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            // ⟨σᵢ⊗σⱼ⟩ with identity marginals averaged over the compatible settings
            let exp = expectation(&p, i, j);
            rho = rho.add(&pauli(i).kron(&pauli(j)).scale(c64(exp / 4.0, 0.0)));
        }
    }
    Ok(rho.hermitian_part())
}

fn expectation(p: &[[[f64; 4]; 3]; 3], i: usize, j: usize) -> f64 {
    let sign = |k: usize, use_a: bool, use_b: bool| {
        let mut s = 1.0;
        if use_a && k >> 1 == 1 {
            s = -s;
        }
        if use_b && k & 1 == 1 {
            s = -s;
        }
        s
    };
    let from = |a: usize, b: usize, ua: bool, ub: bool| (0..4).map(|k| sign(k, ua, ub) * p[a][b][k]).sum::<f64>();
    match (i, j) {
        (0, 0) => 1.0,
        (0, j) => (0..3).map(|a| from(a, j - 1, false, true)).sum::<f64>() / 3.0,
        (i, 0) => (0..3).map(|b| from(i - 1, b, true, false)).sum::<f64>() / 3.0,
        (i, j) => from(i - 1, j - 1, true, true),
    }
}

/// Closest PSD unit-trace matrix in Frobenius norm: eigenvalues projected
/// onto the probability simplex, eigenvectors kept.
pub fn project_psd(rho: &CMat) -> CMat {
    let e = eigh(&rho.hermitian_part());
    let proj = simplex_projection(&e.values);
    let n = rho.rows();
    let mut out = CMat::zeros(n, n);
    for (k, &w) in proj.iter().enumerate() {
        if w > 0.0 {
            let v = e.vector(k);
            out = out.add(&CMat::outer(&v, &v).scale(c64(w, 0.0)));
        }
    }
    out
}

/// Euclidean projection onto {x ≥ 0, Σx = 1}.
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Iterative RρR maximum-likelihood refinement starting from `start`.
pub fn reconstruct_ml(data: &TomographyDataset, start: &CMat, iterations: usize) -> Result<CMat, Error> {
    let mut rho = project_psd(start);
    let mut ops: Vec<(CMat, f64)> = Vec::new();
    for (id, c) in &data.settings {
        let mut ch = id.chars();
        let (a, b) = (ch.next().unwrap_or('Z'), ch.next().unwrap_or('Z'));
        for (k, &n) in c.iter().enumerate() {
            ops.push((basis_projector(a, k >> 1).kron(&basis_projector(b, k & 1)), n));
        }
    }
    if ops.is_empty() {
        return Err(Error::MissingSetting("any".into()));
    }
    for _ in 0..iterations {
        let mut r = CMat::zeros(4, 4);
        for (p, n) in &ops {
            let pr = p.matmul(&rho).trace().re;
            if pr > 1e-15 {
                r = r.add(&p.scale(c64(n / pr, 0.0)));
            }
        }
        let next = r.matmul(&rho).matmul(&r);
        let tr = next.trace().re;
        rho = next.scale(C64::new(1.0 / tr, 0.0)).hermitian_part();
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_examples() {
        assert_eq!(simplex_projection(&[1.1, -0.1]), alloc::vec![1.0, 0.0]);
        let p = simplex_projection(&[0.5, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_inversion_roundtrip() {
        let rho = crate::source::imperfect_entangled_pair(0.9).unwrap();
        let d = simulate_tomography(&rho, None, 0).unwrap();
        assert!(reconstruct_linear(&d).unwrap().max_abs_diff(&rho) < 1e-12);
    }
}
