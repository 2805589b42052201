//! Two-qubit tomography runs on simulated or recorded counts.

use lopsim_core::metrics::{concurrence, state_fidelity};
use lopsim_core::source::imperfect_entangled_pair;
use lopsim_core::tomography::{reconstruct_linear, reconstruct_ml, simulate_tomography, TomographyDataset};
use lopsim_core::{c64, CMat, C64};
use serde::Serialize;

use crate::formats::CountRow;

pub const ML_ITERATIONS: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct TomographyReport {
    pub shots: Option<u64>,
    pub seed: u64,
    pub fidelity_linear: f64,
    pub fidelity_ml: f64,
    pub concurrence_ml: f64,
    /// Concurrence of the Werner model the data was generated from.
    pub concurrence_model: Option<f64>,
    /// Reconstructed density matrix as rows of (re, im).
    pub rho: Vec<Vec<(f64, f64)>>,
}

/// (|HH⟩ + |VV⟩)/√2
pub fn phi_plus() -> Vec<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    vec![c64(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), c64(r, 0.0)]
}

/// Werner concurrence max(0, 2F − 1).
pub fn werner_concurrence(fidelity: f64) -> f64 {
    (2.0 * fidelity - 1.0).max(0.0)
}

pub fn analyse(data: &TomographyDataset) -> anyhow::Result<(CMat, TomographyReport)> {
    let lin = reconstruct_linear(data)?;
    let ml = reconstruct_ml(data, &lin, ML_ITERATIONS)?;
    let target = phi_plus();
    let fidelity_linear = {
        let psd = lopsim_core::tomography::project_psd(&lin);
        state_fidelity(&psd, &target)?
    };
    let report = TomographyReport {
        shots: data.shots,
        seed: data.seed,
        fidelity_linear,
        fidelity_ml: state_fidelity(&ml, &target)?,
        concurrence_ml: concurrence(&ml)?,
        concurrence_model: None,
        rho: (0..4).map(|i| (0..4).map(|j| (ml[(i, j)].re, ml[(i, j)].im)).collect()).collect(),
    };
    Ok((ml, report))
}

/// Simulates a Werner pair of the given fidelity and reconstructs it.
pub fn werner_loop(fidelity: f64, shots: Option<u64>, seed: u64) -> anyhow::Result<(TomographyDataset, TomographyReport)> {
    let rho = imperfect_entangled_pair(fidelity)?;
    let data = simulate_tomography(&rho, shots, seed)?;
    let (_, mut rep) = analyse(&data)?;
    rep.concurrence_model = Some(werner_concurrence(fidelity));
    Ok((data, rep))
}

pub fn dataset_rows(data: &TomographyDataset) -> Vec<CountRow> {
    let mut rows = Vec::new();
    for (id, c) in &data.settings {
        for (k, v) in c.iter().enumerate() {
            rows.push(CountRow {
                setting_id: id.clone(),
                outcome: lopsim_core::measure::outcome_label(k, 2),
                count: *v,
                shots: data.shots.unwrap_or(0),
                seed: data.seed,
            });
        }
    }
    rows
}

pub fn dataset_from_rows(rows: &[CountRow]) -> anyhow::Result<TomographyDataset> {
    let mut settings: Vec<(String, [f64; 4])> = Vec::new();
    for r in rows {
        let k = match r.outcome.as_str() {
            "00" => 0,
            "01" => 1,
            "10" => 2,
            "11" => 3,
            o => anyhow::bail!("outcome `{o}` is not a two-bit label"),
        };
        match settings.iter_mut().find(|(id, _)| *id == r.setting_id) {
            Some((_, c)) => c[k] += r.count,
            None => {
                let mut c = [0.0; 4];
                c[k] = r.count;
                settings.push((r.setting_id.clone(), c));
            }
        }
    }
    let shots = rows.first().map(|r| r.shots).filter(|&s| s > 0);
    let seed = rows.first().map_or(0, |r| r.seed);
    Ok(TomographyDataset { settings, shots, seed })
}
