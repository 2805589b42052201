//! Figures of merit: truth tables, three-photon correlations, coherence,
//! fidelities, concurrence and uncertainty propagation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, SQRT_2};

use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::linalg::{c64, cis, eigh, sqrt_psd, vdot, CMat, C64};
use crate::measure::setting_rng;
use crate::Error;

/// Value with a 1σ uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Estimate { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Estimate { value, sigma: 0.0 }
    }

    /// Clamps into [0, 1]; the flag reports whether clamping happened.
    pub fn clamp_unit(self) -> (Self, bool) {
        let v = self.value.clamp(0.0, 1.0);
        (Estimate { value: v, sigma: self.sigma }, v != self.value)
    }
}

/// Outcome counts of one setting with per-outcome variances.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingData {
    pub counts: Vec<f64>,
    pub variances: Vec<f64>,
}

impl SettingData {
    /// Exact probabilities: zero variance.
    pub fn exact(probabilities: Vec<f64>) -> Self {
        let n = probabilities.len();
        SettingData { counts: probabilities, variances: vec![0.0; n] }
    }

    /// Raw counts with Poisson variances.
    pub fn poisson(counts: Vec<f64>) -> Self {
        SettingData { variances: counts.clone(), counts }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total();
        self.counts.iter().map(|c| if t > 0.0 { c / t } else { 0.0 }).collect()
    }

    /// Σ wᵢ nᵢ / N with first-order variance Σ (wᵢ − E)² vᵢ / N².
    pub fn weighted_mean(&self, weights: &[f64]) -> Estimate {
        let t = self.total();
        if t <= 0.0 {
            return Estimate::exact(0.0);
        }
        let e: f64 = self.counts.iter().zip(weights).map(|(c, w)| c * w).sum::<f64>() / t;
        let var: f64 = self.variances.iter().zip(weights).map(|(v, w)| (w - e) * (w - e) * v).sum::<f64>() / (t * t);
        Estimate::new(e, libm::sqrt(var))
    }
}

/// Rows are inputs, columns outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable {
    pub probabilities: Vec<Vec<f64>>,
    pub sigmas: Vec<Vec<f64>>,
}

impl TruthTable {
    pub fn from_rows(rows: &[SettingData]) -> Self {
        let mut probabilities = Vec::new();
        let mut sigmas = Vec::new();
        for r in rows {
            let d = r.counts.len();
            let mut p = Vec::with_capacity(d);
            let mut s = Vec::with_capacity(d);
            for j in 0..d {
                let w: Vec<f64> = (0..d).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
                let e = r.weighted_mean(&w);
                p.push(e.value);
                s.push(e.sigma);
            }
            probabilities.push(p);
            sigmas.push(s);
        }
        TruthTable { probabilities, sigmas }
    }

    pub fn dim(&self) -> usize {
        self.probabilities.len()
    }
}

/// Mean probability of the correct output.
pub fn truth_table_fidelity(tt: &TruthTable, ideal: impl Fn(usize) -> usize) -> Estimate {
    let d = tt.dim() as f64;
    let (mut v, mut var) = (0.0, 0.0);
    for i in 0..tt.dim() {
        let j = ideal(i);
        v += tt.probabilities[i][j];
        var += tt.sigmas[i][j] * tt.sigmas[i][j];
    }
    Estimate::new(v / d, libm::sqrt(var) / d)
}

/// X cos φ + Y sin φ.
pub fn s_operator(phi: f64) -> CMat {
    CMat::from_rows(&[[C64::zero(), cis(-phi)], [cis(phi), C64::zero()]])
}

pub fn pauli(k: usize) -> CMat {
    match k {
        0 => CMat::identity(2),
        1 => s_operator(0.0),
        2 => s_operator(FRAC_PI_2),
        _ => CMat::from_real_diag(&[1.0, -1.0]),
    }
}

/// ± S(φ₁) ⊗ S(φ₂) ⊗ S(φ₃).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MOperator {
    pub sign: f64,
    pub azimuths: [f64; 3],
}

impl MOperator {
    pub fn matrix(&self) -> CMat {
        let [a, b, c] = self.azimuths;
        s_operator(a).kron(&s_operator(b)).kron(&s_operator(c)).scale(c64(self.sign, 0.0))
    }

    /// Same operator with every azimuth in (−π/2, π/2], using S(φ+π) = −S(φ).
    pub fn canonical(&self) -> Self {
        let mut sign = self.sign;
        let mut az = self.azimuths;
        for a in az.iter_mut() {
            let mut x = num_traits::Euclid::rem_euclid(&(*a + PI), &(2.0 * PI)) - PI;
            if x > FRAC_PI_2 + 1e-12 {
                x -= PI;
                sign = -sign;
            } else if x <= -FRAC_PI_2 + 1e-12 {
                x += PI;
                sign = -sign;
            }
            *a = x;
        }
        MOperator { sign, azimuths: az }
    }

    /// Weight of each outcome ijk when measuring along the operator's own
    /// axes, read off as ⟨e_ijk|M|e_ijk⟩ on the analyzer eigenbasis
    /// (bit 0 = +1 eigenvector of S(φ)).
    pub fn sign_pattern(&self) -> [f64; 8] {
        let m = self.matrix();
        let mut out = [0.0; 8];
        for (idx, o) in out.iter_mut().enumerate() {
            let mut v = vec![C64::one()];
            for (q, &phi) in self.azimuths.iter().enumerate() {
                let bit = (idx >> (2 - q)) & 1;
                let s = if bit == 0 { 1.0 } else { -1.0 };
                let e = [c64(1.0 / SQRT_2, 0.0), cis(phi) * (s / SQRT_2)];
                v = crate::linalg::kron_vec(&v, &e);
            }
            *o = vdot(&v, &m.apply(&v)).re;
        }
        out
    }
}

/// The three correlation operators as defined, before canonicalization.
pub fn m_operators() -> [MOperator; 3] {
    [
        MOperator { sign: -1.0, azimuths: [-FRAC_PI_3, FRAC_PI_3, -FRAC_PI_3] },
        MOperator { sign: 1.0, azimuths: [-2.0 * FRAC_PI_3, 2.0 * FRAC_PI_3, -2.0 * FRAC_PI_3] },
        MOperator { sign: 1.0, azimuths: [0.0; 3] },
    ]
}

/// Projector on |010⟩ and |101⟩.
pub fn m0_operator() -> CMat {
    let mut d = [0.0; 8];
    d[0b010] = 1.0;
    d[0b101] = 1.0;
    CMat::from_real_diag(&d)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationResult {
    pub m0: Estimate,
    pub m: [Estimate; 3],
}

/// ⟨M₀⟩ from Z-basis data and ⟨M₁⟩..⟨M₃⟩ from data taken along the
/// canonical axes of each operator.
pub fn m_correlations(z: &SettingData, m: [&SettingData; 3]) -> Result<CorrelationResult, Error> {
    if z.counts.len() != 8 || m.iter().any(|d| d.counts.len() != 8) {
        return Err(Error::Contract("three-qubit settings need 8 outcomes".into()));
    }
    let mut w0 = [0.0; 8];
    w0[0b010] = 1.0;
    w0[0b101] = 1.0;
    let ops = m_operators();
    let mut out = [Estimate::default(); 3];
    for k in 0..3 {
        out[k] = m[k].weighted_mean(&ops[k].canonical().sign_pattern());
    }
    Ok(CorrelationResult { m0: z.weighted_mean(&w0), m: out })
}

/// Mean of the three correlations with σ = √(Σσᵢ²)/3.
pub fn coherence_c(corr: &CorrelationResult) -> Estimate {
    let v = corr.m.iter().map(|e| e.value).sum::<f64>() / 3.0;
    let s = libm::sqrt(corr.m.iter().map(|e| e.sigma * e.sigma).sum::<f64>()) / 3.0;
    Estimate::new(v, s)
}

/// 2 Re⟨010|ρ|101⟩
pub fn coherence_from_density(rho: &CMat) -> f64 {
    2.0 * rho[(0b010, 0b101)].re
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EntanglementClass {
    ConsistentWithSeparable,
    RequiresBipartite,
    RequiresGenuineTripartite,
}

/// Product states reach C ≤ 1/4, biseparable states C ≤ 1/2.
pub fn entanglement_class(c: f64) -> EntanglementClass {
    if c > 0.5 {
        EntanglementClass::RequiresGenuineTripartite
    } else if c > 0.25 {
        EntanglementClass::RequiresBipartite
    } else {
        EntanglementClass::ConsistentWithSeparable
    }
}

/// ½(M₀ + C)
pub fn ghz_fidelity(m0: Estimate, c: Estimate) -> Estimate {
    half_sum(m0, c)
}

/// ½(F_zzz + C), valid when classical errors do not add coherence.
pub fn process_fidelity_estimate(f_zzz: Estimate, c: Estimate) -> Estimate {
    half_sum(f_zzz, c)
}

fn half_sum(a: Estimate, b: Estimate) -> Estimate {
    Estimate::new(0.5 * (a.value + b.value), 0.5 * libm::sqrt(a.sigma * a.sigma + b.sigma * b.sigma))
}

/// Hermitian, unit trace and PSD within `tol`.
pub fn validate_density(rho: &CMat, tol: f64) -> Result<(), Error> {
    if !rho.is_square() {
        return Err(Error::InvalidDensity("not square".into()));
    }
    if !rho.is_hermitian(tol) {
        return Err(Error::InvalidDensity("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidDensity(alloc::format!("trace {}", tr.re)));
    }
    let e = eigh(rho);
    if e.values[0] < -tol {
        return Err(Error::InvalidDensity(alloc::format!("negative eigenvalue {}", e.values[0])));
    }
    Ok(())
}

const DENSITY_TOL: f64 = 1e-8;

/// ⟨ψ|ρ|ψ⟩
pub fn state_fidelity(rho: &CMat, target: &[C64]) -> Result<f64, Error> {
    validate_density(rho, DENSITY_TOL)?;
    if target.len() != rho.rows() {
        return Err(Error::Contract("target dimension differs from ρ".into()));
    }
    Ok(vdot(target, &rho.apply(target)).re)
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &CMat) -> Result<f64, Error> {
    validate_density(rho, DENSITY_TOL)?;
    if rho.rows() != 4 {
        return Err(Error::Contract("concurrence needs a two-qubit state".into()));
    }
    let yy = pauli(2).kron(&pauli(2));
    let tilde = yy.matmul(&rho.conj()).matmul(&yy);
    let s = sqrt_psd(rho);
    let r = s.matmul(&tilde).matmul(&s).hermitian_part();
    let mut l: Vec<f64> = eigh(&r).values.iter().map(|v| libm::sqrt(v.max(0.0))).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// P(X > threshold) for X ~ N(c, σ²).
pub fn gaussian_confidence(c: f64, sigma: f64, threshold: f64) -> f64 {
    if sigma <= 0.0 {
        return if c > threshold {
            1.0
        } else if c < threshold {
            0.0
        } else {
            0.5
        };
    }
    0.5 * libm::erfc((threshold - c) / (sigma * SQRT_2))
}

/// Bootstrap standard deviation of `stat` under multinomial resampling of
/// every setting's counts.
pub fn bootstrap_sigma(
    data: &[SettingData],
    stat: impl Fn(&[SettingData]) -> f64,
    replicas: usize,
    seed: u64,
) -> f64 {
    if replicas < 2 {
        return 0.0;
    }
    let mut values = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let mut rng = setting_rng(seed, r as u64);
        let resampled: Vec<SettingData> = data
            .iter()
            .map(|d| {
                let n = libm::round(d.total()) as u64;
                SettingData::poisson(multinomial(&mut rng, n, &d.probabilities()))
            })
            .collect();
        values.push(stat(&resampled));
    }
    let mean = values.iter().sum::<f64>() / replicas as f64;
    libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (replicas - 1) as f64)
}

pub(crate) fn multinomial(rng: &mut impl Rng, n: u64, p: &[f64]) -> Vec<f64> {
    let mut remaining = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(p.len());
    for &pi in p {
        let k = if remaining == 0 || pi <= 0.0 {
            0
        } else if pi >= mass {
            remaining
        } else {
            Binomial::new(remaining, (pi / mass).min(1.0)).map(|b| b.sample(rng)).unwrap_or(0)
        };
        remaining -= k;
        mass -= pi;
        out.push(k as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_operator_squares_to_identity() {
        for k in 0..12 {
            let s = s_operator(0.37 * k as f64);
            assert!(s.matmul(&s).max_abs_diff(&CMat::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn canonical_m2_pattern_matches_quoted_signs() {
        let m2 = m_operators()[1];
        let c = m2.canonical();
        assert!(c.matrix().max_abs_diff(&m2.matrix()) < 1e-12);
        let want = [-1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        let got = c.sign_pattern();
        for i in 0..8 {
            assert!((got[i] - want[i]).abs() < 1e-12, "{i}: {}", got[i]);
        }
    }

    #[test]
    fn confidence_edges() {
        assert!((gaussian_confidence(0.3, 0.2, 0.3) - 0.5).abs() < 1e-15);
        assert_eq!(gaussian_confidence(0.6, 0.0, 0.5), 1.0);
    }

    #[test]
    fn class_thresholds() {
        assert_eq!(entanglement_class(0.69), EntanglementClass::RequiresGenuineTripartite);
        assert_eq!(entanglement_class(0.3), EntanglementClass::RequiresBipartite);
        assert_eq!(entanglement_class(0.1), EntanglementClass::ConsistentWithSeparable);
    }
}
