//! Photon sources and their imperfections.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::circuit::{CircuitSpec, QubitEncoding};
use crate::fock::{CreationPoly, FockState, ModeList, ModeRegistry, Pol};
use crate::linalg::{c64, eigh, CMat, C64};
use crate::Error;

const NORM_TOL: f64 = 1e-9;

/// Source parameters of a noisy run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SourceConfig {
    /// Pair-emission amplitude per source.
    #[cfg_attr(feature = "serde", serde(default))]
    pub epsilon: f64,
    /// When set, ε is solved so that this fraction of the subtracted
    /// coincidences comes from one extra pair.
    #[cfg_attr(feature = "serde", serde(default))]
    pub contamination: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default = "default_pairs"))]
    pub n_max_pairs: usize,
    /// Internal-mode overlap between photons of independent sources.
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub overlap: f64,
    /// Target fidelity of the entangled control pair; `None` is ideal.
    #[cfg_attr(feature = "serde", serde(default))]
    pub entangled_state_fidelity: Option<f64>,
    /// Element label → parameter overrides.
    #[cfg_attr(feature = "serde", serde(default))]
    pub component_overrides: BTreeMap<String, BTreeMap<String, f64>>,
}

#[cfg(feature = "serde")]
fn default_pairs() -> usize {
    1
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            epsilon: 0.0,
            contamination: None,
            n_max_pairs: 1,
            overlap: 1.0,
            entangled_state_fidelity: None,
            component_overrides: BTreeMap::new(),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self, n_sources: usize) -> Result<(), Error> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(alloc::format!("epsilon = {} must be ≥ 0", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Parameter(alloc::format!("overlap = {} outside [0,1]", self.overlap)));
        }
        if let Some(f) = self.contamination {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Parameter(alloc::format!("contamination = {f} outside [0,1)")));
            }
        }
        if let Some(f) = self.entangled_state_fidelity {
            if !(f > 0.25 && f <= 1.0) {
                return Err(Error::Parameter(alloc::format!("entangled-state fidelity {f} outside (1/4, 1]")));
            }
        }
        if self.n_max_pairs == 0 || self.n_max_pairs * 2 * n_sources > crate::fock::N_MAX_LIMIT {
            return Err(Error::Parameter(alloc::format!(
                "n_max_pairs = {} exceeds the photon-number limit for {n_sources} sources",
                self.n_max_pairs
            )));
        }
        Ok(())
    }
}

fn check_normalized(name: &str, v: &[C64]) -> Result<(), Error> {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(name.to_string()));
    }
    Ok(())
}

/// Product of logical qubit states `qubits[q]` = (α, β) for every logical
/// input of `spec`, with any ancilla attached.
pub fn ideal_input(spec: &CircuitSpec, registry: &Arc<ModeRegistry>, qubits: &[[C64; 2]]) -> Result<FockState, Error> {
    if qubits.len() != spec.logical_inputs.len() {
        return Err(Error::Contract("one state per logical qubit expected".into()));
    }
    for (q, s) in qubits.iter().enumerate() {
        check_normalized(&spec.logical_inputs[q].name, s)?;
    }
    let amps = product_amplitudes(qubits);
    let poly = crate::circuit::logical_superposition_poly(spec, registry, &amps)?;
    let st = poly.to_state(registry);
    st.check_truncation()?;
    Ok(st)
}

/// Kronecker product of single-qubit amplitude pairs.
pub fn product_amplitudes(qubits: &[[C64; 2]]) -> Vec<C64> {
    let mut v = vec![c64(1.0, 0.0)];
    for q in qubits {
        v = crate::linalg::kron_vec(&v, q);
    }
    v
}

/// Internal-mode assignment of the photons of one emitter.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InternalMode {
    /// Every photon in internal label `k`.
    Label(u8),
    /// Every photon in the pure internal state s|0⟩ + √(1−s²)|1⟩.
    Overlap(f64),
}

impl InternalMode {
    fn weights(self, n_internal: u8) -> Result<Vec<(u8, f64)>, Error> {
        match self {
            InternalMode::Label(k) if k < n_internal => Ok(vec![(k, 1.0)]),
            InternalMode::Label(k) => Err(Error::Parameter(alloc::format!("internal label {k} not registered"))),
            InternalMode::Overlap(s) if s >= 1.0 => Ok(vec![(0, 1.0)]),
            InternalMode::Overlap(s) if n_internal >= 2 => Ok(vec![(0, s), (1, libm::sqrt(1.0 - s * s))]),
            InternalMode::Overlap(_) => Err(Error::Parameter("partial overlap needs two internal labels".into())),
        }
    }
}

/// A source feeding a set of input roles with a (possibly mixed)
/// polarization state.
#[derive(Clone, Debug, PartialEq)]
pub struct Emitter {
    pub name: String,
    pub roles: Vec<String>,
    /// Mixture of pure polarization states over the roles, basis index
    /// Σ pol(role r)·2^(n−1−r) with H = 0 and V = 1.
    pub components: Vec<(f64, Vec<C64>)>,
    pub internal: InternalMode,
    /// Whether the emitter is an SPDC process that may emit several pairs.
    pub multipair: bool,
}

impl Emitter {
    /// Creation polynomial K† of one emission of mixture component `c`.
    pub fn emission_poly(
        &self,
        c: usize,
        spec: &CircuitSpec,
        registry: &ModeRegistry,
    ) -> Result<CreationPoly, Error> {
        let vec = &self.components[c].1;
        let n = self.roles.len();
        let ports: Vec<usize> = self
            .roles
            .iter()
            .map(|r| spec.input_port(r).and_then(|p| registry.port_index(p)))
            .collect::<Result<_, _>>()?;
        let mut terms = Vec::new();
        for (k, w) in self.internal.weights(registry.n_internal())? {
            for (b, &a) in vec.iter().enumerate() {
                if a == C64::zero() {
                    continue;
                }
                let mut key = ModeList::EMPTY;
                for (r, &p) in ports.iter().enumerate() {
                    let pol = if (b >> (n - 1 - r)) & 1 == 0 { Pol::H } else { Pol::V };
                    key = key.with(registry.mode_at(p, pol, k) as u8);
                }
                terms.push((key, a * w));
            }
        }
        Ok(CreationPoly::from_terms(terms))
    }
}

/// Polarization state over `roles` produced by the logical qubits whose
/// photons occupy exactly those roles.
pub fn emitter_state(spec: &CircuitSpec, roles: &[String], qubits: &[[C64; 2]]) -> Result<Vec<C64>, Error> {
    let n = roles.len();
    let mut owned: Vec<(&QubitEncoding, [C64; 2])> = Vec::new();
    for (q, enc) in spec.logical_inputs.iter().enumerate() {
        let inside = enc.zero.iter().chain(&enc.one).filter(|p| roles.contains(&p.role)).count();
        let total = enc.zero.len() + enc.one.len();
        if inside == total {
            owned.push((enc, qubits[q]));
        } else if inside != 0 {
            return Err(Error::Contract(alloc::format!("qubit `{}` straddles emitters", enc.name)));
        }
    }
    let mut covered = vec![false; n];
    for (enc, _) in &owned {
        for ph in enc.zero.iter().chain(&enc.one) {
            covered[roles.iter().position(|r| *r == ph.role).unwrap()] = true;
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::Contract("emitter role not fed by any logical qubit".into()));
    }
    let mut out = vec![C64::zero(); 1 << n];
    for (b, slot) in out.iter_mut().enumerate() {
        let pol_of = |role: &str| {
            let r = roles.iter().position(|x| x == role).unwrap();
            (b >> (n - 1 - r)) & 1
        };
        let mut amp = c64(1.0, 0.0);
        for (enc, s) in &owned {
            let branch = |photons: &[crate::circuit::Photon]| {
                photons.iter().fold(c64(1.0, 0.0), |acc, ph| acc * ph.jones[pol_of(&ph.role)])
            };
            amp *= s[0] * branch(&enc.zero) + s[1] * branch(&enc.one);
        }
        *slot = amp;
    }
    Ok(out)
}

/// `(ε K†)ⁿ / n!` for one emitter.
pub fn spdc_sector(emission: &CreationPoly, epsilon: f64, n: usize) -> Result<CreationPoly, Error> {
    Ok(emission.power_over_factorial(n)?.scale(c64(libm::pow(epsilon, n as f64), 0.0)))
}

/// Coherent multi-pair state of several emitters.
#[derive(Clone, Debug)]
pub struct SourceState {
    pub state: FockState,
    /// Norm of the first dropped order relative to the retained norm.
    pub truncation_error: f64,
    /// Set when `truncation_error` exceeds 1e-6.
    pub truncation_warning: bool,
}

/// Truncated two-mode-squeezed expansion Σ ∏ᵢ (ε Kᵢ†)^{nᵢ}/nᵢ! |0⟩ with
/// nᵢ ≤ `n_max_pairs`, normalized after truncation.
pub fn spdc_multipair_state(
    emissions: &[CreationPoly],
    epsilon: f64,
    n_max_pairs: usize,
    registry: &Arc<ModeRegistry>,
) -> Result<SourceState, Error> {
    let mut orders = vec![0usize; emissions.len()];
    let mut total = CreationPoly::zero();
    loop {
        let mut term = CreationPoly::one();
        for (e, &n) in emissions.iter().zip(&orders) {
            term = term.mul(&spdc_sector(e, epsilon, n)?)?;
        }
        total = total.add(&term);
        if !next_orders(&mut orders, n_max_pairs) {
            break;
        }
    }
    let kept = total.norm_sqr();
    let mut dropped = 0.0;
    if n_max_pairs < crate::fock::N_MAX_LIMIT / 2 {
        for e in emissions {
            dropped += spdc_sector(e, epsilon, n_max_pairs + 1)?.norm_sqr();
        }
    }
    let truncation_error = if kept > 0.0 { libm::sqrt(dropped / kept) } else { 0.0 };
    let mut state = total.scale(c64(1.0 / libm::sqrt(kept), 0.0)).to_state(registry);
    state.prune();
    Ok(SourceState { state, truncation_error, truncation_warning: truncation_error > 1e-6 })
}

fn next_orders(orders: &mut [usize], max: usize) -> bool {
    for o in orders.iter_mut() {
        if *o < max {
            *o += 1;
            return true;
        }
        *o = 0;
    }
    false
}

/// Mode map sending label 0 of every listed port to s|0⟩ + √(1−s²)|1⟩.
///
/// Acts isometrically on states that populate only label 0 on those ports.
pub fn distinguishability_map(registry: &ModeRegistry, ports: &[&str], s: f64) -> Result<CMat, Error> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Parameter(alloc::format!("overlap {s} outside [0,1]")));
    }
    let mut m = CMat::identity(registry.len());
    if s >= 1.0 {
        return Ok(m);
    }
    if registry.n_internal() < 2 {
        return Err(Error::Parameter("partial overlap needs two internal labels".into()));
    }
    let c = libm::sqrt(1.0 - s * s);
    for p in ports {
        let pi = registry.port_index(p)?;
        for pol in Pol::BOTH {
            let a = registry.mode_at(pi, pol, 0);
            let b = registry.mode_at(pi, pol, 1);
            m[(a, a)] = c64(s, 0.0);
            m[(b, a)] = c64(c, 0.0);
        }
    }
    Ok(m)
}

/// Moves the photons on `ports` into an internal state with overlap `s`
/// to label 0.
pub fn apply_distinguishability(state: &FockState, ports: &[&str], s: f64) -> Result<FockState, Error> {
    let m = distinguishability_map(state.registry(), ports, s)?;
    Ok(state.to_poly()?.substitute(&m).to_state(state.registry()))
}

/// Werner mixture λ|ψ⟩⟨ψ| + (1−λ)I/d with ⟨ψ|ρ|ψ⟩ = `fidelity`.
pub fn werner(psi: &[C64], fidelity: f64) -> Result<CMat, Error> {
    let d = psi.len() as f64;
    if !(fidelity > 1.0 / d && fidelity <= 1.0) {
        return Err(Error::Parameter(alloc::format!("fidelity {fidelity} not reachable by a Werner state")));
    }
    check_normalized("psi", psi)?;
    let lambda = werner_lambda(fidelity, psi.len());
    let pure = CMat::outer(psi, psi);
    Ok(pure.scale(c64(lambda, 0.0)).add(&CMat::identity(psi.len()).scale(c64((1.0 - lambda) / d, 0.0))))
}

/// λ = (d·F − 1)/(d − 1)
pub fn werner_lambda(fidelity: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * fidelity - 1.0) / (d - 1.0)
}

/// Werner state around (|HH⟩ + |VV⟩)/√2.
pub fn imperfect_entangled_pair(fidelity_target: f64) -> Result<CMat, Error> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    werner(&[c64(r, 0.0), C64::zero(), C64::zero(), c64(r, 0.0)], fidelity_target)
}

/// Eigen-decomposition of a density matrix as a convex mixture.
pub fn mixture_components(rho: &CMat) -> Vec<(f64, Vec<C64>)> {
    let e = eigh(rho);
    (0..rho.rows()).rev().filter(|&k| e.values[k] > 1e-12).map(|k| (e.values[k], e.vector(k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn werner_lambda_matches_fidelity() {
        let rho = imperfect_entangled_pair(0.962).unwrap();
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let phi = [c64(r, 0.0), C64::zero(), C64::zero(), c64(r, 0.0)];
        let f = crate::linalg::vdot(&phi, &rho.apply(&phi)).re;
        assert!((f - 0.962).abs() < 1e-12);
        assert!((werner_lambda(0.962, 4) - (4.0 * 0.962 - 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_reassembles_density() {
        let rho = imperfect_entangled_pair(0.8).unwrap();
        let mut acc = CMat::zeros(4, 4);
        for (w, v) in mixture_components(&rho) {
            acc = acc.add(&CMat::outer(&v, &v).scale(c64(w, 0.0)));
        }
        assert!(acc.max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn infeasible_fidelity_rejected() {
        assert!(imperfect_entangled_pair(0.2).is_err());
    }
}
