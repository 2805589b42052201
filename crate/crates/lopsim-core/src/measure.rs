//! Polarization analyzers, coincidence post-selection, count sampling and
//! the subtraction of single-source events.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{CircuitSpec, HeraldBranch, Jones, Photon};
use crate::fock::{CreationPoly, FockState, ModeList, ModeRegistry, Pol};
use crate::linalg::{c64, cis, CMat, C64};
use crate::optics::embed;
use crate::Error;

/// Projective analyzer on a logical output qubit, given by the Bloch axis
/// of its "0" outcome: |n⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AnalyzerSetting {
    pub role: String,
    pub theta: f64,
    pub phi: f64,
}

impl AnalyzerSetting {
    pub fn new(role: &str, theta: f64, phi: f64) -> Self {
        AnalyzerSetting { role: role.to_string(), theta, phi }
    }

    pub fn z(role: &str) -> Self {
        Self::new(role, 0.0, 0.0)
    }

    /// Equatorial axis at azimuth φ.
    pub fn equatorial(role: &str, phi: f64) -> Self {
        Self::new(role, core::f64::consts::FRAC_PI_2, phi)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let pi = core::f64::consts::PI;
        if !(0.0..=pi).contains(&self.theta) || !(-pi - 1e-12..=pi + 1e-12).contains(&self.phi) {
            return Err(Error::Parameter(alloc::format!(
                "analyzer on `{}` has angles (θ={}, φ={}) outside θ∈[0,π], φ∈[−π,π]",
                self.role,
                self.theta,
                self.phi
            )));
        }
        Ok(())
    }

    /// Jones vectors of the "0" and "1" outcomes for a qubit with the
    /// given logical basis.
    pub fn eigenvectors(&self, zero: Jones, one: Jones) -> (Jones, Jones) {
        let (c, s) = (libm::cos(self.theta / 2.0), libm::sin(self.theta / 2.0));
        let e = cis(self.phi);
        let plus = [zero[0] * c + one[0] * e * s, zero[1] * c + one[1] * e * s];
        let minus = [-zero[0] * e.conj() * s + one[0] * c, -zero[1] * e.conj() * s + one[1] * c];
        (plus, minus)
    }
}

/// 2×2 Jones map sending `to_v` to V and `to_h` to H.
fn rotation_to(to_v: Jones, to_h: Jones) -> CMat {
    CMat::from_rows(&[[to_h[0].conj(), to_h[1].conj()], [to_v[0].conj(), to_v[1].conj()]])
}

fn orthogonal(j: Jones) -> Jones {
    [-j[1].conj(), j[0].conj()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DetectorModel {
    /// On/off detectors: a port counts when exactly one of its detectors fires.
    #[default]
    Threshold,
    /// Photon-number resolving: a port counts when it holds exactly one photon.
    NumberResolving,
}

/// Which output roles must register a photon.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CoincidencePattern {
    /// Roles analyzed in two outcomes, in outcome-label order.
    pub analyzed: Vec<String>,
    /// Roles behind a polarizer with a single detector.
    pub heralds: Vec<Photon>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub detector: DetectorModel,
}

impl CoincidencePattern {
    /// One photon at every logical output and at every herald of `branch`.
    pub fn for_branch(spec: &CircuitSpec, branch: &HeraldBranch, detector: DetectorModel) -> Result<Self, Error> {
        let mut analyzed = Vec::new();
        for q in &spec.logical_outputs {
            if q.zero.len() != 1 || q.one.len() != 1 || q.zero[0].role != q.one[0].role {
                return Err(Error::Contract(alloc::format!("qubit `{}` is not a single-photon output", q.name)));
            }
            analyzed.push(q.zero[0].role.clone());
        }
        Ok(CoincidencePattern { analyzed, heralds: branch.projections.clone(), detector })
    }

    pub fn photons_required(&self) -> usize {
        self.analyzed.len() + self.heralds.len()
    }
}

/// Mode-level analyzer unitary for `settings` and the pattern's heralds.
pub fn analyzer_unitary(
    spec: &CircuitSpec,
    registry: &ModeRegistry,
    pattern: &CoincidencePattern,
    settings: &[AnalyzerSetting],
) -> Result<CMat, Error> {
    let mut u = CMat::identity(registry.len());
    for role in &pattern.analyzed {
        let set = settings
            .iter()
            .find(|s| &s.role == role)
            .ok_or_else(|| Error::MissingSetting(role.clone()))?;
        set.validate()?;
        let q = spec
            .logical_outputs
            .iter()
            .find(|q| q.zero.first().map(|p| &p.role) == Some(role))
            .ok_or_else(|| Error::UnknownPort(role.clone()))?;
        let (plus, minus) = set.eigenvectors(q.zero[0].jones, q.one[0].jones);
        let port = spec.output_port(role)?;
        u = embed(&rotation_to(plus, minus), registry, &[port.to_string()])?.matmul(&u);
    }
    for h in &pattern.heralds {
        let port = spec.output_port(&h.role)?;
        u = embed(&rotation_to(h.jones, orthogonal(h.jones)), registry, &[port.to_string()])?.matmul(&u);
    }
    Ok(u)
}

/// Per-mode role in the click logic.
#[derive(Clone, Copy)]
enum Slot {
    None,
    Analyzed(usize, Pol),
    Herald(usize, Pol),
}

/// Click classifier for states already rotated into the analyzer frame.
pub struct Classifier {
    slots: Vec<Slot>,
    n_analyzed: usize,
    n_heralds: usize,
    detector: DetectorModel,
}

impl Classifier {
    pub fn new(spec: &CircuitSpec, registry: &ModeRegistry, pattern: &CoincidencePattern) -> Result<Self, Error> {
        let mut slots = vec![Slot::None; registry.len()];
        let mut mark = |role: &str, f: &dyn Fn(Pol) -> Slot| -> Result<(), Error> {
            let p = registry.port_index(spec.output_port(role)?)?;
            for k in 0..registry.n_internal() {
                for pol in Pol::BOTH {
                    slots[registry.mode_at(p, pol, k)] = f(pol);
                }
            }
            Ok(())
        };
        for (i, r) in pattern.analyzed.iter().enumerate() {
            mark(r, &|pol| Slot::Analyzed(i, pol))?;
        }
        for (i, h) in pattern.heralds.iter().enumerate() {
            mark(&h.role, &|pol| Slot::Herald(i, pol))?;
        }
        Ok(Classifier { slots, n_analyzed: pattern.analyzed.len(), n_heralds: pattern.heralds.len(), detector: pattern.detector })
    }

    /// Outcome index (bit i set when analyzed role i gave outcome 1), or
    /// `None` when the pattern is not satisfied.
    pub fn outcome(&self, key: ModeList) -> Option<usize> {
        let mut hv = [[0u8; 2]; 8];
        let mut herald = [0u8; 8];
        for m in key.modes() {
            match self.slots[m as usize] {
                Slot::None => {}
                Slot::Analyzed(i, pol) => hv[i][pol.index()] += 1,
                Slot::Herald(i, Pol::V) => herald[i] += 1,
                Slot::Herald(_, Pol::H) => {}
            }
        }
        for &h in &herald[..self.n_heralds] {
            let ok = match self.detector {
                DetectorModel::Threshold => h >= 1,
                DetectorModel::NumberResolving => h == 1,
            };
            if !ok {
                return None;
            }
        }
        let mut idx = 0usize;
        for (i, [h, v]) in hv[..self.n_analyzed].iter().copied().enumerate() {
            let bit = match self.detector {
                DetectorModel::Threshold => match (h > 0, v > 0) {
                    (true, false) => 1,
                    (false, true) => 0,
                    _ => return None,
                },
                DetectorModel::NumberResolving => match (h, v) {
                    (1, 0) => 1,
                    (0, 1) => 0,
                    _ => return None,
                },
            };
            idx |= bit << (self.n_analyzed - 1 - i);
        }
        Some(idx)
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.n_analyzed
    }

    /// Adds the outcome probabilities of a rotated state to `acc`.
    pub fn accumulate(&self, rotated: &CreationPoly, weight: f64, acc: &mut [f64]) {
        for (key, a) in rotated.amplitudes() {
            if let Some(o) = self.outcome(key) {
                acc[o] += weight * a.norm_sqr();
            }
        }
    }
}

pub fn outcome_label(index: usize, n_bits: usize) -> String {
    (0..n_bits).map(|i| if (index >> (n_bits - 1 - i)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Absolute joint probabilities of analyzer outcomes and pattern success.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeProbabilities {
    pub probabilities: BTreeMap<String, f64>,
    /// Set when the state carries fewer photons than the pattern needs.
    pub insufficient_photons: bool,
}

impl OutcomeProbabilities {
    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }
}

pub fn outcome_probabilities(
    state: &FockState,
    spec: &CircuitSpec,
    pattern: &CoincidencePattern,
    settings: &[AnalyzerSetting],
) -> Result<OutcomeProbabilities, Error> {
    let reg = state.registry();
    let u = analyzer_unitary(spec, reg, pattern, settings)?;
    let cls = Classifier::new(spec, reg, pattern)?;
    let mut acc = vec![0.0; cls.n_outcomes()];
    cls.accumulate(&state.to_poly()?.substitute(&u), 1.0, &mut acc);
    let n = pattern.analyzed.len();
    Ok(OutcomeProbabilities {
        probabilities: acc.iter().enumerate().map(|(i, &p)| (outcome_label(i, n), p)).collect(),
        insufficient_photons: state.max_photons() < pattern.photons_required(),
    })
}

/// Normalized logical state of the analyzed qubits after the herald
/// projections, with internal labels and undetected modes traced out.
#[derive(Clone, Debug)]
pub struct ConditionalState {
    /// `None` for a zero-probability branch.
    pub rho: Option<CMat>,
    pub probability: f64,
}

pub fn conditional_logical_state(
    state: &FockState,
    spec: &CircuitSpec,
    pattern: &CoincidencePattern,
) -> Result<ConditionalState, Error> {
    conditional_from_poly(&state.to_poly()?, state.registry(), spec, pattern)
}

pub(crate) fn conditional_from_poly(
    poly: &CreationPoly,
    reg: &ModeRegistry,
    spec: &CircuitSpec,
    pattern: &CoincidencePattern,
) -> Result<ConditionalState, Error> {
    let settings: Vec<AnalyzerSetting> = pattern.analyzed.iter().map(|r| AnalyzerSetting::z(r)).collect();
    let u = analyzer_unitary(spec, reg, pattern, &settings)?;
    let rotated = poly.substitute(&u);
    let n = pattern.analyzed.len();
    let d = 1usize << n;
    let analyzed_ports: Vec<usize> = pattern
        .analyzed
        .iter()
        .map(|r| spec.output_port(r).and_then(|p| reg.port_index(p)))
        .collect::<Result<_, _>>()?;
    let herald_ports: Vec<usize> = pattern
        .heralds
        .iter()
        .map(|h| spec.output_port(&h.role).and_then(|p| reg.port_index(p)))
        .collect::<Result<_, _>>()?;
    let mut env: BTreeMap<ModeList, Vec<C64>> = BTreeMap::new();
    'terms: for (key, amp) in rotated.amplitudes() {
        let mut seen = vec![0u8; n];
        let mut heralded = vec![0u8; herald_ports.len()];
        let mut idx = 0usize;
        let mut rest = ModeList::EMPTY;
        for m in key.modes() {
            let m = m as usize;
            let port = reg.port_of(m);
            if let Some(i) = analyzed_ports.iter().position(|&p| p == port) {
                seen[i] += 1;
                if reg.pol_of(m) == Pol::H {
                    idx |= 1 << (n - 1 - i);
                }
                rest = rest.with(reg.mode_at(port, Pol::H, reg.label(m).internal) as u8);
                continue;
            }
            if let Some(i) = herald_ports.iter().position(|&p| p == port) {
                if reg.pol_of(m) == Pol::V {
                    heralded[i] += 1;
                }
            }
            rest = rest.with(m as u8);
        }
        if seen.iter().any(|&c| c != 1) || heralded.iter().any(|&c| c != 1) {
            continue 'terms;
        }
        env.entry(rest).or_insert_with(|| vec![C64::zero(); d])[idx] += amp;
    }
    let mut rho = CMat::zeros(d, d);
    for v in env.values() {
        rho = rho.add(&CMat::outer(v, v));
    }
    let p = rho.trace().re;
    if p <= 1e-300 {
        return Ok(ConditionalState { rho: None, probability: 0.0 });
    }
    Ok(ConditionalState { rho: Some(rho.scale(c64(1.0 / p, 0.0))), probability: p })
}

/// Counts of one outcome under one analyzer setting.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountRecord {
    pub setting_id: String,
    pub outcome: String,
    pub count: u64,
    pub shots: u64,
    pub seed: u64,
}

/// Deterministic RNG for one setting: the stream index separates settings
/// so that draws do not depend on scheduling.
pub fn setting_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw of `shots` events from `probabilities` (renormalized).
pub fn sample_counts(
    setting_id: &str,
    probabilities: &BTreeMap<String, f64>,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Vec<CountRecord> {
    let mut rng = setting_rng(seed, stream);
    let total: f64 = probabilities.values().filter(|p| **p > 0.0).sum();
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probabilities.len());
    for (outcome, &p) in probabilities {
        let p = if total > 0.0 { p.max(0.0) / total } else { 0.0 };
        let k = if remaining == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            remaining
        } else {
            Binomial::new(remaining, (p / mass).min(1.0)).map(|b| b.sample(&mut rng)).unwrap_or(0)
        };
        remaining -= k;
        mass -= p;
        out.push(CountRecord { setting_id: setting_id.to_string(), outcome: outcome.clone(), count: k, shots, seed });
    }
    out
}

/// Result of subtracting blocked-source runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Subtracted {
    pub records: Vec<CountRecord>,
    /// Outcomes where the blocked runs exceeded the total.
    pub floored_outcomes: usize,
    /// Counts removed by flooring at zero.
    pub floored_mass: u64,
}

fn index(records: &[CountRecord]) -> BTreeMap<(String, String), &CountRecord> {
    records.iter().map(|r| ((r.setting_id.clone(), r.outcome.clone()), r)).collect()
}

fn settings_of(records: &[CountRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.setting_id.as_str()).collect()
}

/// total − blockedA − blockedB per (setting, outcome), floored at zero.
pub fn subtract_single_source_events(
    total: &[CountRecord],
    blocked_a: &[CountRecord],
    blocked_b: &[CountRecord],
) -> Result<Subtracted, Error> {
    let s = settings_of(total);
    for (name, other) in [("blocked A", blocked_a), ("blocked B", blocked_b)] {
        if settings_of(other) != s {
            return Err(Error::SettingMismatch(alloc::format!("{name} run covers different settings")));
        }
    }
    let (ia, ib) = (index(blocked_a), index(blocked_b));
    let mut out = Vec::with_capacity(total.len());
    let (mut floored_outcomes, mut floored_mass) = (0, 0);
    for r in total {
        let key = (r.setting_id.clone(), r.outcome.clone());
        let sub = ia.get(&key).map_or(0, |x| x.count) + ib.get(&key).map_or(0, |x| x.count);
        if sub > r.count {
            floored_outcomes += 1;
            floored_mass += sub - r.count;
        }
        out.push(CountRecord { count: r.count.saturating_sub(sub), ..r.clone() });
    }
    Ok(Subtracted { records: out, floored_outcomes, floored_mass })
}

/// Rows normalized to unit sum.
pub fn normalize_per_input(
    counts: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, Error> {
    counts
        .iter()
        .map(|(input, row)| {
            let t: f64 = row.values().sum();
            if t <= 0.0 {
                return Err(Error::ZeroRow(input.clone()));
            }
            Ok((input.clone(), row.iter().map(|(o, c)| (o.clone(), c / t)).collect()))
        })
        .collect()
}

/// Groups count records of one setting into an outcome → count map.
pub fn counts_by_outcome(records: &[CountRecord], setting_id: &str) -> BTreeMap<String, f64> {
    records.iter().filter(|r| r.setting_id == setting_id).map(|r| (r.outcome.clone(), r.count as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_msb_first() {
        assert_eq!(outcome_label(0b101, 3), "101");
        assert_eq!(outcome_label(1, 3), "001");
    }

    #[test]
    fn deterministic_point_mass() {
        let mut p = BTreeMap::new();
        p.insert("00".to_string(), 1.0);
        p.insert("01".to_string(), 0.0);
        let r = sample_counts("s", &p, 1000, 3, 0);
        assert_eq!(r[0].count, 1000);
        assert_eq!(r[1].count, 0);
        assert!(sample_counts("s", &p, 0, 3, 0).iter().all(|r| r.count == 0));
    }

    #[test]
    fn analyzer_eigenvectors_are_orthonormal() {
        let z = crate::optics::jones("V").unwrap();
        let o = crate::optics::jones("H").unwrap();
        let a = AnalyzerSetting::new("x", 1.1, -0.4);
        let (p, m) = a.eigenvectors(z, o);
        assert!(crate::linalg::vdot(&p, &m).norm() < 1e-15);
        assert!((crate::linalg::vdot(&p, &p).re - 1.0).abs() < 1e-15);
    }
}
