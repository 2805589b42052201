//! Scenario files and the built-in scenario catalogue.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use lopsim_core::circuit::{gates, measured_components};
use lopsim_core::experiment::Analysis;
use lopsim_core::source::SourceConfig;
use lopsim_core::CMat;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub circuit: CircuitRef,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub source: SourceConfig,
    pub ideal: IdealGate,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub measurement: Measurement,
    #[serde(default = "yes")]
    pub subtract: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CircuitRef {
    Builtin(String),
    /// Relative paths resolve against the scenario file's directory.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseKind {
    /// One perfect photon per input role.
    #[default]
    Ideal,
    /// Entangled control pair plus target pair from two SPDC sources.
    Cswap,
    /// Two photons from independent sources.
    TwoPhoton { first: String, second: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdealGate {
    Identity1,
    Identity2,
    Swap,
    SqrtSwap,
    Cnot,
    ReversedCnot,
    Fredkin,
}

impl IdealGate {
    pub fn matrix(self) -> CMat {
        match self {
            IdealGate::Identity1 => CMat::identity(2),
            IdealGate::Identity2 => CMat::identity(4),
            IdealGate::Swap => gates::swap(),
            IdealGate::SqrtSwap => gates::sqrt_swap(),
            IdealGate::Cnot => gates::cnot(),
            IdealGate::ReversedCnot => gates::permutation(4, gates::reversed_cnot_map),
            IdealGate::Fredkin => gates::fredkin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    #[serde(default)]
    pub shots: Shots,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Shots per setting, or exact probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ShotsRepr", into = "ShotsRepr")]
pub enum Shots {
    #[default]
    Exact,
    Count(u64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = String;
    fn try_from(r: ShotsRepr) -> Result<Self, String> {
        match r {
            ShotsRepr::Count(n) => Ok(Shots::Count(n)),
            ShotsRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Shots> for ShotsRepr {
    fn from(s: Shots) -> Self {
        match s {
            Shots::Exact => ShotsRepr::Word("exact".into()),
            Shots::Count(n) => ShotsRepr::Count(n),
        }
    }
}

impl FromStr for Shots {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        s.parse().map(Shots::Count).map_err(|_| format!("shots must be a count or `exact`, got `{s}`"))
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Count(n) => write!(f, "{n}"),
        }
    }
}

impl Scenario {
    /// Parses and validates a scenario; relative circuit paths are resolved
    /// against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> anyhow::Result<Self> {
        let mut sc: Scenario = serde_json::from_str(text).context("scenario does not parse")?;
        if let (CircuitRef::File(p), Some(b)) = (&mut sc.circuit, base) {
            if p.is_relative() {
                *p = b.join(&*p);
            }
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path.parent()).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.analyses.is_empty() {
            bail!("`analyses` is empty");
        }
        if let Shots::Count(n) = self.measurement.shots {
            if n > 0 && self.measurement.seed.is_none() {
                bail!("`measurement.seed` is required when shots > 0");
            }
        }
        if let CircuitRef::File(p) = &self.circuit {
            if !p.exists() {
                bail!("circuit file {} does not exist", p.display());
            }
        }
        Ok(())
    }
}

/// Every built-in scenario name.
pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "cswap-ideal-truth-table",
    "cswap-ghz-coherence",
    "cswap-paper-noise",
    "cnot-ideal",
    "cnot-complementary-ideal",
    "cnot-distinguishable",
    "cnot-complementary-distinguishable",
];

/// HOM visibility 0.862 as an amplitude overlap.
pub fn measured_overlap() -> f64 {
    0.862f64.sqrt()
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let base = |circuit: &str, ideal: IdealGate, analyses: Vec<Analysis>| Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        circuit: CircuitRef::Builtin(circuit.into()),
        noise: NoiseKind::Ideal,
        source: SourceConfig::default(),
        ideal,
        analyses,
        measurement: Measurement::default(),
        subtract: true,
    };
    let two_photon = || NoiseKind::TwoPhoton { first: "Cin".into(), second: "Tin".into() };
    let tt = vec![Analysis::TruthTable];
    Some(match name {
        "cswap-ideal-truth-table" => base("cswap-simplified", IdealGate::Fredkin, tt),
        "cswap-ghz-coherence" => base("cswap-simplified", IdealGate::Fredkin, vec![Analysis::Coherence]),
        "cswap-paper-noise" => {
            let mut s = base("cswap-simplified", IdealGate::Fredkin, vec![Analysis::TruthTable, Analysis::Coherence]);
            s.noise = NoiseKind::Cswap;
            s.source = SourceConfig {
                contamination: Some(0.1),
                overlap: measured_overlap(),
                entangled_state_fidelity: Some(0.962),
                component_overrides: measured_components(),
                ..SourceConfig::default()
            };
            s
        }
        "cnot-ideal" => base("ppbs-cnot", IdealGate::Cnot, tt),
        "cnot-complementary-ideal" => base("ppbs-cnot-complementary", IdealGate::ReversedCnot, tt),
        "cnot-distinguishable" | "cnot-complementary-distinguishable" => {
            let comp = name.starts_with("cnot-complementary");
            let (c, g) =
                if comp { ("ppbs-cnot-complementary", IdealGate::ReversedCnot) } else { ("ppbs-cnot", IdealGate::Cnot) };
            let mut s = base(c, g, tt);
            s.noise = two_photon();
            s.source.overlap = measured_overlap();
            s
        }
        _ => return None,
    })
}

/// Parameters a sweep can vary.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepParameter {
    Epsilon,
    Overlap,
    Contamination,
    EntangledStateFidelity,
    Shots,
    /// `component:<label>.<param>`
    Component { label: String, param: String },
}

impl FromStr for SweepParameter {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "epsilon" => SweepParameter::Epsilon,
            "overlap" => SweepParameter::Overlap,
            "contamination" => SweepParameter::Contamination,
            "entangled-state-fidelity" => SweepParameter::EntangledStateFidelity,
            "shots" => SweepParameter::Shots,
            _ => match s.strip_prefix("component:").and_then(|r| r.split_once('.')) {
                Some((label, param)) if !label.is_empty() && !param.is_empty() => {
                    SweepParameter::Component { label: label.into(), param: param.into() }
                }
                _ => bail!(
                    "unknown sweep parameter `{s}`; expected epsilon, overlap, contamination, \
                     entangled-state-fidelity, shots or component:<label>.<param>"
                ),
            },
        })
    }
}

impl SweepParameter {
    /// Copy of `sc` with the parameter set to `value`.
    pub fn apply(&self, sc: &Scenario, value: f64) -> anyhow::Result<Scenario> {
        let mut s = sc.clone();
        match self {
            SweepParameter::Epsilon => {
                s.source.epsilon = value;
                s.source.contamination = None;
            }
            SweepParameter::Overlap => s.source.overlap = value,
            SweepParameter::Contamination => s.source.contamination = Some(value),
            SweepParameter::EntangledStateFidelity => s.source.entangled_state_fidelity = Some(value),
            SweepParameter::Shots => {
                if value < 0.0 || value.fract() != 0.0 {
                    bail!("shots must be a non-negative integer, got {value}");
                }
                s.measurement.shots = Shots::Count(value as u64);
                s.measurement.seed.get_or_insert(0);
            }
            SweepParameter::Component { label, param } => {
                s.source
                    .component_overrides
                    .entry(label.clone())
                    .or_default()
                    .insert(param.clone(), value);
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_roundtrip_through_json() {
        for name in BUILTIN_SCENARIOS {
            let s = builtin(name).unwrap();
            let back = Scenario::parse(&s.to_json(), None).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let mut v: serde_json::Value = serde_json::from_str(&builtin("cnot-ideal").unwrap().to_json()).unwrap();
        v["colour"] = "blue".into();
        let text = serde_json::to_string_pretty(&v).unwrap();
        let err = format!("{:#}", Scenario::parse(&text, None).unwrap_err());
        assert!(err.contains("colour") && err.contains("line"), "{err}");
    }

    #[test]
    fn shots_parse() {
        assert_eq!("exact".parse::<Shots>().unwrap(), Shots::Exact);
        assert_eq!("400".parse::<Shots>().unwrap(), Shots::Count(400));
        assert!("-1".parse::<Shots>().is_err());
    }
}
