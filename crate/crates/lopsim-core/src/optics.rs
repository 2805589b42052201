//! Transfer-matrix builders for the optical elements.
//!
//! Local matrices act on `(port0 H, port0 V, port1 H, port1 V)`, the same
//! layout a registry with one internal label uses. [`embed`] places a local
//! block into a registry, repeating it on every internal label.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;
use core::fmt;

use num_traits::Zero;

use crate::fock::{ModeRegistry, Pol, TransferMatrix};
use crate::linalg::{c64, cis, CMat, C64};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ElementKind {
    BS,
    PPBS,
    PBS,
    HWP,
    QWP,
    PhasePlate,
    Mirror,
    PolarizationRotation,
}

impl ElementKind {
    pub const ALL: [ElementKind; 8] = [
        ElementKind::BS,
        ElementKind::PPBS,
        ElementKind::PBS,
        ElementKind::HWP,
        ElementKind::QWP,
        ElementKind::PhasePlate,
        ElementKind::Mirror,
        ElementKind::PolarizationRotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::BS => "BS",
            ElementKind::PPBS => "PPBS",
            ElementKind::PBS => "PBS",
            ElementKind::HWP => "HWP",
            ElementKind::QWP => "QWP",
            ElementKind::PhasePlate => "PhasePlate",
            ElementKind::Mirror => "Mirror",
            ElementKind::PolarizationRotation => "PolarizationRotation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Allowed parameter names; the first group is required.
    fn params(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            ElementKind::BS => (&["R"], &[]),
            ElementKind::PPBS => (&["R_H", "R_V"], &["T_H", "T_V"]),
            ElementKind::PBS => (&[], &[]),
            ElementKind::HWP | ElementKind::QWP | ElementKind::PolarizationRotation => (&["theta"], &[]),
            ElementKind::PhasePlate => (&["phi"], &[]),
            ElementKind::Mirror => (&["R_H", "R_V"], &[]),
        }
    }

    fn port_counts(self) -> &'static [usize] {
        match self {
            ElementKind::BS | ElementKind::PPBS | ElementKind::PBS => &[2],
            ElementKind::Mirror => &[1, 2],
            _ => &[1],
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One element bound to named ports.
///
/// A mirror given a second port sends its lost light there, which keeps the
/// element unitary.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ElementSpec {
    pub kind: ElementKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub params: BTreeMap<String, f64>,
    pub ports: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub label: Option<String>,
}

impl ElementSpec {
    pub fn new(kind: ElementKind, params: &[(&str, f64)], ports: &[&str]) -> Self {
        ElementSpec {
            kind,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ports: ports.iter().map(|p| p.to_string()).collect(),
            label: None,
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn param(&self, name: &str) -> Result<f64, Error> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parameter(alloc::format!("{} missing parameter `{name}`", self.kind)))
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (required, optional) = self.kind.params();
        for r in required {
            self.param(r)?;
        }
        for k in self.params.keys() {
            if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
                return Err(Error::Parameter(alloc::format!("{} has unknown parameter `{k}`", self.kind)));
            }
        }
        for (k, v) in &self.params {
            if !v.is_finite() {
                return Err(Error::Parameter(alloc::format!("{} parameter `{k}` is not finite", self.kind)));
            }
            if (k.starts_with("R") || k.starts_with("T_")) && !(0.0..=1.0).contains(v) {
                return Err(Error::Parameter(alloc::format!("{} parameter `{k}` = {v} outside [0,1]", self.kind)));
            }
        }
        if !self.kind.port_counts().contains(&self.ports.len()) {
            return Err(Error::Parameter(alloc::format!("{} cannot couple {} ports", self.kind, self.ports.len())));
        }
        if self.ports.len() == 2 && self.ports[0] == self.ports[1] {
            return Err(Error::Parameter(alloc::format!("{} couples a port to itself", self.kind)));
        }
        Ok(())
    }

    /// Local matrix on the element's own ports.
    pub fn local_matrix(&self) -> Result<CMat, Error> {
        self.validate()?;
        let p = |n: &str| self.param(n);
        let m = match self.kind {
            ElementKind::BS => beam_splitter(p("R")?)?.matrix().clone(),
            ElementKind::PPBS => {
                let (rh, rv) = (p("R_H")?, p("R_V")?);
                let th = self.params.get("T_H").copied().unwrap_or(1.0 - rh);
                let tv = self.params.get("T_V").copied().unwrap_or(1.0 - rv);
                ppbs_general(rh, rv, th, tv)?.matrix().clone()
            }
            ElementKind::PBS => pbs().matrix().clone(),
            ElementKind::HWP => hwp(p("theta")?),
            ElementKind::QWP => qwp(p("theta")?),
            ElementKind::PolarizationRotation => rotation(p("theta")?),
            ElementKind::PhasePlate => phase_plate(p("phi")?),
            ElementKind::Mirror => {
                let (rh, rv) = (p("R_H")?, p("R_V")?);
                if self.ports.len() == 2 {
                    ppbs(1.0 - rh, 1.0 - rv)?.matrix().clone()
                } else {
                    lossy_mirror(rh, rv)?.matrix().clone()
                }
            }
        };
        Ok(m)
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parameter(alloc::format!("{name} = {v} outside [0,1]")))
    }
}

/// Polarization-independent beam splitter `[[√(1−R), i√R], [i√R, √(1−R)]]`.
pub fn beam_splitter(r: f64) -> Result<TransferMatrix, Error> {
    ppbs(r, r)
}

/// Beam splitter with reflectivity `r_h` for H and `r_v` for V.
pub fn ppbs(r_h: f64, r_v: f64) -> Result<TransferMatrix, Error> {
    ppbs_general(r_h, r_v, 1.0 - r_h, 1.0 - r_v)
}

/// PPBS with independently specified intensity transmissions; lossy when
/// `R + T < 1`.
pub fn ppbs_general(r_h: f64, r_v: f64, t_h: f64, t_v: f64) -> Result<TransferMatrix, Error> {
    for (n, v) in [("R_H", r_h), ("R_V", r_v), ("T_H", t_h), ("T_V", t_v)] {
        check_unit(n, v)?;
    }
    if r_h + t_h > 1.0 + 1e-12 || r_v + t_v > 1.0 + 1e-12 {
        return Err(Error::Parameter("R + T exceeds one".into()));
    }
    let mut m = CMat::zeros(4, 4);
    for (pol, r, t) in [(0usize, r_h, t_h), (1usize, r_v, t_v)] {
        let (a, b) = (pol, 2 + pol);
        let tt = c64(libm::sqrt(t), 0.0);
        let rr = c64(0.0, libm::sqrt(r));
        m[(a, a)] = tt;
        m[(b, b)] = tt;
        m[(a, b)] = rr;
        m[(b, a)] = rr;
    }
    TransferMatrix::new(m)
}

/// H transmitted, V reflected with phase i.
pub fn pbs() -> TransferMatrix {
    ppbs(0.0, 1.0).expect("valid constants")
}

/// Jones rotation `[[c, s], [−s, c]]` applied as a frame change.
fn frame(theta: f64) -> CMat {
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    CMat::from_rows(&[[c64(c, 0.0), c64(s, 0.0)], [c64(-s, 0.0), c64(c, 0.0)]])
}

fn retarder(theta: f64, retardance: f64) -> CMat {
    let d = CMat::from_rows(&[[c64(1.0, 0.0), C64::zero()], [C64::zero(), cis(-retardance)]]);
    frame(-theta).matmul(&d).matmul(&frame(theta))
}

/// Half-wave plate `[[cos2θ, sin2θ], [sin2θ, −cos2θ]]`.
pub fn hwp(theta: f64) -> CMat {
    let (s, c) = (libm::sin(2.0 * theta), libm::cos(2.0 * theta));
    CMat::from_rows(&[[c64(c, 0.0), c64(s, 0.0)], [c64(s, 0.0), c64(-c, 0.0)]])
}

/// Quarter-wave plate, retarder `diag(1, e^{−iπ/2})` in the fast-axis frame.
pub fn qwp(theta: f64) -> CMat {
    retarder(theta, core::f64::consts::FRAC_PI_2)
}

/// Rotates linear polarization by θ from H towards V.
pub fn rotation(theta: f64) -> CMat {
    frame(-theta)
}

pub fn phase_plate(phi: f64) -> CMat {
    let e = cis(phi);
    CMat::from_rows(&[[e, C64::zero()], [C64::zero(), e]])
}

/// Wave plate by kind, for API symmetry with the element list.
pub fn wave_plate(kind: WavePlate, theta: f64) -> CMat {
    match kind {
        WavePlate::Half => hwp(theta),
        WavePlate::Quarter => qwp(theta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavePlate {
    Half,
    Quarter,
}

/// Single-port reflection with amplitude √R per polarization.
pub fn lossy_mirror(r_h: f64, r_v: f64) -> Result<TransferMatrix, Error> {
    check_unit("R_H", r_h)?;
    check_unit("R_V", r_v)?;
    TransferMatrix::new(CMat::from_real_diag(&[libm::sqrt(r_h), libm::sqrt(r_v)]))
}

/// Places a local element block (2 or 4 modes) into the registry.
pub fn embed(local: &CMat, registry: &ModeRegistry, ports: &[String]) -> Result<CMat, Error> {
    let idx: Vec<usize> = ports.iter().map(|p| registry.port_index(p)).collect::<Result<_, _>>()?;
    if local.rows() != 2 * idx.len() {
        return Err(Error::Contract("local block size does not match port count".into()));
    }
    let mut m = CMat::identity(registry.len());
    let pols = Pol::BOTH;
    for k in 0..registry.n_internal() {
        let modes: Vec<usize> =
            idx.iter().flat_map(|&p| pols.iter().map(move |&pol| (p, pol))).map(|(p, pol)| registry.mode_at(p, pol, k)).collect();
        for (a, &ma) in modes.iter().enumerate() {
            for (b, &mb) in modes.iter().enumerate() {
                m[(ma, mb)] = local[(a, b)];
            }
        }
    }
    Ok(m)
}

/// Jones vector (H, V) for a polarization name: H, V, P (diagonal), M
/// (anti-diagonal), R, L.
pub fn jones(name: &str) -> Option<[C64; 2]> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    Some(match name {
        "H" => [c64(1.0, 0.0), C64::zero()],
        "V" => [C64::zero(), c64(1.0, 0.0)],
        "P" | "D" => [c64(r, 0.0), c64(r, 0.0)],
        "M" | "A" => [c64(r, 0.0), c64(-r, 0.0)],
        "R" => [c64(r, 0.0), c64(0.0, -r)],
        "L" => [c64(r, 0.0), c64(0.0, r)],
        _ => return None,
    })
}

pub const DEG45: f64 = FRAC_PI_4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hwp_examples() {
        let h = [c64(1.0, 0.0), C64::zero()];
        let out = hwp(core::f64::consts::PI / 8.0).apply(&h);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        assert!((out[0] - c64(r, 0.0)).norm() < 1e-12 && (out[1] - c64(r, 0.0)).norm() < 1e-12);
        let v = [C64::zero(), c64(1.0, 0.0)];
        let out = hwp(0.0).apply(&v);
        assert!((out[1] + c64(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn retarder_reproduces_hwp() {
        for th in [0.0, 0.3, 1.1] {
            assert!(retarder(th, core::f64::consts::PI).max_abs_diff(&hwp(th)) < 1e-12);
        }
    }

    #[test]
    fn element_validation() {
        assert!(ElementSpec::new(ElementKind::BS, &[("R", 1.2)], &["a", "b"]).validate().is_err());
        assert!(ElementSpec::new(ElementKind::BS, &[("R", 0.5)], &["a"]).validate().is_err());
        assert!(ElementSpec::new(ElementKind::HWP, &[("theta", 0.1), ("x", 1.0)], &["a"]).validate().is_err());
        assert!(ElementSpec::new(ElementKind::Mirror, &[("R_H", 0.9), ("R_V", 1.0)], &["a", "l"]).validate().is_ok());
    }
}
