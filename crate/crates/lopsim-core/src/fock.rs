//! Multi-mode bosonic states and their evolution under transfer matrices.
//!
//! Two evolution routes are provided: [`evolve_permanent`] computes each
//! output amplitude from a matrix permanent, [`evolve_sequential`] substitutes
//! creation operators one at a time. They are independent and serve as each
//! other's oracle.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;
use smallvec::SmallVec;

use crate::linalg::{c64, CMat, C64};
use crate::Error;

/// Default photon-number truncation (three SPDC pairs).
pub const DEFAULT_N_MAX: usize = 6;
/// Hard ceiling imposed by the packed mode-list keys.
pub const N_MAX_LIMIT: usize = 8;
/// Amplitudes below this magnitude are dropped after every evolution.
pub const PRUNE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::H, Pol::V];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }
}

/// Label of one optical mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModeIndex {
    pub port: String,
    pub pol: Pol,
    pub internal: u8,
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}:{}", self.port, self.pol, self.internal)
    }
}

/// Frozen map from (port, polarization, internal label) to dense indices.
///
/// Index layout is `(port * 2 + pol) * n_internal + internal`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeRegistry {
    ports: Vec<String>,
    n_internal: u8,
    n_max: usize,
}

impl ModeRegistry {
    pub fn new<S: AsRef<str>>(ports: &[S], n_internal: u8, n_max: usize) -> Result<Self, Error> {
        if n_internal == 0 {
            return Err(Error::Parameter("registry needs at least one internal label".into()));
        }
        if n_max > N_MAX_LIMIT {
            return Err(Error::Parameter(alloc::format!("N_max {n_max} above supported limit {N_MAX_LIMIT}")));
        }
        let ports: Vec<String> = ports.iter().map(|p| p.as_ref().to_string()).collect();
        for (i, p) in ports.iter().enumerate() {
            if ports[..i].contains(p) {
                return Err(Error::Parameter(alloc::format!("duplicate port `{p}`")));
            }
        }
        if ports.len() * 2 * n_internal as usize > 255 {
            return Err(Error::Parameter("more than 255 modes".into()));
        }
        Ok(ModeRegistry { ports, n_internal, n_max })
    }

    pub fn len(&self) -> usize {
        self.ports.len() * 2 * self.n_internal as usize
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    pub fn ports(&self) -> &[String] {
        &self.ports
    }

    pub fn n_internal(&self) -> u8 {
        self.n_internal
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn port_index(&self, port: &str) -> Result<usize, Error> {
        self.ports.iter().position(|p| p == port).ok_or_else(|| Error::UnknownPort(port.to_string()))
    }

    pub fn mode(&self, port: &str, pol: Pol, internal: u8) -> Result<usize, Error> {
        if internal >= self.n_internal {
            return Err(Error::Parameter(alloc::format!("internal label {internal} out of range")));
        }
        let p = self.port_index(port)?;
        Ok(self.mode_at(p, pol, internal))
    }

    #[inline]
    pub fn mode_at(&self, port_idx: usize, pol: Pol, internal: u8) -> usize {
        (port_idx * 2 + pol.index()) * self.n_internal as usize + internal as usize
    }

    pub fn label(&self, mode: usize) -> ModeIndex {
        let k = self.n_internal as usize;
        let internal = (mode % k) as u8;
        let pp = mode / k;
        let pol = if pp.is_multiple_of(2) { Pol::H } else { Pol::V };
        ModeIndex { port: self.ports[pp / 2].clone(), pol, internal }
    }

    /// Port index of a dense mode index.
    #[inline]
    pub fn port_of(&self, mode: usize) -> usize {
        mode / (2 * self.n_internal as usize)
    }

    /// Polarization of a dense mode index.
    #[inline]
    pub fn pol_of(&self, mode: usize) -> Pol {
        if (mode / self.n_internal as usize).is_multiple_of(2) {
            Pol::H
        } else {
            Pol::V
        }
    }

    /// Registry extended by one loss twin `~port` per port, so twin indices
    /// are the original indices shifted by `len()`.
    pub fn with_loss_twins(&self) -> Result<Self, Error> {
        let mut ports = self.ports.clone();
        for p in &self.ports {
            ports.push(alloc::format!("~{p}"));
        }
        ModeRegistry::new(&ports, self.n_internal, self.n_max)
    }
}

/// Photon count per registered mode.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Occupation(pub SmallVec<[u8; 16]>);

impl Occupation {
    pub fn vacuum(n_modes: usize) -> Self {
        Occupation(SmallVec::from_elem(0, n_modes))
    }

    pub fn from_counts(counts: &[u8]) -> Self {
        Occupation(SmallVec::from_slice(counts))
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// ∏ nᵢ!
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&c| factorial(c as usize)).product()
    }

    /// Mode indices with multiplicity, ascending.
    pub fn mode_list(&self) -> SmallVec<[u8; 8]> {
        let mut out = SmallVec::new();
        for (m, &c) in self.0.iter().enumerate() {
            for _ in 0..c {
                out.push(m as u8);
            }
        }
        out
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Packed ascending multiset of up to eight mode indices.
///
/// Digits are `mode + 1` in base 256, most significant first; unused low
/// digits are zero. Distinct multisets give distinct keys.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct ModeList(u64);

impl ModeList {
    pub const EMPTY: ModeList = ModeList(0);

    pub fn len(self) -> usize {
        8 - (self.0.trailing_zeros() as usize / 8).min(8)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn modes(self) -> SmallVec<[u8; 8]> {
        let mut out = SmallVec::new();
        for slot in 0..8 {
            let d = ((self.0 >> (56 - 8 * slot)) & 0xff) as u8;
            if d == 0 {
                break;
            }
            out.push(d - 1);
        }
        out
    }

    pub fn from_modes(modes: &[u8]) -> Result<Self, Error> {
        if modes.len() > N_MAX_LIMIT {
            return Err(Error::Truncation { found: modes.len(), n_max: N_MAX_LIMIT });
        }
        let mut sorted: SmallVec<[u8; 8]> = SmallVec::from_slice(modes);
        sorted.sort_unstable();
        let mut v = 0u64;
        for (slot, &m) in sorted.iter().enumerate() {
            if m == 255 {
                return Err(Error::Parameter("mode index 255 is reserved".into()));
            }
            v |= ((m as u64) + 1) << (56 - 8 * slot);
        }
        Ok(ModeList(v))
    }

    /// Inserts one mode. Caller guarantees fewer than eight entries.
    #[inline]
    pub fn with(self, mode: u8) -> Self {
        let d = (mode as u64) + 1;
        let mut out = 0u64;
        let mut placed = false;
        let mut slot = 0usize;
        for s in 0..8 {
            let cur = (self.0 >> (56 - 8 * s)) & 0xff;
            if !placed && (cur == 0 || cur > d) {
                out |= d << (56 - 8 * slot);
                slot += 1;
                placed = true;
            }
            if cur == 0 {
                break;
            }
            if slot < 8 {
                out |= cur << (56 - 8 * slot);
            }
            slot += 1;
        }
        ModeList(out)
    }

    pub fn merge(self, other: ModeList) -> ModeList {
        let mut out = self;
        for m in other.modes() {
            out = out.with(m);
        }
        out
    }

    /// ∏ mⱼ! over the multiset's multiplicities.
    pub fn factorial_product(self) -> f64 {
        let ms = self.modes();
        let mut prod = 1.0;
        let mut run = 1usize;
        for w in 1..ms.len() {
            if ms[w] == ms[w - 1] {
                run += 1;
                prod *= run as f64;
            } else {
                run = 1;
            }
        }
        prod
    }

    pub fn to_occupation(self, n_modes: usize) -> Occupation {
        let mut occ = Occupation::vacuum(n_modes);
        for m in self.modes() {
            occ.0[m as usize] += 1;
        }
        occ
    }
}

/// Polynomial in creation operators acting on the vacuum.
///
/// A monomial with key `k` and coefficient `c` stands for `c ∏ a†_k |0⟩`;
/// its Fock amplitude is `c √(∏ mⱼ!)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CreationPoly {
    terms: Vec<(ModeList, C64)>,
}

impl CreationPoly {
    pub fn one() -> Self {
        CreationPoly { terms: vec![(ModeList::EMPTY, c64(1.0, 0.0))] }
    }

    pub fn zero() -> Self {
        CreationPoly { terms: Vec::new() }
    }

    /// Single linear form Σ cᵢ aᵢ†.
    pub fn linear(coeffs: &[(usize, C64)]) -> Self {
        let mut terms: Vec<(ModeList, C64)> =
            coeffs.iter().map(|&(m, c)| (ModeList::EMPTY.with(m as u8), c)).collect();
        merge_sorted(&mut terms);
        CreationPoly { terms }
    }

    pub fn from_terms(mut terms: Vec<(ModeList, C64)>) -> Self {
        merge_sorted(&mut terms);
        CreationPoly { terms }
    }

    pub fn terms(&self) -> &[(ModeList, C64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(k, _)| k.len()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: C64) -> Self {
        CreationPoly { terms: self.terms.iter().map(|&(k, c)| (k, c * s)).collect() }
    }

    pub fn add(&self, other: &CreationPoly) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        CreationPoly::from_terms(terms)
    }

    pub fn mul(&self, other: &CreationPoly) -> Result<Self, Error> {
        if self.degree() + other.degree() > N_MAX_LIMIT {
            return Err(Error::Truncation { found: self.degree() + other.degree(), n_max: N_MAX_LIMIT });
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ka, ca) in &self.terms {
            for &(kb, cb) in &other.terms {
                terms.push((ka.merge(kb), ca * cb));
            }
        }
        Ok(CreationPoly::from_terms(terms))
    }

    /// `pᵏ / k!`
    pub fn power_over_factorial(&self, k: usize) -> Result<Self, Error> {
        let mut acc = CreationPoly::one();
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc.scale(c64(1.0 / factorial(k), 0.0)))
    }

    /// Substitutes every aᵢ† by Σⱼ Uⱼᵢ aⱼ†, merging equal monomials after
    /// each single-operator step.
    pub fn substitute(&self, u: &CMat) -> CreationPoly {
        let cols: Vec<Vec<(u8, C64)>> = (0..u.cols())
            .map(|c| {
                (0..u.rows())
                    .filter_map(|r| {
                        let z = u[(r, c)];
                        (z.norm() > 0.0).then_some((r as u8, z))
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<(ModeList, C64)> = Vec::new();
        for &(key, coeff) in &self.terms {
            let mut cur: Vec<(ModeList, C64)> = vec![(ModeList::EMPTY, coeff)];
            for m in key.modes() {
                let col = &cols[m as usize];
                let mut next = Vec::with_capacity(cur.len() * col.len());
                for &(k, c) in &cur {
                    for &(j, z) in col {
                        next.push((k.with(j), c * z));
                    }
                }
                merge_sorted(&mut next);
                cur = next;
            }
            out.extend(cur);
        }
        merge_sorted(&mut out);
        out.retain(|(k, c)| c.norm() * libm::sqrt(k.factorial_product()) > PRUNE);
        CreationPoly { terms: out }
    }

    /// Fock amplitudes `(key, c √∏m!)`.
    pub fn amplitudes(&self) -> impl Iterator<Item = (ModeList, C64)> + '_ {
        self.terms.iter().map(|&(k, c)| (k, c * libm::sqrt(k.factorial_product())))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Fock-space inner product ⟨self|other⟩.
    pub fn inner(&self, other: &CreationPoly) -> C64 {
        let mut acc = C64::zero();
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (ka, ca) = self.terms[i];
            let (kb, cb) = other.terms[j];
            match ka.cmp(&kb) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    acc += ca.conj() * cb * ka.factorial_product();
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_state(&self, registry: &Arc<ModeRegistry>) -> FockState {
        let mut st = FockState::new(registry.clone());
        for (k, a) in self.amplitudes() {
            st.add_term(k.to_occupation(registry.len()), a);
        }
        st.prune();
        st
    }
}

fn merge_sorted(terms: &mut Vec<(ModeList, C64)>) {
    terms.sort_unstable_by_key(|t| t.0);
    let mut w = 0usize;
    for r in 0..terms.len() {
        if w > 0 && terms[w - 1].0 == terms[r].0 {
            let add = terms[r].1;
            terms[w - 1].1 += add;
        } else {
            terms[w] = terms[r];
            w += 1;
        }
    }
    terms.truncate(w);
    terms.retain(|t| t.1 != C64::zero());
}

/// Sparse superposition over occupation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<Occupation, C64>,
}

impl FockState {
    pub fn new(registry: Arc<ModeRegistry>) -> Self {
        FockState { registry, terms: BTreeMap::new() }
    }

    pub fn vacuum(registry: Arc<ModeRegistry>) -> Self {
        let n = registry.len();
        let mut s = Self::new(registry);
        s.terms.insert(Occupation::vacuum(n), c64(1.0, 0.0));
        s
    }

    /// Basis state from explicit occupation counts.
    pub fn basis(registry: Arc<ModeRegistry>, counts: &[u8]) -> Result<Self, Error> {
        if counts.len() != registry.len() {
            return Err(Error::Contract("occupation length differs from registry size".into()));
        }
        let mut s = Self::new(registry);
        s.add_term(Occupation::from_counts(counts), c64(1.0, 0.0));
        s.check_truncation()?;
        Ok(s)
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn add_term(&mut self, occ: Occupation, amp: C64) {
        *self.terms.entry(occ).or_insert(C64::zero()) += amp;
    }

    pub fn amplitude(&self, occ: &Occupation) -> C64 {
        self.terms.get(occ).copied().unwrap_or(C64::zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        FockState { registry: self.registry.clone(), terms: self.terms.iter().map(|(k, v)| (k.clone(), v * s)).collect() }
    }

    pub fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() > PRUNE);
    }

    pub fn max_photons(&self) -> usize {
        self.terms.keys().map(|o| o.total()).max().unwrap_or(0)
    }

    pub fn check_truncation(&self) -> Result<(), Error> {
        let found = self.max_photons();
        if found > self.registry.n_max {
            Err(Error::Truncation { found, n_max: self.registry.n_max })
        } else {
            Ok(())
        }
    }

    pub fn to_poly(&self) -> Result<CreationPoly, Error> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (occ, &a) in &self.terms {
            let key = ModeList::from_modes(&occ.mode_list())?;
            terms.push((key, a / libm::sqrt(occ.factorial_product())));
        }
        Ok(CreationPoly::from_terms(terms))
    }

    /// Serialisable form: one `(occupation, re, im)` row per term.
    pub fn to_records(&self) -> Vec<(Vec<u8>, f64, f64)> {
        self.terms.iter().map(|(o, a)| (o.counts().to_vec(), a.re, a.im)).collect()
    }

    pub fn from_records(registry: Arc<ModeRegistry>, rows: &[(Vec<u8>, f64, f64)]) -> Result<Self, Error> {
        let mut s = Self::new(registry);
        for (occ, re, im) in rows {
            if occ.len() != s.registry.len() {
                return Err(Error::Contract("occupation length differs from registry size".into()));
            }
            s.add_term(Occupation::from_counts(occ), c64(*re, *im));
        }
        s.check_truncation()?;
        Ok(s)
    }
}

/// Whether a transfer matrix conserves photon number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Exactness {
    Unitary,
    SubUnitary,
}

/// Linear map on creation operators: a†ᵢ → Σⱼ Mⱼᵢ a†ⱼ.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    matrix: CMat,
    exactness: Exactness,
}

pub const UNITARY_TOL: f64 = 1e-9;

impl TransferMatrix {
    /// Validates that no singular value exceeds one and classifies the matrix.
    pub fn new(matrix: CMat) -> Result<Self, Error> {
        if !matrix.is_square() {
            return Err(Error::Contract("transfer matrix must be square".into()));
        }
        let defect = matrix.unitarity_defect();
        if defect <= UNITARY_TOL {
            return Ok(TransferMatrix { matrix, exactness: Exactness::Unitary });
        }
        let top = matrix.singular_values_sq().last().copied().unwrap_or(0.0);
        if libm::sqrt(top.max(0.0)) > 1.0 + UNITARY_TOL {
            return Err(Error::Parameter(alloc::format!("singular value {:.6} exceeds one", libm::sqrt(top))));
        }
        Ok(TransferMatrix { matrix, exactness: Exactness::SubUnitary })
    }

    pub fn identity(n: usize) -> Self {
        TransferMatrix { matrix: CMat::identity(n), exactness: Exactness::Unitary }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn exactness(&self) -> Exactness {
        self.exactness
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `later ∘ self`
    pub fn then(&self, later: &TransferMatrix) -> Result<TransferMatrix, Error> {
        TransferMatrix::new(later.matrix.matmul(&self.matrix))
    }

    /// Unitary Halmos dilation `[[A, √(I−AA†)], [√(I−A†A), −A†]]`.
    ///
    /// Mode `i + n` is the loss twin of mode `i`, matching
    /// [`ModeRegistry::with_loss_twins`].
    pub fn dilate(&self) -> TransferMatrix {
        let a = &self.matrix;
        let n = a.rows();
        let id = CMat::identity(n);
        let top = crate::linalg::sqrt_psd(&id.sub(&a.matmul(&a.adjoint())));
        let bottom = crate::linalg::sqrt_psd(&id.sub(&a.adjoint().matmul(a)));
        let neg_adj = a.adjoint().scale(c64(-1.0, 0.0));
        let m = CMat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => a[(i, j)],
            (true, false) => top[(i, j - n)],
            (false, true) => bottom[(i - n, j)],
            (false, false) => neg_adj[(i - n, j - n)],
        });
        TransferMatrix { matrix: m, exactness: Exactness::Unitary }
    }
}

/// Matrix permanent by Ryser's formula with Gray-code updates, O(2ⁿ n).
pub fn permanent(m: &CMat) -> Result<C64, Error> {
    if !m.is_square() {
        return Err(Error::Contract(alloc::format!("permanent of non-square {}x{} matrix", m.rows(), m.cols())));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(c64(1.0, 0.0));
    }
    if n > 30 {
        return Err(Error::Contract("permanent dimension too large".into()));
    }
    let mut row_sums = vec![C64::zero(); n];
    let mut total = C64::zero();
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let changed = (next ^ gray).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        for (i, rs) in row_sums.iter_mut().enumerate() {
            if added {
                *rs += m[(i, changed)];
            } else {
                *rs -= m[(i, changed)];
            }
        }
        gray = next;
        let prod: C64 = row_sums.iter().product();
        if next.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

fn check_same_registry(a: &ModeRegistry, b: &ModeRegistry) -> Result<(), Error> {
    if a == b {
        Ok(())
    } else {
        Err(Error::RegistryMismatch)
    }
}

fn check_dims(state: &FockState, u: &TransferMatrix) -> Result<(), Error> {
    if u.dim() != state.registry.len() {
        return Err(Error::Contract(alloc::format!(
            "transfer matrix dimension {} differs from registry size {}",
            u.dim(),
            state.registry.len()
        )));
    }
    state.check_truncation()
}

/// Evolution by permanents: amplitude = Per(U[m|n]) / √(∏nᵢ! ∏mⱼ!).
///
/// Output occupations are enumerated over the rows reachable from the input
/// columns. Sub-unitary matrices act directly, which yields the no-loss
/// branch only.
pub fn evolve_permanent(state: &FockState, u: &TransferMatrix) -> Result<FockState, Error> {
    check_dims(state, u)?;
    let n_modes = state.registry.len();
    let mat = u.matrix();
    let mut out = FockState::new(state.registry.clone());
    for (occ, &amp) in &state.terms {
        let cols = occ.mode_list();
        let n = cols.len();
        if n == 0 {
            out.add_term(occ.clone(), amp);
            continue;
        }
        let support: Vec<usize> =
            (0..n_modes).filter(|&r| cols.iter().any(|&c| mat[(r, c as usize)] != C64::zero())).collect();
        let norm_in = libm::sqrt(occ.factorial_product());
        let mut rows = vec![0usize; n];
        for_each_multiset(support.len(), n, &mut rows, &mut |idx| {
            let sub = CMat::from_fn(n, n, |i, j| mat[(support[idx[i]], cols[j] as usize)]);
            let per = permanent(&sub).expect("square by construction");
            let mut counts = Occupation::vacuum(n_modes);
            for &i in idx {
                counts.0[support[i]] += 1;
            }
            let a = amp * per / (norm_in * libm::sqrt(counts.factorial_product()));
            if a.norm() > 0.0 {
                out.add_term(counts, a);
            }
        });
    }
    out.prune();
    Ok(out)
}

fn for_each_multiset(k: usize, n: usize, buf: &mut [usize], f: &mut dyn FnMut(&[usize])) {
    fn rec(pos: usize, start: usize, k: usize, buf: &mut [usize], f: &mut dyn FnMut(&[usize])) {
        if pos == buf.len() {
            f(buf);
            return;
        }
        for i in start..k {
            buf[pos] = i;
            rec(pos + 1, i, k, buf, f);
        }
    }
    if k == 0 {
        return;
    }
    let _ = n;
    rec(0, 0, k, buf, f);
}

/// Evolution by substituting each creation operator aᵢ† → Σⱼ Uⱼᵢ aⱼ†.
pub fn evolve_sequential(state: &FockState, u: &TransferMatrix) -> Result<FockState, Error> {
    check_dims(state, u)?;
    let poly = state.to_poly()?.substitute(u.matrix());
    Ok(poly.to_state(&state.registry))
}

/// ⟨a|b⟩ in the orthonormal occupation basis.
pub fn inner_product(a: &FockState, b: &FockState) -> Result<C64, Error> {
    check_same_registry(&a.registry, &b.registry)?;
    let mut acc = C64::zero();
    for (occ, x) in &a.terms {
        if let Some(y) = b.terms.get(occ) {
            acc += x.conj() * y;
        }
    }
    Ok(acc)
}

/// Lifts a state into the loss-twin registry of [`TransferMatrix::dilate`].
pub fn lift_to_dilation(state: &FockState) -> Result<FockState, Error> {
    let reg = Arc::new(state.registry.with_loss_twins()?);
    let n = state.registry.len();
    let mut out = FockState::new(reg.clone());
    for (occ, &a) in &state.terms {
        let mut counts = Occupation::vacuum(2 * n);
        counts.0[..n].copy_from_slice(occ.counts());
        out.add_term(counts, a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg2() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::new(&["a", "b"], 1, 6).unwrap())
    }

    #[test]
    fn mode_list_keys() {
        let k = ModeList::EMPTY.with(3).with(1).with(3).with(0);
        assert_eq!(k.modes().as_slice(), &[0, 1, 3, 3]);
        assert_eq!(k.len(), 4);
        assert_eq!(k, ModeList::from_modes(&[3, 0, 3, 1]).unwrap());
        assert_eq!(k.factorial_product(), 2.0);
        assert_eq!(ModeList::EMPTY.len(), 0);
        let full = ModeList::from_modes(&[7; 8]).unwrap();
        assert_eq!(full.len(), 8);
        assert_eq!(full.factorial_product(), 40320.0);
    }

    #[test]
    fn registry_layout() {
        let r = ModeRegistry::new(&["x", "y"], 2, 6).unwrap();
        assert_eq!(r.len(), 8);
        let m = r.mode("y", Pol::V, 1).unwrap();
        assert_eq!(m, 7);
        assert_eq!(r.label(m), ModeIndex { port: "y".into(), pol: Pol::V, internal: 1 });
        assert_eq!(r.port_of(m), 1);
        assert_eq!(r.pol_of(m), Pol::V);
        assert!(ModeRegistry::new(&["x", "x"], 1, 6).is_err());
    }

    #[test]
    fn permanent_small_cases() {
        let id = CMat::identity(2);
        assert!((permanent(&id).unwrap() - c64(1.0, 0.0)).norm() < 1e-15);
        let m = CMat::from_rows(&[[c64(1.0, 2.0), c64(3.0, 0.0)], [c64(0.0, -1.0), c64(2.0, 1.0)]]);
        let expect = m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)];
        assert!((permanent(&m).unwrap() - expect).norm() < 1e-12);
        assert_eq!(permanent(&CMat::zeros(0, 0)).unwrap(), c64(1.0, 0.0));
        assert!(permanent(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn truncation_is_explicit() {
        let r = Arc::new(ModeRegistry::new(&["a"], 1, 2).unwrap());
        assert!(matches!(FockState::basis(r, &[3, 0]), Err(Error::Truncation { .. })));
    }

    #[test]
    fn vacuum_passes_through() {
        let r = reg2();
        let v = FockState::vacuum(r.clone());
        let u = TransferMatrix::identity(r.len());
        assert_eq!(evolve_permanent(&v, &u).unwrap().norm_sqr(), 1.0);
        assert_eq!(evolve_sequential(&v, &u).unwrap().norm_sqr(), 1.0);
    }
}
