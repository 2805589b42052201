//! Noisy experiment pipeline: plan jobs, evaluate sector-resolved outcome
//! probabilities, then assemble counts and metrics.
//!
//! Each job is one input state under one analyzer setting. Evaluation is
//! pure, so callers may run jobs in any order or in parallel; sampling
//! seeds depend only on the job index.

use alloc::collections::btree_map::{BTreeMap, Entry};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_traits::{One, Zero};

use crate::circuit::{compile_with_internal, CircuitSpec, CompiledCircuit};
use crate::fock::CreationPoly;
use crate::linalg::{c64, CMat, C64};
use crate::measure::{
    analyzer_unitary, outcome_label, AnalyzerSetting, Classifier, CoincidencePattern, DetectorModel,
};
use crate::metrics::{
    coherence_c, entanglement_class, gaussian_confidence, ghz_fidelity, m_correlations, m_operators,
    process_fidelity_estimate, truth_table_fidelity, CorrelationResult, EntanglementClass, Estimate, SettingData,
    TruthTable,
};
use crate::source::{emitter_state, mixture_components, werner, Emitter, InternalMode, SourceConfig};
use crate::Error;

/// One source feeding a group of input roles.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterSpec {
    pub name: String,
    pub roles: Vec<String>,
    pub internal: InternalMode,
    /// Werner-type degradation of the emitted polarization state.
    pub werner_fidelity: Option<f64>,
}

/// How the inputs of a circuit are produced and detected.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub emitters: Vec<EmitterSpec>,
    /// SPDC emitters with multi-pair terms; otherwise one emission each.
    pub multipair: bool,
    /// Pairs beyond the minimum kept in the expansion.
    pub extra_pairs: usize,
    pub detector: DetectorModel,
    /// Herald branch of the circuit that defines the coincidence pattern.
    pub branch: usize,
}

impl NoiseModel {
    /// One deterministic emitter per logical input qubit, perfect overlap.
    pub fn ideal(spec: &CircuitSpec) -> Self {
        let emitters = spec
            .logical_inputs
            .iter()
            .map(|q| {
                let mut roles: Vec<String> = Vec::new();
                for p in q.zero.iter().chain(&q.one) {
                    if !roles.contains(&p.role) {
                        roles.push(p.role.clone());
                    }
                }
                EmitterSpec { name: q.name.clone(), roles, internal: InternalMode::Label(0), werner_fidelity: None }
            })
            .collect();
        NoiseModel { emitters, multipair: false, extra_pairs: 1, detector: DetectorModel::Threshold, branch: 0 }
    }

    /// Two SPDC sources: the entangled control pair on (C1in, C2in) and the
    /// target pair on (T1in, T2in), whose photons carry the reduced overlap.
    pub fn cswap(source: &SourceConfig) -> Self {
        NoiseModel {
            emitters: vec![
                EmitterSpec {
                    name: "control-pair".into(),
                    roles: vec!["C1in".into(), "C2in".into()],
                    internal: InternalMode::Label(0),
                    werner_fidelity: source.entangled_state_fidelity,
                },
                EmitterSpec {
                    name: "target-pair".into(),
                    roles: vec!["T1in".into(), "T2in".into()],
                    internal: InternalMode::Overlap(source.overlap),
                    werner_fidelity: None,
                },
            ],
            multipair: source.epsilon > 0.0 || source.contamination.is_some(),
            extra_pairs: 1,
            detector: DetectorModel::Threshold,
            branch: 0,
        }
    }

    /// Control and target photons from independent sources.
    pub fn two_photon(source: &SourceConfig, first: &str, second: &str) -> Self {
        NoiseModel {
            emitters: vec![
                EmitterSpec {
                    name: first.into(),
                    roles: vec![first.into()],
                    internal: InternalMode::Label(0),
                    werner_fidelity: None,
                },
                EmitterSpec {
                    name: second.into(),
                    roles: vec![second.into()],
                    internal: InternalMode::Overlap(source.overlap),
                    werner_fidelity: None,
                },
            ],
            multipair: false,
            extra_pairs: 1,
            detector: DetectorModel::Threshold,
            branch: 0,
        }
    }
}

/// One input state measured under one analyzer setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub setting_id: String,
    pub input_label: String,
    pub qubits: Vec<[C64; 2]>,
    pub analyzers: Vec<AnalyzerSetting>,
}

/// Outcome probabilities (unweighted by ε) of one pair-number sector.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorProbs {
    pub orders: Vec<usize>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobResult {
    pub sectors: Vec<SectorProbs>,
}

/// Compiled circuit with two internal labels and the coincidence pattern.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub spec: CircuitSpec,
    pub model: NoiseModel,
    pub compiled: CompiledCircuit,
    pub pattern: CoincidencePattern,
}

impl Prepared {
    pub fn new(spec: CircuitSpec, model: NoiseModel) -> Result<Self, Error> {
        if !spec.ancilla.is_empty() {
            return Err(Error::Contract("noisy runs need circuits without fixed ancilla photons".into()));
        }
        let branch = spec
            .effective_branches()
            .get(model.branch)
            .cloned()
            .ok_or_else(|| Error::Parameter(alloc::format!("no herald branch {}", model.branch)))?;
        let pattern = CoincidencePattern::for_branch(&spec, &branch, model.detector)?;
        let compiled = compile_with_internal(&spec, 2)?;
        let max_photons = 2 * (model.emitters.len() + model.extra_pairs);
        if model.multipair && max_photons > crate::fock::N_MAX_LIMIT {
            return Err(Error::Truncation { found: max_photons, n_max: crate::fock::N_MAX_LIMIT });
        }
        Ok(Prepared { spec, model, compiled, pattern })
    }

    /// Pair-number tuples to evaluate.
    pub fn sectors(&self) -> Vec<Vec<usize>> {
        let n = self.model.emitters.len();
        if !self.model.multipair {
            return vec![vec![1; n]];
        }
        let max = n + self.model.extra_pairs;
        let mut out = Vec::new();
        let mut cur = vec![0usize; n];
        loop {
            let s: usize = cur.iter().sum();
            if s >= n && s <= max {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                if cur[i] < max {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }

    fn emitters_for(&self, job: &Job) -> Result<Vec<Emitter>, Error> {
        self.model
            .emitters
            .iter()
            .map(|e| {
                let psi = emitter_state(&self.spec, &e.roles, &job.qubits)?;
                let components = match e.werner_fidelity {
                    Some(f) if f < 1.0 => mixture_components(&werner(&psi, f)?),
                    _ => vec![(1.0, psi)],
                };
                Ok(Emitter {
                    name: e.name.clone(),
                    roles: e.roles.clone(),
                    components,
                    internal: e.internal,
                    multipair: self.model.multipair,
                })
            })
            .collect()
    }

    /// Sector-resolved outcome probabilities of one job.
    pub fn run_job(&self, job: &Job) -> Result<JobResult, Error> {
        let reg = &self.compiled.registry;
        let emitters = self.emitters_for(job)?;
        let rot = analyzer_unitary(&self.spec, reg, &self.pattern, &job.analyzers)?;
        let u = rot.matmul(self.compiled.transfer.matrix());
        let cls = Classifier::new(&self.spec, reg, &self.pattern)?;
        let emissions: Vec<Vec<CreationPoly>> = emitters
            .iter()
            .map(|e| (0..e.components.len()).map(|c| e.emission_poly(c, &self.spec, reg)).collect())
            .collect::<Result<_, _>>()?;
        let mut powers: BTreeMap<(usize, usize, usize), CreationPoly> = BTreeMap::new();
        let mut sectors = Vec::new();
        for orders in self.sectors() {
            let mut probs = vec![0.0; cls.n_outcomes()];
            let active: Vec<usize> = (0..emitters.len()).filter(|&i| orders[i] > 0).collect();
            let mut combo = vec![0usize; active.len()];
            loop {
                let mut weight = 1.0;
                let mut poly = CreationPoly::one();
                for (slot, &i) in active.iter().enumerate() {
                    let c = combo[slot];
                    weight *= emitters[i].components[c].0;
                    let key = (i, c, orders[i]);
                    let pw = match powers.entry(key) {
                        Entry::Occupied(e) => e.into_mut(),
                        Entry::Vacant(e) => e.insert(emissions[i][c].power_over_factorial(orders[i])?),
                    };
                    poly = poly.mul(pw)?;
                }
                cls.accumulate(&poly.substitute(&u), weight, &mut probs);
                let mut s = 0;
                loop {
                    if s == active.len() {
                        break;
                    }
                    combo[s] += 1;
                    if combo[s] < emitters[active[s]].components.len() {
                        break;
                    }
                    combo[s] = 0;
                    s += 1;
                }
                if s == active.len() {
                    break;
                }
            }
            sectors.push(SectorProbs { orders, probs });
        }
        Ok(JobResult { sectors })
    }
}

/// Which emitters are left running in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    Total,
    /// Only emitter `i` pumped.
    Only(usize),
}

/// Expected outcome probabilities of one run at squared amplitude `eps2`.
pub fn run_probabilities(result: &JobResult, n_emitters: usize, multipair: bool, eps2: f64, kind: RunKind) -> Vec<f64> {
    let n = result.sectors.first().map_or(0, |s| s.probs.len());
    let mut out = vec![0.0; n];
    for s in &result.sectors {
        if let RunKind::Only(i) = kind {
            if s.orders.iter().enumerate().any(|(j, &o)| j != i && o > 0) {
                continue;
            }
        }
        let excess = s.orders.iter().sum::<usize>().saturating_sub(if multipair { n_emitters } else { 0 });
        let w = if multipair { libm::pow(eps2, excess as f64) } else { 1.0 };
        for (o, p) in out.iter_mut().zip(&s.probs) {
            *o += w * p;
        }
    }
    out
}

/// Squared amplitude at which a fraction `f` of the subtracted coincidences
/// comes from one extra pair, summed over `results`.
pub fn solve_eps2(results: &[JobResult], n_emitters: usize, f: f64) -> Result<f64, Error> {
    if f <= 0.0 {
        return Ok(0.0);
    }
    let (mut a, mut b) = (0.0, 0.0);
    for r in results {
        for s in &r.sectors {
            let sum: usize = s.orders.iter().sum();
            let single = s.orders.iter().filter(|&&o| o > 0).count() <= 1;
            if single {
                continue;
            }
            let mass: f64 = s.probs.iter().sum();
            if sum == n_emitters {
                a += mass;
            } else if sum == n_emitters + 1 {
                b += mass;
            }
        }
    }
    if b <= 0.0 {
        return Err(Error::Parameter("no extra-pair coincidences to calibrate against".into()));
    }
    Ok(f * a / ((1.0 - f) * b))
}

/// Achieved contamination at `eps2`: the share of subtracted coincidences
/// carrying one extra pair.
pub fn contamination(results: &[JobResult], n_emitters: usize, eps2: f64) -> f64 {
    let (mut a, mut b) = (0.0, 0.0);
    for r in results {
        for s in &r.sectors {
            if s.orders.iter().filter(|&&o| o > 0).count() <= 1 {
                continue;
            }
            let sum: usize = s.orders.iter().sum();
            let mass: f64 = s.probs.iter().sum();
            if sum == n_emitters {
                a += mass;
            } else if sum == n_emitters + 1 {
                b += eps2 * mass;
            }
        }
    }
    if a + b > 0.0 {
        b / (a + b)
    } else {
        0.0
    }
}

/// Exact probabilities or a finite number of post-selected events per
/// setting in the total run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Acquisition {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Counts of one job in the total and blocked runs.
#[derive(Clone, Debug, PartialEq)]
pub struct JobCounts {
    pub setting_id: String,
    pub input_label: String,
    pub total: Vec<f64>,
    pub blocked: Vec<Vec<f64>>,
    /// Absolute pattern probability of the total run.
    pub success_probability: f64,
    /// Total-run events requested, or `None` in exact mode.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl JobCounts {
    /// Background-subtracted data (floored at zero) or the raw total.
    pub fn data(&self, subtract: bool) -> (SettingData, usize, f64) {
        if !subtract || self.blocked.is_empty() {
            let var = if self.shots.is_some() { self.total.clone() } else { vec![0.0; self.total.len()] };
            return (SettingData { counts: self.total.clone(), variances: var }, 0, 0.0);
        }
        let mut counts = Vec::with_capacity(self.total.len());
        let mut var = Vec::with_capacity(self.total.len());
        let (mut floored, mut mass) = (0, 0.0);
        for (o, &t) in self.total.iter().enumerate() {
            let b: f64 = self.blocked.iter().map(|r| r[o]).sum();
            let d = t - b;
            if d < 0.0 {
                floored += 1;
                mass -= d;
            }
            counts.push(d.max(0.0));
            var.push(if self.shots.is_some() { t + b } else { 0.0 });
        }
        (SettingData { counts, variances: var }, floored, mass)
    }

    pub fn records(&self) -> Vec<(String, crate::measure::CountRecord)> {
        let n = self.total.len().trailing_zeros() as usize;
        let mut out = Vec::new();
        let mut push = |run: &str, v: &[f64]| {
            for (o, &c) in v.iter().enumerate() {
                out.push((
                    run.to_string(),
                    crate::measure::CountRecord {
                        setting_id: self.setting_id.clone(),
                        outcome: outcome_label(o, n),
                        count: c as u64,
                        shots: self.shots.unwrap_or(0),
                        seed: self.seed,
                    },
                ));
            }
        };
        push("total", &self.total);
        for (i, b) in self.blocked.iter().enumerate() {
            push(&alloc::format!("only-{i}"), b);
        }
        out
    }
}

/// Turns job probabilities into counts for the total run and for one run
/// per blocked-down configuration (each emitter alone).
pub fn acquire(
    prep: &Prepared,
    job_index: usize,
    job: &Job,
    result: &JobResult,
    eps2: f64,
    acq: Acquisition,
) -> JobCounts {
    let n_em = prep.model.emitters.len();
    let mp = prep.model.multipair;
    let total = run_probabilities(result, n_em, mp, eps2, RunKind::Total);
    let blocked: Vec<Vec<f64>> = if mp {
        (0..n_em).map(|i| run_probabilities(result, n_em, mp, eps2, RunKind::Only(i))).collect()
    } else {
        Vec::new()
    };
    let p_total: f64 = total.iter().sum();
    match acq {
        Acquisition::Exact => JobCounts {
            setting_id: job.setting_id.clone(),
            input_label: job.input_label.clone(),
            total,
            blocked,
            success_probability: p_total,
            shots: None,
            seed: 0,
        },
        Acquisition::Shots { shots, seed } => {
            let runs = 1 + blocked.len() as u64;
            let draw = |v: &[f64], n: u64, stream: u64| -> Vec<f64> {
                let t: f64 = v.iter().sum();
                if t <= 0.0 || n == 0 {
                    return vec![0.0; v.len()];
                }
                let p: Vec<f64> = v.iter().map(|x| x / t).collect();
                let mut rng = crate::measure::setting_rng(seed, stream);
                crate::metrics::multinomial(&mut rng, n, &p)
            };
            let base = job_index as u64 * runs;
            let t_counts = draw(&total, shots, base);
            let b_counts = blocked
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let pb: f64 = b.iter().sum();
                    let n = if p_total > 0.0 { libm::round(shots as f64 * pb / p_total) as u64 } else { 0 };
                    draw(b, n, base + 1 + i as u64)
                })
                .collect();
            JobCounts {
                setting_id: job.setting_id.clone(),
                input_label: job.input_label.clone(),
                total: t_counts,
                blocked: b_counts,
                success_probability: p_total,
                shots: Some(shots),
                seed,
            }
        }
    }
}

/// Quantities requested from a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Analysis {
    /// Computational-basis truth table and F_zzz.
    TruthTable,
    /// Three-photon coherence from the equatorial correlations.
    Coherence,
}

fn basis_qubit(bit: usize) -> [C64; 2] {
    if bit == 0 {
        [C64::one(), C64::zero()]
    } else {
        [C64::zero(), C64::one()]
    }
}

fn analyzed_roles(prep: &Prepared) -> Vec<String> {
    prep.pattern.analyzed.clone()
}

/// Input of the coherence measurement: control (|0⟩+|1⟩)/√2, targets |1⟩|0⟩.
pub fn coherence_input() -> Vec<[C64; 2]> {
    let r = c64(FRAC_1_SQRT_2, 0.0);
    vec![[r, r], basis_qubit(1), basis_qubit(0)]
}

/// Jobs for the requested analyses, in a fixed order.
pub fn plan(prep: &Prepared, analyses: &[Analysis]) -> Result<Vec<Job>, Error> {
    let roles = analyzed_roles(prep);
    let k = prep.spec.n_qubits();
    let z: Vec<AnalyzerSetting> = roles.iter().map(|r| AnalyzerSetting::z(r)).collect();
    let mut jobs = Vec::new();
    for a in analyses {
        match a {
            Analysis::TruthTable => {
                for i in 0..(1usize << k) {
                    let qubits = (0..k).map(|q| basis_qubit((i >> (k - 1 - q)) & 1)).collect();
                    jobs.push(Job {
                        setting_id: alloc::format!("zzz/{}", outcome_label(i, k)),
                        input_label: outcome_label(i, k),
                        qubits,
                        analyzers: z.clone(),
                    });
                }
            }
            Analysis::Coherence => {
                if k != 3 {
                    return Err(Error::Contract("coherence analysis needs three logical qubits".into()));
                }
                let input = coherence_input();
                jobs.push(Job {
                    setting_id: "m0".into(),
                    input_label: "ghz".into(),
                    qubits: input.clone(),
                    analyzers: z.clone(),
                });
                for (n, op) in m_operators().iter().enumerate() {
                    let c = op.canonical();
                    let analyzers =
                        roles.iter().zip(c.azimuths).map(|(r, phi)| AnalyzerSetting::equatorial(r, phi)).collect();
                    jobs.push(Job {
                        setting_id: alloc::format!("m{}", n + 1),
                        input_label: "ghz".into(),
                        qubits: input.clone(),
                        analyzers,
                    });
                }
            }
        }
    }
    Ok(jobs)
}

/// Figures of merit of one run.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub subtracted: bool,
    pub epsilon: f64,
    pub contamination: f64,
    pub exact: bool,
    pub truth_table: Option<Vec<Vec<f64>>>,
    pub success_probability: Option<Vec<f64>>,
    pub f_zzz: Option<Estimate>,
    pub correlations: Option<CorrelationResult>,
    pub coherence: Option<Estimate>,
    pub f_ghz: Option<Estimate>,
    pub f_process: Option<Estimate>,
    pub entanglement: Option<EntanglementClass>,
    /// P(C > 1/2) under Gaussian statistics.
    pub confidence_genuine: Option<f64>,
    pub floored_outcomes: usize,
    pub floored_mass: f64,
    pub clamp_events: Vec<String>,
}

/// Options for [`assemble`].
#[derive(Clone, Debug)]
pub struct AssembleOptions {
    pub subtract: bool,
    /// Correct output of each computational input.
    pub ideal_map: Vec<usize>,
}

/// Correct output index per input, read off a permutation-like matrix.
pub fn ideal_map(ideal: &CMat) -> Vec<usize> {
    (0..ideal.cols())
        .map(|i| (0..ideal.rows()).max_by(|&a, &b| ideal[(a, i)].norm().total_cmp(&ideal[(b, i)].norm())).unwrap_or(i))
        .collect()
}

/// Metrics from the counts of every planned job.
pub fn assemble(counts: &[JobCounts], eps2: f64, contamination: f64, opts: &AssembleOptions) -> Result<MetricsReport, Error> {
    let mut rep = MetricsReport {
        subtracted: opts.subtract,
        epsilon: libm::sqrt(eps2),
        contamination,
        exact: counts.iter().all(|c| c.shots.is_none()),
        ..Default::default()
    };
    let mut data: BTreeMap<&str, SettingData> = BTreeMap::new();
    for c in counts {
        let (d, f, m) = c.data(opts.subtract);
        rep.floored_outcomes += f;
        rep.floored_mass += m;
        data.insert(c.setting_id.as_str(), d);
    }
    let tt_rows: Vec<&JobCounts> = counts.iter().filter(|c| c.setting_id.starts_with("zzz/")).collect();
    if !tt_rows.is_empty() {
        let rows: Vec<SettingData> = tt_rows.iter().map(|c| data[c.setting_id.as_str()].clone()).collect();
        for (c, r) in tt_rows.iter().zip(&rows) {
            if r.total() <= 0.0 {
                return Err(Error::ZeroRow(c.input_label.clone()));
            }
        }
        let tt = TruthTable::from_rows(&rows);
        let f = truth_table_fidelity(&tt, |i| opts.ideal_map[i]);
        let (f, clamped) = f.clamp_unit();
        if clamped {
            rep.clamp_events.push("F_zzz".into());
        }
        rep.f_zzz = Some(f);
        rep.success_probability = Some(tt_rows.iter().map(|c| c.success_probability).collect());
        rep.truth_table = Some(tt.probabilities);
    }
    if let (Some(z), Some(m1), Some(m2), Some(m3)) = (data.get("m0"), data.get("m1"), data.get("m2"), data.get("m3")) {
        let corr = m_correlations(z, [m1, m2, m3])?;
        let c = coherence_c(&corr);
        let (g, clamped) = ghz_fidelity(corr.m0, c).clamp_unit();
        if clamped {
            rep.clamp_events.push("F_GHZ".into());
        }
        rep.correlations = Some(corr);
        rep.coherence = Some(c);
        rep.f_ghz = Some(g);
        rep.entanglement = Some(entanglement_class(c.value));
        rep.confidence_genuine = Some(gaussian_confidence(c.value, c.sigma, 0.5));
    }
    if let (Some(f), Some(c)) = (rep.f_zzz, rep.coherence) {
        let (p, clamped) = process_fidelity_estimate(f, c).clamp_unit();
        if clamped {
            rep.clamp_events.push("F_process".into());
        }
        rep.f_process = Some(p);
    }
    Ok(rep)
}

/// Sequential end-to-end run.
pub fn run_sequential(
    prep: &Prepared,
    source: &SourceConfig,
    analyses: &[Analysis],
    acq: Acquisition,
    opts: &AssembleOptions,
) -> Result<(MetricsReport, Vec<JobCounts>), Error> {
    let jobs = plan(prep, analyses)?;
    let results: Vec<JobResult> = jobs.iter().map(|j| prep.run_job(j)).collect::<Result<_, _>>()?;
    finish(prep, source, &jobs, &results, acq, opts)
}

/// Calibrates ε, acquires counts and assembles metrics from job results.
pub fn finish(
    prep: &Prepared,
    source: &SourceConfig,
    jobs: &[Job],
    results: &[JobResult],
    acq: Acquisition,
    opts: &AssembleOptions,
) -> Result<(MetricsReport, Vec<JobCounts>), Error> {
    let n_em = prep.model.emitters.len();
    let tt: Vec<JobResult> = jobs
        .iter()
        .zip(results)
        .filter(|(j, _)| j.setting_id.starts_with("zzz/"))
        .map(|(_, r)| r.clone())
        .collect();
    let base = if tt.is_empty() { results } else { &tt[..] };
    let eps2 = match source.contamination {
        Some(f) if prep.model.multipair => solve_eps2(base, n_em, f)?,
        _ => source.epsilon * source.epsilon,
    };
    let achieved = if prep.model.multipair { contamination(base, n_em, eps2) } else { 0.0 };
    let counts: Vec<JobCounts> =
        jobs.iter().zip(results).enumerate().map(|(i, (j, r))| acquire(prep, i, j, r, eps2, acq)).collect();
    let rep = assemble(&counts, eps2, achieved, opts)?;
    Ok((rep, counts))
}
