//! Scenario execution.

use anyhow::Context;
use lopsim_core::circuit::{builtin, cswap_with_components, labels, CircuitSpec};
use lopsim_core::experiment::{
    finish, ideal_map, plan, Acquisition, AssembleOptions, JobCounts, JobResult, MetricsReport, NoiseModel, Prepared,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::formats::read_circuit;
use crate::scenario::{CircuitRef, IdealGate, NoiseKind, Scenario, Shots, SweepParameter};

/// Warn when the sectors dropped by the pair expansion exceed this
/// relative weight.
pub const TRUNCATION_WARN: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub shots: Option<Shots>,
    pub no_subtraction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutput {
    pub scenario: String,
    pub report: MetricsReport,
    #[serde(skip)]
    pub counts: Vec<JobCounts>,
    pub warnings: Vec<String>,
}

/// Loads the circuit and applies component overrides; controlled-SWAP
/// circuits also get their compensation phase re-solved.
pub fn circuit_for(sc: &Scenario) -> anyhow::Result<CircuitSpec> {
    let mut spec = match &sc.circuit {
        CircuitRef::Builtin(n) => builtin(n).with_context(|| format!("unknown built-in circuit `{n}`"))?,
        CircuitRef::File(p) => read_circuit(p)?,
    };
    let ov = &sc.source.component_overrides;
    if sc.ideal == IdealGate::Fredkin && spec.element(labels::PHASE).is_some() {
        spec = cswap_with_components(spec, ov)?;
    } else {
        spec.apply_overrides(ov)?;
    }
    Ok(spec)
}

fn noise_model(sc: &Scenario, spec: &CircuitSpec) -> NoiseModel {
    match &sc.noise {
        NoiseKind::Ideal => NoiseModel::ideal(spec),
        NoiseKind::Cswap => NoiseModel::cswap(&sc.source),
        NoiseKind::TwoPhoton { first, second } => NoiseModel::two_photon(&sc.source, first, second),
    }
}

/// Applies command-line overrides to a scenario.
pub fn with_options(sc: &Scenario, opts: &RunOptions) -> anyhow::Result<Scenario> {
    let mut s = sc.clone();
    if let Some(shots) = opts.shots {
        s.measurement.shots = shots;
    }
    if let Some(seed) = opts.seed {
        s.measurement.seed = Some(seed);
    }
    if opts.no_subtraction {
        s.subtract = false;
    }
    s.validate()?;
    Ok(s)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}

pub fn run(sc: &Scenario, opts: &RunOptions) -> anyhow::Result<RunOutput> {
    let sc = with_options(sc, opts)?;
    in_pool(opts.threads, || run_inner(&sc))?
}

fn run_inner(sc: &Scenario) -> anyhow::Result<RunOutput> {
    let spec = circuit_for(sc)?;
    let model = noise_model(sc, &spec);
    sc.source.validate(model.emitters.len())?;
    let prep = Prepared::new(spec, model)?;
    let jobs = plan(&prep, &sc.analyses)?;
    let results: Vec<JobResult> = jobs.par_iter().map(|j| prep.run_job(j)).collect::<Result<_, _>>()?;
    let acq = match sc.measurement.shots {
        Shots::Exact => Acquisition::Exact,
        Shots::Count(n) => Acquisition::Shots { shots: n, seed: sc.measurement.seed.unwrap_or(0) },
    };
    let opts = AssembleOptions { subtract: sc.subtract, ideal_map: ideal_map(&sc.ideal.matrix()) };
    let (report, counts) = finish(&prep, &sc.source, &jobs, &results, acq, &opts)?;
    let warnings = warnings(&prep, &report);
    Ok(RunOutput { scenario: sc.name.clone(), report, counts, warnings })
}

fn warnings(prep: &Prepared, rep: &MetricsReport) -> Vec<String> {
    let mut w = Vec::new();
    if prep.model.multipair {
        let dropped = rep.epsilon.powi(2 * (prep.model.extra_pairs as i32 + 1));
        if dropped > TRUNCATION_WARN {
            w.push(format!(
                "pair expansion truncated after {} extra pair(s); dropped sectors carry relative weight ~{dropped:.2e}",
                prep.model.extra_pairs
            ));
        }
    }
    if rep.floored_outcomes > 0 {
        w.push(format!(
            "subtraction floored {} outcome(s) at zero, total mass {:.3e}",
            rep.floored_outcomes, rep.floored_mass
        ));
    }
    for e in &rep.clamp_events {
        w.push(format!("{e} clamped to [0, 1]"));
    }
    w
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub output: RunOutput,
}

/// Runs one scenario per value; points are evaluated in parallel and
/// returned in input order.
pub fn sweep(sc: &Scenario, param: &SweepParameter, values: &[f64], opts: &RunOptions) -> anyhow::Result<Vec<SweepPoint>> {
    let base = with_options(sc, opts)?;
    let points: Vec<Scenario> = values.iter().map(|&v| param.apply(&base, v)).collect::<anyhow::Result<_>>()?;
    in_pool(opts.threads, || {
        points
            .par_iter()
            .zip(values)
            .map(|(s, &value)| {
                s.validate()?;
                run_inner(s).map(|output| SweepPoint { value, output })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?
}
