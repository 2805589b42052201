//! Circuit files, Fock-state files and count tables.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use lopsim_core::circuit::CircuitSpec;
use lopsim_core::experiment::JobCounts;
use lopsim_core::measure::outcome_label;
use lopsim_core::{FockState, ModeRegistry};
use serde::{Deserialize, Serialize};

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", path.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// Parses a circuit file and checks its structure.
pub fn parse_circuit(text: &str) -> anyhow::Result<CircuitSpec> {
    let spec: CircuitSpec = serde_json::from_str(text).context("circuit file does not parse")?;
    spec.validate().context("circuit file is structurally invalid")?;
    Ok(spec)
}

/// Canonical text form: pretty JSON with sorted maps and a final newline.
pub fn circuit_to_string(spec: &CircuitSpec) -> String {
    serde_json::to_string_pretty(spec).expect("circuit serializes") + "\n"
}

pub fn read_circuit(path: &Path) -> anyhow::Result<CircuitSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit(&text).with_context(|| format!("in {}", path.display()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryHeader {
    ports: Vec<String>,
    n_internal: u8,
    n_max: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    registry: RegistryHeader,
    /// (occupation vector, re, im)
    terms: Vec<(Vec<u8>, f64, f64)>,
}

pub fn state_to_string(state: &FockState) -> String {
    let r = state.registry();
    let file = StateFile {
        registry: RegistryHeader { ports: r.ports().to_vec(), n_internal: r.n_internal(), n_max: r.n_max() },
        terms: state.to_records(),
    };
    serde_json::to_string_pretty(&file).expect("state serializes") + "\n"
}

pub fn parse_state(text: &str) -> anyhow::Result<FockState> {
    let f: StateFile = serde_json::from_str(text).context("state file does not parse")?;
    let reg = Arc::new(ModeRegistry::new(&f.registry.ports, f.registry.n_internal, f.registry.n_max)?);
    Ok(FockState::from_records(reg, &f.terms)?)
}

/// One row of the count table. In exact mode `count` carries the
/// probability and `shots` is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRow {
    pub setting_id: String,
    pub outcome: String,
    pub count: f64,
    pub shots: u64,
    pub seed: u64,
}

pub const COUNT_COLUMNS: [&str; 5] = ["setting_id", "outcome", "count", "shots", "seed"];

/// Separator between a setting id and its blocked-source run tag.
pub const RUN_SEPARATOR: char = '|';

/// Rows for the total run of every job followed by its blocked runs
/// (`<setting>|only-<k>`).
pub fn count_rows(counts: &[JobCounts]) -> Vec<CountRow> {
    let mut rows = Vec::new();
    for jc in counts {
        let n = jc.total.len().trailing_zeros() as usize;
        let mut push = |id: String, v: &[f64]| {
            for (o, &c) in v.iter().enumerate() {
                rows.push(CountRow {
                    setting_id: id.clone(),
                    outcome: outcome_label(o, n),
                    count: c,
                    shots: jc.shots.unwrap_or(0),
                    seed: jc.seed,
                });
            }
        };
        push(jc.setting_id.clone(), &jc.total);
        for (k, b) in jc.blocked.iter().enumerate() {
            push(format!("{}{RUN_SEPARATOR}only-{k}", jc.setting_id), b);
        }
    }
    rows
}

fn format_count(c: f64, exact: bool) -> String {
    if exact {
        format!("{c:e}")
    } else {
        format!("{}", c as u64)
    }
}

pub fn write_counts<W: Write>(w: W, rows: &[CountRow]) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COUNT_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.setting_id.clone(),
            r.outcome.clone(),
            format_count(r.count, r.shots == 0),
            r.shots.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn counts_to_string(rows: &[CountRow]) -> String {
    let mut buf = Vec::new();
    write_counts(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_counts<R: Read>(r: R) -> anyhow::Result<Vec<CountRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(COUNT_COLUMNS) {
        bail!("count table header must be {}", COUNT_COLUMNS.join(","));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> anyhow::Result<f64> {
            rec[k].parse().with_context(|| format!("line {line}: column {} is not a number", COUNT_COLUMNS[k]))
        };
        let int = |k: usize| -> anyhow::Result<u64> {
            rec[k].parse().with_context(|| format!("line {line}: column {} is not an integer", COUNT_COLUMNS[k]))
        };
        rows.push(CountRow {
            setting_id: rec[0].to_string(),
            outcome: rec[1].to_string(),
            count: num(2)?,
            shots: int(3)?,
            seed: int(4)?,
        });
    }
    Ok(rows)
}
