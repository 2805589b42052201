//! Text summaries and sweep tables.

use std::fmt::Write as _;

use lopsim_core::experiment::MetricsReport;
use lopsim_core::measure::outcome_label;
use lopsim_core::metrics::Estimate;

use crate::run::{RunOutput, SweepPoint};

fn est(e: &Option<Estimate>) -> String {
    match e {
        Some(e) => format!("{:.4} ± {:.4}", e.value, e.sigma),
        None => "-".into(),
    }
}

pub fn summary(out: &RunOutput) -> String {
    let r: &MetricsReport = &out.report;
    let mut s = String::new();
    let mut row = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<25}{v}");
    };
    row("scenario", out.scenario.clone());
    row("mode", if r.exact { "exact".into() } else { "sampled".into() });
    row("subtraction", if r.subtracted { "on".into() } else { "off".into() });
    if r.epsilon > 0.0 {
        row("epsilon", format!("{:.5}", r.epsilon));
        row("contamination", format!("{:.4}", r.contamination));
    }
    if let Some(p) = &r.success_probability {
        let mean = p.iter().sum::<f64>() / p.len().max(1) as f64;
        row("coincidence probability", format!("{mean:.6} (1/{:.1})", 1.0 / mean));
    }
    row("F_zzz", est(&r.f_zzz));
    if let Some(c) = &r.correlations {
        row("M0", est(&Some(c.m0)));
        for (k, m) in c.m.iter().enumerate() {
            row(&format!("M{}", k + 1), est(&Some(*m)));
        }
    }
    row("C", est(&r.coherence));
    row("F_GHZ", est(&r.f_ghz));
    row("F_process", est(&r.f_process));
    if let Some(e) = r.entanglement {
        row("entanglement", format!("{e:?}"));
    }
    if let Some(p) = r.confidence_genuine {
        row("P(C > 1/2)", format!("{p:.4}"));
    }
    if let Some(tt) = &r.truth_table {
        let n = tt.len().trailing_zeros() as usize;
        let _ = writeln!(s, "\ntruth table (rows: input, columns: output)");
        let _ = write!(s, "{:>6}", "");
        for o in 0..tt.len() {
            let _ = write!(s, "{:>7}", outcome_label(o, n));
        }
        s.push('\n');
        for (i, r) in tt.iter().enumerate() {
            let _ = write!(s, "{:>6}", outcome_label(i, n));
            for v in r {
                let _ = write!(s, "{v:>7.3}");
            }
            s.push('\n');
        }
    }
    for w in &out.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "parameter",
    "value",
    "f_zzz",
    "f_zzz_sigma",
    "coherence",
    "coherence_sigma",
    "f_ghz",
    "f_process",
    "f_process_sigma",
    "success_probability",
    "contamination",
];

fn cell(e: Option<f64>) -> String {
    e.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn sweep_table(parameter: &str, points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).expect("writing to memory");
    for p in points {
        let r = &p.output.report;
        let succ = r.success_probability.as_ref().map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64);
        w.write_record([
            parameter.to_string(),
            format!("{:e}", p.value),
            cell(r.f_zzz.map(|e| e.value)),
            cell(r.f_zzz.map(|e| e.sigma)),
            cell(r.coherence.map(|e| e.value)),
            cell(r.coherence.map(|e| e.sigma)),
            cell(r.f_ghz.map(|e| e.value)),
            cell(r.f_process.map(|e| e.value)),
            cell(r.f_process.map(|e| e.sigma)),
            cell(succ),
            format!("{:e}", r.contamination),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}
