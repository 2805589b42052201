use std::sync::Arc;

use lopsim::formats::{circuit_to_string, counts_to_string, parse_circuit, parse_state, read_counts, state_to_string, CountRow};
use lopsim::scenario::{builtin, Scenario, BUILTIN_SCENARIOS};
use lopsim_core::circuit::{builtin as builtin_circuit, BUILTIN_CIRCUITS};
use lopsim_core::{c64, FockState, ModeRegistry, Occupation};

#[test]
fn circuit_files_round_trip_byte_stable() {
    for name in BUILTIN_CIRCUITS {
        let spec = builtin_circuit(name).unwrap();
        let text = circuit_to_string(&spec);
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back, spec, "{name}");
        assert_eq!(circuit_to_string(&back), text, "{name}");
    }
}

#[test]
fn corrupted_circuit_reports_location() {
    let text = circuit_to_string(&builtin_circuit("ppbs-cnot").unwrap());
    let cut = &text[..text.len() / 2];
    let err = format!("{:#}", parse_circuit(cut).unwrap_err());
    assert!(err.contains("line"), "{err}");
    let bad = text.replacen("\"ports\"", "\"portz\"", 1);
    assert!(parse_circuit(&bad).is_err());
}

#[test]
fn state_files_round_trip() {
    let reg = Arc::new(ModeRegistry::new(&["a", "b"], 2, 3).unwrap());
    let mut s = FockState::new(reg.clone());
    s.add_term(Occupation::from_counts(&[1, 0, 0, 0, 0, 1, 0, 0]), c64(0.6, -0.1));
    s.add_term(Occupation::from_counts(&[0, 0, 2, 0, 0, 0, 0, 1]), c64(0.0, 0.79));
    let text = state_to_string(&s);
    let back = parse_state(&text).unwrap();
    assert_eq!(back.registry().ports(), reg.ports());
    assert_eq!(back.registry().n_max(), 3);
    for (o, a) in s.terms() {
        assert_eq!(back.amplitude(o), *a);
    }
    assert_eq!(state_to_string(&back), text);
}

#[test]
fn count_tables_round_trip() {
    let rows = vec![
        CountRow { setting_id: "ZZZ".into(), outcome: "010".into(), count: 42.0, shots: 100, seed: 1 },
        CountRow { setting_id: "ZZZ|only-0".into(), outcome: "010".into(), count: 3.0, shots: 100, seed: 1 },
    ];
    let text = counts_to_string(&rows);
    assert_eq!(read_counts(text.as_bytes()).unwrap(), rows);
    assert!(read_counts("a,b\n1,2\n".as_bytes()).is_err());
}

#[test]
fn scenarios_round_trip() {
    for name in BUILTIN_SCENARIOS {
        let sc = builtin(name).unwrap();
        sc.validate().unwrap();
        let back = Scenario::parse(&sc.to_json(), None).unwrap();
        assert_eq!(back.to_json(), sc.to_json(), "{name}");
    }
}
