mod common;

use std::collections::BTreeMap;

use common::{fixture, letters, v, wam};
use essograph::citest::{audit_closure, g_statistic, CiLedger, CiSource, CiValue, DataCi, Decision};
use essograph::data::{counts, CallMeter, TableStore, DEFAULT_CELL_BUDGET};
use essograph::graph::serialize::{from_json, to_dot, to_json};
use essograph::learner::{learn, Algorithm, LearnerConfig};

fn off() -> LearnerConfig {
    LearnerConfig { consistency: false, ..LearnerConfig::default() }
}

fn g(x: char, y: char, s: &str) -> (f64, usize) {
    let ds = wam();
    let mut vars = vec![v(x), v(y)];
    vars.extend(s.chars().map(v));
    let t = counts(&ds, &vars, &CallMeter::new()).unwrap();
    let stat = g_statistic(&t, v(x), v(y)).unwrap();
    (stat.g, stat.df)
}

#[test]
fn expanded_rows_match_count_table() {
    let ds = wam();
    assert_eq!(ds.n_rows(), 1190);
    assert_eq!(ds.n_vars(), 6);
    let text = std::fs::read_to_string(fixture("wam_counts.csv")).unwrap();
    let mut want: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut cells: Vec<String> = line.split(',').map(str::to_owned).collect();
        let n = cells.pop().unwrap().parse().unwrap();
        want.insert(cells, n);
    }
    assert_eq!(want.len(), 64);
    let mut got: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for r in 0..ds.n_rows() {
        let row = ds.row(r);
        let labels = row.iter().enumerate().map(|(j, &c)| ds.levels(j)[c as usize].clone()).collect();
        *got.entry(labels).or_default() += 1;
    }
    for (k, n) in &want {
        assert_eq!(got.get(k).copied().unwrap_or(0), *n, "cell {k:?}");
    }
}

#[test]
fn statistics_agree_with_hand_computation() {
    let (gce_d, df) = g('C', 'E', "D");
    assert!((gce_d - 6.063).abs() < 0.01 && df == 2);
    let (gbc_e, df) = g('B', 'C', "E");
    assert!((gbc_e - 0.617).abs() < 0.01 && df == 2);
    let (gef, df) = g('E', 'F', "CD");
    assert!((gef - 9.83).abs() < 0.01 && df == 4);
}

#[test]
fn reconciliation_turns_the_larger_g_into_a_dependence() {
    let ds = wam();
    // Both statements pass the raw test (7.73 and 7.98 against 9.49 at df 4)
    // but cannot both hold since C is not independent of E. The larger G loses.
    let mut plain = DataCi::new(TableStore::new(&ds, DEFAULT_CELL_BUDGET), CiLedger::new(0.05, 3, false));
    assert_eq!(plain.determine(v('C'), v('E'), &[v('B'), v('D')]).unwrap(), Decision::Independent);
    assert_eq!(plain.determine(v('C'), v('D'), &[v('B'), v('E')]).unwrap(), Decision::Independent);
    let mut consistent = DataCi::new(TableStore::new(&ds, DEFAULT_CELL_BUDGET), CiLedger::new(0.05, 3, true));
    assert_eq!(consistent.determine(v('C'), v('E'), &[v('B'), v('D')]).unwrap(), Decision::Independent);
    let ledger = consistent.ledger();
    assert_eq!(ledger.get(v('C'), v('D'), &[v('B'), v('E')]), CiValue::Dependent);
    // The pool is settled as a whole, so lower orders are already in.
    assert_ne!(ledger.get(v('B'), v('C'), &[v('D')]), CiValue::Undetermined);
    assert!(audit_closure(ledger).is_empty());
}

#[test]
fn consistency_off_stages_after_the_first() {
    let (out, _) = learn(&wam(), &off()).unwrap();
    let f = |s: usize| out.report.stages[s].sets.iter().map(|z| letters(z)).collect::<Vec<_>>();
    assert_eq!(f(1), ["", "DE", "EF", "BEF", "BCD", "CD"]);
    assert_eq!(f(2), ["", "DE", "EF", "BEF", "BD", "CD"]);
    assert_eq!(f(3), ["", "DE", "F", "BEF", "BD", "CD"]);
}

#[test]
fn consistency_off_matches_the_reference_graph() {
    let ds = wam();
    let want = std::fs::read_to_string(fixture("wam_no_consistency.dot")).unwrap();
    for algorithm in [Algorithm::M3pc, Algorithm::Mmpc] {
        let (out, _) = learn(&ds, &LearnerConfig { algorithm, ..off() }).unwrap();
        assert_eq!(to_dot(&out.graph, ds.names()).unwrap(), want, "{algorithm:?}");
        assert_eq!(out.immoralities.iter().copied().collect::<Vec<_>>(), [(v('C'), v('F'), v('D'))]);
        assert!(out.report.repair_log.is_empty());
    }
}

#[test]
fn consistency_on_golden_output() {
    let ds = wam();
    let (out, ledger) = learn(&ds, &LearnerConfig::default()).unwrap();
    let want = std::fs::read_to_string(fixture("wam_m3pc.dot")).unwrap();
    assert_eq!(to_dot(&out.graph, ds.names()).unwrap(), want);
    assert_eq!(letters(&out.report.stages[0].sets[v('E')]), "BCDF");
    assert!(audit_closure(&ledger).is_empty());
}

#[test]
fn data_calls_stay_below_bound() {
    let ds = wam();
    for cfg in [LearnerConfig::default(), off()] {
        let (out, _) = learn(&ds, &cfg).unwrap();
        assert!(out.report.meter.data_calls <= 30, "{:?}", out.report.meter);
        assert!(out.report.meter_skeleton.test_calls <= out.report.meter.test_calls);
    }
}

#[test]
fn ledger_dump_round_trips() {
    let (_, ledger) = learn(&wam(), &LearnerConfig::default()).unwrap();
    let back = CiLedger::parse_dump(&ledger.dump()).unwrap();
    let a: Vec<_> = ledger.entries().map(|(k, e)| (k.clone(), e.value)).collect();
    let b: Vec<_> = back.entries().map(|(k, e)| (k.clone(), e.value)).collect();
    assert_eq!(a, b);
}

#[test]
fn json_round_trips() {
    let ds = wam();
    let (out, _) = learn(&ds, &LearnerConfig::default()).unwrap();
    let (g, names) = from_json(&to_json(&out.graph, ds.names()).unwrap()).unwrap();
    assert_eq!(g, out.graph);
    assert_eq!(names, ds.names());
}
