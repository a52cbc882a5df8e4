//! Write-once ledger of conditional-independence decisions.
//!
//! With consistency checking on, a statement A(i, j; S) is never decided in
//! isolation. Every statement over the pool {i, j} ∪ S is decided level by
//! level (by conditioning-set size), each provisional independence has to
//! agree with the lower-order statements already committed, and conflicting
//! provisional independences inside a level are reconciled before commit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::gstat::{decide, g_statistic, Decision, GStat, TestResult};
use crate::data::{MeterSnapshot, TableStore};
use crate::error::{Error, Result};

/// Ternary ledger value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CiValue {
    Independent = 0,
    Dependent = 1,
    Undetermined = 2,
}

impl CiValue {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn from_decision(d: Decision) -> Self {
        match d {
            Decision::Independent => CiValue::Independent,
            Decision::Dependent => CiValue::Dependent,
        }
    }
}

/// Canonical key of a CI statement: `a < b`, `cond` sorted, `a, b ∉ cond`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CiKey {
    pub a: usize,
    pub b: usize,
    pub cond: Vec<usize>,
}

impl CiKey {
    pub fn new(i: usize, j: usize, cond: &[usize]) -> Result<Self> {
        if i == j {
            return Err(Error::Argument(format!("statement needs two distinct variables, got {i} twice")));
        }
        let mut cond = cond.to_vec();
        cond.sort_unstable();
        if cond.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("conditioning set has duplicates".into()));
        }
        if cond.binary_search(&i).is_ok() || cond.binary_search(&j).is_ok() {
            return Err(Error::Argument("conditioning set contains a tested variable".into()));
        }
        Ok(CiKey { a: i.min(j), b: i.max(j), cond })
    }

    /// Builds a key from parts already known to be valid.
    fn raw(i: usize, j: usize, mut cond: Vec<usize>) -> Self {
        cond.sort_unstable();
        CiKey { a: i.min(j), b: i.max(j), cond }
    }

    pub fn order(&self) -> usize {
        self.cond.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub value: CiValue,
    pub g: f64,
    pub df: usize,
}

/// Anything that can answer "is i independent of j given S".
pub trait CiSource {
    fn n_vars(&self) -> usize;
    fn max_cond(&self) -> usize;
    fn determine(&mut self, i: usize, j: usize, cond: &[usize]) -> Result<Decision>;
    /// Remembers the separating set the learner settled on for `(i, j)`.
    fn record_sepset(&mut self, _i: usize, _j: usize, _cond: &[usize]) {}
    fn meter(&self) -> MeterSnapshot;
}

/// The ledger proper: committed values plus bookkeeping.
#[derive(Debug, Clone)]
pub struct CiLedger {
    entries: BTreeMap<CiKey, LedgerEntry>,
    sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    journal: Vec<CiKey>,
    pub alpha: f64,
    pub max_cond: usize,
    pub consistency: bool,
}

impl CiLedger {
    pub fn new(alpha: f64, max_cond: usize, consistency: bool) -> Self {
        CiLedger {
            entries: BTreeMap::new(),
            sepsets: BTreeMap::new(),
            journal: Vec::new(),
            alpha,
            max_cond,
            consistency,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CiKey, &LedgerEntry)> {
        self.entries.iter()
    }

    pub fn entry(&self, key: &CiKey) -> Option<&LedgerEntry> {
        self.entries.get(key)
    }

    pub fn value(&self, key: &CiKey) -> CiValue {
        self.entries.get(key).map_or(CiValue::Undetermined, |e| e.value)
    }

    /// Value of A(i, j; cond), `Undetermined` for malformed or unknown keys.
    pub fn get(&self, i: usize, j: usize, cond: &[usize]) -> CiValue {
        CiKey::new(i, j, cond).map_or(CiValue::Undetermined, |k| self.value(&k))
    }

    /// Keys in the order they were committed.
    pub fn journal(&self) -> &[CiKey] {
        &self.journal
    }

    pub fn sepsets(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.sepsets
    }

    /// Stores a value. A committed value can never change.
    pub fn commit(&mut self, key: CiKey, entry: LedgerEntry) -> Result<()> {
        if entry.value == CiValue::Undetermined {
            return Err(Error::Protocol("cannot commit an undetermined value".into()));
        }
        if let Some(old) = self.entries.get(&key) {
            if old.value != entry.value {
                return Err(Error::Protocol(format!("attempt to overwrite {:?} for {:?}", old.value, key)));
            }
            return Ok(());
        }
        self.journal.push(key.clone());
        self.entries.insert(key, entry);
        Ok(())
    }

    /// Records `S_ij` unless the pair already has one.
    pub fn record_sepset(&mut self, i: usize, j: usize, cond: &[usize]) {
        let mut s = cond.to_vec();
        s.sort_unstable();
        self.sepsets.entry((i.min(j), i.max(j))).or_insert(s);
    }

    /// Line-oriented dump, one statement per line in key order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, e) in &self.entries {
            let _ = write!(out, "A {} {} |", k.a, k.b);
            for c in &k.cond {
                let _ = write!(out, " {c}");
            }
            let _ = writeln!(out, " = {}  g={} df={}", e.value.code(), e.g, e.df);
        }
        out
    }

    /// Parses the output of [`CiLedger::dump`]. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse_dump(text: &str) -> Result<CiLedger> {
        let mut ledger = CiLedger::new(0.05, usize::MAX, true);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::Format { row: n + 1, message: m.to_owned() };
            let rest = line.strip_prefix("A ").ok_or_else(|| bad("line must start with 'A '"))?;
            let (pair, rest) = rest.split_once('|').ok_or_else(|| bad("missing '|'"))?;
            let (cond, rest) = rest.split_once('=').ok_or_else(|| bad("missing '='"))?;
            let ints = |s: &str| -> Result<Vec<usize>> {
                s.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| bad("bad variable index"))).collect()
            };
            let pair = ints(pair)?;
            if pair.len() != 2 {
                return Err(bad("expected two variables before '|'"));
            }
            let cond = ints(cond)?;
            let mut fields = rest.split_whitespace();
            let value = match fields.next() {
                Some("0") => CiValue::Independent,
                Some("1") => CiValue::Dependent,
                Some("2") => continue,
                _ => return Err(bad("value must be 0, 1 or 2")),
            };
            let (mut g, mut df) = (f64::NAN, 0);
            for f in fields {
                if let Some(v) = f.strip_prefix("g=") {
                    g = v.parse().map_err(|_| bad("bad g value"))?;
                } else if let Some(v) = f.strip_prefix("df=") {
                    df = v.parse().map_err(|_| bad("bad df value"))?;
                }
            }
            let key = CiKey::new(pair[0], pair[1], &cond).map_err(|e| bad(&e.to_string()))?;
            ledger.commit(key, LedgerEntry { value, g, df }).map_err(|e| bad(&e.to_string()))?;
        }
        Ok(ledger)
    }
}

/// A closure violation: A(x,y; {w} ∪ z) = 0 and A(y,w; z) = 0 but A(x,y; z) = 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub z: Vec<usize>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "A({},{};{},{:?})=0 and A({},{};{:?})=0 but A({},{};{:?})=1",
            self.x, self.y, self.w, self.z, self.y, self.w, self.z, self.x, self.y, self.z
        )
    }
}

/// Lists every determined statement that breaks the single-variable form of
/// the closure rule "X ⫫ Y | W ∪ Z and Y ⫫ W | Z imply X ⫫ Y | Z".
pub fn audit_closure(ledger: &CiLedger) -> Vec<Violation> {
    let mut out = Vec::new();
    for (key, entry) in ledger.entries() {
        if entry.value != CiValue::Independent || key.cond.is_empty() {
            continue;
        }
        for &w in &key.cond {
            let z: Vec<usize> = key.cond.iter().copied().filter(|&c| c != w).collect();
            if ledger.value(&CiKey::raw(key.a, key.b, z.clone())) != CiValue::Dependent {
                continue;
            }
            for (x, y) in [(key.a, key.b), (key.b, key.a)] {
                if ledger.value(&CiKey::raw(y, w, z.clone())) == CiValue::Independent {
                    out.push(Violation { x, y, w, z: z.clone() });
                }
            }
        }
    }
    out.sort();
    out
}

/// All k-subsets of `items` in lexicographic order.
pub fn subsets_of_size(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= items.len() {
        rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

struct Provisional {
    key: CiKey,
    stat: GStat,
    independent: bool,
}

/// A [`CiLedger`] backed by a dataset through the G² test.
pub struct DataCi<'a> {
    ledger: CiLedger,
    store: TableStore<'a>,
}

impl<'a> DataCi<'a> {
    pub fn new(store: TableStore<'a>, ledger: CiLedger) -> Self {
        DataCi { ledger, store }
    }

    pub fn ledger(&self) -> &CiLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CiLedger {
        self.ledger
    }

    pub fn store(&self) -> &TableStore<'a> {
        &self.store
    }

    fn stat(&mut self, key: &CiKey) -> Result<GStat> {
        let mut vars = vec![key.a, key.b];
        vars.extend(&key.cond);
        let t = self.store.table(&vars)?;
        self.store.meter().record_test_call();
        g_statistic(&t, key.a, key.b)
    }

    /// Plain G² test of A(i, j; cond), ignoring the ledger.
    pub fn raw_decision(&mut self, i: usize, j: usize, cond: &[usize]) -> Result<TestResult> {
        let key = CiKey::new(i, j, cond)?;
        let stat = self.stat(&key)?;
        decide(stat, self.ledger.alpha)
    }

    fn lower(&self, i: usize, j: usize, cond: Vec<usize>) -> Result<CiValue> {
        let key = CiKey::raw(i, j, cond);
        match self.ledger.value(&key) {
            CiValue::Undetermined => Err(Error::Protocol(format!("lower-order statement {key:?} undetermined"))),
            v => Ok(v),
        }
    }

    fn xi_clauses(&self, key: &CiKey) -> Result<bool> {
        for &z in &key.cond {
            let rest: Vec<usize> = key.cond.iter().copied().filter(|&c| c != z).collect();
            let ij = self.lower(key.a, key.b, rest.clone())?;
            for end in [key.a, key.b] {
                if self.lower(end, z, rest.clone())? == CiValue::Independent && ij != CiValue::Independent {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn strictly_below_critical(&self, stat: GStat) -> Result<bool> {
        if stat.n_valid_strata == 0 || stat.df == 0 {
            return Ok(false);
        }
        Ok(stat.g < super::chi2::chi2_quantile(stat.df, 1.0 - self.ledger.alpha)?)
    }

    /// Condition Ξ for A(i, j; cond): the raw statistic is below the critical
    /// value and, for every Z in cond, independence of either endpoint from Z
    /// given the rest carries over to i, j given the rest.
    pub fn condition_xi(&mut self, i: usize, j: usize, cond: &[usize]) -> Result<bool> {
        let key = CiKey::new(i, j, cond)?;
        let stat = self.stat(&key)?;
        Ok(self.strictly_below_critical(stat)? && self.xi_clauses(&key)?)
    }

    fn conflict_partners(&self, key: &CiKey) -> Vec<CiKey> {
        let mut partners = Vec::new();
        for &z in &key.cond {
            for (p, q) in [(key.a, key.b), (key.b, key.a)] {
                let linked = self.ledger.value(&CiKey::raw(p, q, vec![])) == CiValue::Dependent
                    || self.ledger.value(&CiKey::raw(p, z, vec![])) == CiValue::Dependent;
                if !linked {
                    continue;
                }
                let mut cond: Vec<usize> = key.cond.iter().copied().filter(|&c| c != z).collect();
                cond.push(q);
                partners.push(CiKey::raw(p, z, cond));
            }
        }
        partners
    }

    fn settle_pool(&mut self, pool: &[usize], max_level: usize) -> Result<()> {
        // One table over the whole pool serves every statement below.
        self.store.table(pool)?;
        for level in 0..=max_level {
            let mut provisional = Vec::new();
            for (ai, &a) in pool.iter().enumerate() {
                for &b in &pool[ai + 1..] {
                    let others: Vec<usize> = pool.iter().copied().filter(|&v| v != a && v != b).collect();
                    for cond in subsets_of_size(&others, level) {
                        let key = CiKey { a, b, cond };
                        if self.ledger.value(&key) != CiValue::Undetermined {
                            continue;
                        }
                        let stat = self.stat(&key)?;
                        let independent = self.strictly_below_critical(stat)? && self.xi_clauses(&key)?;
                        provisional.push(Provisional { key, stat, independent });
                    }
                }
            }
            self.reconcile(&mut provisional);
            provisional.sort_by(|x, y| x.key.cmp(&y.key));
            for p in provisional {
                let value = if p.independent { CiValue::Independent } else { CiValue::Dependent };
                self.ledger.commit(p.key, LedgerEntry { value, g: p.stat.g, df: p.stat.df })?;
            }
        }
        Ok(())
    }

    /// Keeps the smaller-G member of every conflicting pair of provisional
    /// independences; the larger-G one becomes a dependence. Equal G keeps
    /// the smaller key.
    fn reconcile(&self, provisional: &mut [Provisional]) {
        let mut candidates: Vec<usize> = (0..provisional.len()).filter(|&k| provisional[k].independent).collect();
        candidates.sort_by(|&x, &y| {
            let (px, py) = (&provisional[x], &provisional[y]);
            px.stat.g.total_cmp(&py.stat.g).then_with(|| px.key.cmp(&py.key))
        });
        let mut kept: BTreeSet<CiKey> = BTreeSet::new();
        for k in candidates {
            let clash = self
                .conflict_partners(&provisional[k].key)
                .iter()
                .any(|partner| kept.contains(partner) || self.ledger.value(partner) == CiValue::Independent);
            if clash {
                provisional[k].independent = false;
            } else {
                kept.insert(provisional[k].key.clone());
            }
        }
    }
}

impl CiSource for DataCi<'_> {
    fn n_vars(&self) -> usize {
        self.store.data().n_vars()
    }

    fn max_cond(&self) -> usize {
        self.ledger.max_cond
    }

    fn determine(&mut self, i: usize, j: usize, cond: &[usize]) -> Result<Decision> {
        let key = CiKey::new(i, j, cond)?;
        if key.order() > self.ledger.max_cond {
            return Ok(Decision::Dependent);
        }
        match self.ledger.value(&key) {
            CiValue::Independent => return Ok(Decision::Independent),
            CiValue::Dependent => return Ok(Decision::Dependent),
            CiValue::Undetermined => {}
        }
        let mut pool = key.cond.clone();
        pool.push(key.a);
        pool.push(key.b);
        pool.sort_unstable();
        if !self.store.fits(&pool) {
            // No usable table: treated like an over-sized conditioning set.
            return Ok(Decision::Dependent);
        }
        if self.ledger.consistency {
            self.settle_pool(&pool, key.order())?;
        } else {
            let stat = self.stat(&key)?;
            let result = decide(stat, self.ledger.alpha)?;
            let value = CiValue::from_decision(result.decision);
            self.ledger.commit(key.clone(), LedgerEntry { value, g: stat.g, df: stat.df })?;
        }
        match self.ledger.value(&key) {
            CiValue::Independent => Ok(Decision::Independent),
            CiValue::Dependent => Ok(Decision::Dependent),
            CiValue::Undetermined => Err(Error::Protocol(format!("{key:?} left undetermined"))),
        }
    }

    fn record_sepset(&mut self, i: usize, j: usize, cond: &[usize]) {
        self.ledger.record_sepset(i, j, cond);
    }

    fn meter(&self) -> MeterSnapshot {
        self.store.meter().snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_canonical() {
        assert_eq!(CiKey::new(3, 1, &[5, 2]).unwrap(), CiKey::new(1, 3, &[2, 5]).unwrap());
        assert!(CiKey::new(1, 1, &[]).is_err());
        assert!(CiKey::new(1, 2, &[2]).is_err());
        assert!(CiKey::new(1, 2, &[4, 4]).is_err());
    }

    #[test]
    fn write_once() {
        let mut l = CiLedger::new(0.05, 3, true);
        let k = CiKey::new(0, 1, &[]).unwrap();
        let e = LedgerEntry { value: CiValue::Independent, g: 0.1, df: 1 };
        l.commit(k.clone(), e).unwrap();
        l.commit(k.clone(), e).unwrap();
        assert!(l.commit(k, LedgerEntry { value: CiValue::Dependent, ..e }).is_err());
        assert_eq!(l.journal().len(), 1);
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        assert_eq!(subsets_of_size(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets_of_size(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(subsets_of_size(&[1], 2).is_empty());
    }

    #[test]
    fn empty_ledger_has_no_violations() {
        assert!(audit_closure(&CiLedger::new(0.05, 3, true)).is_empty());
    }

    #[test]
    fn hand_built_violation() {
        let text = "A 0 1 | 2 = 0  g=1 df=1\nA 1 2 | = 0  g=1 df=1\nA 0 1 | = 1  g=9 df=1\n";
        let l = CiLedger::parse_dump(text).unwrap();
        let v = audit_closure(&l);
        assert_eq!(v, vec![Violation { x: 0, y: 1, w: 2, z: vec![] }]);
    }

    #[test]
    fn dump_round_trips() {
        let text = "A 0 1 | = 1  g=9.5 df=1\nA 0 2 | 1 3 = 0  g=0.25 df=4\n";
        let l = CiLedger::parse_dump(text).unwrap();
        assert_eq!(l.dump(), text);
        assert!(CiLedger::parse_dump("B 0 1 | = 1").is_err());
    }
}
