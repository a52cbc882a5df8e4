//! Categorical datasets, contingency tables and statistical-call metering.

use std::collections::HashMap;
use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};

/// Default upper bound on the number of cells in a single contingency table.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 20;

/// Tokens treated as missing values. Data with missing values is rejected.
const MISSING_TOKENS: &[&str] = &["", "?"];

/// Integer-coded categorical data, stored column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    columns: Vec<Vec<u32>>,
    levels: Vec<Vec<String>>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from row-major codes. Level labels default to the
    /// decimal code.
    pub fn from_rows(names: Vec<String>, cardinalities: Vec<usize>, rows: &[Vec<u32>]) -> Result<Self> {
        let d = names.len();
        if cardinalities.len() != d {
            return Err(Error::Argument(format!("{} names but {} cardinalities", d, cardinalities.len())));
        }
        check_unique(&names)?;
        if let Some(j) = cardinalities.iter().position(|&c| c == 0) {
            return Err(Error::Argument(format!("variable {} has cardinality 0", names[j])));
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Format {
                    row: r + 1,
                    message: format!("expected {} values, found {}", d, row.len()),
                });
            }
            for (j, &code) in row.iter().enumerate() {
                if code as usize >= cardinalities[j] {
                    return Err(Error::Argument(format!(
                        "code {} out of range for variable {} (cardinality {})",
                        code, names[j], cardinalities[j]
                    )));
                }
                columns[j].push(code);
            }
        }
        let levels = cardinalities.iter().map(|&c| (0..c).map(|k| k.to_string()).collect()).collect();
        Ok(Dataset { names, cardinalities, columns, levels, n_rows: rows.len() })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    /// Token labels of variable `j`, indexed by code.
    pub fn levels(&self, j: usize) -> &[String] {
        &self.levels[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Returns the row `r` as codes.
    pub fn row(&self, r: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// Reorders columns so that new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Dataset> {
        let d = self.n_vars();
        let mut seen = vec![false; d];
        if perm.len() != d {
            return Err(Error::Argument(format!(
                "permutation has {} entries, dataset has {} variables",
                perm.len(),
                d
            )));
        }
        for &p in perm {
            if p >= d || seen[p] {
                return Err(Error::Argument("order is not a permutation of the variables".into()));
            }
            seen[p] = true;
        }
        Ok(Dataset {
            names: perm.iter().map(|&p| self.names[p].clone()).collect(),
            cardinalities: perm.iter().map(|&p| self.cardinalities[p]).collect(),
            columns: perm.iter().map(|&p| self.columns[p].clone()).collect(),
            levels: perm.iter().map(|&p| self.levels[p].clone()).collect(),
            n_rows: self.n_rows,
        })
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashMap::new();
    for (j, n) in names.iter().enumerate() {
        if let Some(prev) = seen.insert(n.as_str(), j) {
            return Err(Error::Format {
                row: 0,
                message: format!("duplicate header name {:?} (columns {} and {})", n, prev + 1, j + 1),
            });
        }
    }
    Ok(())
}

/// Reads comma- or tab-separated categorical data with a header row.
///
/// The delimiter is a tab if the header line contains one, otherwise a comma.
/// Codes are assigned per column in order of first appearance.
pub fn load_table<R: Read>(mut source: R) -> Result<Dataset> {
    let mut text = String::new();
    source.read_to_string(&mut text).map_err(|e| Error::Io(e.to_string()))?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| Error::Format { row: 0, message: e.to_string() })?;
    let names: Vec<String> = headers.iter().map(str::to_owned).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Format { row: 0, message: "missing header".into() });
    }
    check_unique(&names)?;
    let d = names.len();

    let mut dictionaries: Vec<HashMap<String, u32>> = vec![HashMap::new(); d];
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); d];
    let mut n_rows = 0;
    for (r, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row_no = r + 2;
        let record = record.map_err(|e| Error::Format { row: row_no, message: e.to_string() })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != d {
            return Err(Error::Format {
                row: row_no,
                message: format!("ragged row: expected {} fields, found {}", d, record.len()),
            });
        }
        for (j, token) in record.iter().enumerate() {
            if MISSING_TOKENS.contains(&token) {
                return Err(Error::Format {
                    row: row_no,
                    message: format!("missing value {:?} in column {}", token, names[j]),
                });
            }
            let next = levels[j].len() as u32;
            let code = *dictionaries[j].entry(token.to_owned()).or_insert_with(|| {
                levels[j].push(token.to_owned());
                next
            });
            columns[j].push(code);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyData);
    }
    let cardinalities = levels.iter().map(Vec::len).collect();
    Ok(Dataset { names, cardinalities, columns, levels, n_rows })
}

/// Counters for statistical calls made during a run.
#[derive(Debug, Default)]
pub struct CallMeter {
    data_calls: AtomicU64,
    test_calls: AtomicU64,
}

/// A point-in-time copy of a [`CallMeter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeterSnapshot {
    pub data_calls: u64,
    pub test_calls: u64,
}

impl CallMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_data_call(&self) {
        self.data_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_test_call(&self) {
        self.test_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        MeterSnapshot {
            data_calls: self.data_calls.load(Ordering::Relaxed),
            test_calls: self.test_calls.load(Ordering::Relaxed),
        }
    }
}

/// Dense joint counts over an ordered list of variables.
///
/// The last variable varies fastest in `counts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    vars: Vec<usize>,
    dims: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count at the joint state `states`, given in the order of `vars()`.
    pub fn get(&self, states: &[usize]) -> u64 {
        let mut idx = 0;
        for (s, d) in states.iter().zip(&self.dims) {
            idx = idx * d + s;
        }
        self.counts[idx]
    }

    /// Position of variable `v` among this table's variables.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.vars.iter().position(|&x| x == v)
    }

    /// Row-major strides matching `counts`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Sums out every variable not in `keep`. The result lists variables in
    /// the order given by `keep`.
    pub fn marginalize(&self, keep: &[usize]) -> Result<ContingencyTable> {
        if keep.is_empty() {
            return Err(Error::Argument("marginalize needs at least one variable".into()));
        }
        let mut positions = Vec::with_capacity(keep.len());
        for (k, &v) in keep.iter().enumerate() {
            if keep[..k].contains(&v) {
                return Err(Error::Argument(format!("variable {v} listed twice")));
            }
            let p = self.position(v).ok_or_else(|| Error::Argument(format!("variable {v} is not in the table")))?;
            positions.push(p);
        }
        let dims: Vec<usize> = positions.iter().map(|&p| self.dims[p]).collect();
        if positions.iter().enumerate().all(|(k, &p)| k == p) && positions.len() == self.vars.len() {
            return Ok(self.clone());
        }
        let mut out_strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            out_strides[k] = out_strides[k + 1] * dims[k + 1];
        }
        // Per source dimension, the stride it contributes to the output index.
        let mut contrib = vec![0usize; self.dims.len()];
        for (k, &p) in positions.iter().enumerate() {
            contrib[p] = out_strides[k];
        }
        let mut out = vec![0u64; dims.iter().product()];
        let mut state = vec![0usize; self.dims.len()];
        let mut out_idx = 0usize;
        for &c in &self.counts {
            out[out_idx] += c;
            // Odometer increment, last dimension fastest.
            for k in (0..state.len()).rev() {
                state[k] += 1;
                out_idx += contrib[k];
                if state[k] < self.dims[k] {
                    break;
                }
                out_idx -= contrib[k] * state[k];
                state[k] = 0;
            }
        }
        Ok(ContingencyTable { vars: keep.to_vec(), dims, counts: out, total: self.total })
    }
}

/// Number of cells a table over `vars` would need, or `None` on overflow.
pub fn table_size(ds: &Dataset, vars: &[usize]) -> Option<usize> {
    vars.iter().try_fold(1usize, |acc, &v| acc.checked_mul(ds.cardinalities[v]))
}

fn check_vars(ds: &Dataset, vars: &[usize]) -> Result<()> {
    if vars.is_empty() {
        return Err(Error::Argument("at least one variable is required".into()));
    }
    for (k, &v) in vars.iter().enumerate() {
        if v >= ds.n_vars() {
            return Err(Error::Argument(format!("variable index {v} out of range")));
        }
        if vars[..k].contains(&v) {
            return Err(Error::Argument(format!("variable {v} listed twice")));
        }
    }
    Ok(())
}

/// Counts joint states of `vars` over every row of `ds`.
pub fn counts(ds: &Dataset, vars: &[usize], meter: &CallMeter) -> Result<ContingencyTable> {
    check_vars(ds, vars)?;
    let dims: Vec<usize> = vars.iter().map(|&v| ds.cardinalities[v]).collect();
    let size = table_size(ds, vars).ok_or(Error::TableTooLarge { cells: usize::MAX, budget: usize::MAX })?;
    let mut table = vec![0u64; size];
    let cols: Vec<&[u32]> = vars.iter().map(|&v| ds.column(v)).collect();
    for r in 0..ds.n_rows() {
        let mut idx = 0usize;
        for (col, d) in cols.iter().zip(&dims) {
            idx = idx * d + col[r] as usize;
        }
        table[idx] += 1;
    }
    meter.record_data_call();
    Ok(ContingencyTable { vars: vars.to_vec(), dims, counts: table, total: ds.n_rows() as u64 })
}

/// Serves contingency tables for a run, reusing any cached superset table by
/// marginalization so the raw data is touched as rarely as possible.
#[derive(Debug)]
pub struct TableStore<'a> {
    data: &'a Dataset,
    meter: CallMeter,
    cell_budget: usize,
    cache: Vec<ContingencyTable>,
}

impl<'a> TableStore<'a> {
    pub fn new(data: &'a Dataset, cell_budget: usize) -> Self {
        TableStore { data, meter: CallMeter::new(), cell_budget, cache: Vec::new() }
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn meter(&self) -> &CallMeter {
        &self.meter
    }

    /// True if a table over `vars` fits within the cell budget.
    pub fn fits(&self, vars: &[usize]) -> bool {
        table_size(self.data, vars).is_some_and(|s| s <= self.cell_budget)
    }

    /// Returns the table over `vars` (in that order).
    pub fn table(&mut self, vars: &[usize]) -> Result<ContingencyTable> {
        check_vars(self.data, vars)?;
        if let Some(t) = self.cache.iter().find(|t| vars.iter().all(|v| t.vars.contains(v))) {
            return t.marginalize(vars);
        }
        let size = table_size(self.data, vars).unwrap_or(usize::MAX);
        if size > self.cell_budget {
            return Err(Error::TableTooLarge { cells: size, budget: self.cell_budget });
        }
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        let built = counts(self.data, &sorted, &self.meter)?;
        self.cache.retain(|t| !t.vars.iter().all(|v| sorted.contains(v)));
        let result = built.marginalize(vars)?;
        self.cache.push(built);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        load_table("a,b,c\ny,x,1\nn,x,2\ny,z,1\ny,z,3\n".as_bytes()).unwrap()
    }

    #[test]
    fn codes_follow_first_appearance() {
        let ds = small();
        assert_eq!(ds.cardinalities(), &[2, 2, 3]);
        assert_eq!(ds.column(0), &[0, 1, 0, 0]);
        assert_eq!(ds.levels(2), &["1", "2", "3"]);
    }

    #[test]
    fn tab_delimited() {
        let ds = load_table("a\tb\n1\t2\n3\t4\n".as_bytes()).unwrap();
        assert_eq!(ds.n_vars(), 2);
        assert_eq!(ds.n_rows(), 2);
    }

    #[test]
    fn single_column_two_tokens() {
        let ds = load_table("v\ny\nn\n".as_bytes()).unwrap();
        assert_eq!(ds.cardinalities(), &[2]);
        assert_eq!(ds.column(0), &[0, 1]);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(load_table("a,b\n".as_bytes()), Err(Error::EmptyData)));
    }

    #[test]
    fn ragged_row_reports_row() {
        let err = load_table("a,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { row: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_header() {
        assert!(load_table("a,a\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_token_rejected() {
        assert!(load_table("a,b\n1,?\n".as_bytes()).is_err());
    }

    #[test]
    fn counts_and_meter() {
        let ds = small();
        let meter = CallMeter::new();
        let t = counts(&ds, &[0, 2], &meter).unwrap();
        assert_eq!(t.counts(), &[2, 0, 1, 0, 1, 0]);
        assert_eq!(t.total(), 4);
        assert_eq!(meter.snapshot().data_calls, 1);
        assert!(counts(&ds, &[0, 0], &meter).is_err());
        assert!(counts(&ds, &[7], &meter).is_err());
    }

    #[test]
    fn marginalize_reorders_and_rejects_foreign_vars() {
        let ds = small();
        let meter = CallMeter::new();
        let t = counts(&ds, &[0, 1, 2], &meter).unwrap();
        let m = t.marginalize(&[2, 0]).unwrap();
        assert_eq!(m, counts(&ds, &[2, 0], &meter).unwrap());
        assert_eq!(t.marginalize(&[0, 1, 2]).unwrap(), t);
        let small_t = counts(&ds, &[0], &meter).unwrap();
        assert!(small_t.marginalize(&[1]).is_err());
    }

    #[test]
    fn store_reuses_supersets() {
        let ds = small();
        let mut store = TableStore::new(&ds, DEFAULT_CELL_BUDGET);
        store.table(&[0, 1, 2]).unwrap();
        store.table(&[2, 1]).unwrap();
        store.table(&[0]).unwrap();
        assert_eq!(store.meter().snapshot().data_calls, 1);
        let mut tiny = TableStore::new(&ds, 4);
        assert!(matches!(tiny.table(&[0, 1, 2]), Err(Error::TableTooLarge { .. })));
    }
}
