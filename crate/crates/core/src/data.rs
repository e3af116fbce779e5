//! Categorical datasets and the contingency tables built from them.
//!
//! Tables are dense and row-major: the last variable varies fastest. Parent-child
//! tables keep the child axis last, so the flat index of `(parent config c,
//! child category x)` is `c * k_child + x`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of cells in any single table.
pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;

/// `n × p` matrix of category codes plus the label map back to the raw strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDataset {
    names: Vec<String>,
    codes: Vec<u32>,
    n: usize,
    cardinalities: Vec<usize>,
    labels: Vec<Vec<String>>,
}

impl CategoricalDataset {
    /// Builds a dataset from already-coded rows, validating every invariant.
    pub fn new(
        names: Vec<String>,
        rows: &[Vec<u32>],
        cardinalities: Vec<usize>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        let p = cardinalities.len();
        if p == 0 {
            return Err(Error::EmptyDataset("columns"));
        }
        if names.len() != p || labels.len() != p {
            return Err(Error::Shape(format!(
                "{} names and {} label lists for {p} columns",
                names.len(),
                labels.len()
            )));
        }
        for (j, (&k, l)) in cardinalities.iter().zip(&labels).enumerate() {
            if k < 2 {
                return Err(Error::DegenerateColumn {
                    column: names[j].clone(),
                    cardinality: k,
                });
            }
            if l.len() != k {
                return Err(Error::Shape(format!(
                    "column '{}' has {k} categories but {} labels",
                    names[j],
                    l.len()
                )));
            }
        }
        let mut codes = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, &c) in row.iter().enumerate() {
                if c as usize >= cardinalities[j] {
                    return Err(Error::CodeOutOfRange {
                        row: i + 1,
                        column: j,
                        code: c,
                        cardinality: cardinalities[j],
                    });
                }
            }
            codes.extend_from_slice(row);
        }
        Ok(Self {
            names,
            codes,
            n: rows.len(),
            cardinalities,
            labels,
        })
    }

    /// Coded rows with generated names `x1..xp` and labels `"0".."k-1"`.
    pub fn from_codes(rows: &[Vec<u32>], cardinalities: Vec<usize>) -> Result<Self> {
        let names = (1..=cardinalities.len()).map(|j| format!("x{j}")).collect();
        let labels = cardinalities
            .iter()
            .map(|&k| (0..k).map(|c| c.to_string()).collect())
            .collect();
        Self::new(names, rows, cardinalities, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.cardinalities[j]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self, j: usize) -> &[String] {
        &self.labels[j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let p = self.p();
        &self.codes[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.codes.chunks_exact(self.p())
    }

    pub fn value(&self, i: usize, j: usize) -> u32 {
        self.codes[i * self.p() + j]
    }

    /// Index of the column called `name`.
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves a column reference given either by name or by 0-based index.
    pub fn resolve(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Ok(j) = self.index_of(token) {
            return Ok(j);
        }
        match token.parse::<usize>() {
            Ok(j) if j < self.p() => Ok(j),
            Ok(j) => Err(Error::NodeOutOfRange { node: j, p: self.p() }),
            Err(_) => Err(Error::UnknownVariable(token.to_string())),
        }
    }

    /// Category code of `label` in column `j`.
    pub fn code_of(&self, j: usize, label: &str) -> Result<u32> {
        self.labels[j]
            .iter()
            .position(|l| l == label)
            .map(|c| c as u32)
            .ok_or_else(|| Error::UnknownVariable(format!("{}={label}", self.names[j])))
    }

    /// Writes the dataset back out using the original labels.
    pub fn write_csv<W: std::io::Write>(&self, w: W, delimiter: u8) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(w);
        wtr.write_record(&self.names)?;
        for row in self.rows() {
            wtr.write_record(
                row.iter()
                    .enumerate()
                    .map(|(j, &c)| self.labels[j][c as usize].as_str()),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads a delimited table with a header row. Categories are coded by order
/// of first appearance within each column.
pub fn ingest_dataset<R: Read>(reader: R, delimiter: u8) -> Result<CategoricalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let p = names.len();
    if p == 0 || (p == 1 && names[0].is_empty()) {
        return Err(Error::EmptyDataset("columns"));
    }
    let mut maps: Vec<HashMap<String, u32>> = vec![HashMap::new(); p];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); p];
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != p {
            return Err(Error::RaggedRow {
                row: i + 1,
                expected: p,
                found: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(p);
        for (j, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::EmptyCell {
                    row: i + 1,
                    column: names[j].clone(),
                });
            }
            let next = maps[j].len() as u32;
            let code = *maps[j].entry(cell.to_string()).or_insert_with(|| {
                labels[j].push(cell.to_string());
                next
            });
            row.push(code);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset("rows"));
    }
    let cardinalities = labels.iter().map(Vec::len).collect();
    CategoricalDataset::new(names, &rows, cardinalities, labels)
}

/// [`ingest_dataset`] from a file path.
pub fn ingest_path(path: impl AsRef<Path>, delimiter: u8) -> Result<CategoricalDataset> {
    let file = std::fs::File::open(path)?;
    ingest_dataset(std::io::BufReader::new(file), delimiter)
}

/// Dense count tensor over an ordered set of variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    vars: Vec<usize>,
    dims: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

fn check_budget(vars: &[usize], dims: &[usize], budget: usize) -> Result<usize> {
    let cells: u128 = dims.iter().map(|&d| d as u128).product();
    if cells > budget as u128 {
        return Err(Error::CellBudget {
            vars: vars.to_vec(),
            cells,
            budget,
        });
    }
    Ok(cells as usize)
}

impl ContingencyTable {
    /// Builds a table from raw counts in row-major order.
    pub fn from_counts(vars: Vec<usize>, dims: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if vars.len() != dims.len() {
            return Err(Error::Shape("vars and dims differ in length".into()));
        }
        let cells: usize = dims.iter().product();
        if counts.len() != cells {
            return Err(Error::Shape(format!(
                "{} counts for {cells} cells",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self {
            vars,
            dims,
            counts,
            total,
        })
    }

    /// Tallies `ds` over `vars` in the given order; an empty variable list
    /// yields the one-cell table `(n)`.
    fn tally(ds: &CategoricalDataset, vars: &[usize], budget: usize) -> Result<Self> {
        let dims: Vec<usize> = vars.iter().map(|&j| ds.cardinality(j)).collect();
        let cells = check_budget(vars, &dims, budget)?;
        let mut counts = vec![0u64; cells];
        for row in ds.rows() {
            let mut idx = 0usize;
            for (&j, &d) in vars.iter().zip(&dims) {
                idx = idx * d + row[j] as usize;
            }
            counts[idx] += 1;
        }
        Ok(Self {
            vars: vars.to_vec(),
            dims,
            counts,
            total: ds.n() as u64,
        })
    }

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

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Flat index of a cell given one category per variable.
    pub fn encode(&self, cell: &[usize]) -> usize {
        debug_assert_eq!(cell.len(), self.dims.len());
        cell.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut cell = vec![0; self.dims.len()];
        for (slot, &d) in cell.iter_mut().zip(&self.dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        cell
    }

    pub fn get(&self, cell: &[usize]) -> u64 {
        self.counts[self.encode(cell)]
    }

    /// Sums out every variable not in `keep`. The result lists the kept
    /// variables in this table's order.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() || keep.iter().any(|v| !self.vars.contains(v)) {
            return Err(Error::NotSubset {
                requested: keep.to_vec(),
                available: self.vars.clone(),
            });
        }
        let axes: Vec<usize> = (0..self.vars.len())
            .filter(|&a| keep.contains(&self.vars[a]))
            .collect();
        let vars: Vec<usize> = axes.iter().map(|&a| self.vars[a]).collect();
        let dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut counts = vec![0u64; dims.iter().product()];
        let mut cell = vec![0usize; self.dims.len()];
        for &c in &self.counts {
            let idx = axes.iter().fold(0, |acc, &a| acc * self.dims[a] + cell[a]);
            counts[idx] += c;
            // odometer increment, last axis fastest
            for a in (0..cell.len()).rev() {
                cell[a] += 1;
                if cell[a] < self.dims[a] {
                    break;
                }
                cell[a] = 0;
            }
        }
        Ok(Self {
            vars,
            dims,
            counts,
            total: self.total,
        })
    }

    /// Flat text form: one header line, then one count per line.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = format!(
            "vars={};dims={};total={}\n",
            join(&self.vars),
            join(&self.dims),
            self.total
        );
        for c in &self.counts {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut vars = None;
        let mut dims = None;
        for field in header.split(';') {
            let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("bad header field '{field}'"),
            })?;
            let parse = |v: &str| -> Result<Vec<usize>> {
                if v.is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| Error::Parse {
                            line: 1,
                            msg: format!("bad integer '{x}'"),
                        })
                    })
                    .collect()
            };
            match key.trim() {
                "vars" => vars = Some(parse(value)?),
                "dims" => dims = Some(parse(value)?),
                _ => {}
            }
        }
        let (vars, dims) = match (vars, dims) {
            (Some(v), Some(d)) => (v, d),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "header needs vars= and dims=".into(),
                })
            }
        };
        let counts = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<u64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("bad count '{l}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(vars, dims, counts)
    }
}

fn validate_nodes(ds: &CategoricalDataset, nodes: &[usize]) -> Result<()> {
    for (i, &j) in nodes.iter().enumerate() {
        if j >= ds.p() {
            return Err(Error::NodeOutOfRange { node: j, p: ds.p() });
        }
        if nodes[..i].contains(&j) {
            return Err(Error::DuplicateNode(j));
        }
    }
    Ok(())
}

/// Contingency table of `ds` over the node subset `vars` (sorted ascending).
pub fn contingency(ds: &CategoricalDataset, vars: &[usize]) -> Result<ContingencyTable> {
    contingency_with_budget(ds, vars, DEFAULT_CELL_BUDGET)
}

pub fn contingency_with_budget(
    ds: &CategoricalDataset,
    vars: &[usize],
    budget: usize,
) -> Result<ContingencyTable> {
    if vars.is_empty() {
        return Err(Error::InvalidParameter("empty variable set".into()));
    }
    validate_nodes(ds, vars)?;
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    ContingencyTable::tally(ds, &sorted, budget)
}

/// Sums out every variable of `table` outside `keep`.
pub fn marginalize(table: &ContingencyTable, keep: &[usize]) -> Result<ContingencyTable> {
    table.marginalize(keep)
}

/// Counts of one node jointly with its parent set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentChildTable {
    child: usize,
    parents: Vec<usize>,
    k_child: usize,
    parent_counts: ContingencyTable,
    joint_counts: ContingencyTable,
}

impl ParentChildTable {
    /// Builds from raw joint counts laid out as `[parent config][child category]`.
    pub fn from_joint_counts(
        child: usize,
        parents: Vec<usize>,
        parent_dims: Vec<usize>,
        k_child: usize,
        joint: Vec<u64>,
    ) -> Result<Self> {
        if parents.contains(&child) {
            return Err(Error::SelfParent(child));
        }
        let mut jvars = parents.clone();
        jvars.push(child);
        let mut jdims = parent_dims.clone();
        jdims.push(k_child);
        let joint_counts = ContingencyTable::from_counts(jvars, jdims, joint)?;
        let parent_totals: Vec<u64> = joint_counts
            .counts()
            .chunks_exact(k_child)
            .map(|r| r.iter().sum())
            .collect();
        let parent_counts = ContingencyTable::from_counts(parents.clone(), parent_dims, parent_totals)?;
        Ok(Self {
            child,
            parents,
            k_child,
            parent_counts,
            joint_counts,
        })
    }

    /// Root-node table from marginal child counts.
    pub fn root(child: usize, counts: Vec<u64>) -> Self {
        let k = counts.len();
        Self::from_joint_counts(child, Vec::new(), Vec::new(), k, counts)
            .expect("root table shape is always valid")
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn k_child(&self) -> usize {
        self.k_child
    }

    pub fn parent_counts(&self) -> &ContingencyTable {
        &self.parent_counts
    }

    pub fn joint_counts(&self) -> &ContingencyTable {
        &self.joint_counts
    }

    /// Number of parent configurations, K_Pa (1 for a root).
    pub fn n_configs(&self) -> usize {
        self.parent_counts.len()
    }

    pub fn parent_count(&self, config: usize) -> u64 {
        self.parent_counts.counts()[config]
    }

    pub fn joint_count(&self, config: usize, category: usize) -> u64 {
        self.joint_counts.counts()[config * self.k_child + category]
    }

    /// Child counts within one parent configuration.
    pub fn row(&self, config: usize) -> &[u64] {
        let k = self.k_child;
        &self.joint_counts.counts()[config * k..(config + 1) * k]
    }

    /// Marginal child counts n_j(x_j).
    pub fn child_marginal(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.k_child];
        for row in self.joint_counts.counts().chunks_exact(self.k_child) {
            for (a, &b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m
    }

    /// Parent configurations with at least one observation.
    pub fn positive_configs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_configs()).filter(move |&c| self.parent_count(c) > 0)
    }

    /// Index of the parent configuration given one category per parent
    /// (in the order of [`parents`](Self::parents)).
    pub fn config_index(&self, parent_values: &[usize]) -> usize {
        self.parent_counts.encode(parent_values)
    }

    pub fn config_values(&self, config: usize) -> Vec<usize> {
        self.parent_counts.decode(config)
    }

    pub fn total(&self) -> u64 {
        self.joint_counts.total()
    }
}

/// Joint and parent tables of node `child` with the given parent set.
pub fn parent_child_table(
    ds: &CategoricalDataset,
    child: usize,
    parents: &[usize],
) -> Result<ParentChildTable> {
    parent_child_table_with_budget(ds, child, parents, DEFAULT_CELL_BUDGET)
}

pub fn parent_child_table_with_budget(
    ds: &CategoricalDataset,
    child: usize,
    parents: &[usize],
    budget: usize,
) -> Result<ParentChildTable> {
    if parents.contains(&child) {
        return Err(Error::SelfParent(child));
    }
    let mut all = parents.to_vec();
    all.push(child);
    validate_nodes(ds, &all)?;
    let mut parents = parents.to_vec();
    parents.sort_unstable();
    let mut jvars = parents.clone();
    jvars.push(child);
    let joint_counts = ContingencyTable::tally(ds, &jvars, budget)?;
    let k_child = ds.cardinality(child);
    let parent_dims: Vec<usize> = parents.iter().map(|&j| ds.cardinality(j)).collect();
    let parent_totals = joint_counts
        .counts()
        .chunks_exact(k_child)
        .map(|r| r.iter().sum())
        .collect();
    let parent_counts = ContingencyTable::from_counts(parents.clone(), parent_dims, parent_totals)?;
    Ok(ParentChildTable {
        child,
        parents,
        k_child,
        parent_counts,
        joint_counts,
    })
}

/// Conditional probability table estimated by maximum likelihood; rows whose
/// parent configuration was never observed are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMle {
    pub rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalMle {
    pub fn is_defined(&self, config: usize) -> bool {
        self.rows[config].is_some()
    }
}

pub fn conditional_mle(pct: &ParentChildTable) -> ConditionalMle {
    let rows = (0..pct.n_configs())
        .map(|c| {
            let np = pct.parent_count(c);
            (np > 0).then(|| pct.row(c).iter().map(|&x| x as f64 / np as f64).collect())
        })
        .collect();
    ConditionalMle { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: &[Vec<u32>], k: Vec<usize>) -> CategoricalDataset {
        CategoricalDataset::from_codes(rows, k).unwrap()
    }

    #[test]
    fn ingest_codes_by_first_appearance() {
        let text = "a,b\nx,q\ny,q\nx,r\n";
        let d = ingest_dataset(text.as_bytes(), b',').unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.cardinalities(), &[2, 2]);
        assert_eq!(d.row(0), &[0, 0]);
        assert_eq!(d.row(1), &[1, 0]);
        assert_eq!(d.row(2), &[0, 1]);
        assert_eq!(d.labels(0), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn ingest_rejects_single_category_column() {
        let err = ingest_dataset("c1,c2\na,b\nb,b\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::DegenerateColumn { ref column, cardinality: 1 } if column == "c2"));
    }

    #[test]
    fn ingest_rejects_ragged_and_empty() {
        let err = ingest_dataset("a,b\n1,2\n1\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 2, expected: 2, found: 1 }));
        let err = ingest_dataset("a,b\n1,2\n2,\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::EmptyCell { row: 2, ref column } if column == "b"));
        let err = ingest_dataset("a,b\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::EmptyDataset("rows")));
    }

    #[test]
    fn ingest_custom_delimiter() {
        let d = ingest_dataset("a;b\n1;2\n2;1\n".as_bytes(), b';').unwrap();
        assert_eq!(d.cardinalities(), &[2, 2]);
    }

    #[test]
    fn direct_tally() {
        let d = ds(&[vec![0], vec![0], vec![1]], vec![2]);
        let t = contingency(&d, &[0]).unwrap();
        assert_eq!(t.counts(), &[2, 1]);
        assert_eq!(t.total(), 3);
        assert!(matches!(
            contingency(&d, &[1]),
            Err(Error::NodeOutOfRange { node: 1, p: 1 })
        ));
        assert!(contingency(&d, &[]).is_err());
    }

    #[test]
    fn marginalize_row_sums_and_identity() {
        let t = ContingencyTable::from_counts(vec![0, 1], vec![2, 2], vec![1, 2, 3, 4]).unwrap();
        assert_eq!(t.marginalize(&[0]).unwrap().counts(), &[3, 7]);
        assert_eq!(t.marginalize(&[1]).unwrap().counts(), &[4, 6]);
        assert_eq!(t.marginalize(&[0, 1]).unwrap(), t);
        assert!(matches!(t.marginalize(&[2]), Err(Error::NotSubset { .. })));
    }

    #[test]
    fn root_table_uses_dummy_parent() {
        let d = ds(&[vec![0], vec![0], vec![1]], vec![2]);
        let pct = parent_child_table(&d, 0, &[]).unwrap();
        assert_eq!(pct.joint_counts().counts(), &[2, 1]);
        assert_eq!(pct.parent_counts().counts(), &[3]);
        assert_eq!(pct.n_configs(), 1);
        assert!(matches!(
            parent_child_table(&d, 0, &[0]),
            Err(Error::SelfParent(0))
        ));
    }

    /// Parent with 6 categories and a binary child whose category-1 counts
    /// are (3,1,0,3,0,3) out of (4,3,5,7,3,3).
    fn sparse_six_parent_rows() -> Vec<Vec<u32>> {
        let parent = [4u32, 3, 5, 7, 3, 3];
        let ones = [3u32, 1, 0, 3, 0, 3];
        let mut rows = Vec::new();
        for c in 0..6 {
            for i in 0..parent[c] {
                rows.push(vec![c as u32, u32::from(i < ones[c])]);
            }
        }
        rows
    }

    #[test]
    fn sparse_six_category_parent_table() {
        let rows = sparse_six_parent_rows();
        assert_eq!(rows.len(), 25);
        let d = ds(&rows, vec![6, 2]);
        let pct = parent_child_table(&d, 1, &[0]).unwrap();
        assert_eq!(pct.parent_counts().counts(), &[4, 3, 5, 7, 3, 3]);
        let child1: Vec<u64> = (0..6).map(|c| pct.joint_count(c, 1)).collect();
        assert_eq!(child1, vec![3, 1, 0, 3, 0, 3]);
        let mle = conditional_mle(&pct);
        let p1: Vec<f64> = mle.rows.iter().map(|r| r.as_ref().unwrap()[1]).collect();
        let want = [0.75, 1.0 / 3.0, 0.0, 3.0 / 7.0, 0.0, 1.0];
        for (a, b) in p1.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_mle_flags_empty_parent_cells() {
        let pct = ParentChildTable::from_joint_counts(1, vec![0], vec![2], 2, vec![3, 1, 0, 0]).unwrap();
        let mle = conditional_mle(&pct);
        assert_eq!(mle.rows[0], Some(vec![0.75, 0.25]));
        assert!(!mle.is_defined(1));
    }

    #[test]
    fn cell_budget_rejects_large_parent_sets() {
        let d = ds(&[vec![0, 0, 0]], vec![10, 10, 10]);
        let err = parent_child_table_with_budget(&d, 2, &[0, 1], 999).unwrap_err();
        assert!(matches!(err, Error::CellBudget { cells: 1000, .. }));
    }

    #[test]
    fn text_round_trip() {
        let t = ContingencyTable::from_counts(vec![1, 3], vec![2, 3], vec![1, 0, 2, 5, 0, 1]).unwrap();
        let back = ContingencyTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_text().starts_with("vars=1,3;dims=2,3;total=9\n"));
    }

    fn arb_dataset() -> impl Strategy<Value = CategoricalDataset> {
        (1usize..5, 1usize..60).prop_flat_map(|(p, n)| {
            proptest::collection::vec(2usize..4, p).prop_flat_map(move |k| {
                let rows = proptest::collection::vec(
                    k.iter().map(|&kj| 0..kj as u32).collect::<Vec<_>>(),
                    n,
                );
                (Just(k), rows)
            })
        })
        .prop_map(|(k, rows)| CategoricalDataset::from_codes(&rows, k).unwrap())
    }

    proptest! {
        #[test]
        fn marginalization_commutes(d in arb_dataset(), mask in 1u32..16, sub in 1u32..16) {
            let p = d.p();
            let all: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
            prop_assume!(!all.is_empty());
            let keep: Vec<usize> = all.iter().copied().enumerate()
                .filter(|(i, _)| sub & (1 << i) != 0).map(|(_, j)| j).collect();
            prop_assume!(!keep.is_empty());
            let big = contingency(&d, &all).unwrap();
            prop_assert_eq!(big.counts().iter().sum::<u64>(), d.n() as u64);
            let m = big.marginalize(&keep).unwrap();
            prop_assert_eq!(m, contingency(&d, &keep).unwrap());
        }

        #[test]
        fn joint_marginalizes_to_parent(d in arb_dataset()) {
            prop_assume!(d.p() >= 2);
            let child = d.p() - 1;
            let parents: Vec<usize> = (0..child).collect();
            let pct = parent_child_table(&d, child, &parents).unwrap();
            let m = pct.joint_counts().marginalize(&parents).unwrap();
            prop_assert_eq!(m.counts(), pct.parent_counts().counts());
            // brute-force re-tally from raw rows
            for c in 0..pct.n_configs() {
                let vals = pct.config_values(c);
                let n = d.rows().filter(|r| parents.iter().zip(&vals).all(|(&j, &v)| r[j] as usize == v)).count();
                prop_assert_eq!(pct.parent_count(c), n as u64);
            }
        }

        #[test]
        fn mixed_radix_is_bijective(dims in proptest::collection::vec(1usize..5, 1..4)) {
            let cells: usize = dims.iter().product();
            let t = ContingencyTable::from_counts((0..dims.len()).collect(), dims, vec![0; cells]).unwrap();
            for i in 0..cells {
                prop_assert_eq!(t.encode(&t.decode(i)), i);
            }
        }
    }
}
