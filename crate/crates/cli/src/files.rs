//! Text formats for candidate structures and prediction queries.
//!
//! Candidate parent sets and candidate parents share one line format,
//! `child <- a, b`, optionally followed by `@ weight`. An empty right-hand
//! side denotes the empty set. Candidate DAGs are edge lists split into
//! blocks by `[name]` or `[name weight]` headers. `#` starts a comment.

use std::collections::BTreeMap;

use hidden_core::data::CategoricalDataset;
use hidden_core::graph::Dag;
use hidden_core::structure::{normalize_prior, CandidateDags, CandidateParentSets};
use hidden_core::{Error, Result};

fn strip(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_weight(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .ok()
        .filter(|w| *w >= 0.0 && w.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad prior weight '{}'", tok.trim()),
        })
}

/// One `child <- parents [@ weight]` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentLine {
    pub child: usize,
    pub parents: Vec<usize>,
    pub weight: Option<f64>,
}

pub fn parse_parent_lines(ds: &CategoricalDataset, text: &str) -> Result<Vec<ParentLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip(raw);
        if line.is_empty() {
            continue;
        }
        let (body, weight) = match line.split_once('@') {
            Some((b, w)) => (b, Some(parse_weight(w, i + 1)?)),
            None => (line, None),
        };
        let (child, rhs) = body.split_once("<-").ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected 'child <- parents', got '{line}'"),
        })?;
        let child = ds.resolve(child.trim())?;
        let mut parents = rhs
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| ds.resolve(s))
            .collect::<Result<Vec<_>>>()?;
        parents.sort_unstable();
        parents.dedup();
        if parents.contains(&child) {
            return Err(Error::SelfParent(child));
        }
        out.push(ParentLine { child, parents, weight });
    }
    Ok(out)
}

/// Candidate parents per node: the union of every line's parents.
pub fn parse_candidate_parents(ds: &CategoricalDataset, text: &str) -> Result<Vec<Vec<usize>>> {
    let mut ca = vec![Vec::new(); ds.p()];
    for l in parse_parent_lines(ds, text)? {
        ca[l.child].extend(l.parents);
    }
    for c in &mut ca {
        c.sort_unstable();
        c.dedup();
    }
    Ok(ca)
}

/// Candidate parent sets grouped by child, in order of first appearance of
/// the child. Weights default to 1 and are normalized per child.
pub fn parse_parent_sets(ds: &CategoricalDataset, text: &str) -> Result<Vec<CandidateParentSets>> {
    // child -> (first line, sets, weights)
    let mut grouped: BTreeMap<usize, (usize, Vec<Vec<usize>>, Vec<f64>)> = BTreeMap::new();
    for (order, l) in parse_parent_lines(ds, text)?.into_iter().enumerate() {
        let e = grouped.entry(l.child).or_insert((order, Vec::new(), Vec::new()));
        e.1.push(l.parents);
        e.2.push(l.weight.unwrap_or(1.0));
    }
    let mut groups: Vec<_> = grouped.into_iter().collect();
    groups.sort_by_key(|(_, (order, _, _))| *order);
    groups
        .into_iter()
        .map(|(child, (_, sets, w))| {
            let m = sets.len();
            CandidateParentSets::new(child, sets, normalize_prior(Some(w), m)?)
        })
        .collect()
}

pub fn parse_candidate_dags(ds: &CategoricalDataset, text: &str) -> Result<CandidateDags> {
    let mut blocks: Vec<(String, Option<f64>, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('[') {
            let h = h.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("unterminated header '{line}'"),
            })?;
            let mut parts = h.split_whitespace();
            let name = parts.next().ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "empty graph header".into(),
            })?;
            let weight = parts.next().map(|w| parse_weight(w, i + 1)).transpose()?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected '[name]' or '[name weight]', got '{line}'"),
                });
            }
            blocks.push((name.to_string(), weight, String::new()));
            continue;
        }
        let block = blocks.last_mut().ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "edge before the first '[name]' header".into(),
        })?;
        block.2.push_str(line);
        block.2.push('\n');
    }
    if blocks.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no candidate graphs".into(),
        });
    }
    let p = ds.p();
    let dags = blocks
        .iter()
        .map(|(_, _, edges)| Dag::parse_edge_list(p, edges, |t| ds.resolve(t)))
        .collect::<Result<Vec<_>>>()?;
    let weights = blocks.iter().map(|b| b.1.unwrap_or(1.0)).collect();
    let mut cd = CandidateDags::new(dags, normalize_prior(Some(weights), blocks.len())?)?;
    cd.names = blocks.into_iter().map(|b| b.0).collect();
    Ok(cd)
}

/// Query rows for prediction: a header naming dataset variables and one
/// labelled observation per row. Columns may come in any order; the target
/// column may be missing or hold any label.
pub fn parse_queries(ds: &CategoricalDataset, target: usize, text: &str, delimiter: u8) -> Result<Vec<Vec<u32>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<usize> = rdr
        .headers()?
        .iter()
        .map(|h| ds.index_of(h))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut x: Vec<Option<u32>> = vec![None; ds.p()];
        x[target] = Some(0);
        for (&j, label) in header.iter().zip(rec.iter()) {
            if j != target {
                x[j] = Some(ds.code_of(j, label)?);
            }
        }
        let x = x
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or_else(|| Error::Parse {
                    line: i + 2,
                    msg: format!("query lacks variable '{}'", ds.names()[j]),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(x);
    }
    Ok(rows)
}
