//! Dense directed network storage, edge-list IO and preprocessing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ModelFamily;
use crate::rng::{self, tag};
use crate::scalar::Scalar;

/// Seed value for which [`NetworkData::relabel`] is the identity.
pub const IDENTITY_SEED: u64 = 0;

/// Complete directed network: every ordered pair `(i, j)`, `i != j`, carries
/// an outcome and a covariate vector. Diagonal entries are stored as zeros
/// and never read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkData<T> {
    n: usize,
    k: usize,
    y: Vec<T>,
    x: Vec<T>,
    labels: Vec<String>,
    covariate_names: Vec<String>,
}

impl<T: Scalar> NetworkData<T> {
    /// Build from a closure returning `(y_ij, x_ij)` for every off-diagonal pair.
    pub fn from_fn(
        n: usize,
        covariate_names: Vec<String>,
        mut f: impl FnMut(usize, usize) -> (T, Vec<T>),
    ) -> Result<Self> {
        let k = covariate_names.len();
        if n < 4 {
            return Err(Error::InvalidData(format!("need at least 4 nodes, got {n}")));
        }
        let mut y = vec![T::zero(); n * n];
        let mut x = vec![T::zero(); n * n * k];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (yij, xij) = f(i, j);
                if xij.len() != k {
                    return Err(Error::InvalidData(format!(
                        "pair ({i}, {j}) has {} covariates, expected {k}",
                        xij.len()
                    )));
                }
                y[i * n + j] = yij;
                x[(i * n + j) * k..(i * n + j + 1) * k].copy_from_slice(&xij);
            }
        }
        Ok(Self {
            n,
            k,
            y,
            x,
            labels: (1..=n).map(|i| i.to_string()).collect(),
            covariate_names,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n);
        self.labels = labels;
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn dim_beta(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> T {
        self.y[i * self.n + j]
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> &[T] {
        let at = (i * self.n + j) * self.k;
        &self.x[at..at + self.k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Replace the outcomes, keeping covariates and labels.
    pub fn with_outcomes(&self, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                out.y[i * self.n + j] = if i == j { T::zero() } else { f(i, j) };
            }
        }
        out
    }

    pub fn density(&self) -> T {
        let total: T = self.edges().map(|(i, j)| self.y(i, j)).sum();
        total / T::from_usize_lossy(self.n * (self.n - 1))
    }

    /// Outgoing outcome totals.
    pub fn out_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| j != i).map(|j| self.y(i, j)).sum())
            .collect()
    }

    /// Incoming outcome totals.
    pub fn in_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|j| (0..self.n).filter(|&i| i != j).map(|i| self.y(i, j)).sum())
            .collect()
    }

    /// Off-diagonal pairs in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// Sub-network on `nodes`, in the given order.
    pub fn subset(&self, nodes: &[usize]) -> Result<Self> {
        for &v in nodes {
            if v >= self.n {
                return Err(Error::IndexOutOfRange { index: v, len: self.n });
            }
        }
        let mut out = Self::from_fn(nodes.len(), self.covariate_names.clone(), |a, b| {
            let (i, j) = (nodes[a], nodes[b]);
            (self.y(i, j), self.x(i, j).to_vec())
        })?;
        out.labels = nodes.iter().map(|&v| self.labels[v].clone()).collect();
        Ok(out)
    }

    /// Reorder nodes: new node `a` is old node `perm[a]`. Labels travel with
    /// their nodes, so the original identity of every index stays recoverable.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length");
        self.subset(perm).expect("valid permutation")
    }

    /// Uniformly random relabeling determined by `seed`.
    pub fn relabel(&self, seed: u64) -> Self {
        self.permute(&relabel_permutation(self.n, seed))
    }

    pub fn cast<U: Scalar>(&self) -> NetworkData<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        NetworkData {
            n: self.n,
            k: self.k,
            y: c(&self.y),
            x: c(&self.x),
            labels: self.labels.clone(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Check every outcome against the family's domain.
    pub fn check_family(&self, family: ModelFamily) -> Result<()> {
        for (i, j) in self.edges() {
            family.check_outcome(self.y(i, j).as_f64())?;
        }
        Ok(())
    }

    /// Iteratively drop nodes whose outgoing or incoming outcomes are
    /// constant (binary families), until nothing changes.
    pub fn filter_degenerate(&self, family: ModelFamily) -> Result<(Self, DegeneracyReport)> {
        let mut report = DegeneracyReport::default();
        if !family.is_binary() {
            return Ok((self.clone(), report));
        }
        let mut keep: Vec<usize> = (0..self.n).collect();
        loop {
            let mut dropped = Vec::new();
            for &i in &keep {
                if let Some(reason) = degenerate_reason(self, &keep, i) {
                    dropped.push((i, reason));
                }
            }
            if dropped.is_empty() {
                break;
            }
            report.passes += 1;
            keep.retain(|v| !dropped.iter().any(|(d, _)| d == v));
            for (i, reason) in dropped {
                report.dropped_nodes.push(self.labels[i].clone());
                report.reasons.push(reason);
            }
            if keep.len() < 4 {
                return Err(Error::TooSmallAfterFiltering { remaining: keep.len() });
            }
        }
        let out = if report.dropped_nodes.is_empty() {
            self.clone()
        } else {
            self.subset(&keep)?
        };
        Ok((out, report))
    }
}

fn degenerate_reason<T: Scalar>(d: &NetworkData<T>, keep: &[usize], i: usize) -> Option<DegeneracyReason> {
    let others = keep.iter().copied().filter(|&j| j != i);
    let m = T::from_usize_lossy(keep.len() - 1);
    let out: T = others.clone().map(|j| d.y(i, j)).sum();
    let inc: T = others.map(|j| d.y(j, i)).sum();
    if out == m {
        Some(DegeneracyReason::AllOnesRow)
    } else if out == T::zero() {
        Some(DegeneracyReason::AllZerosRow)
    } else if inc == m {
        Some(DegeneracyReason::AllOnesColumn)
    } else if inc == T::zero() {
        Some(DegeneracyReason::AllZerosColumn)
    } else {
        None
    }
}

/// Permutation used by [`NetworkData::relabel`].
pub fn relabel_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if seed != IDENTITY_SEED {
        perm.shuffle(&mut rng::stream(seed, &[tag::RELABEL]));
    }
    perm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyReason {
    AllOnesRow,
    AllZerosRow,
    AllOnesColumn,
    AllZerosColumn,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub dropped_nodes: Vec<String>,
    pub reasons: Vec<DegeneracyReason>,
    pub passes: usize,
}

impl DegeneracyReport {
    pub fn is_empty(&self) -> bool {
        self.dropped_nodes.is_empty()
    }
}

/// Column mapping for edge-list files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSchema {
    pub sender: String,
    pub receiver: String,
    pub outcome: String,
    /// Covariate columns; empty means every remaining column, in file order.
    pub covariates: Vec<String>,
    /// Field delimiter; `None` picks tab for `.tsv` files and comma otherwise.
    pub delimiter: Option<u8>,
}

impl Default for EdgeSchema {
    fn default() -> Self {
        Self {
            sender: "sender_id".into(),
            receiver: "receiver_id".into(),
            outcome: "outcome".into(),
            covariates: Vec::new(),
            delimiter: None,
        }
    }
}

fn delimiter_for(path: &Path, schema: &EdgeSchema) -> u8 {
    schema.delimiter.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") => b'\t',
            _ => b',',
        }
    })
}

pub fn load_edge_list<T: Scalar>(path: impl AsRef<Path>, schema: &EdgeSchema) -> Result<NetworkData<T>> {
    let path = path.as_ref();
    let delim = delimiter_for(path, schema);
    read_edge_list(File::open(path)?, schema, delim)
}

pub fn read_edge_list<T: Scalar, R: Read>(reader: R, schema: &EdgeSchema, delimiter: u8) -> Result<NetworkData<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (cs, cr, cy) = (col(&schema.sender)?, col(&schema.receiver)?, col(&schema.outcome)?);
    let cov_names: Vec<String> = if schema.covariates.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(c, _)| ![cs, cr, cy].contains(c))
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        schema.covariates.clone()
    };
    let cx: Vec<usize> = cov_names.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut rows: HashMap<(usize, usize), (T, Vec<T>)> = HashMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(r + 2);
        let field = |c: usize| rec.get(c).unwrap_or("");
        let mut node = |s: &str| {
            let next = labels.len();
            *index.entry(s.to_string()).or_insert_with(|| {
                labels.push(s.to_string());
                next
            })
        };
        let (s, t) = (field(cs).to_string(), field(cr).to_string());
        if s == t {
            return Err(Error::SelfLoopRejected { node: s, line });
        }
        let (i, j) = (node(&s), node(&t));
        let parse = |c: usize, name: &str| -> Result<T> {
            let raw = field(c);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::Parse {
                    line,
                    field: name.to_string(),
                    value: raw.to_string(),
                })
        };
        let y = parse(cy, &schema.outcome)?;
        let x = cx
            .iter()
            .zip(&cov_names)
            .map(|(&c, name)| parse(c, name))
            .collect::<Result<Vec<T>>>()?;
        if rows.insert((i, j), (y, x)).is_some() {
            return Err(Error::DuplicateObservation {
                sender: s,
                receiver: t,
                line,
            });
        }
    }
    let n = labels.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && !rows.contains_key(&(i, j)) {
                return Err(Error::MissingObservation {
                    sender: labels[i].clone(),
                    receiver: labels[j].clone(),
                });
            }
        }
    }
    let data = NetworkData::from_fn(n, cov_names, |i, j| rows.remove(&(i, j)).expect("checked"))?;
    Ok(data.with_labels(labels))
}

/// Write in the layout [`read_edge_list`] accepts, row-major over node index.
/// Numbers use the shortest representation that parses back to the same value.
pub fn write_edge_list<T: Scalar, W: Write>(data: &NetworkData<T>, schema: &EdgeSchema, delimiter: u8, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header = vec![schema.sender.clone(), schema.receiver.clone(), schema.outcome.clone()];
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for (i, j) in data.edges() {
        let mut rec = vec![data.labels[i].clone(), data.labels[j].clone(), data.y(i, j).to_string()];
        rec.extend(data.x(i, j).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_edge_list<T: Scalar>(data: &NetworkData<T>, path: impl AsRef<Path>, schema: &EdgeSchema) -> Result<()> {
    let path = path.as_ref();
    write_edge_list(data, schema, delimiter_for(path, schema), File::create(path)?)
}
