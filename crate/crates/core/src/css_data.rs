//! CSS tensors, loaders, classical descriptives, and dyadic covariates.
//!
//! A cognitive social structure over `I` actors stores one binary value per
//! `(sender i, receiver i', perceiver j)` triple with `i ≠ i'`: perceiver
//! `j`'s report of whether `i` sends a tie to `i'`. Self-ties are
//! structurally absent. Alongside the tensor itself this module provides the
//! classical threshold-consensus network
//!
//! ```text
//! ỹ[i, i'] = 1  iff  (1/I) Σ_j y[i, i', j] > δ₀
//! ```
//!
//! normalized degree profiles, and the dyadic covariate builder used by the
//! regression part of the model.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// CssTensor
// ---------------------------------------------------------------------------

/// Complete binary perception tensor `y[i, i', j]`, `i ≠ i'`, 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CssTensor {
    n_actors: usize,
    labels: Vec<String>,
    /// Dense storage including (unused, always-zero) diagonal slots;
    /// index `((j · I) + i) · I + i'`.
    values: Vec<u8>,
}

/// Supported on-disk encodings of a CSS tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CssFormat {
    /// CSV with header `perceiver,sender,receiver,value`, 1-based indices.
    LongCsv,
    /// `I` stacked `I×I` sociomatrices of space-separated 0/1 lines;
    /// block `j` is perceiver `j`'s matrix. Diagonal present but must be 0.
    MatrixStack,
    /// `{"n_actors": I, "labels": [...], "ties": [[j,i,i',v], ...]}`,
    /// 1-based indices, one entry per off-diagonal cell.
    Json,
}

impl CssTensor {
    /// Build a tensor by evaluating `f(i, i', j)` on every off-diagonal cell.
    pub fn from_fn(
        n_actors: usize,
        labels: Option<Vec<String>>,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut t = Self::empty(n_actors, labels)?;
        for j in 0..n_actors {
            for i in 0..n_actors {
                for ip in 0..n_actors {
                    if i == ip {
                        continue;
                    }
                    let v = f(i, ip, j);
                    if v > 1 {
                        return Err(Error::NonBinaryValue {
                            value: v.to_string(),
                            line: 0,
                        });
                    }
                    t.values[Self::index(n_actors, i, ip, j)] = v;
                }
            }
        }
        Ok(t)
    }

    fn empty(n_actors: usize, labels: Option<Vec<String>>) -> Result<Self> {
        if n_actors < 2 {
            return Err(Error::IncompleteTensor {
                missing: 0,
                expected: 0,
            });
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != n_actors {
                    return Err(Error::DimensionMismatch(format!(
                        "{} labels for {} actors",
                        l.len(),
                        n_actors
                    )));
                }
                l
            }
            None => (1..=n_actors).map(|i| i.to_string()).collect(),
        };
        Ok(Self {
            n_actors,
            labels,
            values: vec![0; n_actors * n_actors * n_actors],
        })
    }

    #[inline]
    fn index(n: usize, i: usize, ip: usize, j: usize) -> usize {
        (j * n + i) * n + ip
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `y[i, i', j]`; asking for a diagonal or out-of-range cell is an error.
    pub fn get(&self, i: usize, ip: usize, j: usize) -> Result<u8> {
        let n = self.n_actors;
        if i >= n || ip >= n || j >= n {
            return Err(Error::DimensionMismatch(format!(
                "cell ({i}, {ip}, {j}) outside a {n}-actor tensor"
            )));
        }
        if i == ip {
            return Err(Error::SelfTie {
                actor: i + 1,
                perceiver: j + 1,
            });
        }
        Ok(self.values[Self::index(n, i, ip, j)])
    }

    /// Unchecked accessor for hot loops; caller guarantees `i ≠ i'`.
    #[inline]
    pub(crate) fn get_unchecked(&self, i: usize, ip: usize, j: usize) -> u8 {
        self.values[Self::index(self.n_actors, i, ip, j)]
    }

    /// Iterate all off-diagonal cells as `(i, i', j, y)` in canonical order
    /// (perceiver-major, then sender, then receiver).
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, u8)> + '_ {
        let n = self.n_actors;
        (0..n).flat_map(move |j| {
            (0..n).flat_map(move |i| {
                (0..n)
                    .filter(move |&ip| ip != i)
                    .map(move |ip| (i, ip, j, self.values[Self::index(n, i, ip, j)]))
            })
        })
    }

    /// Perceiver `j`'s reported network as a binary adjacency structure.
    pub fn slice(&self, j: usize) -> Result<BinaryNetwork> {
        let n = self.n_actors;
        if j >= n {
            return Err(Error::DimensionMismatch(format!(
                "perceiver {j} outside a {n}-actor tensor"
            )));
        }
        let mut net = BinaryNetwork::new(n);
        for i in 0..n {
            for ip in 0..n {
                if i != ip {
                    net.set(i, ip, self.values[Self::index(n, i, ip, j)]);
                }
            }
        }
        Ok(net)
    }

    /// Fraction of off-diagonal cells perceiver `j` reports as ties.
    pub fn slice_density(&self, j: usize) -> Result<f64> {
        let net = self.slice(j)?;
        let n = self.n_actors;
        Ok(net.edge_count() as f64 / (n * (n - 1)) as f64)
    }

    /// Mean report over perceivers for dyad `(i, i')`.
    pub fn perceiver_mean(&self, i: usize, ip: usize) -> Result<f64> {
        let n = self.n_actors;
        self.get(i, ip, 0)?; // validates indices
        let sum: u32 = (0..n)
            .map(|j| self.values[Self::index(n, i, ip, j)] as u32)
            .sum();
        Ok(sum as f64 / n as f64)
    }

    /// Relabel actors: actor `i` of the result is actor `perm[i]` of `self`.
    pub fn permute_actors(&self, perm: &[usize]) -> Result<CssTensor> {
        let n = self.n_actors;
        validate_permutation(perm, n)?;
        let labels = perm.iter().map(|&s| self.labels[s].clone()).collect();
        CssTensor::from_fn(n, Some(labels), |i, ip, j| {
            self.values[Self::index(n, perm[i], perm[ip], perm[j])]
        })
    }

    // -- serialization ------------------------------------------------------

    pub fn write(&self, format: CssFormat, w: &mut dyn Write) -> Result<()> {
        match format {
            CssFormat::LongCsv => self.write_long_csv(w),
            CssFormat::MatrixStack => self.write_matrix_stack(w),
            CssFormat::Json => self.write_json(w),
        }
    }

    fn write_long_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["perceiver", "sender", "receiver", "value"])?;
        for j in 0..self.n_actors {
            for i in 0..self.n_actors {
                for ip in 0..self.n_actors {
                    if i == ip {
                        continue;
                    }
                    let v = self.values[Self::index(self.n_actors, i, ip, j)];
                    out.write_record([
                        (j + 1).to_string(),
                        (i + 1).to_string(),
                        (ip + 1).to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    fn write_matrix_stack(&self, w: &mut dyn Write) -> Result<()> {
        let n = self.n_actors;
        for j in 0..n {
            for i in 0..n {
                let mut line = String::with_capacity(2 * n);
                for ip in 0..n {
                    if ip > 0 {
                        line.push(' ');
                    }
                    let v = if i == ip {
                        0
                    } else {
                        self.values[Self::index(n, i, ip, j)]
                    };
                    line.push(char::from(b'0' + v));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    fn write_json(&self, w: &mut dyn Write) -> Result<()> {
        let ties: Vec<[i64; 4]> = self
            .cells()
            .map(|(i, ip, j, v)| [(j + 1) as i64, (i + 1) as i64, (ip + 1) as i64, v as i64])
            .collect();
        let doc = JsonCss {
            n_actors: self.n_actors,
            labels: Some(self.labels.clone()),
            ties,
        };
        serde_json::to_writer(&mut *w, &doc)?;
        writeln!(w)?;
        Ok(())
    }
}

/// JSON document shape for [`CssFormat::Json`].
#[derive(Serialize, Deserialize)]
struct JsonCss {
    n_actors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    ties: Vec<[i64; 4]>,
}

/// Load a complete CSS tensor from a byte stream in the given format.
pub fn load_css(source: impl Read, format: CssFormat) -> Result<CssTensor> {
    match format {
        CssFormat::LongCsv => load_long_csv(source),
        CssFormat::MatrixStack => load_matrix_stack(source),
        CssFormat::Json => load_json(source),
    }
}

/// Raw `(perceiver, sender, receiver, value)` records, 1-based, with the
/// input line they came from (for error reporting).
fn assemble(records: Vec<(i64, i64, i64, i64, usize)>, labels: Option<Vec<String>>) -> Result<CssTensor> {
    let mut n: i64 = 0;
    for &(j, i, ip, v, line) in &records {
        for idx in [j, i, ip] {
            if idx < 1 {
                return Err(Error::ActorOutOfRange {
                    index: idx,
                    n_actors: 0,
                    line,
                });
            }
        }
        if v != 0 && v != 1 {
            return Err(Error::NonBinaryValue {
                value: v.to_string(),
                line,
            });
        }
        if i == ip && v != 0 {
            return Err(Error::SelfTie {
                actor: i as usize,
                perceiver: j as usize,
            });
        }
        n = n.max(j).max(i).max(ip);
    }
    if let Some(l) = &labels {
        n = n.max(l.len() as i64);
    }
    let n = n as usize;
    if n < 2 {
        return Err(Error::IncompleteTensor {
            missing: 0,
            expected: 0,
        });
    }
    let mut tensor = CssTensor::empty(n, labels)?;
    let mut seen = HashSet::with_capacity(records.len());
    for (j, i, ip, v, _line) in records {
        let (j, i, ip) = (j as usize - 1, i as usize - 1, ip as usize - 1);
        if i == ip {
            // Explicit zero self-cells were validated above; skip them.
            continue;
        }
        if !seen.insert((j, i, ip)) {
            return Err(Error::DuplicateCell {
                perceiver: j + 1,
                sender: i + 1,
                receiver: ip + 1,
            });
        }
        tensor.values[CssTensor::index(n, i, ip, j)] = v as u8;
    }
    let expected = n * (n - 1) * n;
    if seen.len() != expected {
        return Err(Error::IncompleteTensor {
            missing: expected - seen.len(),
            expected,
        });
    }
    Ok(tensor)
}

fn load_long_csv(source: impl Read) -> Result<CssTensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    {
        let headers = reader.headers()?;
        let expected = ["perceiver", "sender", "receiver", "value"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header perceiver,sender,receiver,value; got {got:?}"),
            });
        }
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, got {}", row.len()),
            });
        }
        let parse = |field: &str| -> Result<i64> {
            field.parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("'{field}' is not an integer"),
            })
        };
        records.push((parse(&row[0])?, parse(&row[1])?, parse(&row[2])?, parse(&row[3])?, line));
    }
    assemble(records, None)
}

fn load_matrix_stack(source: impl Read) -> Result<CssTensor> {
    let reader = BufReader::new(source);
    // (line number, tokens)
    let mut rows: Vec<(usize, Vec<u8>)> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue; // blank separators between blocks are tolerated
        }
        let mut tokens = Vec::new();
        for tok in line.split_whitespace() {
            match tok {
                "0" => tokens.push(0u8),
                "1" => tokens.push(1u8),
                other => {
                    return Err(Error::NonBinaryValue {
                        value: other.to_string(),
                        line: lineno,
                    })
                }
            }
        }
        if width == 0 {
            width = tokens.len();
        }
        if tokens.len() != width {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {width} entries per line, got {}", tokens.len()),
            });
        }
        rows.push((lineno, tokens));
    }
    let n = width;
    if n < 2 {
        return Err(Error::IncompleteTensor {
            missing: 0,
            expected: 0,
        });
    }
    if rows.len() != n * n {
        return Err(Error::IncompleteTensor {
            missing: n * n - rows.len().min(n * n),
            expected: n * (n - 1) * n,
        });
    }
    let mut tensor = CssTensor::empty(n, None)?;
    for (r, (lineno, tokens)) in rows.into_iter().enumerate() {
        let (j, i) = (r / n, r % n);
        for (ip, v) in tokens.into_iter().enumerate() {
            if i == ip {
                if v != 0 {
                    return Err(Error::SelfTie {
                        actor: i + 1,
                        perceiver: j + 1,
                    });
                }
                continue;
            }
            let _ = lineno;
            tensor.values[CssTensor::index(n, i, ip, j)] = v;
        }
    }
    Ok(tensor)
}

fn load_json(source: impl Read) -> Result<CssTensor> {
    let doc: JsonCss = serde_json::from_reader(source)?;
    if let Some(labels) = &doc.labels {
        if labels.len() != doc.n_actors {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} actors",
                labels.len(),
                doc.n_actors
            )));
        }
    }
    let records: Vec<(i64, i64, i64, i64, usize)> = doc
        .ties
        .iter()
        .map(|&[j, i, ip, v]| (j, i, ip, v, 0))
        .collect();
    for &(j, i, ip, _, _) in &records {
        let n = doc.n_actors as i64;
        for idx in [j, i, ip] {
            if idx < 1 || idx > n {
                return Err(Error::ActorOutOfRange {
                    index: idx,
                    n_actors: doc.n_actors,
                    line: 0,
                });
            }
        }
    }
    assemble(records, Some(doc.labels.unwrap_or_else(|| {
        (1..=doc.n_actors).map(|i| i.to_string()).collect()
    })))
}

// ---------------------------------------------------------------------------
// Binary networks and classical descriptives
// ---------------------------------------------------------------------------

/// Directed binary network on `n` actors; diagonal structurally zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryNetwork {
    n: usize,
    adj: Vec<u8>,
}

impl BinaryNetwork {
    pub fn new(n: usize) -> Self {
        Self { n, adj: vec![0; n * n] }
    }

    pub fn n_actors(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, ip: usize) -> u8 {
        self.adj[i * self.n + ip]
    }

    #[inline]
    pub fn set(&mut self, i: usize, ip: usize, v: u8) {
        debug_assert!(i != ip || v == 0);
        self.adj[i * self.n + ip] = v;
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&v| v as usize).sum()
    }

    /// Ties sent by `i` (row sum).
    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n).map(|ip| self.get(i, ip) as usize).sum()
    }

    /// Ties received by `i` (column sum).
    pub fn in_degree(&self, i: usize) -> usize {
        (0..self.n).map(|ip| self.get(ip, i) as usize).sum()
    }

    /// Rows of 0/1 entries, space-separated; the on-disk consensus format.
    pub fn write_matrix(&self, w: &mut dyn Write) -> Result<()> {
        for i in 0..self.n {
            let mut line = String::with_capacity(2 * self.n);
            for ip in 0..self.n {
                if ip > 0 {
                    line.push(' ');
                }
                line.push(char::from(b'0' + self.get(i, ip)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Classical consensus network: keep a tie iff more than a `δ₀` fraction of
/// perceivers report it (strict inequality).
pub fn threshold_consensus(y: &CssTensor, delta0: f64) -> Result<BinaryNetwork> {
    if !(0.0..1.0).contains(&delta0) {
        return Err(Error::InvalidArgument(format!(
            "threshold δ₀ must lie in [0, 1), got {delta0}"
        )));
    }
    let n = y.n_actors();
    let mut net = BinaryNetwork::new(n);
    for i in 0..n {
        for ip in 0..n {
            if i == ip {
                continue;
            }
            let share = y.perceiver_mean(i, ip)?;
            net.set(i, ip, u8::from(share > delta0));
        }
    }
    Ok(net)
}

/// Normalized degrees per (actor, perceiver) slice and for the δ₀-consensus
/// network.
///
/// Names are orientation-neutral: `row_degree(i, j)` sums perceiver `j`'s
/// reports over row `i` of the sociomatrix (ties *sent by* `i` under the
/// sender-first index convention) and `col_degree` sums the column (ties
/// *received*). The source formulas label the row sum "in" and the column
/// sum "out"; those labels are swapped relative to the same text's index
/// convention, so this module does not pick a side.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    n_actors: usize,
    delta0: f64,
    row: Vec<f64>,
    col: Vec<f64>,
    consensus_row: Vec<f64>,
    consensus_col: Vec<f64>,
}

impl DegreeProfile {
    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    /// `Σ_{i'≠i} y[i, i', j] / (I − 1)`.
    pub fn row_degree(&self, i: usize, j: usize) -> f64 {
        self.row[i * self.n_actors + j]
    }

    /// `Σ_{i'≠i} y[i', i, j] / (I − 1)`.
    pub fn col_degree(&self, i: usize, j: usize) -> f64 {
        self.col[i * self.n_actors + j]
    }

    /// Row degree of actor `i` in the δ₀-consensus network.
    pub fn consensus_row_degree(&self, i: usize) -> f64 {
        self.consensus_row[i]
    }

    /// Column degree of actor `i` in the δ₀-consensus network.
    pub fn consensus_col_degree(&self, i: usize) -> f64 {
        self.consensus_col[i]
    }
}

/// Compute per-slice and consensus normalized degrees.
pub fn degree_profiles(y: &CssTensor, delta0: f64) -> Result<DegreeProfile> {
    let n = y.n_actors();
    let denom = (n - 1) as f64;
    let mut row = vec![0.0; n * n];
    let mut col = vec![0.0; n * n];
    for (i, ip, j, v) in y.cells() {
        if v == 1 {
            row[i * n + j] += 1.0;
            col[ip * n + j] += 1.0;
        }
    }
    for e in row.iter_mut().chain(col.iter_mut()) {
        *e /= denom;
    }
    let consensus = threshold_consensus(y, delta0)?;
    let consensus_row = (0..n)
        .map(|i| consensus.out_degree(i) as f64 / denom)
        .collect();
    let consensus_col = (0..n)
        .map(|i| consensus.in_degree(i) as f64 / denom)
        .collect();
    Ok(DegreeProfile {
        n_actors: n,
        delta0,
        row,
        col,
        consensus_row,
        consensus_col,
    })
}

// ---------------------------------------------------------------------------
// Actor attributes and dyadic covariates
// ---------------------------------------------------------------------------

/// Column of per-actor attribute values, ordered by actor index.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeColumn {
    Categorical(Vec<String>),
    Numeric(Vec<f64>),
}

/// Per-actor attribute table loaded from CSV (`actor,<field>...`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    n_actors: usize,
    names: Vec<String>,
    columns: Vec<AttributeColumn>,
}

impl AttributeTable {
    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn field_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, field: &str) -> Result<&AttributeColumn> {
        self.names
            .iter()
            .position(|n| n == field)
            .map(|k| &self.columns[k])
            .ok_or_else(|| Error::UnknownField(field.to_string()))
    }

    /// Build a table directly from columns (used by tests and simulations).
    pub fn from_columns(names: Vec<String>, columns: Vec<AttributeColumn>) -> Result<Self> {
        let n_actors = match columns.first() {
            Some(AttributeColumn::Categorical(v)) => v.len(),
            Some(AttributeColumn::Numeric(v)) => v.len(),
            None => {
                return Err(Error::InvalidArgument(
                    "attribute table needs at least one field".into(),
                ))
            }
        };
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for c in &columns {
            let len = match c {
                AttributeColumn::Categorical(v) => v.len(),
                AttributeColumn::Numeric(v) => v.len(),
            };
            if len != n_actors {
                return Err(Error::DimensionMismatch(
                    "attribute columns have unequal lengths".into(),
                ));
            }
        }
        Ok(Self {
            n_actors,
            names,
            columns,
        })
    }

    /// Relabel actors: row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_actors(&self, perm: &[usize]) -> Result<Self> {
        validate_permutation(perm, self.n_actors)?;
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                AttributeColumn::Categorical(v) => {
                    AttributeColumn::Categorical(perm.iter().map(|&s| v[s].clone()).collect())
                }
                AttributeColumn::Numeric(v) => {
                    AttributeColumn::Numeric(perm.iter().map(|&s| v[s]).collect())
                }
            })
            .collect();
        Ok(Self {
            n_actors: self.n_actors,
            names: self.names.clone(),
            columns,
        })
    }
}

/// Load an attribute table: CSV header `actor,<field>...`; the actor column
/// holds each row's 1-based actor index and every index must appear exactly
/// once. A field is numeric when every value parses as a float, otherwise
/// categorical.
pub fn load_attributes(source: impl Read) -> Result<AttributeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let names: Vec<String> = {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got.is_empty() || got[0] != "actor" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header starting with 'actor', got {got:?}"),
            });
        }
        got[1..].iter().map(|s| s.to_string()).collect()
    };
    if names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "attribute table needs at least one field column".into(),
        });
    }
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != names.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", names.len() + 1, row.len()),
            });
        }
        let actor: i64 = row[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("actor index '{}' is not an integer", &row[0]),
        })?;
        if actor < 1 {
            return Err(Error::ActorOutOfRange {
                index: actor,
                n_actors: 0,
                line,
            });
        }
        rows.push((
            actor as usize - 1,
            row.iter().skip(1).map(|s| s.to_string()).collect(),
        ));
    }
    let n = rows.len();
    let mut seen = vec![false; n];
    for &(a, _) in &rows {
        if a >= n {
            return Err(Error::ActorOutOfRange {
                index: a as i64 + 1,
                n_actors: n,
                line: 0,
            });
        }
        if seen[a] {
            return Err(Error::InvalidArgument(format!(
                "actor {} appears twice in the attribute table",
                a + 1
            )));
        }
        seen[a] = true;
    }
    rows.sort_by_key(|&(a, _)| a);
    let columns = (0..names.len())
        .map(|k| {
            let raw: Vec<&String> = rows.iter().map(|(_, r)| &r[k]).collect();
            let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
            match numeric {
                Some(v) => AttributeColumn::Numeric(v),
                None => AttributeColumn::Categorical(raw.into_iter().cloned().collect()),
            }
        })
        .collect();
    AttributeTable::from_columns(names, columns)
}

/// One covariate recipe term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovariateTerm {
    /// `1{attr_i = attr_{i'}}` on a categorical field.
    SameCategory(String),
    /// `|attr_i − attr_{i'}|` on a numeric field.
    AbsDifference(String),
}

/// Per-dyad covariate vectors with an intercept as the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadCovariates {
    n_actors: usize,
    p: usize,
    /// Dyad-major storage: `dyad_index(i, i') · p + c`.
    x: Vec<f64>,
    standardized: bool,
    /// Per-coordinate standardization constants; intercept entries are 0/1.
    means: Vec<f64>,
    scales: Vec<f64>,
    names: Vec<String>,
}

/// Position of ordered dyad `(i, i')`, `i ≠ i'`, in dyad-major storage.
#[inline]
pub fn dyad_index(n: usize, i: usize, ip: usize) -> usize {
    debug_assert!(i != ip && i < n && ip < n);
    i * (n - 1) + if ip > i { ip - 1 } else { ip }
}

impl DyadCovariates {
    /// Intercept-only design (`p = 1`), the covariate-free model.
    pub fn intercept_only(n_actors: usize) -> Result<Self> {
        if n_actors < 2 {
            return Err(Error::InvalidArgument(
                "dyadic covariates need at least 2 actors".into(),
            ));
        }
        Ok(Self {
            n_actors,
            p: 1,
            x: vec![1.0; n_actors * (n_actors - 1)],
            standardized: true,
            means: vec![0.0],
            scales: vec![1.0],
            names: vec!["intercept".into()],
        })
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_dyads(&self) -> usize {
        self.n_actors * (self.n_actors - 1)
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn coordinate_names(&self) -> &[String] {
        &self.names
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Covariate vector of ordered dyad `(i, i')`.
    #[inline]
    pub fn x(&self, i: usize, ip: usize) -> &[f64] {
        let d = dyad_index(self.n_actors, i, ip);
        &self.x[d * self.p..(d + 1) * self.p]
    }

    /// Baseline covariate vector for consensus summaries: the intercept with
    /// all standardized coordinates at their dyad mean (i.e. 0).
    pub fn baseline(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.p];
        v[0] = 1.0;
        v
    }
}

/// Build per-dyad covariates from actor attributes and standardize the
/// non-intercept coordinates over the `I·(I−1)` ordered dyads (sample
/// standard deviation, denominator `n − 1`).
pub fn build_dyadic_covariates(
    attributes: &AttributeTable,
    recipe: &[CovariateTerm],
) -> Result<DyadCovariates> {
    let n = attributes.n_actors();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "dyadic covariates need at least 2 actors".into(),
        ));
    }
    let p = 1 + recipe.len();
    let n_dyads = n * (n - 1);
    let mut x = vec![0.0; n_dyads * p];
    let mut names = vec!["intercept".to_string()];
    for d in 0..n_dyads {
        x[d * p] = 1.0;
    }
    for (t, term) in recipe.iter().enumerate() {
        let c = t + 1;
        match term {
            CovariateTerm::SameCategory(field) => {
                let col = attributes.column(field)?;
                let AttributeColumn::Categorical(vals) = col else {
                    return Err(Error::InvalidArgument(format!(
                        "same_category({field}) requires a categorical field, \
                         but '{field}' is numeric"
                    )));
                };
                names.push(format!("same_{field}"));
                for i in 0..n {
                    for ip in 0..n {
                        if i != ip {
                            let d = dyad_index(n, i, ip);
                            x[d * p + c] = f64::from(vals[i] == vals[ip]);
                        }
                    }
                }
            }
            CovariateTerm::AbsDifference(field) => {
                let col = attributes.column(field)?;
                let AttributeColumn::Numeric(vals) = col else {
                    return Err(Error::InvalidArgument(format!(
                        "abs_difference({field}) requires a numeric field, \
                         but '{field}' is categorical"
                    )));
                };
                names.push(format!("absdiff_{field}"));
                for i in 0..n {
                    for ip in 0..n {
                        if i != ip {
                            let d = dyad_index(n, i, ip);
                            x[d * p + c] = (vals[i] - vals[ip]).abs();
                        }
                    }
                }
            }
        }
    }
    // Standardize non-intercept coordinates across ordered dyads.
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for c in 1..p {
        let mut mean = 0.0;
        for d in 0..n_dyads {
            mean += x[d * p + c];
        }
        mean /= n_dyads as f64;
        let mut ss = 0.0;
        for d in 0..n_dyads {
            let dev = x[d * p + c] - mean;
            ss += dev * dev;
        }
        let sd = (ss / (n_dyads - 1) as f64).sqrt();
        if sd <= 0.0 {
            return Err(Error::DegenerateCovariate(names[c].clone()));
        }
        for d in 0..n_dyads {
            x[d * p + c] = (x[d * p + c] - mean) / sd;
        }
        means[c] = mean;
        scales[c] = sd;
    }
    Ok(DyadCovariates {
        n_actors: n,
        p,
        x,
        standardized: true,
        means,
        scales,
        names,
    })
}

pub(crate) fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {} actors",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &s in perm {
        if s >= n || seen[s] {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        seen[s] = true;
    }
    Ok(())
}
