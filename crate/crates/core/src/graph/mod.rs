//! Graph datasets: text ingestion, export, and synthetic generation.
//!
//! Edge files hold one whitespace-separated `u v` pair per line, 0-indexed.
//! Feature files are either a dense grid of reals (one node per line) or a
//! sparse triplet list introduced by `sparse <rows> <cols> [<bits> <frac>]`
//! followed by `r c value` lines. Blank lines and `#` comments are skipped.

mod powerlaw;

pub use powerlaw::{gen_powerlaw, PowerLawParams};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fixed::{quantize_value, Format};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::runtime::{read_weights, write_weights};

/// Adjacency, node features, per-layer weights and optional labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphBundle {
    /// Symmetric binary adjacency.
    pub adjacency: SparseMatrix,
    pub features: SparseMatrix,
    pub weights: Vec<DenseMatrix>,
    pub labels: Option<Vec<usize>>,
}

impl GraphBundle {
    pub fn nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Checks that every part agrees on the node count and that the
    /// weights chain from the feature width.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes();
        let a = &self.adjacency;
        if a.cols() != n || !a.is_binary() {
            return Err(Error::InvalidMatrix("adjacency must be square and binary".into()));
        }
        if a.triplets().any(|(r, c, _)| a.get(c, r) == 0) {
            return Err(Error::InvalidMatrix("adjacency is not symmetric".into()));
        }
        if self.features.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "features",
                left_rows: n,
                left_cols: n,
                right_rows: self.features.rows(),
                right_cols: self.features.cols(),
            });
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::InvalidMatrix(format!("{} labels for {n} nodes", labels.len())));
            }
        }
        Ok(())
    }

    /// Undirected edges `(u, v)` with `u <= v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency.triplets().filter(|&(r, c, _)| r <= c).map(|(r, c, _)| (r, c)).collect()
    }
}

fn parse_error(source_name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { source_name: source_name.to_string(), line, msg: msg.into() }
}

/// Numbered lines with comments and blanks removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_fields<T: std::str::FromStr>(source: &str, line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|f| f.parse::<T>().map_err(|_| parse_error(source, line, format!("cannot parse {f:?}"))))
        .collect()
}

/// Symmetrized, deduplicated binary adjacency over `nodes` vertices.
pub fn parse_edges(text: &str, source: &str, nodes: usize) -> Result<SparseMatrix> {
    let mut cells = Vec::new();
    for (line, l) in content_lines(text) {
        let f: Vec<usize> = parse_fields(source, line, l)?;
        let [u, v] = f[..] else {
            return Err(parse_error(source, line, format!("expected 2 fields, found {}", f.len())));
        };
        if u >= nodes || v >= nodes {
            return Err(parse_error(source, line, format!("node {} out of range for {nodes} nodes", u.max(v))));
        }
        cells.push((u, v, 1));
        cells.push((v, u, 1));
    }
    cells.sort_unstable();
    cells.dedup();
    SparseMatrix::from_triplets(nodes, nodes, cells, Format::BINARY)
}

/// Format chosen for real-valued features without an explicit one.
fn infer_format(values: impl Iterator<Item = f64>) -> Format {
    let mut all_ones = true;
    for v in values {
        all_ones &= v == 0.0 || v == 1.0;
    }
    if all_ones {
        Format::BINARY
    } else {
        Format::SINT4_INPUT
    }
}

pub fn parse_features(text: &str, source: &str) -> Result<SparseMatrix> {
    let mut lines = content_lines(text).peekable();
    let sparse_header = matches!(lines.peek(), Some((_, l)) if l.starts_with("sparse"));
    if sparse_header {
        let (line, header) = lines.next().expect("peeked");
        let dims: Vec<u32> = parse_fields(source, line, header.trim_start_matches("sparse"))?;
        let (rows, cols, explicit) = match dims[..] {
            [r, c] => (r as usize, c as usize, None),
            [r, c, b, f] => (r as usize, c as usize, Some(Format::new(b, f)?)),
            _ => return Err(parse_error(source, line, "expected `sparse <rows> <cols> [<bits> <frac>]`")),
        };
        let mut triplets = Vec::new();
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let [r, c, v] = f[..] else {
                return Err(parse_error(source, line, format!("expected 3 fields, found {}", f.len())));
            };
            let r: usize = r.parse().map_err(|_| parse_error(source, line, format!("bad row {r:?}")))?;
            let c: usize = c.parse().map_err(|_| parse_error(source, line, format!("bad column {c:?}")))?;
            let v: f64 = v.parse().map_err(|_| parse_error(source, line, format!("bad value {v:?}")))?;
            if r >= rows || c >= cols {
                return Err(parse_error(source, line, format!("({r}, {c}) outside {rows}x{cols}")));
            }
            triplets.push((r, c, v));
        }
        let format = explicit.unwrap_or_else(|| infer_format(triplets.iter().map(|t| t.2)));
        let mut cells: Vec<_> = triplets.iter().map(|&(r, c, v)| (r, c, quantize_value(v, format).0)).collect();
        cells.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = cells.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidMatrix(format!("{source}: duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        return SparseMatrix::from_triplets(rows, cols, cells, format);
    }

    let mut grid: Vec<Vec<f64>> = Vec::new();
    for (line, l) in lines {
        let row: Vec<f64> = parse_fields(source, line, l)?;
        if let Some(first) = grid.first() {
            if row.len() != first.len() {
                return Err(parse_error(source, line, format!("{} values, expected {}", row.len(), first.len())));
            }
        }
        grid.push(row);
    }
    let cols = grid.first().map_or(0, Vec::len);
    let format = infer_format(grid.iter().flatten().copied());
    let cells = grid
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, quantize_value(v, format).0)))
        .collect();
    SparseMatrix::from_triplets(grid.len(), cols, cells, format)
}

pub fn parse_labels(text: &str, source: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(line, l)| l.parse().map_err(|_| parse_error(source, line, format!("bad label {l:?}"))))
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Loads and validates a bundle; the node count comes from the features.
pub fn ingest_graph(
    edge_file: &Path,
    feature_file: &Path,
    weight_files: &[PathBuf],
    label_file: Option<&Path>,
) -> Result<GraphBundle> {
    let features = parse_features(&read_text(feature_file)?, &feature_file.display().to_string())?;
    let adjacency = parse_edges(&read_text(edge_file)?, &edge_file.display().to_string(), features.rows())?;
    let weights = weight_files.iter().map(|p| read_weights(fs::File::open(p)?)).collect::<Result<Vec<_>>>()?;
    let labels = match label_file {
        Some(p) => Some(parse_labels(&read_text(p)?, &p.display().to_string())?),
        None => None,
    };
    let bundle = GraphBundle { adjacency, features, weights, labels };
    bundle.validate()?;
    Ok(bundle)
}

/// Files written by [`export_graph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub weights: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl BundlePaths {
    /// Default file names inside `dir` for `layers` weight files.
    pub fn in_dir(dir: &Path, layers: usize, labels: bool) -> Self {
        BundlePaths {
            edges: dir.join("edges.txt"),
            features: dir.join("features.txt"),
            weights: (0..layers).map(|i| dir.join(format!("layer{}.lwfp", i + 1))).collect(),
            labels: labels.then(|| dir.join("labels.txt")),
        }
    }

    pub fn ingest(&self) -> Result<GraphBundle> {
        ingest_graph(&self.edges, &self.features, &self.weights, self.labels.as_deref())
    }
}

pub fn format_edges(bundle: &GraphBundle) -> String {
    bundle.edges().iter().map(|(u, v)| format!("{u} {v}\n")).collect()
}

/// Sparse triplet text with an explicit format, so re-ingestion is exact.
pub fn format_features(x: &SparseMatrix) -> String {
    let f = x.format();
    let mut s = format!("sparse {} {} {} {}\n", x.rows(), x.cols(), f.bits, f.frac_bits);
    for (r, c, v) in x.triplets() {
        s.push_str(&format!("{r} {c} {}\n", f.to_real(v)));
    }
    s
}

pub fn export_graph(bundle: &GraphBundle, dir: &Path) -> Result<BundlePaths> {
    fs::create_dir_all(dir)?;
    let paths = BundlePaths::in_dir(dir, bundle.weights.len(), bundle.labels.is_some());
    fs::write(&paths.edges, format_edges(bundle))?;
    fs::write(&paths.features, format_features(&bundle.features))?;
    for (w, p) in bundle.weights.iter().zip(&paths.weights) {
        write_weights(fs::File::create(p)?, w)?;
    }
    if let (Some(labels), Some(p)) = (&bundle.labels, &paths.labels) {
        fs::write(p, labels.iter().map(|l| format!("{l}\n")).collect::<String>())?;
    }
    Ok(paths)
}
