//! CSV ingestion and result serialization.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::{DataMatrix, LikelihoodConfig};
use crate::prior::PriorSpec;
use crate::search::{SearchConfig, SearchResult, SearchStats};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

/// Formats `x` with 17 significant digits, which round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        let prec = (16 - exp).max(0) as usize;
        format!("{x:.prec$}")
    } else {
        sci
    }
}

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "NA" | "na" | "N/A" | "NaN" | "nan" | "?" | ".")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub n: usize,
    pub p: usize,
}

/// Parses a rectangular numeric CSV. Rows with a missing cell are dropped and
/// counted; the result is column-centred.
pub fn ingest_csv_str(text: &str, has_header: bool) -> Result<(DataMatrix, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width: Option<usize> = None;
    let mut rows: Vec<f64> = Vec::new();
    let (mut read, mut dropped) = (0usize, 0usize);
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: idx + 1 + usize::from(has_header),
            column: 0,
            message: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        read += 1;
        let mut vals = Vec::with_capacity(w);
        let mut missing = false;
        for (col, field) in rec.iter().enumerate() {
            if is_missing(field) {
                missing = true;
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => vals.push(v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: col + 1,
                        message: format!("not a finite number: {field:?}"),
                    })
                }
            }
        }
        if missing {
            dropped += 1;
        } else {
            rows.extend(vals);
        }
    }
    let p = width.unwrap_or(0);
    let n = read - dropped;
    if n == 0 || p == 0 {
        return Err(Error::EmptyAfterFiltering);
    }
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 complete rows, found {n}")));
    }
    let values = DMatrix::from_row_slice(n, p, &rows);
    Ok((
        DataMatrix::new(values),
        IngestReport {
            rows_read: read,
            rows_dropped: dropped,
            n,
            p,
        },
    ))
}

pub fn ingest_csv(path: &Path, has_header: bool) -> Result<(DataMatrix, IngestReport)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_csv_str(&text, has_header)
}

/// Observations as CSV with an `x1,...,xp` header.
pub fn data_to_csv(data: &DMatrix<f64>) -> String {
    let mut s = (1..=data.ncols()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in data.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Edges as `i-j` pairs with 1-based labels, separated by `;`.
pub fn edge_string(g: &Graph) -> String {
    g.edges()
        .iter()
        .map(|(i, j)| format!("{}-{}", i + 1, j + 1))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_edge_string(s: &str, p: usize) -> Result<Graph> {
    let mut pairs = Vec::new();
    for (k, tok) in s.split(';').map(str::trim).filter(|t| !t.is_empty()).enumerate() {
        let bad = || Error::Parse {
            row: 1,
            column: k + 1,
            message: format!("invalid edge {tok:?}"),
        };
        let (a, b) = tok.split_once('-').ok_or_else(bad)?;
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || b == 0 {
            return Err(bad());
        }
        pairs.push((a - 1, b - 1));
    }
    Graph::from_edges(p, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopGraph {
    pub rank: usize,
    pub size: usize,
    pub log_score: f64,
    pub graph: Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub path: Option<String>,
    pub has_header: bool,
    pub report: IngestReport,
}

/// Everything a search run produces, plus the settings needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub format_version: u32,
    pub input: Option<InputEcho>,
    pub prior: PriorSpec,
    pub likelihood: LikelihoodConfig,
    pub fraction: f64,
    pub search: SearchConfig,
    pub stats: SearchStats,
    pub median_graph: Graph,
    pub inclusion: Vec<Vec<f64>>,
    pub top_graphs: Vec<TopGraph>,
}

impl ResultBundle {
    pub fn from_search(
        result: &SearchResult,
        prior: &PriorSpec,
        likelihood: &LikelihoodConfig,
        n: usize,
        search: &SearchConfig,
        input: Option<InputEcho>,
    ) -> Result<Self> {
        Ok(ResultBundle {
            format_version: RESULTS_FORMAT_VERSION,
            input,
            prior: *prior,
            likelihood: *likelihood,
            fraction: likelihood.fraction(n)?,
            search: search.clone(),
            stats: result.stats.clone(),
            median_graph: result.median_graph.clone(),
            inclusion: result.inclusion.to_rows(),
            top_graphs: result
                .list
                .entries()
                .iter()
                .enumerate()
                .map(|(r, (g, s))| TopGraph {
                    rank: r + 1,
                    size: g.num_edges(),
                    log_score: *s,
                    graph: g.clone(),
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn inclusion_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.inclusion {
            let line: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn top_graphs_csv(&self) -> String {
        let mut s = String::from("rank,size,log_score,edges\n");
        for t in &self.top_graphs {
            let _ = writeln!(s, "{},{},{},{}", t.rank, t.size, fmt17(t.log_score), edge_string(&t.graph));
        }
        s
    }
}

/// Reads back `top_graphs.csv`.
pub fn parse_top_graphs_csv(text: &str, p: usize) -> Result<Vec<TopGraph>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num_err = |c: usize| Error::Parse {
            row,
            column: c + 1,
            message: format!("invalid number {:?}", field(c)),
        };
        out.push(TopGraph {
            rank: field(0).parse().map_err(|_| num_err(0))?,
            size: field(1).parse().map_err(|_| num_err(1))?,
            log_score: field(2).parse().map_err(|_| num_err(2))?,
            graph: parse_edge_string(field(3), p)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub json: bool,
    pub dot: bool,
    pub csv: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags {
            json: true,
            dot: true,
            csv: true,
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `results.json`, `median_graph.dot`, `inclusion.csv` and
/// `top_graphs.csv` into `dir`, as selected by `flags`.
pub fn emit_results(bundle: &ResultBundle, dir: &Path, flags: EmitFlags) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    if flags.json {
        put("results.json", bundle.to_json()?)?;
    }
    if flags.dot {
        put("median_graph.dot", bundle.median_graph.to_dot("median"))?;
    }
    if flags.csv {
        put("inclusion.csv", bundle.inclusion_csv())?;
        put("top_graphs.csv", bundle.top_graphs_csv())?;
    }
    Ok(written)
}
