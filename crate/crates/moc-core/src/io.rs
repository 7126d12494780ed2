//! File formats: matrix CSV, embedding CSV, feature-map stacks, trace CSV,
//! and the harness configuration.
//!
//! All floats are written with Rust's shortest round-trip formatting, so a
//! value survives a write/read cycle bit-exactly and identical runs produce
//! byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::descriptor::{FeatureMap, FeatureMapStack};
use crate::error::{Error, Result};
use crate::harness::{HarnessConfig, OptimizationTrace, TraceRow};
use crate::svo::ViewEmbeddingSequence;

/// Column names of a trace file, in order.
pub const TRACE_HEADER: &str = "iter,total,r_svo,r_spd,lambda_svo,lambda_spd,min_gap,lem_dist";

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, found {token:?}"),
    })
}

/// Reads a headerless comma-separated square matrix.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .map(|tok| parse_f64(tok, line))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::ShapeError("matrix file contains no rows".into()));
    }
    if rows.len() != rows[0].len() {
        return Err(Error::ShapeError(format!(
            "matrix must be square, got {}x{}",
            rows.len(),
            rows[0].len()
        )));
    }
    let n = rows.len();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Writes a matrix as headerless CSV.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn expected_embedding_header(dim: usize) -> String {
    let mut cols = vec!["azimuth_deg".to_string()];
    cols.extend((0..dim).map(|i| format!("e_{i}")));
    cols.join(",")
}

/// Reads an embedding table: header `azimuth_deg,e_0,…,e_{D-1}`, one view
/// per row. The rows may come in any order; exactly one must sit at
/// azimuth 0.
pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<ViewEmbeddingSequence> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty embedding file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "azimuth_deg" {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must start with azimuth_deg,e_0,…; found {header:?}"),
        });
    }
    let dim = cols.len() - 1;
    if expected_embedding_header(dim) != cols.join(",") {
        return Err(Error::Parse {
            line: 1,
            message: format!("malformed header; expected {:?}", expected_embedding_header(dim)),
        });
    }

    let mut azimuths = Vec::new();
    let mut embeddings = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split(',').collect();
        if toks.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, toks.len()),
            });
        }
        azimuths.push(parse_f64(toks[0], line)?);
        let values = toks[1..]
            .iter()
            .map(|t| parse_f64(t, line))
            .collect::<Result<Vec<f64>>>()?;
        embeddings.push(DVector::from_vec(values));
    }
    ViewEmbeddingSequence::new(azimuths, embeddings)
}

/// Writes an embedding table in azimuth order.
pub fn write_embeddings_csv(path: impl AsRef<Path>, seq: &ViewEmbeddingSequence) -> Result<()> {
    let mut out = String::new();
    out.push_str(&expected_embedding_header(seq.dim()));
    out.push('\n');
    for (az, e) in seq.azimuths().iter().zip(seq.embeddings()) {
        let mut fields = vec![format!("{az}")];
        fields.extend(e.iter().map(|x| format!("{x}")));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// `stack.json` sidecar describing a feature-map directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackSidecar {
    height: usize,
    width: usize,
    channels: usize,
    azimuths: Vec<f64>,
}

fn view_file_name(azimuth: f64) -> String {
    format!("view_{azimuth}.csv")
}

/// Reads a stack directory: a `stack.json` sidecar plus one
/// `view_<azimuth>.csv` per listed azimuth, each `4H` rows (channel-major
/// blocks of `H`) by `W` columns.
pub fn read_feature_stack(dir: impl AsRef<Path>) -> Result<FeatureMapStack> {
    let dir = dir.as_ref();
    let sidecar_text = fs::read_to_string(dir.join("stack.json"))?;
    let sidecar: StackSidecar = serde_json::from_str(&sidecar_text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("stack.json: {e}"),
    })?;
    if sidecar.channels != 4 {
        return Err(Error::ShapeError(format!(
            "stack sidecar declares {} channels, this pipeline requires 4",
            sidecar.channels
        )));
    }
    let (h, w) = (sidecar.height, sidecar.width);
    let mut views = Vec::with_capacity(sidecar.azimuths.len());
    for &az in &sidecar.azimuths {
        let path = dir.join(view_file_name(az));
        let text = fs::read_to_string(&path)?;
        let mut data = Vec::with_capacity(4 * h * w);
        let mut n_rows = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let row = raw
                .split(',')
                .map(|t| parse_f64(t, line))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != w {
                return Err(Error::ShapeError(format!(
                    "{}: line {} has {} columns, sidecar width is {}",
                    path.display(),
                    line,
                    row.len(),
                    w
                )));
            }
            data.extend(row);
            n_rows += 1;
        }
        if n_rows != 4 * h {
            return Err(Error::ShapeError(format!(
                "{}: found {} rows, expected 4x{} (channel blocks of height {})",
                path.display(),
                n_rows,
                h,
                h
            )));
        }
        views.push(FeatureMap::new(4, h, w, data)?);
    }
    FeatureMapStack::new(views, sidecar.azimuths)
}

/// Writes a stack directory (creating it if needed).
pub fn write_feature_stack(dir: impl AsRef<Path>, stack: &FeatureMapStack) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let first = &stack.views()[0];
    let sidecar = StackSidecar {
        height: first.height(),
        width: first.width(),
        channels: first.channels(),
        azimuths: stack.azimuths().to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    fs::write(dir.join("stack.json"), json)?;

    for (map, &az) in stack.views().iter().zip(stack.azimuths()) {
        let mut out = String::new();
        for c in 0..map.channels() {
            for y in 0..map.height() {
                let row: Vec<String> =
                    (0..map.width()).map(|x| format!("{}", map.at(c, y, x))).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        fs::write(dir.join(view_file_name(az)), out)?;
    }
    Ok(())
}

/// Writes a trace with the fixed header, one row per iteration.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &OptimizationTrace) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter, r.total, r.r_svo, r.r_spd, r.lambda_svo, r.lambda_spd, r.min_gap, r.lem_dist
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace file back, verifying the header.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<OptimizationTrace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("bad trace header {header:?}, expected {TRACE_HEADER:?}"),
            })
        }
        None => return Err(Error::Parse { line: 1, message: "empty trace file".into() }),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split(',').collect();
        if toks.len() != 8 {
            return Err(Error::Parse {
                line,
                message: format!("expected 8 fields, found {}", toks.len()),
            });
        }
        let iter: usize = toks[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected an iteration index, found {:?}", toks[0]),
        })?;
        let f = |i: usize| parse_f64(toks[i], line);
        rows.push(TraceRow {
            iter,
            total: f(1)?,
            r_svo: f(2)?,
            r_spd: f(3)?,
            lambda_svo: f(4)?,
            lambda_spd: f(5)?,
            min_gap: f(6)?,
            lem_dist: f(7)?,
        });
    }
    Ok(OptimizationTrace { rows })
}

/// Loads and validates a harness configuration from JSON.
///
/// Error mapping: unreadable file → I/O; malformed JSON → parse error with
/// the line; well-formed JSON whose values violate the contract (including
/// unknown keys) → configuration error.
pub fn load_harness_config(path: impl AsRef<Path>) -> Result<HarnessConfig> {
    let text = fs::read_to_string(path)?;
    parse_harness_config(&text)
}

/// [`load_harness_config`] for an in-memory string.
pub fn parse_harness_config(text: &str) -> Result<HarnessConfig> {
    serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Config {
            keys: vec![],
            message: e.to_string(),
        },
        _ => Error::Parse { line: e.line(), message: e.to_string() },
    })
}

/// Writes a configuration as pretty JSON.
pub fn write_harness_config(path: impl AsRef<Path>, config: &HarnessConfig) -> Result<()> {
    let mut json = serde_json::to_string_pretty(config).expect("config serializes");
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}
