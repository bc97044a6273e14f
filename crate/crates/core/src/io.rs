//! CSV signal files and decomposition directories.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MvfifError, Result};
use crate::scalar::Scalar;
use crate::signal::{
    Decomposition, DecompositionConfig, ImfMeta, Method, MultivariateSignal, StopReason,
};

/// How channels map onto a CSV grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One column per channel, one row per sample.
    #[default]
    Columns,
    /// One row per channel.
    Rows,
}

impl Layout {
    pub fn from_transpose(transpose: bool) -> Self {
        if transpose {
            Layout::Rows
        } else {
            Layout::Columns
        }
    }
}

/// Parses CSV text. A first row with any non-numeric cell is taken as channel labels.
pub fn parse_csv<T: Scalar, R: Read>(input: R, layout: Layout, sample_rate: T) -> Result<MultivariateSignal<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut header: Option<Vec<String>> = None;
    let mut grid: Vec<Vec<T>> = Vec::new();
    let mut width = None;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MvfifError::ParseError {
            line: row_idx + 1,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(e) => {
                if row_idx == 0 {
                    header = Some(record.iter().map(str::to_owned).collect());
                    width = Some(record.len());
                    continue;
                }
                return Err(MvfifError::ParseError {
                    line: row_idx + 1,
                    message: e.to_string(),
                });
            }
        };
        let expected = *width.get_or_insert(values.len());
        if values.len() != expected {
            return Err(MvfifError::RaggedRows {
                row: row_idx + 1,
                expected,
                found: values.len(),
            });
        }
        grid.push(values.into_iter().map(T::of).collect());
    }
    if grid.is_empty() {
        return Err(MvfifError::EmptySignal);
    }
    let rows = match layout {
        Layout::Rows => grid,
        Layout::Columns => {
            let n = grid[0].len();
            (0..n).map(|c| grid.iter().map(|r| r[c]).collect()).collect()
        }
    };
    let labels = match (header, layout) {
        (Some(h), Layout::Columns) => Some(h),
        _ => None,
    };
    MultivariateSignal::from_rows(rows, sample_rate)?.with_labels(labels)
}

pub fn read_csv<T: Scalar>(path: &Path, layout: Layout, sample_rate: T) -> Result<MultivariateSignal<T>> {
    let file = fs::File::open(path).map_err(|e| MvfifError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(std::io::BufReader::new(file), layout, sample_rate)
}

/// Formats a signal as CSV text; labels become a header row in column layout.
pub fn format_csv<T: Scalar>(signal: &MultivariateSignal<T>, layout: Layout) -> String {
    let mut out = String::new();
    let join = |vals: &mut dyn Iterator<Item = T>, out: &mut String| {
        let mut first = true;
        for v in vals {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    };
    match layout {
        Layout::Columns => {
            if let Some(labels) = signal.labels() {
                out.push_str(&labels.join(","));
                out.push('\n');
            }
            for t in 0..signal.samples() {
                join(&mut (0..signal.channels()).map(|c| signal.get(c, t)), &mut out);
            }
        }
        Layout::Rows => {
            for row in signal.rows() {
                join(&mut row.iter().copied(), &mut out);
            }
        }
    }
    out
}

pub fn write_csv<T: Scalar>(path: &Path, signal: &MultivariateSignal<T>, layout: Layout) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_csv(signal, layout).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImfRecord<T> {
    pub index: usize,
    #[serde(flatten)]
    pub meta: ImfMeta<T>,
}

/// Contents of `decomposition.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile<T> {
    pub config: DecompositionConfig<T>,
    pub method: Method,
    pub imfs: Vec<ImfRecord<T>>,
    pub n: usize,
    pub m: usize,
    pub sample_rate: T,
    pub ext_len: usize,
    pub stop_reason: StopReason,
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

pub const METADATA_FILE: &str = "decomposition.json";

pub fn imf_file_name(k: usize) -> String {
    format!("imf_{k:03}.csv")
}

/// Writes `imf_001.csv` .. `imf_K.csv`, `trend.csv` and `decomposition.json` into `dir`.
pub fn write_decomposition<T: Scalar>(dir: &Path, dec: &Decomposition<T>, layout: Layout) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, imf) in dec.imfs.iter().enumerate() {
        write_csv(&dir.join(imf_file_name(k + 1)), imf, layout)?;
    }
    write_csv(&dir.join("trend.csv"), &dec.trend, layout)?;
    let meta = DecompositionFile {
        config: dec.config.clone(),
        method: dec.method,
        imfs: dec
            .meta
            .iter()
            .enumerate()
            .map(|(k, m)| ImfRecord { index: k + 1, meta: *m })
            .collect(),
        n: dec.channels(),
        m: dec.samples(),
        sample_rate: dec.sample_rate(),
        ext_len: dec.ext_len,
        stop_reason: dec.stop_reason,
        layout,
        labels: dec.trend.labels().map(<[String]>::to_vec),
    };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    fs::write(dir.join(METADATA_FILE), json)?;
    Ok(())
}

/// Loads a directory written by [`write_decomposition`].
pub fn read_decomposition<T: Scalar>(dir: &Path) -> Result<Decomposition<T>> {
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path)
        .map_err(|_| MvfifError::MissingDecomposition(meta_path.display().to_string()))?;
    let file: DecompositionFile<T> = serde_json::from_str(&text)?;
    let load = |name: String| -> Result<MultivariateSignal<T>> {
        let path = dir.join(&name);
        if !path.exists() {
            return Err(MvfifError::MissingDecomposition(path.display().to_string()));
        }
        let s = read_csv(&path, file.layout, file.sample_rate)?;
        if s.channels() != file.n || s.samples() != file.m {
            return Err(MvfifError::ShapeMismatch(format!(
                "{name} is {}x{}, metadata says {}x{}",
                s.channels(),
                s.samples(),
                file.n,
                file.m
            )));
        }
        Ok(s)
    };
    let imfs = (1..=file.imfs.len())
        .map(|k| load(imf_file_name(k)))
        .collect::<Result<Vec<_>>>()?;
    let trend = load("trend.csv".into())?;
    Ok(Decomposition {
        imfs,
        trend,
        meta: file.imfs.iter().map(|r| r.meta).collect(),
        config: file.config,
        method: file.method,
        ext_len: file.ext_len,
        stop_reason: file.stop_reason,
    })
}
