//! Reading and writing tensor fields.
//!
//! CSV: optional header `subject,x,y,z,dxx,dxy,dxz,dyy,dyz,dzz`, one voxel per
//! row, tensor entries in `vech` order. JSON lines: one object per line with
//! the same field names.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TensorField, VoxelRecord};
use crate::error::{Error, Result};
use crate::spd::{spectral_decompose, DefinitenessClass, SymMatrix};

pub const CSV_COLUMNS: [&str; 10] = [
    "subject", "x", "y", "z", "dxx", "dxy", "dxz", "dyy", "dyz", "dzz",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    JsonLines,
}

impl FieldFormat {
    /// `.jsonl`, `.ndjson` and `.json` select JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("jsonl" | "ndjson" | "json") => FieldFormat::JsonLines,
            _ => FieldFormat::Csv,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    subject: String,
    x: f64,
    y: f64,
    z: f64,
    dxx: f64,
    dxy: f64,
    dxz: f64,
    dyy: f64,
    dyz: f64,
    dzz: f64,
}

struct RawRow {
    line: u64,
    subject: String,
    values: [f64; 9],
}

pub fn load_field(path: impl AsRef<Path>, format: FieldFormat) -> Result<TensorField> {
    let file = File::open(path.as_ref())?;
    read_field(BufReader::new(file), format)
}

pub fn read_field<R: Read>(reader: R, format: FieldFormat) -> Result<TensorField> {
    let rows = match format {
        FieldFormat::Csv => read_csv_rows(reader)?,
        FieldFormat::JsonLines => read_json_rows(reader)?,
    };
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no voxel records in input".into(),
        });
    }
    let mut records = Vec::with_capacity(rows.len());
    let mut bad_lines = Vec::new();
    for row in rows {
        let [x, y, z, t @ ..] = row.values;
        let tensor = SymMatrix::from_vech(3, t.to_vec())?;
        let class = spectral_decompose(&tensor)
            .map_err(|e| Error::Parse {
                line: row.line,
                message: e.to_string(),
            })?
            .definiteness();
        if class == DefinitenessClass::Indefinite {
            bad_lines.push(row.line);
            continue;
        }
        records.push(VoxelRecord {
            subject: row.subject,
            position: [x, y, z],
            tensor,
        });
    }
    if !bad_lines.is_empty() {
        return Err(Error::NotPsd {
            count: bad_lines.len(),
            lines: bad_lines,
        });
    }
    TensorField::new(records)
}

fn parse_number(text: &str, column: &str, line: u64) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: cannot parse {text:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

fn read_csv_rows<R: Read>(reader: R) -> Result<Vec<RawRow>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && record.get(0) == Some("subject") {
            continue;
        }
        if record.len() != CSV_COLUMNS.len() {
            return Err(Error::Schema {
                line,
                message: format!(
                    "expected {} columns (subject, x, y, z and 6 tensor entries), found {}",
                    CSV_COLUMNS.len(),
                    record.len()
                ),
            });
        }
        let mut values = [0.0; 9];
        for (i, v) in values.iter_mut().enumerate() {
            *v = parse_number(&record[i + 1], CSV_COLUMNS[i + 1], line)?;
        }
        rows.push(RawRow {
            line,
            subject: record[0].to_string(),
            values,
        });
    }
    Ok(rows)
}

fn read_json_rows<R: Read>(reader: R) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (k, text) in BufReader::new(reader).lines().enumerate() {
        let line = k as u64 + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&text).map_err(|e| {
            let message = format!("{e}");
            if e.is_data() {
                Error::Schema { line, message }
            } else {
                Error::Parse { line, message }
            }
        })?;
        let values = [
            row.x, row.y, row.z, row.dxx, row.dxy, row.dxz, row.dyy, row.dyz, row.dzz,
        ];
        for (v, name) in values.iter().zip(&CSV_COLUMNS[1..]) {
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {name}: non-finite value"),
                });
            }
        }
        rows.push(RawRow {
            line,
            subject: row.subject,
            values,
        });
    }
    Ok(rows)
}

pub fn write_field<W: Write>(writer: W, field: &TensorField, format: FieldFormat) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    match format {
        FieldFormat::Csv => {
            let mut csv = csv::Writer::from_writer(writer);
            csv.write_record(CSV_COLUMNS).map_err(io)?;
            for r in field.records() {
                let mut row = vec![r.subject.clone()];
                row.extend(
                    r.position
                        .iter()
                        .chain(r.tensor.vech())
                        .map(|v| format!("{v:?}")),
                );
                csv.write_record(&row).map_err(io)?;
            }
            csv.flush()?;
        }
        FieldFormat::JsonLines => {
            let mut w = std::io::BufWriter::new(writer);
            for r in field.records() {
                let t = r.tensor.vech();
                let row = JsonRow {
                    subject: r.subject.clone(),
                    x: r.position[0],
                    y: r.position[1],
                    z: r.position[2],
                    dxx: t[0],
                    dxy: t[1],
                    dxz: t[2],
                    dyy: t[3],
                    dyz: t[4],
                    dzz: t[5],
                };
                serde_json::to_writer(&mut w, &row).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn save_field(path: impl AsRef<Path>, field: &TensorField, format: FieldFormat) -> Result<()> {
    write_field(File::create(path.as_ref())?, field, format)
}
