//! CSV layout: feature columns, then an optional integer label column.
//! With `pixel_range`, features are stored in `[0, 255]` and rescaled to
//! `[-1, 1]` on read.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvLayout {
    pub header: bool,
    pub label_column: bool,
    pub pixel_range: bool,
}

impl CsvLayout {
    /// 64 pixel columns in `[0, 255]` followed by a label.
    pub fn digits() -> Self {
        CsvLayout {
            header: false,
            label_column: true,
            pixel_range: true,
        }
    }
}

pub fn parse_csv(text: &str, layout: CsvLayout) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(layout.header)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format {
            offset: e.position().map_or(0, |p| p.byte() as usize),
            msg: e.to_string(),
        })?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        let bad = |msg: String| Error::Format { offset, msg };
        let mut fields: Vec<&str> = rec.iter().collect();
        if layout.label_column {
            let y = fields
                .pop()
                .ok_or_else(|| bad("empty row".into()))?
                .parse::<usize>()
                .map_err(|e| bad(format!("label: {e}")))?;
            labels.push(y);
        }
        if *width.get_or_insert(fields.len()) != fields.len() || fields.is_empty() {
            return Err(bad(format!("row has {} feature columns", fields.len())));
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| bad(format!("not a number: `{f}`")))?;
            values.push(if layout.pixel_range {
                v / 127.5 - 1.0
            } else {
                v
            });
        }
    }
    let width = width.ok_or(Error::Format {
        offset: 0,
        msg: "no data rows".into(),
    })?;
    let n = values.len() / width;
    let points = Tensor::new_finite(vec![n, width], values)?;
    if layout.label_column {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Dataset::new(points, Some(labels), classes)
    } else {
        Dataset::unlabeled(points)
    }
}

pub fn read_csv(path: &Path, layout: CsvLayout) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, layout)
}

/// Writes `ds` in the given layout. Labels are written only when the layout
/// has a label column and the dataset carries labels.
pub fn write_csv(ds: &Dataset, layout: CsvLayout) -> String {
    let mut w = ::csv::WriterBuilder::new().from_writer(Vec::new());
    if layout.header {
        let mut h: Vec<String> = (0..ds.d()).map(|i| format!("x{i}")).collect();
        if layout.label_column {
            h.push("label".into());
        }
        w.write_record(&h).expect("in-memory write");
    }
    for (i, row) in ds.points().iter_rows().enumerate() {
        let mut rec: Vec<String> = row
            .iter()
            .map(|&v| {
                if layout.pixel_range {
                    format!("{:?}", (v + 1.0) * 127.5)
                } else {
                    format!("{v:?}")
                }
            })
            .collect();
        if layout.label_column {
            if let Some(l) = ds.labels() {
                rec.push(l[i].to_string());
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
