//! Single-pass access to a dataset, with every full pass recorded by a
//! [`PassAuditor`] under the purpose it served.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassPurpose {
    /// Passes consumed while choosing the subset.
    Selection,
    /// Passes consumed while measuring error for reporting or best-of-R choice.
    Evaluation,
}

/// Snapshot of the pass counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PassCounts {
    pub selection: usize,
    pub evaluation: usize,
}

/// Monotone counters of completed passes.
#[derive(Debug, Default)]
pub struct PassAuditor {
    selection: AtomicUsize,
    evaluation: AtomicUsize,
}

impl PassAuditor {
    fn record(&self, purpose: PassPurpose) {
        let counter = match purpose {
            PassPurpose::Selection => &self.selection,
            PassPurpose::Evaluation => &self.evaluation,
        };
        counter.fetch_add(1, Ordering::SeqCst);
    }

    pub fn counts(&self) -> PassCounts {
        PassCounts {
            selection: self.selection.load(Ordering::SeqCst),
            evaluation: self.evaluation.load(Ordering::SeqCst),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Skip the first line as a header.
    pub has_header: bool,
}

#[derive(Debug, Clone)]
enum Origin {
    Memory {
        points: Arc<PointSet>,
        path: Option<PathBuf>,
    },
    CsvStream {
        path: PathBuf,
        options: CsvOptions,
    },
}

/// A dataset that can be read front to back, one full pass at a time.
#[derive(Debug)]
pub struct DatasetSource {
    origin: Origin,
    dim: usize,
    declared_len: Option<usize>,
    auditor: PassAuditor,
}

impl DatasetSource {
    pub fn in_memory(points: PointSet) -> Self {
        Self::shared(Arc::new(points))
    }

    /// Wraps an already shared point set; the new source has its own auditor.
    pub fn shared(points: Arc<PointSet>) -> Self {
        Self {
            dim: points.dim(),
            declared_len: Some(points.len()),
            origin: Origin::Memory { points, path: None },
            auditor: PassAuditor::default(),
        }
    }

    /// Streams a CSV file from disk on every pass. Only the first data row is
    /// read up front (to fix `d`); malformed rows surface during a pass.
    pub fn csv_stream(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut reader = csv_reader(&path)?;
        let mut record = csv::StringRecord::new();
        let dim = loop {
            let more = reader
                .read_record(&mut record)
                .map_err(|e| csv_error(&path, e))?;
            if !more {
                return Err(Error::Format {
                    row: 0,
                    message: "no data rows (n >= 1 required)".into(),
                });
            }
            if is_header_row(&record, &options) {
                continue;
            }
            break record.len();
        };
        Ok(Self {
            origin: Origin::CsvStream { path, options },
            dim,
            declared_len: None,
            auditor: PassAuditor::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Point count, when known without a pass.
    pub fn declared_len(&self) -> Option<usize> {
        self.declared_len
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.origin {
            Origin::Memory { path, .. } => path.as_deref(),
            Origin::CsvStream { path, .. } => Some(path),
        }
    }

    /// The backing point set for in-memory sources.
    pub fn points(&self) -> Option<&Arc<PointSet>> {
        match &self.origin {
            Origin::Memory { points, .. } => Some(points),
            Origin::CsvStream { .. } => None,
        }
    }

    pub fn passes(&self) -> PassCounts {
        self.auditor.counts()
    }

    pub fn auditor(&self) -> &PassAuditor {
        &self.auditor
    }

    /// Runs one full pass, handing `(index, point)` to `visit` in source order.
    ///
    /// The pass is recorded under `purpose` only if it runs to completion;
    /// errors from the source or from `visit` abort it uncounted. Returns the
    /// number of points seen.
    pub fn iterate_once<F>(&self, purpose: PassPurpose, mut visit: F) -> Result<usize>
    where
        F: FnMut(usize, &[f64]) -> Result<()>,
    {
        let seen = match &self.origin {
            Origin::Memory { points, .. } => {
                for (i, pt) in points.iter().enumerate() {
                    visit(i, pt)?;
                }
                points.len()
            }
            Origin::CsvStream { path, options } => {
                let mut reader = csv_reader(path)?;
                let mut record = csv::StringRecord::new();
                let mut row = Vec::with_capacity(self.dim);
                let mut index = 0;
                let mut first = true;
                while reader
                    .read_record(&mut record)
                    .map_err(|e| csv_error(path, e))?
                {
                    if first && is_header_row(&record, options) {
                        first = false;
                        continue;
                    }
                    first = false;
                    parse_record(&record, self.dim, &mut row)?;
                    visit(index, &row)?;
                    index += 1;
                }
                if index == 0 {
                    return Err(Error::Format {
                        row: 0,
                        message: "no data rows (n >= 1 required)".into(),
                    });
                }
                index
            }
        };
        self.auditor.record(purpose);
        Ok(seen)
    }

    /// Materializes the dataset, spending one evaluation pass.
    pub fn collect(&self) -> Result<PointSet> {
        if let Some(points) = self.points() {
            self.auditor.record(PassPurpose::Evaluation);
            return Ok(points.as_ref().clone());
        }
        let mut data = Vec::new();
        self.iterate_once(PassPurpose::Evaluation, |_, pt| {
            data.extend_from_slice(pt);
            Ok(())
        })?;
        PointSet::from_flat(self.dim, data)
    }
}

/// Reads and validates a whole CSV file into memory.
pub fn read_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<PointSet> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let mut record = csv::StringRecord::new();
    let mut data = Vec::new();
    let mut row = Vec::new();
    let mut dim = None;
    let mut first = true;
    while reader
        .read_record(&mut record)
        .map_err(|e| csv_error(path, e))?
    {
        if first && is_header_row(&record, options) {
            first = false;
            continue;
        }
        first = false;
        let d = *dim.get_or_insert(record.len());
        parse_record(&record, d, &mut row)?;
        data.extend_from_slice(&row);
    }
    let dim = dim.ok_or_else(|| Error::Format {
        row: 0,
        message: "no data rows (n >= 1 required)".into(),
    })?;
    PointSet::from_flat(dim, data)
}

/// Opens a CSV dataset: the file is parsed and validated up front and then
/// served from memory, with `path` retained for reporting.
pub fn open_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<DatasetSource> {
    let path = path.as_ref();
    let points = read_csv(path, options)?;
    let mut source = DatasetSource::in_memory(points);
    if let Origin::Memory { path: p, .. } = &mut source.origin {
        *p = Some(path.to_path_buf());
    }
    Ok(source)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::Stream {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn is_header_row(record: &csv::StringRecord, options: &CsvOptions) -> bool {
    options.has_header && record.position().is_some_and(|p| p.record() == 0)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let row = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Stream {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        csv::ErrorKind::Utf8 { err, .. } => Error::Format {
            row,
            message: format!("invalid UTF-8: {err}"),
        },
        other => Error::Format {
            row,
            message: format!("{other:?}"),
        },
    }
}

fn parse_record(record: &csv::StringRecord, dim: usize, out: &mut Vec<f64>) -> Result<()> {
    let row = record.position().map(|p| p.line()).unwrap_or(0);
    if record.len() != dim {
        return Err(Error::Format {
            row,
            message: format!("expected {dim} fields, found {}", record.len()),
        });
    }
    out.clear();
    for (col, cell) in record.iter().enumerate() {
        let value: f64 = cell.parse().map_err(|_| Error::Format {
            row,
            message: format!("column {}: {cell:?} is not a decimal number", col + 1),
        })?;
        if !value.is_finite() {
            return Err(Error::Format {
                row,
                message: format!("column {}: non-finite value {cell:?}", col + 1),
            });
        }
        out.push(value);
    }
    Ok(())
}
