use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// A finite sample, one point per row, optionally labelled.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSet {
    samples: Matrix,
    labels: Option<Vec<usize>>,
    n_classes: usize,
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl EmpiricalSet {
    pub fn new(samples: Matrix, labels: Option<Vec<usize>>, n_classes: usize) -> Result<Self> {
        if samples.rows() == 0 {
            return Err(Error::contract("EmpiricalSet::new", "need at least one sample"));
        }
        if let Some(labels) = &labels {
            if labels.len() != samples.rows() {
                return Err(Error::contract(
                    "EmpiricalSet::new",
                    format!("{} labels for {} samples", labels.len(), samples.rows()),
                ));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
                return Err(Error::contract(
                    "EmpiricalSet::new",
                    format!("label {bad} not below class count {n_classes}"),
                ));
            }
        }
        Ok(EmpiricalSet {
            samples,
            labels,
            n_classes,
        })
    }

    pub fn unlabeled(samples: Matrix) -> Result<Self> {
        Self::new(samples, None, 0)
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub(crate) fn clear_labels(&mut self) {
        self.labels = None;
        self.n_classes = 0;
    }

    /// Writes `x0,...,x{d-1}[,label]` with one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|d| format!("x{d}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self.samples.row_slice(r).iter().map(|&v| fmt_f64(v)).collect();
            if let Some(labels) = &self.labels {
                rec.push(labels[r].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`EmpiricalSet::write_csv`]. The class
    /// count is taken as one more than the largest label.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let labeled = header.iter().last() == Some("label");
        let dim = header.len() - usize::from(labeled);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for v in rec.iter().take(dim) {
                data.push(v.trim().parse::<f64>().map_err(|e| {
                    Error::contract("EmpiricalSet::read_csv", format!("bad value {v:?}: {e}"))
                })?);
            }
            if labeled {
                let v = &rec[dim];
                labels.push(v.trim().parse::<usize>().map_err(|e| {
                    Error::contract("EmpiricalSet::read_csv", format!("bad label {v:?}: {e}"))
                })?);
            }
        }
        let rows = data.len() / dim.max(1);
        let samples = Matrix::from_vec(rows, dim, data)?;
        if labeled {
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            Self::new(samples, Some(labels), n_classes)
        } else {
            Self::new(samples, None, 0)
        }
    }
}
