use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Channel;
use crate::error::{arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    ScalarPerRecord,
    #[serde(rename = "wavelet-coefficients-per-record")]
    WaveletCoefficients,
    GlobalSample,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::ScalarPerRecord => "scalar-per-record",
            DatasetKind::WaveletCoefficients => "wavelet-coefficients-per-record",
            DatasetKind::GlobalSample => "global-sample",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "scalar-per-record" => DatasetKind::ScalarPerRecord,
            "wavelet-coefficients-per-record" => DatasetKind::WaveletCoefficients,
            "global-sample" => DatasetKind::GlobalSample,
            other => return arg(format!("unknown dataset kind {other:?}")),
        })
    }
}

/// Released observations: an `len x dim` row-major matrix plus the channel
/// that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SanitizedDataset {
    pub kind: DatasetKind,
    pub dim: usize,
    pub values: Vec<f64>,
    pub channel: Channel,
}

impl SanitizedDataset {
    pub fn new(kind: DatasetKind, dim: usize, values: Vec<f64>, channel: Channel) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return arg(format!("{} values do not form rows of width {dim}", values.len()));
        }
        if kind != channel.kind() {
            return arg(format!("dataset kind {} does not match its channel", kind.as_str()));
        }
        if kind == DatasetKind::GlobalSample && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return arg("global-sample values must lie in [0, 1]");
        }
        if let Channel::Local(c) = &channel {
            use super::LocalChannel;
            if c.record_len() != dim {
                return arg(format!("row width {dim} does not match channel record length {}", c.record_len()));
            }
        }
        Ok(Self { kind, dim, values, channel })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    /// First row: `kind,channel_json`; then one record per row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).has_headers(false).from_writer(w);
        out.write_record([self.kind.as_str(), &serde_json::to_string(&self.channel)?])?;
        for row in self.rows() {
            out.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(r);
        let mut records = rdr.records();
        let header = records.next().ok_or_else(|| Error::Argument("empty sanitized dataset file".into()))??;
        if header.len() != 2 {
            return arg("first row must be `kind,channel_json`");
        }
        let kind = DatasetKind::parse(&header[0])?;
        let channel: Channel = serde_json::from_str(&header[1])?;
        let mut values = Vec::new();
        let mut dim = 0;
        for rec in records {
            let rec = rec?;
            if dim == 0 {
                dim = rec.len();
            } else if rec.len() != dim {
                return arg(format!("ragged row of width {} (expected {dim})", rec.len()));
            }
            for field in rec.iter() {
                values.push(field.trim().parse::<f64>().map_err(|e| Error::Argument(format!("{field:?}: {e}")))?);
            }
        }
        if dim == 0 {
            dim = match &channel {
                Channel::Local(c) => {
                    use super::LocalChannel;
                    c.record_len()
                }
                Channel::Global(_) => 1,
            };
        }
        Self::new(kind, dim, values, channel)
    }
}
