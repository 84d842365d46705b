//! Line-delimited dataset files: one header line, then one record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};
use crate::head::Proposal;
use crate::metrics::EvalSample;
use crate::model::GroundingSample;
use crate::query::{tokenize, Vocabulary};

pub const DATASET_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: u32,
    pub seed: u64,
    pub split: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: u64,
    pub w: u32,
    pub h: u32,
    pub query: Vec<String>,
    pub gt: BBox,
    pub proposals: Vec<Proposal>,
}

impl DatasetRecord {
    pub fn image(&self) -> Result<ImageSize> {
        Ok(ImageSize::new(self.w as f64, self.h as f64)?)
    }

    pub fn to_sample(&self, vocab: &Vocabulary) -> Result<GroundingSample> {
        Ok(GroundingSample {
            id: self.id,
            image: self.image()?,
            tokens: tokenize(&self.query.join(" "), vocab)?,
            proposals: self.proposals.clone(),
            gt: self.gt,
        })
    }

    pub fn to_eval_sample(&self) -> Result<EvalSample> {
        Ok(EvalSample {
            proposals: self.proposals.iter().map(|p| p.bbox).collect(),
            gt: self.gt,
            image: self.image()?,
        })
    }
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, records: &[DatasetRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write_all = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write_line(out, header)?;
        for r in records {
            write_line(out, r)?;
        }
        out.flush()
    };
    write_all(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let format = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = BufReader::new(file).lines();
    let header: DatasetHeader = match lines.next() {
        None => return Err(format(1, "empty file, expected a header line".into())),
        Some(l) => {
            let l = l.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| format(1, format!("bad header: {e}")))?
        }
    };
    if header.schema != DATASET_SCHEMA {
        return Err(format(
            1,
            format!("schema version {} not supported (expected {DATASET_SCHEMA})", header.schema),
        ));
    }
    let mut records = Vec::new();
    for (i, l) in lines.enumerate() {
        let lineno = i + 2;
        let l = l.map_err(|e| Error::io(path, e))?;
        let record: DatasetRecord = serde_json::from_str(&l).map_err(|e| format(lineno, e.to_string()))?;
        records.push(record);
    }
    Ok((header, records))
}
