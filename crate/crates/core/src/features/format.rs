//! Binary feature files.
//!
//! A split file is a sequence of records. Each record is one UTF-8 header
//! line of space-separated `key=value` pairs
//! (`subject_id label start fragment frames dims fs config`) terminated by
//! `\n`, followed by `frames * dims` little-endian `f32` values, row-major.
//! The companion index file has one tab-separated line per record:
//! `subject_id fragment_index label start offset`, where `offset` is the
//! byte position of the record header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::{FeatureMatrix, Provenance};
use crate::error::{Error, Result};
use crate::recording::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub subject_id: String,
    pub label: Label,
    pub start: usize,
    pub fragment_index: usize,
    pub fs: u32,
    pub config_hash: String,
    pub matrix: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndexEntry {
    pub subject_id: String,
    pub fragment_index: usize,
    pub label: Label,
    pub start: usize,
    pub offset: u64,
}

pub const INDEX_HEADER: &str = "# subject_id\tfragment_index\tlabel\tstart\toffset";

pub struct FeatureWriter {
    data: BufWriter<File>,
    index: BufWriter<File>,
    offset: u64,
    records: usize,
}

impl FeatureWriter {
    pub fn create(data_path: impl AsRef<Path>, index_path: impl AsRef<Path>) -> Result<Self> {
        let data = BufWriter::new(File::create(data_path)?);
        let mut index = BufWriter::new(File::create(index_path)?);
        writeln!(index, "{INDEX_HEADER}")?;
        Ok(Self {
            data,
            index,
            offset: 0,
            records: 0,
        })
    }

    pub fn write(&mut self, rec: &FeatureRecord) -> Result<()> {
        let m = &rec.matrix;
        if m.values.len() != m.frames * m.dims {
            return Err(Error::Invariant("feature matrix shape mismatch".into()));
        }
        if rec.subject_id.contains(char::is_whitespace) {
            return Err(Error::format("subject ids must not contain whitespace"));
        }
        let header = format!(
            "subject_id={} label={} start={} fragment={} frames={} dims={} fs={} config={}\n",
            rec.subject_id,
            rec.label,
            rec.start,
            rec.fragment_index,
            m.frames,
            m.dims,
            rec.fs,
            rec.config_hash
        );
        writeln!(
            self.index,
            "{}\t{}\t{}\t{}\t{}",
            rec.subject_id, rec.fragment_index, rec.label, rec.start, self.offset
        )?;
        self.data.write_all(header.as_bytes())?;
        for &v in &m.values {
            self.data.write_all(&(v as f32).to_le_bytes())?;
        }
        self.offset += header.len() as u64 + 4 * m.values.len() as u64;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn finish(mut self) -> Result<usize> {
        self.data.flush()?;
        self.index.flush()?;
        Ok(self.records)
    }
}

pub struct FeatureReader {
    data: BufReader<File>,
}

impl FeatureReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            data: BufReader::new(File::open(path)?),
        })
    }

    pub fn read_index(path: impl AsRef<Path>) -> Result<Vec<FeatureIndexEntry>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::format(format!("bad index line `{line}`"));
            if f.len() != 5 {
                return Err(bad());
            }
            out.push(FeatureIndexEntry {
                subject_id: f[0].to_string(),
                fragment_index: f[1].parse().map_err(|_| bad())?,
                label: f[2].parse()?,
                start: f[3].parse().map_err(|_| bad())?,
                offset: f[4].parse().map_err(|_| bad())?,
            });
        }
        Ok(out)
    }

    pub fn read_at(&mut self, offset: u64) -> Result<FeatureRecord> {
        self.data.seek(SeekFrom::Start(offset))?;
        self.read_next()?
            .ok_or_else(|| Error::format(format!("no record at offset {offset}")))
    }

    /// Reads the record at the current position; `None` at end of file.
    pub fn read_next(&mut self) -> Result<Option<FeatureRecord>> {
        let mut header = Vec::new();
        if self.data.read_until(b'\n', &mut header)? == 0 {
            return Ok(None);
        }
        let header = String::from_utf8(header)
            .map_err(|_| Error::format("feature header is not UTF-8"))?;
        let mut fields = std::collections::HashMap::new();
        for pair in header.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::format(format!("bad header field `{pair}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::format(format!("feature header lacks `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(format!("bad `{k}` in feature header")))
        };
        let (frames, dims) = (num("frames")?, num("dims")?);
        let mut raw = vec![0u8; frames * dims * 4];
        self.data.read_exact(&mut raw).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format("truncated feature record"),
            _ => Error::Io(e),
        })?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        let subject_id = get("subject_id")?.to_string();
        let start = num("start")?;
        Ok(Some(FeatureRecord {
            label: get("label")?.parse()?,
            fragment_index: num("fragment")?,
            fs: num("fs")? as u32,
            config_hash: get("config")?.to_string(),
            matrix: FeatureMatrix {
                frames,
                dims,
                values,
                provenance: Provenance {
                    subject_id: subject_id.clone(),
                    start,
                    channels: Vec::new(),
                },
            },
            subject_id,
            start,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(subject: &str, idx: usize, fill: f64) -> FeatureRecord {
        let mut m = FeatureMatrix::zeros(3, 4);
        for (i, v) in m.values.iter_mut().enumerate() {
            *v = fill + i as f64 * 0.5;
        }
        m.provenance.subject_id = subject.into();
        m.provenance.start = 100 * idx;
        FeatureRecord {
            subject_id: subject.into(),
            label: Label::Cad,
            start: 100 * idx,
            fragment_index: idx,
            fs: 4000,
            config_hash: "deadbeef".into(),
            matrix: m,
        }
    }

    #[test]
    fn write_then_read_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let (data, index) = (dir.path().join("t.feat"), dir.path().join("t.idx"));
        let mut w = FeatureWriter::create(&data, &index).unwrap();
        let recs = [record("S1", 0, 1.0), record("S1", 1, -2.0), record("S2", 0, 7.25)];
        for r in &recs {
            w.write(r).unwrap();
        }
        assert_eq!(w.finish().unwrap(), 3);

        let entries = FeatureReader::read_index(&index).unwrap();
        assert_eq!(entries.len(), 3);
        let mut reader = FeatureReader::open(&data).unwrap();
        for (e, r) in entries.iter().zip(&recs).rev() {
            assert_eq!(e.subject_id, r.subject_id);
            assert_eq!(&reader.read_at(e.offset).unwrap(), r);
        }
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (data, index) = (dir.path().join("t.feat"), dir.path().join("t.idx"));
        let mut w = FeatureWriter::create(&data, &index).unwrap();
        w.write(&record("S1", 0, 1.0)).unwrap();
        w.finish().unwrap();
        let bytes = std::fs::read(&data).unwrap();
        std::fs::write(&data, &bytes[..bytes.len() - 3]).unwrap();
        let mut reader = FeatureReader::open(&data).unwrap();
        assert!(matches!(reader.read_next(), Err(Error::Format(_))));
    }
}
