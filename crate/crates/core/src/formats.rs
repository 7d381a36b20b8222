//! CSV interchange files.
//!
//! | file        | columns                                              |
//! |-------------|------------------------------------------------------|
//! | pairs       | `subject_a,subject_b,distance,method`                |
//! | scores      | `label,score,id_a,id_b`                              |
//! | DET         | `threshold,fmr,fnmr`                                 |
//! | comparisons | `morph_id,frs_id,subject_slot,probe_index,distance`  |
//! | D-MAD DET   | `threshold,macer,bpcer`                              |
//! | ECDF        | `series,score,fraction`                              |
//!
//! Writers may prepend one `#` comment line carrying provenance; readers skip
//! comment lines.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub series: String,
    pub score: f64,
    pub fraction: f64,
}

pub fn write_csv<W: Write, T: Serialize>(mut writer: W, rows: &[T], comment: Option<&str>) -> Result<()> {
    if let Some(comment) = comment {
        let line = comment.replace('\n', " ");
        writeln!(writer, "# {line}").map_err(|e| Error::io("<writer>", e))?;
    }
    let mut csv = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Like [`write_csv`], but also writes the header when `rows` is empty.
pub fn write_csv_with_header<W: Write, T: Serialize>(
    mut writer: W,
    header: &[&str],
    rows: &[T],
    comment: Option<&str>,
) -> Result<()> {
    if rows.is_empty() {
        if let Some(comment) = comment {
            writeln!(writer, "# {}", comment.replace('\n', " ")).map_err(|e| Error::io("<writer>", e))?;
        }
        writeln!(writer, "{}", header.join(",")).map_err(|e| Error::io("<writer>", e))?;
        return Ok(());
    }
    write_csv(writer, rows, comment)
}

pub fn read_csv<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_csv_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_csv(file)
}

pub fn create_file(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    let path = path.as_ref();
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}
