use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CorpusError, SentenceRecord};

/// Reads one sentence per line, validating each record.
pub fn read_corpus(reader: impl Read) -> Result<Vec<SentenceRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                line: i + 1,
                source,
            })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<SentenceRecord>, CorpusError> {
    read_corpus(File::open(path)?)
}

pub fn write_corpus(mut writer: impl Write, records: &[SentenceRecord]) -> Result<(), CorpusError> {
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, records: &[SentenceRecord]) -> Result<(), CorpusError> {
    write_corpus(BufWriter::new(File::create(path)?), records)
}
