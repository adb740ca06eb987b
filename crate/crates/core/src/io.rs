//! CSV note files: header `onset,track,pitch,dur`, one note per row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::note::{Excerpt, Note};

pub const CSV_HEADER: [&str; 4] = ["onset", "track", "pitch", "dur"];

pub fn load_csv(path: impl AsRef<Path>) -> Result<Excerpt> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Excerpt> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
    }

    let mut notes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<i64> {
            let name = CSV_HEADER[i];
            let raw = record.get(columns[i]).ok_or_else(|| Error::Csv {
                line,
                message: format!("missing value for `{name}`"),
            })?;
            raw.parse::<i64>().map_err(|_| Error::Csv {
                line,
                message: format!("`{name}` is not an integer: {raw:?}"),
            })
        };
        let (onset, track, pitch, dur) = (field(0)?, field(1)?, field(2)?, field(3)?);
        let bad = |message: String| Error::Csv { line, message };
        if onset < 0 {
            return Err(bad(format!("negative onset {onset}")));
        }
        if dur < 1 {
            return Err(bad(format!("duration must be at least 1, got {dur}")));
        }
        if !(0..=127).contains(&pitch) {
            return Err(bad(format!("pitch {pitch} outside 0..=127")));
        }
        let track = u32::try_from(track).map_err(|_| bad(format!("invalid track {track}")))?;
        notes.push(Note {
            onset: onset as u64,
            pitch: pitch as u8,
            dur: dur as u64,
            track,
        });
    }
    Ok(Excerpt::from_valid(notes))
}

pub fn write_csv(excerpt: &Excerpt, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(excerpt, std::io::BufWriter::new(file))
}

pub fn write_csv_to<W: Write>(excerpt: &Excerpt, writer: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let err = |e: csv::Error| Error::Csv {
        line: 0,
        message: e.to_string(),
    };
    writer.write_record(CSV_HEADER).map_err(err)?;
    for n in excerpt {
        writer
            .write_record([
                n.onset.to_string(),
                n.track.to_string(),
                n.pitch.to_string(),
                n.dur.to_string(),
            ])
            .map_err(err)?;
    }
    writer.flush().map_err(|e| Error::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(())
}

pub fn to_csv_string(excerpt: &Excerpt) -> String {
    let mut buf = Vec::new();
    write_csv_to(excerpt, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    Error::Csv {
        line: e.position().map_or(fallback_line, |p| p.line()),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_single_note() {
        let e = read_csv("onset,track,pitch,dur\n0,0,60,500".as_bytes()).unwrap();
        assert_eq!(e.notes(), &[Note::new(60, 0, 500, 0).unwrap()]);
    }

    #[test]
    fn sorts_rows() {
        let e = read_csv("onset,track,pitch,dur\n500,0,62,100\n0,0,60,500\n".as_bytes()).unwrap();
        assert_eq!(e.notes()[0].onset, 0);
        assert_eq!(e.notes()[1].onset, 500);
    }

    #[test]
    fn zero_duration_reports_line() {
        let err = read_csv("onset,track,pitch,dur\n0,0,60,500\n10,0,61,0\n".as_bytes()).unwrap_err();
        match err {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_csv("onset,track,pitch\n0,0,60\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("`dur`"), "{err}");
    }

    #[test]
    fn non_integer_reports_line() {
        let err = read_csv("onset,track,pitch,dur\n0,0,C4,500\n".as_bytes()).unwrap_err();
        match err {
            Error::Csv { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("pitch"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_excerpt_writes_header_only() {
        assert_eq!(to_csv_string(&Excerpt::empty()), "onset,track,pitch,dur\n");
    }

    #[test]
    fn round_trip() {
        let e = Excerpt::new(vec![
            Note::new(60, 0, 500, 0).unwrap(),
            Note::new(72, 250, 40, 3).unwrap(),
        ])
        .unwrap();
        let s = to_csv_string(&e);
        assert_eq!(read_csv(s.as_bytes()).unwrap(), e);
    }
}
