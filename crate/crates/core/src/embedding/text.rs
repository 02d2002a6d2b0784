//! word2vec text format: a `vocab_size dim` header, then one
//! `word v1 ... v_dim` line per word. Word counts travel in an optional
//! `word,count` CSV sidecar.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use super::Embedding;
use crate::error::{Error, Result};

/// Values are written in shortest round-trip form, so a re-import
/// reproduces the matrix exactly.
pub fn write_word2vec_text<W: Write>(emb: &Embedding, w: W) -> Result<()> {
    let mut out = BufWriter::new(w);
    writeln!(out, "{} {}", emb.len(), emb.dim())?;
    for (i, word) in emb.words().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        for v in emb.row(i) {
            write!(out, " {v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_word2vec_text<R: BufRead>(r: R) -> Result<Embedding> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing `vocab_size dim` header".into(),
            })
        }
    };
    let mut parts = header.split_whitespace();
    let parse_dim = |s: Option<&str>, what: &str| -> Result<usize> {
        s.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("header needs {what}"),
        })
    };
    let n_words = parse_dim(parts.next(), "vocab_size")?;
    let dim = parse_dim(parts.next(), "dim")?;
    if dim == 0 || parts.next().is_some() {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `vocab_size dim` with dim >= 1".into(),
        });
    }

    let mut words = Vec::with_capacity(n_words);
    let mut values = Vec::with_capacity(n_words * dim);
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(n_words);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a field").to_string();
        let row: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("invalid value {f:?} for word {word:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("word {word:?} has {} values, header declares {dim}", row.len()),
            });
        }
        if let Some(first) = seen.insert(word.clone(), line_no) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate word {word:?} (first seen on line {first})"),
            });
        }
        words.push(word);
        values.extend(row);
    }
    if words.len() != n_words {
        return Err(Error::Parse {
            line: words.len() + 2,
            message: format!("header declares {n_words} words, file has {}", words.len()),
        });
    }
    Embedding::new(words, values, dim)
}

pub fn write_frequency_sidecar<W: Write>(emb: &Embedding, w: W) -> Result<()> {
    let freq = emb
        .frequencies()
        .ok_or_else(|| Error::MissingFrequencies("embedding has no word counts to write".into()))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["word", "count"])?;
    for (word, count) in emb.words().iter().zip(freq) {
        out.write_record([word.as_str(), &count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_frequency_sidecar<R: Read>(r: R) -> Result<HashMap<String, u64>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut counts = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse {
            line: i + 2,
            message: "expected word,count".into(),
        };
        let word = rec.get(0).ok_or_else(bad)?.to_string();
        let count = rec.get(1).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        counts.insert(word, count);
    }
    Ok(counts)
}

/// Writes `path` and, when the embedding carries counts and `freq_path` is
/// given, the sidecar.
pub fn export_embedding(emb: &Embedding, path: &Path, freq_path: Option<&Path>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_word2vec_text(emb, file)?;
    if let (Some(fp), true) = (freq_path, emb.has_frequencies()) {
        let file = fs::File::create(fp).map_err(|e| Error::io(fp, e))?;
        write_frequency_sidecar(emb, file)?;
    }
    Ok(())
}

pub fn import_embedding(path: &Path, freq_path: Option<&Path>) -> Result<Embedding> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let emb = read_word2vec_text(BufReader::new(file))?;
    match freq_path {
        None => Ok(emb),
        Some(fp) => {
            let file = fs::File::open(fp).map_err(|e| Error::io(fp, e))?;
            let counts = read_frequency_sidecar(file)?;
            let extra = counts.keys().filter(|w| !emb.contains(w)).count();
            if extra > 0 {
                warn!("{extra} sidecar words are not in the embedding vocabulary; ignored");
            }
            emb.with_frequencies(&counts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_plain_file() {
        let text = "2 3\na 1 2 3\nb 0.5 -1 1e-3 \n";
        let e = read_word2vec_text(text.as_bytes()).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.vector("b").unwrap(), &[0.5, -1.0, 0.001]);
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let text = "2 3\na 1 2 3\nb 1 2 3 4\n";
        match read_word2vec_text(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("\"b\""), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_word_is_named() {
        let text = "2 1\nsame 1\nsame 2\n";
        match read_word2vec_text(text.as_bytes()) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("same")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_and_count_errors() {
        assert!(read_word2vec_text("".as_bytes()).is_err());
        assert!(read_word2vec_text("x 3\n".as_bytes()).is_err());
        assert!(read_word2vec_text("3 1\na 1\n".as_bytes()).is_err());
        assert!(read_word2vec_text("1 1\na nan\n".as_bytes()).is_err());
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let counts: HashMap<String, u64> = [("x".to_string(), 4), ("y".to_string(), 2)].into();
        let e = Embedding::from_rows(vec![("x", vec![0.1, 1.0 / 3.0]), ("y", vec![-2.5, 1e-17])])
            .unwrap()
            .with_frequencies(&counts)
            .unwrap();
        let vp = dir.path().join("e.txt");
        let fp = dir.path().join("e.freq.csv");
        export_embedding(&e, &vp, Some(&fp)).unwrap();
        let back = import_embedding(&vp, Some(&fp)).unwrap();
        assert_eq!(back, e);
        let no_freq = import_embedding(&vp, None).unwrap();
        assert!(!no_freq.has_frequencies());
    }
}
