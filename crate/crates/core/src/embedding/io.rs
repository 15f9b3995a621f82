//! Classic word-vector text format: a `V D` header line followed by one
//! `word v1 .. vD` line per word.

use std::fmt::Write as _;
use std::path::Path;

use super::{EmbeddingMatrix, Vocabulary};
use crate::{Error, Result};

pub fn write_embeddings(matrix: &EmbeddingMatrix, vocab: &Vocabulary) -> Result<String> {
    if matrix.rows() != vocab.len() {
        return Err(Error::Shape(format!(
            "{} vectors for {} words",
            matrix.rows(),
            vocab.len()
        )));
    }
    let mut out = format!("{} {}\n", matrix.rows(), matrix.dim());
    for (id, word) in vocab.words().iter().enumerate() {
        out.push_str(word);
        for v in matrix.vector(id) {
            // Display prints the shortest string that parses back to v.
            write!(out, " {v}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_embeddings(matrix, vocab)?)?;
    Ok(())
}

pub fn parse_embeddings(text: &str) -> Result<(EmbeddingMatrix, Vocabulary)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing \"V D\" header".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: format!("bad header {header:?}: {e}"),
        })?;
    let [rows, dim] = dims[..] else {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must be \"V D\", got {header:?}"),
        });
    };
    let mut words = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line");
        let before = values.len();
        for f in fields {
            values.push(f.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad value {f:?}: {e}"),
            })?);
        }
        if values.len() - before != dim {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {dim} values, found {}", values.len() - before),
            });
        }
        words.push(word.to_owned());
    }
    if words.len() != rows {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header announces {rows} words but {} follow", words.len()),
        });
    }
    let vocab = Vocabulary::from_words(words).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let matrix = EmbeddingMatrix::new(rows, dim, values, None)?;
    Ok((matrix, vocab))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddingMatrix, Vocabulary)> {
    parse_embeddings(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{build_vocab, train_cbow, CbowConfig};

    #[test]
    fn hand_written_file() {
        let (m, v) = parse_embeddings("2 3\nسلام 1 2.5 -3\nb 0 0.125 1e-3\n").unwrap();
        assert_eq!(v.words(), &["سلام".to_string(), "b".into()]);
        assert_eq!(m.vector(0), &[1.0, 2.5, -3.0]);
        assert_eq!(m.vector(1), &[0.0, 0.125, 0.001]);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let streams = vec![vec!["x".to_string(), "y".into(), "z".into(), "x".into(), "y".into()]];
        let vocab = build_vocab(&streams, 1).unwrap();
        let cfg = CbowConfig { dim: 7, epochs: 2, ..CbowConfig::default() };
        let m = train_cbow(&streams, &vocab, &cfg).unwrap().matrix;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        save_embeddings(&m, &vocab, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "3 7");
        let (m2, v2) = load_embeddings(&path).unwrap();
        assert_eq!(v2.words(), vocab.words());
        let bits = |m: &EmbeddingMatrix| m.vectors().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m2), bits(&m));
    }

    #[test]
    fn malformed_files_name_the_line() {
        let cases = [
            ("", 1),
            ("2\n", 1),
            ("1 2\na 1\n", 2),
            ("1 2\na 1 x\n", 2),
            ("2 1\na 1\n", 1),
        ];
        for (text, line) in cases {
            match parse_embeddings(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
