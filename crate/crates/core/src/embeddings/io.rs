//! Embedding model persistence.
//!
//! Binary layout (all integers little-endian u32):
//! magic `EMB1`, format version, |V|, d, trained epochs, then |V|
//! length-prefixed UTF-8 tokens, then the input and output matrices as
//! row-major little-endian f32.
//!
//! The text format is the common interchange one: a `|V| d` header line,
//! then `token v1 .. vd` per line (input vectors only).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Token;
use crate::embeddings::EmbeddingModel;
use crate::error::{EmendError, Result};

const MAGIC: &[u8; 4] = b"EMB1";
const FORMAT_VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, value: u32, path: &Path) -> Result<()> {
    w.write_all(&value.to_le_bytes())
        .map_err(|e| EmendError::io(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            EmendError::parse(path, 0, format!("truncated file while reading {what}"))
        } else {
            EmendError::io(path, e)
        }
    })
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_matrix_f32(w: &mut impl Write, values: &[f64], path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| EmendError::io(path, e))
}

fn read_matrix_f32(r: &mut impl Read, len: usize, path: &Path, what: &str) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

impl EmbeddingModel {
    /// Writes the versioned binary format. Vector components round to f32.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC).map_err(|e| EmendError::io(path, e))?;
        write_u32(&mut w, FORMAT_VERSION, path)?;
        write_u32(&mut w, self.len() as u32, path)?;
        write_u32(&mut w, self.dim() as u32, path)?;
        write_u32(&mut w, self.trained_epochs(), path)?;
        for token in self.vocab() {
            let bytes = token.as_str().as_bytes();
            write_u32(&mut w, bytes.len() as u32, path)?;
            w.write_all(bytes).map_err(|e| EmendError::io(path, e))?;
        }
        write_matrix_f32(&mut w, self.input_matrix(), path)?;
        write_matrix_f32(&mut w, self.output_matrix(), path)?;
        w.flush().map_err(|e| EmendError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<EmbeddingModel> {
        let file = File::open(path).map_err(|e| EmendError::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, path, "magic")?;
        if &magic != MAGIC {
            return Err(EmendError::parse(path, 0, "not an embedding model file"));
        }
        let version = read_u32(&mut r, path, "format version")?;
        if version != FORMAT_VERSION {
            return Err(EmendError::VersionMismatch {
                kind: "embedding model",
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let vocab_len = read_u32(&mut r, path, "vocabulary size")? as usize;
        let dim = read_u32(&mut r, path, "dimension")? as usize;
        let epochs = read_u32(&mut r, path, "epoch count")?;

        let mut vocab = Vec::with_capacity(vocab_len);
        for i in 0..vocab_len {
            let len = read_u32(&mut r, path, "token length")? as usize;
            if len > 1 << 20 {
                return Err(EmendError::parse(path, 0, "implausible token length"));
            }
            let mut bytes = vec![0u8; len];
            read_exact(&mut r, &mut bytes, path, "token bytes")?;
            let text = String::from_utf8(bytes)
                .map_err(|_| EmendError::parse(path, 0, format!("token {i} is not UTF-8")))?;
            let token = Token::new(text)
                .ok_or_else(|| EmendError::parse(path, 0, format!("token {i} is invalid")))?;
            vocab.push(token);
        }

        let input = read_matrix_f32(&mut r, vocab_len * dim, path, "input matrix")?;
        let output = read_matrix_f32(&mut r, vocab_len * dim, path, "output matrix")?;
        Ok(EmbeddingModel::from_parts(vocab, dim, input, output)?.with_trained_epochs(epochs))
    }

    /// Writes the text interchange format (input vectors only, as f32).
    pub fn export_text(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{} {}", self.len(), self.dim()).map_err(|e| EmendError::io(path, e))?;
        for (i, token) in self.vocab().iter().enumerate() {
            write!(w, "{token}").map_err(|e| EmendError::io(path, e))?;
            for &v in self.input_vector(i) {
                write!(w, " {}", v as f32).map_err(|e| EmendError::io(path, e))?;
            }
            writeln!(w).map_err(|e| EmendError::io(path, e))?;
        }
        w.flush().map_err(|e| EmendError::io(path, e))
    }

    /// Reads the text interchange format. Output vectors are initialized to
    /// a copy of the input vectors, since the format does not carry them.
    pub fn import_text(path: &Path) -> Result<EmbeddingModel> {
        let text = std::fs::read_to_string(path).map_err(|e| EmendError::io(path, e))?;
        let mut lines = text.lines().enumerate();

        let (_, header) = lines
            .next()
            .ok_or_else(|| EmendError::parse(path, 1, "empty file"))?;
        let mut parts = header.split_whitespace();
        let (Some(v), Some(d)) = (parts.next(), parts.next()) else {
            return Err(EmendError::parse(path, 1, "expected `|V| d` header"));
        };
        let vocab_len: usize = v
            .parse()
            .map_err(|_| EmendError::parse(path, 1, "invalid vocabulary size"))?;
        let dim: usize = d
            .parse()
            .map_err(|_| EmendError::parse(path, 1, "invalid dimension"))?;

        let mut vocab = Vec::with_capacity(vocab_len);
        let mut input = Vec::with_capacity(vocab_len * dim);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .and_then(Token::new)
                .ok_or_else(|| EmendError::parse(path, lineno, "invalid token"))?;
            let mut row = Vec::with_capacity(dim);
            for field in fields {
                let value: f32 = field.parse().map_err(|_| {
                    EmendError::parse(path, lineno, format!("invalid component {field:?}"))
                })?;
                row.push(value as f64);
            }
            if row.len() != dim {
                return Err(EmendError::parse(
                    path,
                    lineno,
                    format!("expected {dim} components, found {}", row.len()),
                ));
            }
            vocab.push(token);
            input.extend_from_slice(&row);
        }
        if vocab.len() != vocab_len {
            return Err(EmendError::parse(
                path,
                0,
                format!("header claims {vocab_len} tokens, file has {}", vocab.len()),
            ));
        }
        let output = input.clone();
        EmbeddingModel::from_parts(vocab, dim, input, output)
    }
}
