//! Checkpoint persistence.
//!
//! Layout: magic `S2S1`, format version u32, embed/hidden/layers u32, step
//! count u64, seed u64, character inventory (count u32 then u32 code
//! points), parameter count u64, then the flat parameter vector as
//! little-endian f32 in `Layout` order. All integers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{EmendError, Result};
use crate::nmt::params::Seq2SeqCheckpoint;
use crate::nmt::vocab::CharVocab;

const MAGIC: &[u8; 4] = b"S2S1";
const FORMAT_VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, value: u32, path: &Path) -> Result<()> {
    w.write_all(&value.to_le_bytes()).map_err(|e| EmendError::io(path, e))
}

fn write_u64(w: &mut impl Write, value: u64, path: &Path) -> Result<()> {
    w.write_all(&value.to_le_bytes()).map_err(|e| EmendError::io(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            EmendError::parse(path, 0, format!("truncated checkpoint while reading {what}"))
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

fn read_u64(r: &mut impl Read, path: &Path, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, path, what)?;
    Ok(u64::from_le_bytes(buf))
}

impl Seq2SeqCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| EmendError::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC).map_err(|e| EmendError::io(path, e))?;
        write_u32(&mut w, FORMAT_VERSION, path)?;
        write_u32(&mut w, self.embed as u32, path)?;
        write_u32(&mut w, self.hidden as u32, path)?;
        write_u32(&mut w, self.layers as u32, path)?;
        write_u64(&mut w, self.steps, path)?;
        write_u64(&mut w, self.seed, path)?;
        write_u32(&mut w, self.char_vocab.chars().len() as u32, path)?;
        for &c in self.char_vocab.chars() {
            write_u32(&mut w, c as u32, path)?;
        }
        write_u64(&mut w, self.params.len() as u64, path)?;
        let mut buf = Vec::with_capacity(self.params.len() * 4);
        for &p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| EmendError::io(path, e))?;
        w.flush().map_err(|e| EmendError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Seq2SeqCheckpoint> {
        let file = File::open(path).map_err(|e| EmendError::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, path, "magic")?;
        if &magic != MAGIC {
            return Err(EmendError::parse(path, 0, "not a corrector checkpoint file"));
        }
        let version = read_u32(&mut r, path, "format version")?;
        if version != FORMAT_VERSION {
            return Err(EmendError::VersionMismatch {
                kind: "checkpoint",
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let embed = read_u32(&mut r, path, "embed dim")? as usize;
        let hidden = read_u32(&mut r, path, "hidden dim")? as usize;
        let layers = read_u32(&mut r, path, "layer count")? as usize;
        let steps = read_u64(&mut r, path, "step count")?;
        let seed = read_u64(&mut r, path, "seed")?;

        let char_count = read_u32(&mut r, path, "character count")? as usize;
        if char_count > 1 << 20 {
            return Err(EmendError::parse(path, 0, "implausible character count"));
        }
        let mut chars = Vec::with_capacity(char_count);
        for i in 0..char_count {
            let code = read_u32(&mut r, path, "character")?;
            let c = char::from_u32(code).ok_or_else(|| {
                EmendError::parse(path, 0, format!("character {i} has invalid code point {code}"))
            })?;
            chars.push(c);
        }
        let char_vocab = CharVocab::from_chars(chars)?;

        let param_count = read_u64(&mut r, path, "parameter count")? as usize;
        if param_count > 1 << 32 {
            return Err(EmendError::parse(path, 0, "implausible parameter count"));
        }
        let mut buf = vec![0u8; param_count * 4];
        read_exact(&mut r, &mut buf, path, "parameters")?;
        let params: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();

        let checkpoint = Seq2SeqCheckpoint {
            char_vocab,
            embed,
            hidden,
            layers,
            params,
            steps,
            seed,
        };
        checkpoint.validate()?;
        Ok(checkpoint)
    }
}
