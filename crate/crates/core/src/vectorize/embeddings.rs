//! Pre-trained word vector tables in the word2vec binary and text layouts.
//!
//! Binary layout: an ASCII header `"<vocab_size> <dim>\n"`, then for every
//! word the token bytes, a single `0x20`, and `dim` little-endian `f32`s.
//! The reader also accepts a newline before each token, which is what the
//! reference word2vec tool emits after every vector.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::Language;

const MAX_TOKEN_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Binary,
    Text,
}

impl VectorFormat {
    /// Guesses the format from a file extension: `.txt`/`.vec` are text,
    /// anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => VectorFormat::Text,
            _ => VectorFormat::Binary,
        }
    }
}

/// Immutable token → vector lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    language: Language,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, language: Language, entries: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let mut builder = Builder::new(dim, language, entries.len())?;
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Schema(format!(
                    "vector for {token:?} has {} components, expected {dim}",
                    vector.len()
                )));
            }
            builder.push(token, &vector, 0)?;
        }
        builder.finish(0)
    }

    pub fn load(path: &Path, format: VectorFormat, language: Language) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let reader = BufReader::new(file);
        match format {
            VectorFormat::Binary => Self::read_binary(reader, language),
            VectorFormat::Text => Self::read_text(reader, language),
        }
    }

    pub fn read_binary<R: Read>(reader: R, language: Language) -> Result<Self> {
        let mut r = OffsetReader { inner: reader, offset: 0 };
        let (count, dim) = parse_header(&r.read_line(64)?.ok_or_else(|| Error::load(0, "empty file"))?, 0)?;
        let mut builder = Builder::new(dim, language, count)?;
        let mut vector = vec![0f32; dim];
        let mut raw = vec![0u8; dim * 4];
        for n in 0..count {
            let start = r.offset;
            let token = match r.read_token()? {
                Some(t) => t,
                None => {
                    return Err(Error::load(
                        start,
                        format!("truncated file: header declares {count} words, found {n}"),
                    ))
                }
            };
            let payload_at = r.offset;
            r.read_exact(&mut raw).map_err(|e| match e.kind() {
                ErrorKind::UnexpectedEof => Error::load(
                    payload_at,
                    format!("truncated vector payload for {token:?}: expected {} bytes", dim * 4),
                ),
                _ => Error::Io(e),
            })?;
            for (v, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            }
            builder.push(token, &vector, start)?;
        }
        r.expect_only_whitespace()?;
        builder.finish(r.offset)
    }

    pub fn read_text<R: Read>(reader: R, language: Language) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut line = String::new();
        let mut offset = 0u64;
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::load(0, "empty file"));
        }
        let (count, dim) = parse_header(line.trim_end_matches(['\n', '\r']).as_bytes(), 0)?;
        offset += n as u64;
        let mut builder = Builder::new(dim, language, count)?;
        let mut vector = Vec::with_capacity(dim);
        let mut seen = 0usize;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            let at = offset;
            offset += n as u64;
            let content = line.trim_end_matches(['\n', '\r']);
            if content.trim().is_empty() {
                continue;
            }
            if seen == count {
                return Err(Error::load(at, format!("more than the {count} declared words")));
            }
            let mut fields = content.split(' ');
            let token = fields.next().unwrap_or_default().to_owned();
            vector.clear();
            for field in fields.filter(|f| !f.is_empty()) {
                let v: f32 = field
                    .parse()
                    .map_err(|_| Error::load(at, format!("bad number {field:?} for {token:?}")))?;
                vector.push(v);
            }
            if vector.len() != dim {
                return Err(Error::load(
                    at,
                    format!("dimension mismatch for {token:?}: {} values, expected {dim}", vector.len()),
                ));
            }
            builder.push(token, &vector, at)?;
            seen += 1;
        }
        if seen < count {
            return Err(Error::load(
                offset,
                format!("truncated file: header declares {count} words, found {seen}"),
            ));
        }
        builder.finish(offset)
    }

    pub fn save(&self, path: &Path, format: VectorFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        match format {
            VectorFormat::Binary => self.write_binary(&mut w)?,
            VectorFormat::Text => self.write_text(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.tokens.len(), self.dim)?;
        for (i, token) in self.tokens.iter().enumerate() {
            w.write_all(token.as_bytes())?;
            w.write_all(b" ")?;
            for v in self.vector_at(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.tokens.len(), self.dim)?;
        for (i, token) in self.tokens.iter().enumerate() {
            w.write_all(token.as_bytes())?;
            for v in self.vector_at(i) {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.vector_at(i))
    }

    fn vector_at(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// SHA-256 of the binary serialization, hex encoded.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        self.write_binary(HashWriter(&mut hasher)).expect("hashing cannot fail");
        hex::encode(hasher.finalize())
    }
}

struct HashWriter<'a>(&'a mut Sha256);

impl Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

struct Builder {
    dim: usize,
    language: Language,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl Builder {
    fn new(dim: usize, language: Language, capacity: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Schema("embedding dimension must be positive".into()));
        }
        Ok(Builder {
            dim,
            language,
            tokens: Vec::with_capacity(capacity),
            index: HashMap::with_capacity(capacity),
            data: Vec::with_capacity(capacity.saturating_mul(dim).min(1 << 28)),
        })
    }

    fn push(&mut self, token: String, vector: &[f32], offset: u64) -> Result<()> {
        if token.is_empty() {
            return Err(Error::load(offset, "empty token"));
        }
        if self.index.contains_key(&token) {
            return Err(Error::load(offset, format!("duplicate token {token:?}")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    fn finish(self, offset: u64) -> Result<EmbeddingTable> {
        if self.tokens.is_empty() {
            return Err(Error::load(offset, "vocabulary is empty"));
        }
        Ok(EmbeddingTable {
            dim: self.dim,
            language: self.language,
            tokens: self.tokens,
            index: self.index,
            data: self.data,
        })
    }
}

fn parse_header(line: &[u8], offset: u64) -> Result<(usize, usize)> {
    let text = std::str::from_utf8(line).map_err(|_| Error::load(offset, "header is not ASCII"))?;
    let mut parts = text.split_whitespace();
    let parse = |p: Option<&str>, what: &str| -> Result<usize> {
        p.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::load(offset, format!("malformed header {text:?}: bad {what}")))
    };
    let count = parse(parts.next(), "vocabulary size")?;
    let dim = parse(parts.next(), "dimension")?;
    if parts.next().is_some() {
        return Err(Error::load(offset, format!("malformed header {text:?}: trailing fields")));
    }
    if dim == 0 {
        return Err(Error::load(offset, "malformed header: dimension is zero"));
    }
    Ok((count, dim))
}

struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> OffsetReader<R> {
    fn read_byte(&mut self) -> std::io::Result<Option<u8>> {
        let mut b = [0u8; 1];
        loop {
            return match self.inner.read(&mut b) {
                Ok(0) => Ok(None),
                Ok(_) => {
                    self.offset += 1;
                    Ok(Some(b[0]))
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => Err(e),
            };
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> std::io::Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    self.offset += filled as u64;
                    return Err(ErrorKind::UnexpectedEof.into());
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_line(&mut self, limit: usize) -> Result<Option<Vec<u8>>> {
        let mut line = Vec::new();
        loop {
            match self.read_byte()? {
                None if line.is_empty() => return Ok(None),
                None => return Err(Error::load(self.offset, "header is not newline terminated")),
                Some(b'\n') => return Ok(Some(line)),
                Some(b) => {
                    if line.len() >= limit {
                        return Err(Error::load(0, "malformed header: line too long"));
                    }
                    line.push(b);
                }
            }
        }
    }

    /// Reads bytes up to the 0x20 separator. `None` at clean end of input.
    fn read_token(&mut self) -> Result<Option<String>> {
        let mut bytes = Vec::new();
        loop {
            match self.read_byte()? {
                None if bytes.is_empty() => return Ok(None),
                None => {
                    return Err(Error::load(self.offset, "truncated record: token without vector"));
                }
                Some(b'\n') if bytes.is_empty() => continue,
                Some(b' ') => break,
                Some(b) => {
                    if bytes.len() >= MAX_TOKEN_BYTES {
                        return Err(Error::load(self.offset, "token exceeds maximum length"));
                    }
                    bytes.push(b);
                }
            }
        }
        String::from_utf8(bytes)
            .map(Some)
            .map_err(|e| Error::load(self.offset, format!("token is not UTF-8: {e}")))
    }

    fn expect_only_whitespace(&mut self) -> Result<()> {
        while let Some(b) = self.read_byte()? {
            if !b.is_ascii_whitespace() {
                return Err(Error::load(self.offset - 1, "trailing data after the declared words"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(n: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|i| (format!("w{i}"), (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()))
            .collect();
        EmbeddingTable::new(dim, Language::En, entries).unwrap()
    }

    #[test]
    fn minimal_text_file() {
        let t = EmbeddingTable::read_text("2 3\na 1 0 0\nb 0 1 0".as_bytes(), Language::En).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn text_truncation_and_dim_errors() {
        let err = EmbeddingTable::read_text("5 1\na 1\nb 2\nc 3\nd 4\n".as_bytes(), Language::En).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let err = EmbeddingTable::read_text("2 3\na 1 0 0\nb 0 1\n".as_bytes(), Language::En).unwrap_err();
        match err {
            Error::Load { offset, message } => {
                assert_eq!(offset, 12);
                assert!(message.contains("dimension mismatch"));
            }
            other => panic!("unexpected {other}"),
        }

        let err = EmbeddingTable::read_text("2 1\na 1\na 2\n".as_bytes(), Language::En).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let err = EmbeddingTable::read_text("two 1\na 1\n".as_bytes(), Language::En).unwrap_err();
        assert!(err.to_string().contains("malformed header"), "{err}");
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let table = random_table(100, 17, 3);
        let mut buf = Vec::new();
        table.write_binary(&mut buf).unwrap();
        let back = EmbeddingTable::read_binary(&buf[..], Language::En).unwrap();
        for token in table.tokens() {
            let a: Vec<u32> = table.get(token).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.get(token).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(back.checksum(), table.checksum());
    }

    #[test]
    fn binary_layout_is_exact() {
        let table = EmbeddingTable::new(2, Language::En, vec![("ab".into(), vec![1.0, -2.5])]).unwrap();
        let mut buf = Vec::new();
        table.write_binary(&mut buf).unwrap();
        let mut expected = b"1 2\nab ".to_vec();
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn binary_accepts_word2vec_newlines() {
        let mut buf = b"2 1\n".to_vec();
        buf.extend_from_slice(b"a ");
        buf.extend_from_slice(&1.5f32.to_le_bytes());
        buf.extend_from_slice(b"\nb ");
        buf.extend_from_slice(&2.5f32.to_le_bytes());
        buf.push(b'\n');
        let t = EmbeddingTable::read_binary(&buf[..], Language::En).unwrap();
        assert_eq!(t.get("b"), Some(&[2.5f32][..]));
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let table = random_table(3, 4, 1);
        let mut buf = Vec::new();
        table.write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        match EmbeddingTable::read_binary(&buf[..], Language::En).unwrap_err() {
            Error::Load { offset, message } => {
                assert!(message.contains("truncated vector payload"), "{message}");
                // header(4) + 2 full records of (3 + 16) + "w2 "
                assert_eq!(offset, 4 + 2 * 19 + 3);
            }
            other => panic!("unexpected {other}"),
        }

        let mut buf = Vec::new();
        table.write_binary(&mut buf).unwrap();
        buf[0] = b'4';
        let err = EmbeddingTable::read_binary(&buf[..], Language::En).unwrap_err();
        assert!(err.to_string().contains("declares 4 words, found 3"), "{err}");
    }
}
