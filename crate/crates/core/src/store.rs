//! Shared little-endian persistence plumbing for the model file formats.

use std::io::{self, Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access model file {path}: {source}")]
    MissingFile { path: String, source: io::Error },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model file truncated while reading {0}")]
    Truncated(String),
    #[error("{found} trailing bytes after the model payload")]
    TrailingData { found: usize },
    #[error("I/O failure on model file {path}: {source}")]
    Io { path: String, source: io::Error },
}

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.write_u16::<LittleEndian>(version).expect("vec write");
        Writer { buf }
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.write_u16::<LittleEndian>(v).expect("vec write");
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.write_u32::<LittleEndian>(v).expect("vec write");
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LittleEndian>(v).expect("vec write");
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).expect("vec write");
    }

    pub fn f64_all(&mut self, vs: impl IntoIterator<Item = f64>) {
        for v in vs {
            self.f64(v);
        }
    }

    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Length-prefixed UTF-8 blob.
    pub fn text(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.raw(s.as_bytes());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    len: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 4], version: u16) -> Result<Self, StoreError> {
        let mut r = Reader { cur: Cursor::new(bytes), len: bytes.len() };
        let mut got = [0u8; 4];
        r.cur
            .read_exact(&mut got)
            .map_err(|_| StoreError::Malformed("file shorter than the magic number".into()))?;
        if &got != magic {
            return Err(StoreError::Malformed(format!(
                "magic mismatch: expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let v = r.u16("version")?;
        if v != version {
            return Err(StoreError::Malformed(format!("unsupported version {v}")));
        }
        Ok(r)
    }

    fn cut(&self, what: &str) -> StoreError {
        StoreError::Truncated(what.to_string())
    }

    pub fn u16(&mut self, what: &str) -> Result<u16, StoreError> {
        self.cur.read_u16::<LittleEndian>().map_err(|_| self.cut(what))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        self.cur.read_u32::<LittleEndian>().map_err(|_| self.cut(what))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        self.cur.read_u64::<LittleEndian>().map_err(|_| self.cut(what))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64, StoreError> {
        self.cur.read_f64::<LittleEndian>().map_err(|_| self.cut(what))
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>, StoreError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64(what)?);
        }
        Ok(out)
    }

    pub fn raw(&mut self, n: usize, what: &str) -> Result<Vec<u8>, StoreError> {
        let mut out = vec![0u8; n];
        self.cur.read_exact(&mut out).map_err(|_| self.cut(what))?;
        Ok(out)
    }

    pub fn text(&mut self, what: &str) -> Result<String, StoreError> {
        let n = self.u32(what)? as usize;
        let raw = self.raw(n, what)?;
        String::from_utf8(raw).map_err(|_| StoreError::Malformed(format!("{what} is not UTF-8")))
    }

    pub fn finish(self) -> Result<(), StoreError> {
        let left = self.len - self.cur.position() as usize;
        if left != 0 {
            return Err(StoreError::TrailingData { found: left });
        }
        Ok(())
    }
}

pub(crate) fn write_file(bytes: &[u8], path: &Path) -> Result<(), StoreError> {
    std::fs::write(path, bytes)
        .map_err(|source| StoreError::Io { path: path.display().to_string(), source })
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, StoreError> {
    std::fs::read(path)
        .map_err(|source| StoreError::MissingFile { path: path.display().to_string(), source })
}
