//! Stream file formats.
//!
//! * `tokens`: UTF-8 text, one element per LF-terminated line. A final line
//!   without LF is still an element; the LF ending the last line does not
//!   start an empty one. Bytes other than LF (including CR) belong to the token.
//! * `u64le`: headerless little-endian 8-byte unsigned integers.

use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use thiserror::Error;

/// A token-mode element: the raw bytes of one line.
pub type Token = Vec<u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputMode {
    #[default]
    Tokens,
    U64Le,
}

impl InputMode {
    pub fn name(&self) -> &'static str {
        match self {
            InputMode::Tokens => "tokens",
            InputMode::U64Le => "u64le",
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tokens" => Ok(InputMode::Tokens),
            "u64le" => Ok(InputMode::U64Le),
            other => Err(format!("unknown input mode {other:?} (expected tokens or u64le)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("read error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: token is not valid UTF-8")]
    InvalidUtf8 { line: u64 },
    #[error("record {record}: truncated u64le record ({bytes} trailing bytes)")]
    TruncatedRecord { record: u64, bytes: usize },
}

/// Iterates the tokens of a `tokens`-format stream.
pub struct TokenReader<R> {
    inner: R,
    line: u64,
}

impl<R: BufRead> TokenReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line: 0 }
    }
}

impl<R: BufRead> Iterator for TokenReader<R> {
    type Item = Result<Token, InputError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = Vec::new();
        match self.inner.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                self.line += 1;
                if buf.last() == Some(&b'\n') {
                    buf.pop();
                }
                if std::str::from_utf8(&buf).is_err() {
                    return Some(Err(InputError::InvalidUtf8 { line: self.line }));
                }
                Some(Ok(buf))
            }
            Err(e) => Some(Err(e.into())),
        }
    }
}

/// Iterates the records of a `u64le`-format stream.
pub struct U64LeReader<R> {
    inner: R,
    record: u64,
    done: bool,
}

impl<R: Read> U64LeReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, record: 0, done: false }
    }
}

impl<R: Read> Iterator for U64LeReader<R> {
    type Item = Result<u64, InputError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = [0u8; 8];
        let mut filled = 0;
        while filled < 8 {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        match filled {
            0 => {
                self.done = true;
                None
            }
            8 => {
                self.record += 1;
                Some(Ok(u64::from_le_bytes(buf)))
            }
            bytes => {
                self.done = true;
                Some(Err(InputError::TruncatedRecord { record: self.record + 1, bytes }))
            }
        }
    }
}

pub fn write_tokens<'a, W: Write>(
    out: &mut W,
    tokens: impl IntoIterator<Item = &'a [u8]>,
) -> io::Result<()> {
    for t in tokens {
        out.write_all(t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_u64le<W: Write>(out: &mut W, values: impl IntoIterator<Item = u64>) -> io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a generated id stream in `mode`; token mode uses decimal ids.
pub fn write_stream<W: Write>(out: &mut W, mode: InputMode, values: &[u64]) -> io::Result<()> {
    match mode {
        InputMode::Tokens => {
            for v in values {
                writeln!(out, "{v}")?;
            }
            Ok(())
        }
        InputMode::U64Le => write_u64le(out, values.iter().copied()),
    }
}
