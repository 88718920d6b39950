//! Canonical sketch checkpoints.
//!
//! A snapshot is UTF-8 text, one `key value` field per LF-terminated line, in
//! this fixed order:
//!
//! ```text
//! f0est-snapshot
//! version 1
//! epsilon <f64, shortest round-trip form>
//! delta <f64>
//! stream_bound <u64>
//! thresh <u64>
//! thresh_override <true|false>
//! halvings <u32>
//! items_processed <u64>
//! peak_samples <u64>
//! element_kind <u64|tokens>
//! sample_count <n>
//! sample <value>            (n lines, strictly ascending)
//! rng chacha8-splitmix64 seed=<u64> key=<64 hex> stream=<u64> word_pos=<u128> buffer=<16 hex> buffered_bits=<0..=64> bits_consumed=<u64>
//! checksum <sha256 hex of every preceding byte>
//! ```
//!
//! `u64` samples are decimal; token samples are lowercase hex of their bytes,
//! so ascending order is byte-lexicographic in both the value and the text.
//! Reading re-serialises the parsed snapshot and rejects any input that is
//! not byte-identical to it.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::formats::Token;
use crate::randomness::{RandomSource, RngState, GENERATOR_NAME};
use crate::sketch::{Element, SketchConfig, SketchState};

pub const SNAPSHOT_MAGIC: &str = "f0est-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("a failed sketch cannot be checkpointed")]
    FailedState,
    #[error("not a snapshot (missing {SNAPSHOT_MAGIC} header)")]
    NotASnapshot,
    #[error("unsupported snapshot version {found} (expected {SNAPSHOT_VERSION})")]
    Version { found: String },
    #[error("checksum mismatch")]
    Checksum,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("samples are not in strictly ascending order")]
    NonCanonicalOrder,
    #[error("snapshot is not in canonical form")]
    NonCanonical,
    #[error("snapshot holds {found} elements, expected {expected}")]
    ElementKind { expected: &'static str, found: String },
    #[error("unknown generator {0:?}")]
    Generator(String),
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

/// Element types that can be written into a snapshot.
pub trait SnapshotElement: Element {
    const KIND: &'static str;
    fn encode(&self) -> String;
    fn decode(text: &str) -> Option<Self>;
}

impl SnapshotElement for u64 {
    const KIND: &'static str = "u64";

    fn encode(&self) -> String {
        self.to_string()
    }

    fn decode(text: &str) -> Option<Self> {
        let v: u64 = text.parse().ok()?;
        (v.to_string() == text).then_some(v)
    }
}

impl SnapshotElement for Token {
    const KIND: &'static str = "tokens";

    fn encode(&self) -> String {
        hex::encode(self)
    }

    fn decode(text: &str) -> Option<Self> {
        hex::decode(text).ok()
    }
}

fn format_rng(state: &RngState) -> String {
    format!(
        "rng {GENERATOR_NAME} seed={} key={} stream={} word_pos={} buffer={:016x} buffered_bits={} bits_consumed={}",
        state.seed,
        hex::encode(state.key),
        state.stream,
        state.word_pos,
        state.buffer,
        state.buffered_bits,
        state.bits_consumed
    )
}

/// Serialises a live sketch and its coin source.
pub fn snapshot_write<E: SnapshotElement>(
    state: &SketchState<E>,
    rng: &RandomSource,
) -> Result<Vec<u8>, SnapshotError> {
    if state.is_failed() {
        return Err(SnapshotError::FailedState);
    }
    let config = state.config();
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(SNAPSHOT_MAGIC.to_string());
    line(format!("version {SNAPSHOT_VERSION}"));
    line(format!("epsilon {:?}", config.epsilon()));
    line(format!("delta {:?}", config.delta()));
    line(format!("stream_bound {}", config.stream_bound()));
    line(format!("thresh {}", config.thresh()));
    line(format!("thresh_override {}", config.thresh_overridden()));
    line(format!("halvings {}", state.halvings()));
    line(format!("items_processed {}", state.items_processed()));
    line(format!("peak_samples {}", state.peak_samples()));
    line(format!("element_kind {}", E::KIND));
    line(format!("sample_count {}", state.sample_count()));
    for s in state.sorted_samples() {
        line(format!("sample {}", s.encode()));
    }
    line(format_rng(&rng.state()));
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    out.push_str(&format!("checksum {digest}\n"));
    Ok(out.into_bytes())
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn malformed(&self, reason: impl Into<String>) -> SnapshotError {
        SnapshotError::Malformed { line: self.pos, reason: reason.into() }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, SnapshotError> {
        let line = self.lines.get(self.pos).copied();
        self.pos += 1;
        let line = line.ok_or_else(|| self.malformed(format!("missing {key}")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.malformed(format!("expected {key}")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, SnapshotError> {
        let text = self.field(key)?;
        text.parse().map_err(|_| self.malformed(format!("bad {key} value {text:?}")))
    }
}

fn parse_rng(text: &str, lines: &Lines<'_>) -> Result<RngState, SnapshotError> {
    let mut parts = text.split(' ');
    let name = parts.next().unwrap_or_default();
    if name != GENERATOR_NAME {
        return Err(SnapshotError::Generator(name.to_string()));
    }
    let mut next = |key: &str| -> Result<&str, SnapshotError> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .ok_or_else(|| lines.malformed(format!("rng: expected {key}=")))
    };
    let bad = |key: &str| lines.malformed(format!("rng: bad {key}"));
    let seed = next("seed")?.parse().map_err(|_| bad("seed"))?;
    let key_hex = next("key")?;
    let key: [u8; 32] = hex::decode(key_hex)
        .ok()
        .and_then(|k| k.try_into().ok())
        .ok_or_else(|| bad("key"))?;
    let stream = next("stream")?.parse().map_err(|_| bad("stream"))?;
    let word_pos = next("word_pos")?.parse().map_err(|_| bad("word_pos"))?;
    let buffer = u64::from_str_radix(next("buffer")?, 16).map_err(|_| bad("buffer"))?;
    let buffered_bits = next("buffered_bits")?.parse().map_err(|_| bad("buffered_bits"))?;
    let bits_consumed = next("bits_consumed")?.parse().map_err(|_| bad("bits_consumed"))?;
    if parts.next().is_some() {
        return Err(lines.malformed("rng: trailing fields"));
    }
    Ok(RngState { seed, key, stream, word_pos, buffer, buffered_bits, bits_consumed })
}

fn split_checksum(bytes: &[u8]) -> Result<(&str, &str), SnapshotError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SnapshotError::NotASnapshot)?;
    let body_end = text
        .strip_suffix('\n')
        .and_then(|t| t.rfind('\n'))
        .map(|i| i + 1)
        .ok_or(SnapshotError::Checksum)?;
    let (body, tail) = text.split_at(body_end);
    let digest = tail
        .strip_prefix("checksum ")
        .and_then(|t| t.strip_suffix('\n'))
        .ok_or(SnapshotError::Checksum)?;
    Ok((body, digest))
}

/// Element kind recorded in a snapshot, read without full validation.
pub fn snapshot_element_kind(bytes: &[u8]) -> Result<String, SnapshotError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SnapshotError::NotASnapshot)?;
    if text.lines().next() != Some(SNAPSHOT_MAGIC) {
        return Err(SnapshotError::NotASnapshot);
    }
    text.lines()
        .find_map(|l| l.strip_prefix("element_kind "))
        .map(str::to_string)
        .ok_or(SnapshotError::Malformed { line: 0, reason: "missing element_kind".into() })
}

/// Parses a canonical snapshot back into a sketch and its coin source.
pub fn snapshot_read<E: SnapshotElement>(
    bytes: &[u8],
) -> Result<(SketchState<E>, RandomSource), SnapshotError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SnapshotError::NotASnapshot)?;
    let mut header = text.lines();
    if header.next() != Some(SNAPSHOT_MAGIC) {
        return Err(SnapshotError::NotASnapshot);
    }
    match header.next().and_then(|l| l.strip_prefix("version ")) {
        Some(v) if v == SNAPSHOT_VERSION.to_string() => {}
        Some(v) => return Err(SnapshotError::Version { found: v.to_string() }),
        None => return Err(SnapshotError::Malformed { line: 1, reason: "missing version".into() }),
    }

    let (body, digest) = split_checksum(bytes)?;
    if hex::encode(Sha256::digest(body.as_bytes())) != digest {
        return Err(SnapshotError::Checksum);
    }

    let mut lines = Lines { lines: body.lines().collect(), pos: 2 };
    let epsilon: f64 = lines.parse("epsilon")?;
    let delta: f64 = lines.parse("delta")?;
    let stream_bound: u64 = lines.parse("stream_bound")?;
    let thresh: u64 = lines.parse("thresh")?;
    let overridden: bool = lines.parse("thresh_override")?;
    let halvings: u32 = lines.parse("halvings")?;
    let items_processed: u64 = lines.parse("items_processed")?;
    let peak_samples: u64 = lines.parse("peak_samples")?;
    let kind = lines.field("element_kind")?;
    if kind != E::KIND {
        return Err(SnapshotError::ElementKind { expected: E::KIND, found: kind.to_string() });
    }
    let count: usize = lines.parse("sample_count")?;
    if count as u64 >= thresh {
        return Err(SnapshotError::Inconsistent("sample_count must be below thresh".into()));
    }
    let mut samples: Vec<E> = Vec::with_capacity(count);
    for _ in 0..count {
        let text = lines.field("sample")?;
        let value = E::decode(text).ok_or_else(|| lines.malformed(format!("bad sample {text:?}")))?;
        if samples.last().is_some_and(|prev| *prev >= value) {
            return Err(SnapshotError::NonCanonicalOrder);
        }
        samples.push(value);
    }
    let rng_text = lines.field("rng")?;
    let rng_state = parse_rng(rng_text, &lines)?;
    if lines.pos != lines.lines.len() {
        return Err(lines.malformed("unexpected trailing line"));
    }

    let base = SketchConfig::new(epsilon, delta, stream_bound)
        .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;
    let config = if overridden {
        base.with_thresh_override(thresh)
            .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?
    } else if base.thresh() == thresh {
        base
    } else {
        return Err(SnapshotError::Inconsistent(format!(
            "thresh {thresh} does not match the formula value {}",
            base.thresh()
        )));
    };
    let state = SketchState::from_parts(config, samples, halvings, items_processed, peak_samples)
        .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;
    let rng = RandomSource::from_state(&rng_state)
        .ok_or_else(|| SnapshotError::Inconsistent("rng state is invalid".into()))?;

    if snapshot_write(&state, &rng)? != bytes {
        return Err(SnapshotError::NonCanonical);
    }
    Ok((state, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::BitSource;

    fn live_state() -> (SketchState<u64>, RandomSource) {
        let config = SketchConfig::new(0.5, 0.5, 10_000).unwrap();
        let mut state = SketchState::new(config);
        let mut rng = RandomSource::new(12);
        state.process_stream(0..3000u64, &mut rng).unwrap();
        (state, rng)
    }

    fn reseal(body: &str) -> Vec<u8> {
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        format!("{body}checksum {digest}\n").into_bytes()
    }

    fn body_of(bytes: &[u8]) -> String {
        split_checksum(bytes).unwrap().0.to_string()
    }

    #[test]
    fn fresh_state_snapshot() {
        let state = SketchState::<u64>::new(SketchConfig::new(0.5, 0.5, 1).unwrap());
        let bytes = snapshot_write(&state, &RandomSource::new(0)).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\nhalvings 0\n"));
        assert!(text.contains("\nsample_count 0\n"));
        assert!(text.contains("\nthresh 192\n"));
        let (back, _) = snapshot_read::<u64>(&bytes).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn canonical_round_trip() {
        let (state, rng) = live_state();
        assert!(state.halvings() > 0);
        let bytes = snapshot_write(&state, &rng).unwrap();
        let (s2, r2) = snapshot_read::<u64>(&bytes).unwrap();
        assert_eq!(s2, state);
        assert_eq!(r2, rng);
        assert_eq!(snapshot_write(&s2, &r2).unwrap(), bytes);
    }

    #[test]
    fn token_samples_round_trip() {
        let config = SketchConfig::new(0.5, 0.5, 100).unwrap();
        let mut state: SketchState<Token> = SketchState::new(config);
        let mut rng = RandomSource::new(3);
        for t in ["b", "", "a\n", "zz"] {
            state.process(t.as_bytes().to_vec(), &mut rng).unwrap();
        }
        let bytes = snapshot_write(&state, &rng).unwrap();
        let (back, _) = snapshot_read::<Token>(&bytes).unwrap();
        assert_eq!(back, state);
        assert!(matches!(
            snapshot_read::<u64>(&bytes),
            Err(SnapshotError::ElementKind { .. })
        ));
    }

    #[test]
    fn failed_state_is_not_checkpointable() {
        let config = SketchConfig::new(0.5, 0.5, 100).unwrap().with_thresh_override(2).unwrap();
        let mut state = SketchState::new(config);
        let mut rng = crate::randomness::ScriptedSource::from_digits("00");
        state.process_stream([1u64, 2], &mut rng).unwrap();
        assert_eq!(
            snapshot_write(&state, &RandomSource::new(0)),
            Err(SnapshotError::FailedState)
        );
    }

    #[test]
    fn checksum_detects_tampering() {
        let (state, rng) = live_state();
        let mut bytes = snapshot_write(&state, &rng).unwrap();
        let pos = bytes.windows(9).position(|w| w == b"halvings ").unwrap() + 9;
        bytes[pos] = if bytes[pos] == b'9' { b'8' } else { b'9' };
        assert_eq!(snapshot_read::<u64>(&bytes), Err(SnapshotError::Checksum));
    }

    #[test]
    fn version_mismatch() {
        let (state, rng) = live_state();
        let body = body_of(&snapshot_write(&state, &rng).unwrap()).replace("version 1\n", "version 2\n");
        assert_eq!(
            snapshot_read::<u64>(&reseal(&body)),
            Err(SnapshotError::Version { found: "2".into() })
        );
    }

    #[test]
    fn unsorted_samples_rejected() {
        let (state, rng) = live_state();
        let body = body_of(&snapshot_write(&state, &rng).unwrap());
        let mut lines: Vec<&str> = body.lines().collect();
        let first = lines.iter().position(|l| l.starts_with("sample ")).unwrap();
        lines.swap(first, first + 1);
        let swapped = lines.join("\n") + "\n";
        assert_eq!(snapshot_read::<u64>(&reseal(&swapped)), Err(SnapshotError::NonCanonicalOrder));
    }

    #[test]
    fn noncanonical_number_rejected() {
        let (state, rng) = live_state();
        let body = body_of(&snapshot_write(&state, &rng).unwrap()).replace("epsilon 0.5\n", "epsilon 0.50\n");
        assert_eq!(snapshot_read::<u64>(&reseal(&body)), Err(SnapshotError::NonCanonical));
    }

    #[test]
    fn thresh_must_match_formula() {
        let (state, rng) = live_state();
        let t = state.config().thresh();
        let body = body_of(&snapshot_write(&state, &rng).unwrap())
            .replace(&format!("thresh {t}\n"), &format!("thresh {}\n", t + 1));
        assert!(matches!(
            snapshot_read::<u64>(&reseal(&body)),
            Err(SnapshotError::Inconsistent(_))
        ));
    }

    #[test]
    fn resume_continues_the_coin_sequence() {
        let (state, mut rng) = live_state();
        let bytes = snapshot_write(&state, &rng).unwrap();
        let (_, mut resumed) = snapshot_read::<u64>(&bytes).unwrap();
        for _ in 0..200 {
            assert_eq!(rng.fair_coin(), resumed.fair_coin());
        }
    }
}
