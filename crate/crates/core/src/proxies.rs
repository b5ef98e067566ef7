//! Compression-style complexity proxies: LZ78 phrase complexity and
//! lossless-compression bits per symbol.
//!
//! Both operate on the concatenation of a series' segments. For compression
//! each symbol is serialized as one byte (its id) and compressed at the
//! codec's maximum standard level; `bps = 8 * compressed_len / n`, container
//! headers included.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolize::{Symbol, SymbolSeries};

/// Below this length proxy values are flagged low-confidence.
pub const MIN_PROXY_LENGTH: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxyError {
    #[error("series is empty")]
    EmptySeries,
    #[error("alphabet of size {0} does not fit one byte per symbol")]
    AlphabetTooLarge(usize),
    #[error("{codec} compression failed: {message}")]
    Codec {
        codec: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Codec {
    #[serde(rename = "gzip")]
    Gzip,
    #[serde(rename = "bz2")]
    Bz2,
    #[serde(rename = "lzma")]
    Lzma,
}

impl Codec {
    pub const ALL: [Codec; 3] = [Codec::Gzip, Codec::Bz2, Codec::Lzma];

    pub fn name(self) -> &'static str {
        match self {
            Codec::Gzip => "gzip",
            Codec::Bz2 => "bz2",
            Codec::Lzma => "lzma",
        }
    }

    /// Compression level used (maximum standard level of each format).
    pub fn level(self) -> u32 {
        9
    }

    /// Container format of the compressed stream.
    pub fn container(self) -> &'static str {
        match self {
            Codec::Gzip => "gzip (deflate, mtime 0)",
            Codec::Bz2 => "bzip2 (900k blocks)",
            Codec::Lzma => "xz (single-threaded liblzma preset 9)",
        }
    }

    pub fn compress(self, bytes: &[u8]) -> Result<Vec<u8>, ProxyError> {
        let fail = |e: std::io::Error| ProxyError::Codec {
            codec: self.name(),
            message: e.to_string(),
        };
        match self {
            Codec::Gzip => {
                let mut enc = flate2::GzBuilder::new()
                    .mtime(0)
                    .write(Vec::new(), flate2::Compression::new(self.level()));
                enc.write_all(bytes).map_err(fail)?;
                enc.finish().map_err(fail)
            }
            Codec::Bz2 => {
                let mut enc =
                    bzip2::write::BzEncoder::new(Vec::new(), bzip2::Compression::new(self.level()));
                enc.write_all(bytes).map_err(fail)?;
                enc.finish().map_err(fail)
            }
            Codec::Lzma => {
                let mut enc = xz2::write::XzEncoder::new(Vec::new(), self.level());
                enc.write_all(bytes).map_err(fail)?;
                enc.finish().map_err(fail)
            }
        }
    }
}

impl std::fmt::Display for Codec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Codec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Codec::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown codec `{s}` (expected gzip, bz2 or lzma)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyMetrics {
    pub lz78_phrases: usize,
    pub lz78_normalized: f64,
    pub bps: BTreeMap<String, f64>,
    pub bps_min: f64,
    pub n: usize,
    pub low_confidence: bool,
}

/// Phrase count of the LZ78 incremental parse of `symbols`. A trailing
/// phrase that is already in the dictionary still counts.
pub fn lz78_phrases(symbols: &[Symbol]) -> usize {
    // trie edges: (node, symbol) -> child node; node 0 is the empty phrase
    let mut trie: HashMap<(u32, Symbol), u32> = HashMap::new();
    let mut phrases = 0;
    let mut node = 0u32;
    for &s in symbols {
        match trie.get(&(node, s)) {
            Some(&child) => node = child,
            None => {
                phrases += 1;
                trie.insert((node, s), phrases as u32);
                node = 0;
            }
        }
    }
    if node != 0 {
        phrases += 1;
    }
    phrases
}

pub fn lz78_phrase_count(s: &SymbolSeries) -> Result<usize, ProxyError> {
    if s.is_empty() {
        return Err(ProxyError::EmptySeries);
    }
    Ok(lz78_phrases(&s.concatenated()))
}

/// `c(n) * log_k(n) / n` for alphabet size `k`; 0 when `k < 2` or `n < 2`.
pub fn lz78_normalize(phrases: usize, n: usize, alphabet_size: usize) -> f64 {
    if alphabet_size < 2 || n < 2 {
        return 0.0;
    }
    let n = n as f64;
    phrases as f64 * n.ln() / (alphabet_size as f64).ln() / n
}

pub fn lz78_normalized(s: &SymbolSeries) -> Result<f64, ProxyError> {
    let c = lz78_phrase_count(s)?;
    Ok(lz78_normalize(c, s.total_len(), s.alphabet_size()))
}

fn symbol_bytes(s: &SymbolSeries) -> Result<Vec<u8>, ProxyError> {
    if s.alphabet_size() > 256 {
        return Err(ProxyError::AlphabetTooLarge(s.alphabet_size()));
    }
    if s.is_empty() {
        return Err(ProxyError::EmptySeries);
    }
    Ok(s.segments().iter().flatten().map(|&x| x as u8).collect())
}

pub fn compression_bps(s: &SymbolSeries, codec: Codec) -> Result<f64, ProxyError> {
    let bytes = symbol_bytes(s)?;
    let compressed = codec.compress(&bytes)?;
    Ok(8.0 * compressed.len() as f64 / bytes.len() as f64)
}

/// LZ78 and every requested codec for one series.
pub fn compute_proxies(s: &SymbolSeries, codecs: &[Codec]) -> Result<ProxyMetrics, ProxyError> {
    let symbols = s.concatenated();
    if symbols.is_empty() {
        return Err(ProxyError::EmptySeries);
    }
    let phrases = lz78_phrases(&symbols);
    let mut bps = BTreeMap::new();
    for &codec in codecs {
        bps.insert(codec.name().to_string(), compression_bps(s, codec)?);
    }
    let bps_min = bps.values().copied().fold(f64::INFINITY, f64::min);
    Ok(ProxyMetrics {
        lz78_phrases: phrases,
        lz78_normalized: lz78_normalize(phrases, symbols.len(), s.alphabet_size()),
        bps,
        bps_min: if bps_min.is_finite() {
            bps_min
        } else {
            f64::NAN
        },
        n: symbols.len(),
        low_confidence: symbols.len() < MIN_PROXY_LENGTH,
    })
}
