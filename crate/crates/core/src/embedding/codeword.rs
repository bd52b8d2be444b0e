//! Valid register bitstrings and their decoding to grid values.

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, Scheme};

/// What to do with a register that is not a codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodePolicy {
    /// Reject non-codewords (one-hot always behaves this way).
    Strict,
    /// Unary registers decode by popcount.
    Lenient,
}

impl DecodePolicy {
    /// Unary: lenient; one-hot: strict; Hamming: every string is valid.
    pub fn default_for(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Unary | Scheme::Hamming => DecodePolicy::Lenient,
            Scheme::OneHot => DecodePolicy::Strict,
        }
    }
}

impl std::str::FromStr for DecodePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(DecodePolicy::Strict),
            "lenient" => Ok(DecodePolicy::Lenient),
            other => Err(format!("unknown decode policy {other:?}")),
        }
    }
}

/// Per-register code: which `r`-bit strings are valid and which grid index
/// each encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodewordMap {
    scheme: Scheme,
    points: usize,
}

impl CodewordMap {
    pub fn new(scheme: Scheme, points: usize) -> Self {
        assert!(points >= 2, "a register needs at least two grid points");
        CodewordMap { scheme, points }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn resolution(&self) -> usize {
        self.scheme.resolution(self.points)
    }

    /// Unit-interval value of grid index `j`.
    pub fn value(&self, j: usize) -> f64 {
        j as f64 / (self.points - 1) as f64
    }

    /// Canonical register bits for grid index `j`: `0^(r-j) 1^j` for unary
    /// and Hamming, a single 1 at site `r-1-j` for one-hot.
    pub fn encode(&self, j: usize) -> Vec<bool> {
        assert!(j < self.points, "grid index {j} out of range");
        let r = self.resolution();
        match self.scheme {
            Scheme::Unary | Scheme::Hamming => (0..r).map(|k| k >= r - j).collect(),
            Scheme::OneHot => (0..r).map(|k| k == r - 1 - j).collect(),
        }
    }

    /// Grid index of one register, or `None` if rejected.
    pub fn decode_register(&self, bits: &[bool], policy: DecodePolicy) -> Option<usize> {
        debug_assert_eq!(bits.len(), self.resolution());
        let r = bits.len();
        let ones = bits.iter().filter(|&&b| b).count();
        match self.scheme {
            Scheme::Hamming => Some(ones),
            Scheme::Unary => {
                let canonical = bits.iter().enumerate().all(|(k, &b)| b == (k >= r - ones));
                (canonical || policy == DecodePolicy::Lenient).then_some(ones)
            }
            Scheme::OneHot => {
                if ones != 1 {
                    return None;
                }
                let k = bits.iter().position(|&b| b)?;
                Some(r - 1 - k)
            }
        }
    }

    /// All valid register strings with their grid index, ordered by index
    /// for unary/one-hot and by integer value for Hamming.
    pub fn codewords(&self) -> Vec<(Vec<bool>, usize)> {
        let r = self.resolution();
        match self.scheme {
            Scheme::Unary | Scheme::OneHot => (0..self.points).map(|j| (self.encode(j), j)).collect(),
            Scheme::Hamming => (0..1usize << r)
                .map(|w| {
                    let bits: Vec<bool> = (0..r).map(|k| (w >> (r - 1 - k)) & 1 == 1).collect();
                    (bits, w.count_ones() as usize)
                })
                .collect(),
        }
    }

    /// Grid indices of every register in `bits`.
    pub fn decode_indices(&self, bits: &[bool], policy: DecodePolicy) -> Result<Option<Vec<usize>>, EmbeddingError> {
        let r = self.resolution();
        if bits.is_empty() || bits.len() % r != 0 {
            return Err(EmbeddingError::LengthMismatch { got: bits.len(), register: r });
        }
        Ok(bits.chunks(r).map(|reg| self.decode_register(reg, policy)).collect())
    }

    /// Bits for a full grid multi-index.
    pub fn encode_indices(&self, indices: &[usize]) -> Vec<bool> {
        indices.iter().flat_map(|&j| self.encode(j)).collect()
    }
}

/// Decode a measured bitstring to a unit-box point; `Ok(None)` means rejected.
pub fn decode(bits: &[bool], map: &CodewordMap, policy: DecodePolicy) -> Result<Option<Vec<f64>>, EmbeddingError> {
    Ok(map.decode_indices(bits, policy)?.map(|idx| idx.into_iter().map(|j| map.value(j)).collect()))
}

pub fn parse_bits(text: &str) -> Result<Vec<bool>, EmbeddingError> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            c => Err(EmbeddingError::InvalidBit(c)),
        })
        .collect()
}

pub fn render_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}
