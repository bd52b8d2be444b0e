//! Success probability and time-to-solution.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::BenchError;

/// Optimality gap below which a result counts as a success.
pub const DEFAULT_SUCCESS_TOL: f64 = 1e-3;
/// Target cumulative success probability of the time-to-solution metric.
pub const TTS_TARGET: f64 = 0.99;

/// Fraction of `values` with `value - f_star < tol`. Entries that are `None`
/// (rejected or failed samples) count as failures.
pub fn success_probability(values: &[Option<f64>], f_star: Option<f64>, tol: f64) -> Result<f64, BenchError> {
    let f_star = f_star.ok_or(BenchError::MissingOptimum)?;
    if values.is_empty() {
        return Err(BenchError::NoSamples);
    }
    let hits = values.iter().filter(|v| matches!(v, Some(f) if f - f_star < tol)).count();
    Ok(hits as f64 / values.len() as f64)
}

/// `t0` if `p_s >= 0.99`, infinite if `p_s = 0`, otherwise
/// `t0 * ceil(ln(0.01) / ln(1 - p_s))`.
pub fn tts(t0: f64, p_s: f64) -> Seconds {
    if p_s >= TTS_TARGET {
        Seconds(t0)
    } else if p_s <= 0.0 {
        Seconds(f64::INFINITY)
    } else {
        Seconds(t0 * ((1.0 - TTS_TARGET).ln() / (1.0 - p_s).ln()).ceil())
    }
}

/// A duration in seconds; infinity serializes as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Seconds(pub f64);

impl Seconds {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{:.6e}", self.0)
        }
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Seconds(v)),
            Raw::Text(t) if t == "inf" => Ok(Seconds(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Median of the finite entries, `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
