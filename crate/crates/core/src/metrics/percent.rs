use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Exact, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PercentError {
    #[error("`{0}` is not a decimal percentage")]
    Syntax(String),
    #[error("{0} is outside [0, 100]")]
    Range(String),
}

/// A percentage held as an exact fraction in `[0, 1]`.
///
/// Display and serialization round half-up to two decimals, so `9/28` shows
/// as `32.14`. Arithmetic on the underlying fraction never rounds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Percent(Exact);

impl Percent {
    pub fn from_fraction(fraction: Exact) -> Self {
        Percent(fraction)
    }

    pub fn from_counts(correct: usize, total: usize) -> Self {
        assert!(total > 0 && correct <= total, "invalid counts {correct}/{total}");
        Percent(Exact::new(correct.into(), total.into()))
    }

    pub fn zero() -> Self {
        Percent(Exact::zero())
    }

    /// The fraction in `[0, 1]`.
    pub fn fraction(&self) -> &Exact {
        &self.0
    }

    /// The percentage as an exact rational in `[0, 100]`.
    pub fn value(&self) -> Exact {
        &self.0 * Exact::from_count(100)
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64().unwrap_or(f64::NAN)
    }

    /// Exact arithmetic mean; `None` for an empty iterator.
    pub fn mean<'a>(values: impl IntoIterator<Item = &'a Percent>) -> Option<Percent> {
        let (sum, count) = values
            .into_iter()
            .fold((Exact::zero(), 0usize), |(s, n), p| (s + &p.0, n + 1));
        (count > 0).then(|| Percent(sum / Exact::from_count(count)))
    }

    /// Two-decimal rendering, e.g. `"50.40"`.
    pub fn rounded(&self) -> String {
        round_half_up(&self.value(), 2)
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.rounded())
    }
}

impl FromStr for Percent {
    type Err = PercentError;

    /// Parses a decimal percentage such as `"58.33"` exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let digits_ok = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
        if int.is_empty() && frac.is_empty() || !digits_ok(int) || !digits_ok(frac) {
            return Err(PercentError::Syntax(s.to_string()));
        }
        let numer: BigInt = format!("0{int}{frac}").parse().expect("digits");
        let denom = BigInt::from(10u32).pow(frac.len() as u32) * BigInt::from(100u32);
        let fraction = Exact::new(numer, denom);
        if fraction > Exact::one() {
            return Err(PercentError::Range(s.to_string()));
        }
        Ok(Percent(fraction))
    }
}

impl TryFrom<f64> for Percent {
    type Error = PercentError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        if !v.is_finite() || !(0.0..=100.0).contains(&v) {
            return Err(PercentError::Range(v.to_string()));
        }
        // The shortest round-trip repr recovers the decimal that was written.
        v.to_string().parse()
    }
}

impl From<Percent> for f64 {
    fn from(p: Percent) -> f64 {
        p.rounded().parse().expect("rounded percent is a decimal")
    }
}

/// Decimal rendering of `x` rounded half away from zero at `decimals` places.
pub fn round_half_up(x: &Exact, decimals: u32) -> String {
    let scale = BigInt::from(10u32).pow(decimals);
    let scaled = x.abs() * Exact::from_integer(scale.clone());
    let half = Exact::new(1.into(), 2.into());
    let units = (scaled + half).floor().to_integer();
    let (int, frac) = units.div_rem(&scale);
    let sign = if x.is_negative() && !units.is_zero() { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0>width$}", width = decimals as usize)
    }
}
