//! Exact fixed-point quantities with a resolution of 0.01 of the base unit.
//!
//! Energies are carried in hundredths of a nanojoule and areas in hundredths
//! of a square micrometre, so every sum and comparison is integer arithmetic.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

/// A non-negative decimal with two fractional digits, stored as hundredths.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Centi(pub u64);

impl Centi {
    pub const ZERO: Centi = Centi(0);

    pub const fn from_units(units: u64) -> Self {
        Centi(units * 100)
    }

    pub const fn hundredths(self) -> u64 {
        self.0
    }

    /// Converts a decimal value, rejecting negatives, non-finite input and
    /// anything not representable at 0.01 resolution.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let scaled = value * 100.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded > u64::MAX as f64 {
            return None;
        }
        Some(Centi(rounded as u64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Centi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Add for Centi {
    type Output = Centi;
    fn add(self, rhs: Centi) -> Centi {
        Centi(self.0 + rhs.0)
    }
}

impl AddAssign for Centi {
    fn add_assign(&mut self, rhs: Centi) {
        self.0 += rhs.0;
    }
}

/// Count times per-unit cost.
impl Mul<Centi> for u64 {
    type Output = Centi;
    fn mul(self, rhs: Centi) -> Centi {
        Centi(self * rhs.0)
    }
}

impl Sum for Centi {
    fn sum<I: Iterator<Item = Centi>>(iter: I) -> Centi {
        iter.fold(Centi::ZERO, Add::add)
    }
}

/// Formats `hundredths / 10^(2 + shift)` rounded half-up to `digits` decimals.
///
/// Used to render nJ quantities as mJ (`shift = 6`).
pub fn format_scaled(hundredths: u64, shift: u32, digits: u32) -> String {
    let denom = 10u128.pow(2 + shift);
    let scale = 10u128.pow(digits);
    let value = (hundredths as u128 * scale * 2 + denom) / (denom * 2);
    if digits == 0 {
        return value.to_string();
    }
    format!(
        "{}.{:0width$}",
        value / scale,
        value % scale,
        width = digits as usize
    )
}

/// `(num / den) * 100` rounded half-up to one decimal, returned in tenths of
/// a percent. `den` must be non-zero.
pub fn percent_tenths(num: i128, den: i128) -> i128 {
    assert!(den > 0, "percentage denominator must be positive");
    // floor((2000·num + den) / (2·den)) rounds half toward +inf
    (2000 * num + den).div_euclid(2 * den)
}

pub fn format_tenths(tenths: i128) -> String {
    let sign = if tenths < 0 { "-" } else { "" };
    let a = tenths.abs();
    format!("{sign}{}.{}", a / 10, a % 10)
}
