//! Minutes-since-midnight time axis.
//!
//! Every instant in a simulated day is a real number of minutes after
//! midnight. Values past 1440 are post-midnight overtime and are written
//! with extended hours (`"24:40"`, `"26:05"`).

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TimeParseError;

/// An instant on the simulated day, in minutes since midnight.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct TimePoint(f64);

impl TimePoint {
    pub const MIDNIGHT: TimePoint = TimePoint(0.0);

    /// Builds a time point, rejecting negative and non-finite values.
    pub fn new(minutes: f64) -> Result<Self, TimeParseError> {
        if !minutes.is_finite() || minutes < 0.0 {
            return Err(TimeParseError::OutOfRange(minutes));
        }
        Ok(TimePoint(minutes))
    }

    /// Builds a time point from values already known to be valid.
    ///
    /// Negative zero is normalized; anything else out of range is a bug in
    /// the caller and trips a debug assertion.
    pub fn from_minutes(minutes: f64) -> Self {
        debug_assert!(minutes.is_finite() && minutes >= 0.0, "bad time {minutes}");
        TimePoint(minutes + 0.0)
    }

    pub fn hm(hours: u32, minutes: u32) -> Self {
        TimePoint(f64::from(hours * 60 + minutes))
    }

    pub fn minutes(self) -> f64 {
        self.0
    }

    pub fn max(self, other: TimePoint) -> TimePoint {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: TimePoint) -> TimePoint {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    /// Total order used for sorting; time points are never NaN.
    pub fn total_cmp(&self, other: &TimePoint) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for TimePoint {
    type Output = TimePoint;

    fn add(self, rhs: f64) -> TimePoint {
        TimePoint::from_minutes(self.0 + rhs)
    }
}

impl Sub for TimePoint {
    type Output = f64;

    fn sub(self, rhs: TimePoint) -> f64 {
        self.0 - rhs.0
    }
}

/// `HH:MM`, or `HH:MM.d` when the value is not a whole minute.
impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Round to a tenth of a minute first so 59.96 prints as 01:00.0
        // rather than 00:60.0.
        let tenths = (self.0 * 10.0).round() as u64;
        let whole = tenths / 10;
        let frac = tenths % 10;
        let (h, m) = (whole / 60, whole % 60);
        if frac == 0 {
            write!(f, "{h:02}:{m:02}")
        } else {
            write!(f, "{h:02}:{m:02}.{frac}")
        }
    }
}

impl FromStr for TimePoint {
    type Err = TimeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || TimeParseError::Format(s.to_string());
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.is_empty() || !h.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let hours: u32 = h.parse().map_err(|_| bad())?;
        let (mm, frac) = match m.split_once('.') {
            Some((mm, frac)) => (mm, Some(frac)),
            None => (m, None),
        };
        if mm.len() != 2 || !mm.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let minutes: u32 = mm.parse().map_err(|_| bad())?;
        if minutes >= 60 {
            return Err(bad());
        }
        let mut total = f64::from(hours) * 60.0 + f64::from(minutes);
        if let Some(frac) = frac {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let frac: f64 = format!("0.{frac}").parse().map_err(|_| bad())?;
            total += frac;
        }
        TimePoint::new(total)
    }
}

impl TimePoint {
    /// Lossless text form: "HH:MM" followed by the exact fractional minute,
    /// if any. Parses back to the identical value.
    pub fn to_exact_string(self) -> String {
        let whole = self.0.floor();
        let frac = self.0 - whole;
        let whole = whole as u64;
        let clock = format!("{:02}:{:02}", whole / 60, whole % 60);
        if frac == 0.0 {
            clock
        } else {
            let digits = frac.to_string();
            format!("{clock}{}", &digits[1..])
        }
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_exact_string())
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_clock_times() {
        assert_eq!("08:00".parse::<TimePoint>().unwrap().minutes(), 480.0);
        assert_eq!("24:40".parse::<TimePoint>().unwrap().minutes(), 1480.0);
        assert_eq!("00:00".parse::<TimePoint>().unwrap().minutes(), 0.0);
        assert_eq!("09:30.5".parse::<TimePoint>().unwrap().minutes(), 570.5);
    }

    #[test]
    fn exact_form_round_trips() {
        for m in [0.0, 480.0, 570.5, 570.1, 1480.25, 123.456789, 1919.999999] {
            let t = TimePoint::from_minutes(m);
            let back: TimePoint = t.to_exact_string().parse().unwrap();
            assert_eq!(back.minutes(), m);
        }
        assert_eq!(TimePoint::hm(8, 0).to_exact_string(), "08:00");
        assert_eq!(TimePoint::from_minutes(570.5).to_exact_string(), "09:30.5");
    }

    #[test]
    fn rejects_malformed() {
        for s in ["8", "08:60", "08:5", "ab:00", "-1:00", "08:00.", ""] {
            assert!(s.parse::<TimePoint>().is_err(), "{s}");
        }
    }

    #[test]
    fn formats_extended_hours_and_tenths() {
        assert_eq!(TimePoint::hm(8, 0).to_string(), "08:00");
        assert_eq!(TimePoint::from_minutes(1480.0).to_string(), "24:40");
        assert_eq!(TimePoint::from_minutes(570.25).to_string(), "09:30.3");
        assert_eq!(TimePoint::from_minutes(59.96).to_string(), "01:00");
    }

    #[test]
    fn new_rejects_negative_and_nan() {
        assert!(TimePoint::new(-0.5).is_err());
        assert!(TimePoint::new(f64::NAN).is_err());
        assert!(TimePoint::new(f64::INFINITY).is_err());
    }
}
