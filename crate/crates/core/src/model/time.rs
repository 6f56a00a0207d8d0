//! ISO-8601 rendering and parsing at each time granularity.

use chrono::{Datelike, Duration, Months, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeGranularity {
    Second,
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Year,
    Approx,
}

impl TimeGranularity {
    pub const ALL: [TimeGranularity; 8] = [
        TimeGranularity::Second,
        TimeGranularity::Minute,
        TimeGranularity::Hour,
        TimeGranularity::Day,
        TimeGranularity::Week,
        TimeGranularity::Month,
        TimeGranularity::Year,
        TimeGranularity::Approx,
    ];

    /// Exact granularities, finest first. `Approx` is not part of the lattice.
    pub const EXACT: [TimeGranularity; 7] = [
        TimeGranularity::Second,
        TimeGranularity::Minute,
        TimeGranularity::Hour,
        TimeGranularity::Day,
        TimeGranularity::Week,
        TimeGranularity::Month,
        TimeGranularity::Year,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TimeGranularity::Second => "second",
            TimeGranularity::Minute => "minute",
            TimeGranularity::Hour => "hour",
            TimeGranularity::Day => "day",
            TimeGranularity::Week => "week",
            TimeGranularity::Month => "month",
            TimeGranularity::Year => "year",
            TimeGranularity::Approx => "approx",
        }
    }

    pub fn is_approx(self) -> bool {
        self == TimeGranularity::Approx
    }

    /// Render `at` in the canonical form of this granularity. Approximate times
    /// render at day precision.
    pub fn render(self, at: &NaiveDateTime) -> String {
        match self {
            TimeGranularity::Second => at.format("%Y-%m-%dT%H:%M:%S").to_string(),
            TimeGranularity::Minute => at.format("%Y-%m-%dT%H:%M").to_string(),
            TimeGranularity::Hour => at.format("%Y-%m-%dT%H").to_string(),
            TimeGranularity::Day | TimeGranularity::Approx => at.format("%Y-%m-%d").to_string(),
            TimeGranularity::Week => {
                let w = at.date().iso_week();
                format!("{:04}-W{:02}", w.year(), w.week())
            }
            TimeGranularity::Month => at.format("%Y-%m").to_string(),
            TimeGranularity::Year => at.format("%Y").to_string(),
        }
    }

    /// Parse the canonical form of this granularity into the start of its period.
    /// Approximate times accept any exact form.
    pub fn parse(self, s: &str) -> Option<NaiveDateTime> {
        match self {
            TimeGranularity::Approx => detect(s).map(|(_, t)| t),
            g => parse_exact(g, s),
        }
    }

    /// Half-open interval `[start, end)` covered by a canonical timestamp.
    pub fn interval(self, s: &str) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let (g, start) = match self {
            TimeGranularity::Approx => detect(s)?,
            g => (g, parse_exact(g, s)?),
        };
        let end = match g {
            TimeGranularity::Second => start + Duration::seconds(1),
            TimeGranularity::Minute => start + Duration::minutes(1),
            TimeGranularity::Hour => start + Duration::hours(1),
            TimeGranularity::Day => start + Duration::days(1),
            TimeGranularity::Week => start + Duration::days(7),
            TimeGranularity::Month => start.checked_add_months(Months::new(1))?,
            TimeGranularity::Year => start.checked_add_months(Months::new(12))?,
            TimeGranularity::Approx => unreachable!("detect returns exact granularities"),
        };
        Some((start, end))
    }
}

impl fmt::Display for TimeGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeGranularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TimeGranularity::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown time granularity {s:?}"))
    }
}

fn midnight(d: NaiveDate) -> NaiveDateTime {
    d.and_time(NaiveTime::MIN)
}

fn digits(s: &str, n: usize) -> Option<u32> {
    if s.len() == n && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

fn parse_exact(g: TimeGranularity, s: &str) -> Option<NaiveDateTime> {
    match g {
        TimeGranularity::Second => {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok().filter(|_| s.len() == 19)
        }
        TimeGranularity::Minute => {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").ok().filter(|_| s.len() == 16)
        }
        TimeGranularity::Hour => {
            let (date, hour) = s.split_once('T')?;
            let d = parse_exact(TimeGranularity::Day, date)?;
            let h = digits(hour, 2)?;
            d.with_hour(h)
        }
        TimeGranularity::Day => {
            if s.len() != 10 {
                return None;
            }
            NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(midnight)
        }
        TimeGranularity::Week => {
            let (y, w) = s.split_once("-W")?;
            let d = NaiveDate::from_isoywd_opt(digits(y, 4)? as i32, digits(w, 2)?, Weekday::Mon)?;
            Some(midnight(d))
        }
        TimeGranularity::Month => {
            let (y, m) = s.split_once('-')?;
            NaiveDate::from_ymd_opt(digits(y, 4)? as i32, digits(m, 2)?, 1).map(midnight)
        }
        TimeGranularity::Year => NaiveDate::from_ymd_opt(digits(s, 4)? as i32, 1, 1).map(midnight),
        TimeGranularity::Approx => None,
    }
}

/// Identify which canonical form `s` is written in.
pub fn detect(s: &str) -> Option<(TimeGranularity, NaiveDateTime)> {
    TimeGranularity::EXACT
        .into_iter()
        .find_map(|g| parse_exact(g, s).map(|t| (g, t)))
}

/// Parse a loosely formatted ISO-8601 timestamp as emitted by an extractor:
/// canonical forms, full datetimes with fractional seconds or offsets, or a
/// date followed by a space-separated time.
pub fn parse_loose(s: &str) -> Option<(TimeGranularity, NaiveDateTime)> {
    let s = s.trim();
    if let Some(found) = detect(s) {
        return Some(found);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some((TimeGranularity::Second, dt.naive_local()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let g = if fmt.ends_with("%M") { TimeGranularity::Minute } else { TimeGranularity::Second };
            return Some((g, dt));
        }
    }
    None
}

/// Canonical name of a time node: `raw` normalized to `granularity`.
///
/// Approximate timestamps keep the most specific canonical form that can be
/// recovered from the raw text, falling back to a leading date, month or year.
pub fn normalize_timestamp(raw: &str, granularity: TimeGranularity) -> Option<String> {
    if granularity.is_approx() {
        if let Some((g, t)) = parse_loose(raw) {
            return Some(g.render(&t));
        }
        let raw = raw.trim();
        for (len, g) in [(10, TimeGranularity::Day), (7, TimeGranularity::Month), (4, TimeGranularity::Year)] {
            if let Some(prefix) = raw.get(..len) {
                if parse_exact(g, prefix).is_some() {
                    return Some(prefix.to_string());
                }
            }
        }
        return None;
    }
    let (_, t) = parse_loose(raw)?;
    Some(granularity.render(&t))
}

/// Whether two time values share any instant. Approximate values never match.
pub fn overlaps(a: (&str, TimeGranularity), b: (&str, TimeGranularity)) -> bool {
    if a.1.is_approx() || b.1.is_approx() {
        return false;
    }
    match (a.1.interval(a.0), b.1.interval(b.0)) {
        (Some((s1, e1)), Some((s2, e2))) => s1 < e2 && s2 < e1,
        _ => false,
    }
}
