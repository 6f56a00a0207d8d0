//! Fixed table of relative time expressions resolved against a session anchor.

use chrono::{Datelike, Duration, Months, NaiveDateTime, NaiveTime, Weekday};

use crate::model::TimeGranularity;

const WEEKDAYS: [(&str, Weekday); 7] = [
    ("monday", Weekday::Mon),
    ("tuesday", Weekday::Tue),
    ("wednesday", Weekday::Wed),
    ("thursday", Weekday::Thu),
    ("friday", Weekday::Fri),
    ("saturday", Weekday::Sat),
    ("sunday", Weekday::Sun),
];

const NUMBER_WORDS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

/// Part-of-day phrases and the hour they resolve to.
pub(crate) const DAY_PARTS: [(&str, u32); 6] = [
    ("later that evening", 19),
    ("this morning", 9),
    ("this afternoon", 15),
    ("this evening", 19),
    ("that evening", 19),
    ("tonight", 19),
];

fn parse_count(w: &str) -> Option<i64> {
    if let Ok(n) = w.parse::<i64>() {
        return Some(n);
    }
    if w == "a" || w == "an" {
        return Some(1);
    }
    NUMBER_WORDS.iter().position(|x| *x == w).map(|n| n as i64)
}

fn at_hour(anchor: NaiveDateTime, hour: u32) -> NaiveDateTime {
    anchor.date().and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("hour in range"))
}

fn resolve(mention: &str, anchor: NaiveDateTime) -> Option<(NaiveDateTime, TimeGranularity)> {
    use TimeGranularity::*;
    let m = mention.trim().to_lowercase();
    let m = m.trim_end_matches(|c: char| !c.is_alphanumeric());
    match m {
        "yesterday" => return Some((anchor - Duration::days(1), Day)),
        "today" => return Some((anchor, Day)),
        "tomorrow" => return Some((anchor + Duration::days(1), Day)),
        "last week" => return Some((anchor - Duration::days(7), Week)),
        "last month" => return Some((anchor.checked_sub_months(Months::new(1))?, Month)),
        "last year" => return Some((anchor.checked_sub_months(Months::new(12))?, Year)),
        _ => {}
    }
    if let Some((_, hour)) = DAY_PARTS.iter().find(|(p, _)| *p == m) {
        return Some((at_hour(anchor, *hour), Hour));
    }
    let parts: Vec<&str> = m.split_whitespace().collect();
    match parts.as_slice() {
        ["last", day] => {
            let (_, wd) = WEEKDAYS.iter().find(|(n, _)| n == day)?;
            let back = (anchor.weekday().num_days_from_monday() as i64 - wd.num_days_from_monday() as i64)
                .rem_euclid(7);
            let back = if back == 0 { 7 } else { back };
            Some((anchor - Duration::days(back), Day))
        }
        [n, unit, "ago"] => {
            let n = parse_count(n)?;
            let unit = unit.trim_end_matches('s');
            match unit {
                "day" => Some((anchor - Duration::days(n), Day)),
                "week" => Some((anchor - Duration::days(7 * n), Week)),
                "month" => Some((anchor.checked_sub_months(Months::new(u32::try_from(n).ok()?))?, Month)),
                "year" => Some((anchor.checked_sub_months(Months::new(u32::try_from(n).ok()?.checked_mul(12)?))?, Year)),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Resolve a relative time mention. Anything outside the table resolves to
/// the anchor date with `approx` granularity.
pub fn resolve_relative_time(mention: &str, anchor: NaiveDateTime) -> (String, TimeGranularity) {
    match resolve(mention, anchor) {
        Some((t, g)) => (g.render(&t), g),
        None => (TimeGranularity::Day.render(&anchor), TimeGranularity::Approx),
    }
}

/// Whether `mention` is in the supported vocabulary.
pub fn is_supported(mention: &str, anchor: NaiveDateTime) -> bool {
    resolve(mention, anchor).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn anchor(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    fn r(m: &str, a: NaiveDateTime) -> (String, TimeGranularity) {
        resolve_relative_time(m, a)
    }

    #[test]
    fn table() {
        use TimeGranularity::*;
        let a = anchor(2023, 5, 10, 13); // a Wednesday
        assert_eq!(r("yesterday", a), ("2023-05-09".into(), Day));
        assert_eq!(r("today", a), ("2023-05-10".into(), Day));
        assert_eq!(r("Tomorrow", a), ("2023-05-11".into(), Day));
        assert_eq!(r("last wednesday", a), ("2023-05-03".into(), Day));
        assert_eq!(r("last monday", a), ("2023-05-08".into(), Day));
        assert_eq!(r("last thursday", a), ("2023-05-04".into(), Day));
        assert_eq!(r("last week", a), ("2023-W18".into(), Week));
        assert_eq!(r("this morning", a), ("2023-05-10T09".into(), Hour));
        assert_eq!(r("later that evening", a), ("2023-05-10T19".into(), Hour));
        assert_eq!(r("3 days ago", a), ("2023-05-07".into(), Day));
        assert_eq!(r("two weeks ago", a), ("2023-W17".into(), Week));
        assert_eq!(r("a year ago", a), ("2022".into(), Year));
        assert_eq!(r("some time back", a), ("2023-05-10".into(), Approx));
    }

    #[test]
    fn last_month_underflows_the_year() {
        let a = anchor(2023, 1, 15, 0);
        assert_eq!(r("last month", a), ("2022-12".into(), TimeGranularity::Month));
        // month-end anchors clamp to the shorter month
        let a = anchor(2023, 3, 31, 0);
        assert_eq!(r("1 month ago", a), ("2023-02".into(), TimeGranularity::Month));
        assert_eq!(r("last year", anchor(2024, 2, 29, 0)), ("2023".into(), TimeGranularity::Year));
    }
}
