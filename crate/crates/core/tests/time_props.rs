use bgmem_core::extractor::resolve_relative_time;
use bgmem_core::model::time::overlaps;
use bgmem_core::model::TimeGranularity;
use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;

// Proleptic Gregorian day counting, independent of the date library.

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { yoe + era * 400 + 1 } else { yoe + era * 400 }, m, d)
}

/// Monday = 0. 1970-01-01 was a Thursday.
fn weekday(z: i64) -> i64 {
    (z + 3).rem_euclid(7)
}

fn day_str(z: i64) -> String {
    let (y, m, d) = civil_from_days(z);
    format!("{y:04}-{m:02}-{d:02}")
}

fn iso_week_str(z: i64) -> String {
    // the Thursday of the same week decides the year
    let thursday = z - weekday(z) + 3;
    let (y, _, _) = civil_from_days(thursday);
    let week = (thursday - days_from_civil(y, 1, 1)) / 7 + 1;
    format!("{y:04}-W{week:02}")
}

const WEEKDAY_NAMES: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];

fn anchor() -> impl Strategy<Value = (i64, i64, i64, u32)> {
    (1990i64..2035, 1i64..=12, 1i64..=31, 0u32..24).prop_filter("valid date", |(y, m, d, _)| {
        let z = days_from_civil(*y, *m, *d);
        civil_from_days(z) == (*y, *m, *d)
    })
}

fn to_datetime((y, m, d, h): (i64, i64, i64, u32)) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y as i32, m as u32, d as u32).unwrap().and_hms_opt(h, 30, 0).unwrap()
}

#[test]
fn worked_examples() {
    let t = |s: &str| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").unwrap();
    assert_eq!(resolve_relative_time("yesterday", t("2023-05-10T13:00")), ("2023-05-09".into(), TimeGranularity::Day));
    assert_eq!(resolve_relative_time("today", t("2023-05-10T13:00")), ("2023-05-10".into(), TimeGranularity::Day));
    assert_eq!(resolve_relative_time("last month", t("2023-01-15T00:00")), ("2022-12".into(), TimeGranularity::Month));
    assert_eq!(resolve_relative_time("some day", t("2023-01-15T00:00")), ("2023-01-15".into(), TimeGranularity::Approx));
}

proptest! {
    #[test]
    fn relative_times_follow_the_calendar(a in anchor(), n in 0i64..400, wd in 0usize..7) {
        let (y, m, d, _) = a;
        let at = to_datetime(a);
        let z = days_from_civil(y, m, d);
        let r = |s: &str| resolve_relative_time(s, at);
        prop_assert_eq!(r("yesterday"), (day_str(z - 1), TimeGranularity::Day));
        prop_assert_eq!(r("Today"), (day_str(z), TimeGranularity::Day));
        prop_assert_eq!(r("tomorrow."), (day_str(z + 1), TimeGranularity::Day));
        prop_assert_eq!(r(&format!("{n} days ago")), (day_str(z - n), TimeGranularity::Day));
        prop_assert_eq!(r("last week"), (iso_week_str(z - 7), TimeGranularity::Week));
        let (py, pm) = if m == 1 { (y - 1, 12) } else { (y, m - 1) };
        prop_assert_eq!(r("last month"), (format!("{py:04}-{pm:02}"), TimeGranularity::Month));
        prop_assert_eq!(r("last year"), (format!("{:04}", y - 1), TimeGranularity::Year));
        prop_assert_eq!(r("this morning"), (format!("{}T09", day_str(z)), TimeGranularity::Hour));
        prop_assert_eq!(r("this evening"), (format!("{}T19", day_str(z)), TimeGranularity::Hour));

        let mut back = (weekday(z) - wd as i64).rem_euclid(7);
        if back == 0 {
            back = 7;
        }
        let got = r(&format!("last {}", WEEKDAY_NAMES[wd]));
        prop_assert_eq!(&got, &(day_str(z - back), TimeGranularity::Day));
        prop_assert!((1..=7).contains(&back));
    }

    #[test]
    fn unknown_mentions_degrade_to_approx(a in anchor(), s in "[a-z]{3,10} [a-z]{3,10}") {
        prop_assume!(!s.starts_with("last ") && !s.ends_with(" ago") && !s.ends_with("evening") && !s.starts_with("this "));
        let (y, m, d, _) = a;
        let got = resolve_relative_time(&s, to_datetime(a));
        prop_assert_eq!(got, (format!("{y:04}-{m:02}-{d:02}"), TimeGranularity::Approx));
    }

    #[test]
    fn every_granularity_round_trips(a in anchor(), mi in 0u32..60, s in 0u32..60) {
        let (y, m, d, h) = a;
        let at = NaiveDate::from_ymd_opt(y as i32, m as u32, d as u32).unwrap().and_hms_opt(h, mi, s).unwrap();
        for g in TimeGranularity::ALL {
            let text = g.render(&at);
            let start = g.parse(&text).unwrap_or_else(|| panic!("{g}: {text} does not parse"));
            prop_assert_eq!(g.render(&start), text.clone());
            if !g.is_approx() {
                let (lo, hi) = g.interval(&text).unwrap();
                prop_assert!(lo <= at && at < hi, "{} {} [{}, {})", g, text, lo, hi);
                // no other granularity claims the same text
                let owners = TimeGranularity::ALL.iter().filter(|o| !o.is_approx() && o.parse(&text).is_some()).count();
                prop_assert_eq!(owners, 1);
            }
        }
    }

    #[test]
    fn overlap_is_symmetric_and_nested_periods_overlap(a in anchor(), g1 in 0usize..8, g2 in 0usize..8) {
        let at = to_datetime(a);
        let (g1, g2) = (TimeGranularity::ALL[g1], TimeGranularity::ALL[g2]);
        let (t1, t2) = (g1.render(&at), g2.render(&at));
        prop_assert_eq!(overlaps((&t1, g1), (&t2, g2)), overlaps((&t2, g2), (&t1, g1)));
        // both periods contain `at`
        prop_assert_eq!(overlaps((&t1, g1), (&t2, g2)), !g1.is_approx() && !g2.is_approx());
    }
}
