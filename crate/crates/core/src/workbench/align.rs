//! Call-to-quote timing rules.

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};
use chrono_tz::America::New_York;
use chrono_tz::Tz;

use crate::error::{Error, Result};
use crate::time::{next_business_day, roll_forward};

/// Calls at or after this local hour are matched to the next trading day.
pub const MARKET_CLOSE_HOUR: u32 = 16;
/// Business days searched for a quote before a call is left unmatched.
pub const QUOTE_SEARCH_DAYS: usize = 5;

const NAIVE_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

/// Parses a call timestamp into market time. Timestamps with an offset are
/// converted; timestamps without one are read as New York local time.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Tz>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&New_York));
    }
    for f in NAIVE_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return t
                .and_local_timezone(New_York)
                .earliest()
                .ok_or_else(|| Error::validation(format!("timestamp {s:?} does not exist in market time")));
        }
    }
    Err(Error::validation(format!("bad timestamp {s:?}")))
}

/// The CDS date a call is matched to, or `None` when no quote turns up
/// within [`QUOTE_SEARCH_DAYS`] business days.
pub fn align_call_to_cds(call: &DateTime<Tz>, has_quote: impl Fn(NaiveDate) -> bool) -> Option<NaiveDate> {
    let local = call.naive_local();
    let close = NaiveTime::from_hms_opt(MARKET_CLOSE_HOUR, 0, 0).unwrap();
    let mut d = if local.time() < close { roll_forward(local.date()) } else { next_business_day(local.date()) };
    for _ in 0..QUOTE_SEARCH_DAYS {
        if has_quote(d) {
            return Some(d);
        }
        d = next_business_day(d);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_date;
    use std::collections::BTreeSet;

    fn weekdays() -> BTreeSet<NaiveDate> {
        // 2015-03-02 is a Monday.
        let start = parse_date("2015-03-02").unwrap();
        (0..28).map(|k| start + chrono::Duration::days(k)).filter(|d| crate::time::is_business_day(*d)).collect()
    }

    fn align(ts: &str, quotes: &BTreeSet<NaiveDate>) -> Option<String> {
        align_call_to_cds(&parse_timestamp(ts).unwrap(), |d| quotes.contains(&d)).map(|d| d.to_string())
    }

    #[test]
    fn close_rule() {
        let q = weekdays();
        assert_eq!(align("2015-03-03 10:00", &q).as_deref(), Some("2015-03-03"));
        assert_eq!(align("2015-03-03 16:30", &q).as_deref(), Some("2015-03-04"));
        assert_eq!(align("2015-03-03 16:00", &q).as_deref(), Some("2015-03-04"));
        assert_eq!(align("2015-03-06 17:00", &q).as_deref(), Some("2015-03-09"));
        assert_eq!(align("2015-03-07 09:00", &q).as_deref(), Some("2015-03-09"));
    }

    #[test]
    fn offsets_are_converted_to_market_time() {
        let q = weekdays();
        // 20:30 UTC is 15:30 EST in early March.
        assert_eq!(align("2015-03-03T20:30:00Z", &q).as_deref(), Some("2015-03-03"));
        assert_eq!(align("2015-03-03T21:30:00Z", &q).as_deref(), Some("2015-03-04"));
        // After the switch to daylight time 20:30 UTC is already 16:30.
        assert_eq!(align("2015-03-10T20:30:00Z", &q).as_deref(), Some("2015-03-11"));
    }

    #[test]
    fn missing_quotes_are_searched_then_given_up() {
        let mut q = weekdays();
        q.remove(&parse_date("2015-03-04").unwrap());
        assert_eq!(align("2015-03-03 17:00", &q).as_deref(), Some("2015-03-05"));
        let far: BTreeSet<NaiveDate> = q.iter().copied().filter(|d| *d >= parse_date("2015-03-11").unwrap()).collect();
        assert_eq!(align("2015-03-03 17:00", &far), None);
        assert_eq!(align("2015-03-03 15:00", &far), None);
        let five: BTreeSet<NaiveDate> = far.iter().copied().chain([parse_date("2015-03-10").unwrap()]).collect();
        assert_eq!(align("2015-03-03 17:00", &five).as_deref(), Some("2015-03-10"));
    }

    #[test]
    fn bad_timestamps() {
        assert!(parse_timestamp("yesterday").is_err());
        assert!(parse_timestamp("2015-03-08 02:30").is_err());
    }
}
