//! Conversions between the core's naive clock (seconds / days since
//! 1970-01-01) and calendar text.

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use evstp_core::{Day, Timestamp};

pub const DATETIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
pub const DATE_FORMAT: &str = "%Y-%m-%d";

const UNIX_EPOCH_CE_DAYS: i32 = 719_163;

pub fn parse_datetime(s: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(s, DATETIME_FORMAT)
        .ok()
        .map(|dt| Timestamp(dt.and_utc().timestamp()))
}

pub fn format_datetime(t: Timestamp) -> String {
    DateTime::from_timestamp(t.0, 0)
        .map(|dt| dt.naive_utc().format(DATETIME_FORMAT).to_string())
        .unwrap_or_else(|| format!("@{}", t.0))
}

pub fn parse_date(s: &str) -> Option<Day> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok().map(date_to_day)
}

pub fn date_to_day(d: NaiveDate) -> Day {
    Day(i64::from(d.num_days_from_ce() - UNIX_EPOCH_CE_DAYS))
}

pub fn day_to_date(d: Day) -> Option<NaiveDate> {
    i32::try_from(d.0 + i64::from(UNIX_EPOCH_CE_DAYS))
        .ok()
        .and_then(NaiveDate::from_num_days_from_ce_opt)
}

pub fn format_day(d: Day) -> String {
    day_to_date(d)
        .map(|n| n.format(DATE_FORMAT).to_string())
        .unwrap_or_else(|| format!("day{}", d.0))
}
