//! Mapping between stream timestamps and local calendar days/hours.
//!
//! Stream timestamps are seconds after a declared epoch. Days and hours are
//! cut at a fixed UTC offset, so every day has exactly 24 hourly buckets.

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{TimePeriod, Timestamp};

pub const HOUR: i64 = 3600;
pub const DAY: i64 = 86_400;
pub const WEEK_HOURS: usize = 168;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("invalid epoch {0:?}: expected RFC 3339, e.g. 2009-07-06T00:00:00Z")]
    Epoch(String),
    #[error("invalid UTC offset {0:?}: expected e.g. +02:00")]
    Offset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    /// Unix time of stream timestamp 0.
    pub epoch_unix: i64,
    /// Seconds east of UTC used for day and hour boundaries.
    pub utc_offset: i32,
}

impl Default for Calendar {
    fn default() -> Self {
        Self {
            epoch_unix: 0,
            utc_offset: 2 * 3600,
        }
    }
}

impl Calendar {
    pub fn new(epoch_unix: i64, utc_offset: i32) -> Self {
        Self {
            epoch_unix,
            utc_offset,
        }
    }

    pub fn parse_epoch(s: &str) -> Result<i64, CalendarError> {
        DateTime::parse_from_rfc3339(s.trim())
            .map(|d| d.timestamp())
            .map_err(|_| CalendarError::Epoch(s.to_string()))
    }

    /// Parses `+HH:MM` / `-HH:MM` into seconds east of UTC.
    pub fn parse_offset(s: &str) -> Result<i32, CalendarError> {
        s.trim()
            .parse::<FixedOffset>()
            .map(|o| o.local_minus_utc())
            .map_err(|_| CalendarError::Offset(s.to_string()))
    }

    pub fn format_offset(offset: i32) -> String {
        let sign = if offset < 0 { '-' } else { '+' };
        let a = offset.unsigned_abs();
        format!("{sign}{:02}:{:02}", a / 3600, (a % 3600) / 60)
    }

    pub fn epoch_rfc3339(&self) -> String {
        DateTime::<Utc>::from_timestamp(self.epoch_unix, 0)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_else(|| self.epoch_unix.to_string())
    }

    fn local_seconds(&self, t: Timestamp) -> i64 {
        self.epoch_unix + t + self.utc_offset as i64
    }

    /// A stream timestamp that falls on a local midnight.
    pub fn day_origin(&self) -> Timestamp {
        (-self.local_seconds(0)).rem_euclid(DAY)
    }

    /// A stream timestamp that falls on a local clock hour.
    pub fn hour_origin(&self) -> Timestamp {
        (-self.local_seconds(0)).rem_euclid(HOUR)
    }

    fn local_datetime(&self, t: Timestamp) -> chrono::NaiveDateTime {
        DateTime::<Utc>::from_timestamp(self.local_seconds(t), 0)
            .expect("timestamp within chrono range")
            .naive_utc()
    }

    pub fn date(&self, t: Timestamp) -> NaiveDate {
        self.local_datetime(t).date()
    }

    pub fn hour_of_day(&self, t: Timestamp) -> u32 {
        self.local_datetime(t).hour()
    }

    /// Hour index within the week, Monday 00:00 = 0.
    pub fn hour_of_week(&self, t: Timestamp) -> usize {
        let dt = self.local_datetime(t);
        dt.weekday().num_days_from_monday() as usize * 24 + dt.hour() as usize
    }

    /// Stream period covering the local calendar day `date`.
    pub fn day_period(&self, date: NaiveDate) -> TimePeriod {
        let midnight = date
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_utc()
            .timestamp();
        let start = midnight - self.utc_offset as i64 - self.epoch_unix;
        TimePeriod::new(start, start + DAY).expect("non-empty day")
    }

    /// Local timestamp label `YYYY-MM-DDTHH:MM`.
    pub fn label(&self, t: Timestamp) -> String {
        self.local_datetime(t).format("%Y-%m-%dT%H:%M").to_string()
    }

    /// Smallest window of whole days covering `span`.
    pub fn day_window(&self, span: TimePeriod) -> TimePeriod {
        align_window(span, DAY, self.day_origin())
    }

    /// Smallest window of whole hours covering `span`.
    pub fn hour_window(&self, span: TimePeriod) -> TimePeriod {
        align_window(span, HOUR, self.hour_origin())
    }
}

fn align_window(span: TimePeriod, bucket: i64, origin: Timestamp) -> TimePeriod {
    let start = origin + (span.start() - origin).div_euclid(bucket) * bucket;
    let end = origin - (-(span.end() - origin)).div_euclid(bucket) * bucket;
    TimePeriod::new(start, end).expect("aligned window is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midnight_at_plus_two() {
        // 2009-07-06T00:00:00+02:00
        let cal = Calendar::new(Calendar::parse_epoch("2009-07-05T22:00:00Z").unwrap(), 7200);
        assert_eq!(cal.day_origin(), 0);
        assert_eq!(cal.hour_of_day(0), 0);
        assert_eq!(cal.hour_of_day(10 * HOUR + 5), 10);
        assert_eq!(cal.date(0).to_string(), "2009-07-06");
        // Monday
        assert_eq!(cal.hour_of_week(3 * HOUR), 3);
        assert_eq!(cal.day_period(cal.date(5)).start(), 0);
    }

    #[test]
    fn unix_epoch_origin() {
        let cal = Calendar::new(0, 7200);
        assert_eq!(cal.day_origin(), DAY - 7200);
        assert_eq!(cal.hour_origin(), 0);
        assert_eq!(cal.hour_of_day(1_246_867_200), 10);
    }

    #[test]
    fn offsets_round_trip() {
        assert_eq!(Calendar::parse_offset("+02:00").unwrap(), 7200);
        assert_eq!(Calendar::parse_offset("-05:30").unwrap(), -19800);
        assert_eq!(Calendar::format_offset(-19800), "-05:30");
        assert!(Calendar::parse_offset("two").is_err());
    }

    #[test]
    fn windows_align_to_buckets() {
        let cal = Calendar::new(0, 0);
        let w = cal.hour_window(TimePeriod::new(100, 3700).unwrap());
        assert_eq!((w.start(), w.end()), (0, 7200));
        let w = cal.day_window(TimePeriod::new(0, DAY).unwrap());
        assert_eq!((w.start(), w.end()), (0, DAY));
    }
}
