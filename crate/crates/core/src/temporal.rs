//! Hourly activity series and their per-active-individual decompositions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calendar::{Calendar, HOUR, WEEK_HOURS};
use crate::grouping::{Role, Roles};
use crate::matrix::Cell;
use crate::stream::{LinkStream, NodeId, StreamError, StreamStats, TimePeriod, Timestamp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("series was built for role {built:?}, decomposition asked for {asked:?}")]
    RoleMismatch {
        built: Option<Role>,
        asked: Option<Role>,
    },
    #[error("stream has no time span to cut into hours")]
    NoSpan,
}

/// Activity during one clock hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourBucket {
    pub start: Timestamp,
    pub label: String,
    pub hour_of_week: usize,
    /// Nodes (of the filtered role) with at least one contact in the hour.
    pub active: u64,
    /// Units with at least one endpoint of the filtered role.
    pub stats: StreamStats,
    /// Semi-units attributed to endpoints of the filtered role: summed
    /// degrees, semi-contacts and semi-length.
    pub semi: StreamStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourlySeries {
    pub role: Option<Role>,
    pub buckets: Vec<HourBucket>,
}

impl HourlySeries {
    pub fn total_length(&self) -> u64 {
        self.buckets.iter().map(|b| b.stats.cumul_length).sum()
    }
}

fn bucket_activity(
    start: Timestamp,
    hour: &LinkStream,
    roles: &Roles,
    role: Option<Role>,
    calendar: &Calendar,
) -> HourBucket {
    let counted = |n: NodeId| role.is_none() || roles.get(n) == role;
    let mut stats = StreamStats::default();
    for (pair, w) in hour.pair_weights() {
        if counted(pair.a()) || counted(pair.b()) {
            stats += StreamStats {
                n_pairs: 1,
                n_contacts: w.contacts,
                cumul_length: w.length,
            };
        }
    }
    let mut active = 0;
    let mut semi = StreamStats::default();
    for (n, a) in hour.node_activity() {
        if counted(n) {
            active += 1;
            semi += StreamStats {
                n_pairs: a.degree,
                n_contacts: a.contacts,
                cumul_length: a.length,
            };
        }
    }
    HourBucket {
        start,
        label: calendar.label(start),
        hour_of_week: calendar.hour_of_week(start),
        active,
        stats,
        semi,
    }
}

/// Hourly activity over `window` (or the stream span rounded out to whole
/// hours), optionally restricted to one role.
pub fn hourly_activity(
    stream: &LinkStream,
    roles: &Roles,
    role: Option<Role>,
    calendar: &Calendar,
    window: Option<TimePeriod>,
) -> Result<HourlySeries, TemporalError> {
    let window = match window.or(stream.span()) {
        Some(w) => calendar.hour_window(w),
        None => return Err(TemporalError::NoSpan),
    };
    let hours = stream.partition_window(HOUR, calendar.hour_origin(), window)?;
    let buckets = hours
        .par_iter()
        .map(|(p, l)| bucket_activity(p.start(), l, roles, role, calendar))
        .collect();
    Ok(HourlySeries { role, buckets })
}

/// Per-active-individual means of one hour; `n/a` where the denominator is 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourMeans {
    pub start: Timestamp,
    pub label: String,
    pub active: u64,
    pub degree: Cell,
    pub length_per_individual: Cell,
    pub length_per_pair: Cell,
    pub contacts_per_individual: Cell,
    pub length_per_contact: Cell,
}

fn mean(num: u64, den: u64) -> Cell {
    if den == 0 {
        Cell::Undefined
    } else {
        Cell::Value(num as f64 / den as f64)
    }
}

/// Mean degree, length and contacts per active individual, and length per
/// pair / per contact as ratios of hourly totals.
pub fn per_active_decomposition(
    series: &HourlySeries,
    role: Option<Role>,
) -> Result<Vec<HourMeans>, TemporalError> {
    if series.role != role {
        return Err(TemporalError::RoleMismatch {
            built: series.role,
            asked: role,
        });
    }
    Ok(series
        .buckets
        .iter()
        .map(|b| HourMeans {
            start: b.start,
            label: b.label.clone(),
            active: b.active,
            degree: mean(b.semi.n_pairs, b.active),
            length_per_individual: mean(b.semi.cumul_length, b.active),
            length_per_pair: mean(b.stats.cumul_length, b.stats.n_pairs),
            contacts_per_individual: mean(b.semi.n_contacts, b.active),
            length_per_contact: mean(b.stats.cumul_length, b.stats.n_contacts),
        })
        .collect())
}

/// Mean activity per hour of the week (Monday 00:00 = 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeekHour {
    pub hour_of_week: usize,
    pub samples: u64,
    pub active: f64,
    pub pairs: f64,
    pub contacts: f64,
    pub length: f64,
}

pub fn weekly_pattern(series: &HourlySeries) -> Vec<WeekHour> {
    let mut acc: BTreeMap<usize, (u64, [f64; 4])> = BTreeMap::new();
    for b in &series.buckets {
        let e = acc.entry(b.hour_of_week).or_default();
        e.0 += 1;
        let v = [
            b.active as f64,
            b.stats.n_pairs as f64,
            b.stats.n_contacts as f64,
            b.stats.cumul_length as f64,
        ];
        for (s, x) in e.1.iter_mut().zip(v) {
            *s += x;
        }
    }
    (0..WEEK_HOURS)
        .map(|h| {
            let (n, s) = acc.get(&h).copied().unwrap_or_default();
            let m = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
            WeekHour {
                hour_of_week: h,
                samples: n,
                active: m(s[0]),
                pairs: m(s[1]),
                contacts: m(s[2]),
                length: m(s[3]),
            }
        })
        .collect()
}

/// Sample autocorrelation of `x` at `lag`; `None` if undefined.
pub fn autocorrelation(x: &[f64], lag: usize) -> Option<f64> {
    if lag >= x.len() {
        return None;
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if var == 0.0 {
        return None;
    }
    let cov: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    Some(cov / var)
}

/// Autocorrelation of the active-count series at one week.
pub fn weekly_autocorrelation(series: &HourlySeries) -> Option<f64> {
    let x: Vec<f64> = series.buckets.iter().map(|b| b.active as f64).collect();
    autocorrelation(&x, WEEK_HOURS)
}
