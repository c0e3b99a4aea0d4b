//! Seeded synthetic slot-occurrence generator with planted group affinities.
//!
//! Every node pair runs an independent two-state chain over 30s slots: an
//! inactive pair activates with probability
//! `base * affinity(g_u, g_v) * hourly[h] * role(u) * role(v)`, an active pair
//! stays active with the persistence probability. Each pair draws from its own
//! ChaCha stream keyed by the seed and the pair, so the output does not depend
//! on generation order or thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{Calendar, CalendarError, DAY, HOUR};
use crate::grouping::{NodeAttributes, Population, Role, CATEGORY, SERVICE};
use crate::registry::NodeRegistry;
use crate::stream::{merge_slots, LinkStream, NodeId, Pair, SlotOccurrence, Timestamp, SLOT_SECONDS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub size: u32,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinitySpec {
    pub a: String,
    pub b: String,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoleModulation {
    #[serde(rename = "PA")]
    pub patient: f64,
    #[serde(rename = "ST")]
    pub staff: f64,
}

impl Default for RoleModulation {
    fn default() -> Self {
        Self {
            patient: 1.0,
            staff: 1.0,
        }
    }
}

impl RoleModulation {
    fn get(&self, r: Role) -> f64 {
        match r {
            Role::Patient => self.patient,
            Role::Staff => self.staff,
        }
    }
}

fn default_epoch() -> String {
    "1970-01-01T00:00:00Z".into()
}

fn default_offset() -> String {
    "+00:00".into()
}

fn flat_profile() -> [f64; 24] {
    [1.0; 24]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: u32,
    #[serde(default = "default_epoch")]
    pub epoch: String,
    #[serde(default = "default_offset")]
    pub utc_offset: String,
    pub groups: Vec<GroupSpec>,
    /// Probability that an inactive pair becomes active in a given slot.
    pub base_rate: f64,
    /// Probability that an active pair stays active in the next slot.
    pub persistence: f64,
    #[serde(default)]
    pub affinity: Vec<AffinitySpec>,
    /// Multiplier per local hour of day.
    #[serde(default = "flat_profile")]
    pub hourly_profile: [f64; 24],
    #[serde(default)]
    pub role_modulation: RoleModulation,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))
    }

    pub fn calendar(&self) -> Result<Calendar, SynthError> {
        Ok(Calendar::new(
            Calendar::parse_epoch(&self.epoch)?,
            Calendar::parse_offset(&self.utc_offset)?,
        ))
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if !seen.insert(g.name.as_str()) {
                return bad(format!("duplicate group {:?}", g.name));
            }
            if g.name.is_empty() || g.name.contains([',', '#']) || g.name.contains(char::is_whitespace) {
                return bad(format!("group name {:?} is not a valid label", g.name));
            }
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return bad(format!("persistence {} not in [0, 1]", self.persistence));
        }
        let mut rates = vec![
            ("base_rate", self.base_rate),
            ("role_modulation.PA", self.role_modulation.patient),
            ("role_modulation.ST", self.role_modulation.staff),
        ];
        rates.extend(self.hourly_profile.iter().map(|&h| ("hourly_profile", h)));
        rates.extend(self.affinity.iter().map(|a| ("affinity multiplier", a.multiplier)));
        for (what, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{what} must be a finite non-negative number, got {v}"));
            }
        }
        for a in &self.affinity {
            for g in [&a.a, &a.b] {
                if !seen.contains(g.as_str()) {
                    return bad(format!("affinity refers to unknown group {g:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Generated dataset: occurrences sorted by (slot, a, b), node names and
/// metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub calendar: Calendar,
    pub registry: NodeRegistry,
    pub population: Population,
    pub occurrences: Vec<SlotOccurrence>,
    pub period_start: Timestamp,
    pub period_end: Timestamp,
    /// One line per clamped (group pair, hour) probability.
    pub warnings: Vec<String>,
}

impl SynthOutput {
    pub fn stream(&self) -> LinkStream {
        let s = merge_slots(self.occurrences.iter().copied());
        match crate::stream::TimePeriod::new(self.period_start, self.period_end) {
            Ok(p) => s.with_span(p),
            Err(_) => s,
        }
    }
}

pub fn node_name(group: &str, idx: u32) -> String {
    format!("{group}_{idx:03}")
}

/// Per-slot hazard `-ln(1 - q)`: infinite for certain activation.
fn hazard(q: f64) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        -(-q).ln_1p()
    }
}

struct PairPlan {
    pair: Pair,
    stream_id: u64,
    hazard: [f64; 24],
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let calendar = config.calendar()?;
    let start = calendar.day_origin();
    if start.rem_euclid(SLOT_SECONDS) != 0 {
        return Err(SynthError::Config(
            "epoch and offset do not put local midnight on a 30s slot".into(),
        ));
    }
    let end = start + config.days as i64 * DAY;

    let mut nodes: Vec<(String, usize)> = Vec::new();
    for (gi, g) in config.groups.iter().enumerate() {
        nodes.extend((0..g.size).map(|i| (node_name(&g.name, i), gi)));
    }
    let registry = NodeRegistry::from_names(nodes.iter().map(|(n, _)| n.clone()));
    let mut group_of = vec![0; registry.len()];
    let mut attrs = Vec::with_capacity(nodes.len());
    for (name, gi) in &nodes {
        let g = &config.groups[*gi];
        group_of[registry.get(name).expect("registered").index()] = *gi;
        let mut a = NodeAttributes::new(name.clone(), g.role).with(SERVICE, g.name.clone());
        if g.role == Role::Staff {
            a = a.with(CATEGORY, g.name.clone());
        }
        attrs.push(a);
    }
    let population =
        Population::new(attrs).map_err(|e| SynthError::Config(e.to_string()))?;

    let k = config.groups.len();
    let index: BTreeMap<&str, usize> = config
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| (g.name.as_str(), i))
        .collect();
    let mut affinity = vec![vec![1.0; k]; k];
    for a in &config.affinity {
        let (i, j) = (index[a.a.as_str()], index[a.b.as_str()]);
        affinity[i][j] = a.multiplier;
        affinity[j][i] = a.multiplier;
    }
    let mut warnings = Vec::new();
    let mut group_hazard = vec![vec![[0.0; 24]; k]; k];
    for i in 0..k {
        for j in i..k {
            let role = config.role_modulation.get(config.groups[i].role)
                * config.role_modulation.get(config.groups[j].role);
            for (h, &profile) in config.hourly_profile.iter().enumerate() {
                let q = config.base_rate * affinity[i][j] * profile * role;
                if q > 1.0 {
                    warnings.push(format!(
                        "activation probability {q} clamped to 1 for {}-{} at hour {h:02}",
                        config.groups[i].name, config.groups[j].name
                    ));
                }
                group_hazard[i][j][h] = hazard(q.min(1.0));
                group_hazard[j][i][h] = group_hazard[i][j][h];
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let n = registry.len() as u32;
    let plans: Vec<PairPlan> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .map(|(a, b)| PairPlan {
            pair: Pair::new(NodeId(a), NodeId(b)).expect("distinct"),
            stream_id: a as u64 * n as u64 + b as u64,
            hazard: group_hazard[group_of[a as usize]][group_of[b as usize]],
        })
        .collect();
    let hour_origin = calendar.hour_origin();
    let mut occurrences: Vec<SlotOccurrence> = plans
        .par_iter()
        .flat_map_iter(|p| {
            pair_slots(p, config, &calendar, hour_origin, start, end)
                .into_iter()
                .map(move |t| {
                    SlotOccurrence::new(p.pair.a(), p.pair.b(), t).expect("aligned slot")
                })
        })
        .collect();
    occurrences.sort_unstable_by_key(|o| (o.slot_start(), o.pair()));

    Ok(SynthOutput {
        calendar,
        registry,
        population,
        occurrences,
        period_start: start,
        period_end: end,
        warnings,
    })
}

/// Active slots of one pair in `[start, end)`.
///
/// Inactive stretches are skipped by inverting the cumulative hazard, which
/// is piecewise constant over clock hours; active runs have a geometric
/// number of slots.
fn pair_slots(
    plan: &PairPlan,
    config: &SynthConfig,
    calendar: &Calendar,
    hour_origin: Timestamp,
    start: Timestamp,
    end: Timestamp,
) -> Vec<Timestamp> {
    let mut out = Vec::new();
    if plan.hazard.iter().all(|&h| h == 0.0) {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(plan.stream_id);
    let uniform = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>();
    let p = config.persistence;
    let mut t = start;
    'outer: while t < end {
        let mut e = -uniform(&mut rng).ln();
        loop {
            let h = plan.hazard[calendar.hour_of_day(t) as usize];
            let next_hour = hour_origin + ((t - hour_origin).div_euclid(HOUR) + 1) * HOUR;
            let block_end = next_hour.min(end);
            let slots = ((block_end - t) / SLOT_SECONDS) as f64;
            if h * slots >= e {
                let k = ((e / h).ceil() - 1.0).max(0.0) as i64;
                t += k * SLOT_SECONDS;
                break;
            }
            e -= h * slots;
            t = block_end;
            if t >= end {
                break 'outer;
            }
        }
        let run = if p <= 0.0 {
            1
        } else if p >= 1.0 {
            i64::MAX / SLOT_SECONDS / 2
        } else {
            1 + (uniform(&mut rng).ln() / p.ln()).floor() as i64
        };
        let stop = (t + run.saturating_mul(SLOT_SECONDS)).min(end);
        out.extend((t..stop).step_by(SLOT_SECONDS as usize));
        t = stop + SLOT_SECONDS;
    }
    out
}
