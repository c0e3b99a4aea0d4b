//! Link streams: contacts between node pairs over time.
//!
//! Raw records are [`SlotOccurrence`]s, one per pair and 30-second slot. Runs of
//! consecutive slots for the same pair are merged into [`Contact`]s, and the
//! resulting [`LinkStream`] can be restricted to a time period or tiled into
//! calendar buckets.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer seconds relative to the stream's declared epoch.
pub type Timestamp = i64;

/// Width of one observation slot.
pub const SLOT_SECONDS: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("self-pair: node {node} paired with itself at t={slot_start}")]
    SelfPair { node: NodeId, slot_start: Timestamp },
    #[error("slot start {slot_start} for pair {pair} is not a multiple of {SLOT_SECONDS}s")]
    MisalignedSlot { pair: Pair, slot_start: Timestamp },
    #[error("empty interval [{start}, {end}]")]
    EmptyInterval { start: Timestamp, end: Timestamp },
    #[error("contacts of pair {pair} overlap or touch at t={at}")]
    OverlappingContacts { pair: Pair, at: Timestamp },
    #[error("bucket width must be positive, got {0}")]
    NonPositiveBucket(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Unordered node pair, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    a: NodeId,
    b: NodeId,
}

impl Pair {
    pub fn new(u: NodeId, v: NodeId) -> Option<Self> {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Some(Self { a: u, b: v }),
            std::cmp::Ordering::Greater => Some(Self { a: v, b: u }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(self) -> NodeId {
        self.a
    }

    pub fn b(self) -> NodeId {
        self.b
    }

    pub fn nodes(self) -> [NodeId; 2] {
        [self.a, self.b]
    }

    pub fn contains(self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.a, self.b)
    }
}

/// One pair seen in one 30s slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotOccurrence {
    pair: Pair,
    slot_start: Timestamp,
}

impl SlotOccurrence {
    pub fn new(u: NodeId, v: NodeId, slot_start: Timestamp) -> Result<Self, StreamError> {
        let pair = Pair::new(u, v).ok_or(StreamError::SelfPair {
            node: u,
            slot_start,
        })?;
        if slot_start.rem_euclid(SLOT_SECONDS) != 0 {
            return Err(StreamError::MisalignedSlot { pair, slot_start });
        }
        Ok(Self { pair, slot_start })
    }

    pub fn pair(&self) -> Pair {
        self.pair
    }

    pub fn slot_start(&self) -> Timestamp {
        self.slot_start
    }
}

/// Closed time period `[start, end]` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimePeriod {
    start: Timestamp,
    end: Timestamp,
}

impl TimePeriod {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, StreamError> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(StreamError::EmptyInterval { start, end })
        }
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn length(&self) -> i64 {
        self.end - self.start
    }

    pub fn contains_period(&self, other: &TimePeriod) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// A maximal interval of co-presence for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Contact {
    pair: Pair,
    start: Timestamp,
    end: Timestamp,
}

impl Contact {
    pub fn new(pair: Pair, start: Timestamp, end: Timestamp) -> Result<Self, StreamError> {
        if start < end {
            Ok(Self { pair, start, end })
        } else {
            Err(StreamError::EmptyInterval { start, end })
        }
    }

    pub fn pair(&self) -> Pair {
        self.pair
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn length(&self) -> i64 {
        self.end - self.start
    }

    /// Intersection with `period`, dropped when it has zero length.
    pub fn clip(&self, period: &TimePeriod) -> Option<Contact> {
        let start = self.start.max(period.start);
        let end = self.end.min(period.end);
        (start < end).then_some(Contact {
            pair: self.pair,
            start,
            end,
        })
    }
}

/// The three global parameters of a stream (or any subset of its contacts).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamStats {
    pub n_pairs: u64,
    pub n_contacts: u64,
    pub cumul_length: u64,
}

impl StreamStats {
    pub fn get(&self, param: Param) -> u64 {
        match param {
            Param::Pairs => self.n_pairs,
            Param::Contacts => self.n_contacts,
            Param::Length => self.cumul_length,
        }
    }

    pub fn scaled(self, k: u64) -> Self {
        Self {
            n_pairs: self.n_pairs * k,
            n_contacts: self.n_contacts * k,
            cumul_length: self.cumul_length * k,
        }
    }
}

impl Add for StreamStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            n_pairs: self.n_pairs + rhs.n_pairs,
            n_contacts: self.n_contacts + rhs.n_contacts,
            cumul_length: self.cumul_length + rhs.cumul_length,
        }
    }
}

impl AddAssign for StreamStats {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for StreamStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Analysis parameter: adjacency pairs, contacts or cumulated length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Pairs,
    Contacts,
    Length,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Pairs, Param::Contacts, Param::Length];

    pub fn name(self) -> &'static str {
        match self {
            Param::Pairs => "pairs",
            Param::Contacts => "contacts",
            Param::Length => "length",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of one edge of the aggregated network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairWeight {
    pub contacts: u64,
    pub length: u64,
}

/// Per-node semi-statistics: degree, semi-contacts and semi-length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeActivity {
    pub degree: u64,
    pub contacts: u64,
    pub length: u64,
}

/// A set of contacts, sorted by pair then start time.
///
/// For every pair the contacts are disjoint and separated by a gap, so each
/// one is maximal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkStream {
    contacts: Vec<Contact>,
    span: Option<TimePeriod>,
    nodes: Vec<NodeId>,
    pairs: Vec<Pair>,
}

impl LinkStream {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a stream from contacts that are already maximal. Overlapping or
    /// touching contacts of one pair are rejected.
    pub fn from_contacts(mut contacts: Vec<Contact>) -> Result<Self, StreamError> {
        contacts.sort_unstable();
        contacts.dedup();
        for w in contacts.windows(2) {
            if w[0].pair == w[1].pair && w[1].start <= w[0].end {
                return Err(StreamError::OverlappingContacts {
                    pair: w[0].pair,
                    at: w[1].start,
                });
            }
        }
        let span = span_of(&contacts);
        Ok(Self::from_sorted(contacts, span))
    }

    /// Builds a stream, coalescing overlapping or touching contacts of a pair.
    pub fn from_contacts_merged(mut contacts: Vec<Contact>) -> Self {
        contacts.sort_unstable();
        let mut merged: Vec<Contact> = Vec::with_capacity(contacts.len());
        for c in contacts {
            match merged.last_mut() {
                Some(last) if last.pair == c.pair && c.start <= last.end => {
                    last.end = last.end.max(c.end);
                }
                _ => merged.push(c),
            }
        }
        let span = span_of(&merged);
        Self::from_sorted(merged, span)
    }

    /// `contacts` must be sorted and valid.
    fn from_sorted(contacts: Vec<Contact>, span: Option<TimePeriod>) -> Self {
        let mut pairs: Vec<Pair> = contacts.iter().map(|c| c.pair).collect();
        pairs.dedup();
        let mut nodes: Vec<NodeId> = pairs.iter().flat_map(|p| p.nodes()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Self {
            contacts,
            span,
            nodes,
            pairs,
        }
    }

    /// Replaces the recorded observation span. The span must cover every contact.
    pub fn with_span(mut self, span: TimePeriod) -> Self {
        debug_assert!(self
            .contacts
            .iter()
            .all(|c| span.start <= c.start && c.end <= span.end));
        self.span = Some(span);
        self
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    /// V(L), sorted.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// E(L), sorted.
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn span(&self) -> Option<TimePeriod> {
        self.span
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn stats(&self) -> StreamStats {
        stream_stats(self)
    }

    /// Contacts grouped by pair: the weighted aggregated network.
    pub fn aggregate(&self) -> BTreeMap<Pair, PairWeight> {
        let mut out = BTreeMap::new();
        for c in &self.contacts {
            let w: &mut PairWeight = out.entry(c.pair).or_default();
            w.contacts += 1;
            w.length += c.length() as u64;
        }
        out
    }

    /// Iterates `(pair, contacts, length)` in pair order without allocating a map.
    pub fn pair_weights(&self) -> impl Iterator<Item = (Pair, PairWeight)> + '_ {
        self.contacts
            .chunk_by(|x, y| x.pair == y.pair)
            .map(|run| {
                let length = run.iter().map(|c| c.length() as u64).sum();
                (
                    run[0].pair,
                    PairWeight {
                        contacts: run.len() as u64,
                        length,
                    },
                )
            })
    }

    /// Degree, semi-contacts and semi-length of every node of V(L).
    pub fn node_activity(&self) -> BTreeMap<NodeId, NodeActivity> {
        let mut out: BTreeMap<NodeId, NodeActivity> = BTreeMap::new();
        for (pair, w) in self.pair_weights() {
            for n in pair.nodes() {
                let a = out.entry(n).or_default();
                a.degree += 1;
                a.contacts += w.contacts;
                a.length += w.length;
            }
        }
        out
    }

    /// Restriction to `period`: every contact is clipped and empty pieces vanish.
    pub fn restrict(&self, period: TimePeriod) -> LinkStream {
        let contacts = self
            .contacts
            .iter()
            .filter_map(|c| c.clip(&period))
            .collect();
        Self::from_sorted(contacts, Some(period))
    }

    /// Keeps only contacts whose pair satisfies `keep`.
    pub fn filter_pairs(&self, mut keep: impl FnMut(Pair) -> bool) -> LinkStream {
        let contacts = self
            .contacts
            .iter()
            .filter(|c| keep(c.pair))
            .copied()
            .collect();
        Self::from_sorted(contacts, self.span)
    }

    /// Tiles the span into buckets `[origin + k*bucket, origin + (k+1)*bucket]`.
    pub fn partition(
        &self,
        bucket: i64,
        origin: Timestamp,
    ) -> Result<Vec<(TimePeriod, LinkStream)>, StreamError> {
        if bucket <= 0 {
            return Err(StreamError::NonPositiveBucket(bucket));
        }
        match self.span {
            None => Ok(Vec::new()),
            Some(span) => self.partition_window(bucket, origin, span),
        }
    }

    /// Like [`partition`](Self::partition) but tiles an explicit window,
    /// emitting empty buckets where nothing happens.
    pub fn partition_window(
        &self,
        bucket: i64,
        origin: Timestamp,
        window: TimePeriod,
    ) -> Result<Vec<(TimePeriod, LinkStream)>, StreamError> {
        if bucket <= 0 {
            return Err(StreamError::NonPositiveBucket(bucket));
        }
        let first = (window.start - origin).div_euclid(bucket);
        let last = ceil_div(window.end - origin, bucket) - 1;
        let n = (last - first + 1).max(0) as usize;
        let mut pieces: Vec<Vec<Contact>> = vec![Vec::new(); n];
        for c in &self.contacts {
            let lo = ((c.start - origin).div_euclid(bucket)).max(first);
            let hi = (ceil_div(c.end - origin, bucket) - 1).min(last);
            for k in lo..=hi {
                let period = TimePeriod {
                    start: origin + k * bucket,
                    end: origin + (k + 1) * bucket,
                };
                if let Some(piece) = c.clip(&period) {
                    pieces[(k - first) as usize].push(piece);
                }
            }
        }
        Ok(pieces
            .into_iter()
            .enumerate()
            .map(|(i, contacts)| {
                let k = first + i as i64;
                let period = TimePeriod {
                    start: origin + k * bucket,
                    end: origin + (k + 1) * bucket,
                };
                (period, Self::from_sorted(contacts, Some(period)))
            })
            .collect())
    }

    /// Decomposes every contact back into its 30s slot occurrences.
    pub fn explode(&self) -> Result<Vec<SlotOccurrence>, StreamError> {
        let mut out = Vec::new();
        for c in &self.contacts {
            if c.start.rem_euclid(SLOT_SECONDS) != 0 || c.end.rem_euclid(SLOT_SECONDS) != 0 {
                return Err(StreamError::MisalignedSlot {
                    pair: c.pair,
                    slot_start: c.start,
                });
            }
            out.extend((c.start..c.end).step_by(SLOT_SECONDS as usize).map(|t| {
                SlotOccurrence {
                    pair: c.pair,
                    slot_start: t,
                }
            }));
        }
        Ok(out)
    }
}

fn span_of(contacts: &[Contact]) -> Option<TimePeriod> {
    let start = contacts.iter().map(|c| c.start).min()?;
    let end = contacts.iter().map(|c| c.end).max()?;
    Some(TimePeriod { start, end })
}

fn ceil_div(x: i64, d: i64) -> i64 {
    -((-x).div_euclid(d))
}

/// Merges consecutive slot occurrences of each pair into maximal contacts.
///
/// Duplicate occurrences collapse. A run of slots starting at `t0` and ending
/// with the slot starting at `t1` becomes the contact `[t0, t1 + 30]`.
pub fn merge_slots(occurrences: impl IntoIterator<Item = SlotOccurrence>) -> LinkStream {
    let mut occ: Vec<SlotOccurrence> = occurrences.into_iter().collect();
    occ.sort_unstable();
    occ.dedup();
    let mut contacts: Vec<Contact> = Vec::new();
    for o in occ {
        match contacts.last_mut() {
            Some(last) if last.pair == o.pair && last.end == o.slot_start => {
                last.end += SLOT_SECONDS;
            }
            _ => contacts.push(Contact {
                pair: o.pair,
                start: o.slot_start,
                end: o.slot_start + SLOT_SECONDS,
            }),
        }
    }
    let span = span_of(&contacts);
    LinkStream::from_sorted(contacts, span)
}

pub fn stream_stats(stream: &LinkStream) -> StreamStats {
    StreamStats {
        n_pairs: stream.pairs.len() as u64,
        n_contacts: stream.contacts.len() as u64,
        cumul_length: stream.contacts.iter().map(|c| c.length() as u64).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(u: u32, v: u32, t: i64) -> SlotOccurrence {
        SlotOccurrence::new(NodeId(u), NodeId(v), t).unwrap()
    }

    #[test]
    fn three_consecutive_slots_make_one_90s_contact() {
        let l = merge_slots([occ(0, 1, 0), occ(1, 0, 30), occ(0, 1, 60)]);
        assert_eq!(l.len(), 1);
        let c = l.contacts()[0];
        assert_eq!((c.start(), c.end(), c.length()), (0, 90, 90));
    }

    #[test]
    fn duplicates_collapse_and_gaps_split() {
        let l = merge_slots([occ(0, 1, 0), occ(1, 0, 0), occ(0, 1, 90)]);
        assert_eq!(l.len(), 2);
        assert_eq!(l.stats().cumul_length, 60);
        assert_eq!(l.stats().n_pairs, 1);
    }

    #[test]
    fn empty_input_gives_empty_stream() {
        let l = merge_slots(Vec::new());
        assert!(l.is_empty());
        assert_eq!(l.stats(), StreamStats::default());
        assert!(l.partition(3600, 0).unwrap().is_empty());
    }

    #[test]
    fn occurrence_validation() {
        assert!(matches!(
            SlotOccurrence::new(NodeId(3), NodeId(3), 0),
            Err(StreamError::SelfPair { .. })
        ));
        assert!(matches!(
            SlotOccurrence::new(NodeId(1), NodeId(3), 15),
            Err(StreamError::MisalignedSlot { slot_start: 15, .. })
        ));
        let o = occ(5, 2, -30);
        assert_eq!(o.pair().a(), NodeId(2));
    }

    #[test]
    fn restrict_drops_zero_length_pieces() {
        let p = Pair::new(NodeId(0), NodeId(1)).unwrap();
        let l = LinkStream::from_contacts(vec![Contact::new(p, 0, 90).unwrap()]).unwrap();
        assert!(l.restrict(TimePeriod::new(90, 180).unwrap()).is_empty());
        let r = l.restrict(TimePeriod::new(60, 180).unwrap());
        assert_eq!(r.stats().cumul_length, 30);
    }

    #[test]
    fn from_contacts_rejects_touching() {
        let p = Pair::new(NodeId(0), NodeId(1)).unwrap();
        let cs = vec![Contact::new(p, 0, 60).unwrap(), Contact::new(p, 60, 90).unwrap()];
        assert!(LinkStream::from_contacts(cs.clone()).is_err());
        let merged = LinkStream::from_contacts_merged(cs);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.contacts()[0].length(), 90);
    }

    #[test]
    fn boundary_contact_splits_across_hours() {
        let p = Pair::new(NodeId(0), NodeId(1)).unwrap();
        let l = LinkStream::from_contacts(vec![
            Contact::new(p, 9 * 3600 + 59 * 60, 10 * 3600 + 60).unwrap(),
        ])
        .unwrap();
        let parts = l.partition(3600, 0).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0.start(), 9 * 3600);
        assert_eq!(parts[0].1.stats(), StreamStats { n_pairs: 1, n_contacts: 1, cumul_length: 60 });
        assert_eq!(parts[1].1.stats(), StreamStats { n_pairs: 1, n_contacts: 1, cumul_length: 60 });
    }

    #[test]
    fn contact_ending_on_boundary_stays_in_earlier_bucket() {
        let p = Pair::new(NodeId(0), NodeId(1)).unwrap();
        let l = LinkStream::from_contacts(vec![Contact::new(p, 3000, 3600).unwrap()]).unwrap();
        let parts = l.partition(3600, 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1.len(), 1);
    }

    #[test]
    fn non_positive_bucket_is_rejected() {
        let l = merge_slots([occ(0, 1, 0)]);
        assert_eq!(l.partition(0, 0), Err(StreamError::NonPositiveBucket(0)));
    }

    #[test]
    fn full_span_bucket_is_identity() {
        let l = merge_slots([occ(0, 1, 0), occ(1, 2, 60), occ(0, 2, 120)]);
        let span = l.span().unwrap();
        let parts = l.partition(span.length(), span.start()).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1.contacts(), l.contacts());
    }

    #[test]
    fn node_activity_counts_semi_units() {
        let l = merge_slots([occ(0, 1, 0), occ(0, 1, 60), occ(1, 2, 0)]);
        let act = l.node_activity();
        assert_eq!(act[&NodeId(1)], NodeActivity { degree: 2, contacts: 3, length: 90 });
        assert_eq!(act[&NodeId(0)], NodeActivity { degree: 1, contacts: 2, length: 60 });
    }
}
