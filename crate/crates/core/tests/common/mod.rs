#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use linkstream::grouping::{Role, Roles, Scheme};
use linkstream::stream::{Contact, LinkStream, NodeId, Pair, SlotOccurrence, Timestamp, SLOT_SECONDS};
use rand::Rng;

pub fn pair(a: u32, b: u32) -> Pair {
    Pair::new(NodeId(a), NodeId(b)).unwrap()
}

/// Random slot occurrences over `nodes` nodes and `slots` slots; runs of
/// activity are produced by a sticky walk so contacts span several slots.
pub fn random_occurrences<R: Rng>(rng: &mut R, nodes: u32, slots: i64) -> Vec<SlotOccurrence> {
    let mut out = Vec::new();
    let p_on = rng.random_range(0.001..0.05);
    let p_stay = rng.random_range(0.0..0.9);
    for a in 0..nodes {
        for b in (a + 1)..nodes {
            let mut on = false;
            for s in 0..slots {
                on = if on { rng.random_bool(p_stay) } else { rng.random_bool(p_on) };
                if on {
                    let (u, v) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                    out.push(SlotOccurrence::new(NodeId(u), NodeId(v), s * SLOT_SECONDS).unwrap());
                    if rng.random_bool(0.05) {
                        out.push(SlotOccurrence::new(NodeId(v), NodeId(u), s * SLOT_SECONDS).unwrap());
                    }
                }
            }
        }
    }
    // Shuffle the input order.
    use rand::seq::SliceRandom;
    out.shuffle(rng);
    out
}

/// Per-slot run-length oracle: contacts as (a, b, start, end), sorted.
pub fn oracle_merge(occ: &[SlotOccurrence]) -> Vec<(u32, u32, Timestamp, Timestamp)> {
    let mut slots: BTreeMap<(u32, u32), BTreeSet<i64>> = BTreeMap::new();
    for o in occ {
        let p = o.pair();
        slots
            .entry((p.a().0, p.b().0))
            .or_default()
            .insert(o.slot_start() / SLOT_SECONDS);
    }
    let mut out = Vec::new();
    for ((a, b), s) in slots {
        let v: Vec<i64> = s.into_iter().collect();
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
                j += 1;
            }
            out.push((a, b, v[i] * SLOT_SECONDS, (v[j] + 1) * SLOT_SECONDS));
            i = j + 1;
        }
    }
    out.sort();
    out
}

pub fn as_tuples(l: &LinkStream) -> Vec<(u32, u32, Timestamp, Timestamp)> {
    let mut v: Vec<_> = l
        .contacts()
        .iter()
        .map(|c| (c.pair().a().0, c.pair().b().0, c.start(), c.end()))
        .collect();
    v.sort();
    v
}

/// Per-second occupancy oracle for restriction to `[t1, t2]`.
pub fn oracle_restrict(
    contacts: &[(u32, u32, Timestamp, Timestamp)],
    t1: Timestamp,
    t2: Timestamp,
) -> Vec<(u32, u32, Timestamp, Timestamp)> {
    let mut seconds: BTreeMap<(u32, u32), BTreeSet<i64>> = BTreeMap::new();
    for &(a, b, s, e) in contacts {
        for x in s.max(t1)..e.min(t2) {
            seconds.entry((a, b)).or_default().insert(x);
        }
    }
    let mut out = Vec::new();
    for ((a, b), s) in seconds {
        let v: Vec<i64> = s.into_iter().collect();
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
                j += 1;
            }
            out.push((a, b, v[i], v[j] + 1));
            i = j + 1;
        }
    }
    out.sort();
    out
}

pub fn stream_of(cs: &[(u32, u32, Timestamp, Timestamp)]) -> LinkStream {
    LinkStream::from_contacts(
        cs.iter()
            .map(|&(a, b, s, e)| Contact::new(pair(a, b), s, e).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn random_stream<R: Rng>(rng: &mut R, max_nodes: u32, max_slots: i64) -> LinkStream {
    let n = rng.random_range(2..=max_nodes);
    let slots = rng.random_range(1..=max_slots);
    linkstream::stream::merge_slots(random_occurrences(rng, n, slots))
}

/// Random assignment of `n` nodes to `k` groups, some left unassigned when
/// `holes` is set.
pub fn random_scheme<R: Rng>(rng: &mut R, n: usize, k: usize, holes: bool) -> Scheme {
    let membership = (0..n)
        .map(|_| {
            if holes && rng.random_bool(0.1) {
                None
            } else {
                Some(rng.random_range(0..k))
            }
        })
        .collect();
    Scheme::from_indices("random", k, membership)
}

pub fn random_roles<R: Rng>(rng: &mut R, n: usize) -> Roles {
    Roles(
        (0..n)
            .map(|_| match rng.random_range(0..5) {
                0 => None,
                1 | 2 => Some(Role::Patient),
                _ => Some(Role::Staff),
            })
            .collect(),
    )
}

/// Brute-force per-pair totals: scans every contact for every node pair.
pub fn brute_pair_totals(l: &LinkStream, n: u32) -> BTreeMap<(u32, u32), (u64, u64)> {
    let mut out = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let mut c = 0;
            let mut len = 0;
            for k in l.contacts() {
                if k.pair().a().0 == a && k.pair().b().0 == b {
                    c += 1;
                    len += k.length() as u64;
                }
            }
            if c > 0 {
                out.insert((a, b), (c, len));
            }
        }
    }
    out
}

pub fn max_node(l: &LinkStream) -> u32 {
    l.nodes().last().map_or(0, |n| n.0 + 1)
}
