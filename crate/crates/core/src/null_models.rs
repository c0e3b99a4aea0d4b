//! Reference networks used as denominators of every deviation factor.
//!
//! * full-uniform: complete graph on V(L), each pair carrying the mean number
//!   of adjacency pairs, contacts and cumulated length per node pair;
//! * contact-uniform: the real adjacency pairs, each with the mean number of
//!   contacts per adjacency pair;
//! * length-uniform: the real adjacency pairs and per-pair contact counts,
//!   every contact lasting the mean contact length;
//! * group-level configuration model: semi-units of each group matched at
//!   random, giving `|D_i||D_j| / |D|` expected units between groups.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grouping::{GroupSemiCounts, Scheme};
use crate::matrix::GroupMatrix;
use crate::stream::{LinkStream, NodeId, Pair, Param};

/// Relative tolerance of the conservation checks run at construction.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

const MC_SHARDS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NullModelError {
    #[error("full-uniform network needs at least 2 nodes, stream has {0}")]
    TooFewNodes(usize),
    #[error("{0} network of an empty stream is undefined")]
    EmptyStream(UniformKind),
    #[error("configuration model needs a positive semi-unit total")]
    ZeroTotal,
    #[error("random matching needs an even number of semi-units, got {0}")]
    OddSemiTotal(u64),
    #[error("monte-carlo needs at least one sample")]
    NoSamples,
    #[error("{kind} network does not conserve {quantity}: expected {expected}, got {got}")]
    Conservation {
        kind: UniformKind,
        quantity: &'static str,
        expected: f64,
        got: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformKind {
    FullUniform,
    ContactUniform,
    LengthUniform,
}

impl std::fmt::Display for UniformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UniformKind::FullUniform => "full-uniform",
            UniformKind::ContactUniform => "contact-uniform",
            UniformKind::LengthUniform => "length-uniform",
        })
    }
}

/// Values carried by one node pair of a uniform network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PairValues {
    pub adjacency: f64,
    pub contacts: f64,
    /// Not fixed by the contact-uniform model.
    pub length: Option<f64>,
}

impl PairValues {
    pub fn get(&self, param: Param) -> Option<f64> {
        match param {
            Param::Pairs => Some(self.adjacency),
            Param::Contacts => Some(self.contacts),
            Param::Length => self.length,
        }
    }

    fn add(&mut self, o: &PairValues, times: f64) {
        self.adjacency += o.adjacency * times;
        self.contacts += o.contacts * times;
        self.length = match (self.length, o.length) {
            (Some(a), Some(b)) => Some(a + b * times),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Carrier {
    /// Every pair of distinct nodes carries the same values.
    Complete(PairValues),
    /// Only the listed pairs exist.
    Edges(BTreeMap<Pair, PairValues>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformNetwork {
    pub kind: UniformKind,
    pub nodes: Vec<NodeId>,
    pub carrier: Carrier,
}

impl UniformNetwork {
    pub fn value(&self, pair: Pair) -> Option<PairValues> {
        match &self.carrier {
            Carrier::Complete(v) => {
                let inside = |n| self.nodes.binary_search(&n).is_ok();
                (inside(pair.a()) && inside(pair.b())).then_some(*v)
            }
            Carrier::Edges(m) => m.get(&pair).copied(),
        }
    }

    /// Sums over all pairs of the carrier graph.
    pub fn totals(&self) -> PairValues {
        match &self.carrier {
            Carrier::Complete(v) => {
                let n = self.nodes.len() as f64;
                let mut t = PairValues {
                    length: v.length.map(|_| 0.0),
                    ..Default::default()
                };
                t.add(v, n * (n - 1.0) / 2.0);
                t
            }
            Carrier::Edges(m) => {
                let mut t = PairValues {
                    length: Some(0.0),
                    ..Default::default()
                };
                for v in m.values() {
                    t.add(v, 1.0);
                }
                t
            }
        }
    }

    /// Internal and external totals of every group, by explicit enumeration of
    /// the carrier's pairs. Pairs touching an unassigned node are ignored.
    pub fn group_int_ext(&self, scheme: &Scheme) -> Vec<(PairValues, PairValues)> {
        let zero = PairValues {
            length: Some(0.0),
            ..Default::default()
        };
        let mut out = vec![(zero, zero); scheme.n_groups()];
        let mut visit = |a: NodeId, b: NodeId, v: &PairValues| {
            if let (Some(ga), Some(gb)) = (scheme.group_of(a), scheme.group_of(b)) {
                if ga == gb {
                    out[ga].0.add(v, 1.0);
                } else {
                    out[ga].1.add(v, 1.0);
                    out[gb].1.add(v, 1.0);
                }
            }
        };
        match &self.carrier {
            Carrier::Complete(v) => {
                for (k, &a) in self.nodes.iter().enumerate() {
                    for &b in &self.nodes[k + 1..] {
                        visit(a, b, v);
                    }
                }
            }
            Carrier::Edges(m) => {
                for (p, v) in m {
                    visit(p.a(), p.b(), v);
                }
            }
        }
        out
    }

    fn check_conservation(self, stream: &LinkStream) -> Result<Self, NullModelError> {
        let s = stream.stats();
        let t = self.totals();
        let mut checks = vec![("contacts", s.n_contacts as f64, t.contacts)];
        if self.kind == UniformKind::FullUniform {
            checks.push(("adjacency pairs", s.n_pairs as f64, t.adjacency));
        }
        if let Some(len) = t.length {
            checks.push(("cumulated length", s.cumul_length as f64, len));
        }
        for (quantity, expected, got) in checks {
            if (got - expected).abs() > CONSERVATION_TOLERANCE * expected.abs().max(1.0) {
                return Err(NullModelError::Conservation {
                    kind: self.kind,
                    quantity,
                    expected,
                    got,
                });
            }
        }
        Ok(self)
    }
}

/// Complete graph on V(L) spreading each total evenly: `2X / (|V|(|V|-1))`.
pub fn full_uniform(stream: &LinkStream) -> Result<UniformNetwork, NullModelError> {
    let n = stream.nodes().len();
    if n < 2 {
        return Err(NullModelError::TooFewNodes(n));
    }
    let s = stream.stats();
    let couples = (n * (n - 1)) as f64 / 2.0;
    let v = PairValues {
        adjacency: s.n_pairs as f64 / couples,
        contacts: s.n_contacts as f64 / couples,
        length: Some(s.cumul_length as f64 / couples),
    };
    UniformNetwork {
        kind: UniformKind::FullUniform,
        nodes: stream.nodes().to_vec(),
        carrier: Carrier::Complete(v),
    }
    .check_conservation(stream)
}

/// Real adjacency pairs, each with `#cont(L) / #pairs(L)` contacts.
pub fn contact_uniform(stream: &LinkStream) -> Result<UniformNetwork, NullModelError> {
    if stream.is_empty() {
        return Err(NullModelError::EmptyStream(UniformKind::ContactUniform));
    }
    let s = stream.stats();
    let v = PairValues {
        adjacency: 1.0,
        contacts: s.n_contacts as f64 / s.n_pairs as f64,
        length: None,
    };
    let edges = stream.pairs().iter().map(|&p| (p, v)).collect();
    UniformNetwork {
        kind: UniformKind::ContactUniform,
        nodes: stream.nodes().to_vec(),
        carrier: Carrier::Edges(edges),
    }
    .check_conservation(stream)
}

/// Real adjacency pairs and contact counts; each pair's length is
/// `#cont_{u,v} * cumul_length(L) / #cont(L)`.
pub fn length_uniform(stream: &LinkStream) -> Result<UniformNetwork, NullModelError> {
    if stream.is_empty() {
        return Err(NullModelError::EmptyStream(UniformKind::LengthUniform));
    }
    let s = stream.stats();
    let mean = s.cumul_length as f64 / s.n_contacts as f64;
    let edges = stream
        .pair_weights()
        .map(|(p, w)| {
            (
                p,
                PairValues {
                    adjacency: 1.0,
                    contacts: w.contacts as f64,
                    length: Some(w.contacts as f64 * mean),
                },
            )
        })
        .collect();
    UniformNetwork {
        kind: UniformKind::LengthUniform,
        nodes: stream.nodes().to_vec(),
        carrier: Carrier::Edges(edges),
    }
    .check_conservation(stream)
}

/// Expected units between groups under random matching of semi-units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigExpectation {
    pub param: Param,
    /// Semi-units per row group (`|D_i|` or `|E_i|`).
    pub row_semi: Vec<f64>,
    /// Semi-units per column group; equal to `row_semi` for the unipartite model.
    pub col_semi: Vec<f64>,
    /// Normalising total: `|D|` (unipartite) or the number of units (bipartite).
    pub total: f64,
    /// Off-diagonal expectations; the diagonal is `None`.
    pub expected: GroupMatrix<Option<f64>>,
}

impl ConfigExpectation {
    /// Unipartite model: `expected(i, j) = semi_i * semi_j / sum(semi)`.
    pub fn from_semi(
        param: Param,
        groups: &[String],
        semi: Vec<f64>,
    ) -> Result<Self, NullModelError> {
        let total: f64 = semi.iter().sum();
        Self::build(param, groups, groups, semi.clone(), semi, total)
    }

    /// Bipartite model between two role classes: every unit joins one row
    /// semi-unit to one column semi-unit, so
    /// `expected(i, j) = row_i * col_j / units`.
    pub fn from_bipartite(
        param: Param,
        rows: &[String],
        cols: &[String],
        row_semi: Vec<f64>,
        col_semi: Vec<f64>,
    ) -> Result<Self, NullModelError> {
        let total: f64 = row_semi.iter().sum();
        Self::build(param, rows, cols, row_semi, col_semi, total)
    }

    fn build(
        param: Param,
        rows: &[String],
        cols: &[String],
        row_semi: Vec<f64>,
        col_semi: Vec<f64>,
        total: f64,
    ) -> Result<Self, NullModelError> {
        if total <= 0.0 {
            return Err(NullModelError::ZeroTotal);
        }
        let mut expected = GroupMatrix::filled(rows, cols, None);
        for (i, ri) in row_semi.iter().enumerate() {
            for (j, cj) in col_semi.iter().enumerate() {
                if i != j {
                    expected.set(i, j, Some(ri * cj / total));
                }
            }
        }
        Ok(Self {
            param,
            row_semi,
            col_semi,
            total,
            expected,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        *self.expected.get(i, j)
    }
}

/// Configuration-model expectation of `param` from per-group semi counts.
pub fn config_expectation(
    counts: &GroupSemiCounts,
    param: Param,
) -> Result<ConfigExpectation, NullModelError> {
    let semi = counts
        .semi_totals(param)
        .into_iter()
        .map(|x| x as f64)
        .collect();
    ConfigExpectation::from_semi(param, &counts.groups, semi)
}

/// Mean cross-group pair counts over `samples` uniform perfect matchings of
/// all semi-units (internal matches allowed). Deterministic for a given seed
/// regardless of thread count.
pub fn config_monte_carlo(
    semi: &[u64],
    samples: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>, NullModelError> {
    if samples == 0 {
        return Err(NullModelError::NoSamples);
    }
    let total: u64 = semi.iter().sum();
    if total % 2 == 1 {
        return Err(NullModelError::OddSemiTotal(total));
    }
    let k = semi.len();
    let labels: Vec<u16> = semi
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat_n(g as u16, n as usize))
        .collect();
    let shard_tallies: Vec<Vec<u64>> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = samples / MC_SHARDS + u64::from(shard < samples % MC_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut deck = labels.clone();
            let mut tally = vec![0u64; k * k];
            for _ in 0..n {
                deck.shuffle(&mut rng);
                for m in deck.chunks_exact(2) {
                    let (x, y) = (m[0] as usize, m[1] as usize);
                    if x != y {
                        tally[x * k + y] += 1;
                        tally[y * k + x] += 1;
                    }
                }
            }
            tally
        })
        .collect();
    let mut sum = vec![0u64; k * k];
    for t in &shard_tallies {
        for (s, v) in sum.iter_mut().zip(t) {
            *s += v;
        }
    }
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|j| sum[i * k + j] as f64 / samples as f64)
                .collect()
        })
        .collect())
}
