//! Roles, group schemes and semi-unit accounting.
//!
//! Every adjacency pair, contact and length unit gives one *semi-unit* to each
//! endpoint. A group's semi-total is therefore twice its internal units plus
//! its external units, and semi-totals over all groups add up to twice the
//! stream total.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{natural_cmp, NodeRegistry};
use crate::stream::{LinkStream, NodeId, Pair, Param, StreamStats};

pub const SERVICE: &str = "service";
pub const CATEGORY: &str = "category";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("node {node} has no membership under scheme {scheme:?}")]
    MissingMembership { node: String, scheme: String },
    #[error("node {node} has no role")]
    MissingRole { node: String },
    #[error("staff member {node} has no category")]
    MissingCategory { node: String },
    #[error("patient {node} carries a category membership")]
    PatientWithCategory { node: String },
    #[error("group schemes differ: {0}")]
    SchemeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "PA")]
    Patient,
    #[serde(rename = "ST")]
    Staff,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Patient, Role::Staff];

    pub fn code(self) -> &'static str {
        match self {
            Role::Patient => "PA",
            Role::Staff => "ST",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PA" | "pa" => Ok(Role::Patient),
            "ST" | "st" => Ok(Role::Staff),
            other => Err(format!("unknown role {other:?} (expected PA or ST)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAttributes {
    pub node: String,
    pub role: Role,
    /// Scheme name -> group label.
    pub memberships: BTreeMap<String, String>,
}

impl NodeAttributes {
    pub fn new(node: impl Into<String>, role: Role) -> Self {
        Self {
            node: node.into(),
            role,
            memberships: BTreeMap::new(),
        }
    }

    pub fn with(mut self, scheme: &str, group: impl Into<String>) -> Self {
        self.memberships.insert(scheme.to_string(), group.into());
        self
    }
}

/// Attributes of every known node, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Population {
    attrs: BTreeMap<String, NodeAttributes>,
}

impl Population {
    /// Checks the role-dependent invariants. Duplicates are the parser's job.
    pub fn new(attrs: impl IntoIterator<Item = NodeAttributes>) -> Result<Self, GroupingError> {
        let mut map = BTreeMap::new();
        for a in attrs {
            if a.role == Role::Patient && a.memberships.contains_key(CATEGORY) {
                return Err(GroupingError::PatientWithCategory { node: a.node });
            }
            map.insert(a.node.clone(), a);
        }
        Ok(Self { attrs: map })
    }

    pub fn get(&self, node: &str) -> Option<&NodeAttributes> {
        self.attrs.get(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeAttributes> {
        self.attrs.values()
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attrs.keys().map(String::as_str)
    }

    /// Per-id roles for the nodes of `registry`.
    pub fn roles(&self, registry: &NodeRegistry) -> Roles {
        Roles(
            registry
                .names()
                .iter()
                .map(|n| self.attrs.get(n).map(|a| a.role))
                .collect(),
        )
    }

    /// Builds the group assignment of `scheme` over the nodes of `registry`.
    ///
    /// Under the category scheme every staff member must have a category;
    /// patients are left unassigned.
    pub fn scheme(&self, registry: &NodeRegistry, scheme: &str) -> Result<Scheme, GroupingError> {
        let mut membership = Vec::with_capacity(registry.len());
        for name in registry.names() {
            let group = match self.attrs.get(name) {
                Some(a) => {
                    let g = a.memberships.get(scheme).cloned();
                    if scheme == CATEGORY && a.role == Role::Staff && g.is_none() {
                        return Err(GroupingError::MissingCategory { node: name.clone() });
                    }
                    g
                }
                None => None,
            };
            membership.push(group);
        }
        // Include groups of rostered nodes absent from the registry so that
        // matrices keep a stable shape.
        let mut labels: Vec<String> = self
            .attrs
            .values()
            .filter_map(|a| a.memberships.get(scheme).cloned())
            .collect();
        labels.sort_by(|a, b| natural_cmp(a, b));
        labels.dedup();
        Ok(Scheme::from_labels(scheme, labels, membership))
    }
}

/// Role of every node id (`None` when unknown).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roles(pub Vec<Option<Role>>);

impl Roles {
    pub fn get(&self, n: NodeId) -> Option<Role> {
        self.0.get(n.index()).copied().flatten()
    }

    pub fn uniform(n: usize, role: Role) -> Self {
        Self(vec![Some(role); n])
    }
}

/// Group assignment of node ids under one named scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    name: String,
    groups: Vec<String>,
    membership: Vec<Option<usize>>,
}

/// Result of [`classify_pair`]: the two groups (`group_i <= group_j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairClass {
    pub group_i: usize,
    pub group_j: usize,
    pub internal: bool,
}

impl Scheme {
    /// `groups` fixes the group order; labels referenced by `membership` but
    /// absent from it are appended.
    pub fn from_labels(
        name: &str,
        mut groups: Vec<String>,
        membership: Vec<Option<String>>,
    ) -> Self {
        for label in membership.iter().flatten() {
            if !groups.contains(label) {
                groups.push(label.clone());
            }
        }
        let membership = membership
            .into_iter()
            .map(|g| g.map(|g| groups.iter().position(|x| *x == g).expect("label present")))
            .collect();
        Self {
            name: name.to_string(),
            groups,
            membership,
        }
    }

    /// Scheme with groups `0..n_groups` labelled `G1..Gn`.
    pub fn from_indices(name: &str, n_groups: usize, membership: Vec<Option<usize>>) -> Self {
        assert!(membership.iter().flatten().all(|&g| g < n_groups));
        Self {
            name: name.to_string(),
            groups: (1..=n_groups).map(|i| format!("G{i}")).collect(),
            membership,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, n: NodeId) -> Option<usize> {
        self.membership.get(n.index()).copied().flatten()
    }

    pub fn is_classified(&self, p: Pair) -> bool {
        self.group_of(p.a()).is_some() && self.group_of(p.b()).is_some()
    }

    /// Splits `stream` into the contacts whose endpoints both belong to a
    /// group, and the totals of the excluded rest.
    pub fn filter_stream(&self, stream: &LinkStream) -> (LinkStream, StreamStats) {
        let kept = stream.filter_pairs(|p| self.is_classified(p));
        let all = stream.stats();
        let k = kept.stats();
        let excluded = StreamStats {
            n_pairs: all.n_pairs - k.n_pairs,
            n_contacts: all.n_contacts - k.n_contacts,
            cumul_length: all.cumul_length - k.cumul_length,
        };
        (kept, excluded)
    }

    /// Number of nodes of `nodes` in each group.
    pub fn count_members<'a>(&self, nodes: impl IntoIterator<Item = &'a NodeId>) -> Vec<u64> {
        let mut out = vec![0; self.n_groups()];
        for &n in nodes {
            if let Some(g) = self.group_of(n) {
                out[g] += 1;
            }
        }
        out
    }
}

pub fn classify_pair(pair: Pair, scheme: &Scheme) -> Result<PairClass, GroupingError> {
    let g = |n: NodeId| {
        scheme
            .group_of(n)
            .ok_or_else(|| GroupingError::MissingMembership {
                node: n.to_string(),
                scheme: scheme.name.clone(),
            })
    };
    let (x, y) = (g(pair.a())?, g(pair.b())?);
    Ok(PairClass {
        group_i: x.min(y),
        group_j: x.max(y),
        internal: x == y,
    })
}

/// What to do with units touching a node that has no group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    Reject,
    #[default]
    Exclude,
}

/// Internal/external split of every parameter, per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSemiCounts {
    pub groups: Vec<String>,
    /// Unordered internal units; each is worth two semi-units to its group.
    pub internal: Vec<StreamStats>,
    /// External units; each is worth one semi-unit to each endpoint group.
    pub external: Vec<StreamStats>,
    /// Units dropped because an endpoint had no group.
    pub excluded: StreamStats,
}

impl GroupSemiCounts {
    pub fn zeros(groups: &[String]) -> Self {
        Self {
            groups: groups.to_vec(),
            internal: vec![StreamStats::default(); groups.len()],
            external: vec![StreamStats::default(); groups.len()],
            excluded: StreamStats::default(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn semi_total(&self, g: usize) -> StreamStats {
        self.internal[g].scaled(2) + self.external[g]
    }

    /// `|D_i|` for pairs, `|E_i|` for length.
    pub fn semi_totals(&self, param: Param) -> Vec<u64> {
        (0..self.n_groups())
            .map(|g| self.semi_total(g).get(param))
            .collect()
    }

    pub fn total_semi(&self, param: Param) -> u64 {
        self.semi_totals(param).iter().sum()
    }
}

impl AddAssign<&GroupSemiCounts> for GroupSemiCounts {
    fn add_assign(&mut self, rhs: &GroupSemiCounts) {
        assert_eq!(self.groups, rhs.groups, "adding counts of different schemes");
        for g in 0..self.groups.len() {
            self.internal[g] += rhs.internal[g];
            self.external[g] += rhs.external[g];
        }
        self.excluded += rhs.excluded;
    }
}

/// Per-group internal/external units of `stream` under `scheme`.
pub fn group_semi_counts(
    stream: &LinkStream,
    scheme: &Scheme,
    policy: MissingPolicy,
) -> Result<GroupSemiCounts, GroupingError> {
    let mut out = GroupSemiCounts::zeros(&scheme.groups);
    for (pair, w) in stream.pair_weights() {
        let unit = StreamStats {
            n_pairs: 1,
            n_contacts: w.contacts,
            cumul_length: w.length,
        };
        match classify_pair(pair, scheme) {
            Ok(c) if c.internal => out.internal[c.group_i] += unit,
            Ok(c) => {
                out.external[c.group_i] += unit;
                out.external[c.group_j] += unit;
            }
            Err(e) if policy == MissingPolicy::Reject => return Err(e),
            Err(_) => out.excluded += unit,
        }
    }
    Ok(out)
}

/// Role class of a pair: PA-PA, PA-ST or ST-ST.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RoleClass {
    #[serde(rename = "PA-PA")]
    PatientPatient,
    #[serde(rename = "PA-ST")]
    PatientStaff,
    #[serde(rename = "ST-ST")]
    StaffStaff,
}

impl RoleClass {
    pub const ALL: [RoleClass; 3] = [
        RoleClass::PatientPatient,
        RoleClass::PatientStaff,
        RoleClass::StaffStaff,
    ];

    pub fn of(x: Role, y: Role) -> Self {
        match (x, y) {
            (Role::Patient, Role::Patient) => RoleClass::PatientPatient,
            (Role::Staff, Role::Staff) => RoleClass::StaffStaff,
            _ => RoleClass::PatientStaff,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RoleClass::PatientPatient => "PA-PA",
            RoleClass::PatientStaff => "PA-ST",
            RoleClass::StaffStaff => "ST-ST",
        }
    }

    /// Semi-units this class gives to endpoints of role `centre` whose partner
    /// has role `partner`.
    fn semi_weight(self, centre: Role, partner: Role) -> u64 {
        match (self, centre, partner) {
            (RoleClass::PatientPatient, Role::Patient, Role::Patient) => 2,
            (RoleClass::StaffStaff, Role::Staff, Role::Staff) => 2,
            (RoleClass::PatientStaff, c, p) if c != p => 1,
            _ => 0,
        }
    }
}

/// Accumulated units per role class, optionally split internal/external.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleTally {
    pub all: [StreamStats; 3],
    pub internal: [StreamStats; 3],
    pub external: [StreamStats; 3],
    pub split: bool,
    pub excluded: StreamStats,
}

impl RoleTally {
    /// Pairs with an endpoint lacking a role (or a group, when `split` is
    /// given) are excluded and counted in `excluded`.
    pub fn from_stream(stream: &LinkStream, roles: &Roles, split: Option<&Scheme>) -> Self {
        let mut t = RoleTally {
            split: split.is_some(),
            ..Default::default()
        };
        for (pair, w) in stream.pair_weights() {
            let unit = StreamStats {
                n_pairs: 1,
                n_contacts: w.contacts,
                cumul_length: w.length,
            };
            let (Some(ra), Some(rb)) = (roles.get(pair.a()), roles.get(pair.b())) else {
                t.excluded += unit;
                continue;
            };
            let class = RoleClass::of(ra, rb) as usize;
            if let Some(scheme) = split {
                match classify_pair(pair, scheme) {
                    Ok(c) if c.internal => t.internal[class] += unit,
                    Ok(_) => t.external[class] += unit,
                    Err(_) => {
                        t.excluded += unit;
                        continue;
                    }
                }
            }
            t.all[class] += unit;
        }
        t
    }
}

impl AddAssign<&RoleTally> for RoleTally {
    fn add_assign(&mut self, rhs: &RoleTally) {
        for k in 0..3 {
            self.all[k] += rhs.all[k];
            self.internal[k] += rhs.internal[k];
            self.external[k] += rhs.external[k];
        }
        self.excluded += rhs.excluded;
        self.split = self.split || rhs.split;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMode {
    Global,
    CentredOnPatients,
    CentredOnStaff,
}

impl TableMode {
    pub const ALL: [TableMode; 3] = [
        TableMode::Global,
        TableMode::CentredOnPatients,
        TableMode::CentredOnStaff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableMode::Global => "global",
            TableMode::CentredOnPatients => "centred_PA",
            TableMode::CentredOnStaff => "centred_ST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<f64>,
    pub total: f64,
}

/// Distribution of one parameter over role classes, as fractions of the
/// table total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleClassTable {
    pub mode: TableMode,
    pub param: Param,
    pub columns: Vec<String>,
    /// `[ext, int, all]` when split, otherwise `[all]`.
    pub rows: Vec<TableRow>,
    /// Units (or semi-units for centred modes) behind the fractions.
    pub total_units: u64,
}

impl RoleTally {
    pub fn table(&self, mode: TableMode, param: Param) -> RoleClassTable {
        let project = |counts: &[StreamStats; 3]| -> Vec<u64> {
            match mode {
                TableMode::Global => counts.iter().map(|s| s.get(param)).collect(),
                TableMode::CentredOnPatients | TableMode::CentredOnStaff => {
                    let centre = if mode == TableMode::CentredOnPatients {
                        Role::Patient
                    } else {
                        Role::Staff
                    };
                    Role::ALL
                        .iter()
                        .map(|&partner| {
                            RoleClass::ALL
                                .iter()
                                .map(|&c| {
                                    c.semi_weight(centre, partner) * counts[c as usize].get(param)
                                })
                                .sum()
                        })
                        .collect()
                }
            }
        };
        let columns: Vec<String> = match mode {
            TableMode::Global => RoleClass::ALL.iter().map(|c| c.label().to_string()).collect(),
            _ => Role::ALL.iter().map(|r| r.code().to_string()).collect(),
        };
        let all = project(&self.all);
        let total_units: u64 = all.iter().sum();
        let frac = |v: &[u64]| -> TableRow {
            let values: Vec<f64> = v
                .iter()
                .map(|&x| {
                    if total_units == 0 {
                        0.0
                    } else {
                        x as f64 / total_units as f64
                    }
                })
                .collect();
            TableRow {
                label: String::new(),
                total: values.iter().sum(),
                values,
            }
        };
        let mut rows = Vec::new();
        if self.split {
            rows.push(TableRow {
                label: "ext".into(),
                ..frac(&project(&self.external))
            });
            rows.push(TableRow {
                label: "int".into(),
                ..frac(&project(&self.internal))
            });
        }
        rows.push(TableRow {
            label: "all".into(),
            ..frac(&all)
        });
        RoleClassTable {
            mode,
            param,
            columns,
            rows,
            total_units,
        }
    }
}

/// Role-class distribution of `param` over `stream`.
pub fn role_class_table(
    stream: &LinkStream,
    roles: &Roles,
    mode: TableMode,
    split: Option<&Scheme>,
    param: Param,
) -> RoleClassTable {
    RoleTally::from_stream(stream, roles, split).table(mode, param)
}
