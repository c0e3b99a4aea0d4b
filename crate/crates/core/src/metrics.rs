//! Introversion factors, affinity densities, deviation matrices and the
//! favoured/unfavoured classification of group relationships.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouping::{group_semi_counts, GroupingError, MissingPolicy, Role, Roles, Scheme};
use crate::matrix::{Cell, GroupMatrix};
use crate::null_models::{
    contact_uniform, full_uniform, length_uniform, ConfigExpectation, NullModelError,
    PairValues, UniformKind, UniformNetwork,
};
use crate::stream::{LinkStream, Param, StreamStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    NullModel(#[from] NullModelError),
    #[error("matrix shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: a series has zero variance")]
    ZeroVariance,
    #[error("affinity is defined for pairs and length, not {0}")]
    UnsupportedParam(Param),
    #[error("no days to aggregate")]
    NoDays,
}

// ---------------------------------------------------------------------------
// Introversion

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupIntroversion {
    pub group: String,
    /// Members present (summed over days for multi-day reports).
    pub members: u64,
    pub real_int: f64,
    pub real_ext: f64,
    pub baseline_int: f64,
    pub baseline_ext: f64,
    pub ratio_real: Cell,
    pub ratio_baseline: Cell,
    pub factor: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntroversionReport {
    pub scheme: String,
    pub param: Param,
    pub baseline: UniformKind,
    pub groups: Vec<GroupIntroversion>,
    /// Units left out because an endpoint had no group.
    pub excluded: StreamStats,
}

pub fn baseline_kind(param: Param) -> UniformKind {
    match param {
        Param::Pairs => UniformKind::FullUniform,
        Param::Contacts => UniformKind::ContactUniform,
        Param::Length => UniformKind::LengthUniform,
    }
}

/// Int/ext ratio of a group of `n_g` members among `n` nodes in the
/// full-uniform network: `(n_g - 1) / (2 (n - n_g))`.
pub fn full_uniform_pair_ratio(n_g: u64, n: u64) -> Cell {
    let num = n_g.saturating_sub(1) as f64;
    let den = 2.0 * n.saturating_sub(n_g) as f64;
    if n_g == 0 {
        Cell::Undefined
    } else {
        Cell::ratio(num, den)
    }
}

fn baseline_network(stream: &LinkStream, param: Param) -> Result<UniformNetwork, NullModelError> {
    match param {
        Param::Pairs => full_uniform(stream),
        Param::Contacts => contact_uniform(stream),
        Param::Length => length_uniform(stream),
    }
}

/// Component of `param` that the baseline compares: pairs use adjacency,
/// contacts use contact counts, length uses length.
fn baseline_value(v: &PairValues, param: Param) -> f64 {
    v.get(param).unwrap_or(0.0)
}

/// Factor of introversion of every group of `scheme` for `param` on `stream`.
pub fn introversion_factor(
    stream: &LinkStream,
    scheme: &Scheme,
    param: Param,
) -> Result<IntroversionReport, MetricsError> {
    introversion_over_days([(stream, scheme)], param)
}

/// Introversion aggregated over several periods (typically days): real and
/// baseline internal/external values are summed before taking ratios.
/// Empty periods contribute nothing.
pub fn introversion_over_days<'a>(
    days: impl IntoIterator<Item = (&'a LinkStream, &'a Scheme)>,
    param: Param,
) -> Result<IntroversionReport, MetricsError> {
    // (scheme name, labels, [real int, real ext, baseline int, baseline ext], members)
    type Acc = (String, Vec<String>, Vec<[f64; 4]>, Vec<u64>);
    let mut acc: Option<Acc> = None;
    let mut excluded = StreamStats::default();
    for (stream, scheme) in days {
        let (kept, ex) = scheme.filter_stream(stream);
        excluded += ex;
        let state = acc.get_or_insert_with(|| {
            (
                scheme.name().to_string(),
                scheme.groups().to_vec(),
                vec![[0.0; 4]; scheme.n_groups()],
                vec![0; scheme.n_groups()],
            )
        });
        if state.1 != scheme.groups() {
            return Err(GroupingError::SchemeMismatch(format!(
                "{:?} vs {:?}",
                state.1,
                scheme.groups()
            ))
            .into());
        }
        if kept.is_empty() {
            continue;
        }
        let counts = group_semi_counts(&kept, scheme, MissingPolicy::Reject)?;
        let base = baseline_network(&kept, param)?.group_int_ext(scheme);
        let members = scheme.count_members(kept.nodes());
        for g in 0..scheme.n_groups() {
            let s = &mut state.2[g];
            s[0] += counts.internal[g].get(param) as f64;
            s[1] += counts.external[g].get(param) as f64;
            s[2] += baseline_value(&base[g].0, param);
            s[3] += baseline_value(&base[g].1, param);
            state.3[g] += members[g];
        }
    }
    let (scheme, groups, sums, members) = acc.ok_or(MetricsError::NoDays)?;
    let groups = groups
        .into_iter()
        .enumerate()
        .map(|(g, group)| {
            let [ri, re, bi, be] = sums[g];
            let ratio_real = Cell::ratio(ri, re);
            let ratio_baseline = Cell::ratio(bi, be);
            GroupIntroversion {
                group,
                members: members[g],
                real_int: ri,
                real_ext: re,
                baseline_int: bi,
                baseline_ext: be,
                ratio_real,
                ratio_baseline,
                factor: ratio_real.over(ratio_baseline),
            }
        })
        .collect();
    Ok(IntroversionReport {
        scheme,
        param,
        baseline: baseline_kind(param),
        groups,
        excluded,
    })
}

// ---------------------------------------------------------------------------
// Affinity and deviation

/// Members of each group, in total and per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSizes {
    pub total: Vec<u64>,
    pub by_role: Vec<[u64; 2]>,
}

impl GroupSizes {
    /// Counts the given (distinct) nodes.
    pub fn from_nodes<'a>(
        nodes: impl IntoIterator<Item = &'a crate::stream::NodeId>,
        scheme: &Scheme,
        roles: &Roles,
    ) -> Self {
        let mut total = vec![0; scheme.n_groups()];
        let mut by_role = vec![[0; 2]; scheme.n_groups()];
        for &n in nodes {
            if let Some(g) = scheme.group_of(n) {
                total[g] += 1;
                if let Some(r) = roles.get(n) {
                    by_role[g][r.index()] += 1;
                }
            }
        }
        Self { total, by_role }
    }

    /// Nodes with at least one contact in `stream`.
    pub fn active(stream: &LinkStream, scheme: &Scheme, roles: &Roles) -> Self {
        Self::from_nodes(stream.nodes(), scheme, roles)
    }

    pub fn count(&self, g: usize, role: Option<Role>) -> u64 {
        match role {
            None => self.total[g],
            Some(r) => self.by_role[g][r.index()],
        }
    }
}

/// One period's stream with the group structure in force during it.
#[derive(Debug, Clone, Copy)]
pub struct DayView<'a> {
    pub stream: &'a LinkStream,
    pub scheme: &'a Scheme,
    pub roles: &'a Roles,
    pub sizes: &'a GroupSizes,
}

/// Restriction of affinities to units between a row role and a column role.
pub type RoleFilter = Option<(Role, Role)>;

#[derive(Debug, Clone, PartialEq)]
pub struct DayAffinity {
    /// Raw units between row group i and column group j.
    pub real: GroupMatrix<f64>,
    /// `real / (|S_i||S_j|)`; `None` on the diagonal and when a size is zero.
    pub density: GroupMatrix<Option<f64>>,
    /// Configuration-model expectation divided by the same size product.
    pub expected_density: GroupMatrix<Option<f64>>,
}

fn check_affinity_param(param: Param) -> Result<(), MetricsError> {
    match param {
        Param::Pairs | Param::Length => Ok(()),
        Param::Contacts => Err(MetricsError::UnsupportedParam(param)),
    }
}

/// Real and expected affinity densities of one period.
///
/// Without a role filter (or with a filter whose two roles coincide) the
/// unipartite configuration model is used. With a filter `(r, c)`, `r != c`,
/// rows are the `r` members of each group, columns the `c` members, and the
/// expectation is the bipartite matching `row_i * col_j / units`.
pub fn day_affinity(
    day: &DayView<'_>,
    param: Param,
    filter: RoleFilter,
) -> Result<DayAffinity, MetricsError> {
    check_affinity_param(param)?;
    let scheme = day.scheme;
    let k = scheme.n_groups();
    let labels = scheme.groups();
    let mut real = GroupMatrix::filled(labels, labels, 0.0);
    let mut row_semi = vec![0.0; k];
    let mut col_semi = vec![0.0; k];
    let bipartite = matches!(filter, Some((r, c)) if r != c);
    for (pair, w) in day.stream.pair_weights() {
        let (a, b) = (pair.a(), pair.b());
        let (Some(ga), Some(gb)) = (scheme.group_of(a), scheme.group_of(b)) else {
            continue;
        };
        let v = match param {
            Param::Pairs => 1.0,
            _ => w.length as f64,
        };
        match filter {
            None => {}
            Some((r, c)) => {
                let (ra, rb) = (day.roles.get(a), day.roles.get(b));
                if bipartite {
                    let (gr, gc) = if ra == Some(r) && rb == Some(c) {
                        (ga, gb)
                    } else if ra == Some(c) && rb == Some(r) {
                        (gb, ga)
                    } else {
                        continue;
                    };
                    *real.get_mut(gr, gc) += v;
                    row_semi[gr] += v;
                    col_semi[gc] += v;
                    continue;
                }
                if ra != Some(r) || rb != Some(r) {
                    continue;
                }
            }
        }
        if ga != gb {
            *real.get_mut(ga, gb) += v;
            *real.get_mut(gb, ga) += v;
        }
        row_semi[ga] += v;
        row_semi[gb] += v;
    }
    let expected = if bipartite {
        ConfigExpectation::from_bipartite(param, labels, labels, row_semi, col_semi)
    } else {
        ConfigExpectation::from_semi(param, labels, row_semi)
    };
    let (row_role, col_role) = match filter {
        Some((r, c)) => (Some(r), Some(c)),
        None => (None, None),
    };
    let size_product = |i: usize, j: usize| {
        (i != j).then(|| {
            day.sizes.count(i, row_role) as f64 * day.sizes.count(j, col_role) as f64
        })
        .filter(|&s| s > 0.0)
    };
    let density = real.map(|i, j, v| size_product(i, j).map(|s| v / s));
    let expected_density = match expected {
        Ok(e) => e
            .expected
            .map(|i, j, v| size_product(i, j).map(|s| v.unwrap_or(0.0) / s)),
        // No units at all this period: nothing is expected either.
        Err(NullModelError::ZeroTotal) => real.map(|i, j, _| size_product(i, j).map(|_| 0.0)),
        Err(e) => return Err(e.into()),
    };
    Ok(DayAffinity {
        real,
        density,
        expected_density,
    })
}

/// Mean density of `param` between groups, averaged over periods in which the
/// cell is defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityMatrix {
    pub scheme: String,
    pub param: Param,
    pub role_filter: RoleFilter,
    pub density: GroupMatrix<Cell>,
    /// Number of periods contributing to each cell.
    pub days_used: GroupMatrix<u64>,
    /// Off-diagonal (period, cell) combinations skipped for a zero size product.
    pub excluded_cells: u64,
}

pub fn affinity_density(
    days: &[DayView<'_>],
    param: Param,
    filter: RoleFilter,
) -> Result<AffinityMatrix, MetricsError> {
    let first = days.first().ok_or(MetricsError::NoDays)?;
    let daily = days
        .iter()
        .map(|d| day_affinity(d, param, filter).map(|a| a.density))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = first.scheme.groups();
    let mut sum = GroupMatrix::filled(labels, labels, 0.0);
    let mut used = GroupMatrix::filled(labels, labels, 0u64);
    let mut excluded_cells = 0;
    for m in &daily {
        if !m.same_shape(&sum) {
            return Err(MetricsError::ShapeMismatch(format!("{:?}", m.rows)));
        }
        for (i, j, v) in m.cells() {
            match v {
                Some(v) => {
                    *sum.get_mut(i, j) += v;
                    *used.get_mut(i, j) += 1;
                }
                None if i != j => excluded_cells += 1,
                None => {}
            }
        }
    }
    if excluded_cells > 0 {
        log::debug!(
            "affinity {param}: {excluded_cells} day-cells excluded for empty groups"
        );
    }
    let density = sum.map(|i, j, s| {
        let n = *used.get(i, j);
        if n == 0 {
            Cell::Undefined
        } else {
            Cell::Value(s / n as f64)
        }
    });
    Ok(AffinityMatrix {
        scheme: first.scheme.name().to_string(),
        param,
        role_filter: filter,
        density,
        days_used: used,
        excluded_cells,
    })
}

/// Real intensity, its expectation and their ratio for every group pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationMatrix {
    /// Mean real density over the periods where the cell is defined.
    pub density_real: GroupMatrix<Cell>,
    /// Mean expected density over the same periods.
    pub expected: GroupMatrix<Cell>,
    /// `sum(real) / sum(expected)` over those periods.
    pub deviation: GroupMatrix<Cell>,
    pub symmetric: bool,
}

/// Deviation as ratio of sums over periods; a cell is used in a period only
/// when both its real and expected values are defined.
pub fn deviation_matrix(
    real_per_day: &[GroupMatrix<Option<f64>>],
    expected_per_day: &[GroupMatrix<Option<f64>>],
) -> Result<DeviationMatrix, MetricsError> {
    if real_per_day.len() != expected_per_day.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} real periods vs {} expected periods",
            real_per_day.len(),
            expected_per_day.len()
        )));
    }
    let first = real_per_day.first().ok_or(MetricsError::NoDays)?;
    let mut sums = GroupMatrix::filled(&first.rows, &first.cols, (0.0, 0.0, 0u64));
    for (r, e) in real_per_day.iter().zip(expected_per_day) {
        if !r.same_shape(first) || !e.same_shape(first) {
            return Err(MetricsError::ShapeMismatch(format!(
                "{:?}x{:?} vs {:?}x{:?}",
                first.rows, first.cols, e.rows, e.cols
            )));
        }
        for (i, j, rv) in r.cells() {
            if let (Some(rv), Some(ev)) = (rv, e.get(i, j)) {
                let s = sums.get_mut(i, j);
                s.0 += rv;
                s.1 += ev;
                s.2 += 1;
            }
        }
    }
    let mean = |x: f64, n: u64| {
        if n == 0 {
            Cell::Undefined
        } else {
            Cell::Value(x / n as f64)
        }
    };
    let density_real = sums.map(|_, _, s| mean(s.0, s.2));
    let expected = sums.map(|_, _, s| mean(s.1, s.2));
    let deviation = sums.map(|_, _, s| {
        if s.2 == 0 {
            Cell::Undefined
        } else {
            Cell::ratio(s.0, s.1)
        }
    });
    let symmetric = deviation.is_symmetric();
    Ok(DeviationMatrix {
        density_real,
        expected,
        deviation,
        symmetric,
    })
}

/// Daily affinity plus its deviation from the configuration model.
pub fn affinity_deviation(
    days: &[DayView<'_>],
    param: Param,
    filter: RoleFilter,
) -> Result<DeviationMatrix, MetricsError> {
    let mut real = Vec::with_capacity(days.len());
    let mut expected = Vec::with_capacity(days.len());
    for d in days {
        let a = day_affinity(d, param, filter)?;
        real.push(a.density);
        expected.push(a.expected_density);
    }
    deviation_matrix(&real, &expected)
}

// ---------------------------------------------------------------------------
// Relationship polarity

/// Classification thresholds. Unfavoured thresholds are the reciprocals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub neutral: f64,
    pub strong: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            neutral: 1.0,
            strong: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    StronglyFavoured,
    ClearlyFavoured,
    Neutral,
    /// Factors on opposite sides of neutral, one of them strongly deviated.
    Mixed,
    ClearlyUnfavoured,
    StronglyUnfavoured,
    /// At least one factor is undefined.
    Undetermined,
}

impl Polarity {
    /// Position on the favoured/unfavoured axis.
    pub fn rank(self) -> i8 {
        match self {
            Polarity::StronglyFavoured => 2,
            Polarity::ClearlyFavoured => 1,
            Polarity::Neutral | Polarity::Mixed | Polarity::Undetermined => 0,
            Polarity::ClearlyUnfavoured => -1,
            Polarity::StronglyUnfavoured => -2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarity::StronglyFavoured => "strongly-favoured",
            Polarity::ClearlyFavoured => "clearly-favoured",
            Polarity::Neutral => "neutral",
            Polarity::Mixed => "mixed",
            Polarity::ClearlyUnfavoured => "clearly-unfavoured",
            Polarity::StronglyUnfavoured => "strongly-unfavoured",
            Polarity::Undetermined => "undetermined",
        }
    }

    /// Labels produced by this tool's own rules for borderline or undefined
    /// cells rather than by the threshold bands.
    pub fn is_heuristic(self) -> bool {
        matches!(self, Polarity::Mixed | Polarity::Undetermined)
    }
}

/// Label of a relationship from its pairs and length deviation factors.
pub fn classify(pairs: Cell, length: Cell, th: &Thresholds) -> Polarity {
    let (Some(x), Some(y)) = (pairs.as_f64(), length.as_f64()) else {
        return Polarity::Undetermined;
    };
    let (lo, hi) = (x.min(y), x.max(y));
    let (neutral_lo, strong_lo) = (1.0 / th.neutral, 1.0 / th.strong);
    if lo > th.strong {
        Polarity::StronglyFavoured
    } else if lo > th.neutral && hi > th.strong {
        Polarity::ClearlyFavoured
    } else if hi < strong_lo {
        Polarity::StronglyUnfavoured
    } else if hi < neutral_lo && lo < strong_lo {
        Polarity::ClearlyUnfavoured
    } else if lo <= th.neutral && hi >= neutral_lo && (hi > th.strong || lo < strong_lo) {
        Polarity::Mixed
    } else {
        Polarity::Neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarityEdge {
    pub row: String,
    pub col: String,
    pub pairs: Cell,
    pub length: Cell,
    pub label: Polarity,
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarityGraph {
    pub thresholds: Thresholds,
    pub edges: Vec<PolarityEdge>,
}

impl PolarityGraph {
    pub fn label(&self, row: &str, col: &str) -> Option<Polarity> {
        self.edges
            .iter()
            .find(|e| (e.row == row && e.col == col) || (e.row == col && e.col == row))
            .map(|e| e.label)
    }
}

/// Labels every off-diagonal cell; symmetric inputs yield one edge per
/// unordered group pair.
pub fn classify_relationships(
    dev_pairs: &DeviationMatrix,
    dev_length: &DeviationMatrix,
    thresholds: &Thresholds,
) -> Result<PolarityGraph, MetricsError> {
    let (p, l) = (&dev_pairs.deviation, &dev_length.deviation);
    if !p.same_shape(l) {
        return Err(MetricsError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            p.rows, l.rows
        )));
    }
    let symmetric = dev_pairs.symmetric && dev_length.symmetric;
    let edges = p
        .cells()
        .filter(|&(i, j, _)| if symmetric { i < j } else { i != j })
        .map(|(i, j, &pc)| {
            let lc = *l.get(i, j);
            let label = classify(pc, lc, thresholds);
            PolarityEdge {
                row: p.rows[i].clone(),
                col: p.cols[j].clone(),
                pairs: pc,
                length: lc,
                label,
                heuristic: label.is_heuristic(),
            }
        })
        .collect();
    Ok(PolarityGraph {
        thresholds: *thresholds,
        edges,
    })
}

// ---------------------------------------------------------------------------
// Correlation and activity

/// Pearson correlation coefficient of paired observations.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if a.is_empty() || saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean activity of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityRow {
    pub group: String,
    /// Mean members per period, overall and for patients / staff.
    pub mean_members: f64,
    pub mean_members_by_role: [f64; 2],
    /// Mean semi-units per period: pairs, contacts, length.
    pub per_day: [f64; 3],
    /// Semi-units per member per period, overall and by role.
    pub per_individual: [Cell; 3],
    pub per_individual_by_role: [[Cell; 3]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityTable {
    pub scheme: String,
    pub days: usize,
    pub rows: Vec<ActivityRow>,
    /// Whole-population semi-units per member per period.
    pub overall_per_individual: [Cell; 3],
}

/// Per-group and per-individual activity averaged over periods.
pub fn activity_table(days: &[DayView<'_>]) -> Result<ActivityTable, MetricsError> {
    let first = days.first().ok_or(MetricsError::NoDays)?;
    let k = first.scheme.n_groups();
    let mut semi = vec![[0.0f64; 3]; k];
    let mut semi_role = vec![[[0.0f64; 3]; 2]; k];
    let mut members = vec![0.0f64; k];
    let mut members_role = vec![[0.0f64; 2]; k];
    for d in days {
        if d.scheme.groups() != first.scheme.groups() {
            return Err(GroupingError::SchemeMismatch(d.scheme.name().into()).into());
        }
        for (n, a) in d.stream.node_activity() {
            let Some(g) = d.scheme.group_of(n) else { continue };
            let v = [a.degree as f64, a.contacts as f64, a.length as f64];
            for p in 0..3 {
                semi[g][p] += v[p];
                if let Some(r) = d.roles.get(n) {
                    semi_role[g][r.index()][p] += v[p];
                }
            }
        }
        for g in 0..k {
            members[g] += d.sizes.total[g] as f64;
            for (m, &c) in members_role[g].iter_mut().zip(&d.sizes.by_role[g]) {
                *m += c as f64;
            }
        }
    }
    let nd = days.len() as f64;
    let rows = (0..k)
        .map(|g| ActivityRow {
            group: first.scheme.groups()[g].clone(),
            mean_members: members[g] / nd,
            mean_members_by_role: [members_role[g][0] / nd, members_role[g][1] / nd],
            per_day: semi[g].map(|x| x / nd),
            per_individual: semi[g].map(|x| Cell::ratio(x, members[g])),
            per_individual_by_role: [0, 1]
                .map(|r| semi_role[g][r].map(|x| Cell::ratio(x, members_role[g][r]))),
        })
        .collect();
    let all_members: f64 = members.iter().sum();
    let overall_per_individual =
        [0, 1, 2].map(|p| Cell::ratio(semi.iter().map(|s| s[p]).sum(), all_members));
    Ok(ActivityTable {
        scheme: first.scheme.name().to_string(),
        days: days.len(),
        rows,
        overall_per_individual,
    })
}
