//! Loading of input files and the full report bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::calendar::{Calendar, CalendarError, DAY};
use crate::grouping::{
    GroupingError, Population, Role, RoleClassTable, RoleTally, Roles, Scheme, TableMode,
};
use crate::io::{self, BadLines, IoError, LineError, Roster};
use crate::matrix::Cell;
use crate::metrics::{
    activity_table, affinity_density, classify_relationships, correlation, deviation_matrix,
    day_affinity, introversion_over_days, DayView, DeviationMatrix, GroupSizes, MetricsError,
    RoleFilter, Thresholds,
};
use crate::null_models::{full_uniform, NullModelError};
use crate::registry::NodeRegistry;
use crate::stream::{merge_slots, LinkStream, Param, StreamError, TimePeriod, Timestamp};
use crate::synth::SynthError;
use crate::temporal::{hourly_activity, per_active_decomposition, weekly_autocorrelation, TemporalError};

/// Failure of an analysis step inside a run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    NullModel(#[from] NullModelError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{analysis}: {source}")]
    Analysis {
        analysis: String,
        #[source]
        source: AnalysisError,
    },
}

impl Error {
    /// Whether the error is a violated internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Analysis {
                source: AnalysisError::NullModel(NullModelError::Conservation { .. })
                    | AnalysisError::Metrics(MetricsError::NullModel(
                        NullModelError::Conservation { .. }
                    )),
                ..
            }
        )
    }
}

trait Tag<T> {
    fn tag(self, analysis: &str) -> Result<T, Error>;
}

impl<T, E: Into<AnalysisError>> Tag<T> for Result<T, E> {
    fn tag(self, analysis: &str) -> Result<T, Error> {
        self.map_err(|e| Error::Analysis {
            analysis: analysis.to_string(),
            source: e.into(),
        })
    }
}

/// Input files and time selection shared by every command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub occurrences: Option<PathBuf>,
    pub contacts: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    /// RFC 3339 epoch; must agree with the file header when both are given.
    pub epoch: Option<String>,
    /// `+HH:MM`; defaults to +02:00.
    pub utc_offset: Option<String>,
    pub skip_bad: bool,
    /// Integer stream seconds or an RFC 3339 instant.
    pub from: Option<String>,
    pub to: Option<String>,
}

/// A loaded and restricted dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub calendar: Calendar,
    pub registry: NodeRegistry,
    pub population: Option<Population>,
    pub roles: Roles,
    pub roster: Option<Roster>,
    pub stream: LinkStream,
    /// Input kind -> sha256 of the file contents.
    pub input_hashes: BTreeMap<String, String>,
    pub skipped: Vec<LineError>,
}

/// Parses `--from`/`--to`: stream seconds, or an instant converted with the
/// calendar's epoch.
pub fn parse_instant(s: &str, calendar: &Calendar) -> Result<Timestamp, Error> {
    if let Ok(t) = s.trim().parse::<Timestamp>() {
        return Ok(t);
    }
    let unix = Calendar::parse_epoch(s)
        .map_err(|_| Error::Config(format!("{s:?} is neither seconds nor an RFC 3339 instant")))?;
    Ok(unix - calendar.epoch_unix)
}

pub fn load(spec: &InputSpec) -> Result<Dataset, Error> {
    let mode = if spec.skip_bad {
        BadLines::Skip
    } else {
        BadLines::FailFast
    };
    let mut input_hashes = BTreeMap::new();
    let mut read = |kind: &str, p: &Path| -> Result<String, Error> {
        let text = io::read_text(p)?;
        input_hashes.insert(kind.to_string(), io::sha256_hex(text.as_bytes()));
        Ok(text)
    };
    let population = match &spec.metadata {
        Some(p) => Some(io::parse_metadata(&read("metadata", p)?)?),
        None => None,
    };
    let roster = match &spec.roster {
        Some(p) => Some(io::parse_roster(&read("roster", p)?)?),
        None => None,
    };
    let meta_names = || population.iter().flat_map(|p| p.names().map(str::to_string));
    let (header_epoch, registry, merged, skipped) = match (&spec.occurrences, &spec.contacts) {
        (Some(p), None) => {
            let parsed = io::parse_occurrences(&read("occurrences", p)?, mode)?;
            let registry = NodeRegistry::from_names(
                io::occurrence_names(&parsed.records).map(str::to_string).chain(meta_names()),
            );
            let stream = merge_slots(io::resolve_occurrences(&parsed.records, &registry));
            (parsed.epoch, registry, stream, parsed.skipped)
        }
        (None, Some(p)) => {
            let parsed = io::parse_contacts(&read("contacts", p)?, mode)?;
            let registry = NodeRegistry::from_names(
                io::contact_names(&parsed.records).map(str::to_string).chain(meta_names()),
            );
            let stream = io::resolve_contacts(&parsed.records, &registry)?;
            (parsed.epoch, registry, stream, parsed.skipped)
        }
        _ => {
            return Err(Error::Config(
                "give exactly one of an occurrence file or a contact file".into(),
            ))
        }
    };
    for e in &skipped {
        log::warn!("skipped {e}");
    }
    let flag_epoch = spec.epoch.as_deref().map(Calendar::parse_epoch).transpose()?;
    let epoch = match (header_epoch, flag_epoch) {
        (Some(h), Some(f)) if h != f => {
            return Err(Error::Config(format!(
                "--epoch disagrees with the file header ({f} vs {h} unix seconds)"
            )))
        }
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => {
            return Err(Error::Config(
                "no epoch: add a '#epoch=... slot=30' header or pass --epoch".into(),
            ))
        }
    };
    let offset = match &spec.utc_offset {
        Some(o) => Calendar::parse_offset(o)?,
        None => Calendar::default().utc_offset,
    };
    let calendar = Calendar::new(epoch, offset);
    let stream = match (&spec.from, &spec.to, merged.span()) {
        (None, None, _) => merged,
        (_, _, span) => {
            let from = spec.from.as_deref().map(|s| parse_instant(s, &calendar)).transpose()?;
            let to = spec.to.as_deref().map(|s| parse_instant(s, &calendar)).transpose()?;
            let start = from.or(span.map(|s| s.start())).unwrap_or(0);
            let end = to.or(span.map(|s| s.end())).unwrap_or(start);
            let period = TimePeriod::new(start, end)
                .map_err(|_| Error::Config(format!("empty period [{start}, {end}]")))?;
            merged.restrict(period)
        }
    };
    let roles = population
        .as_ref()
        .map(|p| p.roles(&registry))
        .unwrap_or_else(|| Roles(vec![None; registry.len()]));
    Ok(Dataset {
        calendar,
        registry,
        population,
        roles,
        roster,
        stream,
        input_hashes,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    TsvPlot,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "tsv" | "tsv-plot" => Ok(Format::TsvPlot),
            _ => Err(format!("unknown format {s:?} (csv, json, tsv-plot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: InputSpec,
    pub schemes: Vec<String>,
    pub thresholds: Thresholds,
    /// Role-filtered affinity matrices to add to the unfiltered ones.
    pub role_filters: Vec<(Role, Role)>,
    pub formats: BTreeSet<Format>,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(inputs: InputSpec, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            inputs,
            schemes: vec![crate::grouping::SERVICE.to_string()],
            thresholds: Thresholds::default(),
            role_filters: vec![(Role::Patient, Role::Staff), (Role::Staff, Role::Patient)],
            formats: [Format::Csv, Format::Json, Format::TsvPlot].into(),
            out_dir: out_dir.into(),
        }
    }
}

/// Report files by relative name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    fn add(&mut self, name: impl Into<String>, text: String) {
        self.files.insert(name.into(), text.into_bytes());
    }

    fn json<T: Serialize>(&mut self, name: impl Into<String>, v: &T) {
        let mut s = serde_json::to_string_pretty(v).expect("report values serialize");
        s.push('\n');
        self.add(name, s);
    }

    /// Hash over every file's name and contents.
    pub fn hash(&self) -> String {
        let mut h = Vec::new();
        for (name, bytes) in &self.files {
            h.extend_from_slice(name.as_bytes());
            h.push(0);
            h.extend_from_slice(io::sha256_hex(bytes).as_bytes());
            h.push(b'\n');
        }
        io::sha256_hex(&h)
    }
}

fn filter_suffix(f: RoleFilter) -> String {
    match f {
        None => String::new(),
        Some((r, c)) => format!("_{}-{}", r.code(), c.code()),
    }
}

fn cell_csv(c: &Cell) -> String {
    c.to_string()
}

/// Day partition of the dataset's span at local midnights.
fn days(ds: &Dataset) -> Result<Vec<(TimePeriod, LinkStream)>, Error> {
    let Some(span) = ds.stream.span() else {
        return Err(Error::Config("no contacts in the selected period".into()));
    };
    ds.stream
        .partition_window(DAY, ds.calendar.day_origin(), ds.calendar.day_window(span))
        .tag("day partition")
}

fn day_sizes(ds: &Dataset, period: TimePeriod, day: &LinkStream, scheme: &Scheme) -> GroupSizes {
    match &ds.roster {
        Some(r) => {
            let date = ds.calendar.date(period.start());
            let present = io::roster_nodes(r, date, &ds.registry);
            GroupSizes::from_nodes(&present, scheme, &ds.roles)
        }
        None => GroupSizes::active(day, scheme, &ds.roles),
    }
}

fn matrices(
    views: &[DayView<'_>],
    param: Param,
    filter: RoleFilter,
) -> Result<(DeviationMatrix, Value), Error> {
    let what = format!("affinity {param}{}", filter_suffix(filter));
    let mut real = Vec::new();
    let mut expected = Vec::new();
    for v in views {
        let a = day_affinity(v, param, filter).tag(&what)?;
        real.push(a.density);
        expected.push(a.expected_density);
    }
    let dev = deviation_matrix(&real, &expected).tag(&what)?;
    let aff = affinity_density(views, param, filter).tag(&what)?;
    let js = json!({
        "param": param,
        "role_filter": filter.map(|(r, c)| format!("{}-{}", r.code(), c.code())),
        "symmetric": dev.symmetric,
        "density": dev.density_real,
        "expected": dev.expected,
        "deviation": dev.deviation,
        "days_used": aff.days_used,
        "excluded_day_cells": aff.excluded_cells,
    });
    Ok((dev, js))
}

fn role_tables(ds: &Dataset, scheme: &Scheme) -> Vec<RoleClassTable> {
    let tally = RoleTally::from_stream(&ds.stream, &ds.roles, Some(scheme));
    TableMode::ALL
        .iter()
        .flat_map(|&m| Param::ALL.iter().map(move |&p| (m, p)))
        .map(|(m, p)| tally.table(m, p))
        .collect()
}

fn scheme_report(
    ds: &Dataset,
    days: &[(TimePeriod, LinkStream)],
    name: &str,
    config: &RunConfig,
    bundle: &mut Bundle,
) -> Result<(), Error> {
    let population = ds
        .population
        .as_ref()
        .ok_or_else(|| Error::Config("group analyses need a metadata file".into()))?;
    let scheme = population.scheme(&ds.registry, name).tag("group scheme")?;
    let sizes: Vec<GroupSizes> = days
        .iter()
        .map(|(p, l)| day_sizes(ds, *p, l, &scheme))
        .collect();
    let views: Vec<DayView<'_>> = days
        .iter()
        .zip(&sizes)
        .map(|((_, l), s)| DayView {
            stream: l,
            scheme: &scheme,
            roles: &ds.roles,
            sizes: s,
        })
        .collect();
    let csv = config.formats.contains(&Format::Csv);
    let js = config.formats.contains(&Format::Json);

    let activity = activity_table(&views).tag("activity")?;
    if csv {
        let mut t = String::from(
            "group,mean_members,mean_members_PA,mean_members_ST,\
             semi_pairs_per_day,semi_contacts_per_day,semi_length_per_day,\
             pairs_per_individual,contacts_per_individual,length_per_individual,\
             PA_pairs_per_individual,PA_contacts_per_individual,PA_length_per_individual,\
             ST_pairs_per_individual,ST_contacts_per_individual,ST_length_per_individual\n",
        );
        for r in &activity.rows {
            let _ = write!(
                t,
                "{},{},{},{},{},{},{}",
                r.group,
                r.mean_members,
                r.mean_members_by_role[0],
                r.mean_members_by_role[1],
                r.per_day[0],
                r.per_day[1],
                r.per_day[2]
            );
            for c in r
                .per_individual
                .iter()
                .chain(r.per_individual_by_role.iter().flatten())
            {
                let _ = write!(t, ",{c}");
            }
            t.push('\n');
        }
        bundle.add(format!("{name}/activity.csv"), t);
    }
    if js {
        bundle.json(format!("{name}/activity.json"), &activity);
    }

    let mut intro = Vec::new();
    for param in Param::ALL {
        let days_iter = days.iter().map(|(_, l)| (l, &scheme));
        intro.push(introversion_over_days(days_iter, param).tag(&format!("introversion {param}"))?);
    }
    if csv {
        let mut t = String::from(
            "group,param,baseline,members,real_int,real_ext,baseline_int,baseline_ext,\
             ratio_real,ratio_baseline,factor\n",
        );
        for r in &intro {
            for g in &r.groups {
                let _ = writeln!(
                    t,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    g.group,
                    r.param,
                    r.baseline,
                    g.members,
                    g.real_int,
                    g.real_ext,
                    g.baseline_int,
                    g.baseline_ext,
                    g.ratio_real,
                    g.ratio_baseline,
                    g.factor
                );
            }
        }
        bundle.add(format!("{name}/introversion.csv"), t);
    }
    if js {
        bundle.json(format!("{name}/introversion.json"), &intro);
    }

    let mut filters: Vec<RoleFilter> = vec![None];
    filters.extend(config.role_filters.iter().map(|&f| Some(f)));
    let mut all_js = Vec::new();
    let mut unfiltered = BTreeMap::new();
    for param in [Param::Pairs, Param::Length] {
        for &f in &filters {
            let (dev, m_js) = matrices(&views, param, f)?;
            if csv {
                let suffix = format!("{param}{}", filter_suffix(f));
                bundle.add(
                    format!("{name}/density_{suffix}.csv"),
                    dev.density_real.to_csv(name, cell_csv),
                );
                bundle.add(
                    format!("{name}/expected_{suffix}.csv"),
                    dev.expected.to_csv(name, cell_csv),
                );
                bundle.add(
                    format!("{name}/deviation_{suffix}.csv"),
                    dev.deviation.to_csv(name, cell_csv),
                );
            }
            all_js.push(m_js);
            if f.is_none() {
                unfiltered.insert(param, dev);
            }
        }
    }
    if js {
        bundle.json(format!("{name}/matrices.json"), &all_js);
    }

    let graph = classify_relationships(&unfiltered[&Param::Pairs], &unfiltered[&Param::Length], &config.thresholds)
        .tag("polarity")?;
    if csv {
        let mut t = String::from("row,col,deviation_pairs,deviation_length,label,heuristic\n");
        for e in &graph.edges {
            let _ = writeln!(
                t,
                "{},{},{},{},{},{}",
                e.row,
                e.col,
                e.pairs,
                e.length,
                e.label.label(),
                e.heuristic
            );
        }
        bundle.add(format!("{name}/polarity.csv"), t);
    }
    if js {
        bundle.json(format!("{name}/polarity.json"), &graph);
    }

    let tables = role_tables(ds, &scheme);
    if csv {
        let mut t = String::from("mode,param,row,column,fraction\n");
        for tb in &tables {
            for r in &tb.rows {
                for (c, v) in tb.columns.iter().zip(&r.values) {
                    let _ = writeln!(t, "{},{},{},{},{}", tb.mode.name(), tb.param, r.label, c, v);
                }
                let _ = writeln!(t, "{},{},{},total,{}", tb.mode.name(), tb.param, r.label, r.total);
            }
        }
        bundle.add(format!("{name}/role_tables.csv"), t);
    }
    if js {
        bundle.json(format!("{name}/role_tables.json"), &tables);
    }
    Ok(())
}

fn hourly_report(ds: &Dataset, bundle: &mut Bundle) -> Result<Option<f64>, Error> {
    let mut t = String::from(
        "start\tlabel\thour_of_week\trole\tactive\tpairs\tcontacts\tlength\t\
         semi_pairs\tsemi_contacts\tsemi_length\tdegree\tlength_per_individual\t\
         length_per_pair\tcontacts_per_individual\tlength_per_contact\n",
    );
    let window = ds.stream.span().map(|s| ds.calendar.day_window(s));
    let mut autocorr = None;
    for role in [None, Some(Role::Patient), Some(Role::Staff)] {
        if role.is_some() && ds.population.is_none() {
            continue;
        }
        let s = hourly_activity(&ds.stream, &ds.roles, role, &ds.calendar, window).tag("hourly")?;
        if role.is_none() {
            autocorr = weekly_autocorrelation(&s);
        }
        let means = per_active_decomposition(&s, role).tag("hourly")?;
        let code = role.map_or("all", Role::code);
        for (b, m) in s.buckets.iter().zip(&means) {
            let _ = writeln!(
                t,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                b.start,
                b.label,
                b.hour_of_week,
                code,
                b.active,
                b.stats.n_pairs,
                b.stats.n_contacts,
                b.stats.cumul_length,
                b.semi.n_pairs,
                b.semi.n_contacts,
                b.semi.cumul_length,
                m.degree,
                m.length_per_individual,
                m.length_per_pair,
                m.contacts_per_individual,
                m.length_per_contact
            );
        }
    }
    bundle.add("hourly.tsv", t);
    Ok(autocorr)
}

fn correlation_value(a: &[f64], b: &[f64]) -> Value {
    match correlation(a, b) {
        Ok(r) => json!(r),
        Err(_) => json!("n/a"),
    }
}

/// Computes every report file in memory.
pub fn build_bundle(config: &RunConfig) -> Result<(Dataset, Bundle), Error> {
    let ds = load(&config.inputs)?;
    let days = days(&ds)?;
    let mut bundle = Bundle::default();
    let csv = config.formats.contains(&Format::Csv);

    let stats = ds.stream.stats();
    let fu = full_uniform(&ds.stream).tag("full-uniform network")?;
    let fu_value = match fu.carrier {
        crate::null_models::Carrier::Complete(v) => v,
        crate::null_models::Carrier::Edges(_) => unreachable!("full-uniform is complete"),
    };

    let activity = ds.stream.node_activity();
    let cols: [Vec<f64>; 3] = [
        activity.values().map(|a| a.degree as f64).collect(),
        activity.values().map(|a| a.contacts as f64).collect(),
        activity.values().map(|a| a.length as f64).collect(),
    ];
    if csv {
        let mut t = String::from("node,role,degree,semi_contacts,semi_length\n");
        for (n, a) in &activity {
            let role = ds.roles.get(*n).map_or("", Role::code);
            let _ = writeln!(
                t,
                "{},{},{},{},{}",
                ds.registry.name(*n),
                role,
                a.degree,
                a.contacts,
                a.length
            );
        }
        bundle.add("node_activity.csv", t);
    }

    let autocorr = if config.formats.contains(&Format::TsvPlot) {
        hourly_report(&ds, &mut bundle)?
    } else {
        None
    };

    let span = ds.stream.span().expect("checked by day partition");
    bundle.json(
        "stats.json",
        &json!({
            "period": {
                "start": span.start(),
                "end": span.end(),
                "start_local": ds.calendar.label(span.start()),
                "end_local": ds.calendar.label(span.end()),
                "utc_offset": Calendar::format_offset(ds.calendar.utc_offset),
                "days": days.len(),
            },
            "nodes": ds.stream.nodes().len(),
            "registered_nodes": ds.registry.len(),
            "pairs": stats.n_pairs,
            "contacts": stats.n_contacts,
            "cumul_length": stats.cumul_length,
            "full_uniform": {
                "adjacency": fu_value.adjacency,
                "contacts": fu_value.contacts,
                "length": fu_value.length,
            },
            "mean_contacts_per_pair": stats.n_contacts as f64 / stats.n_pairs.max(1) as f64,
            "mean_contact_length": stats.cumul_length as f64 / stats.n_contacts.max(1) as f64,
            "correlations": {
                "contacts_length": correlation_value(&cols[1], &cols[2]),
                "degree_length": correlation_value(&cols[0], &cols[2]),
                "degree_contacts": correlation_value(&cols[0], &cols[1]),
            },
            "weekly_autocorrelation_active": autocorr,
            "skipped_lines": ds.skipped.len(),
        }),
    );

    for name in &config.schemes {
        scheme_report(&ds, &days, name, config, &mut bundle)?;
    }
    Ok((ds, bundle))
}

fn generated_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|t| chrono::DateTime::<chrono::Utc>::from_timestamp(t, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Runs every analysis and writes the bundle plus `manifest.json` under
/// `config.out_dir`. Returns the bundle hash.
pub fn run_report(config: &RunConfig) -> Result<String, Error> {
    let (ds, bundle) = build_bundle(config)?;
    let config_json = serde_json::to_string(config).expect("config serializes");
    let bundle_hash = bundle.hash();
    for (name, bytes) in &bundle.files {
        io::write_atomic(&config.out_dir.join(name), bytes)?;
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": io::sha256_hex(config_json.as_bytes()),
        "config": serde_json::from_str::<Value>(&config_json).expect("round trip"),
        "inputs": ds.input_hashes,
        "files": bundle.files.iter().map(|(n, b)| (n.clone(), io::sha256_hex(b))).collect::<BTreeMap<_, _>>(),
        "bundle_sha256": bundle_hash,
        "generated_at": generated_at(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    io::write_atomic(&config.out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(bundle_hash)
}
