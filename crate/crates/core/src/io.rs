//! Text formats: slot occurrences, pre-merged contacts, node metadata,
//! presence rosters and threshold files.
//!
//! Occurrence file:
//!
//! ```text
//! #epoch=2009-07-06T00:00:00Z slot=30
//! p001,s014,1246867200
//! ```
//!
//! Contacts use `node_a,node_b,start,end` under the same header. Metadata
//! lines are `node,role,service[,category]`; roster lines are `date,node`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calendar::Calendar;
use crate::grouping::{GroupingError, NodeAttributes, Population, Role, CATEGORY, SERVICE};
use crate::metrics::Thresholds;
use crate::registry::NodeRegistry;
use crate::stream::{
    Contact, LinkStream, NodeId, Pair, SlotOccurrence, StreamError, Timestamp, SLOT_SECONDS,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineErrorKind {
    SelfPair(String),
    Misaligned(Timestamp),
    Malformed(String),
    UnknownRole(String),
    DuplicateNode(String),
    EmptyContact,
}

impl fmt::Display for LineErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineErrorKind::SelfPair(n) => write!(f, "self-pair {n},{n}"),
            LineErrorKind::Misaligned(t) => write!(
                f,
                "slot start {t} is not a multiple of {SLOT_SECONDS} ({t} mod {SLOT_SECONDS} = {})",
                t.rem_euclid(SLOT_SECONDS)
            ),
            LineErrorKind::Malformed(m) => write!(f, "malformed line: {m}"),
            LineErrorKind::UnknownRole(r) => write!(f, "unknown role {r:?} (expected PA or ST)"),
            LineErrorKind::DuplicateNode(n) => write!(f, "duplicate node {n}"),
            LineErrorKind::EmptyContact => f.write_str("contact end must be after its start"),
        }
    }
}

/// A rejected input line (1-based numbering).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{0}")]
    Line(#[from] LineError),
    #[error("bad header: {0}")]
    Header(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error("bad thresholds: {0}")]
    Thresholds(String),
}

/// What to do with an invalid record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BadLines {
    #[default]
    FailFast,
    /// Collect the error and carry on.
    Skip,
}

/// Names and epoch as written in an occurrence or contact file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Parsed<R> {
    /// Unix time of timestamp 0, from the header when present.
    pub epoch: Option<i64>,
    pub records: Vec<R>,
    pub skipped: Vec<LineError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceRecord {
    pub line: usize,
    pub a: String,
    pub b: String,
    pub slot_start: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactRecord {
    pub line: usize,
    pub a: String,
    pub b: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

fn parse_header(line: &str) -> Result<Option<i64>, IoError> {
    let body = line.trim_start_matches('#').trim();
    let mut epoch = None;
    let mut any = false;
    for field in body.split_whitespace() {
        match field.split_once('=') {
            Some(("epoch", v)) => {
                any = true;
                epoch = Some(Calendar::parse_epoch(v).map_err(|e| IoError::Header(e.to_string()))?);
            }
            Some(("slot", v)) => {
                any = true;
                if v.parse::<i64>() != Ok(SLOT_SECONDS) {
                    return Err(IoError::Header(format!(
                        "slot={v} unsupported, only slot={SLOT_SECONDS}"
                    )));
                }
            }
            _ => {}
        }
    }
    Ok(if any { epoch } else { None })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header_epoch(text: &str) -> Result<Option<i64>, IoError> {
    let mut epoch = None;
    for l in text.lines().map(str::trim).take_while(|l| l.is_empty() || l.starts_with('#')) {
        if let Some(e) = parse_header(l)? {
            epoch = Some(e);
        }
    }
    Ok(epoch)
}

fn fields<const N: usize>(line: &str) -> Result<[&str; N], LineErrorKind> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    <[&str; N]>::try_from(parts.as_slice())
        .map_err(|_| LineErrorKind::Malformed(format!("expected {N} fields, got {}", parts.len())))
        .and_then(|f| {
            if f.iter().any(|x| x.is_empty()) {
                Err(LineErrorKind::Malformed("empty field".into()))
            } else {
                Ok(f)
            }
        })
}

fn int(s: &str) -> Result<i64, LineErrorKind> {
    s.parse()
        .map_err(|_| LineErrorKind::Malformed(format!("{s:?} is not an integer")))
}

fn collect<R>(
    text: &str,
    mode: BadLines,
    mut parse: impl FnMut(usize, &str) -> Result<R, LineErrorKind>,
) -> Result<Parsed<R>, IoError> {
    let mut out = Parsed {
        epoch: header_epoch(text)?,
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for (line, l) in data_lines(text) {
        match parse(line, l) {
            Ok(r) => out.records.push(r),
            Err(kind) => {
                let e = LineError { line, kind };
                match mode {
                    BadLines::FailFast => return Err(e.into()),
                    BadLines::Skip => out.skipped.push(e),
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_occurrences(text: &str, mode: BadLines) -> Result<Parsed<OccurrenceRecord>, IoError> {
    collect(text, mode, |line, l| {
        let [a, b, t] = fields::<3>(l)?;
        let t = int(t)?;
        if a == b {
            return Err(LineErrorKind::SelfPair(a.to_string()));
        }
        if t.rem_euclid(SLOT_SECONDS) != 0 {
            return Err(LineErrorKind::Misaligned(t));
        }
        Ok(OccurrenceRecord {
            line,
            a: a.to_string(),
            b: b.to_string(),
            slot_start: t,
        })
    })
}

pub fn parse_contacts(text: &str, mode: BadLines) -> Result<Parsed<ContactRecord>, IoError> {
    collect(text, mode, |line, l| {
        let [a, b, s, e] = fields::<4>(l)?;
        let (s, e) = (int(s)?, int(e)?);
        if a == b {
            return Err(LineErrorKind::SelfPair(a.to_string()));
        }
        if e <= s {
            return Err(LineErrorKind::EmptyContact);
        }
        Ok(ContactRecord {
            line,
            a: a.to_string(),
            b: b.to_string(),
            start: s,
            end: e,
        })
    })
}

fn resolve_pair(reg: &NodeRegistry, a: &str, b: &str) -> Pair {
    let id = |n: &str| reg.get(n).unwrap_or_else(|| panic!("node {n} missing from registry"));
    Pair::new(id(a), id(b)).expect("self-pairs rejected at parse time")
}

/// Maps parsed names to ids. The registry must contain every name.
pub fn resolve_occurrences(
    records: &[OccurrenceRecord],
    registry: &NodeRegistry,
) -> Vec<SlotOccurrence> {
    records
        .iter()
        .map(|r| {
            let p = resolve_pair(registry, &r.a, &r.b);
            SlotOccurrence::new(p.a(), p.b(), r.slot_start).expect("validated at parse time")
        })
        .collect()
}

pub fn resolve_contacts(
    records: &[ContactRecord],
    registry: &NodeRegistry,
) -> Result<LinkStream, IoError> {
    let contacts = records
        .iter()
        .map(|r| Contact::new(resolve_pair(registry, &r.a, &r.b), r.start, r.end))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LinkStream::from_contacts(contacts)?)
}

pub fn occurrence_names(records: &[OccurrenceRecord]) -> impl Iterator<Item = &str> {
    records.iter().flat_map(|r| [r.a.as_str(), r.b.as_str()])
}

pub fn contact_names(records: &[ContactRecord]) -> impl Iterator<Item = &str> {
    records.iter().flat_map(|r| [r.a.as_str(), r.b.as_str()])
}

fn header(calendar: &Calendar) -> String {
    format!("#epoch={} slot={SLOT_SECONDS}\n", calendar.epoch_rfc3339())
}

/// Occurrence file text, records in the given order.
pub fn emit_occurrences(
    calendar: &Calendar,
    registry: &NodeRegistry,
    occurrences: &[SlotOccurrence],
) -> String {
    let mut out = header(calendar);
    for o in occurrences {
        let p = o.pair();
        out.push_str(&format!(
            "{},{},{}\n",
            registry.name(p.a()),
            registry.name(p.b()),
            o.slot_start()
        ));
    }
    out
}

pub fn emit_contacts(calendar: &Calendar, registry: &NodeRegistry, stream: &LinkStream) -> String {
    let mut contacts = stream.contacts().to_vec();
    contacts.sort_by_key(|c| (c.start(), c.pair()));
    let mut out = header(calendar);
    for c in contacts {
        out.push_str(&format!(
            "{},{},{},{}\n",
            registry.name(c.pair().a()),
            registry.name(c.pair().b()),
            c.start(),
            c.end()
        ));
    }
    out
}

/// Parses `node,role,service[,category]`. A first line starting with
/// `node,` is treated as a column header.
pub fn parse_metadata(text: &str) -> Result<Population, IoError> {
    let mut seen = BTreeSet::new();
    let mut attrs = Vec::new();
    for (line, l) in data_lines(text) {
        if attrs.is_empty() && seen.is_empty() && l.starts_with("node,") {
            continue;
        }
        let err = |kind| IoError::Line(LineError { line, kind });
        let parts: Vec<&str> = l.split(',').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) || parts.iter().any(|p| p.is_empty()) {
            return Err(err(LineErrorKind::Malformed(
                "expected node,role,service[,category]".into(),
            )));
        }
        let role: Role = parts[1]
            .parse()
            .map_err(|_| err(LineErrorKind::UnknownRole(parts[1].to_string())))?;
        if !seen.insert(parts[0].to_string()) {
            return Err(err(LineErrorKind::DuplicateNode(parts[0].to_string())));
        }
        let mut a = NodeAttributes::new(parts[0], role).with(SERVICE, parts[2]);
        if let Some(c) = parts.get(3) {
            a = a.with(CATEGORY, *c);
        }
        attrs.push(a);
    }
    Ok(Population::new(attrs)?)
}

pub fn emit_metadata(population: &Population) -> String {
    let mut out = String::new();
    for a in population.iter() {
        out.push_str(&a.node);
        out.push(',');
        out.push_str(a.role.code());
        out.push(',');
        out.push_str(a.memberships.get(SERVICE).map_or("", String::as_str));
        if let Some(c) = a.memberships.get(CATEGORY) {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
    }
    out
}

/// Nodes present on each local date, from `YYYY-MM-DD,node` lines.
pub type Roster = BTreeMap<NaiveDate, BTreeSet<String>>;

pub fn parse_roster(text: &str) -> Result<Roster, IoError> {
    let mut out = Roster::new();
    for (line, l) in data_lines(text) {
        let err = |m: String| {
            IoError::Line(LineError {
                line,
                kind: LineErrorKind::Malformed(m),
            })
        };
        let [d, n] = fields::<2>(l).map_err(|k| IoError::Line(LineError { line, kind: k }))?;
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|_| err(format!("{d:?} is not a YYYY-MM-DD date")))?;
        out.entry(date).or_default().insert(n.to_string());
    }
    Ok(out)
}

/// Roster nodes present on `date` that the registry knows.
pub fn roster_nodes(roster: &Roster, date: NaiveDate, registry: &NodeRegistry) -> Vec<NodeId> {
    roster
        .get(&date)
        .into_iter()
        .flatten()
        .filter_map(|n| registry.get(n))
        .collect()
}

pub fn parse_thresholds(text: &str) -> Result<Thresholds, IoError> {
    let t: Thresholds = toml::from_str(text).map_err(|e| IoError::Thresholds(e.to_string()))?;
    if !(t.neutral > 0.0 && t.strong >= t.neutral && t.strong.is_finite()) {
        return Err(IoError::Thresholds(format!(
            "need 0 < neutral <= strong, got neutral={} strong={}",
            t.neutral, t.strong
        )));
    }
    Ok(t)
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let file_err = |e: &dyn fmt::Display| IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| file_err(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| file_err(&e))?;
    tmp.write_all(bytes).map_err(|e| file_err(&e))?;
    tmp.persist(path).map_err(|e| file_err(&e.error))?;
    Ok(())
}
