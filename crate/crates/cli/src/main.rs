use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkstream::grouping::{Role, Roles};
use linkstream::io::{self, write_atomic};
use linkstream::report::{self, Dataset, Error, Format, InputSpec, RunConfig};
use linkstream::stream::{LinkStream, TimePeriod, SLOT_SECONDS};
use linkstream::synth::{self, SynthConfig};
use linkstream::temporal::{hourly_activity, per_active_decomposition, weekly_autocorrelation, weekly_pattern};

#[derive(Parser)]
#[command(name = "linkstream", version, about = "Link stream analysis of proximity-contact data")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check input files, then print a summary.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        select: Selection,
    },
    /// Merge slot occurrences into contacts (`a,b,start,end`).
    Merge {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        select: Selection,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every analysis and write the report bundle.
    Report {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        select: Selection,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Threshold file (`neutral`, `strong`).
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Comma-separated output formats: csv, json, tsv-plot.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,tsv-plot")]
        format: Vec<Format>,
    },
    /// Hourly activity series as TSV.
    Temporal {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        select: Selection,
        /// Average by hour of the week instead of listing hours chronologically.
        #[arg(long)]
        pattern: bool,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic occurrence file from a TOML config.
    Synth {
        /// Generator config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Occurrence file to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Metadata file to write alongside.
        #[arg(long)]
        metadata_out: Option<PathBuf>,
        #[command(flatten)]
        select: Selection,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Slot occurrence file (`a,b,slot_start`).
    #[arg(long, conflicts_with = "contacts", required_unless_present = "contacts")]
    occurrences: Option<PathBuf>,
    /// Pre-merged contact file (`a,b,start,end`).
    #[arg(long)]
    contacts: Option<PathBuf>,
    /// Node metadata (`node,role,service[,category]`).
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Daily presence roster (`YYYY-MM-DD,node`).
    #[arg(long)]
    roster: Option<PathBuf>,
    /// Epoch of timestamp 0 when the file has no header.
    #[arg(long)]
    epoch: Option<String>,
    /// UTC offset for day and hour boundaries.
    #[arg(long, default_value = "+02:00", allow_hyphen_values = true)]
    utc_offset: String,
    /// Report and skip invalid lines instead of stopping at the first one.
    #[arg(long)]
    skip_bad: bool,
}

#[derive(Args, Clone, Default)]
struct Selection {
    /// Group scheme(s): service, category.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Start of the studied period (stream seconds or RFC 3339).
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    /// End of the studied period.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    /// PA or ST, or a row-column pair such as PA-ST.
    #[arg(long)]
    role_filter: Option<RoleFilterArg>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RoleFilterArg {
    Single(Role),
    Pair(Role, Role),
}

impl std::str::FromStr for RoleFilterArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('-') {
            Some((r, c)) => Ok(RoleFilterArg::Pair(r.parse()?, c.parse()?)),
            None => Ok(RoleFilterArg::Single(s.parse()?)),
        }
    }
}

impl RoleFilterArg {
    fn keeps(self, x: Option<Role>, y: Option<Role>) -> bool {
        match self {
            RoleFilterArg::Single(r) => x == Some(r) || y == Some(r),
            RoleFilterArg::Pair(r, c) => {
                (x == Some(r) && y == Some(c)) || (x == Some(c) && y == Some(r))
            }
        }
    }
}

impl InputArgs {
    fn spec(&self, select: &Selection) -> InputSpec {
        InputSpec {
            occurrences: self.occurrences.clone(),
            contacts: self.contacts.clone(),
            metadata: self.metadata.clone(),
            roster: self.roster.clone(),
            epoch: self.epoch.clone(),
            utc_offset: Some(self.utc_offset.clone()),
            skip_bad: self.skip_bad,
            from: select.from.clone(),
            to: select.to.clone(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Keeps the pairs allowed by the scheme and role filter.
fn select_pairs(ds: &Dataset, select: &Selection) -> Result<LinkStream, Error> {
    let mut stream = ds.stream.clone();
    if (!select.scheme.is_empty() || select.role_filter.is_some()) && ds.population.is_none() {
        return Err(config_error("--scheme and --role-filter need --metadata"));
    }
    if let Some(pop) = &ds.population {
        for name in &select.scheme {
            let scheme = pop
                .scheme(&ds.registry, name)
                .map_err(|e| config_error(e.to_string()))?;
            stream = stream.filter_pairs(|p| scheme.is_classified(p));
        }
    }
    if let Some(f) = select.role_filter {
        let roles = &ds.roles;
        stream = stream.filter_pairs(|p| f.keeps(roles.get(p.a()), roles.get(p.b())));
    }
    Ok(stream)
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validate(input: &InputArgs, select: &Selection) -> Result<(), Error> {
    let ds = report::load(&input.spec(select))?;
    let stream = select_pairs(&ds, select)?;
    let s = stream.stats();
    println!("epoch: {}", ds.calendar.epoch_rfc3339());
    println!("skipped_lines: {}", ds.skipped.len());
    for e in &ds.skipped {
        println!("  {e}");
    }
    println!("nodes: {}", stream.nodes().len());
    println!("pairs: {}", s.n_pairs);
    println!("contacts: {}", s.n_contacts);
    println!("cumul_length: {}", s.cumul_length);
    if let Some(span) = stream.span() {
        println!(
            "period: {} .. {}",
            ds.calendar.label(span.start()),
            ds.calendar.label(span.end())
        );
    }
    if let Some(pop) = &ds.population {
        let unknown = stream
            .nodes()
            .iter()
            .filter(|&&n| pop.get(ds.registry.name(n)).is_none())
            .count();
        println!("nodes_without_metadata: {unknown}");
    }
    Ok(())
}

fn merge(input: &InputArgs, select: &Selection, output: Option<&PathBuf>) -> Result<(), Error> {
    let ds = report::load(&input.spec(select))?;
    let stream = select_pairs(&ds, select)?;
    emit(output, &io::emit_contacts(&ds.calendar, &ds.registry, &stream))
}

fn run_report(
    input: &InputArgs,
    select: &Selection,
    out: &PathBuf,
    thresholds: Option<&PathBuf>,
    format: &[Format],
) -> Result<(), Error> {
    if input.metadata.is_none() {
        return Err(config_error("report needs --metadata"));
    }
    let mut config = RunConfig::new(input.spec(select), out);
    if !select.scheme.is_empty() {
        config.schemes = select.scheme.clone();
    }
    match select.role_filter {
        Some(RoleFilterArg::Pair(r, c)) => config.role_filters = vec![(r, c)],
        Some(RoleFilterArg::Single(_)) => {
            return Err(config_error("report --role-filter takes a ROW-COL pair such as PA-ST"))
        }
        None => {}
    }
    if let Some(t) = thresholds {
        config.thresholds = io::parse_thresholds(&io::read_text(t)?)?;
    }
    config.formats = format.iter().copied().collect();
    let hash = report::run_report(&config)?;
    println!("bundle_sha256: {hash}");
    Ok(())
}

fn temporal(
    input: &InputArgs,
    select: &Selection,
    pattern: bool,
    output: Option<&PathBuf>,
) -> Result<(), Error> {
    let role = match select.role_filter {
        None => None,
        Some(RoleFilterArg::Single(r)) => Some(r),
        Some(RoleFilterArg::Pair(..)) => {
            return Err(config_error("temporal --role-filter takes a single role, PA or ST"))
        }
    };
    let ds = report::load(&input.spec(select))?;
    if role.is_some() && ds.population.is_none() {
        return Err(config_error("--role-filter needs --metadata"));
    }
    let scheme_only = Selection {
        role_filter: None,
        ..select.clone()
    };
    let stream = select_pairs(&ds, &scheme_only)?;
    let roles: &Roles = &ds.roles;
    let window = stream.span().map(|s| ds.calendar.day_window(s));
    let tag = |e| Error::Config(format!("temporal: {e}"));
    let series =
        hourly_activity(&stream, roles, role, &ds.calendar, window).map_err(tag)?;
    let mut t = String::new();
    if pattern {
        let ac = weekly_autocorrelation(&series)
            .map_or_else(|| "n/a".to_string(), |v| v.to_string());
        let _ = writeln!(t, "# autocorrelation_168h\t{ac}");
        t.push_str("hour_of_week\tsamples\tactive\tpairs\tcontacts\tlength\n");
        for w in weekly_pattern(&series) {
            let _ = writeln!(
                t,
                "{}\t{}\t{}\t{}\t{}\t{}",
                w.hour_of_week, w.samples, w.active, w.pairs, w.contacts, w.length
            );
        }
    } else {
        let means = per_active_decomposition(&series, role).map_err(tag)?;
        t.push_str(
            "start\tlabel\tactive\tpairs\tcontacts\tlength\tdegree\tlength_per_individual\t\
             length_per_pair\tcontacts_per_individual\tlength_per_contact\n",
        );
        for (b, m) in series.buckets.iter().zip(&means) {
            let _ = writeln!(
                t,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                b.start,
                b.label,
                b.active,
                b.stats.n_pairs,
                b.stats.n_contacts,
                b.stats.cumul_length,
                m.degree,
                m.length_per_individual,
                m.length_per_pair,
                m.contacts_per_individual,
                m.length_per_contact
            );
        }
    }
    emit(output, &t)
}

fn run_synth(
    config: &Path,
    output: &Path,
    metadata_out: Option<&PathBuf>,
    select: &Selection,
) -> Result<(), Error> {
    let cfg = SynthConfig::from_toml(&io::read_text(config)?)?;
    let out = synth::generate(&cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let mut occ = out.occurrences.clone();
    let parse_t = |s: &Option<String>| {
        s.as_deref()
            .map(|v| report::parse_instant(v, &out.calendar))
            .transpose()
    };
    let (from, to) = (parse_t(&select.from)?, parse_t(&select.to)?);
    if from.is_some() || to.is_some() {
        let start = from.unwrap_or(out.period_start);
        let end = to.unwrap_or(out.period_end);
        TimePeriod::new(start, end).map_err(|_| config_error(format!("empty period [{start}, {end}]")))?;
        occ.retain(|o| o.slot_start() >= start && o.slot_start() + SLOT_SECONDS <= end);
    }
    let roles = out.population.roles(&out.registry);
    for name in &select.scheme {
        let scheme = out
            .population
            .scheme(&out.registry, name)
            .map_err(|e| config_error(e.to_string()))?;
        occ.retain(|o| scheme.is_classified(o.pair()));
    }
    if let Some(f) = select.role_filter {
        occ.retain(|o| f.keeps(roles.get(o.pair().a()), roles.get(o.pair().b())));
    }
    write_atomic(
        output,
        io::emit_occurrences(&out.calendar, &out.registry, &occ).as_bytes(),
    )?;
    if let Some(m) = metadata_out {
        write_atomic(m, io::emit_metadata(&out.population).as_bytes())?;
    }
    println!("occurrences: {}", occ.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Validate { input, select } => validate(input, select),
        Command::Merge {
            input,
            select,
            output,
        } => merge(input, select, output.as_ref()),
        Command::Report {
            input,
            select,
            out,
            thresholds,
            format,
        } => run_report(input, select, out, thresholds.as_ref(), format),
        Command::Temporal {
            input,
            select,
            pattern,
            output,
        } => temporal(input, select, *pattern, output.as_ref()),
        Command::Synth {
            config,
            output,
            metadata_out,
            select,
        } => run_synth(config, output, metadata_out.as_ref(), select),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            ExitCode::from(2)
        }
    }
}
