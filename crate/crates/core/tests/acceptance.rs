mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use linkstream::calendar::{Calendar, DAY};
use linkstream::grouping::{group_semi_counts, MissingPolicy, Role, SERVICE};
use linkstream::io::{self, BadLines};
use linkstream::matrix::Cell;
use linkstream::metrics::{
    affinity_deviation, classify, full_uniform_pair_ratio, introversion_factor, DayView,
    GroupSizes, Polarity, Thresholds,
};
use linkstream::null_models::{
    config_expectation, config_monte_carlo, contact_uniform, full_uniform, length_uniform,
    Carrier, CONSERVATION_TOLERANCE,
};
use linkstream::registry::NodeRegistry;
use linkstream::report::{run_report, InputSpec, RunConfig};
use linkstream::stream::{merge_slots, Param, SlotOccurrence, TimePeriod, SLOT_SECONDS};
use linkstream::synth::{generate, AffinitySpec, GroupSpec, SynthConfig};
use linkstream::temporal::hourly_activity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(n: u32, ok: bool, elapsed: Duration, limit: Duration, detail: String) -> bool {
    let pass = ok && elapsed <= limit;
    println!(
        "[{}] criterion {n}: {detail} ({:.2}s, limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

const FIG1: &str = "#epoch=2009-07-06T00:00:00Z slot=30
a,b,0
a,b,30
a,b,60
a,b,270
a,b,300
a,b,330
a,b,600
a,b,630
a,c,120
a,c,150
a,c,180
a,c,960
a,c,990
b,c,450
b,c,480
b,c,510
b,c,1050
b,c,1080
";

fn criterion_1_fig1_golden() -> bool {
    let t = Instant::now();
    let parsed = io::parse_occurrences(FIG1, BadLines::FailFast).unwrap();
    let reg = NodeRegistry::from_names(io::occurrence_names(&parsed.records));
    let l = merge_slots(io::resolve_occurrences(&parsed.records, &reg))
        .restrict(TimePeriod::new(300, 900).unwrap());
    let s = l.stats();
    let net = full_uniform(&l).unwrap();
    let Carrier::Complete(v) = net.carrier else {
        panic!("full-uniform network is complete")
    };
    let ok = (s.n_pairs, s.n_contacts, s.cumul_length) == (2, 3, 210)
        && v.adjacency == 2.0 / 3.0
        && v.contacts == 1.0
        && v.length == Some(70.0);
    verdict(
        1,
        ok,
        t.elapsed(),
        Duration::from_secs(1),
        format!(
            "pairs={} contacts={} length={}s; full-uniform {:.6}/{}/{:?}s",
            s.n_pairs, s.n_contacts, s.cumul_length, v.adjacency, v.contacts, v.length
        ),
    )
}

/// Restriction oracle working slot by slot: every occupied slot is clipped to
/// the window and touching pieces are joined.
fn slot_restrict_oracle(
    occ: &[SlotOccurrence],
    t1: i64,
    t2: i64,
) -> Vec<(u32, u32, i64, i64)> {
    let mut slots: BTreeMap<(u32, u32), BTreeSet<i64>> = BTreeMap::new();
    for o in occ {
        slots
            .entry((o.pair().a().0, o.pair().b().0))
            .or_default()
            .insert(o.slot_start());
    }
    let mut out: Vec<(u32, u32, i64, i64)> = Vec::new();
    for ((a, b), set) in slots {
        let mut open: Option<(i64, i64)> = None;
        for s in set {
            let (lo, hi) = (s.max(t1), (s + SLOT_SECONDS).min(t2));
            if hi <= lo {
                continue;
            }
            open = match open {
                Some((x, y)) if y == lo => Some((x, hi)),
                Some((x, y)) => {
                    out.push((a, b, x, y));
                    Some((lo, hi))
                }
                None => Some((lo, hi)),
            };
        }
        if let Some((x, y)) = open {
            out.push((a, b, x, y));
        }
    }
    out.sort();
    out
}

fn criterion_2_merge_restrict_oracle() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    let mut contacts = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let slots = rng.random_range(1..=2000);
        let occ = random_occurrences(&mut rng, n, slots);
        let l = merge_slots(occ.iter().copied());
        contacts += l.len();
        if as_tuples(&l) != oracle_merge(&occ) {
            failures += 1;
            continue;
        }
        for _ in 0..5 {
            let horizon = slots * SLOT_SECONDS;
            let t1 = rng.random_range(-60..horizon);
            let t2 = rng.random_range(t1 + 1..=horizon + 60);
            let r = l.restrict(TimePeriod::new(t1, t2).unwrap());
            if as_tuples(&r) != slot_restrict_oracle(&occ, t1, t2) {
                failures += 1;
            }
        }
    }
    verdict(
        2,
        failures == 0,
        t.elapsed(),
        Duration::from_secs(10),
        format!("200 streams, {contacts} contacts, 1000 windows, {failures} mismatches"),
    )
}

fn criterion_3_conservation() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut semi_failures = 0;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    for _ in 0..100 {
        let l = random_stream(&mut rng, 10, 2000);
        if l.nodes().len() < 2 {
            continue;
        }
        let n = max_node(&l) as usize;
        let k = rng.random_range(1..=4);
        let scheme = random_scheme(&mut rng, n, k, false);
        let c = group_semi_counts(&l, &scheme, MissingPolicy::Reject).unwrap();
        let s = l.stats();
        for p in Param::ALL {
            if c.total_semi(p) != 2 * s.get(p) {
                semi_failures += 1;
            }
        }
        let f = full_uniform(&l).unwrap().totals();
        let cu = contact_uniform(&l).unwrap().totals();
        let lu = length_uniform(&l).unwrap().totals();
        for (x, y) in [
            (f.adjacency, s.n_pairs),
            (f.contacts, s.n_contacts),
            (f.length.unwrap(), s.cumul_length),
            (cu.adjacency, s.n_pairs),
            (cu.contacts, s.n_contacts),
            (lu.adjacency, s.n_pairs),
            (lu.contacts, s.n_contacts),
            (lu.length.unwrap(), s.cumul_length),
        ] {
            worst = worst.max(rel(x, y as f64));
        }
    }
    verdict(
        3,
        semi_failures == 0 && worst <= CONSERVATION_TOLERANCE,
        t.elapsed(),
        Duration::from_secs(10),
        format!("semi-unit mismatches {semi_failures}, worst uniform-network relative error {worst:.2e}"),
    )
}

fn criterion_4_configuration_model_oracle() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for v in 0..20 {
        let k = rng.random_range(2..=5);
        let mut semi: Vec<u64> = (0..k).map(|_| rng.random_range(20..=150)).collect();
        while semi.iter().sum::<u64>() < 200 || semi.iter().sum::<u64>() % 2 == 1 {
            semi[0] += 1;
        }
        let groups: Vec<String> = (0..k).map(|g| format!("g{g}")).collect();
        let mut counts = linkstream::grouping::GroupSemiCounts::zeros(&groups);
        for (g, &d) in semi.iter().enumerate() {
            counts.external[g].n_contacts = d;
        }
        let formula = config_expectation(&counts, Param::Contacts).unwrap();
        let mc = config_monte_carlo(&semi, 100_000, v).unwrap();
        for (i, row) in mc.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if let Some(e) = formula.get(i, j) {
                    worst = worst.max((m - e).abs() / e);
                }
            }
        }
    }
    verdict(
        4,
        worst <= 0.03,
        t.elapsed(),
        Duration::from_secs(60),
        format!("20 group-size vectors, worst per-cell relative gap {:.3}%", worst * 100.0),
    )
}

fn criterion_5_introversion_closed_forms() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut closed_mismatch = 0;
    let mut worst_float: f64 = 0.0;
    let mut fixed_point_mismatch = 0;
    let mut checked = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..=12u32);
        let mut cs = Vec::new();
        let c = rng.random_range(1..=3i64);
        let len = rng.random_range(1..=4i64) * SLOT_SECONDS;
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(0.6) || b == a + 1 {
                    for i in 0..c {
                        let s = i * 10_000 + rng.random_range(0..50) * SLOT_SECONDS;
                        cs.push((a, b, s, s + len));
                    }
                }
            }
        }
        let l = stream_of(&cs);
        let k = rng.random_range(2..=4);
        let scheme = random_scheme(&mut rng, n as usize, k, false);

        let net = full_uniform(&l).unwrap();
        let fu = net.group_int_ext(&scheme);
        let sizes = scheme.count_members(l.nodes());
        let total: u64 = sizes.iter().sum();
        // Explicit enumeration of the complete graph's pairs, counted exactly.
        let mut int = vec![0u64; k];
        let mut ext = vec![0u64; k];
        for (x, &a) in net.nodes.iter().enumerate() {
            for &b in &net.nodes[x + 1..] {
                assert!(net.value(linkstream::stream::Pair::new(a, b).unwrap()).is_some());
                let (ga, gb) = (scheme.group_of(a).unwrap(), scheme.group_of(b).unwrap());
                if ga == gb {
                    int[ga] += 1;
                } else {
                    ext[ga] += 1;
                    ext[gb] += 1;
                }
            }
        }
        for g in 0..k {
            if sizes[g] == 0 {
                continue;
            }
            let closed = full_uniform_pair_ratio(sizes[g], total);
            if Cell::ratio(int[g] as f64, ext[g] as f64) != closed {
                closed_mismatch += 1;
            }
            let summed = Cell::ratio(fu[g].0.adjacency, fu[g].1.adjacency);
            if let (Cell::Value(a), Cell::Value(b)) = (summed, closed) {
                worst_float = worst_float.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
            } else if summed != closed {
                closed_mismatch += 1;
            }
        }
        for param in [Param::Contacts, Param::Length] {
            let r = introversion_factor(&l, &scheme, param).unwrap();
            for gi in &r.groups {
                match gi.factor {
                    Cell::Value(f) => {
                        checked += 1;
                        if f != 1.0 {
                            fixed_point_mismatch += 1;
                        }
                    }
                    Cell::Undefined => {}
                    Cell::Infinite => fixed_point_mismatch += 1,
                }
            }
        }
    }
    verdict(
        5,
        closed_mismatch == 0 && worst_float <= 1e-12 && fixed_point_mismatch == 0 && checked > 0,
        t.elapsed(),
        Duration::from_secs(5),
        format!(
            "pair-baseline mismatches {closed_mismatch} (summed-float drift {worst_float:.1e}); {checked} contact/length factors, {fixed_point_mismatch} differ from 1"
        ),
    )
}

fn planted_config(seed: u64) -> SynthConfig {
    let groups = ["G1", "G2", "G3"]
        .iter()
        .map(|n| GroupSpec {
            name: n.to_string(),
            size: 20,
            role: Role::Staff,
        })
        .collect();
    SynthConfig {
        seed,
        days: 7,
        epoch: "2009-07-06T00:00:00Z".into(),
        utc_offset: "+00:00".into(),
        groups,
        base_rate: 1e-4,
        persistence: 0.8,
        affinity: vec![AffinitySpec {
            a: "G1".into(),
            b: "G2".into(),
            multiplier: 3.0,
        }],
        hourly_profile: [1.0; 24],
        role_modulation: Default::default(),
    }
}

/// Deviation of the planted pair for pairs and length, over daily views.
fn planted_deviation(seed: u64) -> (Cell, Cell, Polarity) {
    let out = generate(&planted_config(seed)).unwrap();
    let l = out.stream();
    let scheme = out.population.scheme(&out.registry, SERVICE).unwrap();
    let roles = out.population.roles(&out.registry);
    let days = l
        .partition_window(DAY, out.period_start, TimePeriod::new(out.period_start, out.period_end).unwrap())
        .unwrap();
    let sizes: Vec<GroupSizes> = days
        .iter()
        .map(|(_, d)| GroupSizes::active(d, &scheme, &roles))
        .collect();
    let views: Vec<DayView> = days
        .iter()
        .zip(&sizes)
        .filter(|((_, d), _)| !d.is_empty())
        .map(|((_, d), s)| DayView {
            stream: d,
            scheme: &scheme,
            roles: &roles,
            sizes: s,
        })
        .collect();
    let idx = |name: &str| scheme.groups().iter().position(|g| g == name).unwrap();
    let (i, j) = (idx("G1"), idx("G2"));
    let pairs = *affinity_deviation(&views, Param::Pairs, None)
        .unwrap()
        .deviation
        .get(i, j);
    let length = *affinity_deviation(&views, Param::Length, None)
        .unwrap()
        .deviation
        .get(i, j);
    (pairs, length, classify(pairs, length, &Thresholds::default()))
}

fn criterion_6_planted_affinity_recovery() -> bool {
    let t = Instant::now();
    let results: Vec<(Cell, Cell, Polarity)> = (0..100u64).into_par_iter().map(planted_deviation).collect();
    let in_band = |c: Cell| matches!(c, Cell::Value(v) if (2.55..=3.45).contains(&v));
    let hits = results
        .iter()
        .filter(|(p, l, label)| in_band(*p) && in_band(*l) && *label == Polarity::StronglyFavoured)
        .count();
    let mean = |f: fn(&(Cell, Cell, Polarity)) -> Cell| {
        let v: Vec<f64> = results.iter().filter_map(|r| f(r).value()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let strong = results
        .iter()
        .filter(|r| r.2 == Polarity::StronglyFavoured)
        .count();
    verdict(
        6,
        hits >= 95,
        t.elapsed(),
        Duration::from_secs(120),
        format!(
            "{hits}/100 seeds in [2.55, 3.45] and strongly favoured; mean deviation pairs {:.3}, length {:.3}; strongly favoured {strong}/100",
            mean(|r| r.0),
            mean(|r| r.1)
        ),
    )
}

fn criterion_7_temporal_additivity() -> bool {
    let t = Instant::now();
    let mut cfg = planted_config(7);
    cfg.base_rate = 5e-4;
    cfg.hourly_profile = std::array::from_fn(|h| if (8..20).contains(&h) { 2.0 } else { 0.3 });
    cfg.utc_offset = "+02:00".into();
    cfg.epoch = "2009-07-05T22:00:00Z".into();
    let out = generate(&cfg).unwrap();
    let l = out.stream();
    let roles = out.population.roles(&out.registry);
    let series = hourly_activity(&l, &roles, None, &out.calendar, None).unwrap();
    let days = l
        .partition_window(DAY, out.calendar.day_origin(), TimePeriod::new(out.period_start, out.period_end).unwrap())
        .unwrap();
    let mut mismatched_days = 0;
    for (p, d) in &days {
        let hourly: u64 = series
            .buckets
            .iter()
            .filter(|b| b.start >= p.start() && b.start < p.end())
            .map(|b| b.stats.cumul_length)
            .sum();
        if hourly != d.stats().cumul_length {
            mismatched_days += 1;
        }
    }
    let fixture = stream_of(&[(0, 1, 3540, 3660)]);
    let cal = Calendar::new(0, 0);
    let split = hourly_activity(&fixture, &linkstream::grouping::Roles(vec![None, None]), None, &cal, None).unwrap();
    let pieces: Vec<u64> = split.buckets.iter().map(|b| b.stats.cumul_length).collect();
    verdict(
        7,
        mismatched_days == 0 && days.len() == 7 && pieces == [60, 60],
        t.elapsed(),
        Duration::from_secs(5),
        format!(
            "{} days, {mismatched_days} with hourly sum != daily total; boundary fixture split {pieces:?}",
            days.len()
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8_determinism() -> bool {
    let t = Instant::now();
    std::env::set_var("SOURCE_DATE_EPOCH", "1246838400");
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = planted_config(8);
    cfg.days = 2;
    cfg.base_rate = 3e-4;
    cfg.groups[2].role = Role::Patient;
    let emit = |cfg: &SynthConfig| {
        let out = generate(cfg).unwrap();
        (
            io::emit_occurrences(&out.calendar, &out.registry, &out.occurrences),
            io::emit_metadata(&out.population),
        )
    };
    let (occ_a, meta) = emit(&cfg);
    let (occ_b, _) = emit(&cfg);
    let synth_same = occ_a == occ_b;
    let occ_path = tmp.path().join("occ.csv");
    let meta_path = tmp.path().join("meta.csv");
    fs::write(&occ_path, &occ_a).unwrap();
    fs::write(&meta_path, &meta).unwrap();

    let mut trees = Vec::new();
    let mut hashes = Vec::new();
    for run in ["a", "b"] {
        let inputs = InputSpec {
            occurrences: Some(occ_path.clone()),
            metadata: Some(meta_path.clone()),
            ..Default::default()
        };
        let mut rc = RunConfig::new(inputs, tmp.path().join(run));
        rc.schemes = vec!["service".into(), "category".into()];
        hashes.push(run_report(&rc).unwrap());
        trees.push(read_tree(&tmp.path().join(run)));
    }
    let report_same = trees[0] == trees[1] && hashes[0] == hashes[1];
    verdict(
        8,
        synth_same && report_same && trees[0].len() > 10,
        t.elapsed(),
        Duration::from_secs(30),
        format!(
            "synth files identical: {synth_same} ({} bytes); report bundles identical: {report_same} ({} files)",
            occ_a.len(),
            trees[0].len()
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> bool); 8] = [
        (1, criterion_1_fig1_golden),
        (2, criterion_2_merge_restrict_oracle),
        (3, criterion_3_conservation),
        (4, criterion_4_configuration_model_oracle),
        (5, criterion_5_introversion_closed_forms),
        (6, criterion_6_planted_affinity_recovery),
        (7, criterion_7_temporal_additivity),
        (8, criterion_8_determinism),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(true) => {}
            Ok(false) => failed.push(n),
            Err(_) => {
                println!("[FAIL] criterion {n}: panicked");
                failed.push(n);
            }
        }
    }
    println!("acceptance: {}/8 passed", 8 - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
