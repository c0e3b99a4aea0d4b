use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_linkstream"));
    c.env("SOURCE_DATE_EPOCH", "1246838400");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fig1() -> String {
    data("fig1_occurrences.csv").display().to_string()
}

fn meta() -> String {
    data("fig1_metadata.csv").display().to_string()
}

#[test]
fn validate_fig1_restricted() {
    let o = run(&["validate", "--occurrences", &fig1(), "--from", "300", "--to", "900"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pairs: 2\n"));
    assert!(out.contains("contacts: 3\n"));
    assert!(out.contains("cumul_length: 210\n"));
}

#[test]
fn bad_line_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    fs::write(&f, "#epoch=2009-07-06T00:00:00Z slot=30\np001,s014,0\np001,s014,15\n").unwrap();
    let o = run(&["validate", "--occurrences", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(&["validate", "--occurrences", f.to_str().unwrap(), "--skip-bad"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("skipped_lines: 1"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(run(&["report"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    let o = run(&["validate", "--occurrences", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["validate", "--occurrences", &fig1(), "--epoch", "2001-01-01T00:00:00Z"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--epoch disagrees"));
    let o = run(&["validate", "--occurrences", &fig1(), "--scheme", "service"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn merge_writes_contacts() {
    let o = run(&["merge", "--occurrences", &fig1(), "--from", "300", "--to", "900"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "#epoch=2009-07-06T00:00:00Z slot=30\na,b,300,360\nb,c,450,540\na,b,600,660\n"
    );
    let o = run(&[
        "merge",
        "--occurrences",
        &fig1(),
        "--metadata",
        &meta(),
        "--role-filter",
        "ST-ST",
    ]);
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#')).count(), 2);
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn report_bundle_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "report",
            "--occurrences",
            &fig1(),
            "--metadata",
            &meta(),
            "--from",
            "300",
            "--to",
            "900",
            "--scheme",
            "service,category",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    assert!(fa.len() > 20);
    assert_eq!(fa, fb);

    let stats: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["pairs"], 2);
    assert_eq!(stats["contacts"], 3);
    assert_eq!(stats["cumul_length"], 210);
    assert_eq!(stats["full_uniform"]["contacts"], 1.0);
    assert_eq!(stats["full_uniform"]["length"], 70.0);
    let intro = fs::read_to_string(a.join("service/introversion.csv")).unwrap();
    assert!(intro.contains("S1,pairs,full-uniform,2,1,1,"));
    assert!(intro.lines().any(|l| l.starts_with("S1,pairs") && l.ends_with(",0.5,2")));
    let dev = fs::read_to_string(a.join("service/deviation_pairs.csv")).unwrap();
    assert!(dev.contains("n/a"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["generated_at"], "2009-07-06T00:00:00Z");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
}

#[test]
fn report_formats_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.toml");
    fs::write(&t, "neutral = 1.0\nstrong = 1.2\n").unwrap();
    let out = dir.path().join("r");
    let o = run(&[
        "report",
        "--occurrences",
        &fig1(),
        "--metadata",
        &meta(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
        "--thresholds",
        t.to_str().unwrap(),
        "--role-filter",
        "PA-ST",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("service/deviation_pairs_PA-ST.csv").exists());
    assert!(!out.join("service/deviation_pairs_ST-PA.csv").exists());
    assert!(!out.join("service/matrices.json").exists());
    assert!(!out.join("hourly.tsv").exists());

    let o = run(&[
        "report",
        "--occurrences",
        &fig1(),
        "--metadata",
        &meta(),
        "--out",
        out.to_str().unwrap(),
        "--role-filter",
        "PA",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn temporal_views() {
    let o = run(&["temporal", "--occurrences", &fig1(), "--utc-offset", "+00:00"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 24);
    let hour0: Vec<&str> = text.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(hour0[1], "2009-07-06T00:00");
    assert_eq!(hour0[5], "540");

    let o = run(&["temporal", "--occurrences", &fig1(), "--pattern"]);
    let text = stdout(&o);
    assert!(text.starts_with("# autocorrelation_168h\tn/a\n"));
    assert_eq!(text.lines().count(), 2 + 168);

    let o = run(&[
        "temporal",
        "--occurrences",
        &fig1(),
        "--metadata",
        &meta(),
        "--role-filter",
        "PA",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["temporal", "--occurrences", &fig1(), "--role-filter", "PA"]);
    assert_eq!(o.status.code(), Some(1));
}

const SYNTH: &str = r#"
seed = 11
days = 1
epoch = "2009-07-06T00:00:00+02:00"
utc_offset = "+02:00"
base_rate = 0.002
persistence = 0.7
[[groups]]
name = "W1"
size = 5
role = "PA"
[[groups]]
name = "W2"
size = 4
role = "ST"
[[affinity]]
a = "W1"
b = "W2"
multiplier = 3.0
"#;

#[test]
fn synth_is_byte_identical_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, SYNTH).unwrap();
    let files: Vec<PathBuf> = ["x.csv", "y.csv"].iter().map(|f| dir.path().join(f)).collect();
    let meta_out = dir.path().join("meta.csv");
    for f in &files {
        let o = run(&[
            "synth",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            f.to_str().unwrap(),
            "--metadata-out",
            meta_out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (x, y) = (fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap());
    assert_eq!(x, y);
    assert!(String::from_utf8_lossy(&x).starts_with("#epoch=2009-07-05T22:00:00Z slot=30\n"));

    let o = run(&[
        "report",
        "--occurrences",
        files[0].to_str().unwrap(),
        "--metadata",
        meta_out.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\n").unwrap();
    let o = run(&["synth", "--config", bad.to_str().unwrap(), "--output", files[0].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
