use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const SUBCOMMANDS: [&str; 8] = [
    "vertices", "eval", "sweep", "boundary", "merge", "game", "scan", "verify",
];
const TSIRELSON_C: &str =
    "0.7071067811865476,0.7071067811865476,0.7071067811865476,-0.7071067811865476";

fn corrbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrbox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = corrbox(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let names = std::iter::once(None).chain(SUBCOMMANDS.into_iter().map(Some));
    for sub in names {
        let mut args: Vec<&str> = sub.into_iter().collect();
        args.push("--help");
        let text = stdout(&args);
        let path = golden_dir().join(format!("{}.help", sub.unwrap_or("corrbox")));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
        } else {
            let want = std::fs::read_to_string(&path).unwrap_or_else(|_| {
                panic!("missing {}; rerun with UPDATE_GOLDEN=1", path.display())
            });
            assert_eq!(text, want, "{}", path.display());
        }
    }
}

#[test]
fn every_flag_is_documented() {
    for sub in SUBCOMMANDS {
        let help = stdout(&[sub, "--help"]);
        for line in help.lines().filter(|l| l.trim_start().starts_with("--")) {
            let mut words = line.split_whitespace();
            let flag = words.next().unwrap();
            let rest: Vec<&str> = words.skip_while(|w| w.starts_with('<')).collect();
            assert!(
                rest.first().is_some_and(|w| !w.starts_with('[')),
                "{sub} {flag} has no description"
            );
        }
    }
}

#[test]
fn vertices_csv_has_one_row_per_vertex() {
    let text = stdout(&["vertices", "--format", "csv"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 25);
    assert!(lines[0].starts_with("vertex,c00,c01,c10,c11,b_max"));
    let width = lines[0].split(',').count();
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), width);
        let b_max: f64 = cols[5].parse().unwrap();
        if cols[0].starts_with("NL") {
            assert_eq!(b_max, 4.0, "{row}");
        } else {
            assert!(b_max <= 2.0, "{row}");
        }
    }
}

#[test]
fn eval_pr_vertex() {
    let v: Value = serde_json::from_str(&stdout(&["eval", "--box", "NL000"])).unwrap();
    assert_eq!(v["s_ic"], 8.0);
    assert_eq!(v["b_max"], 4.0);
    assert_eq!(v["ic_ok"], false);
}

#[test]
fn eval_inline_correlators_and_file() {
    let v: Value = serde_json::from_str(&stdout(&["eval", "--c", TSIRELSON_C])).unwrap();
    assert_eq!(v["b_max"], 2.82842712475);
    assert_eq!(v["s_ic"], 4.0);
    assert_eq!(v["quantum_ok"], true);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.json");
    std::fs::write(&path, corrbox::JointBox::pr().to_json(Some("pr"))).unwrap();
    let from_file: Value =
        serde_json::from_str(&stdout(&["eval", "--box", path.to_str().unwrap()])).unwrap();
    let from_name: Value = serde_json::from_str(&stdout(&["eval", "--box", "NL000"])).unwrap();
    assert_eq!(from_file, from_name);
}

#[test]
fn merge_case_a_within_tolerance() {
    let v: Value = serde_json::from_str(&stdout(&[
        "merge",
        "--family",
        "NL000+NL010",
        "--rays",
        "100",
    ]))
    .unwrap();
    assert_eq!(v["rays"], 100);
    assert!(v["max_discrepancy"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn boundary_csv_layout() {
    let text = stdout(&["boundary", "--rays", "5"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], corrbox::slices::BOUNDARY_CSV_HEADER);
    assert_eq!(lines.len(), 6);
    let r_tlm: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((r_tlm - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-6);
}

#[test]
fn sweep_formats() {
    let csv = stdout(&["sweep", "--family", "NL000+L0000", "--resolution", "11"]);
    assert_eq!(
        csv.lines().next().unwrap(),
        corrbox::slices::SLICE_CSV_HEADER
    );
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
    let svg = stdout(&["sweep", "--resolution", "11", "--format", "svg"]);
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let json: Value =
        serde_json::from_str(&stdout(&["sweep", "--resolution", "3", "--format", "json"])).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 9);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, seed: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let transcript = dir.path().join(format!("{tag}.transcript.json"));
        stdout(&[
            "game",
            "--c",
            TSIRELSON_C,
            "--n",
            "2",
            "--trials",
            "2000",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "--transcript",
            transcript.to_str().unwrap(),
        ]);
        (
            std::fs::read(out).unwrap(),
            std::fs::read(transcript).unwrap(),
        )
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);

    let sweep = |tag: &str| {
        let out = dir.path().join(format!("{tag}.csv"));
        stdout(&[
            "sweep",
            "--resolution",
            "21",
            "--out",
            out.to_str().unwrap(),
        ]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(sweep("s1"), sweep("s2"));
}

#[test]
fn out_writes_file_and_nothing_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let printed = stdout(&["vertices", "--out", path.to_str().unwrap()]);
    assert!(printed.is_empty());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        stdout(&["vertices"])
    );
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["bogus"],
        vec!["eval"],
        vec!["eval", "--box", "NL000", "--unknown"],
        vec!["eval", "--box", "NOPE"],
        vec!["eval", "--c", "1,1,1"],
        vec!["eval", "--box", "NL000", "--format", "svg"],
        vec!["sweep", "--family", "L0000+NL000"],
        vec!["verify", "--suite", "nonexistent"],
        vec!["game", "--box", "NL000", "--n", "0"],
    ] {
        let out = corrbox(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn verify_passes_and_reports_counts() {
    let text = stdout(&["verify", "--suite", "amgm", "--samples", "100000"]);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("amgm,100000,0,pass"), "{row}");
    let json: Value = serde_json::from_str(&stdout(&[
        "verify",
        "--suite",
        "dominance",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(json[0]["violations"], 0);
}

#[test]
fn scan_grid_matches_quadratic_bound() {
    let text = stdout(&["scan", "--n", "14"]);
    for row in text.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let s_ic: f64 = cols[2].parse().unwrap();
        assert_eq!(cols[3].is_empty(), s_ic <= 4.0 + 1e-9, "{row}");
    }
}
