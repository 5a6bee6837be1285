use std::collections::HashMap;
use std::process::{Command, Output};

fn kerrscope(args: &[&str]) -> Output {
    kerrscope_env(args, &[])
}

fn kerrscope_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kerrscope"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    summary: HashMap<String, String>,
}

fn parse(text: &str) -> Table {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    let summary = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Table { headers, rows, summary }
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn point_numeric_is_antibunched() {
    let out = kerrscope(&["point", "--engine", "numeric", "--delta", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    let t = parse(&stdout(&out));
    assert_eq!(t.headers, ["axis", "mean_n", "g2", "phi_plus", "phi_minus", "engine"]);
    assert_eq!(t.rows.len(), 1);
    assert!(num(&t.rows[0][2]) < 1.0);
    assert_eq!(t.rows[0][5], "numeric");
}

#[test]
fn analytic_rows_leave_fidelity_empty() {
    let out = kerrscope(&["sweep-detuning", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let t = parse(&text);
    assert!(t.rows.iter().all(|r| r[3].is_empty() && r[4].is_empty()));
    assert_eq!(num(&t.rows[0][0]), -7.0);
    assert_eq!(num(&t.rows[2][0]), 1.0);
}

#[test]
fn default_detuning_sweep_has_1601_rows() {
    let out = kerrscope(&["sweep-detuning"]);
    assert_eq!(out.status.code(), Some(0));
    let t = parse(&stdout(&out));
    assert_eq!(t.rows.len(), 1601);
}

#[test]
fn csv_round_trips_library_values() {
    use kerrscope::model::{ModelParams, NonlinearSign};
    use kerrscope::sweep::{sweep_detuning, Engine, Grid};

    let out = kerrscope(&["sweep-detuning", "--min", "-3", "--max", "0", "--steps", "31"]);
    let t = parse(&stdout(&out));
    let p = ModelParams::from_scaled(0.0, 1.0, 0.06, 1e-3, 50, NonlinearSign::Attractive).unwrap();
    let lib = sweep_detuning(&p, 50, &Grid::new(-3.0, 0.0, 31).unwrap(), Engine::Analytic, None).unwrap();
    for (row, want) in t.rows.iter().zip(lib.mean_n()) {
        assert!((num(&row[1]) - want).abs() <= 1e-12 * want.max(1e-300));
    }
}

#[test]
fn estimate_alpha_recovers_unit_nonlinearity() {
    let out = kerrscope(&["estimate-alpha"]);
    assert_eq!(out.status.code(), Some(0));
    let t = parse(&stdout(&out));
    let a = num(&t.summary["alpha_hat"]);
    assert!((a - 1.0).abs() <= 0.02, "alpha_hat = {a}");
    assert!(t.summary["peaks"].split(';').count() >= 3);
}

#[test]
fn estimate_alpha_reports_absolute_units() {
    let out = kerrscope(&["estimate-alpha", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let t = parse(&stdout(&out));
    let rel = num(&t.summary["alpha_hat"]);
    let abs = num(&t.summary["alpha_hat_abs"]);
    assert!((abs - 2.0 * rel).abs() < 1e-12);
}

#[test]
fn compare_reports_true_max_difference() {
    let out = kerrscope(&["compare", "--min", "-3", "--max", "0", "--steps", "61"]);
    assert_eq!(out.status.code(), Some(0));
    let t = parse(&stdout(&out));
    assert_eq!(t.headers[1], "mean_n_analytic");
    let max = t
        .rows
        .iter()
        .map(|r| (num(&r[1]) - num(&r[3])).abs())
        .fold(0.0, f64::max);
    let reported = num(&t.summary["max_abs_diff_mean_n"]);
    assert!((reported - max).abs() <= 1e-12 * max.max(1.0), "{reported} vs {max}");
}

#[test]
fn mixed_unit_styles_exit_1() {
    let out = kerrscope(&["point", "--omega", "0.1", "--kappa", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_arguments_exit_1() {
    for args in [
        &["point", "--alpha", "-1"][..],
        &["point", "--gamma", "0"],
        &["sweep-detuning", "--min", "1", "--max", "0"],
        &["sweep-detuning", "--steps", "1"],
        &["estimate-alpha", "--engine", "both"],
        &["no-such-command"],
    ] {
        assert_eq!(kerrscope(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(kerrscope(&["--help"]).status.code(), Some(0));
    assert_eq!(kerrscope(&["--version"]).status.code(), Some(0));
}

#[test]
fn unconverged_truncation_exits_2_without_partial_output() {
    let dir = std::env::temp_dir().join(format!("kerrscope-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("out.csv");
    // Drive far beyond the Kerr blockade: ⟨n⟩ outgrows the largest allowed basis.
    let out = kerrscope(&[
        "sweep-drive", "--engine", "numeric", "--delta", "0", "--kappa", "0.05",
        "--min", "0", "--max", "300", "--steps", "3", "--out", file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(!file.exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn flat_sweep_exits_3() {
    // Zero drive leaves the cavity empty: no resonances to count.
    let out = kerrscope(&["estimate-alpha", "--omega", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn worker_count_does_not_change_output() {
    let args = ["sweep-detuning", "--engine", "numeric", "--min", "-3", "--max", "0", "--steps", "41"];
    let one = kerrscope_env(&args, &[("KERRSCOPE_THREADS", "1")]);
    let four = kerrscope_env(&args, &[("KERRSCOPE_THREADS", "4")]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn bad_worker_count_exits_1() {
    let out = kerrscope_env(&["point"], &[("KERRSCOPE_THREADS", "lots")]);
    assert_eq!(out.status.code(), Some(1));
}
