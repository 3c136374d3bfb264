use std::path::Path;
use std::process::{Command, Output};

fn outage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outage"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = "devices = 6\naps = 2\npayload_bytes = 300\n";

#[test]
fn simulate_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = stdout(&outage(&["--config", &cfg, "--trials", "10", "simulate"]));
    assert_eq!(
        out.lines().next().unwrap(),
        "scheme,B,L,beta,D,A,p_te,p_to,p_so,se_te,se_to,se_so,n_trials,seed"
    );
}

#[test]
fn simulate_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SMALL}sweep_pilots = [2, 20]\n"));
    let a = stdout(&outage(&["--config", &cfg, "--trials", "3000", "--seed", "9", "--threads", "1", "simulate"]));
    let b = stdout(&outage(&["--config", &cfg, "--trials", "3000", "--seed", "9", "--threads", "1", "simulate"]));
    let c = stdout(&outage(&["--config", &cfg, "--trials", "3000", "--seed", "9", "--threads", "4", "simulate"]));
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = stdout(&outage(&["--config", &cfg, "--trials", "3000", "--seed", "10", "--threads", "1", "simulate"]));
    assert_ne!(a, d);
}

#[test]
fn single_trial_gives_indicator_values() {
    let out = stdout(&outage(&["--trials", "1", "simulate"]));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    for v in &row[6..9] {
        assert!(*v == "0" || *v == "1", "{v}");
    }
    assert_eq!(row[12], "1");
}

#[test]
fn rescaled_rates_never_overflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "devices = 6\naps = 2\npayload_bytes = 3000\nsweep_pilots = [1, 10, 100]\n");
    let out = stdout(&outage(&["--config", &cfg, "--trials", "2000", "simulate", "--scheme", "mvr"]));
    for line in out.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], "mvr");
        assert_eq!(cells[7], "0");
    }
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let o = outage(&["figure", "histogram"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown figure"));
}

#[test]
fn config_errors_point_at_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "devices = 5\naps = \"three\"\n");
    let o = outage(&["--config", &cfg, "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("aps"), "{err}");
    let bad = write(dir.path(), "d.toml", "backoff = 1.5\n");
    assert_eq!(outage(&["--config", &bad, "simulate"]).status.code(), Some(2));
}

#[test]
fn analyze_reports_passing_invariants() {
    let o = outage(&["analyze"]);
    let out = stdout(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invariants hold"));
    let header: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let ok = header.iter().position(|h| *h == "ok").unwrap();
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(ok) == Some("true")));
    assert!(out.lines().any(|l| l.starts_with("device_failure,,,1,1,,,0,")));
}

#[test]
fn bounds_figure_is_ordered_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        stdout(&outage(&["--trials", "20000", "--out", d.to_str().unwrap(), "figure", "bounds"]));
    }
    for base in ["15", "20", "25"] {
        let name = format!("bounds_base{base}.csv");
        let text = std::fs::read_to_string(a.join(&name)).unwrap();
        assert_eq!(text, std::fs::read_to_string(b.join(&name)).unwrap());
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        for curve in ["mc", "loose_lower", "loose_upper", "tight_upper"] {
            assert!(header.split(',').any(|h| h == curve));
        }
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 30);
        assert!(rows.iter().all(|r| r.ends_with(",true")));
    }
    assert_eq!(
        std::fs::read_to_string(a.join("manifest.json")).unwrap(),
        std::fs::read_to_string(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn manifest_digest_ignores_key_order() {
    let dir = tempfile::tempdir().unwrap();
    let c1 = write(dir.path(), "c1.toml", "devices = 4\naps = 2\nseed = 3\n");
    let c2 = write(dir.path(), "c2.toml", "seed = 3\naps = 2\ndevices = 4\n");
    let mut digests = Vec::new();
    for (c, o) in [(&c1, "o1"), (&c2, "o2")] {
        let out = dir.path().join(o);
        stdout(&outage(&["--config", c, "--trials", "50", "--out", out.to_str().unwrap(), "simulate"]));
        let m: String = std::fs::read_to_string(out.join("manifest.json")).unwrap();
        digests.push(m.lines().find(|l| l.contains("config_digest")).unwrap().to_string());
        assert!(out.join("simulate.csv").exists());
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn every_figure_runs_at_toy_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "devices = 4\naps = 2\nsweep_payload_bytes = [20, 400]\nsweep_pilots = [2, 20]\nsweep_backoff = [0.5, 0.9]\nsweep_snr_db = [0, 10, 20]\n",
    );
    for fig in ["training", "payload", "backoff", "benchmark", "diversity"] {
        let out = dir.path().join(fig);
        stdout(&outage(&["--config", &cfg, "--trials", "100", "--out", out.to_str().unwrap(), "figure", fig]));
        let csvs = std::fs::read_dir(&out)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count();
        assert!(csvs >= 1, "{fig}");
        assert!(out.join("manifest.json").exists());
    }
}
