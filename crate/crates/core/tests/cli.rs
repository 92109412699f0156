use std::process::{Command, Output};

fn qkd2way(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd2way"))
        .args(args)
        .env_remove("QKD2WAY_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_ir_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ir.csv");
    let log = dir.path().join("rounds.csv");
    let o = qkd2way(&[
        "simulate",
        "--attack",
        "ir",
        "--rounds",
        "200000",
        "--seed",
        "9",
        "--out",
        csv.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("PASS"));

    let report = std::fs::read_to_string(&csv).unwrap();
    assert!(report
        .lines()
        .next()
        .unwrap()
        .starts_with("rate,errors,trials,"));
    assert!(!report.contains('\r'));
    let rounds = std::fs::read_to_string(&log).unwrap();
    assert_eq!(rounds.lines().count(), 200_001);
    assert!(rounds.starts_with("round,protocol,mode,"));
}

#[test]
fn jsonl_report_is_one_object_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let o = qkd2way(&[
        "simulate",
        "--protocol",
        "bb84",
        "--attack",
        "dcnot",
        "--rounds",
        "50000",
        "--format",
        "jsonl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("name").is_some());
    }
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn seed_from_environment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_qkd2way"))
            .args([
                "simulate", "--attack", "nort", "--x", "0.8", "--rounds", "30000",
            ])
            .args(["--out", p.to_str().unwrap()])
            .env("QKD2WAY_SEED", "123")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["simulate", "--xi", "2"][..],
        &["simulate", "--attack", "nort", "--x", "3"],
        &["simulate", "--attack", "bogus"],
        &["simulate", "--rounds", "0"],
        &["curves", "--attack", "nort", "--model", "fixed:0.7"],
        &["thresholds", "--rounds", "10"],
        &["pns", "--lstep", "0"],
        &["frobnicate"],
    ] {
        let o = qkd2way(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn thresholds_table_lists_every_attack() {
    let o = qkd2way(&["thresholds"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in [
        "IR", "11.9", "25.0", "17.1", "NORT", "14.6", "DCNOT*", "Generic", "8.8", "N/A",
    ] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn curves_are_deterministic_csv() {
    let a = qkd2way(&["curves", "--attack", "ir", "--grid-step", "0.01"]);
    let b = qkd2way(&["curves", "--attack", "ir", "--grid-step", "0.01"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("q1,I_AB,I_AE,I_BE,C_DR,C_RR\n"));
    assert_eq!(text.lines().count(), 27);
}

#[test]
fn pns_reports_crossover_footer() {
    let o = qkd2way(&["pns", "--lmin", "0", "--lmax", "10", "--lstep", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let footer = text.lines().last().unwrap();
    let km: f64 = footer
        .strip_prefix("# crossover_km,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((2.0..=3.0).contains(&km));

    let far = qkd2way(&["pns", "--lmin", "20", "--lmax", "30", "--lstep", "5"]);
    assert!(stdout(&far).ends_with("# crossover_km,none in range\n"));
}

#[test]
fn gain_rows_cover_both_protocols() {
    let o = qkd2way(&["gain", "--lmax", "2", "--lstep", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert_eq!(text.matches(",BB84,secure_gain").count(), 3);
    assert_eq!(text.matches(",LM05,secure_gain").count(), 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "attack=dcnot-star\nchi=0.3\nrounds=40000\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = qkd2way(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--chi",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(
        text.contains("attack=dcnot-star") && text.contains("chi=0.1"),
        "{text}"
    );
}
