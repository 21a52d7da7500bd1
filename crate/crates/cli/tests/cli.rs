use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrrw-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn every_problem_is_listed_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &[
            "simulate", "--weight", "nope", "--kind", "zz", "--steps", "0",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for flag in ["--weight", "--kind", "--steps"] {
        assert!(e.contains(flag), "{e}");
    }
    let o = lab(
        &["index", "--weight", "linear:1", "--eta-sweep", "0.6:0.4:3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = lab(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["index", "--weight", "power:2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bounded"), "{}", stderr(&o));
}

#[test]
fn help_lists_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 6] = [
        (
            "index",
            &[
                "--weight",
                "--eta-sweep",
                "--w-hull",
                "--x-hull",
                "--nodes-per-decade",
                "--max-level",
                "--format",
                "--out",
                "--config",
            ],
        ),
        (
            "simulate",
            &[
                "--weight",
                "--kind",
                "--steps",
                "--seed",
                "--initial",
                "--probes",
                "--per-octave",
                "--snapshots",
                "--five-site",
                "--format",
                "--out-dir",
            ],
        ),
        (
            "couple",
            &[
                "--left",
                "--right",
                "--weight",
                "--seeds",
                "--steps",
                "--hat-l",
                "--initial",
                "--replay",
                "--records-dir",
                "--out",
            ],
        ),
        (
            "profile",
            &[
                "--weight",
                "--kind",
                "--seed",
                "--steps",
                "--i-max",
                "--per-octave",
                "--format",
                "--out",
            ],
        ),
        (
            "verify",
            &[
                "--weight",
                "--checks",
                "--etas",
                "--rel-tol",
                "--sandwich-k",
                "--f-eta",
                "--f-hull",
                "--seeds",
                "--identity-tol",
                "--kinds",
                "--enum-steps",
                "--runs",
            ],
        ),
        ("campaign", &["--config", "--out-dir", "--threads"]),
    ];
    for (cmd, flags) in cases {
        let o = lab(&[cmd, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let text = String::from_utf8(o.stdout).unwrap();
        for f in flags {
            assert!(text.contains(f), "{cmd} help lacks {f}");
        }
        if cmd != "campaign" {
            assert!(text.contains("[default: "), "{cmd} help shows no defaults");
        }
    }
    let o = lab(&["index", "--help"], dir.path());
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("[default: 0.45:0.55:11]"));
}

#[test]
fn simulate_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = lab(
            &[
                "simulate",
                "--weight",
                "linear:1",
                "--steps",
                "20000",
                "--seed",
                "7",
                "--out-dir",
                ".",
            ],
            d.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["series.csv", "ledger.json", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_fills_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "weight = \"linear:1\"\n[simulate]\nsteps = 2000\nseed = 5\nprobes = [-1, 0, 1]\n",
    )
    .unwrap();
    let o = lab(
        &["simulate", "--config", "run.toml", "--seed", "6"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("--seed on the command line overrides"),
        "{}",
        stderr(&o)
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 6);
    assert_eq!(summary["steps"], 2000);

    std::fs::write(
        dir.path().join("bad.toml"),
        "weight = \"linear:1\"\nnot_a_flag = 3\n",
    )
    .unwrap();
    let o = lab(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not_a_flag"));
}

#[test]
fn campaign_lists_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "version = 1\nseeds = \"1..3\"\nweights = [\"bogus\"]\nkinds = []\nhorizons = [0]\n",
    )
    .unwrap();
    let o = lab(&["campaign", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let lines = stderr(&o).lines().filter(|l| l.starts_with("  ")).count();
    assert!(lines >= 2, "{}", stderr(&o));
}

#[test]
fn couple_replay_matches_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "couple",
        "--left",
        "tilde",
        "--right",
        "reflected",
        "--weight",
        "polylog:0.6",
        "--replay",
        "4:120",
    ];
    let a = lab(&args, dir.path());
    let b = lab(&args, dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["left"]["seed"], 4);
    assert_eq!(v["right"]["time"], 120);
}
