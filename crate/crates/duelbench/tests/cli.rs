//! End-to-end tests of the `duelbench` binary: exit codes, file formats and
//! reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_duelbench"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_env_cycle_prints_borda_extremes_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen-env",
            "--kind",
            "cycle",
            "--suboptimal",
            "19",
            "--p-condorcet",
            "0.51",
            "--p-cycle",
            "1.0",
            "--out",
            "cycle.mat",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("condorcet winner: ranker 0"), "{text}");
    assert!(text.contains("10.190000"), "{text}");
    assert!(text.contains("9.990000"), "{text}");
    assert!(text.contains("delta_min: 0.010000"), "{text}");

    let check = run(&["validate-env", "--env", "cycle.mat"], dir.path());
    assert_eq!(check.status.code(), Some(0));
    let text = stdout(&check);
    assert!(text.contains("rankers: 20"), "{text}");
    assert!(text.contains("assumption 2 (uninformative <= 1/3): holds"), "{text}");
}

#[test]
fn gen_env_utility_writes_logistic_probability() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen-env",
            "--kind",
            "utility",
            "--utilities",
            "1,0",
            "--out",
            "u.mat",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let content = fs::read_to_string(dir.path().join("u.mat")).unwrap();
    assert!(content.starts_with("# k=2\n"), "{content}");
    assert!(content.contains("0.731058578630"), "{content}");
}

#[test]
fn gen_env_missing_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-env", "--kind", "cycle", "--out", "x.mat"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    // clap-level missing required flag
    let out = run(&["gen-env", "--kind", "cycle"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_env_invalid_parameters_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen-env",
            "--kind",
            "cycle",
            "--suboptimal",
            "18",
            "--p-condorcet",
            "0.51",
            "--p-cycle",
            "1.0",
            "--out",
            "x.mat",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_algorithm_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "run",
            "--algorithm",
            "dts",
            "--alpha",
            "1.0",
            "--batch-size",
            "4",
            "--horizon",
            "100",
            "--out",
            "r.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_csv_and_prints_tally() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "\
algorithm = merge-dts
alpha = 1.01
batch_size = 2
horizon = 20000
base_seed = 5
replicates = 3
checkpoint_count = 8
env.kind = utility
env.utilities = 1,0
",
    )
    .unwrap();
    let out = run(
        &["run", "--config", "run.cfg", "--out", "res.csv", "--threads", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("final winners: ranker 0: 3"), "{text}");
    assert!(text.contains("throughput:"), "{text}");
    let csv = fs::read_to_string(dir.path().join("res.csv")).unwrap();
    assert!(csv.starts_with("replicate,step,cum_regret\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 8);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "\
algorithm = merge-rucb
alpha = 1.01
batch_size = 4
horizon = 50000
base_seed = 11
replicates = 4
checkpoint_count = 30
env.kind = cycle
env.suboptimal = 19
env.p_condorcet = 0.51
env.p_cycle = 1.0
",
    )
    .unwrap();
    for (out_name, threads) in [("a.csv", "1"), ("b.csv", "2")] {
        let out = run(
            &["run", "--config", "run.cfg", "--out", out_name, "--threads", threads],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "same config and seed must give byte-identical CSVs");
}

#[test]
fn aggregate_examples_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    // hand-written results: two replicates with finals 10 and 14
    fs::write(
        dir.path().join("res.csv"),
        "replicate,step,cum_regret\n0,5,4\n0,10,10\n1,5,6\n1,10,14\n",
    )
    .unwrap();
    let out = run(
        &["aggregate", "res.csv", "--out", "agg.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let agg = fs::read_to_string(dir.path().join("agg.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(lines.next(), Some("step,mean,stderr,n"));
    assert_eq!(lines.next(), Some("5,5,1,2"));
    assert_eq!(lines.next(), Some("10,12,2,2"));

    // identical ledgers -> zero stderr
    fs::write(
        dir.path().join("same.csv"),
        "replicate,step,cum_regret\n0,10,3.5\n1,10,3.5\n",
    )
    .unwrap();
    let out = run(&["aggregate", "same.csv", "--out", "agg2.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let agg = fs::read_to_string(dir.path().join("agg2.csv")).unwrap();
    assert!(agg.contains("10,3.5,0,2"), "{agg}");

    // no inputs -> usage error
    let out = run(&["aggregate", "--out", "agg3.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    // mismatched schedules -> validation error
    fs::write(
        dir.path().join("other.csv"),
        "replicate,step,cum_regret\n0,7,1\n",
    )
    .unwrap();
    let out = run(
        &["aggregate", "res.csv", "other.csv", "--out", "agg4.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_command_reports_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        &[
            "gen-env",
            "--kind",
            "utility",
            "--utilities",
            "1,0",
            "--out",
            "env.mat",
        ],
        dir.path(),
    );
    assert_eq!(gen.status.code(), Some(0));
    fs::write(
        dir.path().join("run.cfg"),
        "\
algorithm = merge-dts
alpha = 1.01
batch_size = 2
horizon = 20000
base_seed = 5
replicates = 3
checkpoint_count = 8
env.kind = file
env.path = env.mat
",
    )
    .unwrap();
    let out = run(
        &["run", "--config", "run.cfg", "--out", "res.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));

    let audit = run(
        &[
            "bound", "--results", "res.csv", "--config", "run.cfg", "--env", "env.mat",
        ],
        dir.path(),
    );
    assert_eq!(audit.status.code(), Some(0), "{audit:?}");
    let text = stdout(&audit);
    assert!(text.contains("theoretical bound:"), "{text}");
    assert!(text.contains("verdict: PASS"), "{text}");

    // tuned alpha outside the regime: warning, exit 0
    let warned = run(
        &[
            "bound", "--results", "res.csv", "--config", "run.cfg", "--env", "env.mat",
            "--alpha", "0.262144",
        ],
        dir.path(),
    );
    assert_eq!(warned.status.code(), Some(0), "{warned:?}");
    assert!(stdout(&warned).contains("bound not applicable"));

    // missing environment file: usage error
    let missing = run(
        &[
            "bound", "--results", "res.csv", "--config", "run.cfg", "--env", "nope.mat",
        ],
        dir.path(),
    );
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn validate_env_rejects_asymmetry() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.mat"),
        "# k=2\n0.500000000000,0.700000000000\n0.800000000000,0.500000000000\n",
    )
    .unwrap();
    let out = run(&["validate-env", "--env", "bad.mat"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_env_flags_uninformative_matrix() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("flat.mat"),
        "# k=3\n0.5,0.5,0.5\n0.5,0.5,0.5\n0.5,0.5,0.5\n",
    )
    .unwrap();
    let out = run(&["validate-env", "--env", "flat.mat"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("uninformative rankers: 3"), "{text}");
    assert!(text.contains("assumption 2 (uninformative <= 1/3): violated"), "{text}");
    assert!(text.contains("delta_min: undefined"), "{text}");
}

#[test]
fn env_var_caps_threads() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "\
algorithm = self-sparring
alpha = 1.0
batch_size = 1
horizon = 2000
base_seed = 1
replicates = 2
checkpoint_count = 4
env.kind = utility
env.utilities = 0.5,0
",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config", "run.cfg", "--out", "res.csv"])
        .env("DUELBENCH_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}
