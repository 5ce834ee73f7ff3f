use std::path::Path;
use std::process::{Command, Output};

use cbwk_cli::config::{self, ExperimentConfig, Mode};

fn cbwk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbwk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn small_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbwk(
        &[
            "run", "--preset", "benchmark-degenerate", "--horizons", "200,400,800", "--estimations", "2",
            "--trials", "3", "--seed", "4", "--out", "r.csv", "--gnuplot", "r.dat", "--trajectories", "t.csv",
        ],
        dir.path(),
    );
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "T,mode,fluid_value,mean_regret,ci99_halfwidth,n_estimations,n_trials,slope_global");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("200,full,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("r.dat")).unwrap().lines().count(), 4);

    let traj = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut rows = traj.lines();
    assert_eq!(rows.next().unwrap(), "T,t,theta,gamma,phi,a,reward,budget,rho,lp_objective");
    let first: Vec<_> = rows.next().unwrap().split(',').collect();
    assert_eq!(&first[..2], &["200", "1"]);
    assert_eq!(first[8], "1;1.15");
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, extra: &'static [&'static str]| {
        let mut v = vec![
            "run", "--preset", "benchmark-nondegenerate", "--mode", "partial", "--horizons", "300", "--estimations",
            "2", "--trials", "4", "--seed", "9", "--out", out,
        ];
        v.extend_from_slice(extra);
        v
    };
    cbwk(&args("a.csv", &[]), dir.path());
    cbwk(&args("b.csv", &["--serial"]), dir.path());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("300,partial,"));
}

#[test]
fn invalid_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "preset = \"benchmark-degenerate\"\nhorizons = [10000, 5000]\nestimations = 2\ntrials = 1\nout = \"r.csv\"\n",
    )
    .unwrap();
    let o = cbwk(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("r.csv").exists());

    std::fs::write(
        dir.path().join("unknown.toml"),
        "preset = \"benchmark-degenerate\"\nhorizons = [5000]\nestimations = 2\ntrials = 1\nout = \"r.csv\"\nbatches = 4\n",
    )
    .unwrap();
    let o = cbwk(&["run", "--config", "unknown.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("batches"));
    assert!(!dir.path().join("r.csv").exists());

    let o = cbwk(&["run", "--preset", "benchmark-degenerate", "--estimations", "1", "--out", "r.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = cbwk(&["run", "--out", "r.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = cbwk(&["run", "--preset", "benchmark-degenerate", "--mode", "bandit"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn written_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbwk(
        &[
            "config", "--preset", "benchmark-nondegenerate", "--mode", "partial", "--full-protocol", "--seed", "17",
            "--t-quantile", "--out", "p.csv", "--to", "c.toml",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let loaded = config::load_config(dir.path().join("c.toml")).unwrap();
    let mut expected = ExperimentConfig::reduced("benchmark-nondegenerate", "p.csv");
    expected.seed = 17;
    expected.use_full_protocol();
    expected.mode = Mode::Partial;
    expected.quantile = config::Quantile::T;
    assert_eq!(loaded, expected);

    config::save_config(dir.path().join("again.toml"), &loaded).unwrap();
    assert_eq!(config::load_config(dir.path().join("again.toml")).unwrap(), loaded);
}

#[test]
fn instance_file_and_inline_instance_match_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbwk(&["instance", "--preset", "benchmark-degenerate", "--out", "deg.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let common = ["--horizons", "250", "--estimations", "2", "--trials", "2", "--seed", "3"];
    let mut a = vec!["run", "--preset", "benchmark-degenerate", "--out", "a.csv"];
    a.extend(common);
    let mut b = vec!["run", "--instance", "deg.toml", "--out", "b.csv"];
    b.extend(common);
    cbwk(&a, dir.path());
    cbwk(&b, dir.path());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("a.csv")).unwrap(),
        std::fs::read_to_string(dir.path().join("b.csv")).unwrap()
    );

    let doc = cbwk::instance_file::InstanceDoc::from_instance(&cbwk::presets::benchmark_degenerate());
    let mut inline = ExperimentConfig::reduced("benchmark-degenerate", "c.csv");
    inline.preset = None;
    inline.instance = Some(doc);
    inline.horizons = vec![250];
    inline.estimations = 2;
    inline.trials = 2;
    inline.seed = 3;
    config::save_config(dir.path().join("inline.toml"), &inline).unwrap();
    cbwk(&["run", "--config", "inline.toml"], dir.path());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("a.csv")).unwrap(),
        std::fs::read_to_string(dir.path().join("c.csv")).unwrap()
    );
}

#[test]
fn estimator_suites() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbwk(&["esttest", "weissman", "--reps", "300", "--out", "w.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("PASS"));
    assert_eq!(std::fs::read_to_string(dir.path().join("w.csv")).unwrap().lines().count(), 301);

    // zero tolerated violations with a loose ε
    let o = cbwk(
        &["esttest", "weissman", "--reps", "200", "--samples", "20", "--epsilon", "0.99", "--max-rate", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{o:?}");

    let o = cbwk(&["esttest", "kde-rate", "--reps", "5", "--sizes", "50,5000", "--grid", "129"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = cbwk(&["esttest", "kde-rate", "--kernel", "box"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
