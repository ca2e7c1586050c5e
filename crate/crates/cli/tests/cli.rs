use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::process::{Command, Output};

use rebel_cli::{play, ExperimentConfig};
use serde_json::Value;

const LD14: &str = r#"
[game]
game = "liars_dice"
dice = 1
faces = 4
"#;

const TINY_REBEL: &str = r#"
experiment = "tiny"
seed = 5

[game]
game = "liars_dice"
dice = 1
faces = 2

[rebel]
epochs = 4
precision = "f64"

[rebel.trainer]
examples_per_epoch = 64

[rebel.trainer.selfplay]
depth = 1
episodes_per_epoch = 4

[rebel.trainer.selfplay.solve]
algorithm = "cfr_d"
iterations = 16

[rebel.trainer.net]
hidden = [16, 16]
batch_size = 16
learning_rate = 1e-3

[eval]
every = 1
playthroughs = 4
last = 3
"#;

fn rebel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rebel"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_with(dir: &Path, command: &str, config: &str, out: &str) -> Output {
    let path = dir.join(format!("{out}.toml"));
    fs::write(&path, config).unwrap();
    let out = dir.join(out);
    rebel(&[
        command,
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// Data rows with the wall-clock column dropped.
fn rows_without_time(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn baseline_writes_power_of_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("experiment = \"b\"\nseed = 3\n{LD14}\n[baseline]\niterations = 40\n");
    let out = run_with(dir.path(), "baseline", &config, "run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let text = fs::read_to_string(run.join("results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# rebel results schema v1"));
    assert_eq!(lines.next(), Some("experiment,phase,step,exploitability,loss,seconds"));
    let steps: Vec<u64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(steps, vec![1, 2, 4, 8, 16, 32, 40]);
    let s = summary(&run);
    assert_eq!(s["command"], "baseline");
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    assert!(s["final"]["exploitability"].as_f64().unwrap() < 0.1);
    let echoed = ExperimentConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(echoed.seed, Some(3));
}

#[test]
fn baseline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "experiment = \"fp\"\nseed = 3\n{LD14}\n[baseline]\nsolver = \"fp\"\nfp_variant = \"flop\"\niterations = 64\n"
    );
    assert!(run_with(dir.path(), "baseline", &config, "a").status.success());
    assert!(run_with(dir.path(), "baseline", &config, "b").status.success());
    let a = rows_without_time(&dir.path().join("a/results.csv"));
    assert_eq!(a.len(), 7);
    assert_eq!(a, rows_without_time(&dir.path().join("b/results.csv")));
    assert_eq!(
        summary(&dir.path().join("a"))["config_hash"],
        summary(&dir.path().join("b"))["config_hash"]
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let zero = format!("experiment = \"z\"\nseed = 1\n{LD14}\n[baseline]\niterations = 0\n");
    let out = run_with(dir.path(), "baseline", &zero, "zero");
    assert_eq!(out.status.code(), Some(2));

    let big = "experiment = \"big\"\nseed = 1\n[game]\ngame = \"liars_dice\"\ndice = 3\nfaces = 6\n";
    let out = run_with(dir.path(), "baseline", big, "big");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("histories"));

    let unseeded = format!("experiment = \"u\"\n{LD14}");
    assert_eq!(run_with(dir.path(), "baseline", &unseeded, "u").status.code(), Some(2));

    let broken = "experiment = \n";
    assert_eq!(run_with(dir.path(), "rebel", broken, "broken").status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(
        &path,
        format!("experiment = \"s\"\n{LD14}\n[baseline]\niterations = 2\n"),
    )
    .unwrap();
    let out = dir.path().join("o");
    let status = rebel(&[
        "baseline",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert_eq!(summary(&out)["seed"], 11);
}

#[test]
fn checks_pass_and_fail_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = "experiment = \"c\"\nseed = 2\n[game]\ngame = \"modified_rps\"\n";
    let out = run_with(dir.path(), "checks", base, "ok");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ok/checks.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["passed"] == true));

    let strict = format!("{base}\n[checks]\nsafe_ratio = 1e9\nsafe_iterations = 64\nsafe_playthroughs = 16\n");
    let out = run_with(dir.path(), "checks", &strict, "strict");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL safe_vs_unsafe_rps"));
}

#[test]
fn rebel_trains_evaluates_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "rebel", TINY_REBEL, "a");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = dir.path().join("a");
    let rows = rows_without_time(&a.join("results.csv"));
    assert_eq!(rows.iter().filter(|r| r.contains(",train,")).count(), 4);
    let evals: Vec<f64> = rows
        .iter()
        .filter(|r| r.contains(",eval,"))
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(evals.len(), 4);
    for e in 1..=4 {
        assert!(a.join(format!("checkpoints/epoch-{e:04}.json")).exists());
    }
    let reported = summary(&a)["final"]["exploitability"].as_f64().unwrap();
    let expected = evals[1..].iter().sum::<f64>() / 3.0;
    assert!((reported - expected).abs() < 1e-8, "{reported} vs {expected}");

    assert!(run_with(dir.path(), "rebel", TINY_REBEL, "b").status.success());
    assert_eq!(rows, rows_without_time(&dir.path().join("b/results.csv")));
}

#[test]
fn value_ablations_run_without_training() {
    let dir = tempfile::tempdir().unwrap();
    for value in ["oracle", "zero"] {
        let config = TINY_REBEL.replace("precision = \"f64\"", &format!("value = \"{value}\""));
        let out = run_with(dir.path(), "rebel", &config, value);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = rows_without_time(&dir.path().join(value).join("results.csv"));
        assert!(rows.iter().all(|r| r.contains(",eval,")));
        assert_eq!(rows.len(), 4);
    }
}

#[test]
fn scripted_play_reaches_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"p\"\nseed = 9\n[game]\ngame = \"modified_rps\"\n[rebel]\nvalue = \"zero\"\n[rebel.trainer.selfplay]\ndepth = 1\n[rebel.trainer.selfplay.solve]\niterations = 32\n";
    let resolved = ExperimentConfig::parse(text)
        .unwrap()
        .resolve(None, Some(dir.path().into()))
        .unwrap();
    for seat in 0..2 {
        let mut input = Cursor::new("7\n1\n");
        let mut output = Vec::new();
        let payoff = play::run_play(&resolved, seat, None, &mut input, &mut output).unwrap();
        let shown = String::from_utf8(output).unwrap();
        assert!(payoff.is_some(), "{shown}");
        assert!(shown.contains("Game over"));
    }
    let mut silent = Cursor::new("");
    let mut output = Vec::new();
    assert_eq!(
        play::run_play(&resolved, 0, None, &mut silent, &mut output).unwrap(),
        None
    );
}

#[test]
fn shipped_configs_parse_and_resolve() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut texts: Vec<(String, String)> = fs::read_dir(root.join("configs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.display().to_string(), fs::read_to_string(&p).unwrap()))
        .collect();
    let readme = fs::read_to_string(root.join("README.md")).unwrap();
    for block in readme.split("```toml\n").skip(1) {
        texts.push(("README".into(), block.split("```").next().unwrap().to_string()));
    }
    assert!(texts.len() >= 8);
    for (name, text) in texts {
        let config = ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let resolved = config
            .resolve(None, Some("unused".into()))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        resolved.check_tractable().unwrap();
    }
}

#[test]
fn nested_typos_are_config_errors() {
    let text = format!("experiment = \"t\"\nseed = 1\n{LD14}\n[rebel.trainer.selfplay]\nepisodes = 3\n");
    assert!(ExperimentConfig::parse(&text).is_err());
}
