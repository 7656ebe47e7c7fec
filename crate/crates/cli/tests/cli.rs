use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use structem::io::{read_dataset, read_network};
use structem::scoring::bde_score_complete;
use structem::DirichletPrior;

const NET: &str = r#"{
  "variables": [
    {"name": "A", "states": ["lo", "hi"]},
    {"name": "B", "states": ["lo", "hi"]},
    {"name": "C", "states": ["x", "y", "z"]}
  ],
  "parents": {"B": ["A"], "C": ["B"]},
  "cpt": {
    "A": [[0.3, 0.7]],
    "B": [[0.85, 0.15], [0.2, 0.8]],
    "C": [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]
  }
}
"#;

fn structem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structem"))
        .args(args)
        .env("STRUCTEM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("net.json"), NET).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn sample(&self, n: usize, name: &str) -> PathBuf {
        let out = self.path(name);
        let o = structem(&["sample", "--net", p(&self.path("net.json")), "--n", &n.to_string(), "--seed", "5", "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    }
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` in {text:?}"))
        .parse()
        .unwrap()
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("learn", &["--data", "--hidden", "--method", "--ess", "--seed", "--out", "--max-parents", "--time-limit"]),
        ("sample", &["--net", "--n", "--seed", "--out"]),
        ("corrupt", &["--data", "--fraction", "--seed", "--out"]),
        ("score", &["--net", "--data", "--method"]),
        ("evaluate", &["--true", "--learned", "--test", "--mc"]),
        ("benchmark", &["--spec", "--out"]),
    ];
    for (cmd, flags) in expected {
        let o = structem(&[cmd, "--help"]);
        assert!(o.status.success());
        let help = stdout(&o);
        for flag in *flags {
            assert!(help.contains(flag), "`{cmd} --help` lacks {flag}:\n{help}");
        }
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(structem(&["learn"]).status.code(), Some(1));
    assert_eq!(structem(&["frobnicate"]).status.code(), Some(1));
    let o = structem(&["learn", "--data", "d.csv", "--out", "o.json", "--method", "bde-magic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bde-magic"));
    assert_eq!(structem(&["corrupt", "--data", "d", "--out", "o", "--fraction", "1.0"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two_and_name_the_file() {
    let f = Fixture::new();
    let missing = f.path("absent.csv");
    let o = structem(&["learn", "--data", p(&missing), "--out", p(&f.path("o.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.csv"));

    let bad = f.path("bad.csv");
    std::fs::write(&bad, "A,B,C\nlo,hi,x\nlo,medium,y\n").unwrap();
    let o = structem(&["score", "--net", p(&f.path("net.json")), "--data", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("bad.csv") && msg.contains("line 3") && msg.contains("medium"), "{msg}");
}

#[test]
fn evaluate_against_itself_is_zero() {
    let f = Fixture::new();
    let net = f.path("net.json");
    let o = structem(&["evaluate", "--true", p(&net), "--learned", p(&net)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("kl\t0.0"), "{}", stdout(&o));
}

#[test]
fn learn_on_complete_data_scores_as_complete_data_bde() {
    let f = Fixture::new();
    let data = f.sample(400, "train.csv");
    let out = f.path("learned.json");
    let o = structem(&["learn", "--data", p(&data), "--method", "bde-summation", "--seed", "1", "--out", p(&out), "--schema", p(&f.path("net.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("iteration\texpected_score\tcheeseman_stutz\tedges\n"));

    let o = structem(&["score", "--net", p(&out), "--data", p(&data), "--method", "bde-summation"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = value(&stdout(&o), "expected_score");
    let learned = read_network(&out).unwrap();
    let dataset = read_dataset(&data, Some(learned.structure.variables()), "?").unwrap();
    let exact = bde_score_complete(&learned.structure, &dataset, &DirichletPrior::default()).unwrap();
    assert!((printed - exact).abs() < 1e-9 * exact.abs(), "{printed} vs {exact}");
    // On complete data the Cheeseman-Stutz score is the exact marginal likelihood too.
    assert!((value(&stdout(&o), "cheeseman_stutz") - exact).abs() < 1e-6 * exact.abs());
}

#[test]
fn corrupt_learn_evaluate_pipeline() {
    let f = Fixture::new();
    let data = f.sample(300, "train.csv");
    let test = f.sample(200, "test.csv");
    let corrupted = f.path("corrupted.csv");
    let o = structem(&["corrupt", "--data", p(&data), "--fraction", "0.25", "--seed", "9", "--out", p(&corrupted)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&corrupted).unwrap();
    assert!(text.contains('?'));

    let out = f.path("learned.json");
    let o = structem(&["learn", "--data", p(&corrupted), "--hidden", "1", "--method", "bic", "--seed", "2", "--out", p(&out), "--perturbations", "1", "--walks", "1", "--walk-length", "3", "--schema", p(&f.path("net.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let learned = read_network(&out).unwrap();
    assert_eq!(learned.structure.hidden().len(), 1);

    let o = structem(&["evaluate", "--true", p(&f.path("net.json")), "--learned", p(&out), "--test", p(&test), "--mc", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(value(&s, "kl").is_finite());
    let gap = value(&s, "log_loss_gap");
    assert!((gap - (value(&s, "log_loss_learned") - value(&s, "log_loss_true"))).abs() < 1e-12);
}

#[test]
fn benchmark_table_has_replicates_and_sample_sd() {
    let f = Fixture::new();
    let spec = f.path("spec.json");
    std::fs::write(
        &spec,
        r#"{"generator": "net.json", "sizes": [60], "missing_fractions": [0.1], "methods": ["bde-linear", "bic"],
            "replicates": 5, "seed": 3, "test_size": 50}"#,
    )
    .unwrap();
    let out = f.path("table.csv");
    let o = structem(&["benchmark", "--spec", p(&spec), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * (5 + 1));
    for cell in lines[1..].chunks(6) {
        let kls: Vec<f64> = cell[..5].iter().map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
        assert!(cell[..5].iter().all(|l| l.starts_with("replicate,")));
        let summary: Vec<&str> = cell[5].split(',').collect();
        assert_eq!(summary[0], "summary");
        let mean = kls.iter().sum::<f64>() / 5.0;
        let sd = (kls.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((summary[6].parse::<f64>().unwrap() - mean).abs() < 1e-12);
        assert!((summary[7].parse::<f64>().unwrap() - sd).abs() < 1e-12);
    }

    let again = f.path("again.csv");
    assert!(structem(&["benchmark", "--spec", p(&spec), "--out", p(&again)]).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}
