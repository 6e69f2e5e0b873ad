use std::path::Path;
use std::process::{Command, Output};

fn copwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copwave")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&copwave(&["--help"])), 0);
    assert_eq!(code(&copwave(&["estimate", "--help"])), 0);
    assert_eq!(code(&copwave(&["estimate"])), 1);
    assert_eq!(code(&copwave(&["no-such-command"])), 1);
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = copwave(&["estimate", path(&empty), "--level", "2"]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "0.1,0.2\n0.3\n").unwrap();
    assert_eq!(code(&copwave(&["estimate", path(&ragged), "--level", "2"])), 1);

    let ties = dir.path().join("ties.csv");
    std::fs::write(&ties, "0.1,0.2\n0.1,0.4\n0.5,0.6\n").unwrap();
    assert_eq!(code(&copwave(&["estimate", path(&ties), "--level", "1", "--ties", "reject"])), 1);
    assert_eq!(code(&copwave(&["estimate", path(&ties), "--level", "1"])), 0);

    assert_eq!(code(&copwave(&["estimate", path(&ties), "--level", "1", "--dim", "3"])), 1);
    assert_eq!(code(&copwave(&["estimate", path(&ties), "--level", "1", "--wavelet", "db7"])), 1);
    assert_eq!(code(&copwave(&["simulate", "--model", "fgm", "--theta", "1.5", "--n", "10"])), 1);
}

#[test]
fn bad_experiment_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let base = r#"
model = { family = "fgm", theta = 0.75 }
dim = 2
n_list = [2048, 1024]
replications = 2
levels = { policy = "rule" }
"#;
    std::fs::write(&cfg, base).unwrap();
    assert_eq!(code(&copwave(&["experiment", "rate", "--config", path(&cfg)])), 1);

    let unbounded = base
        .replace("[2048, 1024]", "[1024, 2048]")
        .replace("family = \"fgm\", theta = 0.75", "family = \"clayton\", theta = 2.0");
    std::fs::write(&cfg, unbounded).unwrap();
    let out = copwave(&["experiment", "rate", "--config", path(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("force"));
}

#[test]
fn haar_toy_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    // Ranks (1,2), (2,1), (3,4), (4,3) with n = 4: pseudo-observations 0.25..1.
    std::fs::write(&input, "10,20\n20,10\n30,40\n40,30\n").unwrap();
    let out = copwave(&["estimate", path(&input), "--level", "1", "--grid", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u1,u2,value");
    // Grid points 1/3 and 2/3. Cells are right-open, so 0.5 lands in the upper half:
    // counts 0 in (0,0), 1 in (0,1) and (1,0), 2 in (1,1).
    let values: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values, vec![0.0, 1.0, 1.0, 2.0]);
}

#[test]
fn simulate_is_seed_deterministic() {
    let a = copwave(&["simulate", "--model", "frank", "--theta", "5", "--n", "200", "--seed", "9"]);
    let b = copwave(&["simulate", "--model", "frank", "--theta", "5", "--n", "200", "--seed", "9"]);
    let c = copwave(&["simulate", "--model", "frank", "--theta", "5", "--n", "200", "--seed", "10"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 200);
}

#[test]
fn auto_level_reports_rule() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("big.csv");
    let n = (1usize << 20).to_string();
    let out = copwave(&["simulate", "--model", "independence", "--n", &n, "--seed", "1", "--out", path(&input)]);
    assert_eq!(code(&out), 0);
    let est = dir.path().join("est.csv");
    let out = copwave(&["estimate", path(&input), "--auto-level", "1", "--grid", "3", "--out", path(&est)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8(out.stderr).unwrap();
    assert!(log.starts_with("level j=4\n"), "{log}");
    assert!(log.contains("n/(j 2^((d+1)j))"));
}

#[test]
fn check_suites_pass() {
    let out = copwave(&["check-basis", "--level", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = copwave(&["check-kernel", "--level", "2", "--wavelet", "haar", "--wavelet", "db2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("0 failed"));
}

#[test]
fn experiment_outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for workers in ["1", "4"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let cfg = dir.path().join(format!("w{workers}.toml"));
        let text = format!(
            r#"
model = {{ family = "fgm", theta = 0.75 }}
dim = 2
n_list = [512, 1024, 2048]
replications = 6
seed = 3
levels = {{ policy = "rule" }}
[output]
dir = "{}"
"#,
            out_dir.display()
        );
        std::fs::write(&cfg, text).unwrap();
        let out = copwave(&["experiment", "decompose", "--config", path(&cfg), "--workers", workers]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = ["report.csv", "curves.csv"]
            .iter()
            .map(|f| std::fs::read(out_dir.join(f)).unwrap())
            .collect();
        let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
        reports.push((files, summary.replace(&out_dir.display().to_string(), "")));
    }
    assert_eq!(reports[0].0, reports[1].0);
    assert_eq!(reports[0].1, reports[1].1.replace("w4", "w1"));
}
