use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pool-al"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tiny_config(strategies: &str, extra: &str) -> String {
    format!(
        r#"
[data]
learn_fraction = 0.5
split_seed = 3

[data.synthetic]
n_samples = 160
seed = 11

[experiment]
target = "LAI"
strategies = {strategies}
initial_size = 10
batch_size = 10
max_labeled = 40
replicates = {extra}
master_seed = 42

[krr]
lengthscale_factors = [0.5, 1.0, 2.0]
lambdas = [1e-4, 1e-2]

[output]
clock = "none"
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn out_str(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", &tiny_config(r#"["RANDOM"]"#, "1"));
    let o = run(&["validate", "--config", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", out_str(&o));

    let bad = write(dir.path(), "bad.toml", &tiny_config(r#"["RANDOM", "FOO"]"#, "1"));
    let o = run(&["validate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let msg = out_str(&o);
    assert!(msg.contains("line 12") && msg.contains("FOO"), "{msg}");

    let syntax = write(dir.path(), "syntax.toml", "[experiment\ntarget = 1\n");
    let o = run(&["validate", "--config", &syntax]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out_str(&o).contains("line 1"), "{}", out_str(&o));

    let o = run(&["validate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_strategy_run_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &tiny_config(r#"["RANDOM"]"#, "1"));
    let out = dir.path().join("out");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", out_str(&o));
    for f in ["curves_krr_LAI.csv", "curve_RANDOM_krr_LAI.csv", "summary_krr_LAI.csv", "reference_krr_LAI.csv", "run.log"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let curves = fs::read_to_string(out.join("curves_krr_LAI.csv")).unwrap();
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], "labeled_count,RANDOM,reference");
    assert_eq!(lines.len(), 1 + 4);
    let refs: Vec<&str> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert!(refs.iter().all(|r| *r == refs[0]));
    let summary = fs::read_to_string(out.join("summary_krr_LAI.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn all_strategies_share_a_grid_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &tiny_config(r#"["all"]"#, "2"));
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{}", out_str(&o));
        outputs.push(out);
    }
    let curve_files: Vec<_> = fs::read_dir(&outputs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("curve_"))
        .collect();
    assert_eq!(curve_files.len(), 7);
    let grid = |f: &str| -> Vec<String> {
        fs::read_to_string(outputs[0].join(f))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect()
    };
    let first = grid(&curve_files[0]);
    assert_eq!(first, vec!["10", "20", "30", "40"]);
    assert!(curve_files.iter().all(|f| grid(f) == first));
    let header = fs::read_to_string(outputs[0].join("curves_krr_LAI.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 9);

    let mut names: Vec<_> = fs::read_dir(&outputs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in names {
        assert_eq!(fs::read(outputs[0].join(&n)).unwrap(), fs::read(outputs[1].join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn synth_then_run_from_the_lut() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &tiny_config(r#"["EBD"]"#, "1"));
    let lut = dir.path().join("lut.csv");
    let o = run(&["synth", "--config", &cfg, "--out", lut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", out_str(&o));
    let text = fs::read_to_string(&lut).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 20);
    assert_eq!(text.lines().count(), 161);

    let bands: Vec<String> = header[..18].iter().map(|h| format!("\"{h}\"")).collect();
    let lut_cfg = tiny_config(r#"["EBD"]"#, "1")
        .replace("[data.synthetic]\nn_samples = 160\nseed = 11\n", "")
        .replace(
            "[data]\n",
            &format!("[data]\nlut = \"lut.csv\"\nfeatures = [{}]\ntargets = [\"LCC\", \"LAI\"]\n", bands.join(", ")),
        );
    let cfg2 = write(dir.path(), "lut.toml", &lut_cfg);
    let (a, b) = (dir.path().join("from_lut"), dir.path().join("from_synth"));
    let o = run(&["run", "--config", &cfg2, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", out_str(&o));
    let o = run(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    // the LUT round trip is bit-exact, so both runs agree byte for byte
    assert_eq!(fs::read(a.join("curves_krr_LAI.csv")).unwrap(), fs::read(b.join("curves_krr_LAI.csv")).unwrap());

    let missing = lut_cfg.replace("\"LAI\"]\n", "\"LAI\", \"Cw\"]\n");
    let cfg3 = write(dir.path(), "missing.toml", &missing);
    let o = run(&["run", "--config", &cfg3, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", out_str(&o));
    assert!(out_str(&o).contains("Cw"));
}

#[test]
fn runtime_failures_exit_one_naming_strategy_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    // 20 learning samples cannot hold 18 initial plus a batch of 10
    let cfg = tiny_config(r#"["CBD"]"#, "1").replace("initial_size = 10", "initial_size = 18").replace("n_samples = 160", "n_samples = 40");
    let path = write(dir.path(), "c.toml", &cfg);
    let o = run(&["run", "--config", &path, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", out_str(&o));
    let msg = out_str(&o);
    assert!(msg.contains("CBD") && msg.contains("seed"), "{msg}");

    let lut_missing = tiny_config(r#"["CBD"]"#, "1")
        .replace("[data.synthetic]\nn_samples = 160\nseed = 11\n", "")
        .replace("[data]\n", "[data]\nlut = \"nowhere.csv\"\nfeatures = [\"a\"]\ntargets = [\"LAI\"]\n");
    let path = write(dir.path(), "m.toml", &lut_missing);
    let o = run(&["run", "--config", &path, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", out_str(&o));
}
