use std::fs;
use std::path::Path;
use std::process::Command;

fn renege(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_renege")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const BOUNDED: &str = r#"{"source": {"kind": "iid", "seed": 5,
    "xi": {"dist": "uniform", "low": 0.5, "high": 1.5},
    "sigma": {"dist": "uniform", "low": 0.0, "high": 0.8},
    "dpat": {"dist": "uniform", "low": 0.0, "high": 0.4},
    "bounds": {"sigma": 0.8, "dpat": 0.4}},
  "model": {"servers": 2, "impatience": "end"},
  "execution": {"samples": 300, "horizon": 2000, "replicas": 50}}"#;

#[test]
fn runs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUNDED);
    for sub in ["sample-s", "loss-end", "des", "regen", "cesaro"] {
        let a = dir.path().join(format!("{sub}-a"));
        let b = dir.path().join(format!("{sub}-b"));
        assert_eq!(renege(&[sub, "--config", &cfg, "--out-dir", a.to_str().unwrap(), "--workers", "1"]).0, 0, "{sub}");
        assert_eq!(renege(&[sub, "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--workers", "2"]).0, 0, "{sub}");
        for f in ["summary.json", "detail.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{sub}/{f}");
        }
    }
    assert!(dir.path().join("des-a/customers.csv").exists());
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOUNDED);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    renege(&["sample-w", "--config", &cfg, "--out-dir", a.to_str().unwrap()]);
    renege(&["sample-w", "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--seed-override", "6"]);
    let sa = fs::read_to_string(a.join("summary.json")).unwrap();
    let sb = fs::read_to_string(b.join("summary.json")).unwrap();
    assert_ne!(sa, sb);
    assert!(sb.contains("\"seed\": 6"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad = write_config(dir.path(), r#"{"source": {"kind": "iid"}}"#);
    let (code, err) = renege(&["des", "--config", &bad, "--out-dir", out]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(renege(&["des", "--out-dir", out]).0, 2);

    let unbounded = write_config(
        dir.path(),
        r#"{"source": {"kind": "iid", "xi": {"dist": "exponential", "rate": 1},
            "sigma": {"dist": "exponential", "rate": 1}, "dpat": {"dist": "exponential", "rate": 1}}}"#,
    );
    let (code, err) = renege(&["loss-begin", "--config", &unbounded, "--out-dir", out]);
    assert_eq!(code, 3);
    assert!(err.contains("bounds.sigma and bounds.dpat"), "{err}");

    let multi = write_config(dir.path(), BOUNDED);
    assert_eq!(renege(&["xval", "--config", &multi, "--out-dir", out]).0, 3);

    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    let (code, _) = renege(&["des", "--config", &multi, "--out-dir", blocked.join("sub").to_str().unwrap()]);
    assert_eq!(code, 1);
}
