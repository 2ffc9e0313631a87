use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pfgi(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pfgi"));
    cmd.args(args).env_remove("PFGI_OUTPUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body.to_string()).unwrap();
    path.display().to_string()
}

fn small_config(out: &Path) -> serde_json::Value {
    serde_json::json!({
        "n": 14, "k": 2,
        "scene": {"letter": "T"},
        "controller": {
            "mode": "analog",
            "analog": {"source_level": 1.0},
            "digital": {"reference": 0.0025, "step": 0.005},
            "clamp": {"min": 0.001, "max": 1.0},
            "max_steps": 1000
        },
        "outputs": {"directory": out}
    })
}

#[test]
fn run_succeeds_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), small_config(&out));
    let o = pfgi(&["run", &cfg], &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 14);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    for f in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            pfgi::output::sha256_hex(&bytes)
        );
    }
}

#[test]
fn env_var_overrides_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), small_config(&tmp.path().join("ignored")));
    let target = tmp.path().join("from_env");
    let o = pfgi(&["compare", &cfg], &[("PFGI_OUTPUT_DIR", &target)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(target.join("metrics.csv").exists());
    assert!(!tmp.path().join("ignored").exists());
    let metrics = fs::read_to_string(target.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("mode,scene,pearson,visibility_mean,mse_vs_oracle,frames,seed\n"));
    assert_eq!(metrics.lines().count(), 5);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = small_config(&tmp.path().join("out"));
    bad["k"] = 3.into();
    let cfg = write_config(tmp.path(), bad);
    let o = pfgi(&["run", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k must divide n"));

    let mut typo = small_config(&tmp.path().join("out"));
    typo["sead"] = 1.into();
    let cfg = write_config(tmp.path(), typo);
    assert_eq!(pfgi(&["run", &cfg], &[]).status.code(), Some(2));

    assert_eq!(
        pfgi(&["run", "/nonexistent/config.json"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(pfgi(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(
        pfgi(&["mask", "export", "6", "4", "x"], &[]).status.code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    // a regular file where the output directory should go
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, b"").unwrap();
    let cfg = write_config(tmp.path(), small_config(&blocker.join("out")));
    assert_eq!(pfgi(&["run", &cfg], &[]).status.code(), Some(3));
}

#[test]
fn mask_export_writes_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("mask");
    let o = pfgi(&["mask", "export", "4", "4", dir.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["N_Block"], 1);
    assert_eq!(manifest["M"], 16);
    // raster scan: frame i lights pixel i
    for i in 0..16 {
        let bytes = fs::read(dir.join(format!("frame_{i:04}.pgm"))).unwrap();
        let pgm = pfgi::pgm::read_pgm(&bytes[..]).unwrap();
        let lit: Vec<usize> = (0..16).filter(|&p| pgm.pixels[p] == 255).collect();
        assert_eq!(lit.len(), 1);
    }
}

#[test]
fn metrics_help_documents_columns() {
    let o = pfgi(&["metrics", "--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for col in [
        "mode",
        "scene",
        "pearson",
        "visibility_mean",
        "mse_vs_oracle",
        "frames",
        "seed",
        "I_settled",
    ] {
        assert!(text.contains(col), "{col}");
    }
}

#[test]
fn scene_from_pgm_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut pixels = vec![0u8; 36];
    pixels[7] = 255;
    pixels[8] = 128;
    fs::write(
        tmp.path().join("dot.pgm"),
        pfgi::pgm::encode_pgm(6, 6, &pixels),
    )
    .unwrap();
    let mut cfg = small_config(&tmp.path().join("out"));
    cfg["n"] = 6.into();
    cfg["scene"] = serde_json::json!({"file": "dot.pgm"});
    let path = write_config(tmp.path(), cfg);
    let o = pfgi(&["run", &path], &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let metrics = fs::read_to_string(tmp.path().join("out/metrics.csv")).unwrap();
    assert!(metrics
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("naked_eye_analog,dot,"));
}

#[test]
fn bundled_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = pfgi::ExperimentConfig::load(&path).unwrap();
        cfg.validate(None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 3);
}
