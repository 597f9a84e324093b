use std::process::Command;

fn vmstab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vmstab"))
}

const SMALL: &str = r#"
[profile]
family = "bi_maxwellian"
n0 = 1.0
[[profile.components]]
amplitude = 1.0
T1 = 1.0
T2 = 3.0
[domain]
P = 6.283185307179586
Nx = 8
Nv1 = 8
Nv2 = 8
"#;

#[test]
fn config_reference_is_printed() {
    let out = vmstab().arg("config-reference").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[domain]") && text.contains("tol_zero"));
}

#[test]
fn invalid_config_exits_two_with_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SMALL.replace("T1 = 1.0", "T1 = -1.0")).unwrap();
    let out_dir = dir.path().join("out");
    let out = vmstab().args(["spectrum", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(rep["kind"], "validation");
    assert_eq!(rep["command"], "spectrum");
}

#[test]
fn missing_config_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmstab()
        .args(["verify", "--config"])
        .arg(dir.path().join("absent.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(dir.path().join("error.json").exists());
}

#[test]
fn fast_spectrum_reports_the_anisotropic_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = vmstab().args(["spectrum", "--fast-path", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(rep["n_minus_Lcal0"], 2);
    assert_eq!(rep["counts_consistent"], true);
}
