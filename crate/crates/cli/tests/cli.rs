use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn plnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plnc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("PLNC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

#[test]
fn sfs_count_agrees() {
    let text = stdout(&plnc(&["sfs-count", "--family", "QAM", "--M", "4", "--brute-force"]));
    assert_eq!(text, "formula: 12\nenumerated: 12\nAGREE\n");
    let text = stdout(&plnc(&["sfs-count", "--family", "psk", "--M", "16"]));
    assert_eq!(text, "formula: 912\n");
}

#[test]
fn sfs_list_is_json() {
    let text = stdout(&plnc(&["sfs-list", "--family", "PAM", "--M", "4"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 14);
}

#[test]
fn standard_square_matches_fixture() {
    let text = stdout(&plnc(&["ls-standard", "--family", "QAM", "--M", "16"]));
    assert_eq!(text, fs::read_to_string(fixture_dir().join("qam16_standard.txt")).unwrap());
}

#[test]
fn export_fixtures_regenerates_bundle() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&plnc(&["export-fixtures", "--dir", dir.path().to_str().unwrap()]));
    for name in ["qam16_standard.txt", "pam4_standard.txt", "sfs_pam4.json", "sfs_qam4.json"] {
        let fresh = fs::read_to_string(dir.path().join(name)).unwrap();
        let bundled = fs::read_to_string(fixture_dir().join(name)).unwrap();
        assert_eq!(fresh, bundled, "{name}");
    }
}

#[test]
fn ls_solve_checks_fade() {
    let text = stdout(&plnc(&["ls-solve", "--family", "QAM", "--M", "4", "--fade", "0.5,0.5"]));
    assert!(text.starts_with("4 5\n"));
    let out = plnc(&["ls-solve", "--family", "QAM", "--M", "4", "--fade", "0.3,0.1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a singular fade state"));
}

#[test]
fn codebook_then_report_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let book = dir.path().join("book.json");
    let book = book.to_str().unwrap();
    stdout(&plnc(&["codebook", "--family", "QAM", "--M", "4", "-o", book]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(book).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 12);

    let report = stdout(&plnc(&[
        "distance-report",
        "--family",
        "QAM",
        "--M",
        "4",
        "--codebook",
        book,
        "--fade",
        "0.5,0.5",
        "--fade",
        "-1,0",
        "--random",
        "3",
    ]));
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "fade_re,fade_im,best_key,min_cluster_distance");
    assert_eq!(lines.len(), 6);
    for l in &lines[1..] {
        let d: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(d > 1e-9, "{l}");
    }

    let args = [
        "sim-ber",
        "--family",
        "QAM",
        "--M",
        "4",
        "--scheme",
        "LS",
        "--snr",
        "0:20:10",
        "--trials",
        "2000",
        "--codebook",
        book,
    ];
    let one = stdout(&plnc(&[&["--threads", "1"], &args[..]].concat()));
    let two = stdout(&plnc(&[&["--threads", "2"], &args[..]].concat()));
    assert_eq!(one, two);
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[0], "scheme,constellation,M,channel,rician_k_db,snr_db,trials,bit_errors,bits,ber");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("LS,QAM,4,rician,5,0,2000,"));
}

#[test]
fn ls_without_codebook_names_the_command() {
    let out = plnc(&["sim-ber", "--family", "QAM", "--M", "16", "--trials", "10"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("plnc codebook --family QAM --M 16"));
}

#[test]
fn sim_from_toml_config_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(
        &cfg,
        r#"
constellation = "PSK"
M = 4
scheme = "XOR"
snr_grid_db = [5.0, 15.0]
trials_per_point = 500
seed = 3

[channel]
kind = "rayleigh"
"#,
    )
    .unwrap();
    let text = stdout(&plnc(&["sim-ber", "--config", cfg.to_str().unwrap(), "--trials", "300", "--no-header"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("XOR,PSK,4,rayleigh,0,5,300,"));

    let json = dir.path().join("sim.json");
    fs::write(
        &json,
        r#"{"constellation":"PSK","M":4,"scheme":"XOR","snr_grid_db":[5.0,15.0],"trials_per_point":300,"seed":3,"channel":{"kind":"rayleigh"}}"#,
    )
    .unwrap();
    let from_json = stdout(&plnc(&["sim-ber", "--config", json.to_str().unwrap(), "--no-header"]));
    assert_eq!(from_json, text);
}

#[test]
fn rejects_bad_grid() {
    let out = plnc(&["sim-ber", "--family", "QAM", "--M", "4", "--scheme", "XOR", "--snr", "10,5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}
