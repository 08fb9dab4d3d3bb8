use std::path::Path;
use std::process::{Command, Output};

fn otfs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run otfs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const CAPACITY_GRID: &str = r#"
scenario = "ch1-island"
analysis = "capacity"
seed = 11
trials = 4
alpha_grid = { start = 0.0, stop = 1.0, points = 21 }

[channel]
N = 21
M = 21
L = 6
Q = 6

[allocation]
kind = "island"

[budget]
snr_tx_db = 20.0
"#;

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect()
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CAPACITY_GRID);
    let a = otfs(&["sweep", &cfg], dir.path());
    let b = otfs(&["sweep", &cfg], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# otfs sweep config_sha256="));
    assert!(text.lines().next().unwrap().ends_with("seed=11"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CAPACITY_GRID);
    let a = otfs(&["--threads", "1", "sweep", &cfg], dir.path());
    let b = otfs(&["--threads", "3", "sweep", &cfg], dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn capacity_grid_has_one_row_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CAPACITY_GRID);
    let out = dir.path().join("cap.csv");
    let r = otfs(&["sweep", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(r.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().find(|l| !l.starts_with('#')).unwrap(),
        "alpha,rho,cap_lb_mean_bps_hz,cap_lb_stderr,trials,kind,N,M,L,Q,snr_tx_db,alpha_star"
    );
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 21);
    // the endpoints carry no data or no pilot power
    assert!(rows[0].starts_with("0,0.000000,0.000000,"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CAPACITY_GRID);
    let a = otfs(&["sweep", &cfg], dir.path());
    let b = otfs(&["--seed", "12", "sweep", &cfg], dir.path());
    let (a, b) = (
        String::from_utf8(a.stdout).unwrap(),
        String::from_utf8(b.stdout).unwrap(),
    );
    assert!(b.lines().next().unwrap().ends_with("seed=12"));
    assert_ne!(data_rows(&a)[10], data_rows(&b)[10]);
}

#[test]
fn mse_sweep_tracks_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
scenario = "mse"
analysis = "mse"
trials = 400
alpha = 0.5
[channel]
N = 21
M = 21
L = 2
Q = 2
[allocation]
kind = "island"
[budget]
snr_tx_db = [0.0, 20.0]
"#,
    );
    let r = otfs(&["sweep", &cfg], dir.path());
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let (closed, emp): (f64, f64) = (f[8].parse().unwrap(), f[9].parse().unwrap());
        assert!((emp / closed - 1.0).abs() < 0.1, "{row}");
    }
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "unknown key",
            CAPACITY_GRID.replace("seed = 11", "sed = 11"),
            "sed",
        ),
        (
            "alpha out of range",
            CAPACITY_GRID.replace(
                "alpha_grid = { start = 0.0, stop = 1.0, points = 21 }",
                "alpha = 1.5",
            ),
            "alpha",
        ),
        ("odd Q", CAPACITY_GRID.replace("Q = 6", "Q = 5"), "Q"),
        (
            "slab too narrow",
            CAPACITY_GRID
                .replace("kind = \"island\"", "kind = \"doppler_slab\"")
                .replace("N = 21\nM = 21", "N = 3\nM = 147"),
            "N",
        ),
        ("syntax", "scenario = \n".to_string(), "line"),
    ];
    for (name, text, needle) in cases {
        let cfg = write(dir.path(), "bad.toml", &text);
        let r = otfs(&["sweep", &cfg], dir.path());
        let err = String::from_utf8_lossy(&r.stderr);
        assert_eq!(r.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    }
}

#[test]
fn missing_config_is_not_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = otfs(&["sweep", "does-not-exist.toml"], dir.path());
    assert_ne!(r.status.code(), Some(0));
}

#[test]
fn validate_reports_separation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CAPACITY_GRID);
    let r = otfs(&["validate", &cfg], dir.path());
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("K_p = 169, K_c = 272"), "{text}");
    assert_eq!(text.matches("PASS").count(), 2);
}

#[test]
fn design_prefers_delay_slab_when_delay_spread_dominates() {
    let dir = tempfile::tempdir().unwrap();
    let r = otfs(&["design", "--l", "6", "--q", "2"], dir.path());
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(
        text.contains("delay_slab: N = 63, M = 7, K_p = 35"),
        "{text}"
    );
    assert!(!text.contains("doppler_slab"));

    let r = otfs(&["design", "--l", "2", "--q", "8"], dir.path());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(
        text.contains("doppler_slab: N = 9, M = 49, K_p = 45"),
        "{text}"
    );
    assert!(text.contains("α* = 0.7923"), "{text}");
}

#[test]
fn design_rejects_impossible_frames() {
    let dir = tempfile::tempdir().unwrap();
    let r = otfs(&["design", "--l", "6", "--q", "3"], dir.path());
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn reproduce_table1_writes_csv_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = otfs(&["reproduce", "table1", "--out", "res"], dir.path());
    assert!(r.status.success());
    let text = std::fs::read_to_string(dir.path().join("res/table1.csv")).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert_eq!(
        String::from_utf8(r.stdout).unwrap().matches("PASS").count(),
        9
    );
}
