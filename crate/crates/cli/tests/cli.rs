use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn catkappa(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catkappa"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

const QUICK_LEMMA: &[&str] = &[
    "lemma-contraction", "--samples", "2000", "--kappas", "-1,1", "--radii", "0.5", "--ts", "0.3,0.8",
];

#[test]
fn lemma_run_writes_reproducible_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = catkappa(QUICK_LEMMA, a.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).starts_with("lemma_contraction: pass"));
    assert_eq!(catkappa(QUICK_LEMMA, b.path()).status.code(), Some(0));

    let csv = fs::read(a.path().join("lemma_contraction_seed0.csv")).unwrap();
    assert_eq!(csv, fs::read(b.path().join("lemma_contraction_seed0.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("kappa,radius,t"), "{header}");
    assert_eq!(lines.count(), 4);

    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("lemma_contraction_seed0.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "catkappa-report/1");
    assert_eq!(json["pass"], true);
}

#[test]
fn format_flag_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [QUICK_LEMMA, &["--format", "json", "--seed", "3"]].concat();
    assert_eq!(catkappa(&args, dir.path()).status.code(), Some(0));
    assert!(dir.path().join("lemma_contraction_seed3.json").exists());
    assert!(!dir.path().join("lemma_contraction_seed3.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(catkappa(&["lemma-contraction", "--bogus"], dir.path()).status.code(), Some(2));
    let bad_t = catkappa(&["fixpoint", "--map", "star", "--t", "1.5"], dir.path());
    assert_eq!(bad_t.status.code(), Some(2), "{}", String::from_utf8_lossy(&bad_t.stderr));
    let wrong_domain = catkappa(&["counterexample", "--domain", "interval"], dir.path());
    assert_eq!(wrong_domain.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // The identity has fixed points, so the annulus certificate is vacuous.
    let out = catkappa(&["counterexample", "--map", "identity", "--mesh", "0.05"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn counterexample_and_fixpoint_pass() {
    let dir = tempfile::tempdir().unwrap();
    let ce = catkappa(&["counterexample", "--mesh", "0.01", "--family", "8", "--samples", "512"], dir.path());
    assert_eq!(ce.status.code(), Some(0), "{}", String::from_utf8_lossy(&ce.stderr));
    let fp = catkappa(&["fixpoint", "--method", "composites", "--count", "4"], dir.path());
    assert_eq!(fp.status.code(), Some(0), "{}", String::from_utf8_lossy(&fp.stderr));
}
