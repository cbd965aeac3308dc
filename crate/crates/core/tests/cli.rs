use std::path::Path;
use std::process::{Command, Output};

use envgan::synth::write_tone_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn envgan(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_envgan"))
        .args(["--config", "desk", "--out"])
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(envgan(tmp.path(), &["--bogus"]).status.code(), Some(1));
}

#[test]
fn bad_override_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = envgan(tmp.path(), &["--set", "gan.epochs=zero", "selftest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gan.epochs"));
}

#[test]
fn ingest_reports_every_bad_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let csv = write_tone_dataset(&data, &[("a", 500.0), ("b", 900.0)], 3, 1024, 8000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str("missing.wav,1,0,a\nb_000.wav,11,1,b\n");
    std::fs::write(&csv, text).unwrap();
    let o = envgan(&tmp.path().join("out"), &["ingest", "--data", data.to_str().unwrap(), "--manifest", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 7") && err.contains("row 8"), "{err}");
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = envgan(tmp.path(), &["selftest"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("critic 24 rows"), "{text}");
}

#[test]
fn ingest_and_augment_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let csv = write_tone_dataset(&data, &[("a", 500.0), ("b", 900.0)], 4, 4096, 22_050, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        let out = tmp.path().join(run);
        assert!(envgan(&out, &["ingest", "--data", data.to_str().unwrap(), "--manifest", csv.to_str().unwrap()]).status.success());
        assert!(envgan(&out, &["augment", "--scheme", "drcomp"]).status.success());
        let manifest = std::fs::read(out.join("augmented/drcomp/manifest.csv")).unwrap();
        let clip = std::fs::read(out.join("augmented/drcomp/a").read_dir().unwrap().next().unwrap().unwrap().path()).unwrap();
        let header = std::fs::read_to_string(out.join("run_augment.txt")).unwrap();
        outputs.push((manifest, clip, header));
    }
    assert_eq!(outputs[0], outputs[1]);
}
