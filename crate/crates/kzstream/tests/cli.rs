use std::fs;
use std::path::Path;
use std::process::Command;

use kzstream::coreset_file::parse_coreset;
use kzstream::runner::{run, RunConfig, RunMode};
use kzstream_core::coreset::{build_coreset_offline, SampleBudget};
use kzstream_core::dynamic::DynamicConfig;
use kzstream_core::meter::words_per_point;
use kzstream_core::{ClusterParams, WeightedPoint};

fn kz(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kzstream")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn coreset_in(dir: &Path) -> kzstream_core::Coreset {
    parse_coreset(&fs::read_to_string(dir.join("coreset.txt")).unwrap()).unwrap()
}

const HEADER: &str = "KZSTREAM v1 d=2 delta=16 z=1 k=2 eps=0.25 n=0\n";

#[test]
fn empty_stream_gives_empty_coreset() {
    let t = tempfile::tempdir().unwrap();
    let input = write(t.path(), "e.kzs", HEADER);
    for mode in ["insert-only", "dynamic-2pass"] {
        let out = t.path().join(mode);
        let o = kz(&["run", "--mode", mode, "--input", &input, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(coreset_in(&out).is_empty());
    }
}

#[test]
fn single_point_gives_single_item() {
    let t = tempfile::tempdir().unwrap();
    let input = write(t.path(), "one.kzs", &format!("{HEADER}+ 3 7\n"));
    let out = t.path().join("o");
    assert!(kz(&["run", "--mode", "insert-only", "--input", &input, "--out", out.to_str().unwrap()]).status.success());
    let c = coreset_in(&out);
    assert_eq!(c.len(), 1);
    assert_eq!(c.items[0].coords, vec![3.0, 7.0]);
    assert_eq!(c.total_weight(), 1.0);
}

#[test]
fn deletion_in_insert_only_mode_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let input = write(t.path(), "d.kzs", &format!("{HEADER}+ 3 7\n- 3 7\n"));
    let o = kz(&["run", "--mode", "insert-only", "--input", &input, "--out", t.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_errors_name_the_line() {
    let t = tempfile::tempdir().unwrap();
    let input = write(t.path(), "bad.kzs", &format!("{HEADER}+ 3 7\n+ 3 x\n"));
    let o = kz(&["run", "--mode", "insert-only", "--input", &input, "--out", t.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));
    let o = kz(&["run", "--mode", "insert-only", "--input", t.path().join("missing").to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = kz(&["experiment", "--name", "fig9", "--out", t.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quick_experiment_writes_csv_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let o = kz(&["experiment", "--name", "emd-distortion", "--quick", "--out", t.path().to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(t.path().join("emd-distortion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("manifest.json")).unwrap()).unwrap();
    assert!(m["summary"]["fitted_c"].as_f64().unwrap() > 0.0);
}

#[test]
fn insert_then_delete_everything_is_empty() {
    let t = tempfile::tempdir().unwrap();
    let mut text = HEADER.to_string();
    for i in 1..=12 {
        text.push_str(&format!("+ {i} {}\n", 17 - i));
    }
    for i in (1..=12).rev() {
        text.push_str(&format!("- {i} {}\n", 17 - i));
    }
    let input = write(t.path(), "all.kzs", &text);
    let out = t.path().join("o");
    let r = run(Path::new(&input), &RunConfig::new(RunMode::Dynamic2Pass, 1), &out).unwrap();
    assert_eq!(r.report.coreset_len, 0);
    assert!(coreset_in(&out).is_empty());
}

#[test]
fn saturated_dynamic_run_matches_offline_sampling() {
    let t = tempfile::tempdir().unwrap();
    let mut text = HEADER.to_string();
    let mut pts = Vec::new();
    for i in 0..40u32 {
        let (a, b) = (1 + i * 7 % 16, 1 + i * 3 % 16);
        text.push_str(&format!("+ {a} {b}\n"));
        pts.push(WeightedPoint::unit(vec![a as f64, b as f64]));
    }
    let input = write(t.path(), "s.kzs", &text);
    let cfg = RunConfig { dynamic: DynamicConfig { sample_constant: 1e12, ..DynamicConfig::default() }, ..RunConfig::new(RunMode::Dynamic2Pass, 4) };
    let out = t.path().join("o");
    run(Path::new(&input), &cfg, &out).unwrap();
    let params = ClusterParams::new(2, 1, 0.25, 2, 16, 4).unwrap();
    let offline = build_coreset_offline(&pts, &params, &vec![1.0; pts.len()], SampleBudget::Theorem, 4).unwrap();
    let key = |c: &kzstream_core::Coreset| {
        let mut v: Vec<(Vec<u64>, f64)> = c.items.iter().map(|w| (w.coords.iter().map(|x| x.to_bits()).collect(), w.w())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<u64>, f64)> = Vec::new();
        for (p, w) in v {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        merged
    };
    assert_eq!(key(&coreset_in(&out)), key(&offline));
}

#[test]
fn reported_peak_covers_the_stored_coreset() {
    let t = tempfile::tempdir().unwrap();
    let mut text = HEADER.to_string();
    for i in 0..300u32 {
        text.push_str(&format!("+ {} {}\n", 1 + i * 5 % 16, 1 + i * 11 % 16));
    }
    let input = write(t.path(), "m.kzs", &text);
    for mode in [RunMode::InsertOnly, RunMode::Dynamic2Pass] {
        let out = t.path().join(mode.as_str());
        let r = run(Path::new(&input), &RunConfig::new(mode, 2), &out).unwrap();
        assert!(r.report.peak_words >= r.report.coreset_len as u64 * words_per_point(2), "{mode:?}");
        assert!(r.report.word_bits > 0);
    }
}
