use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn moco(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moco"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(dir: &Path, args: &[&str]) -> Value {
    let out = moco(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

/// Minimal independent reader for the little-endian tensor layout.
fn read_tensor(path: &Path) -> (u8, Vec<usize>, Vec<f64>) {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[..4], b"MRT1");
    let (dtype, rank) = (bytes[4], bytes[5] as usize);
    let dims: Vec<usize> = (0..rank)
        .map(|k| u32::from_le_bytes(bytes[6 + 4 * k..10 + 4 * k].try_into().unwrap()) as usize)
        .collect();
    let payload = &bytes[6 + 4 * rank..];
    let values: Vec<f64> = match dtype {
        1 | 2 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        3 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect(),
        other => panic!("dtype {other}"),
    };
    let per = if dtype == 2 { 2 } else { 1 };
    assert_eq!(values.len(), per * dims.iter().product::<usize>());
    (dtype, dims, values)
}

#[test]
fn phantom_then_self_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = json_ok(
        dir.path(),
        &["phantom", "--size", "64", "--out", "p.mrt", "--png"],
    );
    assert_eq!(p["height"], 64);
    assert!(dir.path().join("p.png").exists());
    let m = json_ok(
        dir.path(),
        &["metrics", "--ref", "p.mrt", "--test", "p.mrt"],
    );
    assert_eq!(m["ssim"].as_f64().unwrap(), 1.0);
    assert_eq!(m["psnr_db"], "inf");
    assert_eq!(m["n_images"], 1);
}

#[test]
fn zero_motion_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    json_ok(
        dir.path(),
        &[
            "phantom", "--size", "48x40", "--seed", "3", "--out", "p.mrt",
        ],
    );
    json_ok(
        dir.path(),
        &[
            "maps", "--size", "48x40", "--coils", "3", "--seed", "2", "--out", "m.mrt", "--png",
        ],
    );
    assert!(dir.path().join("m_coil2.png").exists());
    json_ok(
        dir.path(),
        &[
            "corrupt", "--input", "p.mrt", "--maps", "m.mrt", "--shots", "3", "--degree", "0",
            "--out", "k.mrt",
        ],
    );
    let (dtype, dims, _) = read_tensor(&dir.path().join("k.mrt"));
    assert_eq!((dtype, dims), (2, vec![3, 48, 40]));
    let r = json_ok(
        dir.path(),
        &[
            "reconstruct",
            "--kspace",
            "k.mrt",
            "--maps",
            "m.mrt",
            "--shots",
            "3",
            "--out",
            "x.mrt",
        ],
    );
    assert!(r["iterations"].as_u64().unwrap() <= 2);
    let m = json_ok(
        dir.path(),
        &["metrics", "--ref", "p.mrt", "--test", "x.mrt"],
    );
    assert!(m["psnr_db"].as_f64().is_none_or(|v| v >= 60.0), "{m}");
    assert!(m["ssim"].as_f64().unwrap() >= 0.999);
}

#[test]
fn motion_degrades_file_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    json_ok(
        dir.path(),
        &["phantom", "--size", "64", "--seed", "1", "--out", "p.mrt"],
    );
    json_ok(
        dir.path(),
        &[
            "corrupt", "--input", "p.mrt", "--degree", "-8", "--out", "k.mrt",
        ],
    );
    json_ok(
        dir.path(),
        &[
            "reconstruct",
            "--kspace",
            "k.mrt",
            "--complex",
            "--png",
            "--out",
            "x.mrt",
        ],
    );
    assert_eq!(read_tensor(&dir.path().join("x.mrt")).0, 2);
    assert!(dir.path().join("x.png").exists());
    let m = json_ok(
        dir.path(),
        &["metrics", "--ref", "p.mrt", "--test", "x.mrt"],
    );
    assert!(m["psnr_db"].as_f64().unwrap() < 40.0);
}

#[test]
fn dataset_buckets_and_consumer_view() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &[
            "dataset",
            "--size",
            "24",
            "--count",
            "4",
            "--degrees",
            "5,8,10,12,14",
            "--out-dir",
            "ds",
        ],
    );
    assert_eq!(v["pairs"], 20);
    assert_eq!(v["degrees"].as_array().unwrap().len(), 5);

    // Read the manifest the way an external consumer would: plain JSON lines.
    let text = std::fs::read_to_string(dir.path().join("ds/manifest.jsonl")).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 20);
    let mut degrees: Vec<f64> = lines
        .iter()
        .map(|r| r["degree"].as_f64().unwrap())
        .collect();
    degrees.dedup();
    assert_eq!(degrees, vec![5.0, 8.0, 10.0, 12.0, 14.0]);
    for rec in &lines {
        for key in [
            "id",
            "source",
            "split",
            "input",
            "target",
            "seed",
            "shots",
            "coils",
            "normalization",
        ] {
            assert!(rec.get(key).is_some(), "missing {key}");
        }
        let (dtype, dims, target) =
            read_tensor(&dir.path().join("ds").join(rec["target"].as_str().unwrap()));
        assert_eq!((dtype, dims), (1, vec![24, 24]));
        let peak = target.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        let (_, _, input) =
            read_tensor(&dir.path().join("ds").join(rec["input"].as_str().unwrap()));
        assert!(input.iter().all(|v| (0.0..=1.5).contains(v)));
    }

    let m = json_ok(
        dir.path(),
        &[
            "metrics",
            "--manifest",
            "ds/manifest.jsonl",
            "--split",
            "train",
        ],
    );
    let reports = m["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    assert_eq!(reports[0]["n_images"], 3);
}

#[test]
fn bench_reports_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &[
            "bench",
            "--size",
            "32",
            "--count",
            "3",
            "--coils",
            "2",
            "--workers",
            "2",
        ],
    );
    assert_eq!(v["count"], 3);
    assert!(v["mean_seconds"].as_f64().unwrap() > 0.0);
    assert!(v["std_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["workers"], 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let help = moco(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("reconstruct"));

    for args in [
        &["frobnicate"][..],
        &["phantom", "--size", "0", "--out", "p.mrt"],
        &["phantom", "--out", "p.mrt", "--bogus"],
        &[
            "corrupt", "--input", "p.mrt", "--degree", "90", "--out", "k.mrt",
        ],
        &["metrics", "--ref", "a.mrt"],
    ] {
        let out = moco(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("Usage"),
            "{args:?}"
        );
    }

    let missing = moco(
        dir.path(),
        &["metrics", "--ref", "nope.mrt", "--test", "nope.mrt"],
    );
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.mrt"));

    std::fs::write(dir.path().join("junk.mrt"), b"not a tensor").unwrap();
    let junk = moco(
        dir.path(),
        &["reconstruct", "--kspace", "junk.mrt", "--out", "x.mrt"],
    );
    assert_eq!(junk.status.code(), Some(2));

    json_ok(dir.path(), &["phantom", "--size", "16", "--out", "p.mrt"]);
    let bad_solver = moco(
        dir.path(),
        &[
            "dataset",
            "--size",
            "16",
            "--count",
            "1",
            "--degrees",
            "5",
            "--tol",
            "0",
            "--out-dir",
            "d",
        ],
    );
    assert_eq!(bad_solver.status.code(), Some(2));
}

#[test]
fn commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = json_ok(
        dir.path(),
        &[
            "maps", "--size", "20", "--coils", "2", "--seed", "9", "--out", "a.mrt",
        ],
    );
    let b = json_ok(
        dir.path(),
        &[
            "maps", "--size", "20", "--coils", "2", "--seed", "9", "--out", "b.mrt",
        ],
    );
    assert_eq!(a["sos_deviation"], b["sos_deviation"]);
    assert_eq!(
        std::fs::read(dir.path().join("a.mrt")).unwrap(),
        std::fs::read(dir.path().join("b.mrt")).unwrap()
    );
}
