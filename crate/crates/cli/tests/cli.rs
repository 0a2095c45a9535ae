use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tgemm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tgemm"))
        .args(args)
        .output()
        .expect("run tgemm")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_convert_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let dense = dir.path().join("w.tgw");
    let out = tgemm(&[
        "gen",
        "--K",
        "37",
        "--N",
        "12",
        "--s",
        "1/4",
        "--seed",
        "3",
        "--out",
        path(&dense),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let original = fs::read(&dense).unwrap();
    assert_eq!(&original[..4], b"TGWD");

    for format in [
        "tcsc",
        "blocked",
        "interleaved",
        "interleaved-blocked",
        "inverted",
        "compressed",
        "symmetric",
    ] {
        let sparse = dir.path().join(format!("w.{format}"));
        let back = dir.path().join(format!("back.{format}"));
        let out = tgemm(&[
            "convert",
            "--in",
            path(&dense),
            "--to",
            format,
            "--B",
            "16",
            "--out",
            path(&sparse),
        ]);
        assert!(out.status.success(), "{format}: {}", stderr(&out));
        let out = tgemm(&[
            "convert",
            "--in",
            path(&sparse),
            "--to",
            "dense",
            "--out",
            path(&back),
        ]);
        assert!(out.status.success(), "{format}: {}", stderr(&out));
        assert_eq!(fs::read(&back).unwrap(), original, "{format}");
    }
}

#[test]
fn truncated_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let sparse = dir.path().join("w.tcsc");
    let cut = dir.path().join("cut.tcsc");
    assert!(tgemm(&[
        "gen",
        "--K",
        "20",
        "--N",
        "8",
        "--format",
        "tcsc",
        "--out",
        path(&sparse)
    ])
    .status
    .success());
    let bytes = fs::read(&sparse).unwrap();
    fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let out = tgemm(&[
        "convert",
        "--in",
        path(&cut),
        "--to",
        "dense",
        "--out",
        path(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("parse error at byte offset"),
        "{}",
        stderr(&out)
    );

    let missing = tgemm(&[
        "convert",
        "--in",
        path(&dir.path().join("nope")),
        "--to",
        "dense",
        "--out",
        "x",
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn verify_passes_for_every_variant() {
    let out = tgemm(&[
        "verify", "--M", "7", "--K", "50", "--N", "8", "--s", "1/2", "--seed", "11",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS ")).count(),
        9,
        "{text}"
    );
}

#[test]
fn injected_fault_fails_with_location() {
    let out = tgemm(&[
        "verify",
        "--M",
        "6",
        "--N",
        "8",
        "--variant",
        "unrolled",
        "--inject-fault",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(
        text.contains("FAIL unrolled: first difference at (m=3, n=4)"),
        "{text}"
    );
}

#[test]
fn simd_variant_rejects_ragged_n() {
    let out = tgemm(&["verify", "--N", "6", "--variant", "vertical"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("N must be divisible by 4"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        tgemm(&["bench", "--preset", "fig99"]).status.code(),
        Some(2)
    );
    assert_eq!(tgemm(&["verify", "--s", "3/2"]).status.code(), Some(2));
    assert_eq!(tgemm(&["verify", "--MR", "3"]).status.code(), Some(2));
    assert_eq!(
        tgemm(&["bench", "--reps", "2", "--K", "64", "--N", "8", "--M", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(tgemm(&[]).status.code(), Some(2));
}

#[test]
fn bench_single_point_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = tgemm(&[
        "bench",
        "--K",
        "256",
        "--M",
        "8",
        "--N",
        "16",
        "--s",
        "1/4",
        "--reps",
        "3",
        "--warmup",
        "1",
        "--out",
        path(&csv),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "variant,M,K,N,sparsity_num,sparsity_den,UF,MR,NR,B,g,reps,median_ns,flops,flops_per_sec,flops_per_cycle,adds,mults"
    );
    assert!(
        lines[1].starts_with("interleaved-blocked,8,256,16,1,4,,4,4,256,4,3,"),
        "{}",
        lines[1]
    );
}

#[test]
fn gridsearch_reports_best_per_k() {
    let out = tgemm(&[
        "gridsearch",
        "--K",
        "64,128",
        "--M",
        "4",
        "--N",
        "8",
        "--UF",
        "1,4",
        "--MR",
        "1,2",
        "--reps",
        "3",
        "--warmup",
        "0",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1 + 2 * 2 * 2);
    let err = stderr(&out);
    assert!(
        err.contains("K=64: best") && err.contains("K=128: best"),
        "{err}"
    );
    assert_eq!(
        tgemm(&["gridsearch", "--preset", "fig6"]).status.code(),
        Some(2)
    );
}

#[test]
fn oi_prints_twenty_cells() {
    let out = tgemm(&["oi"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(
        rows.iter().all(|r| r.split_whitespace().count() == 6),
        "{text}"
    );
    assert!(rows[0].starts_with("     1/2    12.77"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("oi.csv");
    assert!(tgemm(&["oi", "--out", path(&csv)]).status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 21);
}
