//! End-to-end checks of the command-line surface: exit codes and
//! byte-identical regeneration from the same seed.

use std::path::Path;

use vpgrid::cli::run_cli;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("vpgrid").chain(args.iter().copied()))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["gen"]), 2); // missing --out
}

#[test]
fn domain_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert_eq!(
        run(&["gen", "--out", out.to_str().unwrap(), "--grid", "0"]),
        1
    );
    assert_eq!(run(&["detect", "--method", "hough"]), 1);
    assert_eq!(run(&["eval", "--manifest", "/nonexistent/manifest.txt"]), 1);
}

#[test]
fn same_seed_regenerates_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let code = run(&[
            "gen",
            "--out",
            out.to_str().unwrap(),
            "--pos",
            "6",
            "--neg",
            "6",
            "--seed",
            "11",
        ]);
        assert_eq!(code, 0);
    }
    let fa = dir_bytes(&a);
    let fb = dir_bytes(&b);
    assert_eq!(fa.len(), 13); // 12 images + manifest
    assert_eq!(fa, fb);
}

#[test]
fn detect_and_baseline_run_on_a_generated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    assert_eq!(
        run(&[
            "gen",
            "--out",
            out.to_str().unwrap(),
            "--pos",
            "8",
            "--neg",
            "4",
            "--seed",
            "2",
        ]),
        0
    );
    let manifest = out.join("manifest.txt");
    let overlays = dir.path().join("overlays");
    assert_eq!(
        run(&[
            "detect",
            "--method",
            "hough",
            "--manifest",
            manifest.to_str().unwrap(),
            "--overlay-dir",
            overlays.to_str().unwrap(),
        ]),
        0
    );
    assert!(std::fs::read_dir(&overlays).unwrap().count() > 0);
    assert_eq!(
        run(&["baseline", "--mode", "top5", "--manifest", manifest.to_str().unwrap()]),
        0
    );
}
