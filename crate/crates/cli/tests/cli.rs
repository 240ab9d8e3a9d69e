use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use moddrop::harness::persist::load_matrix;
use moddrop::skeleton::format_frames;
use moddrop::temporal::{generate_synthetic_sequence, SyntheticConfig};

fn moddrop(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moddrop"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn report_scores_overlapping_segments() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    let pred = dir.path().join("pred.txt");
    fs::write(&truth, "a 1 1 10\nb 2 0 4\n").unwrap();
    fs::write(&pred, "a 1 6 15\nb 2 0 4\n").unwrap();
    let text = stdout(&moddrop(
        &["report", "--truth", truth.to_str().unwrap(), "--predicted", pred.to_str().unwrap()],
        dir.path(),
    ));
    assert!(text.contains("a\t1\t0.3333"), "{text}");
    assert!(text.contains("b\t2\t1.0000"), "{text}");
    assert!(text.contains("mean\t0.6667"), "{text}");
    assert_eq!(fs::read_to_string(dir.path().join("jaccard_report.tsv")).unwrap(), text);
}

#[test]
fn pose_extract_writes_dynamic_poses() {
    let dir = tempfile::tempdir().unwrap();
    let seq = generate_synthetic_sequence(3, "s", &SyntheticConfig::default()).unwrap();
    let frames = &seq.frames[..40];
    let path = dir.path().join("frames.txt");
    fs::write(&path, format_frames(frames)).unwrap();
    stdout(&moddrop(&["pose-extract", "--frames", path.to_str().unwrap(), "--stride", "2"], dir.path()));
    let m = load_matrix(&dir.path().join("dynamic_poses_s2.bin")).unwrap();
    assert_eq!((m.rows(), m.cols()), (40 - 8, 915));

    stdout(&moddrop(&["pose-extract", "--frames", path.to_str().unwrap()], dir.path()));
    let d = load_matrix(&dir.path().join("descriptors.bin")).unwrap();
    assert_eq!((d.rows(), d.cols()), (40, 183));
}

#[test]
fn malformed_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "[training]\nlearning_rte = 0.1\n").unwrap();
    let o = moddrop(&["--config", cfg.to_str().unwrap(), "pipeline-run"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rte"));

    let frames = dir.path().join("frames.txt");
    fs::write(&frames, "1 2 3\n").unwrap();
    let o = moddrop(&["pose-extract", "--frames", frames.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn pipeline_reports_are_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.ini");
    fs::write(
        &cfg,
        "[gesture]\ntrain_sequences = 2\ntest_sequences = 1\ngestures_per_sequence = 4\n\
         gesture_hidden = 16\ngesture_epochs = 2\nmotion_hidden = 32\nmotion_epochs = 2\n",
    )
    .unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        stdout(&moddrop(&["--config", cfg.to_str().unwrap(), "--seed", "5", "pipeline-run"], &out));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["gesture_report_5.tsv", "truth_5.txt", "predicted_refined_5.txt", "gesture_summary.tsv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty(), "{name}");
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name}");
    }
}
