//! Black-box checks of the `mediatopic` binary: the exit-code contract
//! (0 success, 1 data error, 2 usage/config error), deterministic
//! generation, and a small end-to-end pipeline run.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mediatopic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mediatopic"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Generate a small corpus under `dir` and return the manifest path.
fn tiny_corpus(dir: &Path) -> String {
    let spec = dir.join("spec.tsv");
    fs::write(
        &spec,
        "genres\t2\nshow_identities\t4\nepisodes\t2\ntopics\t4\ntext_vocab\t16\n\
         acoustic_words\t8\nsegments_per_show\t4\ntokens_per_segment\t12\nseed\t5\n",
    )
    .unwrap();
    let corpus = dir.join("corpus");
    let out = mediatopic(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
    let manifest = stdout(&out).trim().to_string();
    assert!(Path::new(&manifest).is_file(), "no manifest at {manifest}");
    manifest
}

#[test]
fn help_lists_every_stage() {
    let out = mediatopic(&["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "train-gmm",
        "quantize",
        "baseline-train",
        "baseline-classify",
        "build-idf",
        "weight",
        "train-lda",
        "infer",
        "featurize",
        "train-svm",
        "predict",
        "train-fusion",
        "fuse",
        "eval",
        "synth",
        "pipeline",
    ] {
        assert!(text.contains(name), "--help misses {name}");
    }
}

#[test]
fn usage_and_data_errors_use_distinct_exit_codes() {
    // Unknown flags are usage errors.
    let out = mediatopic(&["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    // So are malformed config files...
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.tsv");
    fs::write(&config, "work_dir\tw\nseed\t1\n").unwrap();
    let out = mediatopic(&["pipeline", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("missing field `corpus`"), "{}", stderr(&out));

    // ...and bad algorithm parameters, even with a valid corpus.
    let manifest = tiny_corpus(dir.path());
    let model = dir.path().join("gmm.bin");
    let out = mediatopic(&[
        "train-gmm",
        "--corpus",
        &manifest,
        "--components",
        "5",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("power of two"), "{}", stderr(&out));

    // Missing input files are data errors.
    let out = mediatopic(&[
        "train-gmm",
        "--corpus",
        dir.path().join("nope.tsv").to_str().unwrap(),
        "--components",
        "4",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.tsv");
    fs::write(&spec, "genres\t2\nshow_identities\t4\nepisodes\t2\nseed\t9\n").unwrap();
    let run = |out_dir: &Path| {
        let out = mediatopic(&[
            "synth",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);
    for rel in ["manifest.tsv", "feats/s00e0.bin", "text/s00e0.txt"] {
        let left = fs::read(a.join(rel)).unwrap();
        let right = fs::read(b.join(rel)).unwrap();
        assert_eq!(left, right, "{rel} differs between identical runs");
    }
}

#[test]
fn pipeline_command_reports_every_system() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_corpus(dir.path());
    let work = dir.path().join("work");
    let config = dir.path().join("config.tsv");
    fs::write(
        &config,
        format!(
            "corpus\t{manifest}\nwork_dir\t{}\nseed\t11\ngmm_components\t8\n\
             k_list\t4\nfusion_folds\t2\n",
            work.display()
        ),
    )
    .unwrap();
    let out = mediatopic(&["pipeline", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for tag in ["[acoustic_k4]", "[text_k4]", "[fused]"] {
        assert!(text.contains(tag), "stdout misses {tag}:\n{text}");
    }
    assert!(text.contains("accuracy"), "{text}");
    for rel in ["report_genre.tsv", "report_show.tsv"] {
        assert!(work.join(rel).is_file(), "{rel} missing");
    }
}

#[test]
fn eval_scores_predictions_and_rejects_unmapped_labels() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.tsv");
    let truth = dir.path().join("truth.tsv");
    fs::write(&pred, "a\tx\nb\ty\nc\ty\n").unwrap();
    fs::write(&truth, "a\tx\nb\ty\nc\tx\n").unwrap();
    let report = dir.path().join("report.tsv");
    let out = mediatopic(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("accuracy 0.6667 (2/3)"), "{}", stdout(&out));
    assert!(report.is_file());

    // Every predicted label must be covered by the map.
    let map = dir.path().join("map.tsv");
    fs::write(&map, "x\tg0\n").unwrap();
    let out = mediatopic(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("missing from map"), "{}", stderr(&out));
}
