//! End-to-end checks of the conmod binary: the full
//! gen-data / train / render / eval / eval-long / interp pipeline on a toy
//! configuration, plus the error and reproducibility contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conmod::signal::wav_read;

fn conmod_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conmod"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = conmod_bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> Output {
    let out = conmod_bin().args(args).output().unwrap();
    assert!(!out.status.success(), "command {args:?} unexpectedly passed");
    out
}

/// Toy run config: 8 kHz, tiny STFT and model, two training epochs.
fn toy_config(effects: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "oracle": {
            "effects": effects,
            "lfo_freqs_hz": [0.9],
            "feedback_pcts": [0.0],
            "lfo_phase_rad": 0.1,
            "duration_s": 0.12,
            "sample_rate": 8000
        },
        "stft": {
            "frame_size": 32,
            "fft_size": 64,
            "hop": 8,
            "window": "hann",
            "sample_rate": 8000
        },
        "model": {
            "lstm_hidden": 4,
            "mlp_hidden": 8,
            "num_hidden_fc": 2,
            "bins": 33,
            "cond_dim": 1,
            "film_hidden": 4
        },
        "train": {
            "epochs": 2,
            "seed": 3,
            "checkpoint_every": 0,
            "loss_weights": { "fft_sizes": [64, 128] }
        },
        "eval": {
            "lfo_freqs_hz": [0.9, 1.2],
            "feedback_pcts": [0.0],
            "test_duration_s": 0.1,
            "test_seed": 4,
            "long_durations_s": [0.1, 0.2]
        }
    })
}

fn write_config(dir: &Path, cfg: &serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn single_effect_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        &toy_config(serde_json::json!([
            { "id": "phaser_cli", "settings": { "kind": "phaser", "stages": 2 } }
        ])),
    )
}

#[test]
fn full_pipeline_on_a_toy_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = single_effect_config(tmp.path());
    let data = tmp.path().join("data");
    let runs = tmp.path().join("runs");

    run_ok(&[
        "gen-data",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(data.join("manifest.json").is_file());
    assert!(data.join("run_config.json").is_file());
    // The echoed config resolves the effect settings in full.
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("run_config.json")).unwrap())
            .unwrap();
    assert_eq!(echoed["oracle"]["effects"][0]["settings"]["stages"], 2);
    assert_eq!(echoed["oracle"]["effects"][0]["settings"]["mix"], 0.7);

    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        runs.to_str().unwrap(),
    ]);
    let ckpt = runs.join("checkpoint.bin");
    assert!(ckpt.is_file());
    assert!(runs.join("metrics.ndjson").is_file());
    assert!(runs.join("run_config.json").is_file());

    // Render the dataset's dry signal back through the model.
    let dry_path = data.join("dry.wav");
    let wet_path = tmp.path().join("wet.wav");
    run_ok(&[
        "render",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--in",
        dry_path.to_str().unwrap(),
        "--out",
        wet_path.to_str().unwrap(),
        "--lfo-freq",
        "0.9",
        "--feedback",
        "0",
    ]);
    let dry = wav_read(&dry_path).unwrap();
    let wet = wav_read(&wet_path).unwrap();
    assert_eq!(wet.len(), dry.len());
    assert!(wet.samples().iter().all(|s| s.is_finite()));
    assert!(tmp.path().join("wet.run_config.json").is_file());

    let eval_out = tmp.path().join("eval");
    run_ok(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(eval_out.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "effect_id,lfo_freq_hz,feedback_pct,seen,esr_pct");
    assert_eq!(lines.len(), 3); // header + 2 grid frequencies
    assert!(lines[1].starts_with("phaser_cli,0.9,0,true,"));
    assert!(lines[2].starts_with("phaser_cli,1.2,0,false,"));
    assert!(eval_out.join("report.json").is_file());

    let long_out = tmp.path().join("long");
    run_ok(&[
        "eval-long",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        long_out.to_str().unwrap(),
    ]);
    let long_csv = std::fs::read_to_string(long_out.join("long_esr.csv")).unwrap();
    let rows: Vec<&str> = long_csv.lines().collect();
    assert_eq!(rows[0], "duration_s,esr_pct");
    assert_eq!(rows.len(), 3);
}

#[test]
fn feedback_out_of_range_fails_with_one_line_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_err(&[
        "render",
        "--checkpoint",
        tmp.path().join("none.bin").to_str().unwrap(),
        "--in",
        "x.wav",
        "--out",
        "y.wav",
        "--lfo-freq",
        "1",
        "--feedback",
        "101",
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let diag: Vec<&str> = stderr.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(diag.len(), 1, "expected one-line diagnostic, got {stderr:?}");
    assert!(diag[0].starts_with("error:"));
    assert!(diag[0].contains("101"));
}

#[test]
fn unknown_subcommand_and_missing_flags_fail() {
    let out = run_err(&["frobnicate"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = run_err(&["train", "--out", "somewhere"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
}

#[test]
fn config_typos_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(serde_json::json!([{ "id": "phaser_cli" }]));
    cfg["stft"]["fftsize"] = serde_json::json!(64); // misspelled key
    let path = write_config(tmp.path(), &cfg);
    let out = run_err(&[
        "gen-data",
        "--config",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("d").to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fftsize"), "stderr: {stderr}");
}

#[test]
fn seed_env_var_overrides_config_but_not_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = single_effect_config(tmp.path());
    let data = tmp.path().join("data");
    run_ok(&[
        "gen-data",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);

    let out_env = tmp.path().join("env");
    let status = conmod_bin()
        .args([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_env.to_str().unwrap(),
            "--epochs",
            "0",
        ])
        .env("CONMOD_SEED", "77")
        .status()
        .unwrap();
    assert!(status.success());
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_env.join("run_config.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["train"]["seed"], 77);

    let out_flag = tmp.path().join("flag");
    let status = conmod_bin()
        .args([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_flag.to_str().unwrap(),
            "--epochs",
            "0",
            "--seed",
            "12",
        ])
        .env("CONMOD_SEED", "77")
        .status()
        .unwrap();
    assert!(status.success());
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_flag.join("run_config.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["train"]["seed"], 12);

    let bad = conmod_bin()
        .args(["gen-data", "--out", tmp.path().join("x").to_str().unwrap()])
        .env("CONMOD_SEED", "not-a-number")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("CONMOD_SEED"));
}

#[test]
fn identical_runs_produce_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = single_effect_config(tmp.path());
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>, Vec<u8>)> = Vec::new();
    for attempt in ["a", "b"] {
        let data = tmp.path().join(attempt).join("data");
        let runs = tmp.path().join(attempt).join("runs");
        run_ok(&[
            "gen-data",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            data.to_str().unwrap(),
        ]);
        run_ok(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            runs.to_str().unwrap(),
        ]);
        let wet = tmp.path().join(attempt).join("wet.wav");
        run_ok(&[
            "render",
            "--checkpoint",
            runs.join("checkpoint.bin").to_str().unwrap(),
            "--in",
            data.join("dry.wav").to_str().unwrap(),
            "--out",
            wet.to_str().unwrap(),
            "--lfo-freq",
            "0.9",
            "--feedback",
            "0",
        ]);
        artifacts.push((
            std::fs::read(data.join("wet_phaser_cli_lfo0.9_fb0.wav")).unwrap(),
            std::fs::read(runs.join("checkpoint.bin")).unwrap(),
            std::fs::read(wet).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "dataset wavs differ");
    assert_eq!(artifacts[0].1, artifacts[1].1, "checkpoints differ");
    assert_eq!(artifacts[0].2, artifacts[1].2, "rendered wavs differ");
}

#[test]
fn interp_requires_a_dual_effect_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();

    // Single-effect checkpoint: interp must refuse.
    let cfg1 = single_effect_config(tmp.path());
    let data1 = tmp.path().join("data1");
    let runs1 = tmp.path().join("runs1");
    run_ok(&[
        "gen-data", "--config", cfg1.to_str().unwrap(), "--out", data1.to_str().unwrap(),
    ]);
    run_ok(&[
        "train", "--config", cfg1.to_str().unwrap(), "--data", data1.to_str().unwrap(),
        "--out", runs1.to_str().unwrap(),
    ]);
    let out = run_err(&[
        "interp",
        "--checkpoint",
        runs1.join("checkpoint.bin").to_str().unwrap(),
        "--alpha",
        "0.5",
        "--in",
        data1.join("dry.wav").to_str().unwrap(),
        "--out",
        tmp.path().join("i.wav").to_str().unwrap(),
        "--lfo-freq",
        "0.9",
        "--feedback",
        "0",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 effects"));

    // Dual-effect checkpoint: interp renders.
    let dual = tmp.path().join("dual.json");
    let mut cfg = toy_config(serde_json::json!([
        { "id": "phaser_one", "settings": { "kind": "phaser", "stages": 2 } },
        { "id": "phaser_two", "settings": { "kind": "phaser", "stages": 6 } }
    ]));
    cfg["model"]["cond_dim"] = serde_json::json!(3);
    std::fs::write(&dual, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let data2 = tmp.path().join("data2");
    let runs2 = tmp.path().join("runs2");
    run_ok(&[
        "gen-data", "--config", dual.to_str().unwrap(), "--out", data2.to_str().unwrap(),
    ]);
    run_ok(&[
        "train", "--config", dual.to_str().unwrap(), "--data", data2.to_str().unwrap(),
        "--out", runs2.to_str().unwrap(),
    ]);
    let blended = tmp.path().join("blend.wav");
    run_ok(&[
        "interp",
        "--checkpoint",
        runs2.join("checkpoint.bin").to_str().unwrap(),
        "--alpha",
        "0.5",
        "--in",
        data2.join("dry.wav").to_str().unwrap(),
        "--out",
        blended.to_str().unwrap(),
        "--lfo-freq",
        "0.9",
        "--feedback",
        "0",
    ]);
    let audio = wav_read(&blended).unwrap();
    assert!(audio.samples().iter().all(|s| s.is_finite()));
    assert!(tmp.path().join("blend.run_config.json").is_file());
}
