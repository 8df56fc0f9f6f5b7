use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpsenet::nn::{init_random, save_weights};
use mpsenet::sweep::CSV_HEADER;
use mpsenet::{analyze_pair, load_weights, mix_at_snr, wav, ModelConfig, MpSeNet, Stft, StftConfig};
use tempfile::TempDir;

fn mpsenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir, name: &str, kind: &str, seconds: &str, seed: &str) -> PathBuf {
    let p = dir.path().join(name);
    let o = mpsenet(&["synth", "--kind", kind, "--seconds", seconds, "--seed", seed, "--out", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p
}

fn small_weights(dir: &TempDir, name: &str, task: &str) -> PathBuf {
    let p = dir.path().join(name);
    let o = mpsenet(&[
        "init-weights", "--out", s(&p), "--seed", "4", "--task", task, "--channels", "8", "--blocks", "1", "--heads", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p
}

#[test]
fn synth_fixtures_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let tone = synth(&dir, "tone.wav", "tone", "1", "0");
    assert_eq!(wav::read(&tone).unwrap().len(), 16_000);
    let a = synth(&dir, "a.wav", "noise", "0.5", "7");
    let b = synth(&dir, "b.wav", "noise", "0.5", "7");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let o = mpsenet(&["synth", "--kind", "tone", "--seconds", "0", "--out", s(&dir.path().join("z.wav"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# fixtures\nseed=5\n").unwrap();
    let from_file = dir.path().join("f.wav");
    let o = mpsenet(&["--config", s(&cfg), "synth", "--kind", "noise", "--seconds", "0.2", "--out", s(&from_file)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let explicit = synth(&dir, "e.wav", "noise", "0.2", "5");
    let flagged = dir.path().join("g.wav");
    let o = mpsenet(&[
        "--config", s(&cfg), "synth", "--kind", "noise", "--seconds", "0.2", "--seed", "6", "--out", s(&flagged),
    ]);
    assert_eq!(code(&o), 0);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&from_file), read(&explicit));
    assert_ne!(read(&flagged), read(&explicit));

    std::fs::write(&cfg, "volume=11\n").unwrap();
    let o = mpsenet(&["--config", s(&cfg), "verify", "--suite", "roundtrip"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("volume"));
}

#[test]
fn analyze_reports_match_the_library() {
    let dir = TempDir::new().unwrap();
    let clean = synth(&dir, "clean.wav", "sweep", "0.5", "0");
    let o = mpsenet(&["analyze", "--ref", s(&clean), "--est", s(&clean)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["pd_deg=0", "lsd_db=0", "si_sdr_db=inf", "mag=0", "pha=0"] {
        assert!(text.lines().any(|l| l == line), "{line} missing from\n{text}");
    }

    let noise = synth(&dir, "noise.wav", "noise", "0.5", "1");
    let c = wav::read(&clean).unwrap();
    let mix = mix_at_snr(&c, &wav::read(&noise).unwrap(), 0.0).unwrap();
    let mixed = dir.path().join("mix.wav");
    wav::write(&mixed, &mix).unwrap();
    let o = mpsenet(&["analyze", "--ref", s(&clean), "--est", s(&mixed)]);
    assert_eq!(code(&o), 0);
    let expected = analyze_pair(&c, &wav::read(&mixed).unwrap(), &StftConfig::default()).unwrap();
    assert_eq!(stdout(&o), expected.to_text());
    assert!(expected.pd_deg > 0.0 && expected.si_sdr_db.is_finite());

    let o = mpsenet(&["analyze", "--ref", s(&clean), "--est", s(&mixed), "--csv"]);
    assert_eq!(stdout(&o), expected.to_csv());

    let short = synth(&dir, "short.wav", "tone", "0.25", "0");
    let o = mpsenet(&["analyze", "--ref", s(&clean), "--est", s(&short)]);
    assert_ne!(code(&o), 0);
}

#[test]
fn verify_exit_codes() {
    let o = mpsenet(&["verify", "--suite", "roundtrip", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("suite roundtrip: passed"));
    let o = mpsenet(&["verify", "--suite", "roundtrip", "--tolerance", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
    let o = mpsenet(&["verify", "--suite", "everything"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn enhance_with_random_weights() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "in.wav", "sweep", "2", "0");
    let weights = small_weights(&dir, "w", "denoise");
    let out = dir.path().join("out.wav");
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&out), "--weights", s(&weights), "--task", "denoise"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("2.00 s of audio"));
    let y = wav::read(&out).unwrap();
    assert_eq!(y.len(), 32_000);
    assert!(y.samples().iter().all(|v| v.is_finite()));

    // bandwidth extension needs the unbounded head
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&out), "--weights", s(&weights), "--task", "bwe"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unbounded_mask"));
    let bwe = small_weights(&dir, "wb", "bwe");
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&out), "--weights", s(&bwe), "--task", "bwe"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn enhance_missing_weights_names_the_path() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "in.wav", "tone", "0.1", "0");
    let missing = dir.path().join("no-such-weights");
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&dir.path().join("o.wav")), "--weights", s(&missing)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
}

#[test]
fn enhance_rejects_corrupt_weights() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "in.wav", "tone", "0.1", "0");
    let weights = small_weights(&dir, "w", "denoise");
    let manifest = std::fs::read_to_string(weights.join("manifest.txt")).unwrap();
    let fields: Vec<&str> = manifest.lines().last().unwrap().split_whitespace().collect();
    let (param, offset): (&str, usize) = (fields[0], fields[3].parse().unwrap());
    let blob = weights.join("weights.bin");
    let mut bytes = std::fs::read(&blob).unwrap();
    bytes[offset] ^= 0x80;
    std::fs::write(&blob, bytes).unwrap();
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&dir.path().join("o.wav")), "--weights", s(&weights)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(param), "{}", stderr(&o));
}

#[test]
fn enhance_matches_library_forward_on_forged_weights() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "in.wav", "sweep", "0.5", "0");
    let cfg = ModelConfig::small(8, 1, 2);
    let mut store = init_random(&cfg, 2).unwrap();
    store.get_mut("mask_decoder.head.weight").unwrap().data.fill(0.0);
    store.get_mut("mask_decoder.head.bias").unwrap().data.fill(1.0);
    store.get_mut("mask_decoder.lsigmoid.alpha").unwrap().data.fill(1.0);
    let weights = dir.path().join("forged");
    save_weights(&store, &cfg, &weights).unwrap();

    let out = dir.path().join("out.wav");
    let o = mpsenet(&["enhance", "--in", s(&input), "--out", s(&out), "--weights", s(&weights)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let (cfg, store) = load_weights(&weights).unwrap();
    let model = MpSeNet::new(cfg, store).unwrap();
    let stft = Stft::new(&StftConfig::default()).unwrap();
    let lib = model.forward(&wav::read(&input).unwrap(), &stft).unwrap().waveform;
    let expected = wav::decode(&wav::encode(&lib).unwrap()).unwrap();
    assert_eq!(wav::read(&out).unwrap(), expected);
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let clean = synth(&dir, "clean.wav", "sweep", "0.25", "0");
    let noise = synth(&dir, "noise.wav", "noise", "0.1", "3");
    let weights = small_weights(&dir, "w", "denoise");
    let csv = dir.path().join("sweep.csv");
    let o = mpsenet(&[
        "sweep-snr", "--clean", s(&clean), "--noise", s(&noise), "--weights", s(&weights), "--out", s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("-5,"));
    assert!(lines[9].starts_with("15,"));

    let o = mpsenet(&[
        "sweep-snr", "--clean", s(&clean), "--noise", s(&noise), "--weights", s(&weights), "--grid", "0:10:5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = mpsenet(&[
        "sweep-snr", "--clean", s(&clean), "--noise", s(&noise), "--weights", s(&weights), "--grid", "0:10",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn prepare_bwe_keeps_length() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "in.wav", "sweep", "0.5", "0");
    let out = dir.path().join("nb.wav");
    let o = mpsenet(&["prepare-bwe", "--in", s(&input), "--out", s(&out), "--factor", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(wav::read(&out).unwrap().len(), 8000);
    let o = mpsenet(&["prepare-bwe", "--in", s(&input), "--out", s(&out), "--factor", "3"]);
    assert_eq!(code(&o), 2);
    let o = mpsenet(&["prepare-bwe", "--in", s(&dir.path().join("absent.wav")), "--out", s(&out), "--factor", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent.wav"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&mpsenet(&[])), 2);
    assert_eq!(code(&mpsenet(&["enhance", "--in", "x.wav"])), 2);
}
