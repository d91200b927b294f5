//! End-to-end checks of the `packconv` binary: exit codes, file formats,
//! CSV schemas, config-file merging, and determinism of the data columns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_packconv"))
}

fn write_raw(path: &Path, samples: &[f64]) {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

fn read_raw(path: &Path) -> Vec<f64> {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(bytes.len() % 8, 0);
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Workspace { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn delta_kernel_full_precision_is_the_identity() {
    let ws = Workspace::new();
    let signal: Vec<f64> = (0..300).map(|i| (i as f64 * 0.7).sin() * 42.0).collect();
    write_raw(&ws.path("sig.f64"), &signal);
    write_raw(&ws.path("delta.f64"), &[1.0, 0.0, 0.0]);

    let out = bin()
        .args(["conv"])
        .arg(ws.path("sig.f64"))
        .arg(ws.path("delta.f64"))
        .arg(ws.path("out.f64"))
        .args(["--mode", "full"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let got = read_raw(&ws.path("out.f64"));
    assert_eq!(got.len(), signal.len() + 2);
    for (i, &s) in signal.iter().enumerate() {
        assert_eq!(got[i], s, "sample {i}");
    }
    assert_eq!(&got[signal.len()..], &[0.0, 0.0]);
}

#[test]
fn xcorr_reverses_the_template() {
    let ws = Workspace::new();
    let signal: Vec<f64> = (0..50).map(|i| i as f64 - 25.0).collect();
    let template = [1.0, 2.0, 4.0];
    let reversed = [4.0, 2.0, 1.0];
    write_raw(&ws.path("sig.f64"), &signal);
    write_raw(&ws.path("tpl.f64"), &template);
    write_raw(&ws.path("rev.f64"), &reversed);

    let run = |sub: &str, kernel: &str, out: &str| {
        let st = bin()
            .args([sub])
            .arg(ws.path("sig.f64"))
            .arg(ws.path(kernel))
            .arg(ws.path(out))
            .args(["--mode", "full"])
            .status()
            .unwrap();
        assert!(st.success());
    };
    run("xcorr", "tpl.f64", "xc.f64");
    run("conv", "rev.f64", "cv.f64");
    assert_eq!(read_raw(&ws.path("xc.f64")), read_raw(&ws.path("cv.f64")));
}

#[test]
fn wav_files_round_trip_through_the_pipeline() {
    let ws = Workspace::new();
    // A WAV written by the engine itself, then filtered by a delta.
    let signal: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin() * 0.5).collect();
    packconv::io::write_wav_pcm16(&ws.path("in.wav"), &signal, 8000).unwrap();

    write_raw(&ws.path("delta.f64"), &[1.0]);
    let out = bin()
        .args(["conv"])
        .arg(ws.path("in.wav"))
        .arg(ws.path("delta.f64"))
        .arg(ws.path("out.wav"))
        .args(["--mode", "full"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (round, rate) = packconv::io::read_wav_pcm16(&ws.path("out.wav")).unwrap();
    assert_eq!(rate, 8000, "sample rate must follow the input");
    assert_eq!(round.len(), signal.len());
    // One PCM16 step of tolerance: the output was re-quantized once.
    for (&a, &b) in round.iter().zip(&signal) {
        assert!((a - b).abs() <= 1.0 / 32768.0);
    }
}

#[test]
fn unknown_mode_is_a_config_error() {
    let ws = Workspace::new();
    write_raw(&ws.path("sig.f64"), &[1.0, 2.0]);
    write_raw(&ws.path("k.f64"), &[1.0]);
    let out = bin()
        .args(["conv"])
        .arg(ws.path("sig.f64"))
        .arg(ws.path("k.f64"))
        .arg(ws.path("out.f64"))
        .args(["--mode", "wibble"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_bound_violation_exits_three() {
    let ws = Workspace::new();
    write_raw(&ws.path("sig.f64"), &[1.0, 2.0, 3.0, 4.0]);
    write_raw(&ws.path("k.f64"), &[1.0, 1.0, 1.0]);
    // 3 * 256 * 256 far exceeds the symmetric digit budget.
    let out = bin()
        .args(["conv"])
        .arg(ws.path("sig.f64"))
        .arg(ws.path("k.f64"))
        .arg(ws.path("out.f64"))
        .args(["--mode", "sym", "--sq", "256", "--kq", "256", "--bound-policy", "strict"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // The same point under the warn policy proceeds.
    let out = bin()
        .args(["conv"])
        .arg(ws.path("sig.f64"))
        .arg(ws.path("k.f64"))
        .arg(ws.path("out.f64"))
        .args(["--mode", "sym", "--sq", "256", "--kq", "256", "--bound-policy", "warn"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn failed_backend_validation_exits_four() {
    let out = bin()
        .args(["validate-backend", "--backend", "fft", "--n", "101", "--sq", "16", "--kq", "16"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let report = stdout_of(&out);
    assert!(report.contains("passed=false"), "report line: {report}");

    let out = bin()
        .args(["validate-backend", "--backend", "direct", "--n", "801"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("max_abs_error=0.000e0"));
}

#[test]
fn bench_data_columns_are_deterministic() {
    let run = || {
        let out = bin()
            .args([
                "bench", "--l", "32768", "--n", "101", "--reps", "3", "--seed", "7",
                "--modes", "sym,asym2",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        stdout_of(&out)
    };
    let first = run();
    let second = run();

    let strip_timing = |doc: &str| -> Vec<String> {
        doc.lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                if cols.len() == 10 {
                    // Drop the wall-clock columns (throughput and gain).
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        cols[0], cols[1], cols[2], cols[3], cols[4], cols[5], cols[8], cols[9]
                    )
                } else {
                    l.to_string()
                }
            })
            .collect()
    };
    assert_eq!(strip_timing(&first), strip_timing(&second));

    assert!(first.starts_with("# packconv bench"));
    assert_eq!(
        first.lines().nth(1).unwrap(),
        "mode,backend,N,W,S_q,K_q,msamples_per_s,gain_pct,snr_db,flops"
    );
    let full_row = first.lines().nth(2).unwrap();
    assert!(full_row.starts_with("full,"), "baseline first: {full_row}");
    assert!(full_row.ends_with(",inf,40804"), "baseline row: {full_row}");
}

#[test]
fn snr_grid_has_the_documented_schema() {
    let out = bin()
        .args([
            "snr-grid", "--l", "8192", "--n", "101", "--levels", "8,16", "--modes", "sym",
            "--seed", "11",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_of(&out);
    let mut lines = doc.lines();
    assert!(lines.next().unwrap().starts_with("# packconv snr-grid"));
    assert_eq!(lines.next().unwrap(), "s_q,k_q,mode,predicted_db,measured_db");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("8,8,sym,"));
    assert!(rows[1].starts_with("16,16,sym,"));
    // Both numeric columns populated.
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        cols[3].parse::<f64>().unwrap();
        cols[4].parse::<f64>().unwrap();
    }

    // An empty level list still yields the header.
    let out = bin()
        .args(["snr-grid", "--l", "4096", "--n", "21", "--levels", "--modes", "sym"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc = stdout_of(&out);
    assert_eq!(doc.lines().count(), 2, "header comment + schema only: {doc}");
}

#[test]
fn config_file_supplies_defaults_under_flag_precedence() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("defaults.conf"),
        "# run defaults\nsq = 64\nkq = 32\nseed = 99\n",
    )
    .unwrap();

    let out = bin()
        .args(["bench", "--l", "16384", "--n", "21", "--reps", "3", "--sq", "8"])
        .arg("--config")
        .arg(ws.path("defaults.conf"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = stdout_of(&out).lines().next().unwrap().to_string();
    // The flag beats the file; the file beats the default.
    assert!(header.contains("sq=8"), "{header}");
    assert!(header.contains("kq=32"), "{header}");
    assert!(header.contains("seed=99"), "{header}");

    let out = bin()
        .args(["bench", "--l", "16384"])
        .arg("--config")
        .arg(ws.path("nonexistent.conf"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn adaptive_runs_log_their_block_decisions() {
    let ws = Workspace::new();
    let signal: Vec<f64> = (0..4000).map(|i| ((i as f64) * 0.31).sin() * 90.0).collect();
    write_raw(&ws.path("sig.f64"), &signal);
    write_raw(&ws.path("k.f64"), &[0.2, 0.5, 1.0, 0.5, 0.2]);

    let out = bin()
        .args(["adaptive"])
        .arg(ws.path("sig.f64"))
        .arg(ws.path("k.f64"))
        .arg(ws.path("out.f64"))
        .args(["--snr-floor", "35", "--block-w", "600"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stderr);
    let decisions = log.lines().filter(|l| l.trim_start().starts_with("block")).count();
    assert!(decisions >= 5, "expected per-block decisions, got:\n{log}");
    assert_eq!(read_raw(&ws.path("out.f64")).len(), signal.len() + 4);
}
