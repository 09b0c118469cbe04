use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn streamdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamdec"))
        .args(args)
        .env_remove("STREAMDEC_SEED")
        .output()
        .expect("run streamdec")
}

fn ok(args: &[&str]) -> Output {
    let out = streamdec(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    synth_n(dir, 2, extra)
}

fn synth_n(dir: &Path, n: usize, extra: &[&str]) -> PathBuf {
    let d = dir.to_str().unwrap();
    let n = n.to_string();
    let mut args = vec!["synth", "--out", d, "--utterances", &n, "--labels", "4", "--seed", "9"];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("manifest.toml")
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    body(&text)[1..]
        .iter()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn decode_writes_ranked_hypotheses() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&["decode", m.to_str().unwrap(), "--beam", "6"]);
    let hyp = fs::read_to_string(tmp.path().join("out/utt001.hyp")).unwrap();
    let first = body(&hyp)[0];
    assert!(first.starts_with("1\t"), "{first}");
    let rtf = fs::read_to_string(tmp.path().join("out/rtf.csv")).unwrap();
    let rows = body(&rtf);
    assert_eq!(rows[0], "utt_id,rtf,first_emission_offset_ms,error_rate,beam_size");
    assert_eq!(rows.len(), 3);
}

#[test]
fn config_is_echoed() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&[
        "decode",
        m.to_str().unwrap(),
        "--attention",
        "mta",
        "--mu",
        "0.5",
        "--beam",
        "20",
    ]);
    for file in ["out/utt001.hyp", "out/rtf.csv"] {
        let text = fs::read_to_string(tmp.path().join(file)).unwrap();
        for line in [
            "# attention=mta",
            "# mu=0.5",
            "# beam=20",
            "# theta=1e-8",
            "# end_M=3",
            "# end_D=-10",
        ] {
            assert!(text.lines().any(|l| l == line), "{file} lacks {line}");
        }
    }
}

#[test]
fn arrival_period_changes_rtf_only() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    let m = m.to_str().unwrap();
    let dirs = ["a", "b"].map(|d| tmp.path().join(d));
    ok(&[
        "decode",
        m,
        "--beam",
        "6",
        "--arrival-period-ms",
        "0",
        "--output-dir",
        dirs[0].to_str().unwrap(),
    ]);
    ok(&[
        "decode",
        m,
        "--beam",
        "6",
        "--arrival-period-ms",
        "100",
        "--output-dir",
        dirs[1].to_str().unwrap(),
    ]);
    for id in ["utt001", "utt002"] {
        let a = fs::read(dirs[0].join(format!("{id}.hyp"))).unwrap();
        let b = fs::read(dirs[1].join(format!("{id}.hyp"))).unwrap();
        assert_eq!(a, b, "{id}");
    }
    let a = fs::read(dirs[0].join("rtf.csv")).unwrap();
    let b = fs::read(dirs[1].join("rtf.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn runs_are_deterministic_and_seed_env_overrides() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &["--encoded"]);
    let m = m.to_str().unwrap();
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    for d in &dirs[..2] {
        ok(&["compare-ctc", m, "--samples", "5", "--output-dir", d.to_str().unwrap()]);
    }
    let a = fs::read(dirs[0].join("utt001.ctc.csv")).unwrap();
    assert_eq!(a, fs::read(dirs[1].join("utt001.ctc.csv")).unwrap());

    let out = Command::new(env!("CARGO_BIN_EXE_streamdec"))
        .args([
            "compare-ctc",
            m,
            "--samples",
            "5",
            "--output-dir",
            dirs[2].to_str().unwrap(),
        ])
        .env("STREAMDEC_SEED", "1234")
        .output()
        .unwrap();
    assert!(out.status.success());
    let c = fs::read_to_string(dirs[2].join("utt001.ctc.csv")).unwrap();
    assert!(c.lines().any(|l| l == "# seed=1234"));
}

#[test]
fn compare_ctc_is_exact_at_zero_theta() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&["compare-ctc", m.to_str().unwrap(), "--theta", "0", "--samples", "15"]);
    let rows = csv_rows(&tmp.path().join("out/utt001.ctc.csv"));
    assert_eq!(rows.len(), 4 + 15);
    for r in rows {
        assert_eq!(r[1], r[2], "{r:?}");
        assert_eq!(r[7], "0");
    }
}

fn mean_of(rows: &[Vec<String>], col: usize, f: impl Fn(f64) -> f64) -> f64 {
    rows.iter().map(|r| f(r[col].parse::<f64>().unwrap())).sum::<f64>() / rows.len() as f64
}

fn all_ctc_rows(dir: &Path, n: usize) -> Vec<Vec<String>> {
    (1..=n)
        .flat_map(|k| csv_rows(&dir.join(format!("out/utt{k:03}.ctc.csv"))))
        .collect()
}

#[test]
fn compare_ctc_truncation_saves_work_on_peaky_lattices() {
    let tmp = TempDir::new().unwrap();
    let (pd, fd) = (tmp.path().join("peaky"), tmp.path().join("flat"));
    let peaky = synth_n(&pd, 6, &[]);
    let flat = synth_n(&fd, 6, &["--temperature", "1.0"]);
    ok(&["compare-ctc", peaky.to_str().unwrap(), "--samples", "0"]);
    ok(&["compare-ctc", flat.to_str().unwrap(), "--samples", "0"]);
    let p = all_ctc_rows(&pd, 6);
    let f = all_ctc_rows(&fd, 6);
    let max_gap = |rows: &[Vec<String>]| {
        rows.iter()
            .map(|r| r[6].parse::<f64>().unwrap().abs())
            .fold(0.0, f64::max)
    };
    assert!(mean_of(&p, 5, |x| x) < 1.0);
    assert!(mean_of(&p, 5, |x| x) < mean_of(&f, 5, |x| x));
    assert!(p.iter().all(|r| r[7] == "0"), "{p:?}");
    assert!(max_gap(&f) > max_gap(&p), "{} vs {}", max_gap(&f), max_gap(&p));
    for r in p.iter().chain(&f) {
        let (full, trunc) = (r[1].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap());
        assert!(trunc <= full, "{r:?}");
    }
}

fn weight_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in csv_rows(path) {
        let (i, j): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        if rows.len() < i {
            rows.push(Vec::new());
        }
        assert_eq!(rows[i - 1].len() + 1, j);
        rows[i - 1].push(r[2].parse().unwrap());
    }
    rows
}

#[test]
fn smocha_constant_p_dump_decays_geometrically() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&[
        "dump-attention",
        m.to_str().unwrap(),
        "--attention",
        "smocha",
        "--constant-p",
        "0.5",
        "--steps",
        "3",
    ]);
    let rows = weight_rows(&tmp.path().join("out/utt001.train.csv"));
    assert_eq!(rows.len(), 3);
    for row in rows {
        for (j, w) in row.iter().take(10).enumerate() {
            assert_eq!(*w, 0.5f64.powi(j as i32 + 1));
        }
    }
}

#[test]
fn mocha_constant_p_row_sums_decrease() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&[
        "dump-attention",
        m.to_str().unwrap(),
        "--attention",
        "mocha",
        "--constant-p",
        "0.3",
        "--steps",
        "20",
    ]);
    let sums: Vec<f64> = weight_rows(&tmp.path().join("out/utt001.train.csv"))
        .iter()
        .map(|r| r.iter().sum())
        .collect();
    assert_eq!(sums.len(), 20);
    for w in sums.windows(2) {
        assert!(w[1] < w[0], "{sums:?}");
    }
}

#[test]
fn mta_decode_dump_is_truncated_at_endpoint() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    ok(&["dump-attention", m.to_str().unwrap(), "--attention", "mta"]);
    let rows = weight_rows(&tmp.path().join("out/utt001.decode.csv"));
    let t = rows[0].len();
    let mut truncated = 0;
    for row in &rows {
        // a step that runs out of input without a trigger attends nowhere
        let Some(last) = row.iter().rposition(|&w| w > 0.0) else {
            continue;
        };
        assert!(row[last + 1..].iter().all(|&w| w == 0.0));
        // truncated, not renormalized
        assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
        if last + 1 < t {
            truncated += 1;
        }
    }
    assert!(truncated > 0);
    assert!(tmp.path().join("out/utt001.train.csv").exists());
}

#[test]
fn malformed_utterances_get_one_line_each() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    let mut text = fs::read_to_string(&m).unwrap();
    text.push_str("\n[[utterance]]\nid = \"missing\"\nraw = \"nope.raw\"\n");
    text.push_str("\n[[utterance]]\nid = \"both\"\nraw = \"utt001.raw\"\nstream = \"x\"\nlattice = \"y\"\n");
    fs::write(&m, text).unwrap();
    let out = streamdec(&["decode", m.to_str().unwrap(), "--beam", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 2, "{err}");
    assert!(lines[0].contains("missing") && lines[1].contains("both"));
    // the well-formed utterances are still decoded
    assert!(tmp.path().join("out/utt001.hyp").exists());
    assert_eq!(
        body(&fs::read_to_string(tmp.path().join("out/rtf.csv")).unwrap()).len(),
        3
    );
}

#[test]
fn bad_flags_and_manifests_exit_with_input_error() {
    let tmp = TempDir::new().unwrap();
    let m = synth(tmp.path(), &[]);
    let m = m.to_str().unwrap();
    assert_eq!(streamdec(&["decode", m, "--mu", "1.5"]).status.code(), Some(1));
    assert_eq!(streamdec(&["decode", m, "--attention", "soft"]).status.code(), Some(1));
    assert_eq!(streamdec(&["decode", "/no/such/manifest.toml"]).status.code(), Some(1));
    assert_eq!(streamdec(&["decode"]).status.code(), Some(1));
    fs::write(tmp.path().join("bad.toml"), "seed = \"x\"").unwrap();
    assert_eq!(
        streamdec(&["decode", tmp.path().join("bad.toml").to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(streamdec(&["--help"]).status.code(), Some(0));
}

#[test]
fn encoded_inputs_decode_like_raw_ones() {
    let tmp = TempDir::new().unwrap();
    let raw = synth(&tmp.path().join("raw"), &[]);
    let enc = synth(&tmp.path().join("enc"), &["--encoded"]);
    ok(&["decode", raw.to_str().unwrap(), "--beam", "5"]);
    ok(&["decode", enc.to_str().unwrap(), "--beam", "5"]);
    let strip = |p: PathBuf| {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# vocab="))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(
        strip(tmp.path().join("raw/out/utt002.hyp")),
        strip(tmp.path().join("enc/out/utt002.hyp"))
    );
}
