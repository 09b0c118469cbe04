use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::task::Poll;

use anyhow::{anyhow, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamdec_core::attention::{
    hma_expectation, mocha_expectation, mta_train_weights, one_hot_init, sigmoid, smocha_expectation, write_weight_csv,
    AttentionScan, StepEnergy, WeightRow,
};
use streamdec_core::dwjd::{BigramLm, UniformLm};
use streamdec_core::formats::{write_hypotheses, write_lattice, write_stream};
use streamdec_core::metrics::{error_rate, write_rtf_csv, RtfRow};
use streamdec_core::sim::{
    chunked_encode, measure_rtf, measure_rtf_encoded, synth_utterance, ArrivalMode, FrameLayout,
};
use streamdec_core::{
    ctc_prefix_score, dwjd_decode, finalize_hypotheses, tctc_prefix_score, CtcForwardTable, DecoderModel, Error,
    LabelSequence, LmScorer, Mechanism, PosteriorLattice, RepresentationStream, ToyConfig, ToyModel,
};

use crate::manifest::{LoadedUtterance, RunManifest, ToySection, UtteranceEntry, UtteranceInput};
use crate::settings::{Overrides, Settings};

const EXIT_INPUT: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

/// 2 when an internal invariant broke anywhere in the chain, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let invariant = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Invariant(_))));
    if invariant {
        EXIT_INVARIANT
    } else {
        EXIT_INPUT
    }
}

fn report(context: &str, err: &anyhow::Error) -> u8 {
    eprintln!("error: {context}: {err:#}");
    exit_code(err)
}

struct Run {
    settings: Settings,
    model: ToyModel,
    lm: Box<dyn LmScorer>,
    out_dir: PathBuf,
    base: PathBuf,
    entries: Vec<UtteranceEntry>,
}

impl Run {
    fn prepare(manifest: &Path, output_dir: Option<PathBuf>, overrides: &Overrides) -> Result<Self> {
        let (m, base) = RunManifest::load(manifest)?;
        let settings = Settings::resolve(&m, &base, overrides)?;
        let model = match m.vocab(&base)? {
            Some(v) => ToyModel::with_vocab(settings.toy.clone(), v, settings.seed)?,
            None => ToyModel::new(settings.toy.clone(), settings.seed)?,
        };
        let lm: Box<dyn LmScorer> = match &settings.lm {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read lm {}", p.display()))?;
                Box::new(BigramLm::train(&text, model.vocab(), BigramLm::DEFAULT_DISCOUNT)?)
            }
            None => Box::new(UniformLm::new(model.vocab())),
        };
        let out_dir = output_dir.unwrap_or_else(|| base.join(&m.output_dir));
        fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
        ensure!(!m.utterances.is_empty(), "manifest lists no utterances");
        Ok(Self {
            settings,
            model,
            lm,
            out_dir,
            base,
            entries: m.utterances,
        })
    }

    /// Runs `f` on every utterance, printing one line per failure.
    fn each<F>(&self, mut f: F) -> u8
    where
        F: FnMut(usize, &LoadedUtterance) -> Result<()>,
    {
        let mut code = 0;
        for (idx, entry) in self.entries.iter().enumerate() {
            let result = entry.load(&self.base, self.model.vocab()).and_then(|utt| f(idx, &utt));
            if let Err(e) = result {
                code = code.max(report(&format!("utterance {}", entry.id), &e));
            }
        }
        code
    }

    /// Closed encoder output and posteriors for an utterance.
    fn encode(&self, utt: &LoadedUtterance) -> Result<(RepresentationStream, PosteriorLattice)> {
        match &utt.input {
            UtteranceInput::Raw(raw) => {
                let out = chunked_encode(raw, &self.settings.streaming, &self.model)?;
                Ok((out.stream, out.lattice))
            }
            UtteranceInput::Encoded { stream, lattice } => {
                self.check_encoded(stream, lattice)?;
                Ok((stream.clone(), lattice.clone()))
            }
        }
    }

    fn check_encoded(&self, stream: &RepresentationStream, lattice: &PosteriorLattice) -> Result<()> {
        ensure!(
            stream.dim() == self.model.dim(),
            "stream has dimension {}, model expects {}",
            stream.dim(),
            self.model.dim()
        );
        ensure!(
            lattice.vocab_size() == self.model.vocab().len(),
            "lattice has {} columns, vocabulary has {} labels",
            lattice.vocab_size(),
            self.model.vocab().len()
        );
        ensure!(
            stream.t_enc() == lattice.len(),
            "stream has {} frames, lattice has {}",
            stream.t_enc(),
            lattice.len()
        );
        Ok(())
    }

    fn header(&self, with_arrival: bool, extra: &[String]) -> Vec<String> {
        let mut lines = self.settings.echo(with_arrival);
        lines.extend_from_slice(extra);
        lines
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("cannot write {}", path.display()))
}

fn comment_lines(out: &mut Vec<u8>, lines: &[String]) -> std::io::Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

pub fn decode(manifest: &Path, output_dir: Option<PathBuf>, overrides: &Overrides) -> u8 {
    let run = match Run::prepare(manifest, output_dir, overrides) {
        Ok(r) => r,
        Err(e) => return report(&manifest.display().to_string(), &e),
    };
    let v = run.model.vocab();
    let cfg = &run.settings.decode;
    let mut rows = Vec::new();
    let mut code = run.each(|_, utt| {
        let pipeline = match &utt.input {
            UtteranceInput::Raw(raw) => measure_rtf(
                &run.model,
                run.lm.as_ref(),
                raw,
                &run.settings.streaming,
                cfg,
                ArrivalMode::Streaming,
            )?,
            UtteranceInput::Encoded { stream, lattice } => {
                run.check_encoded(stream, lattice)?;
                measure_rtf_encoded(
                    &run.model,
                    run.lm.as_ref(),
                    stream,
                    lattice,
                    &run.settings.streaming,
                    cfg,
                    ArrivalMode::Streaming,
                )?
            }
        };
        let hyps = finalize_hypotheses(pipeline.output.hypotheses, &pipeline.output.lattice, v, cfg)?;
        let best = hyps.first().ok_or(Error::NoFinishedHypothesis(cfg.max_output_len))?;
        let error_rate = utt
            .reference
            .as_ref()
            .map(|r| error_rate(r, best.seq.content(v)))
            .transpose()?;

        let header = run.header(false, &[format!("utt={}", utt.id)]);
        let body = write_hypotheses(&hyps, v);
        write_file(&run.out_dir.join(format!("{}.hyp", utt.id)), |out| {
            comment_lines(out, &header)?;
            out.write_all(body.as_bytes())
        })?;
        rows.push(RtfRow {
            utt_id: utt.id.clone(),
            report: pipeline.report,
            error_rate,
            beam_size: cfg.beam_size,
        });
        Ok(())
    });
    let header = run.header(true, &[]);
    if let Err(e) = write_file(&run.out_dir.join("rtf.csv"), |out| write_rtf_csv(out, &header, &rows)) {
        code = code.max(report("rtf.csv", &e));
    }
    code
}

pub struct CompareOptions {
    pub samples: usize,
    pub max_prefix_len: usize,
    pub gap_tolerance: f64,
}

pub const COMPARE_CSV_HEADER: &str = "prefix,s_ctc,s_tctc,t_n,t_max,cost_ratio,gap,flagged";

pub fn compare_ctc(manifest: &Path, output_dir: Option<PathBuf>, overrides: &Overrides, opts: &CompareOptions) -> u8 {
    let run = match Run::prepare(manifest, output_dir, overrides) {
        Ok(r) => r,
        Err(e) => return report(&manifest.display().to_string(), &e),
    };
    if opts.max_prefix_len == 0 && opts.samples > 0 {
        eprintln!("error: --max-prefix-len must be positive");
        return EXIT_INPUT;
    }
    let v = run.model.vocab();
    let theta = run.settings.decode.theta;
    run.each(|idx, utt| {
        let (_, lattice) = run.encode(utt)?;
        let t_max = lattice.len();
        ensure!(t_max > 0, Error::EmptyLattice);

        let mut prefixes: Vec<Vec<usize>> = Vec::new();
        if let Some(r) = &utt.reference {
            prefixes.extend((1..=r.len()).map(|n| r[..n].to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(run.settings.seed.wrapping_add(idx as u64));
        let content = v.content_labels();
        for _ in 0..opts.samples {
            let len = rng.random_range(1..=opts.max_prefix_len);
            prefixes.push((0..len).map(|_| content[rng.random_range(0..content.len())]).collect());
        }

        let mut lines = Vec::with_capacity(prefixes.len());
        for p in &prefixes {
            let mut parent = Arc::new(CtcForwardTable::root(v));
            let mut last = None;
            for &y in p {
                let o = tctc_prefix_score(&parent, y, &lattice, v, theta)?;
                parent = Arc::clone(&o.table);
                last = Some(o);
            }
            let o = last.ok_or_else(|| anyhow!("empty prefix"))?;
            let s_ctc = ctc_prefix_score(&LabelSequence::from_labels(v, p)?, &lattice, v)?;
            let gap = if s_ctc == o.score { 0.0 } else { s_ctc - o.score };
            let flagged = !(gap.abs() <= opts.gap_tolerance);
            lines.push(format!(
                "{},{:?},{:?},{},{},{:.6},{:?},{}",
                v.decode(p),
                s_ctc,
                o.score,
                o.endpoint,
                t_max,
                o.endpoint as f64 / t_max as f64,
                gap,
                u8::from(flagged)
            ));
        }
        let header = run.header(
            false,
            &[
                format!("utt={}", utt.id),
                format!("samples={}", opts.samples),
                format!("max_prefix_len={}", opts.max_prefix_len),
                format!("gap_tolerance={:e}", opts.gap_tolerance),
            ],
        );
        write_file(&run.out_dir.join(format!("{}.ctc.csv", utt.id)), |out| {
            comment_lines(out, &header)?;
            writeln!(out, "{COMPARE_CSV_HEADER}")?;
            for l in &lines {
                writeln!(out, "{l}")?;
            }
            Ok(())
        })
    })
}

/// One teacher-forced output step.
struct ForcedStep {
    /// Decoder state the step started from.
    q_prev: Vec<f64>,
    /// Dense weights over frames `1..=T`.
    weights: Vec<f64>,
}

/// Replays the attention decoder along `seq` on a closed stream.
fn teacher_force(
    model: &ToyModel,
    stream: &RepresentationStream,
    seq: &LabelSequence,
    settings: &Settings,
) -> Result<Vec<ForcedStep>> {
    let cfg = &settings.decode.attention;
    let t = stream.t_enc();
    let labels = seq.labels();
    let mut q = model.initial_state();
    let mut endpoint = 1;
    let mut prev_weights = None;
    let mut steps = Vec::with_capacity(labels.len().saturating_sub(1));
    for i in 1..labels.len() {
        let mut scan = AttentionScan::new(cfg, q.clone(), endpoint, prev_weights.take());
        let Poll::Ready(att) = scan.poll(stream, model.attention_params())? else {
            return Err(Error::Invariant(format!("attention scan pending on a closed stream at step {i}")).into());
        };
        let mut dense = vec![0.0; t];
        for (j, w) in att.frame_weights() {
            dense[j - 1] = w;
        }
        let (next, _) = model.decoder_step(&att.context, &q, labels[i - 1])?;
        endpoint = att.endpoint.unwrap_or(endpoint);
        if cfg.mechanism == Mechanism::Loaa {
            prev_weights = Some(att.weights);
        }
        steps.push(ForcedStep {
            q_prev: std::mem::replace(&mut q, next),
            weights: dense,
        });
    }
    Ok(steps)
}

fn dense_rows(rows: &[Vec<f64>]) -> Vec<WeightRow> {
    rows.iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().map(move |(j, &weight)| WeightRow {
                output_step: i + 1,
                frame: j + 1,
                weight,
            })
        })
        .collect()
}

pub fn dump_attention(
    manifest: &Path,
    output_dir: Option<PathBuf>,
    overrides: &Overrides,
    constant_p: Option<f64>,
    steps: Option<usize>,
) -> u8 {
    let run = match Run::prepare(manifest, output_dir, overrides) {
        Ok(r) => r,
        Err(e) => return report(&manifest.display().to_string(), &e),
    };
    let mech = run.settings.decode.attention.mechanism;
    if let Some(p) = constant_p {
        if !(p > 0.0 && p <= 1.0) {
            eprintln!("error: --constant-p must lie in (0, 1], got {p}");
            return EXIT_INPUT;
        }
        if mech == Mechanism::Loaa {
            eprintln!("error: --constant-p needs a monotonic attention mechanism");
            return EXIT_INPUT;
        }
    }
    let v = run.model.vocab();
    let cfg = &run.settings.decode;
    let params = run.model.attention_params();
    run.each(|_, utt| {
        let (stream, lattice) = run.encode(utt)?;
        let hyps = dwjd_decode(&stream, &lattice, &run.model, run.lm.as_ref(), v, cfg)?;
        let hyps = finalize_hypotheses(hyps, &lattice, v, cfg)?;
        let best = hyps.first().ok_or(Error::NoFinishedHypothesis(cfg.max_output_len))?;
        let forced = teacher_force(&run.model, &stream, &best.seq, &run.settings)?;
        let decode_rows: Vec<Vec<f64>> = forced.iter().map(|s| s.weights.clone()).collect();

        let t = stream.t_enc();
        let (p, u) = match constant_p {
            Some(c) => {
                let n = steps.unwrap_or(forced.len());
                (vec![vec![c; t]; n], vec![vec![0.0; t]; n])
            }
            None => {
                let n = steps.map_or(forced.len(), |s| s.min(forced.len()));
                let mut p = Vec::with_capacity(n);
                let mut u = Vec::with_capacity(n);
                for s in &forced[..n] {
                    let mono = StepEnergy::monotonic(&params.monotonic, &s.q_prev)?;
                    let chunk = StepEnergy::chunk(&params.chunk, &s.q_prev)?;
                    p.push(
                        stream
                            .frames()
                            .iter()
                            .map(|h| mono.eval(h).map(sigmoid))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                    u.push(
                        stream
                            .frames()
                            .iter()
                            .map(|h| chunk.eval(h))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                (p, u)
            }
        };
        let train_rows = match mech {
            Mechanism::Hma => hma_expectation(&p, &one_hot_init(t)),
            Mechanism::Mocha => mocha_expectation(&p, &u, &one_hot_init(t), cfg.attention.chunk_width),
            Mechanism::SMocha => smocha_expectation(&p),
            Mechanism::Mta => mta_train_weights(&p, stream.frames()).0,
            // global attention behaves the same in training and decoding
            Mechanism::Loaa => decode_rows.clone(),
        };

        let common = [
            format!("utt={}", utt.id),
            format!("hypothesis={}", v.decode(best.seq.labels())),
        ];
        let mut header = run.header(false, &common);
        header.push("mode=decode".into());
        write_file(&run.out_dir.join(format!("{}.decode.csv", utt.id)), |out| {
            write_weight_csv(out, &header, &dense_rows(&decode_rows))
        })?;
        let mut header = run.header(false, &common);
        header.push("mode=train".into());
        header.push(format!(
            "constant_p={}",
            constant_p.map_or("none".into(), |c| c.to_string())
        ));
        write_file(&run.out_dir.join(format!("{}.train.csv", utt.id)), |out| {
            write_weight_csv(out, &header, &dense_rows(&train_rows))
        })
    })
}

pub struct SynthOptions {
    pub out: PathBuf,
    pub utterances: usize,
    pub labels: usize,
    pub content_labels: usize,
    pub temperature: f64,
    pub encoded: bool,
    pub seed: u64,
}

pub fn synth(opts: &SynthOptions) -> u8 {
    match synth_inner(opts) {
        Ok(()) => 0,
        Err(e) => report("synth", &e),
    }
}

fn synth_inner(opts: &SynthOptions) -> Result<()> {
    ensure!(opts.utterances > 0, "--utterances must be positive");
    ensure!(opts.labels > 0, "--labels must be positive");
    ensure!(
        opts.labels <= opts.content_labels,
        "--labels ({}) cannot exceed --content-labels ({}); references use distinct labels",
        opts.labels,
        opts.content_labels
    );
    let toy = ToyConfig {
        content_labels: opts.content_labels,
        temperature: opts.temperature,
        ..ToyConfig::default()
    };
    let model = ToyModel::new(toy, opts.seed)?;
    let v = model.vocab();
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    fs::write(opts.out.join("vocab.txt"), v.to_file_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::with_capacity(opts.utterances);
    for k in 1..=opts.utterances {
        let id = format!("utt{k:03}");
        let utt = synth_utterance(&model, &mut rng, opts.labels, &FrameLayout::default())?;
        let mut entry = UtteranceEntry {
            id: id.clone(),
            reference: Some(v.decode(&utt.reference)),
            ..Default::default()
        };
        if opts.encoded {
            let enc = chunked_encode(&utt.raw, &Default::default(), &model)?;
            let (s, l) = (format!("{id}.stream"), format!("{id}.lattice"));
            fs::write(opts.out.join(&s), write_stream(enc.stream.dim(), enc.stream.frames()))?;
            fs::write(opts.out.join(&l), write_lattice(&enc.lattice))?;
            entry.stream = Some(s.into());
            entry.lattice = Some(l.into());
        } else {
            let r = format!("{id}.raw");
            let dim = utt.raw.first().map_or(model.dim(), Vec::len);
            fs::write(opts.out.join(&r), write_stream(dim, &utt.raw))?;
            entry.raw = Some(r.into());
        }
        entries.push(entry);
    }
    let manifest = RunManifest {
        seed: opts.seed,
        vocab: Some("vocab.txt".into()),
        output_dir: "out".into(),
        toy: ToySection {
            content_labels: Some(opts.content_labels),
            temperature: Some(opts.temperature),
            ..Default::default()
        },
        utterances: entries,
        ..Default::default()
    };
    let text = toml::to_string(&manifest).context("serializing manifest")?;
    fs::write(opts.out.join("manifest.toml"), text)?;
    Ok(())
}
