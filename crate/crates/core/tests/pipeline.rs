mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use streamdec_core::attention::Mechanism;
use streamdec_core::dwjd::{decode_threaded, dwjd_decode, finalize_hypotheses, BigramLm, FrameMessage, UniformLm};
use streamdec_core::formats::{
    read_hypotheses, read_lattice, read_stream, write_hypotheses, write_lattice, write_stream,
};
use streamdec_core::metrics::error_rate;
use streamdec_core::sim::{measure_rtf, ArrivalMode, StreamingConfig, ToyConfig, ToyModel};
use streamdec_core::{Error, PosteriorLattice, RepresentationStream};

use common::{decode_cfg, fingerprint, toy_utterance};

#[test]
fn threaded_producer_matches_upfront() {
    let model = ToyModel::new(ToyConfig::default(), 31).unwrap();
    let v = model.vocab();
    let lm = UniformLm::new(v);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (_, enc) = toy_utterance(&model, &mut rng, 5);
    for mech in [
        Mechanism::Hma,
        Mechanism::Mocha,
        Mechanism::SMocha,
        Mechanism::Mta,
        Mechanism::Loaa,
    ] {
        let cfg = decode_cfg(mech, 4);
        let upfront = dwjd_decode(&enc.stream, &enc.lattice, &model, &lm, v, &cfg).unwrap();
        let frames: Vec<_> = enc
            .stream
            .frames()
            .iter()
            .cloned()
            .zip(enc.lattice.frames().iter().cloned())
            .collect();
        let out = decode_threaded(&model, &lm, v, &cfg, model.dim(), move |tx| {
            for (h, posterior) in frames {
                tx.send(FrameMessage::Frame { h, posterior }).unwrap();
                std::thread::yield_now();
            }
            tx.send(FrameMessage::End).unwrap();
        })
        .unwrap();
        assert_eq!(fingerprint(&upfront), fingerprint(&out.hypotheses), "{mech:?}");
        assert_eq!(out.stream.t_enc(), enc.stream.t_enc());
    }
}

#[test]
fn producer_hangup_ends_input() {
    let model = ToyModel::new(ToyConfig::default(), 2).unwrap();
    let v = model.vocab();
    let lm = UniformLm::new(v);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (utt, enc) = toy_utterance(&model, &mut rng, 3);
    let frames: Vec<_> = enc
        .stream
        .frames()
        .iter()
        .cloned()
        .zip(enc.lattice.frames().iter().cloned())
        .collect();
    let out = decode_threaded(&model, &lm, v, &decode_cfg(Mechanism::Mta, 4), model.dim(), move |tx| {
        for (h, posterior) in frames {
            tx.send(FrameMessage::Frame { h, posterior }).unwrap();
        }
    })
    .unwrap();
    assert_eq!(out.hypotheses[0].seq.content(v), &utt.reference[..]);
}

#[test]
fn open_input_reports_missing_frame() {
    let model = ToyModel::new(ToyConfig::default(), 4).unwrap();
    let v = model.vocab();
    let lm = UniformLm::new(v);
    let stream = RepresentationStream::new(model.dim());
    let lat = PosteriorLattice::new(v.len());
    let err = dwjd_decode(&stream, &lat, &model, &lm, v, &decode_cfg(Mechanism::Mta, 4)).unwrap_err();
    assert!(matches!(err, Error::FrameUnavailable(1)));
}

#[test]
fn toy_decodes_are_accurate() {
    let model = ToyModel::new(ToyConfig::default(), 77).unwrap();
    let v = model.vocab();
    let lm = UniformLm::new(v);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut errors = 0.0;
    for _ in 0..20 {
        let (utt, enc) = toy_utterance(&model, &mut rng, 6);
        let cfg = decode_cfg(Mechanism::Mta, 8);
        let hyps = dwjd_decode(&enc.stream, &enc.lattice, &model, &lm, v, &cfg).unwrap();
        let best = finalize_hypotheses(hyps, &enc.lattice, v, &cfg).unwrap();
        errors += error_rate(&utt.reference, best[0].seq.content(v)).unwrap();
    }
    assert!(errors / 20.0 < 0.05, "mean error rate {}", errors / 20.0);
}

#[test]
fn bigram_lm_fuses_without_breaking_search() {
    let model = ToyModel::new(ToyConfig::default(), 8).unwrap();
    let v = model.vocab();
    let lm = BigramLm::train("a b c\nb c d\na c e f\n", v, BigramLm::DEFAULT_DISCOUNT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (utt, enc) = toy_utterance(&model, &mut rng, 4);
    let mut cfg = decode_cfg(Mechanism::SMocha, 6);
    cfg.beta = 0.3;
    let hyps = dwjd_decode(&enc.stream, &enc.lattice, &model, &lm, v, &cfg).unwrap();
    let best = finalize_hypotheses(hyps, &enc.lattice, v, &cfg).unwrap();
    assert_eq!(best[0].seq.content(v), &utt.reference[..]);
    assert!(best[0].s_lm < 0.0);
}

#[test]
fn files_round_trip_through_decoding() {
    let model = ToyModel::new(ToyConfig::default(), 12).unwrap();
    let v = model.vocab();
    let lm = UniformLm::new(v);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (_, enc) = toy_utterance(&model, &mut rng, 4);
    let stream = read_stream(&write_stream(enc.stream.dim(), enc.stream.frames())).unwrap();
    let lattice = read_lattice(&write_lattice(&enc.lattice)).unwrap();
    assert_eq!(stream.frames(), enc.stream.frames());
    assert_eq!(lattice.frames(), enc.lattice.frames());

    let cfg = decode_cfg(Mechanism::Mta, 4);
    let hyps = dwjd_decode(&stream, &lattice, &model, &lm, v, &cfg).unwrap();
    let hyps = finalize_hypotheses(hyps, &lattice, v, &cfg).unwrap();
    let text = write_hypotheses(&hyps, v);
    let records = read_hypotheses(&text, v).unwrap();
    assert_eq!(records.len(), hyps.len());
    for (r, h) in records.iter().zip(&hyps) {
        assert_eq!(r.labels, h.seq);
        assert_eq!(r.combined.to_bits(), h.s_combined.to_bits());
        assert_eq!(r.s_ctc.to_bits(), h.s_ctc.unwrap().to_bits());
    }
    assert_eq!(records[0].rank, 1);
}

#[test]
fn streaming_rtf_does_not_exceed_offline() {
    // arrival dominates compute here, so only the direction is checked
    let model = ToyModel::new(ToyConfig::default(), 40).unwrap();
    let lm = UniformLm::new(model.vocab());
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let (utt, _) = toy_utterance(&model, &mut rng, 8);
    let s = StreamingConfig::default();
    let cfg = decode_cfg(Mechanism::Mta, 8);
    let stream = measure_rtf(&model, &lm, &utt.raw, &s, &cfg, ArrivalMode::Streaming).unwrap();
    let offline = measure_rtf(&model, &lm, &utt.raw, &s, &cfg, ArrivalMode::Offline).unwrap();
    assert!(stream.report.rtf <= offline.report.rtf + 0.05);
    assert!(stream.report.rtf > 0.0 && offline.report.rtf > 0.0);
    assert_eq!(
        fingerprint(&stream.output.hypotheses),
        fingerprint(&offline.output.hypotheses)
    );
}
