//! Temporary probe for threshold headroom. Deleted before release.

use edu_embed::dataset::{generate_synthetic, SentencePair, SynthSpec};
use edu_embed::encoder::{build_vocab, encode_batch, init_params, EncoderParams, Vocabulary};
use edu_embed::numerics::dot;
use edu_embed::trainer::{train, LossKind, TrainConfig, TrainMode};

fn recall_at_1(params: &EncoderParams, vocab: &Vocabulary, pairs: &[SentencePair]) -> f64 {
    let anchors: Vec<&str> = pairs.iter().map(|p| p.anchor.as_str()).collect();
    let positives: Vec<&str> = pairs.iter().map(|p| p.positive.as_str()).collect();
    let a = encode_batch(params, vocab, &anchors).unwrap();
    let p = encode_batch(params, vocab, &positives).unwrap();
    let mut correct = 0;
    for i in 0..pairs.len() {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for j in 0..pairs.len() {
            let s = dot(a.row(i), p.row(j)).unwrap();
            if s > best.0 {
                best = (s, j);
            }
        }
        if best.1 == i {
            correct += 1;
        }
    }
    correct as f64 / pairs.len() as f64
}

fn labeled_stats(
    params: &EncoderParams,
    vocab: &Vocabulary,
    labeled: &[edu_embed::dataset::LabeledPair],
) -> (f64, f64, f64) {
    let lefts: Vec<&str> = labeled.iter().map(|p| p.sentence1.as_str()).collect();
    let rights: Vec<&str> = labeled.iter().map(|p| p.sentence2.as_str()).collect();
    let l = encode_batch(params, vocab, &lefts).unwrap();
    let r = encode_batch(params, vocab, &rights).unwrap();
    let mut mse = 0.0;
    let mut pos = (0.0, 0usize);
    let mut neg = (0.0, 0usize);
    for i in 0..labeled.len() {
        let c = dot(l.row(i), r.row(i)).unwrap();
        let e = c - f64::from(labeled[i].label);
        mse += e * e;
        if labeled[i].label == 1 {
            pos = (pos.0 + c, pos.1 + 1);
        } else {
            neg = (neg.0 + c, neg.1 + 1);
        }
    }
    (
        mse / labeled.len() as f64,
        pos.0 / pos.1 as f64,
        neg.0 / neg.1 as f64,
    )
}

#[test]
fn probe() {
    let corpus = generate_synthetic(&SynthSpec::new(42, 256, 64)).unwrap();
    let texts: Vec<String> = corpus
        .positive_pairs
        .iter()
        .flat_map(|p| [p.anchor.clone(), p.positive.clone()])
        .chain(
            corpus
                .labeled_pairs
                .iter()
                .flat_map(|p| [p.sentence1.clone(), p.sentence2.clone()]),
        )
        .collect();
    let vocab = build_vocab(&texts, 1, 1024);
    println!("vocab known={} total={}", vocab.known_size(), vocab.total_size());
    println!(
        "heldout paraphrases={} heldout labeled={}",
        corpus.fixtures.heldout_paraphrases.len(),
        corpus.fixtures.heldout_labeled.len()
    );

    let untrained = init_params(vocab.total_size(), 64, 64, 42);
    let r_untrained = recall_at_1(&untrained, &vocab, &corpus.fixtures.heldout_paraphrases);
    println!("untrained recall@1 = {r_untrained:.4}");

    // dual training per the efficacy criterion
    let mut dual_cfg = TrainConfig::for_mode(TrainMode::Dual);
    dual_cfg.peak_lr = 0.05;
    dual_cfg.seed = 42;
    let mut dual = untrained.clone();
    let t0 = std::time::Instant::now();
    let history = train(
        &mut dual,
        &vocab,
        &corpus.positive_pairs,
        Some(&corpus.labeled_pairs),
        &dual_cfg,
    )
    .unwrap();
    println!("dual training took {:?} ({} steps)", t0.elapsed(), history.len());

    let first_epoch: Vec<f64> = history
        .iter()
        .filter(|r| r.epoch == 0 && r.loss_kind == LossKind::Mnrl)
        .map(|r| r.loss)
        .collect();
    let last_epoch: Vec<f64> = history
        .iter()
        .filter(|r| r.epoch == dual_cfg.epochs - 1 && r.loss_kind == LossKind::Mnrl)
        .map(|r| r.loss)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "mnrl mean loss: first epoch {:.4}, last epoch {:.4}, ratio {:.4}",
        mean(&first_epoch),
        mean(&last_epoch),
        mean(&last_epoch) / mean(&first_epoch)
    );

    let r_dual = recall_at_1(&dual, &vocab, &corpus.fixtures.heldout_paraphrases);
    println!("dual recall@1 = {r_dual:.4}");

    // mnrl-only comparison with same seed/data/epochs
    let mut mnrl_cfg = TrainConfig::for_mode(TrainMode::MnrlOnly);
    mnrl_cfg.peak_lr = 0.05;
    mnrl_cfg.seed = 42;
    let mut mnrl = untrained.clone();
    train(&mut mnrl, &vocab, &corpus.positive_pairs, None, &mnrl_cfg).unwrap();
    let r_mnrl = recall_at_1(&mnrl, &vocab, &corpus.fixtures.heldout_paraphrases);
    println!("mnrl recall@1 = {r_mnrl:.4}");

    let (mse_dual, pos_dual, neg_dual) =
        labeled_stats(&dual, &vocab, &corpus.fixtures.heldout_labeled);
    let (mse_mnrl, pos_mnrl, neg_mnrl) =
        labeled_stats(&mnrl, &vocab, &corpus.fixtures.heldout_labeled);
    println!("dual: mse={mse_dual:.4} pos={pos_dual:.4} neg={neg_dual:.4} gap={:.4}", pos_dual - neg_dual);
    println!("mnrl: mse={mse_mnrl:.4} pos={pos_mnrl:.4} neg={neg_mnrl:.4} gap={:.4}", pos_mnrl - neg_mnrl);
}
