//! Tokenization, vocabulary construction, and the trainable sentence encoder.
//!
//! The encoder is a mean-pooled embedding bag followed by a linear projection
//! and L2 normalization. It is small enough to train on one CPU core in
//! seconds while exposing exact analytic gradients.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, l2_normalize, Matrix, Vector, EPS_NORM};

/// Lowercase and split on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// FNV-1a 64-bit hash. Fixed here so out-of-vocabulary bucket assignments
/// (and therefore checkpoints) are portable across implementations.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Token table with dense ids for known tokens and hashed bucket ids for the
/// rest. Known ids occupy `0..known_size`, bucket ids
/// `known_size..known_size + hash_buckets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    tokens: Vec<String>,
    hash_buckets: usize,
    min_count: usize,
}

impl Vocabulary {
    /// Rebuild a vocabulary from a known-token list in id order.
    pub fn from_tokens(tokens: Vec<String>, hash_buckets: usize, min_count: usize) -> Self {
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { token_to_id, tokens, hash_buckets, min_count }
    }

    pub fn known_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn total_size(&self) -> usize {
        self.tokens.len() + self.hash_buckets
    }

    pub fn hash_buckets(&self) -> usize {
        self.hash_buckets
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Dense id for known tokens; stable hashed bucket id otherwise.
    pub fn token_id(&self, token: &str) -> Result<usize> {
        if let Some(&id) = self.token_to_id.get(token) {
            return Ok(id);
        }
        if self.hash_buckets == 0 {
            return Err(Error::UnknownToken(token.to_owned()));
        }
        let bucket = fnv1a64(token.as_bytes()) % self.hash_buckets as u64;
        Ok(self.tokens.len() + bucket as usize)
    }
}

/// Build a vocabulary from a corpus. Tokens seen at least `min_count` times
/// receive dense ids in first-occurrence order.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_count: usize, hash_buckets: usize) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut ordered: Vec<Vec<String>> = Vec::with_capacity(corpus.len());
    for text in corpus {
        let toks = tokenize(text.as_ref());
        for t in &toks {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        ordered.push(toks);
    }
    let mut token_to_id = HashMap::new();
    let mut tokens = Vec::new();
    for toks in &ordered {
        for t in toks {
            if counts[t] >= min_count && !token_to_id.contains_key(t) {
                token_to_id.insert(t.clone(), tokens.len());
                tokens.push(t.clone());
            }
        }
    }
    Vocabulary { token_to_id, tokens, hash_buckets, min_count }
}

/// Trainable encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `vocab_total x d_emb`, one row per token id.
    pub embedding: Matrix,
    /// `d_emb x d_out`.
    pub projection: Matrix,
    /// Length `d_out`.
    pub bias: Vec<f64>,
    pub d_emb: usize,
    pub d_out: usize,
    /// Seed used at initialization, kept for checkpoint metadata.
    pub seed: u64,
}

impl EncoderParams {
    pub fn vocab_total(&self) -> usize {
        self.embedding.rows()
    }

    /// The weight tensors as little-endian `f32` bytes in fixed order:
    /// embedding table, projection, bias. This is the exact byte layout of a
    /// checkpoint's weight block.
    pub fn weights_le_bytes(&self) -> Vec<u8> {
        let n = self.embedding.as_slice().len() + self.projection.as_slice().len() + self.bias.len();
        let mut bytes = Vec::with_capacity(n * 4);
        for &v in self
            .embedding
            .as_slice()
            .iter()
            .chain(self.projection.as_slice())
            .chain(&self.bias)
        {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        bytes
    }

    /// Content fingerprint: FNV-1a 64 over the weight block bytes. Indexes
    /// record it so embeddings from a different checkpoint are rejected.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(&self.weights_le_bytes())
    }
}

/// Gradients (or any accumulator) with the same shapes as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embedding: Matrix,
    pub projection: Matrix,
    pub bias: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            embedding: Matrix::zeros(params.embedding.rows(), params.embedding.cols()),
            projection: Matrix::zeros(params.projection.rows(), params.projection.cols()),
            bias: vec![0.0; params.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self
            .embedding
            .as_mut_slice()
            .iter_mut()
            .zip(other.embedding.as_slice())
        {
            *a += b;
        }
        for (a, b) in self
            .projection
            .as_mut_slice()
            .iter_mut()
            .zip(other.projection.as_slice())
        {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.as_slice().iter().all(|v| v.is_finite())
            && self.projection.as_slice().iter().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite())
    }
}

/// Seeded initialization: embedding entries uniform in
/// `[-1/sqrt(d_emb), 1/sqrt(d_emb)]`, projection identity-padded, bias zero.
pub fn init_params(vocab_total: usize, d_emb: usize, d_out: usize, seed: u64) -> EncoderParams {
    assert!(d_emb >= 1 && d_out >= 1, "dimensions must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (d_emb as f64).sqrt();
    let mut embedding = Matrix::zeros(vocab_total, d_emb);
    for v in embedding.as_mut_slice() {
        *v = rng.gen_range(-bound..=bound);
    }
    let mut projection = Matrix::zeros(d_emb, d_out);
    for i in 0..d_emb.min(d_out) {
        projection.row_mut(i)[i] = 1.0;
    }
    EncoderParams {
        embedding,
        projection,
        bias: vec![0.0; d_out],
        d_emb,
        d_out,
        seed,
    }
}

fn token_ids(vocab: &Vocabulary, text: &str) -> Result<Vec<usize>> {
    tokenize(text).iter().map(|t| vocab.token_id(t)).collect()
}

/// Encode one text to a unit-norm vector of length `d_out`.
///
/// Pipeline: mean of embedding rows over (possibly repeated) token ids, then
/// linear projection plus bias, then L2 normalization.
pub fn encode(params: &EncoderParams, vocab: &Vocabulary, text: &str) -> Result<Vector> {
    let ids = token_ids(vocab, text)?;
    if ids.is_empty() {
        return Err(Error::EmptyInput(format!(
            "text produced no tokens: {text:?}"
        )));
    }
    let mut pooled = vec![0.0; params.d_emb];
    for &id in &ids {
        for (p, e) in pooled.iter_mut().zip(params.embedding.row(id)) {
            *p += e;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    for p in &mut pooled {
        *p *= inv;
    }

    let mut out = params.bias.clone();
    for (j, &vj) in pooled.iter().enumerate() {
        let proj_row = params.projection.row(j);
        for (o, w) in out.iter_mut().zip(proj_row) {
            *o += vj * w;
        }
    }
    l2_normalize(&out)
        .map_err(|_| Error::Degenerate(format!("encoded vector has norm <= {EPS_NORM:e}")))
}

fn encode_rows<S: AsRef<str>>(params: &EncoderParams, vocab: &Vocabulary, texts: &[S]) -> Vec<Result<Vector>> {
    texts
        .iter()
        .map(|t| encode(params, vocab, t.as_ref()))
        .collect()
}

#[cfg(feature = "parallel")]
fn encode_rows_par<S: AsRef<str> + Sync>(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: &[S],
) -> Vec<Result<Vector>> {
    texts
        .par_iter()
        .map(|t| encode(params, vocab, t.as_ref()))
        .collect()
}

fn rows_to_matrix(results: Vec<Result<Vector>>, d_out: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(results.len() * d_out);
    let rows = results.len();
    // Errors are surfaced in index order so failures are deterministic.
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => data.extend_from_slice(&v),
            Err(e) => {
                return Err(match e {
                    Error::EmptyInput(msg) => {
                        Error::EmptyInput(format!("batch index {i}: {msg}"))
                    }
                    Error::Degenerate(msg) => {
                        Error::Degenerate(format!("batch index {i}: {msg}"))
                    }
                    other => other,
                })
            }
        }
    }
    Matrix::from_vec(rows, d_out, data)
}

/// Encode a batch; row `i` equals `encode(texts[i])`.
///
/// Dispatches to the rayon implementation when the `parallel` feature is
/// enabled; both paths produce bit-identical matrices.
pub fn encode_batch<S: AsRef<str> + Sync>(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: &[S],
) -> Result<Matrix> {
    #[cfg(feature = "parallel")]
    {
        encode_batch_par(params, vocab, texts)
    }
    #[cfg(not(feature = "parallel"))]
    {
        encode_batch_seq(params, vocab, texts)
    }
}

/// Sequential batch encoding, always available.
pub fn encode_batch_seq<S: AsRef<str>>(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: &[S],
) -> Result<Matrix> {
    rows_to_matrix(encode_rows(params, vocab, texts), params.d_out)
}

/// Data-parallel batch encoding over batch elements.
#[cfg(feature = "parallel")]
pub fn encode_batch_par<S: AsRef<str> + Sync>(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: &[S],
) -> Result<Matrix> {
    rows_to_matrix(encode_rows_par(params, vocab, texts), params.d_out)
}

/// Exact gradients of `upstream · encode(text)` with respect to the encoder
/// parameters, including the normalization Jacobian `(I - ûûᵀ)/‖u‖`.
///
/// Embedding rows touched more than once accumulate one contribution per
/// occurrence; untouched rows stay zero.
pub fn encode_backward(
    params: &EncoderParams,
    vocab: &Vocabulary,
    text: &str,
    upstream: &[f64],
) -> Result<ParamGrads> {
    if upstream.len() != params.d_out {
        return Err(Error::Dimension(format!(
            "upstream length {} vs d_out {}",
            upstream.len(),
            params.d_out
        )));
    }
    let ids = token_ids(vocab, text)?;
    if ids.is_empty() {
        return Err(Error::EmptyInput(format!(
            "text produced no tokens: {text:?}"
        )));
    }

    // Forward pass, keeping intermediates.
    let mut pooled = vec![0.0; params.d_emb];
    for &id in &ids {
        for (p, e) in pooled.iter_mut().zip(params.embedding.row(id)) {
            *p += e;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    for p in &mut pooled {
        *p *= inv;
    }
    let mut u = params.bias.clone();
    for (j, &vj) in pooled.iter().enumerate() {
        let proj_row = params.projection.row(j);
        for (o, w) in u.iter_mut().zip(proj_row) {
            *o += vj * w;
        }
    }
    let norm = l2_norm(&u);
    if norm <= EPS_NORM {
        return Err(Error::Degenerate(format!(
            "encoded vector has norm <= {EPS_NORM:e}"
        )));
    }
    let unit: Vec<f64> = u.iter().map(|x| x / norm).collect();

    // d(upstream · û)/du = (upstream - (upstream·û) û) / ‖u‖
    let g_dot_unit = dot(upstream, &unit)?;
    let grad_u: Vec<f64> = upstream
        .iter()
        .zip(&unit)
        .map(|(g, uh)| (g - g_dot_unit * uh) / norm)
        .collect();

    let mut grads = ParamGrads::zeros_like(params);
    grads.bias.copy_from_slice(&grad_u);

    // projection[j][k] receives pooled[j] * grad_u[k]
    for (j, &vj) in pooled.iter().enumerate() {
        for (pg, gk) in grads.projection.row_mut(j).iter_mut().zip(&grad_u) {
            *pg = vj * gk;
        }
    }

    // grad wrt pooled vector: projection · grad_u
    let mut grad_pooled = vec![0.0; params.d_emb];
    for (j, gp) in grad_pooled.iter_mut().enumerate() {
        *gp = dot(params.projection.row(j), &grad_u)?;
    }

    // Each occurrence contributes grad_pooled / n to its embedding row.
    for &id in &ids {
        for (eg, gp) in grads.embedding.row_mut(id).iter_mut().zip(&grad_pooled) {
            *eg += gp * inv;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_difference_grad;

    #[test]
    fn tokenize_basic_question() {
        assert_eq!(
            tokenize("Who teaches this class?"),
            vec!["who", "teaches", "this", "class"]
        );
    }

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(tokenize("TA: Dr. O'Brien"), vec!["ta", "dr", "o", "brien"]);
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" .,;! ").is_empty());
    }

    #[test]
    fn fnv1a64_known_value() {
        // Reference value for the empty input is the offset basis; "a" is a
        // published test vector for FNV-1a 64.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn build_vocab_first_occurrence_order() {
        let v = build_vocab(&["a b", "a c"], 1, 0);
        assert_eq!(v.tokens(), &["a".to_string(), "b".into(), "c".into()]);
        assert_eq!(v.token_id("a").unwrap(), 0);
        assert_eq!(v.token_id("b").unwrap(), 1);
        assert_eq!(v.token_id("c").unwrap(), 2);
    }

    #[test]
    fn build_vocab_respects_min_count() {
        let v = build_vocab(&["a b", "a c"], 2, 4);
        assert_eq!(v.known_size(), 1);
        assert_eq!(v.token_id("a").unwrap(), 0);
        let b_id = v.token_id("b").unwrap();
        assert!((1..5).contains(&b_id));
    }

    #[test]
    fn build_vocab_is_deterministic() {
        let corpus = ["the quick brown fox", "jumps over the lazy dog"];
        assert_eq!(build_vocab(&corpus, 1, 16), build_vocab(&corpus, 1, 16));
    }

    #[test]
    fn vocab_id_token_round_trip() {
        let v = build_vocab(&["alpha beta gamma"], 1, 8);
        for id in 0..v.known_size() {
            let tok = v.token_of(id).unwrap();
            assert_eq!(v.token_id(tok).unwrap(), id);
        }
    }

    #[test]
    fn unknown_token_hashes_into_bucket_range() {
        let v = build_vocab(&["a b"], 1, 16);
        let id = v.token_id("zzz").unwrap();
        assert!(id >= v.known_size() && id < v.known_size() + 16);
        assert_eq!(id, v.token_id("zzz").unwrap());
    }

    #[test]
    fn unknown_token_without_buckets_errors() {
        let v = build_vocab(&["a b"], 1, 0);
        assert!(matches!(v.token_id("zzz"), Err(Error::UnknownToken(_))));
    }

    #[test]
    fn init_params_is_deterministic_and_bounded() {
        let a = init_params(10, 8, 8, 7);
        let b = init_params(10, 8, 8, 7);
        assert_eq!(a, b);
        let bound = 1.0 / 8.0f64.sqrt();
        assert!(a.embedding.as_slice().iter().all(|v| v.abs() <= bound));
        // square projection starts as the exact identity
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(a.projection.row(i)[j], expect);
            }
        }
        assert!(a.bias.iter().all(|v| *v == 0.0));
    }

    fn tiny_setup() -> (EncoderParams, Vocabulary) {
        let vocab = build_vocab(
            &["alpha beta gamma delta epsilon zeta eta theta iota kappa"],
            1,
            4,
        );
        let params = init_params(vocab.total_size(), 6, 6, 3);
        (params, vocab)
    }

    #[test]
    fn encode_single_token_is_normalized_row() {
        let (params, vocab) = tiny_setup();
        let id = vocab.token_id("alpha").unwrap();
        let expected = l2_normalize(params.embedding.row(id)).unwrap();
        let got = encode(&params, &vocab, "alpha").unwrap();
        for (a, b) in expected.iter().zip(got.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_mean_of_equal_rows_matches_single() {
        let (params, vocab) = tiny_setup();
        let one = encode(&params, &vocab, "beta").unwrap();
        let twice = encode(&params, &vocab, "beta beta").unwrap();
        for (a, b) in one.iter().zip(twice.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_empty_text_errors() {
        let (params, vocab) = tiny_setup();
        assert!(matches!(
            encode(&params, &vocab, ""),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn encode_output_is_unit_norm() {
        let (params, vocab) = tiny_setup();
        let v = encode(&params, &vocab, "alpha beta gamma unknown_word").unwrap();
        assert!((l2_norm(&v) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn encode_is_token_order_invariant() {
        let (params, vocab) = tiny_setup();
        let a = encode(&params, &vocab, "alpha beta gamma").unwrap();
        let b = encode(&params, &vocab, "gamma alpha beta").unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let (params, vocab) = tiny_setup();
        let a = encode(&params, &vocab, "alpha zeta kappa").unwrap();
        let b = encode(&params, &vocab, "alpha zeta kappa").unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn encode_batch_single_matches_encode() {
        let (params, vocab) = tiny_setup();
        let m = encode_batch(&params, &vocab, &["alpha beta"]).unwrap();
        let v = encode(&params, &vocab, "alpha beta").unwrap();
        assert_eq!(m.row(0), v.as_slice());
    }

    #[test]
    fn encode_batch_permutes_rows_with_inputs() {
        let (params, vocab) = tiny_setup();
        let texts = ["alpha", "beta gamma", "delta epsilon zeta"];
        let fwd = encode_batch(&params, &vocab, &texts).unwrap();
        let rev: Vec<&str> = texts.iter().rev().cloned().collect();
        let bwd = encode_batch(&params, &vocab, &rev).unwrap();
        for i in 0..3 {
            assert_eq!(fwd.row(i), bwd.row(2 - i));
        }
    }

    #[test]
    fn encode_batch_names_offending_index() {
        let (params, vocab) = tiny_setup();
        let err = encode_batch(&params, &vocab, &["alpha", "...", "beta"]).unwrap_err();
        match err {
            Error::EmptyInput(msg) => assert!(msg.contains("batch index 1"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn encode_batch_seq_par_agree() {
        let (params, vocab) = tiny_setup();
        let texts: Vec<String> = (0..32)
            .map(|i| format!("alpha beta gamma token{i}"))
            .collect();
        let seq = encode_batch_seq(&params, &vocab, &texts).unwrap();
        let dispatched = encode_batch(&params, &vocab, &texts).unwrap();
        assert_eq!(seq.as_slice(), dispatched.as_slice());
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let (params, vocab) = tiny_setup();
        let grads = encode_backward(&params, &vocab, "alpha beta", &vec![0.0; 6]).unwrap();
        assert!(grads.embedding.as_slice().iter().all(|v| *v == 0.0));
        assert!(grads.projection.as_slice().iter().all(|v| *v == 0.0));
        assert!(grads.bias.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_repeated_token_doubles_row_gradient() {
        // In "alpha alpha beta" the alpha row collects two occurrence
        // contributions and the beta row one, so alpha's gradient is exactly
        // twice beta's.
        let (params, vocab) = tiny_setup();
        let upstream: Vec<f64> = (0..6).map(|i| 0.3 * (i as f64 + 1.0)).collect();
        let grads = encode_backward(&params, &vocab, "alpha alpha beta", &upstream).unwrap();
        let a = vocab.token_id("alpha").unwrap();
        let b = vocab.token_id("beta").unwrap();
        for (ga, gb) in grads.embedding.row(a).iter().zip(grads.embedding.row(b)) {
            assert!((ga - 2.0 * gb).abs() < 1e-12, "{ga} vs 2*{gb}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (params, vocab) = tiny_setup();
        let text = "alpha beta gamma alpha oov1 oov2";
        let upstream: Vec<f64> = (0..6).map(|i| ((i as f64) * 0.77).sin()).collect();
        let grads = encode_backward(&params, &vocab, text, &upstream).unwrap();

        let flat_len = params.embedding.as_slice().len()
            + params.projection.as_slice().len()
            + params.bias.len();
        let mut x = Vec::with_capacity(flat_len);
        x.extend_from_slice(params.embedding.as_slice());
        x.extend_from_slice(params.projection.as_slice());
        x.extend_from_slice(&params.bias);

        let emb_len = params.embedding.as_slice().len();
        let proj_len = params.projection.as_slice().len();
        let rebuild = |x: &[f64]| EncoderParams {
            embedding: Matrix::from_vec(
                params.embedding.rows(),
                params.embedding.cols(),
                x[..emb_len].to_vec(),
            )
            .unwrap(),
            projection: Matrix::from_vec(
                params.projection.rows(),
                params.projection.cols(),
                x[emb_len..emb_len + proj_len].to_vec(),
            )
            .unwrap(),
            bias: x[emb_len + proj_len..].to_vec(),
            d_emb: params.d_emb,
            d_out: params.d_out,
            seed: params.seed,
        };
        let numeric = finite_difference_grad(
            |x| {
                let p = rebuild(x);
                let v = encode(&p, &vocab, text)?;
                dot(&upstream, &v)
            },
            &x,
            1e-5,
        )
        .unwrap();

        let mut analytic = Vec::with_capacity(flat_len);
        analytic.extend_from_slice(grads.embedding.as_slice());
        analytic.extend_from_slice(grads.projection.as_slice());
        analytic.extend_from_slice(&grads.bias);

        let scale = analytic
            .iter()
            .chain(&numeric)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-8);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(
                (a - n).abs() / scale <= 1e-4,
                "analytic {a} vs numeric {n} (scale {scale})"
            );
        }
    }
}
