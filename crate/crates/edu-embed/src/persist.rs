//! Checkpoint and index serialization.
//!
//! Both artifacts are directories of JSON metadata plus raw little-endian
//! `f32` blocks, so they are portable across implementations and
//! byte-checkable in tests. All files are written atomically (temp file +
//! rename) and contain no timestamps, so reruns with identical inputs
//! produce identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{fnv1a64, EncoderParams, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::retrieval::{Chunk, ChunkIndex, IndexEntry};
use crate::trainer::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

const CHECKPOINT_META: &str = "meta.json";
const CHECKPOINT_VOCAB: &str = "vocab.txt";
const CHECKPOINT_WEIGHTS: &str = "weights.bin";

const INDEX_HEADER: &str = "header.json";
const INDEX_MANIFEST: &str = "manifest.jsonl";
const INDEX_EMBEDDINGS: &str = "embeddings.bin";

/// Write `bytes` to `path` via a temp file in the same directory plus rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.to_path_buf();
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Validation(format!("invalid path {path:?}")))?;
    tmp.set_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn f64s_to_le_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    bytes
}

fn le_bytes_to_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Corruption(format!(
            "weight block length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

/// Checkpoint metadata; the fingerprint is FNV-1a 64 over `weights.bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub d_emb: usize,
    pub d_out: usize,
    pub vocab_known_size: usize,
    pub hash_buckets: usize,
    pub vocab_min_count: usize,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    /// Hex-encoded FNV-1a 64 of the weight block.
    pub fingerprint: String,
}

/// Persist params + vocabulary as `meta.json`, `vocab.txt`, `weights.bin`.
pub fn save_checkpoint(
    params: &EncoderParams,
    vocab: &Vocabulary,
    train_config: Option<&TrainConfig>,
    dir: impl AsRef<Path>,
) -> Result<CheckpointMeta> {
    let dir = dir.as_ref();
    if params.vocab_total() != vocab.total_size() {
        return Err(Error::Dimension(format!(
            "embedding table rows {} vs vocabulary total {}",
            params.vocab_total(),
            vocab.total_size()
        )));
    }
    fs::create_dir_all(dir)?;
    let weights = params.weights_le_bytes();
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        d_emb: params.d_emb,
        d_out: params.d_out,
        vocab_known_size: vocab.known_size(),
        hash_buckets: vocab.hash_buckets(),
        vocab_min_count: vocab.min_count(),
        seed: params.seed,
        train_config: train_config.cloned(),
        fingerprint: format!("{:016x}", fnv1a64(&weights)),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    meta_json.push(b'\n');
    write_atomic(dir.join(CHECKPOINT_META), &meta_json)?;

    let mut vocab_txt = String::new();
    for token in vocab.tokens() {
        vocab_txt.push_str(token);
        vocab_txt.push('\n');
    }
    write_atomic(dir.join(CHECKPOINT_VOCAB), vocab_txt.as_bytes())?;
    write_atomic(dir.join(CHECKPOINT_WEIGHTS), &weights)?;
    Ok(meta)
}

/// Load a checkpoint, verifying format version, tensor sizes, and the weight
/// fingerprint.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(EncoderParams, Vocabulary, CheckpointMeta)> {
    let dir = dir.as_ref();
    let meta_text = fs::read_to_string(dir.join(CHECKPOINT_META))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Corruption(format!("meta.json: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Version { found: meta.format_version, supported: FORMAT_VERSION });
    }

    let vocab_text = fs::read_to_string(dir.join(CHECKPOINT_VOCAB))?;
    let tokens: Vec<String> = vocab_text.lines().map(str::to_owned).collect();
    if tokens.len() != meta.vocab_known_size {
        return Err(Error::Corruption(format!(
            "vocab.txt has {} tokens, meta says {}",
            tokens.len(),
            meta.vocab_known_size
        )));
    }
    let vocab = Vocabulary::from_tokens(tokens, meta.hash_buckets, meta.vocab_min_count);

    let weights = fs::read(dir.join(CHECKPOINT_WEIGHTS))?;
    let fingerprint = format!("{:016x}", fnv1a64(&weights));
    if fingerprint != meta.fingerprint {
        return Err(Error::Corruption(format!(
            "weights fingerprint {fingerprint} does not match recorded {}",
            meta.fingerprint
        )));
    }
    let vocab_total = meta.vocab_known_size + meta.hash_buckets;
    let expected = 4 * (vocab_total * meta.d_emb + meta.d_emb * meta.d_out + meta.d_out);
    if weights.len() != expected {
        return Err(Error::Corruption(format!(
            "weights.bin is {} bytes, expected {expected}",
            weights.len()
        )));
    }
    let values = le_bytes_to_f64s(&weights)?;
    let emb_len = vocab_total * meta.d_emb;
    let proj_len = meta.d_emb * meta.d_out;
    let params = EncoderParams {
        embedding: Matrix::from_vec(vocab_total, meta.d_emb, values[..emb_len].to_vec())?,
        projection: Matrix::from_vec(
            meta.d_emb,
            meta.d_out,
            values[emb_len..emb_len + proj_len].to_vec(),
        )?,
        bias: values[emb_len + proj_len..].to_vec(),
        d_emb: meta.d_emb,
        d_out: meta.d_out,
        seed: meta.seed,
    };
    Ok((params, vocab, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexHeader {
    format_version: u32,
    dim: usize,
    max_words: usize,
    /// Hex-encoded fingerprint of the checkpoint that built the index.
    encoder_fingerprint: String,
    entry_count: usize,
    skipped_chunks: usize,
}

/// Persist an index as `header.json`, `manifest.jsonl` (chunk metadata in
/// entry order), and `embeddings.bin` (row-major little-endian `f32`).
pub fn save_index(index: &ChunkIndex, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let header = IndexHeader {
        format_version: FORMAT_VERSION,
        dim: index.dim(),
        max_words: index.max_words(),
        encoder_fingerprint: format!("{:016x}", index.fingerprint()),
        entry_count: index.len(),
        skipped_chunks: index.skipped_chunks(),
    };
    let mut header_json = serde_json::to_vec_pretty(&header).expect("header serializes");
    header_json.push(b'\n');
    write_atomic(dir.join(INDEX_HEADER), &header_json)?;

    let mut manifest = String::new();
    for entry in index.entries() {
        manifest.push_str(&serde_json::to_string(&entry.chunk).expect("chunks serialize"));
        manifest.push('\n');
    }
    write_atomic(dir.join(INDEX_MANIFEST), manifest.as_bytes())?;

    let block = f64s_to_le_bytes(
        index
            .entries()
            .iter()
            .flat_map(|e| e.embedding.iter().copied()),
    );
    write_atomic(dir.join(INDEX_EMBEDDINGS), &block)?;
    Ok(())
}

/// Load an index, verifying version and block size.
pub fn load_index(dir: impl AsRef<Path>) -> Result<ChunkIndex> {
    let dir = dir.as_ref();
    let header_text = fs::read_to_string(dir.join(INDEX_HEADER))?;
    let header: IndexHeader = serde_json::from_str(&header_text)
        .map_err(|e| Error::Corruption(format!("header.json: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Version { found: header.format_version, supported: FORMAT_VERSION });
    }
    let fingerprint = u64::from_str_radix(&header.encoder_fingerprint, 16)
        .map_err(|e| Error::Corruption(format!("bad fingerprint: {e}")))?;

    let manifest_text = fs::read_to_string(dir.join(INDEX_MANIFEST))?;
    let mut chunks = Vec::with_capacity(header.entry_count);
    for (i, line) in manifest_text.lines().enumerate() {
        let chunk: Chunk = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        chunks.push(chunk);
    }
    if chunks.len() != header.entry_count {
        return Err(Error::Corruption(format!(
            "manifest has {} entries, header says {}",
            chunks.len(),
            header.entry_count
        )));
    }

    let block = fs::read(dir.join(INDEX_EMBEDDINGS))?;
    let expected = 4 * header.entry_count * header.dim;
    if block.len() != expected {
        return Err(Error::Corruption(format!(
            "embeddings.bin is {} bytes, expected {expected}",
            block.len()
        )));
    }
    let values = le_bytes_to_f64s(&block)?;
    let entries = chunks
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| {
            let row = values[i * header.dim..(i + 1) * header.dim].to_vec();
            Ok(IndexEntry { chunk, embedding: Vector::new(row)? })
        })
        .collect::<Result<Vec<_>>>()?;
    ChunkIndex::new(
        entries,
        header.dim,
        fingerprint,
        header.max_words,
        header.skipped_chunks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_vocab, init_params};
    use crate::retrieval::build_index;
    use crate::trainer::{TrainConfig, TrainMode};

    fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
        names.iter().map(|n| fs::read(dir.join(n)).unwrap()).collect()
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta gamma delta"], 1, 8);
        let params = init_params(vocab.total_size(), 4, 4, 11);
        let cfg = TrainConfig::for_mode(TrainMode::Dual);

        let dir_a = tmp.path().join("a");
        save_checkpoint(&params, &vocab, Some(&cfg), &dir_a).unwrap();
        let (loaded_params, loaded_vocab, meta) = load_checkpoint(&dir_a).unwrap();
        assert_eq!(loaded_vocab, vocab);
        assert_eq!(meta.train_config.as_ref(), Some(&cfg));

        let dir_b = tmp.path().join("b");
        save_checkpoint(&loaded_params, &loaded_vocab, Some(&cfg), &dir_b).unwrap();
        let names = [CHECKPOINT_META, CHECKPOINT_VOCAB, CHECKPOINT_WEIGHTS];
        assert_eq!(read_all(&dir_a, &names), read_all(&dir_b, &names));
    }

    #[test]
    fn checkpoint_weights_size_matches_arithmetic() {
        let tmp = tempfile::tempdir().unwrap();
        let tokens: Vec<String> = (0..200).map(|i| format!("tok{i}")).collect();
        let vocab = Vocabulary::from_tokens(tokens, 1024, 1);
        let params = init_params(vocab.total_size(), 64, 64, 0);
        save_checkpoint(&params, &vocab, None, tmp.path()).unwrap();
        let len = fs::metadata(tmp.path().join(CHECKPOINT_WEIGHTS)).unwrap().len();
        assert_eq!(len, 4 * (1224 * 64 + 64 * 64 + 64));
    }

    #[test]
    fn truncated_weights_is_corruption_error() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta"], 1, 4);
        let params = init_params(vocab.total_size(), 4, 4, 1);
        save_checkpoint(&params, &vocab, None, tmp.path()).unwrap();
        let weights_path = tmp.path().join(CHECKPOINT_WEIGHTS);
        let bytes = fs::read(&weights_path).unwrap();
        fs::write(&weights_path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(tmp.path()), Err(Error::Corruption(_))));
    }

    #[test]
    fn tampered_weights_fail_fingerprint() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta"], 1, 4);
        let params = init_params(vocab.total_size(), 4, 4, 1);
        save_checkpoint(&params, &vocab, None, tmp.path()).unwrap();
        let weights_path = tmp.path().join(CHECKPOINT_WEIGHTS);
        let mut bytes = fs::read(&weights_path).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&weights_path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(tmp.path()), Err(Error::Corruption(_))));
    }

    #[test]
    fn unknown_format_version_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta"], 1, 4);
        let params = init_params(vocab.total_size(), 4, 4, 1);
        save_checkpoint(&params, &vocab, None, tmp.path()).unwrap();
        let meta_path = tmp.path().join(CHECKPOINT_META);
        let text = fs::read_to_string(&meta_path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        fs::write(&meta_path, text).unwrap();
        assert!(matches!(
            load_checkpoint(tmp.path()),
            Err(Error::Version { found: 99, .. })
        ));
    }

    #[test]
    fn index_round_trip_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta gamma delta epsilon"], 1, 8);
        let params = init_params(vocab.total_size(), 4, 4, 3);
        let docs = vec![
            ("d1".to_string(), "alpha beta gamma delta epsilon alpha beta".to_string()),
            ("d2".to_string(), "gamma delta".to_string()),
        ];
        let index = build_index(&docs, &params, &vocab, 3).unwrap();

        let dir_a = tmp.path().join("a");
        save_index(&index, &dir_a).unwrap();
        let loaded = load_index(&dir_a).unwrap();
        assert_eq!(loaded.len(), index.len());
        assert_eq!(loaded.fingerprint(), index.fingerprint());

        let dir_b = tmp.path().join("b");
        save_index(&loaded, &dir_b).unwrap();
        let names = [INDEX_HEADER, INDEX_MANIFEST, INDEX_EMBEDDINGS];
        assert_eq!(read_all(&dir_a, &names), read_all(&dir_b, &names));
    }

    #[test]
    fn index_block_size_mismatch_is_corruption() {
        let tmp = tempfile::tempdir().unwrap();
        let vocab = build_vocab(&["alpha beta"], 1, 4);
        let params = init_params(vocab.total_size(), 4, 4, 3);
        let docs = vec![("d".to_string(), "alpha beta".to_string())];
        let index = build_index(&docs, &params, &vocab, 300).unwrap();
        save_index(&index, tmp.path()).unwrap();
        let path = tmp.path().join(INDEX_EMBEDDINGS);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_index(tmp.path()), Err(Error::Corruption(_))));
    }

    #[test]
    fn write_atomic_overwrites_in_place() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("x.bin");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        // no temp files left behind
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    }
}
