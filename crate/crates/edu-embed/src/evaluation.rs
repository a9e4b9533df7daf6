//! Category benchmark: per-document retrieval, answer generation (remote
//! chat-completion endpoint or deterministic extractive fallback), automated
//! valid/invalid grading against gold facts, and retrieval-only metrics.

use std::collections::HashSet;
use std::time::Duration;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{tokenize, EncoderParams, Vocabulary};
use crate::error::{Error, NetworkError, Result};
use crate::retrieval::{assemble_context, top_k, ChunkIndex, RetrievalHit};

/// Environment variable holding the API key for the remote backend.
pub const API_KEY_ENV: &str = "EDU_EMBED_API_KEY";

/// System prompt sent to the remote backend, fixed so runs are comparable.
pub const ANSWER_SYSTEM_PROMPT: &str = "Answer strictly from the provided context. If the \
context does not contain the answer, reply exactly: Sorry, I don't know.";

/// The canonical refusal answer for facts a document does not contain.
pub const REFUSAL_ANSWER: &str = "Sorry, I don't know";

/// Question categories of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CourseInfo,
    FacultyInfo,
    TaInfo,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::CourseInfo, Category::FacultyInfo, Category::TaInfo];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::CourseInfo => "course_info",
            Category::FacultyInfo => "faculty_info",
            Category::TaInfo => "ta_info",
        }
    }
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub category: Category,
    pub question: String,
}

/// The benchmark question set; defaults to the built-in ten questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionSet {
    pub entries: Vec<Question>,
}

impl Default for QuestionSet {
    fn default() -> Self {
        let q = |category, question: &str| Question { category, question: question.to_owned() };
        Self {
            entries: vec![
                q(Category::CourseInfo, "How many credit hours is this course worth?"),
                q(Category::CourseInfo, "What are the semester hours for this course?"),
                q(Category::CourseInfo, "What is the credit hour value of this course?"),
                q(Category::FacultyInfo, "What is the name of the instructor?"),
                q(Category::FacultyInfo, "What is the professor's name?"),
                q(Category::FacultyInfo, "What is the lecturer's name?"),
                q(Category::TaInfo, "What is the name of the TA?"),
                q(Category::TaInfo, "What are the TA's name?"),
                q(Category::TaInfo, "What is the name of the Teaching Assistant?"),
                q(Category::TaInfo, "What are the Teaching Assistant's name?"),
            ],
        }
    }
}

impl QuestionSet {
    /// Parse a JSON-lines question file (`{"category": ..., "question": ...}`).
    pub fn from_jsonl(content: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let q: Question = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(q);
        }
        if entries.is_empty() {
            return Err(Error::Validation("question set is empty".into()));
        }
        Ok(Self { entries })
    }
}

/// Acceptable answer strings per document and category. `None` encodes that
/// the document genuinely lacks the fact; an empty list is invalid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub doc_id: String,
    pub credit_hours: Option<Vec<String>>,
    pub instructor: Vec<String>,
    pub ta: Option<Vec<String>>,
}

impl GoldRecord {
    pub fn field(&self, category: Category) -> Option<&[String]> {
        match category {
            Category::CourseInfo => self.credit_hours.as_deref(),
            Category::FacultyInfo => Some(&self.instructor),
            Category::TaInfo => self.ta.as_deref(),
        }
    }
}

/// Parse and validate a gold file (a JSON array of records).
pub fn parse_gold(content: &str) -> Result<Vec<GoldRecord>> {
    let records: Vec<GoldRecord> =
        serde_json::from_str(content).map_err(|e| Error::Validation(format!("gold file: {e}")))?;
    for r in &records {
        for (name, field) in [
            ("credit_hours", r.credit_hours.as_deref()),
            ("instructor", Some(r.instructor.as_slice())),
            ("ta", r.ta.as_deref()),
        ] {
            if let Some(alts) = field {
                if alts.is_empty() || alts.iter().any(|a| a.trim().is_empty()) {
                    return Err(Error::Validation(format!(
                        "gold record {:?}: field {name} must be absent (null) or a nonempty list",
                        r.doc_id
                    )));
                }
            }
        }
    }
    Ok(records)
}

/// Lowercase, strip punctuation, collapse whitespace.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Binary grading verdict; `Errored` marks cells whose backend failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
    Errored,
}

/// Grade an answer against the gold alternatives for one field.
///
/// With gold absent, the answer is valid exactly when it contains a refusal
/// marker; with gold present, when any alternative's normalization is a
/// substring of the normalized answer.
pub fn grade_answer(answer: &str, gold: Option<&[String]>) -> Verdict {
    grade_answer_with_markers(answer, gold, &[REFUSAL_ANSWER])
}

/// [`grade_answer`] with configurable refusal markers.
pub fn grade_answer_with_markers(
    answer: &str,
    gold: Option<&[String]>,
    refusal_markers: &[&str],
) -> Verdict {
    let norm = normalize(answer);
    let valid = match gold {
        None => refusal_markers.iter().any(|m| norm.contains(&normalize(m))),
        Some(alts) => alts.iter().any(|a| norm.contains(&normalize(a))),
    };
    if valid {
        Verdict::Valid
    } else {
        Verdict::Invalid
    }
}

/// Retrieval outcome for one gold-present cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub hit: bool,
    /// 1-based rank of the first gold-bearing chunk, if any.
    pub first_gold_rank: Option<usize>,
}

/// Whether any retrieved chunk contains a gold alternative, and at what rank.
pub fn retrieval_hit(hits: &[RetrievalHit<'_>], gold: &[String]) -> RetrievalOutcome {
    let gold_norm: Vec<String> = gold.iter().map(|g| normalize(g)).collect();
    for hit in hits {
        let text = normalize(&hit.chunk.text);
        if gold_norm.iter().any(|g| text.contains(g)) {
            return RetrievalOutcome { hit: true, first_gold_rank: Some(hit.rank) };
        }
    }
    RetrievalOutcome { hit: false, first_gold_rank: None }
}

// ---------------------------------------------------------------------------
// Answer backends
// ---------------------------------------------------------------------------

/// Configuration for the remote chat-completion backend.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), model: model.into(), timeout: Duration::from_secs(30) }
    }
}

/// Answer-generation stage: remote endpoint or deterministic extractive
/// fallback. The extractive backend keeps the whole benchmark offline.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Extractive,
    Remote(RemoteConfig),
}

// Question words that carry no content for sentence matching.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "what", "who", "when", "where", "which",
    "how", "many", "much", "this", "that", "these", "those", "of", "for", "to", "in", "on", "at",
    "by", "with", "do", "does", "did", "can", "could", "will", "would", "should", "s", "it",
    "its", "i", "my", "and", "or",
];

// Domain synonym groups used when matching question tokens against context
// sentences; a content token expands to its whole group.
const SYNONYM_GROUPS: &[&[&str]] = &[
    &["instructor", "professor", "lecturer", "teacher"],
    &["ta", "teaching", "assistant"],
    &["credit", "credits", "hour", "hours", "semester", "unit", "units", "worth", "value"],
];

fn content_tokens(question: &str) -> HashSet<String> {
    tokenize(question)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn expand_synonyms(tokens: &HashSet<String>) -> HashSet<String> {
    let mut expanded = tokens.clone();
    for group in SYNONYM_GROUPS {
        if group.iter().any(|w| tokens.contains(*w)) {
            expanded.extend(group.iter().map(|w| (*w).to_owned()));
        }
    }
    expanded
}

// Titles whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &["dr", "prof", "mr", "mrs", "ms"];

fn ends_with_abbreviation(text: &str) -> bool {
    let word: String = text
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .chars()
        .rev()
        .collect::<String>()
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn split_sentences(context: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    for (i, c) in context.char_indices() {
        let boundary = match c {
            '!' | '?' | '\n' => true,
            '.' => !ends_with_abbreviation(&context[..i]),
            _ => false,
        };
        if boundary {
            sentences.push(&context[start..i]);
            start = i + c.len_utf8();
        }
    }
    sentences.push(&context[start..]);
    sentences
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Deterministic fallback: the context sentence with maximal token overlap
/// against the question's (synonym-expanded) content tokens; ties go to the
/// earliest sentence, zero overlap yields the refusal answer.
pub fn extractive_answer(context: &str, question: &str) -> String {
    let targets = expand_synonyms(&content_tokens(question));
    let mut best: Option<(usize, &str)> = None;
    for sentence in split_sentences(context) {
        let overlap = tokenize(sentence)
            .into_iter()
            .collect::<HashSet<_>>()
            .intersection(&targets)
            .count();
        if overlap > 0 && best.is_none_or(|(b, _)| overlap > b) {
            best = Some((overlap, sentence));
        }
    }
    match best {
        Some((_, sentence)) => format!("{sentence}."),
        None => REFUSAL_ANSWER.to_owned(),
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
}

fn remote_answer(cfg: &RemoteConfig, context: &str, question: &str) -> Result<String> {
    let api_key = std::env::var(API_KEY_ENV)
        .map_err(|_| Error::Config(format!("environment variable {API_KEY_ENV} is not set")))?;
    let user = format!("{context}\n\nQuestion: {question}");
    let body = ChatRequest {
        model: &cfg.model,
        messages: vec![
            ChatMessage { role: "system", content: ANSWER_SYSTEM_PROMPT },
            ChatMessage { role: "user", content: &user },
        ],
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(cfg.timeout)
        .build()
        .map_err(|e| NetworkError::Transport(e.to_string()))?;
    let response = client
        .post(&cfg.endpoint)
        .bearer_auth(api_key)
        .json(&body)
        .send()
        .map_err(|e| {
            if e.is_timeout() {
                NetworkError::Timeout(e.to_string())
            } else {
                NetworkError::Transport(e.to_string())
            }
        })?;
    let status = response.status();
    let text = response
        .text()
        .map_err(|e| NetworkError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(NetworkError::Status { code: status.as_u16(), body: text }.into());
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| NetworkError::Malformed(e.to_string()))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| {
            NetworkError::Malformed("response lacks choices[0].message.content".into())
        })?;
    Ok(content.trim().to_owned())
}

/// Produce an answer for a question given retrieved context.
pub fn generate_answer(backend: &Backend, context: &str, question: &str) -> Result<String> {
    if question.trim().is_empty() {
        return Err(Error::EmptyInput("question is empty".into()));
    }
    match backend {
        Backend::Extractive => Ok(extractive_answer(context, question)),
        Backend::Remote(cfg) => remote_answer(cfg, context, question),
    }
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

/// Reference to a retrieved chunk in a trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHit {
    pub doc_id: String,
    pub chunk_index: usize,
    pub score: f64,
    pub rank: usize,
}

/// Full record of one `(document, question)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCell {
    pub doc_id: String,
    pub category: Category,
    pub question_index: usize,
    pub question: String,
    pub retrieved: Vec<TraceHit>,
    pub answer: Option<String>,
    pub verdict: Verdict,
    pub gold_present: bool,
    pub first_gold_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Retrieval metrics over the gold-present cells of one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub eligible_cells: usize,
    pub hit_at_k: f64,
    pub recall_at_1: f64,
    pub mrr: f64,
}

/// Per-category accuracy and retrieval metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: Category,
    pub cells: usize,
    pub valid: usize,
    pub accuracy: f64,
    pub retrieval: RetrievalSummary,
}

/// Benchmark output: summary plus per-cell traces (written separately as
/// JSON lines, hence skipped during summary serialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub k: usize,
    pub total_cells: usize,
    pub errored_cells: usize,
    pub categories: Vec<CategorySummary>,
    #[serde(skip, default)]
    pub traces: Vec<TraceCell>,
}

fn run_cell(
    index: &ChunkIndex,
    params: &EncoderParams,
    vocab: &Vocabulary,
    backend: &Backend,
    k: usize,
    gold: &GoldRecord,
    question_index: usize,
    question: &Question,
) -> TraceCell {
    let field = gold.field(question.category);
    let base = TraceCell {
        doc_id: gold.doc_id.clone(),
        category: question.category,
        question_index,
        question: question.question.clone(),
        retrieved: Vec::new(),
        answer: None,
        verdict: Verdict::Errored,
        gold_present: field.is_some(),
        first_gold_rank: None,
        error: None,
    };

    let hits = match top_k(index, params, vocab, &question.question, k, Some(&gold.doc_id)) {
        Ok(h) => h,
        Err(e) => return TraceCell { error: Some(e.to_string()), ..base },
    };
    let retrieved: Vec<TraceHit> = hits
        .iter()
        .map(|h| TraceHit {
            doc_id: h.chunk.doc_id.clone(),
            chunk_index: h.chunk.chunk_index,
            score: h.score,
            rank: h.rank,
        })
        .collect();
    let outcome = field.map(|g| retrieval_hit(&hits, g));
    let context = assemble_context(&hits);

    match generate_answer(backend, &context, &question.question) {
        Ok(answer) => {
            let verdict = grade_answer(&answer, field);
            TraceCell {
                retrieved,
                answer: Some(answer),
                verdict,
                first_gold_rank: outcome.and_then(|o| o.first_gold_rank),
                ..base
            }
        }
        Err(e) => TraceCell {
            retrieved,
            first_gold_rank: outcome.and_then(|o| o.first_gold_rank),
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Run the full benchmark: every gold document crossed with every question.
///
/// Cells are independent; with the extractive backend they may be evaluated
/// in parallel, while the remote backend stays sequential to respect rate
/// limits. Traces are sorted by `(doc_id, category, question_index)` so
/// report assembly is order-independent.
pub fn run_benchmark(
    index: &ChunkIndex,
    params: &EncoderParams,
    vocab: &Vocabulary,
    questions: &QuestionSet,
    gold: &[GoldRecord],
    backend: &Backend,
    k: usize,
    model_label: &str,
) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::Validation("gold record list is empty".into()));
    }
    if questions.entries.is_empty() {
        return Err(Error::Validation("question set is empty".into()));
    }
    let fp = params.fingerprint();
    if fp != index.fingerprint() {
        return Err(Error::Compatibility(format!(
            "index fingerprint {:016x} does not match encoder fingerprint {fp:016x}",
            index.fingerprint()
        )));
    }
    for record in gold {
        if !index.contains_doc(&record.doc_id) {
            return Err(Error::Validation(format!(
                "gold doc_id {:?} has no chunks in the index",
                record.doc_id
            )));
        }
    }

    let cells: Vec<(&GoldRecord, usize, &Question)> = gold
        .iter()
        .flat_map(|g| {
            questions
                .entries
                .iter()
                .enumerate()
                .map(move |(qi, q)| (g, qi, q))
        })
        .collect();

    let eval = |(g, qi, q): &(&GoldRecord, usize, &Question)| {
        run_cell(index, params, vocab, backend, k, g, *qi, q)
    };

    let mut traces: Vec<TraceCell> = match backend {
        Backend::Extractive => {
            #[cfg(feature = "parallel")]
            {
                cells.par_iter().map(eval).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                cells.iter().map(eval).collect()
            }
        }
        Backend::Remote(_) => cells.iter().map(eval).collect(),
    };
    traces.sort_by(|a, b| {
        a.doc_id
            .cmp(&b.doc_id)
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.question_index.cmp(&b.question_index))
    });

    let mut categories = Vec::with_capacity(Category::ALL.len());
    for category in Category::ALL {
        let cat_cells: Vec<&TraceCell> =
            traces.iter().filter(|t| t.category == category).collect();
        let valid = cat_cells.iter().filter(|t| t.verdict == Verdict::Valid).count();
        let eligible: Vec<&&TraceCell> = cat_cells.iter().filter(|t| t.gold_present).collect();
        let hits = eligible.iter().filter(|t| t.first_gold_rank.is_some()).count();
        let at_1 = eligible
            .iter()
            .filter(|t| t.first_gold_rank == Some(1))
            .count();
        let mrr_sum: f64 = eligible
            .iter()
            .map(|t| t.first_gold_rank.map_or(0.0, |r| 1.0 / r as f64))
            .sum();
        let n_eligible = eligible.len();
        let frac = |num: usize| {
            if n_eligible == 0 { 0.0 } else { num as f64 / n_eligible as f64 }
        };
        categories.push(CategorySummary {
            category,
            cells: cat_cells.len(),
            valid,
            accuracy: if cat_cells.is_empty() { 0.0 } else { valid as f64 / cat_cells.len() as f64 },
            retrieval: RetrievalSummary {
                eligible_cells: n_eligible,
                hit_at_k: frac(hits),
                recall_at_1: frac(at_1),
                mrr: if n_eligible == 0 { 0.0 } else { mrr_sum / n_eligible as f64 },
            },
        });
    }

    Ok(EvalReport {
        model: model_label.to_owned(),
        k,
        total_cells: traces.len(),
        errored_cells: traces.iter().filter(|t| t.verdict == Verdict::Errored).count(),
        categories,
        traces,
    })
}

/// Serialize trace cells as JSON lines.
pub fn traces_to_jsonl(traces: &[TraceCell]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).expect("trace cells serialize"));
        out.push('\n');
    }
    out
}
