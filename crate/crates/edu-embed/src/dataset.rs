//! Training-pair formats, deterministic batching, and a template-based
//! synthetic corpus generator.
//!
//! The generator expands sentence templates over entity pools. It covers
//! three phenomenon classes: synonym substitution, question reformulation,
//! and implicit-to-explicit mappings from questions to factual statements.
//! A held-out split reserved for evaluation uses disjoint wording on the two
//! sides of each pair (no shared tokens except entity names), so retrieval
//! success on it cannot come from token overlap.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::tokenize;
use crate::error::{Error, Result};
use crate::evaluation::GoldRecord;
use crate::persist::write_atomic;

/// Anchor/positive pair for the ranking loss.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub anchor: String,
    pub positive: String,
}

/// Sentence pair with a binary similarity label for the cosine loss.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub sentence1: String,
    pub sentence2: String,
    pub label: u8,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn ensure_tokenizable(text: &str, line: usize, field: &str) -> Result<()> {
    if tokenize(text).is_empty() {
        return Err(Error::Validation(format!(
            "line {line}: field {field} is empty after tokenization"
        )));
    }
    Ok(())
}

/// Load anchor/positive pairs from a JSON-lines file.
pub fn load_positive_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let content = std::fs::read_to_string(path)?;
    parse_positive_pairs(&content)
}

/// Parse the JSON-lines positive-pair format; line numbers are 1-based.
pub fn parse_positive_pairs(content: &str) -> Result<Vec<SentencePair>> {
    let mut pairs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let pair: SentencePair = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        ensure_tokenizable(&pair.anchor, line_no, "anchor")?;
        ensure_tokenizable(&pair.positive, line_no, "positive")?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[derive(Deserialize)]
struct RawLabeledPair {
    sentence1: String,
    sentence2: String,
    label: i64,
}

/// Load labeled pairs from a JSON-lines file.
pub fn load_labeled_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>> {
    let content = std::fs::read_to_string(path)?;
    parse_labeled_pairs(&content)
}

/// Parse the JSON-lines labeled-pair format; labels must be exactly 0 or 1.
pub fn parse_labeled_pairs(content: &str) -> Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLabeledPair = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.label != 0 && raw.label != 1 {
            return Err(Error::Validation(format!(
                "line {line_no}: label {} is outside {{0, 1}}",
                raw.label
            )));
        }
        ensure_tokenizable(&raw.sentence1, line_no, "sentence1")?;
        ensure_tokenizable(&raw.sentence2, line_no, "sentence2")?;
        pairs.push(LabeledPair {
            sentence1: raw.sentence1,
            sentence2: raw.sentence2,
            label: raw.label as u8,
        });
    }
    Ok(pairs)
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("pairs serialize"));
        out.push('\n');
    }
    out
}

pub fn save_positive_pairs(path: impl AsRef<Path>, pairs: &[SentencePair]) -> Result<()> {
    write_atomic(path, to_jsonl(pairs).as_bytes())
}

pub fn save_labeled_pairs(path: impl AsRef<Path>, pairs: &[LabeledPair]) -> Result<()> {
    write_atomic(path, to_jsonl(pairs).as_bytes())
}

/// Fisher-Yates shuffle of `0..len` followed by consecutive slices; the last
/// batch may be short. Panics if `batch_size` is zero (validated upstream).
pub fn batch_indices(len: usize, batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut indices: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    indices.shuffle(&mut rng);
    indices.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Borrowing convenience wrapper over [`batch_indices`].
pub fn batches<T>(items: &[T], batch_size: usize, epoch_seed: u64) -> Vec<Vec<&T>> {
    batch_indices(items.len(), batch_size, epoch_seed)
        .into_iter()
        .map(|batch| batch.into_iter().map(|i| &items[i]).collect())
        .collect()
}

/// Specification for the synthetic corpus: a pure function of these fields.
///
/// `n_labeled` is the total size of the labeled set handed to the cosine
/// loss; it is filled half with hard negatives (label 0) and half with pairs
/// drawn from the positive catalog (label 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_positive: usize,
    pub n_labeled: usize,
    pub instructors: Vec<String>,
    pub tas: Vec<String>,
    pub times: Vec<String>,
    pub credits: Vec<String>,
    pub subjects: Vec<String>,
    pub rooms: Vec<String>,
}

// The tail of the instructor/TA/subject pools is reserved for the held-out
// split and never appears in training pairs.
const HELDOUT_INSTRUCTORS: usize = 8;
const HELDOUT_TAS: usize = 4;
const HELDOUT_SUBJECTS: usize = 4;

impl SynthSpec {
    pub fn new(seed: u64, n_positive: usize, n_labeled: usize) -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| (*s).to_owned()).collect();
        Self {
            seed,
            n_positive,
            n_labeled,
            instructors: strings(&[
                "Smith", "Jones", "Garcia", "Chen", "Patel", "Kim", "Okafor", "Novak",
                "Rivera", "Khan", "Mueller", "Tanaka", "Rossi", "Dubois", "Haddad", "Larsen",
                // held-out
                "Ibrahim", "Costa", "Sato", "Petrov", "Duran", "Kowalski", "Mensah", "Reyes",
            ]),
            tas: strings(&[
                "Ana Silva", "Ben Carter", "Mei Lin", "Omar Aziz", "Lena Fischer",
                "Raj Gupta", "Sara Cohen", "Tom Becker",
                // held-out
                "Ivy Zhang", "Leo Moreau", "Nina Park", "Eli Vargas",
            ]),
            times: strings(&["9 AM", "10 AM", "11 AM", "1 PM", "2 PM", "3 PM", "4 PM", "8 AM"]),
            credits: strings(&["1", "2", "3", "4", "5", "6"]),
            subjects: strings(&[
                "Astronomy", "Microeconomics", "Linguistics", "Thermodynamics",
                "Genetics", "Philosophy", "Statistics", "Archaeology",
                // held-out
                "Volcanology", "Musicology", "Cartography", "Immunology",
            ]),
            rooms: strings(&["101", "204", "310", "115", "408", "222", "137", "305"]),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.instructors.len() <= HELDOUT_INSTRUCTORS
            || self.tas.len() <= HELDOUT_TAS
            || self.subjects.len() <= HELDOUT_SUBJECTS
            || self.times.is_empty()
            || self.credits.is_empty()
            || self.rooms.is_empty()
        {
            return Err(Error::Config(
                "entity pools too small: each pool must exceed its held-out reserve".into(),
            ));
        }
        Ok(())
    }

    fn train_instructors(&self) -> &[String] {
        &self.instructors[..self.instructors.len() - HELDOUT_INSTRUCTORS]
    }

    fn heldout_instructors(&self) -> &[String] {
        &self.instructors[self.instructors.len() - HELDOUT_INSTRUCTORS..]
    }

    fn train_tas(&self) -> &[String] {
        &self.tas[..self.tas.len() - HELDOUT_TAS]
    }

    fn heldout_tas(&self) -> &[String] {
        &self.tas[self.tas.len() - HELDOUT_TAS..]
    }

    fn train_subjects(&self) -> &[String] {
        &self.subjects[..self.subjects.len() - HELDOUT_SUBJECTS]
    }

    fn heldout_subjects(&self) -> &[String] {
        &self.subjects[self.subjects.len() - HELDOUT_SUBJECTS..]
    }
}

/// A mini-syllabus document for the offline benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDoc {
    pub doc_id: String,
    pub text: String,
}

/// Benchmark fixtures plus the held-out evaluation splits.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFixtures {
    pub docs: Vec<FixtureDoc>,
    pub gold: Vec<GoldRecord>,
    /// Paraphrase pairs whose two sides share no tokens except entity names.
    pub heldout_paraphrases: Vec<SentencePair>,
    /// Labeled pairs over the reserved entities, never seen in training.
    pub heldout_labeled: Vec<LabeledPair>,
}

/// Everything [`generate_synthetic`] produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub positive_pairs: Vec<SentencePair>,
    pub labeled_pairs: Vec<LabeledPair>,
    pub fixtures: EvalFixtures,
}

fn push_unique(pairs: &mut Vec<SentencePair>, seen: &mut HashSet<SentencePair>, pair: SentencePair) {
    if seen.insert(pair.clone()) {
        pairs.push(pair);
    }
}

// How many rotated entity combinations each cross-product family keeps per
// left entity. Keeps family sizes balanced so a uniform sample covers every
// synonym bridge.
const ROTATIONS: usize = 3;

/// Every positive pair the training templates can produce, in a fixed order.
///
/// Held-out entity names also occur here, but only inside anchoring frames
/// that differ from every held-out frame: batches then contain same-frame
/// pairs that differ only in the entity, which is what forces entity
/// embeddings apart. The held-out (anchor, positive) texts themselves never
/// appear.
pub(crate) fn build_positive_catalog(spec: &SynthSpec) -> Vec<SentencePair> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    let mut add = |anchor: String, positive: String| {
        push_unique(&mut pairs, &mut seen, SentencePair { anchor, positive });
    };

    let instructors = spec.train_instructors();
    let subjects = spec.train_subjects();
    let rotated = |pool: &[String], i: usize, k: usize| pool[(i + k) % pool.len()].clone();

    // Synonym substitution.
    for l in instructors {
        add(
            format!("When are Dr. {l}'s office hours?"),
            format!("When are Professor {l}'s office hours?"),
        );
    }
    for s in subjects {
        add(
            format!("Who is the TA for {s}?"),
            format!("Who is the teaching assistant for {s}?"),
        );
        add(
            format!("Who is the instructor for {s}?"),
            format!("Who is the professor for {s}?"),
        );
        add(
            format!("How many credit hours is {s} worth?"),
            format!("How many semester hours is {s} worth?"),
        );
    }
    // Entity anchoring over the full pools, including names reserved for the
    // held-out split: identical frames that differ only in the entity.
    for l in &spec.instructors {
        add(
            format!("Is Dr. {l} the instructor?"),
            format!("Is Dr. {l} the professor?"),
        );
    }
    for s in &spec.subjects {
        add(
            format!("Does the {s} course require a textbook?"),
            format!("Does the {s} class require a textbook?"),
        );
    }

    // Question reformulation.
    for l in instructors {
        add(
            format!("When are Dr. {l}'s office hours?"),
            format!("What time can I meet Dr. {l}?"),
        );
    }
    for s in subjects {
        add(
            format!("How many credit hours is the {s} course worth?"),
            format!("What is the credit hour value of the {s} course?"),
        );
        add(
            format!("Who teaches the {s} course?"),
            format!("Who runs the {s} class?"),
        );
        add(
            format!("What is the name of the TA for {s}?"),
            format!("Who assists as grader for {s}?"),
        );
    }

    // Implicit question to explicit statement.
    for (i, s) in subjects.iter().enumerate() {
        for k in 0..ROTATIONS.min(instructors.len()) {
            let l = rotated(instructors, i, k * 2);
            add(
                format!("Who teaches the {s} course?"),
                format!("{s} class is taught by Dr. {l}."),
            );
            let l = rotated(instructors, i, k * 2 + 1);
            add(
                format!("Who runs the {s} course?"),
                format!("{s} class is taught by Dr. {l}."),
            );
        }
        for k in 0..ROTATIONS.min(spec.credits.len()) {
            let c = rotated(&spec.credits, i, k);
            add(
                format!("How many credit hours is the {s} course worth?"),
                format!("The {s} course is worth {c} credit hours."),
            );
            let c = rotated(&spec.credits, i, k + 1);
            add(
                format!("How many units does the {s} course carry?"),
                format!("The {s} course is worth {c} credit hours."),
            );
        }
        for k in 0..ROTATIONS.min(spec.tas.len()) {
            let ta = rotated(&spec.tas, i, k);
            add(
                format!("Who is the TA for {s}?"),
                format!("The teaching assistant for {s} is {ta}."),
            );
        }
        for k in 0..ROTATIONS.min(spec.rooms.len()) {
            let r = rotated(&spec.rooms, i, k);
            add(
                format!("Where does the {s} course meet?"),
                format!("{s} class gathers in room {r}."),
            );
        }
    }
    for (i, l) in instructors.iter().enumerate() {
        for k in 0..ROTATIONS.min(spec.times.len()) {
            let t = rotated(&spec.times, i, k);
            add(
                format!("When are Dr. {l}'s office hours?"),
                format!("Dr. {l} holds availability starting at {t}."),
            );
            let t = rotated(&spec.times, i, k + 1);
            add(
                format!("What time can I meet Dr. {l}?"),
                format!("Dr. {l} holds availability starting at {t}."),
            );
        }
        for k in 0..ROTATIONS.min(spec.tas.len()) {
            let ta = rotated(&spec.tas, i, k);
            add(
                format!("Who assists Dr. {l} as grader?"),
                format!("The teaching assistant supporting Dr. {l} is {ta}."),
            );
        }
        for k in 0..ROTATIONS.min(spec.credits.len()) {
            let c = rotated(&spec.credits, i, k);
            add(
                format!("How many units does Dr. {l} award?"),
                format!("Dr. {l} grants {c} credit hours."),
            );
        }
    }
    pairs
}

/// Hard negatives: structurally similar to positive pairs but semantically
/// unrelated, including same-entity cross-fact distractors.
fn build_negative_catalog(spec: &SynthSpec) -> Vec<LabeledPair> {
    let mut pairs = Vec::new();
    let instructors = spec.train_instructors();
    let tas = spec.train_tas();
    let subjects = spec.train_subjects();
    let mut add = |s1: String, s2: String| {
        pairs.push(LabeledPair { sentence1: s1, sentence2: s2, label: 0 });
    };

    for (i, l) in instructors.iter().enumerate() {
        let s = &subjects[i % subjects.len()];
        let c = &spec.credits[i % spec.credits.len()];
        add(
            format!("When are Dr. {l}'s office hours?"),
            format!("The {s} course is worth {c} credit hours."),
        );
    }
    for (i, s) in subjects.iter().enumerate() {
        let r = &spec.rooms[i % spec.rooms.len()];
        add(
            format!("Who is the TA for {s}?"),
            format!("{s} class gathers in room {r}."),
        );
        let l = &instructors[i % instructors.len()];
        let t = &spec.times[i % spec.times.len()];
        add(
            format!("How many credit hours is the {s} course worth?"),
            format!("Dr. {l} holds availability starting at {t}."),
        );
        for ta in tas {
            add(
                format!("Who teaches the {s} course?"),
                format!("The teaching assistant for {s} is {ta}."),
            );
        }
    }
    for l in instructors {
        for c in &spec.credits {
            add(
                format!("What time can I meet Dr. {l}?"),
                format!("Dr. {l} grants {c} credit hours."),
            );
        }
    }
    pairs
}

/// One held-out pair plus the entity strings that appear on both sides (the
/// only tokens the two sides may share).
struct HeldoutPair {
    pair: SentencePair,
    shared_entities: Vec<String>,
}

fn build_heldout_paraphrases(spec: &SynthSpec) -> Vec<HeldoutPair> {
    let mut out = Vec::new();
    let instructors = spec.heldout_instructors();
    let tas = spec.heldout_tas();
    let subjects = spec.heldout_subjects();

    for (i, l) in instructors.iter().enumerate() {
        let t = &spec.times[i % spec.times.len()];
        let ta = &tas[i % tas.len()];
        let c = &spec.credits[i % spec.credits.len()];
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("What time can I meet Dr. {l}?"),
                positive: format!("Dr. {l} holds availability starting at {t}."),
            },
            shared_entities: vec![format!("Dr. {l}")],
        });
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("Who assists Dr. {l} as grader?"),
                positive: format!("The teaching assistant supporting Dr. {l} is {ta}."),
            },
            shared_entities: vec![format!("Dr. {l}")],
        });
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("How many units does Dr. {l} award?"),
                positive: format!("Dr. {l} grants {c} credit hours."),
            },
            shared_entities: vec![format!("Dr. {l}")],
        });
    }
    for (i, s) in subjects.iter().enumerate() {
        let l = &instructors[i % instructors.len()];
        let c = &spec.credits[(i + 1) % spec.credits.len()];
        let r = &spec.rooms[i % spec.rooms.len()];
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("Who runs the {s} course?"),
                positive: format!("{s} class is taught by Dr. {l}."),
            },
            shared_entities: vec![s.clone()],
        });
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("How many units does {s} carry?"),
                positive: format!("{s} is worth {c} credit hours."),
            },
            shared_entities: vec![s.clone()],
        });
        out.push(HeldoutPair {
            pair: SentencePair {
                anchor: format!("Where does the {s} course meet?"),
                positive: format!("{s} class gathers in room {r}."),
            },
            shared_entities: vec![s.clone()],
        });
    }
    out
}

fn check_zero_overlap(heldout: &[HeldoutPair]) -> Result<()> {
    for h in heldout {
        let anchor_tokens: HashSet<String> = tokenize(&h.pair.anchor).into_iter().collect();
        let positive_tokens: HashSet<String> = tokenize(&h.pair.positive).into_iter().collect();
        let allowed: HashSet<String> = h
            .shared_entities
            .iter()
            .flat_map(|e| tokenize(e))
            .collect();
        let violation: Vec<&String> = anchor_tokens
            .intersection(&positive_tokens)
            .filter(|t| !allowed.contains(*t))
            .collect();
        if !violation.is_empty() {
            return Err(Error::Validation(format!(
                "held-out pair shares non-entity tokens {violation:?}: {:?} / {:?}",
                h.pair.anchor, h.pair.positive
            )));
        }
    }
    Ok(())
}

fn build_heldout_labeled(spec: &SynthSpec, paraphrases: &[SentencePair]) -> Vec<LabeledPair> {
    let mut out = Vec::new();
    // label-1: every other held-out paraphrase, capped at 16
    for pair in paraphrases.iter().step_by(2).take(16) {
        out.push(LabeledPair {
            sentence1: pair.anchor.clone(),
            sentence2: pair.positive.clone(),
            label: 1,
        });
    }
    // label-0: cross-fact pairings over the same reserved entities
    let instructors = spec.heldout_instructors();
    let subjects = spec.heldout_subjects();
    for (i, l) in instructors.iter().enumerate() {
        let c = &spec.credits[i % spec.credits.len()];
        out.push(LabeledPair {
            sentence1: format!("What time can I meet Dr. {l}?"),
            sentence2: format!("Dr. {l} grants {c} credit hours."),
            label: 0,
        });
    }
    for (i, s) in subjects.iter().enumerate() {
        let r = &spec.rooms[(i + 3) % spec.rooms.len()];
        let l = &instructors[(i + 2) % instructors.len()];
        out.push(LabeledPair {
            sentence1: format!("How many units does {s} carry?"),
            sentence2: format!("{s} class gathers in room {r}."),
            label: 0,
        });
        out.push(LabeledPair {
            sentence1: format!("Where does the {s} course meet?"),
            sentence2: format!("{s} class is taught by Dr. {l}."),
            label: 0,
        });
    }
    out
}

fn build_fixture_docs(spec: &SynthSpec) -> (Vec<FixtureDoc>, Vec<GoldRecord>) {
    let i = spec.train_instructors();
    let t = spec.train_tas();
    let s = spec.train_subjects();

    // Doc 1 is long enough to split into two chunks; the fact-bearing
    // sentences sit well before the 300-word boundary.
    let alpha = format!(
        "{subject} Syllabus. Instructor: Dr. {instr}. Teaching Assistant: {ta}. \
This course is worth 3 credit hours. Dr. {instr} holds availability starting at 2 PM on Tuesdays. \
The {subject} course gathers in room 204 on Monday and Wednesday mornings. \
Welcome to {subject}. This syllabus describes the plan for the term, the expectations for \
participation, and the resources available to every student. Lectures build from first \
principles toward the survey projects scheduled late in the term. Weekly reading responses \
are due before each Monday session and are scored on completion. \
Week one introduces the observational toolkit and the coordinate systems used throughout. \
Week two covers stellar spectra and classification. Week three examines planetary motion \
and orbital mechanics. Week four turns to telescope design and imaging pipelines. Week five \
is reserved for the first project checkpoint and a review session. Week six explores stellar \
evolution from protostar to remnant. Week seven studies galactic structure and rotation \
curves. Week eight introduces cosmological distance ladders. Week nine covers the microwave \
background and large scale structure. Week ten is devoted to student presentations. \
Grading policy: reading responses count for twenty percent, two projects count for forty \
percent, and the final presentation counts for the remaining forty percent. Late work loses \
ten percent per day unless an extension is arranged in advance. Collaboration on ideas is \
encouraged, but every submission must be written independently. Cite every source you \
consult, including software libraries and data archives. \
Attendance matters: more than three unexcused absences reduce the participation score. \
If you must miss a session, review the posted notes and submit the follow-up exercise \
within one week. Accommodations are coordinated through the campus access office; please \
reach out during the first two weeks so arrangements are ready before the first project. \
Office visits outside posted availability can be arranged by email. The reading list, data \
sets, and project templates are posted on the course page. Bring a laptop to lab sessions; \
cloud notebooks are provided for students without one. A calculator is allowed during \
quizzes. The final presentation schedule will be posted after the midterm checkpoint. \
Questions about logistics should go to the discussion board first so answers reach the \
whole class quickly.",
        subject = s[0],
        instr = i[0],
        ta = t[0],
    );

    let beta = format!(
        "{subject} Syllabus. Instructor: Dr. {instr}. Teaching Assistant: {ta}. \
This course is worth 4 credit hours. Dr. {instr} holds availability starting at 10 AM on \
Thursdays. The {subject} course gathers in room 310 on Tuesday afternoons. \
The term is organized around three case studies and a final exam. Case one analyzes \
household decision making under scarcity. Case two studies firm behavior in competitive \
and concentrated markets. Case three evaluates policy interventions and their measured \
outcomes. Problem sets are due every other Friday and may be discussed in study groups, \
though each student submits individual work. The final exam is cumulative and open note. \
Grading: problem sets forty percent, case write-ups thirty percent, final exam thirty \
percent. Regrade requests must be submitted in writing within one week of the returned \
score. Late submissions lose five percent per day. The required text is available at the \
library reserve desk, and all lecture slides are posted after each session.",
        subject = s[1],
        instr = i[2],
        ta = t[2],
    );

    // Doc 3 deliberately never mentions an assistant (and avoids the words a
    // TA question could latch onto), so refusal is the only supported answer
    // for that category.
    let gamma = format!(
        "{subject} Syllabus. Instructor: Dr. {instr}. \
This course is worth 2 credit hours. Dr. {instr} holds availability starting at 9 AM on \
Fridays. The {subject} course gathers in room 115 on Wednesday evenings. \
This seminar meets once per week for discussion of primary texts. Participants rotate \
responsibility for opening each session with a short summary and two discussion questions. \
A reading journal is collected twice during the term. The final deliverable is an essay of \
about four thousand words developed in stages: a proposal, an annotated outline, and the \
finished draft. Feedback is returned within one week at each stage. \
Grading: participation thirty percent, journal twenty percent, essay fifty percent. \
Essays are evaluated on clarity of argument, engagement with the readings, and revision \
between stages. Extensions require a written request before the deadline. All readings are \
collected in a single course packet available from the copy center.",
        subject = s[2],
        instr = i[3],
    );

    let docs = vec![
        FixtureDoc { doc_id: "syllabus_alpha".into(), text: alpha },
        FixtureDoc { doc_id: "syllabus_beta".into(), text: beta },
        FixtureDoc { doc_id: "syllabus_gamma".into(), text: gamma },
    ];
    let gold = vec![
        GoldRecord {
            doc_id: "syllabus_alpha".into(),
            credit_hours: Some(vec!["3 credit hours".into()]),
            instructor: vec![format!("Dr. {}", i[0])],
            ta: Some(vec![t[0].clone()]),
        },
        GoldRecord {
            doc_id: "syllabus_beta".into(),
            credit_hours: Some(vec!["4 credit hours".into()]),
            instructor: vec![format!("Dr. {}", i[2])],
            ta: Some(vec![t[2].clone()]),
        },
        GoldRecord {
            doc_id: "syllabus_gamma".into(),
            credit_hours: Some(vec!["2 credit hours".into()]),
            instructor: vec![format!("Dr. {}", i[3])],
            ta: None,
        },
    ];
    (docs, gold)
}

/// Deterministically expand the templates over the entity pools.
///
/// Output sizes match the spec exactly or the call fails with a capacity
/// error; it never silently returns fewer pairs.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;

    let catalog = build_positive_catalog(spec);
    if spec.n_positive > catalog.len() {
        return Err(Error::Capacity(format!(
            "requested {} positive pairs but the template space holds {}",
            spec.n_positive,
            catalog.len()
        )));
    }
    let mut positive_pairs = catalog.clone();
    positive_pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(spec.seed)));
    positive_pairs.truncate(spec.n_positive);

    let negatives = build_negative_catalog(spec);
    let n_neg = spec.n_labeled.div_ceil(2);
    let n_pos_labeled = spec.n_labeled - n_neg;
    if n_neg > negatives.len() {
        return Err(Error::Capacity(format!(
            "requested {n_neg} negative pairs but the template space holds {}",
            negatives.len()
        )));
    }
    if n_pos_labeled > catalog.len() {
        return Err(Error::Capacity(format!(
            "requested {n_pos_labeled} label-1 pairs but the template space holds {}",
            catalog.len()
        )));
    }
    let mut labeled_pairs: Vec<LabeledPair> = {
        let mut negs = negatives;
        negs.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x01)));
        negs.truncate(n_neg);

        let mut pos_src = catalog.clone();
        pos_src.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x02)));
        let ones = pos_src.into_iter().take(n_pos_labeled).map(|p| LabeledPair {
            sentence1: p.anchor,
            sentence2: p.positive,
            label: 1,
        });
        negs.into_iter().chain(ones).collect()
    };
    labeled_pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x03)));

    let heldout = build_heldout_paraphrases(spec);
    check_zero_overlap(&heldout)?;
    let heldout_paraphrases: Vec<SentencePair> = heldout.into_iter().map(|h| h.pair).collect();

    // Reserved entities keep the held-out split disjoint from training;
    // verify anyway.
    let train_set: HashSet<&SentencePair> = positive_pairs.iter().collect();
    if let Some(dup) = heldout_paraphrases.iter().find(|p| train_set.contains(p)) {
        return Err(Error::Validation(format!(
            "held-out pair leaked into training set: {dup:?}"
        )));
    }

    let heldout_labeled = build_heldout_labeled(spec, &heldout_paraphrases);
    let (docs, gold) = build_fixture_docs(spec);

    Ok(SyntheticCorpus {
        positive_pairs,
        labeled_pairs,
        fixtures: EvalFixtures { docs, gold, heldout_paraphrases, heldout_labeled },
    })
}
