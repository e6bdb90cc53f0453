//! Deterministic offline teacher.
//!
//! The mock stands in for the remote model so the entire pipeline can run
//! and be tested without network access. It keys its behavior off the
//! template marker embedded by `render_prompt`, re-extracts the bound
//! material from the rendered user text (the shipped templates delimit it
//! with labeled section lines), and synthesizes output by sentence
//! extraction: questions are interrogative frames over a sentence's key
//! phrase, answers are the sentence itself. Identical (exchange, seed)
//! always produces identical bytes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::audit;
use crate::corpus::{default_heading_patterns, segment_articles, RegulationDocument};
use crate::dataset::{
    parse_jsonl, write_wire_line, DatasetPhase, InstructionRecord, ParseMode, RecordMeta,
};
use crate::rng::SplitMix64;
use crate::teacher::{ids, template_marker, ChatExchange, TeacherClient, TeacherError};
use crate::text;

/// Offline [`TeacherClient`]; completion seed comes from the exchange.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTeacher;

impl TeacherClient for MockTeacher {
    fn complete(&self, exchange: &ChatExchange) -> Result<String, TeacherError> {
        mock_complete(exchange, exchange.params.seed.unwrap_or(0))
    }

    fn origin(&self) -> crate::dataset::RecordOrigin {
        crate::dataset::RecordOrigin::Mock
    }
}

const SECTION_LABELS: &[&str] = &["ARTICLE:", "CARD:", "SOURCE TEXT:", "JSONL LINES:"];

/// Extracts the material following a `LABEL:` line, up to the next label
/// line or the end of the text. Falls back to the whole text when the
/// label is absent (overridden templates without shipped delimiters).
fn section<'a>(user: &'a str, label: &str) -> &'a str {
    let mut offset = 0;
    let mut start = None;
    for line in user.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let trimmed = line.trim();
        match start {
            None => {
                if trimmed == label {
                    start = Some(offset);
                }
            }
            Some(s) => {
                if SECTION_LABELS.contains(&trimmed) {
                    return user[s..line_start].trim_matches('\n');
                }
            }
        }
    }
    match start {
        Some(s) => user[s..].trim_matches('\n'),
        None => user,
    }
}

const QUESTION_FRAMES: &[&str] = &[
    "What does the regulation state about {}?",
    "According to the rules, what applies to {}?",
    "Explain the provision concerning {}.",
    "What is specified regarding {}?",
    "Under what conditions does {} apply?",
    "Summarize the rule about {}.",
];

const MISCONCEPTION_FRAMES: &[&str] = &[
    "I heard that the rule about {} is optional; can I skip it?",
    "Can I ignore the requirement concerning {}?",
    "Is it true that {} does not apply to me?",
    "My friend says {} is not enforced; is that right?",
];

pub const REJECTION_PREFIX: &str = "No, according to the regulations, it is not possible.";

/// A sentence's key phrase: its first few content tokens.
fn key_phrase(sentence: &str) -> String {
    let stopwords = text::default_stopwords();
    let content = text::content_tokens(sentence, &stopwords);
    let tokens = if content.is_empty() { text::tokenize(sentence) } else { content };
    tokens.into_iter().take(4).collect::<Vec<_>>().join(" ")
}

fn fill_frame(frame: &str, phrase: &str) -> String {
    frame.replacen("{}", phrase, 1)
}

fn wire(instruction: &str, input: &str, output: &str) -> String {
    let meta = RecordMeta::new("mock", DatasetPhase::P1General);
    write_wire_line(&InstructionRecord::new(instruction, input, output, meta))
}

/// Q&A synthesis over the sentences of `material`.
///
/// `context` controls the `input` field: `None` leaves it empty
/// (memorization format), `Some(text)` injects that text (context format).
fn synthesize_qa(
    material: &str,
    min_lines: u64,
    max_lines: u64,
    context: Option<&str>,
    rng: &mut SplitMix64,
) -> String {
    let sentences = text::sentences(material);
    if sentences.is_empty() {
        return String::new();
    }
    let n = (min_lines + rng.next_below(max_lines - min_lines + 1)) as usize;
    let frame_base = rng.pick_index(QUESTION_FRAMES.len());
    let mut lines = Vec::with_capacity(n);
    for i in 0..n {
        let sentence = sentences[i % sentences.len()];
        let variant = (frame_base + i / sentences.len() + i) % QUESTION_FRAMES.len();
        let question = fill_frame(QUESTION_FRAMES[variant], &key_phrase(sentence));
        let input = context.unwrap_or("");
        lines.push(wire(&question, input, sentence));
    }
    lines.join("\n") + "\n"
}

fn synthesize_adversarial(article: &str, rng: &mut SplitMix64) -> String {
    let sentences = text::sentences(article);
    if sentences.is_empty() {
        return String::new();
    }
    let n = (3 + rng.next_below(3)) as usize;
    let frame_base = rng.pick_index(MISCONCEPTION_FRAMES.len());
    let mut lines = Vec::with_capacity(n);
    for i in 0..n {
        let sentence = sentences[i % sentences.len()];
        let variant = (frame_base + i) % MISCONCEPTION_FRAMES.len();
        let question = fill_frame(MISCONCEPTION_FRAMES[variant], &key_phrase(sentence));
        let output = format!("{REJECTION_PREFIX} The governing rule is: {sentence}");
        lines.push(wire(&question, article, &output));
    }
    lines.join("\n") + "\n"
}

fn parse_lines_section(user: &str) -> Vec<InstructionRecord> {
    let lines = section(user, "JSONL LINES:");
    // Lenient parse; malformed lines are simply dropped, which doubles as
    // the mock's REPAIR behavior (survivors are re-emitted canonically).
    let (records, _) = parse_jsonl(lines.as_bytes(), ParseMode::Lenient).unwrap_or_default();
    records
}

fn emit(records: &[InstructionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&write_wire_line(r));
        out.push('\n');
    }
    out
}

fn audit_qc(user: &str) -> String {
    let source = section(user, "SOURCE TEXT:");
    let survivors: Vec<InstructionRecord> = parse_lines_section(user)
        .into_iter()
        .filter(|r| r.input.is_empty() && audit::grounding_score(&r.output, source) >= 0.6)
        .collect();
    emit(&survivors)
}

fn inject_context(user: &str) -> String {
    let source = section(user, "SOURCE TEXT:");
    let mut records = parse_lines_section(user);

    // Prefer article-level evidence; fall back to the whole source text
    // when it does not segment.
    let doc = RegulationDocument {
        doc_id: "mock-source".to_string(),
        title: String::new(),
        raw_text: source.to_string(),
        source_path: String::new(),
    };
    let bodies: Vec<String> = match segment_articles(&doc, &default_heading_patterns()) {
        Ok(articles) if !articles.is_empty() => {
            articles.into_iter().map(|a| a.body).collect()
        }
        _ => [source.to_string()].into(),
    };

    for record in &mut records {
        let best = bodies
            .iter()
            .enumerate()
            .map(|(i, body)| (i, audit::grounding_score(&record.output, body)))
            .max_by(|(ia, a), (ib, b)| {
                a.partial_cmp(b)
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(ib.cmp(ia)) // earliest article wins ties
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        record.input = bodies[best].clone();
    }
    emit(&records)
}

fn data_audit(user: &str) -> String {
    let lexicon = audit::CueLexicon::default();
    let stopwords = text::default_stopwords();
    let survivors: Vec<InstructionRecord> = parse_lines_section(user)
        .into_iter()
        .filter(|r| {
            !r.input.trim().is_empty()
                && !audit::contradiction_heuristic(&r.input, &r.output, &lexicon, &stopwords).0
        })
        .map(|r| audit::repair_record(&r).unwrap_or(r))
        .collect();
    emit(&survivors)
}

/// Deterministic, seeded completion for exchanges rendered from registry
/// templates. Output is always recoverable by `parse_generated`.
pub fn mock_complete(exchange: &ChatExchange, seed: u64) -> Result<String, TeacherError> {
    let marker = template_marker(exchange)
        .ok_or_else(|| TeacherError::UnknownTemplateMarker("no marker line".to_string()))?;
    let mut rng = SplitMix64::for_stream(seed, marker);
    let user = exchange.user.as_str();
    let out = match marker {
        ids::P2_RAW_CONVERTER => {
            synthesize_qa(section(user, "ARTICLE:"), 5, 12, None, &mut rng)
        }
        ids::P2_ID_PROCESSOR => synthesize_qa(section(user, "CARD:"), 6, 10, None, &mut rng),
        ids::P2_SYSTEM => synthesize_qa(user, 5, 12, None, &mut rng),
        ids::P3_GLOBAL_SYSTEM => synthesize_qa(user, 5, 12, Some(user), &mut rng),
        ids::P3_ADVERSARIAL_SAMPLING => {
            synthesize_adversarial(section(user, "ARTICLE:"), &mut rng)
        }
        ids::P2_AUDIT_QC => audit_qc(user),
        ids::P3_CONTEXT_INJECTION => inject_context(user),
        ids::P3_DATA_AUDIT => data_audit(user),
        other => return Err(TeacherError::UnknownTemplateMarker(other.to_string())),
    };
    Ok(out)
}
