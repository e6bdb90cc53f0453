//! Rule-based data quality control.
//!
//! Two deterministic primitives back every rule: a lexical grounding score
//! (what fraction of an answer's content tokens the evidence attests) and a
//! contradiction heuristic (polarity opposition on a shared key phrase, or
//! a number asserted against a different number for the same unit phrase).
//! Anything subtler belongs to teacher-assisted mode; the deterministic
//! core stays fully specifiable and auditable.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::dataset::{DatasetPhase, InstructionRecord};
use crate::teacher::{self, TeacherClient, TeacherError};
use crate::text;

/// Fraction of the answer's content tokens that occur in the evidence.
///
/// Content tokens are normalized, stop-words removed, numbers always kept.
/// A token "occurs" when the evidence's token set contains it, so repeated
/// answer tokens count once each in numerator and denominator. An answer
/// with no content tokens is vacuously grounded (1.0).
pub fn grounding_score(answer: &str, evidence: &str) -> f64 {
    grounding_score_with(answer, evidence, &text::default_stopwords())
}

pub fn grounding_score_with(
    answer: &str,
    evidence: &str,
    stopwords: &BTreeSet<String>,
) -> f64 {
    let answer_tokens = text::content_tokens(answer, stopwords);
    if answer_tokens.is_empty() {
        return 1.0;
    }
    let evidence_tokens: BTreeSet<String> = text::tokenize(evidence).into_iter().collect();
    let hits = answer_tokens.iter().filter(|t| evidence_tokens.contains(t.as_str())).count();
    hits as f64 / answer_tokens.len() as f64
}

/// Polarity cues used by the contradiction heuristic.
///
/// Negation cues dominate within a clause because Turkish negators follow
/// the word they negate (`mümkün değil`), so scanning for the earliest cue
/// would mislabel such clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueLexicon {
    pub negation: Vec<String>,
    pub affirmation: Vec<String>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        let negation = [
            "no", "not", "cannot", "never", "hayır", "değil", "değildir", "yasak", "yasaktır",
            "yapılamaz", "edilemez", "verilemez", "alınamaz", "olamaz", "gönderilemez",
        ];
        let affirmation = [
            "yes", "evet", "accepted", "allowed", "permitted", "possible", "mümkün",
            "mümkündür", "yapılabilir", "edilebilir", "verilebilir", "alınabilir", "olabilir",
            "serbest", "serbesttir", "gönderilebilir",
        ];
        Self {
            negation: negation.iter().map(|s| (*s).to_owned()).collect(),
            affirmation: affirmation.iter().map(|s| (*s).to_owned()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Affirm,
    Negate,
    Neutral,
}

fn first_clause(s: &str) -> &str {
    let end = s
        .char_indices()
        .find(|(_, c)| matches!(c, ',' | '.' | ';' | ':' | '!' | '?' | '\n'))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    &s[..end]
}

/// Polarity of a token sequence under the cue lexicon.
pub fn polarity_of(tokens: &[String], lexicon: &CueLexicon) -> Polarity {
    let contains_any = |cues: &[String]| {
        cues.iter().any(|cue| {
            let cue_tokens = text::tokenize(cue);
            !cue_tokens.is_empty()
                && tokens.windows(cue_tokens.len()).any(|w| w == cue_tokens.as_slice())
        })
    };
    if contains_any(&lexicon.negation) {
        Polarity::Negate
    } else if contains_any(&lexicon.affirmation) {
        Polarity::Affirm
    } else {
        Polarity::Neutral
    }
}

/// `(number, unit)` pairs: each number token with the first content token
/// following it, e.g. `within 7 days` yields `("7", "days")`.
fn number_unit_pairs(tokens: &[String], stopwords: &BTreeSet<String>) -> Vec<(f64, String)> {
    let mut pairs = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let Ok(value) = token.parse::<f64>() else { continue };
        let unit = tokens[i + 1..]
            .iter()
            .find(|t| t.parse::<f64>().is_err() && !stopwords.contains(t.as_str()));
        if let Some(unit) = unit {
            pairs.push((value, unit.clone()));
        }
    }
    pairs
}

/// How contradiction verdicts are produced.
#[derive(Clone, Copy)]
pub enum ContradictionMode<'a> {
    /// Deterministic polarity and number-unit rules.
    Heuristic,
    /// Ask the teacher's data-audit module for a delete/keep verdict.
    TeacherAssisted(&'a dyn TeacherClient),
}

/// Checks whether `output_text` contradicts `input_text`.
///
/// Heuristic mode flags (a) an output whose first clause's polarity opposes
/// the polarity of the evidence sentence sharing the most content tokens
/// with it (at least two shared tokens), and (b) a number in the output
/// that differs from the number the input attaches to the same unit phrase.
pub fn contradiction_check(
    input_text: &str,
    output_text: &str,
    mode: ContradictionMode<'_>,
) -> Result<(bool, String), AuditError> {
    match mode {
        ContradictionMode::Heuristic => Ok(contradiction_heuristic(
            input_text,
            output_text,
            &CueLexicon::default(),
            &text::default_stopwords(),
        )),
        ContradictionMode::TeacherAssisted(client) => {
            contradiction_teacher(input_text, output_text, client)
        }
    }
}

pub fn contradiction_heuristic(
    input_text: &str,
    output_text: &str,
    lexicon: &CueLexicon,
    stopwords: &BTreeSet<String>,
) -> (bool, String) {
    if input_text.trim().is_empty() || output_text.trim().is_empty() {
        return (false, "nothing to compare".to_string());
    }

    // Polarity opposition on a shared key phrase.
    let out_clause_tokens = text::tokenize(first_clause(output_text));
    let out_polarity = polarity_of(&out_clause_tokens, lexicon);
    if out_polarity != Polarity::Neutral {
        let out_content: BTreeSet<String> =
            text::content_tokens(output_text, stopwords).into_iter().collect();
        let best = text::sentences(input_text)
            .into_iter()
            .map(|s| {
                let shared = text::content_tokens(s, stopwords)
                    .into_iter()
                    .filter(|t| out_content.contains(t.as_str()))
                    .collect::<BTreeSet<String>>()
                    .len();
                (shared, s)
            })
            .max_by_key(|(shared, _)| *shared);
        if let Some((shared, sentence)) = best {
            if shared >= 2 {
                let ev_polarity = polarity_of(&text::tokenize(sentence), lexicon);
                let opposed = matches!(
                    (out_polarity, ev_polarity),
                    (Polarity::Affirm, Polarity::Negate) | (Polarity::Negate, Polarity::Affirm)
                );
                if opposed {
                    return (
                        true,
                        format!(
                            "output polarity {:?} opposes evidence sentence `{}`",
                            out_polarity,
                            sentence.trim()
                        ),
                    );
                }
            }
        }
    }

    // Number asserted against a different number for the same unit phrase.
    let input_pairs = number_unit_pairs(&text::tokenize(input_text), stopwords);
    let output_pairs = number_unit_pairs(&text::tokenize(output_text), stopwords);
    for (value, unit) in &output_pairs {
        let input_values: Vec<f64> = input_pairs
            .iter()
            .filter(|(_, u)| u == unit)
            .map(|(v, _)| *v)
            .collect();
        if !input_values.is_empty() && input_values.iter().all(|v| (v - value).abs() > 1e-9) {
            return (
                true,
                format!("output asserts {value} {unit}, input attaches {input_values:?} to `{unit}`"),
            );
        }
    }

    (false, "no polarity or number conflict found".to_string())
}

fn contradiction_teacher(
    input_text: &str,
    output_text: &str,
    client: &dyn TeacherClient,
) -> Result<(bool, String), AuditError> {
    use crate::dataset::{RecordMeta, RecordOrigin};
    let mut meta = RecordMeta::new("audit-probe", DatasetPhase::P3ContextAware);
    meta.origin = RecordOrigin::Teacher;
    let probe = InstructionRecord::new("audit probe", input_text, output_text, meta);
    let line = crate::dataset::write_wire_line(&probe);

    let template = teacher::template(teacher::ids::P3_DATA_AUDIT)
        .expect("built-in data audit template exists");
    let bindings: BTreeMap<String, String> =
        [("JSONL_LINES".to_string(), line)].into_iter().collect();
    let exchange = teacher::render_prompt(&template, &bindings)
        .expect("data audit bindings are complete")
        .with_seed(0);
    let raw = client.complete(&exchange).map_err(AuditError::Teacher)?;
    let (survivors, _) = teacher::parse_generated(&raw);
    let deleted = survivors.is_empty();
    Ok((
        deleted,
        if deleted {
            "teacher audit verdict: delete".to_string()
        } else {
            "teacher audit verdict: keep".to_string()
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditRule {
    InputMustBeEmpty,
    InputMustCarryEvidence,
    NotGrounded,
    Contradiction,
    FormatCorrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Delete,
    Repair,
    Keep,
}

/// One finding for one record. `score` is set for grounding findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFinding {
    pub record_id: String,
    pub rule: AuditRule,
    pub action: AuditAction,
    pub detail: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AuditCounts {
    pub examined: usize,
    pub deleted: usize,
    pub repaired: usize,
    pub kept: usize,
}

/// Findings plus counts for one audit pass; serialized as
/// `audit_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub phase: DatasetPhase,
    pub findings: Vec<AuditFinding>,
    pub counts: AuditCounts,
}

impl AuditReport {
    fn tally(phase: DatasetPhase, examined: usize, findings: Vec<AuditFinding>) -> Self {
        let deleted = findings.iter().filter(|f| f.action == AuditAction::Delete).count();
        let repaired = findings.iter().filter(|f| f.action == AuditAction::Repair).count();
        Self {
            phase,
            counts: AuditCounts { examined, deleted, repaired, kept: examined - deleted - repaired },
            findings,
        }
    }

    pub fn deleted_ids(&self) -> BTreeSet<&str> {
        self.findings
            .iter()
            .filter(|f| f.action == AuditAction::Delete)
            .map(|f| f.record_id.as_str())
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("record {0} has no mapped source evidence")]
    MissingEvidence(String),
    #[error("report does not match the record list: {0}")]
    ReportMismatch(String),
    #[error("teacher unavailable: {0}")]
    Teacher(#[from] TeacherError),
}

/// Memorization-phase audit: delete records whose `input` is not empty and
/// records whose answer is not grounded in their source article.
pub fn audit_phase2(
    records: &[InstructionRecord],
    source_evidence: &BTreeMap<String, String>,
    grounding_threshold: f64,
) -> Result<AuditReport, AuditError> {
    assert!((0.0..=1.0).contains(&grounding_threshold), "threshold must be in [0, 1]");
    let mut findings = Vec::new();
    for record in records {
        if !record.input.is_empty() {
            findings.push(AuditFinding {
                record_id: record.meta.record_id.clone(),
                rule: AuditRule::InputMustBeEmpty,
                action: AuditAction::Delete,
                detail: "memorization records must keep `input` empty".to_string(),
                score: None,
            });
            continue;
        }
        let evidence = source_evidence
            .get(&record.meta.record_id)
            .ok_or_else(|| AuditError::MissingEvidence(record.meta.record_id.clone()))?;
        let score = grounding_score(&record.output, evidence);
        if score < grounding_threshold {
            findings.push(AuditFinding {
                record_id: record.meta.record_id.clone(),
                rule: AuditRule::NotGrounded,
                action: AuditAction::Delete,
                detail: format!("grounding score {score:.3} below threshold {grounding_threshold}"),
                score: Some(score),
            });
        }
    }
    Ok(AuditReport::tally(DatasetPhase::P2Memorization, records.len(), findings))
}

fn disallowed_control(c: char) -> bool {
    c.is_control() && c != '\n' && c != '\t'
}

/// Deterministic format repair: strips disallowed control characters and
/// collapses whitespace-only fields to empty. Returns `None` when the
/// record is already clean.
pub fn repair_record(record: &InstructionRecord) -> Option<InstructionRecord> {
    let fix = |s: &str| -> String {
        let stripped: String = s.chars().filter(|c| !disallowed_control(*c)).collect();
        if stripped.trim().is_empty() {
            String::new()
        } else {
            stripped
        }
    };
    let repaired = InstructionRecord {
        instruction: fix(&record.instruction),
        input: fix(&record.input),
        output: fix(&record.output),
        meta: record.meta.clone(),
    };
    if repaired.instruction == record.instruction
        && repaired.input == record.input
        && repaired.output == record.output
    {
        None
    } else {
        Some(repaired)
    }
}

/// Context-phase audit; rules apply in this fixed order per record:
/// 1. delete if `input` is empty, 2. delete if `input` contradicts
/// `output`, 3. repair if the format is corrupted.
pub fn audit_phase3(
    records: &[InstructionRecord],
    mode: ContradictionMode<'_>,
) -> Result<AuditReport, AuditError> {
    let mut findings = Vec::new();
    for record in records {
        if record.input.trim().is_empty() {
            findings.push(AuditFinding {
                record_id: record.meta.record_id.clone(),
                rule: AuditRule::InputMustCarryEvidence,
                action: AuditAction::Delete,
                detail: "context records must carry evidence in `input`".to_string(),
                score: None,
            });
            continue;
        }
        let (contradicts, rationale) =
            contradiction_check(&record.input, &record.output, mode)?;
        if contradicts {
            findings.push(AuditFinding {
                record_id: record.meta.record_id.clone(),
                rule: AuditRule::Contradiction,
                action: AuditAction::Delete,
                detail: rationale,
                score: None,
            });
            continue;
        }
        if repair_record(record).is_some() {
            findings.push(AuditFinding {
                record_id: record.meta.record_id.clone(),
                rule: AuditRule::FormatCorrupted,
                action: AuditAction::Repair,
                detail: "stripped control characters / collapsed whitespace-only fields"
                    .to_string(),
                score: None,
            });
        }
    }
    Ok(AuditReport::tally(DatasetPhase::P3ContextAware, records.len(), findings))
}

/// Applies a report: deleted records drop out, repaired records are
/// replaced by their deterministic repaired form, order is preserved.
pub fn apply_report(
    records: &[InstructionRecord],
    report: &AuditReport,
) -> Result<Vec<InstructionRecord>, AuditError> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.meta.record_id.as_str()).collect();
    for finding in &report.findings {
        if !ids.contains(finding.record_id.as_str()) {
            return Err(AuditError::ReportMismatch(format!(
                "finding references unknown record {}",
                finding.record_id
            )));
        }
    }
    if report.counts.examined != records.len() {
        return Err(AuditError::ReportMismatch(format!(
            "report examined {} records, list has {}",
            report.counts.examined,
            records.len()
        )));
    }
    let mut actions: BTreeMap<&str, AuditAction> = BTreeMap::new();
    for finding in &report.findings {
        actions.insert(finding.record_id.as_str(), finding.action);
    }
    let mut out = Vec::new();
    for record in records {
        match actions.get(record.meta.record_id.as_str()) {
            Some(AuditAction::Delete) => {}
            Some(AuditAction::Repair) => {
                out.push(repair_record(record).unwrap_or_else(|| record.clone()))
            }
            Some(AuditAction::Keep) | None => out.push(record.clone()),
        }
    }
    Ok(out)
}
