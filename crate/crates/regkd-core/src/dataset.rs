//! The instruction-record data model and its bit-exact JSONL form.
//!
//! A training line carries exactly three string keys — `instruction`,
//! `input`, `output` — in that order, UTF-8, LF-terminated, minimally
//! escaped. Everything else about a record (id, phase, source article,
//! kind, origin) is sidecar metadata and never enters the training file, so
//! datasets stay diffable and hashable. `write_jsonl` is a fixed point:
//! writing parsed output reproduces identical bytes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::text;

/// Which data strategy a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetPhase {
    /// Imported general-purpose instruction data.
    P1General,
    /// Memorization-oriented records; `input` must always be empty.
    P2Memorization,
    /// Context-aware records; `input` must carry original evidence.
    P3ContextAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Normal,
    /// Misconception-based question whose correct answer is a refusal.
    Adversarial,
    /// Derived from a structured information card.
    IdCard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordOrigin {
    Teacher,
    Mock,
    Imported,
}

/// Sidecar provenance for one record, keyed by `record_id` in the
/// `<name>.meta.json` companion file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub record_id: String,
    pub phase: DatasetPhase,
    pub source_doc: String,
    pub source_ordinal: Option<u32>,
    pub kind: RecordKind,
    pub origin: RecordOrigin,
}

impl RecordMeta {
    pub fn new(record_id: &str, phase: DatasetPhase) -> Self {
        Self {
            record_id: record_id.to_string(),
            phase,
            source_doc: String::new(),
            source_ordinal: None,
            kind: RecordKind::Normal,
            origin: RecordOrigin::Imported,
        }
    }
}

/// One training example plus its sidecar metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub meta: RecordMeta,
}

impl InstructionRecord {
    pub fn new(instruction: &str, input: &str, output: &str, meta: RecordMeta) -> Self {
        Self {
            instruction: instruction.to_string(),
            input: input.to_string(),
            output: output.to_string(),
            meta,
        }
    }
}

/// The three-key wire form. Field order here is the serialized key order.
#[derive(Serialize)]
struct WireRecord<'a> {
    instruction: &'a str,
    input: &'a str,
    output: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("record {record_id} violates phase rules: {violations:?}")]
    InvalidRecord { record_id: String, violations: Vec<Violation> },
    #[error("need at least 2 records to split, got {got}")]
    TooFew { got: usize },
}

/// A per-line finding from lenient parsing or teacher-output recovery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineDiagnostic {
    /// 1-based line number in the parsed input.
    pub line: usize,
    pub reason: String,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Rejected,
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Any malformed line aborts with an error.
    Strict,
    /// Malformed lines become diagnostics; parsing never aborts.
    Lenient,
}

/// Parses one JSONL line into its three fields, or explains why it can't.
pub(crate) fn parse_wire_line(line: &str) -> Result<(String, String, String), String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| alloc::format!("invalid JSON: {e}"))?;
    let obj = match value {
        serde_json::Value::Object(obj) => obj,
        _ => return Err("line is not a JSON object".to_string()),
    };
    for key in obj.keys() {
        if key != "instruction" && key != "input" && key != "output" {
            return Err(alloc::format!("unknown key `{key}`"));
        }
    }
    let field = |name: &str| -> Result<String, String> {
        match obj.get(name) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(alloc::format!("key `{name}` must be a string")),
            None => Err(alloc::format!("missing key `{name}`")),
        }
    };
    Ok((field("instruction")?, field("input")?, field("output")?))
}

fn default_meta_for_line(line: usize) -> RecordMeta {
    RecordMeta::new(&alloc::format!("line-{line:05}"), DatasetPhase::P1General)
}

/// Parses JSONL bytes into records.
///
/// Strict mode requires every line to be a JSON object with exactly the
/// three string keys and aborts on the first offender; lenient mode turns
/// offenders into diagnostics. Trailing blank lines are tolerated in both
/// modes. Parsed records get placeholder metadata (`line-NNNNN`, phase
/// `P1General`, origin `Imported`); callers re-attach real provenance from
/// the sidecar when they have one.
pub fn parse_jsonl(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(Vec<InstructionRecord>, Vec<LineDiagnostic>), DatasetError> {
    let (valid, bad_utf8_line) = match core::str::from_utf8(bytes) {
        Ok(s) => (s, None),
        Err(e) => {
            let prefix = core::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or("");
            let line = prefix.matches('\n').count() + 1;
            (prefix, Some(line))
        }
    };
    if let (Some(line), ParseMode::Strict) = (bad_utf8_line, mode) {
        return Err(DatasetError::MalformedLine { line, reason: "invalid UTF-8".to_string() });
    }

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let lines: Vec<&str> = valid.split('\n').collect();
    let last_content = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map(|i| i + 1)
        .unwrap_or(0);
    for (idx, line) in lines.iter().enumerate().take(last_content) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            match mode {
                ParseMode::Strict => {
                    return Err(DatasetError::MalformedLine {
                        line: line_no,
                        reason: "blank line".to_string(),
                    })
                }
                ParseMode::Lenient => {
                    diagnostics.push(LineDiagnostic {
                        line: line_no,
                        reason: "blank line".to_string(),
                        disposition: Disposition::Rejected,
                    });
                    continue;
                }
            }
        }
        match parse_wire_line(line) {
            Ok((instruction, input, output)) => {
                records.push(InstructionRecord {
                    instruction,
                    input,
                    output,
                    meta: default_meta_for_line(line_no),
                });
            }
            Err(reason) => match mode {
                ParseMode::Strict => {
                    return Err(DatasetError::MalformedLine { line: line_no, reason })
                }
                ParseMode::Lenient => diagnostics.push(LineDiagnostic {
                    line: line_no,
                    reason,
                    disposition: Disposition::Rejected,
                }),
            },
        }
    }
    if let Some(line) = bad_utf8_line {
        diagnostics.push(LineDiagnostic {
            line,
            reason: "invalid UTF-8; remainder of input dropped".to_string(),
            disposition: Disposition::Rejected,
        });
    }
    Ok((records, diagnostics))
}

/// Serializes one record to its canonical single-line form (no newline).
pub fn write_wire_line(record: &InstructionRecord) -> String {
    serde_json::to_string(&WireRecord {
        instruction: &record.instruction,
        input: &record.input,
        output: &record.output,
    })
    .expect("three-string-field struct always serializes")
}

/// Writes records as canonical JSONL bytes.
///
/// Key order `instruction`, `input`, `output`; UTF-8 without BOM; LF line
/// terminators; minimal escaping. Every record must satisfy its phase rules.
pub fn write_jsonl(records: &[InstructionRecord]) -> Result<Vec<u8>, DatasetError> {
    let mut out = String::new();
    for record in records {
        let violations = validate_record(record, record.meta.phase);
        if !violations.is_empty() {
            return Err(DatasetError::InvalidRecord {
                record_id: record.meta.record_id.clone(),
                violations,
            });
        }
        out.push_str(&write_wire_line(record));
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// A single phase-rule violation. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    EmptyInstruction,
    EmptyOutput,
    /// Memorization-phase records must keep `input` empty.
    InputMustBeEmpty,
    /// Context-aware records must carry evidence in `input`.
    InputMustCarryEvidence,
    /// Evidence shorter than the configured minimum.
    EvidenceTooShort { chars: usize, min: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Minimum `input` length in characters for context-aware records.
    pub min_evidence_chars: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { min_evidence_chars: 20 }
    }
}

/// Checks a record against its phase rules with default options.
pub fn validate_record(record: &InstructionRecord, phase: DatasetPhase) -> Vec<Violation> {
    validate_record_with(record, phase, &ValidationOptions::default())
}

pub fn validate_record_with(
    record: &InstructionRecord,
    phase: DatasetPhase,
    options: &ValidationOptions,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    if record.instruction.trim().is_empty() {
        violations.push(Violation::EmptyInstruction);
    }
    if record.output.trim().is_empty() {
        violations.push(Violation::EmptyOutput);
    }
    match phase {
        DatasetPhase::P1General => {}
        DatasetPhase::P2Memorization => {
            if !record.input.is_empty() {
                violations.push(Violation::InputMustBeEmpty);
            }
        }
        DatasetPhase::P3ContextAware => {
            if record.input.trim().is_empty() {
                violations.push(Violation::InputMustCarryEvidence);
            } else {
                let chars = record.input.chars().count();
                if chars < options.min_evidence_chars {
                    violations.push(Violation::EvidenceTooShort {
                        chars,
                        min: options.min_evidence_chars,
                    });
                }
            }
        }
    }
    violations
}

/// A record dropped by [`dedupe`], with the id of the record it duplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RemovedDuplicate {
    pub record_id: String,
    pub duplicate_of: String,
}

pub const DEDUPE_SHINGLE_SIZE: usize = 3;

/// Removes duplicate instructions, keeping the earliest record.
///
/// Byte-identical instructions (after normalization) are always removed;
/// near-duplicates go when the Jaccard similarity of their word 3-shingles
/// reaches `jaccard_threshold`. Idempotent: running it again on the kept
/// list removes nothing.
pub fn dedupe(
    records: &[InstructionRecord],
    jaccard_threshold: f64,
) -> (Vec<InstructionRecord>, Vec<RemovedDuplicate>) {
    dedupe_with(records, jaccard_threshold, DEDUPE_SHINGLE_SIZE)
}

pub fn dedupe_with(
    records: &[InstructionRecord],
    jaccard_threshold: f64,
    shingle_size: usize,
) -> (Vec<InstructionRecord>, Vec<RemovedDuplicate>) {
    assert!(
        jaccard_threshold > 0.0 && jaccard_threshold <= 1.0,
        "jaccard_threshold must be in (0, 1]"
    );
    let mut kept: Vec<InstructionRecord> = Vec::new();
    let mut kept_norms: Vec<String> = Vec::new();
    let mut kept_shingles: Vec<BTreeSet<String>> = Vec::new();
    let mut removed: Vec<RemovedDuplicate> = Vec::new();

    for record in records {
        let norm = text::normalize(&record.instruction);
        let shingles = text::word_shingles(&record.instruction, shingle_size);
        let duplicate_of = kept_norms.iter().enumerate().find_map(|(i, kept_norm)| {
            if *kept_norm == norm
                || text::jaccard(&shingles, &kept_shingles[i]) >= jaccard_threshold
            {
                Some(kept[i].meta.record_id.clone())
            } else {
                None
            }
        });
        match duplicate_of {
            Some(duplicate_of) => removed.push(RemovedDuplicate {
                record_id: record.meta.record_id.clone(),
                duplicate_of,
            }),
            None => {
                kept.push(record.clone());
                kept_norms.push(norm);
                kept_shingles.push(shingles);
            }
        }
    }
    (kept, removed)
}

/// Deterministic seeded shuffle followed by a prefix split.
///
/// `|train| = floor(n × train_fraction)`; the same inputs and seed always
/// produce the identical split.
pub fn split_dataset(
    records: &[InstructionRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<InstructionRecord>, Vec<InstructionRecord>), DatasetError> {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must be in (0, 1)"
    );
    let n = records.len();
    if n < 2 {
        return Err(DatasetError::TooFew { got: n });
    }
    let perm = SplitMix64::for_stream(seed, "split").permutation(n);
    let train_len = (n as f64 * train_fraction) as usize; // truncation == floor for positive values
    let train = perm[..train_len].iter().map(|&i| records[i].clone()).collect();
    let eval = perm[train_len..].iter().map(|&i| records[i].clone()).collect();
    Ok((train, eval))
}

/// Mean and median of a character-length distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldLengthStats {
    pub mean: f64,
    pub median: f64,
}

fn length_stats(mut lengths: Vec<usize>) -> FieldLengthStats {
    if lengths.is_empty() {
        return FieldLengthStats { mean: 0.0, median: 0.0 };
    }
    let sum: usize = lengths.iter().sum();
    let mean = sum as f64 / lengths.len() as f64;
    lengths.sort_unstable();
    let mid = lengths.len() / 2;
    let median = if lengths.len() % 2 == 1 {
        lengths[mid] as f64
    } else {
        (lengths[mid - 1] + lengths[mid]) as f64 / 2.0
    };
    FieldLengthStats { mean, median }
}

/// Aggregate shape of a dataset, reported as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub record_count: usize,
    pub instruction_len: FieldLengthStats,
    pub input_len: FieldLengthStats,
    pub output_len: FieldLengthStats,
    pub empty_input_fraction: f64,
    pub adversarial_fraction: f64,
    /// Counts keyed by `doc_id#ordinal`.
    pub per_source_counts: BTreeMap<String, usize>,
    /// Records with no source article attached.
    pub sourceless_count: usize,
}

/// Computes deterministic dataset statistics; empty input yields zeros.
pub fn compute_stats(records: &[InstructionRecord]) -> DatasetStats {
    let n = records.len();
    let mut per_source_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut sourceless = 0usize;
    let mut empty_inputs = 0usize;
    let mut adversarial = 0usize;
    for r in records {
        match (&r.meta.source_doc, r.meta.source_ordinal) {
            (doc, Some(ord)) if !doc.is_empty() => {
                *per_source_counts.entry(alloc::format!("{doc}#{ord}")).or_default() += 1;
            }
            _ => sourceless += 1,
        }
        if r.input.is_empty() {
            empty_inputs += 1;
        }
        if r.meta.kind == RecordKind::Adversarial {
            adversarial += 1;
        }
    }
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    DatasetStats {
        record_count: n,
        instruction_len: length_stats(records.iter().map(|r| r.instruction.chars().count()).collect()),
        input_len: length_stats(records.iter().map(|r| r.input.chars().count()).collect()),
        output_len: length_stats(records.iter().map(|r| r.output.chars().count()).collect()),
        empty_input_fraction: frac(empty_inputs),
        adversarial_fraction: frac(adversarial),
        per_source_counts,
        sourceless_count: sourceless,
    }
}
