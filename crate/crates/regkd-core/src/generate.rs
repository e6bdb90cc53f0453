//! Orchestration of the phase strategies: memorization records, context
//! injection, adversarial sampling, and the full context-aware build.
//!
//! Stage boundaries are barriers. Everything is deterministic for a fixed
//! (corpus, plan, seed) when driven by the mock teacher: per-call seeds are
//! derived from the plan seed, a stage label, the pass number, and the
//! article ordinal, so no stage's randomness leaks into another.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::audit::{self, AuditCounts, ContradictionMode};
use crate::corpus::{Article, CorpusError, CorpusIndex};
use crate::dataset::{
    dedupe_with, validate_record, DatasetPhase, InstructionRecord, RecordKind, RecordMeta,
};
use crate::eval::{detect_rejection, RejectionLexicon};
use crate::rng::SplitMix64;
use crate::teacher::{
    self, parse_generated, render_prompt, PromptTemplate, RenderError, TeacherClient,
    TeacherError,
};

/// Targets and knobs for one generation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationPlan {
    pub phase: DatasetPhase,
    pub target_size: usize,
    /// Share of the target that must be adversarial records, in [0, 1).
    pub adversarial_fraction: f64,
    /// Expected (min, max) records per article call; max caps what is kept
    /// from a single completion.
    pub per_article_range: (u64, u64),
    pub seed: u64,
}

impl GenerationPlan {
    pub fn phase2(target_size: usize, seed: u64) -> Self {
        Self {
            phase: DatasetPhase::P2Memorization,
            target_size,
            adversarial_fraction: 0.0,
            per_article_range: (5, 12),
            seed,
        }
    }

    pub fn phase3(target_size: usize, adversarial_fraction: f64, seed: u64) -> Self {
        Self {
            phase: DatasetPhase::P3ContextAware,
            target_size,
            adversarial_fraction,
            per_article_range: (5, 12),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.target_size == 0 {
            return Err(GenerateError::PlanMismatch("target_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.adversarial_fraction) {
            return Err(GenerateError::PlanMismatch(
                "adversarial_fraction must be in [0, 1)".into(),
            ));
        }
        if self.per_article_range.0 > self.per_article_range.1 || self.per_article_range.0 == 0 {
            return Err(GenerateError::PlanMismatch(
                "per_article_range must satisfy 1 <= min <= max".into(),
            ));
        }
        Ok(())
    }

    /// Number of adversarial records the plan calls for.
    pub fn adversarial_target(&self) -> usize {
        (self.target_size as f64 * self.adversarial_fraction + 0.5) as usize
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("teacher unavailable: {0}")]
    TeacherUnavailable(#[from] TeacherError),
    #[error("plan mismatch: {0}")]
    PlanMismatch(String),
    #[error("prompt rendering failed: {0}")]
    Render(#[from] RenderError),
    #[error("audit failed: {0}")]
    Audit(#[from] audit::AuditError),
    #[error("corpus error: {0}")]
    Corpus(#[from] CorpusError),
}

/// Non-fatal conditions; partial output is still returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GenerateWarning {
    InsufficientYield { produced: usize, target: usize },
}

/// Records plus warnings from a generation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationBatch {
    pub records: Vec<InstructionRecord>,
    pub warnings: Vec<GenerateWarning>,
}

fn call_seed(plan_seed: u64, label: &str, pass: usize, ordinal: u32) -> u64 {
    SplitMix64::for_stream(plan_seed, &format!("{label}:{pass}:{ordinal}")).next_u64()
}

/// One template call over one article; parsed, capped, unvalidated.
fn complete_article(
    template: &PromptTemplate,
    article: &Article,
    seed: u64,
    cap: usize,
    client: &dyn TeacherClient,
) -> Result<Vec<InstructionRecord>, GenerateError> {
    let bindings: BTreeMap<String, String> =
        [("ARTICLE_TEXT".to_string(), article.body.clone())].into_iter().collect();
    let exchange = render_prompt(template, &bindings)?.with_seed(seed);
    let raw = client.complete(&exchange)?;
    let (mut records, _diags) = parse_generated(&raw);
    records.truncate(cap);
    Ok(records)
}

/// Memorization-format generation: one pass over the articles, keeping only
/// records that satisfy the phase rules (empty `input`, non-empty
/// instruction and output). Yield below half the target is flagged, not
/// fatal.
pub fn generate_phase2(
    articles: &[Article],
    client: &dyn TeacherClient,
    plan: &GenerationPlan,
) -> Result<GenerationBatch, GenerateError> {
    plan.validate()?;
    if plan.phase != DatasetPhase::P2Memorization {
        return Err(GenerateError::PlanMismatch("generate_phase2 needs a P2 plan".into()));
    }
    let template = teacher::template(teacher::ids::P2_RAW_CONVERTER).expect("built-in template");
    let origin = client.origin();
    let mut records = Vec::new();

    'articles: for article in articles {
        let seed = call_seed(plan.seed, "p2", 0, article.ordinal);
        let cap = plan.per_article_range.1 as usize;
        let candidates = complete_article(&template, article, seed, cap, client)?;
        let mut kept_for_article = 0usize;
        for candidate in candidates {
            if !validate_record(&candidate, DatasetPhase::P2Memorization).is_empty() {
                continue;
            }
            let mut meta = RecordMeta::new(
                &format!("p2-{}-a{:03}-q{:02}", article.doc_id, article.ordinal, kept_for_article),
                DatasetPhase::P2Memorization,
            );
            meta.source_doc = article.doc_id.clone();
            meta.source_ordinal = Some(article.ordinal);
            meta.origin = origin;
            records.push(InstructionRecord { meta, ..candidate });
            kept_for_article += 1;
            if records.len() >= plan.target_size {
                break 'articles;
            }
        }
    }

    let mut warnings = Vec::new();
    if records.len() * 2 < plan.target_size {
        warnings.push(GenerateWarning::InsufficientYield {
            produced: records.len(),
            target: plan.target_size,
        });
    }
    Ok(GenerationBatch { records, warnings })
}

/// How evidence gets into the `input` field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InjectMode {
    /// Deterministic: take the top supporting article when its grounding
    /// score reaches the threshold.
    Lexical { grounding_threshold: f64 },
    /// Delegate location to the teacher, then verify every returned input
    /// is a verbatim substring of the corpus.
    TeacherAssisted,
}

impl Default for InjectMode {
    fn default() -> Self {
        InjectMode::Lexical { grounding_threshold: 0.6 }
    }
}

/// A record that could not be grounded; excluded from valid output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnsupportedRecord {
    pub record_id: String,
    pub reason: String,
}

/// Successfully grounded records plus the rejects.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectOutcome {
    pub records: Vec<InstructionRecord>,
    pub unsupported: Vec<UnsupportedRecord>,
}

const INJECT_BATCH: usize = 20;

/// Fills each record's `input` with supporting evidence from the corpus.
///
/// Output records satisfy the context-phase rules; records whose evidence
/// cannot be established are flagged `Unsupported` and excluded.
pub fn inject_context(
    records: &[InstructionRecord],
    index: &CorpusIndex,
    client: &dyn TeacherClient,
    mode: InjectMode,
) -> Result<InjectOutcome, GenerateError> {
    if index.is_empty() {
        return Err(GenerateError::Corpus(CorpusError::EmptyIndex));
    }
    match mode {
        InjectMode::Lexical { grounding_threshold } => {
            Ok(inject_lexical(records, index, grounding_threshold))
        }
        InjectMode::TeacherAssisted => inject_teacher(records, index, client),
    }
}

fn finish_injected(
    mut record: InstructionRecord,
    body: &str,
    doc_id: &str,
    article_ordinal: u32,
    unsupported: &mut Vec<UnsupportedRecord>,
) -> Option<InstructionRecord> {
    record.input = body.to_string();
    record.meta.phase = DatasetPhase::P3ContextAware;
    record.meta.source_doc = doc_id.to_string();
    record.meta.source_ordinal = Some(article_ordinal);
    let violations = validate_record(&record, DatasetPhase::P3ContextAware);
    if violations.is_empty() {
        Some(record)
    } else {
        unsupported.push(UnsupportedRecord {
            record_id: record.meta.record_id.clone(),
            reason: format!("injected record still invalid: {violations:?}"),
        });
        None
    }
}

fn inject_lexical(
    records: &[InstructionRecord],
    index: &CorpusIndex,
    grounding_threshold: f64,
) -> InjectOutcome {
    let mut out = Vec::new();
    let mut unsupported = Vec::new();
    for record in records {
        let hits = match index.find_supporting_article(&record.output, 1) {
            Ok(hits) => hits,
            Err(CorpusError::EmptyQuery) => {
                unsupported.push(UnsupportedRecord {
                    record_id: record.meta.record_id.clone(),
                    reason: "answer has no content tokens".to_string(),
                });
                continue;
            }
            Err(_) => Vec::new(),
        };
        let supported = hits.first().filter(|h| h.score >= grounding_threshold);
        match supported {
            Some(hit) => {
                let article = index.article(hit.ordinal).expect("ordinal from search");
                if let Some(injected) = finish_injected(
                    record.clone(),
                    &article.body,
                    &article.doc_id,
                    article.ordinal,
                    &mut unsupported,
                ) {
                    out.push(injected);
                }
            }
            None => unsupported.push(UnsupportedRecord {
                record_id: record.meta.record_id.clone(),
                reason: format!(
                    "best grounding score {:.3} below threshold {grounding_threshold}",
                    hits.first().map(|h| h.score).unwrap_or(0.0)
                ),
            }),
        }
    }
    InjectOutcome { records: out, unsupported }
}

fn inject_teacher(
    records: &[InstructionRecord],
    index: &CorpusIndex,
    client: &dyn TeacherClient,
) -> Result<InjectOutcome, GenerateError> {
    let template =
        teacher::template(teacher::ids::P3_CONTEXT_INJECTION).expect("built-in template");
    let source_text = crate::corpus::reconstruct(index.articles());
    let mut out = Vec::new();
    let mut unsupported = Vec::new();

    for batch in records.chunks(INJECT_BATCH) {
        let mut lines = String::new();
        for record in batch {
            lines.push_str(&crate::dataset::write_wire_line(record));
            lines.push('\n');
        }
        let bindings: BTreeMap<String, String> = [
            ("SOURCE_TEXT".to_string(), source_text.clone()),
            ("JSONL_LINES".to_string(), lines),
        ]
        .into_iter()
        .collect();
        let exchange = render_prompt(&template, &bindings)?.with_seed(0);
        let raw = client.complete(&exchange)?;
        let (returned, _) = parse_generated(&raw);

        // Match positionally when the teacher kept the count, otherwise by
        // normalized instruction.
        for (i, record) in batch.iter().enumerate() {
            let matched = if returned.len() == batch.len() {
                returned.get(i)
            } else {
                let want = crate::text::normalize(&record.instruction);
                returned.iter().find(|r| crate::text::normalize(&r.instruction) == want)
            };
            let Some(filled) = matched else {
                unsupported.push(UnsupportedRecord {
                    record_id: record.meta.record_id.clone(),
                    reason: "teacher did not return this record".to_string(),
                });
                continue;
            };
            if filled.input.is_empty() || !index.contains_verbatim(&filled.input) {
                unsupported.push(UnsupportedRecord {
                    record_id: record.meta.record_id.clone(),
                    reason: "returned input is not verbatim corpus text".to_string(),
                });
                continue;
            }
            let corpus_ordinal = index.find_verbatim(&filled.input).expect("verified above");
            let article = index.article(corpus_ordinal).expect("ordinal from search");
            let mut candidate = record.clone();
            candidate.output = filled.output.clone();
            if let Some(injected) = finish_injected(
                candidate,
                &filled.input,
                &article.doc_id,
                article.ordinal,
                &mut unsupported,
            ) {
                out.push(injected);
            }
        }
    }
    Ok(InjectOutcome { records: out, unsupported })
}

const MAX_ADVERSARIAL_PASSES: usize = 4;

/// Misconception-based records whose correct answer is a refusal.
///
/// A candidate survives only when (a) its output is detected as a
/// rejection, (b) its input is non-empty verbatim text from the given
/// articles, and (c) it satisfies the context-phase rules.
pub fn generate_adversarial(
    articles: &[Article],
    client: &dyn TeacherClient,
    plan: &GenerationPlan,
) -> Result<GenerationBatch, GenerateError> {
    plan.validate()?;
    if plan.adversarial_fraction <= 0.0 {
        return Err(GenerateError::PlanMismatch(
            "adversarial generation needs adversarial_fraction > 0".into(),
        ));
    }
    let template =
        teacher::template(teacher::ids::P3_ADVERSARIAL_SAMPLING).expect("built-in template");
    let lexicon = RejectionLexicon::default();
    let origin = client.origin();
    let needed = plan.adversarial_target().max(1);
    let mut records: Vec<InstructionRecord> = Vec::new();
    let mut seen_instructions: BTreeSet<String> = BTreeSet::new();

    'passes: for pass in 0..MAX_ADVERSARIAL_PASSES {
        for article in articles {
            let seed = call_seed(plan.seed, "adv", pass, article.ordinal);
            let candidates = complete_article(&template, article, seed, usize::MAX, client)?;
            for candidate in candidates {
                let is_rejection = detect_rejection(&candidate.output, &lexicon);
                let verbatim = !candidate.input.is_empty()
                    && articles.iter().any(|a| a.body.contains(&candidate.input));
                if !is_rejection || !verbatim {
                    continue;
                }
                if !validate_record(&candidate, DatasetPhase::P3ContextAware).is_empty() {
                    continue;
                }
                if !seen_instructions.insert(crate::text::normalize(&candidate.instruction)) {
                    continue;
                }
                let mut meta = RecordMeta::new(
                    &format!(
                        "adv-{}-a{:03}-p{}-q{:02}",
                        article.doc_id,
                        article.ordinal,
                        pass,
                        records.len()
                    ),
                    DatasetPhase::P3ContextAware,
                );
                meta.source_doc = article.doc_id.clone();
                meta.source_ordinal = Some(article.ordinal);
                meta.kind = RecordKind::Adversarial;
                meta.origin = origin;
                records.push(InstructionRecord { meta, ..candidate });
                if records.len() >= needed {
                    break 'passes;
                }
            }
        }
    }

    let mut warnings = Vec::new();
    if records.len() < needed {
        warnings.push(GenerateWarning::InsufficientYield {
            produced: records.len(),
            target: needed,
        });
    }
    Ok(GenerationBatch { records, warnings })
}

/// Knobs for [`build_phase3`] beyond the plan itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub inject_mode: InjectMode,
    pub dedupe_threshold: f64,
    pub dedupe_shingle_size: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            inject_mode: InjectMode::default(),
            dedupe_threshold: 0.9,
            dedupe_shingle_size: 3,
        }
    }
}

/// Per-stage counts for one context-aware build; serialized as
/// `build_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub seed: u64,
    pub target_size: usize,
    pub adversarial_target: usize,
    pub generation_passes: usize,
    pub normal_candidates: usize,
    pub injected: usize,
    pub unsupported: usize,
    pub adversarial_candidates: usize,
    pub combined: usize,
    pub dedupe_removed: usize,
    pub after_dedupe: usize,
    pub audit: AuditCounts,
    pub after_audit: usize,
    pub selected_normal: usize,
    pub selected_adversarial: usize,
    pub final_count: usize,
    /// Records missing from the target when the corpus could not yield
    /// enough; `None` when the build hit its size.
    pub shortfall: Option<usize>,
    pub warnings: Vec<GenerateWarning>,
}

const MAX_GENERATION_PASSES: usize = 6;
// Generation margin over the target (3/2) to absorb dedupe and audit losses.
const OVERSAMPLE_NUM: usize = 3;
const OVERSAMPLE_DEN: usize = 2;

/// Seeded choice of `k` record ids from a pool.
fn select_seeded(
    pool: &[&InstructionRecord],
    k: usize,
    plan_seed: u64,
    label: &str,
) -> BTreeSet<String> {
    let mut rng = SplitMix64::for_stream(plan_seed, label);
    let perm = rng.permutation(pool.len());
    perm.into_iter().take(k).map(|i| pool[i].meta.record_id.clone()).collect()
}

/// Full context-aware build: generate normal Q&A, inject evidence, add
/// adversarial records up to the plan's fraction, dedupe, audit, then
/// select down to the target with a deterministic seeded choice that
/// preserves the adversarial fraction.
pub fn build_phase3(
    corpus: &CorpusIndex,
    client: &dyn TeacherClient,
    plan: &GenerationPlan,
    options: &BuildOptions,
) -> Result<(Vec<InstructionRecord>, BuildReport), GenerateError> {
    plan.validate()?;
    if plan.phase != DatasetPhase::P3ContextAware {
        return Err(GenerateError::PlanMismatch("build_phase3 needs a P3 plan".into()));
    }
    if corpus.is_empty() {
        return Err(GenerateError::Corpus(CorpusError::EmptyIndex));
    }

    let adversarial_target = plan.adversarial_target();
    let normal_target = plan.target_size - adversarial_target.min(plan.target_size);
    let origin = client.origin();
    let template = teacher::template(teacher::ids::P2_RAW_CONVERTER).expect("built-in template");

    // Stage 1: normal Q&A candidates (memorization format, empty input),
    // oversampled to absorb later losses.
    let normal_goal = normal_target * OVERSAMPLE_NUM / OVERSAMPLE_DEN + 1;
    let mut normal_candidates: Vec<InstructionRecord> = Vec::new();
    let mut seen_instructions: BTreeSet<String> = BTreeSet::new();
    let mut generation_passes = 0usize;
    'gen: for pass in 0..MAX_GENERATION_PASSES {
        generation_passes = pass + 1;
        for article in corpus.articles() {
            let seed = call_seed(plan.seed, "p3-normal", pass, article.ordinal);
            let cap = plan.per_article_range.1 as usize;
            let candidates = complete_article(&template, article, seed, cap, client)?;
            for candidate in candidates {
                if !validate_record(&candidate, DatasetPhase::P2Memorization).is_empty() {
                    continue;
                }
                if !seen_instructions.insert(crate::text::normalize(&candidate.instruction)) {
                    continue;
                }
                let mut meta = RecordMeta::new(
                    &format!(
                        "p3n-{}-a{:03}-p{}-q{:04}",
                        article.doc_id,
                        article.ordinal,
                        pass,
                        normal_candidates.len()
                    ),
                    DatasetPhase::P3ContextAware,
                );
                meta.source_doc = article.doc_id.clone();
                meta.source_ordinal = Some(article.ordinal);
                meta.origin = origin;
                normal_candidates.push(InstructionRecord { meta, ..candidate });
                if normal_candidates.len() >= normal_goal {
                    break 'gen;
                }
            }
        }
    }

    // Stage 2: evidence injection.
    let inject_outcome = inject_context(&normal_candidates, corpus, client, options.inject_mode)?;

    // Stage 3: adversarial sampling toward the plan's fraction.
    let mut adversarial_batch = GenerationBatch { records: Vec::new(), warnings: Vec::new() };
    if adversarial_target > 0 {
        let mut adversarial_plan = plan.clone();
        adversarial_plan.target_size =
            (adversarial_target * OVERSAMPLE_NUM / OVERSAMPLE_DEN + 1).max(1);
        adversarial_plan.adversarial_fraction = 0.999_999;
        adversarial_batch = generate_adversarial(corpus.articles(), client, &adversarial_plan)?;
    }

    // Stage 4: dedupe over the combined pool.
    let mut combined = inject_outcome.records.clone();
    combined.extend(adversarial_batch.records.iter().cloned());
    let combined_count = combined.len();
    let (deduped, removed) =
        dedupe_with(&combined, options.dedupe_threshold, options.dedupe_shingle_size);

    // Stage 5: final-form audit.
    let report = audit::audit_phase3(&deduped, ContradictionMode::Heuristic)?;
    let audited = audit::apply_report(&deduped, &report)?;

    // Stage 6: deterministic seeded selection preserving the fraction.
    let normal_pool: Vec<&InstructionRecord> =
        audited.iter().filter(|r| r.meta.kind != RecordKind::Adversarial).collect();
    let adversarial_pool: Vec<&InstructionRecord> =
        audited.iter().filter(|r| r.meta.kind == RecordKind::Adversarial).collect();
    let take_normal = normal_target.min(normal_pool.len());
    let take_adversarial = adversarial_target.min(adversarial_pool.len());
    let mut selected = select_seeded(&normal_pool, take_normal, plan.seed, "select-normal");
    selected.extend(select_seeded(
        &adversarial_pool,
        take_adversarial,
        plan.seed,
        "select-adversarial",
    ));
    let final_records: Vec<InstructionRecord> = audited
        .iter()
        .filter(|r| selected.contains(&r.meta.record_id))
        .cloned()
        .collect();

    let final_count = final_records.len();
    let shortfall = (final_count < plan.target_size).then(|| plan.target_size - final_count);
    let mut warnings = adversarial_batch.warnings.clone();
    if shortfall.is_some() {
        warnings.push(GenerateWarning::InsufficientYield {
            produced: final_count,
            target: plan.target_size,
        });
    }

    let build_report = BuildReport {
        seed: plan.seed,
        target_size: plan.target_size,
        adversarial_target,
        generation_passes,
        normal_candidates: normal_candidates.len(),
        injected: inject_outcome.records.len(),
        unsupported: inject_outcome.unsupported.len(),
        adversarial_candidates: adversarial_batch.records.len(),
        combined: combined_count,
        dedupe_removed: removed.len(),
        after_dedupe: deduped.len(),
        audit: report.counts,
        after_audit: audited.len(),
        selected_normal: take_normal,
        selected_adversarial: take_adversarial,
        final_count,
        shortfall,
        warnings,
    };
    Ok((final_records, build_report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_heading_patterns, ingest_document, segment_articles};
    use crate::dataset::RecordOrigin;
    use crate::teacher::MockTeacher;
    use alloc::vec::Vec;

    const SMALL_REG: &str = "\
Article 1 - Registration
Registration is renewed each term through the student portal. \
The portal closes at midnight on the deadline day. \
Late registration requires a petition to the faculty board. \
The board reviews petitions within 5 days.
Article 2 - Appeals
An appeal against an exam grade is filed within 7 days of the announcement. \
The examining committee decides within 15 days. \
A second appeal for the same exam is not accepted.
Article 3 - Mail
Final registration cannot be done by mail. \
Documents are delivered in person at the registrar. \
Couriers and proxies are not accepted for final registration.
Article 4 - Attendance
Attendance of at least seventy percent is mandatory in each course. \
Students below the threshold fail the course automatically. \
Medical reports excuse absences only when approved by the dean.
Article 5 - Grades
A grade point average of at least 2.25 is required to take upper-semester courses. \
The average is recomputed at the end of each term. \
Transcripts are issued by the registrar on request.
Article 6 - Leave
A leave of absence is granted for at most two terms. \
Applications for leave are filed before the term starts. \
Tuition is not charged during an approved leave.
Article 7 - Exams
Make-up exams are offered only with an approved excuse. \
The make-up schedule is announced by the department. \
Missing a make-up exam forfeits the right to that exam.
Article 8 - Graduation
Graduation requires completing all courses with a passing grade. \
The graduation average must be at least 2.00. \
Diplomas are prepared within one month of the decision.
";

    fn articles() -> Vec<Article> {
        let doc = ingest_document(SMALL_REG.as_bytes(), "reg-test", "Test Regulation").unwrap();
        segment_articles(&doc, &default_heading_patterns()).unwrap()
    }

    fn index() -> CorpusIndex {
        CorpusIndex::build(articles()).unwrap()
    }

    #[test]
    fn phase2_generation_yields_valid_memorization_records() {
        let plan = GenerationPlan::phase2(60, 7);
        let batch = generate_phase2(&articles(), &MockTeacher, &plan).unwrap();
        assert!(batch.records.len() >= 30, "got {}", batch.records.len());
        assert!(batch.records.len() <= 60);
        for r in &batch.records {
            assert_eq!(r.input, "", "memorization records keep input empty");
            assert!(!r.instruction.is_empty() && !r.output.is_empty());
            assert_eq!(r.meta.phase, DatasetPhase::P2Memorization);
            assert_eq!(r.meta.origin, RecordOrigin::Mock);
            assert!(r.meta.source_ordinal.is_some());
        }
    }

    #[test]
    fn phase2_single_tiny_article_flags_shortfall() {
        let doc = ingest_document(b"Article 1\nOne rule only.", "tiny", "t").unwrap();
        let arts = segment_articles(&doc, &default_heading_patterns()).unwrap();
        let plan = GenerationPlan::phase2(100, 1);
        let batch = generate_phase2(&arts, &MockTeacher, &plan).unwrap();
        assert!(!batch.records.is_empty());
        assert!(matches!(
            batch.warnings.first(),
            Some(GenerateWarning::InsufficientYield { .. })
        ));
    }

    #[test]
    fn phase2_rejects_wrong_plan_phase() {
        let plan = GenerationPlan::phase3(10, 0.2, 1);
        assert!(matches!(
            generate_phase2(&articles(), &MockTeacher, &plan),
            Err(GenerateError::PlanMismatch(_))
        ));
    }

    #[test]
    fn lexical_injection_grounds_supported_records() {
        let idx = index();
        let mut meta = RecordMeta::new("q1", DatasetPhase::P2Memorization);
        meta.origin = RecordOrigin::Mock;
        let supported = InstructionRecord::new(
            "How long do I have to appeal?",
            "",
            "An appeal against an exam grade is filed within 7 days of the announcement.",
            meta.clone(),
        );
        let mut meta2 = meta.clone();
        meta2.record_id = "q2".into();
        let unsupported = InstructionRecord::new(
            "What about parking?",
            "",
            "Spacecraft docking procedures are classified.",
            meta2,
        );
        let outcome = inject_context(
            &[supported, unsupported],
            &idx,
            &MockTeacher,
            InjectMode::default(),
        )
        .unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.unsupported.len(), 1);
        let injected = &outcome.records[0];
        assert_eq!(injected.meta.source_ordinal, Some(2));
        assert!(injected.input.contains("appeal against an exam grade"));
        assert!(validate_record(injected, DatasetPhase::P3ContextAware).is_empty());
        // Evidence is the article body verbatim.
        assert_eq!(injected.input, idx.article(2).unwrap().body);
    }

    #[test]
    fn teacher_assisted_injection_inputs_are_verbatim() {
        let idx = index();
        let plan = GenerationPlan::phase2(20, 3);
        let batch = generate_phase2(&articles(), &MockTeacher, &plan).unwrap();
        let outcome =
            inject_context(&batch.records, &idx, &MockTeacher, InjectMode::TeacherAssisted)
                .unwrap();
        assert!(!outcome.records.is_empty());
        for r in &outcome.records {
            assert!(idx.contains_verbatim(&r.input), "input must be verbatim corpus text");
            assert!(validate_record(r, DatasetPhase::P3ContextAware).is_empty());
        }
    }

    #[test]
    fn adversarial_records_pass_all_three_filters() {
        let plan = GenerationPlan::phase3(50, 0.4, 11);
        let batch = generate_adversarial(&articles(), &MockTeacher, &plan).unwrap();
        assert!(!batch.records.is_empty());
        let lexicon = RejectionLexicon::default();
        let arts = articles();
        for r in &batch.records {
            assert!(detect_rejection(&r.output, &lexicon), "output must reject: {}", r.output);
            assert!(arts.iter().any(|a| a.body.contains(&r.input)));
            assert!(validate_record(r, DatasetPhase::P3ContextAware).is_empty());
            assert_eq!(r.meta.kind, RecordKind::Adversarial);
        }
    }

    #[test]
    fn adversarial_requires_positive_fraction() {
        let plan = GenerationPlan::phase2(10, 1);
        assert!(matches!(
            generate_adversarial(&articles(), &MockTeacher, &plan),
            Err(GenerateError::PlanMismatch(_))
        ));
    }

    #[test]
    fn mock_build_hits_target_with_fraction() {
        let plan = GenerationPlan::phase3(60, 0.2, 42);
        let (records, report) =
            build_phase3(&index(), &MockTeacher, &plan, &BuildOptions::default()).unwrap();
        assert_eq!(records.len(), 60, "report: {report:?}");
        let adversarial =
            records.iter().filter(|r| r.meta.kind == RecordKind::Adversarial).count();
        assert!((11..=13).contains(&adversarial), "adversarial count {adversarial}");
        assert_eq!(report.final_count, 60);
        assert_eq!(report.shortfall, None);
        let idx = index();
        for r in &records {
            assert!(!r.input.is_empty());
            assert!(idx.contains_verbatim(&r.input));
        }
    }

    #[test]
    fn build_reaudit_deletes_nothing() {
        let plan = GenerationPlan::phase3(40, 0.25, 5);
        let (records, _) =
            build_phase3(&index(), &MockTeacher, &plan, &BuildOptions::default()).unwrap();
        let report = audit::audit_phase3(&records, ContradictionMode::Heuristic).unwrap();
        assert_eq!(report.counts.deleted, 0);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let plan = GenerationPlan::phase3(30, 0.2, 9);
        let (a, ra) = build_phase3(&index(), &MockTeacher, &plan, &BuildOptions::default()).unwrap();
        let (b, rb) = build_phase3(&index(), &MockTeacher, &plan, &BuildOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);

        let other = GenerationPlan::phase3(30, 0.2, 10);
        let (c, _) = build_phase3(&index(), &MockTeacher, &other, &BuildOptions::default()).unwrap();
        let ids_a: Vec<&str> = a.iter().map(|r| r.meta.record_id.as_str()).collect();
        let ids_c: Vec<&str> = c.iter().map(|r| r.meta.record_id.as_str()).collect();
        assert_ne!(ids_a, ids_c, "different seeds should select differently");
    }

    #[test]
    fn build_from_starved_corpus_flags_shortfall() {
        let doc = ingest_document(
            b"Article 1\nSingle rule here.\nArticle 2\nAnother lone rule.",
            "tiny",
            "t",
        )
        .unwrap();
        let arts = segment_articles(&doc, &default_heading_patterns()).unwrap();
        let idx = CorpusIndex::build(arts).unwrap();
        let plan = GenerationPlan::phase3(200, 0.2, 1);
        let (records, report) =
            build_phase3(&idx, &MockTeacher, &plan, &BuildOptions::default()).unwrap();
        assert!(records.len() < 200);
        assert!(report.shortfall.is_some());
        assert!(matches!(
            report.warnings.last(),
            Some(GenerateWarning::InsufficientYield { .. })
        ));
    }
}
