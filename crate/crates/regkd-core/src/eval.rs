//! Three-tier evaluation harness with refusal detection.
//!
//! Cases carry a machine-checkable expectation — required/forbidden fact
//! patterns, a rejection contract, or a numeric-comparison verdict — so
//! every verdict is a pure function of (case, answer, lexicons) and reports
//! are byte-stable. Fact matching is pattern-based and number-aware
//! (`7` matches `seven`); refusal detection looks only at the answer's
//! first sentence so a later aside can't flip the verdict.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

/// Difficulty tier of a test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTier {
    /// Direct queries about procedural articles.
    T1Regulation,
    /// Hybrid set including adversarial trap questions.
    T2General,
    /// Multi-step logic and mathematical comparisons.
    T3Challenging,
}

impl EvalTier {
    pub const ALL: [EvalTier; 3] =
        [EvalTier::T1Regulation, EvalTier::T2General, EvalTier::T3Challenging];

    pub fn label(self) -> &'static str {
        match self {
            EvalTier::T1Regulation => "Test 1: Regulation",
            EvalTier::T2General => "Test 2: General",
            EvalTier::T3Challenging => "Test 3: Challenging",
        }
    }

    pub fn content_description(self) -> &'static str {
        match self {
            EvalTier::T1Regulation => "Direct lookups of procedural rules",
            EvalTier::T2General => "Mixed set including trap questions",
            EvalTier::T3Challenging => "Multi-step logic and numeric comparisons",
        }
    }
}

/// What a correct answer must look like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Expectation {
    /// All required patterns must match, no forbidden pattern may.
    Fact {
        required_patterns: Vec<String>,
        #[serde(default)]
        forbidden_patterns: Vec<String>,
    },
    /// The answer must be a refusal.
    Rejection,
    /// The answer's polarity must equal `correct_verdict`, which encodes
    /// whether `given` actually satisfies the rule's `threshold`.
    NumericComparison { threshold: f64, given: f64, correct_verdict: bool },
}

impl Expectation {
    /// Builds a minimum-threshold comparison: the verdict is correct to
    /// affirm exactly when `given >= threshold`.
    pub fn minimum_threshold(threshold: f64, given: f64) -> Self {
        Expectation::NumericComparison { threshold, given, correct_verdict: given >= threshold }
    }
}

/// One tiered test question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub case_id: String,
    pub tier: EvalTier,
    pub question: String,
    pub expectation: Expectation,
    #[serde(default)]
    pub is_trap: bool,
}

/// One model answer for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub case_id: String,
    pub model_answer: String,
    #[serde(default)]
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("suite line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("no transcript for case {0}")]
    MissingTranscript(String),
    #[error("model adapter failed: {0}")]
    Adapter(String),
}

/// Loads and validates a JSONL case suite.
pub fn load_suite(bytes: &[u8]) -> Result<Vec<EvalCase>, EvalError> {
    let content = core::str::from_utf8(bytes).map_err(|e| EvalError::Schema {
        line: 1,
        reason: format!("invalid UTF-8: {e}"),
    })?;
    let mut cases = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in content.split('\n').enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let case: EvalCase = serde_json::from_str(line)
            .map_err(|e| EvalError::Schema { line: line_no, reason: e.to_string() })?;
        if case.case_id.trim().is_empty() {
            return Err(EvalError::Schema { line: line_no, reason: "empty case_id".into() });
        }
        if !seen.insert(case.case_id.clone()) {
            return Err(EvalError::Schema {
                line: line_no,
                reason: format!("duplicate case_id `{}`", case.case_id),
            });
        }
        if let Expectation::Fact { required_patterns, .. } = &case.expectation {
            if required_patterns.iter().all(|p| p.trim().is_empty()) {
                return Err(EvalError::Schema {
                    line: line_no,
                    reason: "fact expectation needs at least one required pattern".into(),
                });
            }
        }
        cases.push(case);
    }
    Ok(cases)
}

/// Serializes a suite back to JSONL (one case per line).
pub fn write_suite(cases: &[EvalCase]) -> Vec<u8> {
    let mut out = String::new();
    for case in cases {
        out.push_str(&serde_json::to_string(case).expect("case serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

/// Refusal and affirmation cues used to classify an answer's stance.
///
/// Interjections (`No`, `Hayır`) count only when they open the answer and
/// are immediately followed by punctuation — `No, according to...` is a
/// refusal, `No further documents are needed` is not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionLexicon {
    pub rejection_interjections: Vec<String>,
    pub rejection_phrases: Vec<String>,
    pub affirmation_interjections: Vec<String>,
    pub affirmation_phrases: Vec<String>,
}

impl Default for RejectionLexicon {
    fn default() -> Self {
        let own = |items: &[&str]| items.iter().map(|s| (*s).to_owned()).collect::<Vec<_>>();
        Self {
            rejection_interjections: own(&["no", "hayır"]),
            rejection_phrases: own(&[
                "not possible",
                "cannot",
                "can not",
                "can t",
                "not permitted",
                "not allowed",
                "not accepted",
                "is not",
                "mümkün değil",
                "yapılamaz",
                "izin verilmez",
                "kabul edilmez",
                "olamaz",
                "gönderilemez",
            ]),
            affirmation_interjections: own(&["yes", "evet"]),
            affirmation_phrases: own(&["of course", "certainly", "elbette", "tabii"]),
        }
    }
}

fn window_position(tokens: &[String], phrase: &str) -> Option<usize> {
    let needle = text::tokenize(phrase);
    if needle.is_empty() || needle.len() > tokens.len() {
        return None;
    }
    tokens.windows(needle.len()).position(|w| w == needle.as_slice())
}

/// Earliest rejection / affirmation cue positions in the first sentence.
fn cue_positions(answer: &str, lexicon: &RejectionLexicon) -> (Option<usize>, Option<usize>) {
    let trimmed = answer.trim();
    let first = text::first_sentence(trimmed);
    let tokens = text::tokenize(first);
    if tokens.is_empty() {
        return (None, None);
    }

    let mut rejection: Option<usize> = None;
    // Interjection form: the very first word, fused to punctuation.
    for cue in &lexicon.rejection_interjections {
        if tokens[0] == *cue {
            let after = trimmed.chars().nth(cue.chars().count());
            if matches!(after, Some(',' | '.' | '!' | ';' | ':')) {
                rejection = Some(0);
            }
        }
    }
    for phrase in &lexicon.rejection_phrases {
        if let Some(pos) = window_position(&tokens, phrase) {
            rejection = Some(rejection.map_or(pos, |r| r.min(pos)));
        }
    }

    let mut affirmation: Option<usize> = None;
    for cue in &lexicon.affirmation_interjections {
        if tokens[0] == *cue {
            affirmation = Some(0);
        }
    }
    for phrase in &lexicon.affirmation_phrases {
        if let Some(pos) = window_position(&tokens, phrase) {
            affirmation = Some(affirmation.map_or(pos, |a| a.min(pos)));
        }
    }

    (rejection, affirmation)
}

/// True when a refusal cue matches within the first sentence and no
/// affirmation cue precedes it. Invariant under surrounding whitespace and
/// letter case.
pub fn detect_rejection(answer: &str, lexicon: &RejectionLexicon) -> bool {
    let (rejection, affirmation) = cue_positions(answer, lexicon);
    match (rejection, affirmation) {
        (Some(r), Some(a)) => r <= a,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Counterpart of [`detect_rejection`] for affirmative stances.
pub fn detect_affirmation(answer: &str, lexicon: &RejectionLexicon) -> bool {
    let (rejection, affirmation) = cue_positions(answer, lexicon);
    match (rejection, affirmation) {
        (Some(r), Some(a)) => a < r,
        (None, Some(_)) => true,
        _ => false,
    }
}

/// The scoring outcome for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub correct: bool,
    /// Why the answer failed; empty for correct answers.
    pub reason: String,
}

impl Verdict {
    fn correct() -> Self {
        Self { correct: true, reason: String::new() }
    }
    fn incorrect(reason: &str) -> Self {
        Self { correct: false, reason: reason.to_string() }
    }
}

/// Failure label for numeric-comparison misjudgments.
pub const LOGICAL_GAP: &str = "Logical Gap";

/// Number-aware normalized form used for pattern containment.
fn match_form(s: &str) -> String {
    text::map_numerals(&text::tokenize(s)).join(" ")
}

fn pattern_matches(pattern: &str, answer_form: &str) -> bool {
    let needle = match_form(pattern);
    needle.is_empty() || answer_form.contains(&needle)
}

/// Scores one answer against one case. Pure and deterministic.
pub fn score_case(case: &EvalCase, answer: &str) -> Verdict {
    score_case_with(case, answer, &RejectionLexicon::default())
}

pub fn score_case_with(case: &EvalCase, answer: &str, lexicon: &RejectionLexicon) -> Verdict {
    match &case.expectation {
        Expectation::Fact { required_patterns, forbidden_patterns } => {
            let answer_form = match_form(answer);
            for pattern in required_patterns {
                if !pattern_matches(pattern, &answer_form) {
                    return Verdict::incorrect(&format!("missing required pattern `{pattern}`"));
                }
            }
            for pattern in forbidden_patterns {
                if !pattern.trim().is_empty() && pattern_matches(pattern, &answer_form) {
                    return Verdict::incorrect(&format!("matched forbidden pattern `{pattern}`"));
                }
            }
            Verdict::correct()
        }
        Expectation::Rejection => {
            if detect_rejection(answer, lexicon) {
                Verdict::correct()
            } else {
                Verdict::incorrect("expected a rejection")
            }
        }
        Expectation::NumericComparison { correct_verdict, .. } => {
            let model_verdict = if detect_rejection(answer, lexicon) {
                Some(false)
            } else if detect_affirmation(answer, lexicon) {
                Some(true)
            } else {
                None
            };
            match model_verdict {
                Some(v) if v == *correct_verdict => Verdict::correct(),
                Some(_) => Verdict::incorrect(LOGICAL_GAP),
                None => Verdict::incorrect("no clear verdict in answer"),
            }
        }
    }
}

/// A source of answers: an HTTP endpoint (in the companion crate) or a
/// canned transcript file.
pub trait ModelAdapter {
    fn answer(&self, case: &EvalCase) -> Result<String, EvalError>;
}

/// Replays answers from a transcript file; requires full coverage.
pub struct CannedTranscripts {
    answers: BTreeMap<String, String>,
}

impl CannedTranscripts {
    pub fn new(transcripts: &[Transcript]) -> Self {
        Self {
            answers: transcripts
                .iter()
                .map(|t| (t.case_id.clone(), t.model_answer.clone()))
                .collect(),
        }
    }

    /// Parses a transcript JSONL file.
    pub fn from_jsonl(bytes: &[u8]) -> Result<Self, EvalError> {
        Ok(Self::new(&parse_transcripts(bytes)?))
    }
}

/// Parses transcripts from JSONL bytes.
pub fn parse_transcripts(bytes: &[u8]) -> Result<Vec<Transcript>, EvalError> {
    let content = core::str::from_utf8(bytes).map_err(|e| EvalError::Schema {
        line: 1,
        reason: format!("invalid UTF-8: {e}"),
    })?;
    let mut transcripts = Vec::new();
    for (idx, line) in content.split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: Transcript = serde_json::from_str(line)
            .map_err(|e| EvalError::Schema { line: idx + 1, reason: e.to_string() })?;
        transcripts.push(t);
    }
    Ok(transcripts)
}

impl ModelAdapter for CannedTranscripts {
    fn answer(&self, case: &EvalCase) -> Result<String, EvalError> {
        self.answers
            .get(&case.case_id)
            .cloned()
            .ok_or_else(|| EvalError::MissingTranscript(case.case_id.clone()))
    }
}

/// Collects one transcript per case from the adapter.
pub fn run_eval(
    suite: &[EvalCase],
    adapter: &dyn ModelAdapter,
) -> Result<Vec<Transcript>, EvalError> {
    suite
        .iter()
        .map(|case| {
            Ok(Transcript {
                case_id: case.case_id.clone(),
                model_answer: adapter.answer(case)?,
                latency_ms: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierSummary {
    pub tier: EvalTier,
    pub n: usize,
    pub correct: usize,
    /// Percentage rounded to one decimal.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSummary {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseVerdict {
    pub case_id: String,
    pub tier: EvalTier,
    pub correct: bool,
    pub reason: String,
}

/// Aggregated tier accuracies, the rejection subset, and per-case verdicts
/// (ordered by `case_id`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tiers: Vec<TierSummary>,
    pub rejection_subset: Option<SubsetSummary>,
    pub verdicts: Vec<CaseVerdict>,
}

fn percentage(correct: usize, n: usize) -> f64 {
    text::round1(100.0 * correct as f64 / n as f64)
}

/// Scores every case and aggregates per-tier accuracies.
///
/// The rejection subset covers cases whose expectation is `Rejection` or
/// that are flagged `is_trap`; it is reported alongside the tiers, never
/// folded into them.
pub fn aggregate_report(
    suite: &[EvalCase],
    transcripts: &[Transcript],
) -> Result<EvalReport, EvalError> {
    let answers: BTreeMap<&str, &str> = transcripts
        .iter()
        .map(|t| (t.case_id.as_str(), t.model_answer.as_str()))
        .collect();

    let mut ordered: Vec<&EvalCase> = suite.iter().collect();
    ordered.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let mut verdicts = Vec::with_capacity(ordered.len());
    let mut tier_counts: BTreeMap<EvalTier, (usize, usize)> = BTreeMap::new();
    let mut subset = (0usize, 0usize);
    for case in ordered {
        let answer = answers
            .get(case.case_id.as_str())
            .ok_or_else(|| EvalError::MissingTranscript(case.case_id.clone()))?;
        let verdict = score_case(case, answer);
        let entry = tier_counts.entry(case.tier).or_default();
        entry.0 += 1;
        if verdict.correct {
            entry.1 += 1;
        }
        if case.is_trap || case.expectation == Expectation::Rejection {
            subset.0 += 1;
            if verdict.correct {
                subset.1 += 1;
            }
        }
        verdicts.push(CaseVerdict {
            case_id: case.case_id.clone(),
            tier: case.tier,
            correct: verdict.correct,
            reason: verdict.reason,
        });
    }

    let tiers = EvalTier::ALL
        .iter()
        .filter_map(|tier| {
            tier_counts.get(tier).map(|&(n, correct)| TierSummary {
                tier: *tier,
                n,
                correct,
                accuracy: percentage(correct, n),
            })
        })
        .collect();
    let rejection_subset = (subset.0 > 0).then(|| SubsetSummary {
        n: subset.0,
        correct: subset.1,
        accuracy: percentage(subset.1, subset.0),
    });
    Ok(EvalReport { tiers, rejection_subset, verdicts })
}

/// Renders the report as an aligned plain-text table:
/// category, content, questions, success rate.
pub fn render_table(report: &EvalReport) -> String {
    let mut rows: Vec<[String; 4]> = Vec::new();
    rows.push([
        "Test Category".to_string(),
        "Content".to_string(),
        "Questions".to_string(),
        "Success (%)".to_string(),
    ]);
    for summary in &report.tiers {
        rows.push([
            summary.tier.label().to_string(),
            summary.tier.content_description().to_string(),
            summary.n.to_string(),
            format!("{:.1}%", summary.accuracy),
        ]);
    }
    if let Some(subset) = &report.rejection_subset {
        rows.push([
            "Rejection subset".to_string(),
            "Trap and refusal cases".to_string(),
            subset.n.to_string(),
            format!("{:.1}%", subset.accuracy),
        ]);
    }

    let mut widths = [0usize; 4];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (row_idx, row) in rows.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            out.push_str(cell);
            if i + 1 < row.len() {
                for _ in 0..(widths[i] - cell.chars().count() + 2) {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
        if row_idx == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            for _ in 0..total {
                out.push('-');
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn case(id: &str, tier: EvalTier, expectation: Expectation, is_trap: bool) -> EvalCase {
        EvalCase {
            case_id: id.to_string(),
            tier,
            question: format!("question {id}"),
            expectation,
            is_trap,
        }
    }

    fn fact(required: &[&str]) -> Expectation {
        Expectation::Fact {
            required_patterns: required.iter().map(|s| s.to_string()).collect(),
            forbidden_patterns: Vec::new(),
        }
    }

    #[test]
    fn detects_interjection_rejection() {
        let lex = RejectionLexicon::default();
        assert!(detect_rejection(
            "No, according to the regulations, it is not possible. Final registration cannot be done by mail.",
            &lex
        ));
        assert!(detect_rejection("  no, that is outside the rules", &lex));
        assert!(detect_rejection("HAYIR, bu mümkün değil.", &lex));
    }

    #[test]
    fn affirmative_answers_are_not_rejections() {
        let lex = RejectionLexicon::default();
        assert!(!detect_rejection("Yes. You can take them if your GPA is 2.25 or higher.", &lex));
        assert!(!detect_rejection("", &lex));
        // Leading "No" without interjection punctuation is not a refusal.
        assert!(!detect_rejection("No further documents are needed. Yes, you may enroll.", &lex));
    }

    #[test]
    fn rejection_after_first_sentence_does_not_count() {
        let lex = RejectionLexicon::default();
        assert!(!detect_rejection(
            "You may enroll this week. No, wait, the deadline passed.",
            &lex
        ));
    }

    #[test]
    fn phrase_rejection_inside_first_sentence() {
        let lex = RejectionLexicon::default();
        assert!(detect_rejection("Unfortunately this is not possible under the rules.", &lex));
        assert!(detect_rejection("Kayıt posta ile yapılamaz.", &lex));
        assert!(detect_rejection("You can't submit after the deadline.", &lex));
    }

    #[test]
    fn detect_affirmation_mirrors_rejection() {
        let lex = RejectionLexicon::default();
        assert!(detect_affirmation("Yes. You can take them.", &lex));
        assert!(!detect_affirmation("No, it is not possible.", &lex));
        assert!(!detect_affirmation("The rule says 7 days.", &lex));
    }

    #[test]
    fn score_fact_number_aware() {
        let c = case("t", EvalTier::T1Regulation, fact(&["7", "day"]), false);
        assert!(score_case(&c, "You must apply within 7 days from the date the exam results are announced.").correct);
        assert!(score_case(&c, "You must apply within seven days.").correct);
        let v = score_case(&c, "You must apply within ten days.");
        assert!(!v.correct);
        assert!(v.reason.contains("7"));
    }

    #[test]
    fn score_fact_forbidden_pattern() {
        let c = case(
            "t",
            EvalTier::T1Regulation,
            Expectation::Fact {
                required_patterns: vec!["7".into()],
                forbidden_patterns: vec!["10 days".into()],
            },
            false,
        );
        assert!(!score_case(&c, "Within 7 days, or was it 10 days?").correct);
    }

    #[test]
    fn score_rejection_case() {
        let c = case("t", EvalTier::T2General, Expectation::Rejection, true);
        assert!(score_case(&c, "No, that is not possible.").correct);
        assert!(!score_case(&c, "Certainly, go ahead.").correct);
    }

    #[test]
    fn numeric_comparison_flags_logical_gap() {
        // Threshold rule 2.25, asker has 2.00: the correct verdict is "no".
        let c = case(
            "t",
            EvalTier::T3Challenging,
            Expectation::minimum_threshold(2.25, 2.00),
            false,
        );
        let sycophantic = score_case(&c, "Yes. You can take them if your GPA is 2.25 or higher.");
        assert!(!sycophantic.correct);
        assert_eq!(sycophantic.reason, LOGICAL_GAP);

        let firm = score_case(&c, "No, a GPA of 2.00 does not meet the 2.25 requirement.");
        assert!(firm.correct);
    }

    #[test]
    fn numeric_comparison_verdict_helper() {
        assert_eq!(
            Expectation::minimum_threshold(2.25, 2.50),
            Expectation::NumericComparison { threshold: 2.25, given: 2.50, correct_verdict: true }
        );
    }

    #[test]
    fn load_suite_rejects_duplicates_and_bad_schema() {
        let good = write_suite(&[
            case("a", EvalTier::T1Regulation, fact(&["x"]), false),
            case("b", EvalTier::T3Challenging, Expectation::Rejection, true),
        ]);
        assert_eq!(load_suite(&good).unwrap().len(), 2);

        let dup = write_suite(&[
            case("a", EvalTier::T1Regulation, fact(&["x"]), false),
            case("a", EvalTier::T1Regulation, fact(&["y"]), false),
        ]);
        assert!(matches!(load_suite(&dup), Err(EvalError::Schema { line: 2, .. })));

        assert!(matches!(
            load_suite(b"{\"nonsense\":1}"),
            Err(EvalError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn canned_adapter_requires_full_coverage() {
        let suite = vec![
            case("a", EvalTier::T1Regulation, fact(&["x"]), false),
            case("b", EvalTier::T1Regulation, fact(&["y"]), false),
        ];
        let canned = CannedTranscripts::new(&[Transcript {
            case_id: "a".into(),
            model_answer: "x".into(),
            latency_ms: None,
        }]);
        assert_eq!(
            run_eval(&suite, &canned),
            Err(EvalError::MissingTranscript("b".into()))
        );
    }

    #[test]
    fn aggregate_counts_and_percentages() {
        let suite = vec![
            case("c1", EvalTier::T1Regulation, fact(&["7"]), false),
            case("c2", EvalTier::T1Regulation, fact(&["portal"]), false),
            case("c3", EvalTier::T2General, Expectation::Rejection, true),
        ];
        let transcripts = vec![
            Transcript { case_id: "c1".into(), model_answer: "Within 7 days.".into(), latency_ms: None },
            Transcript { case_id: "c2".into(), model_answer: "No idea.".into(), latency_ms: None },
            Transcript { case_id: "c3".into(), model_answer: "No, not possible.".into(), latency_ms: None },
        ];
        let report = aggregate_report(&suite, &transcripts).unwrap();
        assert_eq!(report.tiers.len(), 2);
        assert_eq!(report.tiers[0].n, 2);
        assert_eq!(report.tiers[0].correct, 1);
        assert_eq!(report.tiers[0].accuracy, 50.0);
        let subset = report.rejection_subset.as_ref().unwrap();
        assert_eq!((subset.n, subset.correct), (1, 1));
        assert_eq!(subset.accuracy, 100.0);
        assert_eq!(report.verdicts.len(), 3);
        assert_eq!(report.verdicts[0].case_id, "c1");
    }

    #[test]
    fn accuracy_rounding_recovers_correct_count() {
        for (n, correct) in [(30usize, 27usize), (30, 29), (6, 4), (12, 12), (7, 3)] {
            let accuracy = percentage(correct, n);
            let recovered = {
                let x = accuracy * n as f64 / 100.0;
                (x + 0.5) as usize
            };
            assert_eq!(recovered, correct, "n={n} correct={correct} accuracy={accuracy}");
        }
    }

    #[test]
    fn render_table_contains_tier_rows() {
        let suite = vec![
            case("c1", EvalTier::T1Regulation, fact(&["7"]), false),
            case("c3", EvalTier::T2General, Expectation::Rejection, true),
        ];
        let transcripts = vec![
            Transcript { case_id: "c1".into(), model_answer: "7 days".into(), latency_ms: None },
            Transcript { case_id: "c3".into(), model_answer: "No, never.".into(), latency_ms: None },
        ];
        let report = aggregate_report(&suite, &transcripts).unwrap();
        let table = render_table(&report);
        assert!(table.contains("Test 1: Regulation"));
        assert!(table.contains("100.0%"));
        assert!(table.contains("Rejection subset"));
        assert!(table.contains("Questions"));
    }

    #[test]
    fn scoring_is_stable_under_whitespace_and_case() {
        let c = case("t", EvalTier::T2General, Expectation::Rejection, true);
        for answer in ["  NO, NOT POSSIBLE.  ", "no, not possible.", "\nNo, not possible."] {
            assert!(score_case(&c, answer).correct, "answer: {answer:?}");
        }
    }
}
