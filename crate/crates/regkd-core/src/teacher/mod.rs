//! Prompt templates and the teacher boundary.
//!
//! The pipeline distills knowledge response-based: only text crosses the
//! teacher boundary, never logits. This module owns the eight built-in
//! prompt modules (four per phase), placeholder rendering, recovery of
//! JSONL from raw teacher output, and the [`TeacherClient`] trait behind
//! which remote HTTP access (in `regkd-cli`) and the offline
//! [`MockTeacher`] are interchangeable.
//!
//! The shipped template texts are reconstructions of the documented
//! directives, not verbatim production prompts; institutions can replace
//! them through a template override directory without rebuilding.

mod mock;

pub use mock::{mock_complete, MockTeacher};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetPhase, Disposition, InstructionRecord, LineDiagnostic};

/// What a template is for; decides its default sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Phase persona and output-format rules.
    System,
    /// Produces new training lines; sampled with some diversity.
    Generation,
    /// Quality-control passes; must be reproducible, so temperature 0.
    Audit,
}

impl TemplateKind {
    pub fn default_temperature(self) -> f64 {
        match self {
            TemplateKind::Audit => 0.0,
            TemplateKind::System | TemplateKind::Generation => 0.7,
        }
    }
}

/// A registered teacher-prompt module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub phase: DatasetPhase,
    pub kind: TemplateKind,
    pub role_label: String,
    pub system_text: String,
    /// User message with `{{PLACEHOLDER}}` slots.
    pub user_template: String,
    /// Exactly the placeholders occurring in `user_template`.
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(
        template_id: &str,
        phase: DatasetPhase,
        kind: TemplateKind,
        role_label: &str,
        system_text: &str,
        user_template: &str,
    ) -> Self {
        Self {
            template_id: template_id.to_string(),
            phase,
            kind,
            role_label: role_label.to_string(),
            system_text: system_text.to_string(),
            user_template: user_template.to_string(),
            required_placeholders: extract_placeholders(user_template),
        }
    }
}

/// Collects `{{NAME}}` slots from a template body.
pub fn extract_placeholders(template: &str) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                names.insert(after[..end].to_string());
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    names
}

/// Sampling parameters attached to one exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Seed used by the mock teacher and forwarded to seed-capable servers.
    pub seed: Option<u64>,
}

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

/// One rendered system+user message pair, ready to complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub system: String,
    pub user: String,
    pub params: ChatParams,
}

impl ChatExchange {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.params.seed = Some(seed);
        self
    }
}

/// Marker prefix that embeds the originating template id into the system
/// message so the offline mock can tell templates apart.
pub const TEMPLATE_MARKER: &str = "#template: ";

/// Reads the template id back out of a rendered exchange.
pub fn template_marker(exchange: &ChatExchange) -> Option<&str> {
    let first = exchange.system.lines().next()?;
    first.strip_prefix(TEMPLATE_MARKER).map(str::trim)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("missing binding for placeholder {0}")]
    MissingBinding(String),
    #[error("binding {0} does not match any placeholder")]
    UnknownBinding(String),
}

fn substitute(template: &str, bindings: &BTreeMap<String, String>) -> String {
    // Single pass: substituted values are never rescanned, so binding
    // content that happens to contain `{{` stays literal data.
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.push_str(&rest[..start]);
                let name = &after[..end];
                match bindings.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        // Unreachable when bindings were checked first.
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Renders a template with the given placeholder bindings.
///
/// Extra bindings are ignored; use [`render_prompt_strict`] to reject them.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<ChatExchange, RenderError> {
    for name in &template.required_placeholders {
        if !bindings.contains_key(name) {
            return Err(RenderError::MissingBinding(name.clone()));
        }
    }
    let mut system = String::new();
    system.push_str(TEMPLATE_MARKER);
    system.push_str(&template.template_id);
    system.push('\n');
    system.push_str(&template.system_text);
    Ok(ChatExchange {
        system,
        user: substitute(&template.user_template, bindings),
        params: ChatParams {
            temperature: template.kind.default_temperature(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            seed: None,
        },
    })
}

/// Like [`render_prompt`] but errors on bindings no placeholder consumes.
pub fn render_prompt_strict(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<ChatExchange, RenderError> {
    for key in bindings.keys() {
        if !template.required_placeholders.contains(key) {
            return Err(RenderError::UnknownBinding(key.clone()));
        }
    }
    render_prompt(template, bindings)
}

/// Retry behavior for the remote client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    /// Base delay; doubles each retry.
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, base_backoff_ms: 250 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    Remote,
    Mock,
}

/// Connection settings for the teacher endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub max_concurrent_requests: usize,
    pub retry: RetryPolicy,
    pub mode: TeacherMode,
}

impl TeacherConfig {
    /// Offline configuration; ignores endpoint fields.
    pub fn mock() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: "mock-teacher".to_string(),
            api_key_env_var: "TEACHER_API_KEY".to_string(),
            max_concurrent_requests: 4,
            retry: RetryPolicy::default(),
            mode: TeacherMode::Mock,
        }
    }

    pub fn validate(&self) -> Result<(), TeacherError> {
        if self.mode == TeacherMode::Remote && self.endpoint_url.is_empty() {
            return Err(TeacherError::InvalidConfig(
                "remote mode requires endpoint_url".to_string(),
            ));
        }
        if self.max_concurrent_requests == 0 {
            return Err(TeacherError::InvalidConfig(
                "max_concurrent_requests must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TeacherError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited by teacher endpoint")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("teacher returned an empty completion")]
    EmptyCompletion,
    #[error("exchange carries no known template marker: {0}")]
    UnknownTemplateMarker(String),
    #[error("invalid teacher configuration: {0}")]
    InvalidConfig(String),
}

impl TeacherError {
    /// Whether a retry could possibly succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            TeacherError::RateLimited { .. } | TeacherError::Transport { .. }
        )
    }
}

/// Anything that can turn a rendered exchange into teacher text: the remote
/// HTTP client or the offline mock. Implementations must be safe for
/// concurrent use.
pub trait TeacherClient: Sync {
    fn complete(&self, exchange: &ChatExchange) -> Result<String, TeacherError>;

    /// Provenance tag stamped onto records produced through this client.
    fn origin(&self) -> crate::dataset::RecordOrigin {
        crate::dataset::RecordOrigin::Teacher
    }
}

/// Template ids, grouped by phase.
pub mod ids {
    pub const P2_SYSTEM: &str = "p2_system";
    pub const P2_RAW_CONVERTER: &str = "p2_raw_converter";
    pub const P2_ID_PROCESSOR: &str = "p2_id_processor";
    pub const P2_AUDIT_QC: &str = "p2_audit_qc";
    pub const P3_GLOBAL_SYSTEM: &str = "p3_global_system";
    pub const P3_CONTEXT_INJECTION: &str = "p3_context_injection";
    pub const P3_ADVERSARIAL_SAMPLING: &str = "p3_adversarial_sampling";
    pub const P3_DATA_AUDIT: &str = "p3_data_audit";

    pub const ALL: &[&str] = &[
        P2_SYSTEM,
        P2_RAW_CONVERTER,
        P2_ID_PROCESSOR,
        P2_AUDIT_QC,
        P3_GLOBAL_SYSTEM,
        P3_CONTEXT_INJECTION,
        P3_ADVERSARIAL_SAMPLING,
        P3_DATA_AUDIT,
    ];
}

const P2_ROLE: &str = "LLM Dataset Generator";
const P3_ROLE: &str = "LLM Data Generator 3";

const P2_SYSTEM_TEXT: &str = "You are an 'LLM Dataset Generator' assistant. You produce \
instruction-tuning data as JSONL: one JSON object per line with exactly the keys \
\"instruction\", \"input\", \"output\".\n\
Rules:\n\
1. Base every question and answer ONLY on the text provided by the user.\n\
2. The \"input\" field must ALWAYS be empty.\n\
3. Output raw JSONL with no commentary.";

const P3_SYSTEM_TEXT: &str = "You are 'LLM Data Generator 3'. Your objective is to generate \
retrieval-compatible JSONL training data from the provided reference text: one JSON object \
per line with exactly the keys \"instruction\", \"input\", \"output\".\n\
Rules:\n\
1. Base every question and answer ONLY on the reference text.\n\
2. The \"input\" field must contain ORIGINAL evidence quoted verbatim from the reference text.\n\
3. Output raw JSONL with no commentary.";

const RAW_CONVERTER_USER: &str = "Generate 5-12 questions and answers from the regulation \
article below. Every answer must be grounded in the article, and each line must follow the \
format {\"instruction\":\"...\",\"input\":\"\",\"output\":\"...\"}. The \"input\" field must \
ALWAYS be empty.\n\nARTICLE:\n{{ARTICLE_TEXT}}";

const ID_PROCESSOR_USER: &str = "Using the information card below, generate 6-10 queries with \
their answers. Do not add information that is not present in the card. Each line must follow \
the format {\"instruction\":\"...\",\"input\":\"\",\"output\":\"...\"}.\n\nCARD:\n{{CARD_TEXT}}";

const AUDIT_QC_USER: &str = "Check the JSONL lines below against the source text:\n\
1. Delete the line if \"input\" is not empty.\n\
2. Delete the line if the answer is not grounded in the source text.\n\
Return only the surviving lines as raw JSONL.\n\n\
SOURCE TEXT:\n{{SOURCE_TEXT}}\n\nJSONL LINES:\n{{JSONL_LINES}}";

const CONTEXT_INJECTION_USER: &str = "Examine the JSONL lines below. For each line:\n\
1. Read the answer.\n\
2. Locate the supporting article in the SOURCE TEXT.\n\
3. Place the ORIGINAL text of that article into the \"input\" field, quoted verbatim.\n\
Return every line as raw JSONL.\n\n\
SOURCE TEXT:\n{{SOURCE_TEXT}}\n\nJSONL LINES:\n{{JSONL_LINES}}";

const ADVERSARIAL_USER: &str = "Create questions based on common misconceptions about the \
article below.\nRules:\n\
1. The response in \"output\" must be a rejection (e.g., 'No', 'Not possible') followed by \
the governing rule.\n\
2. The \"input\" field must contain the ORIGINAL evidence that refutes the claim, quoted \
verbatim from the article.\n\
3. Each line must follow the format {\"instruction\":\"...\",\"input\":\"...\",\"output\":\"...\"}.\n\n\
ARTICLE:\n{{ARTICLE_TEXT}}";

const DATA_AUDIT_USER: &str = "Check the JSONL lines below:\n\
1. DELETE the line if \"input\" is empty.\n\
2. DELETE the line if \"input\" contradicts \"output\".\n\
3. REPAIR the line if the format is corrupted.\n\
Return the surviving lines as raw JSONL.\n\nJSONL LINES:\n{{JSONL_LINES}}";

const SYSTEM_PASSTHROUGH_USER: &str = "{{TASK}}";

/// The eight built-in prompt modules.
pub fn registry() -> Vec<PromptTemplate> {
    use DatasetPhase::{P2Memorization as P2, P3ContextAware as P3};
    use TemplateKind::{Audit, Generation, System};
    [
        PromptTemplate::new(ids::P2_SYSTEM, P2, System, P2_ROLE, P2_SYSTEM_TEXT, SYSTEM_PASSTHROUGH_USER),
        PromptTemplate::new(ids::P2_RAW_CONVERTER, P2, Generation, P2_ROLE, P2_SYSTEM_TEXT, RAW_CONVERTER_USER),
        PromptTemplate::new(ids::P2_ID_PROCESSOR, P2, Generation, P2_ROLE, P2_SYSTEM_TEXT, ID_PROCESSOR_USER),
        PromptTemplate::new(ids::P2_AUDIT_QC, P2, Audit, P2_ROLE, P2_SYSTEM_TEXT, AUDIT_QC_USER),
        PromptTemplate::new(ids::P3_GLOBAL_SYSTEM, P3, System, P3_ROLE, P3_SYSTEM_TEXT, SYSTEM_PASSTHROUGH_USER),
        PromptTemplate::new(ids::P3_CONTEXT_INJECTION, P3, Audit, P3_ROLE, P3_SYSTEM_TEXT, CONTEXT_INJECTION_USER),
        PromptTemplate::new(ids::P3_ADVERSARIAL_SAMPLING, P3, Generation, P3_ROLE, P3_SYSTEM_TEXT, ADVERSARIAL_USER),
        PromptTemplate::new(ids::P3_DATA_AUDIT, P3, Audit, P3_ROLE, P3_SYSTEM_TEXT, DATA_AUDIT_USER),
    ]
    .into()
}

/// Looks up one built-in template by id.
pub fn template(template_id: &str) -> Option<PromptTemplate> {
    registry().into_iter().find(|t| t.template_id == template_id)
}

/// Replacement texts loaded from a template override directory
/// (`<template_id>.system.txt` / `<template_id>.user.txt`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateOverride {
    pub system_text: Option<String>,
    pub user_template: Option<String>,
}

/// Applies external overrides to the registry; placeholder sets are
/// recomputed from the overridden user templates so the template invariant
/// keeps holding.
pub fn registry_with_overrides(
    overrides: &BTreeMap<String, TemplateOverride>,
) -> Vec<PromptTemplate> {
    let mut templates = registry();
    for t in &mut templates {
        if let Some(o) = overrides.get(&t.template_id) {
            if let Some(system) = &o.system_text {
                t.system_text = system.clone();
            }
            if let Some(user) = &o.user_template {
                t.user_template = user.clone();
                t.required_placeholders = extract_placeholders(user);
            }
        }
    }
    templates
}

/// Recovers records from raw teacher output.
///
/// Code fences and prose around the payload are stripped; repairable
/// defects (a single trailing comma, an unescaped inner quote at line end)
/// are fixed and flagged [`Disposition::Repaired`]. Never fails: at worst
/// every line is rejected with a diagnostic.
pub fn parse_generated(raw: &str) -> (Vec<InstructionRecord>, Vec<LineDiagnostic>) {
    let has_fence = raw.lines().any(|l| l.trim_start().starts_with("```"));
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut in_fence = false;

    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            in_fence = !in_fence;
            continue;
        }
        if has_fence && !in_fence {
            continue; // prose outside the fenced payload
        }
        if trimmed.is_empty() {
            continue;
        }
        if !trimmed.starts_with('{') {
            diagnostics.push(LineDiagnostic {
                line: line_no,
                reason: "not a JSON object".to_string(),
                disposition: Disposition::Rejected,
            });
            continue;
        }
        match dataset::parse_wire_line(trimmed) {
            Ok(fields) => records.push(record_from_fields(fields, line_no)),
            Err(first_reason) => match try_repair(trimmed) {
                Some((fields, how)) => {
                    records.push(record_from_fields(fields, line_no));
                    diagnostics.push(LineDiagnostic {
                        line: line_no,
                        reason: how.to_string(),
                        disposition: Disposition::Repaired,
                    });
                }
                None => diagnostics.push(LineDiagnostic {
                    line: line_no,
                    reason: first_reason,
                    disposition: Disposition::Rejected,
                }),
            },
        }
    }
    (records, diagnostics)
}

fn record_from_fields(
    (instruction, input, output): (String, String, String),
    line_no: usize,
) -> InstructionRecord {
    use crate::dataset::{RecordMeta, RecordOrigin};
    let mut meta = RecordMeta::new(&alloc::format!("gen-{line_no:05}"), DatasetPhase::P1General);
    meta.origin = RecordOrigin::Teacher;
    InstructionRecord {
        instruction,
        input,
        output,
        meta,
    }
}

fn try_repair(line: &str) -> Option<((String, String, String), &'static str)> {
    // Single trailing comma before the closing brace.
    if let Some(body) = line.strip_suffix('}') {
        let body = body.trim_end();
        if let Some(without_comma) = body.strip_suffix(',') {
            let candidate = alloc::format!("{without_comma}}}");
            if let Ok(fields) = dataset::parse_wire_line(&candidate) {
                return Some((fields, "removed trailing comma"));
            }
        }
    }
    // Unescaped inner quote at the end of the last value: `..."}` with a
    // stray quote right before the closing `"`.
    if let Some(prefix) = line.strip_suffix("\"\"}") {
        let candidate = alloc::format!("{prefix}\\\"\"}}");
        if let Ok(fields) = dataset::parse_wire_line(&candidate) {
            return Some((fields, "escaped inner quote at line end"));
        }
    }
    None
}
