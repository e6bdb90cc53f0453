//! Regulation ingestion and article segmentation.
//!
//! Documents are plain UTF-8 text. Segmentation is driven by configurable
//! heading patterns (by default lines opening with `Madde`/`Article` plus a
//! number); everything between two headings belongs to the earlier article,
//! and text before the first heading is kept as a preamble article so no
//! evidence is ever dropped. Segmentation is lossless: the original document
//! can be reconstructed byte-for-byte from the article list.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

/// One source document, line endings normalized to LF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegulationDocument {
    pub doc_id: String,
    pub title: String,
    pub raw_text: String,
    pub source_path: String,
}

/// One addressable unit of a regulation; the grounding evidence quantum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub doc_id: String,
    /// Heading label such as `Madde 5`, or `preamble` for pre-heading text.
    pub article_id: String,
    /// 1-based position within the source document.
    pub ordinal: u32,
    /// The full heading line; empty for the preamble article.
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("document contains no non-whitespace text")]
    EmptyDocument,
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    InvalidEncoding { offset: usize },
    #[error("document has no content to segment")]
    NoContent,
    #[error("query has no content tokens after normalization")]
    EmptyQuery,
    #[error("corpus index holds no articles")]
    EmptyIndex,
    #[error("duplicate article key ({doc_id}, {ordinal})")]
    DuplicateArticle { doc_id: String, ordinal: u32 },
    #[error("heading pattern list is empty")]
    NoPatterns,
}

/// Decodes and normalizes one regulation file.
///
/// CRLF and bare CR line endings become LF; bytes are otherwise preserved.
pub fn ingest_document(
    bytes: &[u8],
    doc_id: &str,
    title: &str,
) -> Result<RegulationDocument, CorpusError> {
    let raw = core::str::from_utf8(bytes)
        .map_err(|e| CorpusError::InvalidEncoding { offset: e.valid_up_to() })?;
    if raw.trim().is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let normalized = raw.replace("\r\n", "\n").replace('\r', "\n");
    Ok(RegulationDocument {
        doc_id: doc_id.to_string(),
        title: title.to_string(),
        raw_text: normalized,
        source_path: String::new(),
    })
}

/// Matches full heading lines: a keyword at line start followed by a number
/// (`Madde 7`, `ARTICLE 12 — Exams`). Keyword comparison is case-folded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingPattern {
    /// Case-folded keyword that must open the heading line.
    pub keyword: String,
    /// Whether a number must follow the keyword. Defaults to true; without
    /// it any line starting with the keyword would count as a heading.
    pub require_number: bool,
}

impl HeadingPattern {
    pub fn new(keyword: &str) -> Self {
        Self { keyword: text::fold_str(keyword), require_number: true }
    }

    /// Returns the heading label (`Madde 5`) when `line` is a heading.
    pub fn match_label<'a>(&self, line: &'a str) -> Option<&'a str> {
        let trimmed = line.trim();
        let mut chars = trimmed.char_indices().peekable();
        let mut word_end = 0;
        for (i, c) in chars.by_ref() {
            if c.is_alphabetic() {
                word_end = i + c.len_utf8();
            } else {
                break;
            }
        }
        if word_end == 0 || text::fold_str(&trimmed[..word_end]) != self.keyword {
            return None;
        }
        if !self.require_number {
            return Some(&trimmed[..word_end]);
        }
        let rest = &trimmed[word_end..];
        let after_ws = rest.trim_start();
        if !after_ws.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        let digits_len = after_ws.chars().take_while(|c| c.is_ascii_digit()).count();
        let label_len = trimmed.len() - after_ws.len() + digits_len;
        Some(&trimmed[..label_len])
    }

    pub fn matches(&self, line: &str) -> bool {
        self.match_label(line).is_some()
    }
}

/// The built-in heading patterns: `Madde <n>` and `Article <n>`.
pub fn default_heading_patterns() -> Vec<HeadingPattern> {
    [HeadingPattern::new("madde"), HeadingPattern::new("article")].into()
}

fn match_any<'a>(patterns: &[HeadingPattern], line: &'a str) -> Option<&'a str> {
    patterns.iter().find_map(|p| p.match_label(line))
}

/// Splits a document into articles along heading lines.
///
/// Every heading line starts a new article; lines before the first heading
/// form a preamble article with an empty heading. Ordinals run 1..n in
/// document order. The operation is lossless: headings and bodies joined
/// back together reproduce the document text.
pub fn segment_articles(
    doc: &RegulationDocument,
    patterns: &[HeadingPattern],
) -> Result<Vec<Article>, CorpusError> {
    if patterns.is_empty() {
        return Err(CorpusError::NoPatterns);
    }
    if doc.raw_text.trim().is_empty() {
        return Err(CorpusError::NoContent);
    }

    // A trailing newline produces one empty trailing segment; drop it so
    // bodies do not carry a spurious final line. Reconstruction appends it
    // back (see `reconstruct`).
    let mut lines: Vec<&str> = doc.raw_text.split('\n').collect();
    if lines.last() == Some(&"") && lines.len() > 1 {
        lines.pop();
    }

    let mut articles: Vec<Article> = Vec::new();
    let mut current: Option<(String, String, Vec<&str>)> = None; // (id, heading, body lines)
    let mut preamble: Vec<&str> = Vec::new();

    for line in lines {
        match match_any(patterns, line) {
            Some(label) => {
                if let Some((id, heading, body)) = current.take() {
                    push_article(&mut articles, doc, id, heading, body);
                } else if !preamble.is_empty() {
                    let body = core::mem::take(&mut preamble);
                    push_article(&mut articles, doc, "preamble".to_string(), String::new(), body);
                }
                current = Some((label.to_string(), line.to_string(), Vec::new()));
            }
            None => match current.as_mut() {
                Some((_, _, body)) => body.push(line),
                None => preamble.push(line),
            },
        }
    }
    if let Some((id, heading, body)) = current.take() {
        push_article(&mut articles, doc, id, heading, body);
    } else if !preamble.is_empty() {
        push_article(&mut articles, doc, "preamble".to_string(), String::new(), preamble);
    }

    Ok(articles)
}

fn push_article(
    articles: &mut Vec<Article>,
    doc: &RegulationDocument,
    article_id: String,
    heading: String,
    body_lines: Vec<&str>,
) {
    let ordinal = articles.len() as u32 + 1;
    articles.push(Article {
        doc_id: doc.doc_id.clone(),
        article_id,
        ordinal,
        heading,
        body: body_lines.join("\n"),
    });
}

/// Joins articles back into document text. Inverse of [`segment_articles`]
/// up to the document's trailing newline, which the caller re-appends when
/// the source ended with one.
pub fn reconstruct(articles: &[Article]) -> String {
    let mut parts: Vec<String> = Vec::new();
    for a in articles {
        let mut piece = String::new();
        if !a.heading.is_empty() {
            piece.push_str(&a.heading);
            if !a.body.is_empty() {
                piece.push('\n');
            }
        }
        piece.push_str(&a.body);
        parts.push(piece);
    }
    parts.join("\n")
}

/// A scored search hit from [`CorpusIndex::find_supporting_article`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredArticle {
    /// Corpus ordinal: 1-based position in the index's article list. Equals
    /// the article's own ordinal for a single-document corpus.
    pub ordinal: u32,
    pub score: f64,
}

/// Immutable article store plus an inverted token index.
///
/// The token index is rebuilt deterministically from the articles; it maps
/// every normalized body token to the set of corpus ordinals containing it.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    articles: Vec<Article>,
    token_index: BTreeMap<String, BTreeSet<u32>>,
    stopwords: BTreeSet<String>,
}

impl CorpusIndex {
    pub fn build(articles: Vec<Article>) -> Result<Self, CorpusError> {
        let mut seen: BTreeSet<(String, u32)> = BTreeSet::new();
        for a in &articles {
            if !seen.insert((a.doc_id.clone(), a.ordinal)) {
                return Err(CorpusError::DuplicateArticle {
                    doc_id: a.doc_id.clone(),
                    ordinal: a.ordinal,
                });
            }
        }
        let mut token_index: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        for (pos, a) in articles.iter().enumerate() {
            let corpus_ordinal = pos as u32 + 1;
            for token in text::tokenize(&a.body) {
                token_index.entry(token).or_default().insert(corpus_ordinal);
            }
        }
        Ok(Self { articles, token_index, stopwords: text::default_stopwords() })
    }

    /// Replaces the stop-word list used when scoring queries.
    pub fn with_stopwords(mut self, stopwords: BTreeSet<String>) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    /// Article by corpus ordinal (1-based index position).
    pub fn article(&self, corpus_ordinal: u32) -> Option<&Article> {
        self.articles.get(corpus_ordinal.saturating_sub(1) as usize)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// True when `needle` appears verbatim inside some article body.
    pub fn contains_verbatim(&self, needle: &str) -> bool {
        !needle.is_empty() && self.articles.iter().any(|a| a.body.contains(needle))
    }

    /// Corpus ordinal of the first article whose body contains `needle`.
    pub fn find_verbatim(&self, needle: &str) -> Option<u32> {
        if needle.is_empty() {
            return None;
        }
        self.articles
            .iter()
            .position(|a| a.body.contains(needle))
            .map(|pos| pos as u32 + 1)
    }

    /// Ranks articles by how well they ground `answer_text`.
    ///
    /// The score of an article is the grounding score of the answer against
    /// its body (see [`crate::audit::grounding_score`]); results are sorted
    /// by descending score with ties broken by ascending ordinal, truncated
    /// to `top_k`. Every article is scored, so zero-overlap corpora come
    /// back with score 0.0 rather than an empty result.
    pub fn find_supporting_article(
        &self,
        answer_text: &str,
        top_k: usize,
    ) -> Result<Vec<ScoredArticle>, CorpusError> {
        assert!(top_k >= 1, "top_k must be at least 1");
        if self.articles.is_empty() {
            return Err(CorpusError::EmptyIndex);
        }
        let query = text::content_tokens(answer_text, &self.stopwords);
        if query.is_empty() {
            return Err(CorpusError::EmptyQuery);
        }

        // Membership lookups go through the inverted index; the resulting
        // score is identical to scanning every article body directly.
        let mut hits: BTreeMap<u32, usize> = BTreeMap::new();
        for token in &query {
            if let Some(ordinals) = self.token_index.get(token) {
                for &ord in ordinals {
                    *hits.entry(ord).or_default() += 1;
                }
            }
        }
        let mut scored: Vec<ScoredArticle> = (1..=self.articles.len() as u32)
            .map(|ord| ScoredArticle {
                ordinal: ord,
                score: hits.get(&ord).copied().unwrap_or(0) as f64 / query.len() as f64,
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.ordinal.cmp(&b.ordinal))
        });
        scored.truncate(top_k.min(self.articles.len()));
        Ok(scored)
    }
}

/// Per-article manifest row (provenance output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestArticle {
    pub ordinal: u32,
    pub article_id: String,
    pub heading: String,
    pub byte_len: usize,
}

/// Canonical corpus manifest consumed by downstream provenance fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub doc_id: String,
    pub title: String,
    pub article_count: usize,
    pub articles: Vec<ManifestArticle>,
}

impl CorpusManifest {
    pub fn from_articles(doc: &RegulationDocument, articles: &[Article]) -> Self {
        Self {
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            article_count: articles.len(),
            articles: articles
                .iter()
                .map(|a| ManifestArticle {
                    ordinal: a.ordinal,
                    article_id: a.article_id.clone(),
                    heading: a.heading.clone(),
                    byte_len: a.body.len(),
                })
                .collect(),
        }
    }
}
