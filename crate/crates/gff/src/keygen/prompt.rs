//! Prompt templates and generator-output parsing.
//!
//! Template bodies are loaded verbatim from the plain-text files under
//! `data/prompts/` (embedded at compile time); rendering substitutes the
//! placeholders and leaves every other byte untouched.

use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::error::{Flagged, GffError, Result};

const Q2K_BODY: &str = include_str!("../../data/prompts/q2k.txt");
const Q2D_BODY: &str = include_str!("../../data/prompts/q2d.txt");
const D2K_BODY: &str = include_str!("../../data/prompts/d2k.txt");

/// Placeholder for the query. The D2K template writes it as
/// `[user's query]`; both spellings are substituted.
const QUERY_PLACEHOLDER: &str = "[user query]";
const QUERY_PLACEHOLDER_ALT: &str = "[user's query]";
const PASSAGE_PLACEHOLDER: &str = "[retrieved passage]";

/// Which few-shot template a prompt uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateName {
    /// Query → keywords.
    Q2K,
    /// Query → passage.
    Q2D,
    /// (Query, passage) → keywords.
    D2K,
}

impl TemplateName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::Q2K => "Q2K",
            TemplateName::Q2D => "Q2D",
            TemplateName::D2K => "D2K",
        }
    }
}

/// A few-shot prompt template with its unfilled placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    /// The built-in template for `name`, embedded from its data file.
    pub fn builtin(name: TemplateName) -> Self {
        let body = match name {
            TemplateName::Q2K => Q2K_BODY,
            TemplateName::Q2D => Q2D_BODY,
            TemplateName::D2K => D2K_BODY,
        };
        PromptTemplate { name, body: body.to_string() }
    }

    /// Load a template body from a custom plain-text file.
    pub fn from_file(name: TemplateName, path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| GffError::io(path, e))?;
        Ok(PromptTemplate { name, body })
    }

    fn query_placeholder(&self) -> Result<&'static str> {
        if self.body.contains(QUERY_PLACEHOLDER) {
            Ok(QUERY_PLACEHOLDER)
        } else if self.body.contains(QUERY_PLACEHOLDER_ALT) {
            Ok(QUERY_PLACEHOLDER_ALT)
        } else {
            Err(GffError::MissingPlaceholder {
                template: self.name.as_str().into(),
                placeholder: QUERY_PLACEHOLDER.into(),
            })
        }
    }
}

/// The complete template set used by the generation strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub q2k: PromptTemplate,
    pub q2d: PromptTemplate,
    pub d2k: PromptTemplate,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            q2k: PromptTemplate::builtin(TemplateName::Q2K),
            q2d: PromptTemplate::builtin(TemplateName::Q2D),
            d2k: PromptTemplate::builtin(TemplateName::D2K),
        }
    }
}

/// Substitute the query (and, for D2K, the passage) into a template.
///
/// A passage must be supplied for D2K and must not be supplied otherwise.
/// Rendering is deterministic and leaves the rest of the template
/// byte-identical to its data file.
pub fn render_prompt(template: &PromptTemplate, query: &Query, passage: Option<&str>) -> Result<String> {
    match (template.name, passage) {
        (TemplateName::D2K, None) => {
            return Err(GffError::PassageMismatch("D2K template requires a passage".into()))
        }
        (TemplateName::Q2K | TemplateName::Q2D, Some(_)) => {
            return Err(GffError::PassageMismatch(format!(
                "{} template takes no passage",
                template.name.as_str()
            )))
        }
        _ => {}
    }

    let mut rendered = template.body.replace(template.query_placeholder()?, &query.text);
    if let Some(passage) = passage {
        if !rendered.contains(PASSAGE_PLACEHOLDER) {
            return Err(GffError::MissingPlaceholder {
                template: template.name.as_str().into(),
                placeholder: PASSAGE_PLACEHOLDER.into(),
            });
        }
        rendered = rendered.replace(PASSAGE_PLACEHOLDER, passage);
    }
    Ok(rendered)
}

/// Clip generator output at the point where it starts imitating the
/// few-shot structure (a `========` separator or a new `<QUESTION>`).
fn clip_continuation(raw: &str) -> &str {
    let mut end = raw.len();
    for marker in ["========", "<QUESTION>"] {
        if let Some(pos) = raw.find(marker) {
            end = end.min(pos);
        }
    }
    &raw[..end]
}

/// Parse a keyword-generation output: the first non-empty line before any
/// continuation marker, split on commas, trimmed, empties dropped, and
/// case-fold-deduplicated keeping the first-seen surface form.
///
/// An output with no parseable keyword yields an empty list with a warning,
/// never a hard failure.
pub fn parse_keywords(raw_output: &str) -> Flagged<Vec<String>> {
    let clipped = clip_continuation(raw_output);
    let first_line = clipped.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");

    let mut keywords: Vec<String> = Vec::new();
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    for part in first_line.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if seen.insert(part.to_lowercase()) {
            keywords.push(part.to_string());
        }
    }

    if keywords.is_empty() {
        Flagged::flagged(keywords, "generator output contained no parseable keyword".to_string())
    } else {
        Flagged::clean(keywords)
    }
}

/// Parse a passage-generation output: everything before any continuation
/// marker, whitespace-trimmed. Empty output yields a warning.
pub fn parse_passage(raw_output: &str) -> Flagged<Option<String>> {
    let passage = clip_continuation(raw_output).trim();
    if passage.is_empty() {
        Flagged::flagged(None, "generator output contained no passage".to_string())
    } else {
        Flagged::clean(Some(passage.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_carry_their_placeholders() {
        assert!(PromptTemplate::builtin(TemplateName::Q2K).body.contains("[user query]"));
        assert!(PromptTemplate::builtin(TemplateName::Q2D).body.contains("[user query]"));
        let d2k = PromptTemplate::builtin(TemplateName::D2K);
        assert!(d2k.body.contains("[user's query]"));
        assert!(d2k.body.contains("[retrieved passage]"));
    }

    #[test]
    fn q2k_render_ends_with_question_and_terminator() {
        let template = PromptTemplate::builtin(TemplateName::Q2K);
        let query = Query::new("q", "definition for conundrum").unwrap();
        let prompt = render_prompt(&template, &query, None).unwrap();
        assert!(prompt.ends_with("<QUESTION>: definition for conundrum\n\n<KEYWORDS>: "));
    }

    #[test]
    fn q2d_render_ends_with_passage_terminator() {
        let template = PromptTemplate::builtin(TemplateName::Q2D);
        let query = Query::new("q", "where is danville ca").unwrap();
        let prompt = render_prompt(&template, &query, None).unwrap();
        assert!(prompt.ends_with("<QUESTION>: where is danville ca\n\n<PASSAGE>: "));
    }

    #[test]
    fn d2k_render_substitutes_both_placeholders() {
        let template = PromptTemplate::builtin(TemplateName::D2K);
        let query = Query::new("q", "what is hpv").unwrap();
        let prompt = render_prompt(&template, &query, Some("HPV is a common virus.")).unwrap();
        assert!(prompt.ends_with(
            "<QUESTION>: what is hpv\n\n<PASSAGE>: HPV is a common virus.\n\n<KEYWORDS>: "
        ));
        assert!(!prompt.contains("[user's query]"));
        assert!(!prompt.contains("[retrieved passage]"));
    }

    #[test]
    fn d2k_without_passage_is_an_error() {
        let template = PromptTemplate::builtin(TemplateName::D2K);
        let query = Query::new("q", "anything").unwrap();
        assert!(matches!(
            render_prompt(&template, &query, None),
            Err(GffError::PassageMismatch(_))
        ));
    }

    #[test]
    fn passage_on_keyword_template_is_an_error() {
        let template = PromptTemplate::builtin(TemplateName::Q2K);
        let query = Query::new("q", "anything").unwrap();
        assert!(render_prompt(&template, &query, Some("stray")).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let template = PromptTemplate::builtin(TemplateName::Q2K);
        let query = Query::new("q", "causes of underemployment").unwrap();
        let a = render_prompt(&template, &query, None).unwrap();
        let b = render_prompt(&template, &query, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn template_without_query_placeholder_is_an_error() {
        let template = PromptTemplate { name: TemplateName::Q2K, body: "no placeholders".into() };
        let query = Query::new("q", "anything").unwrap();
        assert!(matches!(
            render_prompt(&template, &query, None),
            Err(GffError::MissingPlaceholder { .. })
        ));
    }

    #[test]
    fn parse_keywords_appendix_line() {
        let parsed = parse_keywords("HPV, papillomavirus, immune system, strains");
        assert!(!parsed.is_flagged());
        assert_eq!(parsed.value, vec!["HPV", "papillomavirus", "immune system", "strains"]);
    }

    #[test]
    fn parse_keywords_trims_and_drops_empties() {
        assert_eq!(parse_keywords(" a ,  , b").value, vec!["a", "b"]);
    }

    #[test]
    fn parse_keywords_without_delimiter_is_one_keyword() {
        assert_eq!(parse_keywords("no delimiter here").value, vec!["no delimiter here"]);
    }

    #[test]
    fn parse_keywords_stops_at_continuation() {
        let raw = "strains, virus\n\n========\n\n<QUESTION>: next question\n\n<KEYWORDS>: junk";
        assert_eq!(parse_keywords(raw).value, vec!["strains", "virus"]);
        let raw = "strains, virus <QUESTION>: next";
        assert_eq!(parse_keywords(raw).value, vec!["strains", "virus"]);
    }

    #[test]
    fn parse_keywords_dedups_case_folded() {
        assert_eq!(parse_keywords("HPV, hpv, Strains").value, vec!["HPV", "Strains"]);
    }

    #[test]
    fn parse_keywords_empty_is_flagged() {
        let parsed = parse_keywords("   \n");
        assert!(parsed.is_flagged());
        assert!(parsed.value.is_empty());
    }

    #[test]
    fn parse_passage_takes_clipped_body() {
        let raw = "A long passage.\nSecond line.\n\n========\n\n<QUESTION>: next";
        let parsed = parse_passage(raw);
        assert_eq!(parsed.value.as_deref(), Some("A long passage.\nSecond line."));
        assert!(parse_passage("").is_flagged());
    }
}
