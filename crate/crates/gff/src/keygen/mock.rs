//! Scripted generator: a deterministic stand-in for a remote LLM.
//!
//! A script maps prompt substrings to lists of canned outputs; the sample
//! seed picks the output variant, which is how repeated self-consistency
//! rounds see "sampled" diversity while staying fully reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{GffError, Result};
use crate::keygen::GeneratorEndpoint;

/// One script entry: applies to any prompt containing `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub contains: String,
    /// Output variants; the call's seed selects `outputs[seed % len]`.
    pub outputs: Vec<String>,
}

/// A full generator script: ordered rules plus an optional default.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeneratorScript {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    /// Fallback outputs for prompts no rule matches.
    #[serde(default)]
    pub default: Option<Vec<String>>,
}

/// Deterministic [`GeneratorEndpoint`] driven by a [`GeneratorScript`].
///
/// Output is a pure function of (prompt, seed): the first matching rule's
/// variants indexed by `seed % len`.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    script: GeneratorScript,
}

impl ScriptedGenerator {
    pub fn new(script: GeneratorScript) -> Self {
        ScriptedGenerator { script }
    }

    /// Always returns `output`, whatever the prompt or seed.
    pub fn constant(output: &str) -> Self {
        ScriptedGenerator {
            script: GeneratorScript { rules: Vec::new(), default: Some(vec![output.to_string()]) },
        }
    }

    /// Load a script from a JSON file.
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| GffError::io(path, e))?;
        let script = serde_json::from_slice(&bytes).map_err(|e| GffError::json(path, e))?;
        Ok(ScriptedGenerator { script })
    }
}

impl GeneratorEndpoint for ScriptedGenerator {
    fn generate(&self, prompt: &str, sample_seed: u64) -> Result<String> {
        let outputs = self
            .script
            .rules
            .iter()
            .find(|rule| prompt.contains(&rule.contains))
            .map(|rule| &rule.outputs)
            .or(self.script.default.as_ref())
            .ok_or_else(|| {
                GffError::Generator("no scripted output matches the prompt".into())
            })?;
        if outputs.is_empty() {
            return Err(GffError::Generator("scripted rule has no outputs".into()));
        }
        Ok(outputs[sample_seed as usize % outputs.len()].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script() -> GeneratorScript {
        GeneratorScript {
            rules: vec![
                ScriptRule {
                    contains: "<QUESTION>: what is hpv".into(),
                    outputs: vec!["HPV, strains".into(), "papillomavirus, HPV".into()],
                },
                ScriptRule { contains: "danville".into(), outputs: vec!["California".into()] },
            ],
            default: Some(vec!["fallback".into()]),
        }
    }

    #[test]
    fn first_matching_rule_wins_and_seed_picks_variant() {
        let g = ScriptedGenerator::new(script());
        assert_eq!(g.generate("... <QUESTION>: what is hpv ...", 0).unwrap(), "HPV, strains");
        assert_eq!(g.generate("... <QUESTION>: what is hpv ...", 1).unwrap(), "papillomavirus, HPV");
        assert_eq!(g.generate("... <QUESTION>: what is hpv ...", 2).unwrap(), "HPV, strains");
    }

    #[test]
    fn unmatched_prompt_uses_default() {
        let g = ScriptedGenerator::new(script());
        assert_eq!(g.generate("something else", 7).unwrap(), "fallback");
    }

    #[test]
    fn no_match_and_no_default_is_an_error() {
        let g = ScriptedGenerator::new(GeneratorScript { rules: vec![], default: None });
        assert!(g.generate("anything", 0).is_err());
    }

    #[test]
    fn determinism_per_prompt_and_seed() {
        let g = ScriptedGenerator::new(script());
        let a = g.generate("<QUESTION>: what is hpv", 5).unwrap();
        let b = g.generate("<QUESTION>: what is hpv", 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn script_round_trips_through_json() {
        let s = script();
        let json = serde_json::to_string(&s).unwrap();
        let back: GeneratorScript = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
