use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// The 40 filtered NPI expressions, one per line.
pub const DEFAULT_NPI_LEXICON: &str = include_str!("../../data/npi_lexicon.txt");

/// Default licensor expressions, `CLASS<TAB>expression` per line.
pub const DEFAULT_LICENSORS: &str = include_str!("../../data/licensors.tsv");

/// The nine NPI-licensing environment classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvClass {
    Adv,
    Cond,
    DNeg,
    SNeg,
    Only,
    Qnt,
    Ques,
    SmpQ,
    Sup,
}

impl EnvClass {
    pub const ALL: [EnvClass; 9] = [
        EnvClass::Adv,
        EnvClass::Cond,
        EnvClass::DNeg,
        EnvClass::SNeg,
        EnvClass::Only,
        EnvClass::Qnt,
        EnvClass::Ques,
        EnvClass::SmpQ,
        EnvClass::Sup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvClass::Adv => "ADV",
            EnvClass::Cond => "COND",
            EnvClass::DNeg => "D-NEG",
            EnvClass::SNeg => "S-NEG",
            EnvClass::Only => "ONLY",
            EnvClass::Qnt => "QNT",
            EnvClass::Ques => "QUES",
            EnvClass::SmpQ => "SMP-Q",
            EnvClass::Sup => "SUP",
        }
    }

    pub fn index(self) -> usize {
        EnvClass::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Simple questions are licensed by a sentence-final question mark rather
    /// than by a licensor expression.
    pub fn is_punctuation_triggered(self) -> bool {
        self == EnvClass::SmpQ
    }
}

impl fmt::Display for EnvClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownEnvClass(s.to_string()))
    }
}

impl Serialize for EnvClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EnvClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous token match: `tokens[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start: usize,
    pub len: usize,
}

impl MatchSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

fn lowered(sentence: &Sentence) -> Vec<String> {
    sentence.tokens().iter().map(|t| t.to_lowercase()).collect()
}

/// Multi-token NPI expressions, matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpiLexicon {
    expressions: Vec<Vec<String>>,
}

impl NpiLexicon {
    pub fn new<I, E, S>(expressions: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (i, expr) in expressions.into_iter().enumerate() {
            let expr: Vec<String> = expr
                .into_iter()
                .map(|t| t.as_ref().to_lowercase())
                .collect();
            if expr.is_empty() {
                return Err(Error::Lexicon {
                    line: i + 1,
                    reason: "empty expression".into(),
                });
            }
            if !seen.insert(expr.clone()) {
                return Err(Error::Lexicon {
                    line: i + 1,
                    reason: format!("duplicate expression `{}`", expr.join(" ")),
                });
            }
            out.push(expr);
        }
        if out.is_empty() {
            return Err(Error::Empty("NPI lexicon"));
        }
        Ok(Self { expressions: out })
    }

    /// One expression per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::split_whitespace),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn expressions(&self) -> &[Vec<String>] {
        &self.expressions
    }

    /// Single-token expressions.
    pub fn single_tokens(&self) -> impl Iterator<Item = &str> {
        self.expressions
            .iter()
            .filter(|e| e.len() == 1)
            .map(|e| e[0].as_str())
    }

    fn matches_lowered(&self, tokens: &[String]) -> Vec<MatchSpan> {
        let mut spans = Vec::new();
        for start in 0..tokens.len() {
            for expr in &self.expressions {
                if tokens[start..].starts_with(expr) {
                    spans.push(MatchSpan {
                        start,
                        len: expr.len(),
                    });
                }
            }
        }
        spans
    }

    /// All (possibly overlapping) expression matches, ordered by start.
    pub fn matches(&self, sentence: &Sentence) -> Vec<MatchSpan> {
        self.matches_lowered(&lowered(sentence))
    }
}

impl Default for NpiLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_NPI_LEXICON).expect("bundled NPI lexicon is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternToken {
    Exact(String),
    /// `*suffix`: any token longer than the suffix that ends with it.
    Suffix(String),
}

impl PatternToken {
    fn matches(&self, token: &str) -> bool {
        match self {
            PatternToken::Exact(t) => token == t,
            PatternToken::Suffix(s) => token.len() > s.len() && token.ends_with(s.as_str()),
        }
    }
}

/// A licensor expression, e.g. `rarely` or `the *est`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicensorPattern(pub Vec<PatternToken>);

impl LicensorPattern {
    pub fn parse(expr: &str) -> Result<Self> {
        let tokens: Vec<PatternToken> = expr
            .split_whitespace()
            .map(|t| {
                let t = t.to_lowercase();
                match t.strip_prefix('*') {
                    Some(suffix) if !suffix.is_empty() => PatternToken::Suffix(suffix.to_string()),
                    _ => PatternToken::Exact(t),
                }
            })
            .collect();
        if tokens.is_empty() {
            return Err(Error::Lexicon {
                line: 0,
                reason: "empty licensor expression".into(),
            });
        }
        Ok(Self(tokens))
    }

    fn matches_at(&self, tokens: &[String], start: usize) -> bool {
        tokens.len() >= start + self.0.len()
            && self
                .0
                .iter()
                .zip(&tokens[start..])
                .all(|(p, t)| p.matches(t))
    }
}

/// Licensor expressions per environment class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicensorLexicon {
    by_class: BTreeMap<EnvClass, Vec<LicensorPattern>>,
}

impl LicensorLexicon {
    /// Lines of the form `CLASS<TAB>expression`; blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut by_class: BTreeMap<EnvClass, Vec<LicensorPattern>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (class, expr) = line.split_once('\t').ok_or_else(|| Error::Lexicon {
                line: i + 1,
                reason: "expected CLASS<TAB>expression".into(),
            })?;
            let class: EnvClass = class.trim().parse().map_err(|_| Error::Lexicon {
                line: i + 1,
                reason: format!("unknown class `{class}`"),
            })?;
            let pattern = LicensorPattern::parse(expr).map_err(|_| Error::Lexicon {
                line: i + 1,
                reason: "empty licensor expression".into(),
            })?;
            by_class.entry(class).or_default().push(pattern);
        }
        Ok(Self { by_class })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn patterns(&self, env: EnvClass) -> &[LicensorPattern] {
        self.by_class.get(&env).map(Vec::as_slice).unwrap_or(&[])
    }

    fn matches_lowered(&self, env: EnvClass, tokens: &[String]) -> Vec<MatchSpan> {
        let patterns = self.patterns(env);
        (0..tokens.len())
            .flat_map(|start| {
                patterns
                    .iter()
                    .filter(move |p| p.matches_at(tokens, start))
                    .map(move |p| MatchSpan {
                        start,
                        len: p.0.len(),
                    })
            })
            .collect()
    }

    pub fn matches(&self, env: EnvClass, sentence: &Sentence) -> Vec<MatchSpan> {
        self.matches_lowered(env, &lowered(sentence))
    }
}

impl Default for LicensorLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LICENSORS).expect("bundled licensor lexicon is valid")
    }
}

/// Whether the sentence contains an NPI expression, with every match span.
pub fn contains_npi(sentence: &Sentence, lexicon: &NpiLexicon) -> (bool, Vec<MatchSpan>) {
    let spans = lexicon.matches(sentence);
    (!spans.is_empty(), spans)
}

/// Whether an NPI in the sentence is licensed by `env` under the
/// linear-precedence heuristic: some NPI match starts after the end of some
/// licensor match. Simple questions instead require an NPI anywhere in a
/// sentence whose final token is `?`.
pub fn in_licensed_environment(
    sentence: &Sentence,
    env: EnvClass,
    npis: &NpiLexicon,
    licensors: &LicensorLexicon,
) -> bool {
    let tokens = lowered(sentence);
    let npi_spans = npis.matches_lowered(&tokens);
    if npi_spans.is_empty() {
        return false;
    }
    if env.is_punctuation_triggered() {
        return tokens.last().is_some_and(|t| t == "?");
    }
    let Some(first_licensor_end) = licensors
        .matches_lowered(env, &tokens)
        .iter()
        .map(MatchSpan::end)
        .min()
    else {
        return false;
    };
    npi_spans.iter().any(|s| s.start >= first_licensor_end)
}
