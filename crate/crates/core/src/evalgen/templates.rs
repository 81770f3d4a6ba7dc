//! Hand-written sentence frames for the nine environment classes.
//!
//! A frame has a DM prefix and a UM prefix that contain the same lexical
//! slots, an NPI position, and a shared continuation. Slots:
//!
//! * `{noun}` animate noun, `{thing}` inanimate noun
//! * `{v3}` / `{vpp}` / `{vbase}` verb in 3rd-person present, participle, base form
//! * `[lic]` licensor region, filled with a jointly drawn (DM, UM) pair
//!
//! Every occurrence of a slot is drawn independently, but the DM and UM
//! renderings of one instance share the same draws.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EnvClass;

/// Closed word lists the frames draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordLists {
    pub nouns: Vec<String>,
    pub things: Vec<String>,
    /// (3rd person present, past participle, base form)
    pub verbs: Vec<(String, String, String)>,
    /// (positive, superlative)
    pub adjectives: Vec<(String, String)>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for WordLists {
    fn default() -> Self {
        let verbs = [
            ("sees", "seen", "see"),
            ("likes", "liked", "like"),
            ("visits", "visited", "visit"),
            ("helps", "helped", "help"),
            ("finds", "found", "find"),
            ("meets", "met", "meet"),
            ("calls", "called", "call"),
            ("watches", "watched", "watch"),
            ("admires", "admired", "admire"),
            ("praises", "praised", "praise"),
            ("knows", "known", "know"),
            ("follows", "followed", "follow"),
            ("hears", "heard", "hear"),
            ("trusts", "trusted", "trust"),
            ("greets", "greeted", "greet"),
        ];
        let adjectives = [
            ("old", "oldest"),
            ("tall", "tallest"),
            ("young", "youngest"),
            ("big", "biggest"),
            ("small", "smallest"),
            ("new", "newest"),
            ("nice", "nicest"),
            ("cheap", "cheapest"),
        ];
        Self {
            nouns: owned(&[
                "lady", "boy", "teacher", "dancer", "student", "senator", "patient", "guy",
                "adult", "girl", "doctor", "farmer", "pilot", "baker", "singer", "writer",
                "actor", "child", "driver", "lawyer",
            ]),
            things: owned(&[
                "dish", "book", "song", "car", "house", "letter", "picture", "movie",
            ]),
            verbs: verbs
                .iter()
                .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
                .collect(),
            adjectives: adjectives
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

impl WordLists {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.nouns.is_empty()
            || self.things.is_empty()
            || self.verbs.is_empty()
            || self.adjectives.is_empty()
        {
            return Err("word lists must all be non-empty".into());
        }
        let all = self
            .nouns
            .iter()
            .chain(&self.things)
            .chain(self.verbs.iter().flat_map(|(a, b, c)| [a, b, c]))
            .chain(self.adjectives.iter().flat_map(|(a, b)| [a, b]));
        for word in all {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(format!("bad word {word:?}"));
            }
        }
        Ok(())
    }
}

/// Where the NPI sits in a frame and what replaces it in NPI-free text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpiSlot {
    /// Pre-verbal adverb (`ever`), omitted when absent.
    PreVerbal,
    /// Object position (`any {thing}`, `anything`, ...), replaced when absent.
    Object,
    /// Clause-final adverbial (`yet`, `at all`, ...), omitted when absent.
    Final,
}

/// (npi tokens, tokens following the NPI, replacement when no NPI is used)
type NpiOption = (&'static str, &'static str, &'static str);

const PRE_VERBAL: &[NpiOption] = &[("ever", "", "")];
const OBJECT: &[NpiOption] = &[
    ("any", "{thing}", "the {thing}"),
    ("anything", "", "something"),
    ("anyone", "", "someone"),
    ("anybody", "", "somebody"),
];
const FINAL: &[NpiOption] = &[
    ("yet", "", ""),
    ("anymore", "", ""),
    ("at all", "", ""),
    ("in years", "", ""),
    ("whatsoever", "", ""),
    ("anywhere", "", ""),
];

impl NpiSlot {
    fn options(self) -> &'static [NpiOption] {
        match self {
            NpiSlot::PreVerbal => PRE_VERBAL,
            NpiSlot::Object => OBJECT,
            NpiSlot::Final => FINAL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub env: EnvClass,
    pub dm_prefix: &'static str,
    pub um_prefix: &'static str,
    /// Jointly drawn (DM, UM) fillers for `[lic]`; empty when the prefixes
    /// differ by word order instead.
    pub licensors: &'static [(&'static str, &'static str)],
    pub npi: NpiSlot,
    /// Shared continuation after the NPI, without final punctuation.
    pub continuation: &'static str,
    pub dm_end: &'static str,
    pub um_end: &'static str,
}

const ADV_LIC: &[(&str, &str)] = &[
    ("rarely", "sometimes"),
    ("seldom", "often"),
    ("hardly", "usually"),
    ("never", "always"),
];
const COND_LIC: &[(&str, &str)] = &[("if", "while"), ("if", "because")];
const DNEG_LIC: &[(&str, &str)] = &[("no", "some")];
const SNEG_LIC: &[(&str, &str)] = &[("not", "really"), ("n't", "also")];
const ONLY_LIC: &[(&str, &str)] = &[("only", "even")];
const QNT_LIC: &[(&str, &str)] = &[("every", "some")];
const QUES_LIC: &[(&str, &str)] = &[
    ("wonders whether", "says that"),
    ("asks whether", "thinks that"),
];
const SUP_LIC: &[(&str, &str)] = &[("[sup]", "[adj]")];

const fn frame(
    env: EnvClass,
    dm_prefix: &'static str,
    um_prefix: &'static str,
    licensors: &'static [(&'static str, &'static str)],
    npi: NpiSlot,
    continuation: &'static str,
) -> Frame {
    Frame {
        env,
        dm_prefix,
        um_prefix,
        licensors,
        npi,
        continuation,
        dm_end: ".",
        um_end: ".",
    }
}

pub const FRAMES: &[Frame] = &[
    frame(EnvClass::Adv, "the {noun} [lic]", "the {noun} [lic]", ADV_LIC, NpiSlot::PreVerbal, "{v3} the {thing}"),
    frame(EnvClass::Adv, "the {noun} [lic] {v3}", "the {noun} [lic] {v3}", ADV_LIC, NpiSlot::Object, ""),
    frame(EnvClass::Cond, "[lic] the {noun} {v3}", "[lic] the {noun} {v3}", COND_LIC, NpiSlot::Object, ", the {noun} {v3} the {thing}"),
    frame(EnvClass::Cond, "[lic] the {noun} has", "[lic] the {noun} has", COND_LIC, NpiSlot::PreVerbal, "{vpp} the {thing} , the {noun} {v3} the {thing}"),
    frame(EnvClass::DNeg, "[lic] {noun} says that the {noun} had {vpp} the {thing}", "[lic] {noun} says that the {noun} had {vpp} the {thing}", DNEG_LIC, NpiSlot::Final, ""),
    frame(EnvClass::DNeg, "[lic] {noun} has {vpp}", "[lic] {noun} has {vpp}", DNEG_LIC, NpiSlot::Object, ""),
    frame(EnvClass::SNeg, "the {noun} was [lic] saying that the {noun} had {vpp} the {thing}", "the {noun} was [lic] saying that the {noun} had {vpp} the {thing}", SNEG_LIC, NpiSlot::Final, ""),
    frame(EnvClass::SNeg, "the {noun} did [lic] {vbase}", "the {noun} did [lic] {vbase}", SNEG_LIC, NpiSlot::Object, ""),
    frame(EnvClass::Only, "[lic] the {noun} had", "[lic] the {noun} had", ONLY_LIC, NpiSlot::PreVerbal, "{vpp} the {thing}"),
    frame(EnvClass::Only, "[lic] the {noun} {v3}", "[lic] the {noun} {v3}", ONLY_LIC, NpiSlot::Object, ""),
    frame(EnvClass::Qnt, "[lic] {noun} who had", "[lic] {noun} who had", QNT_LIC, NpiSlot::PreVerbal, "{vpp} the {thing} {v3} the {thing}"),
    frame(EnvClass::Qnt, "[lic] {noun} who {v3}", "[lic] {noun} who {v3}", QNT_LIC, NpiSlot::Object, "{v3} the {thing}"),
    frame(EnvClass::Ques, "the {noun} [lic] the {noun} {v3}", "the {noun} [lic] the {noun} {v3}", QUES_LIC, NpiSlot::Object, ""),
    frame(EnvClass::Ques, "the {noun} [lic] the {noun} has", "the {noun} [lic] the {noun} has", QUES_LIC, NpiSlot::PreVerbal, "{vpp} the {thing}"),
    Frame {
        env: EnvClass::SmpQ,
        dm_prefix: "did the {noun}",
        um_prefix: "the {noun} did",
        licensors: &[],
        npi: NpiSlot::PreVerbal,
        continuation: "{vbase} the {thing}",
        dm_end: "?",
        um_end: ".",
    },
    Frame {
        env: EnvClass::SmpQ,
        dm_prefix: "did the {noun} {vbase}",
        um_prefix: "the {noun} did {vbase}",
        licensors: &[],
        npi: NpiSlot::Object,
        continuation: "",
        dm_end: "?",
        um_end: ".",
    },
    frame(EnvClass::Sup, "the {noun} {v3} the [lic] {thing} that the {noun} had", "the {noun} {v3} the [lic] {thing} that the {noun} had", SUP_LIC, NpiSlot::PreVerbal, "{vpp}"),
    frame(EnvClass::Sup, "the {noun} {v3} the [lic] {thing} that the {noun} has {vpp}", "the {noun} {v3} the [lic] {thing} that the {noun} has {vpp}", SUP_LIC, NpiSlot::Final, ""),
];

pub fn frames_for(env: EnvClass) -> impl Iterator<Item = &'static Frame> {
    FRAMES.iter().filter(move |f| f.env == env)
}

/// One drawn instance of a frame: the same slot values render both the DM
/// and the UM version.
#[derive(Debug, Clone)]
pub struct Instance {
    pub frame: &'static Frame,
    pub dm_prefix: Vec<String>,
    pub um_prefix: Vec<String>,
    pub npi: Vec<String>,
    /// Tokens between the NPI and the final punctuation when the NPI is used.
    pub continuation: Vec<String>,
    /// Tokens in place of NPI + continuation when no NPI is used.
    pub plain_continuation: Vec<String>,
}

struct SlotDraws<'a, R> {
    words: &'a WordLists,
    rng: &'a mut R,
    drawn: HashMap<(String, usize), String>,
    adjective: Option<(String, String)>,
}

impl<R: Rng> SlotDraws<'_, R> {
    fn fresh(&mut self, slot: &str) -> String {
        let words = self.words;
        match slot {
            "noun" => words.nouns.choose(self.rng).unwrap().clone(),
            "thing" => words.things.choose(self.rng).unwrap().clone(),
            "v3" => words.verbs.choose(self.rng).unwrap().0.clone(),
            "vpp" => words.verbs.choose(self.rng).unwrap().1.clone(),
            "vbase" => words.verbs.choose(self.rng).unwrap().2.clone(),
            other => panic!("unknown slot `{other}` in frame"),
        }
    }

    fn adjective(&mut self) -> (String, String) {
        if self.adjective.is_none() {
            self.adjective = Some(self.words.adjectives.choose(self.rng).unwrap().clone());
        }
        self.adjective.clone().unwrap()
    }

    /// Renders `template`, numbering slot occurrences per render call so a
    /// second call with a reordered template reuses the same values.
    fn render(&mut self, template: &str, licensor: &str) -> Vec<String> {
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut out = Vec::new();
        for piece in template.split_whitespace() {
            if piece == "[lic]" {
                let licensor = licensor.to_string();
                out.extend(self.render_licensor(&licensor));
            } else if let Some(slot) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
                let k = seen.entry(slot.to_string()).or_default();
                let key = (slot.to_string(), *k);
                *k += 1;
                let value = match self.drawn.get(&key) {
                    Some(v) => v.clone(),
                    None => {
                        let v = self.fresh(slot);
                        self.drawn.insert(key, v.clone());
                        v
                    }
                };
                out.push(value);
            } else {
                out.push(piece.to_string());
            }
        }
        out
    }

    fn render_licensor(&mut self, licensor: &str) -> Vec<String> {
        match licensor {
            "[sup]" => vec![self.adjective().1],
            "[adj]" => vec![self.adjective().0],
            other => other.split_whitespace().map(str::to_string).collect(),
        }
    }
}

impl Frame {
    /// Draws slot values, a licensor pair and an NPI option.
    pub fn instantiate<R: Rng>(&'static self, words: &WordLists, rng: &mut R) -> Instance {
        let (dm_lic, um_lic) = if self.licensors.is_empty() {
            ("", "")
        } else {
            *self.licensors.choose(rng).unwrap()
        };
        let (npi, after_npi, replacement) = *self.npi.options().choose(rng).unwrap();
        let mut draws = SlotDraws {
            words,
            rng,
            drawn: HashMap::new(),
            adjective: None,
        };
        let dm_prefix = draws.render(self.dm_prefix, dm_lic);
        let um_prefix = draws.render(self.um_prefix, um_lic);
        let tail = draws.render(self.continuation, "");
        let after = draws.render(after_npi, "");
        let replaced = draws.render(replacement, "");
        let mut continuation = after.clone();
        continuation.extend(tail.iter().cloned());
        let mut plain_continuation = replaced;
        plain_continuation.extend(tail);
        Instance {
            frame: self,
            dm_prefix,
            um_prefix,
            npi: npi.split_whitespace().map(str::to_string).collect(),
            continuation,
            plain_continuation,
        }
    }
}

impl Instance {
    fn join(parts: &[&[String]], end: &str) -> Vec<String> {
        let mut out: Vec<String> = parts.iter().flat_map(|p| p.iter().cloned()).collect();
        out.push(end.to_string());
        out
    }

    pub fn dm_with_npi(&self, marker: Option<&str>) -> Vec<String> {
        let marker: Vec<String> = marker.into_iter().map(str::to_string).collect();
        Self::join(
            &[&self.dm_prefix, &self.npi, &self.continuation, &marker],
            self.frame.dm_end,
        )
    }

    pub fn um_with_npi(&self) -> Vec<String> {
        Self::join(
            &[&self.um_prefix, &self.npi, &self.continuation],
            self.frame.um_end,
        )
    }

    pub fn dm_plain(&self, marker: Option<&str>) -> Vec<String> {
        let marker: Vec<String> = marker.into_iter().map(str::to_string).collect();
        Self::join(
            &[&self.dm_prefix, &self.plain_continuation, &marker],
            self.frame.dm_end,
        )
    }

    pub fn um_plain(&self) -> Vec<String> {
        Self::join(&[&self.um_prefix, &self.plain_continuation], self.frame.um_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_class_has_frames() {
        for env in EnvClass::ALL {
            assert!(frames_for(env).count() >= 2, "{env}");
        }
    }

    #[test]
    fn dm_and_um_share_slot_values() {
        let words = WordLists::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let smpq = frames_for(EnvClass::SmpQ).next().unwrap();
        for _ in 0..20 {
            let inst = smpq.instantiate(&words, &mut rng);
            assert_eq!(inst.dm_prefix[0], "did");
            assert_eq!(inst.um_prefix[2], "did");
            assert_eq!(inst.dm_prefix[2], inst.um_prefix[1]);
        }
        let sup = frames_for(EnvClass::Sup).next().unwrap();
        for _ in 0..20 {
            let inst = sup.instantiate(&words, &mut rng);
            let dm_adj = &inst.dm_prefix[4];
            let um_adj = &inst.um_prefix[4];
            assert!(words.adjectives.iter().any(|(p, s)| p == um_adj && s == dm_adj));
            assert_eq!(inst.dm_prefix[..4], inst.um_prefix[..4]);
            assert_eq!(inst.dm_prefix[5..], inst.um_prefix[5..]);
        }
    }

    #[test]
    fn default_words_avoid_licensor_and_npi_collisions() {
        let words = WordLists::default();
        assert!(words.validate().is_ok());
        let npis = crate::corpus::NpiLexicon::default();
        for w in words.nouns.iter().chain(&words.things) {
            assert!(!w.ends_with("est"), "{w}");
            assert!(!npis.expressions().iter().any(|e| e.len() == 1 && &e[0] == w));
        }
    }
}
