//! Verb-anchored unit extraction over a dependency parse.
//!
//! Each non-modifier VERB yields one unit: its nominal subject is the actor
//! and its direct object the recipient. Passives swap roles (the passive
//! subject becomes the recipient, the `by`-agent the actor). Modifier tokens
//! are never captured.

use crate::conllu::{ParsedSentence, ParsedToken};
use crate::error::{Error, Result};

/// Relations whose dependents are never captured as unit roles.
pub const MODIFIER_RELATIONS: [&str; 4] = ["amod", "advmod", "det", "nummod"];

const RELATIVE_PRONOUNS: [&str; 3] = ["who", "which", "that"];

/// Token indices of one unit, before embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSkeleton {
    pub motion: usize,
    pub actor: Option<usize>,
    pub recipient: Option<usize>,
    /// Inclusive (first, last) token index over the captured tokens.
    pub span: (usize, usize),
}

impl UnitSkeleton {
    fn new(motion: usize, actor: Option<usize>, recipient: Option<usize>) -> Self {
        let idx = [Some(motion), actor, recipient];
        let captured = idx.iter().flatten();
        let lo = *captured.clone().min().expect("motion present");
        let hi = *captured.max().expect("motion present");
        Self {
            motion,
            actor,
            recipient,
            span: (lo, hi),
        }
    }

    pub fn token_indices(&self) -> [Option<usize>; 3] {
        [Some(self.motion), self.actor, self.recipient]
    }
}

fn is_modifier(tok: &ParsedToken) -> bool {
    MODIFIER_RELATIONS.contains(&tok.base_deprel())
}

fn is_nominal(tok: &ParsedToken) -> bool {
    matches!(tok.upos.as_str(), "NOUN" | "PROPN" | "PRON" | "NUM" | "X")
}

fn is_passive_subject(tok: &ParsedToken) -> bool {
    matches!(tok.deprel.as_str(), "nsubj:pass" | "nsubjpass")
}

fn is_active_subject(tok: &ParsedToken) -> bool {
    tok.base_deprel() == "nsubj" && !is_passive_subject(tok)
}

fn is_relative_pronoun(tok: &ParsedToken) -> bool {
    tok.upos == "PRON" && RELATIVE_PRONOUNS.contains(&tok.lemma.to_lowercase().as_str())
}

struct Roles<'s> {
    sentence: &'s ParsedSentence,
}

impl<'s> Roles<'s> {
    fn tok(&self, i: usize) -> &'s ParsedToken {
        &self.sentence.tokens[i]
    }

    fn is_passive(&self, verb: usize) -> bool {
        let marked = self.sentence.children(verb).any(|c| {
            is_passive_subject(c) || matches!(c.deprel.as_str(), "aux:pass" | "auxpass" | "obl:agent" | "agent")
        });
        marked || self.shares_passive_subject(verb)
    }

    /// "The fish is caught and cooked": a subjectless conjunct of a passive
    /// verb shares that verb's passive subject.
    fn shares_passive_subject(&self, verb: usize) -> bool {
        let v = self.tok(verb);
        if v.is_root() || v.base_deprel() != "conj" || self.tok(v.head).upos != "VERB" {
            return false;
        }
        let own_subject = self.sentence.children(verb).any(|c| c.base_deprel() == "nsubj");
        !own_subject && self.is_passive(v.head)
    }

    fn is_unit_verb(&self, i: usize) -> bool {
        let t = self.tok(i);
        t.upos == "VERB" && !is_modifier(t)
    }

    /// A VERB that hands its motion to an `xcomp` VERB child.
    fn xcomp_child(&self, verb: usize) -> Option<usize> {
        self.sentence
            .children(verb)
            .find(|c| c.deprel == "xcomp" && c.upos == "VERB")
            .map(|c| c.index)
    }

    /// Resolves a relative pronoun to the noun its clause modifies.
    fn resolve(&self, verb: usize, role: usize) -> Option<usize> {
        let v = self.tok(verb);
        let r = self.tok(role);
        let out = if is_relative_pronoun(r) && v.base_deprel() == "acl" && !v.is_root() {
            v.head
        } else {
            role
        };
        (!is_modifier(self.tok(out))).then_some(out)
    }

    fn agent(&self, verb: usize) -> Option<usize> {
        for c in self.sentence.children(verb) {
            match c.deprel.as_str() {
                "obl:agent" => return Some(c.index),
                // ClearNLP style: agent -> "by" -> pobj
                "agent" => {
                    if let Some(p) = self.sentence.children(c.index).find(|g| g.deprel == "pobj") {
                        return Some(p.index);
                    }
                }
                "obl" => {
                    let by = self
                        .sentence
                        .children(c.index)
                        .any(|g| g.deprel == "case" && g.lemma.eq_ignore_ascii_case("by"));
                    if by {
                        return Some(c.index);
                    }
                }
                _ => {}
            }
        }
        None
    }

    fn own_actor(&self, verb: usize) -> Option<usize> {
        let direct = if self.is_passive(verb) {
            self.agent(verb)
        } else {
            self.sentence
                .children(verb)
                .find(|c| is_active_subject(c))
                .map(|c| c.index)
        };
        direct.and_then(|a| self.resolve(verb, a))
    }

    /// Actor with inheritance: xcomp and conj verbs borrow the governing
    /// verb's actor, participial `acl` verbs take the noun they modify.
    fn actor(&self, verb: usize, depth: usize) -> Option<usize> {
        if let Some(a) = self.own_actor(verb) {
            return Some(a);
        }
        if depth > self.sentence.tokens.len() {
            return None;
        }
        let v = self.tok(verb);
        if v.is_root() {
            return None;
        }
        let head = self.tok(v.head);
        match v.base_deprel() {
            "xcomp" | "conj" if head.upos == "VERB" => self.actor(head.index, depth + 1),
            "acl" if is_nominal(head) && !is_modifier(head) && !self.is_passive(verb) => {
                Some(head.index)
            }
            _ => None,
        }
    }

    fn recipient(&self, verb: usize) -> Option<usize> {
        let obj = self
            .sentence
            .children(verb)
            .find(|c| matches!(c.deprel.as_str(), "obj" | "dobj"))
            .map(|c| c.index);
        let found = obj.or_else(|| {
            self.sentence
                .children(verb)
                .find(|c| is_passive_subject(c))
                .map(|c| c.index)
                .or_else(|| {
                    self.shares_passive_subject(verb)
                        .then(|| self.recipient(self.tok(verb).head))
                        .flatten()
                })
        });
        found.and_then(|r| self.resolve(verb, r))
    }

    /// Unit for a sentence whose predicate is a copula.
    fn copula_unit(&self) -> Option<UnitSkeleton> {
        let root = self.sentence.root()?;
        let r = self.tok(root);
        let subject = |head: usize| {
            self.sentence
                .children(head)
                .find(|c| is_active_subject(c) && !is_modifier(c))
                .map(|c| c.index)
        };
        if r.upos == "AUX" {
            // ClearNLP style: the copula itself heads the clause.
            let complement = self
                .sentence
                .children(root)
                .find(|c| matches!(c.deprel.as_str(), "attr" | "oprd" | "obj") && is_nominal(c))
                .map(|c| c.index)
                .or_else(|| {
                    self.sentence
                        .children(root)
                        .filter(|c| c.deprel == "prep")
                        .find_map(|p| {
                            self.sentence
                                .children(p.index)
                                .find(|g| g.deprel == "pobj" && is_nominal(g))
                                .map(|g| g.index)
                        })
                });
            return Some(UnitSkeleton::new(root, subject(root), complement));
        }
        // UD style: the predicate nominal is the root and carries a `cop` child.
        let cop = self.sentence.children(root).find(|c| c.deprel == "cop")?;
        let complement = is_nominal(r).then_some(root);
        Some(UnitSkeleton::new(cop.index, subject(root), complement))
    }
}

/// Extracts one unit skeleton per anchoring verb, in sentence order.
pub fn extract_units(sentence: &ParsedSentence) -> Vec<UnitSkeleton> {
    let roles = Roles { sentence };
    let mut units = Vec::new();
    for tok in &sentence.tokens {
        let i = tok.index;
        if !roles.is_unit_verb(i) {
            continue;
        }
        // "starts to run": the inner verb carries the motion.
        if roles.xcomp_child(i).is_some() {
            continue;
        }
        units.push(UnitSkeleton::new(i, roles.actor(i, 0), roles.recipient(i)));
    }
    if units.is_empty() {
        units.extend(roles.copula_unit());
    }
    units
}

/// Picks the unit anchored at the root, else the shallowest verb (earliest on
/// ties).
pub fn select_core_unit(units: &[UnitSkeleton], sentence: &ParsedSentence) -> Result<usize> {
    if units.is_empty() {
        return Err(Error::EmptyUnitList);
    }
    if let Some(i) = units.iter().position(|u| sentence.tokens[u.motion].is_root()) {
        return Ok(i);
    }
    let best = units
        .iter()
        .enumerate()
        .min_by_key(|(_, u)| (sentence.depth(u.motion), u.motion))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(best)
}
