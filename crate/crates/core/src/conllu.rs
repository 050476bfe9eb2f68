//! CoNLL-U (UD v2) reading and writing.
//!
//! Only the ID, FORM, LEMMA, UPOS, HEAD and DEPREL columns are consumed.
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedToken {
    /// 0-based position in the sentence.
    pub index: usize,
    pub text: String,
    pub lemma: String,
    pub upos: String,
    /// 0-based index of the governor; the root points at itself.
    pub head: usize,
    pub deprel: String,
}

impl ParsedToken {
    pub fn is_root(&self) -> bool {
        self.deprel == "root"
    }

    /// Relation without its subtype (`nsubj:pass` -> `nsubj`).
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or(&self.deprel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub tokens: Vec<ParsedToken>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_id: Option<String>,
}

impl ParsedSentence {
    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().position(ParsedToken::is_root)
    }

    pub fn children(&self, head: usize) -> impl Iterator<Item = &ParsedToken> + '_ {
        self.tokens
            .iter()
            .filter(move |t| t.head == head && t.index != head)
    }

    /// Distance from the root (root = 0). Assumes an acyclic tree.
    pub fn depth(&self, idx: usize) -> usize {
        let mut depth = 0;
        let mut cur = idx;
        while !self.tokens[cur].is_root() && self.tokens[cur].head != cur {
            cur = self.tokens[cur].head;
            depth += 1;
            if depth > self.tokens.len() {
                break;
            }
        }
        depth
    }

    /// Serialises the sentence as one CoNLL-U block (with trailing blank line).
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        if let Some(id) = &self.sent_id {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        let _ = writeln!(out, "# text = {}", self.text);
        for t in &self.tokens {
            let head = if t.is_root() { 0 } else { t.head + 1 };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index + 1,
                t.text,
                if t.lemma.is_empty() { "_" } else { &t.lemma },
                t.upos,
                head,
                t.deprel
            );
        }
        out.push('\n');
        out
    }
}

struct RawToken {
    id: usize,
    form: String,
    lemma: String,
    upos: String,
    head: usize,
    deprel: String,
    line: usize,
}

#[derive(Default)]
struct Block {
    first_line: usize,
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<RawToken>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.sent_id.is_none() && self.text.is_none()
    }

    fn finish(self) -> Result<Option<ParsedSentence>> {
        if self.tokens.is_empty() {
            return Ok(None);
        }
        let n = self.tokens.len();
        let mut root = None;
        let mut tokens = Vec::with_capacity(n);
        for (i, raw) in self.tokens.into_iter().enumerate() {
            if raw.head > n {
                return Err(Error::conllu(
                    raw.line,
                    format!("HEAD {} outside sentence of {n} tokens", raw.head),
                ));
            }
            let head = if raw.head == 0 {
                if root.replace(i).is_some() {
                    return Err(Error::conllu(raw.line, "more than one root"));
                }
                i
            } else if raw.deprel == "root" {
                return Err(Error::conllu(raw.line, "`root` relation with non-zero HEAD"));
            } else if raw.head == raw.id {
                return Err(Error::CyclicTree {
                    line: self.first_line,
                });
            } else {
                raw.head - 1
            };
            let deprel = if raw.head == 0 { "root".to_string() } else { raw.deprel };
            tokens.push(ParsedToken {
                index: i,
                text: raw.form,
                lemma: raw.lemma,
                upos: raw.upos,
                head,
                deprel,
            });
        }
        if root.is_none() {
            return Err(Error::conllu(self.first_line, "sentence has no root"));
        }
        // Every chain of heads must reach the root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while tokens[cur].head != cur {
                cur = tokens[cur].head;
                steps += 1;
                if steps > n {
                    return Err(Error::CyclicTree {
                        line: self.first_line,
                    });
                }
            }
        }
        let text = self.text.unwrap_or_else(|| {
            tokens
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        });
        Ok(Some(ParsedSentence {
            tokens,
            text,
            sent_id: self.sent_id,
        }))
    }
}

/// Reads every sentence block from a CoNLL-U stream.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<ParsedSentence>> {
    let mut out = Vec::new();
    let mut block = Block::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(s) = std::mem::take(&mut block).finish()? {
                out.push(s);
            }
            continue;
        }
        if block.is_empty() {
            block.first_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => block.sent_id = Some(value.trim().to_string()),
                    "text" => block.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::conllu(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| Error::conllu(line_no, format!("non-integer ID `{id}`")))?;
        if id != block.tokens.len() + 1 {
            return Err(Error::conllu(
                line_no,
                format!("token ID {id} out of sequence"),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::conllu(line_no, format!("non-integer HEAD `{}`", cols[6])))?;
        block.tokens.push(RawToken {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
            line: line_no,
        });
    }
    if let Some(s) = block.finish()? {
        out.push(s);
    }
    Ok(out)
}

pub fn parse_conllu_str(input: &str) -> Result<Vec<ParsedSentence>> {
    parse_conllu(input.as_bytes())
}
