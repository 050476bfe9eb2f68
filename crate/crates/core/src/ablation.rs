//! Corpus-size ablation: top-1 score of fixed prompts on nested random
//! subsets of the index.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::CorpusIndex;
use crate::matcher::{retrieve_scoped, MatchConfig};
use crate::semantics::{PromptSemantics, Vectorizer};

/// The ten evaluation prompts, one per line.
pub const DEFAULT_PROMPTS: &str = include_str!("../fixtures/ablation_prompts.txt");
/// Hand-checked dependency parses of [`DEFAULT_PROMPTS`].
pub const DEFAULT_PROMPT_PARSES: &str = include_str!("../fixtures/ablation_prompts.conllu");

/// Label of the per-fraction average rows in the CSV.
pub const AVERAGE_ID: &str = "__avg__";

pub fn default_prompts() -> Vec<String> {
    parse_prompt_list(DEFAULT_PROMPTS)
}

/// One prompt per non-blank line; lines starting with `#` are comments.
pub fn parse_prompt_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub prompts: Vec<String>,
    pub match_cfg: MatchConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            fractions: vec![1.0, 0.5, 0.25, 0.1, 0.05, 0.01],
            seed: 0,
            prompts: default_prompts(),
            match_cfg: MatchConfig::default(),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prompts.is_empty() {
            return Err(Error::EmptyPromptList);
        }
        self.validate_sampling()
    }

    /// Everything except the prompt list.
    fn validate_sampling(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::InvalidConfig("no fractions given".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::InvalidConfig(format!("fraction {f} outside (0, 1]")));
        }
        if self.fractions.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig("fractions must be unique and sorted descending".into()));
        }
        self.match_cfg.validate()
    }
}

/// `ceil(f * n)`, ignoring float noise that would otherwise push an exact
/// product (such as `0.1 * 10000`) up by one.
pub fn subset_size(f: f64, n: usize) -> usize {
    let x = f * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub prompt_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    /// Per-prompt rows, grouped by fraction in configured order.
    pub rows: Vec<AblationRow>,
    /// `(fraction, mean top-1 score)`.
    pub averages: Vec<(f64, f64)>,
    /// Number of entries evaluated at each fraction.
    pub sizes: Vec<usize>,
}

impl AblationTable {
    pub fn score(&self, fraction: f64, prompt_id: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.fraction == fraction && r.prompt_id == prompt_id)
            .map(|r| r.score)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["fraction", "prompt_id", "score"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([r.fraction.to_string(), r.prompt_id.clone(), r.score.to_string()])
                .map_err(err)?;
        }
        for (f, avg) in &self.averages {
            w.write_record([f.to_string(), AVERAGE_ID.to_string(), avg.to_string()])
                .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is UTF-8")
    }
}

/// Prompt ids used in the table: `p01`, `p02`, ...
pub fn prompt_id(i: usize) -> String {
    format!("p{:02}", i + 1)
}

/// Vectorizes the configured prompts, then runs [`run_ablation_with`].
pub fn run_ablation(index: &CorpusIndex, vectorizer: &Vectorizer, cfg: &AblationConfig) -> Result<AblationTable> {
    cfg.validate()?;
    let prompts = cfg
        .prompts
        .iter()
        .map(|p| vectorizer.vectorize(p))
        .collect::<Result<Vec<_>>>()?;
    run_ablation_with(index, &prompts, cfg)
}

/// One seeded permutation of the corpus; each fraction evaluates its prefix,
/// so smaller subsets are always contained in larger ones.
pub fn run_ablation_with(index: &CorpusIndex, prompts: &[PromptSemantics], cfg: &AblationConfig) -> Result<AblationTable> {
    if prompts.is_empty() {
        return Err(Error::EmptyPromptList);
    }
    cfg.validate_sampling()?;
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let n = index.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut rows = Vec::new();
    let mut averages = Vec::new();
    let mut sizes = Vec::new();
    for &f in &cfg.fractions {
        let k = subset_size(f, n);
        let mut scope = perm[..k].to_vec();
        scope.sort_unstable();
        let scores: Vec<f64> = prompts
            .par_iter()
            .map(|p| {
                let top = retrieve_scoped(p, index, Some(&scope), &cfg.match_cfg)?;
                Ok(top.first().map(|m| m.score).expect("non-empty scope yields a match"))
            })
            .collect::<Result<_>>()?;
        averages.push((f, scores.iter().sum::<f64>() / scores.len() as f64));
        sizes.push(k);
        rows.extend(scores.into_iter().enumerate().map(|(i, score)| AblationRow {
            fraction: f,
            prompt_id: prompt_id(i),
            score,
        }));
    }
    Ok(AblationTable { rows, averages, sizes })
}
