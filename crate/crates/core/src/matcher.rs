//! Coarse filtering and ranking of corpus entries against a prompt.
//!
//! Retrieval runs three filter rounds (sentence similarity, core motion,
//! core actor), each with a top-k fail-safe, then ranks the survivors by
//!
//! ```text
//! Score = sim(total) + alpha * sim(core motion) + beta * sim(core actor) + gamma * sim'(units)
//! ```
//!
//! The brute-force oracle scores every entry with the same code path, so the
//! two agree bit for bit on every entry they both score.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{CorpusIndex, ACTOR, MOTION};
use crate::semantics::{PromptSemantics, SemanticUnit};
use crate::vector::{component_sim, cosine_or_zero, VecRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub t_total: f64,
    pub t_mot: f64,
    pub t_atr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub failsafe_k: usize,
    pub top_k: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            t_total: 0.3,
            t_mot: 0.9,
            t_atr: 0.4,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            failsafe_k: 10,
            top_k: 1,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_total", self.t_total), ("t_mot", self.t_mot), ("t_atr", self.t_atr)] {
            if !(-1.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("{name} = {t} is outside [-1, 1]")));
            }
        }
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {w} must be a finite value >= 0")));
            }
        }
        if self.failsafe_k == 0 {
            return Err(Error::InvalidConfig("failsafe_k must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn score(&self, parts: &ScoreParts) -> f64 {
        parts.total_sim + self.alpha * parts.core_mot_sim + self.beta * parts.core_atr_sim + self.gamma * parts.unit_set_sim
    }

    /// How many of the three filter thresholds these parts clear. Rounds 2
    /// and 3 count as cleared when the prompt has no units, since they are
    /// skipped for such prompts.
    pub fn thresholds_met(&self, parts: &ScoreParts, prompt_has_units: bool) -> u8 {
        let mut n = (parts.total_sim >= self.t_total) as u8;
        if prompt_has_units {
            n += (parts.core_mot_sim >= self.t_mot) as u8;
            n += (parts.core_atr_sim >= self.t_atr) as u8;
        } else {
            n += 2;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParts {
    pub total_sim: f64,
    pub core_mot_sim: f64,
    pub core_atr_sim: f64,
    pub unit_set_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub entry_id: String,
    pub score: f64,
    pub parts: ScoreParts,
    /// Filter thresholds (0..=3) this entry clears on its own merit.
    pub survived_rounds: u8,
    /// True when the entry reached ranking only through a fail-safe, i.e.
    /// it may differ from the unfiltered optimum.
    pub via_failsafe: bool,
}

/// Sizes of one filter round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub input: usize,
    /// Entries meeting the threshold.
    pub passed: usize,
    pub survivors: usize,
    pub failsafe_used: bool,
    /// Round skipped because the prompt has no units.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// Surviving entry positions, ascending (ingestion order).
    pub survivors: Vec<usize>,
    pub rounds: [RoundReport; 3],
}

impl FilterOutcome {
    pub fn survivor_ids<'a>(&self, index: &'a CorpusIndex) -> Vec<&'a str> {
        self.survivors.iter().map(|&p| index.entry_id(p)).collect()
    }
}

// ---------------------------------------------------------------------------
// Shared scoring.

type Roles<'a> = [Option<VecRef<'a>>; 3];

struct PromptView<'a> {
    total: VecRef<'a>,
    units: Vec<Roles<'a>>,
    core: Option<usize>,
}

impl<'a> PromptView<'a> {
    fn new(p: &'a PromptSemantics) -> Self {
        Self {
            total: p.total.view(),
            units: p.units.iter().map(SemanticUnit::roles).collect(),
            core: p.core_index,
        }
    }
}

/// Role similarity between prompt unit `p` and entry unit `e`.
trait RoleSims {
    fn entry_units(&self) -> usize;
    fn entry_core(&self) -> Option<usize>;
    fn role(&self, p: usize, role: usize, e: usize) -> Result<f64>;
}

fn core_sims<S: RoleSims>(s: &S, prompt_core: Option<usize>) -> Result<(f64, f64)> {
    match (prompt_core, s.entry_core()) {
        (Some(pc), Some(ec)) => Ok((s.role(pc, MOTION, ec)?, s.role(pc, ACTOR, ec)?)),
        _ => Ok((0.0, 0.0)),
    }
}

fn unit_set<S: RoleSims>(s: &S, prompt_units: usize) -> Result<f64> {
    let ne = s.entry_units();
    if prompt_units == 0 || ne == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for p in 0..prompt_units {
        let mut best = f64::NEG_INFINITY;
        for e in 0..ne {
            let pair = s.role(p, 0, e)? + s.role(p, 1, e)? + s.role(p, 2, e)?;
            if pair > best {
                best = pair;
            }
        }
        sum += best;
    }
    Ok(sum / prompt_units as f64)
}

fn parts_with<S: RoleSims>(s: &S, total_sim: f64, prompt: &PromptView<'_>) -> Result<ScoreParts> {
    let (core_mot_sim, core_atr_sim) = core_sims(s, prompt.core)?;
    Ok(ScoreParts {
        total_sim,
        core_mot_sim,
        core_atr_sim,
        unit_set_sim: unit_set(s, prompt.units.len())?,
    })
}

/// Computes cosines directly from the vectors.
struct DirectSims<'p, 'e> {
    prompt: &'p [Roles<'p>],
    entry: Vec<Roles<'e>>,
    core: Option<usize>,
}

impl RoleSims for DirectSims<'_, '_> {
    fn entry_units(&self) -> usize {
        self.entry.len()
    }
    fn entry_core(&self) -> Option<usize> {
        self.core
    }
    fn role(&self, p: usize, role: usize, e: usize) -> Result<f64> {
        component_sim(self.prompt[p][role], self.entry[e][role])
    }
}

/// Looks role similarities up in a per-query table over the index's word
/// table. Table cells are produced by the same `component_sim` call the
/// direct path makes, so both paths yield identical bits.
struct QueryPlan<'a> {
    prompt: PromptView<'a>,
    /// `tables[p][role][word]`; `None` when prompt unit `p` lacks the role.
    tables: Vec<[Option<Vec<f64>>; 3]>,
}

impl<'a> QueryPlan<'a> {
    fn new(prompt: &'a PromptSemantics, index: &CorpusIndex) -> Result<Self> {
        let view = PromptView::new(prompt);
        let words = &index.words;
        let mut tables = Vec::with_capacity(view.units.len());
        for roles in &view.units {
            let mut row: [Option<Vec<f64>>; 3] = [None, None, None];
            for (r, slot) in row.iter_mut().enumerate() {
                if let Some(pv) = roles[r] {
                    let col = (0..words.len() as u32)
                        .into_par_iter()
                        .with_min_len(256)
                        .map(|w| component_sim(Some(pv), Some(words.view(w))))
                        .collect::<Result<Vec<f64>>>()?;
                    *slot = Some(col);
                }
            }
            tables.push(row);
        }
        Ok(Self { prompt: view, tables })
    }

    fn entry<'q>(&'q self, index: &'q CorpusIndex, pos: usize) -> TableSims<'q> {
        let rec = &index.entries[pos];
        TableSims {
            tables: &self.tables,
            units: &rec.units,
            core: rec.core.map(|c| c as usize),
        }
    }
}

struct TableSims<'q> {
    tables: &'q [[Option<Vec<f64>>; 3]],
    units: &'q [crate::index::StoredUnit],
    core: Option<usize>,
}

impl RoleSims for TableSims<'_> {
    fn entry_units(&self) -> usize {
        self.units.len()
    }
    fn entry_core(&self) -> Option<usize> {
        self.core
    }
    #[inline]
    fn role(&self, p: usize, role: usize, e: usize) -> Result<f64> {
        Ok(match (&self.tables[p][role], self.units[e].roles[role]) {
            (Some(col), Some(w)) => col[w as usize],
            (None, None) => 1.0,
            _ => 0.0,
        })
    }
}

fn check_prompt(prompt: &PromptSemantics, dim: usize) -> Result<()> {
    prompt.validate()?;
    if prompt.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: prompt.dim(),
        });
    }
    Ok(())
}

/// Sim' from prompt units into entry units: the mean over prompt units of
/// the best unit-pair similarity. 0 when either side has no units.
pub fn unit_set_sim(entry_units: &[SemanticUnit], prompt_units: &[SemanticUnit]) -> Result<f64> {
    let prompt: Vec<Roles<'_>> = prompt_units.iter().map(SemanticUnit::roles).collect();
    let s = DirectSims {
        prompt: &prompt,
        entry: entry_units.iter().map(SemanticUnit::roles).collect(),
        core: None,
    };
    unit_set(&s, prompt.len())
}

/// Scores one entry's semantics against the prompt. `survived_rounds` counts
/// the thresholds the pair clears; `via_failsafe` is always false here.
pub fn match_score(entry_id: &str, entry: &PromptSemantics, prompt: &PromptSemantics, cfg: &MatchConfig) -> Result<RankedMatch> {
    check_prompt(prompt, entry.dim())?;
    entry.validate()?;
    let view = PromptView::new(prompt);
    let s = DirectSims {
        prompt: &view.units,
        entry: entry.units.iter().map(SemanticUnit::roles).collect(),
        core: entry.core_index,
    };
    let total = cosine_or_zero(entry.total.view(), view.total)?;
    let parts = parts_with(&s, total, &view)?;
    Ok(make_match(entry_id, parts, cfg, !prompt.units.is_empty(), false))
}

fn make_match(id: &str, parts: ScoreParts, cfg: &MatchConfig, prompt_has_units: bool, filtered: bool) -> RankedMatch {
    let survived_rounds = cfg.thresholds_met(&parts, prompt_has_units);
    RankedMatch {
        entry_id: id.to_string(),
        score: cfg.score(&parts),
        parts,
        survived_rounds,
        via_failsafe: filtered && survived_rounds < 3,
    }
}

// ---------------------------------------------------------------------------
// Filtering.

/// Descending by value, then ascending by position.
fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Applies one threshold round to `(criterion, position, total_sim)` items
/// given in ascending position order. Survivors keep that order.
fn round(input: Vec<(f64, usize, f64)>, threshold: f64, k: usize) -> (Vec<(f64, usize, f64)>, RoundReport) {
    let n = input.len();
    let passed_n = input.iter().filter(|x| x.0 >= threshold).count();
    let failsafe_used = passed_n < k.min(n);
    let survivors = if failsafe_used {
        let mut pool = input;
        if pool.len() > k {
            pool.select_nth_unstable_by(k - 1, |a, b| rank_order(&(a.0, a.1), &(b.0, b.1)));
            pool.truncate(k);
        }
        pool.sort_unstable_by_key(|x| x.1);
        pool
    } else {
        input.into_iter().filter(|x| x.0 >= threshold).collect()
    };
    let report = RoundReport {
        input: n,
        passed: passed_n,
        survivors: survivors.len(),
        failsafe_used,
        skipped: false,
    };
    (survivors, report)
}

fn skipped(n: usize) -> RoundReport {
    RoundReport {
        input: n,
        passed: n,
        survivors: n,
        failsafe_used: false,
        skipped: true,
    }
}

struct Filtered {
    survivors: Vec<usize>,
    /// Round-one sentence similarity of each survivor, aligned.
    totals: Vec<f64>,
    rounds: [RoundReport; 3],
}

fn filter_with_plan(plan: &QueryPlan<'_>, index: &CorpusIndex, scope: &[usize], cfg: &MatchConfig) -> Result<Filtered> {
    let k = cfg.failsafe_k;
    let ptotal = plan.prompt.total;
    let r1_input: Vec<(f64, usize, f64)> = scope
        .par_iter()
        .with_min_len(2048)
        .map(|&pos| {
            let t = cosine_or_zero(index.total(pos), ptotal)?;
            Ok((t, pos, t))
        })
        .collect::<Result<_>>()?;
    let (s1, rep1) = round(r1_input, cfg.t_total, k);

    let Some(pc) = plan.prompt.core else {
        let n = s1.len();
        return Ok(Filtered {
            totals: s1.iter().map(|x| x.2).collect(),
            survivors: s1.into_iter().map(|x| x.1).collect(),
            rounds: [rep1, skipped(n), skipped(n)],
        });
    };

    let core_role = |pos: usize, role: usize| -> f64 {
        let s = plan.entry(index, pos);
        match s.core {
            Some(ec) => s.role(pc, role, ec).expect("table lookups cannot fail"),
            None => 0.0,
        }
    };
    let r2_input = s1.into_iter().map(|(_, p, t)| (core_role(p, MOTION), p, t)).collect();
    let (s2, rep2) = round(r2_input, cfg.t_mot, k);
    let r3_input = s2.into_iter().map(|(_, p, t)| (core_role(p, ACTOR), p, t)).collect();
    let (s3, rep3) = round(r3_input, cfg.t_atr, k);

    Ok(Filtered {
        totals: s3.iter().map(|x| x.2).collect(),
        survivors: s3.into_iter().map(|x| x.1).collect(),
        rounds: [rep1, rep2, rep3],
    })
}

/// Positions of every entry, or of a sorted subset.
fn resolve_scope(index: &CorpusIndex, scope: Option<&[usize]>) -> Result<Vec<usize>> {
    let positions = match scope {
        None => (0..index.len()).collect::<Vec<_>>(),
        Some(s) => {
            if s.windows(2).any(|w| w[0] >= w[1]) || s.last().is_some_and(|&p| p >= index.len()) {
                return Err(Error::InvalidInput("scope must be strictly ascending positions within the index".into()));
            }
            s.to_vec()
        }
    };
    if positions.is_empty() {
        return Err(Error::EmptyIndex);
    }
    Ok(positions)
}

pub fn coarse_filter(prompt: &PromptSemantics, index: &CorpusIndex, cfg: &MatchConfig) -> Result<FilterOutcome> {
    coarse_filter_scoped(prompt, index, None, cfg)
}

pub fn coarse_filter_scoped(
    prompt: &PromptSemantics,
    index: &CorpusIndex,
    scope: Option<&[usize]>,
    cfg: &MatchConfig,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    let scope = resolve_scope(index, scope)?;
    check_prompt(prompt, index.dim())?;
    let plan = QueryPlan::new(prompt, index)?;
    let f = filter_with_plan(&plan, index, &scope, cfg)?;
    Ok(FilterOutcome {
        survivors: f.survivors,
        rounds: f.rounds,
    })
}

// ---------------------------------------------------------------------------
// Ranking.

fn top_k(mut scored: Vec<(f64, usize, ScoreParts)>, k: usize) -> Vec<(f64, usize, ScoreParts)> {
    let order = |a: &(f64, usize, ScoreParts), b: &(f64, usize, ScoreParts)| rank_order(&(a.0, a.1), &(b.0, b.1));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored
}

/// Filtered retrieval over the whole index.
pub fn retrieve(prompt: &PromptSemantics, index: &CorpusIndex, cfg: &MatchConfig) -> Result<Vec<RankedMatch>> {
    retrieve_scoped(prompt, index, None, cfg)
}

/// Filtered retrieval restricted to `scope`, a strictly ascending list of
/// entry positions (ingestion order is preserved for tie-breaking).
pub fn retrieve_scoped(
    prompt: &PromptSemantics,
    index: &CorpusIndex,
    scope: Option<&[usize]>,
    cfg: &MatchConfig,
) -> Result<Vec<RankedMatch>> {
    cfg.validate()?;
    let scope = resolve_scope(index, scope)?;
    check_prompt(prompt, index.dim())?;
    let plan = QueryPlan::new(prompt, index)?;
    let f = filter_with_plan(&plan, index, &scope, cfg)?;
    let scored: Vec<(f64, usize, ScoreParts)> = f
        .survivors
        .par_iter()
        .zip(f.totals.par_iter())
        .with_min_len(1024)
        .map(|(&pos, &total)| {
            let parts = parts_with(&plan.entry(index, pos), total, &plan.prompt)?;
            Ok((cfg.score(&parts), pos, parts))
        })
        .collect::<Result<_>>()?;
    let has_units = !prompt.units.is_empty();
    Ok(top_k(scored, cfg.top_k)
        .into_iter()
        .map(|(_, pos, parts)| make_match(index.entry_id(pos), parts, cfg, has_units, true))
        .collect())
}

/// Scores every entry directly from its vectors, without filtering.
pub fn brute_force_retrieve(prompt: &PromptSemantics, index: &CorpusIndex, cfg: &MatchConfig) -> Result<Vec<RankedMatch>> {
    cfg.validate()?;
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    check_prompt(prompt, index.dim())?;
    let view = PromptView::new(prompt);
    let mut scored = Vec::with_capacity(index.len());
    for pos in 0..index.len() {
        let s = DirectSims {
            prompt: &view.units,
            entry: index.unit_roles(pos),
            core: index.entries[pos].core.map(|c| c as usize),
        };
        let total = cosine_or_zero(index.total(pos), view.total)?;
        let parts = parts_with(&s, total, &view)?;
        scored.push((cfg.score(&parts), pos, parts));
    }
    let has_units = !prompt.units.is_empty();
    Ok(top_k(scored, cfg.top_k)
        .into_iter()
        .map(|(_, pos, parts)| make_match(index.entry_id(pos), parts, cfg, has_units, false))
        .collect())
}
