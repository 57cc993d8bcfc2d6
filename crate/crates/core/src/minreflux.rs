//! Minimum reboiler vapor duty by candidate enumeration.
//!
//! Every candidate pins one stream root `rho` as a root of the section above
//! the stream. Because `F_top(rho) - F_bottom(rho)` equals the stream's vapor
//! flow, the same `rho` is then also a root of the section below, so each
//! candidate fixes the vapor of both adjacent sections. The column-wide vapor
//! profile follows from the vapor balances and the candidate is accepted only
//! if every feasibility constraint holds there.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{Column, ColumnError, SectionState, StreamKind};
use crate::feasibility::{self, FeasibilityError, FeasibilityOptions, FeasibilityReport};
use crate::roots::{self, Indicators, RootError, StreamRoots};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinRefluxError {
    #[error(transparent)]
    Column(#[from] ColumnError),
    #[error("stream {stream}: {source}")]
    StreamRoots { stream: String, source: RootError },
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error("no candidate yields a feasible column ({count} candidates evaluated)")]
    NoFeasibleCandidate { count: usize, candidates: Vec<Candidate> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MinRefluxOptions {
    pub feasibility: FeasibilityOptions,
    /// Also try stream roots that the enumeration rules do not name. Every
    /// candidate is fully checked, so extra candidates can only lower the
    /// result to another feasible duty.
    pub supplementary: bool,
}

impl MinRefluxOptions {
    pub fn with_supplementary() -> Self {
        Self {
            supplementary: true,
            ..Self::default()
        }
    }
}

/// Why a candidate was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Origin {
    /// Feed with `i` in its index set: `gamma_i(top) <- rho_{i-1}`.
    FeedPair { i: usize },
    /// Sidedraw with `i` in its index set: `gamma_{i-1}(top) <- rho_{i-1}`.
    SidedrawPair { i: usize },
    /// Sidedraw pin for component `m` from the top section's `K` vector.
    SidedrawPin { m: usize },
    /// A stream root not named by the rules above.
    Supplementary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub stream: usize,
    pub stream_name: String,
    /// `j` of the pinned root `rho_j`.
    pub rho_index: usize,
    pub rho: f64,
    pub origins: Vec<Origin>,
    /// Vapor of the section above the stream.
    pub v_top: f64,
    pub v_reb: Option<f64>,
    pub reflux: Option<f64>,
    pub feasible: bool,
    /// One-based root positions equal to `rho` in the sections above and below.
    pub top_root: Option<usize>,
    pub bottom_root: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingEquality {
    pub stream: usize,
    pub stream_name: String,
    pub rho_index: usize,
    pub rho: f64,
    pub top_root: Option<usize>,
    pub bottom_root: Option<usize>,
}

/// Section states and constraint report at one vapor profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub vapor: Vec<f64>,
    pub sections: Vec<SectionState>,
    pub report: FeasibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinRefluxResult {
    pub v_reb_min: f64,
    pub r_min: f64,
    pub controlling_stream: usize,
    pub controlling_name: String,
    pub binding: BindingEquality,
    pub evaluation: Evaluation,
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates` of feasible candidates tied with the minimum.
    pub ties: Vec<usize>,
}

/// A validated column with its stream roots cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    column: Column,
    stream_roots: Vec<StreamRoots>,
}

/// Result of checking one vapor profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Feasible(Evaluation),
    Infeasible {
        reason: String,
        evaluation: Option<Evaluation>,
    },
}

impl Outcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Outcome::Feasible(_))
    }

    pub fn evaluation(&self) -> Option<&Evaluation> {
        match self {
            Outcome::Feasible(e) => Some(e),
            Outcome::Infeasible { evaluation, .. } => evaluation.as_ref(),
        }
    }
}

impl Prepared {
    pub fn new(column: Column) -> Result<Self, MinRefluxError> {
        let stream_roots = column
            .streams()
            .iter()
            .map(|s| {
                roots::solve_stream_roots(s, column.alphas()).map_err(|source| MinRefluxError::StreamRoots {
                    stream: s.name.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { column, stream_roots })
    }

    pub fn column(&self) -> &Column {
        &self.column
    }

    pub fn stream_roots(&self) -> &[StreamRoots] {
        &self.stream_roots
    }

    /// Checks the column with the vapor profile anchored at section `anchor`.
    pub fn check(&self, anchor: usize, v_anchor: f64, opts: &FeasibilityOptions) -> Result<Outcome, FeasibilityError> {
        let vapor = match self.column.vapor_profile(anchor, v_anchor) {
            Ok(v) => v,
            Err(e) => {
                return Ok(Outcome::Infeasible {
                    reason: e.to_string(),
                    evaluation: None,
                })
            }
        };
        let sections = match self.column.section_states(&vapor) {
            Ok(s) => s,
            Err(e) => {
                return Ok(Outcome::Infeasible {
                    reason: e.to_string(),
                    evaluation: None,
                })
            }
        };
        let report = feasibility::evaluate(
            self.column.streams(),
            &self.stream_roots,
            &sections,
            self.column.alphas(),
            opts,
        )?;
        let feasible = report.feasible;
        let evaluation = Evaluation {
            vapor,
            sections,
            report,
        };
        Ok(if feasible {
            Outcome::Feasible(evaluation)
        } else {
            let worst = evaluation
                .report
                .records()
                .filter(|r| r.violated())
                .min_by(|a, b| a.slack.total_cmp(&b.slack))
                .map(|r| format!("{} violated by {:.3e}", r.id, -r.slack))
                .unwrap_or_default();
            Outcome::Infeasible {
                reason: worst,
                evaluation: Some(evaluation),
            }
        })
    }

    /// Checks the column at a given reboiler vapor flow.
    pub fn check_at_reboiler(&self, v_reb: f64, opts: &FeasibilityOptions) -> Result<Outcome, FeasibilityError> {
        self.check(self.column.section_count() - 1, v_reb, opts)
    }

    /// Reboiler vapor of a feasible column anchored at section `s`, or `None`.
    pub fn get_vreb(&self, s: usize, v_s: f64, opts: &FeasibilityOptions) -> Result<Option<f64>, FeasibilityError> {
        Ok(match self.check(s, v_s, opts)? {
            Outcome::Feasible(e) => Some(e.vapor[e.vapor.len() - 1]),
            Outcome::Infeasible { .. } => None,
        })
    }

    /// Indicators implied by each section's sign pattern.
    pub fn reference_indicators(&self) -> Vec<Indicators> {
        let c = self.column.count();
        self.column
            .net_flows()
            .iter()
            .map(|d| Indicators::from_interval(roots::pinch_interval_from_signs(d).expect("nonzero section"), c))
            .collect()
    }

    /// Top-section vapor that makes `rho_j` of stream `stream` a root.
    pub fn pinned_vapor(&self, stream: usize, rho: f64) -> f64 {
        roots::characteristic(&self.column.net_flows()[stream], self.column.alphas(), rho)
    }

    fn evaluate_candidate(
        &self,
        stream: usize,
        j: usize,
        origins: Vec<Origin>,
        opts: &FeasibilityOptions,
    ) -> Result<Candidate, FeasibilityError> {
        let s = &self.column.streams()[stream];
        let rho = self.stream_roots[stream].get(j).expect("candidate root exists");
        let v_top = self.pinned_vapor(stream, rho);
        let mut cand = Candidate {
            stream,
            stream_name: s.name.clone(),
            rho_index: j,
            rho,
            origins,
            v_top,
            v_reb: None,
            reflux: None,
            feasible: false,
            top_root: None,
            bottom_root: None,
            note: None,
        };
        if !(v_top > 0.0) {
            cand.note = Some("pinned root needs nonpositive section vapor".into());
            return Ok(cand);
        }
        match self.check(stream, v_top, opts)? {
            Outcome::Feasible(e) => {
                cand.feasible = true;
                let v_reb = e.vapor[e.vapor.len() - 1];
                cand.v_reb = Some(v_reb);
                cand.reflux = self.column.reflux_from_reboiler(v_reb).ok();
                cand.top_root = root_position(&e.sections[stream], rho);
                cand.bottom_root = root_position(&e.sections[stream + 1], rho);
                if cand.reflux.is_none() {
                    cand.feasible = false;
                    cand.note = Some("top vapor does not exceed the distillate".into());
                }
            }
            Outcome::Infeasible { reason, evaluation } => {
                cand.note = Some(reason);
                if let Some(e) = evaluation {
                    cand.v_reb = Some(e.vapor[e.vapor.len() - 1]);
                    cand.top_root = root_position(&e.sections[stream], rho);
                    cand.bottom_root = root_position(&e.sections[stream + 1], rho);
                }
            }
        }
        Ok(cand)
    }

    /// Minimum-duty feasible pin among the sidedraw's component pins, using
    /// the given `K` vector of the section above it.
    pub fn sidedraw_feasible(
        &self,
        stream: usize,
        k_top: &Indicators,
        opts: &FeasibilityOptions,
    ) -> Result<Option<Candidate>, FeasibilityError> {
        let c = self.column.count();
        let mut best: Option<Candidate> = None;
        for (m, j) in sidedraw_pins(k_top, c) {
            if self.stream_roots[stream].get(j).is_none() {
                continue;
            }
            let cand = self.evaluate_candidate(stream, j, vec![Origin::SidedrawPin { m }], opts)?;
            if cand.feasible && best.as_ref().is_none_or(|b| cand.v_reb < b.v_reb) {
                best = Some(cand);
            }
        }
        Ok(best)
    }
}

/// `(m, j)` pairs: `gamma_m(top) <- rho_m` when `K_m = 0`, else `rho_{m-1}`.
fn sidedraw_pins(k_top: &Indicators, c: usize) -> Vec<(usize, usize)> {
    (1..=c)
        .filter_map(|m| {
            let j = if k_top.k_at(m) == 0 { m } else { m.checked_sub(1)? };
            (j >= 1 && j < c).then_some((m, j))
        })
        .collect()
}

fn root_position(section: &SectionState, rho: f64) -> Option<usize> {
    let scale = rho.abs().max(1.0);
    section
        .roots
        .values()
        .iter()
        .enumerate()
        .filter(|(k, g)| !section.roots.pinned()[*k] && (**g - rho).abs() <= 1e-9 * scale)
        .min_by(|a, b| (a.1 - rho).abs().total_cmp(&(b.1 - rho).abs()))
        .map(|(k, _)| k + 1)
}

/// Minimum reboiler vapor duty of a prepared column.
pub fn vreb_min(prep: &Prepared, opts: &MinRefluxOptions) -> Result<MinRefluxResult, MinRefluxError> {
    let col = prep.column();
    let c = col.count();
    let refs = prep.reference_indicators();

    // (stream, rho index) -> origins, in generation order
    let mut keys: Keyed = Vec::new();
    for (j, s) in col.streams().iter().enumerate() {
        let rho = &prep.stream_roots()[j];
        let (top, bottom) = (&refs[j], &refs[j + 1]);
        match s.kind {
            StreamKind::Feed => {
                if let Ok(set) = feasibility::feed_index_set(top, bottom) {
                    for i in set {
                        if rho.get(i - 1).is_some() {
                            add(&mut keys, (j, i - 1), Origin::FeedPair { i });
                        }
                    }
                }
            }
            StreamKind::Sidedraw => {
                for (m, r) in sidedraw_pins(top, c) {
                    if rho.get(r).is_some() {
                        add(&mut keys, (j, r), Origin::SidedrawPin { m });
                    }
                }
                if let Ok(set) = feasibility::sidedraw_index_set(top, bottom) {
                    for i in set {
                        if rho.get(i - 1).is_some() {
                            add(&mut keys, (j, i - 1), Origin::SidedrawPair { i });
                        }
                    }
                }
            }
        }
        if opts.supplementary {
            for &r in rho.rho.keys() {
                if !keys.iter().any(|(k, _)| *k == (j, r)) {
                    keys.push(((j, r), vec![Origin::Supplementary]));
                }
            }
        }
    }

    let candidates = keys
        .into_iter()
        .map(|((j, r), origins)| prep.evaluate_candidate(j, r, origins, &opts.feasibility))
        .collect::<Result<Vec<_>, _>>()?;

    let best = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.feasible)
        .min_by(|(_, a), (_, b)| {
            let (va, vb) = (a.v_reb.unwrap(), b.v_reb.unwrap());
            if (va - vb).abs() <= 1e-9 * va.abs().max(vb.abs()) {
                (a.stream, a.rho_index).cmp(&(b.stream, b.rho_index))
            } else {
                va.total_cmp(&vb)
            }
        })
        .map(|(k, _)| k);
    let Some(best) = best else {
        return Err(MinRefluxError::NoFeasibleCandidate {
            count: candidates.len(),
            candidates,
        });
    };
    let win = &candidates[best];
    let v_reb = win.v_reb.expect("feasible candidate has a duty");
    let ties = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.feasible && (c.v_reb.unwrap() - v_reb).abs() <= 1e-9 * v_reb)
        .map(|(k, _)| k)
        .collect();
    let evaluation = match prep.check(win.stream, win.v_top, &opts.feasibility)? {
        Outcome::Feasible(e) => e,
        Outcome::Infeasible { .. } => unreachable!("candidate was feasible"),
    };
    let r_min = col.reflux_from_reboiler(v_reb)?;
    Ok(MinRefluxResult {
        v_reb_min: v_reb,
        r_min,
        controlling_stream: win.stream,
        controlling_name: win.stream_name.clone(),
        binding: BindingEquality {
            stream: win.stream,
            stream_name: win.stream_name.clone(),
            rho_index: win.rho_index,
            rho: win.rho,
            top_root: win.top_root,
            bottom_root: win.bottom_root,
        },
        evaluation,
        candidates,
        ties,
    })
}

type Keyed = Vec<((usize, usize), Vec<Origin>)>;

/// Records a candidate key, merging origins of duplicates.
fn add(keys: &mut Keyed, key: (usize, usize), origin: Origin) {
    if let Some(entry) = keys.iter_mut().find(|(k, _)| *k == key) {
        if !entry.1.contains(&origin) {
            entry.1.push(origin);
        }
    } else {
        keys.push((key, vec![origin]));
    }
}

/// Validates, prepares and solves a column in one call.
pub fn vreb_min_column(column: Column, opts: &MinRefluxOptions) -> Result<MinRefluxResult, MinRefluxError> {
    vreb_min(&Prepared::new(column)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidedraw_pins_follow_k() {
        // K = (0,1,1,1,1) for c = 4: m = 1 pins rho_1, m >= 2 pins rho_{m-1}
        let k = Indicators::from_interval(2, 4);
        assert_eq!(sidedraw_pins(&k, 4), vec![(1, 1), (2, 1), (3, 2), (4, 3)]);
        let k = Indicators::from_interval(5, 4);
        assert_eq!(sidedraw_pins(&k, 4), vec![(1, 1), (2, 2), (3, 3)]);
    }
}
