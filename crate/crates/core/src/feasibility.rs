//! Index sets and feasibility constraints for feeds and sidedraws.
//!
//! Interval and root indices in this module are one-based: interval `i` is
//! `(alpha_{i-1}, alpha_i)`, `gamma_i` is the `i`-th smallest section root and
//! `rho_j` the stream root in `(alpha_j, alpha_{j+1})`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{SectionState, Stream, StreamKind};
use crate::roots::{Indicators, StreamRoots};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("pinch order violated: top section pinch interval {top}, bottom section pinch interval {bottom}")]
    PinchOrderViolation { top: usize, bottom: usize },
    #[error("stream {stream} has no root rho_{index}")]
    MissingRho { stream: String, index: usize },
}

/// Which halves of a feed or sidedraw constraint pair are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    /// A half is enforced when the section it refers to pinches in the
    /// interval holding `rho_{i-1}`; both halves when neither section does.
    #[default]
    PinchAdjacent,
    /// Both halves are always enforced.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOptions {
    /// Binding band; `None` means `1e-7 (alpha_c - alpha_1)`.
    pub bind_tol: Option<f64>,
    /// Evaluate the sidedraw-on-profile constraints.
    pub profile_constraints: bool,
    pub pair_policy: PairPolicy,
    /// Report a missing stream root as an error instead of skipping the term.
    pub strict_rho: bool,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            bind_tol: None,
            profile_constraints: true,
            pair_policy: PairPolicy::PinchAdjacent,
            strict_rho: false,
        }
    }
}

impl FeasibilityOptions {
    pub fn tolerance(&self, alphas: &[f64]) -> f64 {
        self.bind_tol.unwrap_or(1e-7 * (alphas[alphas.len() - 1] - alphas[0]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Binding,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Feed: `gamma_i(top) >= rho_{i-1}`.
    FeedTop,
    /// Feed: `rho_{i-1} >= gamma_{i-1}(bottom)`.
    FeedBottom,
    /// Sidedraw: `gamma_{i-1}(top) <= rho_{i-1}`.
    SidedrawTop,
    /// Sidedraw: `rho_{i-1} <= gamma_i(bottom)`.
    SidedrawBottom,
    /// `K_i(top) (gamma_i(top) - rho_{i-1}) >= 0`.
    ProfileTopLower,
    /// `K_i(bottom) (gamma_i(bottom) - rho_{i-1}) >= 0`.
    ProfileBottomLower,
    /// `(1 - K_i(top)) (gamma_i(top) - rho_i) <= 0`.
    ProfileTopUpper,
    /// `(1 - K_i(bottom)) (gamma_i(bottom) - rho_i) <= 0`.
    ProfileBottomUpper,
    /// Pinch interval ordering across the stream.
    PinchOrder,
    /// A component absent from a sidedraw has no net flow across it.
    SidedrawSupport,
}

/// One evaluated inequality `lhs >= rhs`, with `slack = lhs - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub id: String,
    pub family: Family,
    /// One-based index `i` of the constraint.
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub status: Status,
    pub enforced: bool,
}

impl ConstraintRecord {
    fn new(id: String, family: Family, index: usize, lhs: f64, rhs: f64, tol: f64, enforced: bool) -> Self {
        let slack = lhs - rhs;
        let status = if slack.abs() <= tol {
            Status::Binding
        } else if slack < 0.0 {
            Status::Violated
        } else {
            Status::Satisfied
        };
        Self {
            id,
            family,
            index,
            lhs,
            rhs,
            slack,
            status,
            enforced,
        }
    }

    pub fn violated(&self) -> bool {
        self.enforced && self.status == Status::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    /// Zero-based stream position, top first.
    pub stream: usize,
    pub name: String,
    pub kind: StreamKind,
    pub index_set: Vec<usize>,
    pub records: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub streams: Vec<StreamReport>,
    pub feasible: bool,
    /// Topmost stream with an enforced binding constraint.
    pub binding_stream: Option<usize>,
}

impl FeasibilityReport {
    pub fn records(&self) -> impl Iterator<Item = &ConstraintRecord> {
        self.streams.iter().flat_map(|s| s.records.iter())
    }

    /// Smallest slack among enforced records.
    pub fn min_slack(&self) -> f64 {
        self.records()
            .filter(|r| r.enforced)
            .map(|r| r.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `I = { i in 2..=c : K_i(top) - K_{i-1}(bottom) = 1 }` after checking that
/// the top pinch interval does not exceed the bottom one.
pub fn feed_index_set(top: &Indicators, bottom: &Indicators) -> Result<Vec<usize>, FeasibilityError> {
    let (pt, pb) = (top.pinch_interval(), bottom.pinch_interval());
    if pt > pb {
        return Err(FeasibilityError::PinchOrderViolation { top: pt, bottom: pb });
    }
    let c = top.mu.len() - 1;
    Ok((2..=c)
        .filter(|&i| top.k_at(i) as i8 - bottom.k_at(i - 1) as i8 == 1)
        .collect())
}

/// `I = { i in 2..=c : K_i(bottom) - K_{i-1}(top) = 1 }` after checking that
/// the top pinch interval is not below the bottom one.
pub fn sidedraw_index_set(top: &Indicators, bottom: &Indicators) -> Result<Vec<usize>, FeasibilityError> {
    let (pt, pb) = (top.pinch_interval(), bottom.pinch_interval());
    if pt < pb {
        return Err(FeasibilityError::PinchOrderViolation { top: pt, bottom: pb });
    }
    let c = top.mu.len() - 1;
    Ok((2..=c)
        .filter(|&i| bottom.k_at(i) as i8 - top.k_at(i - 1) as i8 == 1)
        .collect())
}

/// Range form of the index sets: `max(2, p_lo) ..= min(c, p_hi)`, where the
/// feed uses `(p_top, p_bottom)` and the sidedraw `(p_bottom, p_top)`.
pub fn index_set_by_range(kind: StreamKind, p_top: usize, p_bottom: usize, c: usize) -> Vec<usize> {
    let (lo, hi) = match kind {
        StreamKind::Feed => (p_top, p_bottom),
        StreamKind::Sidedraw => (p_bottom, p_top),
    };
    (lo.max(2)..=hi.min(c)).collect()
}

fn halves(policy: PairPolicy, top: &SectionState, bottom: &SectionState, i: usize) -> (bool, bool) {
    match policy {
        PairPolicy::Literal => (true, true),
        PairPolicy::PinchAdjacent => {
            let t = top.pinch_interval() == i;
            let b = bottom.pinch_interval() == i;
            if t || b {
                (t, b)
            } else {
                (true, true)
            }
        }
    }
}

fn missing(stream: &Stream, strict: bool, index: usize) -> Result<(), FeasibilityError> {
    if strict {
        Err(FeasibilityError::MissingRho {
            stream: stream.name.clone(),
            index,
        })
    } else {
        Ok(())
    }
}

/// Feed constraints `gamma_i(top) >= rho_{i-1} >= gamma_{i-1}(bottom)`.
pub fn check_feed(
    stream: &Stream,
    top: &SectionState,
    bottom: &SectionState,
    rho: &StreamRoots,
    index_set: &[usize],
    opts: &FeasibilityOptions,
    tol: f64,
) -> Result<Vec<ConstraintRecord>, FeasibilityError> {
    let mut out = Vec::new();
    for &i in index_set {
        let Some(r) = rho.get(i - 1) else {
            missing(stream, opts.strict_rho, i - 1)?;
            continue;
        };
        let (et, eb) = halves(opts.pair_policy, top, bottom, i);
        out.push(ConstraintRecord::new(
            format!("{}:feed_top:{i}", stream.name),
            Family::FeedTop,
            i,
            top.gamma(i),
            r,
            tol,
            et,
        ));
        out.push(ConstraintRecord::new(
            format!("{}:feed_bottom:{i}", stream.name),
            Family::FeedBottom,
            i,
            r,
            bottom.gamma(i - 1),
            tol,
            eb,
        ));
    }
    Ok(out)
}

/// Sidedraw constraints `gamma_{i-1}(top) <= rho_{i-1} <= gamma_i(bottom)`.
pub fn check_sidedraw(
    stream: &Stream,
    top: &SectionState,
    bottom: &SectionState,
    rho: &StreamRoots,
    index_set: &[usize],
    opts: &FeasibilityOptions,
    tol: f64,
) -> Result<Vec<ConstraintRecord>, FeasibilityError> {
    let mut out = Vec::new();
    for &i in index_set {
        let Some(r) = rho.get(i - 1) else {
            missing(stream, opts.strict_rho, i - 1)?;
            continue;
        };
        let (et, eb) = halves(opts.pair_policy, top, bottom, i);
        out.push(ConstraintRecord::new(
            format!("{}:sidedraw_top:{i}", stream.name),
            Family::SidedrawTop,
            i,
            r,
            top.gamma(i - 1),
            tol,
            et,
        ));
        out.push(ConstraintRecord::new(
            format!("{}:sidedraw_bottom:{i}", stream.name),
            Family::SidedrawBottom,
            i,
            bottom.gamma(i),
            r,
            tol,
            eb,
        ));
    }
    Ok(out)
}

/// The four families tying the sidedraw composition to the composition
/// profiles of its adjacent sections. Terms whose stream root does not exist
/// are skipped, as are terms whose indicator factor is zero.
pub fn check_sidedraw_on_profile(
    stream: &Stream,
    top: &SectionState,
    bottom: &SectionState,
    rho: &StreamRoots,
    tol: f64,
) -> Vec<ConstraintRecord> {
    let c = top.net_flows.len();
    let mut out = Vec::new();
    for (sec, lower, upper, tag) in [
        (top, Family::ProfileTopLower, Family::ProfileTopUpper, "top"),
        (bottom, Family::ProfileBottomLower, Family::ProfileBottomUpper, "bottom"),
    ] {
        for i in 1..=c {
            let k = sec.indicators.k_at(i);
            if k == 1 {
                if let Some(r) = (i >= 2).then(|| rho.get(i - 1)).flatten() {
                    out.push(ConstraintRecord::new(
                        format!("{}:profile_{tag}_lower:{i}", stream.name),
                        lower,
                        i,
                        sec.gamma(i),
                        r,
                        tol,
                        true,
                    ));
                }
            } else if let Some(r) = rho.get(i) {
                out.push(ConstraintRecord::new(
                    format!("{}:profile_{tag}_upper:{i}", stream.name),
                    upper,
                    i,
                    r,
                    sec.gamma(i),
                    tol,
                    true,
                ));
            }
        }
    }
    out
}

/// A component missing from a sidedraw is missing from the liquid and the
/// vapor of the draw stage, so its net flow through the adjacent sections must
/// vanish. Records `-|d_i| >= 0` for every absent component.
pub fn check_sidedraw_support(s: &Stream, top: &SectionState) -> Vec<ConstraintRecord> {
    let scale: f64 = s.flows.iter().map(|f| f.abs()).sum();
    s.flows
        .iter()
        .enumerate()
        .filter(|(_, f)| f.abs() <= 1e-10 * scale)
        .map(|(m, _)| {
            let lhs = -top.net_flows[m].abs();
            ConstraintRecord {
                id: format!("{}:support[{}]", s.name, m + 1),
                family: Family::SidedrawSupport,
                index: m + 1,
                lhs,
                rhs: 0.0,
                slack: lhs,
                status: if lhs < 0.0 { Status::Violated } else { Status::Satisfied },
                enforced: true,
            }
        })
        .collect()
}

/// Evaluates every stream's constraints for the given section states.
pub fn evaluate(
    streams: &[Stream],
    stream_roots: &[StreamRoots],
    sections: &[SectionState],
    alphas: &[f64],
    opts: &FeasibilityOptions,
) -> Result<FeasibilityReport, FeasibilityError> {
    let tol = opts.tolerance(alphas);
    let mut reports = Vec::with_capacity(streams.len());
    for (j, s) in streams.iter().enumerate() {
        let (top, bottom) = (&sections[j], &sections[j + 1]);
        let set = match s.kind {
            StreamKind::Feed => feed_index_set(&top.indicators, &bottom.indicators),
            StreamKind::Sidedraw => sidedraw_index_set(&top.indicators, &bottom.indicators),
        };
        let mut records = Vec::new();
        let index_set = match set {
            Ok(set) => set,
            Err(FeasibilityError::PinchOrderViolation { top: pt, bottom: pb }) => {
                let (lhs, rhs) = match s.kind {
                    StreamKind::Feed => (pb as f64, pt as f64),
                    StreamKind::Sidedraw => (pt as f64, pb as f64),
                };
                records.push(ConstraintRecord::new(
                    format!("{}:pinch_order", s.name),
                    Family::PinchOrder,
                    0,
                    lhs,
                    rhs,
                    0.0,
                    true,
                ));
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        let rho = &stream_roots[j];
        match s.kind {
            StreamKind::Feed => records.extend(check_feed(s, top, bottom, rho, &index_set, opts, tol)?),
            StreamKind::Sidedraw => {
                records.extend(check_sidedraw_support(s, top));
                records.extend(check_sidedraw(s, top, bottom, rho, &index_set, opts, tol)?);
                if opts.profile_constraints {
                    records.extend(check_sidedraw_on_profile(s, top, bottom, rho, tol));
                }
            }
        }
        reports.push(StreamReport {
            stream: j,
            name: s.name.clone(),
            kind: s.kind,
            index_set,
            records,
        });
    }
    let feasible = !reports.iter().flat_map(|r| &r.records).any(|r| r.violated());
    let binding_stream = reports
        .iter()
        .find(|r| r.records.iter().any(|x| x.enforced && x.status == Status::Binding))
        .map(|r| r.stream);
    Ok(FeasibilityReport {
        streams: reports,
        feasible,
        binding_stream,
    })
}
