//! Classic Underwood minimum vapor for simple columns and the column
//! decomposition baseline for multi-feed columns.
//!
//! Decomposition builds one simple column per feed whose top product is the
//! net upward flow of the section above that feed and whose bottom product is
//! the net downward flow of the section below it. These net flows may be
//! negative or exceed the feed; such products are reported as mismatches but
//! used unclipped. Each simple column's minimum vapor is converted to the
//! reflux ratio of the whole column through the vapor balances, and the
//! baseline is the largest of these.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{Column, ColumnError, Stream, StreamKind};
use crate::roots::{self, RootError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnderwoodError {
    #[error("no feed root gives a positive vapor flow")]
    NoActiveRoot,
    #[error("invalid simple column: {0}")]
    Invalid(String),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Column(#[from] ColumnError),
}

/// One feed and two products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleColumn {
    pub feed: Stream,
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl SimpleColumn {
    /// A simple column with nonnegative products that add up to the feed.
    pub fn new(feed: Stream, top: Vec<f64>, alphas: Vec<f64>) -> Result<Self, UnderwoodError> {
        if feed.kind != StreamKind::Feed {
            return Err(UnderwoodError::Invalid("the stream is not a feed".into()));
        }
        if top.len() != feed.flows.len() || alphas.len() != top.len() {
            return Err(UnderwoodError::Invalid("dimension mismatch".into()));
        }
        let scale = feed.total_flow();
        let bottom: Vec<f64> = feed.flows.iter().zip(&top).map(|(f, d)| f - d).collect();
        if top.iter().chain(&bottom).any(|x| *x < -1e-12 * scale) {
            return Err(UnderwoodError::Invalid("products must be nonnegative".into()));
        }
        Ok(Self {
            feed,
            top,
            bottom,
            alphas,
        })
    }

    pub fn distillate_total(&self) -> f64 {
        self.top.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderwoodResult {
    /// Vapor flow above the feed at minimum reflux.
    pub v_min: f64,
    /// `(v_min - D)/D` of the simple column, when `D > 0`.
    pub r_min: Option<f64>,
    pub feed_roots: Vec<f64>,
    /// Roots bracketed by the distributing components.
    pub active: Vec<bool>,
    pub controlling_root: f64,
}

/// Largest `sum alpha_i d_i/(alpha_i - theta)` over the feed roots.
pub fn underwood_min_vapor(col: &SimpleColumn) -> Result<UnderwoodResult, UnderwoodError> {
    let alphas = &col.alphas;
    let theta: Vec<f64> = roots::solve_stream_roots_full(&col.feed, alphas)?
        .rho
        .into_values()
        .collect();
    let scale = col.feed.total_flow().abs().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let heaviest_top = col.top.iter().position(|d| *d > tol);
    let lightest_bottom = col.bottom.iter().rposition(|b| *b > tol);
    let (lo, hi) = match (heaviest_top, lightest_bottom) {
        (Some(a), Some(z)) => (
            if a == 0 { 0.0 } else { alphas[a - 1] },
            alphas.get(z + 1).copied().unwrap_or(f64::INFINITY),
        ),
        _ => (f64::INFINITY, f64::NEG_INFINITY),
    };
    let active = theta.iter().map(|t| *t > lo && *t < hi).collect();
    let best = theta
        .iter()
        .map(|&t| (t, roots::characteristic(&col.top, alphas, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((controlling_root, v_min)) = best.filter(|(_, v)| *v > 0.0) else {
        return Err(UnderwoodError::NoActiveRoot);
    };
    let d = col.distillate_total();
    Ok(UnderwoodResult {
        v_min,
        r_min: (d > 0.0).then(|| (v_min - d) / d),
        feed_roots: theta,
        active,
        controlling_root,
    })
}

/// A simple column cut out of a multi-feed column around one feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedColumn {
    /// Zero-based stream index of the feed.
    pub feed_stream: usize,
    /// Zero-based index of the section above the feed.
    pub top_section: usize,
    pub column: SimpleColumn,
    pub warnings: Vec<String>,
}

/// One simple column per feed, products from the adjacent section net flows.
pub fn decompose(column: &Column) -> Vec<DecomposedColumn> {
    let names = column.components().names();
    let d = column.net_flows();
    let tol = column.zero_tol();
    column
        .streams()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == StreamKind::Feed)
        .map(|(j, s)| {
            let top = d[j].clone();
            let bottom: Vec<f64> = d[j + 1].iter().map(|x| -x).collect();
            let mut warnings = Vec::new();
            for i in 0..top.len() {
                if top[i] < -tol {
                    warnings.push(format!(
                        "{}: top product of {} is negative ({:.4} mol/s net downward flow)",
                        s.name, names[i], top[i]
                    ));
                } else if top[i] > s.flows[i] + tol {
                    warnings.push(format!(
                        "{}: top product of {} ({:.4}) exceeds the feed ({:.4})",
                        s.name, names[i], top[i], s.flows[i]
                    ));
                }
                if bottom[i] < -tol {
                    warnings.push(format!(
                        "{}: bottom product of {} is negative ({:.4} mol/s net upward flow)",
                        s.name, names[i], bottom[i]
                    ));
                } else if bottom[i] > s.flows[i] + tol {
                    warnings.push(format!(
                        "{}: bottom product of {} ({:.4}) exceeds the feed ({:.4})",
                        s.name, names[i], bottom[i], s.flows[i]
                    ));
                }
            }
            DecomposedColumn {
                feed_stream: j,
                top_section: j,
                column: SimpleColumn {
                    feed: s.clone(),
                    top,
                    bottom,
                    alphas: column.alphas().to_vec(),
                },
                warnings,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedReport {
    pub feed: String,
    pub underwood: UnderwoodResult,
    /// Reflux ratio of the whole column implied by this simple column's vapor.
    pub column_reflux: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub reflux: f64,
    pub controlling_feed: String,
    pub columns: Vec<DecomposedReport>,
}

/// The decomposition baseline: largest implied reflux over the simple columns.
pub fn decomposition_min_reflux(column: &Column) -> Result<DecompositionResult, UnderwoodError> {
    let mut columns = Vec::new();
    for dc in decompose(column) {
        let uw = underwood_min_vapor(&dc.column)?;
        let v = column.vapor_profile(dc.top_section, uw.v_min)?;
        let d = column.distillate_total();
        columns.push(DecomposedReport {
            feed: dc.column.feed.name.clone(),
            underwood: uw,
            column_reflux: (v[0] - d) / d,
            warnings: dc.warnings,
        });
    }
    let best = columns
        .iter()
        .max_by(|a, b| a.column_reflux.total_cmp(&b.column_reflux))
        .ok_or(UnderwoodError::Invalid("column has no feed".into()))?;
    Ok(DecompositionResult {
        reflux: best.column_reflux,
        controlling_feed: best.feed.clone(),
        columns: columns.clone(),
    })
}
