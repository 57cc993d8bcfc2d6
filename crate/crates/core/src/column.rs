//! Component systems, streams, validated column specifications and the
//! section material and vapor balances.
//!
//! Components are always stored in ascending volatility order, so index 0 is
//! the heaviest component with `alpha = 1`. Stream flows use the internal sign
//! convention: feeds are nonnegative, sidedraws nonpositive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots::{self, Indicators, RootSet};

/// Flows below this fraction of the total feed are treated as exactly zero.
pub const ZERO_FLOW_REL_TOL: f64 = 1e-10;

/// Relative tolerance for mass closure and equilibrium checks.
pub const CLOSURE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColumnError {
    #[error("bad relative volatilities: {0}")]
    BadAlphas(String),
    #[error("{what} has {got} entries, expected {expected}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("mass balance violation for component {component}: {detail}")]
    MassBalanceViolation { component: String, detail: String },
    #[error("section {section} net flows {flows:?} are not nonpositive, zero, nonnegative in ascending volatility")]
    SignPatternViolation { section: usize, flows: Vec<f64> },
    #[error("stream {stream}: {detail}")]
    BadStream { stream: String, detail: String },
    #[error("section {section} vapor flow {vapor} is not positive")]
    NonpositiveSectionVapor { section: usize, vapor: f64 },
    #[error("reflux is not positive: top vapor {v_top} <= distillate {distillate}")]
    NonpositiveReflux { v_top: f64, distillate: f64 },
    #[error("vapor flows are all zero")]
    ZeroVapor,
}

/// Named components with relative volatilities, ascending, heaviest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSystem {
    names: Vec<String>,
    alphas: Vec<f64>,
}

impl ComponentSystem {
    pub fn new(names: Vec<String>, alphas: Vec<f64>) -> Result<Self, ColumnError> {
        if names.len() != alphas.len() {
            return Err(ColumnError::Dimension {
                what: "component names".into(),
                expected: alphas.len(),
                got: names.len(),
            });
        }
        if alphas.len() < 2 {
            return Err(ColumnError::BadAlphas("at least two components are required".into()));
        }
        if alphas[0] != 1.0 {
            return Err(ColumnError::BadAlphas(format!(
                "heaviest component must have alpha = 1, got {}",
                alphas[0]
            )));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(ColumnError::BadAlphas("alphas must be finite".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ColumnError::BadAlphas(format!(
                "alphas must be strictly increasing, got {alphas:?}"
            )));
        }
        Ok(Self { names, alphas })
    }

    /// Builds a system with generated names `C1..Cc`.
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self, ColumnError> {
        let names = (1..=alphas.len()).map(|i| format!("C{i}")).collect();
        Self::new(names, alphas)
    }

    pub fn count(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Extended volatility `alpha_i` for `i` in `0..=c+1`, with `alpha_0 = 0`
    /// and `alpha_{c+1} = +inf`.
    pub fn alpha_ext(&self, i: usize) -> f64 {
        alpha_ext(&self.alphas, i)
    }

    /// `alpha_c - alpha_1`.
    pub fn span(&self) -> f64 {
        self.alphas[self.alphas.len() - 1] - self.alphas[0]
    }
}

pub(crate) fn alpha_ext(alphas: &[f64], i: usize) -> f64 {
    if i == 0 {
        0.0
    } else if i <= alphas.len() {
        alphas[i - 1]
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Feed,
    Sidedraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalState {
    SaturatedLiquid,
    SaturatedVapor,
    PartiallyVaporized,
}

/// A feed or sidedraw in internal sign convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub name: String,
    pub kind: StreamKind,
    pub thermal: ThermalState,
    /// Total component flows `f = l + v`.
    pub flows: Vec<f64>,
    pub liquid: Vec<f64>,
    pub vapor: Vec<f64>,
}

impl Stream {
    /// Builds a single-phase stream from positive user rates.
    pub fn single_phase(name: &str, kind: StreamKind, thermal: ThermalState, rates: &[f64]) -> Self {
        assert!(
            thermal != ThermalState::PartiallyVaporized,
            "use Stream::two_phase for partially vaporized streams"
        );
        let sign = kind.sign();
        let flows: Vec<f64> = rates.iter().map(|r| sign * r).collect();
        let zero = vec![0.0; rates.len()];
        let (liquid, vapor) = match thermal {
            ThermalState::SaturatedVapor => (zero, flows.clone()),
            _ => (flows.clone(), zero),
        };
        Self {
            name: name.to_string(),
            kind,
            thermal,
            flows,
            liquid,
            vapor,
        }
    }

    pub fn liquid_feed(name: &str, rates: &[f64]) -> Self {
        Self::single_phase(name, StreamKind::Feed, ThermalState::SaturatedLiquid, rates)
    }

    pub fn vapor_feed(name: &str, rates: &[f64]) -> Self {
        Self::single_phase(name, StreamKind::Feed, ThermalState::SaturatedVapor, rates)
    }

    pub fn liquid_sidedraw(name: &str, rates: &[f64]) -> Self {
        Self::single_phase(name, StreamKind::Sidedraw, ThermalState::SaturatedLiquid, rates)
    }

    /// Partially vaporized stream from positive liquid and vapor rates.
    /// Equilibrium between the phases is checked by [`Column::new`].
    pub fn two_phase(name: &str, kind: StreamKind, liquid_rates: &[f64], vapor_rates: &[f64]) -> Self {
        let sign = kind.sign();
        let liquid: Vec<f64> = liquid_rates.iter().map(|r| sign * r).collect();
        let vapor: Vec<f64> = vapor_rates.iter().map(|r| sign * r).collect();
        let flows = liquid.iter().zip(&vapor).map(|(l, v)| l + v).collect();
        Self {
            name: name.to_string(),
            kind,
            thermal: ThermalState::PartiallyVaporized,
            flows,
            liquid,
            vapor,
        }
    }

    /// Signed total vapor flow of the stream.
    pub fn total_vapor(&self) -> f64 {
        self.vapor.iter().sum()
    }

    /// Signed total flow of the stream.
    pub fn total_flow(&self) -> f64 {
        self.flows.iter().sum()
    }

    /// Positive user-facing component rates.
    pub fn rates(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.abs()).collect()
    }

    /// Nonnegative liquid-equivalent composition used by the stream root
    /// equation. Saturated vapor is replaced by the liquid in equilibrium with it.
    pub fn liquid_equivalent(&self, alphas: &[f64]) -> Result<Vec<f64>, ColumnError> {
        match self.thermal {
            ThermalState::SaturatedVapor => hypothetical_liquid(&self.vapor, alphas),
            _ => {
                let total: f64 = self.liquid.iter().map(|l| l.abs()).sum();
                if total <= 0.0 {
                    return Err(ColumnError::BadStream {
                        stream: self.name.clone(),
                        detail: "liquid portion is empty".into(),
                    });
                }
                Ok(self.liquid.iter().map(|l| l.abs() / total).collect())
            }
        }
    }
}

impl StreamKind {
    fn sign(self) -> f64 {
        match self {
            StreamKind::Feed => 1.0,
            StreamKind::Sidedraw => -1.0,
        }
    }
}

/// Liquid composition in equilibrium with the vapor flows `v`:
/// `l_m = (v_m/alpha_m) / sum_k (v_k/alpha_k)`. Signs of `v` are ignored.
pub fn hypothetical_liquid(v: &[f64], alphas: &[f64]) -> Result<Vec<f64>, ColumnError> {
    let raw: Vec<f64> = v.iter().zip(alphas).map(|(v, a)| v.abs() / a).collect();
    let s: f64 = raw.iter().sum();
    if s <= 0.0 || !s.is_finite() {
        return Err(ColumnError::ZeroVapor);
    }
    Ok(raw.into_iter().map(|x| x / s).collect())
}

/// Unvalidated column description: streams ordered top to bottom and the
/// distillate flows. Bottoms follow from closure unless given for checking.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub components: ComponentSystem,
    pub streams: Vec<Stream>,
    pub distillate: Vec<f64>,
    pub bottoms: Option<Vec<f64>>,
}

/// Per-section state at a given vapor flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionState {
    /// Zero-based section index, top section first.
    pub index: usize,
    pub net_flows: Vec<f64>,
    pub vapor: f64,
    pub roots: RootSet,
    pub indicators: Indicators,
}

impl SectionState {
    /// One-based pinch interval, `gamma_p in (alpha_{i-1}, alpha_i)`.
    pub fn pinch_interval(&self) -> usize {
        self.roots.pinch_interval()
    }

    /// Root `gamma_i` with one-based `i`.
    pub fn gamma(&self, i: usize) -> f64 {
        self.roots.values()[i - 1]
    }

    pub fn liquid(&self) -> f64 {
        self.vapor - self.net_flows.iter().sum::<f64>()
    }
}

/// A validated column with its section net flows.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    components: ComponentSystem,
    streams: Vec<Stream>,
    sections: Vec<Vec<f64>>,
    zero_tol: f64,
}

impl Column {
    /// Validates a specification: dimensions, stream phases, mass closure and
    /// the sign pattern of every section's net flows.
    pub fn new(spec: ColumnSpec) -> Result<Self, ColumnError> {
        let ColumnSpec {
            components,
            streams,
            distillate,
            bottoms,
        } = spec;
        let c = components.count();
        check_len("distillate", &distillate, c)?;
        for s in &streams {
            check_len(&format!("stream {}", s.name), &s.flows, c)?;
            check_len(&format!("stream {} liquid", s.name), &s.liquid, c)?;
            check_len(&format!("stream {} vapor", s.name), &s.vapor, c)?;
            validate_stream(s, components.alphas())?;
        }
        if streams.iter().all(|s| s.kind != StreamKind::Feed) {
            return Err(ColumnError::BadStream {
                stream: "-".into(),
                detail: "column has no feed".into(),
            });
        }
        let total_feed: f64 = streams
            .iter()
            .filter(|s| s.kind == StreamKind::Feed)
            .map(|s| s.total_flow())
            .sum();
        let zero_tol = ZERO_FLOW_REL_TOL * total_feed;
        let closure_tol = CLOSURE_REL_TOL * total_feed;

        for (i, d) in distillate.iter().enumerate() {
            if !d.is_finite() || *d < -zero_tol {
                return Err(ColumnError::MassBalanceViolation {
                    component: components.names()[i].clone(),
                    detail: format!("distillate flow {d} is negative"),
                });
            }
        }

        let mut sections = vec![distillate.clone()];
        for s in &streams {
            let prev = sections.last().expect("at least one section");
            sections.push(prev.iter().zip(&s.flows).map(|(d, f)| d - f).collect());
        }
        let last = sections.last().expect("bottom section");
        for i in 0..c {
            let b = -last[i];
            if b < -closure_tol {
                let fed: f64 = streams
                    .iter()
                    .filter(|s| s.kind == StreamKind::Feed)
                    .map(|s| s.flows[i])
                    .sum();
                return Err(ColumnError::MassBalanceViolation {
                    component: components.names()[i].clone(),
                    detail: format!(
                        "products withdraw {:.6} mol/s but only {fed:.6} mol/s is fed (bottoms would be {b:.6})",
                        fed - b
                    ),
                });
            }
            if let Some(given) = &bottoms {
                check_len("bottoms", given, c)?;
                if (given[i] - b).abs() > closure_tol.max(CLOSURE_REL_TOL * given[i].abs()) {
                    return Err(ColumnError::MassBalanceViolation {
                        component: components.names()[i].clone(),
                        detail: format!("given bottoms {} but closure requires {b}", given[i]),
                    });
                }
            }
        }

        for (k, d) in sections.iter_mut().enumerate() {
            for x in d.iter_mut() {
                if x.abs() < zero_tol.max(f64::MIN_POSITIVE) {
                    *x = 0.0;
                }
            }
            if !admissible_sign_pattern(d) {
                return Err(ColumnError::SignPatternViolation {
                    section: k + 1,
                    flows: d.clone(),
                });
            }
            if d.iter().all(|x| *x == 0.0) {
                return Err(ColumnError::SignPatternViolation {
                    section: k + 1,
                    flows: d.clone(),
                });
            }
        }

        Ok(Self {
            components,
            streams,
            sections,
            zero_tol,
        })
    }

    pub fn components(&self) -> &ComponentSystem {
        &self.components
    }

    pub fn alphas(&self) -> &[f64] {
        self.components.alphas()
    }

    pub fn count(&self) -> usize {
        self.components.count()
    }

    pub fn streams(&self) -> &[Stream] {
        &self.streams
    }

    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    /// Net upward flows of every section, top section first.
    pub fn net_flows(&self) -> &[Vec<f64>] {
        &self.sections
    }

    pub fn distillate(&self) -> &[f64] {
        &self.sections[0]
    }

    pub fn bottoms(&self) -> Vec<f64> {
        self.sections[self.sections.len() - 1].iter().map(|d| -d).collect()
    }

    pub fn distillate_total(&self) -> f64 {
        self.sections[0].iter().sum()
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn total_feed(&self) -> f64 {
        self.zero_tol / ZERO_FLOW_REL_TOL
    }

    /// Rebuilds the unvalidated specification.
    pub fn spec(&self) -> ColumnSpec {
        ColumnSpec {
            components: self.components.clone(),
            streams: self.streams.clone(),
            distillate: self.sections[0].clone(),
            bottoms: None,
        }
    }

    /// Vapor flow of every section given the vapor flow of one anchor section.
    /// Crossing a stream upward adds the stream's signed vapor flow.
    pub fn vapor_profile(&self, anchor: usize, v_anchor: f64) -> Result<Vec<f64>, ColumnError> {
        let n = self.sections.len();
        assert!(anchor < n, "anchor section out of range");
        let mut v = vec![0.0; n];
        v[anchor] = v_anchor;
        for k in (0..anchor).rev() {
            v[k] = v[k + 1] + self.streams[k].total_vapor();
        }
        for k in anchor + 1..n {
            v[k] = v[k - 1] - self.streams[k - 1].total_vapor();
        }
        if let Some((k, &x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            return Err(ColumnError::NonpositiveSectionVapor {
                section: k + 1,
                vapor: x,
            });
        }
        Ok(v)
    }

    /// Reflux ratio of the total condenser implied by a reboiler vapor flow.
    pub fn reflux_from_reboiler(&self, v_reb: f64) -> Result<f64, ColumnError> {
        let v = self.vapor_profile(self.sections.len() - 1, v_reb)?;
        let d = self.distillate_total();
        if v[0] <= d {
            return Err(ColumnError::NonpositiveReflux {
                v_top: v[0],
                distillate: d,
            });
        }
        Ok((v[0] - d) / d)
    }

    /// Reboiler vapor flow implied by a reflux ratio.
    pub fn reboiler_from_reflux(&self, reflux: f64) -> Result<f64, ColumnError> {
        let v_top = (reflux + 1.0) * self.distillate_total();
        let v = self.vapor_profile(0, v_top)?;
        Ok(v[v.len() - 1])
    }

    /// Solves every section's characteristic equation at the given vapors.
    pub fn section_states(&self, vapor: &[f64]) -> Result<Vec<SectionState>, roots::RootError> {
        self.sections
            .iter()
            .zip(vapor)
            .enumerate()
            .map(|(k, (d, &v))| {
                let rs = roots::solve_characteristic(d, v, self.alphas())?;
                let indicators = roots::classify_and_indicators(&rs, self.count());
                Ok(SectionState {
                    index: k,
                    net_flows: d.clone(),
                    vapor: v,
                    roots: rs,
                    indicators,
                })
            })
            .collect()
    }

    /// Returns a copy with every flow multiplied by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self, ColumnError> {
        let mut spec = self.spec();
        for s in &mut spec.streams {
            for x in s.flows.iter_mut().chain(s.liquid.iter_mut()).chain(s.vapor.iter_mut()) {
                *x *= lambda;
            }
        }
        for x in &mut spec.distillate {
            *x *= lambda;
        }
        Self::new(spec)
    }
}

fn check_len(what: &str, v: &[f64], c: usize) -> Result<(), ColumnError> {
    if v.len() != c {
        return Err(ColumnError::Dimension {
            what: what.into(),
            expected: c,
            got: v.len(),
        });
    }
    Ok(())
}

fn validate_stream(s: &Stream, alphas: &[f64]) -> Result<(), ColumnError> {
    let bad = |detail: String| ColumnError::BadStream {
        stream: s.name.clone(),
        detail,
    };
    let sign = s.kind.sign();
    for ((f, l), v) in s.flows.iter().zip(&s.liquid).zip(&s.vapor) {
        if !(f.is_finite() && l.is_finite() && v.is_finite()) {
            return Err(bad("flows must be finite".into()));
        }
        if sign * l < 0.0 || sign * v < 0.0 {
            return Err(bad("flows have the wrong sign for the stream kind".into()));
        }
        if (f - l - v).abs() > CLOSURE_REL_TOL * f.abs().max(1.0) {
            return Err(bad("total flows differ from liquid plus vapor".into()));
        }
    }
    let lsum: f64 = s.liquid.iter().map(|x| x.abs()).sum();
    let vsum: f64 = s.vapor.iter().map(|x| x.abs()).sum();
    match s.thermal {
        ThermalState::SaturatedLiquid if vsum > 0.0 => return Err(bad("saturated liquid stream carries vapor".into())),
        ThermalState::SaturatedVapor if lsum > 0.0 => return Err(bad("saturated vapor stream carries liquid".into())),
        ThermalState::PartiallyVaporized => {
            if lsum <= 0.0 || vsum <= 0.0 {
                return Err(bad("partially vaporized stream needs both phases".into()));
            }
            // v_m = k alpha_m l_m with one scalar k
            let lmax = s.liquid.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let present: Vec<usize> = (0..alphas.len())
                .filter(|&m| s.liquid[m].abs() > 1e-12 * lmax || s.vapor[m].abs() > 0.0)
                .collect();
            let k_ref = present
                .iter()
                .find(|&&m| s.liquid[m] != 0.0)
                .map(|&m| s.vapor[m] / (alphas[m] * s.liquid[m]))
                .ok_or_else(|| bad("liquid phase is empty".into()))?;
            for &m in &present {
                let expect = k_ref * alphas[m] * s.liquid[m];
                if (s.vapor[m] - expect).abs() > CLOSURE_REL_TOL * vsum.max(1.0) {
                    return Err(bad(format!("phases are not in equilibrium for component index {m}")));
                }
            }
        }
        _ => {}
    }
    if s.flows.iter().all(|f| *f == 0.0) {
        return Err(bad("stream is empty".into()));
    }
    Ok(())
}

/// True when no positive entry precedes a negative one.
pub fn admissible_sign_pattern(d: &[f64]) -> bool {
    let first_pos = d.iter().position(|x| *x > 0.0);
    match first_pos {
        None => true,
        Some(p) => d[p..].iter().all(|x| *x >= 0.0),
    }
}
