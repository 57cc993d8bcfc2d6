//! Product distributions that minimize the reboiler vapor duty when some
//! component splits between products are free.
//!
//! Each degree of freedom moves one component between a donor and a receiver
//! product. The search is nested: an outer deterministic grid over the dof box
//! followed by coordinate descent, and an inner minimum reflux calculation for
//! every resolved distribution. The binary pinch-interval choices of sections
//! whose sign pattern depends on the dofs are read off the inner solution, and
//! the optimum is certified by evaluating the full constraint system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{Column, ColumnSpec, Stream, StreamKind, ThermalState};
use crate::feasibility::{FeasibilityOptions, Status};
use crate::minreflux::{self, Evaluation, MinRefluxOptions, MinRefluxResult, Prepared};
use crate::roots::{self, Location};
use crate::specfile::{SpecError, SpecFile};

/// Absolute offset keeping bounded roots away from their interval ends.
pub const BOUND_OFFSET: f64 = 1e-4;
/// Largest accepted equality residual of a certificate.
pub const EQ_TOL: f64 = 1e-6;
/// Most negative accepted inequality slack of a certificate.
pub const INEQ_TOL: f64 = -1e-7;
/// Grid resolution used to certify infeasibility.
pub const CERTIFY_GRID: usize = 128;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// A product stream of the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "product", content = "stream")]
pub enum ProductRef {
    Distillate,
    Bottoms,
    /// Zero-based stream index of a sidedraw.
    Sidedraw(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dof {
    pub component: usize,
    pub component_name: String,
    pub donor: ProductRef,
    pub receiver: ProductRef,
    /// Combined flow of the component in donor and receiver, mol/s.
    pub total: f64,
    /// Bounds on the receiver's flow, mol/s.
    pub lower: f64,
    pub upper: f64,
}

impl Dof {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A required product flow of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTarget {
    pub component: usize,
    pub product: ProductRef,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSplitSpec {
    pub base: ColumnSpec,
    pub dofs: Vec<Dof>,
    pub recoveries: Vec<RecoveryTarget>,
}

fn product_ref(spec: &ColumnSpec, name: &str) -> Result<ProductRef, OptimizeError> {
    match name {
        "distillate" => Ok(ProductRef::Distillate),
        "bottoms" => Ok(ProductRef::Bottoms),
        _ => spec
            .streams
            .iter()
            .position(|s| s.name == name && s.kind == StreamKind::Sidedraw)
            .map(ProductRef::Sidedraw)
            .ok_or_else(|| OptimizeError::Invalid(format!("unknown product {name}"))),
    }
}

fn closure_bottoms(spec: &ColumnSpec) -> Vec<f64> {
    let d = net_flows(spec);
    d[d.len() - 1].iter().map(|x| -x).collect()
}

/// Net upward flows of every section without validation.
pub fn net_flows(spec: &ColumnSpec) -> Vec<Vec<f64>> {
    let mut out = vec![spec.distillate.clone()];
    for s in &spec.streams {
        let prev = out.last().expect("top section");
        out.push(prev.iter().zip(&s.flows).map(|(d, f)| d - f).collect());
    }
    out
}

fn product_flow(spec: &ColumnSpec, p: ProductRef, i: usize) -> f64 {
    match p {
        ProductRef::Distillate => spec.distillate[i],
        ProductRef::Bottoms => spec.bottoms.as_ref().expect("resolved bottoms")[i],
        ProductRef::Sidedraw(j) => -spec.streams[j].flows[i],
    }
}

fn set_product_flow(spec: &mut ColumnSpec, p: ProductRef, i: usize, x: f64) {
    match p {
        ProductRef::Distillate => spec.distillate[i] = x,
        ProductRef::Bottoms => spec.bottoms.as_mut().expect("resolved bottoms")[i] = x,
        ProductRef::Sidedraw(j) => {
            let s = &spec.streams[j];
            let mut rates = s.rates();
            rates[i] = x.max(0.0);
            spec.streams[j] = Stream::single_phase(&s.name, s.kind, s.thermal, &rates);
        }
    }
}

impl FreeSplitSpec {
    /// Reads the `free_splits` block of a specification file.
    pub fn from_specfile(file: &SpecFile) -> Result<Self, OptimizeError> {
        let fs = file
            .free_splits
            .as_ref()
            .ok_or_else(|| OptimizeError::Invalid("specification has no free_splits block".into()))?;
        let mut base = file.column_spec()?;
        if base.bottoms.is_none() {
            base.bottoms = Some(closure_bottoms(&base));
        }
        let names = base.components.names().to_vec();
        let mut dofs = Vec::new();
        for e in &fs.dofs {
            let component = file.component_index(&e.component)?;
            let donor = product_ref(&base, &e.donor)?;
            let receiver = product_ref(&base, &e.receiver)?;
            if donor == receiver {
                return Err(OptimizeError::Invalid(format!(
                    "dof for {}: donor and receiver are the same product",
                    e.component
                )));
            }
            for p in [donor, receiver] {
                if let ProductRef::Sidedraw(j) = p {
                    if base.streams[j].thermal == ThermalState::PartiallyVaporized {
                        return Err(OptimizeError::Invalid(format!(
                            "dof for {}: partially vaporized sidedraws cannot take free splits",
                            e.component
                        )));
                    }
                }
            }
            let total = product_flow(&base, donor, component) + product_flow(&base, receiver, component);
            let [lower, upper] = e.bounds;
            if !(lower >= 0.0 && lower <= upper && upper <= total * (1.0 + 1e-12)) {
                return Err(OptimizeError::Invalid(format!(
                    "dof for {}: bounds [{lower}, {upper}] must lie within [0, {total}]",
                    e.component
                )));
            }
            dofs.push(Dof {
                component,
                component_name: names[component].clone(),
                donor,
                receiver,
                total,
                lower,
                upper: upper.min(total),
            });
        }
        if dofs.is_empty() {
            return Err(OptimizeError::Invalid("free_splits has no dofs".into()));
        }
        let mut recoveries = Vec::new();
        for r in &fs.fixed_recoveries {
            let component = file.component_index(&r.component)?;
            let product = product_ref(&base, &r.product)?;
            if !(0.0..=1.0).contains(&r.fraction) {
                return Err(OptimizeError::Invalid(format!(
                    "recovery fraction {} outside [0, 1]",
                    r.fraction
                )));
            }
            let fed: f64 = base
                .streams
                .iter()
                .filter(|s| s.kind == StreamKind::Feed)
                .map(|s| s.flows[component])
                .sum();
            let flow = r.fraction * fed;
            let mut matched = false;
            for d in dofs.iter_mut().filter(|d| d.component == component) {
                let x = if d.receiver == product {
                    flow
                } else if d.donor == product {
                    d.total - flow
                } else {
                    continue;
                };
                if x < d.lower - 1e-9 || x > d.upper + 1e-9 {
                    return Err(OptimizeError::Invalid(format!(
                        "recovery of {} in {} requires {x} outside the dof bounds",
                        r.component, r.product
                    )));
                }
                d.lower = x.clamp(d.lower, d.upper);
                d.upper = d.lower;
                matched = true;
            }
            if !matched && (product_flow(&base, product, component) - flow).abs() > 1e-9 * fed.max(1.0) {
                return Err(OptimizeError::Invalid(format!(
                    "recovery of {} in {} conflicts with the fixed product flows",
                    r.component, r.product
                )));
            }
            recoveries.push(RecoveryTarget {
                component,
                product,
                flow,
            });
        }
        Ok(Self { base, dofs, recoveries })
    }

    /// The specification with every dof set to `x`.
    pub fn resolve(&self, x: &[f64]) -> ColumnSpec {
        assert_eq!(x.len(), self.dofs.len(), "one value per dof");
        let mut spec = self.base.clone();
        for (d, &v) in self.dofs.iter().zip(x) {
            set_product_flow(&mut spec, d.receiver, d.component, v);
            set_product_flow(&mut spec, d.donor, d.component, d.total - v);
        }
        spec
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dofs.iter().map(|d| d.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dofs.iter().map(|d| d.upper).collect()
    }

    /// Sections whose pinch interval depends on the dofs, with the intervals
    /// reachable inside the box. Net flows are affine in the dofs, so their
    /// sign ranges are attained at the box corners.
    pub fn ambiguous_sections(&self) -> Vec<AmbiguousSection> {
        let n = self.dofs.len();
        let scale: f64 = self
            .base
            .streams
            .iter()
            .filter(|s| s.kind == StreamKind::Feed)
            .map(|s| s.total_flow())
            .sum();
        let tol = 1e-10 * scale;
        let corners: Vec<Vec<Vec<f64>>> = (0..1usize << n)
            .map(|mask| {
                let x: Vec<f64> = (0..n)
                    .map(|k| {
                        if mask >> k & 1 == 1 {
                            self.dofs[k].upper
                        } else {
                            self.dofs[k].lower
                        }
                    })
                    .collect();
                net_flows(&self.resolve(&x))
            })
            .collect();
        let sections = corners[0].len();
        let c = self.base.components.count();
        let mut out = Vec::new();
        for k in 0..sections {
            let flips = (0..c).any(|i| {
                let lo = corners.iter().map(|d| d[k][i]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|d| d[k][i]).fold(f64::NEG_INFINITY, f64::max);
                lo < -tol && hi > tol
            });
            if !flips {
                continue;
            }
            let mut intervals: Vec<usize> = corners
                .iter()
                .filter_map(|d| {
                    let snapped: Vec<f64> = d[k].iter().map(|x| if x.abs() < tol { 0.0 } else { *x }).collect();
                    roots::pinch_interval_from_signs(&snapped)
                })
                .collect();
            intervals.sort_unstable();
            intervals.dedup();
            if intervals.len() > 1 {
                out.push(AmbiguousSection {
                    section: k + 1,
                    intervals,
                });
            }
        }
        out
    }
}

/// A section whose pinch interval is not fixed by the specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguousSection {
    /// One-based section index.
    pub section: usize,
    /// Candidate pinch intervals, ascending.
    pub intervals: Vec<usize>,
}

/// One binary indicator `mu_interval` of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryValue {
    pub section: usize,
    pub interval: usize,
    pub mu: u8,
}

/// Binary indicators of an ambiguous section when its pinch is in `chosen`.
/// All candidate intervals but the last carry a binary; the last is implied.
pub fn binaries_for(a: &AmbiguousSection, chosen: usize) -> Vec<BinaryValue> {
    a.intervals[..a.intervals.len() - 1]
        .iter()
        .map(|&i| BinaryValue {
            section: a.section,
            interval: i,
            mu: u8::from(i == chosen),
        })
        .collect()
}

/// Every combination of pinch intervals of the ambiguous sections.
pub fn enumerate_binaries(ambiguous: &[AmbiguousSection]) -> Vec<Vec<BinaryValue>> {
    let mut out: Vec<Vec<BinaryValue>> = vec![Vec::new()];
    for a in ambiguous {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                a.intervals.iter().map(move |&chosen| {
                    let mut v = prefix.clone();
                    v.extend(binaries_for(a, chosen));
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid intervals per dof.
    pub grid: usize,
    /// Smallest coordinate descent step, mol/s.
    pub min_step: f64,
    pub minreflux: MinRefluxOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            min_step: 1e-6,
            minreflux: MinRefluxOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFlows {
    pub name: String,
    pub flows: Vec<f64>,
}

/// Grid points falling in one binary assignment's region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSummary {
    pub binaries: Vec<BinaryValue>,
    pub points: usize,
    pub feasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub status: OptimizationStatus,
    pub v_reb_min: Option<f64>,
    pub r_min: Option<f64>,
    /// Receiver flow of every dof at the optimum.
    pub point: Vec<f64>,
    /// Product flows at the optimum, top to bottom.
    pub distribution: Vec<ProductFlows>,
    pub binaries: Vec<BinaryValue>,
    pub ambiguous: Vec<AmbiguousSection>,
    pub certificate: Option<Certificate>,
    pub minreflux: Option<MinRefluxResult>,
    pub grid: usize,
    pub evaluations: usize,
    pub assignments: Vec<AssignmentSummary>,
}

/// Inner minimum reboiler vapor of a resolved distribution; `None` when the
/// distribution is invalid or no candidate is feasible.
pub fn inner(fs: &FreeSplitSpec, x: &[f64], opts: &MinRefluxOptions) -> Option<MinRefluxResult> {
    let column = Column::new(fs.resolve(x)).ok()?;
    let prep = Prepared::new(column).ok()?;
    minreflux::vreb_min(&prep, opts).ok()
}

fn objective(fs: &FreeSplitSpec, x: &[f64], opts: &MinRefluxOptions) -> f64 {
    inner(fs, x, opts).map_or(f64::INFINITY, |r| r.v_reb_min)
}

fn grid_axes(fs: &FreeSplitSpec, grid: usize) -> Vec<Vec<f64>> {
    fs.dofs
        .iter()
        .map(|d| {
            if d.width() <= 0.0 {
                vec![d.lower]
            } else {
                (0..=grid)
                    .map(|k| d.lower + d.width() * k as f64 / grid as f64)
                    .collect()
            }
        })
        .collect()
}

fn grid_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

fn assignment_of(fs: &FreeSplitSpec, ambiguous: &[AmbiguousSection], x: &[f64]) -> Vec<BinaryValue> {
    let d = net_flows(&fs.resolve(x));
    ambiguous
        .iter()
        .flat_map(|a| {
            let p = roots::pinch_interval_from_signs(&d[a.section - 1]).unwrap_or(0);
            binaries_for(a, p)
        })
        .collect()
}

fn summarize(
    fs: &FreeSplitSpec,
    ambiguous: &[AmbiguousSection],
    points: &[Vec<f64>],
    values: &[f64],
) -> Vec<AssignmentSummary> {
    let mut out: Vec<AssignmentSummary> = enumerate_binaries(ambiguous)
        .into_iter()
        .map(|binaries| AssignmentSummary {
            binaries,
            points: 0,
            feasible: 0,
        })
        .collect();
    for (x, v) in points.iter().zip(values) {
        let b = assignment_of(fs, ambiguous, x);
        if let Some(s) = out.iter_mut().find(|s| s.binaries == b) {
            s.points += 1;
            s.feasible += usize::from(v.is_finite());
        }
    }
    out
}

/// Grid search over the dof box, then coordinate descent, then the tie-break
/// that moves as much flow into the receivers as the optimal face allows.
pub fn optimize_distribution(fs: &FreeSplitSpec, config: &SearchConfig) -> OptimizationResult {
    let opts = &config.minreflux;
    let ambiguous = fs.ambiguous_sections();
    let grid = config.grid.max(1);
    let mut evaluations = 0;
    let (mut points, mut values) = evaluate_grid(fs, grid, opts);
    evaluations += points.len();
    let mut used_grid = grid;
    if values.iter().all(|v| !v.is_finite()) && grid < CERTIFY_GRID && fs.dofs.iter().any(|d| d.width() > 0.0) {
        (points, values) = evaluate_grid(fs, CERTIFY_GRID, opts);
        evaluations += points.len();
        used_grid = CERTIFY_GRID;
    }
    let assignments = summarize(fs, &ambiguous, &points, &values);
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(k, v)| (points[k].clone(), *v));
    let Some((mut x, mut v)) = best else {
        return OptimizationResult {
            status: OptimizationStatus::Infeasible,
            v_reb_min: None,
            r_min: None,
            point: Vec::new(),
            distribution: Vec::new(),
            binaries: Vec::new(),
            ambiguous,
            certificate: None,
            minreflux: None,
            grid: used_grid,
            evaluations,
            assignments,
        };
    };

    let lo = fs.lower();
    let hi = fs.upper();
    let mut f = |y: &[f64]| {
        evaluations += 1;
        objective(fs, y, opts)
    };
    let mut step: Vec<f64> = fs.dofs.iter().map(|d| d.width() / grid as f64).collect();
    while step
        .iter()
        .zip(&fs.dofs)
        .any(|(h, d)| d.width() > 0.0 && *h >= config.min_step)
    {
        let mut improved = false;
        for k in 0..x.len() {
            if fs.dofs[k].width() <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] = (x[k] + dir * step[k]).clamp(lo[k], hi[k]);
                if y[k] == x[k] {
                    continue;
                }
                let fy = f(&y);
                if fy < v {
                    x = y;
                    v = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for h in &mut step {
                *h /= 2.0;
            }
        }
    }

    // The optimum usually sits on a kink; a bracketed ternary search removes
    // the residual of the finite descent step.
    for k in 0..x.len() {
        if fs.dofs[k].width() <= 0.0 {
            continue;
        }
        let h = 4.0 * config.min_step;
        let (mut a, mut b) = ((x[k] - h).max(lo[k]), (x[k] + h).min(hi[k]));
        for _ in 0..80 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            let mut y1 = x.clone();
            y1[k] = m1;
            let mut y2 = x.clone();
            y2[k] = m2;
            if f(&y1) <= f(&y2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let mut y = x.clone();
        y[k] = 0.5 * (a + b);
        let fy = f(&y);
        if fy < v {
            x = y;
            v = fy;
        }
    }

    // Flat optimal faces: move each dof as far toward its upper bound as the
    // objective stays within 1e-9 relative of the optimum.
    let face_tol = 1e-9 * v.abs();
    for k in 0..x.len() {
        if fs.dofs[k].width() <= 0.0 {
            continue;
        }
        let mut y = x.clone();
        y[k] = hi[k];
        if f(&y) <= v + face_tol {
            x = y;
            continue;
        }
        let (mut ok, mut bad) = (x[k], hi[k]);
        for _ in 0..64 {
            let mid = 0.5 * (ok + bad);
            y[k] = mid;
            if f(&y) <= v + face_tol {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        x[k] = ok;
    }

    let result = inner(fs, &x, opts).expect("optimum is feasible");
    let column = Column::new(fs.resolve(&x)).expect("optimum is valid");
    let prep = Prepared::new(column).expect("optimum is valid");
    let binaries: Vec<BinaryValue> = ambiguous
        .iter()
        .flat_map(|a| binaries_for(a, result.evaluation.sections[a.section - 1].pinch_interval()))
        .collect();
    let certificate = certify(&prep, &result.evaluation, &ambiguous, &fs.recoveries, &opts.feasibility);
    OptimizationResult {
        status: OptimizationStatus::Optimal,
        v_reb_min: Some(result.v_reb_min),
        r_min: Some(result.r_min),
        distribution: distribution(&fs.resolve(&x)),
        point: x,
        binaries,
        ambiguous,
        certificate: Some(certificate),
        minreflux: Some(result),
        grid: used_grid,
        evaluations,
        assignments,
    }
}

fn evaluate_grid(fs: &FreeSplitSpec, grid: usize, opts: &MinRefluxOptions) -> (Vec<Vec<f64>>, Vec<f64>) {
    let points = grid_points(&grid_axes(fs, grid));
    let values = points.par_iter().map(|x| objective(fs, x, opts)).collect();
    (points, values)
}

/// Product flows of a resolved specification, top to bottom.
pub fn distribution(spec: &ColumnSpec) -> Vec<ProductFlows> {
    let mut out = vec![ProductFlows {
        name: "distillate".into(),
        flows: spec.distillate.clone(),
    }];
    for s in spec.streams.iter().filter(|s| s.kind == StreamKind::Sidedraw) {
        out.push(ProductFlows {
            name: s.name.clone(),
            flows: s.rates(),
        });
    }
    out.push(ProductFlows {
        name: "bottoms".into(),
        flows: closure_bottoms(spec),
    });
    out
}

/// Worst residual of one constraint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResidual {
    pub block: u8,
    pub name: String,
    /// Largest absolute equality residual.
    pub equality: Option<f64>,
    /// Smallest inequality slack.
    pub inequality: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub blocks: Vec<BlockResidual>,
    pub satisfied: bool,
}

struct Block {
    eq: Option<f64>,
    ineq: Option<f64>,
    count: usize,
}

impl Block {
    fn new() -> Self {
        Self {
            eq: None,
            ineq: None,
            count: 0,
        }
    }

    fn eq(&mut self, r: f64) {
        self.eq = Some(self.eq.map_or(r.abs(), |e| e.max(r.abs())));
        self.count += 1;
    }

    fn ineq(&mut self, s: f64) {
        self.ineq = Some(self.ineq.map_or(s, |e| e.min(s)));
        self.count += 1;
    }

    fn finish(self, block: u8, name: &str) -> BlockResidual {
        BlockResidual {
            block,
            name: name.into(),
            equality: self.eq,
            inequality: self.ineq,
            count: self.count,
        }
    }
}

/// Evaluates the full constraint system at a resolved point:
/// 1. mass balances, product signs and recoveries;
/// 2. the characteristic equation of every solved section root, multiplied by
///    `(alpha_b - gamma)` and split into partial fractions for the pinch root
///    of an ambiguous section, `b` separating its candidate intervals;
/// 3. the stream root equations in full-stream form;
/// 4. root bounds shrunk by [`BOUND_OFFSET`];
/// 5. the interval bounds implied by the binary indicators;
/// 6. every enforced feasibility constraint.
pub fn certify(
    prep: &Prepared,
    eval: &Evaluation,
    ambiguous: &[AmbiguousSection],
    recoveries: &[RecoveryTarget],
    opts: &FeasibilityOptions,
) -> Certificate {
    let column = prep.column();
    let alphas = column.alphas();
    let c = alphas.len();
    let streams = column.streams();
    let d = column.net_flows();
    let ext = |i: usize| column.components().alpha_ext(i);

    let mut b1 = Block::new();
    let bottoms = column.bottoms();
    for i in 0..c {
        let fed: f64 = streams.iter().map(|s| s.flows[i]).sum();
        b1.eq(fed - d[0][i] + d[d.len() - 1][i]);
        for (k, s) in streams.iter().enumerate() {
            b1.eq(d[k][i] - d[k + 1][i] - s.flows[i]);
        }
        b1.ineq(d[0][i]);
        b1.ineq(bottoms[i]);
        for s in streams.iter().filter(|s| s.kind == StreamKind::Sidedraw) {
            b1.ineq(-s.flows[i]);
        }
    }
    for r in recoveries {
        let actual = match r.product {
            ProductRef::Distillate => d[0][r.component],
            ProductRef::Bottoms => bottoms[r.component],
            ProductRef::Sidedraw(j) => -streams[j].flows[r.component],
        };
        b1.eq(actual - r.flow);
    }

    let mut b2 = Block::new();
    let mut b4 = Block::new();
    let mut b5 = Block::new();
    for (k, sec) in eval.sections.iter().enumerate() {
        let amb = ambiguous.iter().find(|a| a.section == k + 1);
        let v = sec.vapor;
        for (r, (&g, loc)) in sec.roots.values().iter().zip(sec.roots.locations()).enumerate() {
            if sec.roots.pinned()[r] {
                continue;
            }
            let Location::Interval(i) = *loc else { continue };
            let pinch = r == sec.roots.pinch_index();
            match amb {
                Some(a) if pinch && a.intervals.len() == 2 => {
                    let b = a.intervals[0];
                    let ab = alphas[b - 1];
                    let rhs: f64 = (0..c)
                        .map(|m| {
                            let am = alphas[m];
                            if m == b - 1 {
                                am * sec.net_flows[m]
                            } else {
                                am * sec.net_flows[m] + (ab - am) * am * sec.net_flows[m] / (am - g)
                            }
                        })
                        .sum();
                    b2.eq(v * (ab - g) - rhs);
                    b4.ineq((g - ext(b - 1) - BOUND_OFFSET).min(ext(b + 1) - BOUND_OFFSET - g));
                    let mu = u8::from(sec.pinch_interval() == b);
                    let (m, n) = (f64::from(mu), f64::from(1 - mu));
                    let lower = ext(b - 1) * m + ext(b) * n;
                    let upper = ext(b) * m + ext(b + 1) * n;
                    b5.ineq((g - lower).min(upper - g));
                }
                _ => {
                    b2.eq(roots::characteristic(&sec.net_flows, alphas, g) - v);
                    let upper = if i > c {
                        f64::INFINITY
                    } else {
                        ext(i) - BOUND_OFFSET - g
                    };
                    b4.ineq((g - ext(i - 1) - BOUND_OFFSET).min(upper));
                }
            }
        }
    }

    let mut b3 = Block::new();
    for (s, sr) in streams.iter().zip(prep.stream_roots()) {
        for (&j, &rho) in &sr.rho {
            let lhs = roots::characteristic(&s.flows, alphas, rho);
            b3.eq(lhs - s.total_vapor());
            b4.ineq((rho - ext(j) - BOUND_OFFSET).min(ext(j + 1) - BOUND_OFFSET - rho));
        }
    }

    let mut b6 = Block::new();
    for rec in eval.report.records().filter(|r| r.enforced) {
        b6.ineq(if rec.status == Status::Binding {
            rec.slack.max(0.0)
        } else {
            rec.slack
        });
    }
    let _ = opts;

    let blocks = vec![
        b1.finish(1, "mass balances and product specifications"),
        b2.finish(2, "section root equations"),
        b3.finish(3, "stream root equations"),
        b4.finish(4, "root bounds"),
        b5.finish(5, "binary interval bounds"),
        b6.finish(6, "feasibility constraints"),
    ];
    let satisfied = blocks
        .iter()
        .all(|b| b.equality.is_none_or(|e| e <= EQ_TOL) && b.inequality.is_none_or(|s| s >= INEQ_TOL));
    Certificate { blocks, satisfied }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_counts() {
        let a = |s| AmbiguousSection {
            section: s,
            intervals: vec![2, 3],
        };
        assert_eq!(enumerate_binaries(&[]), vec![Vec::<BinaryValue>::new()]);
        assert_eq!(enumerate_binaries(&[a(1)]).len(), 2);
        assert_eq!(enumerate_binaries(&[a(1), a(2), a(3)]).len(), 8);
    }

    #[test]
    fn binaries_are_one_hot_prefix() {
        let a = AmbiguousSection {
            section: 2,
            intervals: vec![3, 4],
        };
        assert_eq!(binaries_for(&a, 3)[0].mu, 1);
        assert_eq!(binaries_for(&a, 4)[0].mu, 0);
    }
}
