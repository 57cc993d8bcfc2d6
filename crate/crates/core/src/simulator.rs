//! Equilibrium-stage column model with constant relative volatility and
//! constant molar overflow, used as an independent check of the shortcut
//! results, plus pinch compositions and ternary geometry.
//!
//! Stages are numbered from the top. The condenser is total, so the reflux
//! and distillate have the composition of the vapor leaving stage 0, and the
//! last stage is a partial reboiler. A feed enters the first stage of the
//! section below it. The liquid part of a sidedraw leaves the last stage of
//! the section above it and the vapor part leaves the first stage of the
//! section below it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{Column, ColumnError, SectionState, StreamKind};
use crate::optimizer::FreeSplitSpec;
use crate::roots::{Location, RootError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("stage equations did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operating line gives a negative flow of component {component}")]
    NegativeComposition { component: usize },
    #[error("operating line vapor does not close: sum {sum}")]
    Closure { sum: f64 },
    #[error("invalid internal flows: {0}")]
    InvalidFlows(String),
    #[error("no bracket for the minimum reflux: {0}")]
    BracketFailure(String),
    #[error("section {section} has zero liquid flow")]
    DegenerateSection { section: usize },
    #[error("ternary projection needs 3 components, got {0}")]
    NotTernary(usize),
    #[error(transparent)]
    Column(#[from] ColumnError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Vapor in equilibrium with liquid `x`.
pub fn equilibrium(x: &[f64], alphas: &[f64]) -> Vec<f64> {
    let s: f64 = x.iter().zip(alphas).map(|(x, a)| x * a).sum();
    x.iter().zip(alphas).map(|(x, a)| a * x / s).collect()
}

/// Liquid in equilibrium with vapor `y`.
pub fn inverse_equilibrium(y: &[f64], alphas: &[f64]) -> Vec<f64> {
    let s: f64 = y.iter().zip(alphas).map(|(y, a)| y / a).sum();
    y.iter().zip(alphas).map(|(y, a)| y / a / s).collect()
}

/// One stage down a section: `y = (L x + d)/V` from the operating line, then
/// the liquid in equilibrium with it. The vapor must close to 1 within 1e-9.
pub fn stage_map_down(x: &[f64], alphas: &[f64], l: f64, v: f64, d: &[f64]) -> Result<Vec<f64>, SimError> {
    let y = operating_vapor(x, l, v, d)?;
    if let Some(m) = y.iter().position(|y| *y < 0.0) {
        return Err(SimError::NegativeComposition { component: m });
    }
    Ok(inverse_equilibrium(&y, alphas))
}

fn operating_vapor(x: &[f64], l: f64, v: f64, d: &[f64]) -> Result<Vec<f64>, SimError> {
    let y: Vec<f64> = x.iter().zip(d).map(|(x, d)| (l * x + d) / v).collect();
    let sum: f64 = y.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SimError::Closure { sum });
    }
    Ok(y)
}

/// Per-stage flows of the stacked stage equations.
#[derive(Debug, Clone)]
struct Layout {
    alphas: Vec<f64>,
    section: Vec<usize>,
    l_in: Vec<f64>,
    v_in: Vec<f64>,
    l_out: Vec<f64>,
    v_out: Vec<f64>,
    side_l: Vec<f64>,
    side_v: Vec<f64>,
    feed: Vec<Vec<f64>>,
    liquid: Vec<f64>,
    vapor: Vec<f64>,
    /// `(stream, stage of the liquid draw, stage of the vapor draw)` per sidedraw.
    draws: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn new(column: &Column, reflux: f64, per_section: usize) -> Result<Self, SimError> {
        if !(reflux > 0.0) || per_section == 0 {
            return Err(SimError::InvalidFlows(format!(
                "reflux {reflux} and stages per section {per_section} must be positive"
            )));
        }
        let c = column.count();
        let d = column.distillate_total();
        let streams = column.streams();
        let sections = column.section_count();
        let mut liquid = vec![reflux * d];
        let mut vapor = vec![(reflux + 1.0) * d];
        for s in streams {
            let l = liquid[liquid.len() - 1] + s.liquid.iter().sum::<f64>();
            let v = vapor[vapor.len() - 1] - s.vapor.iter().sum::<f64>();
            liquid.push(l);
            vapor.push(v);
        }
        if let Some(k) = (0..sections).find(|&k| !(liquid[k] > 0.0 && vapor[k] > 0.0)) {
            return Err(SimError::InvalidFlows(format!(
                "section {} has L = {:.6}, V = {:.6}",
                k + 1,
                liquid[k],
                vapor[k]
            )));
        }
        let n = sections * per_section;
        let section: Vec<usize> = (0..n).map(|s| s / per_section).collect();
        let mut l_out: Vec<f64> = section.iter().map(|&k| liquid[k]).collect();
        let mut v_out: Vec<f64> = section.iter().map(|&k| vapor[k]).collect();
        let mut side_l = vec![0.0; n];
        let mut side_v = vec![0.0; n];
        let mut feed = vec![vec![0.0; c]; n];
        let mut draws = Vec::new();
        for (j, s) in streams.iter().enumerate() {
            let top = (j + 1) * per_section - 1;
            let bot = top + 1;
            v_out[bot] = vapor[j];
            match s.kind {
                StreamKind::Feed => {
                    for (f, x) in feed[bot].iter_mut().zip(&s.flows) {
                        *f += x;
                    }
                }
                StreamKind::Sidedraw => {
                    side_l[top] = -s.liquid.iter().sum::<f64>();
                    side_v[bot] = -s.vapor.iter().sum::<f64>();
                    l_out[top] = liquid[j] - side_l[top];
                    draws.push((j, top, bot));
                }
            }
        }
        l_out[n - 1] = liquid[sections - 1] - vapor[sections - 1];
        if !(l_out[n - 1] > 0.0) {
            return Err(SimError::InvalidFlows(format!(
                "bottoms flow {:.6} is not positive",
                l_out[n - 1]
            )));
        }
        let mut l_in = vec![liquid[0]; n];
        l_in[1..].copy_from_slice(&l_out[..n - 1]);
        let mut v_in = vec![0.0; n];
        v_in[..n - 1].copy_from_slice(&v_out[1..]);
        Ok(Self {
            alphas: column.alphas().to_vec(),
            section,
            l_in,
            v_in,
            l_out,
            v_out,
            side_l,
            side_v,
            feed,
            liquid,
            vapor,
            draws,
        })
    }

    fn stages(&self) -> usize {
        self.section.len()
    }

    fn residual(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.stages();
        let y: Vec<Vec<f64>> = x.iter().map(|x| equilibrium(x, &self.alphas)).collect();
        (0..n)
            .map(|s| {
                let above = if s == 0 { &y[0] } else { &x[s - 1] };
                (0..self.alphas.len())
                    .map(|i| {
                        let mut r = self.l_in[s] * above[i] + self.feed[s][i]
                            - (self.l_out[s] + self.side_l[s]) * x[s][i]
                            - (self.v_out[s] + self.side_v[s]) * y[s][i];
                        if s + 1 < n {
                            r += self.v_in[s] * y[s + 1][i];
                        }
                        r
                    })
                    .collect()
            })
            .collect()
    }

    /// Tridiagonal coefficients of component `i` at stage temperatures `t`
    /// (`t_n = sum alpha x` on stage `n`): `sub x_{n-1} + diag x_n +
    /// sup x_{n+1} = -f_n`.
    fn tridiagonal(&self, i: usize, t: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.stages();
        let a = self.alphas[i];
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for s in 0..n {
            diag[s] = -(self.l_out[s] + self.side_l[s]) - (self.v_out[s] + self.side_v[s]) * a / t[s];
            if s == 0 {
                diag[s] += self.l_in[0] * a / t[0];
            } else {
                sub[s] = self.l_in[s];
            }
            if s + 1 < n {
                sup[s] = self.v_in[s] * a / t[s + 1];
            }
        }
        (sub, diag, sup)
    }

    /// Component liquid profiles solving every component balance exactly at
    /// stage temperatures `t`, with the logarithms of the stage sums `sum_i x_i` and,
    /// when asked, their Jacobian with respect to `t`.
    fn profiles(&self, t: &[f64], jacobian: bool) -> (Vec<Vec<f64>>, Vec<f64>, Option<DMatrix<f64>>) {
        let n = self.stages();
        let c = self.alphas.len();
        let mut x = vec![vec![0.0; c]; n];
        let mut jac = jacobian.then(|| DMatrix::<f64>::zeros(n, n));
        for i in 0..c {
            let (sub, diag, sup) = self.tridiagonal(i, t);
            // forward elimination shared by every right-hand side
            let mut piv = vec![0.0; n];
            let mut w = vec![0.0; n];
            piv[0] = diag[0];
            for s in 1..n {
                w[s] = sub[s] / piv[s - 1];
                piv[s] = diag[s] - w[s] * sup[s - 1];
            }
            let solve = |rhs: &mut [f64], from: usize| {
                for s in from.max(1)..n {
                    rhs[s] -= w[s] * rhs[s - 1];
                }
                rhs[n - 1] /= piv[n - 1];
                for s in (0..n - 1).rev() {
                    rhs[s] = (rhs[s] - sup[s] * rhs[s + 1]) / piv[s];
                }
            };
            let mut xi: Vec<f64> = (0..n).map(|s| -self.feed[s][i]).collect();
            solve(&mut xi, 0);
            for s in 0..n {
                x[s][i] = xi[s];
            }
            if let Some(jac) = jac.as_mut() {
                let a = self.alphas[i];
                let mut col = vec![0.0; n];
                for m in 0..n {
                    // d(T x)/dt_m has entries in rows m - 1 and m only
                    col.iter_mut().for_each(|v| *v = 0.0);
                    let k = a / t[m] * xi[m] / t[m];
                    col[m] = (self.v_out[m] + self.side_v[m]) * k;
                    if m == 0 {
                        col[0] -= self.l_in[0] * k;
                    } else {
                        col[m - 1] = -self.v_in[m - 1] * k;
                    }
                    solve(&mut col, m.saturating_sub(1));
                    for s in 0..n {
                        jac[(s, m)] -= col[s];
                    }
                }
            }
        }
        let sums: Vec<f64> = x.iter().map(|row| row.iter().sum::<f64>()).collect();
        if let Some(jac) = jac.as_mut() {
            for (s, total) in sums.iter().enumerate() {
                jac.row_mut(s).scale_mut(1.0 / total);
            }
        }
        let g = sums.iter().map(|v| v.ln()).collect();
        (x, g, jac)
    }

    fn temperatures(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                row.iter().zip(&self.alphas).map(|(x, a)| x * a).sum::<f64>() / total
            })
            .collect()
    }
}

fn sum_sq_flat(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum()
}

fn normalize_rows(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|row| normalized(row)).collect()
}

fn max_abs(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Achieved product of a simulated column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductResult {
    pub name: String,
    pub flows: Vec<f64>,
    pub composition: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub reflux: f64,
    pub stages_per_section: usize,
    /// Zero-based section of every stage.
    pub section: Vec<usize>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Liquid and vapor flow of every section.
    pub liquid: Vec<f64>,
    pub vapor: Vec<f64>,
    /// Products from the top: distillate, sidedraws, bottoms.
    pub products: Vec<ProductResult>,
    pub residual: f64,
    pub iterations: usize,
}

impl StageProfile {
    pub fn v_reb(&self) -> f64 {
        self.vapor[self.vapor.len() - 1]
    }
}

/// Iteration cap of the stage equation solver.
pub const MAX_ITERATIONS: usize = 500;

/// Solves the stage equations at reflux ratio `reflux`.
pub fn simulate_column(column: &Column, reflux: f64, per_section: usize) -> Result<StageProfile, SimError> {
    simulate_column_from(column, reflux, per_section, None)
}

/// As [`simulate_column`], starting from a previous liquid profile of the
/// same shape when one is given. A run that does not converge is retried by
/// continuation from a larger reflux, where the profile is less pinched.
pub fn simulate_column_from(
    column: &Column,
    reflux: f64,
    per_section: usize,
    guess: Option<&[Vec<f64>]>,
) -> Result<StageProfile, SimError> {
    let first = match solve(column, reflux, per_section, guess) {
        Err(e @ SimError::NotConverged { .. }) => e,
        other => return other,
    };
    let mut current = match solve(column, 1.5 * reflux + 0.5, per_section, None) {
        Ok(p) => p,
        Err(_) => return Err(first),
    };
    let mut step = (current.reflux - reflux) / 4.0;
    while step > 1e-6 * reflux {
        let next = (current.reflux - step).max(reflux);
        match solve(column, next, per_section, Some(&current.x)) {
            Ok(p) if next == reflux => return Ok(p),
            Ok(p) => current = p,
            Err(SimError::NotConverged { .. }) => step *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(first)
}

fn solve(
    column: &Column,
    reflux: f64,
    per_section: usize,
    guess: Option<&[Vec<f64>]>,
) -> Result<StageProfile, SimError> {
    let lay = Layout::new(column, reflux, per_section)?;
    let n = lay.stages();
    let c = column.count();
    let tol = 1e-10 * column.total_feed();
    let x: Vec<Vec<f64>> = match guess {
        Some(g) if g.len() == n && g.iter().all(|r| r.len() == c) => g.to_vec(),
        _ => {
            let top = normalized(column.distillate());
            let bottom = normalized(&column.bottoms());
            let mut x: Vec<Vec<f64>> = (0..n)
                .map(|s| {
                    let t = if n > 1 { s as f64 / (n - 1) as f64 } else { 0.5 };
                    top.iter()
                        .zip(&bottom)
                        .map(|(a, b)| (1.0 - t) * a + t * b + 1e-3)
                        .collect()
                })
                .collect();
            for row in &mut x {
                let t: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= t);
            }
            x
        }
    };
    let (lo, hi) = (lay.alphas[0], lay.alphas[c - 1]);
    let mut t: Vec<f64> = lay.temperatures(&x).into_iter().map(|v| v.clamp(lo, hi)).collect();
    let (mut x, mut g, _) = lay.profiles(&t, false);
    let mut gn = sum_sq_flat(&g);
    let mut iterations = 0;
    let mut norm = max_abs(&lay.residual(&normalize_rows(&x)));
    while norm > tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let (_, _, jac) = lay.profiles(&t, true);
        let step = jac.and_then(|j| j.lu().solve(&DVector::from_iterator(g.len(), g.iter().map(|v| -v))));
        let mut accepted = false;
        if let Some(dt) = step.filter(|d| d.iter().all(|v| v.is_finite())) {
            // keep every temperature within a factor of two of the volatility range
            let mut h: f64 = 1.0;
            for (t, d) in t.iter().zip(dt.iter()) {
                if t + d < 0.5 * lo {
                    h = h.min((t - 0.5 * lo) / -d);
                } else if t + d > 2.0 * hi {
                    h = h.min((2.0 * hi - t) / d);
                }
            }
            let h_min = h / 1024.0;
            while h > h_min {
                let trial: Vec<f64> = t.iter().zip(dt.iter()).map(|(t, d)| t + h * d).collect();
                let (tx, tg, _) = lay.profiles(&trial, false);
                let tn = sum_sq_flat(&tg);
                if tn.is_finite() && tn < (1.0 - 1e-4 * h) * gn {
                    (t, x, g, gn) = (trial, tx, tg, tn);
                    accepted = true;
                    break;
                }
                h *= 0.5;
            }
        }
        if !accepted {
            // successive substitution: temperatures of the normalized profile
            t = lay.temperatures(&x).into_iter().map(|v| v.clamp(lo, hi)).collect();
            (x, g, _) = lay.profiles(&t, false);
            gn = sum_sq_flat(&g);
        }
        norm = max_abs(&lay.residual(&normalize_rows(&x)));
    }
    let x = normalize_rows(&x);
    if !(norm <= tol) {
        return Err(SimError::NotConverged {
            iterations,
            residual: norm,
        });
    }
    let y: Vec<Vec<f64>> = x.iter().map(|x| equilibrium(x, &lay.alphas)).collect();
    let mut products = vec![product("distillate", &y[0], column.distillate_total())];
    for &(j, top, bot) in &lay.draws {
        let flows: Vec<f64> = (0..c)
            .map(|i| lay.side_l[top] * x[top][i] + lay.side_v[bot] * y[bot][i])
            .collect();
        let total: f64 = flows.iter().sum();
        products.push(ProductResult {
            name: column.streams()[j].name.clone(),
            composition: flows.iter().map(|f| f / total).collect(),
            flows,
        });
    }
    products.push(product("bottoms", &x[n - 1], lay.l_out[n - 1]));
    Ok(StageProfile {
        reflux,
        stages_per_section: per_section,
        section: lay.section.clone(),
        x,
        y,
        liquid: lay.liquid[..column.section_count()].to_vec(),
        vapor: lay.vapor[..column.section_count()].to_vec(),
        products,
        residual: norm,
        iterations,
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

fn product(name: &str, comp: &[f64], total: f64) -> ProductResult {
    ProductResult {
        name: name.into(),
        flows: comp.iter().map(|x| x * total).collect(),
        composition: comp.to_vec(),
    }
}

/// How simulated products are compared with the specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Criterion {
    /// At every boundary between consecutive products, the cumulative flow of
    /// the `m` heaviest components above the boundary may exceed the
    /// specification by at most `purity_tol` times the smaller adjacent
    /// product, for every `m < c`.
    Sharpness,
    /// Listed components must stay below `purity_tol` mole fraction in every
    /// product whose specified flow of them is zero.
    TraceImpurities { components: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub feasible: bool,
    /// Largest excess over the allowance; nonpositive when feasible.
    pub worst: f64,
}

/// Specified product flows from the top: distillate, sidedraws, bottoms.
pub fn specified_products(column: &Column) -> Vec<Vec<f64>> {
    let mut out = vec![column.distillate().to_vec()];
    out.extend(
        column
            .streams()
            .iter()
            .filter(|s| s.kind == StreamKind::Sidedraw)
            .map(|s| s.rates()),
    );
    out.push(column.bottoms());
    out
}

pub fn check_products(column: &Column, profile: &StageProfile, criterion: &Criterion, purity_tol: f64) -> ProductCheck {
    let spec = specified_products(column);
    let got: Vec<&Vec<f64>> = profile.products.iter().map(|p| &p.flows).collect();
    let c = column.count();
    let mut worst = f64::NEG_INFINITY;
    match criterion {
        Criterion::Sharpness => {
            let totals: Vec<f64> = spec.iter().map(|p| p.iter().sum()).collect();
            for b in 0..spec.len() - 1 {
                let allowance = purity_tol * totals[b].min(totals[b + 1]);
                let (mut u, mut s) = (0.0, 0.0);
                for m in 0..c - 1 {
                    for p in 0..=b {
                        u += got[p][m];
                        s += spec[p][m];
                    }
                    worst = worst.max(u - s - allowance);
                }
            }
        }
        Criterion::TraceImpurities { components } => {
            for (p, prod) in profile.products.iter().enumerate() {
                for &i in components {
                    if spec[p][i] == 0.0 {
                        worst = worst.max(prod.composition[i] - purity_tol);
                    }
                }
            }
        }
    }
    ProductCheck {
        feasible: worst <= 0.0,
        worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub stages_per_section: usize,
    pub purity_tol: f64,
    /// Final bracket width in reflux ratio.
    pub width: f64,
    pub r_hi: f64,
    pub criterion: Criterion,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            stages_per_section: 50,
            purity_tol: 5e-4,
            width: 1e-3,
            r_hi: 10.0,
            criterion: Criterion::Sharpness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Midpoint of the final bracket.
    pub r_min: f64,
    pub v_reb_min: f64,
    pub r_feasible: f64,
    pub r_infeasible: f64,
    pub simulations: usize,
    /// Runs that did not converge, counted as infeasible.
    pub not_converged: usize,
    pub profile: StageProfile,
}

struct Probe<'a> {
    column: &'a Column,
    config: &'a OracleConfig,
    runs: Vec<(f64, Vec<Vec<f64>>)>,
    simulations: usize,
    not_converged: usize,
}

impl Probe<'_> {
    /// Feasibility at `r`, warm-started from the nearest converged run.
    fn feasible(&mut self, r: f64) -> Option<StageProfile> {
        self.simulations += 1;
        let guess = self
            .runs
            .iter()
            .min_by(|a, b| (a.0 - r).abs().total_cmp(&(b.0 - r).abs()))
            .map(|(_, x)| x.as_slice());
        let n = self.config.stages_per_section;
        let result = simulate_column_from(self.column, r, n, guess);
        match result {
            Ok(p) => {
                self.runs.push((r, p.x.clone()));
                check_products(self.column, &p, &self.config.criterion, self.config.purity_tol)
                    .feasible
                    .then_some(p)
            }
            Err(_) => {
                self.not_converged += 1;
                None
            }
        }
    }
}

/// Smallest reflux ratio whose simulated products meet the specification,
/// by bisection between an infeasible and a feasible reflux.
pub fn min_reflux_by_bisection(column: &Column, config: &OracleConfig) -> Result<OracleResult, SimError> {
    let mut probe = Probe {
        column,
        config,
        runs: Vec::new(),
        simulations: 0,
        not_converged: 0,
    };
    let mut hi = config.r_hi;
    let mut best = loop {
        if let Some(p) = probe.feasible(hi) {
            break p;
        }
        hi *= 2.0;
        if hi > 1000.0 {
            return Err(SimError::BracketFailure(format!(
                "products off specification up to R = {}",
                hi / 2.0
            )));
        }
    };
    let mut lo = hi / 64.0;
    while let Some(p) = probe.feasible(lo) {
        hi = lo;
        best = p;
        lo /= 4.0;
        if lo < 1e-4 {
            return Err(SimError::BracketFailure(
                "products on specification at every reflux tried".into(),
            ));
        }
    }
    while hi - lo > config.width {
        let mid = 0.5 * (lo + hi);
        match probe.feasible(mid) {
            Some(p) => {
                hi = mid;
                best = p;
            }
            None => lo = mid,
        }
    }
    let r_min = 0.5 * (lo + hi);
    Ok(OracleResult {
        r_min,
        v_reb_min: column.reboiler_from_reflux(r_min)?,
        r_feasible: hi,
        r_infeasible: lo,
        simulations: probe.simulations,
        not_converged: probe.not_converged,
        profile: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeOraclePoint {
    pub point: Vec<f64>,
    pub v_reb_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeOracleResult {
    pub v_reb_min: f64,
    pub point: Vec<f64>,
    /// Achieved product flows at the best point.
    pub products: Vec<ProductResult>,
    pub evaluated: Vec<FreeOraclePoint>,
}

/// Simulated minimum reboiler vapor over free product splits: the dofs fix
/// product totals, every component must stay at trace level in each product
/// whose specified flow of it is zero, and the best grid point is refined by
/// coordinate steps down to `min_step` mol/s.
pub fn free_split_oracle(
    fs: &FreeSplitSpec,
    config: &OracleConfig,
    grid: usize,
    min_step: f64,
) -> Result<FreeOracleResult, SimError> {
    let c = fs.base.components.count();
    let components: Vec<usize> = (0..c).collect();
    let cfg = OracleConfig {
        criterion: Criterion::TraceImpurities { components },
        ..config.clone()
    };
    let mut evaluated = Vec::new();
    let mut eval = |x: &[f64]| -> Option<(f64, Vec<ProductResult>)> {
        let out = Column::new(fs.resolve(x))
            .ok()
            .and_then(|col| min_reflux_by_bisection(&col, &cfg).ok())
            .map(|r| (r.profile.v_reb(), r.profile.products.clone()));
        evaluated.push(FreeOraclePoint {
            point: x.to_vec(),
            v_reb_min: out.as_ref().map(|o| o.0),
        });
        out
    };
    let axes: Vec<Vec<f64>> = fs
        .dofs
        .iter()
        .map(|d| {
            if d.width() <= 0.0 {
                vec![d.lower]
            } else {
                (1..grid)
                    .map(|k| d.lower + d.width() * k as f64 / grid as f64)
                    .collect()
            }
        })
        .collect();
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        points = points
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
    let mut best: Option<(f64, Vec<f64>, Vec<ProductResult>)> = None;
    for p in &points {
        if let Some((v, prods)) = eval(p) {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, p.clone(), prods));
            }
        }
    }
    let (mut v, mut x, mut prods) =
        best.ok_or_else(|| SimError::BracketFailure("no free split meets the specification".into()))?;
    let mut step: Vec<f64> = fs.dofs.iter().map(|d| d.width() / grid as f64 / 2.0).collect();
    while step
        .iter()
        .zip(&fs.dofs)
        .any(|(h, d)| d.width() > 0.0 && *h >= min_step)
    {
        let mut improved = false;
        for k in 0..x.len() {
            if fs.dofs[k].width() <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] = (x[k] + dir * step[k]).clamp(fs.dofs[k].lower, fs.dofs[k].upper);
                if let Some((vy, py)) = eval(&y) {
                    if vy < v {
                        (v, x, prods) = (vy, y, py);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|h| *h /= 2.0);
        }
    }
    Ok(FreeOracleResult {
        v_reb_min: v,
        point: x,
        products: prods,
        evaluated,
    })
}

/// Candidate pinch compositions of one section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchGeometry {
    pub section: usize,
    /// One composition per root, in root order.
    pub vertices: Vec<Vec<f64>>,
    /// Index of the vertex belonging to the pinch root.
    pub pinch_vertex: usize,
    /// Largest stage-map fixed-point residual over the vertices.
    pub fixed_point_residual: f64,
}

/// Pinch compositions `Z_r,m = gamma_r d_m / (L (alpha_m - gamma_r))`. At a
/// root pinned to `alpha_i` the component `i` takes the balance `1 - sum`
/// of the others, which is the limit of the formula along the section.
pub fn pinch_compositions(state: &SectionState, alphas: &[f64]) -> Result<PinchGeometry, SimError> {
    let d = &state.net_flows;
    let l = state.liquid();
    if l.abs() <= 1e-12 * state.vapor.abs() {
        return Err(SimError::DegenerateSection {
            section: state.index + 1,
        });
    }
    let c = alphas.len();
    let mut vertices = Vec::with_capacity(c);
    let mut worst = 0.0f64;
    for (&g, loc) in state.roots.values().iter().zip(state.roots.locations()) {
        let pinned = match loc {
            Location::AtAlpha(i) => Some(*i - 1),
            Location::Interval(_) => None,
        };
        let mut z: Vec<f64> = (0..c)
            .map(|m| {
                if Some(m) == pinned {
                    0.0
                } else {
                    g * d[m] / (l * (alphas[m] - g))
                }
            })
            .collect();
        if let Some(i) = pinned {
            z[i] = 1.0 - z.iter().sum::<f64>();
        }
        let y = operating_vapor(&z, l, state.vapor, d)?;
        let back = inverse_equilibrium(&y, alphas);
        worst = worst.max(z.iter().zip(&back).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
        vertices.push(z);
    }
    Ok(PinchGeometry {
        section: state.index + 1,
        vertices,
        pinch_vertex: state.roots.pinch_index(),
        fixed_point_residual: worst,
    })
}

/// Equilateral-triangle coordinates: component 1 at (0, 0), component 2 at
/// (1, 0) and component 3 at (1/2, sqrt(3)/2).
pub fn ternary(x: &[f64]) -> Result<(f64, f64), SimError> {
    if x.len() != 3 {
        return Err(SimError::NotTernary(x.len()));
    }
    let t: f64 = x.iter().sum();
    Ok(((x[1] + 0.5 * x[2]) / t, 3f64.sqrt() / 2.0 * x[2] / t))
}
