//! Roots of the section characteristic equation
//! `sum_i alpha_i d_i / (alpha_i - gamma) = V` and of the stream equations,
//! plus the pinch-interval indicators derived from them.
//!
//! Every root is bracketed between consecutive poles before refinement, so the
//! solvers never step across a pole.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::{ColumnError, Stream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("section vapor flow {0} is not positive")]
    NonpositiveV(f64),
    #[error("no root bracket on ({lo}, {hi}): {detail}")]
    BracketFailure { lo: f64, hi: f64, detail: String },
    #[error("all net flows are zero")]
    AllZeroFlows,
    #[error("stream has no nonzero component flow")]
    EmptyStream,
    #[error(transparent)]
    Column(#[from] ColumnError),
}

/// Where a root sits relative to the volatilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// Strictly inside `(alpha_{i-1}, alpha_i)`, one-based `i` in `1..=c+1`.
    Interval(usize),
    /// Exactly at `alpha_i`.
    AtAlpha(usize),
}

/// The `c` roots of one section, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    values: Vec<f64>,
    pinned: Vec<bool>,
    locations: Vec<Location>,
    /// Zero-based index of the pinch root in `values`.
    pinch: usize,
    /// True when a pinned root ties with a solved root.
    tie: bool,
}

impl RootSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Zero-based position of the pinch root.
    pub fn pinch_index(&self) -> usize {
        self.pinch
    }

    pub fn pinch_root(&self) -> f64 {
        self.values[self.pinch]
    }

    /// One-based interval holding the pinch root.
    pub fn pinch_interval(&self) -> usize {
        match self.locations[self.pinch] {
            Location::Interval(i) | Location::AtAlpha(i) => i,
        }
    }

    pub fn has_tie(&self) -> bool {
        self.tie
    }
}

/// `sum alpha_i d_i / (alpha_i - gamma)` over nonzero `d_i`.
pub fn characteristic(d: &[f64], alphas: &[f64], gamma: f64) -> f64 {
    d.iter()
        .zip(alphas)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, a)| a * d / (a - gamma))
        .sum()
}

fn characteristic_slope(d: &[f64], alphas: &[f64], gamma: f64) -> f64 {
    d.iter()
        .zip(alphas)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, a)| a * d / ((a - gamma) * (a - gamma)))
        .sum()
}

/// Location of `g` with respect to `alphas`.
pub fn locate(alphas: &[f64], g: f64) -> Location {
    for (k, &a) in alphas.iter().enumerate() {
        if g == a {
            return Location::AtAlpha(k + 1);
        }
        if g < a {
            return Location::Interval(k + 1);
        }
    }
    Location::Interval(alphas.len() + 1)
}

/// Brent's method on a bracket with `fa` and `fb` of opposite sign.
fn brent<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

/// Moves an endpoint toward the pole at `pole` until `f` has the wanted sign.
fn near_pole<F: Fn(f64) -> f64>(f: &F, pole: f64, inward: f64, width: f64, want_positive: bool) -> Option<(f64, f64)> {
    let mut eps = 1e-13 * width;
    for _ in 0..40 {
        let x = pole + inward * eps;
        if x != pole {
            let fx = f(x);
            if (fx > 0.0) == want_positive && fx != 0.0 {
                return Some((x, fx));
            }
        }
        eps *= 1e-2;
        if eps < f64::MIN_POSITIVE {
            break;
        }
    }
    None
}

fn solve_bracket<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    lo_positive: bool,
    hi_positive: bool,
    width: f64,
) -> Result<f64, RootError> {
    let fail = |detail: &str| RootError::BracketFailure {
        lo,
        hi,
        detail: detail.to_string(),
    };
    let (a, fa) = near_pole(f, lo, 1.0, width, lo_positive).ok_or_else(|| fail("lower endpoint sign"))?;
    let (b, fb) = near_pole(f, hi, -1.0, width, hi_positive).ok_or_else(|| fail("upper endpoint sign"))?;
    Ok(brent(f, a, b, fa, fb, 1e-15 * width))
}

/// Solves the characteristic equation of a section. Components with zero net
/// flow contribute roots pinned at their volatility; the remaining roots come
/// from the reduced equation and are merged by ascending sort.
pub fn solve_characteristic(d: &[f64], v: f64, alphas: &[f64]) -> Result<RootSet, RootError> {
    if !(v > 0.0) {
        return Err(RootError::NonpositiveV(v));
    }
    let nz: Vec<usize> = (0..d.len()).filter(|&i| d[i] != 0.0).collect();
    if nz.is_empty() {
        return Err(RootError::AllZeroFlows);
    }
    let f = |g: f64| characteristic(d, alphas, g) - v;
    let mut solved: Vec<f64> = Vec::with_capacity(nz.len());

    let first = nz[0];
    if d[first] > 0.0 {
        let lo = 0.0;
        let hi = alphas[first];
        let f0 = f(lo);
        if f0 >= 0.0 {
            return Err(RootError::BracketFailure {
                lo,
                hi,
                detail: format!("no root below the heaviest present component: F(0) - V = {f0}"),
            });
        }
        let (b, fb) = near_pole(&f, hi, -1.0, hi, true).ok_or(RootError::BracketFailure {
            lo,
            hi,
            detail: "upper endpoint sign".into(),
        })?;
        solved.push(brent(&f, lo, b, f0, fb, 1e-15 * hi));
    }

    for w in nz.windows(2) {
        let (ia, ib) = (w[0], w[1]);
        let (lo, hi) = (alphas[ia], alphas[ib]);
        let width = hi - lo;
        if d[ia] < 0.0 && d[ib] > 0.0 {
            // F is convex here and tends to +inf at both poles.
            let slope = |g: f64| characteristic_slope(d, alphas, g);
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if slope(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm > 0.0 {
                if fm <= 1e-12 * v {
                    solved.push(m);
                    solved.push(m);
                    continue;
                }
                return Err(RootError::BracketFailure {
                    lo,
                    hi,
                    detail: format!("no real roots: minimum of F - V is {fm}"),
                });
            }
            let (pa, fpa) = near_pole(&f, lo, 1.0, width, true).ok_or(RootError::BracketFailure {
                lo,
                hi,
                detail: "lower endpoint sign".into(),
            })?;
            let (pb, fpb) = near_pole(&f, hi, -1.0, width, true).ok_or(RootError::BracketFailure {
                lo,
                hi,
                detail: "upper endpoint sign".into(),
            })?;
            solved.push(if fm == 0.0 {
                m
            } else {
                brent(&f, pa, m, fpa, fm, 1e-15 * width)
            });
            solved.push(if fm == 0.0 {
                m
            } else {
                brent(&f, m, pb, fm, fpb, 1e-15 * width)
            });
        } else {
            // (+,+): -inf to +inf; (-,-): +inf to -inf
            let rising = d[ia] > 0.0;
            solved.push(solve_bracket(&f, lo, hi, !rising, rising, width)?);
        }
    }

    let last = nz[nz.len() - 1];
    if d[last] < 0.0 {
        let lo = alphas[last];
        let amax = alphas[alphas.len() - 1];
        let spread: f64 = d.iter().zip(alphas).map(|(d, a)| a * d.abs()).sum::<f64>() / v.max(f64::MIN_POSITIVE);
        let mut delta = 10.0 * (amax + spread);
        let mut hi = lo + delta;
        let mut fhi = f(hi);
        let mut doublings = 0;
        while fhi >= 0.0 {
            delta *= 2.0;
            hi = lo + delta;
            fhi = f(hi);
            doublings += 1;
            if doublings > 200 {
                return Err(RootError::BracketFailure {
                    lo,
                    hi,
                    detail: "upper extension did not bracket the root".into(),
                });
            }
        }
        let (a, fa) = near_pole(&f, lo, 1.0, delta.min(lo.max(1.0)), true).ok_or(RootError::BracketFailure {
            lo,
            hi,
            detail: "lower endpoint sign".into(),
        })?;
        solved.push(brent(&f, a, hi, fa, fhi, 1e-15 * (hi - lo)));
    }

    // pinch root of the reduced equation
    let pinch_value = match nz.iter().find(|&&i| d[i] > 0.0) {
        Some(&l) => solved
            .iter()
            .copied()
            .filter(|g| *g < alphas[l])
            .fold(f64::NEG_INFINITY, f64::max),
        None => {
            let h = last;
            solved
                .iter()
                .copied()
                .filter(|g| *g > alphas[h])
                .fold(f64::INFINITY, f64::min)
        }
    };
    debug_assert!(pinch_value.is_finite());

    let mut entries: Vec<(f64, bool)> = solved.into_iter().map(|g| (g, false)).collect();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            entries.push((alphas[i], true));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tie = entries.windows(2).any(|w| w[0].0 == w[1].0 && (w[0].1 || w[1].1));
    let pinch = entries
        .iter()
        .rposition(|(g, pinned)| !pinned && *g == pinch_value)
        .expect("pinch root is among the solved roots");
    let values: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let pinned: Vec<bool> = entries.iter().map(|e| e.1).collect();
    let locations = values.iter().map(|&g| locate(alphas, g)).collect();
    Ok(RootSet {
        values,
        pinned,
        locations,
        pinch,
        tie,
    })
}

/// One-hot pinch-interval indicator `mu` and its prefix sum `k`, both of
/// length `c + 1`; entry `i - 1` belongs to interval `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicators {
    pub mu: Vec<u8>,
    pub k: Vec<u8>,
}

impl Indicators {
    pub fn from_interval(p: usize, c: usize) -> Self {
        assert!((1..=c + 1).contains(&p), "pinch interval out of range");
        let mu: Vec<u8> = (1..=c + 1).map(|i| u8::from(i == p)).collect();
        let k = (1..=c + 1).map(|i| u8::from(i >= p)).collect();
        Self { mu, k }
    }

    /// One-based pinch interval.
    pub fn pinch_interval(&self) -> usize {
        self.mu.iter().position(|m| *m == 1).expect("one-hot") + 1
    }

    /// `mu_i` for one-based `i`.
    pub fn mu_at(&self, i: usize) -> u8 {
        self.mu[i - 1]
    }

    /// `K_i` for one-based `i` in `1..=c+1`; `K_0 = 0`.
    pub fn k_at(&self, i: usize) -> u8 {
        if i == 0 {
            0
        } else {
            self.k[i - 1]
        }
    }
}

pub fn classify_and_indicators(roots: &RootSet, c: usize) -> Indicators {
    Indicators::from_interval(roots.pinch_interval(), c)
}

/// Pinch interval implied by the sign pattern alone: interval `l` when some
/// net flow is positive (first positive component `l`), else `h + 1` for the
/// last negative component `h`.
pub fn pinch_interval_from_signs(d: &[f64]) -> Option<usize> {
    if let Some(l) = d.iter().position(|x| *x > 0.0) {
        Some(l + 1)
    } else {
        d.iter().rposition(|x| *x < 0.0).map(|h| h + 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootForm {
    /// `sum alpha_m l_m / (alpha_m - rho) = 0` on the liquid-equivalent flows.
    Liquid,
    /// `sum alpha_m f_m / (alpha_m - rho) = V_stream` on the total flows.
    FullStream,
}

/// Stream roots keyed by `j`, where `rho_j` lies in `(alpha_j, alpha_{j+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRoots {
    pub rho: BTreeMap<usize, f64>,
    pub form: RootForm,
}

impl StreamRoots {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.rho.get(&j).copied()
    }
}

fn interval_key(alphas: &[f64], g: f64) -> Option<usize> {
    match locate(alphas, g) {
        Location::Interval(i) if i >= 2 && i <= alphas.len() => Some(i - 1),
        _ => None,
    }
}

/// Stream roots from the liquid-equivalent composition.
pub fn solve_stream_roots(stream: &Stream, alphas: &[f64]) -> Result<StreamRoots, RootError> {
    if stream.flows.iter().all(|f| *f == 0.0) {
        return Err(RootError::EmptyStream);
    }
    let w = stream.liquid_equivalent(alphas).map_err(|e| match e {
        ColumnError::ZeroVapor => RootError::EmptyStream,
        other => RootError::Column(other),
    })?;
    let wmax = w.iter().copied().fold(0.0, f64::max);
    if wmax <= 0.0 {
        return Err(RootError::EmptyStream);
    }
    let w: Vec<f64> = w.iter().map(|x| if *x > 1e-14 * wmax { *x } else { 0.0 }).collect();
    let present: Vec<usize> = (0..w.len()).filter(|&m| w[m] > 0.0).collect();
    let g = |r: f64| characteristic(&w, alphas, r);
    let mut rho = BTreeMap::new();
    for p in present.windows(2) {
        let (lo, hi) = (alphas[p[0]], alphas[p[1]]);
        let r = solve_bracket(&g, lo, hi, false, true, hi - lo)?;
        if let Some(j) = interval_key(alphas, r) {
            rho.insert(j, r);
        }
    }
    Ok(StreamRoots {
        rho,
        form: RootForm::Liquid,
    })
}

/// Stream roots of the full-stream equation. The extra root that appears for
/// vapor-bearing streams lies at `rho <= 0`, outside every admissible
/// interval, and is not returned.
pub fn solve_stream_roots_full(stream: &Stream, alphas: &[f64]) -> Result<StreamRoots, RootError> {
    let fmax = stream.flows.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if fmax <= 0.0 {
        return Err(RootError::EmptyStream);
    }
    let f: Vec<f64> = stream
        .flows
        .iter()
        .map(|x| if x.abs() > 1e-14 * fmax { *x } else { 0.0 })
        .collect();
    let vs = stream.total_vapor();
    let present: Vec<usize> = (0..f.len()).filter(|&m| f[m] != 0.0).collect();
    let sign = if stream.flows.iter().sum::<f64>() > 0.0 {
        1.0
    } else {
        -1.0
    };
    let g = |r: f64| sign * (characteristic(&f, alphas, r) - vs);
    let mut rho = BTreeMap::new();
    for p in present.windows(2) {
        let (lo, hi) = (alphas[p[0]], alphas[p[1]]);
        let r = solve_bracket(&g, lo, hi, false, true, hi - lo)?;
        if let Some(j) = interval_key(alphas, r) {
            rho.insert(j, r);
        }
    }
    Ok(StreamRoots {
        rho,
        form: RootForm::FullStream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Plain bisection on a bracket, used as an independent oracle.
    fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..400 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    const A5: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

    #[test]
    fn figure_two_top_section() {
        let d = [-0.4, 0.1, 0.2, 0.3, 0.2];
        let rs = solve_characteristic(&d, 8.0, &A5).unwrap();
        assert_eq!(rs.pinch_interval(), 2);
        let f = |g: f64| characteristic(&d, &A5, g) - 8.0;
        // mixed pair in (1,2) and one root in each of (2,3),(3,4),(4,5)
        let v = rs.values();
        assert!(v[0] > 1.0 && v[1] < 2.0);
        for (k, (lo, hi)) in [(2.0, 3.0), (3.0, 4.0), (4.0, 5.0)].iter().enumerate() {
            let oracle = bisect(f, lo + 1e-12, hi - 1e-12);
            assert_relative_eq!(v[k + 2], oracle, epsilon = 1e-11);
        }
        for g in v {
            assert!(f(*g).abs() <= 1e-8 * 8.0);
        }
    }

    #[test]
    fn figure_two_bottom_section() {
        let d = [-0.5, -0.4, -0.3, 0.2, 0.1];
        let rs = solve_characteristic(&d, 8.0, &A5).unwrap();
        assert_eq!(rs.pinch_interval(), 4);
        let ind = classify_and_indicators(&rs, 5);
        assert_eq!(ind.mu, vec![0, 0, 0, 1, 0, 0]);
        assert_eq!(ind.k, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn pinned_root_tie_at_boundary() {
        // 2*5/(2-g) = 10 gives g = 1, which ties with the pinned root at alpha_1
        let rs = solve_characteristic(&[0.0, 5.0], 10.0, &[1.0, 2.0]);
        match rs {
            Ok(rs) => {
                assert_relative_eq!(rs.values()[0], 1.0, epsilon = 1e-12);
                assert_relative_eq!(rs.values()[1], 1.0, epsilon = 1e-12);
                assert!(rs.pinned()[0] || rs.pinned()[1]);
            }
            Err(e) => panic!("tie case failed: {e}"),
        }
    }

    #[test]
    fn single_term_closed_form() {
        let alphas = [1.0, 2.0, 4.0];
        let d = [0.0, 0.0, 3.0];
        let v = 8.0;
        let rs = solve_characteristic(&d, v, &alphas).unwrap();
        let expect = 4.0 * (1.0 - 3.0 / v);
        assert_relative_eq!(rs.pinch_root(), expect, epsilon = 1e-13);
        assert_eq!(rs.pinned(), &[true, true, false]);
    }

    #[test]
    fn all_negative_pinch_in_top_interval() {
        let alphas = [1.0, 2.0, 4.0];
        let rs = solve_characteristic(&[-1.0, -2.0, -3.0], 5.0, &alphas).unwrap();
        assert_eq!(rs.pinch_interval(), 4);
        let ind = classify_and_indicators(&rs, 3);
        assert_eq!(ind.k, vec![0, 0, 0, 1]);
        assert!(rs.pinch_root() > 4.0);
    }

    #[test]
    fn all_positive_needs_positive_liquid() {
        let alphas = [1.0, 2.0];
        assert!(matches!(
            solve_characteristic(&[1.0, 1.0], 1.5, &alphas),
            Err(RootError::BracketFailure { .. })
        ));
        let rs = solve_characteristic(&[1.0, 1.0], 3.0, &alphas).unwrap();
        assert_eq!(rs.pinch_interval(), 1);
    }

    #[test]
    fn nonpositive_v_rejected() {
        assert_eq!(
            solve_characteristic(&[1.0, 1.0], 0.0, &[1.0, 2.0]),
            Err(RootError::NonpositiveV(0.0))
        );
    }

    #[test]
    fn mixed_pair_without_real_roots() {
        // F has a positive minimum above V in the mixed interval
        let alphas = [1.0, 2.0];
        assert!(matches!(
            solve_characteristic(&[-10.0, 10.0], 1.0, &alphas),
            Err(RootError::BracketFailure { .. })
        ));
    }

    #[test]
    fn sign_pattern_pinch_interval() {
        assert_eq!(pinch_interval_from_signs(&[0.0, 6.0, 24.0]), Some(2));
        assert_eq!(pinch_interval_from_signs(&[-30.0, -10.0, 0.0]), Some(3));
        assert_eq!(pinch_interval_from_signs(&[-1.0, -1.0, -1.0]), Some(4));
        assert_eq!(pinch_interval_from_signs(&[0.0, 0.0]), None);
    }

    #[test]
    fn stream_roots_example3() {
        let alphas = [1.0, 2.3, 5.361, 12.332];
        let f2 = Stream::liquid_feed("F2", &[30.0, 30.0, 40.0, 0.0]);
        let r = solve_stream_roots(&f2, &alphas).unwrap();
        assert_eq!(r.rho.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
        let s1 = Stream::liquid_sidedraw("S1", &[0.0, 40.0, 30.0, 0.0]);
        let r = solve_stream_roots(&s1, &alphas).unwrap();
        assert_eq!(r.rho.keys().copied().collect::<Vec<_>>(), vec![2]);
        let f1 = Stream::vapor_feed("F1", &[0.0, 40.0, 30.0, 30.0]);
        let liq = solve_stream_roots(&f1, &alphas).unwrap();
        let full = solve_stream_roots_full(&f1, &alphas).unwrap();
        assert_eq!(liq.rho.keys().copied().collect::<Vec<_>>(), vec![2, 3]);
        for (j, r) in &liq.rho {
            assert_relative_eq!(*r, full.rho[j], max_relative = 1e-9);
        }
    }

    #[test]
    fn empty_stream_rejected() {
        let s = Stream::liquid_feed("E", &[0.0, 0.0]);
        assert_eq!(solve_stream_roots(&s, &[1.0, 2.0]), Err(RootError::EmptyStream));
    }
}
