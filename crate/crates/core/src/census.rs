//! Limit cycles as fixed points of the return map, the no-cycle
//! certificate for odd parts with a single root, the parity law around the
//! homoclinic parameter, the Hopf cycle and the small-eps separatrix limits.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{linearization_at_origin, OdeConfig, SystemParams};
use crate::poly::{half_line_minima, odd_unique_root, Poly};
use crate::scalar::Real;
use crate::section::{linspace, return_map, scan, ReturnSample};
use crate::separatrix::{
    both_intersections, find_d0, FindD0Options, SeparatrixResult, ShootConfig,
};

/// Width to which sign changes of the displacement are bisected.
pub const REFINE_TOL: f64 = 1e-10;
/// |p' - 1| below this sends a cycle to the one-sided sign test.
pub const KAPPA: f64 = 1e-3;
/// |δ| local minima below this are probed for tangential (semi-stable) cycles.
pub const SEMI_STABLE_THRESHOLD: f64 = 1e-6;
/// Every returned |δ| at or below this (relative) marks a period annulus.
pub const CENTER_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    SemiStable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
            Stability::SemiStable => "SemiStable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(count: usize) -> Self {
        if count.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "Even",
            Parity::Odd => "Odd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord<T> {
    pub y_star: T,
    pub stability: Stability,
    pub bracket: (T, T),
    pub p_prime: T,
    pub period: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport<T> {
    /// Sorted by |y_star| ascending.
    pub cycles: Vec<CycleRecord<T>>,
    pub scan_range: (T, T),
    pub n_samples: usize,
    pub no_return_fraction: T,
    pub parity: Parity,
    /// δ vanished on every returned sample: a period annulus, not "no cycles".
    pub center_detected: bool,
}

impl<T: Real> CensusReport<T> {
    pub fn count(&self) -> usize {
        self.cycles.len()
    }
}

fn delta<T: Real>(s: &ReturnSample<T>) -> Option<T> {
    s.displacement().ok()
}

fn classify<T: Real>(
    params: &SystemParams<T>,
    y_star: T,
    p_prime: T,
    bracket: (T, T),
    config: &OdeConfig<T>,
) -> Stability {
    let k = T::of(KAPPA);
    if p_prime < T::one() - k {
        return Stability::Stable;
    }
    if p_prime > T::one() + k {
        return Stability::Unstable;
    }
    // Nearly tangent: look at the displacement on either side.
    let h = ((bracket.1 - bracket.0).abs() * T::of(8.0)).max(T::of(1e-6) * y_star.abs().max(T::one()));
    let outer = return_map(params, y_star - h, config).ok().as_ref().and_then(delta);
    let inner = return_map(params, y_star + h, config).ok().as_ref().and_then(delta);
    match (outer, inner) {
        // outside pushed inward and inside pushed outward
        (Some(o), Some(i)) if o > T::zero() && i < T::zero() => Stability::Stable,
        (Some(o), Some(i)) if o < T::zero() && i > T::zero() => Stability::Unstable,
        (Some(_), Some(_)) => Stability::SemiStable,
        _ if p_prime < T::one() => Stability::Stable,
        _ => Stability::Unstable,
    }
}

/// Bisects a sign change of δ on [ya, yb] and classifies the cycle.
fn refine<T: Real>(
    params: &SystemParams<T>,
    (mut ya, mut da): (T, T),
    (mut yb, _db): (T, T),
    config: &OdeConfig<T>,
) -> Result<CycleRecord<T>> {
    let tol = T::of(REFINE_TOL);
    while (yb - ya).abs() > tol {
        let mid = (ya + yb) / T::of(2.0);
        if mid == ya || mid == yb {
            break;
        }
        let dm = return_map(params, mid, config)?.displacement()?;
        if dm == T::zero() {
            ya = mid;
            yb = mid;
            break;
        }
        if (dm > T::zero()) == (da > T::zero()) {
            ya = mid;
            da = dm;
        } else {
            yb = mid;
        }
    }
    let y_star = (ya + yb) / T::of(2.0);
    let s = return_map(params, y_star, config)?;
    let p_prime = s.derivative()?;
    let bracket = (ya.min(yb), ya.max(yb));
    Ok(CycleRecord {
        y_star,
        stability: classify(params, y_star, p_prime, bracket, config),
        bracket,
        p_prime,
        period: s.t_return,
    })
}

/// Looks for a tangential cycle around a small local minimum of |δ|.
fn probe_tangency<T: Real>(
    params: &SystemParams<T>,
    lo: T,
    hi: T,
    config: &OdeConfig<T>,
) -> Result<Vec<CycleRecord<T>>> {
    let grid = linspace(lo, hi, 17);
    let rows: Vec<(T, T)> = scan(params, &grid, config)
        .into_iter()
        .filter_map(|r| r.ok())
        .filter_map(|s| delta(&s).map(|d| (s.y0, d)))
        .collect();
    let mut found = Vec::new();
    for w in rows.windows(2) {
        if (w[0].1 > T::zero()) != (w[1].1 > T::zero()) {
            found.push(refine(params, w[0], w[1], config)?);
        }
    }
    if !found.is_empty() {
        return Ok(found);
    }
    let Some(&(y_min, d_min)) = rows
        .iter()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
    else {
        return Ok(found);
    };
    if d_min.abs() <= T::of(1e-8) * y_min.abs().max(T::one()) {
        let s = return_map(params, y_min, config)?;
        found.push(CycleRecord {
            y_star: y_min,
            stability: Stability::SemiStable,
            bracket: (lo, hi),
            p_prime: s.derivative()?,
            period: s.t_return,
        });
    }
    Ok(found)
}

/// Cycles crossing the section inside (y_min, y_max).
pub fn census<T: Real>(
    params: &SystemParams<T>,
    y_min: T,
    y_max: T,
    n_samples: usize,
    config: &OdeConfig<T>,
) -> Result<CensusReport<T>> {
    params.validate()?;
    if !(y_min < y_max && y_max < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "census range must satisfy y_min < y_max < 0, got ({y_min}, {y_max})"
        )));
    }
    if n_samples < 16 {
        return Err(Error::InvalidParameter(format!(
            "census needs at least 16 samples, got {n_samples}"
        )));
    }
    let grid = linspace(y_min, y_max, n_samples);
    let samples: Vec<Option<ReturnSample<T>>> = scan(params, &grid, config)
        .into_iter()
        .map(|r| r.ok())
        .collect();
    let no_return = samples
        .iter()
        .filter(|s| !s.as_ref().is_some_and(|s| s.returned()))
        .count();
    let rows: Vec<Option<(T, T)>> = samples
        .iter()
        .map(|s| s.as_ref().and_then(|s| delta(s).map(|d| (s.y0, d))))
        .collect();

    let returned: Vec<(T, T)> = rows.iter().flatten().copied().collect();
    let center_detected = !returned.is_empty()
        && returned
            .iter()
            .all(|&(y, d)| d.abs() <= T::of(CENTER_THRESHOLD) * y.abs().max(T::one()));

    let mut cycles = Vec::new();
    if !center_detected {
        let mut sign_changes = Vec::new();
        let mut tangencies = Vec::new();
        for i in 0..rows.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (rows[i], rows[i + 1]) {
                if (a.1 > T::zero()) != (b.1 > T::zero()) {
                    sign_changes.push((a, b));
                }
            }
            if i > 0 {
                if let (Some(p), Some(c), Some(n)) = (rows[i - 1], rows[i], rows[i + 1]) {
                    let same = (p.1 > T::zero()) == (c.1 > T::zero())
                        && (c.1 > T::zero()) == (n.1 > T::zero());
                    let small = c.1.abs() < T::of(SEMI_STABLE_THRESHOLD);
                    if same && small && c.1.abs() <= p.1.abs() && c.1.abs() <= n.1.abs() {
                        tangencies.push((p.0, n.0));
                    }
                }
            }
        }
        let refined: Vec<Result<CycleRecord<T>>> = sign_changes
            .par_iter()
            .map(|&(a, b)| refine(params, a, b, config))
            .collect();
        for r in refined {
            match r {
                Ok(c) => cycles.push(c),
                Err(e) => log::warn!("dropping a sign change that failed to refine: {e}"),
            }
        }
        let probed: Vec<Result<Vec<CycleRecord<T>>>> = tangencies
            .par_iter()
            .map(|&(lo, hi)| probe_tangency(params, lo, hi, config))
            .collect();
        for r in probed {
            match r {
                Ok(c) => cycles.extend(c),
                Err(e) => log::warn!("tangency probe failed: {e}"),
            }
        }
    }
    cycles.sort_by(|a, b| a.y_star.abs().partial_cmp(&b.y_star.abs()).unwrap());
    Ok(CensusReport {
        parity: Parity::of(cycles.len()),
        cycles,
        scan_range: (y_min, y_max),
        n_samples,
        no_return_fraction: T::count(no_return) / T::count(n_samples),
        center_detected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma1 {
    /// The odd part has a single real root (at 0): no closed orbits.
    Certified,
    NotApplicable,
}

impl fmt::Display for Lemma1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lemma1::Certified => "Certified",
            Lemma1::NotApplicable => "NotApplicable",
        })
    }
}

/// No-cycle certificate from the even/odd split F = E + O.
pub fn lemma1_certificate<T: Real>(f: &Poly<T>) -> Lemma1 {
    let (_, odd) = f.even_odd();
    match odd_unique_root(&odd) {
        Ok(true) if !odd.is_zero() => Lemma1::Certified,
        _ => Lemma1::NotApplicable,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityReport<T> {
    pub d: T,
    pub count: usize,
    pub parity: Parity,
    pub d0: T,
    pub consistent: bool,
    pub census: CensusReport<T>,
}

/// Cycle count of F = a x^4 + b x^3 + c x^2 + d x inside the homoclinic
/// crossing, checked against the parity predicted by the side of d0.
pub fn parity_report<T: Real>(
    a: T,
    b: T,
    c: T,
    d: T,
    n_samples: usize,
    homoclinic: &FindD0Options<T>,
    config: &OdeConfig<T>,
) -> Result<ParityReport<T>> {
    if !(a > T::zero() && b >= T::zero() && d < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "parity report needs a > 0, b >= 0, d < 0; got a = {a}, b = {b}, d = {d}"
        )));
    }
    let h = find_d0(a, b, c, homoclinic)?;
    let params = SystemParams::new(Poly::quartic(a, b, c, d));
    let report = census(&params, h.p0 * T::of(0.999), T::of(-1e-3), n_samples, config)?;
    let count = report.count();
    let parity = Parity::of(count);
    let consistent = if d <= h.d0 {
        parity == Parity::Even
    } else {
        parity == Parity::Odd
    };
    Ok(ParityReport {
        d,
        count,
        parity,
        d0: h.d0,
        consistent,
        census: report,
    })
}

/// The small cycle born from the origin at d = -0.01.
pub fn hopf_probe<T: Real>(a: T, b: T, c: T, config: &OdeConfig<T>) -> Result<Option<CycleRecord<T>>> {
    hopf_probe_at(a, b, c, T::of(-0.01), config)
}

/// Census over (-0.5, -1e-4) at the given d; one cycle or none, anything
/// else is reported as a count mismatch.
pub fn hopf_probe_at<T: Real>(
    a: T,
    b: T,
    c: T,
    d: T,
    config: &OdeConfig<T>,
) -> Result<Option<CycleRecord<T>>> {
    if !(a > T::zero() && b > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "Hopf probe needs a > 0 and b > 0 (b = 0 is the center line); got a = {a}, b = {b}"
        )));
    }
    let params = SystemParams::new(Poly::quartic(a, b, c, d));
    let report = census(&params, T::of(-0.5), T::of(-1e-4), 128, config)?;
    match report.cycles.as_slice() {
        [] => Ok(None),
        [one] => Ok(Some(*one)),
        more => Err(Error::CountMismatch { found: more.len() }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRow<T> {
    pub eps: T,
    pub u: Result<SeparatrixResult<T>>,
    pub s: Result<SeparatrixResult<T>>,
    pub m_plus: T,
    pub m_minus: T,
}

/// Separatrix crossings for decreasing eps next to the half-line minima
/// they approach as eps -> 0.
pub fn epsilon_limit_check<T: Real>(
    f: &Poly<T>,
    eps_list: &[T],
    cfg: &ShootConfig<T>,
) -> Result<Vec<EpsRow<T>>> {
    let minima = half_line_minima(f)?;
    if eps_list.iter().any(|&e| !(e > T::zero())) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(
            "eps list must be positive and strictly decreasing".into(),
        ));
    }
    Ok(eps_list
        .par_iter()
        .map(|&eps| {
            let p = SystemParams::new(f.clone()).with_eps(eps);
            let (u, s) = match both_intersections(&p, cfg) {
                Ok((u, s)) => (Ok(u), Ok(s)),
                Err(_) => (
                    crate::separatrix::unstable_intersection(&p, cfg),
                    crate::separatrix::stable_intersection(&p, cfg),
                ),
            };
            EpsRow {
                eps,
                u,
                s,
                m_plus: minima.m_plus,
                m_minus: minima.m_minus,
            }
        })
        .collect())
}

/// Innermost cycle attracts exactly when the origin repels.
pub fn innermost_matches_origin<T: Real>(params: &SystemParams<T>, report: &CensusReport<T>) -> bool {
    let lin = linearization_at_origin(params);
    match report.cycles.first() {
        None => true,
        Some(c) if lin.is_unstable() => c.stability == Stability::Stable,
        Some(c) if lin.is_stable() => c.stability == Stability::Unstable,
        Some(_) => true,
    }
}
