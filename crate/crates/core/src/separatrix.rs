//! Separatrices of the saddle at infinity and the homoclinic loop.
//!
//! The stable separatrix S hugs the graph of F for x -> -inf and the
//! unstable one U for x -> +inf. Both are shot from a seed placed exactly
//! on the graph at |x| = x_far, traced in the time direction in which the
//! field contracts transversally, until they meet the y-axis. The far-field
//! contraction is so strong that the seed offset is forgotten long before
//! the axis; doubling x_far measures what is left.
//!
//! For the quartic family F = a x^4 + b x^3 + c x^2 + d x with a > 0 the
//! difference h(d) = U(d) - S(d) is increasing in d and has a single root
//! d0, the parameter of the homoclinic loop.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{
    flow, linearization_at_origin, Direction, EventKind, EventSpec, OdeConfig, PhaseState,
    Record, Reparam, Sense, SystemParams, TerminalEvent,
};
use crate::poly::Poly;
use crate::scalar::Real;
use crate::section::{return_map, section_config, ReturnSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Asymptotic to the graph of F as x -> -inf; meets the axis at S.
    Stable,
    /// Asymptotic to the graph of F as x -> +inf; meets the axis at U.
    Unstable,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Stable => "Stable",
            Branch::Unstable => "Unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixResult<T> {
    /// Crossing with the negative y-axis.
    pub value: T,
    /// Cutoff the reported value was shot from.
    pub x_far: T,
    /// |change| under the last cutoff doubling plus |change| when the last
    /// shoot is repeated at ten times looser tolerances.
    pub err_est: T,
    pub branch: Branch,
    /// The branch ran into the origin before meeting the axis; `value` is 0.
    pub captured: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootConfig<T> {
    /// Required agreement between successive cutoffs.
    pub tol: T,
    /// First cutoff; chosen from F when `None`.
    pub x_far: Option<T>,
    pub x_far_cap: T,
    pub ode: OdeConfig<T>,
}

impl<T: Real> Default for ShootConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            x_far: None,
            x_far_cap: T::of(1e6),
            ode: OdeConfig::default().with_t_max(T::of(1e12)),
        }
    }
}

/// Lower bound on the transverse log-contraction a seed must undergo over
/// [x_far / 2, x_far] before the starting cutoff is accepted.
const CONTRACTION_TARGET: f64 = 40.0;

/// A branch entering this ball around the origin (an attractor in the
/// shooting direction) is taken to end there, at the top of the section.
const CAPTURE_RADIUS: f64 = 1e-7;

fn require_far_field<T: Real>(params: &SystemParams<T>) -> Result<()> {
    params.validate()?;
    let f = &params.f;
    if f.degree() < 2 || f.degree() % 2 == 1 || f.leading() <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "separatrices at infinity need even degree and a positive leading coefficient, got {f}"
        )));
    }
    Ok(())
}

/// Integral of F'(x)^2 / (eps |x|) over [x/2, x] on the seed side: the
/// log of the transverse contraction a seed on the graph undergoes while
/// the orbit travels inward by a factor of two.
fn contraction<T: Real>(params: &SystemParams<T>, x: T) -> T {
    let n = 64;
    let (a, b) = (x / T::of(2.0), x);
    let h = (b - a) / T::count(n);
    let g = |s: T| {
        let d = params.f.eval_deriv(s);
        d * d / (params.eps * s.abs())
    };
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc + T::of(w) * g(a + h * T::count(i));
    }
    (acc * h / T::of(3.0)).abs()
}

/// Starting cutoff: beyond every critical point of F and far enough out
/// that the seed offset is contracted by at least exp(-40).
pub fn initial_cutoff<T: Real>(params: &SystemParams<T>, branch: Branch) -> T {
    let crit = params
        .f
        .critical_points()
        .into_iter()
        .fold(T::zero(), |m, c| m.max(c.abs()));
    let mut x = T::one().max(T::of(2.0) * crit);
    let side = match branch {
        Branch::Stable => -T::one(),
        Branch::Unstable => T::one(),
    };
    for _ in 0..40 {
        if contraction(params, side * x) >= T::of(CONTRACTION_TARGET) {
            break;
        }
        x = x * T::of(2.0);
    }
    x
}

/// Traces one branch from the graph point at the given cutoff.
fn shoot_once<T: Real>(
    params: &SystemParams<T>,
    branch: Branch,
    x_far: T,
    ode: &OdeConfig<T>,
    record: Record,
) -> Result<(T, bool, Vec<PhaseState<T>>)> {
    let x_seed = match branch {
        Branch::Stable => -x_far,
        Branch::Unstable => x_far,
    };
    // Contracting direction: divergence -F' must be negative along the trace.
    let direction = if params.f.eval_deriv(x_seed) > T::zero() {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let p = params.clone().with_direction(direction);
    let start = PhaseState::new(x_seed, params.f.eval(x_seed));
    let cfg = ode.with_reparam(Reparam::Time);
    let events = [
        EventSpec::any(EventKind::ReachX(T::zero())),
        EventSpec::new(EventKind::EnterBall(T::of(CAPTURE_RADIUS)), Sense::Rising),
    ];
    let r = flow(&p, start, &events, &cfg, record)?;
    match r.terminal {
        TerminalEvent::Event(0, _) => {
            let y = r.end_state.y;
            if y >= T::zero() {
                Err(Error::Anomalous { value: y.f64() })
            } else {
                Ok((y, false, r.samples))
            }
        }
        TerminalEvent::Event(..) => Ok((T::zero(), true, r.samples)),
        other => Err(Error::ConvergenceFailure {
            what: format!("{branch} separatrix shoot (stopped by {other:?})"),
            x_far: x_far.f64(),
            err_est: f64::NAN,
        }),
    }
}

/// Crossing of the chosen separatrix with the y-axis, with cutoff doubling
/// until successive values agree to `cfg.tol`.
pub fn separatrix<T: Real>(
    params: &SystemParams<T>,
    branch: Branch,
    cfg: &ShootConfig<T>,
) -> Result<SeparatrixResult<T>> {
    require_far_field(params)?;
    let mut x = cfg.x_far.unwrap_or_else(|| initial_cutoff(params, branch));
    let (mut prev, _, _) = shoot_once(params, branch, x, &cfg.ode, Record::Nothing)?;
    loop {
        let x2 = x * T::of(2.0);
        if x2 > cfg.x_far_cap {
            return Err(Error::ConvergenceFailure {
                what: format!("{branch} separatrix cutoff doubling"),
                x_far: x.f64(),
                err_est: f64::NAN,
            });
        }
        let (v, captured, _) = shoot_once(params, branch, x2, &cfg.ode, Record::Nothing)?;
        let err = (v - prev).abs();
        log::debug!("{branch} separatrix: x_far {x2} -> {v} (change {err:e})");
        if err <= cfg.tol {
            // integration error: same cutoff at ten times looser tolerances
            let loose = cfg
                .ode
                .with_rtol(cfg.ode.rtol * T::of(10.0))
                .with_atol(cfg.ode.atol * T::of(10.0));
            let (v_loose, _, _) = shoot_once(params, branch, x2, &loose, Record::Nothing)?;
            return Ok(SeparatrixResult {
                value: v,
                x_far: x2,
                err_est: err + (v - v_loose).abs(),
                branch,
                captured,
            });
        }
        prev = v;
        x = x2;
    }
}

pub fn stable_intersection<T: Real>(
    params: &SystemParams<T>,
    cfg: &ShootConfig<T>,
) -> Result<SeparatrixResult<T>> {
    separatrix(params, Branch::Stable, cfg)
}

pub fn unstable_intersection<T: Real>(
    params: &SystemParams<T>,
    cfg: &ShootConfig<T>,
) -> Result<SeparatrixResult<T>> {
    separatrix(params, Branch::Unstable, cfg)
}

/// Both crossings, shot concurrently.
pub fn both_intersections<T: Real>(
    params: &SystemParams<T>,
    cfg: &ShootConfig<T>,
) -> Result<(SeparatrixResult<T>, SeparatrixResult<T>)> {
    let (u, s) = rayon::join(
        || unstable_intersection(params, cfg),
        || stable_intersection(params, cfg),
    );
    Ok((u?, s?))
}

/// Crossing of one branch shot from a fixed cutoff, without doubling.
pub fn crossing_at<T: Real>(
    params: &SystemParams<T>,
    branch: Branch,
    x_far: T,
    ode: &OdeConfig<T>,
) -> Result<T> {
    require_far_field(params)?;
    shoot_once(params, branch, x_far, ode, Record::Nothing).map(|(v, _, _)| v)
}

/// Points along a separatrix from the seed to the axis, for plotting.
pub fn separatrix_trajectory<T: Real>(
    params: &SystemParams<T>,
    branch: Branch,
    x_far: T,
    ode: &OdeConfig<T>,
) -> Result<Vec<PhaseState<T>>> {
    require_far_field(params)?;
    shoot_once(params, branch, x_far, ode, Record::Dense(3)).map(|(_, _, s)| s)
}

fn quartic_params<T: Real>(a: T, b: T, c: T, d: T) -> Result<SystemParams<T>> {
    if !(a > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "the quartic family needs a > 0, got {a}"
        )));
    }
    Ok(SystemParams::new(Poly::quartic(a, b, c, d)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow<T> {
    pub d: T,
    pub u: Result<SeparatrixResult<T>>,
    pub s: Result<SeparatrixResult<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicScan<T> {
    pub rows: Vec<ScanRow<T>>,
    /// Indices i where S(d[i+1]) > S(d[i]) + 2 err or U(d[i+1]) < U(d[i]) - 2 err.
    pub violations: Vec<usize>,
}

impl<T: Real> MonotonicScan<T> {
    /// Every consecutive pair moves the right way by more than twice the
    /// combined error estimate (S down, U up).
    pub fn strictly_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| match (&w[0], &w[1]) {
            (
                ScanRow {
                    u: Ok(u0), s: Ok(s0), ..
                },
                ScanRow {
                    u: Ok(u1), s: Ok(s1), ..
                },
            ) => {
                let two = T::of(2.0);
                s0.value - s1.value > two * (s0.err_est + s1.err_est)
                    && u1.value - u0.value > two * (u0.err_est + u1.err_est)
            }
            _ => false,
        })
    }
}

/// U(d) and S(d) over an ascending grid of d; per-row failures are kept.
pub fn monotonic_scan<T: Real>(
    a: T,
    b: T,
    c: T,
    d_grid: &[T],
    cfg: &ShootConfig<T>,
) -> Result<MonotonicScan<T>> {
    if d_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "d grid must be strictly ascending".into(),
        ));
    }
    quartic_params(a, b, c, T::zero())?;
    let rows: Vec<ScanRow<T>> = d_grid
        .par_iter()
        .map(|&d| {
            let p = SystemParams::new(Poly::quartic(a, b, c, d));
            let (u, s) = rayon::join(
                || unstable_intersection(&p, cfg),
                || stable_intersection(&p, cfg),
            );
            ScanRow { d, u, s }
        })
        .collect();
    let two = T::of(2.0);
    let violations = rows
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| match (&w[0], &w[1]) {
            (
                ScanRow {
                    u: Ok(u0), s: Ok(s0), ..
                },
                ScanRow {
                    u: Ok(u1), s: Ok(s1), ..
                },
            ) => {
                let s_bad = s1.value > s0.value + two * (s0.err_est + s1.err_est);
                let u_bad = u1.value < u0.value - two * (u0.err_est + u1.err_est);
                (s_bad || u_bad).then_some(i)
            }
            _ => None,
        })
        .collect();
    Ok(MonotonicScan { rows, violations })
}

/// Evidence for d0 = 0 without bisection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// b = 0 makes F(x) - dx even at d = 0; the reflection (x, t) -> (-x, -t)
    /// exchanges the two separatrices, so U(0) = S(0).
    EvenSymmetry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomoclinicResult<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d0: T,
    pub bracket: (T, T),
    pub iterations: usize,
    /// The loop attracts exactly when the origin repels.
    pub loop_stable: bool,
    /// Common crossing U(d0) = S(d0).
    pub p0: T,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindD0Options<T> {
    /// Final bracket width.
    pub tol: T,
    pub use_symmetry_certificate: bool,
    /// Upper end of the initial bracket for b >= 0 (default 0).
    pub upper: Option<T>,
    pub max_iterations: usize,
    pub shoot: ShootConfig<T>,
}

impl<T: Real> Default for FindD0Options<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-6),
            use_symmetry_certificate: true,
            upper: None,
            max_iterations: 200,
            shoot: ShootConfig::default(),
        }
    }
}

/// h(d) = U(d) - S(d) with both crossings.
pub fn splitting<T: Real>(
    a: T,
    b: T,
    c: T,
    d: T,
    cfg: &ShootConfig<T>,
) -> Result<(T, SeparatrixResult<T>, SeparatrixResult<T>)> {
    let p = quartic_params(a, b, c, d)?;
    let (u, s) = both_intersections(&p, cfg)?;
    Ok((u.value - s.value, u, s))
}

/// Parameter d0 of the homoclinic loop for F = a x^4 + b x^3 + c x^2 + d x.
pub fn find_d0<T: Real>(a: T, b: T, c: T, opts: &FindD0Options<T>) -> Result<HomoclinicResult<T>> {
    quartic_params(a, b, c, T::zero())?;
    let h = |d: T| splitting(a, b, c, d, &opts.shoot).map(|r| r.0);

    if b == T::zero() && opts.use_symmetry_certificate {
        log::info!("b = 0: d0 = 0 by the even-symmetry certificate");
        let (_, u, s) = splitting(a, b, c, T::zero(), &opts.shoot)?;
        return Ok(HomoclinicResult {
            a,
            b,
            c,
            d0: T::zero(),
            bracket: (T::zero(), T::zero()),
            iterations: 0,
            loop_stable: false,
            p0: (u.value + s.value) / T::of(2.0),
            certificate: Some(Certificate::EvenSymmetry),
        });
    }

    let (mut lo, mut hi) = if b >= T::zero() {
        let hi = opts.upper.unwrap_or_else(T::zero);
        let h_hi = h(hi)?;
        if !(h_hi > T::zero()) {
            return Err(Error::BracketFailure(format!(
                "expected U(d) > S(d) at d = {hi}, got U - S = {h_hi:e}"
            )));
        }
        let mut lo = hi.min(T::zero()) - T::one();
        let mut width = T::one();
        loop {
            if h(lo)? < T::zero() {
                break lo;
            }
            width = width * T::of(2.0);
            lo = hi.min(T::zero()) - width;
            if width > T::of(1e6) {
                return Err(Error::BracketFailure(format!(
                    "U(d) - S(d) stayed positive down to d = {lo}"
                )));
            }
        };
        (lo, hi)
    } else {
        // reflection of the b > 0 case: root on the positive side
        let lo = T::zero();
        let h_lo = h(lo)?;
        if !(h_lo < T::zero()) {
            return Err(Error::BracketFailure(format!(
                "expected U(0) < S(0) for b < 0, got U - S = {h_lo:e}"
            )));
        }
        let mut width = T::one();
        loop {
            if h(width)? > T::zero() {
                break;
            }
            width = width * T::of(2.0);
            if width > T::of(1e6) {
                return Err(Error::BracketFailure(
                    "U(d) - S(d) stayed negative up to d = 1e6".into(),
                ));
            }
        }
        (lo, width)
    };

    let mut iterations = 0;
    while hi - lo > opts.tol {
        if iterations >= opts.max_iterations {
            return Err(Error::ConvergenceFailure {
                what: "homoclinic bisection".into(),
                x_far: f64::NAN,
                err_est: (hi - lo).f64(),
            });
        }
        let mid = (lo + hi) / T::of(2.0);
        if h(mid)? > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let d0 = (lo + hi) / T::of(2.0);
    let (_, u, s) = splitting(a, b, c, d0, &opts.shoot)?;
    let lin = linearization_at_origin(&SystemParams::new(Poly::quartic(a, b, c, d0)));
    Ok(HomoclinicResult {
        a,
        b,
        c,
        d0,
        bracket: (lo, hi),
        iterations,
        loop_stable: lin.is_unstable(),
        p0: (u.value + s.value) / T::of(2.0),
        certificate: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractivityRow<T> {
    pub k: usize,
    pub y: T,
    pub sample: Result<ReturnSample<T>>,
}

/// Divergence integrals of the return map at y = p0 + (0 - p0) 2^-k,
/// k = 1..=k_max, approaching the loop from inside.
pub fn loop_attractivity_probe<T: Real>(
    result: &HomoclinicResult<T>,
    k_max: usize,
    config: &OdeConfig<T>,
) -> Result<Vec<AttractivityRow<T>>> {
    if !(result.d0 < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "loop attractivity needs d0 < 0 (got {}); a center has no attracting loop",
            result.d0
        )));
    }
    let params = quartic_params(result.a, result.b, result.c, result.d0)?;
    let p0 = result.p0;
    Ok((1..=k_max)
        .into_par_iter()
        .map(|k| {
            let y = p0 + (T::zero() - p0) * T::of(2.0).powi(-(k as i32));
            AttractivityRow {
                k,
                y,
                sample: return_map(&params, y, config),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completeness<T> {
    Complete,
    /// Blow-up radius reached after `t_est` (signed) in `direction`.
    FiniteEscape { t_est: T, direction: Direction },
}

/// Traces `start` forward and backward up to |t| = t_max; the orbit counts
/// as complete when neither direction reaches the blow-up radius.
pub fn escape_analysis<T: Real>(
    params: &SystemParams<T>,
    start: PhaseState<T>,
    t_max: T,
    config: &OdeConfig<T>,
) -> Result<Completeness<T>> {
    let cfg = config.with_t_max(t_max);
    let cfg = match cfg.reparam {
        Reparam::Time => cfg.with_reparam(section_config::<T>().reparam),
        _ => cfg,
    };
    let runs: Vec<Result<(Direction, crate::ode::FlowResult<T>)>> =
        [Direction::Forward, Direction::Backward]
            .par_iter()
            .map(|&dir| {
                let p = params.clone().with_direction(dir);
                flow(&p, start, &[], &cfg, Record::Nothing).map(|r| (dir, r))
            })
            .collect();
    for run in runs {
        let (direction, r) = run?;
        if r.terminal == TerminalEvent::BlowUp {
            return Ok(Completeness::FiniteEscape {
                t_est: r.elapsed,
                direction,
            });
        }
    }
    Ok(Completeness::Complete)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic(a: f64, b: f64, c: f64, d: f64) -> SystemParams<f64> {
        SystemParams::new(Poly::quartic(a, b, c, d))
    }

    #[test]
    fn even_quartic_has_equal_crossings() {
        let (u, s) = both_intersections(&quartic(1.0, 0.0, 0.0, 0.0), &ShootConfig::default())
            .unwrap();
        assert!((u.value - s.value).abs() < 1e-8, "{u:?} {s:?}");
        assert!(u.value < 0.0 && u.err_est <= 1e-8);
    }

    #[test]
    fn bracket_signs_for_the_regression_family() {
        let cfg = ShootConfig::default();
        assert!(splitting(1.0, 1.0, 0.0, 0.0, &cfg).unwrap().0 > 0.0);
        assert!(splitting(1.0, 1.0, 0.0, -10.0, &cfg).unwrap().0 < 0.0);
    }

    #[test]
    fn rejects_odd_degree_and_negative_leading() {
        let cfg = ShootConfig::default();
        let cubic = SystemParams::new(Poly::new(vec![-1.0, 0.0, 1.0]).unwrap());
        assert!(stable_intersection(&cubic, &cfg).is_err());
        assert!(find_d0(-1.0, 1.0, 0.0, &FindD0Options::default()).is_err());
    }

    #[test]
    fn symmetric_family_short_circuits() {
        let r = find_d0(1.0, 0.0, 0.0, &FindD0Options::default()).unwrap();
        assert_eq!(r.d0, 0.0);
        assert_eq!(r.certificate, Some(Certificate::EvenSymmetry));
        assert!(!r.loop_stable);
    }

    #[test]
    fn center_refuses_attractivity_probe() {
        let r = find_d0(1.0, 0.0, -1.0, &FindD0Options::default()).unwrap();
        assert!(loop_attractivity_probe(&r, 3, &section_config()).is_err());
    }

    #[test]
    fn equilibrium_is_complete() {
        let p = quartic(1.0, 1.0, 0.0, -0.5);
        let r = escape_analysis(&p, PhaseState::new(0.0, 0.0), 50.0, &section_config()).unwrap();
        assert_eq!(r, Completeness::Complete);
    }

    #[test]
    fn single_point_scan_has_no_violations() {
        let s = monotonic_scan(1.0, 1.0, 0.0, &[0.0], &ShootConfig::default()).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert!(s.violations.is_empty());
        assert!(monotonic_scan(1.0, 1.0, 0.0, &[0.0, -1.0], &ShootConfig::default()).is_err());
    }
}
