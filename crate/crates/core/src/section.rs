//! Poincaré return map on the section {x = 0, y < 0}.
//!
//! Displacement convention: `displacement(y0) = P(y0) - y0`, so a positive
//! value means the orbit came back closer to the origin (moved inward).

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{
    flow, EventKind, EventSpec, OdeConfig, PhaseState, Record, Reparam, Sense, SystemParams,
    TerminalEvent,
};
use crate::scalar::Real;

/// Configuration used for return maps unless the caller overrides it:
/// engine defaults with the field damped at high speed, so orbits that
/// escape reach the blow-up radius instead of underflowing the step size.
pub fn section_config<T: Real>() -> OdeConfig<T> {
    OdeConfig::default().with_reparam(Reparam::SpeedDamped { v_ref: T::of(1e3) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoReturnReason {
    /// Blow-up radius reached before the return.
    Escape,
    Timeout,
    /// Reached the section again without passing the positive half-axis.
    Incomplete,
}

impl fmt::Display for NoReturnReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NoReturnReason::Escape => "Escape",
            NoReturnReason::Timeout => "Timeout",
            NoReturnReason::Incomplete => "Incomplete",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnStatus {
    Returned,
    NoReturn(NoReturnReason),
}

impl fmt::Display for ReturnStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnStatus::Returned => f.write_str("Returned"),
            ReturnStatus::NoReturn(r) => write!(f, "NoReturn({r})"),
        }
    }
}

/// One evaluation of the return map.
///
/// For `NoReturn` samples `p` and `y_tilde` may be NaN and `t_return`,
/// `div_integral` hold the values reached when tracing stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSample<T> {
    pub y0: T,
    pub p: T,
    pub t_return: T,
    pub div_integral: T,
    /// Crossing of the positive y-axis on the way round.
    pub y_tilde: T,
    pub status: ReturnStatus,
}

impl<T: Real> ReturnSample<T> {
    pub fn returned(&self) -> bool {
        self.status == ReturnStatus::Returned
    }

    fn require(&self) -> Result<&Self> {
        match self.status {
            ReturnStatus::Returned => Ok(self),
            ReturnStatus::NoReturn(r) => Err(Error::NoReturn(format!(
                "orbit from (0, {}) did not return: {r}",
                self.y0
            ))),
        }
    }

    /// P'(y0) = (y0 / P(y0)) exp(D).
    pub fn derivative(&self) -> Result<T> {
        let s = self.require()?;
        Ok(s.y0 / s.p * s.div_integral.exp())
    }

    pub fn displacement(&self) -> Result<T> {
        let s = self.require()?;
        Ok(s.p - s.y0)
    }
}

fn no_return<T: Real>(
    y0: T,
    reason: NoReturnReason,
    elapsed: T,
    div: T,
    y_tilde: T,
) -> ReturnSample<T> {
    ReturnSample {
        y0,
        p: T::nan(),
        t_return: elapsed,
        div_integral: div,
        y_tilde,
        status: ReturnStatus::NoReturn(reason),
    }
}

fn reason_for<T>(terminal: TerminalEvent<T>) -> NoReturnReason {
    match terminal {
        TerminalEvent::BlowUp => NoReturnReason::Escape,
        TerminalEvent::Timeout => NoReturnReason::Timeout,
        TerminalEvent::Event(..) => NoReturnReason::Incomplete,
    }
}

/// First return to the negative y-axis after one crossing of the positive y-axis.
pub fn return_map<T: Real>(
    params: &SystemParams<T>,
    y0: T,
    config: &OdeConfig<T>,
) -> Result<ReturnSample<T>> {
    if !(y0 < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "return map needs y0 < 0, got {y0}"
        )));
    }
    let pos = EventSpec::new(EventKind::CrossPositiveYAxis, Sense::Any);
    let neg = EventSpec::new(EventKind::CrossNegativeYAxis, Sense::Any);

    let first = flow(
        params,
        PhaseState::on_y_axis(y0),
        &[pos, neg],
        config,
        Record::Nothing,
    )?;
    match first.terminal {
        TerminalEvent::Event(0, _) => {}
        t => {
            return Ok(no_return(
                y0,
                reason_for(t),
                first.elapsed,
                first.div,
                T::nan(),
            ))
        }
    }
    let y_tilde = first.end_state.y;

    let remaining = config.t_max - first.elapsed.abs();
    if !(remaining > T::zero()) {
        return Ok(no_return(
            y0,
            NoReturnReason::Timeout,
            first.elapsed,
            first.div,
            y_tilde,
        ));
    }
    let second = flow(
        params,
        first.end_state,
        &[neg, pos],
        &config.with_t_max(remaining),
        Record::Nothing,
    )?;
    let elapsed = first.elapsed + second.elapsed;
    let div = first.div + second.div;
    match second.terminal {
        TerminalEvent::Event(0, _) => Ok(ReturnSample {
            y0,
            p: second.end_state.y,
            t_return: elapsed.abs(),
            div_integral: div,
            y_tilde,
            status: ReturnStatus::Returned,
        }),
        t => Ok(no_return(y0, reason_for(t), elapsed, div, y_tilde)),
    }
}

/// Points along the orbit from (0, y0) through one return to the section,
/// or up to escape or timeout.
pub fn orbit_points<T: Real>(
    params: &SystemParams<T>,
    y0: T,
    config: &OdeConfig<T>,
) -> Result<Vec<PhaseState<T>>> {
    let pos = EventSpec::new(EventKind::CrossPositiveYAxis, Sense::Any);
    let neg = EventSpec::new(EventKind::CrossNegativeYAxis, Sense::Any);
    let first = flow(params, PhaseState::on_y_axis(y0), &[pos, neg], config, Record::Dense(3))?;
    let mut pts = first.samples;
    if let TerminalEvent::Event(0, _) = first.terminal {
        let remaining = config.t_max - first.elapsed.abs();
        if remaining > T::zero() {
            let second = flow(
                params,
                first.end_state,
                &[neg, pos],
                &config.with_t_max(remaining),
                Record::Dense(3),
            )?;
            pts.extend(second.samples.into_iter().skip(1));
        }
    }
    Ok(pts)
}

/// Evaluates the return map on every `y0`, in parallel, preserving order.
pub fn scan<T: Real>(
    params: &SystemParams<T>,
    ys: &[T],
    config: &OdeConfig<T>,
) -> Vec<Result<ReturnSample<T>>> {
    ys.par_iter()
        .map(|&y| return_map(params, y, config))
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * T::count(i) / T::count(n - 1))
            .collect(),
    }
}

pub fn return_derivative<T: Real>(
    params: &SystemParams<T>,
    y0: T,
    config: &OdeConfig<T>,
) -> Result<T> {
    return_map(params, y0, config)?.derivative()
}

pub fn displacement<T: Real>(params: &SystemParams<T>, y0: T, config: &OdeConfig<T>) -> Result<T> {
    return_map(params, y0, config)?.displacement()
}

pub fn period<T: Real>(params: &SystemParams<T>, y0: T, config: &OdeConfig<T>) -> Result<T> {
    let s = return_map(params, y0, config)?;
    s.require()?;
    Ok(s.t_return)
}

/// Step used for finite-difference checks of the return map.
pub fn fd_step<T: Real>(y0: T) -> T {
    T::of(1e-4) * y0.abs().max(T::one())
}

/// Central finite difference of the return map, independent of the
/// divergence formula.
pub fn return_derivative_fd<T: Real>(
    params: &SystemParams<T>,
    y0: T,
    config: &OdeConfig<T>,
) -> Result<T> {
    let h = fd_step(y0);
    let hi = return_map(params, y0 + h, config)?;
    let lo = return_map(params, y0 - h, config)?;
    Ok((hi.require()?.p - lo.require()?.p) / (h + h))
}

/// Heights at which the orbit through (0, y_tilde) meets the graph of F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadRow<T> {
    pub y_tilde: T,
    /// Forward-time crossing height.
    pub y1: T,
    /// Backward-time crossing height.
    pub y2: T,
    pub ratio_forward: T,
    pub ratio_backward: T,
}

/// Measures |y_tilde - y_i| / sqrt(y_tilde) for the graph crossings on both
/// sides of a high start on the positive y-axis.
pub fn spread_bound_probe<T: Real>(
    params: &SystemParams<T>,
    y_tildes: &[T],
    config: &OdeConfig<T>,
) -> Result<Vec<SpreadRow<T>>> {
    let f = &params.f;
    if f.degree() != 4 || f.leading() <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "spread probe needs a quartic with positive leading coefficient, got {f}"
        )));
    }
    if let Some(&bad) = y_tildes.iter().find(|&&y| !(y >= T::of(100.0))) {
        return Err(Error::InvalidParameter(format!(
            "spread probe needs y_tilde >= 100, got {bad}"
        )));
    }
    let graph = [EventSpec::any(EventKind::CrossGraphOfF)];
    y_tildes
        .par_iter()
        .map(|&yt| {
            let cross = |p: SystemParams<T>| -> Result<T> {
                let r = flow(&p, PhaseState::on_y_axis(yt), &graph, config, Record::Nothing)?;
                match r.terminal {
                    TerminalEvent::Event(..) => Ok(r.end_state.y),
                    other => Err(Error::NoReturn(format!(
                        "orbit from (0, {yt}) never met the graph of F: {other:?}"
                    ))),
                }
            };
            let fwd = params.clone().with_direction(crate::ode::Direction::Forward);
            let bwd = params.clone().with_direction(crate::ode::Direction::Backward);
            let y1 = cross(fwd)?;
            let y2 = cross(bwd)?;
            let root = yt.sqrt();
            Ok(SpreadRow {
                y_tilde: yt,
                y1,
                y2,
                ratio_forward: (yt - y1).abs() / root,
                ratio_backward: (yt - y2).abs() / root,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn params(c: &[f64]) -> SystemParams<f64> {
        SystemParams::new(Poly::new(c.to_vec()).unwrap())
    }

    fn cfg() -> OdeConfig<f64> {
        section_config()
    }

    #[test]
    fn center_returns_identity() {
        // the x^4 period annulus ends near y = -0.65
        let s = return_map(&params(&[0.0, 0.0, 0.0, 1.0]), -0.5, &cfg()).unwrap();
        assert!(s.returned());
        assert!((s.p + 0.5).abs() < 1e-8, "{s:?}");
        assert!(s.div_integral.abs() < 1e-7);
        assert!((s.derivative().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn node_has_no_return() {
        let s = return_map(&params(&[2.0, 0.0, 1.0]), -1.0, &cfg()).unwrap();
        assert!(matches!(s.status, ReturnStatus::NoReturn(_)), "{s:?}");
        assert!(s.derivative().is_err());
    }

    #[test]
    fn lemma_one_system_moves_inward_and_contracts() {
        let p = params(&[1.0, 0.0, 0.0, 1.0]);
        for y0 in [-0.5, -1.0, -1.2] {
            let s = return_map(&p, y0, &cfg()).unwrap();
            assert!(s.displacement().unwrap() > 0.0, "{s:?}");
            let d = s.derivative().unwrap();
            assert!(d > 0.0 && d < 1.0, "{d}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = params(&[1.0, 0.0, 0.0, 1.0]);
        let d = return_derivative(&p, -1.0, &cfg()).unwrap();
        let fd = return_derivative_fd(&p, -1.0, &cfg()).unwrap();
        assert!((d - fd).abs() <= 1e-4f64.max(1e-3 * d.abs()), "{d} vs {fd}");
    }

    #[test]
    fn small_center_orbit_has_linear_period() {
        let t = period(&params(&[0.0, 0.0, 0.0, 1.0]), -1e-3, &cfg()).unwrap();
        assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-6, "{t}");
    }

    #[test]
    fn escape_outside_the_period_annulus() {
        let p = params(&[0.0, 0.0, 0.0, 1.0]);
        let s = return_map(&p, -1.0, &cfg()).unwrap();
        assert_eq!(s.status, ReturnStatus::NoReturn(NoReturnReason::Escape));
        let wider = cfg().with_blowup_radius(1e7);
        let s = return_map(&p, -1.0, &wider).unwrap();
        assert_eq!(s.status, ReturnStatus::NoReturn(NoReturnReason::Escape));
    }

    #[test]
    fn rejects_nonnegative_start() {
        assert!(return_map(&params(&[1.0]), 0.0, &cfg()).is_err());
        assert!(return_map(&params(&[1.0]), 0.5, &cfg()).is_err());
    }

    #[test]
    fn spread_probe_geometry() {
        let rows =
            spread_bound_probe(&params(&[-1.0, 1.0, 1.0, 1.0]), &[1e2, 1e3, 1e4], &cfg()).unwrap();
        for r in &rows {
            assert!(r.y1 < r.y_tilde && r.y2 < r.y_tilde, "{r:?}");
        }
        let sym = spread_bound_probe(&params(&[0.0, 0.0, 0.0, 1.0]), &[1e4], &cfg()).unwrap();
        let r = sym[0];
        assert!((r.ratio_forward - r.ratio_backward).abs() < 1e-6 * r.ratio_forward.max(1.0));
        assert!(spread_bound_probe(&params(&[0.0, 1.0]), &[1e2], &cfg()).is_err());
        assert!(spread_bound_probe(&params(&[0.0, 0.0, 0.0, 1.0]), &[10.0], &cfg()).is_err());
    }

    #[test]
    fn slow_crossings_near_the_origin_return() {
        let p = params(&[-0.01, 0.0, 1.0, 1.0]);
        for y0 in [-1e-4, -1e-3, -0.05, -0.1] {
            assert!(return_map(&p, y0, &cfg()).unwrap().returned(), "y0 = {y0}");
        }
    }
}
