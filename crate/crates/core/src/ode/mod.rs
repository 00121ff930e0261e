//! Planar Liénard field x' = y - F(x), y' = -eps x + e x^2: orbit tracing
//! with terminal events, blow-up detection and path integrals.

pub mod dopri;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Real;

use dopri::{Autonomous, Dopri5, Step, StepFailure, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Direction::Forward => T::one(),
            Direction::Backward => -T::one(),
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Parameters of the vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T> {
    pub f: Poly<T>,
    /// Scale of the restoring term, y' = -eps x; must be positive.
    pub eps: T,
    /// Quadratic perturbation of y'.
    pub e: T,
    pub direction: Direction,
}

impl<T: Real> SystemParams<T> {
    pub fn new(f: Poly<T>) -> Self {
        Self {
            f,
            eps: T::one(),
            e: T::zero(),
            direction: Direction::Forward,
        }
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_e(mut self, e: T) -> Self {
        self.e = e;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero()) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive and finite, got {}",
                self.eps
            )));
        }
        if !self.e.is_finite() {
            return Err(Error::InvalidParameter("e must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn field(&self, x: T, y: T) -> (T, T) {
        (y - self.f.eval(x), -self.eps * x + self.e * x * x)
    }

    /// Divergence of the field, -F'(x); the y'-terms do not depend on y.
    #[inline]
    pub fn divergence(&self, x: T) -> T {
        -self.f.eval_deriv(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState<T> {
    pub x: T,
    pub y: T,
    /// Elapsed time, negative when tracing backward.
    pub t: T,
}

impl<T: Real> PhaseState<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y, t: T::zero() }
    }

    pub fn on_y_axis(y: T) -> Self {
        Self::new(T::zero(), y)
    }

    pub fn radius(&self) -> T {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind<T> {
    /// x = 0 with y < 0.
    CrossNegativeYAxis,
    /// x = 0 with y > 0.
    CrossPositiveYAxis,
    /// y = F(x).
    CrossGraphOfF,
    ReachX(T),
    /// |(x, y)| = r, entered from outside (capture by the origin).
    EnterBall(T),
    BlowUp(T),
    Timeout(T),
}

/// Which way the event function must cross zero, measured along the traced
/// direction of the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Rising,
    Falling,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec<T> {
    pub kind: EventKind<T>,
    pub sense: Sense,
}

impl<T: Real> EventSpec<T> {
    pub fn new(kind: EventKind<T>, sense: Sense) -> Self {
        Self { kind, sense }
    }

    pub fn any(kind: EventKind<T>) -> Self {
        Self::new(kind, Sense::Any)
    }

    fn value(&self, params: &SystemParams<T>, u: &[T; 4]) -> T {
        let (x, y, t) = (u[0], u[1], u[2]);
        match self.kind {
            EventKind::CrossNegativeYAxis | EventKind::CrossPositiveYAxis => x,
            EventKind::CrossGraphOfF => y - params.f.eval(x),
            EventKind::ReachX(xt) => x - xt,
            EventKind::EnterBall(r) => r - x.hypot(y),
            EventKind::BlowUp(r) => x.hypot(y) - r,
            EventKind::Timeout(tm) => t.abs() - tm,
        }
    }

    fn admissible(&self, u: &[T; 4]) -> bool {
        match self.kind {
            EventKind::CrossNegativeYAxis => u[1] < T::zero(),
            EventKind::CrossPositiveYAxis => u[1] > T::zero(),
            _ => true,
        }
    }

    fn crosses(&self, g0: T, g1: T) -> bool {
        let rising = g0 < T::zero() && g1 >= T::zero();
        let falling = g0 > T::zero() && g1 <= T::zero();
        match self.sense {
            Sense::Rising => rising,
            Sense::Falling => falling,
            Sense::Any => rising || falling,
        }
    }
}

/// Parametrization of the traced orbit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Reparam<T> {
    /// Integrate in physical time.
    #[default]
    Time,
    /// Divide the field by 1 + |v| / v_ref. Orbits are unchanged; time and
    /// the divergence integral are carried as corrected path integrals.
    /// Keeps steps sane on the way to a finite-time blow-up.
    SpeedDamped { v_ref: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig<T> {
    pub rtol: T,
    pub atol: T,
    pub t_max: T,
    pub blowup_radius: T,
    pub max_steps: usize,
    pub h_max: T,
    /// Event roots this close to the start of a flow are ignored.
    pub guard_band: T,
    /// Event functions are refined until below this in absolute value.
    pub event_tol: T,
    pub reparam: Reparam<T>,
}

impl<T: Real> Default for OdeConfig<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-10),
            atol: T::of(1e-12),
            t_max: T::of(1e4),
            blowup_radius: T::of(1e6),
            max_steps: 20_000_000,
            h_max: T::infinity(),
            guard_band: T::of(1e-9),
            event_tol: T::of(1e-10),
            reparam: Reparam::Time,
        }
    }
}

impl<T: Real> OdeConfig<T> {
    pub fn with_reparam(mut self, reparam: Reparam<T>) -> Self {
        self.reparam = reparam;
        self
    }

    pub fn with_t_max(mut self, t_max: T) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_atol(mut self, atol: T) -> Self {
        self.atol = atol;
        self
    }

    pub fn with_blowup_radius(mut self, r: T) -> Self {
        self.blowup_radius = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > T::zero()
            && self.atol > T::zero()
            && self.t_max > T::zero()
            && self.blowup_radius > T::zero()
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "tolerances, t_max, blow-up radius and step budget must be positive".into(),
            ))
        }
    }

    pub fn tolerances(&self) -> Tolerances<T> {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            h_max: self.h_max,
            max_steps: self.max_steps,
        }
    }
}

/// What to keep of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Record {
    #[default]
    Nothing,
    /// Every accepted step end.
    Steps,
    /// Step ends plus `k` evenly spaced dense-output points inside each step.
    Dense(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalEvent<T> {
    /// Index into the caller's event list.
    Event(usize, EventKind<T>),
    BlowUp,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<T> {
    pub terminal: TerminalEvent<T>,
    pub end_state: PhaseState<T>,
    /// Signed elapsed time.
    pub elapsed: T,
    /// Path integral of -F'(x(t)) dt over the traced segment, signed like `elapsed`.
    pub div: T,
    pub samples: Vec<PhaseState<T>>,
    pub steps: usize,
}

/// Augmented system (x, y, t, div) in the integration parameter s.
struct Augmented<'a, T> {
    params: &'a SystemParams<T>,
    sign: T,
    reparam: Reparam<T>,
}

impl<T: Real> Autonomous<T, 4> for Augmented<'_, T> {
    #[inline]
    fn rhs(&self, u: &[T; 4]) -> [T; 4] {
        let (vx, vy) = self.params.field(u[0], u[1]);
        let div = self.params.divergence(u[0]);
        let g = match self.reparam {
            Reparam::Time => T::one(),
            Reparam::SpeedDamped { v_ref } => T::one() / (T::one() + vx.hypot(vy) / v_ref),
        };
        let k = self.sign * g;
        [k * vx, k * vy, k, k * div]
    }
}

fn step_error<T: Real>(e: StepFailure<T, 4>) -> Error {
    match e {
        StepFailure::Underflow { y, .. } | StepFailure::NonFinite { y, .. } => {
            Error::StepSizeUnderflow {
                t: y[2].f64(),
                x: y[0].f64(),
                y: y[1].f64(),
            }
        }
        StepFailure::Budget { steps, y, .. } => Error::StepBudgetExhausted {
            steps,
            t: y[2].f64(),
        },
    }
}

/// Localizes the zero of `g` inside a step by bisection on the dense
/// output, finishing with one secant polish.
fn localize<T: Real>(
    step: &Step<T, 4>,
    g: impl Fn(&[T; 4]) -> T,
    mut a: T,
    mut ga: T,
    mut b: T,
    mut gb: T,
    tol: T,
) -> T {
    let width_floor = step.s1.abs().max(T::one()) * T::epsilon() * T::of(4.0);
    let width_tol = width_floor.max(tol * step.s1.abs().max(T::one()));
    for _ in 0..200 {
        if (b - a).abs() <= width_tol {
            break;
        }
        let m = (a + b) / T::of(2.0);
        let gm = g(&step.at(m));
        if gm == T::zero() {
            return m;
        }
        if (gm < T::zero()) == (ga < T::zero()) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    let mut best = if ga.abs() <= gb.abs() { (a, ga) } else { (b, gb) };
    if gb != ga && a != b {
        let s = a - ga * (b - a) / (gb - ga);
        if s >= a.min(b) && s <= a.max(b) {
            let gs = g(&step.at(s));
            if gs.abs() < best.1.abs() {
                best = (s, gs);
            }
        }
    }
    best.0
}

/// Traces the orbit from `start` until the first of `events`, the blow-up
/// radius, or the time limit.
pub fn flow<T: Real>(
    params: &SystemParams<T>,
    start: PhaseState<T>,
    events: &[EventSpec<T>],
    config: &OdeConfig<T>,
    record: Record,
) -> Result<FlowResult<T>> {
    params.validate()?;
    config.validate()?;
    if !start.x.is_finite() || !start.y.is_finite() {
        return Err(Error::InvalidParameter("start state must be finite".into()));
    }

    let mut all = events.to_vec();
    let blow = all.len();
    all.push(EventSpec::new(
        EventKind::BlowUp(config.blowup_radius),
        Sense::Rising,
    ));
    let timeout = all.len();
    all.push(EventSpec::new(EventKind::Timeout(config.t_max), Sense::Rising));

    let sys = Augmented {
        params,
        sign: params.direction.sign(),
        reparam: config.reparam,
    };
    let u0 = [start.x, start.y, start.t, T::zero()];
    let as_state = |u: &[T; 4]| PhaseState {
        x: u[0],
        y: u[1],
        t: u[2],
    };
    let finish = |terminal, u: [T; 4], samples, steps| FlowResult {
        terminal,
        end_state: as_state(&u),
        elapsed: u[2] - start.t,
        div: u[3],
        samples,
        steps,
    };

    let mut samples = Vec::new();
    if record != Record::Nothing {
        samples.push(start);
    }

    // Timeout measured from the start of this flow.
    let rel = |u: &[T; 4]| {
        let mut v = *u;
        v[2] = u[2] - start.t;
        v
    };
    if start.radius() >= config.blowup_radius {
        return Ok(finish(TerminalEvent::BlowUp, u0, samples, 0));
    }

    let mut stepper = Dopri5::new(&sys, T::zero(), u0, config.tolerances());
    let mut g_prev: Vec<T> = all.iter().map(|ev| ev.value(params, &rel(&u0))).collect();
    loop {
        let step = stepper.step().map_err(step_error)?;
        let g_new: Vec<T> = all
            .iter()
            .map(|ev| ev.value(params, &rel(&step.y1)))
            .collect();

        let mut hit: Option<(T, usize)> = None;
        for (i, ev) in all.iter().enumerate() {
            if !ev.crosses(g_prev[i], g_new[i]) {
                continue;
            }
            let gf = |u: &[T; 4]| ev.value(params, &rel(u));
            let s = localize(
                &step,
                gf,
                step.s0,
                g_prev[i],
                step.s1,
                g_new[i],
                config.event_tol,
            );
            if s <= config.guard_band {
                continue;
            }
            if !ev.admissible(&step.at(s)) {
                continue;
            }
            if hit.is_none_or(|(s_best, _)| s < s_best) {
                hit = Some((s, i));
            }
        }

        if let Some((s, i)) = hit {
            let u = step.at(s);
            if let Record::Dense(k) = record {
                push_dense(&mut samples, &step, k, Some(s), &as_state);
            }
            if record != Record::Nothing {
                samples.push(as_state(&u));
            }
            let terminal = if i == blow {
                TerminalEvent::BlowUp
            } else if i == timeout {
                TerminalEvent::Timeout
            } else {
                TerminalEvent::Event(i, all[i].kind)
            };
            return Ok(finish(terminal, u, samples, stepper.steps()));
        }

        match record {
            Record::Nothing => {}
            Record::Steps => samples.push(as_state(&step.y1)),
            Record::Dense(k) => {
                push_dense(&mut samples, &step, k, None, &as_state);
                samples.push(as_state(&step.y1));
            }
        }
        g_prev = g_new;
    }
}

fn push_dense<T: Real>(
    out: &mut Vec<PhaseState<T>>,
    step: &Step<T, 4>,
    k: usize,
    until: Option<T>,
    as_state: &impl Fn(&[T; 4]) -> PhaseState<T>,
) {
    let end = until.unwrap_or(step.s1);
    for j in 1..=k {
        let s = step.s0 + (step.s1 - step.s0) * T::count(j) / T::count(k + 1);
        if s >= end {
            break;
        }
        out.push(as_state(&step.at(s)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumClass {
    Node,
    Focus,
    WeakFocus,
    CenterCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization<T> {
    pub trace: T,
    pub discriminant: T,
    pub class: EquilibriumClass,
}

impl<T: Real> Linearization<T> {
    /// Positive trace: the origin repels.
    pub fn is_unstable(&self) -> bool {
        self.trace > T::zero()
    }

    pub fn is_stable(&self) -> bool {
        self.trace < T::zero()
    }
}

/// Jacobian [[-F'(0), 1], [-eps, 0]] at the origin.
pub fn linearization_at_origin<T: Real>(params: &SystemParams<T>) -> Linearization<T> {
    let trace = -params.f.coeff(1);
    let det = params.eps;
    let discriminant = trace * trace - T::of(4.0) * det;
    let class = if trace == T::zero() {
        if params.f.is_even() {
            EquilibriumClass::CenterCandidate
        } else {
            EquilibriumClass::WeakFocus
        }
    } else if discriminant >= T::zero() {
        EquilibriumClass::Node
    } else {
        EquilibriumClass::Focus
    };
    Linearization {
        trace,
        discriminant,
        class,
    }
}
