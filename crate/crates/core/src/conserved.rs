//! First integrals: φ for F = x², the Hamiltonian H of the 4D embedding
//! and yw + xz for linear F, with deliberately broken variants as controls.
//!
//! The embedding is Hamiltonian with H = z(y - F(x)) - wx:
//!
//! ```text
//! x' = y - F(x),   y' = -x,   z' = w + F'(x) z,   w' = -z
//! ```
//!
//! The (z, w) block is the adjoint of the planar variational equation, so
//! two runs with unit (z, w) give the inverse transpose of the planar
//! monodromy. Flipping the sign of F'(x) z gives the variational equation
//! itself, along which H is not conserved.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::dopri::{Autonomous, Dopri5, StepFailure, Tolerances};
use crate::ode::{flow, EventKind, EventSpec, OdeConfig, PhaseState, Record, Sense, SystemParams};
use crate::poly::Poly;
use crate::scalar::Real;
use crate::section::return_map;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State4<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub w: T,
    pub t: T,
}

impl<T: Real> State4<T> {
    pub fn new(x: T, y: T, z: T, w: T) -> Self {
        Self {
            x,
            y,
            z,
            w,
            t: T::zero(),
        }
    }

    fn to_array(self) -> [T; 4] {
        [self.x, self.y, self.z, self.w]
    }

    fn from_array(u: [T; 4], t: T) -> Self {
        Self {
            x: u[0],
            y: u[1],
            z: u[2],
            w: u[3],
            t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport<T> {
    pub quantity: String,
    pub initial: T,
    pub max_abs_drift: T,
    pub relative_drift: T,
    pub t_span: T,
}

impl<T: Real> DriftReport<T> {
    fn new(quantity: &str, initial: T, max_abs_drift: T, t_span: T) -> Self {
        Self {
            quantity: quantity.to_string(),
            initial,
            max_abs_drift,
            relative_drift: max_abs_drift / initial.abs().max(T::of(1e-30)),
            t_span,
        }
    }
}

struct Tracker<T> {
    initial: T,
    max: T,
}

impl<T: Real> Tracker<T> {
    fn new(initial: T) -> Self {
        Self {
            initial,
            max: T::zero(),
        }
    }

    fn see(&mut self, v: T) {
        let d = (v - self.initial).abs();
        // NaN propagates into the report rather than hiding
        if d > self.max || d.is_nan() {
            self.max = d;
        }
    }

    fn report(&self, name: &str, t_span: T) -> DriftReport<T> {
        DriftReport::new(name, self.initial, self.max, t_span)
    }
}

/// φ(x, y) = (y - x² + 1/2) e^{-2y}.
pub fn phi<T: Real>(x: T, y: T) -> T {
    (y - x * x + T::of(0.5)) * (T::of(-2.0) * y).exp()
}

/// H = z(y - F(x)) - wx.
pub fn hamiltonian<T: Real>(f: &Poly<T>, s: &State4<T>) -> T {
    s.z * (s.y - f.eval(s.x)) - s.w * s.x
}

/// K = yw + xz.
pub fn linear_integral<T: Real>(s: &State4<T>) -> T {
    s.y * s.w + s.x * s.z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    H,
    Phi,
    K,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::H => "H",
            Quantity::Phi => "phi",
            Quantity::K => "yw+xz",
        }
    }

    pub fn eval<T: Real>(self, f: &Poly<T>, s: &State4<T>) -> T {
        match self {
            Quantity::H => hamiltonian(f, s),
            Quantity::Phi => phi(s.x, s.y),
            Quantity::K => linear_integral(s),
        }
    }

    /// The second integral the given F is known to carry, if any.
    pub fn extra_for<T: Real>(f: &Poly<T>) -> Option<Quantity> {
        if f.degree() <= 1 {
            Some(Quantity::K)
        } else if f.coeffs().len() == 2 && f.coeff(1) == T::zero() && f.coeff(2) == T::one() {
            Some(Quantity::Phi)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// z' = w + F'(x) z.
    #[default]
    Hamiltonian,
    /// z' = w - F'(x) z (planar variational equation).
    Variational,
}

struct Dirac<'a, T> {
    f: &'a Poly<T>,
    sign: T,
}

impl<T: Real> Autonomous<T, 4> for Dirac<'_, T> {
    fn rhs(&self, u: &[T; 4]) -> [T; 4] {
        let [x, y, z, w] = *u;
        let (fx, dfx) = self.f.eval_with_deriv(x);
        [y - fx, -x, w + self.sign * dfx * z, -z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracOptions<T> {
    pub rtol: T,
    /// Tiny by default so decaying and growing components are both
    /// controlled relatively.
    pub atol: T,
    pub max_steps: usize,
    /// Output interval of the trajectory table.
    pub stride: T,
    pub variant: Variant,
}

impl<T: Real> Default for DiracOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-12),
            atol: T::of(1e-200).max(T::min_positive_value()),
            max_steps: 20_000_000,
            stride: T::of(0.1),
            variant: Variant::Hamiltonian,
        }
    }
}

impl<T: Real> DiracOptions<T> {
    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_stride(mut self, stride: T) -> Self {
        self.stride = stride;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracRow<T> {
    pub state: State4<T>,
    pub h: T,
    /// φ or yw + xz when F carries one, NaN otherwise.
    pub extra: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracRun<T> {
    pub rows: Vec<DiracRow<T>>,
    pub end: State4<T>,
    pub h: DriftReport<T>,
    pub extra: Option<DriftReport<T>>,
}

fn step_error<T: Real>(e: StepFailure<T, 4>) -> Error {
    match e {
        StepFailure::Underflow { s, y } | StepFailure::NonFinite { s, y } => {
            Error::StepSizeUnderflow {
                t: s.f64(),
                x: y[0].f64(),
                y: y[1].f64(),
            }
        }
        StepFailure::Budget { steps, s, .. } => Error::StepBudgetExhausted {
            steps,
            t: s.f64(),
        },
    }
}

/// Integrates the 4D embedding over [0, t_span], tabulating at the output
/// stride and tracking H (and the extra integral) at every step and row.
pub fn dirac_flow<T: Real>(
    f: &Poly<T>,
    start: State4<T>,
    t_span: T,
    opts: &DiracOptions<T>,
) -> Result<DiracRun<T>> {
    let ok = t_span >= T::zero()
        && t_span.is_finite()
        && opts.rtol > T::zero()
        && opts.atol > T::zero()
        && opts.stride > T::zero();
    if !ok {
        return Err(Error::InvalidParameter(
            "dirac flow needs t_span >= 0 and positive tolerances and stride".into(),
        ));
    }
    let sys = Dirac {
        f,
        sign: match opts.variant {
            Variant::Hamiltonian => T::one(),
            Variant::Variational => -T::one(),
        },
    };
    let extra_q = Quantity::extra_for(f);
    let start = State4 {
        t: T::zero(),
        ..start
    };
    let mut h = Tracker::new(hamiltonian(f, &start));
    let mut extra = extra_q.map(|q| Tracker::new(q.eval(f, &start)));
    let mut rows = Vec::new();
    let mut emit = |s: State4<T>, rows: Option<&mut Vec<DiracRow<T>>>| {
        let hv = hamiltonian(f, &s);
        h.see(hv);
        let ev = match (extra_q, extra.as_mut()) {
            (Some(q), Some(tr)) => {
                let v = q.eval(f, &s);
                tr.see(v);
                v
            }
            _ => T::nan(),
        };
        if let Some(rows) = rows {
            rows.push(DiracRow {
                state: s,
                h: hv,
                extra: ev,
            });
        }
    };
    emit(start, Some(&mut rows));

    let mut end = start;
    if t_span > T::zero() {
        let tol = Tolerances {
            rtol: opts.rtol,
            atol: opts.atol,
            h_max: T::infinity(),
            max_steps: opts.max_steps,
        };
        let mut stepper = Dopri5::new(&sys, T::zero(), start.to_array(), tol);
        let mut next_out = 1usize;
        loop {
            let step = stepper.step().map_err(step_error)?;
            loop {
                let t_out = opts.stride * T::count(next_out);
                if t_out > step.s1 || t_out > t_span {
                    break;
                }
                emit(State4::from_array(step.at(t_out), t_out), Some(&mut rows));
                next_out += 1;
            }
            if step.s1 >= t_span {
                end = State4::from_array(step.at(t_span), t_span);
                emit(end, None);
                break;
            }
            emit(State4::from_array(step.y1, step.s1), None);
        }
        if rows.last().is_none_or(|r| r.state.t < t_span) {
            emit(end, Some(&mut rows));
        }
    }
    Ok(DiracRun {
        rows,
        end,
        h: h.report(Quantity::H.name(), t_span),
        extra: match (extra_q, extra) {
            (Some(q), Some(tr)) => Some(tr.report(q.name(), t_span)),
            _ => None,
        },
    })
}

/// Drift of any of the known quantities along the 4D flow of `f`, whether
/// or not `f` actually conserves it.
pub fn quantity_drift<T: Real>(
    f: &Poly<T>,
    quantity: Quantity,
    start: State4<T>,
    t_span: T,
    opts: &DiracOptions<T>,
) -> Result<DriftReport<T>> {
    let run = dirac_flow(f, start, t_span, &opts.with_stride(t_span.max(T::one()) / T::of(1000.0)))?;
    let mut tr = Tracker::new(quantity.eval(f, &start));
    for r in &run.rows {
        tr.see(quantity.eval(f, &r.state));
    }
    tr.see(quantity.eval(f, &run.end));
    Ok(tr.report(quantity.name(), t_span))
}

/// Drift of yw + xz along the flow of F = kx.
pub fn linear_case_integral<T: Real>(
    k: T,
    start: State4<T>,
    t_span: T,
    opts: &DiracOptions<T>,
) -> Result<DriftReport<T>> {
    let f = Poly::new(vec![k])?;
    quantity_drift(&f, Quantity::K, start, t_span, opts)
}

/// Drift of φ along the planar flow of F = x² (eps = 1, e = 0).
pub fn phi_drift<T: Real>(
    start: PhaseState<T>,
    t_span: T,
    config: &OdeConfig<T>,
) -> Result<DriftReport<T>> {
    let params = SystemParams::new(Poly::monomial(2, T::one())?);
    let start = PhaseState { t: T::zero(), ..start };
    let mut tr = Tracker::new(phi(start.x, start.y));
    if t_span > T::zero() {
        let r = flow(
            &params,
            start,
            &[EventSpec::new(EventKind::Timeout(t_span), Sense::Rising)],
            &config.with_t_max(t_span * T::of(2.0)),
            Record::Dense(4),
        )?;
        for s in &r.samples {
            tr.see(phi(s.x, s.y));
        }
    }
    Ok(tr.report(Quantity::Phi.name(), t_span))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvilleCheck<T> {
    /// Planar monodromy over one return time, columns d(x, y)(T)/d(x0, y0).
    pub monodromy: [[T; 2]; 2],
    pub det: T,
    /// exp of the divergence integral over the same time.
    pub exp_div: T,
    pub rel_err: T,
    pub period: T,
}

fn det2<T: Real>(m: &[[T; 2]; 2]) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Matrix whose columns are the (z, w) end states of runs started from
/// (x0, y0, 1, 0) and (x0, y0, 0, 1).
pub fn block_matrix<T: Real>(
    f: &Poly<T>,
    x0: T,
    y0: T,
    t_span: T,
    opts: &DiracOptions<T>,
) -> Result<[[T; 2]; 2]> {
    let cols: Vec<Result<State4<T>>> = [(T::one(), T::zero()), (T::zero(), T::one())]
        .par_iter()
        .map(|&(z, w)| {
            dirac_flow(f, State4::new(x0, y0, z, w), t_span, &opts.with_stride(t_span.max(T::one())))
                .map(|r| r.end)
        })
        .collect();
    let (c0, c1) = (cols[0].clone()?, cols[1].clone()?);
    Ok([[c0.z, c1.z], [c0.w, c1.w]])
}

/// Liouville check along the orbit through (0, y0): the planar monodromy
/// is recovered from the Hamiltonian (z, w) block as its inverse transpose
/// and its determinant compared with exp(D) from the return map.
pub fn liouville_check<T: Real>(
    f: &Poly<T>,
    y0: T,
    opts: &DiracOptions<T>,
    config: &OdeConfig<T>,
) -> Result<LiouvilleCheck<T>> {
    let params = SystemParams::new(f.clone());
    let sample = return_map(&params, y0, config)?;
    if !sample.returned() {
        return Err(Error::NoReturn(format!(
            "no return from y0 = {y0}: {}",
            sample.status
        )));
    }
    let period = sample.t_return;
    let n = block_matrix(f, T::zero(), y0, period, &opts.with_variant(Variant::Hamiltonian))?;
    let dn = det2(&n);
    // M = N^{-T}
    let monodromy = [[n[1][1] / dn, -n[1][0] / dn], [-n[0][1] / dn, n[0][0] / dn]];
    let det = det2(&monodromy);
    let exp_div = sample.div_integral.exp();
    Ok(LiouvilleCheck {
        monodromy,
        det,
        exp_div,
        rel_err: ((det - exp_div) / exp_div).abs(),
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::section::section_config;

    fn poly(c: &[f64]) -> Poly<f64> {
        Poly::new(c.to_vec()).unwrap()
    }

    #[test]
    fn phi_at_equilibrium_is_one_half() {
        let r = phi_drift(PhaseState::new(0.0, 0.0), 10.0, &OdeConfig::default()).unwrap();
        assert_eq!(r.initial, 0.5);
        assert_eq!(r.max_abs_drift, 0.0);
    }

    #[test]
    fn h_is_conserved_and_the_variational_sign_is_not() {
        let f = poly(&[1.0, 0.0, 0.0, 1.0]);
        let start = State4::new(0.3, -0.2, 1.0, 0.0);
        let good = dirac_flow(&f, start, 50.0, &DiracOptions::default()).unwrap();
        assert!(good.h.relative_drift <= 1e-7, "{:?}", good.h);
        let bad = DiracOptions::default().with_variant(Variant::Variational);
        let bad = dirac_flow(&f, start, 50.0, &bad).unwrap();
        assert!(bad.h.relative_drift > 1e-2, "{:?}", bad.h);
    }

    #[test]
    fn zero_block_stays_zero() {
        let f = poly(&[1.0, 0.0, 0.0, 1.0]);
        let r = dirac_flow(&f, State4::new(0.3, -0.2, 0.0, 0.0), 20.0, &DiracOptions::default())
            .unwrap();
        assert!(r.rows.iter().all(|row| row.state.z == 0.0 && row.state.w == 0.0 && row.h == 0.0));
    }

    #[test]
    fn rows_follow_the_stride() {
        let f = poly(&[0.0, 1.0]);
        let r = dirac_flow(&f, State4::new(0.1, 0.1, 0.5, -0.5), 1.0, &DiracOptions::default())
            .unwrap();
        assert_eq!(r.rows.len(), 11);
        assert!((r.rows[5].state.t - 0.5).abs() < 1e-15);
        assert!(r.extra.is_some());
        assert_eq!(r.end.t, 1.0);
    }

    #[test]
    fn harmonic_case_conserves_k() {
        let r = linear_case_integral(0.0, State4::new(1.0, 1.0, 1.0, 1.0), 50.0, &DiracOptions::default())
            .unwrap();
        assert!(r.relative_drift <= 1e-9, "{r:?}");
    }

    #[test]
    fn liouville_on_a_focus() {
        let f = poly(&[-0.2, 0.0, 1.0]);
        let c = liouville_check(&f, -0.5, &DiracOptions::default(), &section_config()).unwrap();
        assert!(c.rel_err < 1e-6, "{c:?}");
        // the variational sign gives the monodromy directly
        let m = block_matrix(
            &f,
            0.0,
            -0.5,
            c.period,
            &DiracOptions::default().with_variant(Variant::Variational),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - c.monodromy[i][j]).abs() < 1e-6 * (1.0 + m[i][j].abs()));
            }
        }
    }

    #[test]
    fn rejects_bad_options() {
        let f = poly(&[1.0]);
        let s = State4::new(1.0, 0.0, 0.0, 1.0);
        assert!(dirac_flow(&f, s, -1.0, &DiracOptions::default()).is_err());
        assert!(dirac_flow(&f, s, 1.0, &DiracOptions::default().with_rtol(0.0)).is_err());
    }
}
