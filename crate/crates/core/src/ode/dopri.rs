//! Dormand-Prince 5(4) with PI step control and 4th-order dense output.
//!
//! Autonomous systems only; the independent variable always advances
//! (h > 0). Callers fold time direction into the right-hand side.

use crate::scalar::Real;

/// Right-hand side of an autonomous system of dimension `N`.
pub trait Autonomous<T, const N: usize> {
    fn rhs(&self, y: &[T; N]) -> [T; N];
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    pub h_max: T,
    pub max_steps: usize,
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Step<T, const N: usize> {
    pub s0: T,
    pub s1: T,
    pub y0: [T; N],
    pub y1: [T; N],
    cont: [[T; N]; 5],
}

impl<T: Real, const N: usize> Step<T, N> {
    /// Dense output at `s` in `[s0, s1]`.
    pub fn at(&self, s: T) -> [T; N] {
        let h = self.s1 - self.s0;
        if h <= T::zero() {
            return self.y1;
        }
        let th = (s - self.s0) / h;
        let th1 = T::one() - th;
        let [r1, r2, r3, r4, r5] = &self.cont;
        std::array::from_fn(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure<T, const N: usize> {
    Underflow { s: T, y: [T; N] },
    Budget { steps: usize, s: T, y: [T; N] },
    NonFinite { s: T, y: [T; N] },
}

pub struct Dopri5<'a, T, S, const N: usize> {
    sys: &'a S,
    tol: Tolerances<T>,
    s: T,
    y: [T; N],
    k1: [T; N],
    h: T,
    facold: T,
    last_rejected: bool,
    steps: usize,
}

fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(&[T; N], f64)]) -> [T; N] {
    std::array::from_fn(|i| {
        let mut acc = T::zero();
        for (k, c) in terms {
            if *c != 0.0 {
                acc = acc + k[i] * T::of(*c);
            }
        }
        y[i] + h * acc
    })
}

impl<'a, T: Real, S: Autonomous<T, N>, const N: usize> Dopri5<'a, T, S, N> {
    pub fn new(sys: &'a S, s0: T, y0: [T; N], tol: Tolerances<T>) -> Self {
        let k1 = sys.rhs(&y0);
        let mut me = Self {
            sys,
            tol,
            s: s0,
            y: y0,
            k1,
            h: T::zero(),
            facold: T::of(1e-4),
            last_rejected: false,
            steps: 0,
        };
        me.h = me.initial_step();
        me
    }

    pub fn state(&self) -> (T, [T; N]) {
        (self.s, self.y)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn scale(&self, y: &[T; N], i: usize) -> T {
        self.tol.atol + self.tol.rtol * y[i].abs()
    }

    fn initial_step(&self) -> T {
        let n = T::count(N);
        let (mut dnf, mut dny) = (T::zero(), T::zero());
        for i in 0..N {
            let sk = self.scale(&self.y, i);
            dnf = dnf + (self.k1[i] / sk).powi(2);
            dny = dny + (self.y[i] / sk).powi(2);
        }
        let (dnf, dny) = ((dnf / n).sqrt(), (dny / n).sqrt());
        let tiny = T::of(1e-5);
        let mut h = if dnf <= tiny || dny <= tiny {
            T::of(1e-6)
        } else {
            T::of(0.01) * dny / dnf
        };
        h = h.min(self.tol.h_max);
        let y1 = axpy(&self.y, h, &[(&self.k1, 1.0)]);
        let f1 = self.sys.rhs(&y1);
        let mut der2 = T::zero();
        for i in 0..N {
            der2 = der2 + ((f1[i] - self.k1[i]) / self.scale(&self.y, i)).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.abs().max(dnf);
        let h1 = if der12 <= T::of(1e-15) {
            T::of(1e-6).max(h * T::of(1e-3))
        } else {
            (T::of(0.01) / der12).powf(T::of(0.2))
        };
        let h = (T::of(100.0) * h).min(h1).min(self.tol.h_max);
        if h.is_finite() && h > T::zero() {
            h
        } else {
            T::of(1e-6)
        }
    }

    /// Advances by one accepted step.
    pub fn step(&mut self) -> Result<Step<T, N>, StepFailure<T, N>> {
        let expo1 = T::of(0.2 - BETA * 0.75);
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(StepFailure::Budget {
                    steps: self.steps,
                    s: self.s,
                    y: self.y,
                });
            }
            let h = self.h.min(self.tol.h_max);
            if T::of(0.1) * h <= self.s.abs().max(T::one()) * T::epsilon() {
                return Err(StepFailure::Underflow {
                    s: self.s,
                    y: self.y,
                });
            }
            self.steps += 1;

            let y = &self.y;
            let k1 = self.k1;
            let k2 = self.sys.rhs(&axpy(y, h, &[(&k1, A[1][0])]));
            let k3 = self.sys.rhs(&axpy(y, h, &[(&k1, A[2][0]), (&k2, A[2][1])]));
            let k4 = self.sys.rhs(&axpy(
                y,
                h,
                &[(&k1, A[3][0]), (&k2, A[3][1]), (&k3, A[3][2])],
            ));
            let k5 = self.sys.rhs(&axpy(
                y,
                h,
                &[(&k1, A[4][0]), (&k2, A[4][1]), (&k3, A[4][2]), (&k4, A[4][3])],
            ));
            let ystage6 = axpy(
                y,
                h,
                &[
                    (&k1, A[5][0]),
                    (&k2, A[5][1]),
                    (&k3, A[5][2]),
                    (&k4, A[5][3]),
                    (&k5, A[5][4]),
                ],
            );
            let k6 = self.sys.rhs(&ystage6);
            let y1 = axpy(
                y,
                h,
                &[
                    (&k1, A[6][0]),
                    (&k3, A[6][2]),
                    (&k4, A[6][3]),
                    (&k5, A[6][4]),
                    (&k6, A[6][5]),
                ],
            );
            let k7 = self.sys.rhs(&y1);
            debug_assert_eq!(C[6], 1.0);

            let mut err = T::zero();
            let mut finite = true;
            for i in 0..N {
                let e = h
                    * (k1[i] * T::of(E[0])
                        + k3[i] * T::of(E[2])
                        + k4[i] * T::of(E[3])
                        + k5[i] * T::of(E[4])
                        + k6[i] * T::of(E[5])
                        + k7[i] * T::of(E[6]));
                let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(y1[i].abs());
                err = err + (e / sk).powi(2);
                finite &= y1[i].is_finite();
            }
            let err = (err / T::count(N)).sqrt();

            if !finite || !err.is_finite() {
                // shrink hard and retry; a genuinely singular field ends in Underflow
                self.h = h * T::of(0.1);
                self.last_rejected = true;
                if !(self.h > T::zero()) {
                    return Err(StepFailure::NonFinite {
                        s: self.s,
                        y: self.y,
                    });
                }
                continue;
            }

            let fac11 = err.powf(expo1);
            let fac = fac11 / self.facold.powf(T::of(BETA));
            let fac = (fac / T::of(SAFE))
                .min(T::one() / T::of(FAC_MIN))
                .max(T::one() / T::of(FAC_MAX));
            let mut h_new = h / fac;

            if err <= T::one() {
                self.facold = err.max(T::of(1e-4));
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;

                let ydiff: [T; N] = std::array::from_fn(|i| y1[i] - y[i]);
                let bspl: [T; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
                let r4: [T; N] = std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]);
                let r5: [T; N] = std::array::from_fn(|i| {
                    h * (k1[i] * T::of(D[0])
                        + k3[i] * T::of(D[2])
                        + k4[i] * T::of(D[3])
                        + k5[i] * T::of(D[4])
                        + k6[i] * T::of(D[5])
                        + k7[i] * T::of(D[6]))
                });
                let step = Step {
                    s0: self.s,
                    s1: self.s + h,
                    y0: *y,
                    y1,
                    cont: [*y, ydiff, bspl, r4, r5],
                };
                self.s = self.s + h;
                self.y = y1;
                self.k1 = k7;
                self.h = h_new;
                return Ok(step);
            }
            self.h = h / (T::one() / T::of(FAC_MIN)).min(fac11 / T::of(SAFE));
            self.last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl Autonomous<f64, 2> for Harmonic {
        fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    struct Decay;
    impl Autonomous<f64, 1> for Decay {
        fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    fn tol(rtol: f64) -> Tolerances<f64> {
        Tolerances {
            rtol,
            atol: rtol * 1e-2,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn harmonic_oscillator_after_many_periods() {
        let mut st = Dopri5::new(&Harmonic, 0.0, [1.0, 0.0], tol(1e-10));
        let t_end = 20.0 * std::f64::consts::PI;
        let mut last = None;
        while st.state().0 < t_end {
            last = Some(st.step().unwrap());
        }
        let y = last.unwrap().at(t_end);
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let mut st = Dopri5::new(&Decay, 0.0, [1.0], tol(1e-10));
        for _ in 0..20 {
            let step = st.step().unwrap();
            for j in 1..8 {
                let s = step.s0 + (step.s1 - step.s0) * j as f64 / 8.0;
                assert!((step.at(s)[0] - (-s).exp()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let run = |r: f64| {
            let mut st = Dopri5::new(&Decay, 0.0, [1.0], tol(r));
            let mut last = None;
            while st.state().0 < 5.0 {
                last = Some(st.step().unwrap());
            }
            (last.unwrap().at(5.0)[0] - (-5.0f64).exp()).abs()
        };
        assert!(run(1e-10) < run(1e-6));
    }

    #[test]
    fn step_budget_is_reported() {
        let mut t = tol(1e-10);
        t.max_steps = 3;
        let mut st = Dopri5::new(&Harmonic, 0.0, [1.0, 0.0], t);
        let res = (0..10).try_for_each(|_| st.step().map(|_| ()));
        assert!(matches!(res, Err(StepFailure::Budget { .. })));
    }
}
