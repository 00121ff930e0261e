//! The damping polynomial F and the handful of exact and numeric
//! operations the rest of the crate needs from it.

mod sturm;

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

use sturm::QPoly;

/// Absolute tolerance on root locations.
pub const ROOT_TOL: f64 = 1e-12;

/// Polynomial F(x) = c1 x + c2 x^2 + ... + cN x^N with no constant term.
///
/// `coeffs()[k - 1]` is the coefficient of `x^k`. Trailing zeros are
/// trimmed, so `degree()` is the index of the highest nonzero coefficient.
/// The zero polynomial has degree 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub const MAX_DEGREE: usize = 16;

    /// Builds F from ascending coefficients `c1, c2, ...`.
    pub fn new(coeffs: impl Into<Vec<T>>) -> Result<Self> {
        let mut coeffs = coeffs.into();
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coefficient {} (of x^{}) is not finite",
                bad + 1,
                bad + 1
            )));
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.len() > Self::MAX_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "degree {} exceeds the supported maximum {}",
                coeffs.len(),
                Self::MAX_DEGREE
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// a x^4 + b x^3 + c x^2 + d x.
    pub fn quartic(a: T, b: T, c: T, d: T) -> Self {
        Self::new(vec![d, c, b, a]).expect("finite quartic coefficients")
    }

    /// c x^k.
    pub fn monomial(k: usize, c: T) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("F has no constant term".into()));
        }
        let mut v = vec![T::zero(); k];
        v[k - 1] = c;
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> T {
        if k == 0 {
            return T::zero();
        }
        self.coeffs.get(k - 1).copied().unwrap_or_else(T::zero)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> T {
        self.coeffs.last().copied().unwrap_or_else(T::zero)
    }

    /// F(-x) = F(x): only even powers present.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().step_by(2).all(|c| c.is_zero())
    }

    /// F(-x) = -F(x): only odd powers present.
    pub fn is_odd(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|c| c.is_zero())
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| (acc + c) * x)
    }

    pub fn eval_deriv(&self, x: T) -> T {
        let mut acc = T::zero();
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * x + c * T::count(i + 1);
        }
        acc
    }

    /// F and F' in one pass.
    pub fn eval_with_deriv(&self, x: T) -> (T, T) {
        let (mut p, mut dp) = (T::zero(), T::zero());
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        // p currently holds F(x)/x; shift by one power
        (p * x, dp * x + p)
    }

    /// Replaces the linear coefficient.
    pub fn with_linear(&self, d: T) -> Self {
        let mut v = self.coeffs.clone();
        if v.is_empty() {
            v.push(d);
        } else {
            v[0] = d;
        }
        Self::new(v).expect("finite")
    }

    /// G(x) = F(-x).
    pub fn reflected(&self) -> Self {
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 0 { -c } else { c })
            .collect::<Vec<_>>();
        Self::new(v).expect("finite")
    }

    /// Splits F = E + O into even and odd parts.
    pub fn even_odd(&self) -> (Self, Self) {
        let mut even = vec![T::zero(); self.coeffs.len()];
        let mut odd = vec![T::zero(); self.coeffs.len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if (i + 1) % 2 == 0 {
                even[i] = c;
            } else {
                odd[i] = c;
            }
        }
        (
            Self::new(even).expect("finite"),
            Self::new(odd).expect("finite"),
        )
    }

    /// Ascending coefficients of F(x) - level, including the constant term.
    fn shifted_f64(&self, level: T) -> Vec<f64> {
        std::iter::once(-level.f64())
            .chain(self.coeffs.iter().map(|c| c.f64()))
            .collect()
    }

    fn derivative_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.f64() * (i + 1) as f64)
            .collect()
    }

    /// Distinct real roots of F', sorted.
    pub fn critical_points(&self) -> Vec<T> {
        real_roots(&self.derivative_f64())
    }

    /// Distinct real roots of F(x) = level, sorted.
    pub fn level_roots(&self, level: T) -> Vec<T> {
        real_roots(&self.shifted_f64(level))
    }

    fn require_even_positive(&self, what: &str) -> Result<()> {
        if self.degree() == 0 || self.degree() % 2 == 1 || self.leading() <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "{what} needs even degree and a positive leading coefficient, got {self}"
            )));
        }
        Ok(())
    }
}

impl<T: Real> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let k = i + 1;
            let sign = if c < T::zero() { "-" } else { "+" };
            if first {
                if c < T::zero() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let m = c.abs();
            if m != T::one() {
                write!(f, "{m}")?;
            }
            match k {
                1 => write!(f, "x")?,
                _ => write!(f, "x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Distinct real roots of the polynomial with ascending coefficients
/// `coeffs` (constant term first), located to [`ROOT_TOL`].
pub fn real_roots<T: Real>(coeffs: &[f64]) -> Vec<T> {
    match QPoly::from_f64(coeffs) {
        Some(p) => sturm::real_roots(&p, ROOT_TOL)
            .into_iter()
            .map(T::of)
            .collect(),
        None => Vec::new(),
    }
}

/// Whether x = 0 is the only real root of the odd polynomial `o`.
///
/// Writes O(x) = x R(x^2) and asks for a positive root of R by an exact
/// Sturm count. The zero polynomial vanishes everywhere and returns false.
pub fn odd_unique_root<T: Real>(o: &Poly<T>) -> Result<bool> {
    if !o.is_odd() {
        return Err(Error::InvalidParameter(format!(
            "odd_unique_root needs an odd polynomial, got {o}"
        )));
    }
    if o.is_zero() {
        return Ok(false);
    }
    let r: Vec<f64> = o.coeffs().iter().step_by(2).map(|c| c.f64()).collect();
    let r = QPoly::from_f64(&r).expect("finite coefficients");
    Ok(sturm::count_positive_roots(&r) == 0)
}

/// Minima of F over (-inf, 0] and [0, +inf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineMinima<T> {
    pub m_minus: T,
    pub m_plus: T,
    pub argmin_minus: T,
    pub argmin_plus: T,
}

pub fn half_line_minima<T: Real>(f: &Poly<T>) -> Result<HalfLineMinima<T>> {
    f.require_even_positive("half_line_minima")?;
    let crit = f.critical_points();
    let best = |pick: &dyn Fn(T) -> bool| {
        crit.iter()
            .copied()
            .filter(|&x| pick(x))
            .map(|x| (f.eval(x), x))
            .fold((T::zero(), T::zero()), |b, c| if c.0 < b.0 { c } else { b })
    };
    let (m_minus, argmin_minus) = best(&|x| x < T::zero());
    let (m_plus, argmin_plus) = best(&|x| x > T::zero());
    Ok(HalfLineMinima {
        m_minus,
        m_plus,
        argmin_minus,
        argmin_plus,
    })
}

/// Outermost solutions of F(x) = y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterBranches<T> {
    /// Largest real root.
    pub a_of_y: T,
    /// Smallest real root.
    pub b_of_y: T,
    pub y: T,
}

pub fn outer_branches<T: Real>(f: &Poly<T>, y: T) -> Result<OuterBranches<T>> {
    let minima = half_line_minima(f)?;
    let floor = minima.m_minus.max(minima.m_plus);
    if !(y > floor) {
        return Err(Error::NoOuterBranch {
            level: y.f64(),
            floor: floor.f64(),
        });
    }
    let roots = f.level_roots(y);
    match (roots.first(), roots.last()) {
        (Some(&b), Some(&a)) if b < T::zero() && a > T::zero() => Ok(OuterBranches {
            a_of_y: a,
            b_of_y: b,
            y,
        }),
        _ => Err(Error::NoOuterBranch {
            level: y.f64(),
            floor: floor.f64(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Poly<f64> {
        Poly::new(c.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = p(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(f.eval(-0.75), -27.0 / 256.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(p(&[1.0, 1.0, 1.0, 1.0]).eval(1.0), 4.0);
    }

    #[test]
    fn derivative_matches_fused_evaluation() {
        let f = p(&[-1.0, 1.0, 1.0, 1.0]);
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let (v, dv) = f.eval_with_deriv(x);
            assert!((v - f.eval(x)).abs() < 1e-12);
            assert!((dv - f.eval_deriv(x)).abs() < 1e-12);
            assert!((dv - (4.0 * x * x * x + 3.0 * x * x + 2.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn trailing_zeros_trimmed_and_degree_capped() {
        assert_eq!(p(&[1.0, 0.0, 0.0]).degree(), 1);
        assert!(Poly::<f64>::new(vec![1.0; 17]).is_err());
        assert!(Poly::<f64>::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let (e, o) = p(&[1.0, 1.0, 1.0, 1.0]).even_odd();
        assert_eq!(e, p(&[0.0, 1.0, 0.0, 1.0]));
        assert_eq!(o, p(&[1.0, 0.0, 1.0]));
        let (e, o) = p(&[0.0, 0.0, 0.0, 1.0]).even_odd();
        assert_eq!(e, p(&[0.0, 0.0, 0.0, 1.0]));
        assert!(o.is_zero());
        let (e, o) = p(&[1.0, 0.0, 0.0, 1.0]).even_odd();
        assert_eq!(e, p(&[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(o, p(&[1.0]));
    }

    #[test]
    fn odd_unique_root_examples() {
        assert!(odd_unique_root(&p(&[1.0])).unwrap());
        assert!(!odd_unique_root(&p(&[-1.0, 0.0, 1.0])).unwrap());
        assert!(odd_unique_root(&p(&[1.0, 0.0, 1.0])).unwrap());
        assert!(odd_unique_root(&p(&[0.0, 0.0, 1.0])).unwrap()); // x^3
        assert!(!odd_unique_root(&Poly::<f64>::zero()).unwrap());
        assert!(odd_unique_root(&p(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn minima_examples() {
        let m = half_line_minima(&p(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!((m.m_minus, m.m_plus), (0.0, 0.0));

        let m = half_line_minima(&p(&[0.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(m.m_plus, 0.0);
        assert!((m.m_minus + 27.0 / 256.0).abs() < 1e-15);
        assert!((m.argmin_minus + 0.75).abs() < 1e-12);

        let m = half_line_minima(&p(&[0.0, -2.0, 0.0, 1.0])).unwrap();
        assert!((m.m_minus + 1.0).abs() < 1e-15 && (m.m_plus + 1.0).abs() < 1e-15);
        assert!((m.argmin_minus + 1.0).abs() < 1e-12 && (m.argmin_plus - 1.0).abs() < 1e-12);

        assert!(half_line_minima(&p(&[0.0, 0.0, 1.0])).is_err());
        assert!(half_line_minima(&p(&[0.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn outer_branch_examples() {
        let b = outer_branches(&p(&[0.0, 0.0, 0.0, 1.0]), 16.0).unwrap();
        assert!((b.a_of_y - 2.0).abs() < 1e-12 && (b.b_of_y + 2.0).abs() < 1e-12);

        let f = p(&[0.0, 0.0, 1.0, 1.0]);
        let d6 = {
            let b = outer_branches(&f, 1e6).unwrap();
            (b.a_of_y + b.b_of_y + 0.5).abs()
        };
        let d8 = {
            let b = outer_branches(&f, 1e8).unwrap();
            (b.a_of_y + b.b_of_y + 0.5).abs()
        };
        assert!(d6 <= 0.05 && d8 < d6, "{d6} {d8}");

        assert!(matches!(
            outer_branches(&f, -0.2),
            Err(Error::NoOuterBranch { .. })
        ));
    }

    #[test]
    fn display() {
        assert_eq!(p(&[-1.0, 0.0, 1.0, 2.0]).to_string(), "2x^4 + x^3 - x");
        assert_eq!(Poly::<f64>::zero().to_string(), "0");
    }

    #[test]
    fn works_in_single_precision() {
        let f = Poly::<f32>::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = half_line_minima(&f).unwrap();
        assert!((m.m_minus + 27.0 / 256.0).abs() < 1e-6);
    }
}
