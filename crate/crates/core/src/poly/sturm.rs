//! Exact real-root isolation over the rationals.
//!
//! Coefficients arrive as floats and are converted exactly (every finite
//! float is a dyadic rational), so root counts are exact statements about
//! the polynomial the caller actually holds. Roots are isolated by Sturm
//! counts under a Cauchy bound and then refined by exact sign bisection.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub(crate) type Q = BigRational;

/// Dense polynomial over the rationals, ascending powers, no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QPoly(Vec<Q>);

impl QPoly {
    pub fn from_f64(coeffs: &[f64]) -> Option<Self> {
        let mut out = Vec::with_capacity(coeffs.len());
        for &c in coeffs {
            out.push(Q::from_float(c)?);
        }
        Some(Self::trimmed(out))
    }

    fn trimmed(mut c: Vec<Q>) -> Self {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        QPoly(c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lead(&self) -> &Q {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn sign_at(&self, x: &Q) -> i8 {
        sign(&self.eval(x))
    }

    pub fn derivative(&self) -> Self {
        let c = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * Q::from_integer(k.into()))
            .collect();
        Self::trimmed(c)
    }

    /// Number of vanishing low-order coefficients, i.e. the multiplicity of the root at 0.
    pub fn zero_multiplicity(&self) -> usize {
        self.0.iter().take_while(|c| c.is_zero()).count()
    }

    /// Divides by `x^m`, where `m` is the multiplicity of the root at 0.
    pub fn deflate_zero(&self) -> Self {
        QPoly(self.0[self.zero_multiplicity()..].to_vec())
    }

    fn div_rem(&self, d: &QPoly) -> (QPoly, QPoly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let mut r = self.0.clone();
        let dd = d.degree();
        if self.is_zero() || self.degree() < dd {
            return (QPoly(Vec::new()), self.clone());
        }
        let mut q = vec![Q::zero(); self.degree() - dd + 1];
        let dl = d.lead().clone();
        for k in (dd..=self.degree()).rev() {
            let coef = &r[k] / &dl;
            if coef.is_zero() {
                continue;
            }
            for (j, dc) in d.0.iter().enumerate() {
                let idx = k - dd + j;
                r[idx] = &r[idx] - &coef * dc;
            }
            q[k - dd] = coef;
        }
        r.truncate(dd);
        (Self::trimmed(q), Self::trimmed(r))
    }

    fn monic(&self) -> Self {
        let l = self.lead().clone();
        QPoly(self.0.iter().map(|c| c / &l).collect())
    }

    fn gcd(&self, other: &QPoly) -> QPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// Product of the distinct irreducible factors: same real roots, all simple.
    pub fn square_free(&self) -> Self {
        let g = self.gcd(&self.derivative());
        if g.degree() == 0 {
            return self.clone();
        }
        self.div_rem(&g).0
    }

    /// Strict Cauchy bound: every real root lies in (-bound, bound).
    pub fn cauchy_bound(&self) -> Q {
        let lead = self.lead().abs();
        let max = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .fold(Q::zero(), |m, v| if v > m { v } else { m });
        (max + Q::one()).ceil() + Q::one()
    }
}

fn sign(v: &Q) -> i8 {
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

/// Sturm chain p, p', -rem(p, p'), ...
#[derive(Debug, Clone)]
pub(crate) struct SturmChain(Vec<QPoly>);

impl SturmChain {
    pub fn new(p: &QPoly) -> Self {
        let mut chain = vec![p.clone()];
        let mut cur = p.derivative();
        while !cur.is_zero() {
            let prev = chain.last().unwrap();
            let (_, r) = prev.div_rem(&cur);
            chain.push(cur);
            cur = QPoly(r.0.into_iter().map(|c| -c).collect());
        }
        SturmChain(chain)
    }

    fn variations(signs: impl Iterator<Item = i8>) -> usize {
        let mut last = 0i8;
        let mut n = 0;
        for s in signs.filter(|&s| s != 0) {
            if last != 0 && s != last {
                n += 1;
            }
            last = s;
        }
        n
    }

    pub fn variations_at(&self, x: &Q) -> usize {
        Self::variations(self.0.iter().map(|p| p.sign_at(x)))
    }

    pub fn variations_at_pos_inf(&self) -> usize {
        Self::variations(self.0.iter().map(|p| sign(p.lead())))
    }

    /// Sign pattern just to the right of zero: sign of the lowest nonzero coefficient.
    pub fn variations_at_zero_plus(&self) -> usize {
        Self::variations(
            self.0
                .iter()
                .map(|p| p.0.iter().find(|c| !c.is_zero()).map_or(0, sign)),
        )
    }

    /// Distinct real roots in (a, b]; requires `p(a) != 0`.
    pub fn count(&self, a: &Q, b: &Q) -> usize {
        self.variations_at(a).saturating_sub(self.variations_at(b))
    }
}

/// Distinct real roots of a polynomial with positive real part, (0, +inf).
pub(crate) fn count_positive_roots(p: &QPoly) -> usize {
    if p.degree() == 0 {
        return 0;
    }
    let chain = SturmChain::new(&p.square_free());
    chain
        .variations_at_zero_plus()
        .saturating_sub(chain.variations_at_pos_inf())
}

/// Sorted distinct real roots, each located to within `tol`.
///
/// The zero polynomial has no isolated roots and yields an empty list.
pub(crate) fn real_roots(p: &QPoly, tol: f64) -> Vec<f64> {
    if p.degree() == 0 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    if p.zero_multiplicity() > 0 {
        roots.push(0.0);
    }
    let core = p.deflate_zero();
    if core.degree() > 0 {
        let s = core.square_free();
        let chain = SturmChain::new(&s);
        let bound = s.cauchy_bound();
        let lo = -bound.clone();
        let n = chain.count(&lo, &bound);
        let tol = Q::from_float(tol).expect("finite tolerance");
        isolate(&chain, &s, lo, bound, n, &tol, &mut roots);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

fn split_point(s: &QPoly, lo: &Q, hi: &Q) -> Q {
    let width = hi - lo;
    // 1/2, then 1/3, 2/5, 3/7, ... until the split is not itself a root
    let mut frac = Q::new(1.into(), 2.into());
    let mut k: i64 = 1;
    loop {
        let m = lo + &width * &frac;
        if s.sign_at(&m) != 0 {
            return m;
        }
        frac = Q::new(k.into(), (2 * k + 1).into());
        k += 1;
    }
}

fn isolate(
    chain: &SturmChain,
    s: &QPoly,
    lo: Q,
    hi: Q,
    n: usize,
    tol: &Q,
    out: &mut Vec<f64>,
) {
    match n {
        0 => {}
        1 => out.push(refine(s, lo, hi, tol)),
        _ => {
            let m = split_point(s, &lo, &hi);
            let left = chain.count(&lo, &m);
            isolate(chain, s, lo, m.clone(), left, tol, out);
            isolate(chain, s, m, hi, n - left, tol, out);
        }
    }
}

/// Bisection on the exact sign of a square-free polynomial with one root in (lo, hi].
fn refine(s: &QPoly, mut lo: Q, mut hi: Q, tol: &Q) -> f64 {
    let s_lo = s.sign_at(&lo);
    if s.sign_at(&hi) == 0 {
        return hi.to_f64().unwrap_or(f64::NAN);
    }
    let two = Q::from_integer(2.into());
    while &hi - &lo > *tol {
        let m = (&lo + &hi) / &two;
        match s.sign_at(&m) {
            0 => return m.to_f64().unwrap_or(f64::NAN),
            sm if sm == s_lo => lo = m,
            _ => hi = m,
        }
    }
    ((lo + hi) / two).to_f64().unwrap_or(f64::NAN)
}
