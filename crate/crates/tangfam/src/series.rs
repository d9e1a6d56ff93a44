//! Truncated power-series arithmetic.
//!
//! [`UniSeries`] is a univariate series truncated at a fixed cap, generic
//! over [`Coeff`]. Because `UniSeries<C>` itself implements `Coeff`, a
//! bivariate jet is just a series in `t` whose coefficients are series in
//! `xi` — see [`Jet2`]. All the classification machinery (support
//! flattening, graph-coefficient extraction, criminant jets) reduces to the
//! handful of operations here: ring ops, reciprocal, composition and
//! compositional inversion.

use crate::error::{Error, Result};
use crate::scalar::{Coeff, Elementary};
use std::fmt;

/// Univariate power series truncated after degree `cap`.
///
/// All coefficients are stored densely; every series taking part in one
/// computation must share the same cap.
#[derive(Clone, PartialEq)]
pub struct UniSeries<C> {
    coeffs: Vec<C>,
}

impl<C: fmt::Debug> fmt::Debug for UniSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series{:?}", self.coeffs)
    }
}

impl<C: Coeff> UniSeries<C> {
    /// Constant series with the given cap, using `proto` to mint zeros.
    pub fn constant(value: C, cap: usize) -> Self {
        let mut coeffs = Vec::with_capacity(cap + 1);
        let zero = value.zero_like();
        coeffs.push(value);
        for _ in 0..cap {
            coeffs.push(zero.clone());
        }
        UniSeries { coeffs }
    }

    pub fn zero(proto: &C, cap: usize) -> Self {
        Self::constant(proto.zero_like(), cap)
    }

    /// The series `c0 + x` (the variable shifted by a constant).
    pub fn variable(c0: C, cap: usize) -> Self {
        let one = c0.one_like();
        let mut s = Self::constant(c0, cap);
        if cap >= 1 {
            s.coeffs[1] = one;
        }
        s
    }

    pub fn from_coeffs(mut coeffs: Vec<C>, cap: usize) -> Self {
        let proto = coeffs
            .first()
            .cloned()
            .expect("series needs at least one coefficient");
        coeffs.truncate(cap + 1);
        while coeffs.len() < cap + 1 {
            coeffs.push(proto.zero_like());
        }
        UniSeries { coeffs }
    }

    pub fn cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &C {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, k: usize, v: C) {
        self.coeffs[k] = v;
    }

    fn proto(&self) -> &C {
        &self.coeffs[0]
    }

    pub fn scale(&self, s: &C) -> Self {
        UniSeries {
            coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect(),
        }
    }

    /// Formal derivative (cap shrinks conceptually; we keep the same length
    /// and zero the top coefficient).
    pub fn derivative(&self) -> Self {
        let cap = self.cap();
        let zero = self.proto().zero_like();
        let mut coeffs = Vec::with_capacity(cap + 1);
        for k in 1..=cap {
            let kc = self.coeffs[k].from_i64_like(k as i64);
            coeffs.push(self.coeffs[k].mul(&kc));
        }
        coeffs.push(zero);
        UniSeries { coeffs }
    }

    /// Horner evaluation at a point of the coefficient ring.
    pub fn eval(&self, x: &C) -> C {
        let mut acc = self.coeffs[self.cap()].clone();
        for k in (0..self.cap()).rev() {
            acc = acc.mul(x).add(&self.coeffs[k]);
        }
        acc
    }

    /// Composition `self(g)` where `g` must vanish at 0.
    pub fn compose(&self, g: &Self) -> Self {
        assert!(
            g.coeffs[0].is_zero(),
            "composition requires the inner series to vanish at the base point"
        );
        let cap = self.cap();
        let mut acc = Self::constant(self.coeffs[cap].clone(), cap);
        for k in (0..cap).rev() {
            acc = acc.mul(g);
            acc.coeffs[0] = acc.coeffs[0].add(&self.coeffs[k]);
        }
        acc
    }

    /// Compositional inverse: `t(u)` with `self(t(u)) = u`, valid when the
    /// constant term vanishes and the linear term is a unit.
    pub fn invert(&self) -> Result<Self> {
        let cap = self.cap();
        if !self.coeffs[0].is_zero() {
            return Err(Error::NonInvertibleSeries(
                "nonzero constant term".to_string(),
            ));
        }
        let lin_inv = self.coeffs.get(1).and_then(|c| c.recip()).ok_or_else(|| {
            Error::NonInvertibleSeries("linear coefficient is not a unit".to_string())
        })?;
        let zero = self.proto().zero_like();
        let mut tau = Self::zero(&zero, cap);
        if cap >= 1 {
            tau.coeffs[1] = lin_inv.clone();
        }
        // Solve degree by degree: the u^k coefficient of self(tau) must be
        // delta_{k,1}; correct tau_k by the residual over the linear unit.
        for k in 2..=cap {
            let err = self.compose(&tau).coeffs[k].clone();
            tau.coeffs[k] = err.neg().mul(&lin_inv);
        }
        Ok(tau)
    }

    /// Reciprocal series, defined when the constant term is a unit.
    pub fn series_recip(&self) -> Option<Self> {
        let cap = self.cap();
        let inv0 = self.coeffs[0].recip()?;
        let mut out = Self::constant(inv0.clone(), cap);
        for k in 1..=cap {
            let mut acc = self.proto().zero_like();
            for j in 1..=k {
                acc = acc.add(&self.coeffs[j].mul(&out.coeffs[k - j]));
            }
            out.coeffs[k] = acc.neg().mul(&inv0);
        }
        Some(out)
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(self.proto().one_like(), self.cap());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Truncated product.
    pub fn mul(&self, rhs: &Self) -> Self {
        let cap = self.cap();
        let zero = self.proto().zero_like();
        let mut coeffs = vec![zero; cap + 1];
        for i in 0..=cap {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=cap - i {
                if rhs.coeffs[j].is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&self.coeffs[i].mul(&rhs.coeffs[j]));
            }
        }
        UniSeries { coeffs }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        UniSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        UniSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        UniSeries {
            coeffs: self.coeffs.iter().map(|a| a.neg()).collect(),
        }
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> UniSeries<D> {
        UniSeries {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }
}

impl<C: Coeff> Coeff for UniSeries<C> {
    fn zero_like(&self) -> Self {
        UniSeries::zero(self.proto(), self.cap())
    }
    fn one_like(&self) -> Self {
        UniSeries::constant(self.proto().one_like(), self.cap())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }
    fn add(&self, rhs: &Self) -> Self {
        UniSeries::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        UniSeries::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        UniSeries::mul(self, rhs)
    }
    fn neg(&self) -> Self {
        UniSeries::neg(self)
    }
    fn recip(&self) -> Option<Self> {
        self.series_recip()
    }
    fn from_i64_like(&self, n: i64) -> Self {
        UniSeries::constant(self.proto().from_i64_like(n), self.cap())
    }
    fn to_f64(&self) -> f64 {
        self.coeffs[0].to_f64()
    }
    fn elementary_series(kind: Elementary, center: &Self, order: usize) -> Option<Vec<Self>> {
        // Analytic functions of a series: expand about the constant term and
        // recompose. Only needed in float mode; the inner scalar decides.
        let c0 = center.coeffs[0].clone();
        let outer = C::elementary_series(kind, &c0, order)?;
        Some(
            outer
                .into_iter()
                .map(|c| UniSeries::constant(c, center.cap()))
                .collect(),
        )
    }
}

/// Bivariate jet: truncated series in `t` whose coefficients are truncated
/// series in `xi`. Coefficient `(a, b)` is the monomial `xi^a t^b`.
#[derive(Clone, PartialEq)]
pub struct Jet2<C> {
    s: UniSeries<UniSeries<C>>,
}

impl<C: Coeff> fmt::Debug for Jet2<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet2[")?;
        for b in 0..=self.cap() {
            for a in 0..=self.cap() {
                let c = self.coeff(a, b);
                if !c.is_zero() {
                    write!(f, " ({a},{b})={:?}", c)?;
                }
            }
        }
        write!(f, " ]")
    }
}

impl<C: Coeff> Jet2<C> {
    pub fn from_series(s: UniSeries<UniSeries<C>>) -> Self {
        Jet2 { s }
    }

    pub fn constant(value: C, cap: usize) -> Self {
        Jet2 {
            s: UniSeries::constant(UniSeries::constant(value, cap), cap),
        }
    }

    pub fn zero(proto: &C, cap: usize) -> Self {
        Self::constant(proto.zero_like(), cap)
    }

    /// The jet of `xi_0 + xi`.
    pub fn var_xi(base: C, cap: usize) -> Self {
        let inner = UniSeries::variable(base, cap);
        let mut s = UniSeries::constant(inner, cap);
        for b in 1..=cap {
            let z = s.coeff(0).zero_like();
            s.set_coeff(b, z);
        }
        Jet2 { s }
    }

    /// The jet of `t_0 + t`.
    pub fn var_t(base: C, cap: usize) -> Self {
        let mut s = UniSeries::constant(UniSeries::constant(base.clone(), cap), cap);
        if cap >= 1 {
            s.set_coeff(1, UniSeries::constant(base.one_like(), cap));
        }
        Jet2 { s }
    }

    pub fn cap(&self) -> usize {
        self.s.cap()
    }

    /// Coefficient of `xi^a t^b`.
    pub fn coeff(&self, a_xi: usize, b_t: usize) -> &C {
        self.s.coeff(b_t).coeff(a_xi)
    }

    pub fn set_coeff(&mut self, a_xi: usize, b_t: usize, v: C) {
        let mut inner = self.s.coeff(b_t).clone();
        inner.set_coeff(a_xi, v);
        self.s.set_coeff(b_t, inner);
    }

    pub fn proto(&self) -> C {
        self.coeff(0, 0).zero_like()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Jet2 {
            s: self.s.add(&rhs.s),
        }
    }
    pub fn sub(&self, rhs: &Self) -> Self {
        Jet2 {
            s: self.s.sub(&rhs.s),
        }
    }
    pub fn mul(&self, rhs: &Self) -> Self {
        Jet2 {
            s: self.s.mul(&rhs.s),
        }
    }
    pub fn neg(&self) -> Self {
        Jet2 { s: self.s.neg() }
    }
    pub fn pow(&self, n: u32) -> Self {
        Jet2 { s: self.s.pow(n) }
    }
    pub fn scale(&self, c: &C) -> Self {
        let cs = UniSeries::constant(c.clone(), self.cap());
        Jet2 {
            s: self.s.scale(&cs),
        }
    }

    /// Formal partial derivative in `t`.
    pub fn d_t(&self) -> Self {
        Jet2 {
            s: self.s.derivative(),
        }
    }

    /// Formal partial derivative in `xi`.
    pub fn d_xi(&self) -> Self {
        Jet2 {
            s: self.s.map(|inner| inner.derivative()),
        }
    }

    /// Restriction to `t = 0`: the support slice, as a series in `xi`.
    pub fn at_t_zero(&self) -> UniSeries<C> {
        self.s.coeff(0).clone()
    }

    /// View as a series in `t` over the `xi`-series ring.
    pub fn as_t_series(&self) -> &UniSeries<UniSeries<C>> {
        &self.s
    }

    /// Substitute jets for the two variables (both must vanish at the base
    /// point as jets, i.e. have zero constant coefficient).
    pub fn substitute(&self, xi_sub: &Jet2<C>, t_sub: &Jet2<C>) -> Self {
        // Horner in t (outer), then each xi-series coefficient is evaluated
        // on xi_sub by another Horner pass.
        let cap = self.cap();
        let zero = Jet2::zero(&self.proto(), cap);
        let mut acc = zero.clone();
        for b in (0..=cap).rev() {
            acc = acc.mul(t_sub);
            // Evaluate the xi-series coefficient at xi_sub.
            let inner = self.s.coeff(b);
            let mut inner_acc = zero.clone();
            for a in (0..=cap).rev() {
                inner_acc = inner_acc.mul(xi_sub);
                let c = Jet2::constant(inner.coeff(a).clone(), cap);
                inner_acc = inner_acc.add(&c);
            }
            acc = acc.add(&inner_acc);
        }
        acc
    }

    /// Numeric evaluation of the (truncated) jet at offsets from the base.
    pub fn eval(&self, dxi: &C, dt: &C) -> C {
        let inner: Vec<C> = self.s.coeffs().iter().map(|s| s.eval(dxi)).collect();
        let mut acc = inner[self.cap()].clone();
        for k in (0..self.cap()).rev() {
            acc = acc.mul(dt).add(&inner[k]);
        }
        acc
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D + Copy) -> Jet2<D> {
        Jet2 {
            s: self.s.map(|inner| inner.map(f)),
        }
    }

    /// Maximum |coefficient| over total order `lo..=hi`, via the f64 view.
    pub fn max_abs_in_orders(&self, lo: usize, hi: usize) -> f64 {
        let mut m: f64 = 0.0;
        for b in 0..=self.cap() {
            for a in 0..=self.cap() {
                let ord = a + b;
                if ord >= lo && ord <= hi {
                    m = m.max(self.coeff(a, b).to_f64().abs());
                }
            }
        }
        m
    }
}

/// Invert a planar map germ given by jets: find `(U, V)` with
/// `(p(U, V), q(V, U-style args)) = (x, y)` up to the cap. Both input jets
/// must vanish at the origin and have an invertible linear part.
pub fn invert_map_jets<C: Coeff>(p: &Jet2<C>, q: &Jet2<C>) -> Result<(Jet2<C>, Jet2<C>)> {
    let cap = p.cap();
    let proto = p.coeff(0, 0).zero_like();
    if !p.coeff(0, 0).is_zero() || !q.coeff(0, 0).is_zero() {
        return Err(Error::NonInvertibleSeries(
            "map jet does not fix the origin".to_string(),
        ));
    }
    // Linear part [[a, b], [c, d]] acting on (xi, t).
    let a = p.coeff(1, 0).clone();
    let b = p.coeff(0, 1).clone();
    let c = q.coeff(1, 0).clone();
    let d = q.coeff(0, 1).clone();
    let det = a.mul(&d).sub(&b.mul(&c));
    let det_inv = det.recip().ok_or_else(|| {
        Error::NonInvertibleSeries("linear part of map jet is singular".to_string())
    })?;
    // Inverse linear part.
    let ia = d.mul(&det_inv);
    let ib = b.neg().mul(&det_inv);
    let ic = c.neg().mul(&det_inv);
    let id = a.mul(&det_inv);

    let x = Jet2::var_xi(proto.clone(), cap);
    let y = Jet2::var_t(proto.clone(), cap);
    let lin = |px: &Jet2<C>, py: &Jet2<C>, m1: &C, m2: &C| px.scale(m1).add(&py.scale(m2));

    let mut u = lin(&x, &y, &ia, &ib);
    let mut v = lin(&x, &y, &ic, &id);
    // Newton-style degree sweep: after each correction the composition is
    // the identity through one more total order.
    for _ in 2..=cap {
        let ex = p.substitute(&u, &v).sub(&x);
        let ey = q.substitute(&u, &v).sub(&y);
        u = u.sub(&lin(&ex, &ey, &ia, &ib));
        v = v.sub(&lin(&ex, &ey, &ic, &id));
    }
    Ok((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::rational::BigRational;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn fser(coeffs: &[f64], cap: usize) -> UniSeries<f64> {
        UniSeries::from_coeffs(coeffs.to_vec(), cap)
    }

    #[test]
    fn mul_truncates() {
        let a = fser(&[1.0, 1.0], 3); // 1 + x
        let b = a.mul(&a).mul(&a).mul(&a); // (1+x)^4 truncated at x^3
        assert_eq!(b.coeffs(), &[1.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn compose_and_invert() {
        // f(x) = x + 2x^2; inverse g with f(g(u)) = u.
        let f = fser(&[0.0, 1.0, 2.0], 5);
        let g = f.invert().unwrap();
        let id = f.compose(&g);
        assert!((id.coeff(1) - 1.0).abs() < 1e-12);
        for k in [0usize, 2, 3, 4, 5] {
            assert!(id.coeff(k).abs() < 1e-9, "k={k}: {}", id.coeff(k));
        }
    }

    #[test]
    fn recip_matches_geometric() {
        let f = fser(&[1.0, -1.0], 4); // 1 - x
        let r = f.series_recip().unwrap();
        assert_eq!(r.coeffs(), &[1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn rational_inversion_is_exact() {
        let cap = 6;
        let zero = rat(0, 1);
        let mut f = UniSeries::zero(&zero, cap);
        f.set_coeff(1, rat(2, 1));
        f.set_coeff(3, rat(1, 3));
        let g = f.invert().unwrap();
        let id = f.compose(&g);
        for k in 0..=cap {
            let expected = if k == 1 { rat(1, 1) } else { rat(0, 1) };
            assert_eq!(*id.coeff(k), expected, "k={k}");
        }
    }

    #[test]
    fn jet_partial_derivatives() {
        // y(xi, t) = xi * t^2 : d/dt -> 2 xi t, d/dxi -> t^2.
        let cap = 4;
        let xi = Jet2::var_xi(0.0_f64, cap);
        let t = Jet2::var_t(0.0_f64, cap);
        let y = xi.mul(&t).mul(&t);
        assert_eq!(*y.coeff(1, 2), 1.0);
        let yt = y.d_t();
        assert_eq!(*yt.coeff(1, 1), 2.0);
        let yxi = y.d_xi();
        assert_eq!(*yxi.coeff(0, 2), 1.0);
    }

    #[test]
    fn jet_substitution_composes() {
        // p(xi,t) = xi + t, substitute xi -> xi, t -> xi*t: expect xi + xi t.
        let cap = 3;
        let xi = Jet2::var_xi(0.0_f64, cap);
        let t = Jet2::var_t(0.0_f64, cap);
        let p = xi.add(&t);
        let sub = p.substitute(&xi, &xi.mul(&t));
        assert_eq!(*sub.coeff(1, 0), 1.0);
        assert_eq!(*sub.coeff(1, 1), 1.0);
        assert_eq!(*sub.coeff(0, 1), 0.0);
    }

    #[test]
    fn map_inversion_roundtrip() {
        // phi(xi,t) = (xi + t^2, t - xi^2): invert, then check composition.
        let cap = 6;
        let xi = Jet2::var_xi(0.0_f64, cap);
        let t = Jet2::var_t(0.0_f64, cap);
        let p = xi.add(&t.mul(&t));
        let q = t.sub(&xi.mul(&xi));
        let (u, v) = invert_map_jets(&p, &q).unwrap();
        let back_x = p.substitute(&u, &v);
        let back_y = q.substitute(&u, &v);
        for a in 0..=cap {
            for b in 0..=cap - a {
                let ex = if (a, b) == (1, 0) { 1.0 } else { 0.0 };
                let ey = if (a, b) == (0, 1) { 1.0 } else { 0.0 };
                assert!((back_x.coeff(a, b) - ex).abs() < 1e-9, "x ({a},{b})");
                assert!((back_y.coeff(a, b) - ey).abs() < 1e-9, "y ({a},{b})");
            }
        }
    }
}
