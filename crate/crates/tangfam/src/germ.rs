//! Plane map germs: representation, evaluation, truncated Taylor jets and
//! the tangential-family check.

use crate::error::{Error, Result};
use crate::linalg::gauss_solve;
use crate::scalar::{rational_from_f64, NumericMode, Scalar};
use crate::series::Jet2;
use crate::expr::{ScalarExpression, Var};
use num::rational::BigRational;
use num::{BigInt, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Maximum jet order supported by the backends.
pub const MAX_JET_ORDER: usize = 8;

/// Tolerance for the germ base-point condition |f(0,0)| = 0.
pub const GERM_ORIGIN_TOL: f64 = 1e-12;

/// Rectangular domain in the `(xi, t)` parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub xi: (f64, f64),
    pub t: (f64, f64),
}

impl DomainBox {
    pub fn new(xi_min: f64, xi_max: f64, t_min: f64, t_max: f64) -> Self {
        DomainBox {
            xi: (xi_min, xi_max),
            t: (t_min, t_max),
        }
    }

    /// Default germ domain.
    pub fn unit() -> Self {
        DomainBox::new(-1.0, 1.0, -1.0, 1.0)
    }

    /// Default analysis window for envelope tracing.
    pub fn half() -> Self {
        DomainBox::new(-0.5, 0.5, -0.5, 0.5)
    }

    pub fn contains(&self, xi: f64, t: f64) -> bool {
        xi >= self.xi.0 && xi <= self.xi.1 && t >= self.t.0 && t <= self.t.1
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        DomainBox::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.xi.0, self.xi.1, self.t.0, self.t.1]
    }
}

type BlackBoxFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// One scalar component of a germ: a parsed expression or an opaque
/// numeric evaluator.
#[derive(Clone)]
pub enum Component {
    Expr(ScalarExpression),
    BlackBox(BlackBoxFn),
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Expr(e) => write!(f, "Expr({e})"),
            Component::BlackBox(_) => write!(f, "BlackBox(..)"),
        }
    }
}

impl Component {
    pub fn eval(&self, xi: f64, t: f64) -> f64 {
        match self {
            Component::Expr(e) => e.eval(xi, t, 0.0),
            Component::BlackBox(f) => f(xi, t),
        }
    }
}

/// Which of the two components of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Backend used for jets; decides numeric mode and thresholds downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GermKind {
    /// Both components are polynomial expressions with rational constants.
    ExactPolynomial,
    /// Expression-backed but containing elementary functions.
    FloatExpression,
    /// At least one component is an opaque evaluator.
    BlackBox,
}

impl GermKind {
    pub fn numeric_mode(self) -> NumericMode {
        match self {
            GermKind::ExactPolynomial => NumericMode::Exact,
            GermKind::FloatExpression => NumericMode::Float,
            GermKind::BlackBox => NumericMode::BlackBox,
        }
    }
}

/// A two-component map germ `f(xi, t) = (x, y)` at the origin.
#[derive(Debug, Clone)]
pub struct PlaneMapGerm {
    x: Component,
    y: Component,
    domain: DomainBox,
    strict_bounds: bool,
    kind: GermKind,
}

impl PlaneMapGerm {
    /// Construct a germ, enforcing `f(0,0) = (0,0)` within `1e-12`.
    pub fn new(x: Component, y: Component, domain: DomainBox) -> Result<Self> {
        let g = Self::family(x, y, domain);
        let (x0, y0) = g.evaluate_unchecked(0.0, 0.0);
        let norm = x0.hypot(y0);
        if !norm.is_finite() {
            return Err(Error::NonFiniteResult);
        }
        if norm > GERM_ORIGIN_TOL {
            return Err(Error::NotAGerm(norm));
        }
        Ok(g)
    }

    /// Construct a family parameterization without the origin condition
    /// (used for deformations, which may move the base point).
    pub fn family(x: Component, y: Component, domain: DomainBox) -> Self {
        let kind = match (&x, &y) {
            (Component::Expr(a), Component::Expr(b)) => {
                if a.is_polynomial() && b.is_polynomial() {
                    GermKind::ExactPolynomial
                } else {
                    GermKind::FloatExpression
                }
            }
            _ => GermKind::BlackBox,
        };
        PlaneMapGerm {
            x,
            y,
            domain,
            strict_bounds: false,
            kind,
        }
    }

    pub fn from_exprs(x: ScalarExpression, y: ScalarExpression, domain: DomainBox) -> Result<Self> {
        Self::new(Component::Expr(x), Component::Expr(y), domain)
    }

    /// Parse both components with the family grammar.
    pub fn parse(x: &str, y: &str, domain: DomainBox) -> Result<Self> {
        Self::from_exprs(ScalarExpression::parse(x)?, ScalarExpression::parse(y)?, domain)
    }

    pub fn black_box(
        f: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
        domain: DomainBox,
    ) -> Result<Self> {
        let f = Arc::new(f);
        let fx = f.clone();
        let fy = f;
        Self::new(
            Component::BlackBox(Arc::new(move |xi, t| fx(xi, t).0)),
            Component::BlackBox(Arc::new(move |xi, t| fy(xi, t).1)),
            domain,
        )
    }

    pub fn with_strict_bounds(mut self, strict: bool) -> Self {
        self.strict_bounds = strict;
        self
    }

    pub fn kind(&self) -> GermKind {
        self.kind
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn component(&self, axis: Axis) -> &Component {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn expressions(&self) -> Option<(&ScalarExpression, &ScalarExpression)> {
        match (&self.x, &self.y) {
            (Component::Expr(a), Component::Expr(b)) => Some((a, b)),
            _ => None,
        }
    }

    fn evaluate_unchecked(&self, xi: f64, t: f64) -> (f64, f64) {
        (self.x.eval(xi, t), self.y.eval(xi, t))
    }

    /// Evaluate the map. With strict bounds enabled, points outside the
    /// domain box are rejected.
    pub fn evaluate(&self, xi: f64, t: f64) -> Result<(f64, f64)> {
        if self.strict_bounds && !self.domain.contains(xi, t) {
            return Err(Error::DomainViolation(xi, t));
        }
        let (x, y) = self.evaluate_unchecked(xi, t);
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFiniteResult);
        }
        Ok((x, y))
    }

    /// Jacobian matrix `[[dx/dxi, dx/dt], [dy/dxi, dy/dt]]` at a point.
    pub fn jacobian_at(&self, xi: f64, t: f64) -> Result<[[f64; 2]; 2]> {
        let jx = component_jet_f64(&self.x, (xi, t), 1)?;
        let jy = component_jet_f64(&self.y, (xi, t), 1)?;
        Ok([
            [*jx.coeff(1, 0), *jx.coeff(0, 1)],
            [*jy.coeff(1, 0), *jy.coeff(0, 1)],
        ])
    }

    /// The determinant of the Jacobian as an evaluable, jet-capable field.
    /// Exact (symbolically differentiated) when the germ is
    /// expression-backed; finite differences otherwise.
    pub fn jacobian_determinant(&self) -> Result<ScalarField> {
        if let (Component::Expr(ex), Component::Expr(ey)) = (&self.x, &self.y) {
            let sym = (|| -> Result<ScalarExpression> {
                let x_xi = ex.derivative(Var::Xi)?;
                let x_t = ex.derivative(Var::T)?;
                let y_xi = ey.derivative(Var::Xi)?;
                let y_t = ey.derivative(Var::T)?;
                Ok(x_xi.mul(&y_t).sub(&x_t.mul(&y_xi)))
            })();
            if let Ok(expr) = sym {
                return Ok(ScalarField {
                    inner: Component::Expr(expr),
                    kind: self.kind,
                });
            }
        }
        let g = self.clone();
        Ok(ScalarField {
            inner: Component::BlackBox(Arc::new(move |xi, t| {
                g.jacobian_at(xi, t)
                    .map(|j| j[0][0] * j[1][1] - j[0][1] * j[1][0])
                    .unwrap_or(f64::NAN)
            })),
            kind: GermKind::BlackBox,
        })
    }

    /// Jet of one component about `base`, order `n <= 8`, in whichever
    /// numeric mode the germ supports.
    pub fn component_jet(&self, axis: Axis, base: (f64, f64), order: usize) -> Result<TruncatedSeries> {
        if order > MAX_JET_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        let comp = self.component(axis);
        match self.kind {
            GermKind::ExactPolynomial => {
                let jet = component_jet_exact(comp, base, order)?;
                Ok(TruncatedSeries::exact(base, order, jet))
            }
            _ => {
                let jet = component_jet_f64(comp, base, order)?;
                let mode = self.kind.numeric_mode();
                Ok(TruncatedSeries::floating(base, order, jet, mode))
            }
        }
    }

    /// Both component jets at the origin, keeping the exact/float split.
    pub fn jet_pair(&self, order: usize) -> Result<JetPair> {
        self.jet_pair_at((0.0, 0.0), order)
    }

    pub fn jet_pair_at(&self, base: (f64, f64), order: usize) -> Result<JetPair> {
        if order > MAX_JET_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        match self.kind {
            GermKind::ExactPolynomial => Ok(JetPair::Exact {
                x: component_jet_exact(&self.x, base, order)?,
                y: component_jet_exact(&self.y, base, order)?,
            }),
            _ => Ok(JetPair::Float {
                x: component_jet_f64(&self.x, base, order)?,
                y: component_jet_f64(&self.y, base, order)?,
                mode: self.kind.numeric_mode(),
            }),
        }
    }

    /// Germ recentered at the support point `xi0`: the map
    /// `(xi, t) -> f(xi0 + xi, t) - f(xi0, 0)`.
    pub fn recenter(&self, xi0: f64) -> Result<PlaneMapGerm> {
        let domain = self.domain;
        match (&self.x, &self.y) {
            (Component::Expr(ex), Component::Expr(ey)) => {
                let shift = ScalarExpression::variable(Var::Xi).add(&ScalarExpression::constant(
                    crate::expr::Constant::from_f64(xi0)?,
                ));
                let sx = ex.substitute(Var::Xi, &shift);
                let sy = ey.substitute(Var::Xi, &shift);
                // Subtract the new base value exactly when possible.
                let (cx, cy) = if self.kind == GermKind::ExactPolynomial {
                    let xi0r = rational_from_f64(xi0).ok_or(Error::NonFiniteResult)?;
                    let zero = BigRational::zero();
                    (
                        constant_from_rational(ex.eval_rational(&xi0r, &zero, &zero)?),
                        constant_from_rational(ey.eval_rational(&xi0r, &zero, &zero)?),
                    )
                } else {
                    (
                        crate::expr::Constant::from_f64(ex.eval(xi0, 0.0, 0.0))?,
                        crate::expr::Constant::from_f64(ey.eval(xi0, 0.0, 0.0))?,
                    )
                };
                PlaneMapGerm::new(
                    Component::Expr(sx.sub(&ScalarExpression::constant(cx))),
                    Component::Expr(sy.sub(&ScalarExpression::constant(cy))),
                    domain,
                )
            }
            _ => {
                let fx = self.x.clone();
                let fy = self.y.clone();
                let bx = fx.eval(xi0, 0.0);
                let by = fy.eval(xi0, 0.0);
                PlaneMapGerm::new(
                    Component::BlackBox(Arc::new(move |xi, t| fx.eval(xi0 + xi, t) - bx)),
                    Component::BlackBox(Arc::new(move |xi, t| fy.eval(xi0 + xi, t) - by)),
                    domain,
                )
            }
        }
    }

    /// Tangential-family diagnostics over `samples` points on `t = 0`.
    pub fn tangency_diagnostics(&self, samples: usize) -> Result<TangencyDiagnostics> {
        let samples = samples.max(3);
        let (lo, hi) = self.domain.xi;
        let mut records = Vec::with_capacity(samples);
        let mut verdict = TangencyVerdict::Tangential;
        let mut notes = Vec::new();
        for i in 0..samples {
            let xi = lo + (hi - lo) * (i as f64 + 0.5) / samples as f64;
            let j = self.jacobian_at(xi, 0.0)?;
            let d_xi = [j[0][0], j[1][0]];
            let d_t = [j[0][1], j[1][1]];
            let n_xi = d_xi[0].hypot(d_xi[1]);
            let n_t = d_t[0].hypot(d_t[1]);
            let cross = (d_xi[0] * d_t[1] - d_xi[1] * d_t[0]).abs();
            let eps_par = 1e-9 * n_xi * n_t;
            let eps_nz = 1e-9;

            let mut sample_ok = true;
            let mut sample_inconclusive = false;
            let mut check = |value: f64, threshold: f64, fail_low: bool, what: &str| {
                // `fail_low`: failing when the value is below the threshold
                // (norms); otherwise failing when above (parallelism defect).
                let bad = if fail_low {
                    value <= threshold
                } else {
                    value >= threshold
                };
                let near = value > threshold * 0.1 && value < threshold * 10.0;
                if bad {
                    sample_ok = false;
                    notes.push(format!("xi={xi:.4}: {what} (value {value:.3e})"));
                }
                if near {
                    sample_inconclusive = true;
                }
            };
            check(cross, eps_par.max(f64::MIN_POSITIVE), false, "partial derivatives not parallel");
            check(n_xi, eps_nz, true, "support velocity vanishes");
            check(n_t, eps_nz, true, "curve velocity vanishes");

            if !sample_ok {
                verdict = TangencyVerdict::NotTangential;
            } else if sample_inconclusive && verdict == TangencyVerdict::Tangential {
                verdict = TangencyVerdict::Inconclusive;
            }
            records.push(TangencySample {
                xi,
                d_xi,
                d_t,
                cross,
                eps_par,
                norm_xi: n_xi,
                norm_t: n_t,
            });
        }
        Ok(TangencyDiagnostics {
            samples: records,
            verdict,
            notes,
        })
    }

    /// Convenience wrapper: is the parameterized family tangential?
    pub fn is_tangential_family(&self, samples: usize) -> Result<bool> {
        Ok(self.tangency_diagnostics(samples)?.verdict == TangencyVerdict::Tangential)
    }
}

fn constant_from_rational(r: BigRational) -> crate::expr::Constant {
    crate::expr::Constant::from_rational(r)
}

/// Scalar field derived from a germ (e.g. `det Df`), evaluable and
/// jet-capable just like a component.
#[derive(Debug, Clone)]
pub struct ScalarField {
    inner: Component,
    kind: GermKind,
}

impl ScalarField {
    pub fn from_expression(e: ScalarExpression) -> Self {
        let kind = if e.is_polynomial() {
            GermKind::ExactPolynomial
        } else {
            GermKind::FloatExpression
        };
        ScalarField {
            inner: Component::Expr(e),
            kind,
        }
    }

    pub fn eval(&self, xi: f64, t: f64) -> f64 {
        self.inner.eval(xi, t)
    }

    pub fn expression(&self) -> Option<&ScalarExpression> {
        match &self.inner {
            Component::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn kind(&self) -> GermKind {
        self.kind
    }

    pub fn taylor_jet(&self, base: (f64, f64), order: usize) -> Result<TruncatedSeries> {
        if order > MAX_JET_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        match self.kind {
            GermKind::ExactPolynomial => Ok(TruncatedSeries::exact(
                base,
                order,
                component_jet_exact(&self.inner, base, order)?,
            )),
            _ => Ok(TruncatedSeries::floating(
                base,
                order,
                component_jet_f64(&self.inner, base, order)?,
                self.kind.numeric_mode(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Jet backends.
// ---------------------------------------------------------------------------

fn rational_pair(base: (f64, f64)) -> Result<(BigRational, BigRational)> {
    Ok((
        rational_from_f64(base.0).ok_or(Error::NonFiniteResult)?,
        rational_from_f64(base.1).ok_or(Error::NonFiniteResult)?,
    ))
}

/// Exact rational jet of a polynomial expression component.
pub fn component_jet_exact(
    comp: &Component,
    base: (f64, f64),
    order: usize,
) -> Result<Jet2<BigRational>> {
    let expr = match comp {
        Component::Expr(e) if e.is_polynomial() => e,
        Component::Expr(_) => return Err(Error::NonPolynomialExact),
        Component::BlackBox(_) => return Err(Error::NonPolynomialExact),
    };
    let (bx, bt) = rational_pair(base)?;
    let xi = Jet2::var_xi(bx, order);
    let t = Jet2::var_t(bt, order);
    expr.eval_jet(&xi, &t, &BigRational::zero())
}

/// Floating jet: series composition for expressions, central finite
/// differences with one Richardson level for black boxes.
pub fn component_jet_f64(comp: &Component, base: (f64, f64), order: usize) -> Result<Jet2<f64>> {
    match comp {
        Component::Expr(e) => {
            let xi = Jet2::var_xi(base.0, order);
            let t = Jet2::var_t(base.1, order);
            e.eval_jet(&xi, &t, &0.0)
        }
        Component::BlackBox(f) => fd_jet(|xi, t| f(xi, t), base, order),
    }
}

/// Base finite-difference step (per the jet design: `h = 1e-3` for the
/// low orders that the classification predicates consume).
pub const FD_BASE_STEP: f64 = 1e-3;

/// Step scaling per derivative order. Fourth and higher derivatives need a
/// larger step: at `h = 1e-3` the f64 round-off on a 4th-order stencil is
/// ~1e-4, far above the 1e-6 agreement target, while truncation on the
/// smooth inputs here stays negligible at the widened steps.
fn fd_step(order: usize) -> f64 {
    let scale = match order {
        0..=3 => 1.0,
        4 => 10.0,
        5 | 6 => 20.0,
        _ => 40.0,
    };
    FD_BASE_STEP * scale
}

/// Central-difference weights of derivative order `m` on integer offsets
/// `-k..=k`, exact (solved in rational arithmetic), with `O(h^2)` error.
fn central_weights(m: usize) -> Vec<(i64, f64)> {
    let k = m / 2 + 1;
    let offsets: Vec<i64> = (-(k as i64)..=k as i64).collect();
    let n = offsets.len();
    let rat = |v: i64| BigRational::from_integer(BigInt::from(v));
    let mut a = vec![vec![rat(0); n]; n];
    for (j, &o) in offsets.iter().enumerate() {
        let mut p = rat(1);
        for row in a.iter_mut().take(n) {
            row[j] = p.clone();
            p *= rat(o);
        }
    }
    let mut b = vec![rat(0); n];
    let mut fact = rat(1);
    for i in 1..=m {
        fact *= rat(i as i64);
    }
    b[m] = fact;
    let w = gauss_solve(a, b).expect("Vandermonde system is nonsingular");
    offsets
        .into_iter()
        .zip(w.into_iter().map(|r| crate::scalar::rational_to_f64(&r)))
        .collect()
}

/// Mixed partial `d^a_xi d^b_t f / (a! b!)` by tensor-product central
/// differences at step `h`, evaluated around `base`.
fn fd_coefficient(
    f: &impl Fn(f64, f64) -> f64,
    base: (f64, f64),
    a: usize,
    b: usize,
    h: f64,
) -> f64 {
    let wa = central_weights(a);
    let wb = central_weights(b);
    let mut acc = 0.0;
    for &(oa, ca) in &wa {
        for &(ob, cb) in &wb {
            acc += ca * cb * f(base.0 + oa as f64 * h, base.1 + ob as f64 * h);
        }
    }
    let mut fact = 1.0;
    for i in 1..=a {
        fact *= i as f64;
    }
    for i in 1..=b {
        fact *= i as f64;
    }
    acc / h.powi((a + b) as i32) / fact
}

/// Finite-difference jet with one Richardson extrapolation level
/// (combining steps `h` and `h/2` lifts the `O(h^2)` error to `O(h^4)`).
pub fn fd_jet(f: impl Fn(f64, f64) -> f64, base: (f64, f64), order: usize) -> Result<Jet2<f64>> {
    let mut jet = Jet2::zero(&0.0_f64, order);
    for a in 0..=order {
        for b in 0..=order - a {
            let c = if a == 0 && b == 0 {
                f(base.0, base.1)
            } else {
                let h = fd_step(a + b);
                let coarse = fd_coefficient(&f, base, a, b, h);
                let fine = fd_coefficient(&f, base, a, b, h / 2.0);
                (4.0 * fine - coarse) / 3.0
            };
            if !c.is_finite() {
                return Err(Error::NonFiniteResult);
            }
            if c.abs() > 1e6 {
                return Err(Error::IllConditionedJet(c.abs()));
            }
            jet.set_coeff(a, b, c);
        }
    }
    Ok(jet)
}

// ---------------------------------------------------------------------------
// Public truncated-series view.
// ---------------------------------------------------------------------------

/// Bivariate Taylor coefficients of a scalar quantity up to a total order,
/// in exact or floating arithmetic.
#[derive(Debug, Clone)]
pub struct TruncatedSeries {
    base: (f64, f64),
    order: usize,
    data: SeriesData,
    mode: NumericMode,
}

#[derive(Debug, Clone)]
enum SeriesData {
    Exact(Jet2<BigRational>),
    Float(Jet2<f64>),
}

impl TruncatedSeries {
    pub fn exact(base: (f64, f64), order: usize, jet: Jet2<BigRational>) -> Self {
        TruncatedSeries {
            base,
            order,
            data: SeriesData::Exact(jet),
            mode: NumericMode::Exact,
        }
    }

    pub fn floating(base: (f64, f64), order: usize, jet: Jet2<f64>, mode: NumericMode) -> Self {
        TruncatedSeries {
            base,
            order,
            data: SeriesData::Float(jet),
            mode,
        }
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mode(&self) -> NumericMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.data, SeriesData::Exact(_))
    }

    /// Coefficient of `(xi - xi0)^a (t - t0)^b`; zero outside `a + b <= order`.
    pub fn coeff(&self, a: usize, b: usize) -> Scalar {
        if a + b > self.order {
            return Scalar::Float(0.0);
        }
        match &self.data {
            SeriesData::Exact(j) => Scalar::Rational(j.coeff(a, b).clone()),
            SeriesData::Float(j) => Scalar::Float(*j.coeff(a, b)),
        }
    }

    pub fn coeff_f64(&self, a: usize, b: usize) -> f64 {
        self.coeff(a, b).to_f64()
    }

    /// Triangular coefficient table `(a, b, value)` with `a + b <= order`.
    pub fn table(&self) -> Vec<(usize, usize, Scalar)> {
        let mut out = Vec::new();
        for total in 0..=self.order {
            for a in 0..=total {
                out.push((a, total - a, self.coeff(a, total - a)));
            }
        }
        out
    }

    pub fn as_float_jet(&self) -> Jet2<f64> {
        match &self.data {
            SeriesData::Exact(j) => j.map(|c| crate::scalar::rational_to_f64(c)),
            SeriesData::Float(j) => j.clone(),
        }
    }

    fn binary(&self, rhs: &TruncatedSeries, f_ex: impl Fn(&Jet2<BigRational>, &Jet2<BigRational>) -> Jet2<BigRational>, f_fl: impl Fn(&Jet2<f64>, &Jet2<f64>) -> Jet2<f64>) -> TruncatedSeries {
        assert_eq!(self.base, rhs.base, "series must share a base point");
        assert_eq!(self.order, rhs.order, "series must share the order");
        match (&self.data, &rhs.data) {
            (SeriesData::Exact(a), SeriesData::Exact(b)) => {
                TruncatedSeries::exact(self.base, self.order, f_ex(a, b))
            }
            _ => {
                let a = self.as_float_jet();
                let b = rhs.as_float_jet();
                let mode = if self.mode == NumericMode::BlackBox || rhs.mode == NumericMode::BlackBox
                {
                    NumericMode::BlackBox
                } else {
                    NumericMode::Float
                };
                TruncatedSeries::floating(self.base, self.order, f_fl(&a, &b), mode)
            }
        }
    }

    pub fn add(&self, rhs: &TruncatedSeries) -> TruncatedSeries {
        self.binary(rhs, |a, b| a.add(b), |a, b| a.add(b))
    }

    pub fn mul(&self, rhs: &TruncatedSeries) -> TruncatedSeries {
        self.binary(rhs, |a, b| a.mul(b), |a, b| a.mul(b))
    }

    /// Substitute two series (vanishing at the base point) for the
    /// variables of `self`.
    pub fn compose(&self, xi_sub: &TruncatedSeries, t_sub: &TruncatedSeries) -> TruncatedSeries {
        match (&self.data, &xi_sub.data, &t_sub.data) {
            (SeriesData::Exact(s), SeriesData::Exact(u), SeriesData::Exact(v)) => {
                TruncatedSeries::exact(xi_sub.base, self.order, s.substitute(u, v))
            }
            _ => {
                let s = self.as_float_jet();
                let u = xi_sub.as_float_jet();
                let v = t_sub.as_float_jet();
                TruncatedSeries::floating(xi_sub.base, self.order, s.substitute(&u, &v), self.mode)
            }
        }
    }

    /// Evaluate the truncated polynomial at offsets from the base point.
    pub fn eval(&self, dxi: f64, dt: f64) -> f64 {
        self.as_float_jet().eval(&dxi, &dt)
    }
}

// ---------------------------------------------------------------------------
// Internal jet pair used by the classification pipeline.
// ---------------------------------------------------------------------------

/// Component jets of a germ at a base point, tagged by arithmetic.
#[derive(Debug, Clone)]
pub enum JetPair {
    Exact {
        x: Jet2<BigRational>,
        y: Jet2<BigRational>,
    },
    Float {
        x: Jet2<f64>,
        y: Jet2<f64>,
        mode: NumericMode,
    },
}

impl JetPair {
    pub fn mode(&self) -> NumericMode {
        match self {
            JetPair::Exact { .. } => NumericMode::Exact,
            JetPair::Float { mode, .. } => *mode,
        }
    }
}

// ---------------------------------------------------------------------------
// Tangency diagnostics.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TangencyVerdict {
    Tangential,
    NotTangential,
    Inconclusive,
}

/// Per-sample derivative data along `t = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct TangencySample {
    pub xi: f64,
    pub d_xi: [f64; 2],
    pub d_t: [f64; 2],
    /// Absolute cross product of the two partials (parallelism defect).
    pub cross: f64,
    pub eps_par: f64,
    pub norm_xi: f64,
    pub norm_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyDiagnostics {
    pub samples: Vec<TangencySample>,
    pub verdict: TangencyVerdict,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Germ files.
// ---------------------------------------------------------------------------

/// On-disk germ description: `{"x": expr, "y": expr, "box": [..; 4]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GermSpec {
    pub x: String,
    pub y: String,
    #[serde(rename = "box", default = "default_box")]
    pub domain: [f64; 4],
}

fn default_box() -> [f64; 4] {
    [-1.0, 1.0, -1.0, 1.0]
}

impl GermSpec {
    pub fn build(&self) -> Result<PlaneMapGerm> {
        PlaneMapGerm::parse(&self.x, &self.y, DomainBox::from_array(self.domain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn germ(x: &str, y: &str) -> PlaneMapGerm {
        PlaneMapGerm::parse(x, y, DomainBox::unit()).unwrap()
    }

    /// Representative of singularity I.
    pub fn fold() -> PlaneMapGerm {
        germ("xi + t", "t^2")
    }

    /// Representative of singularity II.
    pub fn second_type() -> PlaneMapGerm {
        germ("xi + t", "xi*t^2")
    }

    #[test]
    fn evaluates_representatives() {
        let f = second_type();
        let p = f.evaluate(0.1, 0.2).unwrap();
        assert!((p.0 - 0.3).abs() < 1e-15);
        assert!((p.1 - 0.004).abs() < 1e-15);
        assert_eq!(fold().evaluate(0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn strict_bounds_reject_outside_points() {
        let f = second_type().with_strict_bounds(true);
        assert!(matches!(
            f.evaluate(1.0, 2.0),
            Err(Error::DomainViolation(_, _))
        ));
    }

    #[test]
    fn rejects_non_germ() {
        let err = PlaneMapGerm::parse("xi + 1", "t", DomainBox::unit()).unwrap_err();
        assert!(matches!(err, Error::NotAGerm(_)));
    }

    #[test]
    fn jet_of_fold_y_component() {
        let f = fold();
        let s = f.component_jet(Axis::Y, (0.0, 0.0), 3).unwrap();
        assert!(s.is_exact());
        for (a, b, c) in s.table() {
            let expect = if (a, b) == (0, 2) { 1.0 } else { 0.0 };
            assert_eq!(c.to_f64(), expect, "({a},{b})");
        }
    }

    #[test]
    fn jet_of_second_type_y_component() {
        let f = second_type();
        let s = f.component_jet(Axis::Y, (0.0, 0.0), 3).unwrap();
        for (a, b, c) in s.table() {
            let expect = if (a, b) == (1, 2) { 1.0 } else { 0.0 };
            assert_eq!(c.to_f64(), expect, "({a},{b})");
        }
    }

    #[test]
    fn jet_of_constant_component_is_zero() {
        let f = PlaneMapGerm::parse("xi", "0*t", DomainBox::unit()).unwrap();
        let s = f.component_jet(Axis::Y, (0.0, 0.0), 5).unwrap();
        assert!(s.table().iter().all(|(_, _, c)| c.is_zero()));
    }

    #[test]
    fn determinant_oracles() {
        // Symbolic determinants, checked against hand differentiation on a
        // sample grid: f_II -> 2 xi t - t^2, f_I -> 2t, identity -> 1.
        let det = second_type().jacobian_determinant().unwrap();
        for (xi, t) in [(0.3, 0.2), (-0.4, 0.1), (0.0, 0.0), (0.25, -0.3)] {
            assert!(
                (det.eval(xi, t) - (2.0 * xi * t - t * t)).abs() < 1e-14,
                "({xi},{t})"
            );
        }
        let det = fold().jacobian_determinant().unwrap();
        for (xi, t) in [(0.3, 0.2), (-0.4, 0.1)] {
            assert!((det.eval(xi, t) - 2.0 * t).abs() < 1e-14);
        }
        let det = germ("xi", "t").jacobian_determinant().unwrap();
        assert_eq!(det.eval(0.37, -0.8), 1.0);
    }

    #[test]
    fn tangency_verdicts() {
        assert!(fold().is_tangential_family(20).unwrap());
        assert!(second_type().is_tangential_family(20).unwrap());
        // dt f (xi, 0) = 0: not tangential.
        let f = germ("xi", "t^2");
        assert_eq!(
            f.tangency_diagnostics(20).unwrap().verdict,
            TangencyVerdict::NotTangential
        );
        // partials not parallel at t = 0.
        let f = germ("xi + t", "t");
        assert_eq!(
            f.tangency_diagnostics(20).unwrap().verdict,
            TangencyVerdict::NotTangential
        );
    }

    #[test]
    fn tangential_implies_det_vanishes_on_support_line() {
        for f in [fold(), second_type(), germ("xi + t", "t^3 + xi*t^2")] {
            let det = f.jacobian_determinant().unwrap();
            for i in 0..100 {
                let xi = -1.0 + 2.0 * (i as f64 + 0.5) / 100.0;
                assert!(det.eval(xi, 0.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fd_jet_matches_exact_on_polynomials() {
        // Black-box finite differences must agree with the generating
        // coefficients within 1e-6 through order 4, on 50 random degree-5
        // polynomials with coefficients in [-2, 2].
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..50 {
            let mut terms: Vec<(usize, usize, f64)> = Vec::new();
            for a in 0..=5usize {
                for b in 0..=5 - a {
                    if rng.gen_bool(0.5) {
                        let c = (rng.gen_range(-32..=32) as f64) / 16.0;
                        terms.push((a, b, c));
                    }
                }
            }
            let terms_eval = terms.clone();
            let eval = move |xi: f64, t: f64| {
                terms_eval
                    .iter()
                    .map(|&(a, b, c)| c * xi.powi(a as i32) * t.powi(b as i32))
                    .sum::<f64>()
            };
            let fd = fd_jet(eval, (0.0, 0.0), 4).unwrap();
            for a in 0..=4usize {
                for b in 0..=4 - a {
                    let exact = terms
                        .iter()
                        .find(|&&(ta, tb, _)| ta == a && tb == b)
                        .map(|&(_, _, c)| c)
                        .unwrap_or(0.0);
                    let got = *fd.coeff(a, b);
                    assert!(
                        (got - exact).abs() < 1e-6,
                        "case {case} ({a},{b}): {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn recentering_shifts_the_base_point() {
        let f = second_type();
        let g = f.recenter(0.25).unwrap();
        assert_eq!(g.evaluate(0.0, 0.0).unwrap(), (0.0, 0.0));
        let (x, y) = g.evaluate(0.05, 0.1).unwrap();
        let (x0, y0) = f.evaluate(0.25, 0.0).unwrap();
        let (x1, y1) = f.evaluate(0.30, 0.1).unwrap();
        assert!((x - (x1 - x0)).abs() < 1e-14);
        assert!((y - (y1 - y0)).abs() < 1e-14);
    }

    #[test]
    fn germ_spec_roundtrip() {
        let spec: GermSpec =
            serde_json::from_str(r#"{"x": "xi + t", "y": "t^2", "box": [-1, 1, -1, 1]}"#).unwrap();
        let f = spec.build().unwrap();
        assert!(f.is_tangential_family(10).unwrap());
    }
}
