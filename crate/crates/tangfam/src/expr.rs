//! Scalar expressions in the family variables.
//!
//! The grammar covers numbers, the identifiers `xi`, `t` and `lam`
//! (chart metrics use `u`/`v` instead), `+ - * ^`, parentheses and the
//! elementary functions `sin`, `cos`, `sqrt`. Exponents must be
//! non-negative integers. Numeric literals are kept as exact rationals, so
//! an expression without elementary functions is exactly a polynomial with
//! rational coefficients.

use crate::error::{Error, Result};
use crate::scalar::{rational_from_f64, Coeff, Elementary};
use crate::series::Jet2;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Family parameter along the support (chart coordinate `u`).
    Xi,
    /// Parameter along each family curve (chart coordinate `v`).
    T,
    /// Deformation parameter.
    Lam,
}

/// A numeric literal, exact rational with a cached float view.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub rat: BigRational,
    pub val: f64,
}

impl Constant {
    pub fn from_rational(rat: BigRational) -> Self {
        let val = crate::scalar::rational_to_f64(&rat);
        Constant { rat, val }
    }

    pub fn from_f64(val: f64) -> Result<Self> {
        let rat = rational_from_f64(val).ok_or(Error::NonFiniteResult)?;
        Ok(Constant { rat, val })
    }

    pub fn integer(n: i64) -> Self {
        Constant {
            rat: BigRational::from_integer(BigInt::from(n)),
            val: n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Constant),
    Var(Var),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, u32),
    Elem(Elementary, Arc<Expr>),
}

/// A parsed scalar expression over (xi, t, lam).
#[derive(Clone, PartialEq)]
pub struct ScalarExpression {
    root: Arc<Expr>,
}

impl fmt::Debug for ScalarExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expr({})", self)
    }
}

/// Identifier table: maps source spellings to variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarNames {
    /// `xi`, `t`, `lam` — family germs.
    Family,
    /// `u`, `v` — metric charts (no deformation parameter).
    Chart,
}

impl VarNames {
    fn lookup(self, ident: &str) -> Option<Var> {
        match (self, ident) {
            (VarNames::Family, "xi") => Some(Var::Xi),
            (VarNames::Family, "t") => Some(Var::T),
            (VarNames::Family, "lam") => Some(Var::Lam),
            (VarNames::Chart, "u") => Some(Var::Xi),
            (VarNames::Chart, "v") => Some(Var::T),
            _ => None,
        }
    }

    fn spelling(self, var: Var) -> &'static str {
        match (self, var) {
            (VarNames::Family, Var::Xi) => "xi",
            (VarNames::Family, Var::T) => "t",
            (VarNames::Family, Var::Lam) => "lam",
            (VarNames::Chart, Var::Xi) => "u",
            (VarNames::Chart, Var::T) => "v",
            (VarNames::Chart, Var::Lam) => "lam",
        }
    }
}

// ---------------------------------------------------------------------------
// Parser: recursive descent over a token stream.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            position: self.pos,
            message: msg.to_string(),
        }
    }

    fn next_token(&mut self) -> Result<Option<(usize, Token)>> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Token::Plus
            }
            b'-' => {
                self.pos += 1;
                Token::Minus
            }
            b'*' => {
                self.pos += 1;
                Token::Star
            }
            b'^' => {
                self.pos += 1;
                Token::Caret
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'0'..=b'9' | b'.' => {
                let begin = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                // Optional exponent part: e/E [+-] digits.
                if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
                    let mut peek = self.pos + 1;
                    if peek < self.src.len() && matches!(self.src[peek], b'+' | b'-') {
                        peek += 1;
                    }
                    if peek < self.src.len() && self.src[peek].is_ascii_digit() {
                        self.pos = peek;
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    }
                }
                let text = std::str::from_utf8(&self.src[begin..self.pos]).unwrap();
                Token::Num(parse_decimal(text).ok_or_else(|| self.error("malformed number"))?)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let begin = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Token::Ident(
                    std::str::from_utf8(&self.src[begin..self.pos])
                        .unwrap()
                        .to_string(),
                )
            }
            b'/' => return Err(self.error("division is not part of the grammar")),
            _ => return Err(self.error("unexpected character")),
        };
        Ok(Some((start, tok)))
    }
}

/// Exact rational value of a decimal literal like `3`, `0.25` or `1e-3`.
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exp10) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], i64::from_str(&text[i + 1..]).ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if frac_part.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).ok()?;
    let scale = frac_part.len() as i64 - exp10;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::new(numer, ten.pow(scale as u32))
    } else {
        BigRational::from_integer(numer * ten.pow((-scale) as u32))
    })
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    idx: usize,
    names: VarNames,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.idx)
            .map(|(p, _)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        t
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            position: self.pos(),
            message: msg.into(),
        }
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    // sum := term (('+'|'-') term)*
    fn sum(&mut self) -> Result<Arc<Expr>> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.idx += 1;
                    acc = Arc::new(Expr::Add(acc, self.term()?));
                }
                Some(Token::Minus) => {
                    self.idx += 1;
                    acc = Arc::new(Expr::Sub(acc, self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := unary ('*' unary)*
    fn term(&mut self) -> Result<Arc<Expr>> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Token::Star) {
            self.idx += 1;
            acc = Arc::new(Expr::Mul(acc, self.unary()?));
        }
        Ok(acc)
    }

    // unary := '-' unary | '+' unary | power
    fn unary(&mut self) -> Result<Arc<Expr>> {
        match self.peek() {
            Some(Token::Minus) => {
                self.idx += 1;
                Ok(Arc::new(Expr::Neg(self.unary()?)))
            }
            Some(Token::Plus) => {
                self.idx += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('^' exponent)?   (right-assoc not needed: single level)
    fn power(&mut self) -> Result<Arc<Expr>> {
        let base = self.atom()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.idx += 1;
        let negative = if self.peek() == Some(&Token::Minus) {
            self.idx += 1;
            true
        } else {
            false
        };
        match self.bump() {
            Some(Token::Num(r)) => {
                if !r.is_integer() {
                    return Err(self.error("non-integer exponent"));
                }
                if negative {
                    return Err(self.error("negative exponent"));
                }
                let n = r
                    .to_integer()
                    .to_u32()
                    .ok_or_else(|| self.error("exponent out of range"))?;
                Ok(Arc::new(Expr::Pow(base, n)))
            }
            _ => Err(self.error("expected integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Arc<Expr>> {
        match self.bump() {
            Some(Token::Num(r)) => Ok(Arc::new(Expr::Const(Constant::from_rational(r)))),
            Some(Token::Ident(name)) => {
                if let Some(var) = self.names.lookup(&name) {
                    return Ok(Arc::new(Expr::Var(var)));
                }
                let elem = match name.as_str() {
                    "sin" => Elementary::Sin,
                    "cos" => Elementary::Cos,
                    "sqrt" => Elementary::Sqrt,
                    _ => {
                        self.idx -= 1;
                        return Err(self.error(format!("unknown identifier `{name}`")));
                    }
                };
                self.expect(Token::LParen, "`(` after function name")?;
                let arg = self.sum()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(Arc::new(Expr::Elem(elem, arg)))
            }
            Some(Token::LParen) => {
                let inner = self.sum()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(inner)
            }
            _ => {
                self.idx = self.idx.saturating_sub(1);
                Err(self.error("expected a number, identifier or `(`"))
            }
        }
    }
}

impl ScalarExpression {
    /// Parse with the family identifiers `xi`, `t`, `lam`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, VarNames::Family)
    }

    /// Parse with an explicit identifier table.
    pub fn parse_with(text: &str, names: VarNames) -> Result<Self> {
        let mut lexer = Lexer::new(text);
        let mut tokens = Vec::new();
        while let Some(tok) = lexer.next_token()? {
            tokens.push(tok);
        }
        let mut parser = Parser {
            tokens,
            idx: 0,
            names,
            src_len: text.len(),
        };
        let root = parser.sum()?;
        if parser.idx != parser.tokens.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(ScalarExpression { root })
    }

    pub fn constant(c: Constant) -> Self {
        ScalarExpression {
            root: Arc::new(Expr::Const(c)),
        }
    }

    pub fn variable(v: Var) -> Self {
        ScalarExpression {
            root: Arc::new(Expr::Var(v)),
        }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// True when the tree contains no elementary-function node, i.e. the
    /// expression is a polynomial with rational coefficients.
    pub fn is_polynomial(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::Const(_) | Expr::Var(_) => true,
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => walk(a) && walk(b),
                Expr::Neg(a) => walk(a),
                Expr::Pow(a, _) => walk(a),
                Expr::Elem(..) => false,
            }
        }
        walk(&self.root)
    }

    pub fn references(&self, var: Var) -> bool {
        fn walk(e: &Expr, var: Var) -> bool {
            match e {
                Expr::Const(_) => false,
                Expr::Var(v) => *v == var,
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                    walk(a, var) || walk(b, var)
                }
                Expr::Neg(a) => walk(a, var),
                Expr::Pow(a, _) => walk(a, var),
                Expr::Elem(_, a) => walk(a, var),
            }
        }
        walk(&self.root, var)
    }

    /// Floating evaluation.
    pub fn eval(&self, xi: f64, t: f64, lam: f64) -> f64 {
        fn walk(e: &Expr, xi: f64, t: f64, lam: f64) -> f64 {
            match e {
                Expr::Const(c) => c.val,
                Expr::Var(Var::Xi) => xi,
                Expr::Var(Var::T) => t,
                Expr::Var(Var::Lam) => lam,
                Expr::Add(a, b) => walk(a, xi, t, lam) + walk(b, xi, t, lam),
                Expr::Sub(a, b) => walk(a, xi, t, lam) - walk(b, xi, t, lam),
                Expr::Mul(a, b) => walk(a, xi, t, lam) * walk(b, xi, t, lam),
                Expr::Neg(a) => -walk(a, xi, t, lam),
                Expr::Pow(a, n) => walk(a, xi, t, lam).powi(*n as i32),
                Expr::Elem(Elementary::Sin, a) => walk(a, xi, t, lam).sin(),
                Expr::Elem(Elementary::Cos, a) => walk(a, xi, t, lam).cos(),
                Expr::Elem(Elementary::Sqrt, a) => walk(a, xi, t, lam).sqrt(),
            }
        }
        walk(&self.root, xi, t, lam)
    }

    /// Exact rational evaluation; fails on elementary functions.
    pub fn eval_rational(
        &self,
        xi: &BigRational,
        t: &BigRational,
        lam: &BigRational,
    ) -> Result<BigRational> {
        fn walk(
            e: &Expr,
            xi: &BigRational,
            t: &BigRational,
            lam: &BigRational,
        ) -> Result<BigRational> {
            Ok(match e {
                Expr::Const(c) => c.rat.clone(),
                Expr::Var(Var::Xi) => xi.clone(),
                Expr::Var(Var::T) => t.clone(),
                Expr::Var(Var::Lam) => lam.clone(),
                Expr::Add(a, b) => walk(a, xi, t, lam)? + walk(b, xi, t, lam)?,
                Expr::Sub(a, b) => walk(a, xi, t, lam)? - walk(b, xi, t, lam)?,
                Expr::Mul(a, b) => walk(a, xi, t, lam)? * walk(b, xi, t, lam)?,
                Expr::Neg(a) => -walk(a, xi, t, lam)?,
                Expr::Pow(a, n) => {
                    let base = walk(a, xi, t, lam)?;
                    num::pow::pow(base, *n as usize)
                }
                Expr::Elem(..) => return Err(Error::NonPolynomialExact),
            })
        }
        walk(&self.root, xi, t, lam)
    }

    /// Evaluate the expression on bivariate jets. `lam` enters as a scalar
    /// constant. Elementary functions recentre about the constant term and
    /// fail for coefficient types without analytic series (exact rationals).
    pub fn eval_jet<C: Coeff>(&self, xi: &Jet2<C>, t: &Jet2<C>, lam: &C) -> Result<Jet2<C>> {
        let cap = xi.cap();
        let proto = xi.proto();
        fn walk<C: Coeff>(
            e: &Expr,
            xi: &Jet2<C>,
            t: &Jet2<C>,
            lam: &C,
            proto: &C,
            cap: usize,
        ) -> Result<Jet2<C>> {
            Ok(match e {
                Expr::Const(c) => {
                    // Exact constant when the coefficient ring is rational;
                    // float constant otherwise. `from_i64_like` plus scaling
                    // cannot represent arbitrary rationals, so go through a
                    // dedicated hook: rationals embed via numer/denom.
                    Jet2::constant(embed_rational(&c.rat, c.val, proto), cap)
                }
                Expr::Var(Var::Xi) => xi.clone(),
                Expr::Var(Var::T) => t.clone(),
                Expr::Var(Var::Lam) => Jet2::constant(lam.clone(), cap),
                Expr::Add(a, b) => {
                    walk(a, xi, t, lam, proto, cap)?.add(&walk(b, xi, t, lam, proto, cap)?)
                }
                Expr::Sub(a, b) => {
                    walk(a, xi, t, lam, proto, cap)?.sub(&walk(b, xi, t, lam, proto, cap)?)
                }
                Expr::Mul(a, b) => {
                    walk(a, xi, t, lam, proto, cap)?.mul(&walk(b, xi, t, lam, proto, cap)?)
                }
                Expr::Neg(a) => walk(a, xi, t, lam, proto, cap)?.neg(),
                Expr::Pow(a, n) => walk(a, xi, t, lam, proto, cap)?.pow(*n),
                Expr::Elem(kind, a) => {
                    let inner = walk(a, xi, t, lam, proto, cap)?;
                    let center = inner.coeff(0, 0).clone();
                    let coeffs = C::elementary_series(*kind, &center, cap)
                        .ok_or(Error::NonPolynomialExact)?;
                    let dev = inner.sub(&Jet2::constant(center, cap));
                    let mut acc = Jet2::zero(proto, cap);
                    for c in coeffs.into_iter().rev() {
                        acc = acc.mul(&dev).add(&Jet2::constant(c, cap));
                    }
                    acc
                }
            })
        }
        walk(&self.root, xi, t, lam, &proto, cap)
    }

    /// Symbolic partial derivative. Fails on `sqrt` of a non-constant
    /// argument (the grammar has no quotients); callers fall back to finite
    /// differences in that case.
    pub fn derivative(&self, var: Var) -> Result<ScalarExpression> {
        fn zero() -> Arc<Expr> {
            Arc::new(Expr::Const(Constant::integer(0)))
        }
        fn walk(e: &Expr, var: Var) -> Result<Arc<Expr>> {
            Ok(match e {
                Expr::Const(_) => zero(),
                Expr::Var(v) => Arc::new(Expr::Const(Constant::integer(i64::from(*v == var)))),
                Expr::Add(a, b) => Arc::new(Expr::Add(walk(a, var)?, walk(b, var)?)),
                Expr::Sub(a, b) => Arc::new(Expr::Sub(walk(a, var)?, walk(b, var)?)),
                Expr::Mul(a, b) => Arc::new(Expr::Add(
                    Arc::new(Expr::Mul(walk(a, var)?, b.clone())),
                    Arc::new(Expr::Mul(a.clone(), walk(b, var)?)),
                )),
                Expr::Neg(a) => Arc::new(Expr::Neg(walk(a, var)?)),
                Expr::Pow(_, 0) => zero(),
                Expr::Pow(a, n) => {
                    let lower = if *n == 2 {
                        a.clone()
                    } else {
                        Arc::new(Expr::Pow(a.clone(), n - 1))
                    };
                    Arc::new(Expr::Mul(
                        Arc::new(Expr::Mul(
                            Arc::new(Expr::Const(Constant::integer(*n as i64))),
                            lower,
                        )),
                        walk(a, var)?,
                    ))
                }
                Expr::Elem(Elementary::Sin, a) => Arc::new(Expr::Mul(
                    Arc::new(Expr::Elem(Elementary::Cos, a.clone())),
                    walk(a, var)?,
                )),
                Expr::Elem(Elementary::Cos, a) => Arc::new(Expr::Neg(Arc::new(Expr::Mul(
                    Arc::new(Expr::Elem(Elementary::Sin, a.clone())),
                    walk(a, var)?,
                )))),
                Expr::Elem(Elementary::Sqrt, a) => {
                    let da = walk(a, var)?;
                    if matches!(&*da, Expr::Const(c) if num::Zero::is_zero(&c.rat)) {
                        zero()
                    } else {
                        return Err(Error::NotSymbolicallyDifferentiable);
                    }
                }
            })
        }
        Ok(ScalarExpression {
            root: walk(&self.root, var)?,
        })
    }

    /// Substitute an expression for a variable.
    pub fn substitute(&self, var: Var, replacement: &ScalarExpression) -> ScalarExpression {
        fn walk(e: &Arc<Expr>, var: Var, rep: &Arc<Expr>) -> Arc<Expr> {
            match &**e {
                Expr::Const(_) => e.clone(),
                Expr::Var(v) => {
                    if *v == var {
                        rep.clone()
                    } else {
                        e.clone()
                    }
                }
                Expr::Add(a, b) => Arc::new(Expr::Add(walk(a, var, rep), walk(b, var, rep))),
                Expr::Sub(a, b) => Arc::new(Expr::Sub(walk(a, var, rep), walk(b, var, rep))),
                Expr::Mul(a, b) => Arc::new(Expr::Mul(walk(a, var, rep), walk(b, var, rep))),
                Expr::Neg(a) => Arc::new(Expr::Neg(walk(a, var, rep))),
                Expr::Pow(a, n) => Arc::new(Expr::Pow(walk(a, var, rep), *n)),
                Expr::Elem(k, a) => Arc::new(Expr::Elem(*k, walk(a, var, rep))),
            }
        }
        ScalarExpression {
            root: walk(&self.root, var, &replacement.root),
        }
    }

    /// Add two expressions.
    pub fn add(&self, rhs: &ScalarExpression) -> ScalarExpression {
        ScalarExpression {
            root: Arc::new(Expr::Add(self.root.clone(), rhs.root.clone())),
        }
    }

    pub fn sub(&self, rhs: &ScalarExpression) -> ScalarExpression {
        ScalarExpression {
            root: Arc::new(Expr::Sub(self.root.clone(), rhs.root.clone())),
        }
    }

    pub fn mul(&self, rhs: &ScalarExpression) -> ScalarExpression {
        ScalarExpression {
            root: Arc::new(Expr::Mul(self.root.clone(), rhs.root.clone())),
        }
    }

    /// Print with the given identifier table (round-trips through `parse_with`).
    pub fn to_string_with(&self, names: VarNames) -> String {
        // Precedence levels: 0 sum, 1 product, 2 unary, 3 power/atom.
        fn walk(e: &Expr, names: VarNames, out: &mut String, level: u8) {
            let this_level = match e {
                Expr::Add(..) | Expr::Sub(..) => 0,
                Expr::Mul(..) => 1,
                Expr::Neg(..) => 2,
                Expr::Pow(..) => 3,
                // A negative literal prints with a leading minus, so it
                // binds like a unary negation.
                Expr::Const(c) if c.val < 0.0 => 2,
                Expr::Const(_) | Expr::Var(_) | Expr::Elem(..) => 4,
            };
            let needs_paren = this_level < level;
            if needs_paren {
                out.push('(');
            }
            match e {
                Expr::Const(c) => {
                    if c.rat.is_integer() {
                        out.push_str(&c.rat.numer().to_string());
                    } else {
                        // Exact rational printed as a parenthesised product
                        // to stay within the division-free grammar.
                        use std::fmt::Write;
                        let _ = write!(out, "{:e}", c.val);
                    }
                }
                Expr::Var(v) => out.push_str(names.spelling(*v)),
                Expr::Add(a, b) => {
                    walk(a, names, out, 0);
                    out.push_str(" + ");
                    walk(b, names, out, 1);
                }
                Expr::Sub(a, b) => {
                    walk(a, names, out, 0);
                    out.push_str(" - ");
                    walk(b, names, out, 1);
                }
                Expr::Mul(a, b) => {
                    walk(a, names, out, 1);
                    out.push('*');
                    walk(b, names, out, 2);
                }
                Expr::Neg(a) => {
                    out.push('-');
                    walk(a, names, out, 3);
                }
                Expr::Pow(a, n) => {
                    walk(a, names, out, 4);
                    out.push('^');
                    out.push_str(&n.to_string());
                }
                Expr::Elem(k, a) => {
                    out.push_str(match k {
                        Elementary::Sin => "sin",
                        Elementary::Cos => "cos",
                        Elementary::Sqrt => "sqrt",
                    });
                    out.push('(');
                    walk(a, names, out, 0);
                    out.push(')');
                }
            }
            if needs_paren {
                out.push(')');
            }
        }
        let mut out = String::new();
        walk(&self.root, names, &mut out, 0);
        out
    }
}

impl fmt::Display for ScalarExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_with(VarNames::Family))
    }
}

/// Embed a rational constant into an arbitrary coefficient ring. Exact for
/// rational rings; falls back to the float value elsewhere.
fn embed_rational<C: Coeff>(rat: &BigRational, val: f64, proto: &C) -> C {
    // Fast path for small numerators/denominators: exact in every ring.
    if let (Some(n), Some(d)) = (rat.numer().to_i64(), rat.denom().to_i64()) {
        let num = proto.from_i64_like(n);
        if d == 1 {
            return num;
        }
        if let Some(dinv) = proto.from_i64_like(d).recip() {
            return num.mul(&dinv);
        }
    }
    // Large literal: exact only when the ring can scale floats exactly,
    // which the float ring does trivially.
    let mut c = proto.from_i64_like(0);
    if !val.is_finite() {
        return c;
    }
    // Decompose the f64 exactly as mantissa * 2^exp.
    let bits = val.to_bits();
    let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp2) = if exp == 0 {
        (frac as i64, -1074i64)
    } else {
        ((frac | (1 << 52)) as i64, exp - 1075)
    };
    c = proto.from_i64_like(sign * mantissa);
    let two = proto.from_i64_like(2);
    if exp2 >= 0 {
        for _ in 0..exp2 {
            c = c.mul(&two);
        }
    } else if let Some(half) = two.recip() {
        for _ in 0..(-exp2) {
            c = c.mul(&half);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{One, Zero};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parses_spec_examples() {
        let e = ScalarExpression::parse("xi + t").unwrap();
        assert_eq!(e.eval(0.25, 0.5, 0.0), 0.75);

        let e = ScalarExpression::parse("xi*t^2").unwrap();
        assert_eq!(e.eval(3.0, 2.0, 0.0), 12.0);
        assert!(e.is_polynomial());
    }

    #[test]
    fn rejects_fractional_exponent() {
        let err = ScalarExpression::parse("t^2.5").unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("non-integer")),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_unknown_identifier() {
        let err = ScalarExpression::parse("xi + q").unwrap_err();
        match err {
            Error::Parse { message, position } => {
                assert!(message.contains("unknown identifier"));
                assert_eq!(position, 5);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn chart_names() {
        let e = ScalarExpression::parse_with("sin(u)^2 + v", VarNames::Chart).unwrap();
        let v = e.eval(std::f64::consts::FRAC_PI_2, 1.0, 0.0);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn decimal_literals_are_exact_rationals() {
        let e = ScalarExpression::parse("0.1*t").unwrap();
        let r = e
            .eval_rational(
                &BigRational::zero(),
                &BigRational::from_integer(BigInt::from(10)),
                &BigRational::zero(),
            )
            .unwrap();
        assert_eq!(r, BigRational::one());
    }

    #[test]
    fn derivative_of_product() {
        // d/dt (xi * t^2) = 2 xi t
        let e = ScalarExpression::parse("xi*t^2").unwrap();
        let d = e.derivative(Var::T).unwrap();
        assert!((d.eval(3.0, 2.0, 0.0) - 12.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_sin_cos() {
        let e = ScalarExpression::parse_with("sin(u)^2", VarNames::Chart).unwrap();
        let d = e.derivative(Var::Xi).unwrap();
        let u = 0.7;
        assert!((d.eval(u, 0.0, 0.0) - 2.0 * u.sin() * u.cos()).abs() < 1e-14);
    }

    #[test]
    fn sqrt_constant_is_differentiable_but_not_general_sqrt() {
        let e = ScalarExpression::parse("sqrt(2)*t").unwrap();
        let d = e.derivative(Var::T).unwrap();
        assert!((d.eval(0.0, 0.0, 0.0) - 2.0_f64.sqrt()).abs() < 1e-15);

        let e = ScalarExpression::parse("sqrt(t)").unwrap();
        assert!(e.derivative(Var::T).is_err());
    }

    #[test]
    fn jet_of_polynomial_matches_expansion() {
        // y = xi*t^2 about (0,0): single coefficient (1,2).
        let e = ScalarExpression::parse("xi*t^2").unwrap();
        let cap = 3;
        let xi = Jet2::var_xi(0.0, cap);
        let t = Jet2::var_t(0.0, cap);
        let jet = e.eval_jet(&xi, &t, &0.0).unwrap();
        for a in 0..=cap {
            for b in 0..=cap {
                let expect = if (a, b) == (1, 2) { 1.0 } else { 0.0 };
                assert_eq!(*jet.coeff(a, b), expect, "({a},{b})");
            }
        }
    }

    #[test]
    fn jet_with_sin_matches_values() {
        let e = ScalarExpression::parse("sin(xi + t)").unwrap();
        let cap = 6;
        let base = (0.3, 0.1);
        let xi = Jet2::var_xi(base.0, cap);
        let t = Jet2::var_t(base.1, cap);
        let jet = e.eval_jet(&xi, &t, &0.0).unwrap();
        // Compare jet evaluation against direct evaluation nearby.
        for (dx, dt) in [(0.01, 0.0), (0.0, 0.02), (0.015, -0.01)] {
            let approx = jet.eval(&dx, &dt);
            let exact = e.eval(base.0 + dx, base.1 + dt, 0.0);
            assert!((approx - exact).abs() < 1e-12, "{approx} vs {exact}");
        }
    }

    fn random_poly(rng: &mut StdRng, depth: u32) -> ScalarExpression {
        if depth == 0 {
            return match rng.gen_range(0..3) {
                0 => ScalarExpression::variable(Var::Xi),
                1 => ScalarExpression::variable(Var::T),
                _ => {
                    let num = rng.gen_range(-40..=40);
                    let den = [1, 2, 4, 5, 8, 10][rng.gen_range(0..6)];
                    ScalarExpression::constant(Constant::from_rational(BigRational::new(
                        BigInt::from(num),
                        BigInt::from(den),
                    )))
                }
            };
        }
        let a = random_poly(rng, depth - 1);
        let b = random_poly(rng, depth - 1);
        match rng.gen_range(0..4) {
            0 => a.add(&b),
            1 => a.sub(&b),
            2 => a.mul(&b),
            _ => ScalarExpression {
                root: Arc::new(Expr::Pow(a.root.clone(), rng.gen_range(0..4))),
            },
        }
    }

    #[test]
    fn print_parse_roundtrip_on_random_polynomials() {
        let mut rng = StdRng::seed_from_u64(0x7a6fa);
        for case in 0..60 {
            let e = random_poly(&mut rng, 3);
            let text = e.to_string_with(VarNames::Family);
            let back = ScalarExpression::parse(&text)
                .unwrap_or_else(|err| panic!("case {case}: `{text}`: {err}"));
            for _ in 0..100 {
                let xi = rng.gen_range(-1.0..1.0);
                let t = rng.gen_range(-1.0..1.0);
                let v1 = e.eval(xi, t, 0.0);
                let v2 = back.eval(xi, t, 0.0);
                let scale = v1.abs().max(1.0);
                assert!(
                    (v1 - v2).abs() <= 1e-12 * scale,
                    "case {case}: `{text}` at ({xi},{t}): {v1} vs {v2}"
                );
            }
        }
    }
}
