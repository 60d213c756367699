//! Simplification through a rational-function normal form.
//!
//! An expression is mapped to `coefficient * numerator / product(factors^k)`
//! where the numerator is an expanded multivariate polynomial over atoms
//! (variables, parameters, and opaque non-polynomial subterms such as
//! `sin(x)`), and the denominator is a list of primitive polynomial factors
//! collected from the structure of the input. Factors are cancelled against
//! the numerator by exact polynomial division; no GCD computation is done.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Expr, Func, Node, Num};

#[derive(Debug, Clone)]
struct Atom {
    key: String,
    expr: Expr,
}

impl PartialEq for Atom {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Atom {}
impl PartialOrd for Atom {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Atom {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.cmp(&o.key)
    }
}

impl Atom {
    fn of(expr: &Expr) -> Atom {
        let key = match expr.node() {
            Node::Var(n) => format!("0:{n}"),
            Node::Param(n) => format!("1:{n}"),
            _ => format!("2:{expr}"),
        };
        Atom { key, expr: expr.clone() }
    }
}

type Mono = BTreeMap<Atom, u32>;

fn degree(m: &Mono) -> u32 {
    m.values().sum()
}

/// Graded lexicographic order; atoms earlier in key order weigh more.
fn mono_cmp(a: &Mono, b: &Mono) -> Ordering {
    degree(a).cmp(&degree(b)).then_with(|| {
        let mut ia = a.iter().peekable();
        let mut ib = b.iter().peekable();
        loop {
            match (ia.peek(), ib.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((ka, ea)), Some((kb, eb))) => match ka.cmp(kb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(eb) {
                        Ordering::Equal => {
                            ia.next();
                            ib.next();
                        }
                        o => return o,
                    },
                },
            }
        }
    })
}

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out = a.clone();
    for (k, e) in b {
        *out.entry(k.clone()).or_insert(0) += e;
    }
    out
}

fn mono_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut out = a.clone();
    for (k, e) in b {
        let slot = out.get_mut(k)?;
        match (*slot).cmp(e) {
            Ordering::Less => return None,
            Ordering::Equal => {
                out.remove(k);
            }
            Ordering::Greater => *slot -= e,
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<Mono, Num>,
}

impl Poly {
    fn constant(c: Num) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert(Mono::new(), c);
        }
        p
    }

    fn atom(a: Atom) -> Poly {
        let mut m = Mono::new();
        m.insert(a, 1);
        let mut p = Poly::default();
        p.terms.insert(m, Num::one());
        p
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn as_constant(&self) -> Option<Num> {
        match self.terms.len() {
            0 => Some(Num::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Mono, c: Num) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(slot) => {
                let s = slot.add(&c);
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *slot = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    fn scale(&self, c: &Num) -> Poly {
        let mut out = Poly::default();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v.mul(c));
        }
        out
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                out.add_term(mono_mul(ma, mb), ca.mul(cb));
            }
        }
        out
    }

    fn pow(&self, mut k: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::constant(Num::one());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn leading(&self) -> Option<(&Mono, &Num)> {
        self.terms.iter().max_by(|a, b| mono_cmp(a.0, b.0))
    }

    fn is_exact(&self) -> bool {
        self.terms.values().all(Num::is_exact)
    }

    /// Quotient `self / f` when `f` divides `self` exactly.
    fn div_exact(&self, f: &Poly) -> Option<Poly> {
        let (lm_f, lc_f) = f.leading()?;
        let lc_inv = lc_f.recip()?;
        let mut rem = self.clone();
        let mut quot = Poly::default();
        let limit = 64 + 4 * self.terms.len() * f.terms.len().max(1);
        for _ in 0..limit {
            let Some((lm_r, lc_r)) = rem.leading() else {
                return Some(quot);
            };
            let lm_r = lm_r.clone();
            let m = mono_div(&lm_r, lm_f)?;
            let c = lc_r.mul(&lc_inv);
            let mut step = Poly::default();
            step.terms.insert(m.clone(), c.clone());
            quot.add_term(m, c.clone());
            rem = rem.add(&f.mul(&step).scale(&Num::int(-1)));
            // the leading monomial cancels by construction; drop float residue
            rem.terms.remove(&lm_r);
        }
        None
    }

    fn sort_key(&self) -> String {
        poly_to_expr(self).to_string()
    }
}

/// `coef * num / prod(den)` with every denominator factor non-constant,
/// primitive and with a positive leading coefficient.
#[derive(Debug, Clone)]
struct RatFunc {
    num: Poly,
    den: Vec<(Poly, u32)>,
}

#[derive(Debug)]
struct DivByZero;

impl RatFunc {
    fn poly(p: Poly) -> RatFunc {
        RatFunc { num: p, den: Vec::new() }
    }

    fn constant(c: Num) -> RatFunc {
        RatFunc::poly(Poly::constant(c))
    }

    fn scale(&self, c: &Num) -> RatFunc {
        let mut out = self.clone();
        out.num = out.num.scale(c);
        out.cancel();
        out
    }

    fn mul(&self, o: &RatFunc) -> RatFunc {
        let mut den = self.den.clone();
        for (f, k) in &o.den {
            push_factor(&mut den, f.clone(), *k);
        }
        let mut out = RatFunc { num: self.num.mul(&o.num), den };
        out.cancel();
        out
    }

    fn add(&self, o: &RatFunc) -> RatFunc {
        let mut den: Vec<(Poly, u32)> = self.den.clone();
        for (f, k) in &o.den {
            match den.iter_mut().find(|(g, _)| g == f) {
                Some((_, j)) => *j = (*j).max(*k),
                None => den.push((f.clone(), *k)),
            }
        }
        let lift = |r: &RatFunc| {
            let mut n = r.num.clone();
            for (f, k) in &den {
                let have = r.den.iter().find(|(g, _)| g == f).map_or(0, |(_, j)| *j);
                if *k > have {
                    n = n.mul(&f.pow(k - have));
                }
            }
            n
        };
        let mut out = RatFunc { num: lift(self).add(&lift(o)), den };
        out.cancel();
        out
    }

    /// `prod(factors^k)` with signed multiplicities.
    fn from_factors(coef: Num, factors: Vec<(Poly, i64)>) -> Result<RatFunc, DivByZero> {
        let mut out = RatFunc::constant(coef);
        for (f, k) in factors {
            if k == 0 {
                continue;
            }
            if k > 0 {
                out = out.mul(&RatFunc::poly(f.pow(k as u32)));
            } else {
                out = out.mul(&RatFunc::inverse_of_poly(&f, (-k) as u32)?);
            }
        }
        Ok(out)
    }

    fn inverse_of_poly(p: &Poly, k: u32) -> Result<RatFunc, DivByZero> {
        if p.is_zero() {
            return Err(DivByZero);
        }
        let (c, factors) = split_poly(p);
        let c = c.powi(-(k as i32)).ok_or(DivByZero)?;
        let mut den = Vec::new();
        for (f, j) in factors {
            push_factor(&mut den, f, j * k);
        }
        Ok(RatFunc { num: Poly::constant(c), den })
    }

    fn cancel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        for (f, k) in self.den.iter_mut() {
            while *k > 0 {
                match self.num.div_exact(f) {
                    Some(q) => {
                        self.num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        self.den.retain(|(_, k)| *k > 0);
        self.den.sort_by_cached_key(|(f, _)| f.sort_key());
    }
}

fn push_factor(den: &mut Vec<(Poly, u32)>, f: Poly, k: u32) {
    if k == 0 {
        return;
    }
    match den.iter_mut().find(|(g, _)| *g == f) {
        Some((_, j)) => *j += k,
        None => den.push((f, k)),
    }
}

/// Splits `p = c * prod(atom^k) * q` with `q` primitive (or absent).
fn split_poly(p: &Poly) -> (Num, Vec<(Poly, u32)>) {
    let mut factors = Vec::new();
    // common monomial content
    let mut common: Option<Mono> = None;
    for m in p.terms.keys() {
        common = Some(match common {
            None => m.clone(),
            Some(c) => c
                .into_iter()
                .filter_map(|(a, e)| m.get(&a).map(|f| (a, e.min(*f))))
                .collect(),
        });
    }
    let common = common.unwrap_or_default();
    let mut rest = p.clone();
    if !common.is_empty() {
        rest = Poly {
            terms: p
                .terms
                .iter()
                .map(|(m, c)| (mono_div(m, &common).unwrap(), c.clone()))
                .collect(),
        };
        for (a, e) in common {
            factors.push((Poly::atom(a), e));
        }
    }
    if let Some(c) = rest.as_constant() {
        return (c, factors);
    }
    let (c, prim) = primitive(&rest);
    factors.push((prim, 1));
    (c, factors)
}

/// `p = c * q` with `q` having integer coprime coefficients (exact case) or
/// unit leading coefficient (float case), leading coefficient positive.
fn primitive(p: &Poly) -> (Num, Poly) {
    let (_, lc) = p.leading().expect("non-zero polynomial");
    if !p.is_exact() {
        let c = lc.clone();
        let inv = c.recip().expect("non-zero leading coefficient");
        return (c, p.scale(&inv));
    }
    let mut lcm = BigInt::one();
    let mut gcd = BigInt::zero();
    for c in p.terms.values() {
        if let Num::Exact(r) = c {
            lcm = lcm.lcm(r.denom());
            gcd = gcd.gcd(r.numer());
        }
    }
    let mut c = BigRational::new(gcd, lcm);
    if lc.is_negative() {
        c = -c;
    }
    let c = Num::Exact(c);
    let inv = c.recip().expect("non-zero content");
    (c, p.scale(&inv))
}

fn factor_list(e: &Expr) -> Result<(Num, Vec<(Poly, i64)>), DivByZero> {
    match e.node() {
        Node::Const(n) => Ok((n.clone(), Vec::new())),
        Node::Neg(inner) => {
            let (c, f) = factor_list(inner)?;
            Ok((c.neg(), f))
        }
        Node::Product(children) => {
            let mut c = Num::one();
            let mut fs = Vec::new();
            for ch in children {
                let (cc, ff) = factor_list(ch)?;
                c = c.mul(&cc);
                fs.extend(ff);
            }
            Ok((c, fs))
        }
        Node::Power(b, k) => {
            let (c, fs) = factor_list(b)?;
            let c = c.powi(*k).ok_or(DivByZero)?;
            Ok((c, fs.into_iter().map(|(f, j)| (f, j * i64::from(*k))).collect()))
        }
        Node::Quotient(a, b) => {
            let (ca, mut fa) = factor_list(a)?;
            let (cb, fb) = factor_list(b)?;
            let cb = cb.recip().ok_or(DivByZero)?;
            fa.extend(fb.into_iter().map(|(f, j)| (f, -j)));
            Ok((ca.mul(&cb), fa))
        }
        _ => {
            let rf = to_ratfunc(e)?;
            if rf.num.is_zero() {
                return Ok((Num::zero(), Vec::new()));
            }
            let (c, fs) = split_poly(&rf.num);
            let mut out: Vec<(Poly, i64)> = fs.into_iter().map(|(f, k)| (f, i64::from(k))).collect();
            out.extend(rf.den.into_iter().map(|(f, k)| (f, -i64::from(k))));
            Ok((c, out))
        }
    }
}

fn opaque(e: Expr) -> RatFunc {
    RatFunc::poly(Poly::atom(Atom::of(&e)))
}

fn to_ratfunc(e: &Expr) -> Result<RatFunc, DivByZero> {
    Ok(match e.node() {
        Node::Const(n) => RatFunc::constant(n.clone()),
        Node::Var(_) | Node::Param(_) => RatFunc::poly(Poly::atom(Atom::of(e))),
        Node::Sum(terms) => {
            let mut acc = RatFunc::constant(Num::zero());
            for t in terms {
                acc = acc.add(&to_ratfunc(t)?);
            }
            acc
        }
        Node::Product(factors) => {
            let mut acc = RatFunc::constant(Num::one());
            for f in factors {
                acc = acc.mul(&to_ratfunc(f)?);
            }
            acc
        }
        Node::Neg(inner) => to_ratfunc(inner)?.scale(&Num::int(-1)),
        Node::Quotient(a, b) => {
            let num = to_ratfunc(a)?;
            match factor_list(b).and_then(|(c, fs)| {
                let c = c.recip().ok_or(DivByZero)?;
                RatFunc::from_factors(c, fs.into_iter().map(|(f, k)| (f, -k)).collect())
            }) {
                Ok(inv) => num.mul(&inv),
                Err(DivByZero) => opaque(Expr::quotient(simplify(a), simplify(b))),
            }
        }
        Node::Power(b, k) if *k >= 0 => {
            let base = to_ratfunc(b)?;
            let mut acc = RatFunc::constant(Num::one());
            for _ in 0..*k {
                acc = acc.mul(&base);
            }
            acc
        }
        Node::Power(b, k) => match factor_list(b).and_then(|(c, fs)| {
            let c = c.powi(*k).ok_or(DivByZero)?;
            RatFunc::from_factors(c, fs.into_iter().map(|(f, j)| (f, j * i64::from(*k))).collect())
        }) {
            Ok(r) => r,
            Err(DivByZero) => opaque(Expr::pow(simplify(b), *k)),
        },
        Node::Func(f, arg) => {
            let a = simplify(arg);
            match a.as_const().and_then(|c| fold_func(*f, c)) {
                Some(v) => RatFunc::constant(v),
                None => opaque(Expr::func(*f, a)),
            }
        }
    })
}

fn fold_func(f: Func, c: &Num) -> Option<Num> {
    match c {
        Num::Exact(_) => match f {
            Func::Sqrt => c.exact_sqrt(),
            Func::Sin if c.is_zero() => Some(Num::zero()),
            Func::Cos if c.is_zero() => Some(Num::one()),
            Func::Exp if c.is_zero() => Some(Num::one()),
            Func::Log if c.is_one() => Some(Num::zero()),
            _ => None,
        },
        Num::Approx(v) => {
            let r = match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Log if *v > 0.0 => v.ln(),
                Func::Sqrt if *v >= 0.0 => v.sqrt(),
                _ => return None,
            };
            r.is_finite().then_some(Num::Approx(r))
        }
    }
}

fn mono_to_expr(m: &Mono) -> Vec<Expr> {
    m.iter()
        .map(|(a, e)| if *e == 1 { a.expr.clone() } else { Expr::pow(a.expr.clone(), *e as i32) })
        .collect()
}

fn term_to_expr(m: &Mono, c: &Num) -> Expr {
    let factors = mono_to_expr(m);
    if factors.is_empty() {
        return Expr::constant(c.clone());
    }
    let negative = c.is_negative();
    let mag = c.abs();
    let body = match &mag {
        Num::Exact(r) => {
            let mut fs = Vec::new();
            if !r.numer().is_one() {
                fs.push(Expr::constant(Num::Exact(BigRational::from_integer(r.numer().clone()))));
            }
            fs.extend(factors);
            let base = Expr::product(fs);
            if r.denom().is_one() {
                base
            } else {
                Expr::quotient(base, Expr::constant(Num::Exact(BigRational::from_integer(r.denom().clone()))))
            }
        }
        Num::Approx(_) => {
            let mut fs = vec![Expr::constant(mag.clone())];
            fs.extend(factors);
            Expr::product(fs)
        }
    };
    if negative {
        Expr::neg(body)
    } else {
        body
    }
}

fn poly_to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<(&Mono, &Num)> = p.terms.iter().collect();
    terms.sort_by(|a, b| mono_cmp(a.0, b.0));
    Expr::sum(terms.into_iter().map(|(m, c)| term_to_expr(m, c)).collect())
}

fn ratfunc_to_expr(r: &RatFunc) -> Expr {
    let num = poly_to_expr(&r.num);
    if r.den.is_empty() {
        return num;
    }
    let den: Vec<Expr> = r
        .den
        .iter()
        .map(|(f, k)| {
            let fe = poly_to_expr(f);
            if *k == 1 {
                fe
            } else {
                Expr::pow(fe, *k as i32)
            }
        })
        .collect();
    Expr::quotient(num, Expr::product(den))
}

pub(super) fn simplify(e: &Expr) -> Expr {
    match to_ratfunc(e) {
        Ok(r) => ratfunc_to_expr(&r),
        // only reachable through a zero denominator at the top level
        Err(DivByZero) => e.clone(),
    }
}
