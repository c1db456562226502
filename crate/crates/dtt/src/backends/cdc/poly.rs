//! Sparse multivariate polynomials with rational coefficients, and
//! polynomial arrows `R^n -> R^m`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Var = u32;

static NEXT_FRESH: AtomicU32 = AtomicU32::new(1 << 24);

/// A variable id never returned before; ids below `1 << 24` are left to
/// callers.
pub fn fresh_var() -> Var {
    NEXT_FRESH.fetch_add(1, Ordering::Relaxed)
}

/// Exponent vector, sorted by variable, no zero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mono(Vec<(Var, u32)>);

impl Mono {
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Mono(vec![(v, 1)])
    }

    pub fn from_exps(exps: &[u32]) -> Self {
        Mono(exps.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i as Var, *e)).collect())
    }

    pub fn exp(&self, v: Var) -> u32 {
        self.0.iter().find(|(w, _)| *w == v).map_or(0, |(_, e)| *e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    fn mul(&self, o: &Mono) -> Mono {
        let mut m: BTreeMap<Var, u32> = self.0.iter().copied().collect();
        for (v, e) in &o.0 {
            *m.entry(*v).or_insert(0) += e;
        }
        Mono(m.into_iter().collect())
    }

    fn without(&self, v: Var) -> Mono {
        Mono(self.0.iter().copied().filter(|(w, _)| *w != v).collect())
    }

    fn with_exp(&self, v: Var, e: u32) -> Mono {
        let mut m: BTreeMap<Var, u32> = self.0.iter().copied().collect();
        if e == 0 {
            m.remove(&v);
        } else {
            m.insert(v, e);
        }
        Mono(m.into_iter().collect())
    }
}

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Mono, BigRational>,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `3`, `-1/2` or `0.25`.
pub fn parse_rat(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((i, f)) = s.split_once('.') {
        let neg = i.starts_with('-');
        let whole: BigInt = if i == "-" || i.is_empty() { BigInt::zero() } else { i.parse().ok()? };
        let den = BigInt::from(10u32).pow(f.len() as u32);
        let frac: BigInt = f.parse().ok()?;
        let frac = if neg { -frac } else { frac };
        return Some(BigRational::new(whole * &den + frac, den));
    }
    s.parse::<BigInt>().ok().map(BigRational::from_integer)
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn int(n: i64) -> Self {
        Poly::constant(rat(n))
    }

    pub fn var(v: Var) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::var(v), BigRational::one());
        p
    }

    pub fn from_terms(ts: impl IntoIterator<Item = (Mono, BigRational)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in ts {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Mono::degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(v, _)| *v)).collect()
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in &o.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c * k)))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                p.add_term(m1.mul(m2), c1 * c2);
            }
        }
        p
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::int(1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Simultaneous substitution; unmapped variables stay.
    pub fn subst(&self, map: &BTreeMap<Var, Poly>) -> Poly {
        let mut out = Poly::zero();
        let mut cache: BTreeMap<(Var, u32), Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut t = Poly::constant(c.clone());
            for (v, e) in &m.0 {
                let f = match map.get(v) {
                    Some(p) => cache.entry((*v, *e)).or_insert_with(|| p.pow(*e)).clone(),
                    None => Poly::from_terms([(Mono(vec![(*v, *e)]), BigRational::one())]),
                };
                t = t.mul(&f);
            }
            out = out.add(&t);
        }
        out
    }

    pub fn subst1(&self, v: Var, p: &Poly) -> Poly {
        self.subst(&BTreeMap::from([(v, p.clone())]))
    }

    /// Partial derivative in `v`.
    pub fn diff(&self, v: Var) -> Poly {
        Poly::from_terms(self.terms.iter().filter_map(|(m, c)| {
            let e = m.exp(v);
            (e > 0).then(|| (m.with_exp(v, e - 1), c * rat(e as i64)))
        }))
    }

    /// Coefficient of `v^1`, i.e. the derivative in `v` at `v = 0`.
    pub fn linear_coeff(&self, v: Var) -> Poly {
        Poly::from_terms(self.terms.iter().filter(|(m, _)| m.exp(v) == 1).map(|(m, c)| (m.without(v), c.clone())))
    }

    pub fn eval(&self, env: &BTreeMap<Var, BigRational>) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                let x = env.get(v)?;
                for _ in 0..*e {
                    t *= x;
                }
            }
            acc += t;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, env: &dyn Fn(Var) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64().unwrap_or(f64::NAN);
                for (v, e) in &m.0 {
                    t *= env(*v).powi(*e as i32);
                }
                t
            })
            .sum()
    }

    pub fn render(&self, names: &dyn Fn(Var) -> String) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        // highest degree first
        let mut ts: Vec<_> = self.terms.iter().collect();
        ts.sort_by(|(a, _), (b, _)| b.degree().cmp(&a.degree()).then(a.cmp(b)));
        for (i, (m, c)) in ts.into_iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono: Vec<String> = m
                .0
                .iter()
                .map(|(v, e)| if *e == 1 { names(*v) } else { format!("{}^{}", names(*v), e) })
                .collect();
            let coeff = if a.is_integer() { a.to_integer().to_string() } else { format!("{}/{}", a.numer(), a.denom()) };
            if mono.is_empty() {
                out.push_str(&coeff);
            } else if a.is_one() {
                out.push_str(&mono.join("*"));
            } else {
                out.push_str(&format!("{}*{}", coeff, mono.join("*")));
            }
        }
        out
    }
}

pub fn default_name(v: Var) -> String {
    format!("x{v}")
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&default_name))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&default_name))
    }
}

/// An arrow `R^dom -> R^cod`; component `i` is a polynomial in variables
/// `0..dom`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyArrow {
    pub dom: usize,
    pub comps: Vec<Poly>,
}

impl PolyArrow {
    pub fn new(dom: usize, comps: Vec<Poly>) -> Self {
        PolyArrow { dom, comps }
    }

    pub fn cod(&self) -> usize {
        self.comps.len()
    }

    pub fn id(n: usize) -> Self {
        PolyArrow::new(n, (0..n).map(|i| Poly::var(i as Var)).collect())
    }

    pub fn zero(dom: usize, cod: usize) -> Self {
        PolyArrow::new(dom, vec![Poly::zero(); cod])
    }

    /// Projection of `R^dom` onto coordinates `start..start+len`.
    pub fn proj(dom: usize, start: usize, len: usize) -> Self {
        PolyArrow::new(dom, (start..start + len).map(|i| Poly::var(i as Var)).collect())
    }

    pub fn add(&self, o: &PolyArrow) -> PolyArrow {
        assert_eq!((self.dom, self.cod()), (o.dom, o.cod()), "sum of arrows with different dimensions");
        PolyArrow::new(self.dom, self.comps.iter().zip(&o.comps).map(|(a, b)| a.add(b)).collect())
    }

    /// `<self, o>`.
    pub fn pair(&self, o: &PolyArrow) -> PolyArrow {
        assert_eq!(self.dom, o.dom, "pairing arrows with different domains");
        PolyArrow::new(self.dom, self.comps.iter().chain(&o.comps).cloned().collect())
    }

    /// `self ∘ f`.
    pub fn compose(&self, f: &PolyArrow) -> PolyArrow {
        assert_eq!(self.dom, f.cod(), "composing arrows with mismatched dimensions");
        let map: BTreeMap<Var, Poly> = f.comps.iter().enumerate().map(|(i, p)| (i as Var, p.clone())).collect();
        PolyArrow::new(f.dom, self.comps.iter().map(|p| p.subst(&map)).collect())
    }

    /// `f × g : R^(a+b) -> R^(c+d)`.
    pub fn times(&self, o: &PolyArrow) -> PolyArrow {
        let (a, b) = (self.dom, o.dom);
        let left = self.compose(&PolyArrow::proj(a + b, 0, a));
        let right = o.compose(&PolyArrow::proj(a + b, a, b));
        left.pair(&right)
    }

    /// `∂f : R^n × R^n -> R^m`, direction first: `∂f(v, x) = Jf(x)·v`.
    pub fn derive(&self) -> PolyArrow {
        let n = self.dom;
        let shift: BTreeMap<Var, Poly> = (0..n).map(|j| (j as Var, Poly::var((n + j) as Var))).collect();
        let comps = self
            .comps
            .iter()
            .map(|p| {
                (0..n).fold(Poly::zero(), |acc, j| {
                    let dj = p.diff(j as Var).subst(&shift);
                    acc.add(&dj.mul(&Poly::var(j as Var)))
                })
            })
            .collect();
        PolyArrow::new(2 * n, comps)
    }

    pub fn degree(&self) -> u32 {
        self.comps.iter().map(Poly::degree).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let sq = PolyArrow::new(1, vec![Poly::var(0).mul(&Poly::var(0))]);
        let d = sq.derive();
        // 2 * x * v with v = var 0, x = var 1
        let want = Poly::var(0).mul(&Poly::var(1)).scale(&rat(2));
        assert_eq!(d.comps[0], want);
    }

    #[test]
    fn identity_derivative_is_first_projection() {
        let d = PolyArrow::id(2).derive();
        assert_eq!(d, PolyArrow::proj(4, 0, 2));
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Poly::var(0);
        assert!(x.sub(&x).is_zero());
        assert_eq!(x.add(&Poly::int(1)).sub(&Poly::int(1)), x);
    }

    #[test]
    fn linear_coefficient() {
        // (x + t v)^2 -> 2 x v
        let t = fresh_var();
        let p = Poly::var(0).add(&Poly::var(t).mul(&Poly::var(1))).pow(2);
        assert_eq!(p.linear_coeff(t), Poly::var(0).mul(&Poly::var(1)).scale(&rat(2)));
    }

    #[test]
    fn render_and_parse() {
        let p = Poly::var(0).mul(&Poly::var(1)).scale(&rat(2)).sub(&Poly::constant(parse_rat("1/2").unwrap()));
        assert_eq!(p.render(&|v| ["x", "v"][v as usize].to_string()), "2*x*v - 1/2");
        assert_eq!(parse_rat("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rat("-1.5").unwrap(), BigRational::new((-3).into(), 2.into()));
    }
}
