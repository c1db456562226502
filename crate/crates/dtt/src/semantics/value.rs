//! Semantic values shared by all backends.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::backends::cdc::poly::Poly;
use crate::error::EvalError;

pub type EvalResult<T> = Result<T, EvalError>;

/// A semantic function. Functions have no structural equality; backends
/// compare them extensionally.
#[derive(Clone)]
pub struct Func(Arc<dyn Fn(Value) -> EvalResult<Value> + Send + Sync>);

impl Func {
    pub fn new(f: impl Fn(Value) -> EvalResult<Value> + Send + Sync + 'static) -> Self {
        Func(Arc::new(f))
    }

    pub fn call(&self, v: Value) -> EvalResult<Value> {
        (self.0)(v)
    }
}

/// A finite multiset of naturals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bag(pub BTreeMap<u64, u64>);

impl Bag {
    pub fn of(elems: &[u64]) -> Self {
        let mut b = Bag::default();
        for e in elems {
            *b.0.entry(*e).or_insert(0) += 1;
        }
        b
    }

    pub fn count(&self, e: u64) -> u64 {
        self.0.get(&e).copied().unwrap_or(0)
    }

    pub fn size(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|(e, n)| (*e * *n) as i64).sum()
    }

    pub fn union(&self, o: &Bag) -> Bag {
        let mut b = self.clone();
        for (e, n) in &o.0 {
            *b.0.entry(*e).or_insert(0) += n;
        }
        b
    }

    /// Whether every element of `o` occurs at least as often in `self`.
    pub fn contains(&self, o: &Bag) -> bool {
        o.0.iter().all(|(e, n)| self.count(*e) >= *n)
    }

    /// Multiset difference; `None` when `o` is not contained.
    pub fn minus(&self, o: &Bag) -> Option<Bag> {
        if !self.contains(o) {
            return None;
        }
        let mut b = self.clone();
        for (e, n) in &o.0 {
            let c = b.0.get_mut(e).expect("contained");
            *c -= n;
            if *c == 0 {
                b.0.remove(e);
            }
        }
        Some(b)
    }

    /// Common part of two bags.
    pub fn meet(&self, o: &Bag) -> Bag {
        Bag(self.0.iter().map(|(e, n)| (*e, o.count(*e).min(*n))).filter(|(_, k)| *k > 0).collect())
    }

    pub fn elems(&self) -> Vec<u64> {
        self.0.iter().flat_map(|(e, n)| std::iter::repeat_n(*e, *n as usize)).collect()
    }
}

/// A bag change: elements removed, then elements added. Kept normalized so
/// that no element is both removed and added.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BagChange {
    pub remove: Bag,
    pub add: Bag,
}

impl BagChange {
    pub fn new(remove: Bag, add: Bag) -> Self {
        let common = remove.meet(&add);
        BagChange { remove: remove.minus(&common).expect("meet"), add: add.minus(&common).expect("meet") }
    }
}

#[derive(Clone)]
pub enum Value {
    Unit,
    Real(f64),
    Int(i64),
    /// An element of a finite carrier or lattice, by index.
    Point(usize),
    Bag(Bag),
    BagChange(BagChange),
    Poly(Poly),
    Pair(Box<Value>, Box<Value>),
    Fun(Func),
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn fun(f: impl Fn(Value) -> EvalResult<Value> + Send + Sync + 'static) -> Value {
        Value::Fun(Func::new(f))
    }

    /// A curried function of three arguments.
    pub fn fun3(f: impl Fn(Value, Value, Value) -> EvalResult<Value> + Send + Sync + 'static) -> Value {
        let f = Arc::new(f);
        Value::fun(move |a| {
            let f = f.clone();
            Ok(Value::fun(move |b| {
                let (f, a) = (f.clone(), a.clone());
                Ok(Value::fun(move |c| f(a.clone(), b.clone(), c)))
            }))
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Real(_) => "real",
            Value::Int(_) => "integer",
            Value::Point(_) => "point",
            Value::Bag(_) => "bag",
            Value::BagChange(_) => "bag change",
            Value::Poly(_) => "polynomial",
            Value::Pair(..) => "pair",
            Value::Fun(_) => "function",
        }
    }

    fn expected<T>(&self, what: &str) -> EvalResult<T> {
        Err(EvalError::shape(format!("expected a {what}, found a {}", self.kind())))
    }

    pub fn as_real(&self) -> EvalResult<f64> {
        match self {
            Value::Real(x) => Ok(*x),
            Value::Int(n) => Ok(*n as f64),
            v => v.expected("number"),
        }
    }

    pub fn as_int(&self) -> EvalResult<i64> {
        match self {
            Value::Int(n) => Ok(*n),
            v => v.expected("integer"),
        }
    }

    pub fn as_point(&self) -> EvalResult<usize> {
        match self {
            Value::Point(i) => Ok(*i),
            v => v.expected("point"),
        }
    }

    pub fn as_bag(&self) -> EvalResult<&Bag> {
        match self {
            Value::Bag(b) => Ok(b),
            v => v.expected("bag"),
        }
    }

    pub fn as_poly(&self) -> EvalResult<&Poly> {
        match self {
            Value::Poly(p) => Ok(p),
            v => v.expected("polynomial"),
        }
    }

    pub fn as_pair(&self) -> EvalResult<(&Value, &Value)> {
        match self {
            Value::Pair(a, b) => Ok((a, b)),
            v => v.expected("pair"),
        }
    }

    pub fn fst(&self) -> EvalResult<Value> {
        Ok(self.as_pair()?.0.clone())
    }

    pub fn snd(&self) -> EvalResult<Value> {
        Ok(self.as_pair()?.1.clone())
    }

    pub fn apply(&self, a: Value) -> EvalResult<Value> {
        match self {
            Value::Fun(f) => f.call(a),
            v => v.expected("function"),
        }
    }

    pub fn apply3(&self, a: Value, b: Value, c: Value) -> EvalResult<Value> {
        self.apply(a)?.apply(b)?.apply(c)
    }

    /// Canonical key of a first-order finite value; `None` for reals,
    /// polynomials and functions.
    pub fn key(&self) -> Option<String> {
        Some(match self {
            Value::Unit => "()".into(),
            Value::Int(n) => n.to_string(),
            Value::Point(i) => format!("#{i}"),
            Value::Bag(b) => format!("{:?}", b.elems()),
            Value::BagChange(c) => format!("-{:?}+{:?}", c.remove.elems(), c.add.elems()),
            Value::Pair(a, b) => format!("({},{})", a.key()?, b.key()?),
            Value::Real(_) | Value::Poly(_) | Value::Fun(_) => return None,
        })
    }

    /// Leaves of nested pairs, left to right.
    pub fn flatten(&self) -> Vec<Value> {
        match self {
            Value::Pair(a, b) => {
                let mut v = a.flatten();
                v.extend(b.flatten());
                v
            }
            v => vec![v.clone()],
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Point(i) => write!(f, "#{i}"),
            Value::Bag(b) => write!(f, "bag{:?}", b.elems()),
            Value::BagChange(c) => write!(f, "(-{:?}, +{:?})", c.remove.elems(), c.add.elems()),
            Value::Poly(p) => write!(f, "{p}"),
            Value::Pair(a, b) => write!(f, "({a:?}, {b:?})"),
            Value::Fun(_) => write!(f, "<fun>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bag_change_normalizes() {
        let c = BagChange::new(Bag::of(&[1, 2]), Bag::of(&[2, 5]));
        assert_eq!(c.remove, Bag::of(&[1]));
        assert_eq!(c.add, Bag::of(&[5]));
    }

    #[test]
    fn bag_minus() {
        assert_eq!(Bag::of(&[1, 1, 2]).minus(&Bag::of(&[1])), Some(Bag::of(&[1, 2])));
        assert_eq!(Bag::of(&[1]).minus(&Bag::of(&[2])), None);
    }

    #[test]
    fn curried_three() {
        let f = Value::fun3(|a, b, c| Ok(Value::Int(a.as_int()? * 100 + b.as_int()? * 10 + c.as_int()?)));
        let r = f.apply3(Value::Int(1), Value::Int(2), Value::Int(3)).unwrap();
        assert_eq!(r.as_int().unwrap(), 123);
    }
}
