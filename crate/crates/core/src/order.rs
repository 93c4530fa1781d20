//! Precision order and joins on abstract terms.
//!
//! `leq(a, b)` holds when `b` describes every concrete thing `a` does.

use alloc::vec::Vec;

use crate::am::AmState;
use crate::pam::{Base, Context, Frame};
use crate::semantics::{Call, Rhs};
use crate::term::{Conf, State, Tail, Term};

pub trait Precision {
    fn leq(&self, other: &Self) -> bool;
}

impl Precision for Term {
    fn leq(&self, b: &Term) -> bool {
        match b {
            Term::Star(m) => self.fits(*m),
            Term::Var(v, m) if !v.is_rigid() => self.fits(*m),
            Term::NonVal(s, c) | Term::Val(s, c) => match self {
                Term::NonVal(s2, c2) | Term::Val(s2, c2) => {
                    s == s2
                        && self.is_nonvalue() == b.is_nonvalue()
                        && c.len() == c2.len()
                        && c2.iter().zip(c).all(|(x, y)| x.leq(y))
                }
                _ => false,
            },
            _ => self == b,
        }
    }
}

impl Precision for State {
    fn leq(&self, b: &State) -> bool {
        let values = |a: &State| b.map.iter().all(|(k, v)| a.map.get(k).is_some_and(|w| w.leq(v)));
        match &b.tail {
            Tail::Star => values(self),
            Tail::Var(v) if !v.is_rigid() => values(self),
            t => self.tail == *t && self.map.len() == b.map.len() && values(self),
        }
    }
}

impl Precision for Conf {
    fn leq(&self, b: &Conf) -> bool {
        self.term.leq(&b.term) && self.state.leq(&b.state)
    }
}

impl Precision for Call {
    fn leq(&self, b: &Call) -> bool {
        self.fun == b.fun
            && self.result.leq(&b.result)
            && self.args.len() == b.args.len()
            && self.args.iter().zip(&b.args).all(|(x, y)| x.leq(y))
    }
}

impl Precision for Rhs {
    fn leq(&self, b: &Rhs) -> bool {
        match (self, b) {
            (Rhs::Build(x), Rhs::Build(y)) => x.leq(y),
            (Rhs::Step { result: r1, arg: a1, rest: k1 }, Rhs::Step { result: r2, arg: a2, rest: k2 }) => {
                r1.leq(r2) && a1.leq(a2) && k1.leq(k2)
            }
            (Rhs::Call { call: c1, rest: k1 }, Rhs::Call { call: c2, rest: k2 }) => c1.leq(c2) && k1.leq(k2),
            _ => false,
        }
    }
}

impl Precision for Frame {
    fn leq(&self, b: &Frame) -> bool {
        self.kind == b.kind && self.binder.leq(&b.binder) && self.body.leq(&b.body)
    }
}

impl Precision for Context {
    fn leq(&self, b: &Context) -> bool {
        let (la, lb) = (self.frames.len(), b.frames.len());
        if la < lb {
            return false;
        }
        let tops = self.frames[la - lb..].iter().zip(&b.frames).all(|(x, y)| x.leq(y));
        match &b.base {
            Base::Var(v) if !v.is_rigid() => tops,
            base => tops && la == lb && self.base == *base,
        }
    }
}

impl Precision for AmState {
    fn leq(&self, b: &AmState) -> bool {
        self.conf.leq(&b.conf) && self.ctx.leq(&b.ctx)
    }
}

/// Least upper bound in the star lattice, childwise where shapes agree.
pub fn join_terms(a: &Term, b: &Term) -> Term {
    if a == b {
        return a.clone();
    }
    match (a, b) {
        (Term::NonVal(s, c), Term::NonVal(s2, c2)) if s == s2 && c.len() == c2.len() => {
            Term::NonVal(s.clone(), c.iter().zip(c2).map(|(x, y)| join_terms(x, y)).collect())
        }
        (Term::Val(s, c), Term::Val(s2, c2)) if s == s2 && c.len() == c2.len() => {
            Term::Val(s.clone(), c.iter().zip(c2).map(|(x, y)| join_terms(x, y)).collect())
        }
        _ => Term::Star(a.kind().join(b.kind())),
    }
}

pub fn join_states(a: &State, b: &State) -> State {
    let mut map = alloc::collections::BTreeMap::new();
    for (k, v) in &a.map {
        if let Some(w) = b.map.get(k) {
            map.insert(k.clone(), join_terms(v, w));
        }
    }
    let same_keys = map.len() == a.map.len() && map.len() == b.map.len();
    let tail = if same_keys && a.tail == b.tail { a.tail.clone() } else { Tail::Star };
    State { map, tail }
}

pub fn join_all(ts: &[Term]) -> Option<Term> {
    let mut it = ts.iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, t| join_terms(&acc, t)))
}

/// Every element of `xs` is covered by some element of `ys`.
pub fn covered<T: Precision>(xs: &[T], ys: &[T]) -> bool {
    xs.iter().all(|x| ys.iter().any(|y| x.leq(y)))
}

pub fn dedup<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::MatchType::*;
    use alloc::vec;

    #[test]
    fn stars_cover() {
        assert!(Term::Int(3).leq(&Term::Star(Val)));
        assert!(!Term::Int(3).leq(&Term::Star(NonVal)));
        assert!(Term::Star(Val).leq(&Term::Star(All)));
        assert!(!Term::Star(All).leq(&Term::Star(Val)));
        let t = Term::nv("+", vec![Term::Int(1), Term::Int(2)]);
        let u = Term::nv("+", vec![Term::Star(Val), Term::Int(2)]);
        assert!(t.leq(&u) && !u.leq(&t));
    }

    #[test]
    fn states() {
        let a = State::closed([(Term::str("x"), Term::Int(1)), (Term::str("y"), Term::Int(2))]);
        let mut b = State::top();
        b.map.insert(Term::str("x"), Term::Star(Val));
        assert!(a.leq(&b));
        assert!(a.leq(&State::top()));
        assert!(!State::top().leq(&a));
        let c = State::closed([(Term::str("x"), Term::Star(Val))]);
        assert!(!a.leq(&c));
    }

    #[test]
    fn joins() {
        let j = join_terms(&Term::Int(1), &Term::Int(2));
        assert_eq!(j, Term::Star(Val));
        let j = join_terms(&Term::Int(1), &Term::nv("var", vec![Term::str("x")]));
        assert_eq!(j, Term::Star(All));
        let a = State::closed([(Term::str("x"), Term::Int(1))]);
        let b = State::closed([(Term::str("x"), Term::Int(2)), (Term::str("y"), Term::Int(0))]);
        let j = join_states(&a, &b);
        assert!(a.leq(&j) && b.leq(&j));
    }
}
