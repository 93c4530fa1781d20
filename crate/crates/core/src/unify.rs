//! Substitutions and the one unification engine.
//!
//! Matching, abstract matching, unification and narrowing all go through
//! [`Unifier`]. Holes and frozen variables are rigid.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::pam::{Base, Context, Frame};
use crate::semantics::{Call, Rhs};
use crate::term::{Conf, MatchType, State, Tail, Term, VarId};

/// Rewrites variables wherever they occur.
pub trait Fold {
    fn var(&mut self, v: &VarId, mt: MatchType) -> Term;
    fn state_var(&mut self, v: &VarId) -> State;
    fn ctx_var(&mut self, v: &VarId) -> Context;
}

pub trait Syntax: Sized {
    fn fold(&self, f: &mut dyn Fold) -> Self;

    fn apply(&self, s: &Subst) -> Self {
        self.fold(&mut Apply { sub: s, chase: false })
    }

    /// Variables in first-occurrence order, holes excluded.
    fn vars(&self) -> Vec<VarId> {
        let mut c = Collect { seen: BTreeSet::new(), order: Vec::new() };
        self.fold(&mut c);
        c.order
    }

    fn map_vars(&self, g: &mut dyn FnMut(&VarId) -> VarId) -> Self {
        self.fold(&mut Rename { g })
    }
}

impl Syntax for Term {
    fn fold(&self, f: &mut dyn Fold) -> Term {
        match self {
            Term::NonVal(s, c) => Term::NonVal(s.clone(), c.iter().map(|t| t.fold(f)).collect()),
            Term::Val(s, c) => Term::Val(s.clone(), c.iter().map(|t| t.fold(f)).collect()),
            Term::Var(v, m) => f.var(v, *m),
            t => t.clone(),
        }
    }
}

impl Syntax for State {
    fn fold(&self, f: &mut dyn Fold) -> State {
        let mut out = match &self.tail {
            Tail::Var(v) => f.state_var(v),
            Tail::Closed => State::empty(),
            Tail::Star => State::top(),
        };
        for (k, v) in &self.map {
            out.map.insert(k.fold(f), v.fold(f));
        }
        out
    }
}

impl Syntax for Conf {
    fn fold(&self, f: &mut dyn Fold) -> Conf {
        Conf { term: self.term.fold(f), state: self.state.fold(f) }
    }
}

impl<T: Syntax> Syntax for Vec<T> {
    fn fold(&self, f: &mut dyn Fold) -> Vec<T> {
        self.iter().map(|x| x.fold(f)).collect()
    }
}

impl<A: Syntax, B: Syntax> Syntax for (A, B) {
    fn fold(&self, f: &mut dyn Fold) -> (A, B) {
        (self.0.fold(f), self.1.fold(f))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Term(Term),
    State(State),
    Ctx(Context),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    pub map: BTreeMap<VarId, Bound>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn term(mut self, v: VarId, t: Term) -> Subst {
        self.map.insert(v, Bound::Term(t));
        self
    }

    pub fn state(mut self, v: VarId, s: State) -> Subst {
        self.map.insert(v, Bound::State(s));
        self
    }

    pub fn ctx(mut self, v: VarId, c: Context) -> Subst {
        self.map.insert(v, Bound::Ctx(c));
        self
    }

    pub fn get(&self, v: &VarId) -> Option<&Bound> {
        self.map.get(v)
    }
}

struct Apply<'a> {
    sub: &'a Subst,
    chase: bool,
}

impl Fold for Apply<'_> {
    fn var(&mut self, v: &VarId, mt: MatchType) -> Term {
        match self.sub.map.get(v) {
            Some(Bound::Term(t)) if self.chase => t.fold(self),
            Some(Bound::Term(t)) => t.clone(),
            _ => Term::Var(v.clone(), mt),
        }
    }
    fn state_var(&mut self, v: &VarId) -> State {
        match self.sub.map.get(v) {
            Some(Bound::State(s)) if self.chase => s.fold(self),
            Some(Bound::State(s)) => s.clone(),
            _ => State::of(v.clone()),
        }
    }
    fn ctx_var(&mut self, v: &VarId) -> Context {
        match self.sub.map.get(v) {
            Some(Bound::Ctx(c)) if self.chase => c.fold(self),
            Some(Bound::Ctx(c)) => c.clone(),
            _ => Context::var(v.clone()),
        }
    }
}

struct Collect {
    seen: BTreeSet<VarId>,
    order: Vec<VarId>,
}

impl Collect {
    fn note(&mut self, v: &VarId) {
        if !v.is_hole() && self.seen.insert(v.clone()) {
            self.order.push(v.clone());
        }
    }
}

impl Fold for Collect {
    fn var(&mut self, v: &VarId, mt: MatchType) -> Term {
        self.note(v);
        Term::Var(v.clone(), mt)
    }
    fn state_var(&mut self, v: &VarId) -> State {
        self.note(v);
        State::of(v.clone())
    }
    fn ctx_var(&mut self, v: &VarId) -> Context {
        self.note(v);
        Context::var(v.clone())
    }
}

struct Rename<'a> {
    g: &'a mut dyn FnMut(&VarId) -> VarId,
}

impl Fold for Rename<'_> {
    fn var(&mut self, v: &VarId, mt: MatchType) -> Term {
        if v.is_hole() {
            return Term::Var(v.clone(), mt);
        }
        Term::Var((self.g)(v), mt)
    }
    fn state_var(&mut self, v: &VarId) -> State {
        if v.is_hole() {
            return State::of(v.clone());
        }
        State::of((self.g)(v))
    }
    fn ctx_var(&mut self, v: &VarId) -> Context {
        if v.is_hole() {
            return Context::var(v.clone());
        }
        Context::var((self.g)(v))
    }
}

static FRESH: AtomicU32 = AtomicU32::new(1_000);

/// A tag nobody has used yet in this process.
pub fn fresh_tag() -> u32 {
    FRESH.fetch_add(1, Ordering::Relaxed)
}

pub fn fresh_var(name: &str) -> VarId {
    VarId::new(name, fresh_tag())
}

/// Renames every non-hole variable apart.
pub fn fresh_rename<T: Syntax>(x: &T) -> T {
    let mut m: BTreeMap<VarId, VarId> = BTreeMap::new();
    x.map_vars(&mut |v| m.entry(v.clone()).or_insert_with(|| v.with_tag(fresh_tag())).clone())
}

/// Renames variables to `%#0`, `%#1`, ... in occurrence order. Equal up to
/// renaming iff canonical forms are equal, given the same traversal.
pub fn canonical<T: Syntax>(x: &T) -> T {
    let mut m: BTreeMap<VarId, VarId> = BTreeMap::new();
    x.map_vars(&mut |v| {
        let n = m.len() as u32;
        m.entry(v.clone()).or_insert_with(|| VarId::new("%", n)).clone()
    })
}

/// Renames the given variables apart from fixed, keeping names readable.
pub fn tidy<T: Syntax>(x: &T) -> T {
    let mut m: BTreeMap<VarId, VarId> = BTreeMap::new();
    let mut used: BTreeMap<alloc::sync::Arc<str>, u32> = BTreeMap::new();
    x.map_vars(&mut |v| {
        if let Some(w) = m.get(v) {
            return w.clone();
        }
        let base: &str = v.name.trim_start_matches(|c| c == '%' || c == '_');
        let base = if base.is_empty() { "v" } else { base };
        let key: alloc::sync::Arc<str> = alloc::sync::Arc::from(base);
        let n = used.entry(key).or_insert(0);
        let w = if *n == 0 {
            VarId::new(base, 0)
        } else {
            VarId::new(&alloc::format!("{}{}", base, *n + 1), 0)
        };
        *n += 1;
        m.insert(v.clone(), w.clone());
        w
    })
}

/// Why a unification failed, when the reason matters to callers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Clash,
    KeyNotGround,
}

/// Triangular substitution under construction.
#[derive(Clone, Debug, Default)]
pub struct Unifier {
    pub sub: Subst,
    pub failure: Option<Failure>,
}

impl Unifier {
    pub fn new() -> Unifier {
        Unifier::default()
    }

    pub fn resolve<T: Syntax>(&self, x: &T) -> T {
        x.fold(&mut Apply { sub: &self.sub, chase: true })
    }

    /// Fully resolved substitution.
    pub fn finish(&self) -> Subst {
        let mut out = Subst::new();
        for (v, b) in &self.sub.map {
            let b = match b {
                Bound::Term(t) => Bound::Term(self.resolve(t)),
                Bound::State(s) => Bound::State(self.resolve(s)),
                Bound::Ctx(c) => Bound::Ctx(self.resolve(c)),
            };
            out.map.insert(v.clone(), b);
        }
        out
    }

    fn walk(&self, t: &Term) -> Term {
        let mut t = t.clone();
        loop {
            match &t {
                Term::Var(v, _) => match self.sub.map.get(v) {
                    Some(Bound::Term(u)) => t = u.clone(),
                    _ => return t,
                },
                _ => return t,
            }
        }
    }

    fn occurs<T: Syntax>(&self, v: &VarId, x: &T) -> bool {
        self.resolve(x).vars().iter().any(|w| w == v)
    }

    fn bind_term(&mut self, v: &VarId, t: Term) -> bool {
        if self.occurs(v, &t) {
            return self.fail();
        }
        self.sub.map.insert(v.clone(), Bound::Term(t));
        true
    }

    fn fail(&mut self) -> bool {
        if self.failure.is_none() {
            self.failure = Some(Failure::Clash);
        }
        false
    }

    pub fn term(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        match (&a, &b) {
            (Term::Var(v, m), Term::Var(w, n)) => self.var_var(v, *m, w, *n),
            (Term::Var(v, m), t) | (t, Term::Var(v, m)) => {
                if v.is_rigid() {
                    return match t {
                        Term::Star(n) => m.meet(*n).is_some() || self.fail(),
                        _ => self.fail(),
                    };
                }
                match t {
                    Term::Star(n) => match m.meet(*n) {
                        Some(k) => self.bind_term(v, Term::Star(k)),
                        None => self.fail(),
                    },
                    t if t.fits(*m) => self.bind_term(v, t.clone()),
                    _ => self.fail(),
                }
            }
            (Term::Star(m), Term::Star(n)) => m.meet(*n).is_some() || self.fail(),
            (Term::Star(m), t) | (t, Term::Star(m)) => self.absorb(t, *m),
            (Term::NonVal(s, c), Term::NonVal(s2, c2)) | (Term::Val(s, c), Term::Val(s2, c2)) => {
                if s != s2 || c.len() != c2.len() {
                    return self.fail();
                }
                c.iter().zip(c2).all(|(x, y)| self.term(x, y))
            }
            (x, y) => x == y || self.fail(),
        }
    }

    fn var_var(&mut self, v: &VarId, m: MatchType, w: &VarId, n: MatchType) -> bool {
        if v == w {
            return true;
        }
        match (v.is_rigid(), w.is_rigid()) {
            (true, true) => self.fail(),
            (false, true) => n.leq(m) && self.bind_term(v, Term::Var(w.clone(), n)) || self.fail(),
            (true, false) => m.leq(n) && self.bind_term(w, Term::Var(v.clone(), m)) || self.fail(),
            (false, false) => {
                if m == n {
                    self.bind_term(v, Term::Var(w.clone(), n))
                } else if m.meet(n).is_none() {
                    self.fail()
                } else if m == MatchType::All {
                    self.bind_term(v, Term::Var(w.clone(), n))
                } else {
                    self.bind_term(w, Term::Var(v.clone(), m))
                }
            }
        }
    }

    /// Lets a star of type `m` cover `t`; variables inside become stars.
    pub fn absorb(&mut self, t: &Term, m: MatchType) -> bool {
        let t = self.walk(t);
        match &t {
            Term::Var(v, vm) => match vm.meet(m) {
                Some(k) if !v.is_rigid() => self.bind_term(v, Term::Star(k)),
                Some(_) => true,
                None => self.fail(),
            },
            Term::Star(n) => n.meet(m).is_some() || self.fail(),
            Term::NonVal(_, c) | Term::Val(_, c) => {
                t.fits(m) && c.iter().all(|x| self.absorb(x, MatchType::All)) || self.fail()
            }
            _ => t.fits(m) || self.fail(),
        }
    }

    fn absorb_state(&mut self, s: &State) -> bool {
        for (k, v) in &s.map {
            if !self.absorb(k, MatchType::All) || !self.absorb(v, MatchType::All) {
                return false;
            }
        }
        match &s.tail {
            Tail::Var(x) if !x.is_rigid() => self.bind_state(x, State::top()),
            _ => true,
        }
    }

    fn bind_state(&mut self, v: &VarId, s: State) -> bool {
        if s.pure_var() == Some(v) {
            return true;
        }
        if self.occurs(v, &s) {
            return self.fail();
        }
        self.sub.map.insert(v.clone(), Bound::State(s));
        true
    }

    fn bind_ctx(&mut self, v: &VarId, c: Context) -> bool {
        if c.base == Base::Var(v.clone()) && c.frames.is_empty() {
            return true;
        }
        if self.occurs(v, &c) {
            return self.fail();
        }
        self.sub.map.insert(v.clone(), Bound::Ctx(c));
        true
    }

    pub fn state(&mut self, a: &State, b: &State) -> bool {
        let a = self.resolve(a);
        let b = self.resolve(b);
        if let Some(v) = a.pure_var().filter(|v| !v.is_rigid()) {
            return self.bind_state(v, b);
        }
        if let Some(v) = b.pure_var().filter(|v| !v.is_rigid()) {
            return self.bind_state(v, a);
        }
        let ground = |s: &State| s.map.keys().all(|k| !k.has_vars());
        if !ground(&a) || !ground(&b) {
            for (x, y) in [(&a, &b), (&b, &a)] {
                if y.map.is_empty() && y.tail == Tail::Star {
                    return self.absorb_state(x);
                }
            }
            if a.map.is_empty() || b.map.is_empty() {
                return self.fail();
            }
            self.failure = Some(Failure::KeyNotGround);
            return false;
        }
        let mut only_a = State::empty();
        let mut only_b = State::empty();
        for (k, v) in &a.map {
            match b.map.get(k) {
                Some(w) => {
                    if !self.term(v, w) {
                        return false;
                    }
                }
                None => {
                    only_a.map.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in &b.map {
            if !a.map.contains_key(k) {
                only_b.map.insert(k.clone(), v.clone());
            }
        }
        self.tails(&a.tail, only_a, &b.tail, only_b)
    }

    fn tails(&mut self, ta: &Tail, only_a: State, tb: &Tail, only_b: State) -> bool {
        use Tail::*;
        let flex = |t: &Tail| matches!(t, Var(v) if !v.is_rigid());
        match (ta, tb) {
            (Closed, Closed) => only_a.map.is_empty() && only_b.map.is_empty() || self.fail(),
            (Closed, Star) => only_b.map.is_empty() && self.absorb_state(&only_a) || self.fail(),
            (Star, Closed) => only_a.map.is_empty() && self.absorb_state(&only_b) || self.fail(),
            (Star, Star) => self.absorb_state(&only_a) && self.absorb_state(&only_b),
            (Var(x), Var(y)) if x == y => {
                only_a.map.is_empty() && only_b.map.is_empty() || self.fail()
            }
            (Var(x), Var(y)) if flex(ta) && flex(tb) => {
                let z = fresh_var("r");
                let mut sa = only_b;
                sa.tail = Var(z.clone());
                let mut sb = only_a;
                sb.tail = Var(z);
                self.bind_state(x, sa) && self.bind_state(y, sb)
            }
            (Var(x), other) if flex(ta) => {
                if !only_a.map.is_empty() && *other != Star {
                    return self.fail();
                }
                if !self.absorb_state(&only_a) {
                    return false;
                }
                let mut s = only_b;
                s.tail = other.clone();
                self.bind_state(x, s)
            }
            (other, Var(_)) if flex(tb) => self.tails(tb, only_b, other, only_a),
            // A frozen tail only meets itself or a flexible tail.
            _ => self.fail(),
        }
    }

    pub fn conf(&mut self, a: &Conf, b: &Conf) -> bool {
        self.term(&a.term, &b.term) && self.state(&a.state, &b.state)
    }

    pub fn confs(&mut self, a: &[Conf], b: &[Conf]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.conf(x, y)) || self.fail()
    }

    pub fn ctx(&mut self, a: &Context, b: &Context) -> bool {
        let a = self.resolve(a);
        let b = self.resolve(b);
        let (la, lb) = (a.frames.len(), b.frames.len());
        let n = la.min(lb);
        for i in 0..n {
            if !self.frame(&a.frames[la - 1 - i], &b.frames[lb - 1 - i]) {
                return false;
            }
        }
        let rest_a = Context { base: a.base.clone(), frames: a.frames[..la - n].to_vec() };
        let rest_b = Context { base: b.base.clone(), frames: b.frames[..lb - n].to_vec() };
        let rest_a = self.resolve(&rest_a);
        let rest_b = self.resolve(&rest_b);
        match (&rest_a.base, &rest_b.base) {
            (Base::Var(x), Base::Var(y)) if x == y => {
                rest_a.frames.len() == rest_b.frames.len() || self.fail()
            }
            (Base::Var(x), _) if !x.is_rigid() && rest_a.frames.is_empty() => self.bind_ctx(x, rest_b),
            (_, Base::Var(y)) if !y.is_rigid() && rest_b.frames.is_empty() => self.bind_ctx(y, rest_a),
            (Base::Emp, Base::Emp) => rest_a.frames.is_empty() && rest_b.frames.is_empty() || self.fail(),
            _ => self.fail(),
        }
    }

    pub fn frame(&mut self, a: &Frame, b: &Frame) -> bool {
        a.kind == b.kind && self.conf(&a.binder, &b.binder) && self.rhs(&a.body, &b.body) || self.fail()
    }

    pub fn rhs(&mut self, a: &Rhs, b: &Rhs) -> bool {
        match (a, b) {
            (Rhs::Build(x), Rhs::Build(y)) => self.conf(x, y),
            (Rhs::Step { result: r1, arg: a1, rest: k1 }, Rhs::Step { result: r2, arg: a2, rest: k2 }) => {
                self.conf(r1, r2) && self.conf(a1, a2) && self.rhs(k1, k2)
            }
            (Rhs::Call { call: c1, rest: k1 }, Rhs::Call { call: c2, rest: k2 }) => {
                self.call(c1, c2) && self.rhs(k1, k2)
            }
            _ => self.fail(),
        }
    }

    pub fn call(&mut self, a: &Call, b: &Call) -> bool {
        a.fun == b.fun && self.conf(&a.result, &b.result) && self.confs(&a.args, &b.args) || self.fail()
    }
}

/// Most general unifier of two terms, fully resolved.
pub fn unify_terms(a: &Term, b: &Term) -> Option<Subst> {
    let mut u = Unifier::new();
    u.term(a, b).then(|| u.finish())
}

pub fn unify_confs(a: &Conf, b: &Conf) -> Option<Subst> {
    let mut u = Unifier::new();
    u.conf(a, b).then(|| u.finish())
}

/// Matches a pattern against a subject with no flexible variables.
pub fn match_conf(pat: &Conf, subject: &Conf) -> Result<Subst, Failure> {
    let mut u = Unifier::new();
    if u.conf(pat, subject) {
        Ok(u.finish())
    } else {
        Err(u.failure.unwrap_or(Failure::Clash))
    }
}

/// Freezes every variable so unification treats it as a constant.
pub fn freeze<T: Syntax>(x: &T) -> T {
    x.map_vars(&mut |v| v.with_tag(crate::term::RIGID))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::MatchType::*;
    use alloc::vec;

    fn x() -> Term {
        Term::var("x", All)
    }

    #[test]
    fn collision_is_right_biased() {
        let s = State::empty().with(x(), Term::Int(1)).with(Term::str("z"), Term::Int(2));
        let sub = Subst::new().term(VarId::named("x"), Term::str("z"));
        let out = s.apply(&sub);
        assert_eq!(out, State::empty().with(Term::str("z"), Term::Int(1)));
    }

    #[test]
    fn var_to_var_binds_wider() {
        let mut u = Unifier::new();
        assert!(u.term(&Term::var("a", All), &Term::var("b", Val)));
        assert_eq!(u.resolve(&Term::var("a", All)), Term::var("b", Val));
        let mut u = Unifier::new();
        assert!(!u.term(&Term::var("a", NonVal), &Term::var("b", Val)));
    }

    #[test]
    fn star_meets() {
        let mut u = Unifier::new();
        assert!(u.term(&Term::var("a", All), &Term::Star(Val)));
        assert_eq!(u.resolve(&Term::var("a", All)), Term::Star(Val));
        assert!(!Unifier::new().term(&Term::Star(NonVal), &Term::Int(3)));
        let mut u = Unifier::new();
        let t = Term::nv("+", vec![Term::var("e", NonVal), Term::Int(1)]);
        assert!(u.term(&Term::Star(NonVal), &t));
        assert_eq!(u.resolve(&Term::var("e", NonVal)), Term::Star(NonVal));
    }

    #[test]
    fn holes_are_rigid() {
        let h = Term::hole("t", All);
        assert!(!Unifier::new().term(&h, &Term::Int(1)));
        let mut u = Unifier::new();
        assert!(u.term(&Term::var("a", All), &h));
        assert!(!Unifier::new().term(&Term::var("a", Val), &h));
    }

    #[test]
    fn occurs_check() {
        let t = Term::nv("f", vec![x()]);
        assert!(unify_terms(&x(), &t).is_none());
    }

    #[test]
    fn state_lookup_pattern() {
        let pat = State {
            map: [(x(), Term::var("v", Val))].into_iter().collect(),
            tail: Tail::Var(VarId::named("r")),
        };
        let subj = State::closed([(Term::str("a"), Term::Int(1)), (Term::str("b"), Term::Int(2))]);
        let mut u = Unifier::new();
        assert!(u.term(&x(), &Term::str("b")));
        assert!(u.state(&pat, &subj));
        assert_eq!(u.resolve(&Term::var("v", Val)), Term::Int(2));
        assert_eq!(u.resolve(&State::var("r")), State::closed([(Term::str("a"), Term::Int(1))]));
    }

    #[test]
    fn key_not_ground_is_reported() {
        let pat = State { map: [(x(), Term::Int(1))].into_iter().collect(), tail: Tail::Closed };
        let subj = State::closed([(Term::str("a"), Term::Int(1))]);
        let c = |s| Conf::new(Term::atom("skip"), s);
        assert_eq!(match_conf(&c(pat), &c(subj)), Err(Failure::KeyNotGround));
    }

    #[test]
    fn top_absorbs_lookup() {
        let pat = State {
            map: [(x(), Term::var("v", Val))].into_iter().collect(),
            tail: Tail::Var(VarId::named("r")),
        };
        let mut u = Unifier::new();
        assert!(u.state(&pat, &State::top()));
        assert_eq!(u.resolve(&Term::var("v", Val)), Term::Star(Val));
        assert_eq!(u.resolve(&State::var("r")), State::top());
    }

    #[test]
    fn open_states_share_fresh_tail() {
        let a = State { map: [(Term::str("a"), Term::Int(1))].into_iter().collect(), tail: Tail::Var(VarId::named("p")) };
        let b = State { map: [(Term::str("b"), Term::Int(2))].into_iter().collect(), tail: Tail::Var(VarId::named("q")) };
        let mut u = Unifier::new();
        assert!(u.state(&a, &b));
        let ra = u.resolve(&a);
        let rb = u.resolve(&b);
        assert_eq!(ra, rb);
        assert_eq!(ra.map.len(), 2);
    }

    #[test]
    fn canonical_forms() {
        let t1 = Term::nv("f", vec![Term::var("a", All), Term::var("b", All), Term::var("a", All)]);
        let t2 = Term::nv("f", vec![Term::var("q", All), Term::var("p", All), Term::var("q", All)]);
        assert_eq!(canonical(&t1), canonical(&t2));
        assert_ne!(canonical(&t1), canonical(&fresh_rename(&Term::nv("f", vec![x(), x(), x()]))));
    }
}
