//! Machine abstractions and abstract stepping.
//!
//! An abstraction pairs a closure operator on AM states with a way of
//! running semantic functions on abstract arguments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::am::{AmRule, AmState};
use crate::pam::{run_chain, Context, Frame};
use crate::semantics::{Call, Language, Rhs, Sort};
use crate::term::{Conf, MatchType, State, Sym, Tail, Term, VarId};
use crate::unify::{fresh_rename, Syntax, Unifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbsKind {
    Identity,
    ValueIrrel,
    ExprIrrel,
    BoolTrack,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abstraction {
    pub kind: AbsKind,
    /// Variables whose boolean values survive (bool tracking).
    pub tracked: BTreeSet<Sym>,
    /// String constants kept verbatim.
    pub keep: BTreeSet<Sym>,
    /// Collapse call-sorted nodes like expressions.
    pub skip_calls: bool,
    /// Sort hints for variables standing for whole subterms.
    pub var_sorts: BTreeMap<VarId, Sort>,
}

impl Abstraction {
    pub fn new(kind: AbsKind) -> Abstraction {
        Abstraction {
            kind,
            tracked: BTreeSet::new(),
            keep: BTreeSet::new(),
            skip_calls: false,
            var_sorts: BTreeMap::new(),
        }
    }

    pub fn identity() -> Abstraction {
        Abstraction::new(AbsKind::Identity)
    }

    pub fn value_irrel() -> Abstraction {
        Abstraction::new(AbsKind::ValueIrrel)
    }

    pub fn expr_irrel() -> Abstraction {
        Abstraction::new(AbsKind::ExprIrrel)
    }

    pub fn bool_track(vars: &[&str]) -> Abstraction {
        let mut a = Abstraction::new(AbsKind::BoolTrack);
        a.tracked = vars.iter().map(|v| crate::term::sym(v)).collect();
        a
    }

    pub fn keeping(mut self, tokens: &[&str]) -> Abstraction {
        self.keep.extend(tokens.iter().map(|t| crate::term::sym(t)));
        self
    }

    /// The graph of a node does not depend on what surrounds it.
    pub fn context_discarding(&self) -> bool {
        matches!(self.kind, AbsKind::ValueIrrel | AbsKind::ExprIrrel)
    }

    /// Abstract-state closure operator.
    pub fn alpha(&self, lang: &Language, s: &AmState) -> AmState {
        self.alpha_with(lang, s, true)
    }

    /// Alpha for the start of an exploration. The program itself is never
    /// skipped, even when its root has a skipped sort.
    pub fn alpha_root(&self, lang: &Language, s: &AmState) -> AmState {
        self.alpha_with(lang, s, false)
    }

    fn alpha_with(&self, lang: &Language, s: &AmState, collapse: bool) -> AmState {
        if self.kind == AbsKind::Identity {
            return s.clone();
        }
        let mut term = self.term(lang, &s.conf.term, None, true);
        let mut state = self.state(&s.conf.state);
        if collapse && self.collapses(lang, &term) {
            term = Term::Star(MatchType::Val);
            state = State::top();
        }
        let ctx = Context {
            base: s.ctx.base.clone(),
            frames: s.ctx.frames.iter().map(|f| self.frame(lang, f)).collect(),
        };
        AmState::new(Conf::new(term, state), ctx)
    }

    /// Some sort collapses, so alpha is not extensive on every state.
    pub fn skipping(&self) -> bool {
        self.kind == AbsKind::ExprIrrel || self.skip_calls
    }

    /// Whether a focus of this sort collapses to `(⋆Val, ⊤)`.
    pub fn skips(&self, s: Sort) -> bool {
        match self.kind {
            AbsKind::ExprIrrel => s == Sort::Expr || (self.skip_calls && s == Sort::Call),
            _ => self.skip_calls && s == Sort::Call,
        }
    }

    fn collapses(&self, lang: &Language, t: &Term) -> bool {
        let skip_sort = |s: Sort| self.skips(s);
        match t {
            Term::NonVal(..) => lang.node_sort(t).is_some_and(skip_sort),
            Term::Var(v, m) if *m != MatchType::Val => self.var_sorts.get(v).is_some_and(|s| skip_sort(*s)),
            _ => false,
        }
    }

    fn term(&self, lang: &Language, t: &Term, hint: Option<Sort>, focus: bool) -> Term {
        let star = Term::Star(MatchType::Val);
        match t {
            Term::Val(..) if focus && self.kind == AbsKind::BoolTrack && t.as_bool().is_some() => t.clone(),
            Term::Val(..) | Term::Int(_) => star,
            Term::Str(s) if hint == Some(Sort::Name) || self.keep.contains(s) => t.clone(),
            Term::Str(_) => star,
            Term::NonVal(s, c) => Term::NonVal(
                s.clone(),
                c.iter()
                    .enumerate()
                    .map(|(i, x)| self.term(lang, x, lang.child_sort(s, i), focus))
                    .collect(),
            ),
            _ => t.clone(),
        }
    }

    fn state(&self, s: &State) -> State {
        let keep_bool = |k: &Term, v: &Term| {
            self.kind == AbsKind::BoolTrack
                && v.as_bool().is_some()
                && k.as_str().is_some_and(|n| self.tracked.iter().any(|t| &**t == n))
        };
        let open = s.tail == Tail::Star;
        let mut out = State { map: BTreeMap::new(), tail: s.tail.clone() };
        for (k, v) in &s.map {
            if keep_bool(k, v) {
                out.map.insert(k.clone(), v.clone());
            } else if !open {
                let v = if matches!(v, Term::Var(..)) { v.clone() } else { Term::Star(MatchType::Val) };
                out.map.insert(k.clone(), v);
            }
        }
        out
    }

    fn conf(&self, lang: &Language, c: &Conf) -> Conf {
        Conf::new(self.term(lang, &c.term, None, false), self.state(&c.state))
    }

    fn rhs(&self, lang: &Language, r: &Rhs) -> Rhs {
        match r {
            Rhs::Build(c) => Rhs::Build(self.conf(lang, c)),
            Rhs::Step { result, arg, rest } => Rhs::step(
                self.conf(lang, result),
                self.conf(lang, arg),
                self.rhs(lang, rest),
            ),
            Rhs::Call { call, rest } => Rhs::Call {
                call: Call {
                    result: self.conf(lang, &call.result),
                    fun: call.fun.clone(),
                    args: call.args.iter().map(|a| self.conf(lang, a)).collect(),
                },
                rest: alloc::boxed::Box::new(self.rhs(lang, rest)),
            },
        }
    }

    fn frame(&self, lang: &Language, f: &Frame) -> Frame {
        Frame { kind: f.kind, binder: self.conf(lang, &f.binder), body: self.rhs(lang, &f.body) }
    }

    /// Semantic functions on possibly abstract arguments.
    pub fn beta(&self, lang: &Language, call: &Call, args: &[Conf]) -> Vec<Conf> {
        let Some(f) = lang.semfuns.get(&call.fun) else { return Vec::new() };
        if self.kind == AbsKind::Identity && args.iter().all(|a| a.term.is_concrete()) {
            let r = (f.concrete)(args);
            if !r.is_empty() {
                return r;
            }
        }
        (f.abstract_)(args, self.kind == AbsKind::BoolTrack)
    }
}

/// Successors by unification against each rule, optionally closed under alpha.
pub fn step_with(
    lang: &Language,
    rules: &[AmRule],
    abs: &Abstraction,
    s: &AmState,
    close: bool,
) -> Vec<(Sym, AmState)> {
    let beta = |c: &Call, a: &[Conf]| abs.beta(lang, c, a);
    let symbolic = !s.vars().is_empty();
    let mut out: Vec<(Sym, AmState)> = Vec::new();
    for r in rules {
        let r = if symbolic { fresh_rename(r) } else { r.clone() };
        let mut u = Unifier::new();
        if !(u.conf(&r.lhs.conf, &s.conf) && u.ctx(&r.lhs.ctx, &s.ctx)) {
            continue;
        }
        for u in run_chain(&r.chain, u, &beta) {
            let mut n = u.resolve(&r.rhs);
            if close {
                n = abs.alpha(lang, &n);
            }
            if !out.iter().any(|(_, m)| *m == n) {
                out.push((r.name.clone(), n));
            }
        }
    }
    out
}

/// One abstract step, closed under the abstraction.
pub fn abs_step(lang: &Language, rules: &[AmRule], abs: &Abstraction, s: &AmState) -> Vec<AmState> {
    step_with(lang, rules, abs, s, true).into_iter().map(|(_, n)| n).collect()
}
