//! Small-step rules, languages and the reference interpreter.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::{sym, Conf, State, Sym, Term, VarId};
use crate::unify::{fresh_rename, Fold, Syntax, Unifier};

/// `let result = fun(args)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Call {
    pub result: Conf,
    pub fun: Sym,
    pub args: Vec<Conf>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rhs {
    Build(Conf),
    /// `let result = step(arg) in rest`
    Step { result: Conf, arg: Conf, rest: Box<Rhs> },
    Call { call: Call, rest: Box<Rhs> },
}

impl Rhs {
    pub fn step(result: Conf, arg: Conf, rest: Rhs) -> Rhs {
        Rhs::Step { result, arg, rest: Box::new(rest) }
    }

    pub fn call(result: Conf, fun: &str, args: Vec<Conf>, rest: Rhs) -> Rhs {
        Rhs::Call { call: Call { result, fun: sym(fun), args }, rest: Box::new(rest) }
    }

    /// Number of premises before the final build.
    pub fn depth(&self) -> usize {
        match self {
            Rhs::Build(_) => 0,
            Rhs::Step { rest, .. } | Rhs::Call { rest, .. } => 1 + rest.depth(),
        }
    }

    pub fn has_step(&self) -> bool {
        match self {
            Rhs::Build(_) => false,
            Rhs::Step { .. } => true,
            Rhs::Call { rest, .. } => rest.has_step(),
        }
    }
}

impl Syntax for Call {
    fn fold(&self, f: &mut dyn Fold) -> Call {
        Call { result: self.result.fold(f), fun: self.fun.clone(), args: self.args.fold(f) }
    }
}

impl Syntax for Rhs {
    fn fold(&self, f: &mut dyn Fold) -> Rhs {
        match self {
            Rhs::Build(c) => Rhs::Build(c.fold(f)),
            Rhs::Step { result, arg, rest } => Rhs::Step {
                result: result.fold(f),
                arg: arg.fold(f),
                rest: Box::new(rest.fold(f)),
            },
            Rhs::Call { call, rest } => Rhs::Call { call: call.fold(f), rest: Box::new(rest.fold(f)) },
        }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "let {} = call {}(", self.result, self.fun)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", a)?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Build(c) => write!(f, "build {}", c),
            Rhs::Step { result, arg, rest } => write!(f, "let {} = step {} in {}", result, arg, rest),
            Rhs::Call { call, rest } => write!(f, "{} in {}", call, rest),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SosRule {
    pub name: Sym,
    pub lhs: Conf,
    pub rhs: Rhs,
}

impl SosRule {
    pub fn new(name: &str, lhs: Conf, rhs: Rhs) -> SosRule {
        SosRule { name: sym(name), lhs, rhs }
    }
}

impl Syntax for SosRule {
    fn fold(&self, f: &mut dyn Fold) -> SosRule {
        SosRule { name: self.name.clone(), lhs: self.lhs.fold(f), rhs: self.rhs.fold(f) }
    }
}

impl fmt::Display for SosRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ~> {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Expr,
    Stmt,
    Name,
    Call,
    Value,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Expr => "expr",
            Sort::Stmt => "stmt",
            Sort::Name => "name",
            Sort::Call => "call",
            Sort::Value => "value",
        }
    }

    pub fn from_name(s: &str) -> Option<Sort> {
        Some(match s {
            "expr" => Sort::Expr,
            "stmt" => Sort::Stmt,
            "name" => Sort::Name,
            "call" => Sort::Call,
            "value" => Sort::Value,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub sym: Sym,
    pub arity: usize,
    pub val: bool,
    pub sort: Sort,
    pub children: Vec<Sort>,
}

pub type ConcreteFn = fn(&[Conf]) -> Vec<Conf>;
pub type AbstractFn = fn(&[Conf], bool) -> Vec<Conf>;

/// A semantic function; the abstract half over-approximates the concrete.
#[derive(Clone, Debug)]
pub struct SemFun {
    pub name: Sym,
    pub concrete: ConcreteFn,
    pub abstract_: AbstractFn,
}

#[derive(Clone, Debug)]
pub struct Language {
    pub name: Sym,
    pub sigs: BTreeMap<Sym, Signature>,
    pub rules: Vec<SosRule>,
    pub semfuns: BTreeMap<Sym, SemFun>,
    pub initial: State,
}

impl Language {
    pub fn new(name: &str) -> Language {
        Language {
            name: sym(name),
            sigs: BTreeMap::new(),
            rules: Vec::new(),
            semfuns: BTreeMap::new(),
            initial: State::empty(),
        }
    }

    pub fn sig(&self, s: &str) -> Option<&Signature> {
        self.sigs.get(s)
    }

    pub fn node_sort(&self, t: &Term) -> Option<Sort> {
        match t {
            Term::NonVal(s, _) | Term::Val(s, _) => self.sig(s).map(|g| g.sort),
            Term::Int(_) => Some(Sort::Value),
            Term::Str(_) => Some(Sort::Name),
            _ => None,
        }
    }

    pub fn child_sort(&self, s: &str, i: usize) -> Option<Sort> {
        self.sig(s).and_then(|g| g.children.get(i).copied())
    }

    pub fn rule(&self, name: &str) -> Option<&SosRule> {
        self.rules.iter().find(|r| &*r.name == name)
    }

    /// Builds a node with the declared valueness.
    pub fn mk(&self, s: &str, children: Vec<Term>) -> Term {
        match self.sig(s) {
            Some(g) if g.val => Term::Val(sym(s), children),
            _ => Term::NonVal(sym(s), children),
        }
    }

    /// Valueness of every node follows the signature table.
    pub fn well_formed(&self, t: &Term) -> Result<(), String> {
        match t {
            Term::NonVal(s, c) | Term::Val(s, c) => {
                let g = self.sig(s).ok_or_else(|| format!("unknown node type `{}`", s))?;
                if g.arity != c.len() {
                    return Err(format!("`{}` expects {} children, got {}", s, g.arity, c.len()));
                }
                if g.val != matches!(t, Term::Val(..)) {
                    return Err(format!("`{}` has the wrong valueness", s));
                }
                c.iter().try_for_each(|x| self.well_formed(x))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rule: Sym,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: rule {}: {}", s, self.rule, self.message)
    }
}

fn conf_vars(c: &Conf, out: &mut BTreeSet<VarId>) {
    out.extend(c.vars());
}

/// Checks rules against the signature table.
pub fn validate(lang: &Language) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for r in &lang.rules {
        let mut err = |m: String| out.push(Diagnostic { severity: Severity::Error, rule: r.name.clone(), message: m });
        if r.lhs.term.is_value() {
            err(format!("left-hand side {} is a value", r.lhs.term));
        }
        let mut terms = Vec::new();
        collect_terms(&r.lhs, &r.rhs, &mut terms);
        for t in &terms {
            if let Err(m) = check_shape(lang, t) {
                err(m);
            }
        }
        let mut bound = BTreeSet::new();
        conf_vars(&r.lhs, &mut bound);
        let mut rhs = &r.rhs;
        loop {
            let uses: Vec<&Conf> = match rhs {
                Rhs::Build(c) => alloc::vec![c],
                Rhs::Step { arg, .. } => alloc::vec![arg],
                Rhs::Call { call, .. } => call.args.iter().collect(),
            };
            for c in uses {
                for v in c.vars() {
                    if !bound.contains(&v) {
                        err(format!("right-hand side uses unbound variable {}", v));
                    }
                }
            }
            match rhs {
                Rhs::Build(_) => break,
                Rhs::Step { result, rest, .. } => {
                    conf_vars(result, &mut bound);
                    rhs = rest;
                }
                Rhs::Call { call, rest } => {
                    if !lang.semfuns.contains_key(&call.fun) {
                        err(format!("unknown semantic function `{}`", call.fun));
                    }
                    conf_vars(&call.result, &mut bound);
                    rhs = rest;
                }
            }
        }
    }
    for (i, a) in lang.rules.iter().enumerate() {
        for b in &lang.rules[i + 1..] {
            let b2 = fresh_rename(&b.lhs);
            let mut u = Unifier::new();
            if u.conf(&a.lhs, &b2) {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    rule: a.name.clone(),
                    message: format!("left-hand side overlaps with rule {}", b.name),
                });
            }
        }
    }
    out
}

fn collect_terms(lhs: &Conf, rhs: &Rhs, out: &mut Vec<Term>) {
    let mut push = |c: &Conf| {
        out.push(c.term.clone());
        for (k, v) in &c.state.map {
            out.push(k.clone());
            out.push(v.clone());
        }
    };
    push(lhs);
    let mut r = rhs;
    loop {
        match r {
            Rhs::Build(c) => {
                push(c);
                break;
            }
            Rhs::Step { result, arg, rest } => {
                push(result);
                push(arg);
                r = rest;
            }
            Rhs::Call { call, rest } => {
                push(&call.result);
                call.args.iter().for_each(&mut push);
                r = rest;
            }
        }
    }
}

fn check_shape(lang: &Language, t: &Term) -> Result<(), String> {
    match t {
        Term::NonVal(s, c) | Term::Val(s, c) => {
            let g = lang.sig(s).ok_or_else(|| format!("unknown node type `{}`", s))?;
            if g.arity != c.len() {
                return Err(format!("`{}` expects {} children, got {}", s, g.arity, c.len()));
            }
            if g.val != matches!(t, Term::Val(..)) {
                return Err(format!("`{}` used with the wrong valueness", s));
            }
            c.iter().try_for_each(|x| check_shape(lang, x))
        }
        _ => Ok(()),
    }
}

/// A nonvalue configuration no rule applies to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StuckStep {
    pub conf: Conf,
}

/// One step; `Ok(None)` when the term is already a value.
pub fn sos_step(lang: &Language, c: &Conf) -> Result<Option<Conf>, StuckStep> {
    if c.term.is_value() {
        return Ok(None);
    }
    for r in &lang.rules {
        let mut u = Unifier::new();
        if !u.conf(&r.lhs, c) {
            continue;
        }
        if let Some(out) = eval_rhs(lang, &r.rhs, u) {
            return Ok(Some(out));
        }
    }
    Err(StuckStep { conf: c.clone() })
}

fn eval_rhs(lang: &Language, rhs: &Rhs, mut u: Unifier) -> Option<Conf> {
    match rhs {
        Rhs::Build(c) => Some(u.resolve(c)),
        Rhs::Step { result, arg, rest } => {
            let a = u.resolve(arg);
            let b = sos_step(lang, &a).ok()??;
            u.conf(result, &b).then_some(())?;
            eval_rhs(lang, rest, u)
        }
        Rhs::Call { call, rest } => {
            let f = lang.semfuns.get(&call.fun)?;
            let args: Vec<Conf> = call.args.iter().map(|a| u.resolve(a)).collect();
            for out in (f.concrete)(&args) {
                let mut u2 = u.clone();
                if u2.conf(&call.result, &out) {
                    if let Some(c) = eval_rhs(lang, rest, u2) {
                        return Some(c);
                    }
                }
            }
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Halted,
    Stuck,
    OutOfFuel,
}

#[derive(Clone, Debug)]
pub struct Trace<S> {
    pub states: Vec<S>,
    pub end: RunEnd,
}

pub fn sos_run(lang: &Language, c: &Conf, fuel: usize) -> Trace<Conf> {
    let mut states = alloc::vec![c.clone()];
    for _ in 0..fuel {
        match sos_step(lang, states.last().unwrap()) {
            Ok(Some(n)) => states.push(n),
            Ok(None) => return Trace { states, end: RunEnd::Halted },
            Err(_) => return Trace { states, end: RunEnd::Stuck },
        }
    }
    let end = match sos_step(lang, states.last().unwrap()) {
        Ok(None) => RunEnd::Halted,
        Err(_) => RunEnd::Stuck,
        Ok(Some(_)) => RunEnd::OutOfFuel,
    };
    Trace { states, end }
}

/// Output list written by `print`, oldest first.
pub fn output_of(s: &State) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = s.get(&Term::str(crate::languages::OUT));
    while let Some(Term::Val(c, xs)) = cur {
        if &**c != "cons" || xs.len() != 2 {
            break;
        }
        out.push(xs[0].clone());
        cur = Some(&xs[1]);
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::languages::{imp, int, nv, st};
    use alloc::vec;

    fn prog(t: Term) -> Conf {
        Conf::new(t, st(&[("x", 0)]))
    }

    #[test]
    fn add_steps() {
        let lang = imp();
        let t = nv("+", vec![nv("+", vec![int(1), int(2)]), int(4)]);
        let tr = sos_run(&lang, &prog(t), 10);
        assert_eq!(tr.end, RunEnd::Halted);
        assert_eq!(tr.states.len(), 3);
        assert_eq!(tr.states[2].term, int(7));
    }

    #[test]
    fn while_unrolls() {
        let lang = imp();
        let w = nv("while", vec![Term::boolean(true), Term::atom("skip")]);
        let tr = sos_run(&lang, &prog(w), 5);
        assert_eq!(tr.end, RunEnd::OutOfFuel);
        assert_eq!(tr.states.len(), 6);
        assert_eq!(tr.states[1].term.head().map(|s| &**s), Some("if"));
    }

    #[test]
    fn unbound_variable_is_stuck() {
        let lang = imp();
        let t = nv("var", vec![Term::str("nope")]);
        assert!(sos_step(&lang, &prog(t)).is_err());
    }

    #[test]
    fn bundled_languages_validate() {
        for lang in crate::languages::all() {
            let errs: Vec<_> = validate(&lang).into_iter().filter(|d| d.severity == Severity::Error).collect();
            assert!(errs.is_empty(), "{}: {:?}", lang.name, errs);
        }
    }

    #[test]
    fn validation_catches_problems() {
        let mut lang = imp();
        lang.rules.push(SosRule::new(
            "Bad",
            Conf::new(Term::atom("skip"), State::var("m")),
            Rhs::Build(Conf::new(Term::var("zz", crate::term::MatchType::All), State::var("m"))),
        ));
        let d = validate(&lang);
        assert!(d.iter().any(|d| d.message.contains("is a value")));
        assert!(d.iter().any(|d| d.message.contains("unbound variable")));
    }
}
