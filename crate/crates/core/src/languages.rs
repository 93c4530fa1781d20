//! Bundled languages, built programmatically, and term builders.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::semantics::{Language, Rhs, SemFun, Signature, Sort, SosRule};
use crate::term::{sym, Conf, MatchType, State, Tail, Term, VarId};

/// State key holding the output list of `print`.
pub const OUT: &str = "__out";

pub fn int(n: i64) -> Term {
    Term::Int(n)
}

pub fn strt(s: &str) -> Term {
    Term::str(s)
}

pub fn nv(s: &str, c: Vec<Term>) -> Term {
    Term::nv(s, c)
}

/// Closed state binding names to integers.
pub fn st(bs: &[(&str, i64)]) -> State {
    State::closed(bs.iter().map(|(k, v)| (strt(k), int(*v))))
}

pub fn var_(x: &str) -> Term {
    nv("var", vec![strt(x)])
}

pub fn assign(x: &str, e: Term) -> Term {
    nv(":=", vec![strt(x), e])
}

/// Right-nested sequence; a single statement stays as is.
pub fn seq(mut ss: Vec<Term>) -> Term {
    let mut acc = ss.pop().expect("empty sequence");
    while let Some(s) = ss.pop() {
        acc = nv("seq", vec![s, acc]);
    }
    acc
}

pub fn ite(c: Term, a: Term, b: Term) -> Term {
    nv("if", vec![c, a, b])
}

pub fn while_(c: Term, b: Term) -> Term {
    nv("while", vec![c, b])
}

pub fn print(e: Term) -> Term {
    nv("print", vec![e])
}

pub fn skip() -> Term {
    Term::atom("skip")
}

fn v(n: &str) -> Term {
    Term::var(n, MatchType::All)
}

fn vv(n: &str) -> Term {
    Term::var(n, MatchType::Val)
}

fn vn(n: &str) -> Term {
    Term::var(n, MatchType::NonVal)
}

fn m(n: &str) -> State {
    State::var(n)
}

fn c(t: Term, s: State) -> Conf {
    Conf::new(t, s)
}

fn ext(k: Term, val: Term, tail: &str) -> State {
    State { map: [(k, val)].into_iter().collect(), tail: Tail::Var(VarId::named(tail)) }
}

fn build(t: Term, s: State) -> Rhs {
    Rhs::Build(c(t, s))
}

/// Congruence rule stepping child `i` of `head`, whose other children are `kids`.
fn cong(name: &str, head: &str, kids: Vec<Term>, i: usize) -> SosRule {
    let e = kids[i].clone();
    let mut out = kids.clone();
    out[i] = v("e_");
    SosRule::new(
        name,
        c(nv(head, kids), m("m")),
        Rhs::step(c(v("e_"), m("m2")), c(e, m("m")), build(nv(head, out), m("m2"))),
    )
}

fn binop_rules(rules: &mut Vec<SosRule>, prefix: &str, head: &str, fun: &str) {
    rules.push(cong(&alloc::format!("{}CongL", prefix), head, vec![vn("e1"), v("e2")], 0));
    rules.push(cong(&alloc::format!("{}CongR", prefix), head, vec![vv("v1"), vn("e2")], 1));
    rules.push(SosRule::new(
        &alloc::format!("{}Eval", prefix),
        c(nv(head, vec![vv("v1"), vv("v2")]), m("m")),
        Rhs::call(
            c(vv("n"), m("m2")),
            fun,
            vec![c(vv("v1"), m("m")), c(vv("v2"), m("m"))],
            build(vv("n"), m("m2")),
        ),
    ));
}

fn sig(lang: &mut Language, s: &str, val: bool, sort: Sort, children: &[Sort]) {
    lang.sigs.insert(
        sym(s),
        Signature { sym: sym(s), arity: children.len(), val, sort, children: children.to_vec() },
    );
}

fn first_state(args: &[Conf]) -> State {
    args.first().map(|a| a.state.clone()).unwrap_or_else(State::empty)
}

fn add_c(args: &[Conf]) -> Vec<Conf> {
    match args {
        [a, b] => match (a.term.as_int(), b.term.as_int()) {
            (Some(x), Some(y)) => vec![Conf::new(int(x.wrapping_add(y)), a.state.clone())],
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

fn cmp_c(args: &[Conf], f: fn(i64, i64) -> bool) -> Vec<Conf> {
    match args {
        [a, b] => match (a.term.as_int(), b.term.as_int()) {
            (Some(x), Some(y)) => vec![Conf::new(Term::boolean(f(x, y)), a.state.clone())],
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

fn lt_c(args: &[Conf]) -> Vec<Conf> {
    cmp_c(args, |x, y| x < y)
}

fn le_c(args: &[Conf]) -> Vec<Conf> {
    cmp_c(args, |x, y| x <= y)
}

fn arith_a(args: &[Conf], _bools: bool) -> Vec<Conf> {
    vec![Conf::new(Term::Star(MatchType::Val), first_state(args))]
}

fn cmp_a(args: &[Conf], bools: bool) -> Vec<Conf> {
    let s = first_state(args);
    if bools {
        vec![Conf::new(Term::boolean(true), s.clone()), Conf::new(Term::boolean(false), s)]
    } else {
        vec![Conf::new(Term::Star(MatchType::Val), s)]
    }
}

fn write_c(args: &[Conf]) -> Vec<Conf> {
    match args {
        [a] if a.term.is_value() => {
            let mut s = a.state.clone();
            let old = s.map.get(&strt(OUT)).cloned().unwrap_or_else(|| Term::atom("nil"));
            s.map.insert(strt(OUT), Term::val("cons", vec![a.term.clone(), old]));
            vec![Conf::new(a.term.clone(), s)]
        }
        _ => Vec::new(),
    }
}

fn write_a(args: &[Conf], _bools: bool) -> Vec<Conf> {
    match args {
        [a] => {
            let mut s = a.state.clone();
            s.map.insert(strt(OUT), Term::Star(MatchType::Val));
            vec![Conf::new(Term::Star(MatchType::Val), s)]
        }
        _ => Vec::new(),
    }
}

pub fn builtin_semfuns() -> BTreeMap<crate::term::Sym, SemFun> {
    let mut m = BTreeMap::new();
    let mut put = |n: &str, concrete, abstract_| {
        m.insert(sym(n), SemFun { name: sym(n), concrete, abstract_ });
    };
    put("add", add_c as fn(&[Conf]) -> Vec<Conf>, arith_a as fn(&[Conf], bool) -> Vec<Conf>);
    put("lt", lt_c, cmp_a);
    put("le", le_c, cmp_a);
    put("write", write_c, write_a);
    m
}

/// The core imperative language.
pub fn imp() -> Language {
    use Sort::*;
    let mut lang = Language::new("imp");
    sig(&mut lang, "+", false, Expr, &[Expr, Expr]);
    sig(&mut lang, "<", false, Expr, &[Expr, Expr]);
    sig(&mut lang, "var", false, Expr, &[Name]);
    sig(&mut lang, ":=", false, Stmt, &[Name, Expr]);
    sig(&mut lang, "seq", false, Stmt, &[Stmt, Stmt]);
    sig(&mut lang, "if", false, Stmt, &[Expr, Stmt, Stmt]);
    sig(&mut lang, "while", false, Stmt, &[Expr, Stmt]);
    sig(&mut lang, "true", true, Expr, &[]);
    sig(&mut lang, "false", true, Expr, &[]);
    sig(&mut lang, "skip", true, Stmt, &[]);
    lang.semfuns = builtin_semfuns();

    let r = &mut lang.rules;
    binop_rules(r, "Add", "+", "add");
    binop_rules(r, "Lt", "<", "lt");
    r.push(SosRule::new(
        "Var",
        c(nv("var", vec![v("x")]), ext(v("x"), vv("v"), "r")),
        build(vv("v"), ext(v("x"), vv("v"), "r")),
    ));
    r.push(cong("AssnCong", ":=", vec![v("x"), vn("e")], 1));
    r.push(SosRule::new(
        "AssnEval",
        c(nv(":=", vec![v("x"), vv("v")]), m("m")),
        build(skip(), ext(v("x"), vv("v"), "m")),
    ));
    r.push(cong("SeqCong", "seq", vec![vn("s1"), v("s2")], 0));
    r.push(SosRule::new("SeqSkip", c(nv("seq", vec![skip(), v("s2")]), m("m")), build(v("s2"), m("m"))));
    r.push(cong("IfCong", "if", vec![vn("e"), v("s1"), v("s2")], 0));
    r.push(SosRule::new(
        "IfTrue",
        c(ite(Term::boolean(true), v("s1"), v("s2")), m("m")),
        build(v("s1"), m("m")),
    ));
    r.push(SosRule::new(
        "IfFalse",
        c(ite(Term::boolean(false), v("s1"), v("s2")), m("m")),
        build(v("s2"), m("m")),
    ));
    r.push(SosRule::new(
        "While",
        c(while_(v("e"), v("s")), m("m")),
        build(ite(v("e"), nv("seq", vec![v("s"), while_(v("e"), v("s"))]), skip()), m("m")),
    ));
    lang
}

/// IMP with strings, print, let, `<=` and a desugared counting loop.
pub fn imp_ext() -> Language {
    use Sort::*;
    let mut lang = imp();
    lang.name = sym("imp-ext");
    sig(&mut lang, "<=", false, Expr, &[Expr, Expr]);
    sig(&mut lang, "print", false, Stmt, &[Expr]);
    sig(&mut lang, "let", false, Stmt, &[Name, Expr, Stmt]);
    sig(&mut lang, "for", false, Stmt, &[Name, Expr, Expr, Stmt]);
    sig(&mut lang, "cons", true, Value, &[Value, Value]);
    sig(&mut lang, "nil", true, Value, &[]);
    lang.initial = State::closed([(strt(OUT), Term::atom("nil"))]);

    let r = &mut lang.rules;
    binop_rules(r, "Le", "<=", "le");
    r.push(cong("PrintCong", "print", vec![vn("e")], 0));
    r.push(SosRule::new(
        "PrintEval",
        c(print(vv("v")), m("m")),
        Rhs::call(c(vv("u"), m("m2")), "write", vec![c(vv("v"), m("m"))], build(skip(), m("m2"))),
    ));
    r.push(cong("LetCong", "let", vec![v("x"), vn("e"), v("s")], 1));
    r.push(SosRule::new(
        "LetEval",
        c(nv("let", vec![v("x"), vv("v"), v("s")]), m("m")),
        build(v("s"), ext(v("x"), vv("v"), "m")),
    ));
    let hi = strt("__hi");
    let body = while_(
        nv("<=", vec![nv("var", vec![v("a")]), nv("var", vec![hi.clone()])]),
        nv("seq", vec![v("d"), nv(":=", vec![v("a"), nv("+", vec![nv("var", vec![v("a")]), int(1)])])]),
    );
    r.push(SosRule::new(
        "ForDesugar",
        c(nv("for", vec![v("a"), v("b"), v("c"), v("d")]), m("m")),
        build(nv("let", vec![v("a"), v("b"), nv("let", vec![hi, v("c"), body])]), m("m")),
    ));
    lang
}

/// IMP plus a rule that steps two subterms at once.
pub fn lockstep_demo() -> Language {
    let mut lang = imp();
    lang.name = sym("lockstep-demo");
    sig(&mut lang, "lock", false, Sort::Expr, &[Sort::Expr, Sort::Expr]);
    lang.rules.push(SosRule::new(
        "LockstepComp",
        c(nv("lock", vec![v("e1"), v("e2")]), m("m")),
        Rhs::step(
            c(v("f1"), m("m1")),
            c(v("e1"), m("m")),
            Rhs::step(c(v("f2"), m("m2")), c(v("e2"), m("m1")), build(nv("lock", vec![v("f1"), v("f2")]), m("m2"))),
        ),
    ));
    lang
}

pub fn all() -> Vec<Language> {
    vec![imp(), imp_ext(), lockstep_demo()]
}

pub fn by_name(name: &str) -> Option<Language> {
    all().into_iter().find(|l| &*l.name == name)
}

/// The pretty-printer fragment with a prologue binding its inputs.
pub fn paren_program() -> Conf {
    let b = || var_("b");
    let t = seq(vec![
        assign("prec", int(3)),
        assign("left", int(1)),
        assign("right", int(2)),
        assign("b", nv("<", vec![var_("prec"), int(5)])),
        ite(b(), print(strt("(")), skip()),
        print(var_("left")),
        print(strt("+")),
        print(var_("right")),
        ite(b(), print(strt(")")), skip()),
    ]);
    Conf::new(t, imp_ext().initial)
}

/// Random well-typed IMP programs over variables x, y, z.
///
/// `pick(n)` must return a number below `n`.
pub struct ProgramGen<'a> {
    pub pick: &'a mut dyn FnMut(usize) -> usize,
}

const NAMES: [&str; 3] = ["x", "y", "z"];

impl ProgramGen<'_> {
    fn n(&mut self, k: usize) -> usize {
        (self.pick)(k)
    }

    pub fn int_expr(&mut self, depth: usize) -> Term {
        let k = if depth == 0 { 2 } else { 3 };
        match self.n(k) {
            0 => int(self.n(7) as i64 - 2),
            1 => var_(NAMES[self.n(3)]),
            _ => nv("+", vec![self.int_expr(depth - 1), self.int_expr(depth - 1)]),
        }
    }

    pub fn bool_expr(&mut self, depth: usize) -> Term {
        match self.n(3) {
            0 => Term::boolean(self.n(2) == 0),
            _ => nv("<", vec![self.int_expr(depth), self.int_expr(depth)]),
        }
    }

    pub fn stmt(&mut self, depth: usize) -> Term {
        let k = if depth == 0 { 2 } else { 5 };
        match self.n(k) {
            0 => skip(),
            1 => assign(NAMES[self.n(3)], self.int_expr(2)),
            2 => nv("seq", vec![self.stmt(depth - 1), self.stmt(depth - 1)]),
            3 => ite(self.bool_expr(1), self.stmt(depth - 1), self.stmt(depth - 1)),
            _ => while_(self.bool_expr(1), self.stmt(depth - 1)),
        }
    }

    /// A statement or expression with every variable bound.
    pub fn program(&mut self, depth: usize) -> Conf {
        let t = if self.n(4) == 0 { self.int_expr(depth) } else { self.stmt(depth) };
        let s = st(&[("x", self.n(5) as i64), ("y", self.n(5) as i64), ("z", self.n(5) as i64)]);
        Conf::new(t, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{output_of, sos_run, RunEnd};

    #[test]
    fn rule_counts() {
        assert_eq!(imp().rules.len(), 15);
        assert_eq!(imp_ext().rules.len(), 23);
        assert_eq!(lockstep_demo().rules.len(), 16);
    }

    #[test]
    fn paren_program_prints_balanced() {
        let lang = imp_ext();
        let tr = sos_run(&lang, &paren_program(), 500);
        assert_eq!(tr.end, RunEnd::Halted);
        let out = output_of(&tr.states.last().unwrap().state);
        assert_eq!(out, vec![strt("("), int(1), strt("+"), int(2), strt(")")]);
    }

    #[test]
    fn for_loop_counts() {
        let lang = imp_ext();
        let p = nv("for", vec![strt("i"), int(1), int(3), print(var_("i"))]);
        let tr = sos_run(&lang, &Conf::new(p, lang.initial.clone()), 500);
        assert_eq!(tr.end, RunEnd::Halted);
        assert_eq!(output_of(&tr.states.last().unwrap().state), vec![int(1), int(2), int(3)]);
    }
}
