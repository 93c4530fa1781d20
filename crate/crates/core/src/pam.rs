//! Phased abstract machine: contexts, frames, and translation from SOS.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::semantics::{Call, Language, Rhs, RunEnd, SosRule, Trace};
use crate::term::{sym, Conf, MatchType, State, Sym, Term, VarId};
use crate::unify::{Fold, Syntax, Unifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    /// Pushed by a recursive step; popped by an up-rule.
    Step,
    /// Pushed by a semantic-function call; popped right after.
    Comp,
}

/// Remainder of a rule, waiting for a result shaped like `binder`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Frame {
    pub kind: FrameKind,
    pub binder: Conf,
    pub body: Rhs,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Base {
    Emp,
    Var(VarId),
}

/// A stack of frames; the top is the last element.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Context {
    pub base: Base,
    pub frames: Vec<Frame>,
}

impl Context {
    pub fn emp() -> Context {
        Context { base: Base::Emp, frames: Vec::new() }
    }

    pub fn var(v: VarId) -> Context {
        Context { base: Base::Var(v), frames: Vec::new() }
    }

    pub fn push(mut self, f: Frame) -> Context {
        self.frames.push(f);
        self
    }

    pub fn top(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn is_emp(&self) -> bool {
        self.base == Base::Emp && self.frames.is_empty()
    }

    /// Same stack without computation frames.
    pub fn without_comp(&self) -> Context {
        Context {
            base: self.base.clone(),
            frames: self.frames.iter().filter(|f| f.kind == FrameKind::Step).cloned().collect(),
        }
    }
}

impl Syntax for Frame {
    fn fold(&self, f: &mut dyn Fold) -> Frame {
        Frame { kind: self.kind, binder: self.binder.fold(f), body: self.body.fold(f) }
    }
}

impl Syntax for Context {
    fn fold(&self, f: &mut dyn Fold) -> Context {
        let mut out = match &self.base {
            Base::Emp => Context::emp(),
            Base::Var(v) => f.ctx_var(v),
        };
        for fr in &self.frames {
            out.frames.push(fr.fold(f));
        }
        out
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (open, close) = match self.kind {
            FrameKind::Step => ("[", "]"),
            FrameKind::Comp => ("{", "}"),
        };
        let plain = matches!(&self.binder.term, Term::Var(v, _) if v.is_hole())
            && self.binder.state.pure_var().is_some_and(|v| v.is_hole());
        match &self.body {
            Rhs::Build(c) if plain => write!(f, "{}{}{}", open, c, close),
            body => write!(f, "{}{} -> {}{}", open, self.binder, body, close),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            Base::Emp => f.write_str("emp")?,
            Base::Var(v) => write!(f, "{}", v)?,
        }
        for fr in &self.frames {
            write!(f, " ∘ {}", fr)?;
        }
        Ok(())
    }
}

/// Collects variables sitting in state-tail position.
struct StateVars(BTreeSet<VarId>);

impl Fold for StateVars {
    fn var(&mut self, v: &VarId, mt: MatchType) -> Term {
        Term::Var(v.clone(), mt)
    }
    fn state_var(&mut self, v: &VarId) -> State {
        self.0.insert(v.clone());
        State::of(v.clone())
    }
    fn ctx_var(&mut self, v: &VarId) -> Context {
        Context::var(v.clone())
    }
}

fn rhs_results(r: &Rhs, out: &mut Vec<VarId>) {
    match r {
        Rhs::Build(_) => {}
        Rhs::Step { result, rest, .. } => {
            out.extend(result.vars());
            rhs_results(rest, out);
        }
        Rhs::Call { call, rest } => {
            out.extend(call.result.vars());
            rhs_results(rest, out);
        }
    }
}

/// Builds a frame, turning variables bound inside it into holes.
pub fn make_frame(kind: FrameKind, binder: &Conf, body: &Rhs) -> Frame {
    let mut bound = binder.vars();
    rhs_results(body, &mut bound);
    let mut sv = StateVars(BTreeSet::new());
    binder.fold(&mut sv);
    body.fold(&mut sv);
    let mut names: BTreeMap<VarId, VarId> = BTreeMap::new();
    let (mut nt, mut ns) = (0, 0);
    for v in bound {
        if names.contains_key(&v) {
            continue;
        }
        let h = if sv.0.contains(&v) {
            ns += 1;
            if ns == 1 { VarId::hole("μ") } else { VarId::hole(&format!("μ{}", ns)) }
        } else {
            nt += 1;
            if nt == 1 { VarId::hole("t") } else { VarId::hole(&format!("t{}", nt)) }
        };
        names.insert(v, h);
    }
    let mut g = |v: &VarId| names.get(v).cloned().unwrap_or_else(|| v.clone());
    Frame { kind, binder: binder.map_vars(&mut g), body: body.map_vars(&mut g) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PamState {
    pub conf: Conf,
    pub ctx: Context,
    pub phase: Phase,
}

impl PamState {
    pub fn new(conf: Conf, ctx: Context, phase: Phase) -> PamState {
        PamState { conf, ctx, phase }
    }

    pub fn start(conf: Conf) -> PamState {
        PamState::new(conf, Context::emp(), Phase::Down)
    }

    /// Computation frames hidden, as traces are usually shown.
    pub fn shown(&self) -> PamState {
        PamState { ctx: self.ctx.without_comp(), ..self.clone() }
    }
}

impl Syntax for PamState {
    fn fold(&self, f: &mut dyn Fold) -> PamState {
        PamState { conf: self.conf.fold(f), ctx: self.ctx.fold(f), phase: self.phase }
    }
}

impl fmt::Display for PamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.phase {
            Phase::Down => "↓",
            Phase::Up => "↑",
        };
        write!(f, "⟨{} | {}⟩{}", self.conf, self.ctx, arrow)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PamRule {
    pub name: Sym,
    pub lhs: PamState,
    pub chain: Vec<Call>,
    pub rhs: PamState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    DownDown,
    DownUp,
    UpUp,
    UpDown,
}

impl PamRule {
    pub fn kind(&self) -> RuleKind {
        match (self.lhs.phase, self.rhs.phase) {
            (Phase::Down, Phase::Down) => RuleKind::DownDown,
            (Phase::Down, Phase::Up) => RuleKind::DownUp,
            (Phase::Up, Phase::Up) => RuleKind::UpUp,
            (Phase::Up, Phase::Down) => RuleKind::UpDown,
        }
    }

    pub fn is_reset(&self) -> bool {
        &*self.name == RESET
    }
}

impl Syntax for PamRule {
    fn fold(&self, f: &mut dyn Fold) -> PamRule {
        PamRule {
            name: self.name.clone(),
            lhs: self.lhs.fold(f),
            chain: self.chain.fold(f),
            rhs: self.rhs.fold(f),
        }
    }
}

pub fn write_chain(f: &mut fmt::Formatter<'_>, chain: &[Call]) -> fmt::Result {
    for c in chain {
        write!(f, "{} in ", c)?;
    }
    Ok(())
}

impl fmt::Display for PamRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ↪ ", self.name, self.lhs)?;
        write_chain(f, &self.chain)?;
        write!(f, "{}", self.rhs)
    }
}

pub const RESET: &str = "reset";

pub fn reset_rule() -> PamRule {
    let c = Conf::new(Term::var("t", MatchType::NonVal), State::var("s"));
    PamRule {
        name: sym(RESET),
        lhs: PamState::new(c.clone(), Context::emp(), Phase::Up),
        chain: Vec::new(),
        rhs: PamState::new(c, Context::emp(), Phase::Down),
    }
}

/// Translates every rule, then appends the reset rule.
pub fn sos_to_pam(lang: &Language) -> Vec<PamRule> {
    let mut out = Vec::new();
    for r in &lang.rules {
        out.extend(sos_rule_to_pam(r));
    }
    out.push(reset_rule());
    out
}

pub fn sos_rule_to_pam(r: &SosRule) -> Vec<PamRule> {
    let k = Context::var(VarId::named("k"));
    let mut out = Vec::new();
    let start = PamState::new(r.lhs.clone(), k.clone(), Phase::Down);
    rhs_to_pam(&r.name, start, &k, &r.rhs, &mut out);
    out
}

fn rhs_to_pam(name: &str, s: PamState, k: &Context, rhs: &Rhs, out: &mut Vec<PamRule>) {
    let rname = sym(&format!("{}.{}", name, out.len()));
    match rhs {
        Rhs::Build(c) => out.push(PamRule {
            name: rname,
            lhs: s,
            chain: Vec::new(),
            rhs: PamState::new(c.clone(), k.clone(), Phase::Up),
        }),
        Rhs::Step { result, arg, rest } => {
            let k2 = k.clone().push(make_frame(FrameKind::Step, result, rest));
            out.push(PamRule {
                name: rname,
                lhs: s,
                chain: Vec::new(),
                rhs: PamState::new(arg.clone(), k2.clone(), Phase::Down),
            });
            rhs_to_pam(name, PamState::new(result.clone(), k2, Phase::Up), k, rest, out);
        }
        Rhs::Call { call, rest } => {
            let k2 = k.clone().push(make_frame(FrameKind::Comp, &call.result, rest));
            out.push(PamRule {
                name: rname,
                lhs: s,
                chain: alloc::vec![call.clone()],
                rhs: PamState::new(call.result.clone(), k2.clone(), Phase::Down),
            });
            rhs_to_pam(name, PamState::new(call.result.clone(), k2, Phase::Down), k, rest, out);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Classified {
    pub down_down: Vec<Sym>,
    pub down_up: Vec<Sym>,
    pub up_up: Vec<Sym>,
    pub up_down: Vec<Sym>,
}

pub fn classify_rules(rules: &[PamRule]) -> Classified {
    let mut c = Classified::default();
    for r in rules {
        let bucket = match r.kind() {
            RuleKind::DownDown => &mut c.down_down,
            RuleKind::DownUp => &mut c.down_up,
            RuleKind::UpUp => &mut c.up_up,
            RuleKind::UpDown => &mut c.up_down,
        };
        bucket.push(r.name.clone());
    }
    c
}

/// Semantic-function evaluator: concrete, or some abstraction's.
pub type Beta<'a> = &'a dyn Fn(&Call, &[Conf]) -> Vec<Conf>;

pub fn concrete_beta(lang: &Language) -> impl Fn(&Call, &[Conf]) -> Vec<Conf> + '_ {
    move |call: &Call, args: &[Conf]| match lang.semfuns.get(&call.fun) {
        Some(f) => (f.concrete)(args),
        None => Vec::new(),
    }
}

/// Threads a call chain, branching on every result.
pub fn run_chain(chain: &[Call], u: Unifier, beta: Beta<'_>) -> Vec<Unifier> {
    let mut cur = alloc::vec![u];
    for call in chain {
        let mut next = Vec::new();
        for u in cur {
            let args: Vec<Conf> = call.args.iter().map(|a| u.resolve(a)).collect();
            for r in beta(call, &args) {
                let mut u2 = u.clone();
                if u2.conf(&call.result, &r) {
                    next.push(u2);
                }
            }
        }
        cur = next;
    }
    cur
}

/// Every successor under any rule, with the rule that produced it.
pub fn pam_successors(rules: &[PamRule], s: &PamState, beta: Beta<'_>) -> Vec<(Sym, PamState)> {
    let mut out = Vec::new();
    for r in rules {
        if r.lhs.phase != s.phase {
            continue;
        }
        let mut u = Unifier::new();
        if !(u.conf(&r.lhs.conf, &s.conf) && u.ctx(&r.lhs.ctx, &s.ctx)) {
            continue;
        }
        for u in run_chain(&r.chain, u, beta) {
            let n = u.resolve(&r.rhs);
            if !out.iter().any(|(_, m)| *m == n) {
                out.push((r.name.clone(), n));
            }
        }
    }
    out
}

pub fn pam_step(lang: &Language, rules: &[PamRule], s: &PamState) -> Vec<PamState> {
    let beta = concrete_beta(lang);
    pam_successors(rules, s, &beta).into_iter().map(|(_, s)| s).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterminismViolation {
    pub state: String,
    pub successors: usize,
}

pub fn pam_run(lang: &Language, rules: &[PamRule], s: &PamState, fuel: usize) -> Result<Trace<PamState>, DeterminismViolation> {
    let mut states = alloc::vec![s.clone()];
    let mut steps = 0;
    loop {
        let cur = states.last().unwrap();
        let next = pam_step(lang, rules, cur);
        if next.len() > 1 {
            return Err(DeterminismViolation { state: format!("{}", cur), successors: next.len() });
        }
        let end = match next.into_iter().next() {
            None if cur.phase == Phase::Up && cur.ctx.is_emp() && cur.conf.term.is_value() => RunEnd::Halted,
            None => RunEnd::Stuck,
            Some(_) if steps == fuel => RunEnd::OutOfFuel,
            Some(n) => {
                states.push(n);
                steps += 1;
                continue;
            }
        };
        return Ok(Trace { states, end });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::languages::{imp, int, nv};
    use crate::term::show;
    use alloc::vec;

    #[test]
    fn assignment_rules() {
        let lang = imp();
        let cong = sos_rule_to_pam(lang.rule("AssnCong").unwrap());
        assert_eq!(cong.len(), 2);
        assert_eq!(cong[0].kind(), RuleKind::DownDown);
        assert_eq!(cong[1].kind(), RuleKind::UpUp);
        assert_eq!(show(cong[0].rhs.ctx.top().unwrap()), "[((:= ?x:all □t), □μ)]");
        let eval = sos_rule_to_pam(lang.rule("AssnEval").unwrap());
        assert_eq!(eval.len(), 1);
        assert_eq!(eval[0].kind(), RuleKind::DownUp);
    }

    #[test]
    fn add_eval_has_chain() {
        let lang = imp();
        let r = sos_rule_to_pam(lang.rule("AddEval").unwrap());
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].chain.len(), 1);
        assert_eq!(&*r[0].chain[0].fun, "add");
    }

    #[test]
    fn reset_is_up_down() {
        let c = classify_rules(&[reset_rule()]);
        assert_eq!(c.up_down, vec![sym(RESET)]);
    }

    #[test]
    fn value_at_emp_halts() {
        let lang = imp();
        let rules = sos_to_pam(&lang);
        let s = PamState::new(Conf::new(Term::atom("skip"), State::empty()), Context::emp(), Phase::Up);
        let tr = pam_run(&lang, &rules, &s, 10).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert_eq!(tr.end, RunEnd::Halted);
        let t = nv("+", vec![int(1), int(1)]);
        let tr = pam_run(&lang, &rules, &PamState::start(Conf::new(t, State::empty())), 0).unwrap();
        assert_eq!(tr.states.len(), 1);
    }
}
