//! Abstract machine: conversion from the PAM, fusion, execution.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::pam::{concrete_beta, run_chain, write_chain, Beta, Context, FrameKind, Phase, PamRule, PamState, RuleKind};
use crate::semantics::{Call, Language, RunEnd, Trace};
use crate::term::{sym, Conf, MatchType, Sym, Term};
use crate::unify::{canonical, freeze, fresh_rename, fresh_var, tidy, Fold, Syntax, Unifier};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AmState {
    pub conf: Conf,
    pub ctx: Context,
}

impl AmState {
    pub fn new(conf: Conf, ctx: Context) -> AmState {
        AmState { conf, ctx }
    }

    pub fn start(conf: Conf) -> AmState {
        AmState::new(conf, Context::emp())
    }
}

impl Syntax for AmState {
    fn fold(&self, f: &mut dyn Fold) -> AmState {
        AmState { conf: self.conf.fold(f), ctx: self.ctx.fold(f) }
    }
}

impl fmt::Display for AmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{} | {}⟩", self.conf, self.ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AmRule {
    pub name: Sym,
    pub lhs: AmState,
    pub chain: Vec<Call>,
    pub rhs: AmState,
    /// PAM rules this one stands for, in order.
    pub provenance: Vec<Sym>,
    pub from_up: bool,
}

impl Syntax for AmRule {
    fn fold(&self, f: &mut dyn Fold) -> AmRule {
        AmRule {
            lhs: self.lhs.fold(f),
            chain: self.chain.fold(f),
            rhs: self.rhs.fold(f),
            ..self.clone()
        }
    }
}

impl fmt::Display for AmRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = tidy(self);
        write!(f, "{}: {} → ", r.name, r.lhs)?;
        write_chain(f, &r.chain)?;
        write!(f, "{}", r.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Invertible,
    NotInvertible,
    Unknown(String),
}

pub const DEPTH_BOUND: usize = 32;
pub const FUSION_BOUND: usize = 8;

/// Checks every up-up rule by searching for its inverse path.
pub fn check_up_rules_invertible(rules: &[PamRule], depth: usize) -> Vec<(Sym, Verdict)> {
    rules
        .iter()
        .filter(|r| r.kind() == RuleKind::UpUp)
        .map(|r| (r.name.clone(), invertible(rules, r, depth)))
        .collect()
}

fn invertible(rules: &[PamRule], r: &PamRule, depth: usize) -> Verdict {
    if !r.chain.is_empty() {
        return Verdict::Unknown(String::from("rule invokes a semantic function"));
    }
    let mut u = Unifier::new();
    if !u.term(&r.lhs.conf.term, &Term::Var(fresh_var("nv"), MatchType::NonVal)) {
        return Verdict::Invertible;
    }
    let r = freeze(&u.resolve(r));
    let goal = PamState { phase: Phase::Down, ..r.lhs.clone() };
    let start = PamState { phase: Phase::Down, ..r.rhs.clone() };
    let mut seen = BTreeSet::new();
    let mut frontier = alloc::vec![start];
    for _ in 0..=depth {
        let mut next = Vec::new();
        for s in frontier {
            if s == goal {
                return Verdict::Invertible;
            }
            if !seen.insert(s.clone()) {
                continue;
            }
            for p in rules {
                if p.lhs.phase != Phase::Down {
                    continue;
                }
                let p = fresh_rename(p);
                let mut u = Unifier::new();
                if !(u.conf(&p.lhs.conf, &s.conf) && u.ctx(&p.lhs.ctx, &s.ctx)) {
                    continue;
                }
                if !p.chain.is_empty() {
                    return Verdict::Unknown(format!("inverse path goes through {}", p.name));
                }
                let n = u.resolve(&p.rhs);
                if n.phase == Phase::Down {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            return Verdict::NotInvertible;
        }
        frontier = next;
    }
    Verdict::Unknown(format!("no inverse within {} steps", depth))
}

/// Up-down rules other than the reset rule, if any.
pub fn check_no_up_down(rules: &[PamRule]) -> Result<(), Vec<Sym>> {
    let bad: Vec<Sym> = rules
        .iter()
        .filter(|r| r.kind() == RuleKind::UpDown && !r.is_reset())
        .map(|r| r.name.clone())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConversionError {
    PreconditionFailed { verdicts: Vec<(Sym, Verdict)>, up_down: Vec<Sym> },
    FusionDiverged,
}

impl fmt::Display for ConversionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversionError::PreconditionFailed { verdicts, up_down } => {
                f.write_str("cannot build abstract machine:")?;
                for (n, v) in verdicts {
                    write!(f, " {} is {:?};", n, v)?;
                }
                for n in up_down {
                    write!(f, " {} is an up-down rule;", n)?;
                }
                Ok(())
            }
            ConversionError::FusionDiverged => f.write_str("fusion did not reach a fixpoint"),
        }
    }
}

pub fn pam_to_unfused_am(rules: &[PamRule], assume: &[String]) -> Result<Vec<AmRule>, ConversionError> {
    let verdicts: Vec<(Sym, Verdict)> = check_up_rules_invertible(rules, DEPTH_BOUND)
        .into_iter()
        .filter(|(n, v)| *v != Verdict::Invertible && !assume.iter().any(|a| **a == **n))
        .collect();
    let up_down = check_no_up_down(rules).err().unwrap_or_default();
    if !verdicts.is_empty() || !up_down.is_empty() {
        return Err(ConversionError::PreconditionFailed { verdicts, up_down });
    }
    let mut out = Vec::new();
    for r in rules {
        if r.is_reset() {
            continue;
        }
        let mut r = r.clone();
        if r.lhs.phase == Phase::Up {
            let mut u = Unifier::new();
            if !u.term(&r.lhs.conf.term, &Term::Var(fresh_var("v"), MatchType::Val)) {
                continue;
            }
            r = u.resolve(&r);
        }
        if r.lhs.phase == Phase::Down && r.rhs.phase == Phase::Up && r.chain.is_empty()
            && r.lhs.conf == r.rhs.conf && r.lhs.ctx == r.rhs.ctx
        {
            continue;
        }
        out.push(AmRule {
            name: r.name.clone(),
            lhs: AmState::new(r.lhs.conf, r.lhs.ctx),
            chain: r.chain,
            rhs: AmState::new(r.rhs.conf, r.rhs.ctx),
            provenance: alloc::vec![r.name],
            from_up: r.lhs.phase == Phase::Up,
        });
    }
    Ok(out)
}

/// Rule `f` followed by rule `g`, if they can follow each other.
pub fn fuse_pair(f: &AmRule, g: &AmRule) -> Option<AmRule> {
    let g = fresh_rename(g);
    let mut u = Unifier::new();
    if !(u.conf(&f.rhs.conf, &g.lhs.conf) && u.ctx(&f.rhs.ctx, &g.lhs.ctx)) {
        return None;
    }
    let mut chain = f.chain.clone();
    chain.extend(g.chain.iter().cloned());
    let mut provenance = f.provenance.clone();
    provenance.extend(g.provenance.iter().cloned());
    Some(AmRule {
        name: sym(&format!("{}+{}", f.name, g.name)),
        lhs: u.resolve(&f.lhs),
        chain: u.resolve(&chain),
        rhs: u.resolve(&g.rhs),
        provenance,
        from_up: f.from_up,
    })
}

fn successors<'a>(f: &AmRule, rules: &'a [AmRule]) -> Vec<(&'a AmRule, AmRule)> {
    rules.iter().filter_map(|g| fuse_pair(f, g).map(|fg| (g, fg))).collect()
}

fn origin(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

/// The single successor up to renaming. Continuations of different rules
/// can coincide, so equal fusions count once; the rule's own continuation
/// is preferred for naming.
fn unique_successor(f: &AmRule, rules: &[AmRule]) -> Option<AmRule> {
    let s = successors(f, rules);
    let first = canonical(&strip(&s.first()?.1));
    if s.iter().any(|(_, fg)| canonical(&strip(fg)) != first) {
        return None;
    }
    let own = f.provenance.last().map(|p| origin(p)).unwrap_or("");
    let pick = s.iter().position(|(g, _)| origin(&g.name) == own).unwrap_or(0);
    s.into_iter().nth(pick).map(|(_, fg)| fg)
}

fn strip(r: &AmRule) -> (AmState, (Vec<Call>, AmState)) {
    (r.lhs.clone(), (r.chain.clone(), r.rhs.clone()))
}

fn ends_in_comp(r: &AmRule) -> bool {
    !r.chain.is_empty() && r.rhs.ctx.top().is_some_and(|f| f.kind == FrameKind::Comp)
}

pub fn fuse(rules: &[AmRule], bound: usize) -> Result<Vec<AmRule>, ConversionError> {
    let mut cur = rules.to_vec();
    let mut settled = false;
    for _ in 0..bound {
        let mut changed = false;
        let mut next = Vec::new();
        for r in &cur {
            if ends_in_comp(r) {
                if let Some(fg) = unique_successor(r, &cur) {
                    next.push(fg);
                    changed = true;
                    continue;
                }
            } else if r.from_up && r.provenance.len() == 1 {
                let s = successors(r, &cur);
                if !s.is_empty() {
                    next.extend(s.into_iter().map(|(_, fg)| fg));
                    changed = true;
                    continue;
                }
            }
            next.push(r.clone());
        }
        cur = next;
        if !changed {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(ConversionError::FusionDiverged);
    }
    cur.retain(|r| !r.lhs.ctx.top().is_some_and(|f| f.kind == FrameKind::Comp));
    Ok(cur)
}

/// Full conversion: SOS to PAM to fused AM.
pub fn build_am(lang: &Language, assume: &[String]) -> Result<Vec<AmRule>, ConversionError> {
    let pam = crate::pam::sos_to_pam(lang);
    fuse(&pam_to_unfused_am(&pam, assume)?, FUSION_BOUND)
}

/// Results of firing one rule.
pub fn apply_rule(r: &AmRule, s: &AmState, beta: Beta<'_>) -> Vec<AmState> {
    let mut u = Unifier::new();
    if !(u.conf(&r.lhs.conf, &s.conf) && u.ctx(&r.lhs.ctx, &s.ctx)) {
        return Vec::new();
    }
    let mut out: Vec<AmState> = run_chain(&r.chain, u, beta).iter().map(|u| u.resolve(&r.rhs)).collect();
    out.sort();
    out.dedup();
    out
}

pub fn am_successors(rules: &[AmRule], s: &AmState, beta: Beta<'_>) -> Vec<(Sym, AmState)> {
    let mut out: Vec<(Sym, AmState)> = Vec::new();
    for r in rules {
        for n in apply_rule(r, s, beta) {
            if !out.iter().any(|(_, m)| *m == n) {
                out.push((r.name.clone(), n));
            }
        }
    }
    out
}

pub fn am_step(lang: &Language, rules: &[AmRule], s: &AmState) -> Vec<AmState> {
    let beta = concrete_beta(lang);
    am_successors(rules, s, &beta).into_iter().map(|(_, s)| s).collect()
}

pub fn am_run(lang: &Language, rules: &[AmRule], s: &AmState, fuel: usize) -> Trace<AmState> {
    let mut states = alloc::vec![s.clone()];
    loop {
        let cur = states.last().unwrap();
        let next = am_step(lang, rules, cur);
        let end = match next.into_iter().next() {
            None if cur.ctx.is_emp() && cur.conf.term.is_value() => RunEnd::Halted,
            None => RunEnd::Stuck,
            Some(_) if states.len() > fuel => RunEnd::OutOfFuel,
            Some(n) => {
                states.push(n);
                continue;
            }
        };
        return Trace { states, end };
    }
}

/// The PAM state an AM state stands for when it is about to be worked on.
pub fn as_pam(s: &AmState, phase: Phase) -> PamState {
    PamState::new(s.conf.clone(), s.ctx.clone(), phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::languages::{assign, imp, int, lockstep_demo, nv, st, var_};
    use crate::pam::sos_to_pam;
    use alloc::vec;

    #[test]
    fn imp_up_rules_invert() {
        let pam = sos_to_pam(&imp());
        for (n, v) in check_up_rules_invertible(&pam, DEPTH_BOUND) {
            assert_eq!(v, Verdict::Invertible, "{}", n);
        }
        assert!(check_no_up_down(&pam).is_ok());
    }

    #[test]
    fn lockstep_is_rejected() {
        let pam = sos_to_pam(&lockstep_demo());
        let v = check_up_rules_invertible(&pam, DEPTH_BOUND);
        let lock: Vec<_> = v.iter().filter(|(n, _)| n.starts_with("LockstepComp")).collect();
        assert_eq!(lock.len(), 1);
        assert_eq!(&*lock[0].0, "LockstepComp.2");
        assert_eq!(lock[0].1, Verdict::NotInvertible);
        assert_eq!(check_no_up_down(&pam), Err(vec![sym("LockstepComp.1")]));
        assert!(pam_to_unfused_am(&pam, &[]).is_err());
    }

    #[test]
    fn assignment_fuses_to_two_rules() {
        let am = build_am(&imp(), &[]).unwrap();
        let got: Vec<_> = am.iter().filter(|r| r.provenance.iter().any(|p| p.starts_with("AssnCong"))).collect();
        assert_eq!(got.len(), 2);
        let up = got.iter().find(|r| r.from_up).unwrap();
        assert_eq!(&*up.name, "AssnCong.1+AssnEval.0");
        let shown = format!("{}", up);
        assert!(shown.contains("[((:= ?x:all □t), □μ)]"), "{}", shown);
        assert!(shown.contains("((skip), [?x:all -> ?v:val | ?m])"), "{}", shown);
    }

    #[test]
    fn runs_assignment() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let s = AmState::start(Conf::new(assign("x", var_("y")), st(&[("y", 1)])));
        let tr = am_run(&lang, &am, &s, 20);
        assert_eq!(tr.states.len(), 4);
        assert_eq!(tr.end, RunEnd::Halted);
        assert_eq!(tr.states[3].conf, Conf::new(Term::atom("skip"), st(&[("x", 1), ("y", 1)])));
    }

    #[test]
    fn runs_nested_addition() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let one = || int(1);
        let t = nv("+", vec![nv("+", vec![one(), nv("+", vec![one(), one()])]), one()]);
        let tr = am_run(&lang, &am, &AmState::start(Conf::new(t, st(&[]))), 50);
        assert_eq!(tr.end, RunEnd::Halted);
        assert_eq!(tr.states.last().unwrap().conf.term, int(4));
    }

    #[test]
    fn no_comp_rules_survive() {
        let am = build_am(&imp(), &[]).unwrap();
        assert!(am.iter().all(|r| r.rhs.ctx.top().map_or(true, |f| f.kind == FrameKind::Step)));
    }
}
