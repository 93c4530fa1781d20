//! Executable forms of the machine correspondences.
//!
//! Each check takes one concrete input and reports the first mismatch.
//! Property tests and the acceptance run feed them random programs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;

use crate::abstraction::{abs_step, Abstraction};
use crate::am::{am_run, am_step, apply_rule, AmRule, AmState};
use crate::cfg::TransitionGraph;
use crate::order::Precision;
use crate::pam::{concrete_beta, pam_run, pam_step, Context, Phase, PamRule, PamState};
use crate::semantics::{sos_run, sos_step, Language, Rhs, RunEnd};
use crate::term::{Conf, Sym};

/// The first `steps` SOS steps of `c` reappear, in order, as the PAM's
/// top-level up states `⟨c' | emp⟩↑`. The PAM is stepped only until every
/// SOS step has been matched.
pub fn sos_pam_trace(lang: &Language, pam: &[PamRule], c: &Conf, steps: usize) -> Result<(), String> {
    let sos = sos_run(lang, c, steps);
    if sos.end == RunEnd::Stuck {
        return Err(format!("SOS run of {} is stuck", c));
    }
    let want = &sos.states[1..];
    let fuel = 64 * (steps + 1) * (c.term.size() + 4);
    let mut cur = PamState::start(c.clone());
    let mut matched = 0;
    let mut last: Option<Conf> = None;
    for _ in 0..fuel {
        if matched == want.len() {
            return Ok(());
        }
        let next = pam_step(lang, pam, &cur);
        let [n] = &next[..] else {
            return Err(format!("{} PAM successors at {}", next.len(), cur));
        };
        // A reset repeats the configuration with the phase flipped.
        if n.phase == Phase::Up && n.ctx.is_emp() && last.as_ref() != Some(&n.conf) {
            if n.conf != want[matched] {
                return Err(format!("step {}: SOS {} vs PAM {}", matched + 1, want[matched], n.conf));
            }
            matched += 1;
            last = Some(n.conf.clone());
        }
        cur = n.clone();
    }
    if matched == want.len() {
        Ok(())
    } else {
        Err(format!("PAM matched {} of {} SOS steps within {} steps", matched, want.len(), fuel))
    }
}

/// One SOS step of `c`, replayed by the PAM beneath an arbitrary context:
/// `⟨c | k⟩↓` reaches `⟨c' | k⟩↑` without touching `k`.
pub fn pam_step_in_context(lang: &Language, pam: &[PamRule], c: &Conf, k: &Context, fuel: usize) -> Result<(), String> {
    let want = match sos_step(lang, c) {
        Ok(Some(n)) => n,
        Ok(None) => return Ok(()),
        Err(e) => return Err(format!("SOS stuck: {:?}", e)),
    };
    let keeps_k = |s: &PamState| s.ctx.base == k.base && s.ctx.frames.starts_with(&k.frames);
    let mut cur = PamState::new(c.clone(), k.clone(), Phase::Down);
    for _ in 0..fuel {
        let next = pam_step(lang, pam, &cur);
        let [n] = &next[..] else {
            return Err(format!("{} successors at {}", next.len(), cur));
        };
        if !keeps_k(n) {
            return Err(format!("injected context disturbed at {}", n));
        }
        if n.phase == Phase::Up && n.ctx == *k {
            return if n.conf == want { Ok(()) } else { Err(format!("PAM gave {} where SOS gave {}", n.conf, want)) };
        }
        cur = n.clone();
    }
    Err(format!("no return to the injected context within {} steps", fuel))
}

fn rule<'a>(rules: &'a [AmRule], name: &Sym) -> Option<&'a AmRule> {
    rules.iter().find(|r| &r.name == name)
}

/// Every fused step from `s` is the composition of its source rules, and
/// equals what the unfused machine reaches in as many steps.
pub fn fusion_agrees(lang: &Language, unfused: &[AmRule], fused: &[AmRule], s: &AmState) -> Result<(), String> {
    let beta = concrete_beta(lang);
    let mut fired = 0;
    for r in fused {
        for n in apply_rule(r, s, &beta) {
            fired += 1;
            let mut cur: BTreeSet<AmState> = BTreeSet::from([s.clone()]);
            for p in &r.provenance {
                let u = rule(unfused, p).ok_or_else(|| format!("{}: no unfused rule {}", r.name, p))?;
                cur = cur.iter().flat_map(|x| apply_rule(u, x, &beta)).collect();
            }
            if !cur.contains(&n) {
                return Err(format!("{} at {}: source rules do not reach {}", r.name, s, n));
            }
            let mut free: BTreeSet<AmState> = BTreeSet::from([s.clone()]);
            for _ in 0..r.provenance.len() {
                free = free.iter().flat_map(|x| am_step(lang, unfused, x)).collect();
            }
            if free.len() != 1 || !free.contains(&n) {
                return Err(format!("{} at {}: unfused machine reaches {:?}", r.name, s, free.len()));
            }
        }
    }
    let unfused_moves = !am_step(lang, unfused, s).is_empty();
    if (fired > 0) != unfused_moves {
        return Err(format!("at {}: fused fires {} rules, unfused moves: {}", s, fired, unfused_moves));
    }
    Ok(())
}

/// The configuration a frame body finally builds.
fn rebuilt(body: &Rhs) -> &Conf {
    match body {
        Rhs::Build(c) => c,
        Rhs::Step { rest, .. } | Rhs::Call { rest, .. } => rebuilt(rest),
    }
}

/// Inside a subterm whose sort the abstraction skips.
pub fn hidden(lang: &Language, abs: &Abstraction, s: &AmState) -> bool {
    s.ctx.frames.iter().any(|f| lang.node_sort(&rebuilt(&f.body).term).is_some_and(|k| abs.skips(k)))
}

/// For each concrete step `s → s'`, the abstract machine has a step from
/// `alpha(s)` to some state above `s'`.
///
/// Under a skipping abstraction the law is about visible states only: from
/// a visible `s`, the concrete run is followed to the next visible state
/// `t`, and `alpha(t)` must be covered by a step from `alpha(s)` or by
/// `alpha(s)` itself, the latter when the step only began or finished a
/// skipped subterm.
pub fn lifting_holds(lang: &Language, rules: &[AmRule], abs: &Abstraction, s: &AmState) -> Result<(), String> {
    let hat = abs.alpha(lang, s);
    let succs = abs_step(lang, rules, abs, &hat);
    if !abs.skipping() {
        if !s.leq(&hat) {
            return Err(format!("alpha not extensive at {}", s));
        }
        for n in am_step(lang, rules, s) {
            if !succs.iter().any(|m| n.leq(m)) {
                return Err(format!("{} → {} has no abstract cover from {}", s, n, hat));
            }
        }
        return Ok(());
    }
    if hidden(lang, abs, s) {
        return Ok(());
    }
    for n in am_step(lang, rules, s) {
        let mut t = n;
        for _ in 0..SKIP_FUEL {
            if !hidden(lang, abs, &t) {
                break;
            }
            match am_step(lang, rules, &t).into_iter().next() {
                Some(u) => t = u,
                None => return Ok(()),
            }
        }
        let img = abs.alpha(lang, &t);
        if !(img.leq(&hat) || succs.iter().any(|m| img.leq(m))) {
            return Err(format!("{} → {} has no abstract cover from {}", s, t, hat));
        }
    }
    Ok(())
}

const SKIP_FUEL: usize = 100_000;

/// Every state of the AM run shows up, in order, in the PAM run.
pub fn am_trace_in_pam(lang: &Language, pam: &[PamRule], am: &[AmRule], c: &Conf, fuel: usize) -> Result<(), String> {
    let a = am_run(lang, am, &AmState::start(c.clone()), fuel);
    let p = pam_run(lang, pam, &PamState::start(c.clone()), 64 * fuel)
        .map_err(|v| format!("PAM not deterministic at {}", v.state))?;
    let mut at = 0;
    for s in &a.states {
        let hit = p.states[at..]
            .iter()
            .position(|q| q.conf == s.conf && q.ctx.without_comp() == s.ctx);
        match hit {
            Some(i) => at += i,
            None if p.end == RunEnd::OutOfFuel => return Ok(()),
            None => return Err(format!("AM state {} missing from the PAM run", s)),
        }
    }
    let finished = |e: RunEnd| e == RunEnd::Halted || c.term.is_value() && e == RunEnd::Stuck;
    if a.end == RunEnd::Halted && !finished(p.end) {
        return Err(format!("AM halted, PAM ended {:?}", p.end));
    }
    Ok(())
}

/// A concrete run stays inside the explored graph: there is a path of
/// graph nodes covering it state by state.
pub fn graph_covers_run(lang: &Language, am: &[AmRule], g: &TransitionGraph, c: &Conf, fuel: usize) -> Result<(), String> {
    let run = am_run(lang, am, &AmState::start(c.clone()), fuel);
    let mut cur: BTreeSet<usize> = BTreeSet::from([g.start]);
    if !run.states[0].leq(&g.nodes[g.start]) {
        return Err("start state not covered".into());
    }
    for (i, s) in run.states.iter().enumerate().skip(1) {
        cur = cur.iter().flat_map(|&n| g.successors(n)).filter(|&m| s.leq(&g.nodes[m])).collect();
        if cur.is_empty() {
            return Err(format!("step {} to {} leaves the graph", i, s));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::am::{build_am, pam_to_unfused_am};
    use crate::cfg::{explore_graph, MAX_STATES};
    use crate::languages::{assign, imp, int, nv, st, var_};
    use crate::pam::sos_to_pam;
    use alloc::vec;

    fn prog() -> Conf {
        Conf::new(assign("x", nv("+", vec![var_("y"), int(1)])), st(&[("y", 2)]))
    }

    #[test]
    fn assignment_satisfies_all_laws() {
        let lang = imp();
        let pam = sos_to_pam(&lang);
        let unfused = pam_to_unfused_am(&pam, &[]).unwrap();
        let am = build_am(&lang, &[]).unwrap();
        sos_pam_trace(&lang, &pam, &prog(), 10).unwrap();
        pam_step_in_context(&lang, &pam, &prog(), &Context::emp(), 100).unwrap();
        am_trace_in_pam(&lang, &pam, &am, &prog(), 50).unwrap();
        let run = am_run(&lang, &am, &AmState::start(prog()), 50);
        for s in &run.states {
            fusion_agrees(&lang, &unfused, &am, s).unwrap();
            lifting_holds(&lang, &am, &Abstraction::value_irrel(), s).unwrap();
        }
        let g = explore_graph(&lang, &am, &Abstraction::value_irrel(), &AmState::start(prog()), MAX_STATES);
        graph_covers_run(&lang, &am, &g, &prog(), 50).unwrap();
    }

    #[test]
    fn mismatched_graph_is_caught() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let other = Conf::new(assign("z", int(0)), st(&[]));
        let g = explore_graph(&lang, &am, &Abstraction::value_irrel(), &AmState::start(other), MAX_STATES);
        assert!(graph_covers_run(&lang, &am, &g, &prog(), 50).is_err());
    }
}
