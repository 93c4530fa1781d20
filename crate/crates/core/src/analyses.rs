//! Two client analyses: constant propagation and parenthesis balance.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::cfg::Cfg;
use crate::codegen::{GeneratedCfg, Role};
use crate::term::{Sym, Term};

/// Flat lattice of integer constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Const {
    Bot,
    Val(i64),
    Top,
}

impl Const {
    pub fn join(self, other: Const) -> Const {
        match (self, other) {
            (Const::Bot, x) | (x, Const::Bot) => x,
            (Const::Val(a), Const::Val(b)) if a == b => Const::Val(a),
            _ => Const::Top,
        }
    }

    pub fn leq(self, other: Const) -> bool {
        self.join(other) == other
    }
}

/// Variables missing from the map are `Bot`.
pub type ConstEnv = BTreeMap<Sym, Const>;

pub fn join_env(a: &ConstEnv, b: &ConstEnv) -> ConstEnv {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert(Const::Bot);
        *e = e.join(*v);
    }
    out
}

fn name_of(t: &Term) -> Option<Sym> {
    t.as_str().map(crate::term::sym)
}

/// Integer value of an expression under `env`, as far as it is known.
pub fn eval_const(t: &Term, env: &ConstEnv) -> Const {
    match t {
        Term::Int(n) => Const::Val(*n),
        Term::NonVal(h, c) if &**h == "var" && c.len() == 1 => {
            name_of(&c[0]).and_then(|x| env.get(&x).copied()).unwrap_or(Const::Bot)
        }
        Term::NonVal(h, c) if &**h == "+" && c.len() == 2 => match (eval_const(&c[0], env), eval_const(&c[1], env)) {
            (Const::Val(a), Const::Val(b)) => Const::Val(a.wrapping_add(b)),
            (Const::Bot, _) | (_, Const::Bot) => Const::Bot,
            _ => Const::Top,
        },
        _ => Const::Top,
    }
}

fn transfer(g: &GeneratedCfg, program: &Term, n: usize, env: &ConstEnv) -> ConstEnv {
    let node = &g.nodes[n];
    let Some(t) = program.at(&node.path) else { return env.clone() };
    let parent = node.path.split_last().and_then(|(&i, up)| Some((i, program.at(up)?)));
    let is = |p: &Term, h: &str| p.head().is_some_and(|x| &**x == h);
    let kids = t.children();
    let mut writes: Vec<(&Term, Const)> = Vec::new();
    match (&*node.node_type, node.role) {
        (":=", Role::Out) => writes.push((&kids[0], eval_const(&kids[1], env))),
        ("let", Role::In) if kids[1].is_value() => writes.push((&kids[0], eval_const(&kids[1], env))),
        ("for", Role::In) => writes.push((&kids[0], Const::Top)),
        _ => {}
    }
    if node.role == Role::Out {
        match parent {
            Some((1, p)) if is(p, "let") => writes.push((&p.children()[0], eval_const(t, env))),
            Some((3, p)) if is(p, "for") => writes.push((&p.children()[0], Const::Top)),
            _ => {}
        }
    }
    let mut env = env.clone();
    for (x, v) in writes {
        if let Some(x) = name_of(x) {
            env.insert(x, v);
        }
    }
    env
}

/// Environment after each node of a recipe-generated CFG; `None` where
/// no path reaches.
pub fn constant_propagation(g: &GeneratedCfg, program: &Term, entry: &ConstEnv) -> Vec<Option<ConstEnv>> {
    let n = g.nodes.len();
    let mut preds = alloc::vec![Vec::new(); n];
    let mut succs = alloc::vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        preds[b].push(a);
        succs[a].push(b);
    }
    let mut out: Vec<Option<ConstEnv>> = alloc::vec![None; n];
    let mut work: VecDeque<usize> = g.ins.iter().copied().collect();
    while let Some(i) = work.pop_front() {
        let mut inp: Option<ConstEnv> = g.ins.contains(&i).then(|| entry.clone());
        for &p in &preds[i] {
            if let Some(e) = &out[p] {
                inp = Some(match inp {
                    None => e.clone(),
                    Some(x) => join_env(&x, e),
                });
            }
        }
        let Some(inp) = inp else { continue };
        let new = transfer(g, program, i, &inp);
        if out[i].as_ref() != Some(&new) {
            out[i] = Some(new);
            work.extend(succs[i].iter().copied());
        }
    }
    out
}

/// Joined environment over the program's exit nodes.
pub fn exit_env(g: &GeneratedCfg, envs: &[Option<ConstEnv>]) -> Option<ConstEnv> {
    g.outs.iter().filter_map(|&o| envs[o].clone()).reduce(|a, b| join_env(&a, &b))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParenVerdict {
    Balanced,
    /// Shortest offending path of CFG nodes from the entry.
    Unbalanced(Vec<usize>),
    Unknown,
}

pub const PAREN_CAP: i64 = 8;

/// Token effect of a state: `+1` for printing `open`, `-1` for `close`.
pub fn print_weight(t: &Term, open: &str, close: &str) -> i64 {
    match t {
        Term::NonVal(h, c) if &**h == "print" && c.len() == 1 => match c[0].as_str() {
            Some(s) if s == open => 1,
            Some(s) if s == close => -1,
            _ => 0,
        },
        _ => 0,
    }
}

/// Counter abstraction over all paths. Each node adds its weight when
/// visited; nodes without successors are exits.
pub fn paren_balance(cfg: &Cfg, weight: &dyn Fn(usize) -> i64, cap: i64) -> ParenVerdict {
    let mut parent: BTreeMap<(usize, i64), Option<(usize, i64)>> = BTreeMap::new();
    let start = (cfg.start, weight(cfg.start));
    let path_to = |parent: &BTreeMap<(usize, i64), Option<(usize, i64)>>, mut at: (usize, i64)| {
        let mut p = alloc::vec![at.0];
        while let Some(Some(prev)) = parent.get(&at) {
            p.push(prev.0);
            at = *prev;
        }
        p.reverse();
        p
    };
    parent.insert(start, None);
    let mut work = VecDeque::from([start]);
    let mut unknown = false;
    while let Some((n, c)) = work.pop_front() {
        if c < 0 {
            return ParenVerdict::Unbalanced(path_to(&parent, (n, c)));
        }
        if c > cap {
            unknown = true;
            continue;
        }
        let succs: BTreeSet<usize> = cfg.successors(n).collect();
        if succs.is_empty() && c != 0 {
            return ParenVerdict::Unbalanced(path_to(&parent, (n, c)));
        }
        for m in succs {
            let next = (m, c + weight(m));
            if !parent.contains_key(&next) {
                parent.insert(next, Some((n, c)));
                work.push_back(next);
            }
        }
    }
    if unknown {
        ParenVerdict::Unknown
    } else {
        ParenVerdict::Balanced
    }
}

/// Weight of a CFG node: the sum over the states merged into it.
pub fn member_weights(cfg: &Cfg, graph: &crate::cfg::TransitionGraph, open: &str, close: &str) -> Vec<i64> {
    cfg.nodes
        .iter()
        .map(|n| n.members.iter().map(|&i| print_weight(&graph.nodes[i].conf.term, open, close)).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::Abstraction;
    use crate::am::{build_am, AmState};
    use crate::cfg::{explore_graph, identity_projection, project_graph, MAX_STATES};
    use crate::codegen::{compile_language, recipe_to_cfg, recipes_of};
    use crate::languages::{assign, paren_program, imp, imp_ext, int, ite, nv, print, seq, strt, var_};
    use crate::pattern::MAX_PATTERN_NODES;
    use crate::term::{sym, Conf};
    use alloc::vec;

    fn const_exit(t: Term) -> ConstEnv {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let (c, _) = compile_language(&lang, &am, &Abstraction::value_irrel(), MAX_PATTERN_NODES);
        let g = recipe_to_cfg(&recipes_of(&c), &t).unwrap();
        let envs = constant_propagation(&g, &t, &ConstEnv::new());
        exit_env(&g, &envs).unwrap()
    }

    #[test]
    fn straight_line_constants() {
        let t = seq(vec![assign("x", int(1)), assign("y", nv("+", vec![var_("x"), int(2)]))]);
        let env = const_exit(t);
        assert_eq!(env.get(&sym("y")), Some(&Const::Val(3)));
        assert_eq!(env.get(&sym("x")), Some(&Const::Val(1)));
    }

    #[test]
    fn branches_join_to_top() {
        let c = nv("<", vec![var_("z"), int(0)]);
        let t = seq(vec![assign("z", int(0)), ite(c, assign("x", int(1)), assign("x", int(2)))]);
        assert_eq!(const_exit(t).get(&sym("x")), Some(&Const::Top));
    }

    #[test]
    fn lattice_basics() {
        assert_eq!(Const::Bot.join(Const::Val(2)), Const::Val(2));
        assert_eq!(Const::Val(1).join(Const::Val(2)), Const::Top);
        assert!(Const::Val(1).leq(Const::Top));
    }

    fn paren(t: Conf, abs: &Abstraction) -> ParenVerdict {
        let lang = imp_ext();
        let am = build_am(&lang, &[]).unwrap();
        let g = explore_graph(&lang, &am, abs, &AmState::start(t), MAX_STATES);
        assert!(!g.truncated);
        let cfg = project_graph(&g, &identity_projection);
        let w = member_weights(&cfg, &g, "(", ")");
        paren_balance(&cfg, &|i| w[i], PAREN_CAP)
    }

    #[test]
    fn parens_need_branch_correlation() {
        let tracked = Abstraction::bool_track(&["b"]).keeping(&["(", ")"]);
        assert_eq!(paren(paren_program(), &tracked), ParenVerdict::Balanced);
        let plain = Abstraction::value_irrel().keeping(&["(", ")"]);
        assert!(matches!(paren(paren_program(), &plain), ParenVerdict::Unbalanced(p) if p.len() > 1));
    }

    #[test]
    fn no_parens_is_balanced() {
        let t = Conf::new(seq(vec![print(strt("+")), print(int(1))]), imp_ext().initial);
        let abs = Abstraction::value_irrel().keeping(&["(", ")"]);
        assert_eq!(paren(t, &abs), ParenVerdict::Balanced);
    }
}
