//! Interpreted-mode CFGs: abstract exploration and quotienting.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::abstraction::{step_with, Abstraction};
use crate::am::{AmRule, AmState};
use crate::pam::{Context, Frame};
use crate::semantics::{Language, Rhs};
use crate::term::{Conf, Term};
use crate::unify::canonical;

pub const MAX_STATES: usize = 10_000;

/// Reachable abstract states and the steps between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionGraph {
    pub nodes: Vec<AmState>,
    pub edges: BTreeSet<(usize, usize)>,
    pub start: usize,
    pub truncated: bool,
}

impl TransitionGraph {
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn index_of(&self, s: &AmState) -> Option<usize> {
        let c = canonical(s);
        self.nodes.iter().position(|n| *n == c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfgNode {
    pub state: AmState,
    /// Indices of the transition-graph nodes merged here, ascending.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub edges: BTreeSet<(usize, usize)>,
    pub start: usize,
    pub truncated: bool,
}

impl Cfg {
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }
}

/// `⟨(program, initial) | emp⟩`, after a well-formedness check.
pub fn initial_state(lang: &Language, program: &Term) -> Result<AmState, String> {
    lang.well_formed(program)?;
    Ok(AmState::start(Conf::new(program.clone(), lang.initial.clone())))
}

/// Worklist closure of abstract stepping from the abstracted start.
pub fn explore_graph(
    lang: &Language,
    rules: &[AmRule],
    abs: &Abstraction,
    start: &AmState,
    max_states: usize,
) -> TransitionGraph {
    let first = canonical(&abs.alpha_root(lang, start));
    let mut g = TransitionGraph { nodes: alloc::vec![first.clone()], edges: BTreeSet::new(), start: 0, truncated: false };
    let mut index: BTreeMap<AmState, usize> = BTreeMap::new();
    index.insert(first, 0);
    let mut work = VecDeque::from([0usize]);
    'outer: while let Some(i) = work.pop_front() {
        let s = g.nodes[i].clone();
        for (_, n) in step_with(lang, rules, abs, &s, true) {
            let n = canonical(&n);
            let j = match index.get(&n) {
                Some(&j) => j,
                None => {
                    if g.nodes.len() >= max_states {
                        g.truncated = true;
                        break 'outer;
                    }
                    let j = g.nodes.len();
                    index.insert(n.clone(), j);
                    g.nodes.push(n);
                    work.push_back(j);
                    j
                }
            };
            g.edges.insert((i, j));
        }
    }
    g
}

/// Quotient graph under a node map.
///
/// Distinct classes are linked when some member edge links them. A class
/// gets a self-loop only when every member can step to a member of the
/// same class.
pub fn project_graph(g: &TransitionGraph, proj: &dyn Fn(&AmState) -> AmState) -> Cfg {
    let mut class_of: Vec<usize> = Vec::with_capacity(g.nodes.len());
    let mut index: BTreeMap<AmState, usize> = BTreeMap::new();
    let mut nodes: Vec<CfgNode> = Vec::new();
    for (i, s) in g.nodes.iter().enumerate() {
        let p = canonical(&proj(s));
        let c = *index.entry(p.clone()).or_insert_with(|| {
            nodes.push(CfgNode { state: p, members: Vec::new() });
            nodes.len() - 1
        });
        nodes[c].members.push(i);
        class_of.push(c);
    }
    let mut edges = BTreeSet::new();
    for &(a, b) in &g.edges {
        if class_of[a] != class_of[b] {
            edges.insert((class_of[a], class_of[b]));
        }
    }
    for (c, n) in nodes.iter().enumerate() {
        let stays = n.members.iter().all(|&b| g.successors(b).any(|d| class_of[d] == c));
        if stays {
            edges.insert((c, c));
        }
    }
    Cfg { nodes, edges, start: class_of[g.start], truncated: g.truncated }
}

pub fn identity_projection(s: &AmState) -> AmState {
    s.clone()
}

fn last_stmt(t: &Term) -> &Term {
    let mut t = t;
    while let Term::NonVal(h, c) = t {
        if &**h != "seq" || c.len() != 2 {
            break;
        }
        t = &c[1];
    }
    t
}

/// The rest of a `seq` frame whose head is the hole.
fn seq_rest(f: &Frame) -> Option<&Term> {
    match &f.body {
        Rhs::Build(c) => match &c.term {
            Term::NonVal(h, k) if &**h == "seq" && k.len() == 2 => match &k[0] {
                Term::Var(v, _) if v.is_hole() => Some(&k[1]),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

/// Identifies each statement of a sequence with the sequence's last one.
pub fn basic_block_projection(s: &AmState) -> AmState {
    let mut focus = last_stmt(&s.conf.term).clone();
    let mut frames = s.ctx.frames.clone();
    while let Some(rest) = frames.last().and_then(seq_rest) {
        focus = last_stmt(rest).clone();
        frames.pop();
    }
    AmState::new(Conf::new(focus, s.conf.state.clone()), Context { base: s.ctx.base.clone(), frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::am::{am_run, build_am};
    use crate::languages::{assign, imp, int, seq, skip, st, var_, while_};
    use crate::term::show;
    use alloc::vec;

    fn graph_of(t: Term, abs: &Abstraction) -> TransitionGraph {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let s = AmState::start(Conf::new(t, st(&[("y", 1)])));
        explore_graph(&lang, &am, abs, &s, MAX_STATES)
    }

    fn chain(n: usize, edges: &[(usize, usize)]) -> TransitionGraph {
        let nodes = (0..n).map(|i| AmState::start(Conf::new(int(i as i64), st(&[])))).collect();
        TransitionGraph { nodes, edges: edges.iter().copied().collect(), start: 0, truncated: false }
    }

    #[test]
    fn assignment_graph() {
        let g = graph_of(assign("x", var_("y")), &Abstraction::value_irrel());
        assert_eq!((g.nodes.len(), g.edges.len(), g.truncated), (4, 3, false));
    }

    #[test]
    fn loop_has_back_edge() {
        let g = graph_of(while_(Term::boolean(true), skip()), &Abstraction::value_irrel());
        assert!(!g.truncated);
        assert!(g.edges.iter().any(|&(a, b)| b <= a));
    }

    #[test]
    fn budget_truncates() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let s = AmState::start(Conf::new(assign("x", int(1)), st(&[])));
        let g = explore_graph(&lang, &am, &Abstraction::value_irrel(), &s, 1);
        assert!(g.truncated);
        assert_eq!(g.nodes.len(), 1);
    }

    #[test]
    fn identity_quotient_is_isomorphic() {
        let g = graph_of(assign("x", var_("y")), &Abstraction::value_irrel());
        let c = project_graph(&g, &identity_projection);
        assert_eq!(c.nodes.len(), g.nodes.len());
        assert_eq!(c.edges, g.edges);
    }

    #[test]
    fn collapsed_chain_self_loop() {
        let all_zero = |_: &AmState| AmState::start(Conf::new(int(0), st(&[])));
        let terminal = project_graph(&chain(2, &[(0, 1)]), &all_zero);
        assert_eq!((terminal.nodes.len(), terminal.edges.len()), (1, 0));
        let looping = project_graph(&chain(2, &[(0, 1), (1, 0)]), &all_zero);
        assert_eq!(looping.edges, [(0, 0)].into_iter().collect());
    }

    #[test]
    fn partial_collapse_keeps_outer_edges() {
        let pair = |s: &AmState| {
            let n = s.conf.term.as_int().unwrap();
            AmState::start(Conf::new(int(n.min(1)), st(&[])))
        };
        let c = project_graph(&chain(3, &[(0, 1), (1, 2), (2, 1)]), &pair);
        assert_eq!(c.edges, [(0, 1), (1, 1)].into_iter().collect());
    }

    #[test]
    fn basic_blocks() {
        let t = seq(vec![assign("x", int(1)), assign("y", int(2)), assign("z", int(3))]);
        let s = AmState::start(Conf::new(t, st(&[])));
        assert_eq!(show(&basic_block_projection(&s).conf.term), show(&assign("z", int(3))));
        let lone = AmState::start(Conf::new(assign("x", int(1)), st(&[])));
        assert_eq!(basic_block_projection(&lone), lone);

        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let tr = am_run(&lang, &am, &s, 50);
        let last = basic_block_projection(&AmState::start(Conf::new(assign("z", int(3)), st(&[]))));
        let blocked: Vec<_> = tr.states.iter().map(basic_block_projection).collect();
        let at_stmt = blocked.iter().filter(|b| b.conf.term == last.conf.term && b.ctx.is_emp()).count();
        assert!(at_stmt >= 3);
    }
}
