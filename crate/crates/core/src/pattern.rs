//! Graph patterns: per-node-type narrowing with transitive child edges.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec::Vec;

use crate::abstraction::{step_with, Abstraction};
use crate::am::{AmRule, AmState};
use crate::pam::{Base, Context};
use crate::semantics::{Language, Sort};
use crate::term::{Conf, MatchType, State, Sym, Term, VarId, RIGID};
use crate::unify::Syntax;

pub const MAX_PATTERN_NODES: usize = 500;

/// Variable standing for child `i` (0-based) of the pattern's node.
pub fn child_var(i: usize) -> VarId {
    VarId::new(&format!("@{}", i + 1), RIGID)
}

pub fn outer_ctx_var() -> VarId {
    VarId::new("@k", RIGID)
}

/// Child index named by a pattern variable.
pub fn child_of(v: &VarId) -> Option<usize> {
    v.name.strip_prefix('@')?.parse::<usize>().ok()?.checked_sub(1)
}

fn reserved(v: &VarId) -> bool {
    v.name.starts_with('@')
}

/// Canonical renaming that leaves the pattern's own variables alone.
pub fn pattern_canonical<T: Syntax>(x: &T) -> T {
    let mut m: BTreeMap<VarId, VarId> = BTreeMap::new();
    x.map_vars(&mut |v| {
        if reserved(v) {
            return v.clone();
        }
        let n = m.len() as u32;
        m.entry(v.clone()).or_insert_with(|| VarId::new("%", n)).clone()
    })
}

/// Which children are values (`true`) or nonvalues.
pub type Profile = Vec<bool>;

pub fn profile_of(t: &Term) -> Profile {
    t.children().iter().map(Term::is_value).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatternNode {
    pub state: AmState,
    /// Child whose evaluation a transitive edge into this node summarizes.
    pub tag: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphPattern {
    pub node_type: Sym,
    pub profile: Profile,
    /// Node 0 is the start state.
    pub nodes: Vec<PatternNode>,
    pub normal_edges: BTreeSet<(usize, usize)>,
    pub transitive_edges: BTreeSet<(usize, usize)>,
    pub exits: BTreeSet<usize>,
    /// Nonvalue children the abstraction never lets the pattern look into.
    pub dropped: BTreeSet<usize>,
    pub finite: bool,
}

impl GraphPattern {
    pub fn arity(&self) -> usize {
        self.profile.len()
    }

    pub fn all_edges(&self) -> BTreeSet<(usize, usize)> {
        self.normal_edges.union(&self.transitive_edges).copied().collect()
    }

    /// Child evaluated across a transitive edge leaving `i`.
    pub fn source_child(&self, i: usize) -> Option<usize> {
        let (_, j) = self.transitive_edges.range((i, 0)..(i + 1, 0)).next()?;
        self.nodes[*j].tag
    }
}

/// Start state `⟨(N(@1..@n), ⊤) | @k⟩`. Value children become value stars,
/// except names, which stay as value variables.
pub fn start_state(lang: &Language, node_type: &str, profile: &[bool]) -> AmState {
    let kids = profile
        .iter()
        .enumerate()
        .map(|(i, &is_val)| match (is_val, lang.child_sort(node_type, i)) {
            (false, _) => Term::Var(child_var(i), MatchType::NonVal),
            (true, Some(Sort::Name)) => Term::Var(child_var(i), MatchType::Val),
            (true, _) => Term::Star(MatchType::Val),
        })
        .collect();
    let head = lang.mk(node_type, kids);
    AmState::new(Conf::new(head, State::top()), Context::var(outer_ctx_var()))
}

/// The abstraction with sort hints for the pattern's child variables.
pub fn hinted(lang: &Language, abs: &Abstraction, node_type: &str, arity: usize) -> Abstraction {
    let mut a = abs.clone();
    for i in 0..arity {
        if let Some(s) = lang.child_sort(node_type, i) {
            a.var_sorts.insert(child_var(i), s);
        }
    }
    a
}

/// Successors by unification; the left-hand state is left as it was.
pub fn narrow_step(lang: &Language, rules: &[AmRule], abs: &Abstraction, s: &AmState) -> Vec<AmState> {
    let mut out: Vec<AmState> = Vec::new();
    for (_, n) in step_with(lang, rules, abs, s, true) {
        let n = pattern_canonical(&n);
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

fn is_exit(s: &AmState) -> bool {
    s.conf.term.is_value() && s.ctx.frames.is_empty() && s.ctx.base == Base::Var(outer_ctx_var())
}

/// The child a state is about to evaluate, if its focus is a nonvalue variable.
fn pending_child(s: &AmState) -> Option<Option<usize>> {
    match &s.conf.term {
        Term::Var(v, MatchType::NonVal) => Some(child_of(v)),
        _ => None,
    }
}

pub fn gen_graph_pattern(
    lang: &Language,
    rules: &[AmRule],
    abs: &Abstraction,
    node_type: &str,
    profile: &[bool],
    max_nodes: usize,
) -> GraphPattern {
    let abs = hinted(lang, abs, node_type, profile.len());
    let start = PatternNode { state: start_state(lang, node_type, profile), tag: None };
    let mut p = GraphPattern {
        node_type: crate::term::sym(node_type),
        profile: profile.to_vec(),
        nodes: alloc::vec![start.clone()],
        normal_edges: BTreeSet::new(),
        transitive_edges: BTreeSet::new(),
        exits: BTreeSet::new(),
        dropped: (0..profile.len())
            .filter(|&i| !profile[i] && lang.child_sort(node_type, i).is_some_and(|s| abs.skips(s)))
            .collect(),
        finite: true,
    };
    let mut index: BTreeMap<PatternNode, usize> = BTreeMap::new();
    index.insert(start, 0);
    let mut work = VecDeque::from([0usize]);
    while let Some(i) = work.pop_front() {
        let s = p.nodes[i].state.clone();
        if i != 0 && is_exit(&s) {
            p.exits.insert(i);
            continue;
        }
        let (succs, transitive) = match pending_child(&s) {
            Some(child) => {
                let done = AmState::new(Conf::new(Term::Star(MatchType::Val), State::top()), s.ctx.clone());
                let done = pattern_canonical(&abs.alpha(lang, &done));
                (alloc::vec![PatternNode { state: done, tag: child }], true)
            }
            None => (
                narrow_step(lang, rules, &abs, &s).into_iter().map(|state| PatternNode { state, tag: None }).collect(),
                false,
            ),
        };
        for n in succs {
            let j = match index.get(&n) {
                Some(&j) => j,
                None => {
                    if p.nodes.len() >= max_nodes {
                        p.finite = false;
                        return p;
                    }
                    let j = p.nodes.len();
                    index.insert(n.clone(), j);
                    p.nodes.push(n);
                    work.push_back(j);
                    j
                }
            };
            if transitive {
                p.transitive_edges.insert((i, j));
            } else {
                p.normal_edges.insert((i, j));
            }
        }
    }
    p
}

/// Every valueness profile of `arity` children, all-nonvalue first.
pub fn profiles(arity: usize) -> Vec<Profile> {
    (0..1usize << arity).map(|m| (0..arity).map(|i| m >> i & 1 == 1).collect()).collect()
}

pub type PatternKey = (Sym, Profile);

/// Patterns for every nonvalue node type and every child profile.
pub fn gen_all_patterns(
    lang: &Language,
    rules: &[AmRule],
    abs: &Abstraction,
    max_nodes: usize,
) -> BTreeMap<PatternKey, GraphPattern> {
    let mut out = BTreeMap::new();
    for sig in lang.sigs.values().filter(|s| !s.val) {
        for prof in profiles(sig.arity) {
            let p = gen_graph_pattern(lang, rules, abs, &sig.sym, &prof, max_nodes);
            out.insert((sig.sym.clone(), prof), p);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationVerdict {
    Terminates,
    /// Node types whose pattern did not close.
    Unknown(Vec<Sym>),
}

pub fn certify_termination(patterns: &BTreeMap<PatternKey, GraphPattern>) -> TerminationVerdict {
    let mut bad: Vec<Sym> = patterns.values().filter(|p| !p.finite).map(|p| p.node_type.clone()).collect();
    bad.dedup();
    if bad.is_empty() {
        TerminationVerdict::Terminates
    } else {
        TerminationVerdict::Unknown(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::am::build_am;
    use crate::languages::imp;
    use crate::semantics::SosRule;
    use crate::term::show;
    use alloc::vec;

    fn pat(node: &str, abs: &Abstraction) -> GraphPattern {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let n = lang.sig(node).unwrap().arity;
        gen_graph_pattern(&lang, &am, abs, node, &vec![false; n], MAX_PATTERN_NODES)
    }

    #[test]
    fn while_has_eight_states() {
        let p = pat("while", &Abstraction::value_irrel());
        assert!(p.finite);
        assert_eq!(p.nodes.len(), 8, "{:#?}", p.nodes.iter().map(|n| show(&n.state)).collect::<Vec<_>>());
        assert_eq!(p.transitive_edges.len(), 2);
        assert_eq!(p.exits.len(), 1);
        assert!(p.normal_edges.iter().any(|&(_, b)| b == 0));
        let tags: BTreeSet<_> = p.transitive_edges.iter().map(|&(_, j)| p.nodes[j].tag).collect();
        assert_eq!(tags, [Some(0), Some(1)].into_iter().collect());
    }

    #[test]
    fn assignment_pattern() {
        let p = pat(":=", &Abstraction::value_irrel());
        assert_eq!(p.transitive_edges.len(), 1);
        assert_eq!(p.exits.len(), 1);
        let (_, j) = *p.transitive_edges.iter().next().unwrap();
        assert_eq!(p.nodes[j].tag, Some(1));
    }

    #[test]
    fn addition_evaluates_left_first() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let abs = Abstraction::value_irrel();
        let s = start_state(&lang, "+", &[false, false]);
        let next = narrow_step(&lang, &am, &abs, &s);
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].conf.term, Term::Var(child_var(0), MatchType::NonVal));
    }

    #[test]
    fn value_at_outer_context_halts() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let s = AmState::new(Conf::new(Term::Star(MatchType::Val), State::top()), Context::var(outer_ctx_var()));
        assert!(narrow_step(&lang, &am, &Abstraction::value_irrel(), &s).is_empty());
    }

    #[test]
    fn growing_rule_is_caught() {
        let mut lang = imp();
        lang.sigs.insert(crate::term::sym("grow"), crate::semantics::Signature {
            sym: crate::term::sym("grow"),
            arity: 1,
            val: false,
            sort: Sort::Stmt,
            children: vec![Sort::Stmt],
        });
        let x = Term::var("x", MatchType::All);
        let m = State::var("m");
        lang.rules.push(SosRule::new(
            "Grow",
            Conf::new(Term::nv("grow", vec![x.clone()]), m.clone()),
            crate::semantics::Rhs::Build(Conf::new(Term::nv("grow", vec![Term::nv("grow", vec![x])]), m)),
        ));
        let am = build_am(&lang, &[]).unwrap();
        let p = gen_graph_pattern(&lang, &am, &Abstraction::value_irrel(), "grow", &[false], 50);
        assert!(!p.finite);
        let all: BTreeMap<_, _> = [(("grow".into(), vec![false]), p)].into_iter().collect();
        assert_eq!(certify_termination(&all), TerminationVerdict::Unknown(vec!["grow".into()]));
    }

    #[test]
    fn imp_terminates() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        for abs in [Abstraction::value_irrel(), Abstraction::expr_irrel()] {
            let all = gen_all_patterns(&lang, &am, &abs, MAX_PATTERN_NODES);
            assert_eq!(certify_termination(&all), TerminationVerdict::Terminates);
        }
        assert_eq!(certify_termination(&BTreeMap::new()), TerminationVerdict::Terminates);
    }

    #[test]
    fn profiles_enumerate() {
        assert_eq!(profiles(0), vec![Vec::<bool>::new()]);
        assert_eq!(profiles(2)[0], vec![false, false]);
        assert_eq!(profiles(2).len(), 4);
    }
}
