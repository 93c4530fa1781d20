//! Compiled mode: projections of graph patterns, recipes, and their use.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::abstraction::Abstraction;
use crate::am::{AmRule, AmState};
use crate::cfg::TransitionGraph;
use crate::pattern::{gen_all_patterns, profile_of, GraphPattern, PatternKey};
use crate::semantics::Language;
use crate::term::{Sym, Term, VarId};
use crate::unify::{Syntax, Unifier};

/// Entry or exit of the node itself or of one of its children.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    TIn,
    TOut,
    CIn(usize),
    COut(usize),
}

pub fn child_letter(i: usize) -> char {
    (b'a' + (i % 26) as u8) as char
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::TIn => f.write_str("tIn"),
            NodeRef::TOut => f.write_str("tOut"),
            NodeRef::CIn(i) => write!(f, "{}In", child_letter(*i)),
            NodeRef::COut(i) => write!(f, "{}Out", child_letter(*i)),
        }
    }
}

/// Class of every pattern node, indexed like the pattern's nodes.
pub type Assignment = Vec<NodeRef>;

fn preds_succs(n: usize, edges: &BTreeSet<(usize, usize)>) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut preds = alloc::vec![Vec::new(); n];
    let mut succs = alloc::vec![Vec::new(); n];
    for &(a, b) in edges {
        succs[a].push(b);
        preds[b].push(a);
    }
    (preds, succs)
}

/// `dom[n]` holds every node dominating `n` from node 0.
pub fn dominators(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<BTreeSet<usize>> {
    let (preds, _) = preds_succs(n, edges);
    let all: BTreeSet<usize> = (0..n).collect();
    let mut dom: Vec<BTreeSet<usize>> = (0..n).map(|i| if i == 0 { [0].into_iter().collect() } else { all.clone() }).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 1..n {
            let mut new: Option<BTreeSet<usize>> = None;
            for &p in &preds[i] {
                new = Some(match new {
                    None => dom[p].clone(),
                    Some(s) => s.intersection(&dom[p]).copied().collect(),
                });
            }
            let mut new = new.unwrap_or_default();
            new.insert(i);
            if new != dom[i] {
                dom[i] = new;
                changed = true;
            }
        }
    }
    dom
}

fn bfs_order(n: usize, succs: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = alloc::vec![false; n];
    let mut order = Vec::new();
    let mut q = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = q.pop_front() {
        order.push(i);
        for &j in &succs[i] {
            if !seen[j] {
                seen[j] = true;
                q.push_back(j);
            }
        }
    }
    order
}

fn class_has_cycle(class: &[Option<NodeRef>], c: NodeRef, succs: &[Vec<usize>]) -> bool {
    let members: Vec<usize> = (0..class.len()).filter(|&i| class[i] == Some(c)).collect();
    let mut indeg: BTreeMap<usize, usize> = members.iter().map(|&i| (i, 0)).collect();
    for &i in &members {
        for &j in &succs[i] {
            if let Some(d) = indeg.get_mut(&j) {
                *d += 1;
            }
        }
    }
    let mut ready: Vec<usize> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&i, _)| i).collect();
    let mut done = 0;
    while let Some(i) = ready.pop() {
        done += 1;
        for &j in &succs[i] {
            if let Some(d) = indeg.get_mut(&j) {
                *d -= 1;
                if *d == 0 {
                    ready.push(j);
                }
            }
        }
    }
    done != members.len()
}

/// Seeds entry/exit classes, then greedily merges the remaining nodes into
/// a neighbouring class related by dominance. Predecessors are tried
/// first, and a node waits while one of its back-edge predecessors is
/// still unplaced; successors are only a fallback. `None` when some node
/// cannot be placed without an intra-class cycle.
pub fn find_projection(p: &GraphPattern) -> Option<Assignment> {
    if !p.finite {
        return None;
    }
    let n = p.nodes.len();
    let edges = p.all_edges();
    let (preds, succs) = preds_succs(n, &edges);
    let dom = dominators(n, &edges);
    let dominates = |a: usize, b: usize| dom[b].contains(&a);

    let mut class: Vec<Option<NodeRef>> = alloc::vec![None; n];
    class[0] = Some(NodeRef::TIn);
    for &(a, b) in &p.transitive_edges {
        if let Some(i) = p.nodes[b].tag {
            class[a] = Some(NodeRef::CIn(i));
            class[b] = Some(NodeRef::COut(i));
        }
    }
    for &e in &p.exits {
        if class[e].is_none() {
            class[e] = Some(NodeRef::TOut);
        }
    }

    let order = bfs_order(n, &succs);
    let place = |class: &mut Vec<Option<NodeRef>>, strict: bool| -> bool {
        let mut progress = false;
        for &i in &order {
            if class[i].is_some() {
                continue;
            }
            let back: Vec<usize> = preds[i].iter().copied().filter(|&m| dominates(i, m)).collect();
            if strict && back.iter().any(|&m| class[m].is_none()) {
                continue;
            }
            let fwd = preds[i].iter().copied().filter(|&m| !back.contains(&m) && dominates(m, i));
            let after = succs[i].iter().copied().filter(|&m| !strict && (dominates(i, m) || dominates(m, i)));
            let candidates: Vec<usize> = back.iter().copied().chain(fwd).chain(after).collect();
            for m in candidates {
                let Some(c) = class[m] else { continue };
                class[i] = Some(c);
                if class_has_cycle(class, c, &succs) {
                    class[i] = None;
                } else {
                    progress = true;
                    break;
                }
            }
        }
        progress
    };
    while place(&mut class, true) || place(&mut class, false) {}
    class.into_iter().collect()
}

/// A syntax-directed CFG generator for one node type and child profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recipe {
    pub node_type: Sym,
    pub profile: Vec<bool>,
    pub child_order: Vec<usize>,
    pub connects: BTreeSet<(NodeRef, NodeRef)>,
    pub ins: Vec<NodeRef>,
    pub outs: Vec<NodeRef>,
}

impl Recipe {
    pub fn arity(&self) -> usize {
        self.profile.len()
    }

    /// Distinct classes the recipe mentions.
    pub fn classes(&self) -> BTreeSet<NodeRef> {
        let mut s: BTreeSet<NodeRef> = [NodeRef::TIn, NodeRef::TOut].into_iter().collect();
        for &(a, b) in &self.connects {
            s.insert(a);
            s.insert(b);
        }
        s.extend(self.ins.iter().chain(&self.outs).copied());
        s
    }
}

/// One connect per edge between distinct classes of the quotient pattern.
pub fn pattern_to_recipe(p: &GraphPattern, a: &Assignment) -> Recipe {
    let mut connects = BTreeSet::new();
    for &(x, y) in &p.normal_edges {
        if a[x] != a[y] {
            connects.insert((a[x], a[y]));
        }
    }
    for &(x, y) in &p.transitive_edges {
        let inner = matches!((a[x], a[y], p.nodes[y].tag), (NodeRef::CIn(i), NodeRef::COut(j), Some(k)) if i == j && j == k);
        if !inner && a[x] != a[y] {
            connects.insert((a[x], a[y]));
        }
    }
    let mut outs: Vec<NodeRef> = p.exits.iter().map(|&e| a[e]).collect();
    outs.sort();
    outs.dedup();

    let (_, succs) = preds_succs(p.nodes.len(), &p.all_edges());
    let mut child_order = Vec::new();
    for i in bfs_order(p.nodes.len(), &succs) {
        if let Some(c) = p.source_child(i) {
            if !child_order.contains(&c) {
                child_order.push(c);
            }
        }
    }
    for i in 0..p.arity() {
        if !p.profile[i] && !p.dropped.contains(&i) && !child_order.contains(&i) {
            child_order.push(i);
        }
    }
    Recipe {
        node_type: p.node_type.clone(),
        profile: p.profile.clone(),
        child_order,
        connects,
        ins: alloc::vec![NodeRef::TIn],
        outs,
    }
}

fn ref_list(v: &[NodeRef]) -> String {
    let parts: Vec<String> = v.iter().map(|r| format!("{}", r)).collect();
    parts.join(",")
}

/// Recipe as `genCfg` pseudocode.
pub fn pretty_print_recipe(r: &Recipe) -> String {
    let kids: Vec<String> = (0..r.arity())
        .map(|i| if r.child_order.contains(&i) { format!("{}", child_letter(i)) } else { "_".into() })
        .collect();
    let mut out = format!("genCfg t@(Node \"{}\" [{}]) =\n", r.node_type, kids.join(", "));
    out += "  do (tIn, tOut) <- makeInOut t\n";
    for &i in &r.child_order {
        let c = child_letter(i);
        out += &format!("     ({c}In, {c}Out) <- genCfg {c}\n");
    }
    for (a, b) in &r.connects {
        out += &format!("     connect {} {}\n", a, b);
    }
    out += &format!("     return (inNodes [{}], outNodes [{}])\n", ref_list(&r.ins), ref_list(&r.outs));
    out
}

/// Everything compiled mode knows about one node type and profile.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub pattern: GraphPattern,
    pub assignment: Assignment,
    pub recipe: Recipe,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodegenError {
    Infinite(PatternKey),
    NoProjection(PatternKey),
    MissingRecipe(Sym, Vec<bool>),
}

/// `[vn]`: one letter per child, `v` for a value.
struct Profiled<'a>(&'a [bool]);

impl fmt::Display for Profiled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for &v in self.0 {
            f.write_str(if v { "v" } else { "n" })?;
        }
        f.write_str("]")
    }
}

impl CodegenError {
    pub fn key(&self) -> (&Sym, &[bool]) {
        match self {
            CodegenError::Infinite((s, p)) | CodegenError::NoProjection((s, p)) | CodegenError::MissingRecipe(s, p) => (s, p),
        }
    }
}

impl fmt::Display for CodegenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodegenError::Infinite((s, p)) => write!(f, "graph pattern for {} {} did not close", s, Profiled(p)),
            CodegenError::NoProjection((s, p)) => {
                write!(f, "no loop-free projection for the pattern of {} {}", s, Profiled(p))
            }
            CodegenError::MissingRecipe(s, p) => write!(f, "no recipe for {} {}", s, Profiled(p)),
        }
    }
}

pub fn compile_pattern(p: GraphPattern) -> Result<Compiled, CodegenError> {
    let key = (p.node_type.clone(), p.profile.clone());
    if !p.finite {
        return Err(CodegenError::Infinite(key));
    }
    let assignment = find_projection(&p).ok_or(CodegenError::NoProjection(key))?;
    let recipe = pattern_to_recipe(&p, &assignment);
    Ok(Compiled { pattern: p, assignment, recipe })
}

/// Compiles every pattern of a language; failures are listed separately.
pub fn compile_language(
    lang: &Language,
    rules: &[AmRule],
    abs: &Abstraction,
    max_nodes: usize,
) -> (BTreeMap<PatternKey, Compiled>, Vec<CodegenError>) {
    let mut ok = BTreeMap::new();
    let mut bad = Vec::new();
    for (k, p) in gen_all_patterns(lang, rules, abs, max_nodes) {
        match compile_pattern(p) {
            Ok(c) => {
                ok.insert(k, c);
            }
            Err(e) => bad.push(e),
        }
    }
    (ok, bad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenNode {
    /// Child-index path from the program root.
    pub path: Vec<usize>,
    pub role: Role,
    pub node_type: Sym,
}

/// CFG produced by running recipes over a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedCfg {
    pub nodes: Vec<GenNode>,
    pub edges: BTreeSet<(usize, usize)>,
    pub ins: Vec<usize>,
    pub outs: Vec<usize>,
    /// Resolved entry and exit nodes of every visited AST node.
    pub ports: BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)>,
    index: BTreeMap<(Vec<usize>, Role), usize>,
}

impl GeneratedCfg {
    pub fn node(&self, path: &[usize], role: Role) -> Option<usize> {
        self.index.get(&(path.to_vec(), role)).copied()
    }

    /// Nodes touched by an edge, plus the program's own entry and exits.
    pub fn used(&self) -> BTreeSet<usize> {
        let mut s: BTreeSet<usize> = self.ins.iter().chain(&self.outs).copied().collect();
        for &(a, b) in &self.edges {
            s.insert(a);
            s.insert(b);
        }
        s
    }

    /// Recipe nodes a class of the node at `path` stands for.
    pub fn resolve(&self, path: &[usize], r: NodeRef) -> Vec<usize> {
        let child = |i: usize| {
            let mut p = path.to_vec();
            p.push(i);
            p
        };
        match r {
            NodeRef::TIn => self.node(path, Role::In).into_iter().collect(),
            NodeRef::TOut => self.node(path, Role::Out).into_iter().collect(),
            NodeRef::CIn(i) => self.ports.get(&child(i)).map(|p| p.0.clone()).unwrap_or_default(),
            NodeRef::COut(i) => self.ports.get(&child(i)).map(|p| p.1.clone()).unwrap_or_default(),
        }
    }
}

pub type Recipes = BTreeMap<PatternKey, Recipe>;

pub fn recipes_of(compiled: &BTreeMap<PatternKey, Compiled>) -> Recipes {
    compiled.iter().map(|(k, c)| (k.clone(), c.recipe.clone())).collect()
}

/// Recursive descent over the program, wiring recipe connects.
pub fn recipe_to_cfg(recipes: &Recipes, program: &Term) -> Result<GeneratedCfg, CodegenError> {
    let mut g = GeneratedCfg {
        nodes: Vec::new(),
        edges: BTreeSet::new(),
        ins: Vec::new(),
        outs: Vec::new(),
        ports: BTreeMap::new(),
        index: BTreeMap::new(),
    };
    if let Some((i, o)) = gen(recipes, &mut g, &mut Vec::new(), program)? {
        g.ins = i;
        g.outs = o;
    }
    Ok(g)
}

type Ports = (Vec<usize>, Vec<usize>);

fn gen(recipes: &Recipes, g: &mut GeneratedCfg, path: &mut Vec<usize>, t: &Term) -> Result<Option<Ports>, CodegenError> {
    let Term::NonVal(head, kids) = t else { return Ok(None) };
    let profile = profile_of(t);
    let r = recipes
        .get(&(head.clone(), profile.clone()))
        .ok_or_else(|| CodegenError::MissingRecipe(head.clone(), profile))?;
    for role in [Role::In, Role::Out] {
        g.index.insert((path.clone(), role), g.nodes.len());
        g.nodes.push(GenNode { path: path.clone(), role, node_type: head.clone() });
    }
    for &i in &r.child_order {
        path.push(i);
        if let Some(ports) = gen(recipes, g, path, &kids[i])? {
            g.ports.insert(path.clone(), ports);
        }
        path.pop();
    }
    for &(a, b) in &r.connects {
        for x in g.resolve(path, a) {
            for y in g.resolve(path, b) {
                g.edges.insert((x, y));
            }
        }
    }
    let ins = r.ins.iter().flat_map(|&x| g.resolve(path, x)).collect();
    let outs = r.outs.iter().flat_map(|&x| g.resolve(path, x)).collect();
    g.ports.insert(path.clone(), (ins, outs));
    let ports = g.ports[&*path].clone();
    Ok(Some(ports))
}

/// Outcome of comparing a recipe-generated CFG with an explored graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agreement {
    /// Component of every explored node, then of every generated node.
    pub explored_class: Vec<usize>,
    pub generated_class: Vec<Option<usize>>,
    pub explored_edges: BTreeSet<(usize, usize)>,
    pub generated_edges: BTreeSet<(usize, usize)>,
    pub problems: Vec<String>,
}

impl Agreement {
    pub fn holds(&self) -> bool {
        self.problems.is_empty() && self.explored_edges == self.generated_edges
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let n = self.0[y];
            self.0[y] = r;
            y = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn thaw<T: Syntax>(x: &T) -> T {
    x.map_vars(&mut |v: &VarId| if v.name.starts_with('@') { VarId::new(&v.name, 0) } else { v.clone() })
}

fn instance(pairs: &[(&AmState, &AmState)]) -> bool {
    let mut u = Unifier::new();
    pairs.iter().all(|(p, s)| {
        let p = thaw(*p);
        u.conf(&p.conf, &s.conf) && u.ctx(&p.ctx, &s.ctx)
    })
}

/// One level of the attribution stack: AST path, pattern node, and the
/// explored node where that AST node started.
type Level = (Vec<usize>, usize, usize);

/// Relates explored states to recipe nodes by walking the patterns in step
/// with the explored graph, then compares both graphs on the coarsest
/// common quotient of that relation.
pub fn check_agreement(
    compiled: &BTreeMap<PatternKey, Compiled>,
    program: &Term,
    explored: &TransitionGraph,
    generated: &GeneratedCfg,
) -> Agreement {
    let mut problems: Vec<String> = Vec::new();
    if explored.truncated {
        problems.push("explored graph is truncated".into());
    }
    let lookup = |path: &[usize]| -> Option<&Compiled> {
        let t = program.at(path)?;
        compiled.get(&(t.head()?.clone(), profile_of(t)))
    };
    let n_exp = explored.nodes.len();
    let mut related: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut relate = |s: usize, path: &[usize], node: usize, c: &Compiled| {
        for g in generated.resolve(path, c.assignment[node]) {
            related.insert((s, g));
        }
    };

    let mut seen: BTreeSet<(usize, Vec<Level>)> = BTreeSet::new();
    let mut work: VecDeque<(usize, Vec<Level>)> = VecDeque::new();
    match lookup(&[]) {
        Some(_) => work.push_back((explored.start, alloc::vec![(Vec::new(), 0, explored.start)])),
        None => problems.push("no compiled pattern for the program root".into()),
    }
    while let Some((s, mut stack)) = work.pop_front() {
        if !seen.insert((s, stack.clone())) {
            continue;
        }
        {
            let (path, node, _) = stack.last().unwrap();
            if let Some(c) = lookup(path) {
                relate(s, path, *node, c);
            }
        }
        // Settle: leave finished children, enter pending ones.
        loop {
            let Some((path, node, _)) = stack.last().cloned() else { break };
            let Some(c) = lookup(&path) else {
                problems.push(format!("no compiled pattern at {:?}", path));
                break;
            };
            if node != 0 && c.pattern.exits.contains(&node) {
                stack.pop();
                let Some(parent) = stack.last_mut() else { break };
                let pc = lookup(&parent.0).unwrap();
                match pc.pattern.transitive_edges.range((parent.1, 0)..(parent.1 + 1, 0)).next() {
                    Some(&(_, j)) => parent.1 = j,
                    None => {
                        problems.push(format!("child of {:?} finished outside a transitive edge", parent.0));
                        break;
                    }
                }
                continue;
            }
            if let Some(i) = c.pattern.source_child(node) {
                let mut child = path.clone();
                child.push(i);
                match lookup(&child) {
                    Some(cc) => {
                        relate(s, &child, 0, cc);
                        stack.push((child, 0, s));
                    }
                    None => {
                        problems.push(format!("no compiled pattern at {:?}", child));
                        break;
                    }
                }
                continue;
            }
            break;
        }
        let succs: Vec<usize> = explored.successors(s).collect();
        let Some((path, node, start)) = stack.last().cloned() else {
            if !succs.is_empty() {
                problems.push(format!("state {} steps after the program finished", s));
            }
            continue;
        };
        let c = lookup(&path).unwrap();
        let p_start = &c.pattern.nodes[0].state;
        let s_start = &explored.nodes[start];
        for t in succs {
            let mut any = false;
            for &(_, j) in c.pattern.normal_edges.range((node, 0)..(node + 1, 0)) {
                if instance(&[(p_start, s_start), (&c.pattern.nodes[j].state, &explored.nodes[t])]) {
                    any = true;
                    let mut next = stack.clone();
                    next.last_mut().unwrap().1 = j;
                    work.push_back((t, next));
                }
            }
            if !any {
                problems.push(format!("step {} -> {} has no counterpart in the pattern of {}", s, t, c.pattern.node_type));
            }
        }
    }

    let used = generated.used();
    let mut uf = UnionFind((0..n_exp + generated.nodes.len()).collect());
    for &(s, g) in &related {
        uf.union(s, n_exp + g);
    }
    for s in 0..n_exp {
        if !related.iter().any(|&(x, _)| x == s) {
            problems.push(format!("explored state {} is not attributed", s));
        }
    }
    for &g in &used {
        if !related.iter().any(|&(_, y)| y == g) {
            problems.push(format!("generated node {} has no explored state", g));
        }
    }
    let explored_class: Vec<usize> = (0..n_exp).map(|i| uf.find(i)).collect();
    let generated_class: Vec<Option<usize>> =
        (0..generated.nodes.len()).map(|g| used.contains(&g).then(|| uf.find(n_exp + g))).collect();
    let explored_edges = explored
        .edges
        .iter()
        .map(|&(a, b)| (explored_class[a], explored_class[b]))
        .filter(|(a, b)| a != b)
        .collect();
    let generated_edges = generated
        .edges
        .iter()
        .filter_map(|&(a, b)| Some((generated_class[a]?, generated_class[b]?)))
        .filter(|(a, b)| a != b)
        .collect();
    Agreement { explored_class, generated_class, explored_edges, generated_edges, problems }
}
