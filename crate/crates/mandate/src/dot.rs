//! Deterministic DOT and adjacency output for explored graphs, CFGs,
//! graph patterns and recipe-built CFGs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use mandate_core::am::AmState;
use mandate_core::cfg::{Cfg, TransitionGraph};
use mandate_core::codegen::{GeneratedCfg, Role};
use mandate_core::pattern::GraphPattern;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelStyle {
    /// Print whole machine states rather than focus and stack depth.
    pub verbose: bool,
}

pub fn state_label(s: &AmState, style: LabelStyle) -> String {
    if style.verbose {
        s.to_string()
    } else {
        format!("{} · {}", s.conf.term, s.ctx.frames.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Normal,
    /// Summarizes a whole subterm evaluation; drawn dashed.
    Transitive,
}

/// Graph in display form. Node order here is irrelevant to the output.
#[derive(Clone, Debug, Default)]
pub struct Drawing {
    pub labels: Vec<String>,
    /// Extra attributes per node, e.g. `peripheries=2`.
    pub attrs: Vec<Vec<String>>,
    pub edges: BTreeSet<(usize, usize, EdgeKind)>,
    pub start: Vec<usize>,
    pub comments: Vec<String>,
}

impl Drawing {
    fn with_labels(labels: Vec<String>) -> Drawing {
        let n = labels.len();
        Drawing { labels, attrs: vec![Vec::new(); n], ..Default::default() }
    }

    /// Output position of every node: sorted by label, ties by index.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]).then(a.cmp(&b)));
        let mut pos = vec![0; idx.len()];
        for (p, &i) in idx.iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    pub fn to_dot(&self, name: &str) -> String {
        let pos = self.order();
        let mut by_pos: Vec<usize> = (0..self.labels.len()).collect();
        by_pos.sort_by_key(|&i| pos[i]);
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "// {}", c);
        }
        let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
        out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
        if !self.start.is_empty() {
            out.push_str("  start [shape=point];\n");
        }
        for i in by_pos {
            let mut attrs = vec![format!("label=\"{}\"", escape(&self.labels[i]))];
            attrs.extend(self.attrs[i].iter().cloned());
            let _ = writeln!(out, "  n{} [{}];", pos[i], attrs.join(", "));
        }
        let mut starts: Vec<usize> = self.start.iter().map(|&s| pos[s]).collect();
        starts.sort();
        for s in starts {
            let _ = writeln!(out, "  start -> n{};", s);
        }
        let mut edges: Vec<(usize, usize, EdgeKind)> = self.edges.iter().map(|&(a, b, k)| (pos[a], pos[b], k)).collect();
        edges.sort();
        for (a, b, k) in edges {
            match k {
                EdgeKind::Normal => {
                    let _ = writeln!(out, "  n{} -> n{};", a, b);
                }
                EdgeKind::Transitive => {
                    let _ = writeln!(out, "  n{} -> n{} [style=dashed];", a, b);
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// `node -> node` per edge, using the same ids as [`Drawing::to_dot`].
    pub fn to_adjacency(&self) -> String {
        let pos = self.order();
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b, _)| (pos[a], pos[b])).collect();
        edges.sort();
        edges.dedup();
        let mut out = String::new();
        for (a, b) in edges {
            let _ = writeln!(out, "n{} -> n{}", a, b);
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn truncation_note(truncated: bool, comments: &mut Vec<String>) {
    if truncated {
        comments.push("truncated: the state budget ran out before exploration finished".into());
    }
}

pub fn draw_transition_graph(g: &TransitionGraph, style: LabelStyle) -> Drawing {
    let mut d = Drawing::with_labels(g.nodes.iter().map(|s| state_label(s, style)).collect());
    d.edges = g.edges.iter().map(|&(a, b)| (a, b, EdgeKind::Normal)).collect();
    d.start = vec![g.start];
    truncation_note(g.truncated, &mut d.comments);
    d
}

pub fn draw_cfg(c: &Cfg, style: LabelStyle) -> Drawing {
    let labels = c
        .nodes
        .iter()
        .map(|n| match n.members.len() {
            1 => state_label(&n.state, style),
            k => format!("{} [{} states]", state_label(&n.state, style), k),
        })
        .collect();
    let mut d = Drawing::with_labels(labels);
    d.edges = c.edges.iter().map(|&(a, b)| (a, b, EdgeKind::Normal)).collect();
    d.start = vec![c.start];
    truncation_note(c.truncated, &mut d.comments);
    d
}

pub fn draw_pattern(p: &GraphPattern, style: LabelStyle) -> Drawing {
    let labels = p
        .nodes
        .iter()
        .map(|n| match n.tag {
            Some(i) => format!("{} ⊢{}", state_label(&n.state, style), i + 1),
            None => state_label(&n.state, style),
        })
        .collect();
    let mut d = Drawing::with_labels(labels);
    for &e in &p.exits {
        d.attrs[e].push("peripheries=2".into());
    }
    d.edges = p
        .normal_edges
        .iter()
        .map(|&(a, b)| (a, b, EdgeKind::Normal))
        .chain(p.transitive_edges.iter().map(|&(a, b)| (a, b, EdgeKind::Transitive)))
        .collect();
    d.start = vec![0];
    let profile: Vec<&str> = p.profile.iter().map(|&v| if v { "val" } else { "nonval" }).collect();
    d.comments.push(format!("pattern {} [{}]: {} nodes", p.node_type, profile.join(" "), p.nodes.len()));
    if !p.finite {
        d.comments.push("truncated: the pattern did not close within the node budget".into());
    }
    d
}

fn path_text(p: &[usize]) -> String {
    let parts: Vec<String> = p.iter().map(|i| i.to_string()).collect();
    format!("/{}", parts.join("/"))
}

pub fn draw_generated(g: &GeneratedCfg) -> Drawing {
    let used = g.used();
    let keep: Vec<usize> = (0..g.nodes.len()).filter(|i| used.contains(i)).collect();
    let labels = keep
        .iter()
        .map(|&i| {
            let n = &g.nodes[i];
            let role = match n.role {
                Role::In => "in",
                Role::Out => "out",
            };
            format!("{} {} {}", path_text(&n.path), n.node_type, role)
        })
        .collect();
    let local = |i: usize| keep.binary_search(&i).expect("used node");
    let mut d = Drawing::with_labels(labels);
    d.edges = g.edges.iter().map(|&(a, b)| (local(a), local(b), EdgeKind::Normal)).collect();
    d.start = g.ins.iter().map(|&i| local(i)).collect();
    for &o in &g.outs {
        d.attrs[local(o)].push("peripheries=2".into());
    }
    d
}
