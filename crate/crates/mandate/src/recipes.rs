//! JSON form of recipes and graph patterns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use mandate_core::codegen::{NodeRef, Recipe, Recipes};
use mandate_core::pattern::GraphPattern;
use mandate_core::term::sym;

use crate::error::Failure;

pub fn ref_name(r: NodeRef) -> String {
    match r {
        NodeRef::TIn => "tIn".into(),
        NodeRef::TOut => "tOut".into(),
        NodeRef::CIn(i) => format!("cIn:{}", i),
        NodeRef::COut(i) => format!("cOut:{}", i),
    }
}

pub fn parse_ref(s: &str) -> Option<NodeRef> {
    match s {
        "tIn" => Some(NodeRef::TIn),
        "tOut" => Some(NodeRef::TOut),
        _ => {
            let (kind, i) = s.split_once(':')?;
            let i = i.parse().ok()?;
            match kind {
                "cIn" => Some(NodeRef::CIn(i)),
                "cOut" => Some(NodeRef::COut(i)),
                _ => None,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecipeJson {
    pub node_type: String,
    pub arity: usize,
    /// Which children are values in the instances this recipe covers.
    pub profile: Vec<bool>,
    pub child_order: Vec<usize>,
    pub connects: Vec<[String; 2]>,
    pub ins: Vec<String>,
    pub outs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeFile {
    pub language: String,
    pub abstraction: String,
    pub recipes: Vec<RecipeJson>,
}

pub fn recipe_json(r: &Recipe) -> RecipeJson {
    RecipeJson {
        node_type: r.node_type.to_string(),
        arity: r.arity(),
        profile: r.profile.clone(),
        child_order: r.child_order.clone(),
        connects: r.connects.iter().map(|&(a, b)| [ref_name(a), ref_name(b)]).collect(),
        ins: r.ins.iter().map(|&x| ref_name(x)).collect(),
        outs: r.outs.iter().map(|&x| ref_name(x)).collect(),
    }
}

pub fn recipe_from_json(j: &RecipeJson) -> Result<Recipe, Failure> {
    let bad = |what: &str| Failure::Validation(format!("recipe for {}: {}", j.node_type, what));
    if j.profile.len() != j.arity {
        return Err(bad("profile length differs from arity"));
    }
    let refs = |v: &[String]| -> Result<Vec<NodeRef>, Failure> {
        v.iter()
            .map(|s| {
                let r = parse_ref(s).ok_or_else(|| bad(&format!("bad node reference `{}`", s)))?;
                match r {
                    NodeRef::CIn(i) | NodeRef::COut(i) if i >= j.arity => Err(bad(&format!("child {} out of range", i))),
                    r => Ok(r),
                }
            })
            .collect()
    };
    if let Some(&i) = j.child_order.iter().find(|&&i| i >= j.arity) {
        return Err(bad(&format!("child {} out of range", i)));
    }
    let mut connects = BTreeSet::new();
    for [a, b] in &j.connects {
        let pair = refs(&[a.clone(), b.clone()])?;
        connects.insert((pair[0], pair[1]));
    }
    Ok(Recipe {
        node_type: sym(&j.node_type),
        profile: j.profile.clone(),
        child_order: j.child_order.clone(),
        connects,
        ins: refs(&j.ins)?,
        outs: refs(&j.outs)?,
    })
}

pub fn recipes_to_json(language: &str, abstraction: &str, recipes: &Recipes) -> String {
    let file = RecipeFile {
        language: language.into(),
        abstraction: abstraction.into(),
        recipes: recipes.values().map(recipe_json).collect(),
    };
    serde_json::to_string_pretty(&file).expect("recipes serialize") + "\n"
}

pub fn recipes_from_json(text: &str) -> Result<(RecipeFile, Recipes), Failure> {
    let file: RecipeFile =
        serde_json::from_str(text).map_err(|e| Failure::Validation(format!("recipe file: {}", e)))?;
    let mut out = Recipes::new();
    for j in &file.recipes {
        let r = recipe_from_json(j)?;
        out.insert((r.node_type.clone(), r.profile.clone()), r);
    }
    Ok((file, out))
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternNodeJson {
    pub id: usize,
    pub state: String,
    /// Child whose evaluation the incoming transitive edge stands for.
    pub child: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternJson {
    pub node_type: String,
    pub profile: Vec<bool>,
    pub finite: bool,
    pub nodes: Vec<PatternNodeJson>,
    pub edges: Vec<[usize; 2]>,
    pub transitive_edges: Vec<[usize; 2]>,
    pub exits: Vec<usize>,
    pub dropped_children: Vec<usize>,
}

pub fn pattern_json(p: &GraphPattern) -> PatternJson {
    PatternJson {
        node_type: p.node_type.to_string(),
        profile: p.profile.clone(),
        finite: p.finite,
        nodes: p
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| PatternNodeJson { id, state: n.state.to_string(), child: n.tag })
            .collect(),
        edges: p.normal_edges.iter().map(|&(a, b)| [a, b]).collect(),
        transitive_edges: p.transitive_edges.iter().map(|&(a, b)| [a, b]).collect(),
        exits: p.exits.iter().copied().collect(),
        dropped_children: p.dropped.iter().copied().collect(),
    }
}

pub fn patterns_to_json(ps: &[&GraphPattern]) -> String {
    let all: Vec<PatternJson> = ps.iter().map(|p| pattern_json(p)).collect();
    serde_json::to_string_pretty(&all).expect("patterns serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use mandate_core::abstraction::Abstraction;
    use mandate_core::am::build_am;
    use mandate_core::codegen::{compile_language, recipes_of};
    use mandate_core::languages::imp;
    use mandate_core::pattern::MAX_PATTERN_NODES;

    #[test]
    fn refs_round_trip() {
        for r in [NodeRef::TIn, NodeRef::TOut, NodeRef::CIn(0), NodeRef::COut(3)] {
            assert_eq!(parse_ref(&ref_name(r)), Some(r));
        }
        assert_eq!(parse_ref("cIn:x"), None);
        assert_eq!(parse_ref("aIn"), None);
    }

    #[test]
    fn recipe_file_round_trips() {
        let lang = imp();
        let am = build_am(&lang, &[]).unwrap();
        let (c, bad) = compile_language(&lang, &am, &Abstraction::value_irrel(), MAX_PATTERN_NODES);
        assert!(bad.iter().all(|e| e.key().1.iter().any(|&v| v)));
        let rs = recipes_of(&c);
        let text = recipes_to_json("imp", "value-irrel", &rs);
        let (file, back) = recipes_from_json(&text).unwrap();
        assert_eq!(back, rs);
        assert_eq!(file.language, "imp");
        let w = file.recipes.iter().find(|r| r.node_type == "while" && r.profile == [false, false]).unwrap();
        assert_eq!(w.child_order, vec![0, 1]);
        assert!(w.connects.contains(&["cOut:1".to_string(), "tIn".to_string()]));
    }

    #[test]
    fn bad_reference_rejected() {
        let j = RecipeJson {
            node_type: "f".into(),
            arity: 1,
            profile: vec![false],
            child_order: vec![0],
            connects: vec![["tIn".into(), "cIn:4".into()]],
            ins: vec!["tIn".into()],
            outs: vec![],
        };
        assert!(recipe_from_json(&j).is_err());
    }
}
