//! Terms, states and configurations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// What a variable or star is allowed to stand for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchType {
    Val,
    NonVal,
    All,
}

impl MatchType {
    pub fn leq(self, other: MatchType) -> bool {
        self == other || other == MatchType::All
    }

    pub fn meet(self, other: MatchType) -> Option<MatchType> {
        match (self, other) {
            (MatchType::All, m) | (m, MatchType::All) => Some(m),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    pub fn join(self, other: MatchType) -> MatchType {
        if self == other {
            self
        } else {
            MatchType::All
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatchType::Val => "val",
            MatchType::NonVal => "nonval",
            MatchType::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<MatchType> {
        match s {
            "val" => Some(MatchType::Val),
            "nonval" => Some(MatchType::NonVal),
            "all" => Some(MatchType::All),
            _ => None,
        }
    }
}

/// Tag of frame-local hole variables.
pub const HOLE: u32 = u32::MAX;
/// Tag of variables frozen during invertibility search.
pub const RIGID: u32 = u32::MAX - 1;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub name: Sym,
    pub tag: u32,
}

impl VarId {
    pub fn new(name: &str, tag: u32) -> VarId {
        VarId { name: sym(name), tag }
    }

    pub fn named(name: &str) -> VarId {
        VarId::new(name, 0)
    }

    pub fn hole(name: &str) -> VarId {
        VarId::new(name, HOLE)
    }

    pub fn is_hole(&self) -> bool {
        self.tag == HOLE
    }

    /// Holes and frozen variables never get bound.
    pub fn is_rigid(&self) -> bool {
        self.tag >= RIGID
    }

    pub fn with_tag(&self, tag: u32) -> VarId {
        VarId { name: self.name.clone(), tag }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag {
            HOLE => write!(f, "□{}", self.name),
            RIGID => write!(f, "?{}!", self.name),
            0 => write!(f, "?{}", self.name),
            t => write!(f, "?{}#{}", self.name, t),
        }
    }
}

/// Variant order matters: constants sort before variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    NonVal(Sym, Vec<Term>),
    Val(Sym, Vec<Term>),
    Int(i64),
    Str(Sym),
    Var(VarId, MatchType),
    Star(MatchType),
}

impl Term {
    pub fn nv(s: &str, children: Vec<Term>) -> Term {
        Term::NonVal(sym(s), children)
    }

    pub fn val(s: &str, children: Vec<Term>) -> Term {
        Term::Val(sym(s), children)
    }

    pub fn atom(s: &str) -> Term {
        Term::Val(sym(s), Vec::new())
    }

    pub fn str(s: &str) -> Term {
        Term::Str(sym(s))
    }

    pub fn var(name: &str, mt: MatchType) -> Term {
        Term::Var(VarId::named(name), mt)
    }

    pub fn hole(name: &str, mt: MatchType) -> Term {
        Term::Var(VarId::hole(name), mt)
    }

    pub fn boolean(b: bool) -> Term {
        Term::atom(if b { "true" } else { "false" })
    }

    pub fn is_value(&self) -> bool {
        match self {
            Term::Val(..) | Term::Int(_) | Term::Str(_) => true,
            Term::Var(_, m) | Term::Star(m) => *m == MatchType::Val,
            Term::NonVal(..) => false,
        }
    }

    pub fn is_nonvalue(&self) -> bool {
        match self {
            Term::NonVal(..) => true,
            Term::Var(_, m) | Term::Star(m) => *m == MatchType::NonVal,
            _ => false,
        }
    }

    /// Root-level fit against a match type.
    pub fn fits(&self, mt: MatchType) -> bool {
        match mt {
            MatchType::All => true,
            MatchType::Val => match self {
                Term::Var(_, m) | Term::Star(m) => *m == MatchType::Val,
                t => t.is_value(),
            },
            MatchType::NonVal => match self {
                Term::Var(_, m) | Term::Star(m) => *m == MatchType::NonVal,
                t => t.is_nonvalue(),
            },
        }
    }

    /// Its own match type, as narrow as the root allows.
    pub fn kind(&self) -> MatchType {
        match self {
            Term::Var(_, m) | Term::Star(m) => *m,
            Term::NonVal(..) => MatchType::NonVal,
            _ => MatchType::Val,
        }
    }

    pub fn children(&self) -> &[Term] {
        match self {
            Term::NonVal(_, c) | Term::Val(_, c) => c,
            _ => &[],
        }
    }

    pub fn head(&self) -> Option<&Sym> {
        match self {
            Term::NonVal(s, _) | Term::Val(s, _) => Some(s),
            _ => None,
        }
    }

    /// No variables and no stars.
    pub fn is_concrete(&self) -> bool {
        match self {
            Term::NonVal(_, c) | Term::Val(_, c) => c.iter().all(Term::is_concrete),
            Term::Int(_) | Term::Str(_) => true,
            _ => false,
        }
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Term::NonVal(_, c) | Term::Val(_, c) => c.iter().any(Term::has_vars),
            Term::Var(v, _) => !v.is_rigid(),
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Term::size).sum::<usize>()
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Term::Val(s, c) if c.is_empty() && &**s == "true" => Some(true),
            Term::Val(s, c) if c.is_empty() && &**s == "false" => Some(false),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Term::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Subterm at a child-index path.
    pub fn at(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i)?.at(rest),
        }
    }
}

pub fn write_str_lit(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::NonVal(s, c) | Term::Val(s, c) => {
                write!(f, "({}", s)?;
                for ch in c {
                    write!(f, " {}", ch)?;
                }
                f.write_str(")")
            }
            Term::Int(n) => write!(f, "{}", n),
            Term::Str(s) => write_str_lit(f, s),
            Term::Var(v, m) if v.is_hole() => write!(f, "{}{}", v, mt_suffix(*m)),
            Term::Var(v, m) => write!(f, "{}:{}", v, m.name()),
            Term::Star(m) => write!(f, "*{}", m.name()),
        }
    }
}

fn mt_suffix(m: MatchType) -> &'static str {
    match m {
        MatchType::All => "",
        MatchType::Val => ":val",
        MatchType::NonVal => ":nonval",
    }
}

/// Where a state map ends.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tail {
    Closed,
    Var(VarId),
    /// Any further bindings.
    Star,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub map: BTreeMap<Term, Term>,
    pub tail: Tail,
}

impl State {
    pub fn empty() -> State {
        State { map: BTreeMap::new(), tail: Tail::Closed }
    }

    pub fn top() -> State {
        State { map: BTreeMap::new(), tail: Tail::Star }
    }

    pub fn var(name: &str) -> State {
        State { map: BTreeMap::new(), tail: Tail::Var(VarId::named(name)) }
    }

    pub fn of(v: VarId) -> State {
        State { map: BTreeMap::new(), tail: Tail::Var(v) }
    }

    pub fn closed<I: IntoIterator<Item = (Term, Term)>>(it: I) -> State {
        State { map: it.into_iter().collect(), tail: Tail::Closed }
    }

    pub fn with(mut self, k: Term, v: Term) -> State {
        self.map.insert(k, v);
        self
    }

    pub fn get(&self, k: &Term) -> Option<&Term> {
        self.map.get(k)
    }

    pub fn is_top(&self) -> bool {
        self.map.is_empty() && self.tail == Tail::Star
    }

    pub fn pure_var(&self) -> Option<&VarId> {
        match &self.tail {
            Tail::Var(v) if self.map.is_empty() => Some(v),
            _ => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        self.tail == Tail::Closed
            && self.map.iter().all(|(k, v)| k.is_concrete() && v.is_concrete())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.pure_var() {
            return write!(f, "{}", v);
        }
        f.write_str("[")?;
        let mut first = true;
        for (k, v) in &self.map {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{} -> {}", k, v)?;
        }
        match &self.tail {
            Tail::Closed => {}
            Tail::Var(v) => write!(f, " | {}", v)?,
            Tail::Star if self.map.is_empty() => f.write_str("| *all")?,
            Tail::Star => f.write_str(" | *all")?,
        }
        f.write_str("]")
    }
}

/// A term paired with a state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conf {
    pub term: Term,
    pub state: State,
}

impl Conf {
    pub fn new(term: Term, state: State) -> Conf {
        Conf { term, state }
    }

    pub fn is_concrete(&self) -> bool {
        self.term.is_concrete() && self.state.is_concrete()
    }
}

impl fmt::Display for Conf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.term, self.state)
    }
}

pub fn show<T: fmt::Display>(x: &T) -> String {
    alloc::format!("{}", x)
}
