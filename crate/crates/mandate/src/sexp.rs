//! Reader for the printed term syntax and for language files.
//!
//! Terms look like `(:= "x" (+ 1 ?e:nonval))`, states like
//! `["x" -> 1 | ?m]`, configurations like `(t, μ)`. A language file is a
//! `language` header followed by `node`, `initial` and `rule` items.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mandate_core::am::AmState;
use mandate_core::languages::builtin_semfuns;
use mandate_core::pam::{Context, Frame, FrameKind};
use mandate_core::semantics::{Call, Language, Rhs, Signature, Sort, SosRule};
use mandate_core::term::{sym, Conf, MatchType, State, Tail, Term, VarId, HOLE, RIGID};

use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    OpenSq,
    CloseSq,
    Comma,
    Bar,
    LAngle,
    RAngle,
    Str(String),
    Word(String),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Cursor<'s> {
    it: std::iter::Peekable<std::str::Chars<'s>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.it.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.it.next();
        if ch == Some('\n') {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        ch
    }
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut cur = Cursor { it: src.chars().peekable(), line: 1, col: 1 };
    let special = |c: char| c.is_whitespace() || "()[],|\"⟨⟩".contains(c);
    while let Some(c) = cur.peek() {
        let (line, col) = (cur.line, cur.col);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::Open),
            ')' => Some(Tok::Close),
            '[' => Some(Tok::OpenSq),
            ']' => Some(Tok::CloseSq),
            ',' => Some(Tok::Comma),
            '|' => Some(Tok::Bar),
            '⟨' => Some(Tok::LAngle),
            '⟩' => Some(Tok::RAngle),
            _ => None,
        };
        let tok = if let Some(t) = single {
            cur.bump();
            t
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    None => return Err(ParseError::new(line, col, "unterminated string")),
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some('n') => s.push('\n'),
                        Some(e @ ('"' | '\\')) => s.push(e),
                        _ => return Err(ParseError::new(cur.line, cur.col, "bad escape in string")),
                    },
                    Some(ch) => s.push(ch),
                }
            }
            Tok::Str(s)
        } else {
            let mut w = String::new();
            while let Some(ch) = cur.peek() {
                if special(ch) {
                    break;
                }
                w.push(ch);
                cur.bump();
            }
            Tok::Word(w)
        };
        out.push(Spanned { tok, line, col });
    }
    Ok(out)
}

/// Valueness of a node symbol, or `None` when unknown.
pub type Valueness<'a> = &'a dyn Fn(&str) -> Option<bool>;

struct Reader<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    valueness: Valueness<'a>,
}

impl<'a> Reader<'a> {
    fn new(src: &str, valueness: Valueness<'a>) -> Result<Reader<'a>, ParseError> {
        let toks = lex(src)?;
        let last = src.lines().count().max(1);
        let col = src.lines().last().map_or(1, |l| l.chars().count() + 1);
        Ok(Reader { toks, pos: 0, end: (last, col), valueness })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.toks.get(self.pos).map_or(self.end, |s| (s.line, s.col));
        ParseError::new(l, c, msg)
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self.peek().cloned().ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == k => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{}`", k))),
        }
    }

    fn word(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.err(format!("expected {}", what))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn done(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Open) => {
                self.pos += 1;
                let head = self.word("node symbol")?;
                let Some(val) = (self.valueness)(&head) else {
                    self.pos -= 1;
                    return Err(self.err(format!("unknown node type `{}`", head)));
                };
                let mut kids = Vec::new();
                while self.peek() != Some(&Tok::Close) {
                    kids.push(self.term()?);
                }
                self.pos += 1;
                Ok(if val { Term::Val(sym(&head), kids) } else { Term::NonVal(sym(&head), kids) })
            }
            Some(Tok::Str(s)) => {
                let t = Term::str(s);
                self.pos += 1;
                Ok(t)
            }
            Some(Tok::Word(w)) => {
                let w = w.clone();
                let t = self.atom(&w)?;
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.err("expected a term")),
        }
    }

    fn atom(&self, w: &str) -> Result<Term, ParseError> {
        if let Some(m) = w.strip_prefix('*') {
            return MatchType::from_name(m).map(Term::Star).ok_or_else(|| self.err(format!("bad star `{}`", w)));
        }
        if w.starts_with('?') || w.starts_with('□') {
            let (v, mt) = self.var(w)?;
            return Ok(Term::Var(v, mt.unwrap_or(MatchType::All)));
        }
        w.parse::<i64>().map(Term::Int).map_err(|_| self.err(format!("expected a term, found `{}`", w)))
    }

    /// `?name`, `?name!`, `?name#n` or `□name`, each with an optional `:mt`.
    fn var(&self, w: &str) -> Result<(VarId, Option<MatchType>), ParseError> {
        let (body, mt) = match w.rsplit_once(':') {
            Some((b, m)) if MatchType::from_name(m).is_some() => (b, MatchType::from_name(m)),
            _ => (w, None),
        };
        let bad = || self.err(format!("bad variable `{}`", w));
        if let Some(name) = body.strip_prefix('□') {
            return if name.is_empty() { Err(bad()) } else { Ok((VarId::new(name, HOLE), mt)) };
        }
        let body = body.strip_prefix('?').ok_or_else(bad)?;
        let v = if let Some(name) = body.strip_suffix('!') {
            VarId::new(name, RIGID)
        } else if let Some((name, tag)) = body.rsplit_once('#') {
            VarId::new(name, tag.parse().map_err(|_| bad())?)
        } else {
            VarId::named(body)
        };
        if v.name.is_empty() {
            return Err(bad());
        }
        Ok((v, mt))
    }

    fn state(&mut self) -> Result<State, ParseError> {
        match self.next()? {
            Tok::Word(w) if w.starts_with('?') || w.starts_with('□') => {
                self.pos -= 1;
                let (v, _) = self.var(&w)?;
                self.pos += 1;
                Ok(State::of(v))
            }
            Tok::OpenSq => {
                let mut map = BTreeMap::new();
                let mut tail = Tail::Closed;
                loop {
                    match self.peek() {
                        Some(Tok::CloseSq) => {
                            self.pos += 1;
                            break;
                        }
                        Some(Tok::Bar) => {
                            self.pos += 1;
                            let w = self.word("state tail")?;
                            tail = if w == "*all" {
                                Tail::Star
                            } else {
                                self.pos -= 1;
                                let (v, _) = self.var(&w)?;
                                self.pos += 1;
                                Tail::Var(v)
                            };
                            self.expect(Tok::CloseSq, "`]`")?;
                            break;
                        }
                        _ => {
                            if !map.is_empty() {
                                self.expect(Tok::Comma, "`,`")?;
                            }
                            let k = self.term()?;
                            self.keyword("->")?;
                            let v = self.term()?;
                            map.insert(k, v);
                        }
                    }
                }
                Ok(State { map, tail })
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected a state"))
            }
        }
    }

    fn conf(&mut self) -> Result<Conf, ParseError> {
        self.expect(Tok::Open, "`(` starting a configuration")?;
        let t = self.term()?;
        self.expect(Tok::Comma, "`,`")?;
        let s = self.state()?;
        self.expect(Tok::Close, "`)`")?;
        Ok(Conf::new(t, s))
    }

    fn rhs(&mut self, funs: &dyn Fn(&str) -> bool) -> Result<Rhs, ParseError> {
        let w = self.word("`build` or `let`")?;
        match w.as_str() {
            "build" => Ok(Rhs::Build(self.conf()?)),
            "let" => {
                let result = self.conf()?;
                self.keyword("=")?;
                let how = self.word("`step` or `call`")?;
                match how.as_str() {
                    "step" => {
                        let arg = self.conf()?;
                        self.keyword("in")?;
                        Ok(Rhs::step(result, arg, self.rhs(funs)?))
                    }
                    "call" => {
                        let fun = self.word("function name")?;
                        if !funs(&fun) {
                            self.pos -= 1;
                            return Err(self.err(format!("unknown semantic function `{}`", fun)));
                        }
                        self.expect(Tok::Open, "`(`")?;
                        let mut args = Vec::new();
                        while self.peek() != Some(&Tok::Close) {
                            if !args.is_empty() {
                                self.expect(Tok::Comma, "`,`")?;
                            }
                            args.push(self.conf()?);
                        }
                        self.pos += 1;
                        self.keyword("in")?;
                        Ok(Rhs::call(result, &fun, args, self.rhs(funs)?))
                    }
                    _ => {
                        self.pos -= 1;
                        Err(self.err("expected `step` or `call`"))
                    }
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected `build` or `let`"))
            }
        }
    }

    fn rule_name(&mut self) -> Result<String, ParseError> {
        let name = self.word("rule name")?;
        match name.strip_suffix(':') {
            Some(n) => Ok(n.to_string()),
            None => {
                self.keyword(":")?;
                Ok(name)
            }
        }
    }

    /// `[conf]` rebuilds `conf` from `(□t, □μ)`; `[binder -> rhs]` in general.
    fn frame(&mut self, funs: &dyn Fn(&str) -> bool) -> Result<Frame, ParseError> {
        self.expect(Tok::OpenSq, "`[` starting a frame")?;
        let first = self.conf()?;
        let frame = if self.peek() == Some(&Tok::Word("->".into())) {
            self.pos += 1;
            Frame { kind: FrameKind::Step, binder: first, body: self.rhs(funs)? }
        } else {
            let hole = Conf::new(Term::Var(VarId::new("t", HOLE), MatchType::All), State::of(VarId::new("μ", HOLE)));
            Frame { kind: FrameKind::Step, binder: hole, body: Rhs::Build(first) }
        };
        self.expect(Tok::CloseSq, "`]`")?;
        Ok(frame)
    }

    fn context(&mut self, funs: &dyn Fn(&str) -> bool) -> Result<Context, ParseError> {
        let w = self.word("`emp` or a context variable")?;
        let mut ctx = if w == "emp" {
            Context::emp()
        } else {
            self.pos -= 1;
            let (v, _) = self.var(&w)?;
            self.pos += 1;
            Context::var(v)
        };
        while self.peek() == Some(&Tok::Word("∘".into())) {
            self.pos += 1;
            ctx = ctx.push(self.frame(funs)?);
        }
        Ok(ctx)
    }

    fn machine_state(&mut self, funs: &dyn Fn(&str) -> bool) -> Result<AmState, ParseError> {
        self.expect(Tok::LAngle, "`⟨`")?;
        let conf = self.conf()?;
        self.expect(Tok::Bar, "`|`")?;
        let ctx = self.context(funs)?;
        self.expect(Tok::RAngle, "`⟩`")?;
        Ok(AmState::new(conf, ctx))
    }

    fn rule(&mut self, funs: &dyn Fn(&str) -> bool) -> Result<SosRule, ParseError> {
        let name = self.rule_name()?;
        let lhs = self.conf()?;
        self.keyword("~>")?;
        let rhs = self.rhs(funs)?;
        Ok(SosRule::new(&name, lhs, rhs))
    }
}

fn language_valueness(lang: &Language) -> impl Fn(&str) -> Option<bool> + '_ {
    move |s| lang.sig(s).map(|g| g.val)
}

pub fn parse_term(src: &str, lang: &Language) -> Result<Term, ParseError> {
    parse_term_with(src, &language_valueness(lang))
}

pub fn parse_term_with(src: &str, valueness: Valueness<'_>) -> Result<Term, ParseError> {
    let mut r = Reader::new(src, valueness)?;
    let t = r.term()?;
    r.done()?;
    Ok(t)
}

pub fn parse_state(src: &str, lang: &Language) -> Result<State, ParseError> {
    let v = language_valueness(lang);
    let mut r = Reader::new(src, &v)?;
    let s = r.state()?;
    r.done()?;
    Ok(s)
}

pub fn parse_conf(src: &str, lang: &Language) -> Result<Conf, ParseError> {
    let v = language_valueness(lang);
    let mut r = Reader::new(src, &v)?;
    let c = r.conf()?;
    r.done()?;
    Ok(c)
}

/// One rule as printed: `Name: (t, μ) ~> rhs`.
pub fn parse_rule(src: &str, lang: &Language) -> Result<SosRule, ParseError> {
    let v = language_valueness(lang);
    let mut r = Reader::new(src, &v)?;
    let funs = |f: &str| lang.semfuns.contains_key(f);
    let rule = r.rule(&funs)?;
    r.done()?;
    Ok(rule)
}

/// A machine state as printed: `⟨(t, μ) | emp ∘ [frame] ...⟩`.
pub fn parse_machine_state(src: &str, lang: &Language) -> Result<AmState, ParseError> {
    let v = language_valueness(lang);
    let mut r = Reader::new(src, &v)?;
    let funs = |f: &str| lang.semfuns.contains_key(f);
    let s = r.machine_state(&funs)?;
    r.done()?;
    Ok(s)
}

/// A machine rule without a call chain: `Name: ⟨..⟩ → ⟨..⟩`.
pub fn parse_machine_rule(src: &str, lang: &Language) -> Result<(String, AmState, AmState), ParseError> {
    let v = language_valueness(lang);
    let mut r = Reader::new(src, &v)?;
    let funs = |f: &str| lang.semfuns.contains_key(f);
    let name = r.rule_name()?;
    let lhs = r.machine_state(&funs)?;
    r.keyword("→")?;
    let rhs = r.machine_state(&funs)?;
    r.done()?;
    Ok((name, lhs, rhs))
}

/// Reads a language file. Semantic functions come from the built-in set.
pub fn parse_language(src: &str) -> Result<Language, ParseError> {
    let sigs: std::cell::RefCell<BTreeMap<String, bool>> = Default::default();
    let valueness = |s: &str| sigs.borrow().get(s).copied();
    let mut r = Reader::new(src, &valueness)?;
    r.keyword("language")?;
    let name = r.word("language name")?;
    let mut lang = Language::new(&name);
    lang.semfuns = builtin_semfuns();
    let funs = builtin_semfuns();
    let known = |f: &str| funs.contains_key(f);
    while !r.at_end() {
        let kw = r.word("`node`, `initial` or `rule`")?;
        match kw.as_str() {
            "node" => {
                let s = r.word("node symbol")?;
                let arity_at = r.pos;
                let arity: usize = r.word("arity")?.parse().map_err(|_| {
                    r.pos = arity_at;
                    r.err("arity must be a number")
                })?;
                let val = match r.word("`val` or `nonval`")?.as_str() {
                    "val" => true,
                    "nonval" => false,
                    _ => {
                        r.pos -= 1;
                        return Err(r.err("expected `val` or `nonval`"));
                    }
                };
                let mut sorts = Vec::with_capacity(arity + 1);
                for _ in 0..=arity {
                    let w = r.word("sort")?;
                    sorts.push(Sort::from_name(&w).ok_or_else(|| {
                        r.pos -= 1;
                        r.err(format!("unknown sort `{}`", w))
                    })?);
                }
                sigs.borrow_mut().insert(s.clone(), val);
                let sort = sorts.remove(0);
                lang.sigs.insert(sym(&s), Signature { sym: sym(&s), arity, val, sort, children: sorts });
            }
            "initial" => lang.initial = r.state()?,
            "rule" => lang.rules.push(r.rule(&known)?),
            _ => {
                r.pos -= 1;
                return Err(r.err(format!("unexpected `{}`", kw)));
            }
        }
    }
    Ok(lang)
}

/// Writes a language in the format [`parse_language`] reads.
pub fn print_language(lang: &Language) -> String {
    let mut out = format!("language {}\n\n", lang.name);
    for g in lang.sigs.values() {
        let _ = write!(out, "node {} {} {} {}", g.sym, g.arity, if g.val { "val" } else { "nonval" }, g.sort.name());
        for c in &g.children {
            let _ = write!(out, " {}", c.name());
        }
        out.push('\n');
    }
    let _ = writeln!(out, "\ninitial {}\n", lang.initial);
    for rule in &lang.rules {
        let _ = writeln!(out, "rule {}: {}\n  ~> {}", rule.name, rule.lhs, print_rhs(&rule.rhs, 2));
    }
    out
}

fn print_rhs(r: &Rhs, indent: usize) -> String {
    let pad = " ".repeat(indent + 3);
    match r {
        Rhs::Build(c) => format!("build {}", c),
        Rhs::Step { result, arg, rest } => {
            format!("let {} = step {} in\n{}{}", result, arg, pad, print_rhs(rest, indent))
        }
        Rhs::Call { call: Call { result, fun, args }, rest } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            format!("let {} = call {}({}) in\n{}{}", result, fun, args.join(", "), pad, print_rhs(rest, indent))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mandate_core::languages::{imp, imp_ext, lockstep_demo};

    #[test]
    fn terms_round_trip() {
        let lang = imp();
        for src in [
            "(:= \"x\" (+ 1 (var \"y\")))",
            "(if (true) (skip) (seq ?s1:nonval ?s2:all))",
            "(+ *val ?e#3:val)",
            "(+ ?@1!:nonval □e:val)",
            "-7",
            "\"a \\\"quoted\\\" \\\\ name\"",
        ] {
            let t = parse_term(src, &lang).unwrap();
            assert_eq!(t.to_string(), src);
            assert_eq!(parse_term(&t.to_string(), &lang).unwrap(), t);
        }
    }

    #[test]
    fn states_and_confs() {
        let lang = imp();
        for src in ["[]", "[| *all]", "[\"x\" -> 1, \"y\" -> *val | ?m]", "?m#2"] {
            assert_eq!(parse_state(src, &lang).unwrap().to_string(), src);
        }
        let c = parse_conf("((+ 1 2), [\"x\" -> 3])", &lang).unwrap();
        assert_eq!(c.to_string(), "((+ 1 2), [\"x\" -> 3])");
    }

    #[test]
    fn valueness_follows_signatures() {
        let t = parse_term("(if (true) (skip) (skip))", &imp()).unwrap();
        assert!(t.children()[0].is_value());
        assert!(!t.is_value());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_term("(:= \"x\"\n   (frob 1))", &imp()).unwrap_err();
        assert_eq!((e.line, e.col), (2, 5));
        assert!(e.msg.contains("frob"));
        let e = parse_term("(+ 1", &imp()).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_state("[\"x\" 1]", &imp()).is_err());
    }

    #[test]
    fn rules_round_trip() {
        let lang = imp_ext();
        for r in &lang.rules {
            assert_eq!(&parse_rule(&r.to_string(), &lang).unwrap(), r, "{}", r);
        }
    }

    #[test]
    fn languages_round_trip() {
        for lang in [imp(), imp_ext(), lockstep_demo()] {
            let back = parse_language(&print_language(&lang)).unwrap();
            assert_eq!(back.name, lang.name);
            assert_eq!(back.sigs, lang.sigs);
            assert_eq!(back.rules, lang.rules);
            assert_eq!(back.initial, lang.initial);
        }
    }

    #[test]
    fn machine_rules_round_trip() {
        let lang = imp();
        let am = mandate_core::am::build_am(&lang, &[]).unwrap();
        for r in am.iter().filter(|r| r.chain.is_empty()) {
            let text = r.to_string();
            let (name, lhs, rhs) = parse_machine_rule(&text, &lang).unwrap_or_else(|e| panic!("{}: {}", text, e));
            assert_eq!(name, *r.name);
            let t = mandate_core::unify::tidy(r);
            assert_eq!((lhs, rhs), (t.lhs, t.rhs), "{}", text);
        }
        assert!(parse_machine_state("⟨((skip), []) | emp ∘ {((skip), [])}⟩", &lang).is_err());
    }

    #[test]
    fn unknown_function_rejected() {
        let src = "language l\nnode f 1 nonval expr expr\nrule R: ((f ?x:val), ?m) ~> let (?y:val, ?m) = call nope((?x:val, ?m)) in build (?y:val, ?m)";
        let e = parse_language(src).unwrap_err();
        assert!(e.msg.contains("nope"), "{}", e);
        assert_eq!(e.line, 3);
    }
}
