//! Infix program syntax.
//!
//! ```text
//! language "imp-ext";          # optional
//! input n = 3, flag = true;    # optional initial bindings
//! i := 0;
//! while i < n do print i; i := i + 1 end
//! ```
//!
//! Statements: `x := e`, `skip`, `print e`, `if e then s [else s] end`,
//! `while e do s end`, `for x := e to e do s end`, `let x = e in s end`.
//! Expressions: integers, strings, `true`, `false`, variables, `+`, `<`,
//! `<=` and parentheses. A file holding just an expression is a program too.

use mandate_core::languages::{assign, int, ite, nv, print, seq, skip, strt, var_, while_};
use mandate_core::semantics::Language;
use mandate_core::term::{Conf, Term};

use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 9] = [":=", "<=", "<", "+", ";", ",", "=", "(", ")"];
const KEYWORDS: [&str; 17] = [
    "skip", "print", "if", "then", "else", "end", "while", "do", "for", "to", "let", "in", "true", "false",
    "language", "input", "begin",
];

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let n = text.parse().map_err(|_| ParseError::new(l0, c0, format!("integer `{}` out of range", text)))?;
            let len = j - i;
            advance(&mut i, &mut line, &mut col, len);
            out.push((Tok::Int(n), l0, c0));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let len = j - i;
            advance(&mut i, &mut line, &mut col, len);
            out.push((Tok::Ident(text), l0, c0));
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(ParseError::new(l0, c0, "unterminated string"));
                };
                advance(&mut i, &mut line, &mut col, 1);
                match ch {
                    '"' => break,
                    '\\' => {
                        let esc = chars.get(i).copied();
                        match esc {
                            Some('n') => s.push('\n'),
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(ParseError::new(line, col, "bad escape in string")),
                        }
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                    ch => s.push(ch),
                }
            }
            out.push((Tok::Str(s), l0, c0));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(ParseError::new(l0, c0, format!("unexpected character `{}`", c)));
        };
        advance(&mut i, &mut line, &mut col, sym.len());
        out.push((Tok::Sym(sym), l0, c0));
    }
    Ok(out)
}

/// A parsed program file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    /// Language named by the file, if any.
    pub language: Option<String>,
    /// Initial bindings layered over the language's initial state.
    pub inputs: Vec<(String, Term)>,
    pub term: Term,
}

impl Program {
    pub fn conf(&self, lang: &Language) -> Conf {
        let mut state = lang.initial.clone();
        for (x, v) in &self.inputs {
            state.map.insert(strt(x), v.clone());
        }
        Conf::new(self.term.clone(), state)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.0)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.toks.get(self.pos).map_or(self.end, |t| (t.1, t.2));
        ParseError::new(l, c, msg)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", s)))
        }
    }

    fn kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", k)))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(x)) if !KEYWORDS.contains(&x.as_str()) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => Err(self.err("expected a variable name")),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut language = None;
        let mut inputs = Vec::new();
        loop {
            if self.is_kw("language") {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::Str(s)) => language = Some(s.clone()),
                    _ => return Err(self.err("expected a quoted language name")),
                }
                self.pos += 1;
                self.sym(";")?;
            } else if self.is_kw("input") {
                self.pos += 1;
                loop {
                    let x = self.name()?;
                    self.sym("=")?;
                    let v = match self.atom()? {
                        t if t.is_value() => t,
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("input values must be literals"));
                        }
                    };
                    inputs.push((x, v));
                    if self.is_sym(",") {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.sym(";")?;
            } else {
                break;
            }
        }
        let starts_stmt = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(k)), _) if ["skip", "begin", "print", "if", "while", "for", "let"].contains(&k.as_str()) => true,
            (Some(Tok::Ident(_)), Some(Tok::Sym(":="))) => true,
            _ => false,
        };
        let term = if starts_stmt { self.stmts()? } else { self.expr()? };
        if self.peek().is_some() {
            return Err(self.err("trailing input"));
        }
        Ok(Program { language, inputs, term })
    }

    fn stmts(&mut self) -> Result<Term, ParseError> {
        let mut out = vec![self.stmt()?];
        while self.is_sym(";") {
            self.pos += 1;
            if self.peek().is_none() || self.is_kw("end") || self.is_kw("else") {
                break;
            }
            out.push(self.stmt()?);
        }
        Ok(seq(out))
    }

    fn stmt(&mut self) -> Result<Term, ParseError> {
        let Some(Tok::Ident(k)) = self.peek().cloned() else {
            return Err(self.err("expected a statement"));
        };
        match k.as_str() {
            "skip" => {
                self.pos += 1;
                Ok(skip())
            }
            "begin" => {
                self.pos += 1;
                let b = self.stmts()?;
                self.kw("end")?;
                Ok(b)
            }
            "print" => {
                self.pos += 1;
                Ok(print(self.expr()?))
            }
            "if" => {
                self.pos += 1;
                let c = self.expr()?;
                self.kw("then")?;
                let a = self.stmts()?;
                let b = if self.is_kw("else") {
                    self.pos += 1;
                    self.stmts()?
                } else {
                    skip()
                };
                self.kw("end")?;
                Ok(ite(c, a, b))
            }
            "while" => {
                self.pos += 1;
                let c = self.expr()?;
                self.kw("do")?;
                let b = self.stmts()?;
                self.kw("end")?;
                Ok(while_(c, b))
            }
            "for" => {
                self.pos += 1;
                let x = self.name()?;
                self.sym(":=")?;
                let lo = self.expr()?;
                self.kw("to")?;
                let hi = self.expr()?;
                self.kw("do")?;
                let b = self.stmts()?;
                self.kw("end")?;
                Ok(nv("for", vec![strt(&x), lo, hi, b]))
            }
            "let" => {
                self.pos += 1;
                let x = self.name()?;
                self.sym("=")?;
                let e = self.expr()?;
                self.kw("in")?;
                let b = self.stmts()?;
                self.kw("end")?;
                Ok(nv("let", vec![strt(&x), e, b]))
            }
            _ => {
                let x = self.name()?;
                self.sym(":=")?;
                Ok(assign(&x, self.expr()?))
            }
        }
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        let l = self.sum()?;
        for op in ["<=", "<"] {
            if self.is_sym(op) {
                self.pos += 1;
                let r = self.sum()?;
                return Ok(nv(op, vec![l, r]));
            }
        }
        Ok(l)
    }

    fn sum(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.atom()?;
        while self.is_sym("+") {
            self.pos += 1;
            acc = nv("+", vec![acc, self.atom()?]);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let t = match self.peek().cloned() {
            Some(Tok::Int(n)) => int(n),
            Some(Tok::Str(s)) => strt(&s),
            Some(Tok::Ident(k)) if k == "true" || k == "false" => Term::boolean(k == "true"),
            Some(Tok::Ident(k)) if !KEYWORDS.contains(&k.as_str()) => return Ok(var_(&self.name()?)),
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.sym(")")?;
                return Ok(e);
            }
            _ => return Err(self.err("expected an expression")),
        };
        self.pos += 1;
        Ok(t)
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let end = (src.lines().count().max(1), src.lines().last().map_or(1, |l| l.chars().count() + 1));
    Parser { toks, pos: 0, end }.program()
}

/// Infix rendering of a term, when it uses only the constructs above.
pub fn print_program(t: &Term) -> Option<String> {
    let is_stmt = matches!(t.head().map(|h| &**h), Some(":=" | "seq" | "if" | "while" | "for" | "let" | "print"))
        || *t == skip();
    if is_stmt {
        stmt_text(t)
    } else {
        expr_text(t, 0)
    }
}

fn name_text(t: &Term) -> Option<String> {
    let s = t.as_str()?;
    let mut cs = s.chars();
    let ok = cs.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s);
    ok.then(|| s.to_string())
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Levels: 0 comparison, 1 sum, 2 atom.
fn expr_text(t: &Term, level: u8) -> Option<String> {
    let k = t.children();
    let (text, own) = match t.head().map(|h| &**h) {
        _ if t.as_int().is_some() => (t.as_int()?.to_string(), 2),
        _ if t.as_bool().is_some() => (t.as_bool()?.to_string(), 2),
        None => (quote(t.as_str()?), 2),
        Some("var") if k.len() == 1 => (name_text(&k[0])?, 2),
        Some("+") if k.len() == 2 => (format!("{} + {}", expr_text(&k[0], 1)?, expr_text(&k[1], 2)?), 1),
        Some(op @ ("<" | "<=")) if k.len() == 2 => {
            (format!("{} {} {}", expr_text(&k[0], 1)?, op, expr_text(&k[1], 1)?), 0)
        }
        _ => return None,
    };
    Some(if own < level { format!("({})", text) } else { text })
}

fn stmt_text(t: &Term) -> Option<String> {
    if *t == skip() {
        return Some("skip".into());
    }
    let k = t.children();
    Some(match (&**t.head()?, k.len()) {
        (":=", 2) => format!("{} := {}", name_text(&k[0])?, expr_text(&k[1], 0)?),
        // Sequences parse right-nested, so a sequence on the left needs a block.
        ("seq", 2) if k[0].head().is_some_and(|h| &**h == "seq") => {
            format!("begin {} end; {}", stmt_text(&k[0])?, stmt_text(&k[1])?)
        }
        ("seq", 2) => format!("{}; {}", stmt_text(&k[0])?, stmt_text(&k[1])?),
        ("print", 1) => format!("print {}", expr_text(&k[0], 0)?),
        ("if", 3) => format!("if {} then {} else {} end", expr_text(&k[0], 0)?, stmt_text(&k[1])?, stmt_text(&k[2])?),
        ("while", 2) => format!("while {} do {} end", expr_text(&k[0], 0)?, stmt_text(&k[1])?),
        ("for", 4) => format!(
            "for {} := {} to {} do {} end",
            name_text(&k[0])?,
            expr_text(&k[1], 0)?,
            expr_text(&k[2], 0)?,
            stmt_text(&k[3])?
        ),
        ("let", 3) => format!("let {} = {} in {} end", name_text(&k[0])?, expr_text(&k[1], 0)?, stmt_text(&k[2])?),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mandate_core::languages::{paren_program, imp, imp_ext};

    #[test]
    fn assignment() {
        let p = parse_program("input y = 1; x := y").unwrap();
        assert_eq!(p.term, assign("x", var_("y")));
        assert_eq!(p.inputs, vec![("y".to_string(), int(1))]);
        assert_eq!(p.conf(&imp()).state.to_string(), "[\"y\" -> 1]");
    }

    #[test]
    fn expression_program() {
        let p = parse_program("(1 + (1 + 1)) + 1").unwrap();
        assert_eq!(p.term.to_string(), "(+ (+ 1 (+ 1 1)) 1)");
    }

    #[test]
    fn paren_source_matches_builtin() {
        let src = r#"
            language "imp-ext";
            prec := 3; left := 1; right := 2;
            b := prec < 5;
            if b then print "(" end;
            print left; print "+"; print right;
            if b then print ")" end
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.language.as_deref(), Some("imp-ext"));
        assert_eq!(p.conf(&imp_ext()), paren_program());
    }

    #[test]
    fn sequences_nest_right() {
        let p = parse_program("a := 1; b := 2; c := 3;").unwrap();
        assert_eq!(p.term.to_string(), "(seq (:= \"a\" 1) (seq (:= \"b\" 2) (:= \"c\" 3)))");
    }

    #[test]
    fn loops_and_binders() {
        let p = parse_program("for i := 1 to 3 do let j = i + 1 in print j end end").unwrap();
        assert_eq!(
            p.term.to_string(),
            "(for \"i\" 1 3 (let \"j\" (+ (var \"i\") 1) (print (var \"j\"))))"
        );
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_program("x := 1;\nwhile x < do skip end").unwrap_err();
        assert_eq!((e.line, e.col), (2, 11));
        let e = parse_program("x := 1 $").unwrap_err();
        assert_eq!((e.line, e.col), (1, 8));
        assert!(parse_program("if true then skip").is_err());
    }

    #[test]
    fn printer_round_trips() {
        for src in [
            "x := 1 + 2 + 3",
            "x := 1 + (2 + 3)",
            "if x < y + 1 then print \"(\" else skip end; y := (1 < 2)",
            "while i <= 3 do i := i + 1 end",
            "for i := 1 to 2 do let j = i in print j end end",
        ] {
            let t = parse_program(src).unwrap().term;
            let back = print_program(&t).unwrap();
            assert_eq!(parse_program(&back).unwrap().term, t, "{}", back);
        }
    }
}
