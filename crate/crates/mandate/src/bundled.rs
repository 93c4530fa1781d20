//! Programs and language files shipped with the tool, and name lookup.

use std::path::Path;

use mandate_core::languages;
use mandate_core::semantics::Language;

use crate::error::Failure;
use crate::sexp::parse_language;
use crate::surface::{parse_program, Program};

pub struct Bundled {
    pub name: &'static str,
    pub source: &'static str,
}

pub const PROGRAMS: &[Bundled] = &[
    Bundled { name: "arith.imp", source: include_str!("../programs/arith.imp") },
    Bundled { name: "assign.imp", source: include_str!("../programs/assign.imp") },
    Bundled { name: "branch.imp", source: include_str!("../programs/branch.imp") },
    Bundled { name: "constants.imp", source: include_str!("../programs/constants.imp") },
    Bundled { name: "count.imp", source: include_str!("../programs/count.imp") },
    Bundled { name: "loop.imp", source: include_str!("../programs/loop.imp") },
    Bundled { name: "nested.imp", source: include_str!("../programs/nested.imp") },
    Bundled { name: "parens.imp", source: include_str!("../programs/parens.imp") },
];

pub const LANGS: &[Bundled] = &[
    Bundled { name: "imp", source: include_str!("../langs/imp.lang") },
    Bundled { name: "imp-ext", source: include_str!("../langs/imp-ext.lang") },
    Bundled { name: "lockstep-demo", source: include_str!("../langs/lockstep-demo.lang") },
];

pub fn bundled_program(name: &str) -> Option<&'static Bundled> {
    let base = name.rsplit('/').next().unwrap_or(name);
    PROGRAMS.iter().find(|b| b.name == base || b.name.strip_suffix(".imp") == Some(base))
}

/// A built-in language by name, or a language file by path.
pub fn load_language(spec: &str) -> Result<Language, Failure> {
    if let Some(l) = languages::by_name(spec) {
        return Ok(l);
    }
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return parse_language(&text).map_err(|e| Failure::Validation(format!("{}:{}", spec, e)));
    }
    let known: Vec<String> = languages::all().iter().map(|l| l.name.to_string()).collect();
    Err(Failure::Validation(format!("unknown language `{}` (known: {})", spec, known.join(", "))))
}

/// A program file, falling back to the bundled program of that name.
pub fn load_program(spec: &str) -> Result<Program, Failure> {
    let path = Path::new(spec);
    let (text, shown) = if path.is_file() {
        (std::fs::read_to_string(path)?, spec.to_string())
    } else if let Some(b) = bundled_program(spec) {
        (b.source.to_string(), b.name.to_string())
    } else {
        return Err(Failure::Validation(format!("no such program `{}`", spec)));
    };
    parse_program(&text).map_err(|e| Failure::Validation(format!("{}:{}", shown, e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_program_parses_and_is_well_formed() {
        for b in PROGRAMS {
            let p = parse_program(b.source).unwrap_or_else(|e| panic!("{}: {}", b.name, e));
            let lang = load_language(p.language.as_deref().unwrap_or("imp")).unwrap();
            lang.well_formed(&p.term).unwrap_or_else(|e| panic!("{}: {}", b.name, e));
        }
    }

    #[test]
    fn language_files_match_builtins() {
        for b in LANGS {
            let file = parse_language(b.source).unwrap_or_else(|e| panic!("{}: {}", b.name, e));
            let built = languages::by_name(b.name).unwrap();
            assert_eq!(file.sigs, built.sigs, "{}", b.name);
            assert_eq!(file.rules, built.rules, "{}", b.name);
            assert_eq!(file.initial, built.initial, "{}", b.name);
        }
    }

    #[test]
    fn lookup_by_short_name() {
        assert_eq!(bundled_program("assign").unwrap().name, "assign.imp");
        assert_eq!(bundled_program("programs/loop.imp").unwrap().name, "loop.imp");
        assert!(load_program("nope").is_err());
        assert!(load_language("cobol").is_err());
    }
}
