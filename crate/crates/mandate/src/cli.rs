//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mandate_core::abstraction::Abstraction;
use mandate_core::am::{am_run, build_am, check_no_up_down, check_up_rules_invertible, AmRule, AmState, Verdict, DEPTH_BOUND};
use mandate_core::analyses::{
    constant_propagation, exit_env, member_weights, paren_balance, Const, ConstEnv, ParenVerdict, PAREN_CAP,
};
use mandate_core::cfg::{basic_block_projection, explore_graph, identity_projection, project_graph, Cfg, MAX_STATES};
use mandate_core::codegen::{compile_language, CodegenError, pretty_print_recipe, recipe_to_cfg, recipes_of, GeneratedCfg, Role};
use mandate_core::languages::OUT;
use mandate_core::pam::{pam_run, sos_to_pam, PamState};
use mandate_core::pattern::{certify_termination, gen_all_patterns, gen_graph_pattern, GraphPattern, TerminationVerdict, MAX_PATTERN_NODES};
use mandate_core::semantics::{validate, Language, RunEnd, Severity};
use mandate_core::term::Conf;

use crate::bundled::{load_language, load_program};
use crate::dot::{draw_cfg, draw_generated, draw_pattern, LabelStyle};
use crate::error::Failure;
use crate::recipes::{patterns_to_json, recipes_from_json, recipes_to_json};
use crate::sexp::print_language;
use crate::surface::Program;

#[derive(Parser, Debug)]
#[command(name = "mandate", version, about = "Control-flow graphs from small-step semantics")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct LangOpts {
    /// Built-in language name or path to a language file.
    #[arg(long)]
    lang: Option<String>,
    /// Treat an up rule as invertible without checking it.
    #[arg(long = "assume-invertible", value_name = "RULE")]
    assume: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct AbsOpts {
    /// identity, value-irrel, value-irrel-skipcalls, expr-irrel or bool-track:v1,v2
    #[arg(long, default_value = "value-irrel")]
    abs: String,
    /// String constants the abstraction keeps verbatim.
    #[arg(long, value_delimiter = ',')]
    keep: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct Budgets {
    #[arg(long, default_value_t = MAX_STATES)]
    max_states: usize,
    #[arg(long, default_value_t = MAX_PATTERN_NODES)]
    max_pattern_nodes: usize,
    /// Fail with exit code 4 when a budget runs out.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug, Clone)]
struct OutOpts {
    /// Write to this file instead of standard output.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Projection {
    Identity,
    BasicBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Analysis {
    ConstProp,
    Paren,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phased machine rules, or a trace of a program.
    PamDump {
        program: Option<String>,
        #[command(flatten)]
        lang: LangOpts,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Abstract machine rules, or a trace of a program.
    AmDump {
        program: Option<String>,
        #[command(flatten)]
        lang: LangOpts,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Validation, invertibility and up-down report.
    Check {
        #[command(flatten)]
        lang: LangOpts,
    },
    /// Explore a program abstractly and print its CFG as DOT.
    Cfg {
        program: String,
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        abs: AbsOpts,
        #[arg(long, value_enum, default_value_t = Projection::Identity)]
        proj: Projection,
        #[arg(long)]
        verbose_labels: bool,
        /// Print `node -> node` lines instead of DOT.
        #[arg(long)]
        adjacency: bool,
        #[command(flatten)]
        budgets: Budgets,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Graph pattern of a node type, or of every node type with `all`.
    Pattern {
        node_type: String,
        /// Child valueness, one `v` or `n` per child; default all `n`.
        #[arg(long)]
        profile: Option<String>,
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        abs: AbsOpts,
        #[arg(long)]
        verbose_labels: bool,
        /// Also write the patterns as JSON here.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        budgets: Budgets,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Compile CFG-generator recipes for a language.
    Codegen {
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        abs: AbsOpts,
        /// Print genCfg pseudocode instead of JSON.
        #[arg(long)]
        text: bool,
        #[command(flatten)]
        budgets: Budgets,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Build a program's CFG from a recipe file.
    ApplyRecipes {
        recipes: PathBuf,
        program: String,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Check that every graph pattern of the language closes.
    CertifyTermination {
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        abs: AbsOpts,
        #[command(flatten)]
        budgets: Budgets,
    },
    /// Run a client analysis on a program.
    Analyze {
        #[arg(value_enum)]
        analysis: Analysis,
        program: String,
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        abs: AbsOpts,
        #[arg(long, default_value = "(")]
        open: String,
        #[arg(long, default_value = ")")]
        close: String,
        #[command(flatten)]
        budgets: Budgets,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Print a language in language-file syntax.
    LangDump {
        #[command(flatten)]
        lang: LangOpts,
        #[command(flatten)]
        out: OutOpts,
    },
}

/// Parses an abstraction name such as `bool-track:b,c`.
pub fn parse_abstraction(name: &str, keep: &[String]) -> Result<Abstraction, Failure> {
    let mut a = match name.split_once(':') {
        Some(("bool-track", vars)) => {
            let vs: Vec<&str> = vars.split(',').filter(|v| !v.is_empty()).collect();
            Abstraction::bool_track(&vs)
        }
        None if name == "bool-track" => Abstraction::bool_track(&[]),
        None if name == "identity" => Abstraction::identity(),
        None if name == "value-irrel" => Abstraction::value_irrel(),
        None if name == "expr-irrel" => Abstraction::expr_irrel(),
        None if name == "value-irrel-skipcalls" => {
            let mut a = Abstraction::value_irrel();
            a.skip_calls = true;
            a
        }
        _ => {
            return Err(Failure::Validation(format!(
                "unknown abstraction `{}` (known: identity, value-irrel, value-irrel-skipcalls, expr-irrel, bool-track:VARS)",
                name
            )))
        }
    };
    let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
    a = a.keeping(&keep);
    Ok(a)
}

/// Runs the tool; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f);
            f.exit_code()
        }
    }
}

fn emit(out: &OutOpts, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &out.output {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn checked_language(name: &str) -> Result<Language, Failure> {
    let lang = load_language(name)?;
    let errors: Vec<String> =
        validate(&lang).iter().filter(|d| d.severity == Severity::Error).map(|d| d.to_string()).collect();
    if !errors.is_empty() {
        return Err(Failure::Validation(errors.join("; ")));
    }
    Ok(lang)
}

fn language_only(opts: &LangOpts) -> Result<Language, Failure> {
    checked_language(opts.lang.as_deref().unwrap_or("imp"))
}

/// The language comes from the flag, then the program's header, then `imp`.
fn language_and_program(opts: &LangOpts, program: &str) -> Result<(Language, Program, Conf), Failure> {
    let p = load_program(program)?;
    let name = opts.lang.clone().or_else(|| p.language.clone()).unwrap_or_else(|| "imp".into());
    let lang = checked_language(&name)?;
    lang.well_formed(&p.term).map_err(|e| Failure::Validation(format!("{}: {}", program, e)))?;
    let conf = p.conf(&lang);
    Ok((lang, p, conf))
}

fn machine(lang: &Language, opts: &LangOpts) -> Result<Vec<AmRule>, Failure> {
    build_am(lang, &opts.assume).map_err(|e| Failure::Conversion(e.to_string()))
}

fn end_text(e: &RunEnd) -> &'static str {
    match e {
        RunEnd::Halted => "halted",
        RunEnd::Stuck => "stuck",
        RunEnd::OutOfFuel => "out of fuel",
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::PamDump { program, lang, fuel, out } => {
            let mut text = String::new();
            match program {
                None => {
                    let l = language_only(&lang)?;
                    for r in sos_to_pam(&l) {
                        text += &format!("{}\n", r);
                    }
                }
                Some(p) => {
                    let (l, _, conf) = language_and_program(&lang, &p)?;
                    let rules = sos_to_pam(&l);
                    let tr = pam_run(&l, &rules, &PamState::start(conf), fuel).map_err(|e| {
                        Failure::Validation(format!("{} successors from {}", e.successors, e.state))
                    })?;
                    for (i, s) in tr.states.iter().enumerate() {
                        text += &format!("({}) {}\n", i + 1, s.shown());
                    }
                    text += &format!("-- {}\n", end_text(&tr.end));
                }
            }
            emit(&out, &text, stdout)?;
            Ok(0)
        }
        Command::AmDump { program, lang, fuel, out } => {
            let mut text = String::new();
            match program {
                None => {
                    let l = language_only(&lang)?;
                    for r in machine(&l, &lang)? {
                        text += &format!("{}\n", r);
                    }
                }
                Some(p) => {
                    let (l, _, conf) = language_and_program(&lang, &p)?;
                    let rules = machine(&l, &lang)?;
                    let tr = am_run(&l, &rules, &AmState::start(conf), fuel);
                    for (i, s) in tr.states.iter().enumerate() {
                        text += &format!("({}) {}\n", i + 1, s);
                    }
                    text += &format!("-- {}\n", end_text(&tr.end));
                }
            }
            emit(&out, &text, stdout)?;
            Ok(0)
        }
        Command::Check { lang } => check(&lang, stdout),
        Command::Cfg { program, lang, abs, proj, verbose_labels, adjacency, budgets, out } => {
            let (l, _, conf) = language_and_program(&lang, &program)?;
            let a = parse_abstraction(&abs.abs, &abs.keep)?;
            let rules = machine(&l, &lang)?;
            let g = explore_graph(&l, &rules, &a, &AmState::start(conf), budgets.max_states);
            let cfg = match proj {
                Projection::Identity => project_graph(&g, &identity_projection),
                Projection::BasicBlock => project_graph(&g, &basic_block_projection),
            };
            let d = draw_cfg(&cfg, LabelStyle { verbose: verbose_labels });
            let text = if adjacency { d.to_adjacency() } else { d.to_dot("cfg") };
            emit(&out, &text, stdout)?;
            truncation(budgets.strict && cfg.truncated, "exploration hit the state budget")
        }
        Command::Pattern { node_type, profile, lang, abs, verbose_labels, dump, budgets, out } => {
            let l = language_only(&lang)?;
            let a = parse_abstraction(&abs.abs, &abs.keep)?;
            let rules = machine(&l, &lang)?;
            let patterns: Vec<GraphPattern> = if node_type == "all" {
                gen_all_patterns(&l, &rules, &a, budgets.max_pattern_nodes).into_values().collect()
            } else {
                let sig = l
                    .sig(&node_type)
                    .filter(|s| !s.val)
                    .ok_or_else(|| Failure::Validation(format!("`{}` is not a nonvalue node type of {}", node_type, l.name)))?;
                let prof = match &profile {
                    None => vec![false; sig.arity],
                    Some(p) => parse_profile(p, sig.arity)?,
                };
                vec![gen_graph_pattern(&l, &rules, &a, &node_type, &prof, budgets.max_pattern_nodes)]
            };
            let style = LabelStyle { verbose: verbose_labels };
            let mut text = String::new();
            for p in &patterns {
                let name = format!("{} {}", p.node_type, profile_text(&p.profile));
                text += &draw_pattern(p, style).to_dot(&name);
            }
            emit(&out, &text, stdout)?;
            if let Some(path) = dump {
                let refs: Vec<&GraphPattern> = patterns.iter().collect();
                std::fs::write(path, patterns_to_json(&refs))?;
            }
            truncation(budgets.strict && patterns.iter().any(|p| !p.finite), "a pattern hit the node budget")
        }
        Command::Codegen { lang, abs, text, budgets, out } => {
            let l = language_only(&lang)?;
            let a = parse_abstraction(&abs.abs, &abs.keep)?;
            let rules = machine(&l, &lang)?;
            let (compiled, errors) = compile_language(&l, &rules, &a, budgets.max_pattern_nodes);
            let recipes = recipes_of(&compiled);
            let body = if text {
                recipes
                    .values()
                    .map(|r| format!("-- {} {}\n{}", r.node_type, profile_text(&r.profile), pretty_print_recipe(r)))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                recipes_to_json(&l.name, &abs.abs, &recipes)
            };
            emit(&out, &body, stdout)?;
            codegen_outcome(&errors, stderr)
        }
        Command::ApplyRecipes { recipes, program, out } => {
            let (file, rs) = recipes_from_json(&std::fs::read_to_string(&recipes)?)?;
            let opts = LangOpts { lang: Some(file.language.clone()), assume: Vec::new() };
            let (_, _, conf) = language_and_program(&opts, &program)?;
            let g = recipe_to_cfg(&rs, &conf.term).map_err(|e| Failure::Codegen(e.to_string()))?;
            emit(&out, &draw_generated(&g).to_dot("cfg"), stdout)?;
            Ok(0)
        }
        Command::CertifyTermination { lang, abs, budgets } => {
            let l = language_only(&lang)?;
            let a = parse_abstraction(&abs.abs, &abs.keep)?;
            let rules = machine(&l, &lang)?;
            let ps = gen_all_patterns(&l, &rules, &a, budgets.max_pattern_nodes);
            match certify_termination(&ps) {
                TerminationVerdict::Terminates => {
                    writeln!(stdout, "terminates: all {} graph patterns of {} are finite", ps.len(), l.name)?;
                    Ok(0)
                }
                TerminationVerdict::Unknown(bad) => {
                    let names: Vec<String> = bad.iter().map(|s| s.to_string()).collect();
                    writeln!(stdout, "unknown: patterns did not close for {}", names.join(", "))?;
                    truncation(budgets.strict, "termination could not be certified")
                }
            }
        }
        Command::Analyze { analysis, program, lang, abs, open, close, budgets, out } => match analysis {
            Analysis::ConstProp => const_prop(&program, &lang, &abs, &budgets, &out, stdout),
            Analysis::Paren => paren(&program, &lang, &abs, (&open, &close), &budgets, &out, stdout, stderr),
        },
        Command::LangDump { lang, out } => {
            let l = load_language(lang.lang.as_deref().unwrap_or("imp"))?;
            emit(&out, &print_language(&l), stdout)?;
            Ok(0)
        }
    }
}

/// Value-child profiles without a recipe are warnings; a node type whose
/// all-nonvalue pattern fails is an error.
fn codegen_outcome(errors: &[CodegenError], stderr: &mut dyn Write) -> Result<i32, Failure> {
    let mut fatal = Vec::new();
    for e in errors {
        if e.key().1.iter().any(|&v| v) {
            writeln!(stderr, "warning: {}", e)?;
        } else {
            fatal.push(e.to_string());
        }
    }
    if fatal.is_empty() {
        Ok(0)
    } else {
        Err(Failure::Codegen(fatal.join("; ")))
    }
}

fn truncation(hit: bool, what: &str) -> Result<i32, Failure> {
    if hit {
        Err(Failure::Truncated(what.into()))
    } else {
        Ok(0)
    }
}

fn parse_profile(p: &str, arity: usize) -> Result<Vec<bool>, Failure> {
    let v: Option<Vec<bool>> = p
        .chars()
        .map(|c| match c {
            'v' => Some(true),
            'n' => Some(false),
            _ => None,
        })
        .collect();
    match v {
        Some(v) if v.len() == arity => Ok(v),
        _ => Err(Failure::Validation(format!("profile `{}` must be {} letters from v and n", p, arity))),
    }
}

fn profile_text(p: &[bool]) -> String {
    let s: String = p.iter().map(|&v| if v { 'v' } else { 'n' }).collect();
    format!("[{}]", s)
}

fn check(opts: &LangOpts, out: &mut dyn Write) -> Result<i32, Failure> {
    let l = load_language(opts.lang.as_deref().unwrap_or("imp"))?;
    let mut code = 0;
    writeln!(out, "language {}", l.name)?;
    let diags = validate(&l);
    if diags.is_empty() {
        writeln!(out, "validation: ok")?;
    }
    for d in &diags {
        writeln!(out, "{}", d)?;
        if d.severity == Severity::Error {
            code = 2;
        }
    }
    if code != 0 {
        return Ok(code);
    }
    let pam = sos_to_pam(&l);
    writeln!(out, "up rules:")?;
    for (name, v) in check_up_rules_invertible(&pam, DEPTH_BOUND) {
        let assumed = opts.assume.iter().any(|a| **a == *name);
        let shown = match &v {
            Verdict::Invertible => "invertible".to_string(),
            _ if assumed => "assumed invertible".to_string(),
            Verdict::NotInvertible => {
                code = 3;
                "NOT invertible".to_string()
            }
            Verdict::Unknown(why) => {
                code = 3;
                format!("unknown ({})", why)
            }
        };
        writeln!(out, "  {:<24} {}", name, shown)?;
    }
    match check_no_up_down(&pam) {
        Ok(()) => writeln!(out, "up-down rules: none")?,
        Err(bad) => {
            code = 3;
            for n in bad {
                writeln!(out, "up-down rule: {}", n)?;
            }
        }
    }
    writeln!(out, "{}", if code == 0 { "ok: abstract machine can be built" } else { "failed: abstract machine cannot be built" })?;
    Ok(code)
}

fn env_text(env: &ConstEnv) -> String {
    let parts: Vec<String> = env
        .iter()
        .filter(|(x, _)| &***x != OUT)
        .filter_map(|(x, c)| match c {
            Const::Bot => None,
            Const::Val(n) => Some(format!("{}={}", x, n)),
            Const::Top => Some(format!("{}=⊤", x)),
        })
        .collect();
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(" ")
    }
}

fn gen_label(g: &GeneratedCfg, i: usize) -> String {
    let n = &g.nodes[i];
    let path: Vec<String> = n.path.iter().map(|p| p.to_string()).collect();
    let role = if n.role == Role::In { "in" } else { "out" };
    format!("/{} {} {}", path.join("/"), n.node_type, role)
}

fn entry_env(p: &Program) -> ConstEnv {
    p.inputs
        .iter()
        .map(|(x, v)| (mandate_core::term::sym(x), v.as_int().map_or(Const::Top, Const::Val)))
        .collect()
}

fn const_prop(
    program: &str,
    lang: &LangOpts,
    abs: &AbsOpts,
    budgets: &Budgets,
    out: &OutOpts,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let (l, p, _) = language_and_program(lang, program)?;
    let a = parse_abstraction(&abs.abs, &abs.keep)?;
    let rules = machine(&l, lang)?;
    let (compiled, errors) = compile_language(&l, &rules, &a, budgets.max_pattern_nodes);
    let g = recipe_to_cfg(&recipes_of(&compiled), &p.term).map_err(|e| {
        let why: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        Failure::Codegen(if why.is_empty() { e.to_string() } else { format!("{} ({})", e, why.join("; ")) })
    })?;
    let envs = constant_propagation(&g, &p.term, &entry_env(&p));
    let used = g.used();
    let rows: Vec<(String, String)> = (0..g.nodes.len())
        .filter(|i| used.contains(i))
        .map(|i| (gen_label(&g, i), envs[i].as_ref().map_or("unreachable".into(), env_text)))
        .collect();
    let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    let mut text = String::new();
    for (label, env) in rows {
        let pad = width - label.chars().count();
        text += &format!("{}{}  {}\n", label, " ".repeat(pad), env);
    }
    text += &format!("exit: {}\n", exit_env(&g, &envs).map_or("unreachable".into(), |e| env_text(&e)));
    emit(out, &text, stdout)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn paren(
    program: &str,
    lang: &LangOpts,
    abs: &AbsOpts,
    (open, close): (&str, &str),
    budgets: &Budgets,
    out: &OutOpts,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let (l, _, conf) = language_and_program(lang, program)?;
    let a = parse_abstraction(&abs.abs, &abs.keep)?.keeping(&[open, close]);
    let rules = machine(&l, lang)?;
    let g = explore_graph(&l, &rules, &a, &AmState::start(conf), budgets.max_states);
    let cfg: Cfg = project_graph(&g, &identity_projection);
    let w = member_weights(&cfg, &g, open, close);
    let verdict = if cfg.truncated {
        writeln!(stderr, "warning: exploration hit the state budget")?;
        ParenVerdict::Unknown
    } else {
        paren_balance(&cfg, &|i| w[i], PAREN_CAP)
    };
    let label = |i: usize| cfg.nodes[i].state.conf.term.to_string();
    let mut text = String::new();
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0 {
            text += &format!("n{:<5} {:+}  {}\n", i, wi, label(i));
        }
    }
    let code = match &verdict {
        ParenVerdict::Balanced => {
            text += "balanced\n";
            0
        }
        ParenVerdict::Unbalanced(path) => {
            text += "unbalanced; witness:\n";
            let mut depth = 0;
            for &i in path {
                depth += w[i];
                if w[i] != 0 || Some(&i) == path.last() {
                    text += &format!("  {:+} -> {}  {}\n", w[i], depth, label(i));
                }
            }
            1
        }
        ParenVerdict::Unknown => {
            text += "unknown\n";
            2
        }
    };
    emit(out, &text, stdout)?;
    Ok(code)
}

/// Convenience for tests: runs and captures both streams.
pub fn run_captured(args: &[&str]) -> (i32, String, String) {
    let mut o = Vec::new();
    let mut e = Vec::new();
    let mut all = vec!["mandate"];
    all.extend_from_slice(args);
    let code = run(all, &mut o, &mut e);
    (code, String::from_utf8_lossy(&o).into_owned(), String::from_utf8_lossy(&e).into_owned())
}
