//! Rewrite rules and rule libraries.
//!
//! A rule file holds one rule per line:
//!
//! ```text
//! # comment
//! assoc-sub: (- (+ ?x ?y) ?z) => (+ ?x (- ?y ?z))
//! mul-one-rev: ?x => (* ?x 1)   # expansive
//! ```
//!
//! A trailing comment containing `expansive` marks a rule that only grows
//! the e-graph; such rules can be filtered out for limit experiments.

mod pattern;
pub mod selftest;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::expr::Vocabulary;

use pattern::VarTable;
pub use pattern::{PatNode, PatVar, Pattern, PatternError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub expansive: bool,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} => {}", self.name, self.lhs, self.rhs)?;
        if self.expansive {
            f.write_str("  # expansive")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: rule `{rule}`: right-hand side variable `{var}` is not bound by the left-hand side")]
    UnboundRhsVariable { line: usize, rule: String, var: String },
    #[error("line {line}: duplicate rule name `{name}`")]
    DuplicateRuleName { line: usize, name: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no builtin library or rule file named `{0}`")]
    UnknownLibrary(String),
}

impl RewriteRule {
    /// Builds a rule from its two sides, validating variable containment.
    pub fn new(name: &str, lhs: &str, rhs: &str) -> Result<RewriteRule, RuleError> {
        Self::parse_sides(name, lhs, rhs, &Vocabulary::default(), 0)
    }

    fn parse_sides(
        name: &str,
        lhs: &str,
        rhs: &str,
        vocab: &Vocabulary,
        line: usize,
    ) -> Result<RewriteRule, RuleError> {
        let mut table = VarTable::default();
        let syntax = |e: PatternError| RuleError::Syntax {
            line,
            msg: format!("rule `{name}`: {e}"),
        };
        let lhs_root = Pattern::parse_with(lhs, vocab, &mut table).map_err(syntax)?;
        table.frozen = true;
        let rhs_root = match Pattern::parse_with(rhs, vocab, &mut table) {
            Ok(r) => r,
            Err(PatternError::UnboundRhsVariable(var)) => {
                return Err(RuleError::UnboundRhsVariable {
                    line,
                    rule: name.to_string(),
                    var,
                })
            }
            Err(e) => return Err(syntax(e)),
        };
        Ok(RewriteRule {
            name: name.to_string(),
            lhs: Pattern {
                root: lhs_root,
                names: table.names.clone(),
            },
            rhs: Pattern {
                root: rhs_root,
                names: table.names,
            },
            expansive: false,
        })
    }
}

/// Parses a single `name: lhs => rhs` line (a trailing `#` comment is allowed).
pub fn parse_rule(line: &str) -> Result<RewriteRule, RuleError> {
    parse_rule_at(line, 0, &Vocabulary::default())?.ok_or(RuleError::Syntax {
        line: 0,
        msg: "blank or comment line".into(),
    })
}

fn parse_rule_at(raw: &str, line: usize, vocab: &Vocabulary) -> Result<Option<RewriteRule>, RuleError> {
    let (body, comment) = match raw.split_once('#') {
        Some((b, c)) => (b, c),
        None => (raw, ""),
    };
    let body = body.trim();
    if body.is_empty() {
        return Ok(None);
    }
    let syntax = |msg: &str| RuleError::Syntax {
        line,
        msg: msg.to_string(),
    };
    let (name, sides) = body
        .split_once(':')
        .ok_or_else(|| syntax("expected `name: lhs => rhs`"))?;
    let name = name.trim();
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(syntax("rule name must be a single non-empty word"));
    }
    let (lhs, rhs) = sides.split_once("=>").ok_or_else(|| syntax("missing `=>`"))?;
    let mut rule = RewriteRule::parse_sides(name, lhs.trim(), rhs.trim(), vocab, line)?;
    rule.expansive = comment.contains("expansive");
    Ok(Some(rule))
}

/// Parses a whole rule file. Line numbers in errors are 1-based.
pub fn parse_library(text: &str) -> Result<Vec<RewriteRule>, RuleError> {
    parse_library_with(text, &Vocabulary::default())
}

pub fn parse_library_with(text: &str, vocab: &Vocabulary) -> Result<Vec<RewriteRule>, RuleError> {
    let mut rules: Vec<RewriteRule> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let Some(rule) = parse_rule_at(raw, i + 1, vocab)? else {
            continue;
        };
        if rules.iter().any(|r| r.name == rule.name) {
            return Err(RuleError::DuplicateRuleName {
                line: i + 1,
                name: rule.name,
            });
        }
        rules.push(rule);
    }
    Ok(rules)
}

const FIG1: &str = include_str!("../../data/fig1.rules");
const FULL: &str = include_str!("../../data/full.rules");

pub const BUILTIN_NAMES: [&str; 2] = ["fig1", "full"];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(FIG1),
        "full" => Some(FULL),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Option<Vec<RewriteRule>> {
    builtin_source(name).map(|src| parse_library(src).expect("builtin library parses"))
}

pub fn load_file(path: &Path) -> Result<Vec<RewriteRule>, RuleError> {
    let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_library(&text)
}

/// Resolves a library by builtin name, then as a path, then as
/// `<dir>/<name>.rules` in each search directory.
pub fn load_library(spec: &str, search_dirs: &[PathBuf]) -> Result<Vec<RewriteRule>, RuleError> {
    if let Some(rules) = builtin(spec) {
        return Ok(rules);
    }
    let path = Path::new(spec);
    if path.is_file() {
        return load_file(path);
    }
    for dir in search_dirs {
        let candidate = dir.join(format!("{spec}.rules"));
        if candidate.is_file() {
            return load_file(&candidate);
        }
    }
    Err(RuleError::UnknownLibrary(spec.to_string()))
}
