//! The OvalFile model: parsed documents, their merge across a directory
//! hierarchy, and the per-program specifications derived from the result.

mod merge;
mod parse;
mod resolve;

use std::fmt;
use std::path::PathBuf;

pub use merge::{merge_configs, EffectiveConfig, Scope};
pub use parse::parse_ovalfile;
pub(crate) use resolve::is_executable_file;
pub use resolve::{assemble_aux_file, classify_target, resolve_program_specs, target_stem};

/// Name of the per-directory configuration document.
pub const OVALFILE: &str = "OvalFile";

/// Pattern used when a program has no comparison rule at all.
pub const DEFAULT_LINE_PATTERN: &str = "^OVAL:";

/// A non-fatal problem noticed while reading or resolving configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning(pub String);

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigNode {
    pub source_path: PathBuf,
    pub directives: Vec<Directive>,
    pub environments: Vec<EnvironmentBlock>,
}

impl ConfigNode {
    pub fn empty(source_path: impl Into<PathBuf>) -> Self {
        ConfigNode {
            source_path: source_path.into(),
            ..Default::default()
        }
    }

    pub fn environment(&self, name: &str) -> Option<&EnvironmentBlock> {
        self.environments.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentBlock {
    pub name: String,
    pub directives: Vec<Directive>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Program(ProgramDecl),
    Var { name: String, value: String },
    AuxFilePart(AuxPart),
    Rule(ComparisonRule),
    Options { command: String, value: String },
    Config { name: String, value: String },
    Version(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramDecl {
    pub name: String,
    pub args: Vec<String>,
}

impl ProgramDecl {
    pub fn new(name: impl Into<String>) -> Self {
        ProgramDecl {
            name: name.into(),
            args: Vec::new(),
        }
    }
}

/// One `<file>` block: a part of an auxiliary file, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxPart {
    pub filename: String,
    pub content: String,
}

/// Selects which output lines take part in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonRule {
    /// Matching lines must be identical.
    Line { pattern: String },
    /// The single capture group holds a number allowed to drift by a
    /// percentage of the reference value.
    Number {
        pattern: String,
        tolerance_percent: f64,
    },
}

impl ComparisonRule {
    pub fn line(pattern: impl Into<String>) -> Self {
        ComparisonRule::Line {
            pattern: pattern.into(),
        }
    }

    pub fn number(pattern: impl Into<String>, tolerance_percent: f64) -> Self {
        ComparisonRule::Number {
            pattern: pattern.into(),
            tolerance_percent,
        }
    }

    pub fn pattern(&self) -> &str {
        match self {
            ComparisonRule::Line { pattern } | ComparisonRule::Number { pattern, .. } => pattern,
        }
    }

    pub fn tolerance_percent(&self) -> Option<f64> {
        match self {
            ComparisonRule::Line { .. } => None,
            ComparisonRule::Number {
                tolerance_percent, ..
            } => Some(*tolerance_percent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    /// Needs the build interface before it can run.
    Source,
    /// Executable text file with an interpreter line.
    Script,
    /// Ready-made executable.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxFile {
    pub name: String,
    pub parts: Vec<String>,
}

/// One runnable occurrence of a test program with everything needed to
/// build, run and compare it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSpec {
    pub target: String,
    pub kind: ProgramKind,
    pub args: Vec<String>,
    pub environment: Option<String>,
    pub occurrence_index: usize,
    pub variables: Vec<(String, String)>,
    pub aux_files: Vec<AuxFile>,
    pub rules: Vec<ComparisonRule>,
    pub log_basename: String,
}

impl ProgramSpec {
    pub fn stem(&self) -> &str {
        target_stem(&self.target)
    }

    pub fn log_file(&self) -> String {
        format!("{}.log", self.log_basename)
    }

    pub fn ref_file(&self) -> String {
        format!("{}.ref", self.log_basename)
    }

    /// Declared rules, or the implicit `^OVAL:` line rule when none are.
    pub fn comparison_rules(&self) -> Vec<ComparisonRule> {
        if self.rules.is_empty() {
            vec![ComparisonRule::line(DEFAULT_LINE_PATTERN)]
        } else {
            self.rules.clone()
        }
    }

    pub fn variable(&self, name: &str) -> Option<&str> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// Whether a command-line target selects this spec.
    pub fn matches_target(&self, target: &str) -> bool {
        target == self.log_basename || target == self.stem() || target == self.target
    }
}

/// Inserts or replaces `name`, keeping the position of the first insertion.
pub(crate) fn upsert(list: &mut Vec<(String, String)>, name: &str, value: &str) {
    match list.iter_mut().find(|(n, _)| n == name) {
        Some(slot) => slot.1 = value.to_string(),
        None => list.push((name.to_string(), value.to_string())),
    }
}
