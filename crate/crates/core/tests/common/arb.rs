//! Generators for OvalFile trees drawn from small name pools, so that
//! merges actually collide.

use std::path::PathBuf;

use oval::config::{AuxPart, ComparisonRule, ConfigNode, Directive, EnvironmentBlock, ProgramDecl};
use proptest::prelude::*;
use proptest::sample::select;

pub const VAR_NAMES: &[&str] = &["A", "B", "C", "PATH_X"];
pub const CONFIG_NAMES: &[&str] = &["build tool", "run tool", "watchers"];
pub const ENV_NAMES: &[&str] = &["pt15", "flow", "minbias"];
pub const PROGRAMS: &[&str] = &["Clusters.cpp", "Electrons.cpp", "run.sh", "Tool"];
pub const FILES: &[&str] = &[".orcarc", "cards.txt"];
pub const LINE_PATTERNS: &[&str] = &["^OVAL:", "^CHECK", "done$", "[0-9]+ events"];
pub const NUMBER_PATTERNS: &[&str] = &["^energy: (.*)$", "mass=([0-9.]+)", "^x (\\S+)"];

fn value() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_./:-]{0,12}"
}

pub fn rule() -> impl Strategy<Value = ComparisonRule> {
    prop_oneof![
        select(LINE_PATTERNS).prop_map(ComparisonRule::line),
        (select(NUMBER_PATTERNS), 0u32..500)
            .prop_map(|(p, t)| ComparisonRule::number(p, f64::from(t) / 10.0)),
    ]
}

fn aux_part() -> impl Strategy<Value = AuxPart> {
    (
        select(FILES),
        prop::collection::vec("[A-Za-z][A-Za-z0-9 =:]{0,15}", 1..4),
    )
        .prop_map(|(f, lines)| AuxPart {
            filename: f.to_string(),
            content: lines.join("\n"),
        })
}

fn program() -> impl Strategy<Value = ProgramDecl> {
    (
        select(PROGRAMS),
        prop::collection::vec("[a-z0-9-]{1,5}", 0..3),
    )
        .prop_map(|(n, args)| ProgramDecl {
            name: n.to_string(),
            args,
        })
}

/// Directives allowed inside an environment block.
pub fn scoped_directive() -> impl Strategy<Value = Directive> {
    prop_oneof![
        program().prop_map(Directive::Program),
        (select(VAR_NAMES), value()).prop_map(|(n, v)| Directive::Var {
            name: n.to_string(),
            value: v
        }),
        aux_part().prop_map(Directive::AuxFilePart),
        rule().prop_map(Directive::Rule),
    ]
}

pub fn top_directive() -> impl Strategy<Value = Directive> {
    prop_oneof![
        4 => scoped_directive(),
        1 => (select(CONFIG_NAMES), value()).prop_map(|(n, v)| Directive::Config {
            name: n.to_string(),
            value: v
        }),
        1 => (select(&["run", "prod"][..]), "--[a-z]{2,8}").prop_map(|(c, v)| Directive::Options {
            command: c.to_string(),
            value: v
        }),
        1 => "[0-9]_[0-9]_[0-9]".prop_map(Directive::Version),
    ]
}

pub fn node() -> impl Strategy<Value = ConfigNode> {
    (
        prop::collection::vec(top_directive(), 0..8),
        prop::sample::subsequence(ENV_NAMES, 0..=ENV_NAMES.len()),
        prop::collection::vec(
            prop::collection::vec(scoped_directive(), 0..5),
            ENV_NAMES.len(),
        ),
    )
        .prop_map(|(directives, envs, bodies)| ConfigNode {
            source_path: PathBuf::from("OvalFile"),
            directives,
            environments: envs
                .into_iter()
                .zip(bodies)
                .map(|(name, directives)| EnvironmentBlock {
                    name: name.to_string(),
                    directives,
                })
                .collect(),
        })
}
