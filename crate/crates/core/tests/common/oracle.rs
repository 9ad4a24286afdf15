//! Independent reference implementations of the merge rules.

use oval::config::{ComparisonRule, ConfigNode, Directive, EffectiveConfig};

pub fn fold(nodes: &[&ConfigNode]) -> EffectiveConfig {
    nodes
        .iter()
        .map(|n| EffectiveConfig::from_node(n))
        .reduce(|acc, n| acc.overlay(n))
        .unwrap()
}

/// Nearest node's last declaration of a top-level variable.
pub fn oracle_top_var<'a>(chain: &[&'a ConfigNode], name: &str) -> Option<&'a str> {
    chain.iter().rev().find_map(|n| {
        n.directives.iter().rev().find_map(|d| match d {
            Directive::Var { name: n, value } if n == name => Some(value.as_str()),
            _ => None,
        })
    })
}

pub fn oracle_env_var<'a>(chain: &[&'a ConfigNode], env: &str, name: &str) -> Option<&'a str> {
    chain.iter().rev().find_map(|n| {
        n.environment(env)?
            .directives
            .iter()
            .rev()
            .find_map(|d| match d {
                Directive::Var { name: n, value } if n == name => Some(value.as_str()),
                _ => None,
            })
    })
}

fn rules_of(directives: &[Directive]) -> impl Iterator<Item = ComparisonRule> + '_ {
    directives.iter().filter_map(|d| match d {
        Directive::Rule(r) => Some(r.clone()),
        _ => None,
    })
}

pub fn oracle_top_rules(chain: &[&ConfigNode]) -> Vec<ComparisonRule> {
    chain.iter().flat_map(|n| rules_of(&n.directives)).collect()
}

pub fn oracle_env_rules(chain: &[&ConfigNode], env: &str) -> Vec<ComparisonRule> {
    chain
        .iter()
        .filter_map(|n| n.environment(env))
        .flat_map(|e| rules_of(&e.directives))
        .collect()
}

pub fn program_decls(node: &ConfigNode) -> usize {
    let count = |ds: &[Directive]| {
        ds.iter()
            .filter(|d| matches!(d, Directive::Program(_)))
            .count()
    };
    count(&node.directives)
        + node
            .environments
            .iter()
            .map(|e| count(&e.directives))
            .sum::<usize>()
}
