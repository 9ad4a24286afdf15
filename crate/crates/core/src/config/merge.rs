use std::path::PathBuf;

use super::{upsert, AuxPart, ComparisonRule, ConfigNode, Directive, ProgramDecl};

/// Directives visible at one level: either the top level of the merged
/// documents or one named environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scope {
    pub variables: Vec<(String, String)>,
    pub aux_parts: Vec<AuxPart>,
    pub rules: Vec<ComparisonRule>,
    pub programs: Vec<ProgramDecl>,
}

impl Scope {
    fn absorb(&mut self, directive: &Directive, cfg: &mut EffectiveConfig) {
        match directive {
            Directive::Program(p) => self.programs.push(p.clone()),
            Directive::Var { name, value } => upsert(&mut self.variables, name, value),
            Directive::AuxFilePart(part) => self.aux_parts.push(part.clone()),
            Directive::Rule(rule) => self.rules.push(rule.clone()),
            Directive::Options { command, value } => upsert(&mut cfg.options, command, value),
            Directive::Config { name, value } => upsert(&mut cfg.configs, name, value),
            Directive::Version(v) => {
                cfg.version.get_or_insert_with(|| v.clone());
            }
        }
    }

    /// `nearer` wins on variables; lists concatenate. Programs are never
    /// inherited: they belong to the directory that declares them.
    fn overlay(mut self, nearer: Scope) -> Scope {
        for (name, value) in &nearer.variables {
            upsert(&mut self.variables, name, value);
        }
        self.aux_parts.extend(nearer.aux_parts);
        self.rules.extend(nearer.rules);
        self.programs = nearer.programs;
        self
    }
}

/// The configuration in force for one directory once its whole OvalFile
/// chain (site defaults first) has been merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectiveConfig {
    pub sources: Vec<PathBuf>,
    pub top: Scope,
    pub environments: Vec<(String, Scope)>,
    pub configs: Vec<(String, String)>,
    pub options: Vec<(String, String)>,
    /// Root-most `<oval version>` of the chain.
    pub version: Option<String>,
}

impl EffectiveConfig {
    pub fn from_node(node: &ConfigNode) -> Self {
        let mut cfg = EffectiveConfig {
            sources: vec![node.source_path.clone()],
            ..Default::default()
        };
        let mut top = Scope::default();
        for d in &node.directives {
            top.absorb(d, &mut cfg);
        }
        let mut envs = Vec::with_capacity(node.environments.len());
        for env in &node.environments {
            let mut scope = Scope::default();
            for d in &env.directives {
                scope.absorb(d, &mut cfg);
            }
            envs.push((env.name.clone(), scope));
        }
        cfg.top = top;
        cfg.environments = envs;
        cfg
    }

    /// Layers a nearer configuration on top of this one.
    pub fn overlay(mut self, nearer: EffectiveConfig) -> EffectiveConfig {
        self.sources.extend(nearer.sources);
        self.top = self.top.overlay(nearer.top);

        let mut nearer_envs = nearer.environments;
        let mut merged = Vec::with_capacity(self.environments.len() + nearer_envs.len());
        for (name, scope) in self.environments {
            let near = match nearer_envs.iter().position(|(n, _)| *n == name) {
                Some(i) => nearer_envs.remove(i).1,
                None => Scope::default(),
            };
            merged.push((name, scope.overlay(near)));
        }
        merged.extend(nearer_envs);
        self.environments = merged;

        for (name, value) in &nearer.configs {
            upsert(&mut self.configs, name, value);
        }
        for (name, value) in &nearer.options {
            upsert(&mut self.options, name, value);
        }
        if self.version.is_none() {
            self.version = nearer.version;
        }
        self
    }

    pub fn config(&self, name: &str) -> Option<&str> {
        lookup(&self.configs, name)
    }

    pub fn options_for(&self, command: &str) -> Option<&str> {
        lookup(&self.options, command)
    }

    pub fn environment(&self, name: &str) -> Option<&Scope> {
        self.environments
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn program_count(&self) -> usize {
        self.top.programs.len()
            + self
                .environments
                .iter()
                .map(|(_, s)| s.programs.len())
                .sum::<usize>()
    }
}

fn lookup<'a>(list: &'a [(String, String)], name: &str) -> Option<&'a str> {
    list.iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_str())
}

/// Merges an OvalFile chain. `ancestors` run from the root-most document
/// (site defaults) down to the leaf's parent.
///
/// Variables, configs and options are nearest-wins; rules and auxiliary
/// parts accumulate root to leaf; environments of the same name merge.
pub fn merge_configs(ancestors: &[ConfigNode], leaf: &ConfigNode) -> EffectiveConfig {
    let mut iter = ancestors.iter().chain(std::iter::once(leaf));
    let first = EffectiveConfig::from_node(iter.next().expect("leaf is always present"));
    iter.fold(first, |acc, node| {
        acc.overlay(EffectiveConfig::from_node(node))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnvironmentBlock;

    fn node(directives: Vec<Directive>) -> ConfigNode {
        ConfigNode {
            source_path: PathBuf::from("OvalFile"),
            directives,
            environments: vec![],
        }
    }

    fn var(name: &str, value: &str) -> Directive {
        Directive::Var {
            name: name.into(),
            value: value.into(),
        }
    }

    #[test]
    fn nearest_variable_wins() {
        let cfg = merge_configs(
            &[node(vec![var("FEDERATION", "a")])],
            &node(vec![var("FEDERATION", "b")]),
        );
        assert_eq!(
            cfg.top.variables,
            vec![("FEDERATION".to_string(), "b".to_string())]
        );
    }

    #[test]
    fn rules_accumulate_root_to_leaf() {
        let cfg = merge_configs(
            &[node(vec![Directive::Rule(ComparisonRule::line("^OVAL:"))])],
            &node(vec![Directive::Rule(ComparisonRule::number(
                "^e: (.*)$",
                5.0,
            ))]),
        );
        assert_eq!(
            cfg.top.rules,
            vec![
                ComparisonRule::line("^OVAL:"),
                ComparisonRule::number("^e: (.*)$", 5.0)
            ]
        );
    }

    #[test]
    fn no_ancestors_is_identity() {
        let leaf = node(vec![
            var("A", "1"),
            Directive::Program(ProgramDecl::new("p.cpp")),
        ]);
        assert_eq!(merge_configs(&[], &leaf), EffectiveConfig::from_node(&leaf));
    }

    #[test]
    fn environments_merge_by_name() {
        let mut root = node(vec![]);
        root.environments.push(EnvironmentBlock {
            name: "pt15".into(),
            directives: vec![
                var("DATASET", "a"),
                Directive::Rule(ComparisonRule::line("x")),
            ],
        });
        let mut leaf = node(vec![]);
        leaf.environments.push(EnvironmentBlock {
            name: "pt15".into(),
            directives: vec![
                var("DATASET", "b"),
                Directive::Rule(ComparisonRule::line("y")),
            ],
        });
        let cfg = merge_configs(&[root], &leaf);
        assert_eq!(cfg.environments.len(), 1);
        let env = cfg.environment("pt15").unwrap();
        assert_eq!(env.variables, vec![("DATASET".into(), "b".into())]);
        assert_eq!(
            env.rules,
            vec![ComparisonRule::line("x"), ComparisonRule::line("y")]
        );
    }

    #[test]
    fn programs_are_not_inherited() {
        let cfg = merge_configs(
            &[node(vec![Directive::Program(ProgramDecl::new(
                "parent.cpp",
            ))])],
            &node(vec![Directive::Program(ProgramDecl::new("child.cpp"))]),
        );
        assert_eq!(cfg.top.programs, vec![ProgramDecl::new("child.cpp")]);
    }

    #[test]
    fn version_is_root_most() {
        let cfg = merge_configs(
            &[node(vec![Directive::Version("1".into())])],
            &node(vec![Directive::Version("2".into())]),
        );
        assert_eq!(cfg.version.as_deref(), Some("1"));
    }
}
