use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use super::{upsert, AuxFile, EffectiveConfig, ProgramKind, ProgramSpec, Scope, Warning};

const SOURCE_EXTENSIONS: &[&str] = &["cpp", "cc", "c", "cxx", "C", "f"];

/// File name without its last extension: `Electrons.cpp` → `Electrons`.
pub fn target_stem(target: &str) -> &str {
    let name = target.rsplit('/').next().unwrap_or(target);
    match name.rfind('.') {
        Some(i) if i > 0 => &name[..i],
        _ => name,
    }
}

/// Decides how a program target is brought to life, looking at its
/// extension first and at the file in `dir` second.
pub fn classify_target(target: &str, dir: &Path) -> (ProgramKind, Option<Warning>) {
    if let Some((_, ext)) = target.rsplit_once('.') {
        if SOURCE_EXTENSIONS.contains(&ext) {
            return (ProgramKind::Source, None);
        }
    }
    let path = dir.join(target);
    if is_executable_file(&path) {
        let mut head = [0u8; 2];
        let is_script = fs::File::open(&path)
            .and_then(|mut f| f.read_exact(&mut head))
            .map(|_| &head == b"#!")
            .unwrap_or(false);
        let kind = if is_script {
            ProgramKind::Script
        } else {
            ProgramKind::Binary
        };
        return (kind, None);
    }
    (
        ProgramKind::Source,
        Some(Warning(format!(
            "{}: cannot classify `{target}`, assuming it must be built",
            dir.display()
        ))),
    )
}

#[cfg(unix)]
pub(crate) fn is_executable_file(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    fs::metadata(path)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[cfg(not(unix))]
pub(crate) fn is_executable_file(path: &Path) -> bool {
    path.is_file()
}

/// Expands the effective configuration of `dir` into one spec per
/// program declaration, top level first, then each environment in order.
pub fn resolve_program_specs(
    cfg: &EffectiveConfig,
    dir: &Path,
) -> (Vec<ProgramSpec>, Vec<Warning>) {
    let empty = Scope::default();
    let scoped =
        cfg.top
            .programs
            .iter()
            .map(|p| (p, None, &empty))
            .chain(cfg.environments.iter().flat_map(|(name, scope)| {
                scope
                    .programs
                    .iter()
                    .map(move |p| (p, Some(name.as_str()), scope))
            }));

    let mut warnings = Vec::new();
    let mut occurrences: HashMap<String, usize> = HashMap::new();
    let mut specs = Vec::new();
    for (decl, env_name, env) in scoped {
        let (kind, warning) = classify_target(&decl.name, dir);
        warnings.extend(warning);

        let counter = occurrences
            .entry(target_stem(&decl.name).to_string())
            .or_default();
        *counter += 1;

        let mut variables = cfg.top.variables.clone();
        for (name, value) in &env.variables {
            upsert(&mut variables, name, value);
        }

        let mut aux_files: Vec<AuxFile> = Vec::new();
        for part in cfg.top.aux_parts.iter().chain(&env.aux_parts) {
            match aux_files.iter_mut().find(|f| f.name == part.filename) {
                Some(file) => file.parts.push(part.content.clone()),
                None => aux_files.push(AuxFile {
                    name: part.filename.clone(),
                    parts: vec![part.content.clone()],
                }),
            }
        }

        specs.push(ProgramSpec {
            target: decl.name.clone(),
            kind,
            args: decl.args.clone(),
            environment: env_name.map(str::to_string),
            occurrence_index: *counter,
            variables,
            aux_files,
            rules: cfg.top.rules.iter().chain(&env.rules).cloned().collect(),
            log_basename: String::new(),
        });
    }
    assign_log_basenames(&mut specs);
    (specs, warnings)
}

/// A stem seen once keeps its name. Repeated stems are qualified with the
/// environment name, then with the occurrence index if that still clashes.
fn assign_log_basenames(specs: &mut [ProgramSpec]) {
    let mut stem_counts: HashMap<String, usize> = HashMap::new();
    for s in specs.iter() {
        *stem_counts.entry(s.stem().to_string()).or_default() += 1;
    }

    let mut names: Vec<String> = specs
        .iter()
        .map(|s| match (&s.environment, stem_counts[s.stem()]) {
            (_, 1) => s.stem().to_string(),
            (Some(env), _) => format!("{}.{env}", s.stem()),
            (None, _) => s.stem().to_string(),
        })
        .collect();

    let mut name_counts: HashMap<String, usize> = HashMap::new();
    for n in &names {
        *name_counts.entry(n.clone()).or_default() += 1;
    }
    for (name, spec) in names.iter_mut().zip(specs.iter()) {
        if name_counts[name.as_str()] > 1 {
            *name = format!("{name}.{}", spec.occurrence_index);
        }
    }

    // Stems that themselves contain dots can still collide after
    // qualification; bump until unique.
    let mut taken = HashSet::new();
    for (name, spec) in names.into_iter().zip(specs.iter_mut()) {
        let mut candidate = name.clone();
        let mut bump = 1;
        while !taken.insert(candidate.clone()) {
            bump += 1;
            candidate = format!("{name}.{bump}");
        }
        spec.log_basename = candidate;
    }
}

/// Content of the auxiliary file `filename` as seen by `spec`: the parts
/// in declaration order (top level first) joined by newlines, always
/// ending with a newline. `None` when the spec has no such file.
pub fn assemble_aux_file(filename: &str, spec: &ProgramSpec) -> Option<String> {
    let file = spec.aux_files.iter().find(|f| f.name == filename)?;
    let mut text = file.parts.join("\n");
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Some(text)
}
