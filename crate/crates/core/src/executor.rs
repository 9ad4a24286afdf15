//! Per-program lifecycle: build, run, diff and validate, each leaving a
//! section in `<log_basename>.log`.

use std::fs;
use std::path::Path;

use crate::adapters::{adapter_build, adapter_run, ToolAdapter};
use crate::config::{assemble_aux_file, ProgramKind, ProgramSpec, Warning};
use crate::diff::{diff_texts, render_report};
use crate::error::{OvalError, Result};
use crate::logfile::{LogSection, SectionKind};

/// Header lines longer than this are wrapped.
pub const HEADER_WRAP_WIDTH: usize = 60;
/// Build output lines longer than this are re-wrapped.
pub const LONG_BUILD_LINE: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffStatus {
    Clean,
    Diffs,
    NoReference,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spec: ProgramSpec,
    pub built: Phase,
    pub ran: Phase,
    pub diffed: DiffStatus,
}

impl RunOutcome {
    pub fn new(spec: ProgramSpec) -> Self {
        RunOutcome {
            spec,
            built: Phase::Skipped,
            ran: Phase::Skipped,
            diffed: DiffStatus::Skipped,
        }
    }

    pub fn failed(&self) -> bool {
        self.built == Phase::Failed || self.ran == Phase::Failed
    }
}

/// Builds a source program through the build adapter and starts a fresh
/// log with the build section. Scripts and binaries are skipped.
pub fn do_build(spec: &ProgramSpec, adapter: &ToolAdapter, workdir: &Path) -> Result<Phase> {
    if spec.kind != ProgramKind::Source {
        return Ok(Phase::Skipped);
    }
    let out = adapter_build(adapter, spec, workdir);
    let section = LogSection {
        kind: SectionKind::Build,
        header: vec![out.command_line],
        body: normalize_build_output(&out.output),
    };
    section.write_to(&workdir.join(spec.log_file()), true)?;
    Ok(if out.exit_status == 0 {
        Phase::Ok
    } else {
        Phase::Failed
    })
}

/// Writes the auxiliary files, runs the program through the run adapter
/// and appends the run section. Programs without a build step start a new
/// log instead of appending.
///
/// Only a program that could not be started counts as failed; its exit
/// status is not judged here.
pub fn do_run(spec: &ProgramSpec, adapter: &ToolAdapter, workdir: &Path) -> Result<Phase> {
    let log_path = workdir.join(spec.log_file());
    let truncate = spec.kind != ProgramKind::Source;
    let mut section = LogSection {
        kind: SectionKind::Run,
        header: run_header(spec),
        body: String::new(),
    };

    if let Err(e) = write_aux_files(spec, workdir) {
        section.body = format!("oval: {e}\n");
        section.write_to(&log_path, truncate)?;
        return Ok(Phase::Failed);
    }

    let out = adapter_run(adapter, spec, workdir);
    section.body = out.output;
    section.write_to(&log_path, truncate)?;
    Ok(if out.launched {
        Phase::Ok
    } else {
        Phase::Failed
    })
}

fn write_aux_files(spec: &ProgramSpec, workdir: &Path) -> Result<()> {
    for file in &spec.aux_files {
        let content = assemble_aux_file(&file.name, spec).unwrap_or_default();
        let path = workdir.join(&file.name);
        fs::write(&path, content).map_err(|e| OvalError::io(&path, e))?;
    }
    Ok(())
}

/// Deletes the auxiliary files written for `spec`.
pub fn remove_aux_files(spec: &ProgramSpec, workdir: &Path) -> Result<()> {
    for file in &spec.aux_files {
        let path = workdir.join(&file.name);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                return Err(OvalError::io(&path, e))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Copies the log over the reference.
pub fn do_validate(spec: &ProgramSpec, workdir: &Path) -> Result<()> {
    let log = workdir.join(spec.log_file());
    if !log.is_file() {
        return Err(OvalError::NothingToValidate { path: log });
    }
    let reference = workdir.join(spec.ref_file());
    fs::copy(&log, &reference).map_err(|e| OvalError::io(&reference, e))?;
    Ok(())
}

/// Compares the log with the reference and appends the diff section to
/// the log.
pub fn do_diff(spec: &ProgramSpec, workdir: &Path) -> Result<(DiffStatus, Vec<Warning>)> {
    let ref_path = workdir.join(spec.ref_file());
    if !ref_path.is_file() {
        return Ok((DiffStatus::NoReference, Vec::new()));
    }
    let log_path = workdir.join(spec.log_file());
    let reference = fs::read_to_string(&ref_path).map_err(|e| OvalError::io(&ref_path, e))?;
    let log = fs::read_to_string(&log_path).map_err(|e| OvalError::io(&log_path, e))?;

    let (report, warnings) = diff_texts(&reference, &log, &spec.comparison_rules())?;
    render_report(&report).write_to(&log_path, false)?;
    let status = if report.is_clean() {
        DiffStatus::Clean
    } else {
        DiffStatus::Diffs
    };
    Ok((status, warnings))
}

/// Header of a run section: the exported variables, then each auxiliary
/// file with its content indented.
pub fn run_header(spec: &ProgramSpec) -> Vec<String> {
    let mut lines = Vec::new();
    for (name, value) in &spec.variables {
        lines.extend(variable_lines(name, value));
    }
    for file in &spec.aux_files {
        lines.push(format!("{}:", file.name));
        let content = assemble_aux_file(&file.name, spec).unwrap_or_default();
        lines.extend(content.lines().map(|l| format!("  {l}")));
    }
    lines
}

/// `NAME = value`, or for long values `NAME =` followed by the value one
/// path element per line:
///
/// ```text
/// LD_LIBRARY_PATH =
///   /home/cmsuser/ORCA_5/lib
///  :/opt/cms/Releases/ORCA_5/lib
/// ```
pub fn variable_lines(name: &str, value: &str) -> Vec<String> {
    let single = format!("{name} = {value}");
    if single.chars().count() <= HEADER_WRAP_WIDTH {
        return vec![single];
    }
    let mut lines = vec![format!("{name} =")];
    if value.contains(':') {
        for (i, piece) in value.split(':').enumerate() {
            lines.push(if i == 0 {
                format!("  {piece}")
            } else {
                format!(" :{piece}")
            });
        }
    } else {
        let chars: Vec<char> = value.chars().collect();
        for chunk in chars.chunks(HEADER_WRAP_WIDTH - 2) {
            lines.push(format!("  {}", chunk.iter().collect::<String>()));
        }
    }
    lines
}

/// Tidies build output: blank runs inside a line collapse to one space,
/// and overlong command lines are split so that each `-L`/`-I` path sits
/// on its own indented line and remaining options fill lines of at most
/// [`LONG_BUILD_LINE`] columns.
pub fn normalize_build_output(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        let indent = &line[..line.len() - trimmed.len()];
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let collapsed = format!("{indent}{}", tokens.join(" "));
        if collapsed.len() <= LONG_BUILD_LINE {
            out.push_str(&collapsed);
            out.push('\n');
            continue;
        }
        for wrapped in wrap_command(indent, &tokens) {
            out.push_str(&wrapped);
            out.push('\n');
        }
    }
    out
}

fn is_path_option(token: &str) -> bool {
    token.starts_with("-L") || token.starts_with("-I")
}

fn wrap_command(indent: &str, tokens: &[&str]) -> Vec<String> {
    let split = tokens
        .iter()
        .position(|t| is_path_option(t) || t.starts_with("-l"))
        .unwrap_or(tokens.len());
    let (head, tail) = tokens.split_at(split);
    let mut lines = Vec::new();
    if !head.is_empty() {
        lines.push(format!("{indent}{}", head.join(" ")));
    }
    let continuation = format!("{indent}  ");
    let mut current = String::new();
    let flush = |current: &mut String, lines: &mut Vec<String>| {
        if !current.is_empty() {
            lines.push(format!("{continuation}{current}"));
            current.clear();
        }
    };
    for token in tail {
        if is_path_option(token) {
            flush(&mut current, &mut lines);
            current.push_str(token);
            flush(&mut current, &mut lines);
            continue;
        }
        if !current.is_empty()
            && continuation.len() + current.len() + 1 + token.len() > LONG_BUILD_LINE
        {
            flush(&mut current, &mut lines);
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(token);
    }
    flush(&mut current, &mut lines);
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AuxFile;

    fn spec() -> ProgramSpec {
        ProgramSpec {
            target: "Electrons.cpp".into(),
            kind: ProgramKind::Source,
            args: vec![],
            environment: Some("pt15".into()),
            occurrence_index: 1,
            variables: vec![
                ("FEDERATION".into(), "cmsuf01".into()),
                ("DATASET".into(), "eg_ele_pt15".into()),
            ],
            aux_files: vec![AuxFile {
                name: ".orcarc".into(),
                parts: vec!["GoPersistent = 1\nMaxEvents = 500\nRandom:Seeds = 0 3".into()],
            }],
            rules: vec![],
            log_basename: "Electrons".into(),
        }
    }

    #[test]
    fn run_header_lists_variables_then_files() {
        let section = LogSection {
            kind: SectionKind::Run,
            header: run_header(&spec()),
            body: String::new(),
        };
        assert_eq!(
            section.header_lines(),
            vec![
                "[oval run] =============================",
                "[oval run] FEDERATION = cmsuf01",
                "[oval run] DATASET = eg_ele_pt15",
                "[oval run] .orcarc:",
                "[oval run]   GoPersistent = 1",
                "[oval run]   MaxEvents = 500",
                "[oval run]   Random:Seeds = 0 3",
                "[oval run] =============================",
            ]
        );
    }

    #[test]
    fn empty_run_header() {
        let mut s = spec();
        s.variables.clear();
        s.aux_files.clear();
        assert!(run_header(&s).is_empty());
    }

    #[test]
    fn long_path_variable_wraps() {
        let lines = variable_lines(
            "LD_LIBRARY_PATH",
            "/home/cmsuser/ORCA_5/lib:/opt/cms/Releases/ORCA_5/lib:/opt/Objectivity/5.2.1/lib",
        );
        assert_eq!(
            lines,
            [
                "LD_LIBRARY_PATH =",
                "  /home/cmsuser/ORCA_5/lib",
                " :/opt/cms/Releases/ORCA_5/lib",
                " :/opt/Objectivity/5.2.1/lib",
            ]
        );
        let long = "x".repeat(130);
        let lines = variable_lines("V", &long);
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.len() <= HEADER_WRAP_WIDTH));
        assert_eq!(
            lines[1..].iter().map(|l| l.trim()).collect::<String>(),
            long
        );
    }

    #[test]
    fn build_output_is_rewrapped() {
        let raw = "c++   -O2 -o Electrons Electrons.o -L/home/cmsuser/ORCA_5/lib/Linux__2.2 \
                   -L/opt/cms/Releases/ORCA_5/lib/Linux__2.2 -L/cern/2001/lib \
                   -lElectronFacilities -lEgammaH4Support -lz -lnsl -ldl -lg2c -lm\n";
        assert_eq!(
            normalize_build_output(raw),
            "c++ -O2 -o Electrons Electrons.o\n\
             \x20 -L/home/cmsuser/ORCA_5/lib/Linux__2.2\n\
             \x20 -L/opt/cms/Releases/ORCA_5/lib/Linux__2.2\n\
             \x20 -L/cern/2001/lib\n\
             \x20 -lElectronFacilities -lEgammaH4Support -lz -lnsl -ldl -lg2c -lm\n"
        );
    }

    #[test]
    fn short_build_lines_only_collapse_blanks() {
        assert_eq!(
            normalize_build_output("a.cpp:3:   error:  oops   \n    ^\n"),
            "a.cpp:3: error: oops\n    ^\n"
        );
        assert_eq!(normalize_build_output(""), "");
    }

    #[test]
    fn validate_requires_log() {
        let dir = tempfile::tempdir().unwrap();
        let err = do_validate(&spec(), dir.path()).unwrap_err();
        assert!(
            matches!(err, OvalError::NothingToValidate { path } if path.ends_with("Electrons.log"))
        );
    }

    #[test]
    fn validate_copies_bytes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("Electrons.log"), b"abc\x00\n").unwrap();
        do_validate(&spec(), dir.path()).unwrap();
        let first = fs::read(dir.path().join("Electrons.ref")).unwrap();
        do_validate(&spec(), dir.path()).unwrap();
        let second = fs::read(dir.path().join("Electrons.ref")).unwrap();
        assert_eq!(first, b"abc\x00\n");
        assert_eq!(first, second);
    }

    #[test]
    fn diff_without_reference() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            do_diff(&spec(), dir.path()).unwrap().0,
            DiffStatus::NoReference
        );
    }
}
