//! Sectioned log files.
//!
//! Every section starts with a header block framed by rule lines, each
//! header line carrying the `[oval <kind>] ` prefix, followed by one blank
//! line and the section body:
//!
//! ```text
//! [oval build] =============================
//! [oval build] make Electrons
//! [oval build] =============================
//!
//! c++ -O2 -o Electrons Electrons.o
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{OvalError, Result};

/// Number of `=` characters in a header rule line.
pub const RULE_WIDTH: usize = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    Build,
    Run,
    Diff,
}

impl SectionKind {
    pub const ALL: [SectionKind; 3] = [SectionKind::Build, SectionKind::Run, SectionKind::Diff];

    pub fn name(self) -> &'static str {
        match self {
            SectionKind::Build => "build",
            SectionKind::Run => "run",
            SectionKind::Diff => "diff",
        }
    }

    /// `[oval build] `, `[oval run] ` or `[oval diff] `.
    pub fn prefix(self) -> &'static str {
        match self {
            SectionKind::Build => "[oval build] ",
            SectionKind::Run => "[oval run] ",
            SectionKind::Diff => "[oval diff] ",
        }
    }

    pub fn rule_line(self) -> String {
        format!("{}{}", self.prefix(), "=".repeat(RULE_WIDTH))
    }

    fn from_rule_line(line: &str) -> Option<SectionKind> {
        SectionKind::ALL.into_iter().find(|k| {
            line.strip_prefix(k.prefix())
                .is_some_and(|rest| rest.len() == RULE_WIDTH && rest.bytes().all(|b| b == b'='))
        })
    }
}

/// Whether `line` belongs to a section header of any kind.
pub fn is_header_line(line: &str) -> bool {
    SectionKind::ALL
        .iter()
        .any(|k| line.starts_with(k.prefix()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogSection {
    pub kind: SectionKind,
    /// Header lines without their prefix.
    pub header: Vec<String>,
    pub body: String,
}

impl LogSection {
    pub fn new(kind: SectionKind) -> Self {
        LogSection {
            kind,
            header: Vec::new(),
            body: String::new(),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        let rule = self.kind.rule_line();
        std::iter::once(rule.clone())
            .chain(
                self.header
                    .iter()
                    .map(|h| format!("{}{h}", self.kind.prefix())),
            )
            .chain(std::iter::once(rule))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.header_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.body);
        if !self.body.is_empty() && !self.body.ends_with('\n') {
            out.push('\n');
        }
        out
    }

    /// Writes the section to `path`, replacing the file when `truncate` is
    /// set and appending after a blank separator line otherwise.
    pub fn write_to(&self, path: &Path, truncate: bool) -> Result<()> {
        let io_err = |e| OvalError::io(path, e);
        let existing = if truncate {
            0
        } else {
            fs::metadata(path).map(|m| m.len()).unwrap_or(0)
        };
        let mut file = fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(!truncate)
            .truncate(truncate)
            .open(path)
            .map_err(io_err)?;
        if existing > 0 {
            file.write_all(b"\n").map_err(io_err)?;
        }
        file.write_all(self.render().as_bytes()).map_err(io_err)
    }
}

/// Lines of the most recent run section's body, with their 1-based line
/// numbers in the whole file. Text without any run section is treated as
/// a bare body.
pub fn latest_run_body(text: &str) -> Vec<(usize, &str)> {
    let lines: Vec<&str> = text.lines().collect();

    #[derive(PartialEq)]
    enum State {
        Outside,
        Header(SectionKind),
        Body(SectionKind),
    }

    let mut state = State::Outside;
    let mut found_run = false;
    let mut best: (usize, usize) = (0, lines.len());
    let mut current_start = 0;
    for (i, line) in lines.iter().enumerate() {
        let rule = SectionKind::from_rule_line(line);
        state = match (state, rule) {
            (State::Header(kind), Some(k)) if k == kind => {
                current_start = i + 1;
                if lines.get(i + 1).is_some_and(|l| l.is_empty()) {
                    current_start += 1;
                }
                if kind == SectionKind::Run {
                    found_run = true;
                    best = (current_start, lines.len());
                }
                State::Body(kind)
            }
            (State::Header(kind), _) => State::Header(kind),
            (State::Body(kind), Some(k)) => {
                if kind == SectionKind::Run {
                    // Drop the blank separator written before the next section.
                    let mut end = i;
                    if end > current_start && lines[end - 1].is_empty() {
                        end -= 1;
                    }
                    best = (current_start, end);
                }
                State::Header(k)
            }
            (State::Outside, Some(k)) => State::Header(k),
            (s, None) => s,
        };
    }

    let (start, end) = if found_run { best } else { (0, lines.len()) };
    lines[start.min(end)..end]
        .iter()
        .enumerate()
        .map(|(offset, line)| (start + offset + 1, *line))
        .collect()
}
