//! Rule-driven comparison of a program's log against its reference.
//!
//! Both files are reduced to a sequence of [`Extraction`]s taken from the
//! body of their latest run section, and the two sequences are compared
//! position by position.

use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use crate::config::{ComparisonRule, Warning, DEFAULT_LINE_PATTERN};
use crate::error::{OvalError, Result};
use crate::logfile::{is_header_line, latest_run_body, LogSection, SectionKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub rule_index: usize,
    /// 1-based, counted over the whole file.
    pub source_line_number: usize,
    pub raw_line: String,
    /// Present for number rules whose capture parsed as a decimal.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceKind {
    LineMismatch,
    NumberOutOfTolerance,
    MissingInLog,
    ExtraInLog,
    RuleMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub kind: DifferenceKind,
    pub ref_extraction: Option<Extraction>,
    pub log_extraction: Option<Extraction>,
    pub tolerance_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub rules_used: Vec<ComparisonRule>,
    pub differences: Vec<Difference>,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.differences.is_empty()
    }
}

fn effective_rules(rules: &[ComparisonRule]) -> Vec<ComparisonRule> {
    if rules.is_empty() {
        vec![ComparisonRule::line(DEFAULT_LINE_PATTERN)]
    } else {
        rules.to_vec()
    }
}

fn compile(rules: &[ComparisonRule]) -> Result<Vec<Regex>> {
    rules
        .iter()
        .map(|r| {
            Regex::new(r.pattern()).map_err(|e| {
                OvalError::Usage(format!("invalid comparison pattern /{}/: {e}", r.pattern()))
            })
        })
        .collect()
}

/// Parses a captured number: optional sign, decimal point and exponent,
/// surrounding blanks ignored. `inf`/`nan` spellings are refused.
pub fn parse_decimal(text: &str) -> Option<f64> {
    static NUMBER: OnceLock<Regex> = OnceLock::new();
    let re = NUMBER.get_or_init(|| {
        Regex::new(r"^[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?$").unwrap()
    });
    let text = text.trim();
    re.is_match(text).then(|| text.parse().ok()).flatten()
}

/// Collects the lines of the latest run body that match a rule. Each line
/// is attributed to the first rule matching it. An empty rule list means
/// the implicit `^OVAL:` line rule.
pub fn extract(text: &str, rules: &[ComparisonRule]) -> Result<(Vec<Extraction>, Vec<Warning>)> {
    let rules = effective_rules(rules);
    let compiled = compile(&rules)?;
    let mut extractions = Vec::new();
    let mut warnings = Vec::new();

    for (line_no, line) in latest_run_body(text) {
        if is_header_line(line) {
            continue;
        }
        let Some((rule_index, re)) = compiled
            .iter()
            .enumerate()
            .find(|(_, re)| re.is_match(line))
        else {
            continue;
        };
        let value = match &rules[rule_index] {
            ComparisonRule::Line { .. } => None,
            ComparisonRule::Number { pattern, .. } => {
                let captured = re
                    .captures(line)
                    .and_then(|c| c.get(1))
                    .map(|m| m.as_str())
                    .unwrap_or("");
                let value = parse_decimal(captured);
                if value.is_none() {
                    warnings.push(Warning(format!(
                        "line {line_no}: `{captured}` captured by /{pattern}/ is not a number"
                    )));
                }
                value
            }
        };
        extractions.push(Extraction {
            rule_index,
            source_line_number: line_no,
            raw_line: line.to_string(),
            value,
        });
    }
    Ok((extractions, warnings))
}

/// True when `log` drifts from `reference` by more than `tolerance_percent`
/// of `|reference|`. A zero reference demands an exact zero.
pub fn exceeds_tolerance(reference: f64, log: f64, tolerance_percent: f64) -> bool {
    if reference == 0.0 {
        return log != 0.0;
    }
    // Scaled by 100 rather than dividing the tolerance, so whole-percent
    // boundaries on whole references stay exact.
    (log - reference).abs() * 100.0 > tolerance_percent * reference.abs()
}

/// Pairs the i-th reference extraction with the i-th log extraction.
pub fn compare(
    reference: &[Extraction],
    log: &[Extraction],
    rules: &[ComparisonRule],
) -> DiffReport {
    let rules = effective_rules(rules);
    let mut differences = Vec::new();
    let paired = reference.len().min(log.len());

    for (r, l) in reference.iter().zip(log) {
        let diff = |kind, tolerance_percent| Difference {
            kind,
            ref_extraction: Some(r.clone()),
            log_extraction: Some(l.clone()),
            tolerance_percent,
        };
        if r.rule_index != l.rule_index {
            differences.push(diff(DifferenceKind::RuleMismatch, None));
            continue;
        }
        let lines_differ = r.raw_line.trim_end() != l.raw_line.trim_end();
        match rules.get(r.rule_index) {
            Some(ComparisonRule::Number {
                tolerance_percent, ..
            }) => match (r.value, l.value) {
                (Some(rv), Some(lv)) => {
                    if exceeds_tolerance(rv, lv, *tolerance_percent) {
                        differences.push(diff(
                            DifferenceKind::NumberOutOfTolerance,
                            Some(*tolerance_percent),
                        ));
                    }
                }
                _ if lines_differ => differences.push(diff(DifferenceKind::LineMismatch, None)),
                _ => {}
            },
            _ if lines_differ => differences.push(diff(DifferenceKind::LineMismatch, None)),
            _ => {}
        }
    }

    differences.extend(reference[paired..].iter().map(|r| Difference {
        kind: DifferenceKind::MissingInLog,
        ref_extraction: Some(r.clone()),
        log_extraction: None,
        tolerance_percent: None,
    }));
    differences.extend(log[paired..].iter().map(|l| Difference {
        kind: DifferenceKind::ExtraInLog,
        ref_extraction: None,
        log_extraction: Some(l.clone()),
        tolerance_percent: None,
    }));

    DiffReport {
        rules_used: rules,
        differences,
    }
}

const ABSENT: &str = "<absent>";

pub fn render_report(report: &DiffReport) -> LogSection {
    let header = report
        .rules_used
        .iter()
        .map(|rule| match rule {
            ComparisonRule::Line { pattern } => format!("diff line: /{pattern}/"),
            ComparisonRule::Number {
                pattern,
                tolerance_percent,
            } => format!("diff number: /{pattern}/ ~{tolerance_percent}%"),
        })
        .collect();

    let mut body = String::new();
    for (i, d) in report.differences.iter().enumerate() {
        if i > 0 {
            body.push('\n');
        }
        let line_no = |e: &Option<Extraction>| {
            e.as_ref()
                .map_or(ABSENT.to_string(), |e| e.source_line_number.to_string())
        };
        fn raw(e: &Option<Extraction>) -> &str {
            e.as_ref().map_or(ABSENT, |e| e.raw_line.as_str())
        }
        let (r, l) = (line_no(&d.ref_extraction), line_no(&d.log_extraction));
        let _ = match (d.kind, d.tolerance_percent) {
            (DifferenceKind::NumberOutOfTolerance, Some(tol)) => {
                writeln!(body, "ref#{r} !~ log#{l} (>{tol}%)")
            }
            _ => writeln!(body, "ref#{r} != log#{l}"),
        };
        let _ = writeln!(
            body,
            "ref: {}\n---\nlog: {}",
            raw(&d.ref_extraction),
            raw(&d.log_extraction)
        );
    }

    LogSection {
        kind: SectionKind::Diff,
        header,
        body,
    }
}

/// Extracts from both texts and compares them under `rules`.
pub fn diff_texts(
    reference: &str,
    log: &str,
    rules: &[ComparisonRule],
) -> Result<(DiffReport, Vec<Warning>)> {
    let (ref_items, mut warnings) = extract(reference, rules)?;
    let (log_items, log_warnings) = extract(log, rules)?;
    warnings.extend(log_warnings);
    Ok((compare(&ref_items, &log_items, rules), warnings))
}
