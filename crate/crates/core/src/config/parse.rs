//! Lenient reader for the XML-like OvalFile syntax.
//!
//! This is deliberately not an XML parser. A tag opens with `<name` and
//! closes at the next `>` outside of quotes, possibly on a later line.
//! Only `<environment>` and `<file>` are blocks; every other tag stands
//! alone and needs no closing tag. The content of a `<file>` block is
//! taken verbatim, with the common indentation removed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use regex::Regex;

use super::{
    AuxPart, ComparisonRule, ConfigNode, Directive, EnvironmentBlock, ProgramDecl, Warning,
};
use crate::error::{OvalError, Result};

const FILE_CLOSE: &str = "</file>";

/// Parses one OvalFile. `path` is only used to locate errors and warnings.
///
/// Parsing is atomic: on error no partial node is returned.
pub fn parse_ovalfile(text: &str, path: &Path) -> Result<(ConfigNode, Vec<Warning>)> {
    Parser::new(text, path).run()
}

struct Tag {
    name: String,
    attrs: Vec<(String, String)>,
    self_closing: bool,
    line: usize,
}

impl Tag {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

struct OpenEnv {
    block: EnvironmentBlock,
    line: usize,
}

struct Parser<'a> {
    text: &'a str,
    path: PathBuf,
    pos: usize,
    line: usize,
    node: ConfigNode,
    env: Option<OpenEnv>,
    warnings: Vec<Warning>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        Parser {
            text,
            path: path.to_path_buf(),
            pos: 0,
            line: 1,
            node: ConfigNode::empty(path),
            env: None,
            warnings: Vec::new(),
        }
    }

    fn error(&self, line: usize, message: impl Into<String>) -> OvalError {
        OvalError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn warn(&mut self, line: usize, message: impl AsRef<str>) {
        self.warnings.push(Warning(format!(
            "{}:{}: {}",
            self.path.display(),
            line,
            message.as_ref()
        )));
    }

    /// Moves the cursor to `to`, keeping the line counter in sync.
    fn advance(&mut self, to: usize) {
        self.line += self.text[self.pos..to].matches('\n').count();
        self.pos = to;
    }

    fn run(mut self) -> Result<(ConfigNode, Vec<Warning>)> {
        while let Some(offset) = self.text[self.pos..].find('<') {
            let start = self.pos + offset;
            self.advance(start);
            let rest = &self.text[start..];

            if rest.starts_with("<!--") {
                let end = rest
                    .find("-->")
                    .ok_or_else(|| self.error(self.line, "unterminated comment"))?;
                self.advance(start + end + 3);
                continue;
            }

            let (body, end) = self.scan_tag(start)?;
            let line = self.line;
            self.advance(end);

            if let Some(closing) = body.strip_prefix('/') {
                self.close_tag(closing.trim(), line)?;
                continue;
            }

            let tag = self.parse_tag(body, line)?;
            self.open_tag(tag)?;
        }

        if let Some(env) = &self.env {
            return Err(self.error(
                env.line,
                format!(
                    "unterminated block `<environment name=\"{}\">`",
                    env.block.name
                ),
            ));
        }
        Ok((self.node, self.warnings))
    }

    /// Finds the `>` closing the tag opened at `start`; returns the tag body
    /// and the offset just past the `>`.
    fn scan_tag(&self, start: usize) -> Result<(&'a str, usize)> {
        let bytes = self.text.as_bytes();
        let mut quote: Option<u8> = None;
        let mut i = start + 1;
        while i < bytes.len() {
            let b = bytes[i];
            match quote {
                Some(q) if b == q => quote = None,
                Some(_) => {}
                None => match b {
                    b'"' | b'\'' => quote = Some(b),
                    b'>' => return Ok((&self.text[start + 1..i], i + 1)),
                    b'<' => break,
                    _ => {}
                },
            }
            i += 1;
        }
        let head: String = self.text[start..]
            .chars()
            .take_while(|c| !c.is_whitespace())
            .take(40)
            .collect();
        Err(self.error(self.line, format!("malformed tag `{head}`: no closing `>`")))
    }

    fn parse_tag(&self, body: &str, line: usize) -> Result<Tag> {
        let mut body = body.trim_end();
        let self_closing = body.ends_with('/');
        if self_closing {
            body = body[..body.len() - 1].trim_end();
        }
        let name_len = body.find(|c: char| c.is_whitespace()).unwrap_or(body.len());
        let name = &body[..name_len];
        if name.is_empty() {
            return Err(self.error(line, "empty tag name"));
        }
        let attrs = parse_attrs(&body[name_len..])
            .map_err(|msg| self.error(line, format!("in `<{name}>`: {msg}")))?;
        Ok(Tag {
            name: name.to_string(),
            attrs,
            self_closing,
            line,
        })
    }

    fn close_tag(&mut self, name: &str, line: usize) -> Result<()> {
        match (name, self.env.take()) {
            ("environment", Some(open)) => {
                self.node.environments.push(open.block);
                Ok(())
            }
            ("environment", None) => {
                Err(self.error(line, "`</environment>` without an open environment"))
            }
            (other, env) => {
                self.env = env;
                self.warn(
                    line,
                    format!("ignoring unexpected closing tag `</{other}>`"),
                );
                Ok(())
            }
        }
    }

    fn required<'t>(&self, tag: &'t Tag, key: &str) -> Result<&'t str> {
        tag.attr(key).ok_or_else(|| {
            self.error(
                tag.line,
                format!("`<{}>` requires a `{key}` attribute", tag.name),
            )
        })
    }

    fn open_tag(&mut self, tag: Tag) -> Result<()> {
        let directive = match tag.name.as_str() {
            "environment" => return self.open_environment(&tag),
            "file" => {
                let filename = self.required(&tag, "name")?.to_string();
                let content = if tag.self_closing {
                    String::new()
                } else {
                    self.read_file_block(tag.line)?
                };
                Directive::AuxFilePart(AuxPart { filename, content })
            }
            "program" => Directive::Program(ProgramDecl {
                name: self.required(&tag, "name")?.to_string(),
                args: tag
                    .attr("args")
                    .map(|a| a.split_whitespace().map(str::to_string).collect())
                    .unwrap_or_default(),
            }),
            "var" => Directive::Var {
                name: self.required(&tag, "name")?.to_string(),
                value: self.required(&tag, "value")?.to_string(),
            },
            "diffline" => {
                let pattern = self.required(&tag, "expr")?;
                self.compile(pattern, tag.line)?;
                Directive::Rule(ComparisonRule::line(pattern))
            }
            "diffnumber" => {
                let pattern = self.required(&tag, "expr")?;
                let groups = self.compile(pattern, tag.line)?.captures_len() - 1;
                if groups != 1 {
                    return Err(self.error(
                        tag.line,
                        format!("diffnumber expression /{pattern}/ must have exactly one capture group, found {groups}"),
                    ));
                }
                let raw = self.required(&tag, "tolerance")?;
                let tolerance = parse_tolerance(raw).ok_or_else(|| {
                    self.error(
                        tag.line,
                        format!("invalid tolerance `{raw}` (expected a non-negative percentage)"),
                    )
                })?;
                Directive::Rule(ComparisonRule::number(pattern, tolerance))
            }
            "options" => Directive::Options {
                command: self.required(&tag, "command")?.to_string(),
                value: self.required(&tag, "value")?.to_string(),
            },
            "config" => Directive::Config {
                name: self.required(&tag, "name")?.to_string(),
                value: self.required(&tag, "value")?.to_string(),
            },
            "oval" => Directive::Version(self.required(&tag, "version")?.to_string()),
            other => {
                self.warn(tag.line, format!("ignoring unknown tag `<{other}>`"));
                return Ok(());
            }
        };

        match &mut self.env {
            Some(open) => match directive {
                Directive::Options { .. } | Directive::Config { .. } | Directive::Version(_) => {
                    let name = tag.name.clone();
                    self.warn(
                        tag.line,
                        format!("ignoring `<{name}>` inside an environment (top level only)"),
                    );
                }
                d => open.block.directives.push(d),
            },
            None => self.node.directives.push(directive),
        }
        Ok(())
    }

    fn open_environment(&mut self, tag: &Tag) -> Result<()> {
        if let Some(open) = &self.env {
            return Err(self.error(
                tag.line,
                format!(
                    "nested environment inside `{}` (opened at line {})",
                    open.block.name, open.line
                ),
            ));
        }
        let name = self.required(tag, "name")?.to_string();
        if self.node.environment(&name).is_some() {
            return Err(self.error(tag.line, format!("duplicate environment `{name}`")));
        }
        let block = EnvironmentBlock {
            name,
            directives: Vec::new(),
        };
        if tag.self_closing {
            self.node.environments.push(block);
        } else {
            self.env = Some(OpenEnv {
                block,
                line: tag.line,
            });
        }
        Ok(())
    }

    fn read_file_block(&mut self, open_line: usize) -> Result<String> {
        let start = self.pos;
        let end = self.text[start..]
            .find(FILE_CLOSE)
            .map(|i| start + i)
            .ok_or_else(|| {
                self.error(open_line, "unterminated block `<file>`: missing `</file>`")
            })?;
        let content = dedent_block(&self.text[start..end]);
        self.advance(end + FILE_CLOSE.len());
        Ok(content)
    }

    fn compile(&self, pattern: &str, line: usize) -> Result<Regex> {
        Regex::new(pattern).map_err(|e| {
            self.error(
                line,
                format!(
                    "unsupported regular expression /{pattern}/: {}",
                    first_line(&e.to_string())
                ),
            )
        })
    }
}

fn first_line(s: &str) -> &str {
    s.lines().find(|l| !l.trim().is_empty()).unwrap_or(s).trim()
}

fn parse_attrs(mut s: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut attrs = Vec::new();
    loop {
        s = s.trim_start();
        if s.is_empty() {
            return Ok(attrs);
        }
        let key_len = s
            .find(|c: char| c.is_whitespace() || c == '=')
            .unwrap_or(s.len());
        let key = &s[..key_len];
        if key.starts_with(['"', '\'']) {
            return Err(format!("stray quoted text {key}"));
        }
        s = s[key_len..].trim_start();
        let Some(after_eq) = s.strip_prefix('=') else {
            attrs.push((key.to_string(), String::new()));
            continue;
        };
        s = after_eq.trim_start();
        let value;
        match s.chars().next() {
            Some(q @ ('"' | '\'')) => {
                let close = s[1..]
                    .find(q)
                    .ok_or_else(|| format!("unterminated value for `{key}`"))?;
                value = &s[1..1 + close];
                s = &s[close + 2..];
            }
            Some(_) => {
                let len = s.find(char::is_whitespace).unwrap_or(s.len());
                value = &s[..len];
                s = &s[len..];
            }
            None => return Err(format!("missing value for `{key}`")),
        }
        attrs.push((key.to_string(), value.to_string()));
    }
}

/// Accepts `5`, `5%`, `5.0%`; always a percentage.
pub(crate) fn parse_tolerance(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    let number = raw.strip_suffix('%').unwrap_or(raw).trim_end();
    let value: f64 = number.parse().ok()?;
    (value.is_finite() && value >= 0.0).then_some(value)
}

/// Drops the blank remainder of the opening-tag line and the blank indent
/// before the closing tag, then removes the common indentation.
fn dedent_block(raw: &str) -> String {
    let mut lines: Vec<&str> = raw.split('\n').collect();
    if lines.len() > 1 && lines[0].trim().is_empty() {
        lines.remove(0);
    }
    if lines.len() > 1 && lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| {
            if l.len() >= indent {
                &l[indent..]
            } else {
                l.trim_start()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigNode {
    /// Renders the node back to OvalFile syntax. Parsing the result yields
    /// an equal node (same source path aside).
    pub fn to_ovalfile(&self) -> String {
        let mut out = String::new();
        for d in &self.directives {
            write_directive(&mut out, d, "");
        }
        for env in &self.environments {
            let _ = writeln!(out, "<environment name={}>", quote(&env.name));
            for d in &env.directives {
                write_directive(&mut out, d, "  ");
            }
            out.push_str("</environment>\n");
        }
        out
    }
}

fn quote(value: &str) -> String {
    if value.contains('"') {
        format!("'{value}'")
    } else {
        format!("\"{value}\"")
    }
}

fn write_directive(out: &mut String, d: &Directive, indent: &str) {
    let _ = match d {
        Directive::Program(p) if p.args.is_empty() => {
            writeln!(out, "{indent}<program name={}>", quote(&p.name))
        }
        Directive::Program(p) => writeln!(
            out,
            "{indent}<program name={} args={}>",
            quote(&p.name),
            quote(&p.args.join(" "))
        ),
        Directive::Var { name, value } => {
            writeln!(
                out,
                "{indent}<var name={} value={}>",
                quote(name),
                quote(value)
            )
        }
        Directive::AuxFilePart(part) => writeln!(
            out,
            "{indent}<file name={}>\n{}\n</file>",
            quote(&part.filename),
            part.content
        ),
        Directive::Rule(ComparisonRule::Line { pattern }) => {
            writeln!(out, "{indent}<diffline expr={}>", quote(pattern))
        }
        Directive::Rule(ComparisonRule::Number {
            pattern,
            tolerance_percent,
        }) => writeln!(
            out,
            "{indent}<diffnumber expr={} tolerance=\"{tolerance_percent}%\">",
            quote(pattern)
        ),
        Directive::Options { command, value } => writeln!(
            out,
            "{indent}<options command={} value={}>",
            quote(command),
            quote(value)
        ),
        Directive::Config { name, value } => {
            writeln!(
                out,
                "{indent}<config name={} value={}>",
                quote(name),
                quote(value)
            )
        }
        Directive::Version(v) => writeln!(out, "{indent}<oval version={}>", quote(v)),
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ConfigNode {
        parse_ovalfile(text, Path::new("OvalFile")).unwrap().0
    }

    fn parse_err(text: &str) -> (usize, String) {
        match parse_ovalfile(text, Path::new("OvalFile")) {
            Err(OvalError::Parse { line, message, .. }) => (line, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    const RUNTIME_EXAMPLE: &str = r#"<var name="FEDERATION" value="cmsuf01">
<environment name="pt15">
  <var name="DATASET" value="eg_ele_pt15">
  <program name="Clusters.cpp">
  <program name="Electrons.cpp"
     args="-geo detailed">
</environment>
<environment name="flow">
  <var name="DATASET" value="jm_minbias">
  <program name="EnergyFlow.cpp">
</environment>
"#;

    #[test]
    fn single_program() {
        let node = parse(r#"<program name="Clusters.cpp">"#);
        assert_eq!(
            node.directives,
            vec![Directive::Program(ProgramDecl::new("Clusters.cpp"))]
        );
        assert!(node.environments.is_empty());
    }

    #[test]
    fn empty_document() {
        let node = parse("");
        assert!(node.directives.is_empty());
        assert!(node.environments.is_empty());
    }

    #[test]
    fn runtime_example_structure() {
        let node = parse(RUNTIME_EXAMPLE);
        assert_eq!(
            node.directives,
            vec![Directive::Var {
                name: "FEDERATION".into(),
                value: "cmsuf01".into()
            }]
        );
        assert_eq!(node.environments.len(), 2);
        let pt15 = node.environment("pt15").unwrap();
        assert_eq!(pt15.directives.len(), 3);
        assert_eq!(
            pt15.directives[2],
            Directive::Program(ProgramDecl {
                name: "Electrons.cpp".into(),
                args: vec!["-geo".into(), "detailed".into()],
            })
        );
        let flow = node.environment("flow").unwrap();
        assert!(
            matches!(&flow.directives[0], Directive::Var { value, .. } if value == "jm_minbias")
        );
        assert!(matches!(&flow.directives[1], Directive::Program(p) if p.name == "EnergyFlow.cpp"));
    }

    #[test]
    fn file_block_is_verbatim_and_dedented() {
        let node = parse(
            "<file name=\".orcarc\">\n  GoPersistent = 1\n  MaxEvents = 500\n  Random:Seeds = 0 3\n</file>\n",
        );
        assert_eq!(
            node.directives,
            vec![Directive::AuxFilePart(AuxPart {
                filename: ".orcarc".into(),
                content: "GoPersistent = 1\nMaxEvents = 500\nRandom:Seeds = 0 3".into(),
            })]
        );
    }

    #[test]
    fn file_block_does_not_interpret_tags() {
        let node = parse("<file name=\"x\">\n<program name=\"a\">\n</file>");
        assert_eq!(node.directives.len(), 1);
        assert!(
            matches!(&node.directives[0], Directive::AuxFilePart(p) if p.content == "<program name=\"a\">")
        );
    }

    #[test]
    fn multi_line_rule_tag() {
        let node = parse("<diffline expr=\"^OVAL:\">\n<diffnumber expr=\"^energy: (.*)$\"\n            tolerance=\"5%\">\n");
        assert_eq!(
            node.directives,
            vec![
                Directive::Rule(ComparisonRule::line("^OVAL:")),
                Directive::Rule(ComparisonRule::number("^energy: (.*)$", 5.0)),
            ]
        );
    }

    #[test]
    fn tolerance_forms() {
        assert_eq!(parse_tolerance("5"), Some(5.0));
        assert_eq!(parse_tolerance("5%"), Some(5.0));
        assert_eq!(parse_tolerance("5.0%"), Some(5.0));
        assert_eq!(parse_tolerance("0"), Some(0.0));
        assert_eq!(parse_tolerance("-1"), None);
        assert_eq!(parse_tolerance("abc"), None);
        assert_eq!(parse_tolerance("inf"), None);
    }

    #[test]
    fn quoted_gt_does_not_close_tag() {
        let node = parse(r#"<diffline expr="^a>b">"#);
        assert_eq!(
            node.directives,
            vec![Directive::Rule(ComparisonRule::line("^a>b"))]
        );
    }

    #[test]
    fn unknown_tag_warns() {
        let (node, warnings) = parse_ovalfile(
            "<frobnicate x=\"1\">\n<program name=\"a\">",
            Path::new("OvalFile"),
        )
        .unwrap();
        assert_eq!(node.directives.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].0.contains("OvalFile:1"));
        assert!(warnings[0].0.contains("frobnicate"));
    }

    #[test]
    fn missing_gt_is_an_error_with_line() {
        let (line, msg) = parse_err("<program name=\"Clusters.cpp\">\n<program name=\"Electrons.cpp\"\n<program name=\"EnergyFlow.cpp\">\n");
        assert_eq!(line, 2);
        assert!(msg.contains("no closing"), "{msg}");

        let (line, _) = parse_err("\n\n<program name=\"x\"");
        assert_eq!(line, 3);
    }

    #[test]
    fn unterminated_blocks() {
        let (line, msg) = parse_err("<environment name=\"a\">\n<program name=\"x\">\n");
        assert_eq!(line, 1);
        assert!(msg.contains("unterminated"));
        let (line, msg) = parse_err("\n<file name=\"a\">\nstuff\n");
        assert_eq!(line, 2);
        assert!(msg.contains("</file>"));
    }

    #[test]
    fn duplicate_and_nested_environments() {
        let (line, msg) = parse_err(
            "<environment name=\"a\">\n</environment>\n<environment name=\"a\">\n</environment>",
        );
        assert_eq!(line, 3);
        assert!(msg.contains("duplicate"));
        let (line, msg) = parse_err(
            "<environment name=\"a\">\n<environment name=\"b\">\n</environment>\n</environment>",
        );
        assert_eq!(line, 2);
        assert!(msg.contains("nested"));
    }

    #[test]
    fn number_rule_needs_one_group() {
        let (_, msg) = parse_err("<diffnumber expr=\"^energy: .*$\" tolerance=\"5\">");
        assert!(msg.contains("exactly one capture group"), "{msg}");
        let (_, msg) = parse_err("<diffnumber expr=\"^(a) (b)$\" tolerance=\"5\">");
        assert!(msg.contains("found 2"), "{msg}");
        // non-capturing groups do not count
        parse("<diffnumber expr=\"^(?:x|y) (\\S+)$\" tolerance=\"1\">");
    }

    #[test]
    fn exotic_regex_is_rejected() {
        let (_, msg) = parse_err("<diffline expr=\"(?<=a)b\">");
        assert!(msg.contains("unsupported regular expression"), "{msg}");
        let (_, msg) = parse_err("<diffline expr=\"(a)\\1\">");
        assert!(msg.contains("unsupported"), "{msg}");
    }

    #[test]
    fn site_directives() {
        let node = parse(
            "<options command=\"expr\" value=\"-v\">\n<config name=\"build tool\" value=\"scram\">\n<oval version=\"2_1_0\">",
        );
        assert_eq!(
            node.directives,
            vec![
                Directive::Options {
                    command: "expr".into(),
                    value: "-v".into()
                },
                Directive::Config {
                    name: "build tool".into(),
                    value: "scram".into()
                },
                Directive::Version("2_1_0".into()),
            ]
        );
    }

    #[test]
    fn comments_and_self_closing_tags() {
        let node = parse("<!-- <program name=\"hidden\"> -->\n<program name=\"a\" />");
        assert_eq!(
            node.directives,
            vec![Directive::Program(ProgramDecl::new("a"))]
        );
    }

    #[test]
    fn serialize_runtime_example() {
        let node = parse(RUNTIME_EXAMPLE);
        let again = parse(&node.to_ovalfile());
        assert_eq!(node, again);
    }
}
