//! Command-line front end.
//!
//! `oval <command> [targets...] [--no-recurse] [--clean-aux] [--strict]`
//!
//! Exit status: 0 when everything is clean, 1 when differences were found,
//! 2 on build/run failures, configuration errors and usage errors.

use std::collections::HashMap;
use std::env;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use clap::Parser;
use walkdir::WalkDir;

use crate::adapters::{discover_adapter, resolve_interface_map, Interface, ToolAdapter};
use crate::config::target_stem;
use crate::config::{
    merge_configs, parse_ovalfile, resolve_program_specs, ConfigNode, Directive, EffectiveConfig,
    ProgramKind, ProgramSpec, Warning, OVALFILE,
};
use crate::error::{OvalError, Result};
use crate::executor::{
    do_build, do_diff, do_run, do_validate, remove_aux_files, DiffStatus, Phase,
};
use crate::site::{
    builtin_version, delegate, determine_version, load_site_defaults, Dispatch, SiteContext,
    ENV_DISPATCHED, ENV_OVAL_DIR, ENV_OVAL_FLAVOR, ENV_OVAL_VERSION,
};

pub const BUILTIN_COMMANDS: &[&str] = &["build", "run", "validate", "diff", "prod"];

pub const MAIL_INSTRUCTION_KEY: &str = "mail instruction";
pub const WATCHERS_KEY: &str = "watchers";
/// Colon-separated OvalFile paths exported to site commands.
pub const ENV_CONFIG_FILES: &str = "OVAL_CONFIG_FILES";

const USAGE: &str = "usage: oval <command> [targets...] [--no-recurse] [--clean-aux] [--strict]";

#[derive(Debug, Parser)]
#[command(name = "oval", no_binary_name = true, disable_version_flag = true)]
struct CommandArgs {
    /// Programs to act on (default: all declared programs)
    targets: Vec<String>,
    /// Stay in the current directory
    #[arg(long)]
    no_recurse: bool,
    /// Remove auxiliary files after each run
    #[arg(long)]
    clean_aux: bool,
    /// Warn about programs skipped by `prod` for lack of a reference
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub clean_aux: bool,
    pub no_recurse: bool,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub command: String,
    pub targets: Vec<String>,
    pub flags: Flags,
    pub start_dir: PathBuf,
}

/// Session outcome, ordered so that the worst one is the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Status {
    #[default]
    Clean,
    Diffs,
    Failures,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Clean => 0,
            Status::Diffs => 1,
            Status::Failures => 2,
        }
    }
}

/// One console line: `  Electrons: build, run, diff (DIFFS).`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramReport {
    pub name: String,
    pub phases: Vec<&'static str>,
    pub tag: Option<&'static str>,
    pub status: Status,
}

impl ProgramReport {
    fn new(name: &str) -> Self {
        ProgramReport {
            name: name.to_string(),
            phases: Vec::new(),
            tag: None,
            status: Status::Clean,
        }
    }

    fn fail(mut self, phase: &'static str) -> Self {
        self.phases.push(phase);
        self.tag = Some("FAILED");
        self.status = Status::Failures;
        self
    }
}

impl fmt::Display for ProgramReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "  {}: {}", self.name, self.phases.join(", "))?;
        if let Some(tag) = self.tag {
            write!(f, " ({tag})")?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectoryReport {
    /// Path relative to the start directory; empty for the start directory.
    pub relative_path: PathBuf,
    pub programs: Vec<ProgramReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub directories: Vec<DirectoryReport>,
    pub overall: Status,
}

impl SessionSummary {
    pub fn push(&mut self, report: DirectoryReport) {
        for p in &report.programs {
            self.overall = self.overall.max(p.status);
        }
        self.directories.push(report);
    }

    pub fn mark_failure(&mut self) {
        self.overall = Status::Failures;
    }
}

impl fmt::Display for DirectoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.programs.is_empty() {
            return Ok(());
        }
        if !self.relative_path.as_os_str().is_empty() {
            writeln!(f, "{}:", self.relative_path.display())?;
        }
        for p in &self.programs {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

impl fmt::Display for SessionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.directories {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

fn warn(w: impl fmt::Display) {
    eprintln!("oval: warning: {w}");
}

fn report_error(e: impl fmt::Display) {
    eprintln!("oval: error: {e}");
}

/// Adapters in force for one directory.
#[derive(Debug, Clone)]
pub struct Tools {
    pub build: ToolAdapter,
    pub run: ToolAdapter,
}

impl Tools {
    pub fn resolve(effective: &EffectiveConfig, ctx: Option<&SiteContext>) -> Result<Tools> {
        let map = resolve_interface_map(effective);
        let build = discover_adapter(&map.build_tool, ctx)?;
        build.require(Interface::Build)?;
        let run = discover_adapter(&map.run_tool, ctx)?;
        run.require(Interface::Run)?;
        Ok(Tools { build, run })
    }
}

/// Build, run and diff every program that has a reference.
pub fn cmd_prod(
    specs: &[ProgramSpec],
    tools: &Tools,
    workdir: &Path,
    flags: Flags,
) -> Vec<ProgramReport> {
    let mut reports = Vec::new();
    for spec in specs {
        if !workdir.join(spec.ref_file()).is_file() {
            if flags.strict {
                warn(format!(
                    "{}: skipping `{}`, no reference {}",
                    workdir.display(),
                    spec.log_basename,
                    spec.ref_file()
                ));
            }
            continue;
        }
        reports.push(prod_one(spec, tools, workdir, flags));
    }
    reports
}

fn prod_one(spec: &ProgramSpec, tools: &Tools, workdir: &Path, flags: Flags) -> ProgramReport {
    let mut report = ProgramReport::new(&spec.log_basename);

    if spec.kind == ProgramKind::Source {
        match do_build(spec, &tools.build, workdir) {
            Ok(Phase::Failed) => return report.fail("build"),
            Err(e) => {
                report_error(e);
                return report.fail("build");
            }
            Ok(_) => report.phases.push("build"),
        }
    }

    let ran = do_run(spec, &tools.run, workdir);
    if flags.clean_aux {
        if let Err(e) = remove_aux_files(spec, workdir) {
            warn(e);
        }
    }
    match ran {
        Ok(Phase::Failed) => return report.fail("run"),
        Err(e) => {
            report_error(e);
            return report.fail("run");
        }
        Ok(_) => report.phases.push("run"),
    }

    match do_diff(spec, workdir) {
        Ok((status, warnings)) => {
            warnings.into_iter().for_each(warn);
            report.phases.push("diff");
            if status == DiffStatus::Diffs {
                report.tag = Some("DIFFS");
                report.status = Status::Diffs;
            }
            report
        }
        Err(e) => {
            report_error(e);
            report.fail("diff")
        }
    }
}

fn cmd_single(
    command: &str,
    spec: &ProgramSpec,
    tools: Option<&Tools>,
    workdir: &Path,
    flags: Flags,
) -> ProgramReport {
    let report = ProgramReport::new(&spec.log_basename);
    let tools = || tools.expect("tools are resolved for build and run");
    let phase = |r: Result<Phase>| match r {
        Ok(p) => p,
        Err(e) => {
            report_error(e);
            Phase::Failed
        }
    };
    match command {
        "build" => match phase(do_build(spec, &tools().build, workdir)) {
            Phase::Failed => report.fail("build"),
            Phase::Skipped => ProgramReport {
                phases: vec!["build"],
                tag: Some("SKIPPED"),
                ..report
            },
            Phase::Ok => ProgramReport {
                phases: vec!["build"],
                ..report
            },
        },
        "run" => {
            let ran = phase(do_run(spec, &tools().run, workdir));
            if flags.clean_aux {
                if let Err(e) = remove_aux_files(spec, workdir) {
                    warn(e);
                }
            }
            match ran {
                Phase::Failed => report.fail("run"),
                _ => ProgramReport {
                    phases: vec!["run"],
                    ..report
                },
            }
        }
        "diff" => match do_diff(spec, workdir) {
            Ok((status, warnings)) => {
                warnings.into_iter().for_each(warn);
                let (tag, status) = match status {
                    DiffStatus::Diffs => (Some("DIFFS"), Status::Diffs),
                    DiffStatus::NoReference => (Some("NO REFERENCE"), Status::Clean),
                    _ => (None, Status::Clean),
                };
                ProgramReport {
                    phases: vec!["diff"],
                    tag,
                    status,
                    ..report
                }
            }
            Err(e) => {
                report_error(e);
                report.fail("diff")
            }
        },
        "validate" => match do_validate(spec, workdir) {
            Ok(()) => ProgramReport {
                phases: vec!["validate"],
                ..report
            },
            Err(e) => {
                report_error(e);
                report.fail("validate")
            }
        },
        other => unreachable!("not a built-in command: {other}"),
    }
}

/// Runs a built-in command over the specs of one directory.
pub fn run_command(
    command: &str,
    specs: &[ProgramSpec],
    tools: Option<&Tools>,
    workdir: &Path,
    flags: Flags,
) -> Vec<ProgramReport> {
    if command == "prod" {
        let tools = tools.expect("tools are resolved for prod");
        return cmd_prod(specs, tools, workdir, flags);
    }
    specs
        .iter()
        .map(|spec| cmd_single(command, spec, tools, workdir, flags))
        .collect()
}

/// Result of [`notify_watchers`].
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Notification {
    pub delivered: usize,
    pub warnings: Vec<Warning>,
}

/// Pipes the summary text to the configured mail instruction, once per
/// watcher, with the watcher's address appended as last argument. Does
/// nothing unless both `mail instruction` and `watchers` are configured.
pub fn notify_watchers(summary: &str, effective: &EffectiveConfig) -> Notification {
    let mut result = Notification::default();
    let (Some(instruction), Some(watchers)) = (
        effective.config(MAIL_INSTRUCTION_KEY),
        effective.config(WATCHERS_KEY),
    ) else {
        return result;
    };
    let Some(argv) = shlex::split(instruction).filter(|a| !a.is_empty()) else {
        result.warnings.push(Warning(format!(
            "cannot parse mail instruction `{instruction}`"
        )));
        return result;
    };

    for watcher in watchers.split_whitespace() {
        let outcome = Command::new(&argv[0])
            .args(&argv[1..])
            .arg(watcher)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .and_then(|mut child| {
                if let Some(mut stdin) = child.stdin.take() {
                    // A command that ignores its input may close the pipe early.
                    let _ = stdin.write_all(summary.as_bytes());
                }
                child.wait()
            });
        match outcome {
            Ok(status) if status.success() => result.delivered += 1,
            Ok(status) => result.warnings.push(Warning(format!(
                "mail instruction for {watcher} exited with {status}"
            ))),
            Err(e) => result.warnings.push(Warning(format!(
                "cannot run mail instruction for {watcher}: {e}"
            ))),
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteCommand {
    pub name: String,
    pub path: PathBuf,
}

/// Executables found in the `Commands` directories of the site, most
/// specialized directory first; the first command of a given name wins.
pub fn discover_site_commands(ctx: Option<&SiteContext>) -> (Vec<SiteCommand>, Vec<Warning>) {
    let mut commands: Vec<SiteCommand> = Vec::new();
    let mut warnings = Vec::new();
    let Some(ctx) = ctx else {
        return (commands, warnings);
    };
    let mut dirs = vec![ctx.site_dir.join(&ctx.version).join("Commands")];
    if let Some(flavor) = &ctx.flavor {
        dirs.push(ctx.site_dir.join(flavor).join("Commands"));
    }
    dirs.push(ctx.site_dir.join("Commands"));
    dirs.push(
        ctx.oval_dir
            .join(&ctx.version)
            .join("share")
            .join("Commands"),
    );

    for dir in dirs {
        let Ok(entries) = fs::read_dir(&dir) else {
            continue;
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for path in paths {
            if !crate::config::is_executable_file(&path) {
                warnings.push(Warning(format!(
                    "ignoring non-executable site command {}",
                    path.display()
                )));
                continue;
            }
            let file_name = path.file_name().unwrap_or_default().to_string_lossy();
            let name = target_stem(&file_name).to_string();
            if !commands.iter().any(|c| c.name == name) {
                commands.push(SiteCommand { name, path });
            }
        }
    }
    (commands, warnings)
}

/// Directories holding an OvalFile from the root of the unbroken chain
/// above `dir` down to `dir` itself.
pub fn ovalfile_chain(dir: &Path) -> Vec<PathBuf> {
    let mut chain = Vec::new();
    let mut current = Some(dir);
    while let Some(d) = current {
        if !d.join(OVALFILE).is_file() {
            break;
        }
        chain.push(d.to_path_buf());
        current = d.parent();
    }
    chain.reverse();
    chain
}

/// `start` followed by every directory below it holding an OvalFile,
/// in path order. Descent stops at a directory without one, as the
/// inherited configuration would not reach past it.
pub fn directories_to_visit(start: &Path, no_recurse: bool) -> Vec<PathBuf> {
    let mut dirs = vec![start.to_path_buf()];
    if no_recurse {
        return dirs;
    }
    let mut below: Vec<PathBuf> = WalkDir::new(start)
        .min_depth(1)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0 || (e.file_type().is_dir() && e.path().join(OVALFILE).is_file())
        })
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .collect();
    below.sort();
    dirs.extend(below);
    dirs
}

/// Parsed OvalFiles and site defaults shared by every directory of one
/// invocation.
pub struct Workspace {
    site_defaults: ConfigNode,
    parsed: HashMap<PathBuf, ConfigNode>,
}

impl Workspace {
    pub fn new(site_defaults: ConfigNode) -> Self {
        Workspace {
            site_defaults,
            parsed: HashMap::new(),
        }
    }

    fn node(&mut self, dir: &Path) -> Result<ConfigNode> {
        if let Some(node) = self.parsed.get(dir) {
            return Ok(node.clone());
        }
        let path = dir.join(OVALFILE);
        let text = fs::read_to_string(&path).map_err(|e| OvalError::io(&path, e))?;
        let (node, warnings) = parse_ovalfile(&text, &path)?;
        warnings.into_iter().for_each(warn);
        self.parsed.insert(dir.to_path_buf(), node.clone());
        Ok(node)
    }

    /// Project OvalFiles governing `dir`, root-most first.
    pub fn project_chain(&mut self, dir: &Path) -> Result<Vec<ConfigNode>> {
        ovalfile_chain(dir).iter().map(|d| self.node(d)).collect()
    }

    pub fn effective_for(&mut self, dir: &Path) -> Result<EffectiveConfig> {
        let mut chain = self.project_chain(dir)?;
        let leaf = if dir.join(OVALFILE).is_file() {
            chain.pop().expect("dir heads its own chain")
        } else {
            ConfigNode::empty(dir.join(OVALFILE))
        };
        let mut ancestors = vec![self.site_defaults.clone()];
        ancestors.extend(chain);
        Ok(merge_configs(&ancestors, &leaf))
    }
}

/// The version requested by the project chain: its root-most
/// `<oval version>`. Later declarations only produce warnings.
pub fn requested_version(chain: &[ConfigNode]) -> (Option<String>, Vec<Warning>) {
    let mut requested: Option<String> = None;
    let mut warnings = Vec::new();
    for node in chain {
        let versions = node.directives.iter().filter_map(|d| match d {
            Directive::Version(v) => Some(v),
            _ => None,
        });
        for v in versions {
            match &requested {
                None => requested = Some(v.clone()),
                Some(first) => warnings.push(Warning(format!(
                    "{}: ignoring <oval version=\"{v}\">, version `{first}` is set by an enclosing OvalFile",
                    node.source_path.display()
                ))),
            }
        }
    }
    (requested, warnings)
}

/// Entry point: returns the process exit status.
pub fn dispatch(argv: Vec<OsString>) -> i32 {
    match try_dispatch(argv) {
        Ok(code) => code,
        Err(e) => {
            report_error(e);
            2
        }
    }
}

fn try_dispatch(argv: Vec<OsString>) -> Result<i32> {
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(command) = args.first().cloned() else {
        eprintln!("{USAGE}");
        return Ok(2);
    };
    match command.as_str() {
        "-h" | "--help" | "help" => {
            println!("{USAGE}\n\ncommands: {}", BUILTIN_COMMANDS.join(", "));
            return Ok(0);
        }
        "-V" | "--version" => {
            println!("oval {}", builtin_version());
            return Ok(0);
        }
        _ => {}
    }

    let start_dir = env::current_dir().map_err(|e| OvalError::io(".", e))?;
    let mut workspace = Workspace::new(ConfigNode::default());

    let chain = workspace.project_chain(&start_dir)?;
    let (file_version, warnings) = requested_version(&chain);
    warnings.into_iter().for_each(warn);
    let env_version = env::var(ENV_OVAL_VERSION).ok();
    let oval_dir = env::var_os(ENV_OVAL_DIR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let dispatched = env::var(ENV_DISPATCHED).is_ok_and(|v| v == "1");
    let version = builtin_version();
    if let Dispatch::DelegateTo(path) = determine_version(
        &version,
        env_version.as_deref(),
        file_version.as_deref(),
        oval_dir.as_deref(),
        "oval",
        dispatched,
    )? {
        return delegate(&path, &argv[1..]);
    }

    let ctx = SiteContext::from_env(&version);
    let (site_defaults, warnings) = load_site_defaults(ctx.as_ref())?;
    warnings.into_iter().for_each(warn);
    workspace.site_defaults = site_defaults;
    let start_effective = workspace.effective_for(&start_dir)?;

    let mut rest: Vec<String> = args[1..].to_vec();
    if let Some(options) = start_effective.options_for(&command) {
        let forced = shlex::split(options).ok_or_else(|| {
            OvalError::Usage(format!("cannot parse options `{options}` for `{command}`"))
        })?;
        rest.splice(0..0, forced);
    }

    let (site_commands, warnings) = discover_site_commands(ctx.as_ref());
    warnings.into_iter().for_each(warn);
    if let Some(site_command) = site_commands.iter().find(|c| c.name == command) {
        if BUILTIN_COMMANDS.contains(&command.as_str()) {
            warn(format!(
                "site command {} overrides built-in `{command}`",
                site_command.path.display()
            ));
        }
        return run_site_command(
            site_command,
            &rest,
            ctx.as_ref(),
            &start_effective,
            &start_dir,
        );
    }

    if !BUILTIN_COMMANDS.contains(&command.as_str()) {
        let mut available: Vec<String> = BUILTIN_COMMANDS.iter().map(|c| c.to_string()).collect();
        available.extend(site_commands.into_iter().map(|c| c.name));
        return Err(OvalError::UnknownCommand { command, available });
    }

    let parsed = match CommandArgs::try_parse_from(&rest) {
        Ok(parsed) => parsed,
        Err(e) if e.kind() == clap::error::ErrorKind::DisplayHelp => {
            print!("{e}");
            return Ok(0);
        }
        Err(e) => return Err(OvalError::Usage(e.to_string().trim_end().to_string())),
    };
    let invocation = Invocation {
        command,
        targets: parsed.targets,
        flags: Flags {
            clean_aux: parsed.clean_aux,
            no_recurse: parsed.no_recurse,
            strict: parsed.strict,
        },
        start_dir,
    };

    let summary = run_invocation(&invocation, &mut workspace, ctx.as_ref())?;
    if invocation.command == "prod" {
        let notification = notify_watchers(&summary.to_string(), &start_effective);
        notification.warnings.into_iter().for_each(warn);
    }
    Ok(summary.overall.exit_code())
}

/// Runs a built-in command over the start directory and, unless told
/// otherwise, every directory below it that holds an OvalFile.
pub fn run_invocation(
    invocation: &Invocation,
    workspace: &mut Workspace,
    ctx: Option<&SiteContext>,
) -> Result<SessionSummary> {
    let mut plan = Vec::new();
    for dir in directories_to_visit(&invocation.start_dir, invocation.flags.no_recurse) {
        let effective = workspace.effective_for(&dir)?;
        let (mut specs, warnings) = resolve_program_specs(&effective, &dir);
        warnings.into_iter().for_each(warn);
        if !invocation.targets.is_empty() {
            specs.retain(|s| invocation.targets.iter().any(|t| s.matches_target(t)));
        }
        plan.push((dir, effective, specs));
    }

    for target in &invocation.targets {
        let declared = plan
            .iter()
            .any(|(_, _, specs)| specs.iter().any(|s| s.matches_target(target)));
        if !declared {
            return Err(OvalError::UnknownTarget(target.clone()));
        }
    }

    let needs_tools = matches!(invocation.command.as_str(), "build" | "run" | "prod");
    let mut summary = SessionSummary::default();
    for (dir, effective, specs) in plan {
        if specs.is_empty() {
            continue;
        }
        let tools = if needs_tools {
            Some(Tools::resolve(&effective, ctx)?)
        } else {
            None
        };
        let programs = run_command(
            &invocation.command,
            &specs,
            tools.as_ref(),
            &dir,
            invocation.flags,
        );
        let report = DirectoryReport {
            relative_path: dir
                .strip_prefix(&invocation.start_dir)
                .unwrap_or(&dir)
                .to_path_buf(),
            programs,
        };
        print!("{report}");
        let _ = std::io::stdout().flush();
        summary.push(report);
    }
    Ok(summary)
}

fn run_site_command(
    command: &SiteCommand,
    args: &[String],
    ctx: Option<&SiteContext>,
    effective: &EffectiveConfig,
    start_dir: &Path,
) -> Result<i32> {
    let config_files = effective
        .sources
        .iter()
        .filter(|p| p.is_file())
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(":");
    let mut cmd = Command::new(&command.path);
    cmd.args(args)
        .current_dir(start_dir)
        .env(ENV_CONFIG_FILES, config_files);
    if let Some(ctx) = ctx {
        cmd.env(ENV_OVAL_DIR, &ctx.oval_dir)
            .env(ENV_OVAL_VERSION, &ctx.version)
            .env(ENV_OVAL_FLAVOR, ctx.flavor.as_deref().unwrap_or(""));
    }
    let status = cmd.status().map_err(|e| OvalError::io(&command.path, e))?;
    Ok(crate::adapters::exit_code(status))
}
