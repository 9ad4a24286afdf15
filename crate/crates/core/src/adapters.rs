//! Tool adapters: the bridge between the abstract `build`/`run`
//! interfaces and the concrete tools a site uses.
//!
//! An adapter on disk is any executable speaking this protocol:
//!
//! * `argv[1]` is `build` or `run`,
//! * `argv[2]` is the target stem (`Electrons` for `Electrons.cpp`),
//! * `argv[3..]` are the program arguments (`run` only),
//! * the spec's variables are exported, plus `OVAL_TARGET` and
//!   `OVAL_ENVIRONMENT`,
//! * exit status 0 means success; stdout and stderr are captured together.
//!
//! Two adapters are built in: `make` (build only) and `oval`, which
//! builds nothing and runs the program directly.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};

use crate::config::{EffectiveConfig, ProgramKind, ProgramSpec};
use crate::error::{OvalError, Result};
use crate::site::SiteContext;

pub const BUILD_TOOL_KEY: &str = "build tool";
pub const RUN_TOOL_KEY: &str = "run tool";
pub const DEFAULT_BUILD_TOOL: &str = "make";
pub const DEFAULT_RUN_TOOL: &str = "oval";

/// Exit status reported when a child process cannot be started at all.
pub const LAUNCH_FAILURE: i32 = 127;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interface {
    Build,
    Run,
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interface::Build => "build",
            Interface::Run => "run",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceMap {
    pub build_tool: String,
    pub run_tool: String,
}

impl Default for InterfaceMap {
    fn default() -> Self {
        InterfaceMap {
            build_tool: DEFAULT_BUILD_TOOL.into(),
            run_tool: DEFAULT_RUN_TOOL.into(),
        }
    }
}

pub fn resolve_interface_map(effective: &EffectiveConfig) -> InterfaceMap {
    let defaults = InterfaceMap::default();
    InterfaceMap {
        build_tool: effective
            .config(BUILD_TOOL_KEY)
            .map_or(defaults.build_tool, str::to_string),
        run_tool: effective
            .config(RUN_TOOL_KEY)
            .map_or(defaults.run_tool, str::to_string),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterLocation {
    BuiltIn,
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolAdapter {
    pub name: String,
    pub location: AdapterLocation,
    pub supported_interfaces: Vec<Interface>,
}

impl ToolAdapter {
    pub fn builtin(name: &str) -> Option<ToolAdapter> {
        let supported = match name {
            "make" => vec![Interface::Build],
            "oval" => vec![Interface::Build, Interface::Run],
            _ => return None,
        };
        Some(ToolAdapter {
            name: name.to_string(),
            location: AdapterLocation::BuiltIn,
            supported_interfaces: supported,
        })
    }

    pub fn is_builtin(&self) -> bool {
        self.location == AdapterLocation::BuiltIn
    }

    pub fn supports(&self, interface: Interface) -> bool {
        self.supported_interfaces.contains(&interface)
    }

    pub fn require(&self, interface: Interface) -> Result<()> {
        if self.supports(interface) {
            Ok(())
        } else {
            Err(OvalError::UnsupportedInterface {
                name: self.name.clone(),
                interface: interface.to_string(),
            })
        }
    }
}

/// On-disk locations probed for adapter `name`, in precedence order.
pub fn adapter_candidates(name: &str, ctx: Option<&SiteContext>) -> Vec<PathBuf> {
    let Some(ctx) = ctx else {
        return Vec::new();
    };
    let mut out = vec![ctx
        .site_dir
        .join(&ctx.version)
        .join("Interfaces")
        .join(name)];
    if let Some(flavor) = &ctx.flavor {
        out.push(ctx.site_dir.join(flavor).join("Interfaces").join(name));
    }
    out.push(ctx.site_dir.join("Interfaces").join(name));
    out.push(
        ctx.oval_dir
            .join(&ctx.version)
            .join("share")
            .join("Interfaces")
            .join(name),
    );
    out
}

/// Finds the adapter called `name`. Site adapters hide the shipped ones,
/// which hide the built-ins.
pub fn discover_adapter(name: &str, ctx: Option<&SiteContext>) -> Result<ToolAdapter> {
    let probed = adapter_candidates(name, ctx);
    if let Some(path) = probed.iter().find(|p| p.is_file()) {
        return Ok(ToolAdapter {
            name: name.to_string(),
            location: AdapterLocation::Path(path.clone()),
            supported_interfaces: vec![Interface::Build, Interface::Run],
        });
    }
    ToolAdapter::builtin(name).ok_or_else(|| OvalError::UnknownTool {
        name: name.to_string(),
        probed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutput {
    pub exit_status: i32,
    /// Standard output and standard error, interleaved as written.
    pub output: String,
    /// False when the process could not be started at all.
    pub launched: bool,
}

impl ProcessOutput {
    pub fn success(&self) -> bool {
        self.exit_status == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOutput {
    pub command_line: String,
    pub exit_status: i32,
    pub output: String,
}

/// A planned child process: the executable, the argv it sees (argv[0]
/// included) and the variables to export on top of the ambient ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Launch {
    pub program: PathBuf,
    pub argv: Vec<String>,
    pub env: Vec<(String, String)>,
}

impl Launch {
    pub fn command_line(&self) -> String {
        self.argv.join(" ")
    }
}

fn protocol_env(spec: &ProgramSpec) -> Vec<(String, String)> {
    let mut env = spec.variables.clone();
    env.push(("OVAL_TARGET".into(), spec.target.clone()));
    env.push((
        "OVAL_ENVIRONMENT".into(),
        spec.environment.clone().unwrap_or_default(),
    ));
    env
}

/// The build command for `spec`, or `None` when the adapter has nothing to do.
pub fn plan_build(adapter: &ToolAdapter, spec: &ProgramSpec) -> Option<Launch> {
    let stem = spec.stem().to_string();
    match &adapter.location {
        AdapterLocation::Path(path) => Some(Launch {
            program: path.clone(),
            argv: vec![path.display().to_string(), "build".into(), stem],
            env: protocol_env(spec),
        }),
        AdapterLocation::BuiltIn if adapter.name == "make" => Some(Launch {
            program: PathBuf::from("make"),
            argv: vec!["make".into(), stem],
            env: spec.variables.clone(),
        }),
        AdapterLocation::BuiltIn => None,
    }
}

pub fn plan_run(adapter: &ToolAdapter, spec: &ProgramSpec, workdir: &Path) -> Launch {
    match &adapter.location {
        AdapterLocation::Path(path) => {
            let mut argv = vec![
                path.display().to_string(),
                "run".into(),
                spec.stem().to_string(),
            ];
            argv.extend(spec.args.iter().cloned());
            Launch {
                program: path.clone(),
                argv,
                env: protocol_env(spec),
            }
        }
        AdapterLocation::BuiltIn => {
            let file = match spec.kind {
                ProgramKind::Source => spec.stem(),
                ProgramKind::Script | ProgramKind::Binary => spec.target.as_str(),
            };
            let mut argv = vec![format!("./{file}")];
            argv.extend(spec.args.iter().cloned());
            Launch {
                program: workdir.join(file),
                argv,
                env: spec.variables.clone(),
            }
        }
    }
}

pub fn adapter_build(adapter: &ToolAdapter, spec: &ProgramSpec, workdir: &Path) -> BuildOutput {
    match plan_build(adapter, spec) {
        Some(launch) => {
            let out = launch_merged(&launch, workdir);
            BuildOutput {
                command_line: launch.command_line(),
                exit_status: out.exit_status,
                output: out.output,
            }
        }
        None => BuildOutput {
            command_line: format!("{} build {}", adapter.name, spec.stem()),
            exit_status: 0,
            output: String::new(),
        },
    }
}

pub fn adapter_run(adapter: &ToolAdapter, spec: &ProgramSpec, workdir: &Path) -> ProcessOutput {
    launch_merged(&plan_run(adapter, spec, workdir), workdir)
}

/// Runs `launch` in `workdir` with stdout and stderr sharing one pipe, so
/// the captured text keeps the order in which the child wrote it.
pub fn launch_merged(launch: &Launch, workdir: &Path) -> ProcessOutput {
    match try_launch(launch, workdir) {
        Ok(out) => out,
        Err(e) => ProcessOutput {
            exit_status: LAUNCH_FAILURE,
            output: format!("oval: cannot launch `{}`: {e}\n", launch.command_line()),
            launched: false,
        },
    }
}

fn try_launch(launch: &Launch, workdir: &Path) -> std::io::Result<ProcessOutput> {
    let (mut reader, writer) = std::io::pipe()?;
    let mut cmd = Command::new(&launch.program);
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        if let Some(argv0) = launch.argv.first() {
            cmd.arg0(argv0);
        }
    }
    cmd.args(launch.argv.iter().skip(1))
        .current_dir(workdir)
        .envs(launch.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(writer.try_clone()?)
        .stderr(writer);
    let mut child = cmd.spawn()?;
    // The command still owns the write ends; they must close before reading to EOF.
    drop(cmd);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let status = child.wait()?;
    Ok(ProcessOutput {
        exit_status: exit_code(status),
        output: String::from_utf8_lossy(&bytes).into_owned(),
        launched: true,
    })
}

pub(crate) fn exit_code(status: ExitStatus) -> i32 {
    if let Some(code) = status.code() {
        return code;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(signal) = status.signal() {
            return 128 + signal;
        }
    }
    1
}
