//! Site installation layout: version dispatch, flavors and the lookup of
//! site-customizable files.
//!
//! All versions live under one install root (`OVAL_DIR`):
//!
//! ```text
//! $OVAL_DIR/<version>/bin/oval
//! $OVAL_DIR/<version>/share/Interfaces/<tool>
//! $OVAL_DIR/site/...            site-wide customization
//! ```

use std::env;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::config::{parse_ovalfile, ConfigNode, Warning, OVALFILE};
use crate::error::{OvalError, Result};

pub const ENV_OVAL_DIR: &str = "OVAL_DIR";
pub const ENV_OVAL_VERSION: &str = "OVAL_VERSION";
pub const ENV_OVAL_FLAVOR: &str = "OVAL_FLAVOR";
pub const ENV_DISPATCHED: &str = "OVAL_DISPATCHED";

/// Version identifier of this executable, in the install-tree spelling
/// (`0.1.0` becomes `0_1_0`).
pub fn builtin_version() -> String {
    env!("CARGO_PKG_VERSION").replace('.', "_")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteContext {
    pub oval_dir: PathBuf,
    pub version: String,
    pub flavor: Option<String>,
    pub site_dir: PathBuf,
}

impl SiteContext {
    pub fn new(
        oval_dir: impl Into<PathBuf>,
        version: impl Into<String>,
        flavor: Option<String>,
    ) -> Self {
        let oval_dir = oval_dir.into();
        SiteContext {
            site_dir: oval_dir.join("site"),
            oval_dir,
            version: version.into(),
            flavor: flavor.filter(|f| !f.is_empty()),
        }
    }

    /// Context for `version` from `OVAL_DIR`/`OVAL_FLAVOR`; `None` when no
    /// install root is configured.
    pub fn from_env(version: &str) -> Option<Self> {
        let oval_dir = env::var_os(ENV_OVAL_DIR).filter(|v| !v.is_empty())?;
        Some(SiteContext::new(
            oval_dir,
            version,
            env::var(ENV_OVAL_FLAVOR).ok(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dispatch {
    RunInPlace,
    DelegateTo(PathBuf),
}

/// Decides whether this executable serves the request or hands over to
/// the installed version that was asked for. An OvalFile request beats the
/// environment, which beats the running version.
pub fn determine_version(
    executable_version: &str,
    env_requested: Option<&str>,
    ovalfile_requested: Option<&str>,
    oval_dir: Option<&Path>,
    tool: &str,
    already_dispatched: bool,
) -> Result<Dispatch> {
    let requested = ovalfile_requested
        .or(env_requested)
        .filter(|v| !v.is_empty())
        .unwrap_or(executable_version);
    if requested == executable_version {
        return Ok(Dispatch::RunInPlace);
    }
    if already_dispatched {
        return Err(OvalError::DispatchLoop {
            requested: requested.to_string(),
            running: executable_version.to_string(),
        });
    }
    let oval_dir = oval_dir.ok_or_else(|| OvalError::NoInstallRoot {
        version: requested.to_string(),
    })?;
    let path = oval_dir.join(requested).join("bin").join(tool);
    if !path.is_file() {
        return Err(OvalError::VersionNotInstalled {
            version: requested.to_string(),
            path,
        });
    }
    Ok(Dispatch::DelegateTo(path))
}

/// Hands the invocation over to `executable`, marking the environment so
/// the delegate never dispatches again. Returns the delegate's exit status
/// where the process cannot simply be replaced.
pub fn delegate(executable: &Path, args: &[OsString]) -> Result<i32> {
    let mut cmd = Command::new(executable);
    cmd.args(args).env(ENV_DISPATCHED, "1");
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        let err = cmd.exec();
        Err(OvalError::io(executable, err))
    }
    #[cfg(not(unix))]
    {
        let status = cmd.status().map_err(|e| OvalError::io(executable, e))?;
        Ok(status.code().unwrap_or(2))
    }
}

/// Candidate locations for a customizable file, most specialized first.
/// Flavor-qualified candidates only appear when a flavor is set.
pub fn customizable_candidates(basename: &str, ctx: &SiteContext) -> Vec<PathBuf> {
    let site = &ctx.site_dir;
    let version = &ctx.version;
    let mut out = Vec::with_capacity(7);
    if let Some(flavor) = &ctx.flavor {
        out.push(site.join(version).join(flavor).join(basename));
        out.push(site.join(format!("{basename}.{version}.{flavor}")));
    }
    out.push(site.join(version).join(basename));
    out.push(site.join(format!("{basename}.{version}")));
    if let Some(flavor) = &ctx.flavor {
        out.push(site.join(flavor).join(basename));
        out.push(site.join(format!("{basename}.{flavor}")));
    }
    out.push(site.join(basename));
    out
}

pub fn resolve_customizable_file(basename: &str, ctx: &SiteContext) -> Option<PathBuf> {
    customizable_candidates(basename, ctx)
        .into_iter()
        .find(|p| p.is_file())
}

/// Site-level default OvalFile for the context, or an empty node. Errors
/// in a site file are fatal.
pub fn load_site_defaults(ctx: Option<&SiteContext>) -> Result<(ConfigNode, Vec<Warning>)> {
    let Some(path) = ctx.and_then(|c| resolve_customizable_file(OVALFILE, c)) else {
        return Ok((ConfigNode::empty("<site defaults>"), Vec::new()));
    };
    let text = fs::read_to_string(&path).map_err(|e| OvalError::io(&path, e))?;
    parse_ovalfile(&text, &path)
}
