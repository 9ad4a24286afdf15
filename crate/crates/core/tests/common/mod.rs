#![allow(dead_code)]

pub mod arb;
pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const OVAL: &str = env!("CARGO_BIN_EXE_oval");

/// Makefile "compiling" the shell-script sources used by the fixtures: the
/// syntax check stands in for a compiler.
pub const MAKEFILE: &str = "%: %.cpp\n\tsh -n $< && cp $< $@ && chmod +x $@\n";

pub fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

pub fn write_exe(path: &Path, text: &str) {
    use std::os::unix::fs::PermissionsExt;
    write(path, text);
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

/// A stub "source" printing `lines`.
pub fn stub_source(lines: &[&str]) -> String {
    let mut s = String::from("#!/bin/sh\n");
    for l in lines {
        s.push_str(&format!("echo '{l}'\n"));
    }
    s
}

pub fn oval_cmd(dir: &Path, args: &[&str]) -> Command {
    let mut cmd = Command::new(OVAL);
    cmd.args(args)
        .current_dir(dir)
        .env_remove("OVAL_DIR")
        .env_remove("OVAL_VERSION")
        .env_remove("OVAL_FLAVOR")
        .env_remove("OVAL_DISPATCHED");
    cmd
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(out: Output) -> Self {
        Run {
            code: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
    }
}

pub fn oval(dir: &Path, args: &[&str]) -> Run {
    oval_cmd(dir, args).output().unwrap().into()
}

pub fn oval_with(dir: &Path, args: &[&str], env: &[(&str, &Path)]) -> Run {
    let mut cmd = oval_cmd(dir, args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap().into()
}

pub const RUNTIME_OVALFILE: &str = r#"<var name="FEDERATION" value="cmsuf01">
<file name=".orcarc">
  GoPersistent = 1
  MaxEvents = 500
  Random:Seeds = 0 3
</file>
<diffline expr="^OVAL:">
<diffnumber expr="^energy: (.*)$"
            tolerance="5%">
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

pub const ELECTRONS_REF: &[&str] = &["Welcome to COBRA", "OVAL: 12 electrons", "energy: 29.7275"];
pub const ELECTRONS_PERTURBED: &[&str] =
    &["Welcome to COBRA", "OVAL: 11 electrons", "energy: 27.4728"];

/// The three-program test directory used throughout the walkthrough.
pub fn walkthrough_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(&p.join("OvalFile"), RUNTIME_OVALFILE);
    write(&p.join("Makefile"), MAKEFILE);
    write(
        &p.join("Clusters.cpp"),
        &stub_source(&["OVAL: 42 clusters"]),
    );
    write(&p.join("Electrons.cpp"), &stub_source(ELECTRONS_REF));
    write(
        &p.join("EnergyFlow.cpp"),
        &stub_source(&["OVAL: flow ok", "energy: 1.5"]),
    );
    dir
}

/// Replaces a stub source and drops the stale executable.
pub fn rewrite_source(dir: &Path, name: &str, text: &str) {
    write(&dir.join(format!("{name}.cpp")), text);
    let _ = fs::remove_file(dir.join(name));
}

pub fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

pub fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
