#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn synthmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthmix"))
        .args(args)
        .env_remove("SYNTHMIX_JOBS")
        .output()
        .expect("spawn synthmix")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
