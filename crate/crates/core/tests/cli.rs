use std::io::Write;
use std::process::{Command, Stdio};

fn run(args: &[&str], stdin: &str) -> (i32, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dynwalk"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn run_reads_stdin() {
    let (code, out) = run(&["run"], "init n=2 d=1 prec=exact ell=1\nbatch +(0,1)\nquery entry 0 0 1\n");
    assert_eq!(code, 0);
    assert_eq!(out, "entry: 1/2\n");
}

#[test]
fn parse_failure_exits_one() {
    let (code, out) = run(&["run"], "init n=2 d=1\nbogus\nquery entry 0 0 1\n");
    assert_eq!(code, 1);
    assert_eq!(out, "error: line 2: unknown command `bogus`\n");
}

#[test]
fn runtime_errors_do_not_change_exit_code() {
    let (code, out) = run(&["run"], "init n=2 d=1 ell=1\nbatch +(0,0)\nquery entry 0 0 1\n");
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn runs_are_deterministic() {
    let script = "init n=6 d=2 ell=1 mode=muddled L=2 prec=bits:64\ntrace on\nbatch +(0,1) +(2,3)\nbatch +(1,2)\nquery lambda tol=1/4096\nquery conductance\n";
    let first = run(&["run"], script);
    assert_eq!(first, run(&["run"], script));
}

#[test]
fn selftest_passes() {
    let (code, out) = run(&["selftest"], "");
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("0 failed"));
}
