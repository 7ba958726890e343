use std::io::Write;
use std::process::{Command, Output, Stdio};

use fockforge_core::gates::{gate_residual, nss_gate_klm};
use fockforge_core::linalg::{CMatrix, C64};

const NSS_CIRCUIT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/circuits/klm_nss.circuit");

fn fockforge(args: &[&str], stdin: &str, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fockforge"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    match threads {
        Some(t) => cmd.env("FOCKFORGE_THREADS", t),
        None => cmd.env_remove("FOCKFORGE_THREADS"),
    };
    let mut child = cmd.spawn().unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value of `key` in a two-column section.
fn value(doc: &str, key: &str) -> f64 {
    doc.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no {key} in\n{doc}"))
        .parse()
        .unwrap()
}

/// Rows of the section following `# name`.
fn section<'a>(doc: &'a str, name: &str) -> Vec<Vec<&'a str>> {
    doc.lines()
        .skip_while(|l| *l != format!("# {name}"))
        .skip(2)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect()
}

#[test]
fn proposition_report_line() {
    let o = fockforge(
        &["verify", "--prop", "1", "--aux", "2", "--seed", "7"],
        "",
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let doc = stdout(&o);
    let row = &section(&doc, "proposition")[0];
    assert_eq!(row[0], "1");
    assert!(row[5].parse::<f64>().unwrap() < 1e-9);
    assert_eq!(row[6], "PASS");
}

#[test]
fn swap_is_deterministic_gate() {
    let doc = stdout(&fockforge(&["gate", "--name", "swap"], "", None));
    assert!(value(&doc, "residual") < 1e-12);
    assert!((value(&doc, "success_probability") - 1.0).abs() < 1e-12);
}

#[test]
fn loss_detector_column() {
    let doc = stdout(&fockforge(
        &["loss", "--absorption", "0", "--eta", "0.5"],
        "",
        None,
    ));
    let rows = section(&doc, "coefficients");
    let det = rows.iter().find(|r| r[0] == "detector").unwrap();
    let want = 0.5 * (2.0 * 3f64.sqrt() - 3.0);
    assert!((det[3].parse::<f64>().unwrap() - want).abs() < 1e-11);
    assert!((det[1].parse::<f64>().unwrap() - 2.0 * want).abs() < 1e-11);
}

#[test]
fn shipped_sign_shift_circuit_reproduces_recipe() {
    let o = fockforge(&["condition", NSS_CIRCUIT], "", None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let doc = stdout(&o);
    let mut block = CMatrix::zeros(3, 3);
    for r in section(&doc, "operator") {
        let (i, j): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        block[(i, j)] = C64::new(r[2].parse().unwrap(), r[3].parse().unwrap());
    }
    let p = value(&doc, "mean_success_probability");
    let achieved = block.scale(C64::new(1.0 / p.sqrt(), 0.0));
    let target = CMatrix::diagonal(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
    let (_, rep) = nss_gate_klm().unwrap();
    let residual = gate_residual(&achieved, &target).unwrap();
    assert!(residual < 1e-6);
    assert!(
        (residual - rep.residual).abs() < 1e-9,
        "{residual} vs {}",
        rep.residual
    );
    assert!((p - rep.success_probability).abs() < 1e-9);
    assert!((value(&doc, "success_probability") - 0.25).abs() < 1e-3);
}

#[test]
fn stdin_and_path_agree() {
    let text = std::fs::read_to_string(NSS_CIRCUIT).unwrap();
    let a = fockforge(&["simulate", NSS_CIRCUIT], "", None);
    let b = fockforge(&["simulate"], &text, None);
    let c = fockforge(&["simulate", "-"], &text, Some("2"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn shipped_circuit_is_canonical_after_one_pass() {
    let once = stdout(&fockforge(&["fmt", NSS_CIRCUIT], "", None));
    let twice = stdout(&fockforge(&["fmt"], &once, None));
    assert_eq!(once, twice);
}

#[test]
fn parse_errors_exit_two_with_position() {
    let o = fockforge(
        &["simulate"],
        "modes 2\ninput fock 0 1\nbs 0 1 0.1 0 zero\n",
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3, column 14"), "{err}");
    let o = fockforge(&["simulate"], "modes 1\nbs 0 1 0.1 0 0", None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("undeclared"));
    let o = fockforge(&["condition"], "modes 2\nwarp 0\n", None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = fockforge(&["gate", "--name", "swap"], "", Some("many"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_search_exits_three() {
    let o = fockforge(
        &[
            "optimize",
            "--ancilla",
            "0",
            "--detect",
            "0",
            "--targets",
            "1,1,-1",
            "--restarts",
            "3",
        ],
        "",
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn numeric_failure_exits_four() {
    let o = fockforge(&["gate", "--name", "pauli-x", "--q", "0.5"], "", None);
    assert_eq!(o.status.code(), Some(4));
    let o = fockforge(
        &["simulate", "--cutoff", "60"],
        "modes 8\ninput fock 0 1\n",
        None,
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn lossy_simulation_keeps_trace_without_detectors() {
    let doc = stdout(&fockforge(
        &["simulate"],
        "modes 2\ninput fock 0 1\ninput fock 1 1\nlossybs 0 1 0.7853981633974483 0 0 0.5\n",
        None,
    ));
    assert!((value(&doc, "probability") - 1.0).abs() < 1e-12);
    let vac = section(&doc, "density")
        .into_iter()
        .find(|r| r[0] == "0,0" && r[1] == "0,0")
        .unwrap();
    // both photons absorbed with probability |A|⁴
    assert!((vac[2].parse::<f64>().unwrap() - 0.0625).abs() < 1e-11);
}

#[test]
fn hong_ou_mandel_amplitudes() {
    let doc = stdout(&fockforge(
        &["simulate"],
        "modes 2\ninput fock 0 1\ninput fock 1 1\nbs 0 1 0.7853981633974483 0 0\n",
        None,
    ));
    let rows = section(&doc, "amplitudes");
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!((r[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn output_is_lf_and_twelve_digits() {
    let doc = stdout(&fockforge(
        &["perm", "--random", "4", "--seed", "2"],
        "",
        None,
    ));
    assert!(!doc.contains('\r'));
    let v = doc.lines().find_map(|l| l.strip_prefix("abs\t")).unwrap();
    let mantissa = v.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 12);
}
