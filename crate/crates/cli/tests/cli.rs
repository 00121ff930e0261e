use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lienard-lab"))
        .args(args)
        .env_remove("LIENARD_LAB_LOG")
        .output()
        .expect("spawn lienard-lab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lienard-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn homoclinic_row_for_the_regression_family() {
    let o = run(&["homoclinic", "--coeffs", "0,0,1,1", "--tol", "1e-6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("a,b,c,d0,p0,loop_stable,iterations"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["1", "1", "0"]);
    let d0: f64 = row[3].parse().unwrap();
    assert!((d0 + 0.53745).abs() < 1e-4, "d0 = {d0}");
    assert_eq!(row[5], "true");
    assert!(row[6].parse::<usize>().unwrap() > 0);
}

#[test]
fn even_quartic_gets_the_symmetry_note() {
    let o = run(&["homoclinic", "--coeffs", "0,0,0,1"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("symmetry"), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[3], "0");
}

#[test]
fn abc_alias_matches_coeffs() {
    let a = run(&["homoclinic", "--abc", "1,1,0"]);
    let b = run(&["homoclinic", "--coeffs", "0,0,1,1"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn lemma1_certifies_a_quartic_with_linear_odd_part() {
    let o = run(&["lemma1", "--coeffs", "1,0,0,1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "Certified");
    let o = run(&["lemma1", "--coeffs", "-1,0,1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "NotApplicable");
}

#[test]
fn bad_coefficient_names_its_position() {
    let o = run(&["lemma1", "--coeffs", "1,x,0,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("entry 2"), "{}", stderr(&o));
}

#[test]
fn invalid_parameters_exit_with_usage_code() {
    let o = run(&["separatrix", "--coeffs", "0,0,1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["lemma1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let o = run(&["--max-steps", "10", "homoclinic", "--coeffs", "0,0,1,1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let (p1, p2) = (scratch("census-1.csv"), scratch("census-2.csv"));
    for p in [&p1, &p2] {
        let o = run(&[
            "--out",
            p.to_str().unwrap(),
            "census",
            "--coeffs",
            "-1,0,1",
            "--ymin",
            "-3",
            "--ymax",
            "-0.1",
            "--samples",
            "48",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("y_star,stability,p_prime,period,bracket_lo,bracket_hi\n"));
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.lines().nth(1).unwrap().contains("Stable"));
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        "portrait",
        "return-map",
        "separatrix",
        "homoclinic",
        "census",
        "parity",
        "hopf",
        "eps-limit",
        "lemma1",
        "conserved",
        "spread",
    ] {
        let o = run(&[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        let text = stdout(&o);
        assert!(text.contains("Usage:") && text.lines().next().unwrap().len() > 10, "{cmd}: {text}");
    }
}

#[test]
fn portrait_writes_svg_with_the_requested_orbits() {
    let p = scratch("center.svg");
    let o = run(&[
        "portrait",
        "--coeffs",
        "0,0,0,1",
        "--orbits=-0.2,-0.4,-0.6",
        "--svg",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(&p).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("class=\"orbit\"").count(), 3);
    assert_eq!(svg.matches("class=\"graph\"").count(), 1);
}

#[test]
fn conserved_rows_follow_the_header() {
    let o = run(&[
        "conserved",
        "--coeffs",
        "1,0,0,1",
        "--start=0.3,-0.2,1,0",
        "--tspan",
        "2",
        "--stride",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("t,x,y,z,w,H,extra"));
    assert_eq!(lines.count(), 5);
}
