use fracdiff::harness::{run_bundle, write_run};
use fracdiff::scenario::Scenario;
use fracdiff::Error;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn out_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn parse_position(text: &str) -> (usize, usize) {
    match Scenario::parse(text) {
        Err(Error::Parse { line, column, .. }) => (line, column),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn parse_errors_carry_line_and_column() {
    assert_eq!(parse_position("[scenario\nname = x\n"), (1, 10));
    assert_eq!(parse_position("[scenario]\nname = x\n  oops\n"), (3, 3));
    assert_eq!(parse_position("name = x\n"), (1, 1));
    assert_eq!(parse_position("[scenario]\nname = a\nname = b\n"), (3, 1));
}

#[test]
fn expression_errors_point_into_the_value() {
    let text = "[scenario]\nname = e\nkind = semilinear\n[time]\nt_final = 1\nsteps = 8\n[equation]\nalpha = 0.5\ninitial = cos(x)\nreaction = u * * 2\n";
    let (line, column) = parse_position(text);
    assert_eq!(line, 10);
    assert!(column > "reaction = ".len(), "column {column}");
}

#[test]
fn every_bundled_scenario_behaves_as_declared() {
    let entries = run_bundle(&scenario_dir()).unwrap();
    assert!(entries.len() >= 19);
    let out = out_dir("bundle");
    for e in &entries {
        let run = e.outcome.as_ref().unwrap_or_else(|err| panic!("{}: {err}", e.path.display()));
        assert!(run.report.all_as_declared(), "{}\n{}", e.path.display(), run.report.render());
        let (csv, rep) = write_run(&out, run).unwrap();
        assert!(std::fs::metadata(csv).unwrap().len() > 0);
        assert!(std::fs::read_to_string(rep).unwrap().contains("summary:"));
    }
}

fn cli(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fracdiff")).env("FRACDIFF_OUT_DIR", out).args(args).output().unwrap()
}

#[test]
fn ml_eval_prints_the_half_order_value() {
    let o = cli(&out_dir("ml_eval"), &["ml-eval", "--alpha", "0.5", "--z", "-1"]);
    assert!(o.status.success());
    let v: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((v - 0.427_583_576_155_807).abs() < 1e-14, "{v}");
}

#[test]
fn exit_codes_follow_the_outcome() {
    let out = out_dir("exit_codes");
    let ok = cli(&out, &["run", scenario_dir().join("pair_case1.scn").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(out.join("pair_case1.traj.csv").exists() && out.join("pair_case1.report.txt").exists());

    // a declared verdict that does not come out gives 1
    let text = std::fs::read_to_string(scenario_dir().join("pair_case1.scn")).unwrap();
    let wrong = out.join("wrong.scn");
    std::fs::write(&wrong, text.replace("name = pair_case1", "name = wrong").replace("case = 1", "case = 2")).unwrap();
    assert_eq!(cli(&out, &["run", wrong.to_str().unwrap()]).status.code(), Some(1));

    let missing = cli(&out, &["run", out.join("absent.scn").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let bad = out.join("bad.scn");
    std::fs::write(&bad, "[scenario\n").unwrap();
    let o = cli(&out, &["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1:10"));
}

#[test]
fn steady_writes_x_and_u_columns() {
    let out = out_dir("steady");
    let o = cli(&out, &["steady", scenario_dir().join("enzyme_bracket.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.to_string_lossy().ends_with(".traj.csv"))
        .unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("x,u"));
}
