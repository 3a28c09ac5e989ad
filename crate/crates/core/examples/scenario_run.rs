//! Parses a scenario from text, runs it and prints the report.
use fracdiff::harness::{run, Select};
use fracdiff::scenario::Scenario;

const TEXT: &str = "
[scenario]
name = demo
kind = semilinear

[time]
t_final = 1
steps = 128
grading = 3

[equation]
alpha = 0.5
initial = 1 + 0.1*cos(x)
reaction = enzyme(u)

[property bracket]
type = bracket
lower = 0
upper = a + rho*t^alpha

[property oracle]
type = oracle
tol = 1e-2
";

fn main() -> fracdiff::Result<()> {
    let sc = Scenario::parse(TEXT)?;
    let out = run(&sc, Select::All)?;
    print!("{}", out.report);
    match Scenario::parse(&TEXT.replace("enzyme(u)", "enzyme(w)")) {
        Err(e) => println!("a typo is reported as: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
