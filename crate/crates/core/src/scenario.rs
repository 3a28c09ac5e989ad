//! Scenario files: flat key-value text in `[section]` blocks.
//!
//! ```text
//! # comment
//! [scenario]
//! name = relax
//! kind = semilinear
//!
//! [time]
//! t_final = 1
//! steps = 128
//!
//! [equation]
//! alpha = 0.5
//! initial = 1 + 0.1*cos(x)
//! reaction = enzyme(u)
//!
//! [property upper]
//! type = bracket
//! lower = 0
//! upper = a + rho*t^alpha
//! ```
//!
//! Property expressions may use `a` (the initial value at `x`), `rho` and
//! `alpha` besides the base variables.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::semilinear::Verdict;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Extra names usable in property expressions.
pub const PROPERTY_PARAMS: [&str; 3] = ["a", "rho", "alpha"];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column of the first value character
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub label: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// Splits text into sections; comments start with `#`.
pub fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(inner) = rest.strip_suffix(']') else {
                return Err(perr(line, indent + trimmed.len() + 1, "expected ']'"));
            };
            let mut words = inner.split_whitespace();
            let Some(name) = words.next() else {
                return Err(perr(line, indent + 2, "empty section name"));
            };
            let label = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(perr(line, indent + 1, "section header takes a name and at most one label"));
            }
            out.push(Section { name: name.to_string(), label, line, entries: Vec::new() });
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(perr(line, indent + 1, "expected 'key = value'"));
        };
        let key = body[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(perr(line, indent + 1, format!("invalid key '{key}'")));
        }
        let after = &body[eq + 1..];
        let value = after.trim();
        let column = eq + 2 + (after.len() - after.trim_start().len());
        let Some(sec) = out.last_mut() else {
            return Err(perr(line, indent + 1, "entry outside of a section"));
        };
        if sec.get(key).is_some() {
            return Err(perr(line, indent + 1, format!("duplicate key '{key}'")));
        }
        sec.entries.push(Entry { key: key.to_string(), value: value.to_string(), line, column });
    }
    Ok(out)
}

fn value_error(e: &Entry, message: impl Into<String>) -> Error {
    perr(e.line, e.column, message)
}

/// Re-anchors an expression parse error at the entry's position.
fn expr_at(e: &Entry, params: &[&str]) -> Result<Expr> {
    Expr::parse_with(&e.value, params).map_err(|err| match err {
        Error::Parse { column, message, .. } => perr(e.line, e.column + column - 1, message),
        other => other,
    })
}

fn number_at(e: &Entry) -> Result<f64> {
    let ex = expr_at(e, &[])?;
    if ["x", "t", "u", "v", "ux"].iter().any(|v| ex.uses(v)) {
        return Err(value_error(e, "expected a constant"));
    }
    let v = ex.eval(&[]);
    if !v.is_finite() {
        return Err(value_error(e, "value is not finite"));
    }
    Ok(v)
}

fn count_at(e: &Entry) -> Result<usize> {
    e.value.parse::<usize>().map_err(|_| value_error(e, "expected a non-negative integer"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Linear,
    Semilinear,
    System,
    Pair,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Linear => "linear",
            Kind::Semilinear => "semilinear",
            Kind::System => "system",
            Kind::Pair => "pair",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// spectral mild solver (Picard iteration for nonlinear problems)
    Spectral,
    /// implicit L1 stepping
    L1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub length: f64,
    pub n_grid: usize,
    pub p: Expr,
    pub c: Expr,
    pub robin: (f64, f64),
    pub shift: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpec {
    pub t_final: f64,
    pub steps: usize,
    pub grading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub alpha: f64,
    /// may use `uinf`, the steady state of the reaction
    pub initial: Expr,
    /// `f(x, u)` or `f(x, u, ux)`
    pub reaction: Expr,
    /// coefficient `r(x, t)` of `u`
    pub linear: Option<Expr>,
    pub drift: Option<Expr>,
    pub forcing: Option<Expr>,
    pub box_m: Option<f64>,
    /// closed-form solution `u(x, t)`
    pub exact: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub alphas: Vec<f64>,
    /// `[ℓ][j]`
    pub coupling: Vec<Vec<Expr>>,
    pub forcing: Vec<Expr>,
    pub initial: Vec<Expr>,
    pub m1: Option<f64>,
    /// number of seeded random cooperative draws replacing the explicit data
    pub random: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec {
    pub alpha: f64,
    pub f: Expr,
    pub g: Expr,
    pub a: Expr,
    pub b: Expr,
    pub box_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropKind {
    Bracket,
    Bound,
    Monotone,
    Comparison,
    Envelope,
    Nonneg,
    Oracle,
    Exact,
    Convergence,
    Recursion,
    Ratio,
    Classify,
}

impl PropKind {
    fn parse(s: &str) -> Option<PropKind> {
        Some(match s {
            "bracket" => PropKind::Bracket,
            "bound" => PropKind::Bound,
            "monotone" => PropKind::Monotone,
            "comparison" => PropKind::Comparison,
            "envelope" => PropKind::Envelope,
            "nonneg" => PropKind::Nonneg,
            "oracle" => PropKind::Oracle,
            "exact" => PropKind::Exact,
            "convergence" => PropKind::Convergence,
            "recursion" => PropKind::Recursion,
            "ratio" => PropKind::Ratio,
            "classify" => PropKind::Classify,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PropKind::Bracket => "bracket",
            PropKind::Bound => "bound",
            PropKind::Monotone => "monotone",
            PropKind::Comparison => "comparison",
            PropKind::Envelope => "envelope",
            PropKind::Nonneg => "nonneg",
            PropKind::Oracle => "oracle",
            PropKind::Exact => "exact",
            PropKind::Convergence => "convergence",
            PropKind::Recursion => "recursion",
            PropKind::Ratio => "ratio",
            PropKind::Classify => "classify",
        }
    }

    fn allowed(self, kind: Kind) -> bool {
        use PropKind::*;
        match kind {
            Kind::Semilinear => matches!(self, Bracket | Bound | Monotone | Comparison | Envelope | Nonneg | Oracle | Exact | Convergence),
            Kind::Linear => matches!(self, Nonneg | Oracle | Exact | Convergence),
            Kind::System => matches!(self, Nonneg | Recursion | Ratio),
            Kind::Pair => matches!(self, Nonneg | Oracle | Classify),
        }
    }

    /// Keys each property accepts besides `type` and `expect`.
    fn keys(self) -> &'static [&'static str] {
        use PropKind::*;
        match self {
            Bracket => &["lower", "upper", "rho", "tol"],
            Bound => &["lower", "upper", "rho", "tol"],
            Monotone => &["lower", "upper", "rho", "k_max", "tol", "shift_m"],
            Comparison => &["initial", "reaction", "forcing", "tol"],
            Envelope => &["tol", "slope_tol", "fit_from"],
            Nonneg => &["tol", "box"],
            Oracle => &["tol"],
            Exact => &["tol"],
            Convergence => &["levels", "refine", "min_order"],
            Recursion => &[],
            Ratio => &["factor"],
            Classify => &["case", "box"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    pub name: String,
    pub kind: PropKind,
    pub expect: Verdict,
    pub line: usize,
    entries: BTreeMap<String, Entry>,
}

impl PropertySpec {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.entry(key).map_or(Ok(default), number_at)
    }

    pub fn entry_f64(&self, key: &str) -> Result<Option<f64>> {
        self.entry(key).map(number_at).transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.entry(key).map_or(Ok(default), count_at)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    /// Expression over the base variables and [`PROPERTY_PARAMS`].
    pub fn expr(&self, key: &str) -> Result<Option<Expr>> {
        self.entry(key).map(|e| expr_at(e, &PROPERTY_PARAMS)).transpose()
    }

    /// Expression over the base variables only.
    pub fn plain_expr(&self, key: &str) -> Result<Option<Expr>> {
        self.entry(key).map(|e| expr_at(e, &[])).transpose()
    }

    /// `rho = auto` or a number; `None` when absent or automatic.
    pub fn rho(&self) -> Result<Option<f64>> {
        match self.entry("rho") {
            Some(e) if e.value == "auto" => Ok(None),
            Some(e) => number_at(e).map(Some),
            None => Ok(None),
        }
    }

    pub fn located(&self, message: impl Into<String>) -> Error {
        perr(self.line, 1, message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub about: String,
    pub kind: Kind,
    pub solver: SolverChoice,
    pub seed: u64,
    pub domain: DomainSpec,
    pub time: TimeSpec,
    pub equation: Option<EquationSpec>,
    pub system: Option<SystemSpec>,
    pub pair: Option<PairSpec>,
    pub properties: Vec<PropertySpec>,
}

struct Reader<'a> {
    sec: &'a Section,
    used: Vec<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(sec: &'a Section) -> Self {
        Reader { sec, used: Vec::new() }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Entry> {
        self.used.push(key);
        self.sec.get(key)
    }

    fn require(&mut self, key: &'a str) -> Result<&'a Entry> {
        self.get(key).ok_or_else(|| perr(self.sec.line, 1, format!("[{}] needs '{key}'", self.sec.name)))
    }

    fn number(&mut self, key: &'a str, default: Option<f64>) -> Result<f64> {
        match (self.get(key), default) {
            (Some(e), _) => number_at(e),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(perr(self.sec.line, 1, format!("[{}] needs '{key}'", self.sec.name))),
        }
    }

    fn opt_number(&mut self, key: &'a str) -> Result<Option<f64>> {
        match self.get(key) {
            Some(e) if e.value == "auto" => Ok(None),
            Some(e) => number_at(e).map(Some),
            None => Ok(None),
        }
    }

    fn count(&mut self, key: &'a str, default: Option<usize>) -> Result<usize> {
        match (self.get(key), default) {
            (Some(e), _) => count_at(e),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(perr(self.sec.line, 1, format!("[{}] needs '{key}'", self.sec.name))),
        }
    }

    fn expr(&mut self, key: &'a str, default: Option<&str>) -> Result<Expr> {
        match (self.get(key), default) {
            (Some(e), _) => expr_at(e, &[]),
            (None, Some(d)) => Expr::parse(d),
            (None, None) => Err(perr(self.sec.line, 1, format!("[{}] needs '{key}'", self.sec.name))),
        }
    }

    fn opt_expr(&mut self, key: &'a str) -> Result<Option<Expr>> {
        self.get(key).map(|e| expr_at(e, &[])).transpose()
    }

    fn list(&mut self, key: &'a str) -> Result<Vec<f64>> {
        let e = self.require(key)?;
        e.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| value_error(e, format!("'{s}' is not a number"))))
            .collect()
    }

    /// Rejects keys that were never asked for, except those matching `extra`.
    fn finish(self, extra: impl Fn(&str) -> bool) -> Result<()> {
        for e in &self.sec.entries {
            if !self.used.contains(&e.key.as_str()) && !extra(&e.key) {
                return Err(perr(e.line, 1, format!("unknown key '{}' in [{}]", e.key, self.sec.name)));
            }
        }
        Ok(())
    }
}

fn forbid(e: &Expr, vars: &[&str], what: &str, sec: &Section) -> Result<()> {
    if let Some(v) = vars.iter().find(|v| e.uses(v)) {
        return Err(perr(sec.line, 1, format!("{what} may not depend on '{v}'")));
    }
    Ok(())
}

fn parse_verdict(e: &Entry) -> Result<Verdict> {
    match e.value.to_ascii_uppercase().as_str() {
        "PASS" => Ok(Verdict::Pass),
        "FAIL" => Ok(Verdict::Fail),
        "NOT-APPLICABLE" | "NA" => Ok(Verdict::NotApplicable),
        _ => Err(value_error(e, "expected PASS, FAIL or NOT-APPLICABLE")),
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let sections = parse_sections(text)?;
        let find = |name: &str| sections.iter().find(|s| s.name == name);
        for s in &sections {
            let known = ["scenario", "domain", "time", "equation", "system", "pair", "property"];
            if !known.contains(&s.name.as_str()) {
                return Err(perr(s.line, 2, format!("unknown section '{}'", s.name)));
            }
            if s.name != "property" && sections.iter().filter(|o| o.name == s.name).count() > 1 {
                return Err(perr(s.line, 2, format!("section '{}' appears twice", s.name)));
            }
        }
        let head = find("scenario").ok_or_else(|| perr(1, 1, "missing [scenario] section"))?;
        let mut r = Reader::new(head);
        let name = r.require("name")?.value.clone();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(perr(head.line, 1, format!("scenario name '{name}' must be alphanumeric")));
        }
        let about = r.get("about").map(|e| e.value.clone()).unwrap_or_default();
        let kind_e = r.require("kind")?;
        let kind = match kind_e.value.as_str() {
            "linear" => Kind::Linear,
            "semilinear" => Kind::Semilinear,
            "system" => Kind::System,
            "pair" => Kind::Pair,
            other => return Err(value_error(kind_e, format!("unknown kind '{other}'"))),
        };
        let solver = match r.get("solver") {
            None => SolverChoice::Spectral,
            Some(e) => match e.value.as_str() {
                "spectral" | "picard" => SolverChoice::Spectral,
                "l1" => SolverChoice::L1,
                other => return Err(value_error(e, format!("unknown solver '{other}'"))),
            },
        };
        let seed = match r.get("seed") {
            Some(e) => e.value.parse::<u64>().map_err(|_| value_error(e, "expected an integer seed"))?,
            None => 42,
        };
        r.finish(|_| false)?;

        let empty = Section { name: "domain".into(), label: None, line: head.line, entries: Vec::new() };
        let dsec = find("domain").unwrap_or(&empty);
        let mut r = Reader::new(dsec);
        let length = r.number("length", Some(std::f64::consts::PI))?;
        let n_grid = r.count("n_grid", Some(32))?;
        let p = r.expr("p", Some("1"))?;
        let c = r.expr("c", Some("0"))?;
        for e in [&p, &c] {
            forbid(e, &["t", "u", "v", "ux"], "domain coefficients", dsec)?;
        }
        let robin = match r.get("robin") {
            None => (0.0, 0.0),
            Some(e) => {
                let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                let parse = |s: &str| s.parse::<f64>().map_err(|_| value_error(e, "robin takes two numbers"));
                match parts.as_slice() {
                    [a, b] => (parse(a)?, parse(b)?),
                    _ => return Err(value_error(e, "robin takes two numbers")),
                }
            }
        };
        let shift = r.opt_number("shift")?;
        let modes = r.get("modes").map(count_at).transpose()?;
        r.finish(|_| false)?;
        let domain = DomainSpec { length, n_grid, p, c, robin, shift, modes };

        let tsec = find("time").ok_or_else(|| perr(head.line, 1, "missing [time] section"))?;
        let mut r = Reader::new(tsec);
        let time = TimeSpec {
            t_final: r.number("t_final", None)?,
            steps: r.count("steps", None)?,
            grading: r.number("grading", Some(1.0))?,
        };
        r.finish(|_| false)?;

        let mut equation = None;
        let mut system = None;
        let mut pair = None;
        match kind {
            Kind::Linear | Kind::Semilinear => {
                let sec = find("equation").ok_or_else(|| perr(head.line, 1, "missing [equation] section"))?;
                let mut r = Reader::new(sec);
                let alpha = r.number("alpha", None)?;
                let ie = r.require("initial")?;
                let initial = expr_at(ie, &["uinf"])?;
                forbid(&initial, &["t", "u", "v", "ux"], "the initial value", sec)?;
                let reaction = r.expr("reaction", Some("0"))?;
                forbid(&reaction, &["t", "v"], "the reaction", sec)?;
                if kind == Kind::Linear && !reaction.is_zero() {
                    return Err(perr(sec.line, 1, "linear scenarios take 'linear' and 'forcing', not 'reaction'"));
                }
                let linear = r.opt_expr("linear")?;
                let drift = r.opt_expr("drift")?;
                let forcing = r.opt_expr("forcing")?;
                for e in [&linear, &drift, &forcing].into_iter().flatten() {
                    forbid(e, &["u", "v", "ux"], "coefficients", sec)?;
                }
                let box_m = r.opt_number("box")?;
                let exact = r.opt_expr("exact")?;
                if let Some(e) = &exact {
                    forbid(e, &["u", "v", "ux"], "the exact solution", sec)?;
                }
                r.finish(|_| false)?;
                equation = Some(EquationSpec { alpha, initial, reaction, linear, drift, forcing, box_m, exact });
            }
            Kind::System => {
                let sec = find("system").ok_or_else(|| perr(head.line, 1, "missing [system] section"))?;
                let mut r = Reader::new(sec);
                let random = r.get("random").map(count_at).transpose()?;
                let alphas = if random.is_some() && sec.get("alphas").is_none() { Vec::new() } else { r.list("alphas")? };
                let n = alphas.len();
                if random.is_none() && n < 2 {
                    return Err(perr(sec.line, 1, "a system needs at least two orders"));
                }
                let mut coupling = vec![vec![Expr::constant(0.0); n]; n];
                let mut forcing = vec![Expr::constant(0.0); n];
                let mut initial = vec![Expr::constant(0.0); n];
                for e in &sec.entries {
                    let idx = |s: &str| -> Result<usize> {
                        let k: usize = s.parse().map_err(|_| perr(e.line, 1, format!("bad component index in '{}'", e.key)))?;
                        if k == 0 || k > n {
                            return Err(perr(e.line, 1, format!("component index {k} outside 1..={n}")));
                        }
                        Ok(k - 1)
                    };
                    let parts: Vec<&str> = e.key.split('_').collect();
                    match parts.as_slice() {
                        ["p", l, j] => coupling[idx(l)?][idx(j)?] = expr_at(e, &[])?,
                        ["f", l] => forcing[idx(l)?] = expr_at(e, &[])?,
                        ["a", l] => initial[idx(l)?] = expr_at(e, &[])?,
                        _ => continue,
                    }
                }
                for e in coupling.iter().flatten().chain(&forcing) {
                    forbid(e, &["u", "v", "ux"], "system coefficients", sec)?;
                }
                for e in &initial {
                    forbid(e, &["t", "u", "v", "ux"], "initial values", sec)?;
                }
                let m1 = r.opt_number("m1")?;
                let indexed = |k: &str| {
                    let p: Vec<&str> = k.split('_').collect();
                    matches!(p.as_slice(), ["p", _, _] | ["f", _] | ["a", _])
                };
                r.finish(indexed)?;
                system = Some(SystemSpec { alphas, coupling, forcing, initial, m1, random });
            }
            Kind::Pair => {
                let sec = find("pair").ok_or_else(|| perr(head.line, 1, "missing [pair] section"))?;
                let mut r = Reader::new(sec);
                let alpha = r.number("alpha", None)?;
                let f = r.expr("f", None)?;
                let g = r.expr("g", None)?;
                for e in [&f, &g] {
                    forbid(e, &["x", "t", "ux"], "pair reactions", sec)?;
                }
                let a = r.expr("a", None)?;
                let b = r.expr("b", None)?;
                for e in [&a, &b] {
                    forbid(e, &["t", "u", "v", "ux"], "initial values", sec)?;
                }
                let box_m = r.opt_number("box")?;
                r.finish(|_| false)?;
                pair = Some(PairSpec { alpha, f, g, a, b, box_m });
            }
        }

        let mut properties = Vec::new();
        for sec in sections.iter().filter(|s| s.name == "property") {
            let name = sec.label.clone().ok_or_else(|| perr(sec.line, 1, "property sections need a label: [property NAME]"))?;
            if properties.iter().any(|p: &PropertySpec| p.name == name) {
                return Err(perr(sec.line, 1, format!("property '{name}' declared twice")));
            }
            let te = sec.get("type").ok_or_else(|| perr(sec.line, 1, format!("property '{name}' needs 'type'")))?;
            let pk = PropKind::parse(&te.value).ok_or_else(|| value_error(te, format!("unknown property type '{}'", te.value)))?;
            if !pk.allowed(kind) {
                return Err(value_error(te, format!("property '{}' does not apply to {kind} scenarios", pk.name())));
            }
            let expect = sec.get("expect").map(parse_verdict).transpose()?.unwrap_or(Verdict::Pass);
            let mut entries = BTreeMap::new();
            for e in &sec.entries {
                if e.key == "type" || e.key == "expect" {
                    continue;
                }
                if !pk.keys().contains(&e.key.as_str()) {
                    return Err(perr(e.line, 1, format!("unknown key '{}' for a {} property", e.key, pk.name())));
                }
                entries.insert(e.key.clone(), e.clone());
            }
            let spec = PropertySpec { name, kind: pk, expect, line: sec.line, entries };
            // validate expressions up front
            for key in ["lower", "upper"] {
                spec.expr(key)?;
            }
            for key in ["initial", "reaction", "forcing"] {
                spec.plain_expr(key)?;
            }
            properties.push(spec);
        }

        if domain.n_grid < 2 || time.steps < 1 || !(time.t_final > 0.0) || !(time.grading >= 1.0) {
            return Err(perr(tsec.line, 1, "grids need n_grid >= 2, steps >= 1, t_final > 0, grading >= 1"));
        }
        Ok(Scenario { name, about, kind, solver, seed, domain, time, equation, system, pair, properties })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# relaxation
[scenario]
name = relax
kind = semilinear

[time]
t_final = 1
steps = 64

[equation]
alpha = 0.5
initial = 1 + 0.1*cos(x)
reaction = enzyme(u)

[property up]
type = bound
lower = -1
upper = rho*t^alpha
expect = pass
";

    #[test]
    fn parses_a_scenario() {
        let s = Scenario::parse(BASIC).unwrap();
        assert_eq!(s.name, "relax");
        assert_eq!(s.kind, Kind::Semilinear);
        assert_eq!(s.seed, 42);
        assert_eq!(s.domain.n_grid, 32);
        assert_eq!(s.properties.len(), 1);
        assert_eq!(s.properties[0].kind, PropKind::Bound);
        let up = s.properties[0].expr("upper").unwrap().unwrap();
        assert_eq!(up.eval(&[0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.5]), 4.0);
    }

    #[test]
    fn errors_point_at_the_value() {
        let bad = BASIC.replace("reaction = enzyme(u)", "reaction = enzyme(w)");
        match Scenario::parse(&bad) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (13, 19)),
            other => panic!("{other:?}"),
        }
        let bad = BASIC.replace("steps = 64", "steps 64");
        assert!(matches!(Scenario::parse(&bad), Err(Error::Parse { line: 8, .. })));
        let bad = BASIC.replace("type = bound", "type = bound\nfoo = 1");
        assert!(Scenario::parse(&bad).is_err());
        let bad = BASIC.replace("kind = semilinear", "kind = semilinear\nkind = linear");
        assert!(Scenario::parse(&bad).is_err());
    }

    #[test]
    fn system_keys() {
        let text = "[scenario]\nname = s\nkind = system\n[time]\nt_final = 1\nsteps = 8\n[system]\nalphas = 0.3, 0.6\np_1_2 = 0.5\na_2 = 1 + cos(x)\n";
        let s = Scenario::parse(text).unwrap();
        let sys = s.system.unwrap();
        assert_eq!(sys.alphas, vec![0.3, 0.6]);
        assert_eq!(sys.coupling[0][1].eval(&[]), 0.5);
        assert_eq!(sys.initial[1].eval(&[0.0]), 2.0);
        assert!(Scenario::parse(&text.replace("p_1_2", "p_1_3")).is_err());
    }
}
