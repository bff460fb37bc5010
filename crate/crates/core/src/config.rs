//! `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! [grid]
//! nx = 64
//! ny = 64
//!
//! [model]
//! delta = 0.01
//! ```
//!
//! Every key is optional and falls back to [`RunConfig::default`], except
//! that `form = tabulated` requires the `theta` and `kappa` lists.
//! Lists are comma separated. `#` and `;` start comments.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::coefficients::{ConductivityForm, ConductivityLaw, ViscosityLaw};
use crate::coupler::{DensityTransport, Profile, RunConfig};
use crate::thermal::Linearization;

/// One problem found while parsing; `line` is 0 when no line applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{}", format_problems(.0))]
    Invalid(Vec<Problem>),
}

fn format_problems(p: &[Problem]) -> String {
    p.iter()
        .map(|p| if p.line > 0 { format!("line {}: {}", p.line, p.message) } else { p.message.clone() })
        .collect::<Vec<_>>()
        .join("; ")
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "ny", "lx", "ly"]),
    ("time", &["t_final", "dt", "output_every"]),
    ("model", &["n_modes", "eps", "delta"]),
    ("solver", &["picard_tol", "picard_max", "linearization", "density_transport", "newton_tol", "newton_max"]),
    ("viscosity", &["slope", "theta_bar", "mu_infinity"]),
    ("conductivity", &["form", "kappa_lo", "kappa_hi", "theta", "kappa"]),
    ("initial", &["rho_profile", "rho_min", "rho_max", "theta_profile", "theta_floor", "theta_peak", "momentum"]),
];

pub fn parse_config_file(path: &Path) -> Result<RunConfig, ParseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut problems = Vec::new();
    let mut entries: Vec<(usize, String, String, String)> = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                problems.push(Problem { line, message: format!("unknown section [{name}]") });
                section = None;
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            problems.push(Problem { line, message: format!("expected `key = value`, got `{body}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            problems.push(Problem { line, message: format!("key `{key}` outside a known section") });
            continue;
        };
        let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            problems.push(Problem { line, message: format!("unknown key `{key}` in [{sec}]") });
            continue;
        }
        if let Some((first, ..)) = entries.iter().find(|(_, s, k, _)| s == sec && k == key) {
            problems.push(Problem { line, message: format!("duplicate key `{key}` (first set on line {first})") });
            continue;
        }
        entries.push((line, sec.clone(), key.to_string(), value.to_string()));
    }

    let mut b = Builder::new();
    for (line, sec, key, value) in &entries {
        if let Err(message) = b.set(sec, key, value) {
            problems.push(Problem { line: *line, message: format!("{key}: {message}") });
        }
    }
    let line_of = |key: &str| entries.iter().find(|e| e.2 == key).map_or(0, |e| e.0);
    let config = b.finish(&line_of, &mut problems);
    if let Some(c) = &config {
        for msg in c.problems() {
            let line = msg
                .split(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .map(line_of)
                .find(|l| *l > 0)
                .unwrap_or(0);
            problems.push(Problem { line, message: msg });
        }
    }
    problems.sort_by_key(|p| p.line);
    match config {
        Some(c) if problems.is_empty() => Ok(c),
        _ => Err(ParseError::Invalid(problems)),
    }
}

struct Builder {
    config: RunConfig,
    slope: f64,
    theta_bar: f64,
    mu_infinity: Option<f64>,
    tabulated: bool,
    kappa_lo: f64,
    kappa_hi: f64,
    table_theta: Option<Vec<f64>>,
    table_kappa: Option<Vec<f64>>,
}

fn num(v: &str) -> Result<f64, String> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn count(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(s.trim())).collect()
}

fn profile(v: &str) -> Result<Profile, String> {
    Profile::from_name(v).ok_or_else(|| format!("unknown profile `{v}` (uniform, cosine, bump)"))
}

impl Builder {
    fn new() -> Self {
        let config = RunConfig::default();
        let (v, c) = (config.viscosity, &config.conductivity);
        Self {
            slope: v.slope(),
            theta_bar: v.theta_bar(),
            mu_infinity: None,
            tabulated: false,
            kappa_lo: c.kappa_lo(),
            kappa_hi: c.kappa_hi(),
            table_theta: None,
            table_kappa: None,
            config,
        }
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), String> {
        let c = &mut self.config;
        match (section, key) {
            ("grid", "nx") => c.nx = count(v)?,
            ("grid", "ny") => c.ny = count(v)?,
            ("grid", "lx") => c.lx = num(v)?,
            ("grid", "ly") => c.ly = num(v)?,
            ("time", "t_final") => c.t_final = num(v)?,
            ("time", "dt") => c.dt = num(v)?,
            ("time", "output_every") => c.output_every = count(v)?,
            ("model", "n_modes") => c.n_modes = count(v)?,
            ("model", "eps") => c.eps = num(v)?,
            ("model", "delta") => c.delta = num(v)?,
            ("solver", "picard_tol") => c.picard_tol = num(v)?,
            ("solver", "picard_max") => c.picard_max = count(v)?,
            ("solver", "linearization") => {
                c.linearization = Linearization::from_name(v)
                    .ok_or_else(|| format!("unknown linearization `{v}` (kirchhoff-newton, lagged)"))?
            }
            ("solver", "density_transport") => {
                c.density_transport = DensityTransport::from_name(v)
                    .ok_or_else(|| format!("unknown density transport `{v}` (upwind, semi-lagrangian)"))?
            }
            ("solver", "newton_tol") => c.newton_tol = num(v)?,
            ("solver", "newton_max") => c.newton_max = count(v)?,
            ("viscosity", "slope") => self.slope = num(v)?,
            ("viscosity", "theta_bar") => self.theta_bar = num(v)?,
            ("viscosity", "mu_infinity") => self.mu_infinity = Some(num(v)?),
            ("conductivity", "form") => {
                self.tabulated = match v {
                    "quadratic" => false,
                    "tabulated" => true,
                    _ => return Err(format!("unknown conductivity form `{v}` (quadratic, tabulated)")),
                }
            }
            ("conductivity", "kappa_lo") => self.kappa_lo = num(v)?,
            ("conductivity", "kappa_hi") => self.kappa_hi = num(v)?,
            ("conductivity", "theta") => self.table_theta = Some(list(v)?),
            ("conductivity", "kappa") => self.table_kappa = Some(list(v)?),
            ("initial", "rho_profile") => c.initial.rho_profile = profile(v)?,
            ("initial", "rho_min") => c.initial.rho_min = num(v)?,
            ("initial", "rho_max") => c.initial.rho_max = num(v)?,
            ("initial", "theta_profile") => c.initial.theta_profile = profile(v)?,
            ("initial", "theta_floor") => c.initial.theta_floor = num(v)?,
            ("initial", "theta_peak") => c.initial.theta_peak = num(v)?,
            ("initial", "momentum") => c.initial.momentum = list(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    fn finish(mut self, line_of: &dyn Fn(&str) -> usize, problems: &mut Vec<Problem>) -> Option<RunConfig> {
        let mut ok = true;
        let mu_inf = self.mu_infinity.unwrap_or(self.slope * self.theta_bar);
        match ViscosityLaw::new(self.slope, self.theta_bar, mu_inf) {
            Ok(v) => self.config.viscosity = v,
            Err(e) => {
                ok = false;
                let line = ["slope", "theta_bar", "mu_infinity"].iter().map(|k| line_of(k)).find(|l| *l > 0).unwrap_or(0);
                problems.push(Problem { line, message: e.to_string() });
            }
        }
        let law = if self.tabulated {
            match (self.table_theta.take(), self.table_kappa.take()) {
                (Some(t), Some(k)) => ConductivityLaw::tabulated(self.kappa_lo, self.kappa_hi, t, k),
                _ => {
                    problems.push(Problem { line: line_of("form"), message: "missing required key: form = tabulated needs `theta` and `kappa`".into() });
                    return None;
                }
            }
        } else {
            if self.table_theta.is_some() || self.table_kappa.is_some() {
                problems.push(Problem { line: line_of("theta").max(line_of("kappa")), message: "`theta`/`kappa` tables need form = tabulated".into() });
            }
            ConductivityLaw::quadratic(self.kappa_lo, self.kappa_hi)
        };
        match law {
            Ok(l) => self.config.conductivity = l,
            Err(e) => {
                ok = false;
                let line = ["kappa_lo", "kappa_hi", "theta", "kappa"].iter().map(|k| line_of(k)).find(|l| *l > 0).unwrap_or(0);
                problems.push(Problem { line, message: e.to_string() });
            }
        }
        ok.then_some(self.config)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes every key; `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(c: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[grid]\nnx = {}\nny = {}\nlx = {}\nly = {}\n", c.nx, c.ny, c.lx, c.ly);
    let _ = writeln!(s, "[time]\nt_final = {}\ndt = {}\noutput_every = {}\n", c.t_final, c.dt, c.output_every);
    let _ = writeln!(s, "[model]\nn_modes = {}\neps = {}\ndelta = {}\n", c.n_modes, c.eps, c.delta);
    let _ = writeln!(
        s,
        "[solver]\npicard_tol = {}\npicard_max = {}\nlinearization = {}\ndensity_transport = {}\nnewton_tol = {}\nnewton_max = {}\n",
        c.picard_tol,
        c.picard_max,
        c.linearization.name(),
        c.density_transport.name(),
        c.newton_tol,
        c.newton_max
    );
    let v = &c.viscosity;
    let _ = writeln!(s, "[viscosity]\nslope = {}\ntheta_bar = {}\nmu_infinity = {}\n", v.slope(), v.theta_bar(), v.mu_infinity());
    let k = &c.conductivity;
    let _ = writeln!(s, "[conductivity]\nkappa_lo = {}\nkappa_hi = {}", k.kappa_lo(), k.kappa_hi());
    match k.form() {
        ConductivityForm::Quadratic => {
            let _ = writeln!(s, "form = quadratic\n");
        }
        ConductivityForm::Tabulated { theta, kappa } => {
            let _ = writeln!(s, "form = tabulated\ntheta = {}\nkappa = {}\n", join(theta), join(kappa));
        }
    }
    let i = &c.initial;
    let _ = writeln!(
        s,
        "[initial]\nrho_profile = {}\nrho_min = {}\nrho_max = {}\ntheta_profile = {}\ntheta_floor = {}\ntheta_peak = {}\nmomentum = {}",
        i.rho_profile.name(),
        i.rho_min,
        i.rho_max,
        i.theta_profile.name(),
        i.theta_floor,
        i.theta_peak,
        join(&i.momentum)
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problems(text: &str) -> Vec<Problem> {
        match parse_config(text) {
            Err(ParseError::Invalid(p)) => p,
            other => panic!("expected parse problems, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# nothing\n[grid]\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn delta_out_of_range() {
        let p = problems("[model]\n\ndelta = 1.5\n");
        assert!(p.iter().any(|p| p.line == 3 && p.message.contains("(0,1)")));
    }

    #[test]
    fn zero_theta_floor() {
        let p = problems("[initial]\ntheta_floor = 0\n");
        assert_eq!(p[0].line, 2);
        assert!(p[0].message.contains("theta_floor"));
    }

    #[test]
    fn reports_every_problem() {
        let p = problems("[grid]\nnx = abc\nbogus = 1\n[nope]\nx = 1\n[model]\ndelta = 0\n");
        let lines: Vec<usize> = p.iter().map(|p| p.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5, 7]);
    }

    #[test]
    fn tabulated_needs_tables() {
        let p = problems("[conductivity]\nform = tabulated\n");
        assert!(p[0].message.contains("missing required key"));
    }

    #[test]
    fn round_trip_default_and_tabulated() {
        let c = RunConfig::default();
        assert_eq!(parse_config(&serialize_config(&c)).unwrap(), c);
        let mut t = RunConfig { eps: 0.1 + 0.2, ..RunConfig::default() };
        t.conductivity = ConductivityLaw::tabulated(0.5, 2.0, vec![0.0, 1.0, 2.0], vec![0.7, 1.5, 4.0]).unwrap();
        t.initial.momentum.clear();
        assert_eq!(parse_config(&serialize_config(&t)).unwrap(), t);
    }
}
