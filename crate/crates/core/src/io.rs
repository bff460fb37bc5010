//! Text outputs: diagnostics CSV, field snapshots, certificate and sweep
//! report blocks.
//!
//! Floats are written with `{:.17e}`, which round-trips every `f64` and
//! makes outputs byte-identical between equal runs.

use std::fmt::Write as _;

use crate::coupler::SweepReport;
use crate::degiorgi::Certificate;
use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{Grid, ScalarField};
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 19] = [
    "step",
    "time",
    "dt",
    "picard_iterations",
    "kinetic",
    "thermal",
    "total",
    "cum_viscous_dissipation",
    "cum_eps_dissipation",
    "cum_sink",
    "rho_min",
    "rho_max",
    "theta_min",
    "theta_max",
    "u_h1",
    "theta_h1",
    "theta_l3",
    "energy_slack",
    "renorm_residual",
];

fn e(v: f64) -> String {
    format!("{v:.17e}")
}

/// Header plus one line per record; an absent residual is an empty field.
pub fn diagnostics_csv(rows: &[DiagnosticsRecord]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let fields = [
            r.step.to_string(),
            e(r.time),
            e(r.dt),
            r.picard_iterations.to_string(),
            e(r.kinetic),
            e(r.thermal),
            e(r.total),
            e(r.cum_viscous_dissipation),
            e(r.cum_eps_dissipation),
            e(r.cum_sink),
            e(r.rho_min),
            e(r.rho_max),
            e(r.theta_min),
            e(r.theta_max),
            e(r.u_h1),
            e(r.theta_h1),
            e(r.theta_l3),
            e(r.energy_slack),
            r.renorm_residual.map(e).unwrap_or_default(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// A named nodal field at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub time: f64,
    /// Row-major, `(ny+1)` rows of `(nx+1)` values.
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(name: &str, grid: &Grid, time: f64, field: &ScalarField) -> Self {
        Self { name: name.into(), nx: grid.nx(), ny: grid.ny(), lx: grid.lx(), ly: grid.ly(), time, values: field.values.clone() }
    }
}

/// ```text
/// # name theta
/// # nx 64
/// # ny 64
/// # lx 1.00000000000000000e0
/// # ly 1.00000000000000000e0
/// # time 5.00000000000000000e-1
/// v00 v10 ... (one grid row per line)
/// ```
pub fn write_snapshot(s: &Snapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# name {}\n# nx {}\n# ny {}\n# lx {}\n# ly {}\n# time {}", s.name, s.nx, s.ny, e(s.lx), e(s.ly), e(s.time));
    for row in s.values.chunks(s.nx + 1) {
        out.push_str(&row.iter().map(|v| e(*v)).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    out
}

pub fn read_snapshot(text: &str) -> Result<Snapshot> {
    let bad = |m: String| Error::Input(format!("snapshot: {m}"));
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<String> {
        let l = lines.next().ok_or_else(|| bad(format!("missing `{key}` header")))?;
        l.strip_prefix("# ")
            .and_then(|r| r.strip_prefix(key))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| bad(format!("expected `# {key}`, got `{l}`")))
    };
    let name = header("name")?;
    let int = |v: String| v.parse::<usize>().map_err(|_| bad(format!("bad integer `{v}`")));
    let nx = int(header("nx")?)?;
    let ny = int(header("ny")?)?;
    let float = |v: String| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}`")));
    let lx = float(header("lx")?)?;
    let ly = float(header("ly")?)?;
    let time = float(header("time")?)?;
    let mut values = Vec::with_capacity((nx + 1) * (ny + 1));
    for l in lines {
        for tok in l.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value `{tok}`")))?);
        }
    }
    if values.len() != (nx + 1) * (ny + 1) {
        return Err(bad(format!("{} values for a {nx}x{ny} grid", values.len())));
    }
    Ok(Snapshot { name, nx, ny, lx, ly, time, values })
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| e(*x)).collect::<Vec<_>>().join(" ")
}

/// `key value` lines between `[certificate]` and `[end]`.
pub fn certificate_block(c: &Certificate) -> String {
    format!(
        "[certificate]\nM {}\nomega {}\nk_max {}\nlevels {}\nU {}\ndecay_ok {}\nlower_bound {}\nobserved_min_theta {}\nbound_holds {}\nfitted_C {}\n[end]\n",
        e(c.m),
        e(c.omega),
        c.k_max,
        list(&c.levels),
        list(&c.u),
        c.decay_ok,
        e(c.lower_bound),
        e(c.observed_min_theta),
        c.bound_holds,
        c.fitted_c.map(e).unwrap_or_else(|| "none".into())
    )
}

pub fn sweep_block(r: &SweepReport) -> String {
    let mut s = String::from("[sweep]\n");
    for (i, (n, eps, delta)) in r.schedule.iter().enumerate() {
        let status = r.errors[i].as_deref().unwrap_or("ok");
        let _ = writeln!(s, "run {i} n_modes {n} eps {} delta {} status {status}", e(*eps), e(*delta));
    }
    let _ = writeln!(s, "u_differences {}", list(&r.u_differences));
    let _ = writeln!(s, "theta_differences {}", list(&r.theta_differences));
    let _ = writeln!(s, "u_strictly_decreasing {}", r.u_strictly_decreasing);
    let _ = writeln!(s, "theta_strictly_decreasing {}", r.theta_strictly_decreasing);
    let _ = writeln!(s, "final_thermal_energy {}", list(&r.final_thermal_energy));
    for (name, ratio) in &r.monitor_ratios {
        let _ = writeln!(s, "monitor_ratio {name} {}", e(*ratio));
    }
    let _ = writeln!(s, "monitors_bounded {}\n[end]", r.monitors_bounded);
    s
}

/// Schedule file: one `n_modes eps delta` triple per line, `#` comments.
pub fn parse_schedule(text: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let t: Vec<&str> = body.split_whitespace().collect();
        let parsed = match t.as_slice() {
            [n, eps, delta] => match (n.parse::<usize>(), eps.parse::<f64>(), delta.parse::<f64>()) {
                (Ok(n), Ok(eps), Ok(delta)) => Some((n, eps, delta)),
                _ => None,
            },
            _ => None,
        };
        match parsed {
            Some(p) => out.push(p),
            None => problems.push(format!("line {}: expected `n_modes eps delta`, got `{body}`", i + 1)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Input(problems.join("; ")));
    }
    if out.is_empty() {
        return Err(Error::Input("empty schedule".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(4, 5, 1.0, 2.0).unwrap();
        let f = g.sample(|x, y| (x + 0.1).ln() * y.sin() / 3.0);
        let s = Snapshot::new("theta", &g, 0.1 + 0.2, &f);
        let text = write_snapshot(&s);
        assert!(text.starts_with("# name theta\n# nx 4\n# ny 5\n"));
        assert_eq!(text.lines().count(), 6 + 6);
        assert_eq!(read_snapshot(&text).unwrap(), s);
        assert!(read_snapshot(&text.replace("# ny 5", "# ny 6")).is_err());
    }

    #[test]
    fn schedule_parsing() {
        let s = parse_schedule("# n eps delta\n16 1e-2 1e-2\n16 5e-3 1e-2 # halved\n").unwrap();
        assert_eq!(s, vec![(16, 1e-2, 1e-2), (16, 5e-3, 1e-2)]);
        assert!(parse_schedule("16 x 1\n").is_err());
        assert!(parse_schedule("\n").is_err());
    }
}
