//! `nsf`: run the solver and its certificates from the command line.
//!
//! Exit codes: 0 success, 2 parse error, 3 run error, 4 certificate failure.
//! Failures print one `error: kind=<kind> message=<text>` line on stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nsf_core::coefficients::RenormFunction;
use nsf_core::config::{parse_config_file, serialize_config};
use nsf_core::coupler::{continuation_sweep, run_simulation, RunConfig, Trajectory};
use nsf_core::degiorgi::{certify, lemma62_iterate, lemma62_threshold, ladder_run, DeGiorgiLadder, Lemma62Params};
use nsf_core::diagnostics::{check_energy_inequality, diagnostics_records, renorm_residual, Spatial, Temporal, TestFunction};
use nsf_core::io::{certificate_block, diagnostics_csv, parse_schedule, sweep_block, write_snapshot, Snapshot};

#[derive(Parser)]
#[command(name = "nsf", version, about = "Navier-Stokes-Fourier solver with De Giorgi lower-bound certificates")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "NSF_OUTPUT_DIR", default_value = "nsf-out")]
    out: PathBuf,
    /// Reserved for randomized test-field generation; currently unused.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a summary.
    Run { config: PathBuf },
    /// Run a continuation schedule of (n_modes, eps, delta) triples.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Run and emit the temperature lower-bound certificate.
    Degiorgi {
        config: PathBuf,
        /// Ladder depth parameter; defaults to 2 ln(1/theta_floor) + ln 4.
        #[arg(long = "M")]
        m: Option<f64>,
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        #[arg(long, default_value_t = 0.0)]
        omega: f64,
    },
    /// Admissibility report for a renormalization weight h.
    CheckH {
        #[arg(long, value_enum)]
        form: Form,
        /// Exponent (power), rate (exponential) or omega (log).
        #[arg(long)]
        l: f64,
        /// Truncation cap of the log form.
        #[arg(long, default_value_t = 1.0)]
        cap: f64,
        #[arg(long, default_value_t = 50.0)]
        z_max: f64,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
    },
    /// Iterate U_k = C A^k / K (U^beta1 + U^beta2), or search the threshold K_0.
    Lemma62 {
        #[arg(long = "C")]
        c: f64,
        #[arg(long = "A")]
        a: f64,
        #[arg(long)]
        beta1: f64,
        #[arg(long)]
        beta2: f64,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long = "U0")]
        u0: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Search K_0 instead of iterating at K.
        #[arg(long)]
        threshold: bool,
        #[arg(long, default_value_t = 1e-12)]
        k_min: f64,
        #[arg(long, default_value_t = 1e12)]
        k_max: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Power,
    Exponential,
    Log,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

fn fail(code: u8, kind: &'static str, message: impl ToString) -> Failure {
    Failure { code, kind, message: message.to_string() }
}

fn io_fail(e: std::io::Error) -> Failure {
    fail(3, "io", e)
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    parse_config_file(path).map_err(|e| fail(2, "parse", e))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_fail)?;
    fs::write(dir.join(name), text).map_err(io_fail)
}

fn write_outputs(dir: &Path, traj: &Trajectory, residual: Option<f64>) -> Result<(), Failure> {
    write(dir, "diagnostics.csv", &diagnostics_csv(&diagnostics_records(traj, residual)))?;
    let snaps = dir.join("snapshots");
    let every = traj.config.output_every.max(1);
    let last = traj.states.len() - 1;
    for (m, s) in traj.states.iter().enumerate() {
        if m % every == 0 || m == last {
            write(&snaps, &format!("rho_{m:06}.txt"), &write_snapshot(&Snapshot::new("rho", &traj.grid, s.time, &s.rho)))?;
            write(&snaps, &format!("theta_{m:06}.txt"), &write_snapshot(&Snapshot::new("theta", &traj.grid, s.time, &s.theta)))?;
        }
    }
    write(dir, "config.ini", &serialize_config(&traj.config))
}

fn cmd_run(out: &Path, path: &Path) -> Result<(), Failure> {
    let config = load(path)?;
    let traj = match run_simulation(&config) {
        Ok(t) => t,
        Err(e) => {
            if e.partial.states.len() > 1 {
                write_outputs(out, &e.partial, None)?;
            }
            return Err(fail(3, "run", e));
        }
    };
    let energy = check_energy_inequality(&traj).map_err(|e| fail(3, "run", e))?;
    let renorm = if traj.records.is_empty() {
        None
    } else {
        let h = RenormFunction::power(1.0).map_err(|e| fail(3, "run", e))?;
        Some(renorm_residual(&traj, &h, &TestFunction::new(Temporal::Linear, Spatial::Cosine)).map_err(|e| fail(3, "run", e))?)
    };
    write_outputs(out, &traj, renorm.map(|r| r.residual))?;

    let (lo, hi) = (config.initial.rho_min, config.initial.rho_max);
    let rho_ok = traj.states.iter().all(|s| s.rho.min() >= lo - 1e-12 * hi && s.rho.max() <= hi + 1e-12 * hi);
    let theta_ok = traj.min_theta() >= 0.0;
    let renorm_ok = renorm.is_none_or(|r| r.passes);
    let mut s = String::from("[summary]\n");
    let _ = writeln!(s, "steps {}", traj.records.len());
    let _ = writeln!(s, "final_time {:.17e}", traj.states.last().map_or(0.0, |st| st.time));
    let _ = writeln!(s, "halvings {}", traj.records.iter().map(|r| r.halvings).sum::<usize>());
    let _ = writeln!(s, "energy_max_violation {:.17e}", energy.max_violation);
    let _ = writeln!(s, "energy_threshold {:.17e}", energy.threshold);
    let _ = writeln!(s, "energy_ok {}", energy.passes);
    if let Some(r) = renorm {
        let _ = writeln!(s, "renorm_residual {:.17e}", r.residual);
        let _ = writeln!(s, "renorm_tolerance {:.17e}", r.tolerance);
    }
    let _ = writeln!(s, "renorm_ok {renorm_ok}");
    let _ = writeln!(s, "density_bounds_ok {rho_ok}");
    let _ = writeln!(s, "min_theta {:.17e}", traj.min_theta());
    s.push_str("[end]\n");
    write(out, "summary.txt", &s)?;
    print!("{s}");
    if energy.passes && renorm_ok && rho_ok && theta_ok {
        Ok(())
    } else {
        Err(fail(4, "invariant", "an invariant check failed; see summary.txt"))
    }
}

fn cmd_sweep(out: &Path, path: &Path, schedule: &Path) -> Result<(), Failure> {
    let config = load(path)?;
    let text = fs::read_to_string(schedule).map_err(|e| fail(2, "parse", format!("{}: {e}", schedule.display())))?;
    let schedule = parse_schedule(&text).map_err(|e| fail(2, "parse", e))?;
    let report = continuation_sweep(&config, &schedule).map_err(|e| fail(3, "run", e))?;
    let block = sweep_block(&report);
    write(out, "sweep.txt", &block)?;
    print!("{block}");
    if let Some(e) = report.errors.iter().flatten().next() {
        return Err(fail(3, "run", e));
    }
    if report.u_strictly_decreasing && report.theta_strictly_decreasing && report.monitors_bounded {
        Ok(())
    } else {
        Err(fail(4, "certificate", "Cauchy differences not strictly decreasing or monitors out of band"))
    }
}

fn cmd_degiorgi(out: &Path, path: &Path, m: Option<f64>, kmax: usize, omega: f64) -> Result<(), Failure> {
    let config = load(path)?;
    let traj = run_simulation(&config).map_err(|e| fail(3, "run", e))?;
    let cert = match m {
        Some(m) => DeGiorgiLadder::new(m, omega, kmax).and_then(|l| certify(&traj, &l, config.delta)),
        None => ladder_run(&traj, config.initial.theta_floor, kmax, omega, config.delta),
    }
    .map_err(|e| fail(2, "argument", e))?;
    let block = certificate_block(&cert);
    write(out, "certificate.txt", &block)?;
    print!("{block}");
    if cert.decay_ok {
        Ok(())
    } else {
        Err(fail(4, "certificate", "level energies did not decay"))
    }
}

fn cmd_check_h(form: Form, l: f64, cap: f64, z_max: f64, samples: usize) -> Result<(), Failure> {
    let h = match form {
        Form::Power => RenormFunction::power(l),
        Form::Exponential => RenormFunction::exponential(l),
        Form::Log => RenormFunction::log_truncated(l, cap),
    }
    .map_err(|e| fail(2, "argument", e))?;
    let r = h.check_admissible(z_max, samples).map_err(|e| fail(2, "argument", e))?;
    println!("[admissibility]");
    println!("passes {}", r.passes);
    println!("worst_margin {:.17e}", r.worst_margin);
    println!("worst_z {:.17e}", r.worst_z);
    println!("finite_positive_at_zero {}", r.finite_positive_at_zero);
    println!("non_increasing {}", r.non_increasing);
    println!("vanishes_at_infinity {}", r.vanishes_at_infinity);
    println!("[end]");
    if r.passes {
        Ok(())
    } else {
        Err(fail(4, "certificate", "h is not admissible"))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_lemma62(c: f64, a: f64, beta1: f64, beta2: f64, k: f64, u0: f64, steps: usize, threshold: Option<(f64, f64)>) -> Result<(), Failure> {
    let p = Lemma62Params { c, a, beta1, beta2, k, u0 };
    if let Some(range) = threshold {
        let k0 = lemma62_threshold(&p, range).map_err(|e| fail(4, "certificate", e))?;
        println!("K0 {k0:.17e}");
        return Ok(());
    }
    let out = lemma62_iterate(&p, steps).map_err(|e| fail(2, "argument", e))?;
    for (i, u) in out.sequence.iter().enumerate() {
        println!("U{i} {u:.17e}");
        if *u == 0.0 && i > 0 {
            break;
        }
    }
    println!("converged {}", out.converged);
    if out.converged {
        Ok(())
    } else {
        Err(fail(4, "certificate", "recursion does not converge"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = cli.seed;
    let result = match cli.command {
        Command::Run { config } => cmd_run(&cli.out, &config),
        Command::Sweep { config, schedule } => cmd_sweep(&cli.out, &config, &schedule),
        Command::Degiorgi { config, m, kmax, omega } => cmd_degiorgi(&cli.out, &config, m, kmax, omega),
        Command::CheckH { form, l, cap, z_max, samples } => cmd_check_h(form, l, cap, z_max, samples),
        Command::Lemma62 { c, a, beta1, beta2, k, u0, steps, threshold, k_min, k_max } => {
            cmd_lemma62(c, a, beta1, beta2, k, u0, steps, threshold.then_some((k_min, k_max)))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: kind={} message={}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
