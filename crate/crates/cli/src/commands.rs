use crate::config::{self, forcing_field, ForcingMode};
use crate::{BoundArgs, DomainArg, IdentityArgs, InequalitiesArgs, LyapunovArgs, SimulateArgs};
use bardina::bounds::{dimension_bound, Domain};
use bardina::dynamics::{DiagnosticsRecord, Simulation};
use bardina::inequalities::{alt_trace_check, eval_f, eval_r, lieb_family_check_on, log_grid, FamilyKind};
use bardina::io::{
    read_checkpoint, write_checkpoint, write_csv, BoundRow, Checkpoint, ExponentRow, LiebRow, LyapunovRow,
    RemainderRow, SeriesRow,
};
use bardina::lyapunov::{q_estimate, LyapunovConfig};
use bardina::sht::{addition_theorem_check, gradient_addition_check, random_points, Grid};
use bardina::Error;
use rand::SeedableRng;
use serde::Serialize;
use std::f64::consts::SQRT_2;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

/// Why a command did not succeed, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Internal(String),
    Config(String),
    BlowUp(String),
    Certification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Config(_) => 2,
            Failure::BlowUp(_) => 3,
            Failure::Certification(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Internal(m) | Failure::Config(m) | Failure::BlowUp(m) | Failure::Certification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::BlowUp { .. } => Failure::BlowUp(msg),
            Error::Io(_) | Error::Csv(_) => Failure::Internal(msg),
            _ => Failure::Config(msg),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Internal(format!("{}: {e}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn csv_to<T: Serialize>(dir: &Path, name: &str, rows: impl IntoIterator<Item = T>) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_csv(BufWriter::new(file), rows)?;
    Ok(path)
}

fn out_dir(flag: Option<PathBuf>, configured: Option<PathBuf>) -> PathBuf {
    flag.or(configured).unwrap_or_else(|| PathBuf::from("."))
}

pub fn simulate(args: SimulateArgs) -> Outcome {
    let mut run = config::load(&args.config)?;
    if let Some(s) = args.seed {
        run.sim.seed = s;
    }
    let dir = out_dir(args.out_dir, run.out_dir.clone());
    prepare_dir(&dir)?;
    let cfg = run.sim.clone();
    let mut sim = match &args.resume {
        None => Simulation::new(cfg.clone())?,
        Some(path) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            let cp = read_checkpoint(BufReader::new(file))
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            if cp.trunc != cfg.trunc || cp.alpha != cfg.params.alpha || cp.gamma != cfg.params.gamma {
                return Err(Failure::Config(format!(
                    "{}: checkpoint (trunc {}, alpha {}, gamma {}) does not match the configuration",
                    path.display(),
                    cp.trunc,
                    cp.alpha,
                    cp.gamma
                )));
            }
            let step = (cp.t / cfg.dt).round() as usize;
            Simulation::resume(cfg.clone(), cp.omega, step)?
        }
    };

    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let outcome = sim.run(|r| {
        records.push(*r);
        Ok(())
    });
    let csv_path = csv_to(&dir, "diagnostics.csv", &records)?;
    outcome?;

    let cp_path = dir.join("final.checkpoint");
    let file = File::create(&cp_path).map_err(|e| io_err(&cp_path, e))?;
    write_checkpoint(
        BufWriter::new(file),
        &Checkpoint {
            trunc: cfg.trunc,
            alpha: cfg.params.alpha,
            gamma: cfg.params.gamma,
            t: sim.time(),
            omega: sim.omega().clone(),
        },
    )?;

    let min_slack = records.iter().map(DiagnosticsRecord::min_slack).fold(f64::INFINITY, f64::min);
    let last = records.last().copied();
    println!("records: {} -> {}", records.len(), csv_path.display());
    println!("checkpoint: {}", cp_path.display());
    if let Some(r) = last {
        println!("t = {}, energy_alpha = {:e}, enstrophy_alpha = {:e}", r.t, r.energy_alpha, r.enstrophy_alpha);
    }
    println!("min relative slack: {min_slack:e}");
    if min_slack < args.tolerance {
        return Err(Failure::Certification(format!(
            "a dissipative bound was violated: slack {min_slack:e} below {:e}",
            args.tolerance
        )));
    }
    Ok(())
}

pub fn lyapunov(args: LyapunovArgs) -> Outcome {
    let run = config::load(&args.config)?;
    if args.n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    let dir = out_dir(args.out_dir, run.out_dir.clone());
    prepare_dir(&dir)?;
    let mut cfg = run.sim.clone();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let mut lcfg = LyapunovConfig::new(args.n, args.t_avg);
    lcfg.t_transient = args.t_transient;
    lcfg.ortho_every = args.ortho_every.max(1);
    lcfg.windows = args.windows.max(1);
    lcfg.tangent_seed = cfg.seed;
    let est = q_estimate(&cfg, &lcfg)?;
    let bound = dimension_bound(cfg.params.alpha, cfg.params.gamma, &cfg.forcing, Domain::Sphere)?;

    let window_rows = est.windows.iter().enumerate().flat_map(|(w, (t, cum))| {
        cum.iter().enumerate().map(move |(k, &s)| LyapunovRow { window: w + 1, t: *t, k: k + 1, cumulative_sum: s })
    });
    let p1 = csv_to(&dir, "lyapunov.csv", window_rows)?;
    let final_rows = est.exponents.iter().zip(&est.cumulative).enumerate().map(|(k, (&e, &c))| ExponentRow {
        k: k + 1,
        exponent: e,
        cumulative_sum: c,
    });
    let p2 = csv_to(&dir, "exponents.csv", final_rows)?;

    println!("windows: {}", p1.display());
    println!("exponents: {}", p2.display());
    match est.n_star {
        Some(n) => println!("n* = {n}"),
        None => println!("n* > {} (all cumulative sums nonnegative)", args.n),
    }
    println!("dimension bound = {bound}");
    println!("converged: {}", est.converged);
    println!("trace margin = {:e}", est.trace_margin);

    let allowed = bound.floor() as usize + 1;
    let mut problems = Vec::new();
    match est.n_star {
        Some(n) if n > allowed => problems.push(format!("n* = {n} exceeds the bound {bound}")),
        None if args.n > allowed => {
            problems.push(format!("no negative sum among {} directions, bound {bound}", args.n))
        }
        _ => {}
    }
    let scale = cfg.params.gamma * args.n as f64;
    if est.trace_margin < -args.tolerance * scale.max(1.0) {
        problems.push(format!("trace estimate violated by {:e}", -est.trace_margin));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Certification(problems.join("; ")))
    }
}

fn parse_mode(s: &str) -> Result<ForcingMode, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Config(format!("forcing {s:?} must look like n:k:amplitude"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(ForcingMode {
        n: parts[0].trim().parse().map_err(|_| bad())?,
        k: parts[1].trim().parse().map_err(|_| bad())?,
        amplitude: parts[2].trim().parse().map_err(|_| bad())?,
    })
}

pub fn bound(args: BoundArgs) -> Outcome {
    let (mut alphas, mut gammas, mut modes) = (args.alpha, args.gamma, Vec::new());
    for s in &args.forcing {
        modes.push(parse_mode(s)?);
    }
    if let Some(path) = &args.config {
        let run = config::load(path)?;
        if alphas.is_empty() {
            alphas.push(run.sim.params.alpha);
        }
        if gammas.is_empty() {
            gammas.push(run.sim.params.gamma);
        }
        if modes.is_empty() {
            modes = run.forcing;
        }
    }
    if alphas.is_empty() || gammas.is_empty() {
        return Err(Failure::Config("alpha and gamma are required (flags or --config)".into()));
    }
    let trunc = modes.iter().map(|m| m.n).max().unwrap_or(1).max(1);
    let g = forcing_field(trunc, &modes).map_err(Failure::Config)?;
    let domain = match args.domain {
        DomainArg::Sphere => Domain::Sphere,
        DomainArg::Subdomain => Domain::Subdomain,
    };
    let mut rows = Vec::new();
    for &alpha in &alphas {
        for &gamma in &gammas {
            let bound = dimension_bound(alpha, gamma, &g, domain)?;
            let energy_branch = g.l2_norm_sq() / (2.0 * alpha);
            let norm_sq = match domain {
                Domain::Sphere => g.rot_norm_sq().min(energy_branch),
                Domain::Subdomain => energy_branch,
            };
            rows.push(BoundRow { alpha, gamma, norm: norm_sq.sqrt(), bound });
        }
    }
    write_csv(std::io::stdout().lock(), &rows)?;
    if let Some(dir) = args.out_dir {
        prepare_dir(&dir)?;
        csv_to(&dir, "bound.csv", &rows)?;
    }
    Ok(())
}

const FAMILY_SIZES: [usize; 5] = [1, 2, 4, 8, 16];
const FAMILY_MS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

pub fn inequalities(args: InequalitiesArgs) -> Outcome {
    if args.m_points == 0 || !(args.m_min > 0.0 && args.m_min <= args.m_max && args.m_max.is_finite()) {
        return Err(Failure::Config(format!(
            "empty m grid: {} points on [{}, {}]",
            args.m_points, args.m_min, args.m_max
        )));
    }
    let dim = (args.trunc + 1).pow(2) - 1;
    if args.draws > 0 && dim < *FAMILY_SIZES.last().unwrap_or(&1) {
        return Err(Failure::Config(format!("trunc {} is too small for families of 16", args.trunc)));
    }
    let dir = out_dir(args.out_dir, None);
    prepare_dir(&dir)?;
    let scale = args.fault_scale;
    let mut failures = Vec::new();
    let mut note = |what: &str, worst: f64| {
        println!("{what}: worst slack {worst:e}");
        if worst < args.tolerance {
            failures.push(format!("{what} (slack {worst:e})"));
        }
    };

    let mut f_rows = Vec::with_capacity(args.m_points);
    let mut worst = f64::INFINITY;
    for m in log_grid(args.m_min, args.m_max, args.m_points) {
        let e = eval_f(m, 1e-10)?;
        worst = worst.min(scale - e.upper());
        f_rows.push(SeriesRow { m, f_low: e.value, f_high: e.upper() });
    }
    csv_to(&dir, "f_table.csv", f_rows)?;
    note("F(m) < 1", worst);

    let mut r_rows = Vec::with_capacity(args.r_points);
    let mut worst = f64::INFINITY;
    for i in 0..args.r_points {
        let m = match args.r_points {
            1 => SQRT_2,
            n => SQRT_2 + (100.0 - SQRT_2) * i as f64 / (n - 1) as f64,
        };
        let e = eval_r(m, 1e-10)?;
        worst = worst.min(0.25 * scale - e.upper());
        r_rows.push(RemainderRow { m, r_low: e.value, r_high: e.upper() });
    }
    csv_to(&dir, "r_table.csv", r_rows)?;
    if args.r_points > 0 {
        note("R(m) < 1/4", worst);
    }

    if args.draws > 0 {
        let grid = Grid::quartic(args.trunc)?;
        let mut tables: [Vec<LiebRow>; 3] = Default::default();
        for i in 0..args.draws {
            let n = FAMILY_SIZES[(i / 3) % FAMILY_SIZES.len()];
            let m = FAMILY_MS[(i / (3 * FAMILY_SIZES.len())) % FAMILY_MS.len()];
            let kind = match i % 3 {
                0 => FamilyKind::Vector { m },
                1 => FamilyKind::Scalar { m },
                _ => FamilyKind::Alpha { alpha: 1.0 / (m * m) },
            };
            let c = lieb_family_check_on(&grid, kind, n, args.trunc, args.seed.wrapping_add(i as u64))?;
            let rhs = c.bound * scale;
            tables[i % 3].push(LiebRow { n, m, lhs: c.rho_norm, rhs, slack: rhs - c.rho_norm });
        }
        for (table, name) in tables.iter().zip(["vector", "scalar", "alpha"]) {
            csv_to(&dir, &format!("lieb_{name}.csv"), table)?;
            let worst = table.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
            if !table.is_empty() {
                note(&format!("collective Sobolev ({name}, {} draws)", table.len()), worst);
            }
        }
    }

    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        worst = worst.min(alt_trace_check(2, 4, args.seed.wrapping_add(seed))?);
    }
    note("trace inequality (p = 2)", worst);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let points = random_points(100, &mut rng);
    let mut worst: f64 = 0.0;
    for n in 0..=args.trunc.min(20) {
        worst = worst.max(addition_theorem_check(n, &points)?);
    }
    note("addition theorem", 1e-11 - worst);

    if failures.is_empty() {
        println!("all certified");
        Ok(())
    } else {
        Err(Failure::Certification(format!("not certified: {}", failures.join(", "))))
    }
}

#[derive(Serialize)]
struct IdentityRow {
    n: usize,
    value_residual: f64,
    gradient_residual: f64,
    gradient_relative: f64,
}

pub fn identity_check(args: IdentityArgs) -> Outcome {
    if args.points == 0 {
        return Err(Failure::Config("--points must be at least 1".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let points = random_points(args.points, &mut rng);
    let mut rows = Vec::new();
    for n in 0..=args.trunc {
        let value_residual = addition_theorem_check(n, &points)?;
        let gradient_residual = gradient_addition_check(n, &points)?;
        let target = (n * (n + 1) * (2 * n + 1)) as f64 / (4.0 * std::f64::consts::PI);
        rows.push(IdentityRow {
            n,
            value_residual,
            gradient_residual,
            gradient_relative: gradient_residual / target.max(1.0),
        });
    }
    write_csv(std::io::stdout().lock(), &rows)?;
    if let Some(dir) = args.out_dir {
        prepare_dir(&dir)?;
        csv_to(&dir, "identities.csv", &rows)?;
    }
    let worst_value = rows.iter().map(|r| r.value_residual).fold(0.0, f64::max);
    let worst_grad = rows.iter().map(|r| r.gradient_relative).fold(0.0, f64::max);
    if worst_value > args.tolerance || worst_grad > 10.0 * args.tolerance {
        return Err(Failure::Certification(format!(
            "identity residuals too large: value {worst_value:e}, gradient (relative) {worst_grad:e}"
        )));
    }
    Ok(())
}
