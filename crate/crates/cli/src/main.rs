use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pbtlab::cpbt::{
    controller_registry, ghz_extended, minimal_of, w_class, ControlPowerReport, ControllerOptions,
    Party, TripartiteState,
};
use pbtlab::fidelity::{
    classical_teleportation_threshold, entanglement_fidelity, fef_registry,
    mc_teleportation_fidelity, teleportation_fidelity_from_f, FefOptions, FefSolver,
};
use pbtlab::pbt::{
    asymptotic_entanglement_fidelity, asymptotic_isotropic_fidelity, asymptotic_mixed_fidelity,
    depolarized_fidelity, fidelity_with_povm, measurement_registry, pbt_channel_choi_with,
    PbtSetup, Resource,
};
use pbtlab::statefile::{load_density, load_operator};
use pbtlab::states::DensityOperator;
use pbtlab::sweep::{run_sweep, to_csv, RunRecord, SweepSpec};
use pbtlab::tensor::{eigh, Ket, DEFAULT_DIM_CAP};
use pbtlab::Error;

const CAP_ENV: &str = "PBTLAB_DIM_CAP";
/// Coefficients typed at the command line are renormalized when their squares
/// sum to 1 within this tolerance.
const CLI_COEFFICIENT_TOL: f64 = 1e-5;
const PURITY_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "pbtlab",
    version,
    about = "Port-based and controlled port-based teleportation simulator"
)]
struct Cli {
    /// Largest ambient dimension any exact computation may build (overrides PBTLAB_DIM_CAP).
    #[arg(long, global = true)]
    dim_cap: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fully entangled fraction and teleportation fidelity of a bipartite state file.
    Fef(FefArgs),
    /// Exact and asymptotic port-based teleportation fidelities.
    Pbt(PbtArgs),
    /// (M, p) sweep over isotropic resources, written as CSV.
    Sweep(SweepArgs),
    /// Control power of a three-qubit pure state.
    ControlPower(ControlArgs),
    /// List the registered strategies.
    Strategies,
}

#[derive(Args, Serialize)]
struct FefArgs {
    #[arg(long)]
    state: PathBuf,
    /// FEF solver: auto, magic or iterative.
    #[arg(long, default_value = "auto")]
    fef: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ResourceKind {
    Maxent,
    Isotropic,
    Custom,
}

#[derive(Args, Serialize)]
struct PbtArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long, value_enum, default_value = "maxent")]
    resource: ResourceKind,
    /// Isotropic visibility.
    #[arg(long)]
    p: Option<f64>,
    /// Resource state file for --resource custom.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Alice's operation on her ports, as a state-file style matrix.
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Also build the channel's Choi state.
    #[arg(long)]
    choi: bool,
    /// Haar samples for a Monte Carlo check of the teleportation fidelity (needs --choi).
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    asymptotic_only: bool,
    /// Port measurement: pgm or pgm-adapted.
    #[arg(long, default_value = "pgm")]
    measurement: String,
    #[arg(long, default_value = "auto")]
    fef: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    d: usize,
    /// Port range `start..end` or `start..end:step`, inclusive; a single value is allowed.
    #[arg(long = "M")]
    m: String,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    p: Vec<f64>,
    #[arg(long, default_value = "pgm")]
    measurement: String,
    #[arg(long)]
    asymptotic_only: bool,
    /// Comma-separated subset of the CSV columns.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Accepted for uniformity; the sweep is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run record destination.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ControlArgs {
    #[command(subcommand)]
    state: StateSelector,
    #[arg(long = "M", global = true, default_value_t = 10)]
    m: usize,
    #[arg(long, global = true)]
    party: Option<Party>,
    /// Report the minimum over the three parties.
    #[arg(long, global = true)]
    min: bool,
    /// Controller optimizer: grid-simplex or grid.
    #[arg(long, global = true, default_value = "grid-simplex")]
    optimizer: String,
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Serialize)]
enum StateSelector {
    /// a|000> + b|111>
    Ghz {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    /// w0|000> + w1|100> + w2|101> + w3|110>
    Wclass {
        #[arg(long, value_delimiter = ',')]
        w: Vec<f64>,
    },
    /// Pure three-qubit state given as a density-matrix state file.
    File {
        #[arg(long)]
        state: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CapExceeded { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Finished command: its printed output and whether an optimizer fell short.
struct Outcome {
    text: String,
    unconverged: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(out.text.as_bytes());
            match out.unconverged {
                Some(w) => {
                    eprintln!("warning: {w}");
                    ExitCode::from(4)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dim_cap(flag: Option<usize>) -> CliResult<usize> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    match std::env::var(CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| fail(format!("{CAP_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_DIM_CAP),
    }
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let cap = dim_cap(cli.dim_cap)?;
    let started = Instant::now();
    match cli.command {
        Command::Fef(args) => cmd_fef(&args, started),
        Command::Pbt(args) => cmd_pbt(&args, cap, started),
        Command::Sweep(args) => cmd_sweep(&args, cap, started),
        Command::ControlPower(args) => cmd_control_power(&args, started),
        Command::Strategies => Ok(Outcome {
            text: strategies(),
            unconverged: None,
        }),
    }
}

fn strategies() -> String {
    let mut out = String::new();
    let mut section = |title: &str, rows: Vec<(&'static str, &'static str)>| {
        out.push_str(title);
        out.push('\n');
        for (name, summary) in rows {
            out.push_str(&format!("  {name:<14} {summary}\n"));
        }
    };
    section(
        "fef solvers (--fef):",
        fef_registry(FefOptions::default())
            .iter()
            .map(|s| (s.name(), s.summary()))
            .collect(),
    );
    section(
        "port measurements (--measurement):",
        measurement_registry()
            .iter()
            .map(|s| (s.name(), s.summary()))
            .collect(),
    );
    section(
        "controller optimizers (--optimizer):",
        controller_registry(ControllerOptions::default())
            .iter()
            .map(|s| (s.name(), s.summary()))
            .collect(),
    );
    out
}

fn fef_solver(name: &str, seed: u64, starts: usize) -> CliResult<Arc<dyn FefSolver>> {
    let opts = FefOptions {
        seed,
        starts,
        ..FefOptions::default()
    };
    Ok(fef_registry(opts).get(name)?)
}

fn render<I: Serialize, V: Serialize>(
    json: bool,
    command: &str,
    inputs: &I,
    values: &V,
    seed: Option<u64>,
    started: Instant,
    lines: Vec<(String, String)>,
) -> String {
    if json {
        let record = RunRecord::new(command, inputs, values, seed, started);
        let mut s = serde_json::to_string_pretty(&record).expect("plain data serializes");
        s.push('\n');
        s
    } else {
        let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        lines
            .into_iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Serialize)]
struct FefValues {
    d: usize,
    fully_entangled_fraction: f64,
    teleportation_fidelity: f64,
    classical_threshold: f64,
    meaningful: bool,
    solver: String,
    converged: bool,
    iterations: usize,
    starts: usize,
    maximizer: Vec<Vec<[f64; 2]>>,
}

fn cmd_fef(args: &FefArgs, started: Instant) -> CliResult<Outcome> {
    let rho = load_density(&args.state)?;
    let d = rho.bipartite_dim()?;
    let solver = fef_solver(&args.fef, args.seed, args.starts)?;
    let r = solver.solve(&rho)?;
    let f = r.value.clamp(0.0, 1.0);
    let values = FefValues {
        d,
        fully_entangled_fraction: f,
        teleportation_fidelity: teleportation_fidelity_from_f(f, d)?,
        classical_threshold: classical_teleportation_threshold(d),
        meaningful: f > 1.0 / d as f64 + 1e-12,
        solver: solver.name().into(),
        converged: r.converged,
        iterations: r.iterations,
        starts: r.starts,
        maximizer: (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| [r.maximizer[(i, j)].re, r.maximizer[(i, j)].im])
                    .collect()
            })
            .collect(),
    };
    let lines = vec![
        kv("d", d),
        kv(
            "fully_entangled_fraction",
            num(values.fully_entangled_fraction),
        ),
        kv("teleportation_fidelity", num(values.teleportation_fidelity)),
        kv("classical_threshold", num(values.classical_threshold)),
        kv("meaningful", values.meaningful),
        kv(
            "maximizer",
            format!(
                "{} solver, {} start(s), {} iteration(s), converged={}",
                values.solver, values.starts, values.iterations, values.converged
            ),
        ),
    ];
    let text = render(
        args.json,
        "fef",
        args,
        &values,
        Some(args.seed),
        started,
        lines,
    );
    Ok(Outcome {
        text,
        unconverged: (!r.converged)
            .then(|| "fully entangled fraction ascent did not converge".to_string()),
    })
}

#[derive(Serialize, Default)]
struct PbtValues {
    f_exact: Option<f64>,
    ft_exact: Option<f64>,
    resource_fef: Option<f64>,
    f_thm1: Option<f64>,
    f_thm2: Option<f64>,
    f_thm3: Option<f64>,
    f_asym: Option<f64>,
    ft_asym: Option<f64>,
    gap_thm1: Option<f64>,
    gap_thm2: Option<f64>,
    gap_thm3: Option<f64>,
    choi_f: Option<f64>,
    mc_ft: Option<f64>,
    mc_stderr: Option<f64>,
    warnings: Vec<String>,
}

fn resource_from(args: &PbtArgs) -> CliResult<Resource> {
    match args.resource {
        ResourceKind::Maxent => Ok(Resource::MaxEntangled),
        ResourceKind::Isotropic => args
            .p
            .map(Resource::Isotropic)
            .ok_or_else(|| fail("--resource isotropic needs --p")),
        ResourceKind::Custom => {
            let path = args
                .state
                .as_ref()
                .ok_or_else(|| fail("--resource custom needs --state"))?;
            Ok(Resource::Custom(load_density(path)?))
        }
    }
}

fn cmd_pbt(args: &PbtArgs, cap: usize, started: Instant) -> CliResult<Outcome> {
    let (d, m) = (args.d, args.m);
    let mut setup = PbtSetup::new(d, m, resource_from(args)?)?.with_cap(cap);
    if let Some(path) = &args.operator {
        setup = setup.with_alice_op(load_operator(path)?)?;
    }
    let measurement = measurement_registry().get(&args.measurement)?;
    let solver = fef_solver(&args.fef, args.seed, FefOptions::default().starts)?;
    let mut v = PbtValues::default();

    let rho = setup.resource_state()?;
    let fef = solver.solve(&rho)?;
    let f_res = fef.value.clamp(1.0 / (d * d) as f64, 1.0);
    v.resource_fef = Some(f_res);
    let mixed = asymptotic_mixed_fidelity(f_res, m, d)?;
    v.f_thm3 = Some(mixed.value());
    let standard = asymptotic_entanglement_fidelity(m, d)?;
    v.f_asym = Some(standard.value());
    match setup.resource() {
        Resource::Isotropic(p) => v.f_thm2 = Some(asymptotic_isotropic_fidelity(*p, m, d)?.value()),
        Resource::MaxEntangled => v.f_thm2 = Some(standard.value()),
        Resource::Custom(_) => {}
    }
    v.ft_asym = Some(teleportation_fidelity_from_f(mixed.value(), d)?);
    if mixed.raw_value() != mixed.value() || standard.raw_value() != standard.value() {
        v.warnings
            .push("asymptotic estimate clamped to [0, 1]".into());
    }

    if !args.asymptotic_only {
        let povm = measurement.build(&setup)?;
        let f = fidelity_with_povm(&setup, &povm)?;
        v.f_exact = Some(f);
        v.ft_exact = Some(teleportation_fidelity_from_f(f, d)?);
        if let Resource::Isotropic(p) = setup.resource() {
            let ideal = setup.ideal();
            let ideal_povm = if measurement.depends_on_resource() {
                measurement.build(&ideal)?
            } else {
                povm
            };
            let f_max = fidelity_with_povm(&ideal, &ideal_povm)?;
            v.f_thm1 = Some(depolarized_fidelity(*p, f_max, d)?);
        }
        let gap = |x: Option<f64>| x.map(|x| (f - x).abs());
        v.gap_thm1 = gap(v.f_thm1);
        v.gap_thm2 = gap(v.f_thm2);
        v.gap_thm3 = gap(v.f_thm3);
        if args.choi {
            let ch = pbt_channel_choi_with(&setup, &*measurement)?;
            v.choi_f = Some(entanglement_fidelity(&ch));
            if args.mc_samples > 0 {
                let mc = mc_teleportation_fidelity(&ch, args.mc_samples, args.seed)?;
                v.mc_ft = Some(mc.estimate);
                v.mc_stderr = Some(mc.stderr);
            }
        }
    }

    let mut lines = vec![
        kv("d", d),
        kv("M", m),
        kv("resource", setup.resource().label()),
        kv("measurement", measurement.name()),
    ];
    let fields = [
        ("F_exact", v.f_exact),
        ("FT_exact", v.ft_exact),
        ("resource_fef", v.resource_fef),
        ("F_thm1", v.f_thm1),
        ("F_thm2", v.f_thm2),
        ("F_thm3", v.f_thm3),
        ("F_asym", v.f_asym),
        ("FT_asym", v.ft_asym),
        ("gap_thm1", v.gap_thm1),
        ("gap_thm2", v.gap_thm2),
        ("gap_thm3", v.gap_thm3),
        ("choi_F", v.choi_f),
        ("mc_FT", v.mc_ft),
        ("mc_stderr", v.mc_stderr),
    ];
    lines.extend(fields.iter().filter_map(|(k, x)| x.map(|x| kv(k, num(x)))));
    lines.extend(v.warnings.iter().map(|w| kv("warning", w)));
    let text = render(args.json, "pbt", args, &v, Some(args.seed), started, lines);
    Ok(Outcome {
        text,
        unconverged: (!fef.converged)
            .then(|| "fully entangled fraction ascent did not converge".to_string()),
    })
}

fn parse_ports(text: &str) -> CliResult<(usize, usize, usize)> {
    let bad = || fail(format!("--M {text:?}: expected N, A..B or A..B:STEP"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let (range, step) = match text.split_once(':') {
        Some((r, s)) => (r, num(s)?),
        None => (text, 1),
    };
    match range.split_once("..") {
        Some((a, b)) => Ok((num(a)?, num(b.trim_start_matches('='))?, step)),
        None => {
            let n = num(range)?;
            Ok((n, n, step))
        }
    }
}

#[derive(Serialize)]
struct SweepValues {
    rows: usize,
    csv: Option<String>,
    rows_data: Vec<pbtlab::sweep::SweepRow>,
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

fn cmd_sweep(args: &SweepArgs, cap: usize, started: Instant) -> CliResult<Outcome> {
    let (m_start, m_end, m_step) = parse_ports(&args.m)?;
    let spec = SweepSpec {
        d: args.d,
        m_start,
        m_end,
        m_step,
        p_grid: args.p.clone(),
        measurement: args.measurement.clone(),
        cap,
        asymptotic_only: args.asymptotic_only,
        columns: args.columns.clone(),
    };
    let rows = run_sweep(&spec)?;
    let csv = to_csv(&spec, &rows);
    let text = match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            format!("wrote {} rows to {}\n", rows.len(), path.display())
        }
        None => csv,
    };
    if let Some(path) = &args.record {
        let values = SweepValues {
            rows: rows.len(),
            csv: args.out.as_ref().map(|p| p.display().to_string()),
            rows_data: rows,
        };
        let record = RunRecord::new("sweep", &spec, &values, Some(args.seed), started);
        write_file(
            path,
            &serde_json::to_string_pretty(&record).expect("plain data serializes"),
        )?;
    }
    Ok(Outcome {
        text,
        unconverged: None,
    })
}

/// Renormalizes hand-typed coefficients that are within the CLI tolerance of unit norm.
fn renormalized(name: &str, coeffs: &[f64]) -> CliResult<Vec<f64>> {
    let norm2: f64 = coeffs.iter().map(|x| x * x).sum();
    if (norm2 - 1.0).abs() > CLI_COEFFICIENT_TOL {
        return Err(fail(format!(
            "{name} coefficients must have squares summing to 1 (got {norm2})"
        )));
    }
    Ok(coeffs.iter().map(|x| x / norm2.sqrt()).collect())
}

fn pure_from_density(rho: &DensityOperator) -> CliResult<TripartiteState> {
    let purity = rho.op().trace_product(rho.op()).re;
    if (purity - 1.0).abs() > PURITY_TOL {
        return Err(fail(format!("state file is not pure: Tr rho^2 = {purity}")));
    }
    let e = eigh(rho.op())?;
    let top = e.ket(e.values.len() - 1);
    let ket = Ket::new(rho.shape().clone(), top.amplitudes().clone())?;
    Ok(TripartiteState::new(ket)?)
}

fn tripartite(selector: &StateSelector) -> CliResult<TripartiteState> {
    match selector {
        StateSelector::Ghz { a, b } => {
            let c = renormalized("GHZ", &[*a, *b])?;
            Ok(ghz_extended(c[0], c[1])?)
        }
        StateSelector::Wclass { w } => {
            if w.len() != 4 {
                return Err(fail(format!("--w needs 4 coefficients, got {}", w.len())));
            }
            let c = renormalized("W-class", w)?;
            Ok(w_class(c[0], c[1], c[2], c[3])?)
        }
        StateSelector::File { state } => pure_from_density(&load_density(state)?),
    }
}

#[derive(Serialize)]
struct ControlValues {
    reports: Vec<ControlPowerReport>,
    minimal: Option<ControlPowerReport>,
}

fn cmd_control_power(args: &ControlArgs, started: Instant) -> CliResult<Outcome> {
    let state = tripartite(&args.state)?;
    let optimizer = controller_registry(ControllerOptions::default()).get(&args.optimizer)?;
    let solver = fef_solver("auto", 0, FefOptions::default().starts)?;
    let parties: Vec<Party> = match (args.party, args.min) {
        (Some(p), false) => vec![p],
        _ => Party::ALL.to_vec(),
    };
    let reports = parties
        .iter()
        .map(|&p| pbtlab::cpbt::control_power_with(&state, p, args.m, &*optimizer, &*solver))
        .collect::<pbtlab::Result<Vec<_>>>()?;
    let minimal = if args.min {
        minimal_of(&reports).cloned()
    } else {
        None
    };
    let mut lines = vec![kv("M", args.m), kv("optimizer", optimizer.name())];
    for r in &reports {
        let p = r.party;
        lines.push(kv(&format!("f_ct[{p}]"), num(r.f_ct)));
        lines.push(kv(&format!("f_ct_M[{p}]"), num(r.f_ct_m)));
        lines.push(kv(&format!("f_nc_M[{p}]"), num(r.f_nc_m)));
        lines.push(kv(&format!("power_M[{p}]"), num(r.power_m)));
    }
    if let Some(min) = &minimal {
        lines.push(kv("min_party", min.party));
        lines.push(kv("min_power_M", num(min.power_m)));
    }
    let unconverged = reports
        .iter()
        .filter(|r| !r.optimizer_trace.converged)
        .map(|r| r.party.to_string())
        .collect::<Vec<_>>();
    if !unconverged.is_empty() {
        lines.push(kv(
            "warning",
            format!("optimizer did not converge for {}", unconverged.join(",")),
        ));
    }
    let values = ControlValues { reports, minimal };
    let text = render(
        args.json,
        "control-power",
        args,
        &values,
        None,
        started,
        lines,
    );
    Ok(Outcome {
        text,
        unconverged: (!unconverged.is_empty()).then(|| {
            format!(
                "controller optimizer did not converge for party {}",
                unconverged.join(",")
            )
        }),
    })
}
