mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

const SCHEMAS: &str = "\
Output:
  Every command writes a key=value log to stdout, starting with the resolved
  configuration (config.<key>=<value>). Errors go to stderr as
  error.kind=<kind> and error.message=<text>.

CSV schemas:
  eval   molecule_id,e_mae,f_mae,dip_mae,t1_mae,t2_mae,l1_mae,l2_mae
         one row per molecule, then a `mean` row; hartree, hartree/bohr, e*bohr;
         nan where a label is absent
  bench  system,n_orbitals,t_solver_s,t_surrogate_s
         wall-clock medians in seconds

Config file:
  flat `key = value` lines, `#` comments; keys are the long flag names with
  `-` or `_`. Flags override the file.

Exit codes:
  0 success, 2 usage or input error, 3 convergence failure, 4 I/O or corrupt data";

#[derive(Parser, Debug)]
#[command(name = "ccresp", version, about = "Coupled-cluster response states and their surrogate", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum number of concurrent independent solves (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Basis set name.
    #[arg(long, global = true)]
    basis: Option<String>,
    /// CC residual max-norm threshold.
    #[arg(long, global = true)]
    cc_tol: Option<f64>,
    #[arg(long, global = true)]
    cc_max_iter: Option<usize>,
    /// SCF energy threshold.
    #[arg(long, global = true)]
    scf_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Restricted Hartree-Fock single point.
    Scf(ScfArgs),
    /// CCSD single point, optionally with the Λ equations.
    Ccsd(CcsdArgs),
    /// Properties from the Λ-state densities.
    Props(PropsArgs),
    /// Label a multi-frame XYZ file into a dataset container.
    DatasetGen(DatasetArgs),
    /// Train the surrogate on a dataset container.
    Train(TrainArgs),
    /// Evaluate a trained surrogate; writes the metrics CSV.
    Eval(EvalArgs),
    /// Time CCSD+Λ against surrogate inference on hydrogen chains.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct ScfArgs {
    /// XYZ geometry (Å) or FCIDUMP file.
    input: Option<PathBuf>,
    /// Container for the SCF result.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CcsdArgs {
    input: Option<PathBuf>,
    /// Also solve the Λ equations.
    #[arg(long)]
    lambda: bool,
    /// Container for the CC result.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PropsArgs {
    /// XYZ geometry (Å).
    input: Option<PathBuf>,
    #[arg(long)]
    dipole: bool,
    #[arg(long)]
    quadrupole: bool,
    /// Frozen-orbital finite-field polarizability.
    #[arg(long)]
    polarizability: bool,
    /// Central-difference CCSD forces.
    #[arg(long)]
    forces: bool,
    /// Write the electron density as a cube file.
    #[arg(long)]
    density_cube: Option<PathBuf>,
    /// Write the pair density Π(r_ref, r) as a cube file.
    #[arg(long)]
    pair_density: Option<PathBuf>,
    /// Reference point `x,y,z` (bohr) for --pair-density.
    #[arg(long, allow_hyphen_values = true)]
    pair_ref: Option<String>,
    /// Write the on-top pair density Π(r, r) as a cube file.
    #[arg(long)]
    ontop: Option<PathBuf>,
    /// Field step for the polarizability, a.u.
    #[arg(long)]
    field_step: Option<f64>,
    /// Displacement for forces, bohr.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Cube grid spacing, bohr.
    #[arg(long)]
    grid_spacing: Option<f64>,
    /// Cube box margin around the nuclei, bohr.
    #[arg(long)]
    grid_margin: Option<f64>,
    /// Container for the property report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Multi-frame XYZ file (Å).
    input: Option<PathBuf>,
    /// Also label finite-difference forces.
    #[arg(long)]
    forces: bool,
    #[arg(long)]
    fd_step: Option<f64>,
    /// Dataset container to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset container.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model container to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `residual` (learn the deviation from MP2) or `direct`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Molecules per gradient step (0 = full batch).
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Locality cutoff on orbital-centroid distances, bohr.
    #[arg(long)]
    r_cut: Option<f64>,
    #[arg(long)]
    radial_bins: Option<usize>,
    /// Parameters compared against finite differences before training.
    #[arg(long)]
    check_params: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model container.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset container with reference labels.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Metrics CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip force metrics.
    #[arg(long)]
    no_forces: bool,
    #[arg(long)]
    fd_step: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Chain lengths, comma separated.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Trained model container; an untrained model of --hidden width otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Timing CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

const COMMON_DEFAULTS: [(&str, &str); 5] = [
    ("threads", "0"),
    ("basis", "sto-3g"),
    ("cc_tol", "1e-10"),
    ("cc_max_iter", "200"),
    ("scf_tol", "1e-12"),
];

fn s<T: ToString>(x: &Option<T>) -> Option<String> {
    x.as_ref().map(ToString::to_string)
}

fn p(x: &Option<PathBuf>) -> Option<String> {
    x.as_ref().map(|p| p.display().to_string())
}

fn on(b: bool) -> Option<String> {
    b.then(|| "true".to_string())
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("threads", s(&self.threads)),
            ("basis", s(&self.basis)),
            ("cc_tol", s(&self.cc_tol)),
            ("cc_max_iter", s(&self.cc_max_iter)),
            ("scf_tol", s(&self.scf_tol)),
        ]
    }
}

fn resolve(common: &Common, defaults: &[(&'static str, &'static str)], flags: Vec<(&'static str, Option<String>)>) -> ccresp::Result<RunConfig> {
    let mut all: Vec<(&str, &str)> = COMMON_DEFAULTS.to_vec();
    all.extend_from_slice(defaults);
    let mut f = common.flags();
    f.extend(flags);
    RunConfig::resolve(&all, common.config.as_deref(), f)
}

fn configure(cmd: &Command) -> ccresp::Result<(&'static str, RunConfig)> {
    Ok(match cmd {
        Command::Scf(a) => (
            "scf",
            resolve(&a.common, &[("input", ""), ("out", "")], vec![("input", p(&a.input)), ("out", p(&a.out))])?,
        ),
        Command::Ccsd(a) => (
            "ccsd",
            resolve(
                &a.common,
                &[("input", ""), ("lambda", "false"), ("out", "")],
                vec![("input", p(&a.input)), ("lambda", on(a.lambda)), ("out", p(&a.out))],
            )?,
        ),
        Command::Props(a) => (
            "props",
            resolve(
                &a.common,
                &[
                    ("input", ""),
                    ("dipole", "false"),
                    ("quadrupole", "false"),
                    ("polarizability", "false"),
                    ("forces", "false"),
                    ("density_cube", ""),
                    ("pair_density", ""),
                    ("pair_ref", ""),
                    ("ontop", ""),
                    ("field_step", "1e-3"),
                    ("fd_step", "1e-3"),
                    ("grid_spacing", "0.25"),
                    ("grid_margin", "4.0"),
                    ("out", ""),
                ],
                vec![
                    ("input", p(&a.input)),
                    ("dipole", on(a.dipole)),
                    ("quadrupole", on(a.quadrupole)),
                    ("polarizability", on(a.polarizability)),
                    ("forces", on(a.forces)),
                    ("density_cube", p(&a.density_cube)),
                    ("pair_density", p(&a.pair_density)),
                    ("pair_ref", s(&a.pair_ref)),
                    ("ontop", p(&a.ontop)),
                    ("field_step", s(&a.field_step)),
                    ("fd_step", s(&a.fd_step)),
                    ("grid_spacing", s(&a.grid_spacing)),
                    ("grid_margin", s(&a.grid_margin)),
                    ("out", p(&a.out)),
                ],
            )?,
        ),
        Command::DatasetGen(a) => (
            "dataset-gen",
            resolve(
                &a.common,
                &[("input", ""), ("forces", "false"), ("fd_step", "1e-3"), ("out", "")],
                vec![
                    ("input", p(&a.input)),
                    ("forces", on(a.forces)),
                    ("fd_step", s(&a.fd_step)),
                    ("out", p(&a.out)),
                ],
            )?,
        ),
        Command::Train(a) => (
            "train",
            resolve(
                &a.common,
                &[
                    ("data", ""),
                    ("out", ""),
                    ("mode", "residual"),
                    ("hidden", "8"),
                    ("epochs", "20000"),
                    ("lr", "0.1"),
                    ("batch", "0"),
                    ("seed", "0"),
                    ("r_cut", "10"),
                    ("radial_bins", "6"),
                    ("check_params", "10"),
                ],
                vec![
                    ("data", p(&a.data)),
                    ("out", p(&a.out)),
                    ("mode", s(&a.mode)),
                    ("hidden", s(&a.hidden)),
                    ("epochs", s(&a.epochs)),
                    ("lr", s(&a.lr)),
                    ("batch", s(&a.batch)),
                    ("seed", s(&a.seed)),
                    ("r_cut", s(&a.r_cut)),
                    ("radial_bins", s(&a.radial_bins)),
                    ("check_params", s(&a.check_params)),
                ],
            )?,
        ),
        Command::Eval(a) => (
            "eval",
            resolve(
                &a.common,
                &[("model", ""), ("data", ""), ("out", ""), ("forces", "true"), ("fd_step", "1e-3")],
                vec![
                    ("model", p(&a.model)),
                    ("data", p(&a.data)),
                    ("out", p(&a.out)),
                    ("forces", a.no_forces.then(|| "false".to_string())),
                    ("fd_step", s(&a.fd_step)),
                ],
            )?,
        ),
        Command::Bench(a) => (
            "bench",
            resolve(
                &a.common,
                &[
                    ("sizes", "2,4,6,8,10"),
                    ("repeats", "3"),
                    ("model", ""),
                    ("hidden", "8"),
                    ("seed", "0"),
                    ("out", ""),
                ],
                vec![
                    ("sizes", s(&a.sizes)),
                    ("repeats", s(&a.repeats)),
                    ("model", p(&a.model)),
                    ("hidden", s(&a.hidden)),
                    ("seed", s(&a.seed)),
                    ("out", p(&a.out)),
                ],
            )?,
        ),
    })
}

fn run(cli: &Cli) -> ccresp::Result<()> {
    let (name, cfg) = configure(&cli.command)?;
    let threads: usize = cfg.get("threads")?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| ccresp::Error::Invalid(format!("thread pool: {e}")))?;
    print!("command={name}\n{}", cfg.echo());
    println!("threads.active={}", rayon::current_num_threads());
    commands::dispatch(name, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {
            println!("status=ok");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error.kind={}", commands::error_kind(&e));
            eprintln!("error.message={e}");
            println!("status=error");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
