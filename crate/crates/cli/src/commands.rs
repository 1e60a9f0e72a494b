use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use adawct::{
    analyze_convergence, project_style, random_spd, shrink, whitening_residual, ActivationMap, CovarianceMatrix,
    GroupLayout, Injection, NewtonSchulzConfig, Rng, SolverRegistry, StyleVector, SymmetricMatrix,
};
use clap::{Args, Parser, Subcommand};

use crate::exit::{CliError, CliResult, Exit};
use crate::report::{BenchRecord, BenchReport};
use crate::suites::{self, VerifyConfig};
use crate::tensor_file::TensorFile;

/// Largest matrix order accepted by `bench`.
pub const MAX_BENCH_ORDER: usize = 512;

/// Largest tolerated `|a_ij - a_ji|` for `spectrum` input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "adawct", version, about = "Grouped whitening and coloring with Newton-Schulz inverse square roots")]
pub struct Cli {
    /// Worker threads. Numerical output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group-wise whitening of a rank-3 (C, H, W) tensor file.
    Whiten(WhitenArgs),
    /// Whitening followed by coloring from a projected style vector.
    Inject(InjectArgs),
    /// Run the seeded property suites.
    Verify(VerifyArgs),
    /// Time Newton-Schulz against the eigendecomposition oracle.
    Bench(BenchArgs),
    /// Spectrum of I - Σ/‖Σ‖_F for a rank-2 symmetric PSD tensor file.
    Spectrum(SpectrumArgs),
    /// Write seeded random inputs.
    #[command(subcommand)]
    Generate(GenerateKind),
}

#[derive(Debug, Clone, Args)]
pub struct TransformFlags {
    /// Channels per group; must divide C. Defaults to C (one group).
    #[arg(long = "groups")]
    pub group_size: Option<usize>,
    #[arg(long, default_value_t = adawct::newton_schulz::DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long, default_value_t = adawct::newton_schulz::DEFAULT_EPSILON, allow_negative_numbers = true)]
    pub eps: f64,
    /// Divide centered activations by their global standard deviation first.
    #[arg(long)]
    pub uniform_norm: bool,
    /// Inverse square root strategy.
    #[arg(long, default_value = "newton-schulz")]
    pub solver: String,
}

#[derive(Debug, Args)]
pub struct WhitenArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[command(flatten)]
    pub flags: TransformFlags,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Rank-1 tensor file holding the style vector.
    #[arg(long, conflicts_with = "seed", required_unless_present = "seed")]
    pub style: Option<PathBuf>,
    /// Synthesize a Gaussian style vector from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Style vector length; must match the style file when both are given.
    #[arg(long)]
    pub style_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub projector_seed: u64,
    #[command(flatten)]
    pub flags: TransformFlags,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 32, 64])]
    pub channels: Vec<usize>,
    #[arg(long, default_value_t = 1e-5, allow_negative_numbers = true)]
    pub eps: f64,
    #[arg(long, default_value_t = 14)]
    pub iters: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32, 64])]
    pub orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![14])]
    pub iters: Vec<usize>,
    #[arg(long, default_value_t = 1e-5, allow_negative_numbers = true)]
    pub eps: f64,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    pub input: PathBuf,
    /// Shrink by εI before the analysis.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Standard normal (C, H, W) activations.
    Activations {
        output: PathBuf,
        #[arg(long)]
        channels: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random SPD matrix with eigenvalues uniform in [eig-min, eig-max].
    Spd {
        output: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        eig_min: f64,
        #[arg(long, default_value_t = 10.0)]
        eig_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Standard normal style vector.
    Style {
        output: PathBuf,
        #[arg(long, default_value_t = adawct::style::DEFAULT_STYLE_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    Exit::Ok.code()
                }
                _ => {
                    let _ = write!(err, "{e}");
                    Exit::BadArguments.code()
                }
            };
        }
    };

    let threads = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: --threads must be positive");
            return Exit::BadArguments.code();
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            return Exit::BadArguments.code();
        }
    };

    // Output is buffered so the command can run inside the pool.
    let mut buffer = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buffer));
    let _ = out.write_all(&buffer);
    let _ = out.flush();
    match result {
        Ok(exit) => exit.code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit.code()
        }
    }
}

fn dispatch(command: Command, out: &mut Vec<u8>) -> CliResult<Exit> {
    match command {
        Command::Whiten(args) => cmd_whiten(&args, out),
        Command::Inject(args) => cmd_inject(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::Spectrum(args) => cmd_spectrum(&args, out),
        Command::Generate(kind) => cmd_generate(&kind, out),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn check_epsilon(eps: f64) -> CliResult<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::bad_args(format!("--eps must be a positive number, got {eps}")))
    }
}

fn check_iterations(iters: usize) -> CliResult<()> {
    if (1..=adawct::newton_schulz::MAX_ITERATIONS).contains(&iters) {
        Ok(())
    } else {
        Err(CliError::bad_args(format!(
            "--iters must be in 1..={}, got {iters}",
            adawct::newton_schulz::MAX_ITERATIONS
        )))
    }
}

fn ns_config(iters: usize, eps: f64) -> CliResult<NewtonSchulzConfig> {
    check_iterations(iters)?;
    check_epsilon(eps)?;
    Ok(NewtonSchulzConfig {
        iterations: iters,
        epsilon: eps,
        ..NewtonSchulzConfig::default()
    })
}

fn read_tensor(path: &Path) -> CliResult<TensorFile> {
    TensorFile::read(path).map_err(|e| CliError::from_format(&display(path), e))
}

fn write_tensor(path: &Path, tensor: &TensorFile) -> CliResult<()> {
    tensor
        .write(path)
        .map_err(|e| CliError::bad_args(format!("cannot write {}: {e}", display(path))))
}

fn read_activations(path: &Path) -> CliResult<ActivationMap> {
    let tensor = read_tensor(path)?;
    if tensor.rank() != 3 {
        return Err(CliError::bad_args(format!(
            "{}: expected a rank-3 (C, H, W) tensor, got rank {}",
            display(path),
            tensor.rank()
        )));
    }
    let (c, h, w) = (tensor.dims[0], tensor.dims[1], tensor.dims[2]);
    ActivationMap::new(c, h, w, tensor.to_f64()).map_err(|e| match e {
        adawct::Error::NonFinite { index } => {
            CliError::malformed(format!("{}: non-finite value at index {index}", display(path)))
        }
        other => CliError::bad_args(format!("{}: {other}", display(path))),
    })
}

fn write_activations(path: &Path, x: &ActivationMap) -> CliResult<()> {
    if let Some(index) = x.as_slice().iter().position(|v| !(*v as f32).is_finite()) {
        return Err(CliError::new(
            Exit::Divergence,
            format!("output value at index {index} overflows 32-bit storage"),
        ));
    }
    let tensor = TensorFile::from_f64(vec![x.channels(), x.height(), x.width()], x.as_slice())
        .map_err(|e| CliError::bad_args(e.to_string()))?;
    write_tensor(path, &tensor)
}

/// Validates the grouping and solver flags against the input.
fn prepare(flags: &TransformFlags, x: &ActivationMap) -> CliResult<(GroupLayout, Box<dyn adawct::WhiteningSolver>)> {
    let config = ns_config(flags.iters, flags.eps)?;
    let group_size = flags.group_size.unwrap_or(x.channels());
    let layout = GroupLayout::new(x.channels(), group_size).map_err(|_| {
        CliError::bad_args(format!(
            "--groups {group_size} must divide the channel count {}",
            x.channels()
        ))
    })?;
    let registry = SolverRegistry::with_builtins();
    let solver = registry.create(&flags.solver, config).map_err(|_| {
        let known: Vec<&str> = registry.names().collect();
        CliError::bad_args(format!("--solver {} is not one of {}", flags.solver, known.join(", ")))
    })?;
    Ok((layout, solver))
}

fn print_groups(out: &mut dyn Write, layout: &GroupLayout, injection: &Injection) -> CliResult<()> {
    for (j, result) in injection.whitening.iter().enumerate() {
        let range = layout.group(j);
        writeln!(
            out,
            "group={j} channels={}..{} residual={:e} converged={}",
            range.start,
            range.end,
            result.final_residual(),
            result.converged
        )?;
    }
    Ok(())
}

pub fn cmd_whiten(args: &WhitenArgs, out: &mut dyn Write) -> CliResult<Exit> {
    let x = read_activations(&args.input)?;
    let (layout, solver) = prepare(&args.flags, &x)?;
    let injection = adawct::whiten_grouped_with(solver.as_ref(), &x, &layout, args.flags.uniform_norm)
        .map_err(|e| CliError::from_core("whitening", e))?;
    write_activations(&args.output, &injection.output)?;
    print_groups(out, &layout, &injection)?;
    Ok(Exit::Ok)
}

fn load_style(args: &InjectArgs) -> CliResult<StyleVector> {
    if args.style_dim == Some(0) {
        return Err(CliError::bad_args("--style-dim must be positive"));
    }
    match (&args.style, args.seed) {
        (Some(path), _) => {
            let tensor = read_tensor(path)?;
            if tensor.rank() != 1 {
                return Err(CliError::bad_args(format!(
                    "{}: style must be a rank-1 tensor, got rank {}",
                    display(path),
                    tensor.rank()
                )));
            }
            if let Some(dim) = args.style_dim {
                if dim != tensor.data.len() {
                    return Err(CliError::bad_args(format!(
                        "--style-dim {dim} does not match the style file length {}",
                        tensor.data.len()
                    )));
                }
            }
            StyleVector::new(tensor.to_f64()).map_err(|e| match e {
                adawct::Error::NonFinite { .. } => CliError::malformed(format!("{}: {e}", display(path))),
                other => CliError::bad_args(format!("{}: {other}", display(path))),
            })
        }
        (None, Some(seed)) => {
            let dim = args.style_dim.unwrap_or(adawct::style::DEFAULT_STYLE_DIM);
            StyleVector::random(dim, &mut Rng::new(seed)).map_err(|e| CliError::bad_args(e.to_string()))
        }
        (None, None) => Err(CliError::bad_args("either --style or --seed is required")),
    }
}

pub fn cmd_inject(args: &InjectArgs, out: &mut dyn Write) -> CliResult<Exit> {
    let x = read_activations(&args.input)?;
    let (layout, solver) = prepare(&args.flags, &x)?;
    let w = load_style(args)?;
    let style = project_style(&w, &layout, args.projector_seed).map_err(|e| CliError::from_core("projection", e))?;
    let injection = adawct::adawct_with(solver.as_ref(), &x, &style, &layout, args.flags.uniform_norm)
        .map_err(|e| CliError::from_core("injection", e))?;
    write_activations(&args.output, &injection.output)?;
    print_groups(out, &layout, &injection)?;
    Ok(Exit::Ok)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<Exit> {
    check_epsilon(args.eps)?;
    check_iterations(args.iters)?;
    if args.trials == 0 {
        return Err(CliError::bad_args("--trials must be positive"));
    }
    if args.channels.is_empty() || args.channels.iter().any(|&c| c == 0 || c > MAX_BENCH_ORDER) {
        return Err(CliError::bad_args(format!(
            "--channels entries must be in 1..={MAX_BENCH_ORDER}"
        )));
    }
    let config = VerifyConfig {
        trials: args.trials,
        seed: args.seed,
        channels: args.channels.clone(),
        epsilon: args.eps,
        iterations: args.iters,
    };
    let mut all_passed = true;
    for outcome in suites::run_all(&config) {
        writeln!(out, "{outcome}")?;
        all_passed &= outcome.passed();
    }
    Ok(if all_passed { Exit::Ok } else { Exit::VerificationFailed })
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn bench_report(args: &BenchArgs) -> CliResult<BenchReport> {
    check_epsilon(args.eps)?;
    if args.trials == 0 {
        return Err(CliError::bad_args("--trials must be positive"));
    }
    if args.orders.is_empty() || args.orders.iter().any(|&n| n == 0 || n > MAX_BENCH_ORDER) {
        return Err(CliError::bad_args(format!("--orders entries must be in 1..={MAX_BENCH_ORDER}")));
    }
    if args.iters.is_empty() {
        return Err(CliError::bad_args("--iters must not be empty"));
    }
    for &n in &args.iters {
        check_iterations(n)?;
    }

    let mut report = BenchReport::default();
    for &order in &args.orders {
        // The same matrices are reused for every iteration count.
        let mut rng = Rng::new(args.seed ^ order as u64);
        let matrices = (0..args.trials)
            .map(|_| random_spd(order, 0.1, 10.0, &mut rng))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::from_core("bench input", e))?;

        let mut oracle_times = Vec::with_capacity(args.trials);
        let mut oracle_residual = 0.0f64;
        let mut sigma_max_a = 0.0f64;
        for sigma in &matrices {
            let sigma_eps = sigma.add_identity(args.eps);
            let start = Instant::now();
            let w = adawct::oracle_inverse_sqrt(&sigma_eps).map_err(|e| CliError::from_core("oracle", e))?;
            oracle_times.push(start.elapsed().as_secs_f64());
            oracle_residual = oracle_residual.max(residual(&w, &sigma_eps)?);
            let spectral = analyze_convergence(&sigma_eps).map_err(|e| CliError::from_core("spectrum", e))?;
            sigma_max_a = sigma_max_a.max(spectral.sigma_max_a);
        }
        let oracle_time = median(oracle_times);

        for &iterations in &args.iters {
            let config = ns_config(iterations, args.eps)?;
            let mut times = Vec::with_capacity(args.trials);
            let mut ns_residual = 0.0f64;
            for sigma in &matrices {
                let cov = CovarianceMatrix::from_matrix(sigma.clone(), 2);
                let start = Instant::now();
                let result = adawct::newton_schulz(&cov, &config).map_err(|e| CliError::from_core("newton-schulz", e))?;
                times.push(start.elapsed().as_secs_f64());
                ns_residual = ns_residual.max(residual(&result.w, &sigma.add_identity(args.eps))?);
            }
            report.records.push(BenchRecord {
                matrix_order: order,
                iterations,
                epsilon: args.eps,
                ns_wall_time: median(times),
                oracle_wall_time: oracle_time,
                ns_residual,
                oracle_residual,
                sigma_max_a,
            });
        }
    }
    Ok(report)
}

fn residual(w: &SymmetricMatrix, sigma_eps: &SymmetricMatrix) -> CliResult<f64> {
    whitening_residual(w, sigma_eps).map_err(|e| CliError::from_core("residual", e))
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CliResult<Exit> {
    let report = bench_report(args)?;
    match &args.out {
        Some(path) => std::fs::write(path, report.to_string())
            .map_err(|e| CliError::bad_args(format!("cannot write {}: {e}", display(path))))?,
        None => write!(out, "{report}")?,
    }
    let violated = report.records.iter().any(|r| !(r.sigma_max_a < 1.0));
    Ok(if violated { Exit::VerificationFailed } else { Exit::Ok })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn cmd_spectrum(args: &SpectrumArgs, out: &mut dyn Write) -> CliResult<Exit> {
    let tensor = read_tensor(&args.input)?;
    let path = display(&args.input);
    if tensor.rank() != 2 {
        return Err(CliError::bad_args(format!("{path}: expected a rank-2 matrix, got rank {}", tensor.rank())));
    }
    if tensor.dims[0] != tensor.dims[1] || tensor.dims[0] == 0 {
        return Err(CliError::bad_args(format!(
            "{path}: expected a non-empty square matrix, got {}x{}",
            tensor.dims[0], tensor.dims[1]
        )));
    }
    let n = tensor.dims[0];
    let raw = adawct::Matrix::new(n, n, tensor.to_f64())
        .map_err(|e| CliError::malformed(format!("{path}: {e}")))?;
    let asymmetry = raw.asymmetry();
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(CliError::new(
            Exit::SymmetryViolation,
            format!("{path}: matrix is not symmetric (max |a_ij - a_ji| = {asymmetry:e})"),
        ));
    }
    let mut sigma = SymmetricMatrix::from_matrix(raw).map_err(|e| CliError::malformed(format!("{path}: {e}")))?;
    if let Some(eps) = args.eps {
        check_epsilon(eps)?;
        sigma = shrink(&CovarianceMatrix::from_matrix(sigma, 2), eps)
            .map_err(|e| CliError::from_core("shrink", e))?
            .into_matrix();
    }
    let report = analyze_convergence(&sigma).map_err(|e| CliError::from_core(&path, e))?;

    writeln!(out, "order={n}")?;
    writeln!(out, "frobenius_norm={}", report.frobenius_norm)?;
    writeln!(out, "a_eigenvalues={}", join(&report.a_eigenvalues))?;
    writeln!(out, "a_singular_values={}", join(&report.a_singular_values))?;
    writeln!(out, "sigma_max_a={}", report.sigma_max_a)?;
    writeln!(out, "cross_check_deviation={:e}", report.cross_check_deviation)?;
    let verdict = if report.satisfies_criterion { "satisfied" } else { "violated" };
    writeln!(out, "criterion={verdict}")?;
    Ok(if report.satisfies_criterion {
        Exit::Ok
    } else {
        Exit::VerificationFailed
    })
}

pub fn cmd_generate(kind: &GenerateKind, out: &mut dyn Write) -> CliResult<Exit> {
    let (path, tensor) = match kind {
        GenerateKind::Activations {
            output,
            channels,
            height,
            width,
            seed,
        } => {
            let x = ActivationMap::random_gaussian(*channels, *height, *width, &mut Rng::new(*seed))
                .map_err(|e| CliError::bad_args(e.to_string()))?;
            (output, TensorFile::from_f64(vec![*channels, *height, *width], x.as_slice()))
        }
        GenerateKind::Spd {
            output,
            order,
            eig_min,
            eig_max,
            seed,
        } => {
            let m = random_spd(*order, *eig_min, *eig_max, &mut Rng::new(*seed))
                .map_err(|e| CliError::bad_args(e.to_string()))?;
            (output, TensorFile::from_f64(vec![*order, *order], m.as_slice()))
        }
        GenerateKind::Style { output, dim, seed } => {
            let w = StyleVector::random(*dim, &mut Rng::new(*seed)).map_err(|e| CliError::bad_args(e.to_string()))?;
            (output, TensorFile::from_f64(vec![*dim], w.as_slice()))
        }
    };
    let tensor = tensor.map_err(|e| CliError::bad_args(e.to_string()))?;
    write_tensor(path, &tensor)?;
    writeln!(out, "wrote {} dims={:?}", display(path), tensor.dims)?;
    Ok(Exit::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn parse_errors_map_to_bad_arguments() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["adawct", "nonsense"], &mut out, &mut err), 3);
        assert_eq!(run(["adawct", "verify", "--trials", "x"], &mut out, &mut err), 3);
        assert_eq!(run(["adawct", "--help"], &mut out, &mut err), 0);
    }
}
