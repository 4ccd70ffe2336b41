//! The `prosparse` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::bench::{run_bench, solve_with, write_bench_csv, BenchConfig};
use super::files::{
    read_input, to_json, BuiltDict, DictKind, DictSpec, InstanceFile, MatrixFile, Provenance,
    SolutionEntry, SolutionFile, DEFAULT_BLOCK,
};
use super::selftest::run_selftest;
use crate::bases::Basis;
use crate::bounds::{bound_curves, write_curves_csv, BoundReport, Coherence, GeneralizedParams};
use crate::bp_baseline::{debias, l1_equality_solve, DenseMap, L1Options};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::fixtures::{
    make_bp_counterexample, make_random_planted, make_two_solution_instance, split_halves,
    Placement,
};
use crate::gen_prosparse::GenSolveConfig;
use crate::numerics::C64;
use crate::prony::{prony_fit, Reject};
use crate::prosparse::SolutionSet;
use crate::sparse::SparseVec;

pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_NO_SOLUTION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "prosparse",
    version,
    about = "Find every sparse representation of a signal in a union of two bases"
)]
pub struct Cli {
    /// Relative singular-value threshold for the Toeplitz rank.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_rank: f64,
    /// Root test threshold, scaled by 1 + sum |h_k|.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub tol_root: f64,
    /// Coefficients below this times the signal peak count as zero.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_zero: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every admitted sparse representation of an instance.
    Solve(SolveArgs),
    /// A single-window Prony fit.
    Prony(PronyArgs),
    /// Recovery bounds per (K_p, K_q).
    Bounds(BoundsArgs),
    /// Write a fixture instance.
    Generate {
        #[command(subcommand)]
        which: Generate,
    },
    /// Basis pursuit on an instance.
    Bp(BpArgs),
    /// Planted-recovery sweep.
    Bench(BenchArgs),
    /// Quick invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct DictArgs {
    /// Dictionary; defaults to the one recorded in the instance.
    #[arg(long, value_enum)]
    pub dict: Option<DictKind>,
    /// Block length of the local Fourier basis.
    #[arg(long)]
    pub block: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file; stdin when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Invertible matrix A; the instance is solved against [A Psi, A Phi].
    #[arg(long)]
    pub precondition: Option<PathBuf>,
    /// Exit 0 even when no solution uses both bases.
    #[arg(long)]
    pub allow_empty: bool,
    /// Largest K_p visited by the generalized search.
    #[arg(long)]
    pub kp_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PronyArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Model order.
    #[arg(long)]
    pub k: usize,
    /// First sample of the window.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Fit unconstrained roots instead of grid roots (Fourier only).
    #[arg(long)]
    pub free: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    /// Coherence as p/q, a decimal, sqrt(r) or 1/sqrt(r); defaults to the dictionary's.
    #[arg(long)]
    pub mu: Option<Coherence>,
    #[arg(long, value_enum, default_value = "fourier-canonical")]
    pub dict: DictKind,
    #[arg(long)]
    pub block: Option<usize>,
    /// Largest K_p and K_q listed; defaults to ceil(2 sqrt(N)).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Boundary curves K_q(K_p) instead of the predicate table.
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    /// A signal whose sparsest representation is not the minimum-l1 one.
    CounterexampleBp {
        #[arg(long, default_value_t = 4)]
        d: u32,
    },
    /// A signal with two equally sparse representations.
    TwoSolutions {
        #[arg(long, default_value_t = 4)]
        d: u32,
        /// Defaults to --seed.
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Random planted instance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        kp: usize,
        #[arg(long)]
        kq: usize,
        #[arg(long, value_enum, default_value = "fourier-canonical")]
        dict: DictKind,
        #[arg(long)]
        block: Option<usize>,
        #[arg(long, value_enum, default_value = "uniform")]
        placement: PlacementArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Uniform,
    PicketFence,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Uniform => Placement::Uniform,
            PlacementArg::PicketFence => Placement::PicketFence,
        }
    }
}

#[derive(Debug, Args)]
pub struct BpArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub feas_tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Signal lengths.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub n: Vec<usize>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "fourier-canonical"
    )]
    pub dict: Vec<DictKind>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long)]
    pub kp_max: Option<usize>,
    #[arg(long)]
    pub kq_max: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub placement: PlacementArg,
    /// Leave the timing column empty so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Exit {
    code: i32,
    message: String,
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Invariant(_) => EXIT_INVARIANT,
            _ => EXIT_MALFORMED,
        };
        Exit {
            code,
            message: e.to_string(),
        }
    }
}

/// What a command produced: bytes for the output and an exit code.
struct Outcome {
    bytes: Vec<u8>,
    code: i32,
}

impl Outcome {
    fn ok(bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            bytes: bytes.into(),
            code: 0,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_MALFORMED } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli) -> std::result::Result<i32, Exit> {
    let run = || -> std::result::Result<Outcome, Exit> {
        match &cli.command {
            Command::Solve(a) => solve(cli, a),
            Command::Prony(a) => prony(cli, a),
            Command::Bounds(a) => bounds(cli, a),
            Command::Generate { which } => generate(cli, which),
            Command::Bp(a) => bp(cli, a),
            Command::Bench(a) => bench(cli, a),
            Command::Selftest => selftest(cli),
        }
    };
    let outcome = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Exit {
                code: EXIT_MALFORMED,
                message: e.to_string(),
            })?
            .install(run)?,
        None => run()?,
    };
    write_output(cli.out.as_deref(), &outcome.bytes)?;
    Ok(outcome.code)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, bytes)?,
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn tolerances(cli: &Cli) -> Result<Tolerances> {
    for (name, v) in [
        ("--tol-rank", cli.tol_rank),
        ("--tol-root", cli.tol_root),
        ("--tol-zero", cli.tol_zero),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be a non-negative number"
            )));
        }
    }
    Ok(Tolerances {
        rank: cli.tol_rank,
        root: cli.tol_root,
        zero: cli.tol_zero,
        ..Tolerances::default()
    })
}

fn json_only(cli: &Cli, what: &str) -> Result<()> {
    match cli.format {
        Some(Format::Csv) => Err(Error::InvalidParameter(format!("{what} writes JSON only"))),
        _ => Ok(()),
    }
}

fn load_instance(path: Option<&Path>) -> Result<InstanceFile> {
    InstanceFile::from_json(&read_input(path)?)
}

/// The instance's dictionary unless the flags name another one.
fn dict_for(instance: &InstanceFile, args: &DictArgs) -> Result<BuiltDict> {
    let mut spec = match args.dict {
        Some(kind) if kind != instance.dict.kind => DictSpec::new(kind),
        _ => instance.dict.clone(),
    };
    if let Some(b) = args.block {
        spec.params.block = Some(b);
    }
    spec.build(instance.n)
}

fn solve(cli: &Cli, a: &SolveArgs) -> std::result::Result<Outcome, Exit> {
    let tol = tolerances(cli)?;
    let instance = load_instance(a.input.as_deref())?;
    let y = instance.signal()?;
    let built = dict_for(&instance, &a.dict)?;

    let set: SolutionSet = match &a.precondition {
        Some(path) => {
            let pre = MatrixFile::from_json(&read_input(Some(path))?)?.preconditioner()?;
            if pre.matrix().nrows() != instance.n {
                return Err(Error::DimensionMismatch {
                    expected: instance.n,
                    got: pre.matrix().nrows(),
                }
                .into());
            }
            let dict = built.dict.clone().with_preconditioner(pre)?;
            let cfg = GenSolveConfig {
                tol,
                kp_limit: a.kp_limit,
            };
            crate::gen_prosparse::gen_prosparse_solve(&y, &dict, &cfg)?
        }
        None if a.kp_limit.is_some() || built.spec.kind != DictKind::FourierCanonical => {
            let kp_limit = a.kp_limit.or_else(|| {
                (built.spec.kind == DictKind::GaussianCanonical)
                    .then(|| super::files::gaussian_k_max(instance.n))
            });
            crate::gen_prosparse::gen_prosparse_solve(
                &y,
                &built.dict,
                &GenSolveConfig { tol, kp_limit },
            )?
        }
        None => solve_with(&built, &y, &tol)?,
    };

    let file = SolutionFile::new(
        instance.n,
        built.spec.clone(),
        &set,
        built.calibration.clone(),
    );
    let bytes = match cli.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&file)?.into_bytes(),
        Format::Csv => solutions_csv(&file)?,
    };
    let code = if set.nontrivial().next().is_none() && !a.allow_empty {
        EXIT_NO_SOLUTION
    } else {
        0
    };
    if code != 0 {
        eprintln!("no solution uses both bases (pass --allow-empty to accept)");
    }
    Ok(Outcome { bytes, code })
}

fn solutions_csv(file: &SolutionFile) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row<'a> {
        solution: usize,
        kp: usize,
        kq: usize,
        basis: &'a str,
        index: usize,
        re: f64,
        im: f64,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, s) in file.solutions.iter().enumerate() {
        for (basis, coeffs) in [("fourier", &s.fourier), ("local", &s.local)] {
            for c in coeffs {
                w.serialize(Row {
                    solution: i,
                    kp: s.kp,
                    kq: s.kq,
                    basis,
                    index: c.index,
                    re: c.coeff[0],
                    im: c.coeff[1],
                })
                .map_err(|e| Error::Malformed(e.to_string()))?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Malformed(e.to_string()))
}

#[derive(Serialize)]
struct PronyOutput {
    k: usize,
    start: usize,
    window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<crate::prony::PronyModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<SolutionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejected: Option<Reject>,
}

fn prony(cli: &Cli, a: &PronyArgs) -> std::result::Result<Outcome, Exit> {
    json_only(cli, "prony")?;
    let tol = tolerances(cli)?;
    let instance = load_instance(a.input.as_deref())?;
    let y = instance.signal()?;
    let n = instance.n;
    let psi: Basis = dict_for(&instance, &a.dict)?.dict.psi().clone();
    let cap = *psi.segment().ok_or_else(|| {
        Error::InvalidParameter("the first basis is not segment-recoverable".into())
    })?;
    if a.start >= n {
        return Err(Error::WindowOutOfRange {
            start: a.start,
            end: a.start + 1,
            len: n,
        }
        .into());
    }
    let is_fourier = psi.kind() == crate::bases::BasisKind::Fourier;
    let window = if is_fourier {
        2 * a.k
    } else {
        cap.sampling_factor(n, a.k).min(n)
    };
    if cap.tau == 1 && a.start + window > n || window > n {
        return Err(Error::WindowOutOfRange {
            start: a.start,
            end: a.start + window,
            len: n,
        }
        .into());
    }
    let seg: Vec<C64> = (0..window).map(|i| y[(a.start + i) % n]).collect();

    let mut out = PronyOutput {
        k: a.k,
        start: a.start,
        window,
        model: None,
        coefficients: None,
        rejected: None,
    };
    if is_fourier {
        match prony_fit(&seg, a.k, n, a.start, !a.free, &tol)? {
            Ok(model) => {
                if !a.free {
                    let c = crate::prony::fourier_coeffs_from_model(&model, n)?;
                    out.coefficients = Some(SolutionEntry::from_parts(&c, &SparseVec::new()));
                }
                out.model = Some(model);
            }
            Err(r) => out.rejected = Some(r),
        }
    } else {
        if a.free {
            return Err(
                Error::InvalidParameter("--free applies to the Fourier basis only".into()).into(),
            );
        }
        match psi.recover_segment(&seg, a.start, a.k, &tol)? {
            Ok(c) => out.coefficients = Some(SolutionEntry::from_parts(&c, &SparseVec::new())),
            Err(r) => out.rejected = Some(r),
        }
    }
    Ok(Outcome::ok(to_json(&out)?))
}

fn default_coherence(n: usize, spec: &DictSpec) -> Result<Coherence> {
    match spec.kind {
        DictKind::FourierCanonical => Coherence::inverse_sqrt(n),
        DictKind::FourierLocalFourier => {
            let l = spec.params.block.unwrap_or(DEFAULT_BLOCK);
            format!("sqrt({l}/{n})").parse()
        }
        DictKind::DctCanonical => format!("sqrt(2/{n})").parse(),
        DictKind::GaussianCanonical | DictKind::Custom => Err(Error::InvalidParameter(
            "pass --mu for this dictionary".into(),
        )),
    }
}

fn bounds(cli: &Cli, a: &BoundsArgs) -> std::result::Result<Outcome, Exit> {
    if a.n == 0 {
        return Err(Error::InvalidParameter("--n must be positive".into()).into());
    }
    let mut spec = DictSpec::new(a.dict);
    spec.params.block = a.block;
    spec.seed = Some(cli.seed);
    let mu = match &a.mu {
        Some(m) => m.clone(),
        None => default_coherence(a.n, &spec)?,
    };
    let k_max = a
        .k_max
        .unwrap_or(((2.0 * (a.n as f64).sqrt()).ceil() as usize).min(a.n));
    let format = cli.format.unwrap_or(Format::Csv);
    if a.curves {
        let pts = bound_curves(a.n, &mu, k_max);
        let bytes = match format {
            Format::Csv => {
                let mut v = Vec::new();
                write_curves_csv(&pts, &mut v)?;
                v
            }
            Format::Json => to_json(&pts)?.into_bytes(),
        };
        return Ok(Outcome::ok(bytes));
    }
    let built = spec.build(a.n)?;
    let d = &built.dict;
    let gen = match (d.psi().segment(), d.phi().local_length()) {
        (Some(cap), Some(l)) => Some(GeneralizedParams {
            capability: *cap,
            support_length: l,
        }),
        _ => None,
    };
    let report = BoundReport::evaluate(a.n, mu, k_max, gen.as_ref());
    let bytes = match format {
        Format::Csv => {
            let mut v = Vec::new();
            report.write_csv(&mut v)?;
            v
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                kp: usize,
                kq: usize,
                p0_unique: bool,
                bp_tight: bool,
                bp_simple: bool,
                prosparse_product: bool,
                prosparse_total: bool,
                generalized: Option<bool>,
                equality: Vec<&'static str>,
            }
            let rows: Vec<Row> = report
                .rows
                .iter()
                .map(|r| Row {
                    kp: r.kp,
                    kq: r.kq,
                    p0_unique: r.p0_unique.holds,
                    bp_tight: r.bp_tight.holds,
                    bp_simple: r.bp_simple.holds,
                    prosparse_product: r.prosparse_product.holds,
                    prosparse_total: r.prosparse_total.holds,
                    generalized: r.generalized.map(|g| g.holds),
                    equality: r.equality_hits(),
                })
                .collect();
            to_json(&serde_json::json!({ "n": a.n, "mu": report.mu.to_string(), "rows": rows }))?
                .into_bytes()
        }
    };
    Ok(Outcome::ok(bytes))
}

fn generate(cli: &Cli, which: &Generate) -> std::result::Result<Outcome, Exit> {
    json_only(cli, "generate")?;
    let file = match *which {
        Generate::CounterexampleBp { d } => {
            let c = make_bp_counterexample(d)?;
            let mut f = InstanceFile::new(
                DictSpec::new(DictKind::FourierCanonical),
                &c.y,
                Provenance::new(format!("counterexample-bp d={d}"), None),
            );
            let (xp, xq) = c.sparse_solution();
            f.planted = Some(SolutionEntry::from_parts(&xp, &xq));
            let (tp, tq) = split_halves(&c.x_tilde);
            f.alternatives.push(SolutionEntry::from_parts(&tp, &tq));
            f
        }
        Generate::TwoSolutions { d, split_seed } => {
            let seed = split_seed.unwrap_or(cli.seed);
            let t = make_two_solution_instance(d, seed)?;
            let mut f = InstanceFile::new(
                DictSpec::new(DictKind::FourierCanonical),
                &t.y,
                Provenance::new(format!("two-solutions d={d}"), Some(seed)),
            );
            let (p0, q0) = split_halves(&t.x0);
            let (p1, q1) = split_halves(&t.x1);
            f.planted = Some(SolutionEntry::from_parts(&p0, &q0));
            f.alternatives.push(SolutionEntry::from_parts(&p1, &q1));
            f
        }
        Generate::Random {
            n,
            kp,
            kq,
            dict,
            block,
            placement,
        } => {
            let mut spec = DictSpec::new(dict);
            spec.params.block = block;
            if dict == DictKind::GaussianCanonical {
                spec.seed = Some(cli.seed);
            }
            let built = spec.build(n)?;
            let p = make_random_planted(&built.dict, kp, kq, cli.seed, placement.into())?;
            let mut f = InstanceFile::new(
                built.spec.clone(),
                &p.y,
                Provenance::new(
                    format!("random kp={kp} kq={kq} placement={placement:?}"),
                    Some(cli.seed),
                ),
            );
            f.planted = Some(SolutionEntry::from_parts(&p.segment, &p.local));
            f
        }
    };
    Ok(Outcome::ok(to_json(&file)?))
}

#[derive(Serialize)]
struct BpOutput {
    converged: bool,
    iterations: usize,
    primal_residual: f64,
    objective: f64,
    /// Entries above 1e-6 of the peak, refit by least squares.
    support: SolutionEntry,
    debiased_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    matches_planted: Option<bool>,
}

fn bp(cli: &Cli, a: &BpArgs) -> std::result::Result<Outcome, Exit> {
    json_only(cli, "bp")?;
    let instance = load_instance(a.input.as_deref())?;
    let y = instance.signal()?;
    let n = instance.n;
    let built = dict_for(&instance, &a.dict)?;
    let matrix = built.dict.to_matrix();
    let op = DenseMap::new(matrix.clone())?;
    let opts = L1Options {
        feas_tol: a.feas_tol,
        max_iter: a.max_iter,
        ..L1Options::default()
    };
    let r = l1_equality_solve(&op, &y, &opts)?;
    let (sparse, debiased_residual) = debias(&matrix, &y, &r.solution, 1e-6)?;
    let dense = sparse.to_dense(2 * n);
    let (xp, xq) = split_halves(&dense);
    let matches_planted = match &instance.planted {
        Some(p) => {
            let (pp, pq) = p.parts(n)?;
            let scale = pp.max_abs().max(pq.max_abs());
            Some(
                xp.indices == pp.indices
                    && xq.indices == pq.indices
                    && xp.max_abs_diff(&pp).max(xq.max_abs_diff(&pq)) <= 1e-6 * scale,
            )
        }
        None => None,
    };
    let out = BpOutput {
        converged: r.converged,
        iterations: r.iterations,
        primal_residual: r.primal_residual,
        objective: r.objective,
        support: SolutionEntry::from_parts(&xp, &xq),
        debiased_residual,
        matches_planted,
    };
    let code = if r.converged { 0 } else { EXIT_NOT_CONVERGED };
    if code != 0 {
        eprintln!(
            "basis pursuit stopped after {} iterations without converging",
            r.iterations
        );
    }
    Ok(Outcome {
        bytes: to_json(&out)?.into_bytes(),
        code,
    })
}

fn bench(cli: &Cli, a: &BenchArgs) -> std::result::Result<Outcome, Exit> {
    let dicts = a
        .dict
        .iter()
        .map(|&k| {
            let mut s = DictSpec::new(k);
            if k == DictKind::FourierLocalFourier {
                s.params.block = Some(a.block.unwrap_or(DEFAULT_BLOCK));
            }
            if k == DictKind::GaussianCanonical {
                s.seed = Some(cli.seed);
            }
            s
        })
        .collect();
    let cfg = BenchConfig {
        sizes: a.n.clone(),
        dicts,
        trials: a.trials,
        seed: cli.seed,
        placement: a.placement.into(),
        kp_max: a.kp_max,
        kq_max: a.kq_max,
        tol: tolerances(cli)?,
    };
    let timing = !a.no_timing;
    let rows = run_bench(&cfg, timing)?;
    let bytes = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut v = Vec::new();
            write_bench_csv(&rows, &cfg, timing, &mut v)?;
            v
        }
        Format::Json => to_json(&rows)?.into_bytes(),
    };
    Ok(Outcome::ok(bytes))
}

fn selftest(cli: &Cli) -> std::result::Result<Outcome, Exit> {
    let report = run_selftest(&tolerances(cli)?);
    let mut text = String::new();
    for (name, result) in &report {
        match result {
            Ok(()) => text.push_str(&format!("PASS {name}\n")),
            Err(why) => text.push_str(&format!("FAIL {name}: {why}\n")),
        }
    }
    let code = if report.iter().all(|(_, r)| r.is_ok()) {
        0
    } else {
        EXIT_INVARIANT
    };
    Ok(Outcome {
        bytes: text.into_bytes(),
        code,
    })
}
