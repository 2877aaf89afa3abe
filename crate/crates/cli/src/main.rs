//! Command-line front end: selection on user data, the simulation studies,
//! penalty curves, and direct evaluation of the tail functionals.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use penselect::collection::{CollectionSpec, Family, ModelKey, WeightScheme, WeightTable};
use penselect::estimate::{DesignMatrix, DesignPoints};
use penselect::penalty::{PenaltyKind, PenaltyRule};
use penselect::select::{
    select_changepoints, select_complete, select_nonzero, select_ordered, select_partition,
    SelectionOutcome,
};
use penselect::tail::{dkhi, edkhi, efish, fish, DkhiArgs, FishArgs};

use penselect_cli::data::read_csv_file;
use penselect_cli::report::{render_markdown, write_csv};
use penselect_cli::sim::{nonzero_p, penalty_curve, SimConfig, Study};

#[derive(Parser)]
#[command(
    name = "penselect",
    version,
    about = "Penalized least-squares model selection with unknown noise variance"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Select a model for CSV data and report the fit
    Select(SelectArgs),
    /// Run a simulation study and emit a CSV report
    Simulate(SimulateArgs),
    /// Tabulate the AMDL penalty against the data-driven one
    PenaltyCurve(CurveArgs),
    /// Evaluate the chi-square/Fisher tail functionals or their inverses
    Dkhi(DkhiCmdArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Nonzero,
    Ordered,
    Complete,
    Changepoint,
    Partition,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltyArg {
    Kl,
    Fpe,
    Aic,
    Bic,
    Amdl,
    Kullback,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// Model family to search
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Penalty rule
    #[arg(long, value_enum, default_value = "kl")]
    penalty: PenaltyArg,
    /// Constant of the data-driven rule
    #[arg(long = "K", default_value_t = 1.1)]
    k_constant: f64,
    /// First constant of the Kullback rule (defaults to --K when that
    /// exceeds 1, else 2)
    #[arg(long = "K1")]
    k1: Option<f64>,
    /// Second constant of the Kullback rule (defaults to K1 + 1)
    #[arg(long = "K2")]
    k2: Option<f64>,
    /// Maximal dimension / subset size / change-point count
    #[arg(long = "p")]
    p: Option<usize>,
    /// Refuse searches larger than this many models
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    /// Input CSV (column y; x1..xN and t1..td as needed)
    #[arg(long)]
    data: PathBuf,
    /// Optional separate design CSV (columns x1..xN)
    #[arg(long)]
    design: Option<PathBuf>,
    /// Per-variable degree cap for the partition family
    #[arg(long, default_value_t = 2)]
    max_degree: usize,
    /// Write the fitted values (index, y, mu_hat, residual) to this CSV
    #[arg(long)]
    fitted: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Which study to run
    #[arg(long, value_enum)]
    study: StudyArg,
    /// Replicates per configuration point (study-specific default)
    #[arg(long)]
    reps: Option<u64>,
    /// Master seed for all streams
    #[arg(long, default_value_t = 20090630)]
    seed: u64,
    /// Sample sizes (comma separated)
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Signal amplitudes for the nonzero study
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Noise standard deviations
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Constants of the data-driven rule
    #[arg(long = "K", value_delimiter = ',')]
    k_constants: Option<Vec<f64>>,
    /// Override of the signal-size grid for the nonzero study
    #[arg(long = "k-signal", value_delimiter = ',')]
    k_signal: Option<Vec<usize>>,
    /// Number of redrawn designs for the first variable-selection study
    #[arg(long)]
    designs: Option<usize>,
    /// Sub-minimal penalty slope for the overfitting chain
    #[arg(long = "C")]
    chain_c: Option<f64>,
    /// Render a compact markdown table instead of CSV
    #[arg(long)]
    markdown: bool,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyArg {
    NonzeroGrid,
    VarselTheta1,
    VarselTheta2,
    OverfitDemo,
}

#[derive(clap::Args)]
struct CurveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "K", default_value_t = 1.1)]
    k_constant: f64,
    /// Largest dimension (defaults to n / ln n)
    #[arg(long = "p")]
    p: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DkhiCmdArgs {
    #[arg(long = "D")]
    d: u32,
    #[arg(long = "N")]
    n: u32,
    /// Evaluate the functional at this threshold
    #[arg(long)]
    x: Option<f64>,
    /// Invert the functional at this tail probability
    #[arg(long)]
    q: Option<f64>,
    /// Use the Fisher-variable functional instead of the chi-square one
    #[arg(long)]
    fish: bool,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Select(args) => run_select(args),
        Cmd::Simulate(args) => run_simulate(args),
        Cmd::PenaltyCurve(args) => run_curve(args),
        Cmd::Dkhi(args) => run_dkhi(args),
    }
}

fn build_rule(args: &SelectArgs, n: usize) -> Result<PenaltyRule> {
    let kind = match args.penalty {
        PenaltyArg::Kl => PenaltyKind::Kl { k: args.k_constant },
        PenaltyArg::Fpe => PenaltyKind::Fpe,
        PenaltyArg::Aic => PenaltyKind::Aic,
        PenaltyArg::Bic => PenaltyKind::Bic,
        PenaltyArg::Amdl => PenaltyKind::Amdl,
        PenaltyArg::Kullback => {
            let k1 = args
                .k1
                .unwrap_or(if args.k_constant > 1.0 { args.k_constant } else { 2.0 });
            let k2 = args.k2.unwrap_or(k1 + 1.0);
            PenaltyKind::Kullback { k1, k2 }
        }
    };
    Ok(PenaltyRule::new(kind, n)?)
}

fn format_model(model: &ModelKey) -> String {
    match model {
        ModelKey::CoordSubset(idx) => format!(
            "coords:{}",
            idx.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        ModelKey::ColumnSubset(idx) => format!(
            "columns:{}",
            idx.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        ModelKey::ChangePoints(pts) => format!(
            "changepoints:{}",
            pts.iter()
                .map(|t| (t + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        ModelKey::Partition { degree, cells } => format!(
            "partition:r={degree},k={}",
            cells
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("x")
        ),
    }
}

fn run_select(args: SelectArgs) -> Result<()> {
    let data = read_csv_file(&args.data)?;
    let y = data
        .y
        .clone()
        .context("the data file must contain a response column named 'y'")?;
    let n = y.len();
    if n < 3 {
        bail!("need at least 3 observations, got {n}");
    }
    let x_cols = if let Some(design_path) = &args.design {
        let design = read_csv_file(design_path)?;
        if design.x.is_empty() {
            bail!(
                "design file {} has no x1..xN columns",
                design_path.display()
            );
        }
        design.x
    } else {
        data.x.clone()
    };
    let rule = build_rule(&args, n)?;
    let kullback_cap = n.checked_sub(5).unwrap_or(0);

    let outcome = match args.family {
        FamilyArg::Nonzero => {
            let p = args.p.unwrap_or_else(|| nonzero_p(n));
            check_kullback_cap(&rule, p, kullback_cap)?;
            select_nonzero(&y, p, &rule)?
        }
        FamilyArg::Ordered => {
            let x = design_matrix(x_cols, n)?;
            let p = args.p.unwrap_or_else(|| x.n_cols().min(n - 2));
            check_kullback_cap(&rule, p, kullback_cap)?;
            select_ordered(&y, &x, p, &rule)?
        }
        FamilyArg::Complete => {
            let x = design_matrix(x_cols, n)?;
            let p = args.p.unwrap_or_else(|| x.n_cols().min(n - 2));
            check_kullback_cap(&rule, p, kullback_cap)?;
            let spec = CollectionSpec::new(
                Family::CompleteVarsel {
                    n_cols: x.n_cols(),
                    p,
                },
                WeightScheme::Canonical,
                n,
                args.budget,
            )?;
            let weights = WeightTable::for_spec(&spec)?;
            select_complete(&y, &x, p, &rule, &weights, args.budget)?
        }
        FamilyArg::Changepoint => {
            let p = args.p.unwrap_or_else(|| nonzero_p(n).min(n - 3));
            check_kullback_cap(&rule, p + 1, kullback_cap)?;
            select_changepoints(&y, p, &rule)?
        }
        FamilyArg::Partition => {
            if data.t.is_empty() {
                bail!("the partition family needs design-point columns t1..td");
            }
            let d = data.t.len();
            let mut coords = Vec::with_capacity(n * d);
            for i in 0..n {
                for axis in &data.t {
                    coords.push(*axis.get(i).context("ragged design-point columns")?);
                }
            }
            let points = DesignPoints::new(n, d, coords)?;
            check_kullback_cap(&rule, n - 2, kullback_cap)?;
            select_partition(&y, &points, d, &rule, args.max_degree)?
        }
    };
    print_outcome(&outcome, n)?;
    if let Some(path) = &args.fitted {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "index,y,mu_hat,residual")?;
        for (i, (yv, mv)) in y.iter().zip(&outcome.fit.mu_hat).enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, yv, mv, yv - mv)?;
        }
    }
    Ok(())
}

fn check_kullback_cap(rule: &PenaltyRule, max_dim: usize, cap: usize) -> Result<()> {
    if matches!(rule.kind, PenaltyKind::Kullback { .. }) && max_dim > cap {
        bail!(
            "the Kullback rule requires every model dimension to stay at or below n - 5 = {cap}; \
             the requested search reaches dimension {max_dim}"
        );
    }
    Ok(())
}

fn design_matrix(cols: Vec<Vec<f64>>, n: usize) -> Result<DesignMatrix> {
    if cols.is_empty() {
        bail!("this family needs design columns x1..xN (in the data file or via --design)");
    }
    for (j, c) in cols.iter().enumerate() {
        if c.len() != n {
            bail!(
                "design column x{} has {} rows, expected {n}",
                j + 1,
                c.len()
            );
        }
    }
    Ok(DesignMatrix::from_columns(cols)?)
}

fn print_outcome(outcome: &SelectionOutcome, n: usize) -> Result<()> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "selected_model={}", format_model(&outcome.m_hat))?;
    writeln!(w, "dimension={}", outcome.m_hat.nominal_dim())?;
    writeln!(w, "effective_rank={}", outcome.fit.effective_rank)?;
    writeln!(w, "n={n}")?;
    writeln!(w, "rss={}", outcome.fit.rss)?;
    writeln!(w, "sigma2_hat={}", outcome.fit.sigma2_hat)?;
    writeln!(w, "criterion={}", outcome.criterion_value)?;
    writeln!(w, "saturated={}", outcome.saturated)?;
    writeln!(w)?;
    writeln!(w, "D,best_rss,penalty,criterion")?;
    for row in &outcome.trace {
        writeln!(
            w,
            "{},{},{},{}",
            row.dim, row.best_rss, row.penalty, row.criterion
        )?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let study = match args.study {
        StudyArg::NonzeroGrid => Study::NonzeroGrid,
        StudyArg::VarselTheta1 => Study::VarselTheta1,
        StudyArg::VarselTheta2 => Study::VarselTheta2,
        StudyArg::OverfitDemo => Study::OverfitDemo,
    };
    let mut config = SimConfig::new(study);
    config.master_seed = args.seed;
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    if let Some(n) = args.n {
        config.n_list = n;
    }
    if let Some(s) = args.s {
        config.s_list = s;
    }
    if let Some(sigma) = args.sigma {
        config.sigma_list = sigma;
    }
    if let Some(k) = args.k_constants {
        config.k_constants = k;
    }
    config.k_signal_override = args.k_signal;
    if let Some(designs) = args.designs {
        config.designs = designs;
    }
    if let Some(c) = args.chain_c {
        config.chain_c = c;
    }
    let rows = config.run()?;
    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = out;
    if args.markdown {
        write!(out, "{}", render_markdown(&rows))?;
    } else {
        write_csv(&rows, &mut out)?;
    }
    Ok(())
}

fn run_curve(args: CurveArgs) -> Result<()> {
    let p = args.p.unwrap_or_else(|| nonzero_p(args.n));
    let rows = penalty_curve(args.n, args.k_constant, p)?;
    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = out;
    writeln!(out, "D,pen_amdl,pen_K")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.dim, row.pen_amdl, row.pen_k)?;
    }
    Ok(())
}

fn run_dkhi(args: DkhiCmdArgs) -> Result<()> {
    match (args.x, args.q) {
        (Some(x), None) => {
            if args.fish {
                let v = fish(&FishArgs::new(args.d, args.n, x)?)?;
                println!("fish[{},{},{x}]={v}", args.d, args.n);
            } else {
                let v = dkhi(&DkhiArgs::new(args.d, args.n, x)?)?;
                println!("dkhi[{},{},{x}]={v}", args.d, args.n);
            }
        }
        (None, Some(q)) => {
            if args.fish {
                let v = efish(args.d, args.n, q)?;
                println!("efish[{},{},{q}]={v}", args.d, args.n);
            } else {
                let v = edkhi(args.d, args.n, q)?;
                println!("edkhi[{},{},{q}]={v}", args.d, args.n);
            }
        }
        _ => bail!("pass exactly one of --x (evaluate) or --q (invert)"),
    }
    Ok(())
}
