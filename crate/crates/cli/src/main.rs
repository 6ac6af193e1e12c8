use clap::{Parser, Subcommand};
use heis_cli::commands::{self, CmdError, Context, Outcome, EXIT_CONFIG};
use heis_cli::config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "heis", version, about = "Pseudo-differential experiments on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; missing fields take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports, plot data and calibration
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Symbol selector NAME[:k=v,...]
    #[arg(long, global = true)]
    symbol: Option<String>,
    /// Seminorm orders a,b,c: phase order, g degree, λ order
    #[arg(long, global = true)]
    orders: Option<String>,
    /// Tolerance override NAME=VAL (repeatable)
    #[arg(long, global = true)]
    tol: Vec<String>,
    /// Seed for sample-function generation
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate and persist the Plancherel and Weyl-side constants
    Calibrate,
    /// Difference-operator and renormalization identities
    IdentityTable,
    /// Symbol-class membership with refinement stability
    Membership,
    /// Leading parametrix and composition residuals at R and 2R
    Parametrix {
        /// Cut-off radius (overrides parametrix.radius)
        #[arg(long)]
        radius: Option<f64>,
        /// Build the parametrix even if the ellipticity check fails
        #[arg(long)]
        force: bool,
    },
    /// Sobolev boundedness or subelliptic ratio probe
    Probe {
        /// bounded | subelliptic
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        m0: Option<f64>,
    },
    /// Apply Op(σ) to a sampled function
    Apply {
        /// Input function in the container format
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn parse_orders(s: &str) -> Result<[usize; 3], ConfigError> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError::Invalid(format!("--orders expects a,b,c, got `{s}`")))?;
    <[usize; 3]>::try_from(v).map_err(|_| ConfigError::Invalid(format!("--orders expects three values, got `{s}`")))
}

fn build(cli: &Cli) -> Result<Context, ConfigError> {
    let (mut cfg, base_dir) = match &cli.config {
        Some(p) => (RunConfig::load(p)?, p.parent().map(PathBuf::from).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = &cli.symbol {
        cfg.symbol.override_with(s)?;
    }
    if let Some(o) = &cli.orders {
        let o = parse_orders(o)?;
        cfg.membership.orders = o;
        cfg.parametrix.orders = o;
    }
    for t in &cli.tol {
        let (k, v) = t.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("--tol expects NAME=VAL, got `{t}`")))?;
        let v = v.parse::<f64>().map_err(|_| ConfigError::Invalid(format!("bad tolerance value `{v}`")))?;
        cfg.tolerances.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    let mut force = false;
    let mut input = None;
    match &cli.command {
        Command::Parametrix { radius, force: f } => {
            if let Some(r) = radius {
                cfg.parametrix.radius = *r;
            }
            force = *f;
        }
        Command::Probe { mode, s, m0 } => {
            if let Some(m) = mode {
                cfg.probe.mode = m.clone();
            }
            if let Some(s) = s {
                cfg.probe.s = *s;
            }
            if let Some(m) = m0 {
                cfg.probe.m0 = *m;
            }
        }
        Command::Apply { input: i } => input = i.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(Context { cfg, out: cli.out.clone(), base_dir, input, force })
}

fn run(cli: &Cli) -> Result<Outcome, CmdError> {
    let mut ctx = build(cli)?;
    match cli.command {
        Command::Calibrate => commands::calibrate(&mut ctx),
        Command::IdentityTable => commands::identity_table_cmd(&mut ctx),
        Command::Membership => commands::membership_cmd(&mut ctx),
        Command::Parametrix { .. } => commands::parametrix_cmd(&mut ctx),
        Command::Probe { .. } => commands::probe_cmd(&mut ctx),
        Command::Apply { .. } => commands::apply_cmd(&mut ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            println!("verdict: {}", if o.verdict { "pass" } else { "fail" });
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}
