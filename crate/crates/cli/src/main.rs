use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use catkappa::experiments::{
    run_counterexample, run_fixpoint, run_lemma_contraction, run_rakotch_profile,
    run_theorem_witness, CounterexampleConfig, DomainSpec, FixpointConfig, FixpointMethod,
    LemmaContractionConfig, MapSpec, RakotchProfileConfig, TheoremWitnessConfig,
};
use catkappa::report::OutputFormat;
use catkappa::{Error, ExperimentReport};

#[derive(Parser)]
#[command(name = "catkappa", version)]
#[command(about = "Reproducible experiments on nonexpansive maps of CAT(kappa) domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Sample count; each subcommand has its own default
    #[arg(long)]
    samples: Option<usize>,

    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    Cap,
    Annulus,
    Interval,
    Ball,
    HyperbolicBall,
}

#[derive(Args, Clone)]
struct DomainArgs {
    #[arg(long)]
    domain: Option<DomainKind>,

    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    kappa: f64,

    /// Cap or ball radius, or outer radius of an annulus
    #[arg(long)]
    radius: Option<f64>,

    #[arg(long)]
    inner_radius: Option<f64>,

    #[arg(long, default_value_t = 2)]
    dim: usize,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lo: f64,

    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    hi: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapKind {
    Identity,
    Constant,
    Rotation,
    Star,
    Analytic,
}

#[derive(Args, Clone)]
struct MapArgs {
    #[arg(long)]
    map: Option<MapKind>,

    /// Rotation angle
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    angle: f64,

    /// Star-contraction factor
    #[arg(long, default_value_t = 0.5)]
    t: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Picard,
    Search,
    Composites,
}

#[derive(Subcommand)]
enum Command {
    /// Certified versus sampled Lipschitz constants of star contractions
    LemmaContraction {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
              default_values_t = [-1.0, 0.0, 1.0, 4.0])]
        kappas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.6, 1.0, 1.4])]
        radii: Vec<f64>,
        #[arg(long, value_delimiter = ',',
              default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        ts: Vec<f64>,
    },
    /// Witness constants, far-pair contraction and ball inclusions
    TheoremWitness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "n", value_delimiter = ',', default_values_t = [1u32, 2, 4])]
        ns: Vec<u32>,
        #[arg(long, default_value_t = 64)]
        perturbations: usize,
        /// Samples per uniform-distance estimate
        #[arg(long, default_value_t = 4096)]
        dist_samples: usize,
    },
    /// No-strict-contraction certificate for a map of a spherical annulus
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1e-3)]
        mesh: f64,
        /// Strict contractions tested for exclusion
        #[arg(long, default_value_t = 48)]
        family: usize,
    },
    /// Rakotch modulus step function and Lipschitz witness sets
    RakotchProfile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 10)]
        buckets: usize,
        #[arg(long, default_value_t = 21)]
        grid_points: usize,
        #[arg(long, default_value_t = 0.98)]
        threshold: f64,
        #[arg(long, default_value_t = 4096)]
        witness_samples: usize,
    },
    /// Fixed points by Picard iteration or stereographic search
    Fixpoint {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value_t = Method::Picard)]
        method: Method,
        /// Starts (picard) or random composites (composites)
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
}

impl DomainArgs {
    fn spec(&self, default: DomainSpec) -> DomainSpec {
        let Some(kind) = self.domain else {
            return default;
        };
        let radius = self.radius.unwrap_or(1.0);
        match kind {
            DomainKind::Cap => DomainSpec::Cap {
                kappa: self.kappa,
                radius,
            },
            DomainKind::Annulus => DomainSpec::Annulus {
                kappa: self.kappa,
                inner: self.inner_radius.unwrap_or(0.5),
                outer: radius,
            },
            DomainKind::Interval => DomainSpec::Interval {
                lo: self.lo,
                hi: self.hi,
            },
            DomainKind::Ball => DomainSpec::Ball {
                dim: self.dim,
                radius,
            },
            DomainKind::HyperbolicBall => DomainSpec::HyperbolicBall {
                kappa: if self.kappa < 0.0 { self.kappa } else { -1.0 },
                radius,
            },
        }
    }
}

impl MapArgs {
    fn spec(&self, default: MapSpec) -> MapSpec {
        match self.map {
            None => default,
            Some(MapKind::Identity) => MapSpec::Identity,
            Some(MapKind::Constant) => MapSpec::Constant,
            Some(MapKind::Rotation) => MapSpec::Rotation { angle: self.angle },
            Some(MapKind::Star) => MapSpec::Star { t: self.t },
            Some(MapKind::Analytic) => MapSpec::Analytic,
        }
    }
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Domain(_)
            | Error::OutOfRange(_)
            | Error::Infeasible(_)
            | Error::CurvatureMismatch(..)
            | Error::DimensionMismatch(..)
            | Error::OutsideDomain
    )
}

fn run(command: Command) -> Result<(ExperimentReport, Common), Error> {
    Ok(match command {
        Command::LemmaContraction {
            common,
            kappas,
            radii,
            ts,
        } => {
            let cfg = LemmaContractionConfig {
                kappas,
                radii,
                ts,
                samples: common.samples.unwrap_or(100_000),
                seed: common.seed,
            };
            (run_lemma_contraction(&cfg)?, common)
        }
        Command::TheoremWitness {
            common,
            domain,
            map,
            r,
            ns,
            perturbations,
            dist_samples,
        } => {
            let d = TheoremWitnessConfig::default();
            let cfg = TheoremWitnessConfig {
                domain: domain.spec(d.domain),
                map: map.spec(d.map),
                r,
                ns,
                perturbations,
                kn_pairs: common.samples.unwrap_or(d.kn_pairs),
                dist_samples,
                seed: common.seed,
            };
            (run_theorem_witness(&cfg)?, common)
        }
        Command::Counterexample {
            common,
            domain,
            map,
            mesh,
            family,
        } => {
            let d = CounterexampleConfig::default();
            let (kappa, inner, outer) = match domain.spec(DomainSpec::Annulus {
                kappa: d.kappa,
                inner: d.inner,
                outer: d.outer,
            }) {
                DomainSpec::Annulus {
                    kappa,
                    inner,
                    outer,
                } => (kappa, inner, outer),
                _ => return Err(Error::Domain("counterexample runs on an annulus".into())),
            };
            let cfg = CounterexampleConfig {
                kappa,
                inner,
                outer,
                map: map.spec(d.map),
                mesh,
                family,
                samples: common.samples.unwrap_or(d.samples),
                seed: common.seed,
            };
            (run_counterexample(&cfg)?, common)
        }
        Command::RakotchProfile {
            common,
            domain,
            map,
            buckets,
            grid_points,
            threshold,
            witness_samples,
        } => {
            let d = RakotchProfileConfig::default();
            let cfg = RakotchProfileConfig {
                domain: domain.spec(d.domain),
                map: map.spec(d.map),
                buckets,
                samples: common.samples.unwrap_or(d.samples),
                grid_points,
                threshold,
                witness_samples,
                seed: common.seed,
            };
            (run_rakotch_profile(&cfg)?, common)
        }
        Command::Fixpoint {
            common,
            domain,
            map,
            method,
            count,
            tol,
            max_iter,
        } => {
            let d = FixpointConfig::default();
            let cfg = FixpointConfig {
                domain: domain.spec(d.domain),
                map: map.spec(d.map),
                method: match method {
                    Method::Picard => FixpointMethod::Picard,
                    Method::Search => FixpointMethod::Search,
                    Method::Composites => FixpointMethod::Composites,
                },
                count,
                tol,
                max_iter,
                seed: common.seed,
            };
            (run_fixpoint(&cfg)?, common)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, common) = match run(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if usage_error(&e) { 2 } else { 1 });
        }
    };
    let format = match common.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
        Format::Both => OutputFormat::Both,
    };
    let files = match report.write(&common.out, format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: writing report: {e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "{}: {} ({} rows, {} ms)",
        report.experiment_id,
        if report.pass { "pass" } else { "FAIL" },
        report.rows.len(),
        report.runtime_ms
    );
    for f in files {
        println!("  wrote {}", f.display());
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
