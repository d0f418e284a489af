//! `torus-coherent`: coherent sets of quasi-periodically driven torus flows.

mod config;
mod stages;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use config::*;
use torus_coherent::presets::Example;

/// Malformed input or parameters (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

/// The numerics failed (exit code 3).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Numerical(pub String);

#[derive(Parser, Debug)]
#[command(
    name = "torus-coherent",
    version,
    about = "Coherent sets of quasi-periodically driven flows on the two-torus"
)]
struct Cli {
    /// translated-gyres, oscillating-gyres, shear or custom
    #[arg(long, global = true)]
    example: Option<String>,
    /// Flat `key = value` file mirroring the long flags; flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Directory holding the stage inputs (defaults to --out)
    #[arg(long, global = true, value_name = "DIR")]
    from: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build or import a velocity field and write its coefficient table
    Field {
        #[command(flatten)]
        field: FieldOpts,
    },
    /// Assemble the generator matrix for a mode set
    Assemble {
        #[command(flatten)]
        field: FieldOpts,
        #[command(flatten)]
        modes: ModeOpts,
        #[command(flatten)]
        phys: PhysOpts,
    },
    /// Eigenpairs nearest a shift, and the pair defining the coherent family
    Spectrum {
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Coherent-set masks and fibres at chosen times
    Extract {
        #[command(flatten)]
        family: FamilyOpts,
        #[command(flatten)]
        extract: ExtractOpts,
    },
    /// Particle survival in the coherent family
    Simulate {
        #[command(flatten)]
        field: FieldOpts,
        #[command(flatten)]
        family: FamilyOpts,
        #[command(flatten)]
        sim: SimOpts,
    },
    /// Run every stage for an example and write report.json
    Reproduce {
        /// translated-gyres, oscillating-gyres or shear
        name: Option<String>,
        #[command(flatten)]
        field: FieldOpts,
        #[command(flatten)]
        modes: ModeOpts,
        #[command(flatten)]
        phys: PhysOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[command(flatten)]
        family: FamilyOpts,
        #[command(flatten)]
        extract: ExtractOpts,
        #[command(flatten)]
        sim: SimOpts,
    },
}

fn known_keys() -> BTreeSet<String> {
    fn walk(cmd: &clap::Command, keys: &mut BTreeSet<String>) {
        for a in cmd.get_arguments() {
            if let Some(l) = a.get_long() {
                keys.insert(l.to_string());
            }
        }
        for sub in cmd.get_subcommands() {
            walk(sub, keys);
        }
    }
    let mut keys = BTreeSet::new();
    walk(&Cli::command(), &mut keys);
    for k in ["config", "help", "version"] {
        keys.remove(k);
    }
    keys
}

fn parse_example(s: &str) -> anyhow::Result<Option<Example>> {
    if s == "custom" {
        return Ok(None);
    }
    Ok(Some(s.parse()?))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::load(cli.config.as_deref(), &known_keys())?;
    let positional = match &cli.cmd {
        Cmd::Reproduce { name, .. } => name.clone(),
        _ => None,
    };
    let out = settings
        .get("out", None)?
        .filter(|_| cli.out.as_os_str() == ".")
        .unwrap_or(cli.out);
    let from = settings
        .get("from", cli.from)?
        .unwrap_or_else(|| out.clone());
    let reproducing = matches!(cli.cmd, Cmd::Reproduce { .. });
    // Later stages inherit the example recorded by the field stage.
    let recorded = || -> Option<String> {
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(from.join(stages::FIELD_JSON)).ok()?).ok()?;
        v["example"].as_str().map(String::from)
    };
    let example_arg = positional
        .or(cli.example.clone())
        .or(settings.raw("example").map(String::from))
        .or_else(|| (!reproducing).then(recorded).flatten());
    let example = match example_arg.as_deref() {
        Some(s) => parse_example(s)?,
        None if reproducing => return Err(Invalid("reproduce needs an example name".into()).into()),
        None => None,
    };
    if let Cmd::Reproduce { field, .. } = &cli.cmd {
        if example.is_none() && field.field.is_none() && settings.raw("field").is_none() {
            return Err(Invalid("reproducing a custom example needs --field CSV".into()).into());
        }
    }
    std::fs::create_dir_all(&out)?;
    let ctx = Ctx {
        example,
        defaults: Defaults::for_example(example),
        settings,
        out,
        from,
    };

    let written = match &cli.cmd {
        Cmd::Field { field } => stages::field(&ctx, field)?,
        Cmd::Assemble { field, modes, phys } => stages::assemble(&ctx, field, modes, phys)?,
        Cmd::Spectrum { solver } => stages::spectrum(&ctx, solver)?,
        Cmd::Extract { family, extract } => stages::extract(&ctx, family, extract)?,
        Cmd::Simulate { field, family, sim } => stages::simulate(&ctx, field, family, sim)?,
        Cmd::Reproduce {
            field,
            modes,
            phys,
            solver,
            family,
            extract,
            sim,
            ..
        } => stages::reproduce(
            &ctx,
            &stages::ReproduceOpts {
                field,
                modes,
                phys,
                solver,
                family,
                extract,
                sim,
            },
        )?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use torus_coherent::Error as E;
    for cause in err.chain() {
        if cause.is::<Numerical>() {
            return 3;
        }
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonFinite(_) | E::Factorization { .. } | E::EmptyCoherentSet => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
