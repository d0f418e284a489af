//! Pipeline stages. Each reads its inputs from `ctx.from` and writes to `ctx.out`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use torus_coherent::coherent::{phase_normalize, CoherentFamily, Method};
use torus_coherent::generator::{assemble as assemble_generator, CoefficientVector};
use torus_coherent::sde::{run_survival, SimConfig, SurvivalSummary};
use torus_coherent::sparse::CscMatrix;
use torus_coherent::spectral::{solve_shift_invert, RitzPair, SolverConfig};
use torus_coherent::{DiscreteGenerator, FourierField, ModeSet, ModeSetKind, C64};

use crate::config::*;
use crate::{Invalid, Numerical};

pub const FIELD_CSV: &str = "field.csv";
pub const FIELD_JSON: &str = "field.json";
pub const MODES_CSV: &str = "modes.csv";
pub const MATRIX: &str = "generator.mtx";
pub const GENERATOR_JSON: &str = "generator.json";
pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const SPECTRUM_JSON: &str = "spectrum.json";
pub const EIGENVECTOR_CSV: &str = "eigenvector.csv";
pub const EXTRACT_JSON: &str = "extract.json";
pub const SURVIVAL_CSV: &str = "survival.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const REPORT_JSON: &str = "report.json";

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path, hint: &str) -> anyhow::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Invalid(format!("cannot open {}: {e} ({hint})", path.display())).into())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json(path: &Path, hint: &str) -> anyhow::Result<Value> {
    serde_json::from_reader(open(path, hint)?)
        .map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

fn json_f64(v: &Value, key: &str, path: &Path) -> anyhow::Result<f64> {
    v[key]
        .as_f64()
        .ok_or_else(|| Invalid(format!("{}: missing number {key:?}", path.display())).into())
}

fn json_pair(v: &Value, key: &str, path: &Path) -> anyhow::Result<[f64; 2]> {
    match v[key]
        .as_array()
        .map(|a| a.iter().map(Value::as_f64).collect::<Vec<_>>())
    {
        Some(a) if a.len() == 2 && a.iter().all(Option::is_some) => {
            Ok([a[0].unwrap(), a[1].unwrap()])
        }
        _ => Err(Invalid(format!("{}: missing pair {key:?}", path.display())).into()),
    }
}

/// Time label used in file names: `0`, `5`, `2.5`.
fn tlabel(t: f64) -> String {
    format!("{t}")
}

fn load_field(ctx: &Ctx, opts: &FieldOpts) -> anyhow::Result<FourierField> {
    let path = ctx
        .settings
        .get("field", opts.field.clone())?
        .unwrap_or_else(|| ctx.input(FIELD_CSV));
    Ok(FourierField::read_csv(open(
        &path,
        "run the `field` stage first or pass --field",
    )?)?)
}

struct Generator {
    eps: f64,
    alpha: [f64; 2],
}

fn load_generator_json(ctx: &Ctx) -> anyhow::Result<Generator> {
    let path = ctx.input(GENERATOR_JSON);
    let stats = read_json(&path, "run the `assemble` stage first")?;
    Ok(Generator {
        eps: json_f64(&stats, "eps", &path)?,
        alpha: json_pair(&stats, "alpha", &path)?,
    })
}

fn load_modes(ctx: &Ctx) -> anyhow::Result<ModeSet> {
    let path = ctx.input(MODES_CSV);
    Ok(ModeSet::read_csv(
        open(&path, "run the `assemble` stage first")?,
        ModeSetKind::Custom,
    )?)
}

/// The selected eigenpair written by the spectrum stage.
fn load_pair(ctx: &Ctx, modes: &ModeSet) -> anyhow::Result<RitzPair> {
    let path = ctx.input(SPECTRUM_JSON);
    let spec = read_json(&path, "run the `spectrum` stage first")?;
    let sel = &spec["selected"];
    let vector = CoefficientVector::read_csv(
        open(
            &ctx.input(EIGENVECTOR_CSV),
            "run the `spectrum` stage first",
        )?,
        modes,
    )?;
    Ok(RitzPair {
        z: C64::new(json_f64(sel, "re", &path)?, json_f64(sel, "im", &path)?),
        vector,
        residual: json_f64(sel, "residual", &path)?,
    })
}

fn family(
    ctx: &Ctx,
    modes: &ModeSet,
    pair: &RitzPair,
    opts: &FamilyOpts,
) -> anyhow::Result<(CoherentFamily, [f64; 2])> {
    let method: Method = ctx
        .settings
        .get("method", opts.method)?
        .unwrap_or(ctx.defaults.method);
    let q = ctx.settings.get("q", opts.q)?.unwrap_or(ctx.defaults.q);
    let theta = ctx
        .settings
        .get("theta", opts.theta)?
        .map_or([0.0, 0.0], |p| p.0);
    let fam = CoherentFamily::new(pair, modes, method, q, ctx.grid(opts)?)?;
    Ok((fam, theta))
}

pub fn field(ctx: &Ctx, opts: &FieldOpts) -> anyhow::Result<Vec<PathBuf>> {
    let field = match ctx.settings.get("field", opts.field.clone())? {
        Some(path) => FourierField::read_csv(open(&path, "coefficient CSV for a custom field")?)?,
        None => {
            let example = ctx
                .example
                .ok_or_else(|| Invalid("a custom field needs --field CSV".into()))?;
            let delta = ctx
                .settings
                .get("delta", opts.delta)?
                .unwrap_or(ctx.defaults.delta);
            let err = ctx
                .settings
                .get("err", opts.err)?
                .unwrap_or(ctx.defaults.err);
            example.field(delta, err)?
        }
    };
    field.validate()?;
    let (fm, fn_) = field.max_frequencies();
    let csv = ctx.output(FIELD_CSV);
    let mut w = create(&csv)?;
    field.write_csv(&mut w)?;
    w.flush()?;
    let stats = ctx.output(FIELD_JSON);
    write_json(
        &stats,
        &json!({
            "example": ctx.example.map(|e| e.name()).unwrap_or("custom"),
            "modes": field.len(),
            "threshold": field.threshold_used(),
            "max_norm": field.max_norm(),
            "max_m": fm,
            "max_n": fn_,
            "divergence_residual": field.divergence_residual(),
            "hermitian_residual": field.hermitian_residual(),
        }),
    )?;
    eprintln!("field: {} modes", field.len());
    Ok(vec![csv, stats])
}

pub fn assemble(
    ctx: &Ctx,
    fopts: &FieldOpts,
    mopts: &ModeOpts,
    popts: &PhysOpts,
) -> anyhow::Result<Vec<PathBuf>> {
    let field = load_field(ctx, fopts)?;
    let d = &ctx.defaults;
    let rule = ctx
        .settings
        .get("mode-rule", mopts.mode_rule)?
        .unwrap_or(d.mode_rule);
    let k = ctx.settings.get("K", mopts.kmax)?.unwrap_or(d.k);
    let r = ctx.settings.get("r", mopts.r)?.unwrap_or(d.r);
    let eps = ctx.settings.get("eps", popts.eps)?.unwrap_or(d.eps);
    let alpha = ctx
        .settings
        .get("alpha", popts.alpha)?
        .map_or(d.alpha, |p| p.0);
    if !(r >= 0.0) {
        return Err(Invalid(format!("radius r must be ≥ 0, got {r}")).into());
    }
    let clock = Instant::now();
    let modes = rule.build(k, r);
    let gen = assemble_generator(&field, &modes, eps, alpha)?;
    let stats = gen.stats();
    eprintln!(
        "assemble: dim {} nnz {} density {:.4}% ({:.1?})",
        stats.dim,
        stats.nnz,
        100.0 * stats.density,
        clock.elapsed()
    );
    let modes_path = ctx.output(MODES_CSV);
    let mut w = create(&modes_path)?;
    modes.write_csv(&mut w)?;
    w.flush()?;
    let mtx = ctx.output(MATRIX);
    let mut w = create(&mtx)?;
    gen.write_matrix_market(&mut w)?;
    w.flush()?;
    let json_path = ctx.output(GENERATOR_JSON);
    write_json(&json_path, &stats)?;
    Ok(vec![modes_path, mtx, json_path])
}

pub fn spectrum(ctx: &Ctx, opts: &SolverOpts) -> anyhow::Result<Vec<PathBuf>> {
    let meta = load_generator_json(ctx)?;
    let modes = load_modes(ctx)?;
    let matrix =
        CscMatrix::read_matrix_market(open(&ctx.input(MATRIX), "run the `assemble` stage first")?)?;
    let gen = DiscreteGenerator::from_matrix(matrix, modes, meta.eps, meta.alpha)?;

    let s = &ctx.settings;
    let mut cfg = SolverConfig::new(s.get("k", opts.k)?.unwrap_or(ctx.defaults.eigen_k))
        .with_shift(ctx.shift(opts.shift, meta.eps)?);
    if let Some(m) = s.get("krylov-dim", opts.krylov_dim)? {
        cfg.krylov_dim = m;
    }
    if let Some(t) = s.get("tol", opts.tol)? {
        cfg.tol = t;
    }
    if let Some(r) = s.get("max-restarts", opts.max_restarts)? {
        cfg.max_restarts = r;
    }
    cfg.validate()?;
    let pick = ctx.pick(opts)?;

    let clock = Instant::now();
    let spec = solve_shift_invert(&gen, &cfg)?;
    eprintln!(
        "spectrum: {} pairs, {} restarts, {} solves ({:.1?}){}",
        spec.pairs.len(),
        spec.restarts,
        spec.operator_applications,
        clock.elapsed(),
        if spec.incomplete { " [incomplete]" } else { "" }
    );
    let chosen = pick
        .select(&spec.pairs)
        .map_err(|_| Numerical(format!("no converged eigenvalue matches {pick:?}")))?;
    let index = spec
        .pairs
        .iter()
        .position(|p| std::ptr::eq(p, chosen))
        .unwrap_or(0);
    let chosen = phase_normalize(chosen, gen.modeset())?;
    eprintln!("spectrum: selected z = {:.5}", chosen.z);

    let csv = ctx.output(SPECTRUM_CSV);
    let mut w = create(&csv)?;
    spec.write_csv(&mut w)?;
    w.flush()?;
    let vec_path = ctx.output(EIGENVECTOR_CSV);
    let mut w = create(&vec_path)?;
    chosen.vector.write_csv(gen.modeset(), &mut w)?;
    w.flush()?;
    let json_path = ctx.output(SPECTRUM_JSON);
    write_json(
        &json_path,
        &json!({
            "k": cfg.k,
            "krylov_dim": cfg.krylov_dim,
            "tol": cfg.tol,
            "shift": [spec.shift.re, spec.shift.im],
            "shift_perturbed": spec.shift_perturbed,
            "incomplete": spec.incomplete,
            "restarts": spec.restarts,
            "operator_applications": spec.operator_applications,
            "converged": spec.pairs.len(),
            "pick": pick,
            "selected": {
                "index": index,
                "re": chosen.z.re,
                "im": chosen.z.im,
                "residual": chosen.residual,
            },
        }),
    )?;
    Ok(vec![csv, vec_path, json_path])
}

pub fn extract(ctx: &Ctx, fopts: &FamilyOpts, eopts: &ExtractOpts) -> anyhow::Result<Vec<PathBuf>> {
    let meta = load_generator_json(ctx)?;
    let modes = load_modes(ctx)?;
    let pair = load_pair(ctx, &modes)?;
    let (fam, theta0) = family(ctx, &modes, &pair, fopts)?;
    let times = ctx
        .settings
        .get("t", eopts.times.clone())?
        .map_or(vec![0.0, 5.0, 10.0], |l| l.0);
    if let Some(t) = times.iter().find(|t| **t < 0.0) {
        return Err(Invalid(format!("extraction times must be ≥ 0, got {t}")).into());
    }
    let mut written = Vec::new();
    let mut frames = Vec::new();
    for &t in &times {
        let frame = fam.frame(theta0, meta.alpha, t);
        let mask = ctx.output(&format!("mask_t{}.pgm", tlabel(t)));
        let mut w = create(&mask)?;
        frame.write_pgm(&mut w)?;
        w.flush()?;
        let fibre = ctx.output(&format!("fibre_t{}.csv", tlabel(t)));
        let mut w = create(&fibre)?;
        frame.raster.write_csv(&mut w)?;
        w.flush()?;
        let bound = fam.theoretical_survival_bound(theta0, meta.alpha, t).ok();
        eprintln!("extract: t = {t}: member fraction {:.4}", frame.area());
        frames.push(json!({
            "t": t,
            "theta": frame.raster.theta,
            "area": frame.area(),
            "l1": frame.raster.l1,
            "survival_bound": bound,
            "mask": mask.file_name().and_then(|s| s.to_str()),
            "fibre": fibre.file_name().and_then(|s| s.to_str()),
        }));
        written.push(mask);
        written.push(fibre);
    }
    let json_path = ctx.output(EXTRACT_JSON);
    write_json(
        &json_path,
        &json!({
            "method": fam.method,
            "q": fam.q,
            "grid": fam.grid_size,
            "theta0": theta0,
            "alpha": meta.alpha,
            "lambda": fam.lambda(),
            "eta": fam.eta(),
            "frames": frames,
        }),
    )?;
    written.push(json_path);
    Ok(written)
}

pub fn simulate(
    ctx: &Ctx,
    field_opts: &FieldOpts,
    fopts: &FamilyOpts,
    sopts: &SimOpts,
) -> anyhow::Result<Vec<PathBuf>> {
    let field = load_field(ctx, field_opts)?;
    let meta = load_generator_json(ctx)?;
    let modes = load_modes(ctx)?;
    let pair = load_pair(ctx, &modes)?;
    let (fam, theta0) = family(ctx, &modes, &pair, fopts)?;
    let s = &ctx.settings;
    let mut cfg = SimConfig::new(meta.eps, meta.alpha);
    cfg.theta0 = theta0;
    if let Some(n) = s.get("particles", sopts.particles)? {
        cfg.grid_particles = n;
    }
    if let Some(t) = s.get("t-max", sopts.t_max)? {
        cfg.t_max = t;
    }
    if let Some(h) = s.get("h", sopts.h)? {
        cfg.h = h;
    }
    if let Some(seed) = s.get("seed", sopts.seed)? {
        cfg.seed = seed;
    }
    if let Some(c) = s.get("check-every", sopts.check_every)? {
        cfg.check_every = c;
    }
    cfg.validate()?;
    let clock = Instant::now();
    let curve = run_survival(&fam, &cfg, &field)?;
    eprintln!(
        "simulate: {} particles start inside, C = {:.3} over [0, {}] ({:.1?})",
        curve.n_initial,
        curve.c_value,
        curve.horizon,
        clock.elapsed()
    );
    let csv = ctx.output(SURVIVAL_CSV);
    let mut w = create(&csv)?;
    curve.write_csv(fam.lambda(), &mut w)?;
    w.flush()?;
    let json_path = ctx.output(SUMMARY_JSON);
    write_json(&json_path, &SurvivalSummary::new(&fam, &cfg, &curve))?;
    Ok(vec![csv, json_path])
}

pub struct ReproduceOpts<'a> {
    pub field: &'a FieldOpts,
    pub modes: &'a ModeOpts,
    pub phys: &'a PhysOpts,
    pub solver: &'a SolverOpts,
    pub family: &'a FamilyOpts,
    pub extract: &'a ExtractOpts,
    pub sim: &'a SimOpts,
}

/// Run every stage in `ctx.out`, then write `report.json`. On failure the
/// report names the stage and lists what was written so far.
pub fn reproduce(ctx: &Ctx, o: &ReproduceOpts) -> anyhow::Result<Vec<PathBuf>> {
    type Stage<'s> = (
        &'static str,
        Box<dyn Fn() -> anyhow::Result<Vec<PathBuf>> + 's>,
    );
    let stages: Vec<Stage> = vec![
        ("field", Box::new(|| field(ctx, o.field))),
        (
            "assemble",
            Box::new(|| assemble(ctx, o.field, o.modes, o.phys)),
        ),
        ("spectrum", Box::new(|| spectrum(ctx, o.solver))),
        ("extract", Box::new(|| extract(ctx, o.family, o.extract))),
        (
            "simulate",
            Box::new(|| simulate(ctx, o.field, o.family, o.sim)),
        ),
    ];
    let mut written = Vec::new();
    for (name, run) in stages {
        match run() {
            Ok(files) => written.extend(files),
            Err(e) => {
                let report = json!({
                    "example": ctx.example.map(|e| e.name()).unwrap_or("custom"),
                    "failed_stage": name,
                    "error": format!("{e:#}"),
                    "manifest": manifest(&written)?,
                });
                write_json(&ctx.output(REPORT_JSON), &report)?;
                return Err(e.context(format!("stage {name} failed")));
            }
        }
    }
    let read = |name: &str| read_json(&ctx.output(name), "written by this run");
    let spectrum_rows: Vec<Value> = fs::read_to_string(ctx.output(SPECTRUM_CSV))?
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').filter_map(|x| x.parse().ok()).collect();
            json!({"re": v[0], "im": v[1], "residual": v[2]})
        })
        .collect();
    let spec = read(SPECTRUM_JSON)?;
    let report = json!({
        "example": ctx.example.map(|e| e.name()).unwrap_or("custom"),
        "version": env!("CARGO_PKG_VERSION"),
        "field": read(FIELD_JSON)?,
        "generator": read(GENERATOR_JSON)?,
        "solver": spec,
        "spectrum": spectrum_rows,
        "eigenpair": spec["selected"],
        "extract": read(EXTRACT_JSON)?,
        "survival": read(SUMMARY_JSON)?,
        "manifest": manifest(&written)?,
    });
    let path = ctx.output(REPORT_JSON);
    write_json(&path, &report)?;
    written.push(path);
    Ok(written)
}

fn manifest(files: &[PathBuf]) -> anyhow::Result<Vec<Value>> {
    files
        .iter()
        .map(|p| {
            let bytes = fs::metadata(p)?.len();
            Ok(json!({"file": p.file_name().and_then(|s| s.to_str()), "bytes": bytes}))
        })
        .collect()
}
