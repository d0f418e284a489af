//! Full-scale acceptance checks. Each criterion prints one PASS/FAIL line
//! to stderr (uncaptured) and the test fails if any criterion does.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_coherent::coherent::{CoherentFamily, DEFAULT_GRID};
use torus_coherent::fourier_field::{
    builtin_oscillating_gyres, builtin_shear, builtin_translated_gyres, FourierField,
};
use torus_coherent::generator::{
    assemble, oracle_dense_assemble, rotation_entry, CoefficientVector, DiscreteGenerator,
};
use torus_coherent::mode_select::{class_of, class_union, product_ball};
use torus_coherent::presets::{Example, Preset};
use torus_coherent::sde::{binomial_sigma, run_survival, SimConfig, SurvivalCurve};
use torus_coherent::spectral::{
    conjugate_partner, residual, solve_shift_invert, RitzPair, SolverConfig, Spectrum,
};

type C = Complex<f64>;

struct Run {
    preset: Preset,
    field: FourierField<f64>,
    gen: DiscreteGenerator<f64>,
    spec: Spectrum,
    pair: RitzPair,
    elapsed: Duration,
}

fn reference_eigenvalue(ex: Example) -> C {
    match ex {
        Example::TranslatedGyres => C::new(-0.089, -1.041),
        Example::OscillatingGyres => C::new(-0.071, 0.0),
        Example::Shear => C::new(-0.097, 0.0),
    }
}

fn reference_c(ex: Example) -> f64 {
    match ex {
        Example::TranslatedGyres => 6.070,
        Example::OscillatingGyres => 6.158,
        Example::Shear => 5.680,
    }
}

fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn runs() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        Example::ALL
            .iter()
            .map(|&ex| {
                let preset = ex.preset();
                let clock = Instant::now();
                let field = preset.field().unwrap();
                let gen = assemble(&field, &preset.modeset(), preset.eps, preset.alpha).unwrap();
                let spec = solve_shift_invert(&gen, &SolverConfig::new(preset.eigen_k)).unwrap();
                let pair = preset.pick.select(&spec.pairs).unwrap().clone();
                let elapsed = clock.elapsed();
                report(&format!(
                    "  {}: dim {}, {} pairs, z = {:.5}, {:.1?}",
                    ex.name(),
                    gen.dim(),
                    spec.pairs.len(),
                    pair.z,
                    elapsed
                ));
                Run {
                    preset,
                    field,
                    gen,
                    spec,
                    pair,
                    elapsed,
                }
            })
            .collect()
    })
}

fn run_of(ex: Example) -> &'static Run {
    runs().iter().find(|r| r.preset.example == ex).unwrap()
}

/// Outcome of one criterion: the failures found, empty on success.
struct Check {
    failures: Vec<String>,
    info: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            info: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.info.push(what.into());
    }
}

fn oracle() -> Check {
    let mut c = Check::new();
    let alpha = [0.2, 0.2 * 2f64.sqrt()];
    let clock = Instant::now();
    let cases = [
        (
            "translated-gyres",
            builtin_translated_gyres::<f64>(),
            class_union(1, 2.0),
        ),
        ("shear", builtin_shear::<f64>(), product_ball(1, 2.0)),
    ];
    for (name, field, modes) in cases {
        let gen = assemble(&field, &modes, 0.03, alpha).unwrap();
        let dense = oracle_dense_assemble(&field, &modes, 0.03, alpha, [8, 8, 8, 8]).unwrap();
        let mut worst: f64 = 0.0;
        for (i, row) in dense.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                worst = worst.max((d - gen.matrix().get(i, j)).norm());
            }
        }
        c.require(
            worst <= 1e-10,
            format!("{name}: max entry error {worst:.2e}"),
        );
        c.note(format!("{name} max error {worst:.1e}"));
    }
    let t = clock.elapsed();
    c.require(t < Duration::from_secs(10), format!("took {t:.1?}"));
    c.note(format!("{t:.1?}"));
    c
}

fn rayleigh_real_parts(gen: &DiscreteGenerator<f64>, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let f = CoefficientVector(
            (0..gen.dim())
                .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        let gf = gen.apply(&f).unwrap();
        let num: C = f.0.iter().zip(&gf.0).map(|(a, b)| a.conj() * b).sum();
        worst = worst.max(num.re / f.norm().powi(2));
    }
    worst
}

fn structure() -> Check {
    let mut c = Check::new();
    for run in runs() {
        let name = run.preset.example.name();
        let gen = &run.gen;
        let modes = gen.modeset().modes();
        let skew = gen.skew_hermitian_residual();
        c.require(
            skew == 0.0,
            format!("{name}: skew-Hermitian residual {skew:e}"),
        );
        let mut coupled_zero_modes = 0;
        let mut cross_class = 0;
        for j in 0..gen.dim() {
            for (i, _) in gen.matrix().column(j) {
                if i != j && (modes[i].n_is_zero() || modes[j].n_is_zero()) {
                    coupled_zero_modes += 1;
                }
                if class_of(&modes[i]) != class_of(&modes[j]) {
                    cross_class += 1;
                }
            }
        }
        c.require(
            coupled_zero_modes == 0,
            format!("{name}: {coupled_zero_modes} off-diagonal zero-mode entries"),
        );
        if run.preset.example == Example::TranslatedGyres {
            c.require(
                cross_class == 0,
                format!("{name}: {cross_class} entries couple classes"),
            );
        }
        let rq = rayleigh_real_parts(gen, 500, 7);
        c.require(
            rq <= 1e-12,
            format!("{name}: Rayleigh quotient real part {rq:e}"),
        );
        c.note(format!("{name} max Re RQ {rq:.1e}"));
    }
    c
}

fn cardinalities() -> Check {
    let mut c = Check::new();
    let cu = class_union(2, 11.0).len();
    let pb = product_ball(6, 8.0).len();
    c.require(cu == 9425, format!("class_union(2,11) has {cu}"));
    c.require(pb == 33293, format!("product_ball(6,8) has {pb}"));
    c.note(format!("{cu}, {pb}"));
    c
}

fn spectrum_reproduction() -> Check {
    let mut c = Check::new();
    for run in runs() {
        let ex = run.preset.example;
        let name = ex.name();
        let want = reference_eigenvalue(ex);
        let z = run.pair.z;
        let close = |z: C| (z.re - want.re).abs() <= 0.01 && (z.im - want.im).abs() <= 0.01;
        c.require(
            close(z) || close(z.conj()),
            format!("{name}: leading {z:.5} vs {want}"),
        );
        c.note(format!("{name} {z:.4} in {:.0?}", run.elapsed));
        let gap = -2.0 * std::f64::consts::PI.powi(2) * run.preset.eps.powi(2);
        for p in &run.spec.pairs {
            c.require(p.z.re <= 1e-10, format!("{name}: Re z = {:e}", p.z.re));
            if p.z.re < -1e-8 {
                c.require(
                    p.z.re <= gap + 1e-6,
                    format!("{name}: {} above the gap {gap:.6}", p.z),
                );
            }
        }
        c.require(
            run.elapsed < Duration::from_secs(300),
            format!("{name}: {:.1?} exceeds 5 min", run.elapsed),
        );
    }
    c
}

fn survival_ok(c: &mut Check, name: &str, lambda: f64, curve: &SurvivalCurve) {
    let sigma = binomial_sigma(curve);
    let mut below = None;
    for (i, &t) in curve.times.iter().enumerate() {
        let bound = (2.0 * lambda * t).exp() - 3.0 * sigma[i];
        if curve.survival[i] < bound && below.is_none() {
            below = Some((t, curve.survival[i], bound));
        }
    }
    if let Some((t, s, b)) = below {
        c.require(
            false,
            format!("{name}: survival {s:.4} below {b:.4} at t = {t}"),
        );
    }
    c.require(
        curve.survival.windows(2).all(|w| w[1] <= w[0]),
        format!("{name}: survival increases"),
    );
}

fn survival_reproduction() -> Check {
    let mut c = Check::new();
    for run in runs() {
        let ex = run.preset.example;
        let name = ex.name();
        let p = &run.preset;
        let fam =
            CoherentFamily::new(&run.pair, run.gen.modeset(), p.method, p.q, DEFAULT_GRID).unwrap();
        let cfg = SimConfig::new(p.eps, p.alpha);
        let clock = Instant::now();
        let curve = run_survival(&fam, &cfg, &run.field).unwrap();
        let again = run_survival(&fam, &cfg, &run.field).unwrap();
        let want = reference_c(ex);
        c.require(
            (curve.c_value - want).abs() <= 0.5,
            format!("{name}: C = {:.3} vs {want}", curve.c_value),
        );
        survival_ok(&mut c, name, fam.lambda(), &curve);
        c.require(
            curve.survival == again.survival
                && curve.n_alive == again.n_alive
                && curve.c_value.to_bits() == again.c_value.to_bits(),
            format!("{name}: rerun differs"),
        );
        c.note(format!(
            "{name} C {:.3} in {:.0?}",
            curve.c_value,
            clock.elapsed()
        ));
    }
    c
}

fn self_consistency() -> Check {
    let mut c = Check::new();
    for run in runs() {
        let name = run.preset.example.name();
        let gen = &run.gen;
        let spec = &run.spec;
        let far = spec
            .pairs
            .iter()
            .map(|p| (p.z - spec.shift).norm())
            .fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for p in &spec.pairs {
            let r = residual(gen, p.z, &p.vector).unwrap();
            worst = worst.max(r / (1.0 + p.z.norm()));
            let (zc, w) = conjugate_partner(p, gen.modeset()).unwrap();
            let rc = residual(gen, zc, &w).unwrap();
            c.require(
                (rc - r).abs() <= 1e-10 * (1.0 + p.z.norm()),
                format!("{name}: partner residual {rc:e} vs {r:e}"),
            );
            let split = (zc - spec.shift).norm() >= far - 1e-9;
            if p.z.im.abs() > 1e-8 && !split {
                c.require(
                    spec.pairs
                        .iter()
                        .any(|o| (o.z - zc).norm() <= 1e-8 * (1.0 + zc.norm())),
                    format!("{name}: no partner for {}", p.z),
                );
            }
        }
        c.require(
            worst <= 1e-8,
            format!("{name}: relative residual {worst:e}"),
        );

        let modes = gen.modeset();
        let mut analytic = Vec::new();
        for (i, k) in modes.modes().iter().enumerate() {
            if k.n_is_zero() {
                let z = C::new(0.0, rotation_entry(gen.alpha(), k));
                let r = residual(gen, z, &CoefficientVector::unit(gen.dim(), i)).unwrap();
                c.require(
                    r <= 1e-12,
                    format!("{name}: n = 0 mode {k:?} residual {r:e}"),
                );
                analytic.push(z);
            }
        }
        for p in spec.pairs.iter().filter(|p| p.z.re.abs() < 1e-8) {
            let d = analytic
                .iter()
                .map(|a| (a - p.z).norm())
                .fold(f64::INFINITY, f64::min);
            c.require(
                d <= 1e-12,
                format!("{name}: undamped {} is {d:e} from −2πi m·α", p.z),
            );
        }
        c.note(format!("{name} max residual {worst:.1e}"));
    }
    c
}

fn field_validation() -> Check {
    let mut c = Check::new();
    let og = builtin_oscillating_gyres::<f64>(0.15, 1e-4).unwrap();
    c.require(
        og.len() <= 150,
        format!("oscillating-gyres field has {} modes", og.len()),
    );
    c.note(format!("oscillating-gyres {} modes", og.len()));
    let fields = [
        ("translated-gyres", builtin_translated_gyres::<f64>()),
        ("oscillating-gyres", og),
        ("shear", builtin_shear::<f64>()),
    ];
    for (name, f) in &fields {
        let (d, h) = (f.divergence_residual(), f.hermitian_residual());
        c.require(d <= 1e-10, format!("{name}: divergence residual {d:e}"));
        c.require(h <= 1e-10, format!("{name}: Hermitian residual {h:e}"));
    }
    c
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("oracle equivalence", oracle),
        ("structural invariants", structure),
        ("set cardinalities", cardinalities),
        ("spectrum reproduction", spectrum_reproduction),
        ("survival reproduction", survival_reproduction),
        ("eigensolver self-consistency", self_consistency),
        ("field validation", field_validation),
    ];
    let mut failed = Vec::new();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let c = check();
        let verdict = if c.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let mut line = format!(
            "criterion {}: {verdict} {title} [{}]",
            i + 1,
            c.info.join("; ")
        );
        if !c.failures.is_empty() {
            line.push_str(&format!(" failures: {}", c.failures.join("; ")));
            failed.push(i + 1);
        }
        report(&line);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn translated_gyres_spectrum_lies_on_few_vertical_lines() {
    let run = run_of(Example::TranslatedGyres);
    assert_eq!(run.spec.pairs.len(), 100);
    let mut re: Vec<i64> = run
        .spec
        .pairs
        .iter()
        .map(|p| (p.z.re * 1e3).round() as i64)
        .collect();
    re.sort_unstable();
    re.dedup();
    assert!(re.len() <= 15, "{} distinct real parts: {re:?}", re.len());
}

#[test]
fn generator_densities_match_reference_values() {
    let want = [
        (Example::TranslatedGyres, 0.04),
        (Example::OscillatingGyres, 0.31),
        (Example::Shear, 0.023),
    ];
    let mut bad = Vec::new();
    for (ex, pct) in want {
        let d = 100.0 * run_of(ex).gen.density();
        if (d - pct).abs() > 0.2 * pct + 1e-9 {
            bad.push(format!("{}: {d:.4}% vs {pct}%", ex.name()));
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}
