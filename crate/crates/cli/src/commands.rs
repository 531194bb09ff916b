use std::fmt::Write as _;
use std::path::Path;

use prodlab::ensembles::{sample_matrix, AtomDistribution};
use prodlab::io::{
    eigenvalues_csv, fmt_f64, histogram_csv, radial_csv, trials_csv, HISTOGRAM_BINS,
};
use prodlab::linalg::{eigenvalues, identity_selftest_with, InjectedFault, SelftestOptions};
use prodlab::linearize::{check_linearization, scaled_product};
use prodlab::mc::{
    run_experiment, ComparisonKind, ComparisonStatus, ComparisonTable, ExperimentConfig,
    ExperimentOutput, Target,
};
use prodlab::rng::{counter_hash, factor_seed};
use prodlab::spectra::{radial_ks, TestFunction};
use prodlab::theory::{linearized_covariance, product_covariance, CovarianceQuadrature, KernelId};
use prodlab::{Error, RealMatrix};

use crate::config::{Overrides, RunConfig, TargetKind};
use crate::manifest::ManifestBuilder;
use crate::CliError;

pub const SELFTEST_SEED: u64 = 42;
const IDENTITY_THRESHOLD: f64 = 1e-10;
const LINEARIZATION_THRESHOLD: f64 = 1e-6;
const QUADRATURE_THRESHOLD: f64 = 1e-10;

/// Test-only hook: `PRODLAB_INJECT_FAULT=woodbury` corrupts the Woodbury check.
const FAULT_ENV: &str = "PRODLAB_INJECT_FAULT";

struct Check {
    name: String,
    residual: f64,
    threshold: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.residual < self.threshold
    }
}

fn linearization_residual(seed: u64) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for m in 1..=4usize {
        let dist = if m % 2 == 0 {
            AtomDistribution::gaussian(1.0)
        } else {
            AtomDistribution::rademacher(1.0)
        };
        let factors: Vec<RealMatrix> = (0..m)
            .map(|k| sample_matrix(&dist, 12, factor_seed(seed, m as u64, k as u64)))
            .collect();
        worst =
            worst.max(check_linearization(&factors, LINEARIZATION_THRESHOLD)?.max_pairing_distance);
    }
    Ok(worst)
}

fn quadrature_residual() -> Result<f64, CliError> {
    let monomials: Vec<TestFunction> = (0..=4).map(TestFunction::monomial).collect();
    let mut worst: f64 = 0.0;
    for kernel in [
        KernelId::Product,
        KernelId::ProductConj,
        KernelId::Linearized(2),
        KernelId::LinearizedConj(3),
    ] {
        let quad = CovarianceQuadrature::new(kernel, 1.5, 256)?;
        for f in &monomials {
            for g in &monomials {
                let closed = match kernel {
                    KernelId::Product => product_covariance(f, g).plain,
                    KernelId::ProductConj => product_covariance(f, g).conj,
                    KernelId::Linearized(m) => linearized_covariance(f, g, m)?.plain,
                    KernelId::LinearizedConj(m) => linearized_covariance(f, g, m)?.conj,
                };
                worst = worst.max((quad.covariance(f, g).value - closed).norm());
            }
        }
    }
    Ok(worst)
}

pub fn selftest(o: Overrides) -> Result<bool, CliError> {
    let seed = o.seed.unwrap_or(SELFTEST_SEED);
    let scale = o.tolerance_scale.unwrap_or(1.0);
    let fault = match std::env::var(FAULT_ENV).ok().as_deref() {
        None | Some("") => None,
        Some("woodbury") => Some(InjectedFault::Woodbury),
        Some(other) => return Err(CliError::Config(format!("unknown fault {other:?}"))),
    };
    let opts = SelftestOptions {
        fault,
        ..SelftestOptions::default()
    };
    let report = identity_selftest_with(seed, &opts)?;
    let mut checks: Vec<Check> = report
        .residuals()
        .iter()
        .map(|&(name, residual)| Check {
            name: name.to_string(),
            residual,
            // the equal-argument identity is exact
            threshold: if name == "resolvent_identity_equal" {
                f64::MIN_POSITIVE
            } else {
                IDENTITY_THRESHOLD * scale
            },
        })
        .collect();
    checks.push(Check {
        name: "weyl".into(),
        residual: if report.weyl_holds { 0.0 } else { 1.0 },
        threshold: 0.5,
    });
    checks.push(Check {
        name: "linearization".into(),
        residual: linearization_residual(seed)?,
        threshold: LINEARIZATION_THRESHOLD * scale,
    });
    checks.push(Check {
        name: "covariance_quadrature".into(),
        residual: quadrature_residual()?,
        threshold: QUADRATURE_THRESHOLD * scale,
    });
    let mut text = format!(
        "{:<26} {:>12} {:>12}  status\n",
        "check", "residual", "threshold"
    );
    for c in &checks {
        let _ = writeln!(
            text,
            "{:<26} {:>12.3e} {:>12.3e}  {}",
            c.name,
            c.residual,
            c.threshold,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        text,
        "weyl: {} pairs, worst slack {:.3e}",
        report.weyl_pairs, report.weyl_worst_slack
    );
    print!("{text}");
    match checks.iter().find(|c| !c.passed()) {
        Some(c) => {
            eprintln!("selftest failed: {}", c.name);
            Ok(false)
        }
        None => Ok(true),
    }
}

fn load(config: &Path, o: Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply(o)?;
    Ok(cfg)
}

fn run(exp: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    run_experiment(exp).map_err(|e| match e {
        Error::InvalidParameter(msg) => CliError::Config(msg),
        other => CliError::Abort(other.to_string()),
    })
}

fn print_comparison(exp: &ExperimentConfig, table: &ComparisonTable) {
    let labels = exp.labels();
    println!(
        "{:<8} {:<24} {:>24} {:>24} {:>10}  status",
        "kind", "statistic", "empirical", "theory", "error"
    );
    for e in &table.entries {
        let kind = match e.kind {
            ComparisonKind::VarRe => "var_re",
            ComparisonKind::VarIm => "var_im",
            ComparisonKind::Conj => "conj",
            ComparisonKind::Plain => "plain",
        };
        let pair = if e.i == e.j {
            labels[e.i].clone()
        } else {
            format!("{},{}", labels[e.i], labels[e.j])
        };
        let err = e.relative_error.unwrap_or(e.abs_error);
        println!(
            "{kind:<8} {pair:<24} {:>24} {:>24} {err:>10.4}  {}",
            format!("{:.4}", e.empirical),
            format!("{:.4}", e.theory),
            status_text(e.status)
        );
    }
    println!(
        "comparison: {} ({} samples)",
        status_text(table.status),
        table.samples
    );
}

fn status_text(s: ComparisonStatus) -> &'static str {
    match s {
        ComparisonStatus::Pass => "pass",
        ComparisonStatus::Fail => "FAIL",
        ComparisonStatus::InsufficientSamples => "insufficient samples",
    }
}

fn write_experiment(
    manifest: &mut ManifestBuilder,
    exp: &ExperimentConfig,
    out: &ExperimentOutput,
) -> Result<(), CliError> {
    manifest.write("trials.csv", &trials_csv(exp, &out.records))?;
    manifest.write_json("summary.json", &out.summary)?;
    if !out.failures.is_empty() {
        manifest.write_json("failures.json", &out.failures)?;
    }
    Ok(())
}

pub fn clt(config: &Path, out_dir: &Path, o: Overrides) -> Result<bool, CliError> {
    let cfg = load(config, o)?;
    if cfg.geometry.target == TargetKind::XiProcess {
        return Err(CliError::Config(
            "clt runs product or linearized targets; use `xi`".into(),
        ));
    }
    let exp = cfg.experiment()?;
    let mut manifest = ManifestBuilder::new("clt", out_dir, Some(cfg))?;
    let out = run(&exp)?;
    write_experiment(&mut manifest, &exp, &out)?;
    manifest.write(
        "histogram.csv",
        &histogram_csv(&exp, &out.records, HISTOGRAM_BINS)?,
    )?;
    let table = out
        .summary
        .theory_comparison
        .as_ref()
        .expect("filled by run_experiment");
    print_comparison(&exp, table);
    println!(
        "event rate {:.4}, failures {}",
        out.summary.event_rate,
        out.failures.len()
    );
    manifest.suite(
        "covariance",
        table.passed(),
        (table.status == ComparisonStatus::InsufficientSamples)
            .then(|| "insufficient samples".into()),
    );
    manifest.finish()?;
    Ok(table.passed())
}

pub fn xi(config: &Path, out_dir: &Path, o: Overrides) -> Result<bool, CliError> {
    let cfg = load(config, o)?;
    if cfg.geometry.target != TargetKind::XiProcess {
        return Err(CliError::Config(
            "xi needs geometry.target = \"xi_process\"".into(),
        ));
    }
    let exp = cfg.experiment()?;
    let Target::XiProcess { points } = &exp.target else {
        unreachable!("checked above")
    };
    let points = points.clone();
    let mut manifest = ManifestBuilder::new("xi", out_dir, Some(cfg))?;
    let out = run(&exp)?;
    write_experiment(&mut manifest, &exp, &out)?;
    let table = out
        .summary
        .theory_comparison
        .as_ref()
        .expect("filled by run_experiment");
    let mut csv = String::from(
        "z_re,z_im,w_re,w_im,kind,empirical_re,empirical_im,kernel_re,kernel_im,relative_error,abs_error,std_error,status\n",
    );
    for e in table
        .entries
        .iter()
        .filter(|e| matches!(e.kind, ComparisonKind::Conj | ComparisonKind::Plain))
    {
        let (z, w) = (points[e.i], points[e.j]);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(w.re),
            fmt_f64(w.im),
            if e.kind == ComparisonKind::Conj {
                "conj"
            } else {
                "plain"
            },
            fmt_f64(e.empirical.re),
            fmt_f64(e.empirical.im),
            fmt_f64(e.theory.re),
            fmt_f64(e.theory.im),
            e.relative_error.map_or_else(String::new, fmt_f64),
            fmt_f64(e.abs_error),
            fmt_f64(e.std_error),
            status_text(e.status).replace(' ', "_"),
        );
    }
    manifest.write("xi.csv", &csv)?;
    print_comparison(&exp, table);
    println!(
        "event rate {:.4}, failures {}",
        out.summary.event_rate,
        out.failures.len()
    );
    manifest.suite("kernel", table.passed(), None);
    manifest.finish()?;
    Ok(table.passed())
}

pub fn density(config: &Path, out_dir: &Path, o: Overrides) -> Result<bool, CliError> {
    let cfg = load(config, o)?;
    let dist = cfg.distribution()?;
    let (n, m) = (cfg.geometry.n, cfg.geometry.m);
    if n == 0 || m == 0 {
        return Err(CliError::Config("n and m must be positive".into()));
    }
    let seed = cfg.mc.seed;
    let min_n = cfg.tolerances.density_min_n;
    let threshold = cfg.tolerances.density_ks;
    let mut manifest = ManifestBuilder::new("density", out_dir, Some(cfg))?;
    let factors: Vec<RealMatrix> = (0..m)
        .map(|k| sample_matrix(&dist, n, factor_seed(seed, 0, k as u64)))
        .collect();
    let spec = eigenvalues(&scaled_product(&factors)?)?;
    let radius = dist.sigma.powi(m as i32);
    let ks = radial_ks(&spec, m, radius)?;
    manifest.write("eigenvalues.csv", &eigenvalues_csv(&spec))?;
    manifest.write("radial.csv", &radial_csv(&spec, m, radius))?;
    let judged = n >= min_n;
    let passed = !judged || ks < threshold;
    if judged {
        println!(
            "radial KS {ks:.5} (threshold {threshold}): {}",
            if passed { "pass" } else { "FAIL" }
        );
    } else {
        println!("radial KS {ks:.5}; threshold check skipped (n = {n} below {min_n})");
    }
    manifest.suite(
        "radial_ks",
        passed,
        Some(if judged {
            format!("ks = {ks}")
        } else {
            format!("ks = {ks}, skipped below min n")
        }),
    );
    manifest.finish()?;
    Ok(passed)
}

pub fn linearize_check(
    config: Option<&Path>,
    out_dir: Option<&Path>,
    o: Overrides,
) -> Result<bool, CliError> {
    let cfg = config.map(|p| load(p, o)).transpose()?;
    let (dist, n, ms, instances, seed) = match &cfg {
        Some(c) => (
            c.distribution()?,
            c.geometry.n,
            vec![c.geometry.m],
            c.mc.trials,
            c.mc.seed,
        ),
        None => (
            AtomDistribution::rademacher(1.0),
            16,
            vec![1, 2, 3, 4],
            5,
            o.seed.unwrap_or(0),
        ),
    };
    let tol = LINEARIZATION_THRESHOLD * o.tolerance_scale.unwrap_or(1.0);
    let mut csv = String::from("instance,m,n,max_pairing_distance,matched\n");
    let mut all = true;
    let mut worst: f64 = 0.0;
    for &m in &ms {
        for i in 0..instances {
            let key = counter_hash(&[seed, m as u64, i as u64]);
            let factors: Vec<RealMatrix> = (0..m)
                .map(|k| sample_matrix(&dist, n, factor_seed(key, 0, k as u64)))
                .collect();
            let check = check_linearization(&factors, tol)?;
            all &= check.matched;
            worst = worst.max(check.max_pairing_distance);
            let _ = writeln!(
                csv,
                "{i},{m},{n},{},{}",
                fmt_f64(check.max_pairing_distance),
                u8::from(check.matched)
            );
        }
    }
    println!(
        "linearization: {} instances, max pairing distance {worst:.3e} (tolerance {tol:.1e}): {}",
        ms.len() * instances,
        if all { "pass" } else { "FAIL" }
    );
    if let Some(dir) = out_dir {
        let mut manifest = ManifestBuilder::new("linearize-check", dir, cfg)?;
        manifest.write("linearize.csv", &csv)?;
        manifest.suite("linearization", all, None);
        manifest.finish()?;
    }
    Ok(all)
}
