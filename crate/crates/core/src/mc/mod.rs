//! Monte Carlo experiments over independent trials.
//!
//! Every trial is a pure function of `(config, trial_index)`: factor `k` of
//! trial `t` is sampled from `factor_seed(master_seed, t, k)`. Trials may run
//! on any number of threads; results are collected by index and reduced in
//! index order, so the output does not depend on scheduling.

mod summary;

pub use summary::{
    compare_to_theory, summarize, theory_values, ComparisonEntry, ComparisonKind, ComparisonMode,
    ComparisonStatus, ComparisonTable, ExperimentSummary, MinSingularSummary, StatisticSummary,
    Tolerances, MIN_COMPARISON_SAMPLES,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::{
    sample_matrix, truncate_hat, validate_epsilon, AtomDistribution, TruncationParams,
};
use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, real_schur, real_schur_with_vectors, BlockCyclic, ComplexSpectrum,
};
use crate::linearize::{scaled_factors, scaled_product};
use crate::matrix::RealMatrix;
use crate::rng::factor_seed;
use crate::spectra::{
    least_singular_event_block_cyclic, least_singular_event_schur, linear_statistic,
    xi_from_spectrum, EventReport, TestFunction, DEFAULT_DELTA, DEFAULT_EVENT_C,
    DEFAULT_GRIDPOINTS,
};

/// Largest `n * m` accepted by [`ExperimentConfig::validate`].
pub const SOLVER_CAP: usize = 4096;

/// Fraction of failed trials above which an experiment is aborted.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Matrix whose spectrum the statistics are taken over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// `tr f(P)` for the scaled product `P`.
    Product,
    /// `tr g(Y)` for the block-cyclic linearization `Y`.
    Linearized,
    /// `tr (Y - zI)^{-1}` at each point, times the event indicator when gated.
    XiProcess { points: Vec<Complex64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    pub enabled: bool,
    pub c: f64,
    pub gridpoints: usize,
    /// Multiply statistics by the event indicator. `None` gates only the
    /// resolvent process.
    #[serde(default)]
    pub gate: Option<bool>,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            c: DEFAULT_EVENT_C,
            gridpoints: DEFAULT_GRIDPOINTS,
            gate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub dist: AtomDistribution,
    pub functions: Vec<TestFunction>,
    pub trials: usize,
    pub delta: f64,
    /// Truncation exponent; `None` samples the raw atoms.
    pub epsilon: Option<f64>,
    pub master_seed: u64,
    pub event: EventConfig,
    pub target: Target,
    pub tolerances: Tolerances,
    /// Worker threads; 0 uses the global pool, 1 runs on the calling thread.
    #[serde(skip)]
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(n: usize, m: usize, dist: AtomDistribution, target: Target) -> Self {
        Self {
            n,
            m,
            dist,
            functions: Vec::new(),
            trials: 100,
            delta: DEFAULT_DELTA,
            epsilon: None,
            master_seed: 0,
            event: EventConfig::default(),
            target,
            tolerances: Tolerances::default(),
            threads: 0,
        }
    }

    pub fn gated(&self) -> bool {
        self.event.enabled
            && self
                .event
                .gate
                .unwrap_or(matches!(self.target, Target::XiProcess { .. }))
    }

    /// Number of statistics per trial.
    pub fn width(&self) -> usize {
        match &self.target {
            Target::XiProcess { points } => points.len(),
            _ => self.functions.len(),
        }
    }

    /// Column labels of the statistics.
    pub fn labels(&self) -> Vec<String> {
        match &self.target {
            Target::XiProcess { points } => points.iter().map(|z| format!("xi({z})")).collect(),
            _ => (0..self.functions.len()).map(|i| format!("f{i}")).collect(),
        }
    }

    /// Order of the eigenvalue set the statistics are taken over.
    pub fn spectrum_size(&self) -> usize {
        match self.target {
            Target::Product => self.n,
            _ => self.n * self.m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("n and m must be positive"));
        }
        if self.n * self.m > SOLVER_CAP {
            return Err(Error::invalid(format!(
                "n*m = {} exceeds the solver cap {SOLVER_CAP}",
                self.n * self.m
            )));
        }
        if self.trials < 2 {
            return Err(Error::invalid("at least two trials are required"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        self.dist.validate()?;
        if (self.dist.sigma - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "experiments use unit-variance atoms, got sigma = {}",
                self.dist.sigma
            )));
        }
        if let Some(eps) = self.epsilon {
            validate_epsilon(eps, &self.dist)?;
        }
        if self.event.enabled {
            if !(self.event.c > 0.0 && self.event.c.is_finite()) {
                return Err(Error::invalid("event threshold c must be positive"));
            }
            if self.event.gridpoints < 8 {
                return Err(Error::invalid("event grid needs at least 8 points"));
            }
        }
        match &self.target {
            Target::XiProcess { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("resolvent process needs at least one point"));
                }
                if let Some(z) = points.iter().find(|z| !(z.norm() > 1.0) || !z.is_finite()) {
                    return Err(Error::invalid(format!(
                        "process point {z} must lie outside the unit disk"
                    )));
                }
            }
            _ => {
                if self.functions.is_empty() {
                    return Err(Error::invalid("at least one test function is required"));
                }
                if let Some(f) = self.functions.iter().find(|f| f.delta() < self.delta) {
                    return Err(Error::invalid(format!(
                        "test function margin {} is below delta = {}",
                        f.delta(),
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One trial's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub statistics: Vec<Complex64>,
    pub event_held: bool,
    /// Grid minimum of the least singular value; `None` when events are off.
    pub min_singular: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: ExperimentSummary,
}

/// Factor matrices of one trial, truncated when the config asks for it.
pub fn trial_factors(config: &ExperimentConfig, trial: usize) -> Result<Vec<RealMatrix>> {
    let params = config
        .epsilon
        .map(|eps| TruncationParams::new(eps, config.n, &config.dist))
        .transpose()?;
    (0..config.m)
        .map(|k| {
            let x = sample_matrix(
                &config.dist,
                config.n,
                factor_seed(config.master_seed, trial as u64, k as u64),
            );
            match &params {
                Some(p) => truncate_hat(&x, &config.dist, p),
                None => Ok(x),
            }
        })
        .collect()
}

/// Spectrum of the target matrix and the event report for one trial.
fn target_spectrum(
    config: &ExperimentConfig,
    factors: &[RealMatrix],
) -> Result<(ComplexSpectrum, EventReport)> {
    let ev = &config.event;
    let product = scaled_product(factors)?;
    let off = || EventReport::not_evaluated(ev.c, crate::spectra::event_radius(config.delta));
    match config.target {
        Target::Product => {
            if !ev.enabled {
                return Ok((eigenvalues(&product)?, off()));
            }
            let schur = real_schur(&product)?;
            let event = least_singular_event_schur(&schur, config.delta, ev.c, ev.gridpoints)?;
            Ok((schur.eigenvalues, event))
        }
        // eig(Y) is the set of m-th roots of eig(P); the event is evaluated on
        // Y itself through its block-cyclic structure
        Target::Linearized | Target::XiProcess { .. } => {
            if !ev.enabled {
                return Ok((eigenvalues(&product)?.roots(config.m), off()));
            }
            let schur = real_schur_with_vectors(&product)?;
            let blocks = scaled_factors(factors)?;
            let cyc = BlockCyclic::new(&blocks, &schur)?;
            let event = least_singular_event_block_cyclic(&cyc, config.delta, ev.c, ev.gridpoints)?;
            Ok((schur.eigenvalues.roots(config.m), event))
        }
    }
}

/// Runs trial `trial` of `config`.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialRecord> {
    let factors = trial_factors(config, trial)?;
    let (spec, event) = target_spectrum(config, &factors)?;
    let weight = if config.gated() && !event.event_held {
        0.0
    } else {
        1.0
    };
    let statistics = match &config.target {
        Target::XiProcess { points } => points
            .iter()
            .map(|&z| {
                if weight == 0.0 {
                    Ok(Complex64::new(0.0, 0.0))
                } else {
                    xi_from_spectrum(&spec, z, &event)
                }
            })
            .collect::<Result<Vec<_>>>()?,
        _ => config
            .functions
            .iter()
            .map(|f| linear_statistic(&spec, f) * weight)
            .collect(),
    };
    if let Some(bad) = statistics.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite statistic {bad}")));
    }
    Ok(TrialRecord {
        trial_index: trial,
        statistics,
        event_held: event.event_held,
        min_singular: config.event.enabled.then_some(event.min_singular),
    })
}

fn run_all(config: &ExperimentConfig) -> Result<Vec<Result<TrialRecord>>> {
    let work = |t: usize| run_trial(config, t);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let collect = || {
            (0..config.trials)
                .into_par_iter()
                .map(work)
                .collect::<Vec<_>>()
        };
        match config.threads {
            0 => Ok(collect()),
            1 => Ok((0..config.trials).map(work).collect()),
            k => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
                Ok(pool.install(collect))
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..config.trials).map(work).collect())
    }
}

/// Runs every trial, aggregates, and compares with the limiting covariances.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.trials);
    let mut failures = Vec::new();
    for (trial_index, r) in run_all(config)?.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(TrialFailure {
                trial_index,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * config.trials as f64 {
        return Err(Error::ExperimentAborted {
            failures: failures.len(),
            trials: config.trials,
            first: failures[0].message.clone(),
        });
    }
    let mut summary = summarize(config, &records, failures.len());
    let theory = theory_values(config)?;
    summary.theory_comparison = Some(compare_to_theory(
        &summary,
        &records,
        &theory,
        &config.tolerances,
    ));
    Ok(ExperimentOutput {
        records,
        failures,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(target: Target) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(12, 2, AtomDistribution::rademacher(1.0), target);
        cfg.functions = vec![TestFunction::monomial(1), TestFunction::monomial(2)];
        cfg.trials = 6;
        cfg.master_seed = 17;
        cfg
    }

    #[test]
    fn same_seed_same_records() {
        for target in [
            Target::Product,
            Target::Linearized,
            Target::XiProcess {
                points: vec![Complex64::new(1.3, 0.0), Complex64::new(0.0, 1.5)],
            },
        ] {
            let mut cfg = small(target);
            cfg.trials = 2;
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            assert_eq!(a.records, b.records);
        }
    }

    #[test]
    fn sequential_and_pooled_runs_agree() {
        let mut cfg = small(Target::Product);
        cfg.threads = 1;
        let a = run_experiment(&cfg).unwrap();
        cfg.threads = 3;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
    }

    #[test]
    fn constant_function_counts_eigenvalues() {
        for (target, count) in [(Target::Product, 12.0), (Target::Linearized, 24.0)] {
            let mut cfg = small(target);
            cfg.functions = vec![TestFunction::constant(Complex64::new(1.0, 0.0))];
            let out = run_experiment(&cfg).unwrap();
            for r in &out.records {
                assert!((r.statistics[0] - Complex64::new(count, 0.0)).norm() < 1e-9);
            }
            let s = &out.summary.statistics[0];
            assert!(s.var_re < 1e-18 && s.var_im < 1e-18);
        }
    }

    #[test]
    fn trace_statistic_of_product_matches_matrix_trace() {
        let cfg = small(Target::Product);
        let out = run_experiment(&cfg).unwrap();
        for r in &out.records {
            let p = scaled_product(&trial_factors(&cfg, r.trial_index).unwrap()).unwrap();
            assert!((r.statistics[0].re - p.trace()).abs() < 1e-10);
            assert!(r.statistics[0].im.abs() < 1e-10);
        }
    }

    #[test]
    fn xi_equals_power_identity() {
        // tr (Y - z)^{-1} = m z^{m-1} tr (P - z^m)^{-1}
        let z = Complex64::new(1.3, 0.2);
        let mut cfg = small(Target::XiProcess { points: vec![z] });
        cfg.event.enabled = false;
        let out = run_experiment(&cfg).unwrap();
        for r in &out.records {
            let p = scaled_product(&trial_factors(&cfg, r.trial_index).unwrap()).unwrap();
            let inv = crate::linalg::dense::ComplexMatrix::shifted(&p, z * z)
                .inverse()
                .unwrap();
            let expect = 2.0 * z * inv.trace();
            assert!((r.statistics[0] - expect).norm() < 1e-9 * expect.norm());
        }
    }

    #[test]
    fn truncated_runs_use_truncated_entries() {
        let mut cfg = small(Target::Product);
        cfg.dist = AtomDistribution::gaussian(1.0);
        cfg.epsilon = Some(0.1);
        let f = trial_factors(&cfg, 0).unwrap();
        let bound = 4.0 * (cfg.n as f64).powf(0.4);
        assert!(f.iter().all(|x| x.max_abs() <= bound));
        cfg.epsilon = None;
        let g = trial_factors(&cfg, 0).unwrap();
        assert_ne!(f[0], g[0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(Target::Product);
        cfg.trials = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small(Target::Product);
        cfg.epsilon = Some(0.7);
        assert!(cfg.validate().is_err());
        let mut cfg = small(Target::Product);
        cfg.functions.clear();
        assert!(cfg.validate().is_err());
        let cfg = small(Target::XiProcess {
            points: vec![Complex64::new(0.5, 0.0)],
        });
        assert!(cfg.validate().is_err());
        let mut cfg = small(Target::Product);
        cfg.n = 5000;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gate_defaults_follow_target() {
        assert!(!small(Target::Product).gated());
        let mut xi = small(Target::XiProcess {
            points: vec![Complex64::new(1.3, 0.0)],
        });
        assert!(xi.gated());
        xi.event.enabled = false;
        assert!(!xi.gated());
    }
}
