//! Cross-simulator equivalence checks.
//!
//! The four simulators are different representations of one Markov chain,
//! so for a fixed parameter point their outputs must be equal in
//! distribution. The suite compares them pairwise on the SIR and
//! pure-death models and checks two closed-form moments.

use crate::model::{CompartmentId, ModelGraph, ParameterPoint};
use crate::models::{build_constant_rate, build_pure_death, build_sir};
use crate::par::{try_map_indexed, Execution};
use crate::rng::{SeedVector, UniformStream};
use crate::sim::{simulate, RepresentationKind, SimError, SimOptions, StopRule};
use crate::stats::{chi_square_two_sample, ks_two_sample, mean};
use crate::study::ExtinctionClock;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Test statistic, or the estimated quantity for moment checks.
    pub statistic: f64,
    /// p-value of a hypothesis test, or the target value of a moment check.
    pub reference: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSettings {
    /// Runs per simulator for the distribution comparisons.
    pub runs: usize,
    /// Runs per simulator for the pure-death mean.
    pub mean_runs: usize,
    /// Runs for the unit Poisson count.
    pub poisson_runs: usize,
    pub alpha: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            runs: 10_000,
            mean_runs: 100_000,
            poisson_runs: 1_000,
            alpha: 0.01,
            seed: 20_240_501,
            execution: Execution::Parallel,
        }
    }
}

/// Per-run extinction time and final counts.
struct RunSample {
    extinction: f64,
    final_counts: Vec<u32>,
}

struct FinalState(Vec<u32>);

impl crate::sim::PathObserver for FinalState {
    fn start(&mut self, initial: &[u32]) {
        self.0 = initial.to_vec();
    }

    fn jump(&mut self, _: f64, _: usize, state: &[u32]) {
        self.0.copy_from_slice(state);
    }
}

fn sample_runs(
    model: &ModelGraph,
    theta: &ParameterPoint,
    predicate: &[CompartmentId],
    kind: RepresentationKind,
    runs: usize,
    stream: &mut UniformStream,
    exec: Execution,
) -> Result<Vec<RunSample>, SimError> {
    let slots = kind.seed_slots(model.n_channels());
    let seeds: Vec<SeedVector> = (0..runs).map(|_| SeedVector::draw(stream, slots)).collect();
    let bound = model.bind(theta);
    let opts = SimOptions {
        stop: Some(StopRule::extinction(predicate.to_vec())),
        ..SimOptions::default()
    };
    try_map_indexed(exec, runs, |k| {
        let mut clock = ExtinctionClock::new(predicate);
        let mut last = FinalState(Vec::new());
        simulate(kind, &bound, &seeds[k], &opts, &mut (&mut clock, &mut last))?;
        Ok(RunSample {
            extinction: clock.time().unwrap_or(f64::INFINITY),
            final_counts: last.0,
        })
    })
}

/// One independent stream per (check, simulator), all from `seed`.
fn streams(seed: u64, count: usize) -> Vec<UniformStream> {
    let mut master = UniformStream::from_seed(seed).expect("validation seed in range");
    (0..count)
        .map(|_| UniformStream::from_seed(master.next_seed()).expect("drawn seeds are in range"))
        .collect()
}

fn pairs() -> Vec<(usize, usize)> {
    let n = RepresentationKind::ALL.len();
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

fn pair_name(prefix: &str, a: usize, b: usize) -> String {
    format!("{prefix} {} vs {}", RepresentationKind::ALL[a], RepresentationKind::ALL[b])
}

/// Runs the whole suite.
pub fn run_validation(settings: &ValidationSettings) -> Result<Vec<Check>, SimError> {
    let kinds = RepresentationKind::ALL;
    let mut rng = streams(settings.seed, 3 * kinds.len() + 1).into_iter();
    let mut checks = Vec::new();

    // SIR, N = 100, beta = 2, gamma = 1, 5 initially infectious.
    let sir = build_sir(100, 5)?;
    let theta = ParameterPoint::from_named(&sir, [("beta", 2.0), ("gamma_I", 1.0)])?;
    let i = sir.compartment("I").expect("SIR has I");
    let r = sir.compartment("R").expect("SIR has R").0;
    let sir_runs = kinds
        .iter()
        .map(|&k| sample_runs(&sir, &theta, &[i], k, settings.runs, &mut rng.next().unwrap(), settings.execution))
        .collect::<Result<Vec<_>, _>>()?;
    for (a, b) in pairs() {
        let ta: Vec<f64> = sir_runs[a].iter().map(|s| s.extinction).collect();
        let tb: Vec<f64> = sir_runs[b].iter().map(|s| s.extinction).collect();
        let (d, p) = ks_two_sample(&ta, &tb);
        checks.push(Check {
            name: pair_name("sir extinction time ks", a, b),
            statistic: d,
            reference: p,
            pass: p >= settings.alpha,
        });
        let fa: Vec<i64> = sir_runs[a].iter().map(|s| i64::from(s.final_counts[r])).collect();
        let fb: Vec<i64> = sir_runs[b].iter().map(|s| i64::from(s.final_counts[r])).collect();
        let (x2, _, p) = chi_square_two_sample(&fa, &fb);
        checks.push(Check {
            name: pair_name("sir final size chi-square", a, b),
            statistic: x2,
            reference: p,
            pass: p >= settings.alpha,
        });
    }

    // Pure death from 10 individuals at unit rate: the extinction time is a
    // sum of independent Exp(k), k = 1..10, with mean H_10.
    let death = build_pure_death(10)?;
    let theta = ParameterPoint::from_named(&death, [("gamma", 1.0)])?;
    let i = death.compartment("I").expect("pure death has I");
    let harmonic: f64 = (1..=10).map(|k| 1.0 / f64::from(k)).sum();
    let death_runs = kinds
        .iter()
        .map(|&k| {
            sample_runs(&death, &theta, &[i], k, settings.mean_runs, &mut rng.next().unwrap(), settings.execution)
                .map(|v| v.into_iter().map(|s| s.extinction).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (a, b) in pairs() {
        let (d, p) = ks_two_sample(&death_runs[a][..settings.runs], &death_runs[b][..settings.runs]);
        checks.push(Check {
            name: pair_name("pure death extinction time ks", a, b),
            statistic: d,
            reference: p,
            pass: p >= settings.alpha,
        });
    }
    for (k, times) in kinds.iter().zip(&death_runs) {
        let m = mean(times);
        checks.push(Check {
            name: format!("pure death mean extinction time {k}"),
            statistic: m,
            reference: harmonic,
            pass: (m - harmonic).abs() <= 0.01 * harmonic,
        });
    }

    // The random time change run on a constant unit rate is the unit-rate
    // Poisson process itself: its count over [0, 100] has mean 100.
    let poisson = build_constant_rate(1_000)?;
    let theta = ParameterPoint::from_named(&poisson, [("rate", 1.0)])?;
    let b = poisson.compartment("B").expect("constant-rate model has B").0;
    let bound = poisson.bind(&theta);
    let mut stream = rng.next().unwrap();
    let seeds: Vec<SeedVector> = (0..settings.poisson_runs).map(|_| SeedVector::draw(&mut stream, 1)).collect();
    let counts = try_map_indexed(settings.execution, settings.poisson_runs, |k| {
        let mut last = FinalState(Vec::new());
        simulate(RepresentationKind::Mnrm, &bound, &seeds[k], &SimOptions::until(100.0), &mut last)?;
        Ok::<_, SimError>(f64::from(last.0[b]))
    })?;
    let m = mean(&counts);
    checks.push(Check {
        name: "mnrm unit poisson count on [0,100]".into(),
        statistic: m,
        reference: 100.0,
        pass: (m - 100.0).abs() <= 3.0,
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_runs_and_reports_every_check() {
        let settings = ValidationSettings {
            runs: 300,
            mean_runs: 2000,
            poisson_runs: 200,
            ..ValidationSettings::default()
        };
        let checks = run_validation(&settings).unwrap();
        // 6 pairs x 2 SIR tests, 6 pure-death KS, 4 means, 1 Poisson.
        assert_eq!(checks.len(), 23);
        assert!(checks.iter().all(|c| c.statistic.is_finite() && c.reference.is_finite()));
        assert_eq!(checks, run_validation(&settings).unwrap());
    }
}
