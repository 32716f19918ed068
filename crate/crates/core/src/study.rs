//! Quantities of interest, replicated sensitivity studies and the
//! statistics used to compare representations.
//!
//! A study runs every design row once and extracts all of its quantities
//! of interest from that single path: the extinction time through an
//! observer that notes when the predicate first holds, the compartment
//! curve through an observer that fills grid points as jumps go by. The
//! path is stopped once both are settled, which never changes either
//! value compared with running them separately.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::gsa::{
    build_pickfreeze, dynamical_indices, estimate_indices, evaluate_design, replicate, DesignOutputs,
    DesignRow, DynamicalIndices, GsaError, IndexEstimate, InputSpec,
};
use crate::model::{CompartmentId, ModelGraph};
use crate::par::Execution;
use crate::rng::UniformStream;
use crate::sim::{simulate, PathObserver, RepresentationKind, SimError, SimOptions, StopRule, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Gsa(#[from] GsaError),
    #[error("invalid study: {0}")]
    Invalid(String),
    #[error("extinction predicate never held: the path was absorbed at t={time} first")]
    PredicateNeverMet { time: f64 },
    #[error("welch test needs at least 2 values per sample")]
    SampleTooSmall,
    #[error("welch test undefined: both samples have zero variance")]
    ZeroVariance,
}

/// A quantity of interest extracted from one path.
#[derive(Debug, Clone, PartialEq)]
pub enum QoIDef {
    /// First time at which every listed compartment is empty.
    ExtinctionTime { predicate: Vec<CompartmentId> },
    /// Count of one compartment sampled on an increasing grid.
    CompartmentCurve { compartment: CompartmentId, grid: Vec<f64> },
}

impl QoIDef {
    pub fn check(&self, model: &ModelGraph) -> Result<(), StudyError> {
        let n = model.compartments().len();
        match self {
            QoIDef::ExtinctionTime { predicate } => {
                if predicate.is_empty() || predicate.iter().any(|c| c.0 >= n) {
                    return Err(StudyError::Invalid("extinction predicate names no valid compartment".into()));
                }
            }
            QoIDef::CompartmentCurve { compartment, grid } => {
                if compartment.0 >= n {
                    return Err(StudyError::Invalid(format!("unknown compartment index {}", compartment.0)));
                }
                let increasing = grid.windows(2).all(|w| w[0] < w[1]);
                if grid.is_empty() || !increasing || grid[0] < 0.0 || !grid[grid.len() - 1].is_finite() {
                    return Err(StudyError::Invalid("curve grid must be nonempty, finite, increasing and start at t >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// `points` equidistant times covering `[0, end]`, both ends included.
pub fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![end],
        _ => (0..points).map(|k| end * k as f64 / (points - 1) as f64).collect(),
    }
}

fn predicate_holds(predicate: &[CompartmentId], counts: &[u32]) -> bool {
    predicate.iter().all(|c| counts[c.0] == 0)
}

/// Extinction time of a recorded path: 0 if the initial state satisfies
/// the predicate, otherwise the first jump time after which it holds.
pub fn extinction_time(traj: &Trajectory, predicate: &[CompartmentId]) -> Option<f64> {
    if predicate_holds(predicate, traj.states[0].counts()) {
        return Some(0.0);
    }
    traj.states[1..]
        .iter()
        .zip(&traj.jump_times)
        .find(|(s, _)| predicate_holds(predicate, s.counts()))
        .map(|(_, &t)| t)
}

/// One compartment's count on `grid` (right-continuous sampling).
pub fn compartment_curve(traj: &Trajectory, compartment: CompartmentId, grid: &[f64]) -> Vec<u32> {
    grid.iter().map(|&t| traj.state_at(t).counts()[compartment.0]).collect()
}

/// Records when a predicate first holds.
#[derive(Debug, Clone)]
pub struct ExtinctionClock<'a> {
    predicate: &'a [CompartmentId],
    time: Option<f64>,
}

impl<'a> ExtinctionClock<'a> {
    pub fn new(predicate: &'a [CompartmentId]) -> Self {
        Self { predicate, time: None }
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }
}

impl PathObserver for ExtinctionClock<'_> {
    fn start(&mut self, initial: &[u32]) {
        self.time = predicate_holds(self.predicate, initial).then_some(0.0);
    }

    #[inline]
    fn jump(&mut self, time: f64, _: usize, state: &[u32]) {
        if self.time.is_none() && predicate_holds(self.predicate, state) {
            self.time = Some(time);
        }
    }
}

/// Samples one compartment on a grid while the path is generated.
#[derive(Debug, Clone)]
pub struct CurveSampler<'a> {
    compartment: usize,
    grid: &'a [f64],
    values: Vec<u32>,
    current: u32,
}

impl<'a> CurveSampler<'a> {
    pub fn new(compartment: CompartmentId, grid: &'a [f64]) -> Self {
        Self {
            compartment: compartment.0,
            grid,
            values: Vec::with_capacity(grid.len()),
            current: 0,
        }
    }

    /// Fills the grid points after the last jump with the final value.
    pub fn finish(mut self) -> Vec<u32> {
        self.values.resize(self.grid.len(), self.current);
        self.values
    }
}

impl PathObserver for CurveSampler<'_> {
    fn start(&mut self, initial: &[u32]) {
        self.values.clear();
        self.current = initial[self.compartment];
    }

    #[inline]
    fn jump(&mut self, time: f64, _: usize, state: &[u32]) {
        while self.values.len() < self.grid.len() && self.grid[self.values.len()] < time {
            self.values.push(self.current);
        }
        self.current = state[self.compartment];
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelGraph,
    pub inputs: InputSpec,
    pub representations: Vec<RepresentationKind>,
    /// Design size.
    pub n: usize,
    pub replications: usize,
    /// At most one of each kind.
    pub qois: Vec<QoIDef>,
    pub master_seed: u64,
    pub event_cap: u64,
    pub execution: Execution,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        self.inputs
            .check_against(&self.model)
            .map_err(StudyError::Gsa)?;
        for q in &self.qois {
            q.check(&self.model)?;
        }
        let ext = self.qois.iter().filter(|q| matches!(q, QoIDef::ExtinctionTime { .. })).count();
        if ext > 1 || self.qois.len() - ext > 1 || self.qois.is_empty() {
            return Err(StudyError::Invalid(
                "a study needs one extinction time and/or one compartment curve".into(),
            ));
        }
        if self.representations.is_empty() {
            return Err(StudyError::Invalid("no representation selected".into()));
        }
        if self.n < 2 {
            return Err(GsaError::TooFewSamples(self.n).into());
        }
        if self.replications < 2 {
            return Err(GsaError::TooFewReplications(self.replications).into());
        }
        crate::rng::UniformStream::from_seed(self.master_seed)
            .map_err(|e| StudyError::Sim(SimError::Seeds(e)))?;
        Ok(())
    }

    fn extinction(&self) -> Option<&[CompartmentId]> {
        self.qois.iter().find_map(|q| match q {
            QoIDef::ExtinctionTime { predicate } => Some(predicate.as_slice()),
            _ => None,
        })
    }

    fn curve(&self) -> Option<(CompartmentId, &[f64])> {
        self.qois.iter().find_map(|q| match q {
            QoIDef::CompartmentCurve { compartment, grid } => Some((*compartment, grid.as_slice())),
            _ => None,
        })
    }

    /// Stops each path as soon as every quantity of interest is settled.
    fn sim_options(&self) -> SimOptions {
        let curve_end = self.curve().map(|(_, g)| g[g.len() - 1]);
        match (self.extinction(), curve_end) {
            (Some(p), end) => SimOptions {
                horizon: f64::INFINITY,
                event_cap: self.event_cap,
                stop: Some(StopRule {
                    all_zero: p.to_vec(),
                    not_before: end.unwrap_or(0.0),
                }),
            },
            (None, Some(end)) => SimOptions {
                horizon: end,
                event_cap: self.event_cap,
                stop: None,
            },
            (None, None) => SimOptions::default(),
        }
    }
}

/// Everything extracted from one path.
#[derive(Debug, Clone, PartialEq)]
pub struct RowOutput {
    pub extinction: Option<f64>,
    pub curve: Option<Vec<u32>>,
}

/// Runs one design row under `kind` and extracts the study's quantities.
pub fn evaluate_row(cfg: &StudyConfig, kind: RepresentationKind, row: &DesignRow) -> Result<RowOutput, StudyError> {
    let bound = cfg.model.bind(&row.theta);
    let opts = cfg.sim_options();
    let empty: &[CompartmentId] = &[];
    let mut clock = ExtinctionClock::new(cfg.extinction().unwrap_or(empty));
    let (compartment, grid) = cfg.curve().unwrap_or((CompartmentId(0), &[]));
    let mut sampler = CurveSampler::new(compartment, grid);
    let mut obs = (&mut clock, &mut sampler);
    let outcome = simulate(kind, &bound, &row.seeds, &opts, &mut obs)?;
    let extinction = match cfg.extinction() {
        Some(_) => Some(clock.time().ok_or(StudyError::PredicateNeverMet {
            time: outcome.last_jump,
        })?),
        None => None,
    };
    let curve = cfg.curve().map(|_| sampler.finish());
    Ok(RowOutput { extinction, curve })
}

/// Replicated index estimates for a functional output.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalIndexReport {
    pub groups: Vec<String>,
    pub grid: Vec<f64>,
    /// Per-replication dynamical estimates.
    pub replications: Vec<DynamicalIndices>,
    /// Per-replication aggregated indices, one entry per group.
    pub aggregated: Vec<Vec<IndexEstimate>>,
}

impl FunctionalIndexReport {
    fn mean_curve(&self, j: usize, pick: impl Fn(&DynamicalIndices, usize, usize) -> Option<f64>) -> Vec<Option<f64>> {
        (0..self.grid.len())
            .map(|t| {
                let vals: Vec<f64> = self.replications.iter().filter_map(|d| pick(d, j, t)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    /// Replication mean of the dynamical first-order index of group `j`;
    /// `None` at times where it is undefined in every replication.
    pub fn first_order_curve(&self, j: usize) -> Vec<Option<f64>> {
        self.mean_curve(j, DynamicalIndices::first_order)
    }

    pub fn total_curve(&self, j: usize) -> Vec<Option<f64>> {
        self.mean_curve(j, DynamicalIndices::total)
    }

    /// Replication mean of the output variance at each grid time.
    pub fn variance(&self) -> Vec<f64> {
        let r = self.replications.len() as f64;
        (0..self.grid.len())
            .map(|t| self.replications.iter().map(|d| d.variance[t]).sum::<f64>() / r)
            .collect()
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == name)
    }
}

/// Results of one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationReport {
    pub kind: RepresentationKind,
    /// Scalar estimates per replication (extinction time), if requested.
    pub scalar: Option<Vec<Vec<IndexEstimate>>>,
    pub functional: Option<FunctionalIndexReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub groups: Vec<String>,
    pub representations: Vec<RepresentationReport>,
}

impl StudyReport {
    pub fn get(&self, kind: RepresentationKind) -> Option<&RepresentationReport> {
        self.representations.iter().find(|r| r.kind == kind)
    }
}

/// Stream of a representation: every representation gets its own
/// independent designs, and its results do not depend on which other
/// representations are run alongside it.
fn representation_stream(master_seed: u64, kind: RepresentationKind) -> Result<UniformStream, StudyError> {
    let mut master = UniformStream::from_seed(master_seed).map_err(|e| StudyError::Sim(e.into()))?;
    let seeds: Vec<u64> = RepresentationKind::ALL.iter().map(|_| master.next_seed()).collect();
    let k = RepresentationKind::ALL.iter().position(|&r| r == kind).expect("ALL lists every kind");
    Ok(UniformStream::from_seed(seeds[k]).expect("drawn seeds are in range"))
}

/// Runs every quantity of interest of `cfg` for every representation.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let groups = cfg.inputs.group_names();
    let params = cfg.model.parameters();
    let representations = cfg
        .representations
        .iter()
        .map(|&kind| {
            let mut stream = representation_stream(cfg.master_seed, kind)?;
            let slots = kind.seed_slots(cfg.model.n_channels());
            let reps = replicate(cfg.replications, &mut stream, |_, s| {
                let design = build_pickfreeze(&cfg.inputs, params, slots, cfg.n, s)?;
                let out = evaluate_design(&design, cfg.execution, |row| evaluate_row(cfg, kind, row))?;
                replication_estimates(cfg, &design.groups, out)
            })?;
            let (scalar, functional): (Vec<_>, Vec<_>) = reps.into_iter().unzip();
            let scalar = cfg.extinction().map(|_| scalar.into_iter().flatten().collect());
            let functional = cfg.curve().map(|(_, grid)| {
                let replications: Vec<DynamicalIndices> = functional.into_iter().flatten().collect();
                let aggregated = replications.iter().map(DynamicalIndices::aggregated).collect::<Result<_, _>>()?;
                Ok::<_, StudyError>(FunctionalIndexReport {
                    groups: groups.clone(),
                    grid: grid.to_vec(),
                    replications,
                    aggregated,
                })
            });
            Ok(RepresentationReport {
                kind,
                scalar,
                functional: functional.transpose()?,
            })
        })
        .collect::<Result<Vec<_>, StudyError>>()?;
    Ok(StudyReport { groups, representations })
}

type ReplicationEstimates = (Option<Vec<IndexEstimate>>, Option<DynamicalIndices>);

fn replication_estimates(
    cfg: &StudyConfig,
    groups: &[String],
    out: DesignOutputs<RowOutput>,
) -> Result<ReplicationEstimates, StudyError> {
    let project = |f: &dyn Fn(&RowOutput) -> f64| DesignOutputs {
        a: out.a.iter().map(f).collect(),
        b: out.b.iter().map(f).collect(),
        hybrids: out.hybrids.iter().map(|h| h.iter().map(f).collect()).collect(),
    };
    let scalar = match cfg.extinction() {
        Some(_) => Some(estimate_indices(groups, &project(&|r| r.extinction.unwrap_or(f64::NAN)))?),
        None => None,
    };
    let functional = match cfg.curve() {
        Some((_, grid)) => {
            let take = |rows: Vec<RowOutput>| -> Vec<Vec<u32>> { rows.into_iter().map(|r| r.curve.unwrap_or_default()).collect() };
            let DesignOutputs { a, b, hybrids } = out;
            let curves = DesignOutputs {
                a: take(a),
                b: take(b),
                hybrids: hybrids.into_iter().map(take).collect(),
            };
            Some(dynamical_indices(groups, grid, &curves)?)
        }
        None => None,
    };
    Ok((scalar, functional))
}

/// Scalar study on the extinction time alone.
pub fn run_scalar_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    if cfg.extinction().is_none() {
        return Err(StudyError::Invalid("scalar study needs an extinction-time quantity".into()));
    }
    let mut cfg = cfg.clone();
    cfg.qois.retain(|q| matches!(q, QoIDef::ExtinctionTime { .. }));
    run_study(&cfg)
}

/// Functional study on the compartment curve alone.
pub fn run_functional_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    if cfg.curve().is_none() {
        return Err(StudyError::Invalid("functional study needs a compartment-curve quantity".into()));
    }
    let mut cfg = cfg.clone();
    cfg.qois.retain(|q| matches!(q, QoIDef::CompartmentCurve { .. }));
    run_study(&cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelchResult {
    pub group: String,
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_test(group: &str, s1: &[f64], s2: &[f64], alpha: f64) -> Result<WelchResult, StudyError> {
    if s1.len() < 2 || s2.len() < 2 {
        return Err(StudyError::SampleTooSmall);
    }
    let (n1, n2) = (s1.len() as f64, s2.len() as f64);
    let (mean1, mean2) = (crate::stats::mean(s1), crate::stats::mean(s2));
    let (var1, var2) = (crate::stats::variance(s1), crate::stats::variance(s2));
    let (q1, q2) = (var1 / n1, var2 / n2);
    let se2 = q1 + q2;
    if se2 <= 0.0 {
        return Err(StudyError::ZeroVariance);
    }
    let t = (mean1 - mean2) / se2.sqrt();
    let df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(WelchResult {
        group: group.to_string(),
        mean1,
        mean2,
        var1,
        var2,
        t,
        df,
        p,
        alpha,
        reject: p < alpha,
    })
}

/// Welch tests on the total-index numerators of two representations'
/// scalar replications, one per group.
pub fn compare_scalar(a: &[Vec<IndexEstimate>], b: &[Vec<IndexEstimate>], alpha: f64) -> Result<Vec<WelchResult>, StudyError> {
    compare_numerators(a, b, alpha)
}

/// As [`compare_scalar`] for aggregated functional indices.
pub fn compare_aggregated(a: &FunctionalIndexReport, b: &FunctionalIndexReport, alpha: f64) -> Result<Vec<WelchResult>, StudyError> {
    compare_numerators(&a.aggregated, &b.aggregated, alpha)
}

fn compare_numerators(a: &[Vec<IndexEstimate>], b: &[Vec<IndexEstimate>], alpha: f64) -> Result<Vec<WelchResult>, StudyError> {
    let groups = a.first().map(|r| r.len()).unwrap_or(0);
    (0..groups)
        .map(|j| {
            let s1: Vec<f64> = a.iter().map(|r| r[j].numerator_total).collect();
            let s2: Vec<f64> = b.iter().map(|r| r[j].numerator_total).collect();
            welch_test(&a[0][j].group, &s1, &s2, alpha)
        })
        .collect()
}

/// Values of one group across replications.
pub fn group_samples(reps: &[Vec<IndexEstimate>], group: &str, pick: impl Fn(&IndexEstimate) -> f64) -> Vec<f64> {
    reps.iter()
        .filter_map(|r| r.iter().find(|e| e.group == group).map(&pick))
        .collect()
}
