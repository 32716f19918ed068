//! Variance-based sensitivity analysis with grouped inputs.
//!
//! Inputs are organised in groups: parameter groups (one or more model
//! parameters swapped together) and the intrinsic-randomness group `Z`,
//! whose value in a design row is a whole [`SeedVector`]. Pick-freeze
//! designs pair two independent matrices `A` and `B` and, for each group
//! `j`, the hybrid `AB_j` (rows of `A` with group `j` taken from `B`).
//!
//! Estimators, with `V` the unbiased variance of the pooled `(yA, yB)`
//! sample and `m` its mean:
//!
//! ```text
//! first order  S_j  = (1/n)  sum_i (yB_i - m) (yAB_j,i - yA_i)  / V
//! total        ST_j = (1/2n) sum_i (yA_i - yAB_j,i)^2           / V
//! ```
//!
//! Functional outputs get the same estimators at every grid time
//! (dynamical indices) and a trace-weighted summary over the grid
//! (aggregated indices): numerators and variances are summed over time
//! before dividing.

use thiserror::Error;

use crate::model::ParameterPoint;
use crate::par::{try_map_indexed, Execution};
use crate::rng::{SeedVector, UniformStream};

/// Sampling law of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Uniform { low: f64, high: f64 },
    /// The parameter is `1 / D` with `D ~ U(low, high)`: rates sampled
    /// through their mean durations.
    ReciprocalUniform { low: f64, high: f64 },
}

impl Marginal {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { low, high } | Marginal::ReciprocalUniform { low, high } => (low, high),
        }
    }

    /// Maps a point of the unit interval to a parameter value.
    pub fn from_unit(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { low, high } => low + (high - low) * u,
            Marginal::ReciprocalUniform { low, high } => 1.0 / (low + (high - low) * u),
        }
    }

    fn check(&self, name: &str) -> Result<(), GsaError> {
        let (low, high) = self.bounds();
        let ok = low.is_finite()
            && high.is_finite()
            && low < high
            && !(matches!(self, Marginal::ReciprocalUniform { .. }) && low <= 0.0);
        if ok {
            Ok(())
        } else {
            Err(GsaError::DegenerateRange {
                name: name.to_string(),
                low,
                high,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInput {
    pub name: String,
    pub marginal: Marginal,
}

impl ParamInput {
    pub fn new(name: &str, marginal: Marginal) -> Self {
        Self {
            name: name.to_string(),
            marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputGroup {
    Parameters { name: String, members: Vec<ParamInput> },
    /// The intrinsic randomness: one seed vector per design row.
    Intrinsic { name: String },
}

impl InputGroup {
    pub fn parameters(name: &str, members: Vec<ParamInput>) -> Self {
        InputGroup::Parameters {
            name: name.to_string(),
            members,
        }
    }

    pub fn intrinsic(name: &str) -> Self {
        InputGroup::Intrinsic {
            name: name.to_string(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            InputGroup::Parameters { name, .. } | InputGroup::Intrinsic { name } => name,
        }
    }

    pub fn is_intrinsic(&self) -> bool {
        matches!(self, InputGroup::Intrinsic { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    groups: Vec<InputGroup>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GsaError {
    #[error("degenerate range for `{name}`: ({low}, {high})")]
    DegenerateRange { name: String, low: f64, high: f64 },
    #[error("design size must be at least 2, got {0}")]
    TooFewSamples(usize),
    #[error("parameter `{0}` is not assigned to any input group")]
    UngroupedParameter(String),
    #[error("parameter `{0}` appears in more than one input group")]
    DuplicateParameter(String),
    #[error("input group `{0}` names an unknown parameter `{1}`")]
    UnknownParameter(String, String),
    #[error("input groups must include exactly one intrinsic-randomness group, found {0}")]
    IntrinsicGroupCount(usize),
    #[error("duplicate input group `{0}`")]
    DuplicateGroup(String),
    #[error("output samples have mismatched lengths")]
    LengthMismatch,
    #[error("degenerate output: zero variance")]
    DegenerateOutput,
    #[error("at least 2 replications are required, got {0}")]
    TooFewReplications(usize),
}

impl InputSpec {
    pub fn new(groups: Vec<InputGroup>) -> Self {
        Self { groups }
    }

    pub fn groups(&self) -> &[InputGroup] {
        &self.groups
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name().to_string()).collect()
    }

    pub fn intrinsic_index(&self) -> Option<usize> {
        self.groups.iter().position(InputGroup::is_intrinsic)
    }

    /// Checks the groups against an ordered parameter list: every parameter
    /// in exactly one group, valid ranges, at most one intrinsic group.
    pub fn check_parameters(&self, parameters: &[String]) -> Result<(), GsaError> {
        let mut seen_groups = std::collections::HashSet::new();
        let mut owner = vec![false; parameters.len()];
        for g in &self.groups {
            if !seen_groups.insert(g.name()) {
                return Err(GsaError::DuplicateGroup(g.name().to_string()));
            }
            if let InputGroup::Parameters { name, members } = g {
                for m in members {
                    m.marginal.check(&m.name)?;
                    let k = parameters
                        .iter()
                        .position(|p| *p == m.name)
                        .ok_or_else(|| GsaError::UnknownParameter(name.clone(), m.name.clone()))?;
                    if owner[k] {
                        return Err(GsaError::DuplicateParameter(m.name.clone()));
                    }
                    owner[k] = true;
                }
            }
        }
        if let Some(k) = owner.iter().position(|&o| !o) {
            return Err(GsaError::UngroupedParameter(parameters[k].clone()));
        }
        let z = self.groups.iter().filter(|g| g.is_intrinsic()).count();
        if z > 1 {
            return Err(GsaError::IntrinsicGroupCount(z));
        }
        Ok(())
    }

    /// As [`check_parameters`](Self::check_parameters), and additionally
    /// requires exactly one intrinsic group, as stochastic-model studies do.
    pub fn check_against(&self, model: &crate::model::ModelGraph) -> Result<(), GsaError> {
        self.check_parameters(model.parameters())?;
        let z = self.groups.iter().filter(|g| g.is_intrinsic()).count();
        if z != 1 {
            return Err(GsaError::IntrinsicGroupCount(z));
        }
        Ok(())
    }
}

/// Plain Latin hypercube on `ranges`: in every column each stratum
/// `[(k-1)/n, k/n)` of the unit interval holds exactly one point, mapped
/// affinely into the range. Returns `n` rows.
pub fn lhs_sample(
    ranges: &[(f64, f64)],
    n: usize,
    stream: &mut UniformStream,
) -> Result<Vec<Vec<f64>>, GsaError> {
    for (k, &(low, high)) in ranges.iter().enumerate() {
        Marginal::Uniform { low, high }.check(&format!("column {k}"))?;
    }
    let unit = lhs_unit(ranges.len(), n, stream)?;
    Ok(unit
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(ranges)
                .map(|(&u, &(low, high))| low + (high - low) * u)
                .collect()
        })
        .collect())
}

/// Latin hypercube on the unit cube `[0,1)^d`.
pub fn lhs_unit(d: usize, n: usize, stream: &mut UniformStream) -> Result<Vec<Vec<f64>>, GsaError> {
    if n < 2 {
        return Err(GsaError::TooFewSamples(n));
    }
    let mut rows = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = Vec::with_capacity(n);
    let inv_n = 1.0 / n as f64;
    for col in 0..d {
        perm.clear();
        perm.extend(0..n);
        // Fisher-Yates.
        for i in (1..n).rev() {
            let j = ((stream.next_uniform() * (i + 1) as f64) as usize).min(i);
            perm.swap(i, j);
        }
        for (row, &stratum) in rows.iter_mut().zip(&perm) {
            let u = (stratum as f64 + stream.next_uniform()) * inv_n;
            // Guard the upper stratum edge against rounding up to k/n.
            row[col] = u.min((stratum + 1) as f64 * inv_n - f64::EPSILON * inv_n);
        }
    }
    Ok(rows)
}

/// One input point: parameter values plus the intrinsic seed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub theta: ParameterPoint,
    pub seeds: SeedVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PickFreezeDesign {
    pub groups: Vec<String>,
    pub a: Vec<DesignRow>,
    pub b: Vec<DesignRow>,
    /// `hybrids[j]` is `A` with group `j` taken from `B`.
    pub hybrids: Vec<Vec<DesignRow>>,
}

impl PickFreezeDesign {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Matrix `m` of the evaluation order `A, B, AB_0, AB_1, …`.
    pub fn matrix(&self, m: usize) -> &[DesignRow] {
        match m {
            0 => &self.a,
            1 => &self.b,
            _ => &self.hybrids[m - 2],
        }
    }

    pub fn n_matrices(&self) -> usize {
        2 + self.hybrids.len()
    }
}

fn unit_to_theta(spec: &InputSpec, parameters: &[String], unit_row: &[f64]) -> ParameterPoint {
    let mut values = vec![0.0; parameters.len()];
    let mut col = 0;
    for g in spec.groups() {
        if let InputGroup::Parameters { members, .. } = g {
            for m in members {
                let k = parameters
                    .iter()
                    .position(|p| *p == m.name)
                    .expect("input spec was checked against the parameter list");
                values[k] = m.marginal.from_unit(unit_row[col]);
                col += 1;
            }
        }
    }
    ParameterPoint::from_values(values)
}

/// Builds `A`, `B` and the hybrids. Draw order from `stream`: LHS of `A`,
/// LHS of `B`, then the seed vectors of `A`'s rows and of `B`'s rows.
/// `seed_slots` is the intrinsic group's seed-vector length (unused when
/// the spec has no intrinsic group).
pub fn build_pickfreeze(
    spec: &InputSpec,
    parameters: &[String],
    seed_slots: usize,
    n: usize,
    stream: &mut UniformStream,
) -> Result<PickFreezeDesign, GsaError> {
    spec.check_parameters(parameters)?;
    let d: usize = spec
        .groups()
        .iter()
        .map(|g| match g {
            InputGroup::Parameters { members, .. } => members.len(),
            InputGroup::Intrinsic { .. } => 0,
        })
        .sum();
    let unit_a = lhs_unit(d, n, stream)?;
    let unit_b = lhs_unit(d, n, stream)?;
    let slots = if spec.intrinsic_index().is_some() { seed_slots } else { 0 };
    let seeds_a: Vec<SeedVector> = (0..n).map(|_| SeedVector::draw(stream, slots)).collect();
    let seeds_b: Vec<SeedVector> = (0..n).map(|_| SeedVector::draw(stream, slots)).collect();

    let rows = |unit: &[Vec<f64>], seeds: &[SeedVector]| -> Vec<DesignRow> {
        unit.iter()
            .zip(seeds)
            .map(|(u, z)| DesignRow {
                theta: unit_to_theta(spec, parameters, u),
                seeds: z.clone(),
            })
            .collect()
    };
    let a = rows(&unit_a, &seeds_a);
    let b = rows(&unit_b, &seeds_b);

    // Column span of each parameter group in the unit design.
    let mut hybrids = Vec::with_capacity(spec.groups().len());
    let mut col = 0;
    for g in spec.groups() {
        let hybrid = match g {
            InputGroup::Parameters { members, .. } => {
                let span = col..col + members.len();
                col += members.len();
                let unit_ab: Vec<Vec<f64>> = unit_a
                    .iter()
                    .zip(&unit_b)
                    .map(|(ra, rb)| {
                        let mut r = ra.clone();
                        r[span.clone()].copy_from_slice(&rb[span.clone()]);
                        r
                    })
                    .collect();
                rows(&unit_ab, &seeds_a)
            }
            InputGroup::Intrinsic { .. } => rows(&unit_a, &seeds_b),
        };
        hybrids.push(hybrid);
    }
    Ok(PickFreezeDesign {
        groups: spec.group_names(),
        a,
        b,
        hybrids,
    })
}

/// Model outputs on every matrix of a design, in the order `A, B, AB_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutputs<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub hybrids: Vec<Vec<T>>,
}

/// Evaluates `f` on every row of every matrix. Rows are independent and
/// run concurrently under [`Execution::Parallel`]; the result is identical
/// either way.
pub fn evaluate_design<T, E, F>(
    design: &PickFreezeDesign,
    exec: Execution,
    f: F,
) -> Result<DesignOutputs<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&DesignRow) -> Result<T, E> + Sync + Send,
{
    let n = design.n();
    let total = design.n_matrices() * n;
    let mut flat = try_map_indexed(exec, total, |k| f(&design.matrix(k / n)[k % n]))?.into_iter();
    let mut take = || flat.by_ref().take(n).collect::<Vec<T>>();
    let a = take();
    let b = take();
    let hybrids = (0..design.hybrids.len()).map(|_| take()).collect();
    Ok(DesignOutputs { a, b, hybrids })
}

/// Raw estimator components for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub group: String,
    pub first_order: f64,
    pub total: f64,
    /// Pooled output variance `V`.
    pub variance: f64,
    /// `V * first_order`.
    pub numerator_first: f64,
    /// `V * total`, compared across representations by Welch tests.
    pub numerator_total: f64,
}

impl IndexEstimate {
    /// Monte Carlo noise can push estimates outside [0, 1]; they are kept
    /// raw and flagged beyond this margin.
    pub fn out_of_range(&self) -> bool {
        let bad = |s: f64| !(-0.05..=1.05).contains(&s);
        bad(self.first_order) || bad(self.total)
    }
}

fn check_lengths(n: usize, others: &[&[f64]]) -> Result<(), GsaError> {
    if n < 2 {
        return Err(GsaError::TooFewSamples(n));
    }
    if others.iter().any(|v| v.len() != n) {
        return Err(GsaError::LengthMismatch);
    }
    Ok(())
}

/// Mean and unbiased variance of the pooled sample `ya ∪ yb`.
pub fn pooled_moments(ya: &[f64], yb: &[f64]) -> (f64, f64) {
    let count = (ya.len() + yb.len()) as f64;
    let mean = ya.iter().chain(yb).sum::<f64>() / count;
    let ss = ya.iter().chain(yb).map(|y| (y - mean) * (y - mean)).sum::<f64>();
    (mean, ss / (count - 1.0))
}

fn first_order_numerator(ya: &[f64], yb: &[f64], yab: &[f64], mean: f64) -> f64 {
    let n = ya.len() as f64;
    ya.iter()
        .zip(yb)
        .zip(yab)
        .map(|((a, b), ab)| (b - mean) * (ab - a))
        .sum::<f64>()
        / n
}

fn total_numerator(ya: &[f64], yab: &[f64]) -> f64 {
    let n = ya.len() as f64;
    ya.iter().zip(yab).map(|(a, ab)| (a - ab) * (a - ab)).sum::<f64>() / (2.0 * n)
}

pub fn estimate_first_order(ya: &[f64], yb: &[f64], yab: &[f64]) -> Result<f64, GsaError> {
    check_lengths(ya.len(), &[yb, yab])?;
    let (mean, v) = pooled_moments(ya, yb);
    if v <= 0.0 {
        return Err(GsaError::DegenerateOutput);
    }
    Ok(first_order_numerator(ya, yb, yab, mean) / v)
}

/// Jansen total index; `yb` only enters through the pooled variance.
pub fn estimate_total(ya: &[f64], yb: &[f64], yab: &[f64]) -> Result<f64, GsaError> {
    check_lengths(ya.len(), &[yb, yab])?;
    let (_, v) = pooled_moments(ya, yb);
    if v <= 0.0 {
        return Err(GsaError::DegenerateOutput);
    }
    Ok(total_numerator(ya, yab) / v)
}

/// First-order and total estimates for every group of a scalar output.
pub fn estimate_indices(
    groups: &[String],
    outputs: &DesignOutputs<f64>,
) -> Result<Vec<IndexEstimate>, GsaError> {
    let (ya, yb) = (&outputs.a, &outputs.b);
    check_lengths(ya.len(), &[yb])?;
    if outputs.hybrids.len() != groups.len() {
        return Err(GsaError::LengthMismatch);
    }
    let (mean, v) = pooled_moments(ya, yb);
    if v <= 0.0 {
        return Err(GsaError::DegenerateOutput);
    }
    groups
        .iter()
        .zip(&outputs.hybrids)
        .map(|(g, yab)| {
            check_lengths(ya.len(), &[yab])?;
            let n1 = first_order_numerator(ya, yb, yab, mean);
            let nt = total_numerator(ya, yab);
            Ok(IndexEstimate {
                group: g.clone(),
                first_order: n1 / v,
                total: nt / v,
                variance: v,
                numerator_first: n1,
                numerator_total: nt,
            })
        })
        .collect()
}

/// Per-time estimator components of a functional output.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalIndices {
    pub groups: Vec<String>,
    pub grid: Vec<f64>,
    /// Pooled output variance at each grid time.
    pub variance: Vec<f64>,
    /// `numerator_first[j][t]`.
    pub numerator_first: Vec<Vec<f64>>,
    pub numerator_total: Vec<Vec<f64>>,
}

impl DynamicalIndices {
    /// First-order index of group `j` at grid index `t`; `None` where the
    /// output variance vanishes.
    pub fn first_order(&self, j: usize, t: usize) -> Option<f64> {
        (self.variance[t] > 0.0).then(|| self.numerator_first[j][t] / self.variance[t])
    }

    pub fn total(&self, j: usize, t: usize) -> Option<f64> {
        (self.variance[t] > 0.0).then(|| self.numerator_total[j][t] / self.variance[t])
    }

    pub fn first_order_curve(&self, j: usize) -> Vec<Option<f64>> {
        (0..self.grid.len()).map(|t| self.first_order(j, t)).collect()
    }

    pub fn total_curve(&self, j: usize) -> Vec<Option<f64>> {
        (0..self.grid.len()).map(|t| self.total(j, t)).collect()
    }

    /// Grid indices where the indices are undefined.
    pub fn undefined_times(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&t| self.variance[t] <= 0.0).collect()
    }

    /// Trace-weighted indices over the whole grid:
    /// `GSI_j = sum_t V_j(t) / sum_t V(t)`.
    pub fn aggregated(&self) -> Result<Vec<IndexEstimate>, GsaError> {
        let v: f64 = self.variance.iter().sum();
        if v <= 0.0 {
            return Err(GsaError::DegenerateOutput);
        }
        Ok(self
            .groups
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let n1: f64 = self.numerator_first[j].iter().sum();
                let nt: f64 = self.numerator_total[j].iter().sum();
                IndexEstimate {
                    group: g.clone(),
                    first_order: n1 / v,
                    total: nt / v,
                    variance: v,
                    numerator_first: n1,
                    numerator_total: nt,
                }
            })
            .collect())
    }
}

/// Scalar estimators applied independently at every grid time. Each
/// output is a curve sampled on `grid`.
pub fn dynamical_indices<V: Copy + Into<f64>>(
    groups: &[String],
    grid: &[f64],
    outputs: &DesignOutputs<Vec<V>>,
) -> Result<DynamicalIndices, GsaError> {
    let n = outputs.a.len();
    if n < 2 {
        return Err(GsaError::TooFewSamples(n));
    }
    if outputs.b.len() != n
        || outputs.hybrids.len() != groups.len()
        || outputs.hybrids.iter().any(|h| h.len() != n)
    {
        return Err(GsaError::LengthMismatch);
    }
    let g = grid.len();
    let all_rows = outputs
        .a
        .iter()
        .chain(&outputs.b)
        .chain(outputs.hybrids.iter().flatten());
    for row in all_rows {
        if row.len() != g {
            return Err(GsaError::LengthMismatch);
        }
    }

    let nf = n as f64;
    let mut mean = vec![0.0; g];
    for row in outputs.a.iter().chain(&outputs.b) {
        for (m, &y) in mean.iter_mut().zip(row) {
            *m += y.into();
        }
    }
    mean.iter_mut().for_each(|m| *m /= 2.0 * nf);

    let mut variance = vec![0.0; g];
    for row in outputs.a.iter().chain(&outputs.b) {
        for ((v, &y), m) in variance.iter_mut().zip(row).zip(&mean) {
            let d = y.into() - m;
            *v += d * d;
        }
    }
    variance.iter_mut().for_each(|v| *v /= 2.0 * nf - 1.0);

    let mut numerator_first = vec![vec![0.0; g]; groups.len()];
    let mut numerator_total = vec![vec![0.0; g]; groups.len()];
    for (j, yab) in outputs.hybrids.iter().enumerate() {
        let (n1, nt) = (&mut numerator_first[j], &mut numerator_total[j]);
        for i in 0..n {
            let (ra, rb, rab) = (&outputs.a[i], &outputs.b[i], &yab[i]);
            for t in 0..g {
                let (ya, yb, yab): (f64, f64, f64) = (ra[t].into(), rb[t].into(), rab[t].into());
                let d = yab - ya;
                n1[t] += (yb - mean[t]) * d;
                nt[t] += d * d;
            }
        }
        n1.iter_mut().for_each(|x| *x /= nf);
        nt.iter_mut().for_each(|x| *x /= 2.0 * nf);
    }
    // An exactly constant output has zero variance; clear rounding residue.
    for t in 0..g {
        let first: f64 = outputs.a[0][t].into();
        if outputs.a.iter().chain(&outputs.b).all(|r| r[t].into() == first) {
            variance[t] = 0.0;
        }
    }
    Ok(DynamicalIndices {
        groups: groups.to_vec(),
        grid: grid.to_vec(),
        variance,
        numerator_first,
        numerator_total,
    })
}

/// Aggregated indices straight from functional outputs.
pub fn aggregated_indices<V: Copy + Into<f64>>(
    groups: &[String],
    grid: &[f64],
    outputs: &DesignOutputs<Vec<V>>,
) -> Result<Vec<IndexEstimate>, GsaError> {
    dynamical_indices(groups, grid, outputs)?.aggregated()
}

/// Runs `r` replications, each on its own stream seeded from `master`.
/// Replication seeds are drawn up front, so replication `k` is the same
/// whatever the execution order.
pub fn replicate<T, E, F>(r: usize, master: &mut UniformStream, mut f: F) -> Result<Vec<T>, E>
where
    F: FnMut(usize, &mut UniformStream) -> Result<T, E>,
    E: From<GsaError>,
{
    if r < 2 {
        return Err(GsaError::TooFewReplications(r).into());
    }
    let seeds: Vec<u64> = (0..r).map(|_| master.next_seed()).collect();
    seeds
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut stream = UniformStream::from_seed(s).expect("drawn seeds are in range");
            f(k, &mut stream)
        })
        .collect()
}

/// Replicated scalar pick-freeze estimates for a model `f` of the design
/// rows: fresh designs (parameters and seed vectors) in every replication.
pub fn replicate_indices<E, F>(
    spec: &InputSpec,
    parameters: &[String],
    seed_slots: usize,
    n: usize,
    r: usize,
    master: &mut UniformStream,
    exec: Execution,
    f: F,
) -> Result<Vec<Vec<IndexEstimate>>, E>
where
    E: From<GsaError> + Send,
    F: Fn(&DesignRow) -> Result<f64, E> + Sync + Send,
{
    replicate(r, master, |_, stream| {
        let design = build_pickfreeze(spec, parameters, seed_slots, n, stream)?;
        let outputs = evaluate_design(&design, exec, &f)?;
        Ok(estimate_indices(&design.groups, &outputs)?)
    })
}
