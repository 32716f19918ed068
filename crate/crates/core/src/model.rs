//! Compartmental models: compartments, transition channels with rate
//! expressions, and the integer state they act on.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{BoundRate, RateExpr, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompartmentId(pub usize);

/// Integer compartment counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State(pub Vec<u32>);

impl State {
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    /// Applies the jump of `channel` in place.
    pub fn apply(&mut self, channel: &TransitionChannel) -> Result<(), ModelError> {
        let src = channel.source.0;
        if self.0[src] == 0 {
            return Err(ModelError::ImpossibleTransition {
                from: channel.source.0,
                target: channel.target.0,
                state: self.clone(),
            });
        }
        self.0[src] -= 1;
        self.0[channel.target.0] += 1;
        Ok(())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Returns `state + u` for the channel's jump vector `u`.
pub fn apply_transition(state: &State, channel: &TransitionChannel) -> Result<State, ModelError> {
    let mut next = state.clone();
    next.apply(channel)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionChannel {
    pub source: CompartmentId,
    pub target: CompartmentId,
    pub rate: RateExpr,
    pub jump: Vec<i32>,
}

impl TransitionChannel {
    /// Channel with the canonical jump vector: -1 at `source`, +1 at `target`.
    pub fn new(source: usize, target: usize, rate: RateExpr, n_compartments: usize) -> Self {
        let mut jump = vec![0; n_compartments];
        if source < n_compartments {
            jump[source] = -1;
        }
        if target < n_compartments {
            jump[target] += 1;
        }
        Self {
            source: CompartmentId(source),
            target: CompartmentId(target),
            rate,
            jump,
        }
    }
}

/// Unvalidated model description. Turn it into a [`ModelGraph`] with
/// [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub compartments: Vec<String>,
    pub parameters: Vec<String>,
    pub channels: Vec<TransitionChannel>,
    pub population: u32,
    pub initial: State,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate compartment name `{0}`")]
    DuplicateCompartment(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("model has no transition channels")]
    NoChannels,
    #[error("channel {channel}: source and target are both compartment {compartment}")]
    SelfLoop { channel: usize, compartment: usize },
    #[error("channel {channel}: jump vector inconsistent with its source and target")]
    InconsistentJump { channel: usize },
    #[error("channel {channel}: unknown identifier in rate expression ({what})")]
    UnknownIdentifier { channel: usize, what: String },
    #[error("initial state has {got} compartments, model has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("initial state sums to {sum}, population size is {population}")]
    InitialSum { sum: u64, population: u32 },
    #[error("population size must be positive")]
    EmptyPopulation,
    #[error("rate evaluation error: channel {channel} evaluated to {value} at state {state}")]
    RateEvaluation {
        channel: usize,
        value: f64,
        state: State,
    },
    #[error("impossible transition {from}->{target} at state {state}")]
    ImpossibleTransition {
        from: usize,
        target: usize,
        state: State,
    },
    #[error("parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

/// A validated compartmental model. Immutable; channel order is part of
/// its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    spec: ModelSpec,
}

/// Checks every structural invariant of `spec`.
pub fn validate_model(spec: ModelSpec) -> Result<ModelGraph, ModelError> {
    let n = spec.compartments.len();
    let mut seen = HashSet::new();
    for c in &spec.compartments {
        if !seen.insert(c.as_str()) {
            return Err(ModelError::DuplicateCompartment(c.clone()));
        }
    }
    let mut seen = HashSet::new();
    for p in &spec.parameters {
        if !seen.insert(p.as_str()) {
            return Err(ModelError::DuplicateParameter(p.clone()));
        }
    }
    if spec.channels.is_empty() {
        return Err(ModelError::NoChannels);
    }
    if spec.population == 0 {
        return Err(ModelError::EmptyPopulation);
    }
    for (k, ch) in spec.channels.iter().enumerate() {
        let (s, t) = (ch.source.0, ch.target.0);
        if s >= n || t >= n {
            return Err(ModelError::UnknownIdentifier {
                channel: k,
                what: format!("compartment index {} out of range", s.max(t)),
            });
        }
        if s == t {
            return Err(ModelError::SelfLoop {
                channel: k,
                compartment: s,
            });
        }
        let consistent = ch.jump.len() == n
            && ch.jump.iter().enumerate().all(|(i, &u)| {
                u == if i == s {
                    -1
                } else if i == t {
                    1
                } else {
                    0
                }
            });
        if !consistent {
            return Err(ModelError::InconsistentJump { channel: k });
        }
        let mut bad = None;
        ch.rate.visit_leaves(&mut |leaf| match leaf {
            RateExpr::Param(i) if *i >= spec.parameters.len() => {
                bad.get_or_insert(format!("parameter index {i}"));
            }
            RateExpr::Count(i) if *i >= n => {
                bad.get_or_insert(format!("compartment index {i}"));
            }
            _ => {}
        });
        if let Some(what) = bad {
            return Err(ModelError::UnknownIdentifier { channel: k, what });
        }
    }
    if spec.initial.0.len() != n {
        return Err(ModelError::StateLength {
            expected: n,
            got: spec.initial.0.len(),
        });
    }
    let sum = spec.initial.total();
    if sum != u64::from(spec.population) {
        return Err(ModelError::InitialSum {
            sum,
            population: spec.population,
        });
    }
    Ok(ModelGraph { spec })
}

impl ModelGraph {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn compartments(&self) -> &[String] {
        &self.spec.compartments
    }

    pub fn parameters(&self) -> &[String] {
        &self.spec.parameters
    }

    pub fn channels(&self) -> &[TransitionChannel] {
        &self.spec.channels
    }

    pub fn n_channels(&self) -> usize {
        self.spec.channels.len()
    }

    pub fn population(&self) -> u32 {
        self.spec.population
    }

    pub fn initial_state(&self) -> &State {
        &self.spec.initial
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn symbols(&self) -> Symbols<'_> {
        Symbols {
            parameters: &self.spec.parameters,
            compartments: &self.spec.compartments,
        }
    }

    pub fn compartment(&self, name: &str) -> Option<CompartmentId> {
        self.spec
            .compartments
            .iter()
            .position(|c| c == name)
            .map(CompartmentId)
    }

    /// Same model with a different initial state.
    pub fn with_initial_state(&self, initial: State) -> Result<ModelGraph, ModelError> {
        let mut spec = self.spec.clone();
        spec.initial = initial;
        validate_model(spec)
    }

    /// Substitutes `theta` into every channel rate.
    pub fn bind(&self, theta: &ParameterPoint) -> BoundModel<'_> {
        let n = f64::from(self.spec.population);
        BoundModel {
            model: self,
            rates: self
                .spec
                .channels
                .iter()
                .map(|c| c.rate.bind(theta.values(), n))
                .collect(),
        }
    }
}

/// Evaluates the rate of `channel` (index `k` in its model) at `(theta, state)`.
pub fn eval_rate(
    model: &ModelGraph,
    k: usize,
    theta: &ParameterPoint,
    state: &State,
) -> Result<f64, ModelError> {
    let value = model.channels()[k].rate.eval(
        theta.values(),
        state.counts(),
        f64::from(model.population()),
    );
    check_rate(k, value, state.counts())
}

#[inline]
pub(crate) fn check_rate(channel: usize, value: f64, counts: &[u32]) -> Result<f64, ModelError> {
    // `value >= 0.0` is false for NaN.
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::RateEvaluation {
            channel,
            value,
            state: State(counts.to_vec()),
        })
    }
}

/// A model with one parameter point substituted; what simulators run on.
#[derive(Debug, Clone)]
pub struct BoundModel<'m> {
    model: &'m ModelGraph,
    rates: Vec<BoundRate>,
}

impl BoundModel<'_> {
    pub fn model(&self) -> &ModelGraph {
        self.model
    }

    /// Fills `out` with all channel rates at `counts`; returns their sum.
    #[inline]
    pub fn rates_into(&self, counts: &[u32], out: &mut [f64]) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for (k, (rate, slot)) in self.rates.iter().zip(out.iter_mut()).enumerate() {
            let v = check_rate(k, rate.eval(counts), counts)?;
            *slot = v;
            total += v;
        }
        Ok(total)
    }
}

/// Parameter values aligned with a model's parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    values: Vec<f64>,
}

impl ParameterPoint {
    /// Values in the model's parameter order.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Builds a point from named values; every model parameter must be covered.
    pub fn from_named<'a, I>(model: &ModelGraph, named: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let map: HashMap<&str, f64> = named.into_iter().collect();
        for key in map.keys() {
            if !model.parameters().iter().any(|p| p == key) {
                return Err(ModelError::UnknownParameter(key.to_string()));
            }
        }
        let values = model
            .parameters()
            .iter()
            .map(|p| {
                map.get(p.as_str())
                    .copied()
                    .ok_or_else(|| ModelError::MissingParameter(p.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, model: &ModelGraph, name: &str) -> Option<f64> {
        model
            .parameters()
            .iter()
            .position(|p| p == name)
            .map(|i| self.values[i])
    }
}
