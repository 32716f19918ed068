//! Model and study configuration documents (TOML).
//!
//! ```toml
//! name = "sir"
//! population = 100
//!
//! [[compartments]]
//! name = "S"
//! initial = 95
//!
//! [[parameters]]
//! name = "beta"
//! nominal = 2.0
//! range = [1.0, 3.0]
//!
//! [[channels]]
//! source = "S"
//! target = "I"
//! rate = "beta/N * W_I * W_S"
//! ```
//!
//! A parameter may set `scale = "reciprocal"`, in which case `range`
//! bounds its reciprocal (a rate sampled through its mean duration), and
//! `group` to be swapped together with other parameters of the same
//! group. An optional `[study]` table describes the sensitivity study.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_rate_expr, ExprError};
use crate::gsa::{GsaError, InputGroup, InputSpec, Marginal, ParamInput};
use crate::model::{validate_model, CompartmentId, ModelError, ModelGraph, ModelSpec, ParameterPoint, State, TransitionChannel};
use crate::par::Execution;
use crate::sim::{RepresentationKind, DEFAULT_EVENT_CAP};
use crate::study::{uniform_grid, QoIDef, StudyConfig};

/// The SIR model, N = 100 with 5 initial infectious.
pub const SIR_CONFIG: &str = include_str!("../../../configs/sir.toml");
/// The SEIARHD model and its two sensitivity studies.
pub const SEIARHD_CONFIG: &str = include_str!("../../../configs/seiarhd.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("{location}: {source}")]
    Expr { location: String, source: ExprError },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("inputs: {0}")]
    Inputs(#[from] GsaError),
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigDoc {
    pub name: String,
    pub population: u32,
    pub compartments: Vec<CompartmentDoc>,
    pub parameters: Vec<ParameterDoc>,
    pub channels: Vec<ChannelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentDoc {
    pub name: String,
    pub initial: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Reciprocal,
}

impl Scale {
    fn is_linear(&self) -> bool {
        *self == Scale::Linear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDoc {
    pub name: String,
    pub nominal: f64,
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Scale::is_linear")]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub source: String,
    pub target: String,
    pub rate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDoc {
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyDoc {
    pub representations: Vec<String>,
    pub n: usize,
    pub replications: usize,
    pub paper_n: usize,
    pub paper_replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
    /// Name of the intrinsic-randomness group, listed after the parameter groups.
    pub intrinsic_group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extinction: Option<ExtinctionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveDoc>,
}

fn default_event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionDoc {
    pub all_zero: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub compartment: String,
    pub end: f64,
    pub points: usize,
}

/// Study settings from a document, not yet bound to a scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub inputs: InputSpec,
    pub representations: Vec<RepresentationKind>,
    pub n: usize,
    pub replications: usize,
    pub paper_n: usize,
    pub paper_replications: usize,
    pub master_seed: u64,
    pub event_cap: u64,
    pub extinction: Option<Vec<CompartmentId>>,
    pub curve: Option<(CompartmentId, f64, usize)>,
}

/// A parsed configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: ModelGraph,
    pub nominal: ParameterPoint,
    /// One marginal per model parameter, in parameter order.
    pub marginals: Vec<Option<Marginal>>,
    pub horizon: Option<f64>,
    pub study: Option<StudyPlan>,
}

impl ModelConfig {
    /// Study configuration for the model; `paper_scale` selects the full
    /// design size and replication count.
    pub fn study_config(&self, paper_scale: bool) -> Option<StudyConfig> {
        let plan = self.study.as_ref()?;
        let mut qois = Vec::new();
        if let Some(p) = &plan.extinction {
            qois.push(QoIDef::ExtinctionTime { predicate: p.clone() });
        }
        if let Some((c, end, points)) = plan.curve {
            qois.push(QoIDef::CompartmentCurve {
                compartment: c,
                grid: uniform_grid(end, points),
            });
        }
        let (n, replications) = if paper_scale {
            (plan.paper_n, plan.paper_replications)
        } else {
            (plan.n, plan.replications)
        };
        Some(StudyConfig {
            model: self.model.clone(),
            inputs: plan.inputs.clone(),
            representations: plan.representations.clone(),
            n,
            replications,
            qois,
            master_seed: plan.master_seed,
            event_cap: plan.event_cap,
            execution: Execution::default(),
        })
    }

    /// Renders the configuration as a document that parses back to an
    /// identical configuration.
    pub fn to_doc(&self) -> ModelConfigDoc {
        let model = &self.model;
        let symbols = model.symbols();
        let initial = model.initial_state().counts();
        let group_of = |name: &str| -> Option<String> {
            let plan = self.study.as_ref()?;
            plan.inputs.groups().iter().find_map(|g| match g {
                InputGroup::Parameters { name: group, members } => members
                    .iter()
                    .any(|m| m.name == name)
                    .then(|| group.clone())
                    .filter(|group| group != name),
                InputGroup::Intrinsic { .. } => None,
            })
        };
        let parameters = model
            .parameters()
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let (range, scale) = match self.marginals[k] {
                    Some(Marginal::Uniform { low, high }) => (Some([low, high]), Scale::Linear),
                    Some(Marginal::ReciprocalUniform { low, high }) => (Some([low, high]), Scale::Reciprocal),
                    None => (None, Scale::Linear),
                };
                ParameterDoc {
                    name: name.clone(),
                    nominal: self.nominal.values()[k],
                    range,
                    scale,
                    group: group_of(name),
                }
            })
            .collect();
        let cname = |c: CompartmentId| model.compartments()[c.0].clone();
        let study = self.study.as_ref().map(|plan| StudyDoc {
            representations: plan.representations.iter().map(|r| r.as_str().to_string()).collect(),
            n: plan.n,
            replications: plan.replications,
            paper_n: plan.paper_n,
            paper_replications: plan.paper_replications,
            master_seed: plan.master_seed,
            event_cap: plan.event_cap,
            intrinsic_group: plan
                .inputs
                .intrinsic_index()
                .map(|z| plan.inputs.groups()[z].name().to_string())
                .unwrap_or_default(),
            extinction: plan.extinction.as_ref().map(|p| ExtinctionDoc {
                all_zero: p.iter().map(|&c| cname(c)).collect(),
            }),
            curve: plan.curve.map(|(c, end, points)| CurveDoc {
                compartment: cname(c),
                end,
                points,
            }),
        });
        ModelConfigDoc {
            name: model.name().to_string(),
            population: model.population(),
            compartments: model
                .compartments()
                .iter()
                .zip(initial)
                .map(|(name, &initial)| CompartmentDoc {
                    name: name.clone(),
                    initial,
                })
                .collect(),
            parameters,
            channels: model
                .channels()
                .iter()
                .map(|ch| ChannelDoc {
                    source: cname(ch.source),
                    target: cname(ch.target),
                    rate: ch.rate.display(&symbols).to_string(),
                })
                .collect(),
            simulation: self.horizon.map(|horizon| SimulationDoc { horizon }),
            study,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_doc()).expect("configuration documents always serialize")
    }
}

/// Parses and validates a configuration document.
pub fn parse_model_config(src: &str) -> Result<ModelConfig, ConfigError> {
    let doc: ModelConfigDoc = toml::from_str(src).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    build_config(&doc)
}

pub fn build_config(doc: &ModelConfigDoc) -> Result<ModelConfig, ConfigError> {
    let compartments: Vec<String> = doc.compartments.iter().map(|c| c.name.clone()).collect();
    let parameters: Vec<String> = doc.parameters.iter().map(|p| p.name.clone()).collect();
    let compartment = |name: &str, location: &str| -> Result<usize, ConfigError> {
        compartments
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| invalid(location, format!("unknown compartment `{name}`")))
    };

    let mut channels = Vec::with_capacity(doc.channels.len());
    for (k, ch) in doc.channels.iter().enumerate() {
        let location = format!("channels[{k}] ({} -> {})", ch.source, ch.target);
        let s = compartment(&ch.source, &location)?;
        let t = compartment(&ch.target, &location)?;
        let symbols = crate::expr::Symbols {
            parameters: &parameters,
            compartments: &compartments,
        };
        let rate = parse_rate_expr(&ch.rate, &symbols).map_err(|source| ConfigError::Expr {
            location: location.clone(),
            source,
        })?;
        if s == t {
            return Err(invalid(location, "source and target are the same compartment"));
        }
        channels.push(TransitionChannel::new(s, t, rate, compartments.len()));
    }

    let model = validate_model(ModelSpec {
        name: doc.name.clone(),
        compartments: compartments.clone(),
        parameters: parameters.clone(),
        channels,
        population: doc.population,
        initial: State(doc.compartments.iter().map(|c| c.initial).collect()),
    })?;

    let nominal = ParameterPoint::from_values(doc.parameters.iter().map(|p| p.nominal).collect());
    for (p, &v) in doc.parameters.iter().zip(nominal.values()) {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(format!("parameters.{}", p.name), "nominal value must be finite and nonnegative"));
        }
    }
    let marginals: Vec<Option<Marginal>> = doc
        .parameters
        .iter()
        .map(|p| {
            p.range.map(|[low, high]| match p.scale {
                Scale::Linear => Marginal::Uniform { low, high },
                Scale::Reciprocal => Marginal::ReciprocalUniform { low, high },
            })
        })
        .collect();

    let study = doc
        .study
        .as_ref()
        .map(|s| build_study(s, doc, &marginals, &compartment))
        .transpose()?;
    if let Some(plan) = &study {
        plan.inputs.check_against(&model)?;
    }
    if let Some(sim) = &doc.simulation {
        if !(sim.horizon > 0.0) {
            return Err(invalid("simulation.horizon", "must be positive"));
        }
    }
    Ok(ModelConfig {
        model,
        nominal,
        marginals,
        horizon: doc.simulation.as_ref().map(|s| s.horizon),
        study,
    })
}

fn build_study(
    s: &StudyDoc,
    doc: &ModelConfigDoc,
    marginals: &[Option<Marginal>],
    compartment: &dyn Fn(&str, &str) -> Result<usize, ConfigError>,
) -> Result<StudyPlan, ConfigError> {
    // Groups in order of first appearance, then the intrinsic group.
    let mut groups: Vec<(String, Vec<ParamInput>)> = Vec::new();
    for (p, m) in doc.parameters.iter().zip(marginals) {
        let marginal = m.ok_or_else(|| invalid(format!("parameters.{}", p.name), format!("parameter `{}` has no range", p.name)))?;
        let group = p.group.clone().unwrap_or_else(|| p.name.clone());
        let input = ParamInput::new(&p.name, marginal);
        match groups.iter_mut().find(|(g, _)| *g == group) {
            Some((_, members)) => members.push(input),
            None => groups.push((group, vec![input])),
        }
    }
    let mut input_groups: Vec<InputGroup> = groups.iter().map(|(g, m)| InputGroup::parameters(g, m.clone())).collect();
    input_groups.push(InputGroup::intrinsic(&s.intrinsic_group));

    let representations = s
        .representations
        .iter()
        .map(|r| r.parse().map_err(|e: String| invalid("study.representations", e)))
        .collect::<Result<Vec<RepresentationKind>, _>>()?;
    let extinction = s
        .extinction
        .as_ref()
        .map(|e| {
            e.all_zero
                .iter()
                .map(|c| compartment(c, "study.extinction").map(CompartmentId))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let curve = s
        .curve
        .as_ref()
        .map(|c| {
            if !(c.end > 0.0 && c.end.is_finite()) || c.points == 0 {
                return Err(invalid("study.curve", "needs a positive finite end and at least one point"));
            }
            Ok((CompartmentId(compartment(&c.compartment, "study.curve")?), c.end, c.points))
        })
        .transpose()?;
    if extinction.is_none() && curve.is_none() {
        return Err(invalid("study", "needs an extinction and/or a curve table"));
    }
    Ok(StudyPlan {
        inputs: InputSpec::new(input_groups),
        representations,
        n: s.n,
        replications: s.replications,
        paper_n: s.paper_n,
        paper_replications: s.paper_replications,
        master_seed: s.master_seed,
        event_cap: s.event_cap,
        extinction,
        curve,
    })
}
