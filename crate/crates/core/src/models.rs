//! Ready-made models: the classical SIR model, the seven-compartment
//! SEIARHD SARS-CoV-2 model, and a few small test models.

use crate::expr::RateExpr;
use crate::gsa::{InputGroup, InputSpec, Marginal, ParamInput};
use crate::model::{validate_model, ModelError, ModelGraph, ModelSpec, ParameterPoint, State, TransitionChannel};

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// S -> I at `beta/N * W_I * W_S`, I -> R at `gamma_I * W_I`.
pub fn build_sir(population: u32, initial_infected: u32) -> Result<ModelGraph, ModelError> {
    let (s, i, r) = (0, 1, 2);
    let (beta, gamma) = (0, 1);
    let infection = RateExpr::param(beta)
        .div(RateExpr::PopSize)
        .mul(RateExpr::count(i))
        .mul(RateExpr::count(s));
    let removal = RateExpr::param(gamma).mul(RateExpr::count(i));
    validate_model(ModelSpec {
        name: "sir".into(),
        compartments: strings(&["S", "I", "R"]),
        parameters: strings(&["beta", "gamma_I"]),
        channels: vec![
            TransitionChannel::new(s, i, infection, 3),
            TransitionChannel::new(i, r, removal, 3),
        ],
        population,
        initial: State(vec![population.saturating_sub(initial_infected), initial_infected, 0]),
    })
}

pub const SEIARHD_COMPARTMENTS: [&str; 7] = ["S", "E", "A", "I", "H", "R", "D"];
pub const SEIARHD_PARAMETERS: [&str; 9] = [
    "beta", "gamma_E", "gamma_A", "gamma_I", "gamma_H", "p_EA", "p_IH", "p_ID", "p_HD",
];

/// Default initial condition: 2000 susceptible, 5 exposed.
pub fn seiarhd_initial_state() -> State {
    State(vec![2000, 5, 0, 0, 0, 0, 0])
}

/// Seven compartments S,E,A,I,H,R,D and nine channels, in this order:
/// S->E, E->A, E->I, A->R, I->R, I->H, I->D, H->R, H->D.
pub fn build_seiarhd(population: u32, initial: State) -> Result<ModelGraph, ModelError> {
    if initial.0.len() != 7 {
        return Err(ModelError::StateLength {
            expected: 7,
            got: initial.0.len(),
        });
    }
    const S: usize = 0;
    const E: usize = 1;
    const A: usize = 2;
    const I: usize = 3;
    const H: usize = 4;
    const R: usize = 5;
    const D: usize = 6;
    let p = RateExpr::param;
    let w = RateExpr::count;
    let one = || RateExpr::num(1.0);
    let (beta, g_e, g_a, g_i, g_h, p_ea, p_ih, p_id, p_hd) = (0, 1, 2, 3, 4, 5, 6, 7, 8);

    let channels = vec![
        (S, E, p(beta).div(RateExpr::PopSize).mul(w(S)).mul(w(A).add(w(I)))),
        (E, A, p(g_e).mul(p(p_ea)).mul(w(E))),
        (E, I, p(g_e).mul(one().sub(p(p_ea))).mul(w(E))),
        (A, R, p(g_a).mul(w(A))),
        (I, R, p(g_i).mul(one().sub(p(p_ih)).sub(p(p_id))).mul(w(I))),
        (I, H, p(g_i).mul(p(p_ih)).mul(w(I))),
        (I, D, p(g_i).mul(p(p_id)).mul(w(I))),
        (H, R, p(g_h).mul(one().sub(p(p_hd))).mul(w(H))),
        (H, D, p(g_h).mul(p(p_hd)).mul(w(H))),
    ]
    .into_iter()
    .map(|(s, t, rate)| TransitionChannel::new(s, t, rate, 7))
    .collect();

    validate_model(ModelSpec {
        name: "seiarhd".into(),
        compartments: strings(&SEIARHD_COMPARTMENTS),
        parameters: strings(&SEIARHD_PARAMETERS),
        channels,
        population,
        initial,
    })
}

/// Nominal parameter values (rates are reciprocals of mean sojourn times).
pub fn seiarhd_nominal(model: &ModelGraph) -> ParameterPoint {
    ParameterPoint::from_named(
        model,
        [
            ("beta", 2.0),
            ("gamma_E", 1.0 / 4.6),
            ("gamma_A", 1.0 / 2.1),
            ("gamma_I", 1.0 / 4.0),
            ("gamma_H", 1.0 / 10.0),
            ("p_EA", 0.6),
            ("p_IH", 0.15),
            ("p_ID", 0.05),
            ("p_HD", 0.08),
        ],
    )
    .expect("nominal values cover the SEIARHD parameters")
}

/// The nine GSA inputs: eight parameter groups (`p_IH`, `p_ID` grouped as
/// `p_I`) and the intrinsic randomness `Z`. The `gamma_*` inputs are
/// sampled through their mean sojourn durations.
pub fn seiarhd_input_spec() -> InputSpec {
    let single = |group: &str, param: &str, marginal: Marginal| {
        InputGroup::parameters(group, vec![ParamInput::new(param, marginal)])
    };
    InputSpec::new(vec![
        single("beta", "beta", Marginal::Uniform { low: 0.35, high: 4.0 }),
        single("gamma_E", "gamma_E", Marginal::ReciprocalUniform { low: 2.0, high: 7.0 }),
        single("gamma_A", "gamma_A", Marginal::ReciprocalUniform { low: 1.0, high: 3.0 }),
        single("gamma_I", "gamma_I", Marginal::ReciprocalUniform { low: 3.0, high: 5.0 }),
        single("gamma_H", "gamma_H", Marginal::ReciprocalUniform { low: 7.0, high: 12.0 }),
        single("p_EA", "p_EA", Marginal::Uniform { low: 0.3, high: 0.7 }),
        InputGroup::parameters(
            "p_I",
            vec![
                ParamInput::new("p_IH", Marginal::Uniform { low: 1e-3, high: 0.2 }),
                ParamInput::new("p_ID", Marginal::Uniform { low: 1e-3, high: 0.1 }),
            ],
        ),
        single("p_HD", "p_HD", Marginal::Uniform { low: 1e-3, high: 0.1 }),
        InputGroup::intrinsic("Z"),
    ])
}

/// Single channel I -> R at `gamma * W_I`.
pub fn build_pure_death(initial: u32) -> Result<ModelGraph, ModelError> {
    validate_model(ModelSpec {
        name: "pure-death".into(),
        compartments: strings(&["I", "R"]),
        parameters: strings(&["gamma"]),
        channels: vec![TransitionChannel::new(
            0,
            1,
            RateExpr::param(0).mul(RateExpr::count(0)),
            2,
        )],
        population: initial.max(1),
        initial: State(if initial == 0 { vec![0, 1] } else { vec![initial, 0] }),
    })
}

/// A -> B at `a * W_A` and A -> C at `b * W_A`; with one individual these
/// are two competing exponential clocks.
pub fn build_competing(population: u32) -> Result<ModelGraph, ModelError> {
    let mass_action = |k| RateExpr::param(k).mul(RateExpr::count(0));
    validate_model(ModelSpec {
        name: "competing".into(),
        compartments: strings(&["A", "B", "C"]),
        parameters: strings(&["a", "b"]),
        channels: vec![
            TransitionChannel::new(0, 1, mass_action(0), 3),
            TransitionChannel::new(0, 2, mass_action(1), 3),
        ],
        population,
        initial: State(vec![population, 0, 0]),
    })
}

/// A -> B at the constant rate `rate`, independent of the state. The
/// population must exceed the number of events the horizon can produce.
pub fn build_constant_rate(population: u32) -> Result<ModelGraph, ModelError> {
    validate_model(ModelSpec {
        name: "constant-rate".into(),
        compartments: strings(&["A", "B"]),
        parameters: strings(&["rate"]),
        channels: vec![TransitionChannel::new(0, 1, RateExpr::param(0), 2)],
        population,
        initial: State(vec![population, 0]),
    })
}
