//! Exact CTMC path simulation.
//!
//! Every simulator here is a pure function of (model, parameters, seeds,
//! options): all randomness comes from the [`UniformStream`]s rebuilt from
//! a [`SeedVector`], and the way each algorithm consumes its streams is
//! fixed, so a seed vector is a complete description of the intrinsic
//! randomness of one run.
//!
//! * [`RepresentationKind::DirectSingleStream`]: classical direct method,
//!   one stream shared by waiting times and channel selection.
//! * [`RepresentationKind::DirectTwoStream`]: waiting times from stream 1,
//!   channel selection from stream 2, one draw from each per jump.
//! * [`RepresentationKind::FirstReaction`]: one stream per channel; every
//!   channel draws once per step whether or not it can fire.
//! * [`RepresentationKind::Mnrm`]: modified next reaction method, i.e. the
//!   random time change with one unit-rate Poisson process per channel.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{BoundModel, CompartmentId, ModelError, ModelGraph, ParameterPoint, State};
use crate::rng::{RngError, SeedVector, UniformStream};

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RepresentationKind {
    DirectSingleStream,
    DirectTwoStream,
    FirstReaction,
    Mnrm,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 4] = [
        RepresentationKind::DirectSingleStream,
        RepresentationKind::DirectTwoStream,
        RepresentationKind::FirstReaction,
        RepresentationKind::Mnrm,
    ];

    /// Number of seeds a run of this representation consumes.
    pub fn seed_slots(self, n_channels: usize) -> usize {
        match self {
            RepresentationKind::DirectSingleStream => 1,
            RepresentationKind::DirectTwoStream => 2,
            RepresentationKind::FirstReaction | RepresentationKind::Mnrm => n_channels,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RepresentationKind::DirectSingleStream => "direct",
            RepresentationKind::DirectTwoStream => "direct2",
            RepresentationKind::FirstReaction => "first-reaction",
            RepresentationKind::Mnrm => "mnrm",
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepresentationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RepresentationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown representation `{s}` (direct, direct2, first-reaction, mnrm)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalReason {
    HorizonReached,
    /// Total rate is zero: no further transition is possible.
    Absorbed,
    /// The [`StopRule`] fired.
    StopRuleMet,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::HorizonReached => "horizon_reached",
            TerminalReason::Absorbed => "absorbed",
            TerminalReason::StopRuleMet => "stop_rule_met",
        }
    }
}

/// Stop as soon as every listed compartment is empty and the clock has
/// reached `not_before`.
#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub all_zero: Vec<CompartmentId>,
    pub not_before: f64,
}

impl StopRule {
    pub fn extinction(all_zero: Vec<CompartmentId>) -> Self {
        Self {
            all_zero,
            not_before: 0.0,
        }
    }

    #[inline]
    fn holds(&self, counts: &[u32], t: f64) -> bool {
        t >= self.not_before && self.all_zero.iter().all(|c| counts[c.0] == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Final time; `f64::INFINITY` runs until absorption or the stop rule.
    pub horizon: f64,
    pub event_cap: u64,
    pub stop: Option<StopRule>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: f64::INFINITY,
            event_cap: DEFAULT_EVENT_CAP,
            stop: None,
        }
    }
}

impl SimOptions {
    pub fn until(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Seeds(#[from] RngError),
    #[error("event cap of {0} transitions exceeded")]
    EventCapExceeded(u64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
}

/// Receives the path as it is generated.
pub trait PathObserver {
    fn start(&mut self, _initial: &[u32]) {}
    /// Called after channel `channel` fired at `time`; `state` is post-jump.
    fn jump(&mut self, time: f64, channel: usize, state: &[u32]);
}

impl PathObserver for () {
    #[inline]
    fn jump(&mut self, _: f64, _: usize, _: &[u32]) {}
}

impl<T: PathObserver + ?Sized> PathObserver for &mut T {
    fn start(&mut self, initial: &[u32]) {
        (**self).start(initial);
    }

    #[inline]
    fn jump(&mut self, time: f64, channel: usize, state: &[u32]) {
        (**self).jump(time, channel, state);
    }
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn start(&mut self, initial: &[u32]) {
        self.0.start(initial);
        self.1.start(initial);
    }

    #[inline]
    fn jump(&mut self, time: f64, channel: usize, state: &[u32]) {
        self.0.jump(time, channel, state);
        self.1.jump(time, channel, state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub reason: TerminalReason,
    pub events: u64,
    /// Time of the last transition (0 if none).
    pub last_jump: f64,
}

/// A right-continuous step path: `states[k]` holds on
/// `[jump_times[k-1], jump_times[k])`, with `states[0] = xi0` from time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub jump_times: Vec<f64>,
    pub channels: Vec<usize>,
    pub states: Vec<State>,
    pub terminal: TerminalReason,
}

impl Trajectory {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// State at time `t` (the state after the last jump at or before `t`).
    pub fn state_at(&self, t: f64) -> &State {
        let k = self.jump_times.partition_point(|&s| s <= t);
        &self.states[k]
    }
}

#[derive(Debug, Default)]
struct Recorder {
    jump_times: Vec<f64>,
    channels: Vec<usize>,
    states: Vec<State>,
}

impl PathObserver for Recorder {
    fn start(&mut self, initial: &[u32]) {
        self.states.push(State(initial.to_vec()));
    }

    fn jump(&mut self, time: f64, channel: usize, state: &[u32]) {
        self.jump_times.push(time);
        self.channels.push(channel);
        self.states.push(State(state.to_vec()));
    }
}

/// Values of one path on a time grid.
pub fn sample_path(traj: &Trajectory, grid: &[f64]) -> Vec<State> {
    grid.iter().map(|&t| traj.state_at(t).clone()).collect()
}

trait Stepper {
    /// Waiting time and channel of the next transition given the current
    /// rates (`total > 0`).
    fn step(&mut self, rates: &[f64], total: f64) -> (f64, usize);
}

/// Cumulative inversion: the channel `l` with
/// `sum_{j<l} p_j <= u < sum_{j<=l} p_j`, accumulated in channel order.
#[inline]
fn select_channel(rates: &[f64], total: f64, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &g) in rates.iter().enumerate() {
        if g > 0.0 {
            let p = g / total;
            if u < acc + p {
                return j;
            }
            acc += p;
            last_positive = j;
        }
    }
    // Rounding left the cumulative sum below u.
    last_positive
}

struct DirectSingle<'a> {
    stream: &'a mut UniformStream,
}

impl Stepper for DirectSingle<'_> {
    #[inline]
    fn step(&mut self, rates: &[f64], total: f64) -> (f64, usize) {
        let dt = -self.stream.next_uniform().ln() / total;
        let u = self.stream.next_uniform();
        (dt, select_channel(rates, total, u))
    }
}

struct DirectTwo<'a> {
    times: &'a mut UniformStream,
    choices: &'a mut UniformStream,
}

impl Stepper for DirectTwo<'_> {
    #[inline]
    fn step(&mut self, rates: &[f64], total: f64) -> (f64, usize) {
        let dt = -self.times.next_uniform().ln() / total;
        let u = self.choices.next_uniform();
        (dt, select_channel(rates, total, u))
    }
}

struct FirstReaction<'a> {
    streams: &'a mut [UniformStream],
}

impl Stepper for FirstReaction<'_> {
    #[inline]
    fn step(&mut self, rates: &[f64], _total: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (j, (stream, &g)) in self.streams.iter_mut().zip(rates).enumerate() {
            // Drawn unconditionally so stream positions depend only on the step count.
            let u = stream.next_uniform();
            if g > 0.0 {
                let dt = -u.ln() / g;
                if dt < best.0 {
                    best = (dt, j);
                }
            }
        }
        best
    }
}

struct Mnrm<'a> {
    streams: &'a mut [UniformStream],
    /// Internal time of each channel's unit-rate process.
    internal: Vec<f64>,
    /// Next firing time of each channel's unit-rate process.
    next_fire: Vec<f64>,
}

impl<'a> Mnrm<'a> {
    fn new(streams: &'a mut [UniformStream]) -> Self {
        let next_fire = streams.iter_mut().map(|s| -s.next_uniform().ln()).collect();
        Self {
            internal: vec![0.0; streams.len()],
            next_fire,
            streams,
        }
    }
}

impl Stepper for Mnrm<'_> {
    #[inline]
    fn step(&mut self, rates: &[f64], _total: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (j, &a) in rates.iter().enumerate() {
            if a > 0.0 {
                let dt = (self.next_fire[j] - self.internal[j]) / a;
                if dt < best.0 {
                    best = (dt, j);
                }
            }
        }
        let (dt, s) = best;
        if dt.is_finite() {
            for (tj, &a) in self.internal.iter_mut().zip(rates) {
                *tj += a * dt;
            }
            self.next_fire[s] -= self.streams[s].next_uniform().ln();
        }
        best
    }
}

fn run<S: Stepper, O: PathObserver>(
    bound: &BoundModel<'_>,
    stepper: &mut S,
    opts: &SimOptions,
    obs: &mut O,
) -> Result<Outcome, SimError> {
    if !(opts.horizon > 0.0) {
        return Err(SimError::BadHorizon(opts.horizon));
    }
    let model = bound.model();
    let mut counts: Vec<u32> = model.initial_state().counts().to_vec();
    let mut rates = vec![0.0; model.n_channels()];
    let mut t = 0.0;
    let mut events = 0u64;
    obs.start(&counts);

    let finish = |reason, events, last_jump| Ok(Outcome { reason, events, last_jump });
    if opts.stop.as_ref().is_some_and(|r| r.holds(&counts, t)) {
        return finish(TerminalReason::StopRuleMet, 0, 0.0);
    }
    loop {
        let total = bound.rates_into(&counts, &mut rates)?;
        if total <= 0.0 {
            return finish(TerminalReason::Absorbed, events, t);
        }
        let (dt, ch) = stepper.step(&rates, total);
        if !dt.is_finite() {
            return finish(TerminalReason::Absorbed, events, t);
        }
        let next_t = t + dt;
        if next_t > opts.horizon {
            return finish(TerminalReason::HorizonReached, events, t);
        }
        if events >= opts.event_cap {
            return Err(SimError::EventCapExceeded(opts.event_cap));
        }
        let channel = &model.channels()[ch];
        let (src, dst) = (channel.source.0, channel.target.0);
        if counts[src] == 0 {
            return Err(ModelError::ImpossibleTransition {
                from: src,
                target: dst,
                state: State(counts),
            }
            .into());
        }
        counts[src] -= 1;
        counts[dst] += 1;
        t = next_t;
        events += 1;
        obs.jump(t, ch, &counts);
        if opts.stop.as_ref().is_some_and(|r| r.holds(&counts, t)) {
            return finish(TerminalReason::StopRuleMet, events, t);
        }
        if t >= opts.horizon {
            return finish(TerminalReason::HorizonReached, events, t);
        }
    }
}

/// Runs one path of `kind` from explicit streams (one per seed slot).
pub fn simulate_streams<O: PathObserver>(
    kind: RepresentationKind,
    bound: &BoundModel<'_>,
    streams: &mut [UniformStream],
    opts: &SimOptions,
    obs: &mut O,
) -> Result<Outcome, SimError> {
    let expected = kind.seed_slots(bound.model().n_channels());
    if streams.len() != expected {
        return Err(RngError::SlotCount {
            expected,
            got: streams.len(),
        }
        .into());
    }
    match kind {
        RepresentationKind::DirectSingleStream => {
            run(bound, &mut DirectSingle { stream: &mut streams[0] }, opts, obs)
        }
        RepresentationKind::DirectTwoStream => {
            let (a, b) = streams.split_at_mut(1);
            let mut stepper = DirectTwo {
                times: &mut a[0],
                choices: &mut b[0],
            };
            run(bound, &mut stepper, opts, obs)
        }
        RepresentationKind::FirstReaction => run(bound, &mut FirstReaction { streams }, opts, obs),
        RepresentationKind::Mnrm => run(bound, &mut Mnrm::new(streams), opts, obs),
    }
}

/// Runs one path of `kind` driven by `seeds`.
pub fn simulate<O: PathObserver>(
    kind: RepresentationKind,
    bound: &BoundModel<'_>,
    seeds: &SeedVector,
    opts: &SimOptions,
    obs: &mut O,
) -> Result<Outcome, SimError> {
    seeds.expect_len(kind.seed_slots(bound.model().n_channels()))?;
    let mut streams = seeds.streams();
    simulate_streams(kind, bound, &mut streams, opts, obs)
}

/// Runs one path and records it.
pub fn trajectory(
    kind: RepresentationKind,
    model: &ModelGraph,
    theta: &ParameterPoint,
    seeds: &SeedVector,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    let bound = model.bind(theta);
    let mut rec = Recorder::default();
    let out = simulate(kind, &bound, seeds, opts, &mut rec)?;
    Ok(Trajectory {
        jump_times: rec.jump_times,
        channels: rec.channels,
        states: rec.states,
        terminal: out.reason,
    })
}

fn record_with_streams(
    kind: RepresentationKind,
    model: &ModelGraph,
    theta: &ParameterPoint,
    streams: &mut [UniformStream],
    horizon: f64,
) -> Result<Trajectory, SimError> {
    let bound = model.bind(theta);
    let mut rec = Recorder::default();
    let out = simulate_streams(kind, &bound, streams, &SimOptions::until(horizon), &mut rec)?;
    Ok(Trajectory {
        jump_times: rec.jump_times,
        channels: rec.channels,
        states: rec.states,
        terminal: out.reason,
    })
}

/// Classical direct method on a single stream.
pub fn gillespie_direct(
    model: &ModelGraph,
    theta: &ParameterPoint,
    stream: &mut UniformStream,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    record_with_streams(
        RepresentationKind::DirectSingleStream,
        model,
        theta,
        std::slice::from_mut(stream),
        horizon,
    )
}

/// Direct method with separate jump-time and channel-choice streams.
pub fn gillespie_two_stream(
    model: &ModelGraph,
    theta: &ParameterPoint,
    seeds: &SeedVector,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    trajectory(RepresentationKind::DirectTwoStream, model, theta, seeds, &SimOptions::until(horizon))
}

/// First reaction method with one stream per channel.
pub fn first_reaction(
    model: &ModelGraph,
    theta: &ParameterPoint,
    seeds: &SeedVector,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    trajectory(RepresentationKind::FirstReaction, model, theta, seeds, &SimOptions::until(horizon))
}

/// Modified next reaction method with one stream per channel.
pub fn mnrm(
    model: &ModelGraph,
    theta: &ParameterPoint,
    seeds: &SeedVector,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    trajectory(RepresentationKind::Mnrm, model, theta, seeds, &SimOptions::until(horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_competing, build_pure_death, build_seiarhd, build_sir, seiarhd_nominal};
    use crate::rng::SeedVector;

    fn seeds(n: usize, base: u64) -> SeedVector {
        SeedVector::new((0..n as u64).map(|k| base + 7919 * k).collect()).unwrap()
    }

    fn pure_death_theta(m: &ModelGraph) -> ParameterPoint {
        ParameterPoint::from_named(m, [("gamma", 1.0)]).unwrap()
    }

    #[test]
    fn single_individual_dies_once_under_every_representation() {
        let m = build_pure_death(1).unwrap();
        let th = pure_death_theta(&m);
        for kind in RepresentationKind::ALL {
            let z = seeds(kind.seed_slots(1), 11);
            let tr = trajectory(kind, &m, &th, &z, &SimOptions::default()).unwrap();
            assert_eq!(tr.n_jumps(), 1, "{kind}");
            assert_eq!(tr.terminal, TerminalReason::Absorbed);
            assert_eq!(tr.final_state(), &State(vec![0, 1]));
        }
    }

    #[test]
    fn no_infection_means_immediate_absorption() {
        let m = build_seiarhd(2005, State(vec![2000, 0, 0, 0, 0, 5, 0])).unwrap();
        let th = seiarhd_nominal(&m);
        for kind in RepresentationKind::ALL {
            let z = seeds(kind.seed_slots(9), 3);
            let tr = trajectory(kind, &m, &th, &z, &SimOptions::default()).unwrap();
            assert_eq!(tr.n_jumps(), 0);
            assert_eq!(tr.terminal, TerminalReason::Absorbed);
        }
    }

    #[test]
    fn mnrm_draws_nothing_after_initialization_when_absorbed() {
        let m = build_pure_death(0).unwrap();
        let th = pure_death_theta(&m);
        let bound = m.bind(&th);
        let mut streams = seeds(1, 5).streams();
        simulate_streams(RepresentationKind::Mnrm, &bound, &mut streams, &SimOptions::default(), &mut ())
            .unwrap();
        assert_eq!(streams[0].draw_count(), 1);
    }

    #[test]
    fn stream_consumption_per_representation() {
        let m = build_sir(100, 5).unwrap();
        let th = ParameterPoint::from_named(&m, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
        let bound = m.bind(&th);
        let opts = SimOptions::default();

        let mut s = seeds(2, 17).streams();
        let out =
            simulate_streams(RepresentationKind::DirectTwoStream, &bound, &mut s, &opts, &mut ()).unwrap();
        assert_eq!(s[0].draw_count(), out.events);
        assert_eq!(s[1].draw_count(), out.events);

        let mut s = seeds(2, 17).streams();
        let out =
            simulate_streams(RepresentationKind::FirstReaction, &bound, &mut s, &opts, &mut ()).unwrap();
        // Every channel draws on every step, including ones whose rate is zero.
        assert_eq!(s[0].draw_count(), out.events);
        assert_eq!(s[1].draw_count(), out.events);

        let mut s = seeds(2, 17).streams();
        let mut rec = Recorder::default();
        let out = simulate_streams(RepresentationKind::Mnrm, &bound, &mut s, &opts, &mut rec).unwrap();
        let fired = |c| rec.channels.iter().filter(|&&x| x == c).count() as u64;
        assert_eq!(s[0].draw_count(), 1 + fired(0));
        assert_eq!(s[1].draw_count(), 1 + fired(1));
        assert_eq!(fired(0) + fired(1), out.events);

        let mut s = seeds(1, 17).streams();
        let out = simulate_streams(RepresentationKind::DirectSingleStream, &bound, &mut s, &opts, &mut ())
            .unwrap();
        assert_eq!(s[0].draw_count(), 2 * out.events);
    }

    #[test]
    fn only_enabled_channel_fires() {
        // Only H is occupied: H->R and H->D are the only positive rates.
        let m = build_seiarhd(10, State(vec![0, 0, 0, 0, 10, 0, 0])).unwrap();
        let mut th = seiarhd_nominal(&m).values().to_vec();
        th[8] = 0.0; // p_HD = 0 leaves H->R (index 7) alone.
        let th = ParameterPoint::from_values(th);
        for kind in RepresentationKind::ALL {
            let z = seeds(kind.seed_slots(9), 41);
            let tr = trajectory(kind, &m, &th, &z, &SimOptions::default()).unwrap();
            assert_eq!(tr.n_jumps(), 10);
            assert!(tr.channels.iter().all(|&c| c == 7), "{kind}: {:?}", tr.channels);
        }
    }

    #[test]
    fn deterministic_replay_and_invariants() {
        let m = build_seiarhd(2005, crate::models::seiarhd_initial_state()).unwrap();
        let th = seiarhd_nominal(&m);
        for kind in RepresentationKind::ALL {
            let z = seeds(kind.seed_slots(9), 1234);
            let a = trajectory(kind, &m, &th, &z, &SimOptions::until(60.0)).unwrap();
            let b = trajectory(kind, &m, &th, &z, &SimOptions::until(60.0)).unwrap();
            assert_eq!(a, b);
            assert!(a.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert!(a.jump_times.iter().all(|&t| t > 0.0 && t <= 60.0));
            for (k, st) in a.states.iter().enumerate() {
                assert_eq!(st.total(), 2005);
                if k > 0 {
                    let ch = &m.channels()[a.channels[k - 1]];
                    let prev = &a.states[k - 1];
                    let diff: Vec<i64> = st.0.iter().zip(&prev.0).map(|(x, y)| *x as i64 - *y as i64).collect();
                    let jump: Vec<i64> = ch.jump.iter().map(|&u| u as i64).collect();
                    assert_eq!(diff, jump);
                }
            }
        }
    }

    #[test]
    fn horizon_truncates_a_prefix_of_the_unbounded_path() {
        let m = build_sir(100, 5).unwrap();
        let th = ParameterPoint::from_named(&m, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
        for kind in RepresentationKind::ALL {
            let z = seeds(kind.seed_slots(2), 99);
            let full = trajectory(kind, &m, &th, &z, &SimOptions::default()).unwrap();
            let cut = trajectory(kind, &m, &th, &z, &SimOptions::until(1.0)).unwrap();
            let k = cut.n_jumps();
            assert_eq!(&full.jump_times[..k], &cut.jump_times[..]);
            assert!(full.jump_times.get(k).is_none_or(|&t| t > 1.0));
        }
    }

    #[test]
    fn stop_rule_and_event_cap() {
        let m = build_pure_death(10).unwrap();
        let th = pure_death_theta(&m);
        let z = seeds(1, 8);
        let opts = SimOptions {
            stop: Some(StopRule::extinction(vec![CompartmentId(0)])),
            ..SimOptions::default()
        };
        let tr = trajectory(RepresentationKind::Mnrm, &m, &th, &z, &opts).unwrap();
        assert_eq!(tr.terminal, TerminalReason::StopRuleMet);
        assert_eq!(tr.n_jumps(), 10);

        let capped = SimOptions {
            event_cap: 3,
            ..SimOptions::default()
        };
        assert_eq!(
            trajectory(RepresentationKind::Mnrm, &m, &th, &z, &capped),
            Err(SimError::EventCapExceeded(3))
        );
        assert!(trajectory(RepresentationKind::Mnrm, &m, &th, &seeds(2, 8), &opts).is_err());
    }

    #[test]
    fn path_sampling_is_right_continuous() {
        let m = build_pure_death(10).unwrap();
        let th = pure_death_theta(&m);
        let tr = first_reaction(&m, &th, &seeds(1, 21), f64::INFINITY).unwrap();
        let t1 = tr.jump_times[0];
        let grid = [0.0, t1 * 0.5, t1, 1e9];
        let path = sample_path(&tr, &grid);
        assert_eq!(path[0], State(vec![10, 0]));
        assert_eq!(path[1], State(vec![10, 0]));
        assert_eq!(path[2], State(vec![9, 1]));
        assert_eq!(path[3], State(vec![0, 10]));
    }

    #[test]
    fn wrappers_agree_with_generic_entry_point() {
        let m = build_sir(100, 5).unwrap();
        let th = ParameterPoint::from_named(&m, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
        let z = seeds(2, 500);
        let opts = SimOptions::until(5.0);
        assert_eq!(
            gillespie_two_stream(&m, &th, &z, 5.0).unwrap(),
            trajectory(RepresentationKind::DirectTwoStream, &m, &th, &z, &opts).unwrap()
        );
        assert_eq!(
            mnrm(&m, &th, &z, 5.0).unwrap(),
            trajectory(RepresentationKind::Mnrm, &m, &th, &z, &opts).unwrap()
        );
        let mut s = UniformStream::from_seed(500).unwrap();
        assert_eq!(
            gillespie_direct(&m, &th, &mut s, 5.0).unwrap(),
            trajectory(RepresentationKind::DirectSingleStream, &m, &th, &seeds(1, 500), &opts).unwrap()
        );
    }

    #[test]
    fn channel_selection_uses_half_open_intervals() {
        let rates = [0.0, 1.0, 0.0, 3.0];
        assert_eq!(select_channel(&rates, 4.0, 0.0), 1);
        assert_eq!(select_channel(&rates, 4.0, 0.2499), 1);
        assert_eq!(select_channel(&rates, 4.0, 0.25), 3);
        assert_eq!(select_channel(&rates, 4.0, 0.9999999), 3);
    }

    #[test]
    fn competing_clocks_model_builds() {
        assert!(build_competing(1).is_ok());
    }
}
