//! Event-driven simulation of one play of the game.
//!
//! All agents move at piecewise-constant velocities, so the time of every
//! state change — the attacker reaching the edge of the blocker's interval,
//! a gap between defenders closing, a scheduled attacker switch — is a
//! closed-form root. The engine advances from event to event with no
//! discretization error, which is what lets the critical circumference be
//! decided exactly instead of by tolerance luck.
//!
//! [`fixed_step_simulate`] is a deliberately plain Euler integrator with
//! per-step policy re-evaluation and coverage checks. It exists as an
//! independent oracle for cross-validating the event engine.

use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{wrap, wrap_value, Direction, CONTACT_EPS};
use crate::model::{AgentState, AttackerStrategy, GameState, ModelError, ScenarioParams};
use crate::strategy::{self, DirectionAssignment, StrategyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("event cap {cap} exceeded at t={time}: configuration appears to cycle")]
    EventCapExceeded { cap: u64, time: f64 },
    #[error("game decided at t={time}, before the requested instant")]
    GameDecided { time: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// What happened at one instant of the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Blocking role transferred to the touching neighbor.
    Handoff,
    /// Attacker reached an uncovered point; attacker wins.
    Breach,
    /// Scheduled attacker direction flip.
    AttackerSwitch,
    /// A gap between consecutive defenders reached zero.
    GapClosed,
    /// A closed gap started reopening.
    GapOpened,
    /// Simulation horizon reached without a breach.
    HorizonReached,
}

impl EventKind {
    /// Tie order for simultaneous events.
    fn rank(self) -> u8 {
        match self {
            EventKind::Breach => 0,
            EventKind::Handoff => 1,
            EventKind::GapClosed => 2,
            EventKind::GapOpened => 3,
            EventKind::AttackerSwitch => 4,
            EventKind::HorizonReached => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EventKind::Handoff => "handoff",
            EventKind::Breach => "breach",
            EventKind::AttackerSwitch => "attacker_switch",
            EventKind::GapClosed => "gap_closed",
            EventKind::GapOpened => "gap_opened",
            EventKind::HorizonReached => "horizon",
        }
    }
}

/// Who an event is about. Defender and gap indices are 0-based here and
/// rendered 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventSubject {
    Attacker,
    Defender(usize),
    Gap(usize, usize),
    Clock,
}

impl std::fmt::Display for EventSubject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventSubject::Attacker => write!(f, "attacker"),
            EventSubject::Defender(i) => write!(f, "defender_{}", i + 1),
            EventSubject::Gap(i, j) => write!(f, "gap_{}_{}", i + 1, j + 1),
            EventSubject::Clock => write!(f, "clock"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub subject: EventSubject,
    pub snapshot: GameState,
}

/// Final outcome of a play.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Breach { time: f64, position: f64 },
    Defended { time: f64, steady_state: bool },
}

impl Verdict {
    pub fn is_breach(&self) -> bool {
        matches!(self, Verdict::Breach { .. })
    }

    pub fn breach(&self) -> Option<(f64, f64)> {
        match self {
            Verdict::Breach { time, position } => Some((*time, *position)),
            Verdict::Defended { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub verdict: Verdict,
    /// Snapshot at t = 0, after the defender policy has been applied.
    pub initial: GameState,
    pub events: Vec<Event>,
}

/// Knobs for one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSettings {
    pub horizon: f64,
    /// Abort after this many events; a healthy play settles long before.
    pub event_cap: u64,
    /// Declare the defense successful as soon as the blocker-relative gap
    /// profile repeats at two consecutive handoffs (a periodic orbit cannot
    /// breach later).
    pub detect_steady_state: bool,
    /// Keep per-event snapshots. Off for bulk searches.
    pub record_trace: bool,
}

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000;

impl SimSettings {
    pub fn for_params(params: &ScenarioParams) -> Self {
        SimSettings {
            horizon: default_horizon(params),
            event_cap: DEFAULT_EVENT_CAP,
            detect_steady_state: true,
            record_trace: true,
        }
    }
}

/// Ten relative circumnavigations: any winnable constant-direction attack
/// manifests well within one.
pub fn default_horizon(params: &ScenarioParams) -> f64 {
    10.0 * params.circumference / (params.attacker_speed - params.defender_speed)
}

struct Core<'a> {
    params: &'a ScenarioParams,
    strategy: &'a AttackerStrategy,
    c: f64,
    n: usize,
    d: f64,
    va: f64,
    t: f64,
    att: f64,
    dir_a: Direction,
    pos: Vec<f64>,
    cmd: Vec<Direction>,
    vel: Vec<f64>,
    blocker: usize,
    switch_idx: usize,
    contact: Vec<bool>,
    prev_handoff_sig: Option<Vec<f64>>,
    events_seen: u64,
}

enum Pending {
    Edge { handoff: bool },
    GapClosed(usize),
    Switch,
    Horizon,
}

struct Step {
    events: Vec<Event>,
    verdict: Option<Verdict>,
}

impl<'a> Core<'a> {
    fn new(
        params: &'a ScenarioParams,
        initial: &GameState,
        strategy: &'a AttackerStrategy,
        assignment: Option<&DirectionAssignment>,
    ) -> Result<Self, EngineError> {
        params.ensure_valid()?;
        initial.validate(params)?;
        let n = initial.defender_count();
        let dir_a = strategy.direction_at(initial.time);
        let mut core = Core {
            params,
            strategy,
            c: params.circumference,
            n,
            d: params.clamped_defense_length(),
            va: params.attacker_speed,
            t: initial.time,
            att: initial.attacker.position.value(),
            dir_a,
            pos: initial.defenders.iter().map(|a| a.position.value()).collect(),
            cmd: vec![dir_a; n],
            vel: vec![0.0; n],
            blocker: initial.blocker_index,
            switch_idx: strategy
                .switch_times()
                .iter()
                .take_while(|s| **s <= initial.time)
                .count(),
            contact: vec![false; n],
            prev_handoff_sig: None,
            events_seen: 0,
        };
        match assignment {
            Some(a) => {
                core.blocker = a.blocker_index;
                core.cmd.copy_from_slice(&a.directions);
                let gaps = core.gaps()?;
                core.vel = strategy::effective_velocities(&gaps, &core.commanded());
                core.init_contacts(&gaps);
            }
            None => {
                // at a touch point the blocker is whoever extends forward
                core.blocker = strategy::resolve_blocker(initial, params, dir_a)?;
                let gaps = core.refresh(&mut Vec::new())?;
                core.init_contacts(&gaps);
            }
        }
        Ok(core)
    }

    fn commanded(&self) -> Vec<f64> {
        self.cmd
            .iter()
            .map(|d| d.signum() * self.params.defender_speed)
            .collect()
    }

    fn init_contacts(&mut self, gaps: &[f64]) {
        if self.n >= 2 {
            #[allow(clippy::needless_range_loop)] // cyclic neighbor indexing
            for i in 0..self.n {
                let rate = self.vel[(i + 1) % self.n] - self.vel[i];
                self.contact[i] = gaps[i] <= CONTACT_EPS && rate <= 0.0;
            }
        }
    }

    fn gaps(&self) -> Result<Vec<f64>, EngineError> {
        gaps_of(&self.pos, self.d, self.c)
    }

    /// Re-apply the defender policy and the hold rule; emit reopenings.
    fn refresh(&mut self, opened: &mut Vec<usize>) -> Result<Vec<f64>, EngineError> {
        for (i, slot) in self.cmd.iter_mut().enumerate() {
            *slot = if i == self.blocker { self.dir_a } else { self.dir_a.flipped() };
        }
        let gaps = self.gaps()?;
        self.vel = strategy::effective_velocities(&gaps, &self.commanded());
        if self.n >= 2 {
            for i in 0..self.n {
                let rate = self.vel[(i + 1) % self.n] - self.vel[i];
                if self.contact[i] && rate > 0.0 {
                    self.contact[i] = false;
                    opened.push(i);
                }
            }
        }
        Ok(gaps)
    }

    fn advance_to(&mut self, time: f64) {
        let dt = time - self.t;
        if dt > 0.0 {
            self.att = wrap_value(self.att + self.dir_a.signum() * self.va * dt, self.c);
            for (p, v) in self.pos.iter_mut().zip(&self.vel) {
                *p = wrap_value(*p + v * dt, self.c);
            }
        }
        self.t = time;
    }

    fn leading_edge(&self) -> f64 {
        wrap_value(self.pos[self.blocker] + self.dir_a.signum() * self.d / 2.0, self.c)
    }

    /// Gap index just beyond the blocker in the attacker's direction.
    fn leading_gap(&self) -> usize {
        match self.dir_a {
            Direction::Positive => self.blocker,
            Direction::Negative => (self.blocker + self.n - 1) % self.n,
        }
    }

    fn neighbor_ahead(&self) -> usize {
        match self.dir_a {
            Direction::Positive => (self.blocker + 1) % self.n,
            Direction::Negative => (self.blocker + self.n - 1) % self.n,
        }
    }

    fn snapshot(&self) -> GameState {
        let defenders = (0..self.n)
            .map(|i| AgentState {
                position: wrap(self.pos[i], self.c).expect("positions stay finite"),
                direction: self.cmd[i],
                speed: self.vel[i].abs(),
            })
            .collect();
        GameState {
            time: self.t,
            attacker: AgentState {
                position: wrap(self.att, self.c).expect("positions stay finite"),
                direction: self.dir_a,
                speed: self.va,
            },
            defenders,
            blocker_index: self.blocker,
        }
    }

    /// Earliest upcoming event under the current velocities.
    fn peek(&self, horizon: f64) -> Result<(f64, Pending), EngineError> {
        let gaps = self.gaps()?;
        let mut best_time = horizon.max(self.t);
        let mut best_rank = EventKind::HorizonReached.rank();
        let mut best = Pending::Horizon;

        let mut consider = |time: f64, rank: u8, pending: Pending| {
            if time < best_time || (time == best_time && rank < best_rank) {
                best_time = time;
                best_rank = rank;
                best = pending;
            }
        };

        // attacker reaches the blocker's leading interval edge
        let skip_edge = self.n == 1 && self.c - self.d <= CONTACT_EPS;
        if !skip_edge {
            let raw = match self.dir_a {
                Direction::Positive => wrap_value(self.leading_edge() - self.att, self.c),
                Direction::Negative => wrap_value(self.att - self.leading_edge(), self.c),
            };
            // the attacker never truly leads the edge by more than dust; a
            // near-full wrap means rounding put it an ulp past the edge
            let arc = if raw >= self.c - CONTACT_EPS { 0.0 } else { raw };
            let approach = self.va - self.dir_a.signum() * self.vel[self.blocker];
            let dt = arc / approach;
            let time = self.t + dt;
            let gi = self.leading_gap();
            let gap_at_edge = if self.n == 1 {
                self.c - self.d
            } else {
                let rate = self.vel[(gi + 1) % self.n] - self.vel[gi];
                gaps[gi] + rate * dt
            };
            let handoff = self.n > 1 && gap_at_edge <= CONTACT_EPS;
            let kind = if handoff { EventKind::Handoff } else { EventKind::Breach };
            consider(time, kind.rank(), Pending::Edge { handoff });
        }

        // gaps closing between approaching defenders
        if self.n >= 2 {
            #[allow(clippy::needless_range_loop)] // cyclic neighbor indexing
            for i in 0..self.n {
                let rate = self.vel[(i + 1) % self.n] - self.vel[i];
                if gaps[i] > CONTACT_EPS && rate < 0.0 {
                    let time = self.t + gaps[i] / (-rate);
                    consider(time, EventKind::GapClosed.rank(), Pending::GapClosed(i));
                }
            }
        }

        // scheduled attacker switch
        if let Some(&s) = self.strategy.switch_times().get(self.switch_idx) {
            consider(s.max(self.t), EventKind::AttackerSwitch.rank(), Pending::Switch);
        }

        Ok((best_time, best))
    }

    fn emit(
        &mut self,
        out: &mut Vec<Event>,
        record: bool,
        kind: EventKind,
        subject: EventSubject,
    ) {
        self.events_seen += 1;
        if record {
            out.push(Event { time: self.t, kind, subject, snapshot: self.snapshot() });
        }
    }

    fn gap_subject(&self, i: usize) -> EventSubject {
        EventSubject::Gap(i, (i + 1) % self.n)
    }

    /// Blocker-relative gap profile, walked in the attacker's direction.
    fn handoff_signature(&self) -> Result<Vec<f64>, EngineError> {
        let gaps = self.gaps()?;
        let mut sig = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let idx = match self.dir_a {
                Direction::Positive => (self.blocker + k) % self.n,
                Direction::Negative => (self.blocker + 2 * self.n - 1 - k) % self.n,
            };
            sig.push(gaps[idx]);
        }
        Ok(sig)
    }

    /// Process the earliest event; returns the emitted events and, when the
    /// game is decided, the verdict.
    fn step(&mut self, settings: &SimSettings) -> Result<Step, EngineError> {
        let record = settings.record_trace;
        let (time, pending) = self.peek(settings.horizon)?;
        let mut events = Vec::new();
        let mut verdict = None;
        self.advance_to(time);
        match pending {
            Pending::Edge { handoff: false } => {
                self.att = self.leading_edge();
                self.emit(&mut events, record, EventKind::Breach, EventSubject::Attacker);
                verdict = Some(Verdict::Breach { time: self.t, position: self.att });
            }
            Pending::Edge { handoff: true } => {
                self.att = self.leading_edge();
                self.blocker = self.neighbor_ahead();
                self.emit(&mut events, record, EventKind::Handoff, EventSubject::Defender(self.blocker));
                let mut opened = Vec::new();
                self.refresh(&mut opened)?;
                for i in opened {
                    let subject = self.gap_subject(i);
                    self.emit(&mut events, record, EventKind::GapOpened, subject);
                }
                if settings.detect_steady_state && self.switch_idx == self.strategy.switch_times().len() {
                    let sig = self.handoff_signature()?;
                    if let Some(prev) = &self.prev_handoff_sig {
                        let recurring = prev
                            .iter()
                            .zip(&sig)
                            .all(|(a, b)| (a - b).abs() <= CONTACT_EPS);
                        if recurring {
                            verdict = Some(Verdict::Defended { time: self.t, steady_state: true });
                        }
                    }
                    self.prev_handoff_sig = Some(sig);
                }
            }
            Pending::GapClosed(i) => {
                self.contact[i] = true;
                let subject = self.gap_subject(i);
                self.emit(&mut events, record, EventKind::GapClosed, subject);
                let mut opened = Vec::new();
                self.refresh(&mut opened)?;
                for i in opened {
                    let subject = self.gap_subject(i);
                    self.emit(&mut events, record, EventKind::GapOpened, subject);
                }
            }
            Pending::Switch => {
                self.dir_a = self.dir_a.flipped();
                self.switch_idx += 1;
                self.prev_handoff_sig = None;
                // at a touch point the blocking role follows the new heading
                let snap = self.snapshot();
                self.blocker = strategy::resolve_blocker(&snap, self.params, self.dir_a)?;
                self.emit(&mut events, record, EventKind::AttackerSwitch, EventSubject::Attacker);
                let mut opened = Vec::new();
                self.refresh(&mut opened)?;
                for i in opened {
                    let subject = self.gap_subject(i);
                    self.emit(&mut events, record, EventKind::GapOpened, subject);
                }
            }
            Pending::Horizon => {
                self.emit(&mut events, record, EventKind::HorizonReached, EventSubject::Clock);
                verdict = Some(Verdict::Defended { time: self.t, steady_state: false });
            }
        }
        Ok(Step { events, verdict })
    }
}

fn gaps_of(pos: &[f64], d: f64, c: f64) -> Result<Vec<f64>, EngineError> {
    let n = pos.len();
    if n == 1 {
        return Ok(vec![c - d]);
    }
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        let j = (i + 1) % n;
        let raw = wrap_value(pos[j] - pos[i] - d, c);
        if raw >= c - CONTACT_EPS {
            gaps.push(0.0);
        } else if raw <= c - 2.0 * d + CONTACT_EPS {
            gaps.push(raw);
        } else {
            return Err(ModelError::Coordination { first: i + 1, second: j + 1, depth: c - raw }.into());
        }
    }
    Ok(gaps)
}

/// Run one play from `initial` under the coordinated defender policy and the
/// given attacker schedule. Deterministic; applies the policy after every
/// event.
pub fn simulate(
    params: &ScenarioParams,
    initial: &GameState,
    strategy: &AttackerStrategy,
    settings: &SimSettings,
) -> Result<SimOutcome, EngineError> {
    if !settings.horizon.is_finite() || settings.horizon < 0.0 {
        return Err(EngineError::BadHorizon(settings.horizon));
    }
    let mut core = Core::new(params, initial, strategy, None)?;
    let start = core.snapshot();
    let mut events = Vec::new();
    loop {
        if core.events_seen >= settings.event_cap {
            return Err(EngineError::EventCapExceeded { cap: settings.event_cap, time: core.t });
        }
        let mut step = core.step(settings)?;
        events.append(&mut step.events);
        if let Some(verdict) = step.verdict {
            return Ok(SimOutcome { verdict, initial: start, events });
        }
    }
}

/// State at `time`, obtained by running events up to it and interpolating
/// the final constant-velocity segment. Errs if the game is decided first.
pub fn simulate_until(
    params: &ScenarioParams,
    initial: &GameState,
    strategy: &AttackerStrategy,
    time: f64,
) -> Result<GameState, EngineError> {
    if !time.is_finite() || time < initial.time {
        return Err(EngineError::BadHorizon(time));
    }
    let settings = SimSettings {
        horizon: time,
        event_cap: DEFAULT_EVENT_CAP,
        detect_steady_state: false,
        record_trace: false,
    };
    let mut core = Core::new(params, initial, strategy, None)?;
    loop {
        if core.events_seen >= settings.event_cap {
            return Err(EngineError::EventCapExceeded { cap: settings.event_cap, time: core.t });
        }
        let step = core.step(&settings)?;
        match step.verdict {
            Some(Verdict::Defended { .. }) => return Ok(core.snapshot()),
            Some(Verdict::Breach { time: t, .. }) => return Err(EngineError::GameDecided { time: t }),
            None => {}
        }
    }
}

/// The single earliest event from `state` under explicitly given defender
/// assignments (no policy re-derivation before it fires).
pub fn next_event(
    params: &ScenarioParams,
    state: &GameState,
    strategy: &AttackerStrategy,
    assignment: &DirectionAssignment,
    horizon: f64,
) -> Result<Event, EngineError> {
    let mut core = Core::new(params, state, strategy, Some(assignment))?;
    let settings = SimSettings {
        horizon,
        event_cap: DEFAULT_EVENT_CAP,
        detect_steady_state: false,
        record_trace: true,
    };
    let step = core.step(&settings)?;
    let time = core.t;
    step.events.into_iter().next().ok_or(EngineError::EventCapExceeded {
        cap: settings.event_cap,
        time,
    })
}

/// Euler-stepped reference engine: every `dt` it re-evaluates the policy,
/// moves everyone (defenders stop exactly at contact within the step, the
/// attacker honors switch times exactly), and checks coverage. Verdict
/// semantics match [`simulate`]; breach times are grid-quantized.
pub fn fixed_step_simulate(
    params: &ScenarioParams,
    initial: &GameState,
    strategy: &AttackerStrategy,
    dt: f64,
    horizon: f64,
) -> Result<SimOutcome, EngineError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(EngineError::BadTimeStep(dt));
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(EngineError::BadHorizon(horizon));
    }
    params.ensure_valid()?;
    initial.validate(params)?;

    let c = params.circumference;
    let d = params.clamped_defense_length();
    let v = params.defender_speed;
    let va = params.attacker_speed;
    let n = initial.defender_count();
    let mut att = initial.attacker.position.value();
    let mut pos: Vec<f64> = initial.defenders.iter().map(|a| a.position.value()).collect();
    let mut blocker = strategy::resolve_blocker(initial, params, strategy.direction_at(0.0))?;

    let snapshot = |t: f64, att: f64, pos: &[f64], blocker: usize, dir_a: Direction| GameState {
        time: t,
        attacker: AgentState {
            position: wrap(att, c).expect("finite"),
            direction: dir_a,
            speed: va,
        },
        defenders: pos
            .iter()
            .enumerate()
            .map(|(i, p)| AgentState {
                position: wrap(*p, c).expect("finite"),
                direction: if i == blocker { dir_a } else { dir_a.flipped() },
                speed: v,
            })
            .collect(),
        blocker_index: blocker,
    };

    let covered_by = |att: f64, pos: &[f64], i: usize| -> bool {
        let arc = wrap_value(att - (pos[i] - d / 2.0), c);
        arc <= d + CONTACT_EPS || arc >= c - CONTACT_EPS
    };

    let start = snapshot(0.0, att, &pos, blocker, strategy.direction_at(0.0));
    let mut step_index: u64 = 0;
    loop {
        let t = (step_index as f64 * dt).min(horizon);
        let dir_a = strategy.direction_at(t);

        // coverage check and blocker resolution at the grid instant
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if covered_by(att, &pos, i) {
                let edge = match dir_a {
                    Direction::Positive => pos[i] + d / 2.0 - att,
                    Direction::Negative => att - (pos[i] - d / 2.0),
                };
                let forward = wrap_value(edge, c);
                let forward = if forward > c - 2.0 * CONTACT_EPS { 0.0 } else { forward };
                if best.is_none_or(|(_, f)| forward > f) {
                    best = Some((i, forward));
                }
            }
        }
        match best {
            Some((i, _)) => blocker = i,
            None => {
                let verdict = Verdict::Breach { time: t, position: wrap_value(att, c) };
                let event = Event {
                    time: t,
                    kind: EventKind::Breach,
                    subject: EventSubject::Attacker,
                    snapshot: snapshot(t, att, &pos, blocker, dir_a),
                };
                return Ok(SimOutcome { verdict, initial: start, events: vec![event] });
            }
        }

        if t >= horizon {
            let verdict = Verdict::Defended { time: horizon, steady_state: false };
            let event = Event {
                time: horizon,
                kind: EventKind::HorizonReached,
                subject: EventSubject::Clock,
                snapshot: snapshot(horizon, att, &pos, blocker, dir_a),
            };
            return Ok(SimOutcome { verdict, initial: start, events: vec![event] });
        }
        let step = dt.min(horizon - t);

        // defenders: commanded by policy at the step start, stopping at contact
        let commanded: Vec<f64> = (0..n)
            .map(|i| if i == blocker { dir_a.signum() * v } else { -dir_a.signum() * v })
            .collect();
        let gaps = gaps_of(&pos, d, c)?;
        let vel = strategy::effective_velocities(&gaps, &commanded);

        // a thin gap can be narrower than one attacker step, so a point check
        // alone would hop it: test whether the attacker's path crosses the
        // covered chain's leading edge into open ground during this step
        if let Some(crossing) = chain_crossing(att, &pos, &gaps, &vel, blocker, dir_a, va, d, c, step)
        {
            let time = t + step;
            let verdict = Verdict::Breach { time, position: crossing };
            let event = Event {
                time,
                kind: EventKind::Breach,
                subject: EventSubject::Attacker,
                snapshot: snapshot(t, att, &pos, blocker, dir_a),
            };
            return Ok(SimOutcome { verdict, initial: start, events: vec![event] });
        }

        advance_defenders(&mut pos, &commanded, d, c, step)?;

        // attacker: exact integration across any switch times in the step
        let mut seg_start = t;
        let mut dir = dir_a;
        for &s in strategy.switch_times() {
            if s <= t {
                continue;
            }
            if s > t + step {
                break;
            }
            att = wrap_value(att + dir.signum() * va * (s - seg_start), c);
            dir = dir.flipped();
            seg_start = s;
        }
        att = wrap_value(att + dir.signum() * va * (t + step - seg_start), c);

        step_index += 1;
    }
}

/// If the attacker reaches the leading edge of the contiguous covered chain
/// ahead of it within `span`, and the gap beyond is open at that instant,
/// return the crossing position. Uses the step-start velocities.
#[allow(clippy::too_many_arguments)]
fn chain_crossing(
    att: f64,
    pos: &[f64],
    gaps: &[f64],
    vel: &[f64],
    blocker: usize,
    dir: Direction,
    va: f64,
    d: f64,
    c: f64,
    span: f64,
) -> Option<f64> {
    let n = pos.len();
    // walk through touching intervals to the end of the covered chain
    let mut last = blocker;
    let mut gap_index = None;
    if n == 1 {
        if c - d <= CONTACT_EPS {
            return None; // full ring
        }
    } else {
        let mut hops = 0;
        loop {
            let gi = match dir {
                Direction::Positive => last,
                Direction::Negative => (last + n - 1) % n,
            };
            if gaps[gi] > CONTACT_EPS {
                gap_index = Some(gi);
                break;
            }
            last = match dir {
                Direction::Positive => (last + 1) % n,
                Direction::Negative => (last + n - 1) % n,
            };
            hops += 1;
            if hops >= n {
                return None; // chain closes the whole ring
            }
        }
    }
    let edge = wrap_value(pos[last] + dir.signum() * d / 2.0, c);
    let raw = match dir {
        Direction::Positive => wrap_value(edge - att, c),
        Direction::Negative => wrap_value(att - edge, c),
    };
    let alpha = if raw >= c - CONTACT_EPS { 0.0 } else { raw };
    let approach = va - dir.signum() * vel[last];
    let tau = alpha / approach;
    if tau > span {
        return None;
    }
    let width = match gap_index {
        None => c - d,
        Some(gi) => {
            let rate = vel[(gi + 1) % n] - vel[gi];
            gaps[gi] + rate * tau
        }
    };
    if width > CONTACT_EPS {
        Some(wrap_value(edge + vel[last] * tau, c))
    } else {
        None
    }
}

/// Move defenders for `span` time at the commanded velocities, freezing any
/// motion that would push a gap below zero the instant contact occurs.
fn advance_defenders(
    pos: &mut [f64],
    commanded: &[f64],
    d: f64,
    c: f64,
    span: f64,
) -> Result<(), EngineError> {
    let n = pos.len();
    let mut remaining = span;
    for _ in 0..=n + 1 {
        let gaps = gaps_of(pos, d, c)?;
        let vel = strategy::effective_velocities(&gaps, commanded);
        let mut hit = remaining;
        if n >= 2 {
            for i in 0..n {
                let rate = vel[(i + 1) % n] - vel[i];
                if gaps[i] > CONTACT_EPS && rate < 0.0 {
                    hit = hit.min(gaps[i] / (-rate));
                }
            }
        }
        for (p, v) in pos.iter_mut().zip(&vel) {
            *p = wrap_value(*p + v * hit, c);
        }
        remaining -= hit;
        if remaining <= 0.0 {
            return Ok(());
        }
    }
    // n contacts at most can occur per step
    Ok(())
}

fn sig12(x: f64) -> String {
    format!("{:.11e}", x)
}

/// Trace export: one row per event, preceded by the initial snapshot.
/// Positions, times and gaps carry 12 significant digits.
pub fn write_trace_csv<W: Write>(
    w: &mut W,
    params: &ScenarioParams,
    outcome: &SimOutcome,
) -> io::Result<()> {
    let n = outcome.initial.defender_count();
    let mut header = String::from("time,event,subject,attacker_pos,attacker_dir");
    for i in 1..=n {
        header.push_str(&format!(",def{i}_pos,def{i}_dir"));
    }
    for i in 0..n {
        header.push_str(&format!(",gap_{}_{}", i + 1, (i + 1) % n + 1));
    }
    writeln!(w, "{header}")?;

    let mut row = |state: &GameState, event: &str, subject: String| -> io::Result<()> {
        let gaps = state
            .gaps(params.defense_length)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        let mut line = format!(
            "{},{},{},{},{}",
            sig12(state.time),
            event,
            subject,
            sig12(state.attacker.position.value()),
            state.attacker.direction
        );
        for agent in &state.defenders {
            line.push_str(&format!(",{},{}", sig12(agent.position.value()), agent.direction));
        }
        for g in gaps {
            line.push_str(&format!(",{}", sig12(g)));
        }
        writeln!(w, "{line}")
    };

    row(&outcome.initial, "start", "-".to_string())?;
    for event in &outcome.events {
        row(&event.snapshot, event.kind.label(), event.subject.to_string())?;
    }
    Ok(())
}
