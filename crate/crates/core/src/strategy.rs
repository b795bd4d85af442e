//! Defender coordination policy and attacker policies.
//!
//! The defender side plays one rule: the blocker moves with the attacker and
//! everyone else moves the opposite way to reinforce the ring ahead of it,
//! re-evaluated instantly whenever anything changes. Attackers are either
//! constant-direction or a finite switch schedule; `brute_force_attacker`
//! exhausts every schedule on a time grid and reports the earliest breach.

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{self, EngineError, SimSettings, Verdict};
use crate::geometry::{Direction, CONTACT_EPS};
use crate::model::{AttackerStrategy, GameState, ModelError, ScenarioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("attacker at {position} is covered by no defended interval; game already decided")]
    AttackerNotCovered { position: f64 },
    #[error("attacker at {position} is not at the touch point ahead of blocker {blocker}")]
    NotAtHandoffPoint { position: f64, blocker: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteForceError {
    #[error("{schedules} schedules exceed the cap of {cap}; coarsen the switch grid")]
    ScheduleCap { schedules: u128, cap: u64 },
    #[error("grid step must be positive and finite, got {0}")]
    BadGridStep(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-defender headings with the single blocking role made explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionAssignment {
    pub directions: Vec<Direction>,
    pub blocker_index: usize,
}

/// Find the defender covering the attacker. At a touch point shared by two
/// intervals the blocker is the one whose interval extends in the attacker's
/// direction of motion (it has the most cover to give).
pub fn resolve_blocker(
    state: &GameState,
    params: &ScenarioParams,
    attacker_direction: Direction,
) -> Result<usize, StrategyError> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..state.defender_count() {
        let interval = state.defended_interval(params.defense_length, i)?;
        if interval.contains(state.attacker.position, CONTACT_EPS) {
            let leading = match attacker_direction {
                Direction::Positive => interval.end(),
                Direction::Negative => interval.start(),
            };
            let forward = state
                .attacker
                .position
                .directed_arc(leading, attacker_direction)
                .map_err(ModelError::from)?;
            // the eps widening can make "forward" wrap to nearly C; treat as 0
            let forward = if forward > params.circumference - 2.0 * CONTACT_EPS { 0.0 } else { forward };
            if best.is_none_or(|(_, f)| forward > f) {
                best = Some((i, forward));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(StrategyError::AttackerNotCovered {
        position: state.attacker.position.value(),
    })
}

/// The coordinated defender rule: blocker matches the attacker's heading,
/// every other defender reverses to reinforce ahead of the attacker.
pub fn defender_policy(
    state: &GameState,
    params: &ScenarioParams,
) -> Result<DirectionAssignment, StrategyError> {
    let blocker = state.blocker_index;
    let interval = state.defended_interval(params.defense_length, blocker)?;
    if !interval.contains(state.attacker.position, CONTACT_EPS) {
        return Err(StrategyError::AttackerNotCovered {
            position: state.attacker.position.value(),
        });
    }
    let attacker_dir = state.attacker.direction;
    let directions = (0..state.defender_count())
        .map(|i| if i == blocker { attacker_dir } else { attacker_dir.flipped() })
        .collect();
    Ok(DirectionAssignment { directions, blocker_index: blocker })
}

/// Transfer the blocking role to the neighbor whose interval touches the
/// blocker's leading edge, where the attacker currently stands.
pub fn handoff(state: &GameState, params: &ScenarioParams) -> Result<GameState, StrategyError> {
    let n = state.defender_count();
    let blocker = state.blocker_index;
    let dir = state.attacker.direction;
    let interval = state.defended_interval(params.defense_length, blocker)?;
    let edge = match dir {
        Direction::Positive => interval.end(),
        Direction::Negative => interval.start(),
    };
    let at_edge = state
        .attacker
        .position
        .directed_arc(edge, dir)
        .map_err(ModelError::from)?;
    if at_edge.min(params.circumference - at_edge) > CONTACT_EPS {
        return Err(StrategyError::NotAtHandoffPoint {
            position: state.attacker.position.value(),
            blocker: blocker + 1,
        });
    }
    let next = match dir {
        Direction::Positive => (blocker + 1) % n,
        Direction::Negative => (blocker + n - 1) % n,
    };
    let next_interval = state.defended_interval(params.defense_length, next)?;
    if !next_interval.contains(state.attacker.position, CONTACT_EPS) {
        return Err(StrategyError::NotAtHandoffPoint {
            position: state.attacker.position.value(),
            blocker: blocker + 1,
        });
    }
    let mut out = state.clone();
    out.blocker_index = next;
    let assignment = defender_policy(&out, params)?;
    for (agent, dir) in out.defenders.iter_mut().zip(assignment.directions) {
        agent.direction = dir;
    }
    Ok(out)
}

/// Signed defender velocities after the hold-at-contact rule: a defender whose
/// commanded motion would shrink an already-closed gap stops until the gap
/// reopens. Commanded velocities are `direction * speed`; gaps are indexed so
/// `gaps[i]` sits between defenders `i` and `i + 1 (mod n)`.
pub fn effective_velocities(gaps: &[f64], commanded: &[f64]) -> Vec<f64> {
    let n = commanded.len();
    let mut vel = commanded.to_vec();
    if n < 2 {
        return vel;
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            let j = (i + 1) % n;
            if gaps[i] <= CONTACT_EPS && vel[j] - vel[i] < 0.0 {
                if vel[i] > 0.0 {
                    vel[i] = 0.0;
                    changed = true;
                }
                if vel[j] < 0.0 {
                    vel[j] = 0.0;
                    changed = true;
                }
            }
        }
        if !changed {
            return vel;
        }
    }
}

/// Constant-direction schedule.
pub fn constant_attacker(direction: Direction) -> AttackerStrategy {
    AttackerStrategy::constant(direction)
}

/// Search space and budget for the brute-force attacker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteForceSettings {
    /// Largest number of direction switches per schedule.
    pub max_switches: u32,
    /// Switch times are the nonzero multiples of this step, up to `horizon`.
    pub grid_step: f64,
    /// Simulation horizon, and the upper bound for switch times.
    pub horizon: f64,
    /// Refuse to enumerate more schedules than this.
    pub schedule_cap: u64,
}

pub const DEFAULT_SCHEDULE_CAP: u64 = 1_000_000;

impl BruteForceSettings {
    /// Reference defaults: three switches on a grid of 1/20th of a blocking
    /// episode, simulated for ten relative circumnavigations. For most
    /// scenarios this family is far larger than the schedule cap; use
    /// [`BruteForceSettings::with_grid_count`] to stay under a budget.
    pub fn reference(params: &ScenarioParams) -> Self {
        BruteForceSettings {
            max_switches: 3,
            grid_step: 0.05 * params.defense_length / params.attacker_speed,
            horizon: engine::default_horizon(params),
            schedule_cap: DEFAULT_SCHEDULE_CAP,
        }
    }

    /// `max_switches` switches on a grid of `grid_count` times spanning
    /// `horizon`.
    pub fn with_grid_count(max_switches: u32, grid_count: u32, horizon: f64) -> Self {
        BruteForceSettings {
            max_switches,
            grid_step: horizon / grid_count as f64,
            horizon,
            schedule_cap: DEFAULT_SCHEDULE_CAP,
        }
    }

    fn grid_len(&self) -> u64 {
        if self.grid_step <= 0.0 {
            return 0;
        }
        (self.horizon / self.grid_step).floor() as u64
    }

    /// Total schedules: both initial directions times every k-subset of grid
    /// times for k up to `max_switches`.
    pub fn schedule_count(&self) -> u128 {
        let m = self.grid_len() as u128;
        let mut total: u128 = 0;
        for k in 0..=self.max_switches as u128 {
            total = total.saturating_add(binomial(m, k));
        }
        total.saturating_mul(2)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul(n - i) / (i + 1);
    }
    out
}

/// k-subset of `0..m` with lexicographic rank `rank`.
fn unrank_combination(m: u64, k: u32, mut rank: u128) -> Vec<u64> {
    let mut out = Vec::with_capacity(k as usize);
    let mut next = 0u64;
    for slot in 0..k {
        loop {
            let remaining = (k - slot - 1) as u128;
            let with_next = binomial((m - next - 1) as u128, remaining);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

/// A breach found by the search, with the schedule that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BreachWitness {
    pub time: f64,
    pub position: f64,
    pub strategy: AttackerStrategy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceReport {
    /// Earliest breach over the whole family, if any schedule breaches.
    /// Ties break toward positive initial direction, then the
    /// lexicographically smallest switch-time list.
    pub breach: Option<BreachWitness>,
    pub schedules_searched: u64,
}

/// Simulate every schedule in the family and keep the best breach.
/// Deterministic regardless of worker count: candidates merge by
/// (time, initial direction, switch times).
pub fn brute_force_attacker(
    params: &ScenarioParams,
    initial: &GameState,
    settings: &BruteForceSettings,
) -> Result<BruteForceReport, BruteForceError> {
    if !settings.grid_step.is_finite() || settings.grid_step <= 0.0 {
        return Err(BruteForceError::BadGridStep(settings.grid_step));
    }
    let total = settings.schedule_count();
    if total > settings.schedule_cap as u128 {
        return Err(BruteForceError::ScheduleCap { schedules: total, cap: settings.schedule_cap });
    }
    let m = settings.grid_len();
    let sim_settings = SimSettings {
        horizon: settings.horizon,
        record_trace: false,
        ..SimSettings::for_params(params)
    };

    let mut best: Option<Candidate> = None;
    for k in 0..=settings.max_switches {
        if (k as u64) > m {
            break;
        }
        let combos = binomial(m as u128, k as u128) as u64;
        let round = (0..combos)
            .into_par_iter()
            .map(|rank| -> Result<Option<Candidate>, BruteForceError> {
                let times: Vec<f64> = unrank_combination(m, k, rank as u128)
                    .into_iter()
                    .map(|ix| (ix + 1) as f64 * settings.grid_step)
                    .collect();
                let mut local: Option<Candidate> = None;
                for direction in [Direction::Positive, Direction::Negative] {
                    let strategy = AttackerStrategy::new(direction, times.clone())?;
                    let outcome = engine::simulate(params, initial, &strategy, &sim_settings)?;
                    if let Verdict::Breach { time, position } = outcome.verdict {
                        let cand = Candidate { time, position, strategy };
                        if local.as_ref().is_none_or(|b| cand.beats(b)) {
                            local = Some(cand);
                        }
                    }
                }
                Ok(local)
            })
            .try_reduce(
                || None,
                |a, b| {
                    Ok(match (a, b) {
                        (None, x) => x,
                        (x, None) => x,
                        (Some(x), Some(y)) => Some(if y.beats(&x) { y } else { x }),
                    })
                },
            )?;
        if let Some(cand) = round {
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }

    Ok(BruteForceReport {
        breach: best.map(|c| BreachWitness {
            time: c.time,
            position: c.position,
            strategy: c.strategy,
        }),
        schedules_searched: total as u64,
    })
}

#[derive(Clone, Debug)]
struct Candidate {
    time: f64,
    position: f64,
    strategy: AttackerStrategy,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.time != other.time {
            return self.time < other.time;
        }
        let dir_rank = |d: Direction| match d {
            Direction::Positive => 0u8,
            Direction::Negative => 1u8,
        };
        let (a, b) = (
            dir_rank(self.strategy.initial_direction()),
            dir_rank(other.strategy.initial_direction()),
        );
        if a != b {
            return a < b;
        }
        self.strategy.switch_times() < other.strategy.switch_times()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::case1_config;

    fn params(c: f64, n: u32, d: f64, v: f64, va: f64) -> ScenarioParams {
        ScenarioParams::new(c, n, d, v, va)
    }

    #[test]
    fn policy_blocker_with_attacker_rest_reversed() {
        let p = params(10.0, 3, 2.0, 1.0, 3.0);
        let state = case1_config(&p).unwrap().state;
        let a = defender_policy(&state, &p).unwrap();
        assert_eq!(a.blocker_index, 0);
        assert_eq!(
            a.directions,
            vec![Direction::Positive, Direction::Negative, Direction::Negative]
        );
    }

    #[test]
    fn policy_negates_when_attacker_flips() {
        let p = params(10.0, 3, 2.0, 1.0, 3.0);
        let mut state = case1_config(&p).unwrap().state;
        state.attacker.direction = Direction::Negative;
        state.blocker_index = resolve_blocker(&state, &p, Direction::Negative).unwrap();
        let a = defender_policy(&state, &p).unwrap();
        // at the touch point heading negative, defender 3 blocks
        assert_eq!(a.blocker_index, 2);
        assert_eq!(
            a.directions,
            vec![Direction::Positive, Direction::Positive, Direction::Negative]
        );
    }

    #[test]
    fn policy_rejects_uncovered_attacker() {
        let p = params(10.0, 3, 2.0, 1.0, 3.0);
        let mut state = case1_config(&p).unwrap().state;
        state.attacker.position = crate::geometry::wrap(3.0, 10.0).unwrap();
        assert!(matches!(
            defender_policy(&state, &p),
            Err(StrategyError::AttackerNotCovered { .. })
        ));
    }

    #[test]
    fn handoff_advances_to_touching_neighbor() {
        // all gaps zero: the leading edge is always a touch point
        let p = params(6.0, 3, 2.0, 1.0, 3.0);
        let mut state = case1_config(&p).unwrap().state;
        // move the attacker to defender 1's leading edge
        state.attacker.position = state.defended_interval(2.0, 0).unwrap().end();
        let next = handoff(&state, &p).unwrap();
        assert_eq!(next.blocker_index, 1);
        assert_eq!(
            next.defenders.iter().map(|d| d.direction).collect::<Vec<_>>(),
            vec![Direction::Negative, Direction::Positive, Direction::Negative]
        );
        // of the mid-interval it is not a handoff point
        let mut inside = next.clone();
        inside.attacker.position = inside.defenders[1].position;
        assert!(matches!(
            handoff(&inside, &p),
            Err(StrategyError::NotAtHandoffPoint { .. })
        ));
    }

    #[test]
    fn hold_rule_stops_closing_pairs_and_chains() {
        let v = 1.0;
        // pair approaching over a closed gap: both stop
        assert_eq!(effective_velocities(&[0.0, 5.0], &[v, -v]), vec![0.0, 0.0]);
        // open gap: nobody stops
        assert_eq!(effective_velocities(&[2.0, 3.0], &[v, -v]), vec![v, -v]);
        // convoy over a closed gap: same heading keeps moving
        assert_eq!(effective_velocities(&[0.0, 5.0], &[-v, -v]), vec![-v, -v]);
        // chain: 0 pushes 1 pushes 2, all in contact
        assert_eq!(
            effective_velocities(&[0.0, 0.0, 9.0], &[v, -v, -v]),
            vec![0.0, 0.0, 0.0]
        );
        // full coverage: every gap closed, everyone wedged
        assert_eq!(
            effective_velocities(&[0.0, 0.0, 0.0], &[v, -v, -v]),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn constant_attacker_has_no_switches() {
        for dir in [Direction::Positive, Direction::Negative] {
            let s = constant_attacker(dir);
            assert_eq!(s.initial_direction(), dir);
            assert!(s.switch_times().is_empty());
        }
    }

    #[test]
    fn unranking_is_lexicographic_and_complete() {
        let m = 6u64;
        let k = 3u32;
        let total = binomial(m as u128, k as u128);
        let mut seen = Vec::new();
        for rank in 0..total {
            seen.push(unrank_combination(m, k, rank));
        }
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len() as u128, total);
        assert_eq!(seen, sorted, "ranks enumerate combinations in lex order");
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen.last().unwrap(), &vec![3, 4, 5]);
    }

    #[test]
    fn schedule_count_and_cap() {
        let s = BruteForceSettings {
            max_switches: 3,
            grid_step: 1.0,
            horizon: 20.0,
            schedule_cap: 10,
        };
        // 2 * (1 + 20 + 190 + 1140)
        assert_eq!(s.schedule_count(), 2702);
        let p = params(10.0, 3, 2.0, 1.0, 3.0);
        let initial = case1_config(&p).unwrap().state;
        assert!(matches!(
            brute_force_attacker(&p, &initial, &s),
            Err(BruteForceError::ScheduleCap { schedules: 2702, cap: 10 })
        ));
    }

    #[test]
    fn reference_settings_usually_exceed_the_cap() {
        let p = params(10.0, 3, 2.0, 1.0, 3.0);
        let s = BruteForceSettings::reference(&p);
        assert!(s.schedule_count() > s.schedule_cap as u128);
    }
}
