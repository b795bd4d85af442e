//! Scenario parameters, agent states, full game snapshots, and the scenario
//! file format.
//!
//! A scenario is five constants: ring circumference `C`, defender count `n`,
//! per-defender defended length, defender speed, and attacker speed. The
//! non-trivial game requires the attacker to start covered and to be strictly
//! faster than the defenders; everything else is reported as a validation
//! issue rather than silently accepted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, CircInterval, CircPos, Direction, GeometryError, CONTACT_EPS};

/// Relative tolerance for the gap-sum conservation identity.
pub const CONSERVATION_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid scenario: {}", format_issues(.0))]
    Invalid(Vec<ParamIssue>),
    #[error("defender index {index} out of range 1..={count}")]
    DefenderIndex { index: usize, count: usize },
    #[error("defenders {first} and {second} overlap by {depth}: coordination violation")]
    Coordination { first: usize, second: usize, depth: f64 },
    #[error("defenders are not in positive cyclic order (gap sum {got}, expected {expected})")]
    Disordered { got: f64, expected: f64 },
    #[error("attacker at {position} is not covered by blocking defender {blocker}")]
    AttackerNotCovered { position: f64, blocker: usize },
    #[error("blocker index {index} out of range for {count} defenders")]
    BlockerIndex { index: usize, count: usize },
    #[error("attacker switch times must be finite, nonnegative and strictly increasing")]
    BadSwitchTimes,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn format_issues(issues: &[ParamIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single violated (or merely notable) scenario precondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamIssue {
    NonFinite(&'static str),
    NonPositiveCircumference,
    NonPositiveDefenseLength,
    ZeroDefenderCount,
    NegativeDefenderSpeed,
    DefenderNotSlower,
    /// Informational: n * d covers the whole ring; defenders win outright.
    FullCoverage,
}

impl ParamIssue {
    /// Informational issues do not make a scenario unusable.
    pub fn is_fatal(self) -> bool {
        !matches!(self, ParamIssue::FullCoverage)
    }
}

impl std::fmt::Display for ParamIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamIssue::NonFinite(field) => write!(f, "{field} must be finite"),
            ParamIssue::NonPositiveCircumference => write!(f, "circumference must be > 0"),
            ParamIssue::NonPositiveDefenseLength => write!(f, "defense_length must be > 0"),
            ParamIssue::ZeroDefenderCount => write!(f, "defender_count must be >= 1"),
            ParamIssue::NegativeDefenderSpeed => write!(f, "defender_speed must be >= 0"),
            ParamIssue::DefenderNotSlower => {
                write!(f, "defender_speed must be strictly below attacker_speed")
            }
            ParamIssue::FullCoverage => {
                write!(f, "note: defenders fully cover the ring (n * defense_length >= circumference)")
            }
        }
    }
}

/// The five game constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScenarioParams {
    pub circumference: f64,
    pub defender_count: u32,
    pub defense_length: f64,
    pub defender_speed: f64,
    pub attacker_speed: f64,
}

impl ScenarioParams {
    pub fn new(
        circumference: f64,
        defender_count: u32,
        defense_length: f64,
        defender_speed: f64,
        attacker_speed: f64,
    ) -> Self {
        ScenarioParams {
            circumference,
            defender_count,
            defense_length,
            defender_speed,
            attacker_speed,
        }
    }

    /// All violated invariants, plus the informational full-coverage flag.
    pub fn validate(&self) -> Vec<ParamIssue> {
        let mut issues = Vec::new();
        for (value, field) in [
            (self.circumference, "circumference"),
            (self.defense_length, "defense_length"),
            (self.defender_speed, "defender_speed"),
            (self.attacker_speed, "attacker_speed"),
        ] {
            if !value.is_finite() {
                issues.push(ParamIssue::NonFinite(field));
            }
        }
        if !issues.is_empty() {
            return issues;
        }
        if self.circumference <= 0.0 {
            issues.push(ParamIssue::NonPositiveCircumference);
        }
        if self.defense_length <= 0.0 {
            issues.push(ParamIssue::NonPositiveDefenseLength);
        }
        if self.defender_count == 0 {
            issues.push(ParamIssue::ZeroDefenderCount);
        }
        if self.defender_speed < 0.0 {
            issues.push(ParamIssue::NegativeDefenderSpeed);
        }
        if self.defender_speed >= self.attacker_speed {
            issues.push(ParamIssue::DefenderNotSlower);
        }
        if issues.is_empty() && self.full_coverage() {
            issues.push(ParamIssue::FullCoverage);
        }
        issues
    }

    /// Err on any fatal issue; the full-coverage flag alone passes.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let fatal: Vec<ParamIssue> = self
            .validate()
            .into_iter()
            .filter(|i| i.is_fatal())
            .collect();
        if fatal.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(fatal))
        }
    }

    /// True when the defended intervals can cover the whole ring.
    pub fn full_coverage(&self) -> bool {
        self.defender_count as f64 * self.defense_length >= self.circumference
    }

    /// Defended length clamped to the ring (a swath can at most be the ring).
    pub fn clamped_defense_length(&self) -> f64 {
        self.defense_length.min(self.circumference)
    }
}

/// Position, commanded heading, and current speed of one agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgentState {
    pub position: CircPos,
    pub direction: Direction,
    pub speed: f64,
}

/// Timestamped snapshot of the whole game.
///
/// Defenders are indexed in positive-direction cyclic order; `blocker_index`
/// (0-based) names the defender whose interval currently contains the
/// attacker.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameState {
    pub time: f64,
    pub attacker: AgentState,
    pub defenders: Vec<AgentState>,
    pub blocker_index: usize,
}

impl GameState {
    pub fn defender_count(&self) -> usize {
        self.defenders.len()
    }

    /// Closed interval of the defended length centered on defender `index`.
    pub fn defended_interval(
        &self,
        defense_length: f64,
        index: usize,
    ) -> Result<CircInterval, ModelError> {
        let n = self.defenders.len();
        if index >= n {
            return Err(ModelError::DefenderIndex { index: index + 1, count: n });
        }
        let center = self.defenders[index].position;
        let len = defense_length.min(center.circumference());
        Ok(CircInterval::new(center.offset(-len / 2.0), len)?)
    }

    /// Gaps between consecutive defended intervals, in order
    /// `(1,2), (2,3), ..., (n,1)`. For a single defender the one entry is the
    /// undefended remainder of the ring.
    pub fn gaps(&self, defense_length: f64) -> Result<Vec<f64>, ModelError> {
        let n = self.defenders.len();
        if n == 1 {
            let c = self.defenders[0].position.circumference();
            return Ok(vec![c - defense_length.min(c)]);
        }
        let intervals: Vec<CircInterval> = (0..n)
            .map(|i| self.defended_interval(defense_length, i))
            .collect::<Result<_, _>>()?;
        let mut gaps = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            match geometry::gap_after(&intervals[i], &intervals[j]) {
                Ok(g) => gaps.push(g),
                Err(GeometryError::Overlap { depth }) => {
                    return Err(ModelError::Coordination { first: i + 1, second: j + 1, depth })
                }
                Err(other) => return Err(other.into()),
            }
        }
        Ok(gaps)
    }

    /// Check the snapshot invariants: blocker in range, defenders disjoint and
    /// in cyclic order, attacker covered by the blocker's interval.
    pub fn validate(&self, params: &ScenarioParams) -> Result<(), ModelError> {
        let n = self.defenders.len();
        if self.blocker_index >= n {
            return Err(ModelError::BlockerIndex { index: self.blocker_index, count: n });
        }
        let d = params.clamped_defense_length();
        let gaps = self.gaps(params.defense_length)?;
        let total: f64 = gaps.iter().sum();
        let expected = params.circumference - n as f64 * d;
        // order violations show up as an O(C) excess in the gap sum
        if (total - expected).abs() > 1e-6 * params.circumference {
            return Err(ModelError::Disordered { got: total, expected });
        }
        let blocker = self.defended_interval(params.defense_length, self.blocker_index)?;
        if !blocker.contains(self.attacker.position, CONTACT_EPS) {
            return Err(ModelError::AttackerNotCovered {
                position: self.attacker.position.value(),
                blocker: self.blocker_index + 1,
            });
        }
        Ok(())
    }
}

/// Piecewise-constant attacker heading: starts at `initial_direction` and
/// flips at each switch time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackerStrategy {
    initial_direction: Direction,
    switch_times: Vec<f64>,
}

impl AttackerStrategy {
    pub fn new(initial_direction: Direction, switch_times: Vec<f64>) -> Result<Self, ModelError> {
        let increasing = switch_times.windows(2).all(|w| w[0] < w[1]);
        let sane = switch_times.iter().all(|t| t.is_finite() && *t >= 0.0);
        if !increasing || !sane {
            return Err(ModelError::BadSwitchTimes);
        }
        Ok(AttackerStrategy { initial_direction, switch_times })
    }

    /// Schedule with no switches.
    pub fn constant(direction: Direction) -> Self {
        AttackerStrategy { initial_direction: direction, switch_times: Vec::new() }
    }

    pub fn initial_direction(&self) -> Direction {
        self.initial_direction
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    /// Heading at time `t`, with flips applied at each switch time <= t.
    pub fn direction_at(&self, t: f64) -> Direction {
        let flips = self.switch_times.iter().take_while(|s| **s <= t).count();
        if flips % 2 == 0 {
            self.initial_direction
        } else {
            self.initial_direction.flipped()
        }
    }
}

/// Which canonical initial configuration to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
}

/// Attacker schedule as written in scenario files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerStrategySpec {
    pub initial_direction: Direction,
    pub switch_times: Vec<f64>,
}

impl AttackerStrategySpec {
    pub fn build(&self) -> Result<AttackerStrategy, ModelError> {
        AttackerStrategy::new(self.initial_direction, self.switch_times.clone())
    }
}

/// On-disk scenario document. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub circumference: f64,
    pub defender_count: u32,
    pub defense_length: f64,
    pub defender_speed: f64,
    pub attacker_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_config: Option<CaseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker_strategy: Option<AttackerStrategySpec>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn params(&self) -> ScenarioParams {
        ScenarioParams::new(
            self.circumference,
            self.defender_count,
            self.defense_length,
            self.defender_speed,
            self.attacker_speed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap;

    fn params(c: f64, n: u32, d: f64, v: f64, va: f64) -> ScenarioParams {
        ScenarioParams::new(c, n, d, v, va)
    }

    fn agent(pos: f64, c: f64, dir: Direction, speed: f64) -> AgentState {
        AgentState { position: wrap(pos, c).unwrap(), direction: dir, speed }
    }

    #[test]
    fn validate_accepts_the_base_scenario() {
        assert!(params(10.0, 3, 2.0, 1.0, 3.0).validate().is_empty());
    }

    #[test]
    fn validate_flags_equal_speeds() {
        let issues = params(10.0, 3, 2.0, 3.0, 3.0).validate();
        assert!(issues.contains(&ParamIssue::DefenderNotSlower));
        assert!(params(10.0, 3, 2.0, 3.0, 3.0).ensure_valid().is_err());
    }

    #[test]
    fn validate_flags_full_coverage_informationally() {
        let p = params(5.0, 3, 2.0, 1.0, 3.0);
        let issues = p.validate();
        assert_eq!(issues, vec![ParamIssue::FullCoverage]);
        assert!(p.ensure_valid().is_ok());
    }

    #[test]
    fn defended_interval_is_centered() {
        let c = 10.0;
        let state = GameState {
            time: 0.0,
            attacker: agent(5.0, c, Direction::Positive, 3.0),
            defenders: vec![agent(5.0, c, Direction::Positive, 1.0)],
            blocker_index: 0,
        };
        let iv = state.defended_interval(2.0, 0).unwrap();
        assert_eq!(iv.start().value(), 4.0);
        assert_eq!(iv.end().value(), 6.0);
    }

    #[test]
    fn defended_interval_wraps_and_clamps() {
        let c = 10.0;
        let state = GameState {
            time: 0.0,
            attacker: agent(0.5, c, Direction::Positive, 3.0),
            defenders: vec![agent(0.5, c, Direction::Positive, 1.0)],
            blocker_index: 0,
        };
        let iv = state.defended_interval(2.0, 0).unwrap();
        assert_eq!(iv.start().value(), 9.5);
        assert_eq!(iv.end().value(), 1.5);
        // whole-ring swath
        let full = state.defended_interval(10.0, 0).unwrap();
        assert_eq!(full.length(), 10.0);
        assert!(state.defended_interval(2.0, 1).is_err());
    }

    #[test]
    fn gaps_single_defender() {
        let c = 10.0;
        let state = GameState {
            time: 0.0,
            attacker: agent(0.0, c, Direction::Positive, 3.0),
            defenders: vec![agent(1.0, c, Direction::Positive, 1.0)],
            blocker_index: 0,
        };
        assert_eq!(state.gaps(2.0).unwrap(), vec![8.0]);
        assert_eq!(state.gaps(10.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn gaps_flag_overlap_as_coordination_violation() {
        let c = 10.0;
        let state = GameState {
            time: 0.0,
            attacker: agent(0.0, c, Direction::Positive, 3.0),
            defenders: vec![
                agent(1.0, c, Direction::Positive, 1.0),
                agent(2.0, c, Direction::Negative, 1.0),
            ],
            blocker_index: 0,
        };
        match state.gaps(2.0).unwrap_err() {
            ModelError::Coordination { first: 1, second: 2, depth } => {
                assert!((depth - 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strategy_direction_schedule() {
        let s = AttackerStrategy::new(Direction::Positive, vec![1.0, 2.5]).unwrap();
        assert_eq!(s.direction_at(0.0), Direction::Positive);
        assert_eq!(s.direction_at(1.0), Direction::Negative);
        assert_eq!(s.direction_at(2.0), Direction::Negative);
        assert_eq!(s.direction_at(2.5), Direction::Positive);
        assert!(AttackerStrategy::new(Direction::Positive, vec![2.0, 1.0]).is_err());
        assert!(AttackerStrategy::new(Direction::Positive, vec![-1.0]).is_err());
        assert!(AttackerStrategy::constant(Direction::Negative).switch_times().is_empty());
    }

    #[test]
    fn scenario_file_round_trip_and_unknown_keys() {
        let text = r#"{
            "circumference": 10.0,
            "defender_count": 3,
            "defense_length": 2.0,
            "defender_speed": 1.0,
            "attacker_speed": 3.0,
            "initial_config": "case2",
            "attacker_strategy": { "initial_direction": -1, "switch_times": [0.5, 1.5] }
        }"#;
        let file = ScenarioFile::from_json(text).unwrap();
        assert_eq!(file.params(), params(10.0, 3, 2.0, 1.0, 3.0));
        assert_eq!(file.initial_config, Some(CaseKind::Case2));
        let strat = file.attacker_strategy.unwrap().build().unwrap();
        assert_eq!(strat.initial_direction(), Direction::Negative);

        let unknown = r#"{ "circumference": 10.0, "defender_count": 3, "defense_length": 2.0,
            "defender_speed": 1.0, "attacker_speed": 3.0, "color": "red" }"#;
        let err = ScenarioFile::from_json(unknown).unwrap_err().to_string();
        assert!(err.contains("color"), "{err}");

        let missing = r#"{ "defender_count": 3, "defense_length": 2.0,
            "defender_speed": 1.0, "attacker_speed": 3.0 }"#;
        let err = ScenarioFile::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("circumference"), "{err}");
    }
}
