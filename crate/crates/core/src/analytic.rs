//! Closed-form win conditions for the homogeneous-defender game: blocking
//! time, gap feasibility, the widest closable gap, the largest defensible
//! circumference, and the rearranged thresholds on each parameter, plus the
//! two canonical extremal starting configurations.
//!
//! The core quantity is `gamma = 2 v_def / (v_att - v_def)`: while a blocker
//! gives ground to the attacker, the two defenders bounding the gap ahead
//! close it from both sides, so a gap of `gamma * defense_length` closes in
//! exactly one blocking episode. The attacker wins iff the ring is longer
//! than `n * d + (n - 1) * gamma * d`.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{wrap, Direction};
use crate::model::{AgentState, GameState, ModelError, ScenarioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("attacker speed {attacker} must exceed defender speed {defender}")]
    DefenderNotSlower { defender: f64, attacker: f64 },
    #[error("no finite speed threshold: {defenders} defenders of length {defense_length} cover circumference {circumference} by count alone")]
    NoFiniteThreshold { circumference: f64, defense_length: f64, defenders: u32 },
    #[error("no disjoint configuration: {defenders} defenders of length {defense_length} exceed circumference {circumference}")]
    Infeasible { circumference: f64, defense_length: f64, defenders: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How long a blocker keeps the attacker covered: the covered length ahead of
/// the attacker divided by the closing speed of the chase.
pub fn blocking_time(
    lead_cover: f64,
    attacker_speed: f64,
    defender_speed: f64,
) -> Result<f64, AnalyticError> {
    if attacker_speed <= defender_speed {
        return Err(AnalyticError::DefenderNotSlower {
            defender: defender_speed,
            attacker: attacker_speed,
        });
    }
    Ok(lead_cover / (attacker_speed - defender_speed))
}

/// Can two defenders approaching at `v1 + v2` close `gap` within time `t`?
/// A zero gap is closable even with zero closing speed.
pub fn gap_closable(t: f64, gap: f64, v1: f64, v2: f64) -> bool {
    if gap <= 0.0 {
        return true;
    }
    t * (v1 + v2) >= gap
}

/// Dimensionless ratio `2 v_def / (v_att - v_def)` relating the widest
/// closable gap to the defended length.
pub fn gamma(defender_speed: f64, attacker_speed: f64) -> Result<f64, AnalyticError> {
    if attacker_speed <= defender_speed {
        return Err(AnalyticError::DefenderNotSlower {
            defender: defender_speed,
            attacker: attacker_speed,
        });
    }
    Ok(2.0 * defender_speed / (attacker_speed - defender_speed))
}

/// Widest inter-defender gap closable during one blocking episode.
pub fn optimal_gap(params: &ScenarioParams) -> Result<f64, AnalyticError> {
    Ok(params.defense_length * gamma(params.defender_speed, params.attacker_speed)?)
}

/// Largest circumference `n` defenders can hold:
/// `n * d + (n - 1) * d * gamma`.
pub fn max_circumference(params: &ScenarioParams) -> Result<f64, AnalyticError> {
    let n = params.defender_count as f64;
    Ok(n * params.defense_length + (n - 1.0) * optimal_gap(params)?)
}

/// Win verdict plus how far the circumference sits from the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WinCheck {
    pub attacker_wins: bool,
    pub margin: f64,
}

/// The attacker wins iff the circumference strictly exceeds the largest
/// defensible one; the boundary itself is a defender win.
pub fn attacker_wins(params: &ScenarioParams) -> Result<WinCheck, AnalyticError> {
    let margin = params.circumference - max_circumference(params)?;
    Ok(WinCheck { attacker_wins: margin > 0.0, margin })
}

/// Fewest defenders that hold circumference `c`; 1 when one swath suffices.
/// Uses a 1e-12 relative slack before the ceiling so exact integer thresholds
/// do not over-count.
pub fn min_defenders(
    c: f64,
    defense_length: f64,
    defender_speed: f64,
    attacker_speed: f64,
) -> Result<u32, AnalyticError> {
    if c <= defense_length {
        return Ok(1);
    }
    let g = gamma(defender_speed, attacker_speed)?;
    let raw = (c / defense_length + g) / (1.0 + g);
    let n = (raw * (1.0 - 1e-12)).ceil().max(1.0);
    Ok(n as u32)
}

/// Speed ratio `v_att / v_def` above which the attacker wins. Fails when the
/// defenders cover by count alone (no finite threshold exists).
pub fn critical_speed_ratio(c: f64, defense_length: f64, n: u32) -> Result<f64, AnalyticError> {
    if c <= n as f64 * defense_length {
        return Err(AnalyticError::NoFiniteThreshold {
            circumference: c,
            defense_length,
            defenders: n,
        });
    }
    Ok(2.0 * (n as f64 - 1.0) / (c / defense_length - n as f64) + 1.0)
}

/// Defended length below which the attacker wins: `c / (n + (n - 1) gamma)`.
pub fn max_defense_threshold(
    c: f64,
    n: u32,
    defender_speed: f64,
    attacker_speed: f64,
) -> Result<f64, AnalyticError> {
    let g = gamma(defender_speed, attacker_speed)?;
    let nf = n as f64;
    Ok(c / (nf + (nf - 1.0) * g))
}

/// Time between the touch-point start and the midpoint start of the same
/// play: half the defended length over the chase's closing speed.
pub fn case_transition_time(params: &ScenarioParams) -> Result<f64, AnalyticError> {
    blocking_time(
        params.defense_length / 2.0,
        params.attacker_speed,
        params.defender_speed,
    )
}

/// A generated starting configuration. `exceeds_max` marks circumferences
/// beyond the defensible threshold: the layout is still produced (with all
/// interior gaps stretched equally) so the engine can demonstrate the breach.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    pub state: GameState,
    pub exceeds_max: bool,
}

fn interior_gap(params: &ScenarioParams) -> Result<f64, AnalyticError> {
    let n = params.defender_count;
    let c = params.circumference;
    let d = params.defense_length;
    let spare = c - n as f64 * d;
    if spare < -CONFIG_SLACK * c {
        return Err(AnalyticError::Infeasible {
            circumference: c,
            defense_length: d,
            defenders: n,
        });
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((spare / (n as f64 - 1.0)).max(0.0))
}

const CONFIG_SLACK: f64 = 1e-12;

fn build_state(
    params: &ScenarioParams,
    attacker_pos: f64,
    centers: Vec<f64>,
    blocker_index: usize,
) -> Result<GameState, AnalyticError> {
    let c = params.circumference;
    let attacker_dir = Direction::Positive;
    let defenders = centers
        .into_iter()
        .enumerate()
        .map(|(i, center)| {
            let direction = if i == blocker_index { attacker_dir } else { attacker_dir.flipped() };
            Ok(AgentState {
                position: wrap(center, c).map_err(ModelError::from)?,
                direction,
                speed: params.defender_speed,
            })
        })
        .collect::<Result<Vec<_>, AnalyticError>>()?;
    Ok(GameState {
        time: 0.0,
        attacker: AgentState {
            position: wrap(attacker_pos, c).map_err(ModelError::from)?,
            direction: attacker_dir,
            speed: params.attacker_speed,
        },
        defenders,
        blocker_index,
    })
}

/// Attacker at the touch point between the last and first defended
/// intervals; the gap behind it is zero and the other `n - 1` gaps share the
/// undefended remainder equally. Attacker heads in the positive direction,
/// so defender 1 (whose interval extends that way) blocks.
pub fn case1_config(params: &ScenarioParams) -> Result<CaseConfig, AnalyticError> {
    params.ensure_valid()?;
    let d = params.clamped_defense_length();
    let g = interior_gap(params)?;
    let centers = (0..params.defender_count as usize)
        .map(|i| i as f64 * (d + g) + d / 2.0)
        .collect();
    let state = build_state(params, 0.0, centers, 0)?;
    let exceeds_max = attacker_wins(params)?.attacker_wins;
    Ok(CaseConfig { state, exceeds_max })
}

/// Attacker at the midpoint of defender 1's interval; the two gaps flanking
/// that interval are half the interior gap each.
pub fn case2_config(params: &ScenarioParams) -> Result<CaseConfig, AnalyticError> {
    params.ensure_valid()?;
    let d = params.clamped_defense_length();
    let g = interior_gap(params)?;
    let centers = (0..params.defender_count as usize)
        .map(|i| if i == 0 { 0.0 } else { d + g / 2.0 + (i as f64 - 1.0) * (d + g) })
        .collect();
    let state = build_state(params, 0.0, centers, 0)?;
    let exceeds_max = attacker_wins(params)?.attacker_wins;
    Ok(CaseConfig { state, exceeds_max })
}

/// Everything the closed forms say about one scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub gamma: f64,
    pub optimal_gap: f64,
    pub max_circumference: f64,
    pub attacker_wins: bool,
    pub margin: f64,
    pub min_defenders: u32,
    pub max_defense_length_threshold: f64,
    /// None when the defenders cover by count alone.
    pub critical_speed_ratio: Option<f64>,
    pub case_transition_time: f64,
    pub full_coverage: bool,
}

impl AnalyticReport {
    pub fn for_params(params: &ScenarioParams) -> Result<Self, AnalyticError> {
        params.ensure_valid()?;
        let check = attacker_wins(params)?;
        Ok(AnalyticReport {
            gamma: gamma(params.defender_speed, params.attacker_speed)?,
            optimal_gap: optimal_gap(params)?,
            max_circumference: max_circumference(params)?,
            attacker_wins: check.attacker_wins,
            margin: check.margin,
            min_defenders: min_defenders(
                params.circumference,
                params.defense_length,
                params.defender_speed,
                params.attacker_speed,
            )?,
            max_defense_length_threshold: max_defense_threshold(
                params.circumference,
                params.defender_count,
                params.defender_speed,
                params.attacker_speed,
            )?,
            critical_speed_ratio: critical_speed_ratio(
                params.circumference,
                params.defense_length,
                params.defender_count,
            )
            .ok(),
            case_transition_time: case_transition_time(params)?,
            full_coverage: params.full_coverage(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(c: f64, n: u32, d: f64, v: f64, va: f64) -> ScenarioParams {
        ScenarioParams::new(c, n, d, v, va)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn blocking_time_examples() {
        assert_eq!(blocking_time(1.0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(blocking_time(0.5, 3.0, 1.0).unwrap(), 0.25);
        assert_eq!(blocking_time(2.0, 2.0, 0.0).unwrap(), 1.0);
        assert!(blocking_time(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gap_closable_examples() {
        assert!(gap_closable(1.0, 2.0, 1.0, 1.0)); // exactly closable
        assert!(!gap_closable(0.9, 2.0, 1.0, 1.0));
        assert!(gap_closable(0.0, 0.0, 0.0, 0.0)); // zero gap, zero speed
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(1.0, 3.0).unwrap(), 1.0);
        assert_eq!(gamma(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(gamma(1.0, 2.0).unwrap(), 2.0);
        assert!(gamma(3.0, 3.0).is_err());
    }

    #[test]
    fn optimal_gap_examples() {
        assert_eq!(optimal_gap(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap(), 2.0);
        assert_eq!(optimal_gap(&params(10.0, 3, 5.0, 0.0, 3.0)).unwrap(), 0.0);
        assert_eq!(optimal_gap(&params(10.0, 3, 1.0, 1.0, 2.0)).unwrap(), 2.0);
    }

    #[test]
    fn max_circumference_examples() {
        assert_eq!(max_circumference(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap(), 10.0);
        assert_eq!(max_circumference(&params(10.0, 1, 2.0, 1.0, 3.0)).unwrap(), 2.0);
        assert_eq!(max_circumference(&params(10.0, 2, 1.0, 1.0, 3.0)).unwrap(), 3.0);
    }

    #[test]
    fn attacker_wins_examples() {
        let win = attacker_wins(&params(10.1, 3, 2.0, 1.0, 3.0)).unwrap();
        assert!(win.attacker_wins);
        assert!(close(win.margin, 0.1, 1e-12));
        let hold = attacker_wins(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap();
        assert!(!hold.attacker_wins);
        assert_eq!(hold.margin, 0.0);
        // static full coverage
        let full = attacker_wins(&params(6.0, 3, 2.0, 0.0, 1.0)).unwrap();
        assert!(!full.attacker_wins);
    }

    #[test]
    fn min_defenders_examples() {
        assert_eq!(min_defenders(10.0, 2.0, 1.0, 3.0).unwrap(), 3);
        assert_eq!(min_defenders(10.0, 1.0, 1.0, 3.0).unwrap(), 6);
        assert_eq!(min_defenders(1.5, 2.0, 1.0, 3.0).unwrap(), 1);
    }

    #[test]
    fn critical_speed_ratio_examples() {
        assert_eq!(critical_speed_ratio(10.0, 2.0, 3).unwrap(), 3.0);
        assert!(matches!(
            critical_speed_ratio(10.0, 2.0, 5),
            Err(AnalyticError::NoFiniteThreshold { .. })
        ));
        assert_eq!(critical_speed_ratio(4.0, 1.0, 2).unwrap(), 2.0);
    }

    #[test]
    fn max_defense_threshold_examples() {
        assert_eq!(max_defense_threshold(10.0, 3, 1.0, 3.0).unwrap(), 2.0);
        assert_eq!(max_defense_threshold(7.0, 1, 1.0, 3.0).unwrap(), 7.0);
        assert!(close(max_defense_threshold(12.0, 4, 1.0, 3.0).unwrap(), 12.0 / 7.0, 1e-15));
    }

    #[test]
    fn case_transition_time_examples() {
        assert_eq!(case_transition_time(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap(), 0.5);
        assert_eq!(case_transition_time(&params(10.0, 3, 1.0, 1.0, 2.0)).unwrap(), 0.5);
        // static defenders: half the swath at attacker speed
        assert_eq!(case_transition_time(&params(10.0, 3, 2.0, 0.0, 4.0)).unwrap(), 0.25);
    }

    #[test]
    fn case_transition_time_equals_half_gap_closing_time() {
        // same instant seen from the defenders: half the optimal gap at the
        // pairwise closing speed (defenders must be moving for this form)
        for p in [params(10.0, 3, 2.0, 1.0, 3.0), params(7.0, 4, 0.6, 0.4, 1.1)] {
            let via_chase = case_transition_time(&p).unwrap();
            let via_gap = optimal_gap(&p).unwrap() / (4.0 * p.defender_speed);
            assert!((via_chase - via_gap).abs() <= 1e-12 * via_chase.abs());
        }
    }

    #[test]
    fn case1_layout_examples() {
        let cfg = case1_config(&params(3.0, 2, 1.0, 1.0, 3.0)).unwrap();
        assert!(!cfg.exceeds_max);
        let s = &cfg.state;
        assert_eq!(s.attacker.position.value(), 0.0);
        assert_eq!(s.blocker_index, 0);
        let iv0 = s.defended_interval(1.0, 0).unwrap();
        let iv1 = s.defended_interval(1.0, 1).unwrap();
        assert_eq!((iv0.start().value(), iv0.end().value()), (0.0, 1.0));
        assert_eq!((iv1.start().value(), iv1.end().value()), (2.0, 0.0));

        let gaps = case1_config(&params(10.0, 3, 2.0, 1.0, 3.0))
            .unwrap()
            .state
            .gaps(2.0)
            .unwrap();
        assert_eq!(gaps, vec![2.0, 2.0, 0.0]);

        // single defender covering the whole ring
        let solo = case1_config(&params(2.0, 1, 2.0, 1.0, 3.0)).unwrap().state;
        assert_eq!(solo.attacker.position.value(), 0.0);
        assert_eq!(solo.gaps(2.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn case2_layout_examples() {
        let cfg = case2_config(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap();
        let gaps = cfg.state.gaps(2.0).unwrap();
        assert_eq!(gaps, vec![1.0, 2.0, 1.0]);
        assert_eq!(cfg.state.attacker.position.value(), 0.0);
        assert_eq!(cfg.state.defenders[0].position.value(), 0.0);

        let solo = case2_config(&params(3.0, 1, 2.0, 1.0, 3.0)).unwrap().state;
        assert_eq!(solo.attacker.position.value(), solo.defenders[0].position.value());
    }

    #[test]
    fn case_configs_flag_excess_circumference() {
        let cfg = case1_config(&params(10.1, 3, 2.0, 1.0, 3.0)).unwrap();
        assert!(cfg.exceeds_max);
        // still a valid disjoint layout, with stretched gaps
        cfg.state.validate(&params(10.1, 3, 2.0, 1.0, 3.0)).unwrap();
        assert!(matches!(
            case1_config(&params(5.0, 3, 2.0, 1.0, 3.0)),
            Err(AnalyticError::Infeasible { .. })
        ));
    }

    #[test]
    fn report_collects_everything() {
        let r = AnalyticReport::for_params(&params(10.0, 3, 2.0, 1.0, 3.0)).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert_eq!(r.optimal_gap, 2.0);
        assert_eq!(r.max_circumference, 10.0);
        assert!(!r.attacker_wins);
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.min_defenders, 3);
        assert_eq!(r.max_defense_length_threshold, 2.0);
        assert_eq!(r.critical_speed_ratio, Some(3.0));
        assert_eq!(r.case_transition_time, 0.5);
        assert!(!r.full_coverage);
    }

    prop_compose! {
        fn valid_params()(
            n in 1u32..=8,
            d in 0.05..2.0f64,
            v in 0.0..1.0f64,
            ratio in 1.05..5.0f64,
            c_scale in 0.3..2.0f64,
        ) -> ScenarioParams {
            let va = (v * ratio).max(0.05);
            let mut p = params(1.0, n, d, v, va);
            p.circumference = (max_circumference(&p).unwrap() * c_scale).max(d * 0.5);
            p
        }
    }

    proptest! {
        /// The four rearranged thresholds agree with the direct comparison,
        /// with guards where a denominator vanishes.
        #[test]
        fn rearrangements_agree(p in valid_params()) {
            let check = attacker_wins(&p).unwrap();
            // skip float dust of the boundary, where rearranged arithmetic
            // can land one ulp on the other side
            prop_assume!(check.margin.abs() > 1e-12 * p.circumference);
            let wins = check.attacker_wins;
            let g = gamma(p.defender_speed, p.attacker_speed).unwrap();
            let n = p.defender_count as f64;
            let cd = p.circumference / p.defense_length;

            let by_count = cd > n + (n - 1.0) * g;
            prop_assert_eq!(wins, by_count);

            let by_length = p.defense_length
                < max_defense_threshold(p.circumference, p.defender_count, p.defender_speed, p.attacker_speed).unwrap();
            prop_assert_eq!(wins, by_length);

            if p.defender_count >= 2 {
                let by_gamma = g < (cd - n) / (n - 1.0);
                prop_assert_eq!(wins, by_gamma);
            }

            match critical_speed_ratio(p.circumference, p.defense_length, p.defender_count) {
                Err(_) => prop_assert!(!wins),
                Ok(threshold) => {
                    if p.defender_speed > 0.0 {
                        let by_speed = p.attacker_speed / p.defender_speed > threshold;
                        prop_assert_eq!(wins, by_speed);
                    } else {
                        // static defenders: attacker wins iff coverage by count fails
                        prop_assert!(wins);
                    }
                }
            }
        }

        /// Strict boundary: the threshold circumference itself defends.
        #[test]
        fn boundary_is_a_defender_win(p in valid_params()) {
            let mut at_max = p;
            at_max.circumference = max_circumference(&p).unwrap();
            prop_assert!(!attacker_wins(&at_max).unwrap().attacker_wins);
            for delta in [1e-9 * at_max.circumference, 0.5 * at_max.circumference] {
                let mut above = at_max;
                above.circumference += delta;
                prop_assert!(attacker_wins(&above).unwrap().attacker_wins);
            }
        }

        /// Verdict is monotone along every axis.
        #[test]
        fn verdict_is_monotone(p in valid_params()) {
            let wins = |q: &ScenarioParams| attacker_wins(q).unwrap().attacker_wins;
            let base = wins(&p);

            let mut bigger_c = p; bigger_c.circumference *= 1.5;
            prop_assert!(wins(&bigger_c) >= base);

            let mut faster_attacker = p; faster_attacker.attacker_speed *= 1.5;
            prop_assert!(wins(&faster_attacker) >= base);

            let mut more_defenders = p; more_defenders.defender_count += 1;
            prop_assert!(wins(&more_defenders) <= base);

            let mut longer_swaths = p; longer_swaths.defense_length *= 1.5;
            prop_assert!(wins(&longer_swaths) <= base);

            let mut faster_defenders = p;
            faster_defenders.defender_speed =
                (p.defender_speed * 1.5).min(0.5 * (p.defender_speed + p.attacker_speed));
            prop_assert!(wins(&faster_defenders) <= base);
        }

        /// min_defenders brackets the verdict flip.
        #[test]
        fn min_defenders_brackets(p in valid_params()) {
            let n_min = min_defenders(
                p.circumference, p.defense_length, p.defender_speed, p.attacker_speed,
            ).unwrap();
            let with = |n: u32| {
                let mut q = p; q.defender_count = n;
                attacker_wins(&q).unwrap().attacker_wins
            };
            prop_assert!(!with(n_min));
            if n_min > 1 {
                prop_assert!(with(n_min - 1));
            }
        }

        /// Both case layouts tile the ring exactly.
        #[test]
        fn case_sums_match_circumference(p in valid_params()) {
            if p.defender_count as f64 * p.defense_length <= p.circumference {
                for cfg in [case1_config(&p).unwrap(), case2_config(&p).unwrap()] {
                    let gaps = cfg.state.gaps(p.defense_length).unwrap();
                    let total: f64 = gaps.iter().sum::<f64>()
                        + p.defender_count as f64 * p.defense_length;
                    prop_assert!((total - p.circumference).abs() <= 1e-12 * p.circumference);
                }
            }
        }
    }
}
