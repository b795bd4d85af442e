//! Deterministic parameter sweeps comparing the closed-form verdict with the
//! brute-force simulated one, point by point along one axis.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::model::{ModelError, ScenarioParams};
use crate::strategy::{brute_force_attacker, BruteForceError, BruteForceSettings};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep point {axis}={value}: {source}")]
    InvalidPoint { axis: SweepAxis, value: f64, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("defender_count value {0} is not a positive integer")]
    FractionalCount(f64),
    #[error("sweep has no values")]
    Empty,
}

fn invalid<E: std::error::Error + Send + Sync + 'static>(
    axis: SweepAxis,
    value: f64,
) -> impl FnOnce(E) -> SweepError {
    move |source| SweepError::InvalidPoint { axis, value, source: Box::new(source) }
}

/// Which scenario constant the sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Circumference,
    DefenderCount,
    DefenseLength,
    DefenderSpeed,
    AttackerSpeed,
    /// Attacker speed as a multiple of the (fixed) defender speed.
    SpeedRatio,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Circumference => "circumference",
            SweepAxis::DefenderCount => "defender_count",
            SweepAxis::DefenseLength => "defense_length",
            SweepAxis::DefenderSpeed => "defender_speed",
            SweepAxis::AttackerSpeed => "attacker_speed",
            SweepAxis::SpeedRatio => "speed_ratio",
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "circumference" => Ok(SweepAxis::Circumference),
            "defender_count" | "defenders" => Ok(SweepAxis::DefenderCount),
            "defense_length" => Ok(SweepAxis::DefenseLength),
            "defender_speed" => Ok(SweepAxis::DefenderSpeed),
            "attacker_speed" => Ok(SweepAxis::AttackerSpeed),
            "speed_ratio" => Ok(SweepAxis::SpeedRatio),
            other => Err(format!(
                "unknown axis {other:?}; expected circumference, defender_count, defense_length, \
                 defender_speed, attacker_speed or speed_ratio"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ScenarioParams,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub oracle: BruteForceSettings,
}

impl SweepSpec {
    /// Build a spec with one oracle shared by every point: the horizon covers
    /// `horizon_mult` relative circumnavigations of the largest swept
    /// scenario, and the switch grid defaults to 1/20th of that.
    pub fn with_auto_oracle(
        base: ScenarioParams,
        axis: SweepAxis,
        values: Vec<f64>,
        max_switches: u32,
        grid_step: Option<f64>,
        horizon_mult: f64,
    ) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::Empty);
        }
        let mut worst_lap = 0.0f64;
        for &value in &values {
            let p = apply_axis(&base, axis, value)?;
            let closing = p.attacker_speed - p.defender_speed;
            if closing > 0.0 && p.circumference > 0.0 {
                worst_lap = worst_lap.max(p.circumference / closing);
            }
        }
        if worst_lap == 0.0 {
            // every point is degenerate; leave a placeholder and let
            // run_sweep report the first invalid value
            worst_lap = 1.0;
        }
        let horizon = horizon_mult * worst_lap;
        let oracle = BruteForceSettings {
            max_switches,
            grid_step: grid_step.unwrap_or(horizon / 20.0),
            horizon,
            schedule_cap: crate::strategy::DEFAULT_SCHEDULE_CAP,
        };
        Ok(SweepSpec { base, axis, values, oracle })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub analytic_wins: bool,
    pub simulated_wins: bool,
    pub margin: f64,
    pub breach_time: Option<f64>,
    pub breach_pos: Option<f64>,
    pub schedules_searched: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn apply_axis(base: &ScenarioParams, axis: SweepAxis, value: f64) -> Result<ScenarioParams, SweepError> {
    let mut p = *base;
    match axis {
        SweepAxis::Circumference => p.circumference = value,
        SweepAxis::DefenderCount => {
            if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
                return Err(SweepError::FractionalCount(value));
            }
            p.defender_count = value as u32;
        }
        SweepAxis::DefenseLength => p.defense_length = value,
        SweepAxis::DefenderSpeed => p.defender_speed = value,
        SweepAxis::AttackerSpeed => p.attacker_speed = value,
        SweepAxis::SpeedRatio => p.attacker_speed = base.defender_speed * value,
    }
    Ok(p)
}

/// One row per swept value, in axis order. Each point gets the analytic
/// verdict and a brute-force attack from the touch-point configuration;
/// points the defenders cover outright are reported without a search.
/// Output is independent of worker count.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    if spec.values.is_empty() {
        return Err(SweepError::Empty);
    }
    let rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .map(|&value| -> Result<SweepRow, SweepError> {
            let p = apply_axis(&spec.base, spec.axis, value)?;
            p.ensure_valid().map_err(invalid::<ModelError>(spec.axis, value))?;
            let check = analytic::attacker_wins(&p).map_err(invalid::<AnalyticError>(spec.axis, value))?;
            let n_d = p.defender_count as f64 * p.defense_length;
            if n_d > p.circumference {
                // no disjoint layout exists; coverage is total
                return Ok(SweepRow {
                    axis_value: value,
                    analytic_wins: check.attacker_wins,
                    simulated_wins: false,
                    margin: check.margin,
                    breach_time: None,
                    breach_pos: None,
                    schedules_searched: 0,
                });
            }
            let config = analytic::case1_config(&p).map_err(invalid::<AnalyticError>(spec.axis, value))?;
            let report = brute_force_attacker(&p, &config.state, &spec.oracle)
                .map_err(invalid::<BruteForceError>(spec.axis, value))?;
            Ok(SweepRow {
                axis_value: value,
                analytic_wins: check.attacker_wins,
                simulated_wins: report.breach.is_some(),
                margin: check.margin,
                breach_time: report.breach.as_ref().map(|b| b.time),
                breach_pos: report.breach.as_ref().map(|b| b.position),
                schedules_searched: report.schedules_searched,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepTable { axis: spec.axis, rows })
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "axis_value,analytic_wins,simulated_wins,margin,breach_time,breach_pos,schedules_searched"
        )?;
        for row in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.axis_value,
                row.analytic_wins,
                row.simulated_wins,
                row.margin,
                opt(row.breach_time),
                opt(row.breach_pos),
                row.schedules_searched
            )?;
        }
        Ok(())
    }

    /// True when the verdict sequence crosses from hold to win at most once.
    pub fn single_crossing(&self) -> bool {
        let wins: Vec<bool> = self.rows.iter().map(|r| r.simulated_wins).collect();
        let flips = wins.windows(2).filter(|w| w[0] != w[1]).count();
        flips <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioParams {
        ScenarioParams::new(10.0, 3, 2.0, 1.0, 3.0)
    }

    fn oracle() -> BruteForceSettings {
        BruteForceSettings::with_grid_count(2, 10, 15.0)
    }

    #[test]
    fn circumference_sweep_crosses_at_the_threshold() {
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::Circumference,
            values: vec![9.5, 10.0, 10.5],
            oracle: oracle(),
        };
        let table = run_sweep(&spec).unwrap();
        let verdicts: Vec<bool> = table.rows.iter().map(|r| r.simulated_wins).collect();
        assert_eq!(verdicts, vec![false, false, true]);
        for row in &table.rows {
            assert_eq!(row.analytic_wins, row.simulated_wins);
        }
        assert!(table.single_crossing());
    }

    #[test]
    fn defender_count_sweep_crosses_at_min_defenders() {
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::DefenderCount,
            values: vec![2.0, 3.0, 4.0],
            oracle: oracle(),
        };
        let table = run_sweep(&spec).unwrap();
        let verdicts: Vec<bool> = table.rows.iter().map(|r| r.simulated_wins).collect();
        assert_eq!(verdicts, vec![true, false, false]);
        assert!(table.single_crossing());
    }

    #[test]
    fn speed_ratio_sweep_defends_the_boundary_point() {
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::SpeedRatio,
            values: vec![2.9, 3.0, 3.1],
            oracle: oracle(),
        };
        let table = run_sweep(&spec).unwrap();
        let verdicts: Vec<bool> = table.rows.iter().map(|r| r.simulated_wins).collect();
        assert_eq!(verdicts, vec![false, false, true]);
    }

    #[test]
    fn invalid_points_name_the_value() {
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::DefenderSpeed,
            values: vec![0.5, 3.0],
            oracle: oracle(),
        };
        let err = run_sweep(&spec).unwrap_err().to_string();
        assert!(err.contains("defender_speed=3"), "{err}");
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::DefenderCount,
            values: vec![2.5],
            oracle: oracle(),
        };
        assert!(matches!(run_sweep(&spec), Err(SweepError::FractionalCount(v)) if v == 2.5));
    }

    #[test]
    fn csv_is_stable() {
        let spec = SweepSpec {
            base: base(),
            axis: SweepAxis::Circumference,
            values: vec![9.5, 10.5],
            oracle: oracle(),
        };
        let table = run_sweep(&spec).unwrap();
        let mut first = Vec::new();
        table.write_csv(&mut first).unwrap();
        let again = run_sweep(&spec).unwrap();
        let mut second = Vec::new();
        again.write_csv(&mut second).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with(
            "axis_value,analytic_wins,simulated_wins,margin,breach_time,breach_pos,schedules_searched\n"
        ));
        assert!(text.lines().nth(1).unwrap().starts_with("9.5,false,false,"));
    }
}
