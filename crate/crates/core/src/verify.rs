//! Seeded randomized verification: every module's invariants exercised over
//! random scenario draws, concentrated near the win/lose boundary.
//!
//! Draws follow a fixed recipe: defender count uniform in 1..=8, defender
//! speed in (0,1], attacker/defender speed ratio in (1,5], defended length in
//! (0,1], and the circumference set to the defensible maximum scaled by a
//! cycling factor from {0.9, 1.0, 1.001, 1.5}.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::{self, case1_config, case2_config};
use crate::engine::{self, EventKind, SimSettings, Verdict};
use crate::geometry::{wrap, Direction, CONTACT_EPS};
use crate::model::{AttackerStrategy, GameState, ScenarioParams, CONSERVATION_REL_TOL};
use crate::strategy::{brute_force_attacker, BruteForceSettings};

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub count: u32,
}

#[derive(Clone, Debug)]
pub struct PropertyOutcome {
    pub name: &'static str,
    /// Draws on which the property was checked and held.
    pub passes: u64,
    pub failures: Vec<String>,
}

impl PropertyOutcome {
    fn new(name: &'static str) -> Self {
        PropertyOutcome { name, passes: 0, failures: Vec::new() }
    }

    fn record(&mut self, draw: usize, result: Result<(), String>) {
        match result {
            Ok(()) => self.passes += 1,
            Err(msg) => {
                if self.failures.len() < 5 {
                    self.failures.push(format!("draw {draw}: {msg}"));
                }
            }
        }
    }

    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub seed: u64,
    pub count: u32,
    pub properties: Vec<PropertyOutcome>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.properties.iter().all(|p| !p.failed())
    }
}

/// One random scenario; `factor` scales the defensible maximum circumference.
#[derive(Clone, Copy, Debug)]
pub struct Draw {
    pub params: ScenarioParams,
    pub factor: f64,
}

const FACTORS: [f64; 4] = [0.9, 1.0, 1.001, 1.5];

pub fn draws(cfg: &VerifyConfig) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count as usize)
        .map(|i| {
            let n = rng.gen_range(1..=8u32);
            let v = 1.0 - rng.gen::<f64>();
            let ratio = 1.0 + 4.0 * (1.0 - rng.gen::<f64>());
            let d = 1.0 - rng.gen::<f64>();
            let factor = FACTORS[i % FACTORS.len()];
            let mut params = ScenarioParams::new(1.0, n, d, v, v * ratio);
            let c_max = analytic::max_circumference(&params).expect("valid draw");
            params.circumference = c_max * factor;
            Draw { params, factor }
        })
        .collect()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn describe(p: &ScenarioParams) -> String {
    format!(
        "C={} n={} d={} v={} va={}",
        p.circumference, p.defender_count, p.defense_length, p.defender_speed, p.attacker_speed
    )
}

/// Run the whole suite. Deterministic in (seed, count).
pub fn run(cfg: &VerifyConfig) -> VerifyReport {
    let all = draws(cfg);
    let mut geometry = PropertyOutcome::new("geometry-identities");
    let mut case_sum = PropertyOutcome::new("case-circumference-identity");
    let mut time_shift = PropertyOutcome::new("case-time-shift");
    let mut boundary = PropertyOutcome::new("boundary-consistency");
    let mut rearrange = PropertyOutcome::new("rearrangement-consistency");
    let mut monotone = PropertyOutcome::new("verdict-monotonicity");
    let mut bracketing = PropertyOutcome::new("min-defenders-bracketing");
    let mut conservation = PropertyOutcome::new("gap-conservation");
    let mut no_breach = PropertyOutcome::new("critical-no-breach");
    let mut breach_above = PropertyOutcome::new("breach-above-critical");
    let mut cross_check = PropertyOutcome::new("engine-cross-check");
    let mut reflection = PropertyOutcome::new("reflection-symmetry");
    let mut schedule_mono = PropertyOutcome::new("schedule-monotonicity");
    let mut full_coverage = PropertyOutcome::new("full-coverage-defended");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e3779b97f4a7c15);

    for (i, draw) in all.iter().enumerate() {
        let p = draw.params;
        geometry.record(i, geometry_identities(&p, &mut rng));
        case_sum.record(i, case_circumference_identity(&p));
        boundary.record(i, boundary_consistency(&p));
        rearrange.record(i, rearrangement_consistency(&p));
        monotone.record(i, verdict_monotonicity(&p));
        bracketing.record(i, min_defenders_bracketing(&p));

        let feasible = p.defender_count as f64 * p.defense_length <= p.circumference;
        if feasible {
            match simulate_case1(&p) {
                Ok(outcome) => {
                    conservation.record(i, gap_conservation(&p, &outcome));
                    if draw.factor == 1.0 {
                        no_breach.record(i, critical_no_breach(&p, &outcome));
                        time_shift.record(i, case_time_shift(&p));
                    }
                    if draw.factor > 1.0 {
                        breach_above.record(i, breach_above_critical(&outcome));
                        schedule_mono.record(i, schedule_monotonicity(&p));
                    }
                    cross_check.record(i, engine_cross_check(&p, &outcome));
                    reflection.record(i, reflection_symmetry(&p));
                }
                Err(msg) => {
                    conservation.record(i, Err(msg));
                }
            }
        }
        full_coverage.record(i, full_coverage_defended(&p));
    }

    VerifyReport {
        seed: cfg.seed,
        count: cfg.count,
        properties: vec![
            geometry,
            case_sum,
            time_shift,
            boundary,
            rearrange,
            monotone,
            bracketing,
            conservation,
            no_breach,
            breach_above,
            cross_check,
            reflection,
            schedule_mono,
            full_coverage,
        ],
    }
}

fn simulate_case1(p: &ScenarioParams) -> Result<engine::SimOutcome, String> {
    let initial = case1_config(p).map_err(|e| e.to_string())?.state;
    engine::simulate(
        p,
        &initial,
        &AttackerStrategy::constant(Direction::Positive),
        &SimSettings::for_params(p),
    )
    .map_err(|e| format!("{} [{}]", e, describe(p)))
}

fn geometry_identities(p: &ScenarioParams, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let c = p.circumference;
    for _ in 0..8 {
        let raw = rng.gen_range(-3.0 * c..3.0 * c);
        let once = wrap(raw, c).map_err(|e| e.to_string())?;
        let twice = wrap(once.value(), c).map_err(|e| e.to_string())?;
        check(once.value() == twice.value(), || format!("wrap not idempotent at {raw}"))?;
        let other = wrap(rng.gen_range(0.0..c), c).map_err(|e| e.to_string())?;
        if once != other {
            let fwd = once.directed_arc(other, Direction::Positive).map_err(|e| e.to_string())?;
            let back = other.directed_arc(once, Direction::Positive).map_err(|e| e.to_string())?;
            check((fwd + back - c).abs() <= 1e-12 * c, || {
                format!("arcs {fwd} + {back} != {c}")
            })?;
        }
    }
    Ok(())
}

fn case_circumference_identity(p: &ScenarioParams) -> Result<(), String> {
    if p.defender_count as f64 * p.defense_length > p.circumference {
        return Ok(());
    }
    for (label, cfg) in [("case1", case1_config(p)), ("case2", case2_config(p))] {
        let state = cfg.map_err(|e| e.to_string())?.state;
        let gaps = state.gaps(p.defense_length).map_err(|e| e.to_string())?;
        let total: f64 =
            gaps.iter().sum::<f64>() + p.defender_count as f64 * p.clamped_defense_length();
        check((total - p.circumference).abs() <= CONSERVATION_REL_TOL * p.circumference, || {
            format!("{label} tiles {total} != C={} [{}]", p.circumference, describe(p))
        })?;
    }
    Ok(())
}

fn case_time_shift(p: &ScenarioParams) -> Result<(), String> {
    if p.defender_count < 2 {
        return Ok(());
    }
    let initial = case1_config(p).map_err(|e| e.to_string())?.state;
    let t12 = analytic::case_transition_time(p).map_err(|e| e.to_string())?;
    let shifted = engine::simulate_until(
        p,
        &initial,
        &AttackerStrategy::constant(Direction::Positive),
        t12,
    )
    .map_err(|e| e.to_string())?;
    let reference = case2_config(p).map_err(|e| e.to_string())?.state;
    let got = shifted.gaps(p.defense_length).map_err(|e| e.to_string())?;
    let want = reference.gaps(p.defense_length).map_err(|e| e.to_string())?;
    for (g, w) in got.iter().zip(&want) {
        check((g - w).abs() <= 1e-9, || {
            format!("gap profile {got:?} != {want:?} after shift {t12} [{}]", describe(p))
        })?;
    }
    Ok(())
}

fn boundary_consistency(p: &ScenarioParams) -> Result<(), String> {
    let mut at_max = *p;
    at_max.circumference = analytic::max_circumference(p).map_err(|e| e.to_string())?;
    let hold = analytic::attacker_wins(&at_max).map_err(|e| e.to_string())?;
    check(!hold.attacker_wins, || format!("threshold itself lost [{}]", describe(p)))?;
    for delta in [1e-9 * at_max.circumference, 0.7 * at_max.circumference] {
        let mut above = at_max;
        above.circumference += delta;
        let win = analytic::attacker_wins(&above).map_err(|e| e.to_string())?;
        check(win.attacker_wins, || format!("threshold + {delta} still held [{}]", describe(p)))?;
    }
    Ok(())
}

fn rearrangement_consistency(p: &ScenarioParams) -> Result<(), String> {
    let check_result = analytic::attacker_wins(p).map_err(|e| e.to_string())?;
    // the rearranged forms reach the same boundary through different
    // arithmetic; within float dust of it they may disagree by one ulp
    if check_result.margin.abs() <= CONSERVATION_REL_TOL * p.circumference {
        return Ok(());
    }
    let wins = check_result.attacker_wins;
    let g = analytic::gamma(p.defender_speed, p.attacker_speed).map_err(|e| e.to_string())?;
    let n = p.defender_count as f64;
    let cd = p.circumference / p.defense_length;
    check(wins == (cd > n + (n - 1.0) * g), || format!("count form disagrees [{}]", describe(p)))?;
    let threshold =
        analytic::max_defense_threshold(p.circumference, p.defender_count, p.defender_speed, p.attacker_speed)
            .map_err(|e| e.to_string())?;
    check(wins == (p.defense_length < threshold), || {
        format!("length form disagrees [{}]", describe(p))
    })?;
    if p.defender_count >= 2 {
        check(wins == (g < (cd - n) / (n - 1.0)), || {
            format!("gamma form disagrees [{}]", describe(p))
        })?;
    }
    match analytic::critical_speed_ratio(p.circumference, p.defense_length, p.defender_count) {
        Err(_) => check(!wins, || format!("covered by count yet won [{}]", describe(p))),
        Ok(ratio) => {
            if p.defender_speed > 0.0 {
                check(wins == (p.attacker_speed / p.defender_speed > ratio), || {
                    format!("speed form disagrees [{}]", describe(p))
                })
            } else {
                check(wins, || format!("static defenders, sparse cover, yet held [{}]", describe(p)))
            }
        }
    }
}

fn verdict_monotonicity(p: &ScenarioParams) -> Result<(), String> {
    let wins = |q: &ScenarioParams| analytic::attacker_wins(q).map(|w| w.attacker_wins);
    let base = wins(p).map_err(|e| e.to_string())?;
    let mut variants: Vec<(&str, ScenarioParams, bool)> = Vec::new();
    let mut q = *p;
    q.circumference *= 1.3;
    variants.push(("C up", q, true));
    q = *p;
    q.attacker_speed *= 1.3;
    variants.push(("va up", q, true));
    q = *p;
    q.defender_count += 1;
    variants.push(("n up", q, false));
    q = *p;
    q.defense_length *= 1.3;
    variants.push(("d up", q, false));
    q = *p;
    q.defender_speed = 0.5 * (p.defender_speed + p.attacker_speed);
    variants.push(("v up", q, false));
    for (label, q, favors_attacker) in variants {
        let w = wins(&q).map_err(|e| e.to_string())?;
        let ok = if favors_attacker { w >= base } else { w <= base };
        check(ok, || format!("verdict not monotone under {label} [{}]", describe(p)))?;
    }
    Ok(())
}

fn min_defenders_bracketing(p: &ScenarioParams) -> Result<(), String> {
    let n_min =
        analytic::min_defenders(p.circumference, p.defense_length, p.defender_speed, p.attacker_speed)
            .map_err(|e| e.to_string())?;
    let with = |n: u32| {
        let mut q = *p;
        q.defender_count = n;
        analytic::attacker_wins(&q).map(|w| w.attacker_wins)
    };
    check(!with(n_min).map_err(|e| e.to_string())?, || {
        format!("n={n_min} still loses [{}]", describe(p))
    })?;
    if n_min > 1 {
        check(with(n_min - 1).map_err(|e| e.to_string())?, || {
            format!("n={} already holds [{}]", n_min - 1, describe(p))
        })?;
    }
    Ok(())
}

fn gap_conservation(p: &ScenarioParams, outcome: &engine::SimOutcome) -> Result<(), String> {
    let expected = p.circumference - p.defender_count as f64 * p.clamped_defense_length();
    for state in std::iter::once(&outcome.initial).chain(outcome.events.iter().map(|e| &e.snapshot)) {
        let total: f64 = state.gaps(p.defense_length).map_err(|e| e.to_string())?.iter().sum();
        check((total - expected).abs() <= CONSERVATION_REL_TOL * p.circumference, || {
            format!("gap sum {total} != {expected} at t={} [{}]", state.time, describe(p))
        })?;
    }
    Ok(())
}

/// Gap between the old and new blocker at a handoff snapshot.
fn handoff_gap(p: &ScenarioParams, state: &GameState) -> Result<f64, String> {
    let gaps = state.gaps(p.defense_length).map_err(|e| e.to_string())?;
    let n = state.defender_count();
    let idx = match state.attacker.direction {
        Direction::Positive => (state.blocker_index + n - 1) % n,
        Direction::Negative => state.blocker_index,
    };
    Ok(gaps[idx])
}

fn critical_no_breach(p: &ScenarioParams, outcome: &engine::SimOutcome) -> Result<(), String> {
    check(!outcome.verdict.is_breach(), || {
        format!("breach at the defensible threshold [{}]", describe(p))
    })?;
    for event in outcome.events.iter().filter(|e| e.kind == EventKind::Handoff) {
        let gap = handoff_gap(p, &event.snapshot)?;
        check(gap <= CONTACT_EPS, || {
            format!("handoff with open gap {gap} at t={} [{}]", event.time, describe(p))
        })?;
    }
    Ok(())
}

fn breach_above_critical(outcome: &engine::SimOutcome) -> Result<(), String> {
    match outcome.verdict {
        Verdict::Breach { time, .. } if time > 0.0 && time.is_finite() => Ok(()),
        Verdict::Breach { time, .. } => Err(format!("breach at degenerate time {time}")),
        Verdict::Defended { .. } => Err("defense held above the threshold".to_string()),
    }
}

fn engine_cross_check(p: &ScenarioParams, event_driven: &engine::SimOutcome) -> Result<(), String> {
    let margin = analytic::attacker_wins(p).map_err(|e| e.to_string())?.margin;
    if margin.abs() <= 1e-6 * p.circumference {
        return Ok(()); // inside the exclusion band
    }
    let dt = 1e-3;
    let horizon = match event_driven.verdict {
        Verdict::Breach { time, .. } => time + 10.0 * dt,
        Verdict::Defended { time, .. } => time,
    };
    if horizon / dt > 3e5 {
        return Ok(()); // slow-timescale draw; covered by the event engine
    }
    let initial = case1_config(p).map_err(|e| e.to_string())?.state;
    let stepped = engine::fixed_step_simulate(
        p,
        &initial,
        &AttackerStrategy::constant(Direction::Positive),
        dt,
        horizon,
    )
    .map_err(|e| e.to_string())?;
    check(stepped.verdict.is_breach() == event_driven.verdict.is_breach(), || {
        format!(
            "verdicts disagree: stepped {:?} vs events {:?} [{}]",
            stepped.verdict,
            event_driven.verdict,
            describe(p)
        )
    })?;
    if let (Some((tf, _)), Some((te, _))) =
        (stepped.verdict.breach(), event_driven.verdict.breach())
    {
        let tol = 2.0 * dt * p.attacker_speed.max(1.0);
        check((tf - te).abs() <= tol, || {
            format!("breach times {tf} vs {te} beyond {tol} [{}]", describe(p))
        })?;
    }
    Ok(())
}

/// Mirror a touch-point start and run the mirrored play; event kinds and
/// times must match the original to rounding.
fn reflection_symmetry(p: &ScenarioParams) -> Result<(), String> {
    let original = case1_config(p).map_err(|e| e.to_string())?.state;
    let mirrored = mirror_state(&original, p).map_err(|e| e.to_string())?;
    let settings = SimSettings::for_params(p);
    let fwd = engine::simulate(p, &original, &AttackerStrategy::constant(Direction::Positive), &settings)
        .map_err(|e| e.to_string())?;
    let bwd = engine::simulate(p, &mirrored, &AttackerStrategy::constant(Direction::Negative), &settings)
        .map_err(|e| e.to_string())?;
    // gap bookkeeping events sit at exact-tie instants and may reorder under
    // mirrored rounding; the decisive events must line up
    let decisive = |k: &EventKind| {
        matches!(k, EventKind::Handoff | EventKind::Breach | EventKind::AttackerSwitch | EventKind::HorizonReached)
    };
    let fwd_seq: Vec<(EventKind, f64)> =
        fwd.events.iter().filter(|e| decisive(&e.kind)).map(|e| (e.kind, e.time)).collect();
    let bwd_seq: Vec<(EventKind, f64)> =
        bwd.events.iter().filter(|e| decisive(&e.kind)).map(|e| (e.kind, e.time)).collect();
    check(fwd_seq.len() == bwd_seq.len(), || {
        format!("event counts differ: {} vs {} [{}]", fwd_seq.len(), bwd_seq.len(), describe(p))
    })?;
    for ((ka, ta), (kb, tb)) in fwd_seq.iter().zip(&bwd_seq) {
        check(ka == kb, || format!("event kinds differ: {ka:?} vs {kb:?} [{}]", describe(p)))?;
        let tol = 1e-12 * ta.abs().max(1.0);
        check((ta - tb).abs() <= tol, || {
            format!("event times differ: {ta} vs {tb} [{}]", describe(p))
        })?;
    }
    match (&fwd.verdict, &bwd.verdict) {
        (Verdict::Breach { position: pa, .. }, Verdict::Breach { position: pb, .. }) => {
            let want = crate::geometry::wrap_value(-pa, p.circumference);
            let diff = (want - pb).abs();
            let diff = diff.min(p.circumference - diff);
            check(diff <= 1e-9 * p.circumference.max(1.0), || {
                format!("breach positions not mirrored: {pa} vs {pb} [{}]", describe(p))
            })
        }
        (Verdict::Defended { .. }, Verdict::Defended { .. }) => Ok(()),
        (a, b) => Err(format!("verdicts differ: {a:?} vs {b:?} [{}]", describe(p))),
    }
}

/// Reflect every position through zero and relabel defenders so they remain
/// in positive cyclic order.
pub fn mirror_state(state: &GameState, p: &ScenarioParams) -> Result<GameState, String> {
    let c = p.circumference;
    let defenders: Vec<_> = state
        .defenders
        .iter()
        .rev()
        .map(|a| {
            let mut m = *a;
            m.position = wrap(-a.position.value(), c).map_err(|e| e.to_string())?;
            m.direction = a.direction.flipped();
            Ok(m)
        })
        .collect::<Result<_, String>>()?;
    let n = defenders.len();
    let mut attacker = state.attacker;
    attacker.position = wrap(-state.attacker.position.value(), c).map_err(|e| e.to_string())?;
    attacker.direction = state.attacker.direction.flipped();
    Ok(GameState {
        time: state.time,
        attacker,
        defenders,
        blocker_index: n - 1 - state.blocker_index,
    })
}

fn schedule_monotonicity(p: &ScenarioParams) -> Result<(), String> {
    let initial = case1_config(p).map_err(|e| e.to_string())?.state;
    let span = 2.0 * p.circumference / (p.attacker_speed - p.defender_speed);
    let run = |switches: u32, grid: u32| {
        brute_force_attacker(
            p,
            &initial,
            &BruteForceSettings::with_grid_count(switches, grid, span),
        )
        .map_err(|e| e.to_string())
        .map(|r| r.breach.map(|b| b.time))
    };
    let k0 = run(0, 6)?;
    let k2 = run(2, 6)?;
    let fine = run(2, 12)?;
    let base = k0.ok_or_else(|| format!("no breach at K=0 above threshold [{}]", describe(p)))?;
    for (label, t) in [("K=2", k2), ("K=2 refined", fine)] {
        let t = t.ok_or_else(|| format!("{label} lost the breach [{}]", describe(p)))?;
        check(t <= base + 1e-12 * base.max(1.0), || {
            format!("{label} breach {t} worse than K=0 {base} [{}]", describe(p))
        })?;
    }
    Ok(())
}

fn full_coverage_defended(p: &ScenarioParams) -> Result<(), String> {
    let mut q = *p;
    q.circumference = q.defender_count as f64 * q.defense_length;
    let initial = case1_config(&q).map_err(|e| e.to_string())?.state;
    let span = 2.0 * q.circumference / (q.attacker_speed - q.defender_speed);
    let report = brute_force_attacker(
        &q,
        &initial,
        &BruteForceSettings::with_grid_count(2, 6, span),
    )
    .map_err(|e| e.to_string())?;
    check(report.breach.is_none(), || {
        format!("full coverage breached [{}]", describe(&q))
    })
}

/// Agreement between a margin claim and an observed simulation verdict,
/// outside the numeric exclusion band. Separated out so a corrupted closed
/// form is provably caught by the suite.
pub fn boundary_agreement(circumference: f64, margin: f64, breached: bool) -> Result<(), String> {
    if margin.abs() <= 1e-6 * circumference {
        return Ok(());
    }
    if (margin > 0.0) == breached {
        Ok(())
    } else {
        Err(format!(
            "margin {margin} predicts {} but simulation {}",
            if margin > 0.0 { "breach" } else { "hold" },
            if breached { "breached" } else { "held" }
        ))
    }
}
