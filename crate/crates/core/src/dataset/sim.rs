// SPDX-License-Identifier: Apache-2.0

//! Synthetic two-group traffic-light PLC process with injected anomalies.
//!
//! The controller cycles through four phases of `cycle_length_ticks` total:
//!
//! ```text
//! phase 0: A green,  B red     (2/5 of the cycle)
//! phase 1: A yellow, B red     (1/10 of the cycle)
//! phase 2: A red,    B green   (2/5 of the cycle)
//! phase 3: A red,    B yellow  (remainder)
//! ```
//!
//! Each logged row holds ten columns: the six lamp bits, two latched request
//! bits (set by a button press while the group is not green, cleared when the
//! group turns green) and two sawtooth counters, ticks since phase start and
//! ticks since cycle start, both divided by the cycle length so they lie in
//! `[0, 1)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{FeatureMatrix, Label, LabeledSet, Scenario};
use crate::error::{Error, Result};
use crate::kvconfig::KvMap;
use crate::seed::{derive_seed, rng_from_seed};

pub const FEATURE_NAMES: [&str; 10] = [
    "green_a",
    "yellow_a",
    "red_a",
    "green_b",
    "yellow_b",
    "red_b",
    "request_a",
    "request_b",
    "phase_timer",
    "cycle_timer",
];

const GREEN: usize = 0;
const YELLOW: usize = 1;
const RED: usize = 2;
const PHASE_TIMER: usize = 8;
const CYCLE_TIMER: usize = 9;

const MIN_CYCLE_TICKS: usize = 20;
/// Expected request presses per cycle while a request is not latched.
const PRESSES_PER_CYCLE: f64 = 3.0;

pub const DEFAULT_CYCLE_TICKS: usize = 600;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_records: usize,
    pub anomaly_fraction: f64,
    /// Weights over scenarios 1..=7, in order.
    pub scenario_mix: [f64; 7],
    pub cycle_length_ticks: usize,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_records: 5000,
            anomaly_fraction: 0.10,
            scenario_mix: SIGNAL_MIX,
            cycle_length_ticks: DEFAULT_CYCLE_TICKS,
            rng_seed: 0,
        }
    }
}

/// Uniform over the five lamp/input scenarios.
pub const SIGNAL_MIX: [f64; 7] = [0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0];
/// 90% timing-counter anomalies, the rest spread over the signal scenarios.
pub const TIMING_MIX: [f64; 7] = [0.02, 0.02, 0.02, 0.02, 0.02, 0.45, 0.45];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::InvalidConfig("n_records must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return Err(Error::InvalidConfig(format!(
                "anomaly_fraction {} outside [0, 1]",
                self.anomaly_fraction
            )));
        }
        if self.scenario_mix.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("scenario weights must be nonnegative".into()));
        }
        let total: f64 = self.scenario_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "scenario weights sum to {total}, expected 1"
            )));
        }
        if self.cycle_length_ticks < MIN_CYCLE_TICKS {
            return Err(Error::InvalidConfig(format!(
                "cycle_length_ticks must be at least {MIN_CYCLE_TICKS}"
            )));
        }
        Ok(())
    }

    /// Reads `n_records`, `anomaly_fraction`, `scenario_mix` (seven comma
    /// separated weights), `cycle_length_ticks` and `rng_seed`; absent keys
    /// keep their defaults.
    pub fn from_kv(map: &KvMap) -> Result<Self> {
        let mut cfg = SimConfig::default();
        if let Some(v) = map.get_parsed::<usize>("n_records")? {
            cfg.n_records = v;
        }
        if let Some(v) = map.get_parsed::<f64>("anomaly_fraction")? {
            cfg.anomaly_fraction = v;
        }
        if let Some(raw) = map.get("scenario_mix") {
            let weights: Vec<f64> = raw
                .split(',')
                .map(|w| w.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("scenario_mix: {e}")))?;
            cfg.scenario_mix = weights.try_into().map_err(|w: Vec<f64>| {
                Error::InvalidConfig(format!("scenario_mix needs 7 weights, got {}", w.len()))
            })?;
        }
        if let Some(v) = map.get_parsed::<usize>("cycle_length_ticks")? {
            cfg.cycle_length_ticks = v;
        }
        if let Some(v) = map.get_parsed::<u64>("rng_seed")? {
            cfg.rng_seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Phase layout of one controller cycle.
#[derive(Clone, Copy, Debug)]
pub struct CycleLayout {
    pub cycle: usize,
    pub durations: [usize; 4],
    pub starts: [usize; 4],
}

impl CycleLayout {
    pub fn new(cycle: usize) -> Self {
        let green = cycle * 2 / 5;
        let yellow = (cycle / 10).max(2);
        let durations = [green, yellow, green, cycle - 2 * green - yellow];
        let starts = [0, green, green + yellow, 2 * green + yellow];
        Self {
            cycle,
            durations,
            starts,
        }
    }

    pub fn phase_of(&self, tick: usize) -> usize {
        (0..4).rev().find(|&p| tick >= self.starts[p]).unwrap()
    }

    /// Lamp bits `[group][green, yellow, red]` shown in a phase.
    pub fn lamps(phase: usize) -> [[bool; 3]; 2] {
        let on = |lamp: usize| {
            let mut l = [false; 3];
            l[lamp] = true;
            l
        };
        match phase {
            0 => [on(GREEN), on(RED)],
            1 => [on(YELLOW), on(RED)],
            2 => [on(RED), on(GREEN)],
            3 => [on(RED), on(YELLOW)],
            _ => unreachable!("four phases"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct ProcessState {
    lamps: [[bool; 3]; 2],
    requests: [bool; 2],
    phase_ticks: usize,
    cycle_ticks: usize,
}

impl ProcessState {
    fn nominal(layout: &CycleLayout, tick: usize, requests: [bool; 2]) -> Self {
        let phase = layout.phase_of(tick);
        Self {
            lamps: CycleLayout::lamps(phase),
            requests,
            phase_ticks: tick - layout.starts[phase],
            cycle_ticks: tick,
        }
    }

    fn encode(&self, cycle: usize, out: &mut Vec<f64>) {
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        for group in &self.lamps {
            out.extend(group.iter().map(|&b| bit(b)));
        }
        out.extend(self.requests.iter().map(|&b| bit(b)));
        out.push(self.phase_ticks as f64 / cycle as f64);
        out.push(self.cycle_ticks as f64 / cycle as f64);
    }
}

/// Outcome of checking one encoded row against the process rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowCheck {
    /// Exactly one lamp lit per group.
    pub one_lamp_per_group: bool,
    /// Never both groups green.
    pub no_conflicting_greens: bool,
    /// Counters lie on the tick grid inside `[0, cycle)`.
    pub timers_in_range: bool,
    /// A group's request bit is clear while that group is green.
    pub requests_consistent: bool,
    /// Lamps are the ones scheduled for the cycle counter's phase.
    pub lamps_match_cycle: bool,
    /// Phase counter equals cycle counter minus the phase start.
    pub phase_timer_matches: bool,
}

impl RowCheck {
    /// Safety predicate: no conflicting greens and counters in range.
    pub fn is_safe(&self) -> bool {
        self.no_conflicting_greens && self.timers_in_range
    }

    /// Rules that do not involve the counters.
    pub fn signals_ok(&self) -> bool {
        self.one_lamp_per_group && self.no_conflicting_greens && self.requests_consistent
    }

    pub fn timing_ok(&self) -> bool {
        self.timers_in_range && self.lamps_match_cycle && self.phase_timer_matches
    }

    pub fn all_ok(&self) -> bool {
        self.signals_ok() && self.timing_ok()
    }
}

/// Checks an encoded row of [`FEATURE_NAMES`] against the process rules.
pub fn check_row(row: &[f64], cycle_length_ticks: usize) -> RowCheck {
    let layout = CycleLayout::new(cycle_length_ticks);
    let on = |v: f64| v >= 0.5;
    let lamps = [
        [on(row[0]), on(row[1]), on(row[2])],
        [on(row[3]), on(row[4]), on(row[5])],
    ];
    let requests = [on(row[6]), on(row[7])];

    let to_ticks = |v: f64| {
        let t = v * cycle_length_ticks as f64;
        let r = t.round();
        ((t - r).abs() < 1e-6 && r >= 0.0 && r < cycle_length_ticks as f64).then_some(r as usize)
    };
    let phase_ticks = to_ticks(row[PHASE_TIMER]);
    let cycle_ticks = to_ticks(row[CYCLE_TIMER]);

    let one_lamp_per_group = lamps.iter().all(|g| g.iter().filter(|&&b| b).count() == 1);
    let no_conflicting_greens = !(lamps[0][GREEN] && lamps[1][GREEN]);
    let requests_consistent = (0..2).all(|g| !(lamps[g][GREEN] && requests[g]));

    let (lamps_match_cycle, phase_timer_matches) = match (phase_ticks, cycle_ticks) {
        (Some(p), Some(c)) => {
            let phase = layout.phase_of(c);
            (
                lamps == CycleLayout::lamps(phase),
                p == c - layout.starts[phase],
            )
        }
        _ => (false, false),
    };

    RowCheck {
        one_lamp_per_group,
        no_conflicting_greens,
        timers_in_range: phase_ticks.is_some() && cycle_ticks.is_some(),
        requests_consistent,
        lamps_match_cycle,
        phase_timer_matches,
    }
}

pub fn simulate_tlight(config: &SimConfig) -> Result<LabeledSet> {
    config.validate()?;
    let layout = CycleLayout::new(config.cycle_length_ticks);
    let cycle = config.cycle_length_ticks;
    let n = config.n_records;
    let mut rng = rng_from_seed(config.rng_seed);

    // Normal stream, after one warm-up cycle so request latches are settled.
    let press = PRESSES_PER_CYCLE / cycle as f64;
    let start = rng.random_range(0..cycle);
    let mut requests = [false; 2];
    let mut states = Vec::with_capacity(n);
    for step in 0..cycle + n {
        let tick = (start + step) % cycle;
        let phase = layout.phase_of(tick);
        let lamps = CycleLayout::lamps(phase);
        for g in 0..2 {
            if lamps[g][GREEN] {
                requests[g] = false;
            } else if !requests[g] && rng.random_bool(press) {
                requests[g] = true;
            }
        }
        if step >= cycle {
            states.push(ProcessState::nominal(&layout, tick, requests));
        }
    }

    let n_anomalies = (config.anomaly_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut assignments = scenario_counts(&config.scenario_mix, n_anomalies)
        .into_iter()
        .zip(Scenario::ALL)
        .flat_map(|(count, s)| std::iter::repeat_n(s, count))
        .collect::<Vec<_>>();
    assignments.shuffle(&mut rng);

    let mut labels = vec![Label::Normal; n];
    let mut tags = vec![None; n];
    for (&idx, &scenario) in order.iter().zip(&assignments) {
        states[idx] = inject(scenario, &layout, &states[idx], &mut rng);
        labels[idx] = Label::Anomaly;
        tags[idx] = Some(scenario);
    }

    let mut values = Vec::with_capacity(n * FEATURE_NAMES.len());
    for state in &states {
        state.encode(cycle, &mut values);
    }
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let features = FeatureMatrix::new(n, FEATURE_NAMES.len(), values, names)?;
    LabeledSet::new(features, labels, tags)
}

/// Largest-remainder apportionment of `total` over the weights; ties go to
/// the lower scenario id.
fn scenario_counts(weights: &[f64; 7], total: usize) -> [usize; 7] {
    let mut counts = [0usize; 7];
    let mut remainders = Vec::with_capacity(7);
    for (k, &w) in weights.iter().enumerate() {
        let exact = w * total as f64;
        counts[k] = exact.floor() as usize;
        remainders.push((exact - exact.floor(), k));
    }
    let assigned: usize = counts.iter().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in remainders.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn random_tick_in(layout: &CycleLayout, phases: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let phase = phases[rng.random_range(0..phases.len())];
    layout.starts[phase] + rng.random_range(0..layout.durations[phase])
}

fn clear_green_requests(state: &mut ProcessState) {
    for g in 0..2 {
        if state.lamps[g][GREEN] {
            state.requests[g] = false;
        }
    }
}

fn inject(
    scenario: Scenario,
    layout: &CycleLayout,
    base: &ProcessState,
    rng: &mut ChaCha8Rng,
) -> ProcessState {
    let mut s = *base;
    let phase = layout.phase_of(base.cycle_ticks);
    match scenario {
        Scenario::StuckOutput => {
            let active = if s.lamps[0][RED] { 1 } else { 0 };
            if rng.random_bool(0.5) {
                // red relay of the running group welded on
                s.lamps[active][RED] = true;
            } else {
                s.lamps[1 - active][YELLOW] = true;
            }
        }
        Scenario::IllegalGreens => {
            s.lamps = [[true, false, false], [true, false, false]];
            s.requests = [false, false];
        }
        Scenario::DroppedTransition => {
            // yellow never shown: the green lamps persist into the yellow slot
            let tick = random_tick_in(layout, &[1, 3], rng);
            let yellow_phase = layout.phase_of(tick);
            let green_phase = yellow_phase - 1;
            s.lamps = CycleLayout::lamps(green_phase);
            s.cycle_ticks = tick;
            s.phase_ticks = tick - layout.starts[green_phase];
            clear_green_requests(&mut s);
        }
        Scenario::InvertedInput => {
            let tick = random_tick_in(layout, &[0, 2], rng);
            s = ProcessState::nominal(layout, tick, [false, false]);
            let green_group = if s.lamps[0][GREEN] { 0 } else { 1 };
            s.requests[green_group] = true;
            s.requests[1 - green_group] = !base.requests[1 - green_group];
        }
        Scenario::PrematureSkip => {
            let offset = rng.random_range(0..layout.durations[phase].div_ceil(2));
            s.cycle_ticks = layout.starts[phase] + offset;
            s.phase_ticks = offset;
            s.lamps = CycleLayout::lamps((phase + 1) % 4);
            clear_green_requests(&mut s);
        }
        Scenario::TimerFreeze => {
            // both counters stuck at the value they held when they froze, some
            // time before the last phase change
            let cycle = layout.cycle;
            let lag = base.phase_ticks + 1 + rng.random_range(0..layout.durations[(phase + 3) % 4]);
            let frozen_tick = (base.cycle_ticks + cycle - lag % cycle) % cycle;
            let frozen = ProcessState::nominal(layout, frozen_tick, base.requests);
            s.phase_ticks = frozen.phase_ticks;
            s.cycle_ticks = frozen.cycle_ticks;
        }
        Scenario::TimerJitter => {
            let max_jitter = (layout.cycle / 6) as i64;
            loop {
                let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-max_jitter..=max_jitter);
                let c = base.cycle_ticks as i64 + jitter(rng);
                let p = base.phase_ticks as i64 + jitter(rng);
                if c < 0 || p < 0 || c >= layout.cycle as i64 || p >= layout.cycle as i64 {
                    continue;
                }
                let (c, p) = (c as usize, p as usize);
                let cphase = layout.phase_of(c);
                let consistent = CycleLayout::lamps(cphase) == s.lamps && p == c - layout.starts[cphase];
                if !consistent {
                    s.cycle_ticks = c;
                    s.phase_ticks = p;
                    break;
                }
            }
        }
    }
    s
}

/// Size, anomaly fraction and scenario mix of one evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSetSpec {
    pub name: &'static str,
    pub n_records: usize,
    pub anomaly_fraction: f64,
    pub scenario_mix: [f64; 7],
}

pub const TRAIN_RECORDS: usize = 41580;

/// The five evaluation sets. Sets 4 and 5 are dominated by timing anomalies.
pub fn paper_test_specs() -> [TestSetSpec; 5] {
    [
        TestSetSpec { name: "test1", n_records: 5000, anomaly_fraction: 0.10, scenario_mix: SIGNAL_MIX },
        TestSetSpec { name: "test2", n_records: 7000, anomaly_fraction: 0.10, scenario_mix: SIGNAL_MIX },
        TestSetSpec { name: "test3", n_records: 13130, anomaly_fraction: 0.20, scenario_mix: SIGNAL_MIX },
        TestSetSpec { name: "test4", n_records: 15000, anomaly_fraction: 0.30, scenario_mix: TIMING_MIX },
        TestSetSpec { name: "test5", n_records: 18270, anomaly_fraction: 0.50, scenario_mix: TIMING_MIX },
    ]
}

impl TestSetSpec {
    pub fn sim_config(&self, rng_seed: u64) -> SimConfig {
        SimConfig {
            n_records: self.n_records,
            anomaly_fraction: self.anomaly_fraction,
            scenario_mix: self.scenario_mix,
            rng_seed,
            ..SimConfig::default()
        }
    }
}

/// An all-normal training set plus the five evaluation sets.
#[derive(Clone, Debug, PartialEq)]
pub struct PaperSplits {
    pub train: LabeledSet,
    pub tests: Vec<LabeledSet>,
}

pub fn make_paper_splits(rng_seed: u64) -> PaperSplits {
    let train_cfg = SimConfig {
        n_records: TRAIN_RECORDS,
        anomaly_fraction: 0.0,
        rng_seed: derive_seed(rng_seed, "dataset/train"),
        ..SimConfig::default()
    };
    let train = simulate_tlight(&train_cfg).expect("built-in config is valid");
    let tests = paper_test_specs()
        .iter()
        .map(|spec| {
            let seed = derive_seed(rng_seed, &format!("dataset/{}", spec.name));
            simulate_tlight(&spec.sim_config(seed)).expect("built-in config is valid")
        })
        .collect();
    PaperSplits { train, tests }
}
