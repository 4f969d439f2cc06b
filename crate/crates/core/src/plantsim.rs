//! Fixed-step simulation of the ring's pneumatic and hydraulic hardware.
//!
//! The pneumatic side is a single chamber fed through a fast ON/OFF valve
//! while the isolation valve is open, and sealed with a syringe actuator when
//! it is closed. The thermal side is a mixing tank fed by hot and cold pumps
//! under proportional control, recirculating through a tube whose outer
//! surface temperature lags the tank. Return flow from the tube couples the
//! tank back to the tube temperature. Plant constants are assumptions; none
//! are measured values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commands::CommandSet;
use crate::roughness::ValveState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step {dt} s exceeds the limit {limit} s ({reason})")]
    DtTooLarge { dt: f64, limit: f64, reason: &'static str },
    #[error("invalid plant parameter: {0}")]
    InvalidParams(String),
    #[error("preparation timed out after {timeout_s} s: tube at {reached_c:.2} °C, target {target_c:.2} °C")]
    PreparationTimeout { target_c: f64, reached_c: f64, timeout_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PneumaticParams {
    pub supply_kpa: f64,
    pub fill_tau_s: f64,
    pub vent_tau_s: f64,
    /// Chamber pressure change per mm of syringe travel while sealed.
    pub syringe_gain_kpa_per_mm: f64,
    pub valve_f_max_hz: f64,
}

impl Default for PneumaticParams {
    fn default() -> Self {
        Self { supply_kpa: 75.0, fill_tau_s: 0.020, vent_tau_s: 0.025, syringe_gain_kpa_per_mm: 5.0, valve_f_max_hz: 300.0 }
    }
}

impl PneumaticParams {
    pub fn validate(&self) -> Result<(), SimError> {
        positive(&[
            ("supply_kpa", self.supply_kpa),
            ("fill_tau_s", self.fill_tau_s),
            ("vent_tau_s", self.vent_tau_s),
            ("syringe_gain_kpa_per_mm", self.syringe_gain_kpa_per_mm),
            ("valve_f_max_hz", self.valve_f_max_hz),
        ])
    }

    pub fn max_dt(&self) -> f64 {
        1.0 / (10.0 * self.valve_f_max_hz)
    }

    /// Peak-to-peak steady-state chamber ripple under a square valve drive,
    /// from the exact first-order response over one period.
    pub fn pwm_ripple_kpa(&self, on_s: f64, off_s: f64) -> f64 {
        let a = (-on_s / self.fill_tau_s).exp();
        let b = (-off_s / self.vent_tau_s).exp();
        let p_max = self.supply_kpa * (1.0 - a) / (1.0 - a * b);
        p_max * (1.0 - b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalPlantParams {
    pub hot_tank_c: f64,
    pub cold_tank_c: f64,
    pub mix_volume_l: f64,
    pub pump_max_lps: f64,
    /// Constant return flow from the tube back into the mixing tank.
    pub circulation_lps: f64,
    pub tube_tau_s: f64,
    pub kp: f64,
    pub ambient_c: f64,
    pub ambient_tau_s: f64,
}

impl Default for ThermalPlantParams {
    fn default() -> Self {
        Self {
            hot_tank_c: 42.5,
            cold_tank_c: 4.0,
            mix_volume_l: 0.05,
            pump_max_lps: 0.3,
            circulation_lps: 0.4,
            tube_tau_s: 3.0,
            kp: 0.4,
            ambient_c: 22.0,
            ambient_tau_s: 600.0,
        }
    }
}

impl ThermalPlantParams {
    pub fn validate(&self) -> Result<(), SimError> {
        positive(&[
            ("mix_volume_l", self.mix_volume_l),
            ("pump_max_lps", self.pump_max_lps),
            ("circulation_lps", self.circulation_lps),
            ("tube_tau_s", self.tube_tau_s),
            ("kp", self.kp),
            ("ambient_tau_s", self.ambient_tau_s),
        ])?;
        if !(self.hot_tank_c > self.cold_tank_c) {
            return Err(SimError::InvalidParams(format!("hot tank {} °C must exceed cold tank {} °C", self.hot_tank_c, self.cold_tank_c)));
        }
        Ok(())
    }

    /// Largest stable step: a tenth of the tube lag, and no more than the
    /// mixing tank's fastest exchange time.
    pub fn max_dt(&self) -> f64 {
        let exchange = self.mix_volume_l / (self.pump_max_lps + self.circulation_lps);
        (self.tube_tau_s / 10.0).min(exchange)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub dt_s: f64,
    /// Temperature held while sliding.
    pub neutral_temp_c: f64,
    pub prepare_tolerance_c: f64,
    pub prepare_timeout_s: f64,
    pub countdown_s: f64,
    /// Press-phase tracking is scored after this settling time.
    pub tracking_settle_s: f64,
    pub tracking_tolerance_c: f64,
    /// One log row per this many steps.
    pub log_every: usize,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            dt_s: 1.0 / 3000.0,
            neutral_temp_c: 32.0,
            prepare_tolerance_c: 0.3,
            prepare_timeout_s: 120.0,
            countdown_s: 5.0,
            tracking_settle_s: 2.0,
            tracking_tolerance_c: 0.5,
            log_every: 30,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub pneumatic: PneumaticParams,
    pub thermal: ThermalPlantParams,
    pub session: SessionParams,
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.pneumatic.validate()?;
        self.thermal.validate()?;
        let s = &self.session;
        positive(&[
            ("dt_s", s.dt_s),
            ("prepare_tolerance_c", s.prepare_tolerance_c),
            ("prepare_timeout_s", s.prepare_timeout_s),
            ("tracking_tolerance_c", s.tracking_tolerance_c),
        ])?;
        if s.countdown_s < 0.0 || s.tracking_settle_s < 0.0 {
            return Err(SimError::InvalidParams("countdown_s and tracking_settle_s must be non-negative".into()));
        }
        if s.log_every == 0 {
            return Err(SimError::InvalidParams("log_every must be at least 1".into()));
        }
        check_dt(s.dt_s, self.pneumatic.max_dt(), "valve toggles must be resolved")?;
        check_dt(s.dt_s, self.thermal.max_dt(), "thermal loop stability")
    }
}

fn positive(fields: &[(&str, f64)]) -> Result<(), SimError> {
    match fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        Some((name, v)) => Err(SimError::InvalidParams(format!("{name} must be positive, got {v}"))),
        None => Ok(()),
    }
}

fn check_dt(dt: f64, limit: f64, reason: &'static str) -> Result<(), SimError> {
    if dt > limit * (1.0 + 1e-9) {
        Err(SimError::DtTooLarge { dt, limit, reason })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Isolation {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t: f64,
    pub chamber_kpa: f64,
    pub mix_temp_c: f64,
    pub tube_temp_c: f64,
    pub isolation: Isolation,
    pub fast_valve: ValveState,
    pub syringe_pos_mm: f64,
}

impl PlantState {
    /// Vented chamber, water loop settled at `temp_c`.
    pub fn at_rest(temp_c: f64) -> Self {
        Self {
            t: 0.0,
            chamber_kpa: 0.0,
            mix_temp_c: temp_c,
            tube_temp_c: temp_c,
            isolation: Isolation::Open,
            fast_valve: ValveState::Off,
            syringe_pos_mm: 0.0,
        }
    }
}

/// Advances the chamber by one step. Time is left to the caller.
pub fn step_pneumatic(
    state: &PlantState,
    params: &PneumaticParams,
    fast_valve: ValveState,
    isolation: Isolation,
    syringe_speed_mm_s: f64,
    dt: f64,
) -> Result<PlantState, SimError> {
    check_dt(dt, params.max_dt(), "valve toggles must be resolved")?;
    let p = state.chamber_kpa;
    let next = match (isolation, fast_valve) {
        (Isolation::Open, ValveState::On) => p + dt * (params.supply_kpa - p) / params.fill_tau_s,
        (Isolation::Open, ValveState::Off) => p - dt * p / params.vent_tau_s,
        (Isolation::Closed, _) => p + params.syringe_gain_kpa_per_mm * syringe_speed_mm_s * dt,
    };
    let syringe_pos_mm = match isolation {
        Isolation::Closed => state.syringe_pos_mm + syringe_speed_mm_s * dt,
        Isolation::Open => state.syringe_pos_mm,
    };
    Ok(PlantState {
        chamber_kpa: next.clamp(0.0, params.supply_kpa),
        isolation,
        fast_valve,
        syringe_pos_mm,
        ..*state
    })
}

/// Proportional split of the temperature error between the hot and cold pumps.
pub fn pump_control(target_c: f64, measured_c: f64, kp: f64) -> (f64, f64) {
    let e = target_c - measured_c;
    ((kp * e).clamp(0.0, 1.0), (-kp * e).clamp(0.0, 1.0))
}

/// Advances the water loop by one step. Time is left to the caller.
pub fn step_thermal(state: &PlantState, params: &ThermalPlantParams, target_c: f64, dt: f64) -> Result<PlantState, SimError> {
    check_dt(dt, params.max_dt(), "thermal loop stability")?;
    let (hot, cold) = pump_control(target_c, state.tube_temp_c, params.kp);
    let tm = state.mix_temp_c;
    let tt = state.tube_temp_c;
    let q = params.pump_max_lps;
    let inflow = q * hot * (params.hot_tank_c - tm) + q * cold * (params.cold_tank_c - tm) + params.circulation_lps * (tt - tm);
    let d_mix = inflow / params.mix_volume_l - (tm - params.ambient_c) / params.ambient_tau_s;
    let d_tube = (tm - tt) / params.tube_tau_s;
    Ok(PlantState { mix_temp_c: tm + dt * d_mix, tube_temp_c: tt + dt * d_tube, ..*state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Slide,
    Prepare,
    Countdown,
    Press,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Slide => "slide",
            Phase::Prepare => "prepare",
            Phase::Countdown => "countdown",
            Phase::Press => "press",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub phase: Phase,
    pub state: PlantState,
    pub target_temp_c: f64,
    pub syringe_speed_mm_s: f64,
}

/// Press-phase tracking and slide-phase pressure statistics, computed at
/// full step resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub tracking_max_error_c: f64,
    pub tracking_mean_error_c: f64,
    pub tracking_within_tolerance: bool,
    pub slide_min_kpa: f64,
    pub slide_max_kpa: f64,
    pub slide_mean_kpa: f64,
    pub prepare_duration_s: f64,
    pub peak_press_kpa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub name: String,
    pub dt_s: f64,
    pub rows: Vec<LogRow>,
    pub events: Vec<Event>,
    pub metrics: SessionMetrics,
}

impl SessionLog {
    pub fn event_time(&self, name: &str) -> Option<f64> {
        self.events.iter().find(|e| e.name == name).map(|e| e.time_s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "time_s,phase,chamber_kpa,mix_temp_c,tube_temp_c,target_temp_c,isolation_open,fast_valve,syringe_pos_mm,syringe_speed_mm_s\n",
        );
        for r in &self.rows {
            let s = &r.state;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.t,
                r.phase.label(),
                s.chamber_kpa,
                s.mix_temp_c,
                s.tube_temp_c,
                r.target_temp_c,
                u8::from(s.isolation == Isolation::Open),
                s.fast_valve.bit(),
                s.syringe_pos_mm,
                r.syringe_speed_mm_s
            );
        }
        out
    }

    pub fn events_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            name: &'a str,
            dt_s: f64,
            events: &'a [Event],
            metrics: &'a SessionMetrics,
        }
        let summary = Summary { name: &self.name, dt_s: self.dt_s, events: &self.events, metrics: &self.metrics };
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
        s.push('\n');
        s
    }
}

struct Runner<'a> {
    params: &'a PlantParams,
    state: PlantState,
    step: u64,
    rows: Vec<LogRow>,
    events: Vec<Event>,
}

impl Runner<'_> {
    fn time(&self) -> f64 {
        self.step as f64 * self.params.session.dt_s
    }

    fn mark(&mut self, name: &str) {
        self.events.push(Event { name: name.into(), time_s: self.time() });
    }

    fn advance(&mut self, phase: Phase, valve: ValveState, isolation: Isolation, speed: f64, target_c: f64) -> Result<(), SimError> {
        let dt = self.params.session.dt_s;
        if self.step.is_multiple_of(self.params.session.log_every as u64) {
            self.rows.push(LogRow { phase, state: self.state, target_temp_c: target_c, syringe_speed_mm_s: speed });
        }
        let s = step_pneumatic(&self.state, &self.params.pneumatic, valve, isolation, speed, dt)?;
        let mut s = step_thermal(&s, &self.params.thermal, target_c, dt)?;
        self.step += 1;
        s.t = self.time();
        self.state = s;
        Ok(())
    }
}

/// Slide → prepare → countdown → press-wait-lift.
///
/// Valve state and syringe speed are sampled at the middle of each step so
/// that command edges falling on step boundaries are not split by rounding.
pub fn run_session(commands: &CommandSet, params: &PlantParams) -> Result<SessionLog, SimError> {
    params.validate()?;
    let sp = &params.session;
    let dt = sp.dt_s;
    let steps = |d: f64| (d / dt - 1e-9).ceil().max(0.0) as u64;
    let mut run = Runner { params, state: PlantState::at_rest(sp.neutral_temp_c), step: 0, rows: Vec::new(), events: Vec::new() };

    // Slide: valve driven by the roughness wave, temperature held neutral.
    run.mark("slide_start");
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let slide_steps = steps(commands.wave.duration_s());
    for k in 0..slide_steps {
        let valve = commands.wave.state_at((k as f64 + 0.5) * dt);
        run.advance(Phase::Slide, valve, Isolation::Open, 0.0, sp.neutral_temp_c)?;
        let p = run.state.chamber_kpa;
        lo = lo.min(p);
        hi = hi.max(p);
        sum += p;
    }
    let slide_mean = if slide_steps > 0 { sum / slide_steps as f64 } else { 0.0 };
    if slide_steps == 0 {
        (lo, hi) = (0.0, 0.0);
    }

    // Prepare: drive the tube to the command's starting temperature.
    let initial = commands.initial_temp();
    run.mark("prepare_start");
    let prepare_start = run.time();
    let timeout_steps = steps(sp.prepare_timeout_s);
    let mut k = 0;
    while (initial - run.state.tube_temp_c).abs() >= sp.prepare_tolerance_c {
        if k == timeout_steps {
            return Err(SimError::PreparationTimeout { target_c: initial, reached_c: run.state.tube_temp_c, timeout_s: sp.prepare_timeout_s });
        }
        run.advance(Phase::Prepare, ValveState::Off, Isolation::Open, 0.0, initial)?;
        k += 1;
    }
    run.mark("prepare_done");
    let prepare_duration = run.time() - prepare_start;

    run.mark("countdown_start");
    for _ in 0..steps(sp.countdown_s) {
        run.advance(Phase::Countdown, ValveState::Off, Isolation::Open, 0.0, initial)?;
    }

    // Press-wait-lift: sealed chamber, syringe follows the profile,
    // water loop tracks the thermal polynomial.
    run.mark("press_start");
    let profile = &commands.profile;
    let lift_at = profile.rise().duration_s + profile.plateau().duration_s;
    let lift_step = steps(lift_at);
    let (mut err_max, mut err_sum, mut err_n) = (0.0f64, 0.0, 0u64);
    let mut peak_press = 0.0f64;
    for k in 0..steps(profile.total_duration_s()) {
        if k == lift_step {
            run.mark("lift_start");
        }
        let s = k as f64 * dt;
        let speed = profile.speed_at(s + 0.5 * dt);
        run.advance(Phase::Press, ValveState::Off, Isolation::Closed, speed, commands.thermal_target(s))?;
        peak_press = peak_press.max(run.state.chamber_kpa);
        let s_next = s + dt;
        if s_next >= sp.tracking_settle_s {
            let e = (run.state.tube_temp_c - commands.thermal_target(s_next)).abs();
            err_max = err_max.max(e);
            err_sum += e;
            err_n += 1;
        }
    }
    if !run.events.iter().any(|e| e.name == "lift_start") {
        run.mark("lift_start");
    }
    run.mark("session_end");
    let final_target = commands.thermal_target(profile.total_duration_s());
    run.rows.push(LogRow { phase: Phase::Press, state: run.state, target_temp_c: final_target, syringe_speed_mm_s: 0.0 });

    let metrics = SessionMetrics {
        tracking_max_error_c: err_max,
        tracking_mean_error_c: if err_n > 0 { err_sum / err_n as f64 } else { 0.0 },
        tracking_within_tolerance: err_max <= sp.tracking_tolerance_c,
        slide_min_kpa: lo,
        slide_max_kpa: hi,
        slide_mean_kpa: slide_mean,
        prepare_duration_s: prepare_duration,
        peak_press_kpa: peak_press,
    };
    Ok(SessionLog { name: commands.name.clone(), dt_s: dt, rows: run.rows, events: run.events, metrics })
}

/// Steady-state peak-to-peak chamber pressure under a square valve drive at
/// `freq_hz` and 50% duty, simulated with step `dt`.
pub fn simulate_pwm_ripple(params: &PneumaticParams, freq_hz: f64, dt: f64, periods: usize) -> Result<f64, SimError> {
    let period = 1.0 / freq_hz;
    let total = (periods as f64 * period / dt).round() as u64;
    let tail_from = total - (5.0 * period / dt).round() as u64;
    let mut state = PlantState::at_rest(0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..total {
        let t_mid = (k as f64 + 0.5) * dt;
        let valve = if (t_mid / period).fract() < 0.5 { ValveState::On } else { ValveState::Off };
        state = step_pneumatic(&state, params, valve, Isolation::Open, 0.0, dt)?;
        if k >= tail_from {
            lo = lo.min(state.chamber_kpa);
            hi = hi.max(state.chamber_kpa);
        }
    }
    Ok(hi - lo)
}
