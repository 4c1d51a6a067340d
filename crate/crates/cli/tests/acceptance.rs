//! Acceptance suite. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use mpcbench_core::controllers::{
    combinatorial_plan, evaluate_strategy, ga_plan, reactive_decide, ControllerConfig, Forecast, GaConfig,
    ObjectiveWeights, ReactiveSchedule,
};
use mpcbench_core::coupling::{run_episode, run_matchup, Contender, LogRow, SimulationLog};
use mpcbench_core::emulator::{simulate_horizon, step, BoundarySample, ZoneParams, ZoneState};
use mpcbench_core::kpi::{
    build_report, cost, cost_savings_pct, energy_savings_pct, pct_time_outside_comfort, peak_power_reduction_pct,
    primary_energy_savings_pct, total_degree_hours, Kpi, KpiReport,
};
use mpcbench_core::ranking::{normalize, KpiOrientation, RadarScores, ANCHOR_TOLERANCE};
use mpcbench_core::scenarios::{
    baseline_scenario, generate_battery, load_weather, BatteryMode, ComfortBand, DailyPeriod, DrEvent, PeFactor,
    Replanning, ResolvedScenario, SetpointBounds, SynthWeather, Tariff,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn default_contenders() -> Vec<Contender> {
    ["reactive", "combinatorial", "ga"]
        .into_iter()
        .map(|k| Contender::new(k, ControllerConfig::from_kind(k).unwrap()))
        .collect()
}

fn resolved_baseline() -> &'static ResolvedScenario {
    static CELL: OnceLock<ResolvedScenario> = OnceLock::new();
    CELL.get_or_init(|| {
        baseline_scenario()
            .resolve(&ZoneParams::default())
            .expect("baseline resolves")
    })
}

/// Baseline matchup of the default controllers, with its wall time.
fn baseline_logs() -> &'static (Vec<SimulationLog>, f64) {
    static CELL: OnceLock<(Vec<SimulationLog>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let logs = run_matchup(resolved_baseline(), &default_contenders()).expect("baseline matchup");
        (logs, start.elapsed().as_secs_f64())
    })
}

fn criterion_1() -> Outcome {
    let (logs, seconds) = baseline_logs();
    let scenario = &resolved_baseline().scenario;
    let set = build_report(logs, "reactive", scenario, false).map_err(|e| e.to_string())?;
    let get = |id: &str| set.reports.iter().find(|r| r.controller == id).unwrap();
    let reactive = get("reactive");
    let mut detail = Vec::new();
    for id in ["combinatorial", "ga"] {
        let r = get(id);
        let savings = r.energy_savings_pct.ok_or_else(|| format!("{id}: savings undefined"))?;
        ensure(savings > 0.0, || {
            format!("{id}: energy savings {savings} % not positive")
        })?;
        ensure(r.pct_time_outside_comfort <= reactive.pct_time_outside_comfort, || {
            format!(
                "{id}: {} % outside comfort vs reactive {} %",
                r.pct_time_outside_comfort, reactive.pct_time_outside_comfort
            )
        })?;
        detail.push(format!(
            "{id} saves {savings:.3} %, {:.1} % outside",
            r.pct_time_outside_comfort
        ));
    }
    ensure(*seconds < 60.0, || format!("took {seconds:.1} s"))?;
    detail.push(format!("reactive {:.1} % outside", reactive.pct_time_outside_comfort));
    detail.push(format!("{seconds:.1} s"));
    Ok(detail.join("; "))
}

// ---- optimizer oracle ----------------------------------------------------

fn random_forecast(rng: &mut ChaCha8Rng, horizon: usize) -> Forecast {
    let t_out = rng.random_range(-12.0..10.0);
    Forecast {
        start: Utc
            .with_ymd_and_hms(2024, 1, 17, rng.random_range(0..24), 0, 0)
            .unwrap(),
        step: 3600.0,
        boundaries: (0..horizon)
            .map(|_| {
                let occupied = rng.random_bool(0.6);
                BoundarySample {
                    t_out: t_out + rng.random_range(-2.0..2.0),
                    solar: if rng.random_bool(0.5) {
                        rng.random_range(0.0..400.0)
                    } else {
                        0.0
                    },
                    internal_gain: if occupied { rng.random_range(200.0..800.0) } else { 50.0 },
                    occupied,
                    disturbance: 0.0,
                    extra_conductance: 0.0,
                }
            })
            .collect(),
        comfort_band: ComfortBand {
            lower: 20.0,
            upper: 24.0,
        },
        dr_caps: (0..horizon)
            .map(|_| rng.random_bool(0.25).then(|| rng.random_range(300.0..3000.0)))
            .collect(),
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> ZoneState {
    ZoneState::new(rng.random_range(14.0..23.0), rng.random_range(12.0..21.0))
}

#[derive(Clone, Copy)]
struct Scored {
    cost: f64,
    energy: f64,
    discomfort: f64,
}

/// Score a setpoint vector from its simulated trajectory, written out
/// directly from the objective's definition.
fn oracle_score(
    setpoints: &[f64],
    state: ZoneState,
    forecast: &Forecast,
    params: &ZoneParams,
    weights: &ObjectiveWeights,
) -> Scored {
    let traj = simulate_horizon(state, setpoints, &forecast.boundaries, forecast.step, params).unwrap();
    let hours = forecast.step / 3600.0;
    let band = forecast.comfort_band;
    let dev = |t: f64| (band.lower - t).max(0.0) + (t - band.upper).max(0.0);
    let mut temps = vec![state.t_air];
    temps.extend(traj.states.iter().map(|s| s.t_air));
    let (mut energy, mut discomfort, mut flex) = (0.0, 0.0, 0.0);
    for i in 0..setpoints.len() {
        energy += traj.final_energy[i];
        if forecast.boundaries[i].occupied {
            discomfort += hours * (dev(temps[i]) + dev(temps[i + 1])) / 2.0;
        }
        if let Some(cap) = forecast.dr_caps[i] {
            flex += (traj.final_energy[i] - cap * hours).max(0.0);
        }
    }
    Scored {
        cost: weights.w_energy * energy + weights.w_comfort * discomfort + weights.w_flex * flex,
        energy,
        discomfort,
    }
}

/// Comfortable vectors first, cheapest first; otherwise least discomfort.
/// Then least energy, then the lexicographically smallest vector.
fn oracle_better(a: &(Vec<f64>, Scored), b: &(Vec<f64>, Scored)) -> bool {
    let (fa, fb) = (a.1.discomfort == 0.0, b.1.discomfort == 0.0);
    if fa != fb {
        return fa;
    }
    let primary = if fa {
        a.1.cost.total_cmp(&b.1.cost)
    } else {
        a.1.discomfort.total_cmp(&b.1.discomfort)
    };
    let order = primary.then(a.1.energy.total_cmp(&b.1.energy)).then_with(|| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    order == Ordering::Less
}

/// Exhaustive odometer enumeration of `candidates^horizon`.
fn oracle_optimum(
    state: ZoneState,
    forecast: &Forecast,
    candidates: &[f64],
    params: &ZoneParams,
    weights: &ObjectiveWeights,
) -> (Vec<f64>, Scored) {
    let h = forecast.len();
    let mut digits = vec![0usize; h];
    let mut best: Option<(Vec<f64>, Scored)> = None;
    loop {
        let v: Vec<f64> = digits.iter().map(|&d| candidates[d]).collect();
        let scored = oracle_score(&v, state, forecast, params, weights);
        let entry = (v, scored);
        if best.as_ref().is_none_or(|b| oracle_better(&entry, b)) {
            best = Some(entry);
        }
        let mut i = h;
        loop {
            if i == 0 {
                return best.unwrap();
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < candidates.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

fn criterion_2() -> Outcome {
    const POOL: [f64; 9] = [16.0, 18.0, 19.0, 20.0, 20.5, 21.0, 22.0, 23.0, 24.0];
    let params = ZoneParams::default();
    let weights = ObjectiveWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let instances = 300;
    let mut largest = 0;
    for n in 0..instances {
        let horizon = rng.random_range(1..=7usize);
        let max_k = (1..=POOL.len())
            .filter(|k| k.pow(horizon as u32) <= 2187)
            .max()
            .unwrap();
        let k = rng.random_range(1..=max_k);
        let mut candidates = POOL.to_vec();
        for i in (1..candidates.len()).rev() {
            candidates.swap(i, rng.random_range(0..=i));
        }
        candidates.truncate(k);
        largest = largest.max(k.pow(horizon as u32));
        let forecast = random_forecast(&mut rng, horizon);
        let state = random_state(&mut rng);
        let plan = combinatorial_plan(state, &forecast, &candidates, horizon, &params, &weights, u64::MAX)
            .map_err(|e| format!("instance {n}: {e}"))?;
        let (expected, _) = oracle_optimum(state, &forecast, &candidates, &params, &weights);
        ensure(plan.strategy.setpoints == expected, || {
            format!(
                "instance {n}: planner chose {:?}, oracle {:?}",
                plan.strategy.setpoints, expected
            )
        })?;
    }

    let ga = GaConfig::default();
    ensure(ga.population == 40 && ga.generations == 60, || {
        "GA defaults changed".into()
    })?;
    let mut matches = 0;
    for n in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + n);
        let low = [19.0, 19.5, 20.0, 20.5][rng.random_range(0..4)];
        let bounds = SetpointBounds {
            min: low,
            max: low + 1.0,
        };
        let forecast = random_forecast(&mut rng, 4);
        let state = random_state(&mut rng);
        let plan = ga_plan(state, &forecast, bounds, 4, &params, &weights, &ga).map_err(|e| e.to_string())?;
        let (got, _) = evaluate_strategy(&plan.strategy.setpoints, state, &forecast, &params, &weights)
            .map_err(|e| e.to_string())?;
        let (_, best) = oracle_optimum(state, &forecast, &[low, low + 0.5, low + 1.0], &params, &weights);
        if got.cost == best.cost {
            matches += 1;
        }
    }
    ensure(matches >= 95, || {
        format!("GA reached the optimal cost on {matches}/100 instances")
    })?;
    Ok(format!(
        "combinatorial = oracle on {instances} instances (up to {largest} vectors); GA optimal on {matches}/100"
    ))
}

// ---- emulator physics ----------------------------------------------------

fn random_params(rng: &mut ChaCha8Rng) -> ZoneParams {
    ZoneParams {
        c_air: rng.random_range(5.0e4..5.0e6),
        c_env: rng.random_range(5.0e5..5.0e7),
        r_ie: rng.random_range(1.0e-3..0.02),
        r_ea: rng.random_range(2.0e-3..0.05),
        r_inf: rng.random_range(5.0e-3..0.2),
        window_area: rng.random_range(0.0..20.0),
        shgc: rng.random_range(0.2..0.8),
        solar_split: rng.random_range(0.0..1.0),
        p_max: rng.random_range(500.0..10_000.0),
        efficiency: rng.random_range(0.6..1.0),
        k_heater: rng.random_range(50.0..1.0e5),
        substep: [30.0, 60.0, 120.0, 300.0, 600.0][rng.random_range(0..5)],
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_balance: f64 = 0.0;
    for draw in 0..1000 {
        let params = random_params(&mut rng);
        params.validate().map_err(|e| e.to_string())?;

        // Fixed point: equilibrium with nothing driving the zone.
        let t = rng.random_range(-20.0..35.0);
        let at_rest = ZoneState::uniform(t);
        let out = step(at_rest, &BoundarySample::still(t), t - 1.0, 3600.0, &params).map_err(|e| e.to_string())?;
        ensure(out.state == at_rest && out.final_energy == 0.0, || {
            format!("draw {draw}: equilibrium at {t} moved to {:?}", out.state)
        })?;

        // Passivity: unheated, no gains, constant outdoor temperature.
        let t_out = rng.random_range(-15.0..25.0);
        let mut state = ZoneState::new(rng.random_range(-10.0..40.0), rng.random_range(-10.0..40.0));
        let gap = |s: &ZoneState| (s.t_air - t_out).abs().max((s.t_env - t_out).abs());
        let mut previous = gap(&state);
        for hour in 0..48 {
            state = step(state, &BoundarySample::still(t_out), -50.0, 3600.0, &params)
                .map_err(|e| e.to_string())?
                .state;
            let current = gap(&state);
            ensure(current <= previous + 1e-12, || {
                format!("draw {draw}, hour {hour}: distance to outdoor grew {previous} -> {current}")
            })?;
            previous = current;
        }

        // Steady state: heater and gains balance the fabric and infiltration losses.
        // Gains lift the zone by at most 20 K above outdoors.
        let t_out = t_out.min(10.0);
        let r_eff = params.effective_resistance();
        let solar_w_per_wm2 = params.shgc * params.window_area;
        let boundary = BoundarySample {
            t_out,
            solar: if solar_w_per_wm2 > 0.0 {
                rng.random_range(0.0..10.0) / r_eff / solar_w_per_wm2
            } else {
                0.0
            },
            internal_gain: rng.random_range(0.0..10.0) / r_eff,
            occupied: true,
            disturbance: 0.0,
            extra_conductance: 0.0,
        };
        let setpoint = t_out + rng.random_range(1.0..25.0);
        let long = ZoneParams {
            substep: 1.0e7,
            ..params.clone()
        };
        let mut state = ZoneState::uniform(t_out);
        let mut outcome = None;
        for _ in 0..500 {
            let next = step(state, &boundary, setpoint, 1.0e7, &long).map_err(|e| e.to_string())?;
            let settled = next.state == state;
            state = next.state;
            outcome = Some(next);
            if settled {
                break;
            }
        }
        let outcome = outcome.unwrap();
        let heater_w = outcome.heat_delivered * 3600.0 / 1.0e7;
        let solar_w = params.shgc * params.window_area * boundary.solar;
        let supplied = heater_w + boundary.internal_gain + solar_w;
        let lost = (state.t_air - t_out) / params.r_inf + (state.t_env - t_out) / params.r_ea;
        let rel = (supplied - lost).abs() / supplied.abs().max(lost.abs());
        worst_balance = worst_balance.max(rel);
        ensure(rel <= 1e-6, || {
            format!("draw {draw}: supplied {supplied} W vs lost {lost} W")
        })?;
    }

    // Analytic example: full power into a zone at 0 °C outdoors.
    let toy = ZoneParams {
        c_air: 2.0e5,
        c_env: 4.0e6,
        r_ie: 0.002,
        r_ea: 0.01,
        r_inf: 0.02,
        window_area: 0.0,
        shgc: 0.0,
        solar_split: 0.5,
        p_max: 1000.0,
        efficiency: 0.9,
        k_heater: 1.0e6,
        substep: 60.0,
    };
    let mut state = ZoneState::uniform(0.0);
    for _ in 0..2000 {
        state = step(state, &BoundarySample::still(0.0), 60.0, 3600.0, &toy)
            .unwrap()
            .state;
    }
    let analytic = 1000.0 * 0.0075;
    ensure((state.t_air - analytic).abs() <= 1e-6, || {
        format!("steady state {} °C, expected 7.5", state.t_air)
    })?;

    // Substep halving over the baseline week under the reactive schedule.
    let resolved = resolved_baseline();
    let schedule = ReactiveSchedule {
        comfort_setpoint: resolved.scenario.comfort_setpoint,
        setback: resolved.scenario.setback,
    };
    let occupied: Vec<bool> = resolved.plant.iter().map(|b| b.occupied).collect();
    let setpoints: Vec<f64> = (0..occupied.len())
        .map(|k| reactive_decide(k, &occupied, &schedule))
        .collect();
    let coarse = resolved.params.clone();
    let fine = ZoneParams {
        substep: coarse.substep / 2.0,
        ..coarse.clone()
    };
    let start = ZoneState::uniform(resolved.scenario.setback);
    let dt = resolved.scenario.control_step;
    let a = simulate_horizon(start, &setpoints, &resolved.plant, dt, &coarse).map_err(|e| e.to_string())?;
    let b = simulate_horizon(start, &setpoints, &resolved.plant, dt, &fine).map_err(|e| e.to_string())?;
    let drift = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x.t_air - y.t_air).abs().max((x.t_env - y.t_env).abs()))
        .fold(0.0, f64::max);
    ensure(drift < 0.05, || {
        format!("halving the substep moved the week by {drift} °C")
    })?;
    Ok(format!(
        "1000 draws; worst balance error {worst_balance:.1e}; steady state {:.9} °C; substep drift {drift:.4} °C",
        state.t_air
    ))
}

fn criterion_4() -> Outcome {
    let resolved = resolved_baseline();
    ensure(resolved.plant.iter().all(|b| b.disturbance == 0.0), || {
        "baseline has a disturbance".into()
    })?;
    ensure(resolved.overrides.iter().all(Option::is_none), || {
        "baseline has overrides".into()
    })?;
    let (logs, _) = baseline_logs();
    let mut detail = Vec::new();
    for log in logs.iter().filter(|l| l.controller != "reactive") {
        let gap = log
            .prediction_gap()
            .ok_or_else(|| format!("{} recorded no predictions", log.controller))?;
        ensure(gap <= 1e-9, || {
            format!("{}: prediction differs from the plant by {gap} °C", log.controller)
        })?;
        detail.push(format!("{} max gap {gap:e} °C", log.controller));
    }
    ensure(detail.len() == 2, || "expected two MPC logs".into())?;
    Ok(detail.join("; "))
}

// ---- KPI hand checks -----------------------------------------------------

fn toy_log(temps: &[f64], energy_wh: &[f64], occupied: &[bool]) -> SimulationLog {
    let start = Utc.with_ymd_and_hms(2024, 1, 15, 0, 0, 0).unwrap();
    SimulationLog {
        scenario_id: "toy".into(),
        controller: "toy".into(),
        control_step: 3600.0,
        rows: energy_wh
            .iter()
            .enumerate()
            .map(|(k, &e)| LogRow {
                step: k,
                timestamp: start + Duration::hours(k as i64),
                t_air_start_c: temps[k],
                t_air_c: temps[k + 1],
                t_env_c: temps[k + 1],
                setpoint_c: 21.0,
                overridden: false,
                heat_delivered_wh: e,
                final_energy_wh: e,
                occupied: occupied[k],
                comfort_lower_c: 20.0,
                comfort_upper_c: 24.0,
                t_out_c: 0.0,
                solar_wm2: 0.0,
                dr_active: false,
            })
            .collect(),
        plans: Vec::new(),
    }
}

fn energy_log(energy_wh: &[f64]) -> SimulationLog {
    toy_log(
        &vec![21.0; energy_wh.len() + 1],
        energy_wh,
        &vec![true; energy_wh.len()],
    )
}

fn exact<E: std::fmt::Debug>(what: &str, got: Result<f64, E>, want: f64) -> Result<(), String> {
    match got {
        Ok(v) if v == want => Ok(()),
        other => Err(format!("{what}: got {other:?}, want {want}")),
    }
}

fn criterion_5() -> Outcome {
    let e100 = energy_log(&[50_000.0, 50_000.0]);
    let e80 = energy_log(&[40_000.0, 40_000.0]);
    let e120 = energy_log(&[60_000.0, 60_000.0]);
    exact("savings 80 vs 100 kWh", energy_savings_pct(&e80, &e100), 20.0)?;
    exact("savings equal", energy_savings_pct(&e100, &e100), 0.0)?;
    exact("savings 120 vs 100 kWh", energy_savings_pct(&e120, &e100), -20.0)?;
    exact(
        "primary energy savings, factor 2.3",
        primary_energy_savings_pct(&e80, &e100, &PeFactor::Constant { factor: 2.3 }),
        20.0,
    )?;
    let flat = Tariff::Flat { price_per_kwh: 0.2 };
    exact("flat cost of 100 kWh", cost(&e100, &flat), 20.0)?;
    exact("cost savings 80 vs 100 kWh", cost_savings_pct(&e80, &e100, &flat), 20.0)?;
    let tou = Tariff::TimeOfUse {
        periods: vec![
            DailyPeriod {
                start_hour: 0,
                end_hour: 1,
                value: 0.4,
            },
            DailyPeriod {
                start_hour: 1,
                end_hour: 24,
                value: 0.1,
            },
        ],
    };
    exact("time-of-use cost", cost(&energy_log(&[1000.0, 1000.0]), &tou), 0.5)?;

    let occupied = vec![true; 24];
    let mut temps = vec![21.0; 25];
    exact(
        "all inside",
        pct_time_outside_comfort(&toy_log(&temps, &[0.0; 24], &occupied)).map(|s| s.pct),
        0.0,
    )?;
    for t in temps.iter_mut().take(6) {
        *t = 18.0;
    }
    // Samples 0..=5 are cold, so steps 0..=5 start outside the band.
    let quarter = pct_time_outside_comfort(&toy_log(&temps, &[0.0; 24], &occupied)).map(|s| s.pct);
    exact("6 of 24 outside", quarter, 25.0)?;
    exact(
        "all outside",
        pct_time_outside_comfort(&toy_log(&[30.0; 25], &[0.0; 24], &occupied)).map(|s| s.pct),
        100.0,
    )?;

    exact(
        "inside band",
        total_degree_hours(&toy_log(&[22.0; 5], &[0.0; 4], &[true; 4])),
        0.0,
    )?;
    exact(
        "19 °C for 2 h",
        total_degree_hours(&toy_log(&[19.0; 3], &[0.0; 2], &[true; 2])),
        2.0,
    )?;
    let ramp = toy_log(&[18.0, 19.0, 20.0, 21.0, 22.0], &[0.0; 4], &[true; 4]);
    exact("ramp 18 -> 22 °C", total_degree_hours(&ramp), 2.0)?;

    let event = [DrEvent {
        start_step: 1,
        duration_steps: 1,
        power_cap_w: 3000.0,
    }];
    let base = energy_log(&[9000.0, 5000.0, 9000.0]);
    let test = energy_log(&[9000.0, 4000.0, 9000.0]);
    exact(
        "peak 5 kW vs 4 kW",
        peak_power_reduction_pct(&test, &base, &event),
        20.0,
    )?;
    exact("equal peaks", peak_power_reduction_pct(&base, &base, &event), 0.0)?;
    ensure(peak_power_reduction_pct(&test, &base, &[]).is_err(), || {
        "no-event error missing".into()
    })?;

    let (logs, _) = baseline_logs();
    let set = build_report(logs, "reactive", &resolved_baseline().scenario, false).map_err(|e| e.to_string())?;
    let reactive = set.reports.iter().find(|r| r.controller == "reactive").unwrap();
    for (name, v) in [
        ("energy_savings_pct", reactive.energy_savings_pct),
        ("pe_savings_pct", reactive.pe_savings_pct),
        ("cost_savings_pct", reactive.cost_savings_pct),
        ("peak_power_reduction_pct", reactive.peak_power_reduction_pct),
    ] {
        ensure(v == Some(0.0), || format!("reactive self-baseline {name} = {v:?}"))?;
    }
    Ok("savings, cost, comfort, degree-hour and peak examples exact; reactive self-baseline all 0".into())
}

// ---- normalization -------------------------------------------------------

fn check_anchor(scores: &RadarScores) -> Result<(), String> {
    for (i, kpi) in scores.axes.iter().enumerate() {
        let column: Vec<f64> = scores.controllers.iter().map(|c| c.scores[i]).collect();
        let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure((max - 10.0).abs() <= ANCHOR_TOLERANCE, || {
            format!("{}: best score on {kpi} is {max}", scores.scenario_id)
        })?;
        ensure(column.iter().all(|s| (0.0..=10.0).contains(s)), || {
            format!("{}: {kpi} scores {column:?} leave [0, 10]", scores.scenario_id)
        })?;
    }
    Ok(())
}

fn scale_kpi(report: &mut KpiReport, kpi: Kpi, c: f64) {
    let scale = |v: &mut Option<f64>| *v = v.map(|x| x * c);
    match kpi {
        Kpi::EnergySavingsPct => scale(&mut report.energy_savings_pct),
        Kpi::PeSavingsPct => scale(&mut report.pe_savings_pct),
        Kpi::Cost => scale(&mut report.cost),
        Kpi::CostSavingsPct => scale(&mut report.cost_savings_pct),
        Kpi::PctTimeOutsideComfort => report.pct_time_outside_comfort *= c,
        Kpi::TotalDegreeHours => report.total_degree_hours *= c,
        Kpi::PeakPowerReductionPct => scale(&mut report.peak_power_reduction_pct),
        Kpi::PlannerMeanTimeS => scale(&mut report.planner_mean_time_s),
    }
}

fn criterion_6() -> Outcome {
    let orientation = KpiOrientation::default();
    let kpis = mpcbench::SCORED_KPIS;
    let mut sets = Vec::new();
    let (logs, _) = baseline_logs();
    sets.push(build_report(logs, "reactive", &resolved_baseline().scenario, false).map_err(|e| e.to_string())?);

    // A battery with a different climate and fabric, so that rankings differ per scenario.
    let mut base = baseline_scenario();
    base.duration = 72;
    let battery = generate_battery(
        &base,
        &BTreeMap::from([
            ("statics.envelope_scale".to_string(), vec![json!(0.7)]),
            ("dynamics.weather.mean".to_string(), vec![json!(-6.0)]),
        ]),
        BatteryMode::OneAtATime,
    )
    .map_err(|e| e.to_string())?;
    for scenario in &battery {
        let resolved = scenario.resolve(&ZoneParams::default()).map_err(|e| e.to_string())?;
        let logs = run_matchup(&resolved, &default_contenders()).map_err(|e| e.to_string())?;
        sets.push(build_report(&logs, "reactive", scenario, false).map_err(|e| e.to_string())?);
    }

    let mut tables = 0;
    for set in &sets {
        let scores = normalize(&set.scenario_id, &set.reports, &kpis, &orientation);
        check_anchor(&scores)?;
        tables += 1;
        for (i, &kpi) in scores.axes.iter().enumerate() {
            for c in [1.0e-3, 0.37, 4.0, 2.5e4] {
                let mut scaled = set.reports.clone();
                for r in &mut scaled {
                    scale_kpi(r, kpi, c);
                }
                let rescored = normalize(&set.scenario_id, &scaled, &kpis, &orientation);
                for (a, b) in scores.controllers.iter().zip(&rescored.controllers) {
                    ensure((a.scores[i] - b.scores[i]).abs() <= ANCHOR_TOLERANCE, || {
                        format!(
                            "{}: scaling {kpi} by {c} moved {} from {} to {}",
                            set.scenario_id, a.controller, a.scores[i], b.scores[i]
                        )
                    })?;
                }
            }
        }
    }

    // Score tables written by the command line.
    for path in files_named(cli_runs().join("baseline-a"), "scores.json") {
        let scores: RadarScores =
            serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check_anchor(&scores)?;
        tables += 1;
    }
    Ok(format!(
        "{tables} score tables anchored at 10 within {ANCHOR_TOLERANCE:e}; rescaling invariant"
    ))
}

fn criterion_7() -> Outcome {
    let resolved = resolved_baseline();
    let mpc = ControllerConfig::from_kind("combinatorial").unwrap();
    let block = run_episode(resolved, "combinatorial", &mpc).map_err(|e| e.to_string())?;
    let mut receding_scenario = resolved.scenario.clone();
    receding_scenario.replanning = Replanning::Receding;
    let receding_resolved = receding_scenario
        .resolve(&ZoneParams::default())
        .map_err(|e| e.to_string())?;
    let receding = run_episode(&receding_resolved, "combinatorial", &mpc).map_err(|e| e.to_string())?;
    let counts = (
        block.planning_calls(),
        receding.planning_calls(),
        block.len(),
        receding.len(),
    );
    ensure(counts == (28, 168, 168, 168), || {
        format!("(block, receding, rows, rows) = {counts:?}")
    })?;
    Ok("28 block calls, 168 receding calls, 168 log rows".into())
}

// ---- command-line reproducibility ------------------------------------------

fn mpcbench(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mpcbench"))
        .args(args)
        .env_remove("MPCBENCH_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("mpcbench {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn files_named(dir: PathBuf, name: &str) -> Vec<PathBuf> {
    all_files(&dir)
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n == name))
        .collect()
}

fn all_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                out.extend(all_files(&path));
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

/// Output directories of the command-line runs shared by criteria 6 and 8.
fn cli_runs() -> &'static Path {
    static CELL: OnceLock<(tempfile::TempDir, Result<(), String>)> = OnceLock::new();
    let (dir, result) = CELL.get_or_init(|| {
        let dir = tempfile::tempdir().expect("temporary directory");
        let result = (|| {
            let root = dir.path();
            let p = |name: &str| root.join(name).to_str().unwrap().to_string();
            mpcbench(&["run", "--baseline", "--seed", "7", "--out", &p("baseline-a")])?;
            mpcbench(&["run", "--baseline", "--seed", "7", "--out", &p("baseline-b")])?;
            fs::write(
                root.join("battery.json"),
                r#"{"mode": "one_at_a_time",
                    "variations": {"statics.envelope_scale": [0.7, 1.4], "duration": [96]}}"#,
            )
            .map_err(|e| e.to_string())?;
            mpcbench(&[
                "run",
                "--battery",
                &p("battery.json"),
                "--seed",
                "7",
                "--jobs",
                "1",
                "--out",
                &p("jobs-1"),
            ])?;
            mpcbench(&[
                "run",
                "--battery",
                &p("battery.json"),
                "--seed",
                "7",
                "--jobs",
                "8",
                "--out",
                &p("jobs-8"),
            ])?;
            Ok(())
        })();
        (dir, result)
    });
    if let Err(e) = result {
        panic!("command-line run failed: {e}");
    }
    dir.path()
}

fn compare_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let files_a: Vec<PathBuf> = all_files(a)
        .iter()
        .map(|p| p.strip_prefix(a).unwrap().to_path_buf())
        .collect();
    let files_b: Vec<PathBuf> = all_files(b)
        .iter()
        .map(|p| p.strip_prefix(b).unwrap().to_path_buf())
        .collect();
    ensure(files_a == files_b, || {
        format!("{} and {} hold different files", a.display(), b.display())
    })?;
    for rel in &files_a {
        let (x, y) = (fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap());
        ensure(x == y, || format!("{} differs", rel.display()))?;
    }
    for kind in ["report.json", "radar.svg"] {
        ensure(files_a.iter().any(|p| p.ends_with(kind)), || {
            format!("no {kind} written")
        })?;
    }
    Ok(files_a.len())
}

fn criterion_8() -> Outcome {
    let root = cli_runs();
    let repeated = compare_trees(&root.join("baseline-a"), &root.join("baseline-b"))?;
    let parallel = compare_trees(&root.join("jobs-1"), &root.join("jobs-8"))?;
    Ok(format!(
        "{repeated} files identical across runs; {parallel} files identical for --jobs 1 vs 8"
    ))
}

fn criterion_9() -> Outcome {
    let base = baseline_scenario();
    let two_by_three = BTreeMap::from([
        ("statics.envelope_scale".to_string(), vec![json!(1.0), json!(1.2)]),
        (
            "statics.orientation".to_string(),
            vec![json!("south"), json!("east"), json!("west")],
        ),
    ]);
    let cartesian = generate_battery(&base, &two_by_three, BatteryMode::Cartesian).map_err(|e| e.to_string())?;
    let one_at_a_time = generate_battery(&base, &two_by_three, BatteryMode::OneAtATime).map_err(|e| e.to_string())?;
    let again = generate_battery(&base, &two_by_three, BatteryMode::Cartesian).map_err(|e| e.to_string())?;
    ensure(cartesian.len() == 6, || {
        format!("cartesian yielded {}", cartesian.len())
    })?;
    ensure(one_at_a_time.len() == 4, || {
        format!("one-at-a-time yielded {}", one_at_a_time.len())
    })?;
    let ids = |v: &[mpcbench_core::scenarios::Scenario]| v.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
    ensure(ids(&cartesian) == ids(&again), || {
        "ids changed between generations".into()
    })?;
    let mut unique = ids(&cartesian);
    unique.sort();
    unique.dedup();
    ensure(unique.len() == 6, || "duplicate ids".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join("weather.csv");
    let series = SynthWeather::winter(11).generate(7);
    series.save(&path).map_err(|e| e.to_string())?;
    let loaded = load_weather(&path).map_err(|e| e.to_string())?;
    ensure(loaded == series, || "weather changed in the CSV round trip".into())?;
    Ok(format!(
        "6 cartesian, 4 one-at-a-time, stable ids; {} weather samples round-trip exactly",
        series.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("MPCs beat reactive on the baseline", criterion_1),
        ("optimizer oracle", criterion_2),
        ("emulator physics", criterion_3),
        ("perfect-prediction identity", criterion_4),
        ("KPI hand checks", criterion_5),
        ("normalization anchor", criterion_6),
        ("protocol counts", criterion_7),
        ("reproducibility", criterion_8),
        ("battery and weather round trip", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: {title} ... PASS ({detail}) [{secs:.1} s]", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: {title} ... FAIL ({why}) [{secs:.1} s]", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
