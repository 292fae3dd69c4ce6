use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::fitness::SimStats;
use super::policy::{LampAction, LampCommand, LampPolicy, SensorFrame};
use super::world::{WorldConfig, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LampState {
    pub light_cmd: LampCommand,
    pub listening: bool,
    pub tx_value: f64,
    pub prev_listening: bool,
}

impl Default for LampState {
    fn default() -> Self {
        // Starting with listening on lets communication bootstrap.
        LampState {
            light_cmd: LampCommand::Off,
            listening: true,
            tx_value: 0.0,
            prev_listening: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersonState {
    pub position: usize,
    pub active: bool,
    pub completed_tick: Option<u32>,
}

/// Lamp-ticks spent during bright ambient and how many of them were ON.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LampUsage {
    pub bright_lamp_ticks: u64,
    pub bright_on_ticks: u64,
}

impl LampUsage {
    /// Fraction of bright lamp-ticks with the lamp ON; 0 if there were none.
    pub fn bright_on_fraction(&self) -> f64 {
        if self.bright_lamp_ticks == 0 {
            0.0
        } else {
            self.bright_on_ticks as f64 / self.bright_lamp_ticks as f64
        }
    }
}

/// One row of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRow {
    pub tick: u32,
    pub lamp_idx: usize,
    pub cmd: LampCommand,
    pub listening: bool,
    pub tx: f64,
    pub energy_cum: f64,
}

/// Mutable state of one episode.
#[derive(Debug, Clone)]
pub struct WorldState<'w> {
    world: &'w WorldConfig,
    lamp_cells: Vec<usize>,
    tick: u32,
    lamps: Vec<LampState>,
    people: Vec<PersonState>,
    total_energy: f64,
    completed_people: usize,
    usage: LampUsage,
    prev_tx: Vec<f64>,
    light: Vec<f64>,
}

impl<'w> WorldState<'w> {
    pub fn new(world: &'w WorldConfig) -> Result<Self, WorldError> {
        world.check()?;
        Ok(WorldState {
            world,
            lamp_cells: world.lamp_cells(),
            tick: 0,
            lamps: vec![LampState::default(); world.total_smart_lights],
            people: world
                .people
                .iter()
                .map(|p| PersonState {
                    position: p.start_cell,
                    active: false,
                    completed_tick: None,
                })
                .collect(),
            total_energy: 0.0,
            completed_people: 0,
            usage: LampUsage::default(),
            prev_tx: vec![0.0; world.total_smart_lights],
            light: vec![0.0; world.cells],
        })
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.world.time_simulation
    }

    pub fn lamps(&self) -> &[LampState] {
        &self.lamps
    }

    pub fn people(&self) -> &[PersonState] {
        &self.people
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn completed_people(&self) -> usize {
        self.completed_people
    }

    pub fn usage(&self) -> LampUsage {
        self.usage
    }

    /// Sensor frame of lamp `lamp` at the current tick.
    pub fn sense(&self, lamp: usize) -> SensorFrame {
        let w = self.world;
        let cell = self.lamp_cells[lamp];
        let motion = self
            .people
            .iter()
            .any(|p| p.active && p.position.abs_diff(cell) <= w.motion_range);
        let prev_listening = self.lamps[lamp].prev_listening;
        let received = if prev_listening {
            let lo = lamp.saturating_sub(w.neighbor_radius);
            let hi = (lamp + w.neighbor_radius).min(self.lamps.len() - 1);
            (lo..=hi)
                .filter(|&j| j != lamp)
                .map(|j| self.prev_tx[j])
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        SensorFrame {
            ambient: w.ambient_schedule.level_at(self.tick),
            motion: if motion { 1.0 } else { 0.0 },
            received,
            prev_listening: if prev_listening { 1.0 } else { 0.0 },
        }
    }

    fn activate_arrivals(&mut self) {
        let tick = self.tick;
        for (spec, p) in self.world.people.iter().zip(&mut self.people) {
            if spec.spawn_tick == tick && p.completed_tick.is_none() {
                if spec.start_cell == spec.dest_cell {
                    p.completed_tick = Some(tick);
                    self.completed_people += 1;
                } else {
                    p.active = true;
                }
            }
        }
    }

    /// Advances one tick with every lamp driven by `policy`.
    pub fn step(&mut self, policy: &mut dyn LampPolicy, mut trace: Option<&mut Vec<TraceRow>>) {
        debug_assert!(!self.is_done());
        let w = self.world;
        self.activate_arrivals();

        let ambient = w.ambient_schedule.level_at(self.tick);
        let bright = ambient >= w.comfort_threshold;
        let actions: Vec<LampAction> = (0..self.lamps.len())
            .map(|i| policy.decide(&self.sense(i)))
            .collect();

        let costs = w.energy_costs;
        for (i, (lamp, a)) in self.lamps.iter_mut().zip(&actions).enumerate() {
            let tx = a.tx.clamp(0.0, 1.0);
            let mut e = match a.light {
                LampCommand::On => costs.on,
                LampCommand::Dim => costs.dim,
                LampCommand::Off => costs.off,
            };
            if tx > 0.0 {
                e += costs.tx;
            }
            self.total_energy += e;
            if bright {
                self.usage.bright_lamp_ticks += 1;
                if a.light == LampCommand::On {
                    self.usage.bright_on_ticks += 1;
                }
            }
            *lamp = LampState {
                light_cmd: a.light,
                listening: a.listening,
                tx_value: tx,
                prev_listening: a.listening,
            };
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow {
                    tick: self.tick,
                    lamp_idx: i,
                    cmd: a.light,
                    listening: a.listening,
                    tx,
                    energy_cum: self.total_energy,
                });
            }
        }
        for (prev, lamp) in self.prev_tx.iter_mut().zip(&self.lamps) {
            *prev = lamp.tx_value;
        }

        self.light.iter_mut().for_each(|l| *l = ambient);
        for (lamp, &cell) in self.lamps.iter().zip(&self.lamp_cells) {
            let c = lamp.light_cmd.contribution();
            if c == 0.0 {
                continue;
            }
            let lo = cell.saturating_sub(w.light_radius);
            let hi = (cell + w.light_radius).min(w.cells - 1);
            for l in &mut self.light[lo..=hi] {
                *l += c;
            }
        }

        let even = self.tick.is_multiple_of(2);
        for (spec, p) in w.people.iter().zip(&mut self.people) {
            if !p.active {
                continue;
            }
            let lit = self.light[p.position].min(1.0) >= w.comfort_threshold;
            if lit || even {
                if p.position < spec.dest_cell {
                    p.position += 1;
                } else {
                    p.position -= 1;
                }
                if p.position == spec.dest_cell {
                    p.active = false;
                    p.completed_tick = Some(self.tick + 1);
                    self.completed_people += 1;
                }
            }
        }
        self.tick += 1;
    }

    pub fn stats(&self) -> SimStats {
        let t = self.world.time_simulation;
        let total_time_trip = self
            .world
            .people
            .iter()
            .zip(&self.people)
            .filter(|(spec, _)| spec.spawn_tick < self.tick || self.is_done())
            .map(|(spec, p)| {
                let end = p.completed_tick.unwrap_or(self.tick.min(t));
                end.saturating_sub(spec.spawn_tick) as f64
            })
            .sum();
        SimStats {
            completed_people: self.completed_people,
            total_people: self.world.people.len(),
            total_energy: self.total_energy,
            total_time_trip,
            time_simulation: t,
            total_smart_lights: self.world.total_smart_lights,
        }
    }
}

/// Result of a full episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeOutcome {
    pub stats: SimStats,
    pub usage: LampUsage,
}

/// Runs `world` for its full length from a fresh state.
pub fn run_episode(
    world: &WorldConfig,
    policy: &mut dyn LampPolicy,
) -> Result<EpisodeOutcome, WorldError> {
    let mut state = WorldState::new(world)?;
    while !state.is_done() {
        state.step(policy, None);
    }
    Ok(EpisodeOutcome {
        stats: state.stats(),
        usage: state.usage(),
    })
}

/// Like [`run_episode`] but records one [`TraceRow`] per lamp per tick.
pub fn run_traced(
    world: &WorldConfig,
    policy: &mut dyn LampPolicy,
) -> Result<(EpisodeOutcome, Vec<TraceRow>), WorldError> {
    let mut state = WorldState::new(world)?;
    let mut rows = Vec::with_capacity(world.time_simulation as usize * world.total_smart_lights);
    while !state.is_done() {
        state.step(policy, Some(&mut rows));
    }
    let outcome = EpisodeOutcome {
        stats: state.stats(),
        usage: state.usage(),
    };
    Ok((outcome, rows))
}

/// Writes a trace as CSV with header `tick,lampIdx,cmd,listening,tx,energyCum`.
pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "tick,lampIdx,cmd,listening,tx,energyCum")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.tick,
            r.lamp_idx,
            r.cmd.as_str(),
            u8::from(r.listening),
            r.tx,
            r.energy_cum
        )?;
    }
    Ok(())
}
