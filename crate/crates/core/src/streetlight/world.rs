use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("world needs at least one {0}")]
    Empty(&'static str),
    #[error("{lights} lamps do not fit on {cells} cells")]
    TooManyLights { lights: usize, cells: usize },
    #[error("person {index}: {reason}")]
    Person { index: usize, reason: String },
    #[error("ambient schedule: {0}")]
    Schedule(String),
    #[error("{0} must be a finite non-negative number")]
    BadNumber(&'static str),
}

/// One piece of the ambient schedule: `level` holds for ticks below
/// `until_tick` (and at or above the previous segment's end). Serialized as
/// an `[untilTick, level]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, f64)", into = "(u32, f64)")]
pub struct AmbientSegment {
    pub until_tick: u32,
    pub level: f64,
}

impl From<(u32, f64)> for AmbientSegment {
    fn from((until_tick, level): (u32, f64)) -> Self {
        AmbientSegment { until_tick, level }
    }
}

impl From<AmbientSegment> for (u32, f64) {
    fn from(s: AmbientSegment) -> Self {
        (s.until_tick, s.level)
    }
}

/// Background light over simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmbientSchedule(pub Vec<AmbientSegment>);

impl AmbientSchedule {
    pub fn constant(level: f64, ticks: u32) -> Self {
        AmbientSchedule(vec![AmbientSegment {
            until_tick: ticks,
            level,
        }])
    }

    pub fn bright(ticks: u32) -> Self {
        Self::constant(1.0, ticks)
    }

    pub fn dark(ticks: u32) -> Self {
        Self::constant(0.0, ticks)
    }

    /// Alternating full daylight and darkness in blocks of `period` ticks,
    /// starting bright.
    pub fn alternating(ticks: u32, period: u32) -> Self {
        let period = period.max(1);
        let mut segments = Vec::new();
        let mut end = 0;
        let mut bright = true;
        while end < ticks {
            end = (end + period).min(ticks);
            segments.push(AmbientSegment {
                until_tick: end,
                level: if bright { 1.0 } else { 0.0 },
            });
            bright = !bright;
        }
        AmbientSchedule(segments)
    }

    /// Checks that the segments are increasing, levels lie in `[0, 1]` and
    /// the schedule covers `[0, ticks)`.
    pub fn check(&self, ticks: u32) -> Result<(), WorldError> {
        let err = |m: String| Err(WorldError::Schedule(m));
        let Some(last) = self.0.last() else {
            return err("no segments".into());
        };
        let mut prev = 0;
        for (i, s) in self.0.iter().enumerate() {
            if s.until_tick <= prev {
                return err(format!(
                    "segment {i} ends at {} which is not after {prev}",
                    s.until_tick
                ));
            }
            if !(0.0..=1.0).contains(&s.level) {
                return err(format!("segment {i} level {} outside [0, 1]", s.level));
            }
            prev = s.until_tick;
        }
        if last.until_tick < ticks {
            return err(format!(
                "covers [0, {}) but the simulation runs for {ticks} ticks",
                last.until_tick
            ));
        }
        Ok(())
    }

    /// Level at `tick`; past the last segment the last level holds.
    pub fn level_at(&self, tick: u32) -> f64 {
        self.0
            .iter()
            .find(|s| tick < s.until_tick)
            .or(self.0.last())
            .map_or(0.0, |s| s.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersonSpec {
    pub spawn_tick: u32,
    pub start_cell: usize,
    pub dest_cell: usize,
}

/// Energy drawn per lamp per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCosts {
    pub on: f64,
    pub dim: f64,
    pub off: f64,
    /// Charged whenever the lamp transmits a non-zero value.
    pub tx: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        EnergyCosts {
            on: 1.0,
            dim: 0.5,
            off: 0.0,
            tx: 0.1,
        }
    }
}

/// A one-dimensional street of `cells` cells with evenly spaced lamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldConfig {
    pub total_smart_lights: usize,
    pub cells: usize,
    pub time_simulation: u32,
    pub people: Vec<PersonSpec>,
    pub ambient_schedule: AmbientSchedule,
    #[serde(default = "defaults::comfort_threshold")]
    pub comfort_threshold: f64,
    #[serde(default = "defaults::one")]
    pub light_radius: usize,
    #[serde(default = "defaults::one")]
    pub motion_range: usize,
    #[serde(default = "defaults::one")]
    pub neighbor_radius: usize,
    #[serde(default)]
    pub energy_costs: EnergyCosts,
    #[serde(default)]
    pub episode_seed: u64,
}

mod defaults {
    pub fn comfort_threshold() -> f64 {
        0.5
    }

    pub fn one() -> usize {
        1
    }
}

/// Number of lamps in the reference street.
pub const REFERENCE_LIGHTS: usize = 10;
pub const REFERENCE_CELLS: usize = 50;
pub const REFERENCE_TICKS: u32 = 500;
pub const REFERENCE_PEOPLE: usize = 20;

impl WorldConfig {
    /// World with default radii, comfort threshold and energy costs.
    pub fn new(
        total_smart_lights: usize,
        cells: usize,
        time_simulation: u32,
        people: Vec<PersonSpec>,
        ambient_schedule: AmbientSchedule,
    ) -> Self {
        WorldConfig {
            total_smart_lights,
            cells,
            time_simulation,
            people,
            ambient_schedule,
            comfort_threshold: defaults::comfort_threshold(),
            light_radius: 1,
            motion_range: 1,
            neighbor_radius: 1,
            energy_costs: EnergyCosts::default(),
            episode_seed: 0,
        }
    }

    /// The reference street: 10 lamps on 50 cells, 500 ticks, 20 walkers
    /// drawn from `seed` by [`PeopleGenerator::reference`].
    pub fn reference(ambient_schedule: AmbientSchedule, seed: u64) -> Self {
        let people = PeopleGenerator::reference().generate(REFERENCE_CELLS, REFERENCE_TICKS, seed);
        WorldConfig {
            episode_seed: seed,
            ..Self::new(
                REFERENCE_LIGHTS,
                REFERENCE_CELLS,
                REFERENCE_TICKS,
                people,
                ambient_schedule,
            )
        }
    }

    pub fn check(&self) -> Result<(), WorldError> {
        if self.total_smart_lights == 0 {
            return Err(WorldError::Empty("smart light"));
        }
        if self.cells == 0 {
            return Err(WorldError::Empty("cell"));
        }
        if self.time_simulation == 0 {
            return Err(WorldError::Empty("tick"));
        }
        if self.total_smart_lights > self.cells {
            return Err(WorldError::TooManyLights {
                lights: self.total_smart_lights,
                cells: self.cells,
            });
        }
        for (index, p) in self.people.iter().enumerate() {
            let reason = if p.start_cell >= self.cells || p.dest_cell >= self.cells {
                Some("cell outside the street".to_string())
            } else if p.spawn_tick >= self.time_simulation {
                Some(format!(
                    "spawns at {} but the simulation ends at {}",
                    p.spawn_tick, self.time_simulation
                ))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(WorldError::Person { index, reason });
            }
        }
        self.ambient_schedule.check(self.time_simulation)?;
        if !(self.comfort_threshold.is_finite() && self.comfort_threshold >= 0.0) {
            return Err(WorldError::BadNumber("comfortThreshold"));
        }
        let c = self.energy_costs;
        for (name, v) in [
            ("energyCosts.on", c.on),
            ("energyCosts.dim", c.dim),
            ("energyCosts.off", c.off),
            ("energyCosts.tx", c.tx),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(WorldError::BadNumber(name));
            }
        }
        Ok(())
    }

    /// Cell of each lamp: lamp `i` sits at the middle of the `i`-th of
    /// `total_smart_lights` equal stretches of street.
    pub fn lamp_cells(&self) -> Vec<usize> {
        let (l, c) = (self.total_smart_lights, self.cells);
        (0..l).map(|i| (2 * i + 1) * c / (2 * l)).collect()
    }
}

/// Draws pedestrians for a street.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeopleGenerator {
    pub count: usize,
    /// Spawn ticks are drawn from `[spawn_from, spawn_to)`, as fractions of
    /// the simulation length.
    pub spawn_from: f64,
    pub spawn_to: f64,
    /// Minimum route length as a fraction of the street length.
    pub min_route: f64,
    /// Caps each spawn tick so a walker at full speed arrives before the
    /// simulation ends.
    #[serde(default)]
    pub arrive_in_time: bool,
}

impl PeopleGenerator {
    /// Evening walkers: they set off during the last fifth of the
    /// simulation, walk at least half the street, and would arrive in time at
    /// full speed. Darkness late in the day can strand them.
    pub fn reference() -> Self {
        PeopleGenerator {
            count: REFERENCE_PEOPLE,
            spawn_from: 0.8,
            spawn_to: 1.0,
            min_route: 0.5,
            arrive_in_time: true,
        }
    }

    pub fn generate(&self, cells: usize, ticks: u32, seed: u64) -> Vec<PersonSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ticks = ticks.max(1);
        let lo = ((self.spawn_from * ticks as f64) as u32).min(ticks - 1);
        let hi = ((self.spawn_to * ticks as f64) as u32).clamp(lo + 1, ticks);
        let min_route =
            ((self.min_route * cells as f64) as usize).clamp(1, cells.saturating_sub(1).max(1));
        (0..self.count)
            .map(|_| {
                let (start_cell, dest_cell) = loop {
                    let a = rng.random_range(0..cells);
                    let b = rng.random_range(0..cells);
                    if a.abs_diff(b) >= min_route || cells < 2 {
                        break (a, b);
                    }
                };
                let route = start_cell.abs_diff(dest_cell) as u32;
                let hi = if self.arrive_in_time {
                    hi.min((ticks + 1).saturating_sub(route)).max(lo + 1)
                } else {
                    hi
                };
                PersonSpec {
                    spawn_tick: rng.random_range(lo..hi),
                    start_cell,
                    dest_cell,
                }
            })
            .collect()
    }
}
