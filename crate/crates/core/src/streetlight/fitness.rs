use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Episode totals needed to score a team of lamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimStats {
    pub completed_people: usize,
    pub total_people: usize,
    pub total_energy: f64,
    pub total_time_trip: f64,
    pub time_simulation: u32,
    pub total_smart_lights: usize,
}

/// Percentages and the combined score of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitnessReport {
    pub p_people: f64,
    pub p_energy: f64,
    pub p_trip: f64,
    pub fitness: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitnessInputError {
    #[error("timeSimulation must be positive")]
    NoTime,
    #[error("totalSmartLights must be positive")]
    NoLights,
}

pub const WEIGHT_PEOPLE: f64 = 1.0;
pub const WEIGHT_TRIP: f64 = 0.6;
pub const WEIGHT_ENERGY: f64 = 0.4;

pub fn combine(p_people: f64, p_trip: f64, p_energy: f64) -> f64 {
    WEIGHT_PEOPLE * p_people - WEIGHT_TRIP * p_trip - WEIGHT_ENERGY * p_energy
}

/// Scores an episode. A street without pedestrians counts as a full success
/// with no trip time.
pub fn fitness_report(stats: &SimStats) -> Result<FitnessReport, FitnessInputError> {
    if stats.time_simulation == 0 {
        return Err(FitnessInputError::NoTime);
    }
    if stats.total_smart_lights == 0 {
        return Err(FitnessInputError::NoLights);
    }
    let t = stats.time_simulation as f64;
    let l = stats.total_smart_lights as f64;
    let (p_people, p_trip) = if stats.total_people == 0 {
        (100.0, 0.0)
    } else {
        let n = stats.total_people as f64;
        (
            stats.completed_people as f64 * 100.0 / n,
            stats.total_time_trip * 100.0 / ((3.0 * t / 2.0) * n),
        )
    };
    let p_energy = stats.total_energy * 100.0 / (11.0 * (t * l) / 10.0);
    Ok(FitnessReport {
        p_people,
        p_energy,
        p_trip,
        fitness: combine(p_people, p_trip, p_energy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(
        completed: usize,
        people: usize,
        energy: f64,
        trip: f64,
        t: u32,
        l: usize,
    ) -> SimStats {
        SimStats {
            completed_people: completed,
            total_people: people,
            total_energy: energy,
            total_time_trip: trip,
            time_simulation: t,
            total_smart_lights: l,
        }
    }

    #[test]
    fn people_percentage() {
        let r = fitness_report(&stats(3, 4, 0.0, 0.0, 100, 10)).unwrap();
        assert!((r.p_people - 75.0).abs() < 1e-9);
    }

    #[test]
    fn maximal_energy_is_one_hundred() {
        let r = fitness_report(&stats(0, 1, 1.1 * 100.0 * 10.0, 0.0, 100, 10)).unwrap();
        assert!((r.p_energy - 100.0).abs() < 1e-9);
    }

    #[test]
    fn trip_percentage() {
        let r = fitness_report(&stats(0, 4, 0.0, 600.0, 100, 10)).unwrap();
        assert!((r.p_trip - 100.0).abs() < 1e-9);
    }

    #[test]
    fn weighted_sum() {
        assert!((combine(80.0, 50.0, 40.0) - 34.0).abs() < 1e-9);
    }

    #[test]
    fn always_on_energy_percentage() {
        let r = fitness_report(&stats(0, 0, 1000.0, 0.0, 100, 10)).unwrap();
        assert!((r.p_energy - 1000.0 * 100.0 / 1100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_street_is_vacuous_success() {
        let r = fitness_report(&stats(0, 0, 0.0, 0.0, 10, 2)).unwrap();
        assert_eq!((r.p_people, r.p_trip, r.fitness), (100.0, 0.0, 100.0));
    }

    #[test]
    fn zero_denominators_are_errors() {
        assert_eq!(
            fitness_report(&stats(0, 1, 0.0, 0.0, 0, 2)),
            Err(FitnessInputError::NoTime)
        );
        assert_eq!(
            fitness_report(&stats(0, 1, 0.0, 0.0, 5, 0)),
            Err(FitnessInputError::NoLights)
        );
    }
}
