//! Closed loop of controller and world, one call per tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Controller, ControllerError, ControllerTelemetry, Inbound};
use crate::scenario::Scenario;
use crate::world::{Grabber, Pose, SensorReadings, WorldError, WorldState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Everything observable about one tick. The tick number is
/// `controller.tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Ground truth after the actuation was applied.
    pub true_pose: Pose,
    pub fallen: bool,
    pub grabber: Grabber,
    pub arm_angle: f64,
    #[serde(flatten)]
    pub controller: ControllerTelemetry,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    world: WorldState,
    controller: Controller,
    readings: SensorReadings,
    tick: u64,
}

impl Simulation {
    pub fn new(world: WorldState, controller: Controller) -> Simulation {
        let readings = world.sense();
        Simulation {
            world,
            controller,
            readings,
            tick: 0,
        }
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Simulation, ControllerError> {
        let world = scenario.world();
        let controller = Controller::new(
            scenario.controller,
            scenario.geometry,
            scenario.gains,
            scenario.memory,
            scenario.dt(),
            world.pose(),
        )?;
        Ok(Simulation::new(world, controller))
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Readings the controller will see on the next tick.
    pub fn readings(&self) -> &SensorReadings {
        &self.readings
    }

    /// Ticks completed so far.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Runs the controller on the latest readings with `inbound` signals,
    /// then applies its actuation to the world.
    pub fn step(&mut self, inbound: &[Inbound]) -> Result<TickRecord, SimError> {
        let now = self.tick;
        let out = self.controller.control_tick(&self.readings, inbound, now)?;
        self.readings = self.world.step(&out.actuation, self.world.dt)?;
        self.tick += 1;
        Ok(TickRecord {
            true_pose: self.world.pose(),
            fallen: self.world.fallen,
            grabber: self.world.grabber_at(),
            arm_angle: self.world.body.arm_angle,
            controller: out.telemetry,
        })
    }
}
