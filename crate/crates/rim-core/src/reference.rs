//! The reference 8-station machine: base-part input, press 1, part-2 feed,
//! press 2, two quality-control stations (dimension, tightness), and the two
//! eject stations sorting OK from Not-OK. Bundled so tests, benches and the
//! CLI agree on one canonical definition.

use crate::config::{load_machine_definition, MachineDefinition};
use crate::sim::MachineConfig;

pub const MACHINE_JSON: &str = include_str!("../../../config/reference_machine.json");

pub fn machine_definition() -> MachineDefinition {
    load_machine_definition(MACHINE_JSON).expect("bundled reference config is valid")
}

pub fn machine_config() -> MachineConfig {
    MachineConfig::new(machine_definition()).expect("bundled reference config simulates")
}
