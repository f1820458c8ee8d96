//! Checkpoint directories: the run config plus one weight file per agent
//! (and the central estimator for GDQ).

use std::path::Path;

use gdq_core::dueling::DuelingNetwork;
use gdq_core::train::Learner;

use crate::config::RunConfig;
use crate::metrics::io_err;
use crate::HarnessError;

pub const CONFIG_FILE: &str = "config.toml";
pub const CENTRAL_FILE: &str = "central.bin";

pub fn agent_file(i: usize) -> String {
    format!("agent-{i}.bin")
}

pub fn save(dir: &Path, config: &RunConfig, learner: &dyn Learner) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    for i in 0..learner.n_agents() {
        write(&dir.join(agent_file(i)), &learner.policy(i).to_bytes())?;
    }
    if let Some(central) = learner.central() {
        write(&dir.join(CENTRAL_FILE), &central.to_bytes())?;
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// A loaded checkpoint: its config and the per-agent policies.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub policies: Vec<DuelingNetwork>,
}

pub fn load(dir: &Path) -> Result<Checkpoint, HarnessError> {
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut config = RunConfig::from_toml(&text)?;
    config.materialize();
    config.validate()?;
    let policies = (0..config.n_agents())
        .map(|i| {
            let p = dir.join(agent_file(i));
            let bytes = std::fs::read(&p).map_err(io_err(&p))?;
            DuelingNetwork::from_bytes(&bytes)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Checkpoint { config, policies })
}
