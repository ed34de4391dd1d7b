//! Checkpoint directories.
//!
//! `agent.json` records the algorithm, configuration, noise scales and step
//! counter. Each network is stored as `<role>.json` next to its optimizer
//! state `<role>.adam.json` (online networks only). Replay buffers are not
//! saved.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::d4pg::D4pgCore;
use super::ddpg::DdpgCore;
use super::flat::{FlatAgent, FlatCore};
use super::hddpg::HddpgAgent;
use super::noise::NoiseState;
use super::{Agent, AgentConfig, AgentError};
use crate::nn::{Adam, AdamCheckpoint, MlpNet};

pub const CHECKPOINT_FORMAT: &str = "hddpg-agent";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    algo: String,
    config: AgentConfig,
    /// `[low or flat, high]`; the second entry is unused by flat agents.
    noise: Vec<NoiseState>,
    steps_trained: u64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> AgentError {
    AgentError::Checkpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), AgentError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn read(dir: &Path, name: &str) -> Result<String, AgentError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| io_err(&path, e))
}

fn save_net(dir: &Path, role: &str, net: &MlpNet, opt: Option<&Adam>) -> Result<(), AgentError> {
    write(dir, &format!("{role}.json"), &net.to_json())?;
    if let Some(opt) = opt {
        let ck = serde_json::to_string(&AdamCheckpoint::from(opt)).map_err(|e| io_err(dir, e))?;
        write(dir, &format!("{role}.adam.json"), &ck)?;
    }
    Ok(())
}

fn load_net(dir: &Path, role: &str) -> Result<MlpNet, AgentError> {
    let name = format!("{role}.json");
    MlpNet::from_json(&read(dir, &name)?).map_err(|e| io_err(&dir.join(name), e))
}

fn load_opt(dir: &Path, role: &str, net: &MlpNet) -> Result<Adam, AgentError> {
    let name = format!("{role}.adam.json");
    let ck: AdamCheckpoint =
        serde_json::from_str(&read(dir, &name)?).map_err(|e| io_err(&dir.join(&name), e))?;
    ck.restore(net).map_err(|e| io_err(&dir.join(name), e))
}

fn save_core(dir: &Path, prefix: &str, core: &DdpgCore) -> Result<(), AgentError> {
    save_net(
        dir,
        &format!("{prefix}actor"),
        &core.actor,
        Some(&core.actor_opt),
    )?;
    save_net(
        dir,
        &format!("{prefix}critic"),
        &core.critic,
        Some(&core.critic_opt),
    )?;
    save_net(
        dir,
        &format!("{prefix}target_actor"),
        &core.target_actor,
        None,
    )?;
    save_net(
        dir,
        &format!("{prefix}target_critic"),
        &core.target_critic,
        None,
    )
}

fn load_core(dir: &Path, prefix: &str, config: &AgentConfig) -> Result<DdpgCore, AgentError> {
    let actor = load_net(dir, &format!("{prefix}actor"))?;
    let critic = load_net(dir, &format!("{prefix}critic"))?;
    let mut core = DdpgCore::from_nets(actor, critic, config.core_params())?;
    core.actor_opt = load_opt(dir, &format!("{prefix}actor"), &core.actor)?;
    core.critic_opt = load_opt(dir, &format!("{prefix}critic"), &core.critic)?;
    core.target_actor = load_net(dir, &format!("{prefix}target_actor"))?;
    core.target_critic = load_net(dir, &format!("{prefix}target_critic"))?;
    if !core.target_actor.is_congruent(&core.actor)
        || !core.target_critic.is_congruent(&core.critic)
    {
        return Err(io_err(dir, "target networks do not match online networks"));
    }
    Ok(core)
}

fn save_manifest(dir: &Path, manifest: &Manifest) -> Result<(), AgentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let text = serde_json::to_string_pretty(manifest).map_err(|e| io_err(dir, e))?;
    write(dir, "agent.json", &text)
}

pub(crate) fn save_flat(agent: &FlatAgent, dir: &Path) -> Result<(), AgentError> {
    let algo = match agent.core {
        FlatCore::Ddpg(_) => "ddpg",
        FlatCore::D4pg(_) => "d4pg",
    };
    save_manifest(
        dir,
        &Manifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            algo: algo.into(),
            config: agent.config.clone(),
            noise: vec![agent.noise],
            steps_trained: agent.steps_trained(),
        },
    )?;
    match &agent.core {
        FlatCore::Ddpg(core) => save_core(dir, "", core),
        FlatCore::D4pg(core) => {
            for i in 0..2 {
                let n = i + 1;
                save_net(
                    dir,
                    &format!("actor{n}"),
                    &core.actors[i],
                    Some(&core.actor_opts[i]),
                )?;
                save_net(
                    dir,
                    &format!("critic{n}"),
                    &core.critics[i],
                    Some(&core.critic_opts[i]),
                )?;
                save_net(
                    dir,
                    &format!("target_actor{n}"),
                    &core.target_actors[i],
                    None,
                )?;
                save_net(
                    dir,
                    &format!("target_critic{n}"),
                    &core.target_critics[i],
                    None,
                )?;
            }
            Ok(())
        }
    }
}

pub(crate) fn save_hddpg(agent: &HddpgAgent, dir: &Path) -> Result<(), AgentError> {
    save_manifest(
        dir,
        &Manifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            algo: "hddpg".into(),
            config: agent.config.clone(),
            noise: vec![agent.low_noise, agent.high_noise],
            steps_trained: agent.steps_trained(),
        },
    )?;
    save_core(dir, "high_", &agent.high)?;
    save_core(dir, "low_", &agent.low)
}

fn load_d4pg(dir: &Path, config: &AgentConfig) -> Result<D4pgCore, AgentError> {
    let actors = [load_net(dir, "actor1")?, load_net(dir, "actor2")?];
    let critics = [load_net(dir, "critic1")?, load_net(dir, "critic2")?];
    let mut core = D4pgCore::from_nets(actors, critics, config.core_params())?;
    for i in 0..2 {
        let n = i + 1;
        core.actor_opts[i] = load_opt(dir, &format!("actor{n}"), &core.actors[i])?;
        core.critic_opts[i] = load_opt(dir, &format!("critic{n}"), &core.critics[i])?;
        core.target_actors[i] = load_net(dir, &format!("target_actor{n}"))?;
        core.target_critics[i] = load_net(dir, &format!("target_critic{n}"))?;
        if !core.target_actors[i].is_congruent(&core.actors[i])
            || !core.target_critics[i].is_congruent(&core.critics[i])
        {
            return Err(io_err(dir, "target networks do not match online networks"));
        }
    }
    Ok(core)
}

pub(crate) fn load(dir: &Path) -> Result<Agent, AgentError> {
    let path = dir.join("agent.json");
    let m: Manifest =
        serde_json::from_str(&read(dir, "agent.json")?).map_err(|e| io_err(&path, e))?;
    if m.format != CHECKPOINT_FORMAT || m.version != CHECKPOINT_VERSION {
        return Err(io_err(
            &path,
            format!("unsupported checkpoint {} v{}", m.format, m.version),
        ));
    }
    let noise = |i: usize| {
        m.noise
            .get(i)
            .copied()
            .ok_or_else(|| io_err(&path, "missing noise state"))
    };
    match m.algo.as_str() {
        "ddpg" | "d4pg" => {
            let core = if m.algo == "ddpg" {
                FlatCore::Ddpg(load_core(dir, "", &m.config)?)
            } else {
                FlatCore::D4pg(load_d4pg(dir, &m.config)?)
            };
            let mut agent = FlatAgent::from_core(core, m.config.clone())?;
            agent.noise = noise(0)?;
            agent.set_steps_trained(m.steps_trained);
            Ok(Agent::Flat(agent))
        }
        "hddpg" => {
            let high = load_core(dir, "high_", &m.config)?;
            let low = load_core(dir, "low_", &m.config)?;
            let mut agent = HddpgAgent::from_cores(high, low, m.config.clone())?;
            agent.low_noise = noise(0)?;
            agent.high_noise = noise(1)?;
            agent.set_steps_trained(m.steps_trained);
            Ok(Agent::Hierarchical(agent))
        }
        other => Err(io_err(&path, format!("unknown algorithm {other:?}"))),
    }
}
