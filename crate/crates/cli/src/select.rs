use clap::ValueEnum;
use fmse_core::model::{Agent, DatasetMeta, SensorId};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgentArg {
    Vehicle,
    Tower,
}

impl From<AgentArg> for Agent {
    fn from(a: AgentArg) -> Agent {
        match a {
            AgentArg::Vehicle => Agent::Vehicle,
            AgentArg::Tower => Agent::Tower,
        }
    }
}

/// Resolves `NAME` or `AGENT/NAME` (case-insensitive) against the registry.
pub fn sensor(meta: &DatasetMeta, agent: Option<AgentArg>, selector: &str) -> Result<SensorId, CliError> {
    let (agent, name) = match selector.split_once('/') {
        Some((a, n)) => {
            let a = match a.to_ascii_uppercase().as_str() {
                "VEHICLE" => Agent::Vehicle,
                "TOWER" => Agent::Tower,
                _ => return Err(CliError::Usage(format!("unknown agent in {selector:?}"))),
            };
            (Some(a), n)
        }
        None => (agent.map(Agent::from), selector),
    };
    let name = name.to_ascii_uppercase();
    let hits: Vec<&SensorId> = meta
        .find_by_name(&name)
        .into_iter()
        .filter(|s| agent.is_none_or(|a| s.agent == a))
        .collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(CliError::Usage(format!("unknown sensor {selector:?}"))),
        _ => Err(CliError::Usage(format!("sensor {selector:?} is ambiguous; prefix it with the agent"))),
    }
}

/// Parses `AGENT/NAME`, the key format of topic map files.
pub fn qualified(meta: &DatasetMeta, key: &str) -> Result<SensorId, CliError> {
    if !key.contains('/') {
        return Err(CliError::Usage(format!("expected AGENT/NAME, got {key:?}")));
    }
    sensor(meta, None, key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fmse_core::fixtures;

    #[test]
    fn selectors() {
        let meta = fixtures::meta();
        assert_eq!(sensor(&meta, None, "front_left").unwrap().name, "FRONT_LEFT");
        assert_eq!(sensor(&meta, None, "tower/gnss").unwrap().agent, Agent::Tower);
        assert!(sensor(&meta, Some(AgentArg::Tower), "FRONT_LEFT").is_err());
        assert!(sensor(&meta, None, "bus/FRONT_LEFT").is_err());
        assert!(qualified(&meta, "FRONT_LEFT").is_err());
    }
}
