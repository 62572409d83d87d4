//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ATSC"  version:u8  sha256(config text):[u8; 32]
//! config text:   u64 byte length, UTF-8
//! network text:  u64 byte length, UTF-8
//! agents:u32, then per agent  blocks:u32, then per block  count:u64, count × f64
//! ```
//!
//! Actor-critic agents store four blocks (actor, critic, actor optimizer
//! state, critic optimizer state); Q-learners one. Shapes are not stored:
//! they are rebuilt from the embedded config and network.

use std::path::Path;

use atsc_core::netmodel::TrafficNetwork;
use atsc_core::neural::Parameters;
use atsc_core::trainer::AgentModels;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{AtscError, Result};
use crate::netfile;

pub const MAGIC: &[u8; 4] = b"ATSC";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub network: TrafficNetwork,
    pub models: AgentModels,
}

pub fn config_hash(config_text: &str) -> [u8; 32] {
    Sha256::digest(config_text.as_bytes()).into()
}

fn put_block(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_text(out: &mut Vec<u8>, text: &str) {
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AtscError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| AtscError::Checkpoint("length overflows".into()))
    }

    fn text(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| AtscError::Checkpoint("text block is not UTF-8".into()))
    }

    fn block(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| AtscError::Checkpoint("block too large".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config_text = self.config.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&config_hash(&config_text));
        put_text(&mut out, &config_text);
        put_text(&mut out, &netfile::write(&self.network));
        match &self.models {
            AgentModels::A2c(agents) => {
                out.extend_from_slice(&(agents.len() as u32).to_le_bytes());
                for a in agents {
                    out.extend_from_slice(&4u32.to_le_bytes());
                    put_block(&mut out, &a.actor.to_flat());
                    put_block(&mut out, &a.critic.to_flat());
                    put_block(&mut out, &a.actor_opt.accumulator);
                    put_block(&mut out, &a.critic_opt.accumulator);
                }
            }
            AgentModels::Iql(qs) => {
                out.extend_from_slice(&(qs.len() as u32).to_le_bytes());
                for q in qs {
                    out.extend_from_slice(&1u32.to_le_bytes());
                    put_block(&mut out, &q.to_flat());
                }
            }
            AgentModels::Greedy => out.extend_from_slice(&0u32.to_le_bytes()),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(AtscError::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(AtscError::CheckpointVersion { found: version, expected: VERSION });
        }
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let config_text = r.text()?;
        if config_hash(&config_text) != hash {
            return Err(AtscError::Checkpoint("config hash mismatch".into()));
        }
        let network_text = r.text()?;
        let mut config = RunConfig::default();
        config.apply_text(&config_text, "checkpoint config")?;
        let config = config.finish()?;
        let network = netfile::parse(&network_text, "checkpoint network")?;
        let mut models = AgentModels::new(&config.train, &network);

        let agents = r.u32()? as usize;
        let expect_blocks = |found: u32, want: u32| {
            if found == want {
                Ok(())
            } else {
                Err(AtscError::Checkpoint(format!("agent has {found} blocks, expected {want}")))
            }
        };
        let shape_err = |e: atsc_core::Error| AtscError::Incompatible(e.to_string());
        match &mut models {
            AgentModels::A2c(list) => {
                if agents != list.len() {
                    return Err(AtscError::Incompatible(format!("{agents} agents stored, network has {}", list.len())));
                }
                for a in list.iter_mut() {
                    expect_blocks(r.u32()?, 4)?;
                    a.actor.load_flat(&r.block()?).map_err(shape_err)?;
                    a.critic.load_flat(&r.block()?).map_err(shape_err)?;
                    for (opt, n) in [(&mut a.actor_opt, a.actor.param_count()), (&mut a.critic_opt, a.critic.param_count())] {
                        let acc = r.block()?;
                        if acc.len() != n {
                            return Err(AtscError::Incompatible("optimizer state size".into()));
                        }
                        opt.accumulator = acc;
                    }
                }
            }
            AgentModels::Iql(list) => {
                if agents != list.len() {
                    return Err(AtscError::Incompatible(format!("{agents} agents stored, network has {}", list.len())));
                }
                for q in list.iter_mut() {
                    expect_blocks(r.u32()?, 1)?;
                    q.load_flat(&r.block()?).map_err(shape_err)?;
                }
            }
            AgentModels::Greedy => {
                if agents != 0 {
                    return Err(AtscError::Checkpoint("greedy checkpoint carries parameters".into()));
                }
            }
        }
        if r.pos != bytes.len() {
            return Err(AtscError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { config, network, models })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| AtscError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| AtscError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
