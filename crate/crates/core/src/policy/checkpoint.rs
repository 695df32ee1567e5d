//! Binary checkpoints: magic, format version, a JSON header with everything
//! but the parameters, then both parameter vectors as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionHead, AgentModel, CoreLayout, ModelConfig, PolicyError, ValueLayout, Vocab};
use crate::gridworld::Action;
use crate::strategy::StrategyList;

const MAGIC: &[u8; 8] = b"DYSTCKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    memory: StrategyList,
    env_description: String,
    config: ModelConfig,
    vocab: Vocab,
    head: ActionHead,
    actions: Vec<Action>,
    core_layout: CoreLayout,
    value_layout: ValueLayout,
}

fn bad(msg: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(mut out: W, model: &AgentModel) -> Result<(), PolicyError> {
    let header = Header {
        memory: model.memory.clone(),
        env_description: model.env_description.clone(),
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        head: model.head.clone(),
        actions: model.actions.clone(),
        core_layout: model.core_layout.clone(),
        value_layout: model.value_layout.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for params in [&model.core_params, &model.value_params] {
        out.write_all(&(params.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(params.len() * 8);
        for x in params.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64, PolicyError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_params<R: Read>(input: &mut R, expected: usize) -> Result<Vec<f64>, PolicyError> {
    let n = read_u64(input)? as usize;
    if n != expected {
        return Err(bad(format!(
            "parameter block has {n} values, layout expects {expected}"
        )));
    }
    let mut buf = vec![0u8; n * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<AgentModel, PolicyError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut v = [0u8; 4];
    input.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let len = read_u64(&mut input)? as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let mut h: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    h.vocab.reindex();
    let core_params = read_params(&mut input, h.core_layout.total)?;
    let value_params = read_params(&mut input, h.value_layout.total)?;
    Ok(AgentModel {
        memory: h.memory,
        env_description: h.env_description,
        config: h.config,
        vocab: h.vocab,
        head: h.head,
        actions: h.actions,
        core_layout: h.core_layout,
        value_layout: h.value_layout,
        core_params,
        value_params,
    })
}

pub fn save_checkpoint(path: &Path, model: &AgentModel) -> Result<(), PolicyError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AgentModel, PolicyError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::EnvKind;
    use crate::strategy::StrategyItem;

    #[test]
    fn round_trip_is_exact() {
        let cfg = ModelConfig {
            embed_dim: 4,
            feature_buckets: 16,
            unk_buckets: 4,
            value_hidden: 8,
            ..ModelConfig::default()
        };
        let mut m = AgentModel::new(EnvKind::PutNextS5N2, cfg).unwrap();
        m.memory = StrategyList::new(vec![StrategyItem::new(
            "Drop close",
            "Face the anchor first.",
        )]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        assert!(read_checkpoint(&b"NOTACKPT........"[..]).is_err());
    }
}
