//! JSON persistence of fitted models.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mcpca_core::sample::McpcaModel;
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "mcpca-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

pub fn to_json(model: &McpcaModel) -> Result<String> {
    let env = Envelope {
        format: FORMAT.into(),
        version: VERSION,
        model,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<McpcaModel> {
    let env: Envelope<McpcaModel> = serde_json::from_str(s).context("not a model file")?;
    if env.format != FORMAT {
        bail!("unknown model format {:?}", env.format);
    }
    if env.version != VERSION {
        bail!("unsupported model version {}", env.version);
    }
    Ok(env.model)
}

pub fn save(model: &McpcaModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load(path: &Path) -> Result<McpcaModel> {
    let s = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    from_json(&s).with_context(|| format!("in {}", path.display()))
}
