use std::io::Write;

use super::require_checkpoint;
use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut net = require_checkpoint(cfg, "serve")?;
    if let Some(id) = &cfg.model_id {
        net.set_id(id.clone());
    }
    let id = net.id().to_string();
    cfg.echo(&format!("{id}.serve"))?;
    let handle = brittle_service::serve(net, cfg.bind.as_str())?;
    let mut out = std::io::stdout();
    writeln!(out, "serving {id} at {}", handle.url())?;
    out.flush()?;
    handle.join()?;
    Ok(())
}
