use xpcs_core::trajio::{write_cache, write_xyz};

use super::{load_trajectory, Flags};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Writes the input trajectory (usually a generator) as XYZ and as a binary cache.
pub fn generate(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let traj = load_trajectory(cfg)?;
    let unwrapped = traj.has_unwrapped();
    out.write_with("trajectory.xyz", |w| {
        write_xyz(&traj, w, unwrapped).map_err(CliError::from)
    })?;
    out.write_with("trajectory.cache", |w| write_cache(&traj, w).map_err(CliError::from))?;
    Ok(Vec::new())
}
