use xpcs_core::scatter::{pair_distribution, structure_factor_angular_avg};

use super::{grid_params, load_trajectory, Flags};
use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::output::{OutputDir, Table};
use crate::row;

/// g(r) always; S(q) by the FFT route when a grid is configured.
pub fn validate(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let traj = load_trajectory(cfg)?;
    let l = traj.box_length();
    let v = &cfg.validate;
    let gr = pair_distribution(&traj, v.r_max.unwrap_or(l / 2.0), v.r_bins.unwrap_or(200))?;
    let mut t = Table::new(&["r", "g"]);
    for (r, g) in gr.r.iter().zip(&gr.g) {
        t.push(row![*r, *g]);
    }
    out.write_csv("gr.csv", &t)?;

    if cfg.grid.is_some() {
        let params = grid_params(cfg, l)?;
        let q_max = v.q_max.unwrap_or(std::f64::consts::PI * params.n_grid() as f64 / l);
        let bins = v.q_bins.unwrap_or(50).max(1);
        let q_min = 2.0 * std::f64::consts::PI / l * 0.5;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| q_min + (q_max - q_min) * i as f64 / bins as f64)
            .collect();
        let sq = structure_factor_angular_avg(&traj, &params, &cfg.form_factor.scattering(), edges)?;
        let mut t = Table::new(&["q", "s", "count"]);
        for i in 0..sq.q.len() {
            t.push(row![sq.q[i], sq.s[i], sq.counts[i]]);
        }
        out.write_csv("sq.csv", &t)?;
    } else {
        log::info!("no [grid] table, skipping S(q)");
    }
    Ok(Vec::new())
}
