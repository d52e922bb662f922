use serde::Serialize;
use xpcs_core::bench::{run_benchmark, single_point_scaling, BenchConfig, Timing};

use super::Flags;
use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::output::{OutputDir, Table};
use crate::row;

#[derive(Serialize)]
struct MachineJson {
    hardware_threads: usize,
    worker_threads: usize,
    os: &'static str,
    arch: &'static str,
}

#[derive(Serialize)]
struct TimingJson {
    label: String,
    n_q: usize,
    wall_s: f64,
    cpu_s: Option<f64>,
}

impl From<&Timing> for TimingJson {
    fn from(t: &Timing) -> Self {
        TimingJson {
            label: t.label.clone(),
            n_q: t.n_q,
            wall_s: t.wall,
            cpu_s: t.cpu,
        }
    }
}

#[derive(Serialize)]
struct BenchJson {
    machine: MachineJson,
    n_atoms: usize,
    box_length: f64,
    n_grid: usize,
    timings: Vec<TimingJson>,
    /// Direct full cube over FFT full grid.
    fft_speedup: Option<f64>,
    /// Slice time over single-point time.
    slice_over_point: f64,
    /// Single-point time at 2N over time at N.
    point_scaling: Option<f64>,
}

pub fn bench(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let b = &cfg.bench;
    let bc = BenchConfig {
        n_atoms: b.n_atoms,
        box_length: b.box_length,
        n_grid: b.n_grid,
        side: b.side,
        repeats: b.repeats,
        include_cube: b.include_cube,
        seed: cfg.seed,
    };
    let report = run_benchmark(&bc)?;
    let mut timings: Vec<Timing> = report.timings().cloned().collect();
    let point_scaling = if b.scaling {
        let (small, large) = single_point_scaling(b.n_atoms, b.box_length, b.repeats, cfg.seed)?;
        let ratio = large.wall / small.wall;
        timings.push(small);
        timings.push(large);
        Some(ratio)
    } else {
        None
    };

    let mut table = Table::new(&["label", "n_q", "wall_s", "cpu_s"]);
    for t in &timings {
        table.push(row![t.label.as_str(), t.n_q, t.wall, t.cpu.unwrap_or(f64::NAN)]);
    }
    out.write_csv("bench.csv", &table)?;

    let m = &report.machine;
    let json = BenchJson {
        machine: MachineJson {
            hardware_threads: m.hardware_threads,
            worker_threads: m.worker_threads,
            os: m.os,
            arch: m.arch,
        },
        n_atoms: b.n_atoms,
        box_length: b.box_length,
        n_grid: b.n_grid,
        timings: timings.iter().map(TimingJson::from).collect(),
        fft_speedup: report.fft_speedup(),
        slice_over_point: report.slice.wall / report.single_point.wall,
        point_scaling,
    };
    out.write_json("bench.json", &json)?;

    println!("{:<40} {:>10} {:>14}", "workload", "n_q", "wall s/frame");
    for t in &timings {
        println!("{:<40} {:>10} {:>14.6}", t.label, t.n_q, t.wall);
    }
    if let Some(s) = json.fft_speedup {
        println!("FFT speedup over the direct cube: {s:.1}x");
    }
    Ok(Vec::new())
}
