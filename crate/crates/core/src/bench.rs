//! Per-frame timings of the direct and FFT routes.

use std::time::{Duration, Instant};

use crate::grid::{GridParams, KernelWidth};
use crate::scatter::{amplitude_direct, FftScatterer, Scattering};
use crate::trajio::{generate_ideal_gas, Frame};
use crate::{Error, Result, Vec3};

/// Minimum wall time of one timing sample; short workloads are looped.
const MIN_SAMPLE: Duration = Duration::from_millis(50);

/// Distinct frames cycled through by the single-point timing.
const POINT_FRAMES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n_atoms: usize,
    pub box_length: f64,
    pub n_grid: usize,
    /// Lattice points per axis of the direct slice and cube.
    pub side: usize,
    /// Timing samples per workload; the median is reported.
    pub repeats: usize,
    /// The 81³-style cube takes minutes on one core.
    pub include_cube: bool,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_atoms: 4000,
            box_length: 59.19,
            n_grid: 400,
            side: 81,
            repeats: 3,
            include_cube: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub label: String,
    pub n_q: usize,
    /// Median wall seconds per frame.
    pub wall: f64,
    /// Process CPU seconds per frame over all threads, when available.
    pub cpu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineInfo {
    pub hardware_threads: usize,
    pub worker_threads: usize,
    pub os: &'static str,
    pub arch: &'static str,
}

impl MachineInfo {
    pub fn detect() -> Self {
        MachineInfo {
            hardware_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: rayon::current_num_threads(),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub machine: MachineInfo,
    pub single_point: Timing,
    pub slice: Timing,
    pub cube: Option<Timing>,
    pub fft: Timing,
}

impl BenchReport {
    pub fn timings(&self) -> impl Iterator<Item = &Timing> {
        [
            Some(&self.single_point),
            Some(&self.slice),
            self.cube.as_ref(),
            Some(&self.fft),
        ]
        .into_iter()
        .flatten()
    }

    /// Direct cube time over FFT full-grid time.
    pub fn fft_speedup(&self) -> Option<f64> {
        Some(self.cube.as_ref()?.wall / self.fft.wall)
    }
}

fn cpu_seconds() -> Option<f64> {
    #[cfg(unix)]
    {
        let mut usage = std::mem::MaybeUninit::<libc::rusage>::uninit();
        // SAFETY: getrusage fills the struct when it returns 0.
        let usage = unsafe {
            if libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) != 0 {
                return None;
            }
            usage.assume_init()
        };
        let tv = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
        Some(tv(usage.ru_utime) + tv(usage.ru_stime))
    }
    #[cfg(not(unix))]
    {
        None
    }
}

/// Median per-call wall and CPU time of `work` over `repeats` samples.
pub fn time_it<T>(label: &str, n_q: usize, repeats: usize, mut work: impl FnMut() -> Result<T>) -> Result<Timing> {
    let mut walls = Vec::with_capacity(repeats);
    let mut cpus = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let (c0, t0) = (cpu_seconds(), Instant::now());
        let mut calls = 0u32;
        loop {
            std::hint::black_box(work()?);
            calls += 1;
            if t0.elapsed() >= MIN_SAMPLE {
                break;
            }
        }
        walls.push(t0.elapsed().as_secs_f64() / calls as f64);
        if let (Some(a), Some(b)) = (c0, cpu_seconds()) {
            cpus.push((b - a) / calls as f64);
        }
    }
    Ok(Timing {
        label: label.to_string(),
        n_q,
        wall: median(&mut walls),
        cpu: (cpus.len() == walls.len()).then(|| median(&mut cpus)),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lattice vectors with integer components in `-(side/2)..=side/2` on the
/// first `dims` axes and zero on the rest.
pub fn lattice_block(side: usize, box_length: f64, dims: usize) -> Vec<Vec3> {
    let half = (side / 2) as i64;
    let step = 2.0 * std::f64::consts::PI / box_length;
    let range = |axis: usize| if axis < dims { -half..=half } else { 0..=0 };
    let mut out = Vec::new();
    for mz in range(2) {
        for my in range(1) {
            for mx in range(0) {
                out.push([mx as f64 * step, my as f64 * step, mz as f64 * step]);
            }
        }
    }
    out
}

/// A fixed on-lattice probe close to (0, 1.48, −1.16) Å⁻¹ for L ≈ 59 Å.
pub fn probe_point(box_length: f64) -> Vec3 {
    let step = 2.0 * std::f64::consts::PI / box_length;
    [0.0, 14.0 * step, -11.0 * step]
}

/// Direct-route time per frame, cycling through `frames` so that repeated
/// calls do not replay the same trigonometric arguments.
pub fn time_direct(label: &str, frames: &[Frame], q: &[Vec3], repeats: usize) -> Result<Timing> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to time"));
    }
    let scattering = Scattering::Unit;
    let mut next = frames.iter().cycle();
    time_it(label, q.len(), repeats, || {
        amplitude_direct(next.next().expect("cycle is endless"), q, &scattering)
    })
}

pub fn time_fft(frame: &Frame, params: GridParams, repeats: usize) -> Result<Timing> {
    let scatterer = FftScatterer::new(params);
    let n = params.n_grid();
    let scattering = Scattering::Unit;
    time_it("fft full grid", n * n * n, repeats, || {
        scatterer.amplitude(frame, &scattering)
    })
}

/// One random frame of `n_atoms` unit scatterers.
pub fn bench_frame(n_atoms: usize, box_length: f64, seed: u64) -> Result<Frame> {
    Ok(bench_frames(n_atoms, box_length, 1, seed)?.remove(0))
}

/// `count` independent random frames.
pub fn bench_frames(n_atoms: usize, box_length: f64, count: usize, seed: u64) -> Result<Vec<Frame>> {
    Ok(generate_ideal_gas(n_atoms, box_length, count, seed)?.frames().to_vec())
}

/// Single-point time per frame at `n_atoms` and at `2·n_atoms`. Samples of
/// the two sizes alternate so that drift in machine speed hits both.
pub fn single_point_scaling(n_atoms: usize, box_length: f64, repeats: usize, seed: u64) -> Result<(Timing, Timing)> {
    let q = [probe_point(box_length)];
    let sizes = [n_atoms, 2 * n_atoms];
    let frames = sizes
        .iter()
        .zip(seed..)
        .map(|(&n, s)| bench_frames(n, box_length, POINT_FRAMES, s))
        .collect::<Result<Vec<_>>>()?;
    let mut samples: [Vec<Timing>; 2] = Default::default();
    for _ in 0..repeats.max(1) {
        for (set, out) in frames.iter().zip(samples.iter_mut()) {
            out.push(time_direct("", set, &q, 1)?);
        }
    }
    let [small, large] = samples.map(|mut v| {
        let mut walls: Vec<f64> = v.iter().map(|t| t.wall).collect();
        let cpu = v
            .iter()
            .map(|t| t.cpu)
            .collect::<Option<Vec<f64>>>()
            .map(|mut c| median(&mut c));
        let mut t = v.swap_remove(0);
        t.wall = median(&mut walls);
        t.cpu = cpu;
        t
    });
    Ok((
        Timing {
            label: format!("direct single point, {n_atoms} atoms"),
            ..small
        },
        Timing {
            label: format!("direct single point, {} atoms", 2 * n_atoms),
            ..large
        },
    ))
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.side == 0 || cfg.repeats == 0 {
        return Err(Error::invalid("benchmark side and repeats must be positive"));
    }
    let frames = bench_frames(cfg.n_atoms, cfg.box_length, POINT_FRAMES, cfg.seed)?;
    let frame = &frames[0];
    let l = cfg.box_length;
    let single_point = time_direct("direct single point", &frames, &[probe_point(l)], cfg.repeats)?;
    let slice = time_direct(
        &format!("direct {0}x{0} slice", cfg.side),
        std::slice::from_ref(frame),
        &lattice_block(cfg.side, l, 2),
        cfg.repeats,
    )?;
    let cube = if cfg.include_cube {
        Some(time_direct(
            &format!("direct {0}x{0}x{0} grid", cfg.side),
            std::slice::from_ref(frame),
            &lattice_block(cfg.side, l, 3),
            1,
        )?)
    } else {
        None
    };
    let params = GridParams::new(cfg.n_grid, l, l / cfg.n_grid as f64, KernelWidth::Auto)?;
    let fft = time_fft(frame, params, cfg.repeats)?;
    Ok(BenchReport {
        config: cfg.clone(),
        machine: MachineInfo::detect(),
        single_point,
        slice,
        cube,
        fft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sizes() {
        assert_eq!(lattice_block(5, 10.0, 2).len(), 25);
        assert_eq!(lattice_block(5, 10.0, 3).len(), 125);
        assert!(lattice_block(3, 10.0, 2).iter().all(|q| q[2] == 0.0));
    }

    #[test]
    fn small_run_reports_every_timing() {
        let cfg = BenchConfig {
            n_atoms: 50,
            box_length: 10.0,
            n_grid: 16,
            side: 5,
            repeats: 1,
            include_cube: true,
            seed: 3,
        };
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.timings().count(), 4);
        assert!(r.timings().all(|t| t.wall > 0.0));
        assert_eq!(r.cube.as_ref().unwrap().n_q, 125);
        assert!(r.fft_speedup().is_some());
    }
}
