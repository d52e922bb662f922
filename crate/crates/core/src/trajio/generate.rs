//! Synthetic oracle trajectories and tracer selection.
//!
//! Randomness comes from ChaCha8 seeded with the caller's seed, recorded in
//! the trajectory metadata.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Frame, Metadata, Trajectory};
use crate::{Error, Result, Vec3};

/// Species label given to synthetic atoms.
pub const SYNTHETIC_SPECIES: &str = "Ar";

fn check_common(n: usize, box_length: f64, n_frames: usize) -> Result<()> {
    if n == 0 || n_frames == 0 {
        return Err(Error::invalid("need at least one atom and one frame"));
    }
    if !(box_length > 0.0) {
        return Err(Error::invalid(format!("box length must be positive, got {box_length}")));
    }
    Ok(())
}

fn uniform_positions(rng: &mut ChaCha8Rng, n: usize, box_length: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            [
                rng.random::<f64>() * box_length,
                rng.random::<f64>() * box_length,
                rng.random::<f64>() * box_length,
            ]
        })
        .collect()
}

/// Independent Gaussian random walks: every coordinate gets an increment of
/// variance `2·D·dt` per frame, starting from uniform positions. Unwrapped
/// positions are kept. `D = 0` gives a static trajectory.
pub fn generate_brownian(
    n: usize,
    box_length: f64,
    diffusivity: f64,
    dt: f64,
    n_frames: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_common(n, box_length, n_frames)?;
    if !(diffusivity >= 0.0) || !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "need D ≥ 0 and dt > 0, got D = {diffusivity}, dt = {dt}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let species: Arc<[String]> = vec![SYNTHETIC_SPECIES.to_string(); n].into();
    let sigma = (2.0 * diffusivity * dt).sqrt();
    let mut current = uniform_positions(&mut rng, n, box_length);
    let mut frames = Vec::with_capacity(n_frames);
    for step in 0..n_frames {
        if step > 0 && sigma > 0.0 {
            for r in current.iter_mut() {
                for c in r.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *c += sigma * z;
                }
            }
        }
        frames.push(Frame::with_unwrapped(
            current.clone(),
            species.clone(),
            box_length,
            step as f64 * dt,
        )?);
    }
    Trajectory::new(
        frames,
        Metadata {
            source: format!("brownian(n={n}, L={box_length}, D={diffusivity}, dt={dt})"),
            seed: Some(seed),
        },
    )
}

/// Fully decorrelated frames: each is a fresh uniform draw of `n` atoms.
/// Frames are stamped 1 ps apart.
pub fn generate_ideal_gas(n: usize, box_length: f64, n_frames: usize, seed: u64) -> Result<Trajectory> {
    check_common(n, box_length, n_frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let species: Arc<[String]> = vec![SYNTHETIC_SPECIES.to_string(); n].into();
    let frames = (0..n_frames)
        .map(|i| {
            Frame::new(
                uniform_positions(&mut rng, n, box_length),
                species.clone(),
                box_length,
                i as f64,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(
        frames,
        Metadata {
            source: format!("ideal_gas(n={n}, L={box_length})"),
            seed: Some(seed),
        },
    )
}

/// Picks `count` atoms uniformly without replacement; the chosen indices
/// are kept in ascending order.
pub fn select_tracers(traj: &Trajectory, count: usize, seed: u64) -> Result<Trajectory> {
    let n = traj.n_atoms();
    if count > n {
        return Err(Error::invalid(format!("cannot select {count} tracers from {n} atoms")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    traj.subset(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diffusion_is_static() {
        let t = generate_brownian(5, 10.0, 0.0, 1.0, 3, 1).unwrap();
        assert_eq!(t.frame(0).positions(), t.frame(2).positions());
    }

    #[test]
    fn same_seed_same_bits() {
        let a = generate_brownian(20, 10.0, 0.3, 1.0, 5, 9).unwrap();
        let b = generate_brownian(20, 10.0, 0.3, 1.0, 5, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_brownian(20, 10.0, 0.3, 1.0, 5, 10).unwrap();
        assert_ne!(a.frame(1).positions(), c.frame(1).positions());
    }

    #[test]
    fn ideal_gas_frames_in_box_and_reproducible() {
        let a = generate_ideal_gas(1, 7.0, 10, 4).unwrap();
        let b = generate_ideal_gas(1, 7.0, 10, 4).unwrap();
        assert_eq!(a, b);
        for f in a.frames() {
            assert!(f.positions()[0].iter().all(|&x| (0.0..7.0).contains(&x)));
        }
        assert_ne!(a.frame(0).positions(), a.frame(1).positions());
    }

    #[test]
    fn tracer_selection() {
        let t = generate_brownian(4000, 59.19, 0.1, 1.0, 2, 1).unwrap();
        let s = select_tracers(&t, 45, 7).unwrap();
        assert_eq!(s.n_atoms(), 45);
        assert_eq!(s, select_tracers(&t, 45, 7).unwrap());
        assert_eq!(select_tracers(&t, 4000, 3).unwrap(), t);
        assert!(select_tracers(&t, 4001, 3).is_err());
    }
}
