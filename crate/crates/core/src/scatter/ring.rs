//! Shells of lattice wavevectors with `q − dq/2 ≤ |q| < q + dq/2`.

use crate::grid::ReciprocalLattice;
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct QRing {
    q: f64,
    dq: f64,
    box_length: f64,
    members: Vec<[i64; 3]>,
}

/// All in-band lattice points of the shell, q = 0 excluded, in z-major order.
///
/// The shell must lie inside the sphere inscribed in the grid's band, so no
/// member touches a Nyquist plane.
pub fn q_ring_mask(lattice: &ReciprocalLattice, q: f64, dq: f64) -> Result<QRing> {
    if !(q > 0.0 && dq > 0.0) {
        return Err(Error::invalid(format!(
            "ring needs q > 0 and dq > 0, got q = {q}, dq = {dq}"
        )));
    }
    let (lo, hi) = (q - dq / 2.0, q + dq / 2.0);
    if hi > lattice.q_max() {
        return Err(Error::invalid(format!(
            "ring {q} ± {} Å⁻¹ extends past the band edge {:.5} Å⁻¹",
            dq / 2.0,
            lattice.q_max()
        )));
    }
    let members = shell(lattice.box_length(), lo, hi);
    if members.is_empty() {
        return Err(Error::EmptyRing {
            q,
            half_width: dq / 2.0,
            spacing: lattice.spacing(),
        });
    }
    Ok(QRing {
        q,
        dq,
        box_length: lattice.box_length(),
        members,
    })
}

fn shell(box_length: f64, lo: f64, hi: f64) -> Vec<[i64; 3]> {
    let s = 2.0 * std::f64::consts::PI / box_length;
    let m_max = (hi / s).ceil() as i64;
    let mut out = Vec::new();
    for z in -m_max..=m_max {
        for y in -m_max..=m_max {
            for x in -m_max..=m_max {
                if x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let norm = s * ((x * x + y * y + z * z) as f64).sqrt();
                if norm >= lo && norm < hi {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

impl QRing {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Integer components in units of 2π/L.
    pub fn members(&self) -> &[[i64; 3]] {
        &self.members
    }

    pub fn q_vectors(&self) -> Vec<Vec3> {
        let s = 2.0 * std::f64::consts::PI / self.box_length;
        self.members.iter().map(|m| m.map(|c| c as f64 * s)).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.q_vectors().iter().map(crate::norm).collect()
    }

    /// Mean of |q|² over members.
    pub fn mean_q2(&self) -> f64 {
        let n = self.norms();
        n.iter().map(|q| q * q).sum::<f64>() / n.len() as f64
    }

    /// One member of each ±q pair; intensities at q and −q are equal, so
    /// this is the set of statistically distinct pixels.
    pub fn independent_half(&self) -> QRing {
        let members = self
            .members
            .iter()
            .copied()
            .filter(|m| m.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
            .collect();
        QRing { members, ..*self }
    }
}
