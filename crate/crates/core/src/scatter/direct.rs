//! Amplitudes by summing over atoms for each wavevector.

use std::borrow::Cow;

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{AmplitudeField, Method, SpeckleField, Support};
use super::form_factor::{resolve, Scattering};
use crate::fft3::HalfLayout;
use crate::grid::{GridParams, ReciprocalLattice};
use crate::trajio::Frame;
use crate::{Error, Result, Vec3};

/// p(q) = Σᵢ fᵢ(q) exp(−i q·rᵢ) for each q in `q_list`.
///
/// Every q must lie on the reciprocal lattice of the frame's box.
pub fn amplitude_direct(frame: &Frame, q_list: &[Vec3], scattering: &Scattering) -> Result<AmplitudeField> {
    let l = frame.box_length();
    if let Some(q) = q_list
        .iter()
        .find(|q| ReciprocalLattice::integer_components(q, l).is_none())
    {
        return Err(Error::OffLattice {
            q: *q,
            spacing: 2.0 * std::f64::consts::PI / l,
        });
    }
    let groups = resolve(scattering, frame.species())?;
    let positions = frame.positions();
    // one group holds every atom in order; no need to copy
    let group_positions: Vec<Cow<'_, [Vec3]>> = if groups.len() == 1 {
        vec![Cow::Borrowed(positions)]
    } else {
        groups
            .iter()
            .map(|(_, idx)| Cow::Owned(idx.iter().map(|&i| positions[i]).collect()))
            .collect()
    };

    let values = q_list
        .par_iter()
        .map(|q| {
            let qn = crate::norm(q);
            groups
                .iter()
                .zip(&group_positions)
                .map(|((ff, _), pos)| ff.eval(qn) * phase_sum(q, pos))
                .sum()
        })
        .collect();
    AmplitudeField::new(
        Support::Points {
            box_length: l,
            q: q_list.to_vec(),
        },
        values,
        frame.time(),
        Method::Direct,
    )
}

/// Σᵢ exp(−i q·rᵢ).
#[inline]
pub fn phase_sum(q: &Vec3, positions: &[Vec3]) -> Complex64 {
    let (re, im) = positions.iter().fold((0.0, 0.0), |(re, im), r| {
        let (s, c) = crate::dot(q, r).sin_cos();
        (re + c, im - s)
    });
    Complex64::new(re, im)
}

/// Direct amplitudes at every stored point of `params`' grid, slot for slot
/// with the FFT route. Costs N·(N_grid³/2) phase evaluations.
pub fn amplitude_direct_grid(frame: &Frame, params: &GridParams, scattering: &Scattering) -> Result<AmplitudeField> {
    params.check_box(frame.box_length())?;
    let layout = HalfLayout::new(params.n_grid());
    let lattice = params.lattice();
    let q: Vec<Vec3> = (0..layout.len())
        .map(|slot| {
            let (x, y, z) = layout.triple(slot);
            lattice.q_vector(x, y, z)
        })
        .collect();
    let p = amplitude_direct(frame, &q, scattering)?;
    AmplitudeField::new(
        Support::Grid(*params),
        p.values().to_vec(),
        frame.time(),
        Method::Direct,
    )
}

pub fn intensity_direct(frame: &Frame, q_list: &[Vec3], scattering: &Scattering) -> Result<SpeckleField> {
    Ok(amplitude_direct(frame, q_list, scattering)?.into_intensity())
}
