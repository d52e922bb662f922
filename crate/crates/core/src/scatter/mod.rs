//! Scattering amplitudes and speckle intensities, form factors, q rings,
//! detector slices and the g(r) / S(q) validation curves.

mod direct;
pub mod ewald;
mod fft;
mod field;
pub mod form_factor;
mod ring;
pub mod validation;

pub use direct::{amplitude_direct, amplitude_direct_grid, intensity_direct, phase_sum};
pub use ewald::{ewald_slice, DetectorGeometry, DetectorImage};
pub use fft::{amplitude_fft, intensity_fft, FftScatterer};
pub use field::{AmplitudeField, Method, SpeckleField, Support};
pub use form_factor::{form_factor, FormFactor, FormFactorTable, Scattering};
pub use ring::{q_ring_mask, QRing};
pub use validation::{
    pair_distribution, structure_factor_angular_avg, PairDistribution, SqAccumulator, StructureFactor,
};
