//! Detector images sampled on the Ewald sphere.

use std::io::Write;

use crate::fft3::fft_index;
use crate::scatter::{SpeckleField, Support};
use crate::{Error, Result, Vec3};

/// Square angular detector centred on the forward beam.
///
/// Pixel directions are spaced evenly in the tangent of the scattering angle
/// along two axes perpendicular to the beam, reaching `half_angle` at the
/// edge centres. An odd pixel count puts one pixel on the beam axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorGeometry {
    /// Å.
    pub wavelength: f64,
    pub beam: Vec3,
    /// Radians, in (0, π/2).
    pub half_angle: f64,
    pub pixels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorImage {
    pub pixels: usize,
    /// Per pixel, row-major.
    pub q: Vec<Vec3>,
    /// NaN where q leaves the field's band.
    pub intensity: Vec<f64>,
}

fn unit(v: Vec3) -> Vec3 {
    let n = crate::norm(&v);
    v.map(|c| c / n)
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl DetectorGeometry {
    fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid(format!(
                "wavelength {} Å must be positive",
                self.wavelength
            )));
        }
        if !(crate::norm(&self.beam) > 0.0) {
            return Err(Error::invalid("beam direction must be non-zero"));
        }
        if !(self.half_angle > 0.0 && self.half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("detector half angle must lie in (0, π/2)"));
        }
        if self.pixels == 0 {
            return Err(Error::invalid("detector needs at least one pixel"));
        }
        Ok(())
    }

    /// q = k_f − k_i for every pixel, row-major.
    pub fn q_map(&self) -> Result<Vec<Vec3>> {
        self.validate()?;
        let b = unit(self.beam);
        let helper = if b[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let e1 = unit(cross(&b, &helper));
        let e2 = cross(&b, &e1);
        let k = 2.0 * std::f64::consts::PI / self.wavelength;
        let n = self.pixels;
        let centre = (n as f64 - 1.0) / 2.0;
        let t = self.half_angle.tan() / centre.max(1.0);
        let mut out = Vec::with_capacity(n * n);
        for row in 0..n {
            let v = (row as f64 - centre) * t;
            for col in 0..n {
                let u = (col as f64 - centre) * t;
                let d = unit([0, 1, 2].map(|i| b[i] + u * e1[i] + v * e2[i]));
                out.push([0, 1, 2].map(|i| k * (d[i] - b[i])));
            }
        }
        Ok(out)
    }
}

/// Samples a grid field at the lattice point nearest to each pixel's q.
pub fn ewald_slice(field: &SpeckleField, geometry: &DetectorGeometry) -> Result<DetectorImage> {
    let Support::Grid(params) = field.support() else {
        return Err(Error::invalid("an Ewald slice needs a field on the full grid"));
    };
    let n = params.n_grid();
    let s = params.lattice().spacing();
    let q = geometry.q_map()?;
    let intensity = q
        .iter()
        .map(|v| {
            let idx = v.map(|c| fft_index((c / s).round() as i64, n));
            match idx {
                [Some(x), Some(y), Some(z)] => field.at(x, y, z).unwrap_or(f64::NAN),
                _ => f64::NAN,
            }
        })
        .collect();
    Ok(DetectorImage {
        pixels: geometry.pixels,
        q,
        intensity,
    })
}

impl DetectorImage {
    /// Pixel-wise mean of images with a common geometry.
    pub fn average(images: &[DetectorImage]) -> Result<DetectorImage> {
        let first = images
            .first()
            .ok_or_else(|| Error::Insufficient("no images to average".into()))?;
        if images.iter().any(|im| im.q != first.q) {
            return Err(Error::GridMismatch("images have different geometries".into()));
        }
        let mut intensity = vec![0.0; first.intensity.len()];
        for im in images {
            intensity.iter_mut().zip(&im.intensity).for_each(|(a, b)| *a += b);
        }
        let m = images.len() as f64;
        intensity.iter_mut().for_each(|v| *v /= m);
        Ok(DetectorImage {
            pixels: first.pixels,
            q: first.q.clone(),
            intensity,
        })
    }

    /// Columns `row,col,qx,qy,qz,I`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,qx,qy,qz,I")?;
        for (i, (q, v)) in self.q.iter().zip(&self.intensity).enumerate() {
            writeln!(
                out,
                "{},{},{:.8e},{:.8e},{:.8e},{:.10e}",
                i / self.pixels,
                i % self.pixels,
                q[0],
                q[1],
                q[2],
                v
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(wavelength: f64, pixels: usize) -> DetectorGeometry {
        DetectorGeometry {
            wavelength,
            beam: [0.0, 0.0, 1.0],
            half_angle: 0.3,
            pixels,
        }
    }

    #[test]
    fn centre_pixel_is_forward() {
        let q = geom(1.0, 5).q_map().unwrap();
        assert!(crate::norm(&q[12]) < 1e-12);
    }

    #[test]
    fn elastic() {
        let g = geom(1.5, 7);
        let k = 2.0 * std::f64::consts::PI / 1.5;
        for q in g.q_map().unwrap() {
            let kf = [q[0], q[1], q[2] + k];
            assert!((crate::norm(&kf) - k).abs() < 1e-9);
        }
    }

    #[test]
    fn short_wavelength_flattens() {
        // at fixed |q| the component along the beam shrinks like 1/|k|
        let along = |lambda: f64| {
            let g = DetectorGeometry {
                half_angle: 0.01 * lambda,
                ..geom(lambda, 3)
            };
            let q = g.q_map().unwrap()[0];
            q[2].abs() / crate::norm(&q)
        };
        assert!(along(0.01) < 0.1 * along(1.0));
    }

    #[test]
    fn bad_wavelength() {
        assert!(geom(0.0, 3).q_map().is_err());
    }
}
