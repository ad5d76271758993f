use std::f64::consts::PI;

use super::linalg::C64;

/// Uniform planar array with half-wavelength element spacing.
///
/// Elements sit on a grid in the array's local y-z plane; the broadside
/// direction is the local x axis, rotated in azimuth by `orientation`.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaArray {
    pub elements_x: usize,
    pub elements_y: usize,
    pub orientation: f64,
    beamforming: Vec<C64>,
}

impl AntennaArray {
    pub fn new(elements_x: usize, elements_y: usize) -> Self {
        let n = elements_x.max(1) * elements_y.max(1);
        let w = C64::new(1.0 / (n as f64).sqrt(), 0.0);
        AntennaArray {
            elements_x: elements_x.max(1),
            elements_y: elements_y.max(1),
            orientation: 0.0,
            beamforming: vec![w; n],
        }
    }

    /// Square array of `n` elements, e.g. 64 -> 8x8. Non-squares become linear.
    pub fn square(n: usize) -> Self {
        let side = (n as f64).sqrt().round() as usize;
        if side * side == n {
            AntennaArray::new(side, side)
        } else {
            AntennaArray::new(n, 1)
        }
    }

    pub fn len(&self) -> usize {
        self.elements_x * self.elements_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn beamforming_vector(&self) -> &[C64] {
        &self.beamforming
    }

    /// Installs a new weight vector, normalized to unit norm.
    pub fn set_beamforming_vector(&mut self, mut w: Vec<C64>) {
        assert_eq!(w.len(), self.len(), "beamforming vector length");
        if !super::linalg::normalize(&mut w) {
            let n = self.len() as f64;
            w = vec![C64::new(1.0 / n.sqrt(), 0.0); self.len()];
        }
        self.beamforming = w;
    }

    /// Unit-norm steering vector toward (azimuth, elevation).
    pub fn spatial_signature(&self, azimuth: f64, elevation: f64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.len());
        self.spatial_signature_into(azimuth, elevation, &mut out);
        out
    }

    pub fn spatial_signature_into(&self, azimuth: f64, elevation: f64, out: &mut Vec<C64>) {
        out.clear();
        let az = azimuth - self.orientation;
        let horiz = PI * az.sin() * elevation.cos();
        let vert = PI * elevation.sin();
        let amp = 1.0 / (self.len() as f64).sqrt();
        for n in 0..self.elements_y {
            for m in 0..self.elements_x {
                let phase = horiz * m as f64 + vert * n as f64;
                out.push(C64::from_polar(amp, phase));
            }
        }
    }

    /// Steering vectors at `size` uniformly spaced azimuths, zero elevation.
    pub fn codebook(&self, size: usize) -> Vec<Vec<C64>> {
        (0..size.max(1))
            .map(|i| {
                let az = -PI + 2.0 * PI * i as f64 / size.max(1) as f64;
                self.spatial_signature(az, 0.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::linalg::norm;

    #[test]
    fn single_element() {
        let a = AntennaArray::new(1, 1);
        assert_eq!(a.spatial_signature(0.7, -0.2), vec![C64::new(1.0, 0.0)]);
    }

    #[test]
    fn broadside_linear_array_is_uniform() {
        let a = AntennaArray::new(8, 1);
        let s = a.spatial_signature(0.0, 0.0);
        for x in s {
            assert!((x - C64::new(1.0 / 8f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_norm_everywhere() {
        let a = AntennaArray::new(8, 8);
        let mut state = 1u64;
        for _ in 0..10_000 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let az = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI - PI;
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let el = (state >> 11) as f64 / (1u64 << 53) as f64 * PI - PI / 2.0;
            assert!((norm(&a.spatial_signature(az, el)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_arrays() {
        assert_eq!(AntennaArray::square(64).elements_x, 8);
        assert_eq!(AntennaArray::square(16).elements_y, 4);
        assert_eq!(AntennaArray::square(8).len(), 8);
    }
}
