//! Uniform periodic coordinate grid for wavepacket propagation.

use crate::error::{Error, Result};

/// Coordinate grid r_j = r_min + j dr with dr = (r_max - r_min) / n,
/// the periodic convention matched to FFT-based kinetic evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    r_min: f64,
    r_max: f64,
    n_points: usize,
    dr: f64,
}

impl Grid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max > r_min) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds must satisfy r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if n_points < 64 || !n_points.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid size must be a power of two >= 64, got {n_points}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            n_points,
            dr: (r_max - r_min) / n_points as f64,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points)
            .map(|j| self.r_min + j as f64 * self.dr)
            .collect()
    }

    /// Conjugate momentum grid in FFT ordering.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.dr);
        (0..n)
            .map(|l| {
                let signed = if l < n / 2 {
                    l as isize
                } else {
                    l as isize - n as isize
                };
                signed as f64 * dk
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_points() {
        let g = Grid::new(3.0, 15.0, 256).unwrap();
        assert_eq!(g.dr(), 12.0 / 256.0);
        let pts = g.points();
        assert_eq!(pts.len(), 256);
        assert_eq!(pts[0], 3.0);
        assert!(pts[255] < 15.0);
    }

    #[test]
    fn momenta_are_fft_ordered() {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let k = g.momenta();
        assert_eq!(k[0], 0.0);
        assert!(k[1] > 0.0);
        assert!(k[63] < 0.0);
        assert_eq!(k[1], -k[63]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(3.0, 3.0, 256).is_err());
        assert!(Grid::new(0.0, 1.0, 100).is_err());
        assert!(Grid::new(0.0, 1.0, 32).is_err());
    }
}
