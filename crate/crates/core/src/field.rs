//! Hermite coefficient field R_{k,j}.

use num_complex::Complex64;

use crate::grid::{dot, Grid1D};

/// Complex coefficients R_{k,j} for modes k = 0..=N and cells j = 0..Nx,
/// stored row-major with the mode index outer.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField {
    n_modes: usize,
    nx: usize,
    data: Vec<Complex64>,
}

impl HermiteField {
    /// Zero field with highest mode `n` (so `n + 1` modes) on `nx` cells.
    pub fn zeros(n: usize, nx: usize) -> Self {
        Self {
            n_modes: n + 1,
            nx,
            data: vec![Complex64::new(0.0, 0.0); (n + 1) * nx],
        }
    }

    pub fn from_data(n: usize, nx: usize, data: Vec<Complex64>) -> Option<Self> {
        (data.len() == (n + 1) * nx).then_some(Self {
            n_modes: n + 1,
            nx,
            data,
        })
    }

    /// Highest Hermite mode N.
    pub fn n(&self) -> usize {
        self.n_modes - 1
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_modes == other.n_modes && self.nx == other.nx
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn mode(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.nx..(k + 1) * self.nx]
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.data[k * self.nx + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, v: Complex64) {
        self.data[k * self.nx + j] = v;
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// Δx Σ_{k,j} u conj(v). `None` on shape mismatch.
    pub fn inner_product(&self, other: &Self, grid: &Grid1D) -> Option<Complex64> {
        self.same_shape(other).then(|| dot(&self.data, &other.data) * grid.dx())
    }

    /// sqrt(Δx Σ |R_{k,j}|²).
    pub fn l2_norm(&self, grid: &Grid1D) -> f64 {
        (grid.dx() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// max_{k,j} |R_{k,j} − (−1)^k conj(R_{k,j})|: zero when even modes are
    /// real and odd modes purely imaginary.
    pub fn parity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.n_modes {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for z in self.mode(k) {
                worst = worst.max((z - z.conj() * sign).norm());
            }
        }
        worst
    }

    /// sqrt(Δx Σ |self − other|²).
    pub fn distance(&self, other: &Self, grid: &Grid1D) -> Option<f64> {
        self.same_shape(other).then(|| {
            let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
            (grid.dx() * s).sqrt()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_norm() {
        let grid = Grid1D::new(0.0, 1.0, 10).unwrap();
        let mut f = HermiteField::zeros(3, 10);
        f.set(2, 7, Complex64::new(1.0, 0.0));
        assert!((f.l2_norm(&grid) - 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.parity_defect(), 0.0);
        f.set(1, 0, Complex64::new(0.5, 0.0));
        assert!((f.parity_defect() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shapes() {
        assert!(HermiteField::from_data(2, 4, vec![Complex64::new(0.0, 0.0); 11]).is_none());
        let f = HermiteField::zeros(2, 4);
        let g = HermiteField::zeros(3, 4);
        let grid = Grid1D::new(0.0, 1.0, 4).unwrap();
        assert!(f.inner_product(&g, &grid).is_none());
        assert_eq!(f.n(), 2);
        assert_eq!(f.mode(1).len(), 4);
    }
}
