use crate::error::{PhyError, Result};
use num_complex::Complex64;

/// Dense array of complex samples.
///
/// The public shape carries a trailing axis of extent 2 (real, imaginary),
/// and [`as_reals`](Self::as_reals) exposes the storage in exactly that
/// layout. Internally the samples are kept as `Complex64`, which has the same
/// memory representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Builds a grid from complex samples; `dims` excludes the (re, im) axis.
    pub fn from_complex(dims: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(PhyError::shape(&[n], &[data.len()]));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Builds a grid from interleaved scalars; `shape` must end in 2.
    pub fn from_reals(shape: &[usize], data: &[f64]) -> Result<Self> {
        match shape.split_last() {
            Some((2, dims)) => {
                let n: usize = shape.iter().product();
                if n != data.len() {
                    return Err(PhyError::shape(&[n], &[data.len()]));
                }
                let data = data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
                Ok(Self {
                    dims: dims.to_vec(),
                    data,
                })
            }
            _ => Err(PhyError::Config(format!(
                "complex grid shape must end in 2, got {shape:?}"
            ))),
        }
    }

    /// Full shape including the trailing (re, im) axis.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = self.dims.clone();
        s.push(2);
        s
    }

    /// Shape of the complex array (without the trailing axis).
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn as_reals(&self) -> &[f64] {
        bytemuck::cast_slice(&self.data)
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Extent of the innermost complex axis.
    pub fn row_len(&self) -> usize {
        self.dims.last().copied().unwrap_or(1)
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.data.chunks_exact(self.row_len().max(1))
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, Complex64> {
        let n = self.row_len().max(1);
        self.data.chunks_exact_mut(n)
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(PhyError::shape(dims, &self.dims));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.energy() / self.data.len() as f64
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|z| !z.is_finite()) {
            Some(i) => Err(PhyError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_layout_is_interleaved() {
        let g = ComplexGrid::from_reals(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.dims(), &[2]);
        assert_eq!(g.shape(), vec![2, 2]);
        assert_eq!(g.as_slice()[1], Complex64::new(3.0, 4.0));
        assert_eq!(g.as_reals(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn trailing_axis_must_be_two() {
        assert!(ComplexGrid::from_reals(&[2, 3], &[0.0; 6]).is_err());
        assert!(ComplexGrid::from_reals(&[3, 2], &[0.0; 5]).is_err());
    }

    #[test]
    fn reshape_checks_count() {
        let g = ComplexGrid::zeros(&[4, 6]);
        assert!(g.clone().reshape(&[2, 12]).is_ok());
        assert!(g.reshape(&[5, 5]).is_err());
    }
}
