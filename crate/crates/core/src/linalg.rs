//! Small dense linear-algebra helpers shared by the builders, the solver and
//! the verification code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let mut ev = symmetrize(m).symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Inverse of a symmetric positive definite matrix, `None` when Cholesky fails.
pub fn inv_spd(m: &Mat) -> Option<Mat> {
    symmetrize(m).cholesky().map(|c| c.inverse())
}

/// Relative asymmetry `|M - M^T|_F / max(|M|_F, tiny)`.
pub fn asymmetry(m: &Mat) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / n
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Dense matrix assembled from a grid of blocks. Row heights and column
/// widths are given explicitly so that empty (`None`) blocks are zero.
pub struct BlockMatrix {
    rows: Vec<usize>,
    cols: Vec<usize>,
    data: Mat,
}

impl BlockMatrix {
    pub fn new(rows: &[usize], cols: &[usize]) -> Self {
        let nr = rows.iter().sum();
        let nc = cols.iter().sum();
        Self {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            data: Mat::zeros(nr, nc),
        }
    }

    /// Square symmetric layout with the same partition on both sides.
    pub fn symmetric(sizes: &[usize]) -> Self {
        Self::new(sizes, sizes)
    }

    fn offset(parts: &[usize], idx: usize) -> usize {
        parts[..idx].iter().sum()
    }

    pub fn set(&mut self, i: usize, j: usize, block: &Mat) -> &mut Self {
        assert_eq!(block.nrows(), self.rows[i], "block ({i},{j}) row count");
        assert_eq!(block.ncols(), self.cols[j], "block ({i},{j}) column count");
        let r0 = Self::offset(&self.rows, i);
        let c0 = Self::offset(&self.cols, j);
        self.data
            .view_mut((r0, c0), (block.nrows(), block.ncols()))
            .copy_from(block);
        self
    }

    /// Sets block `(i, j)` and its transpose at `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, block: &Mat) -> &mut Self {
        self.set(i, j, block);
        if i != j {
            self.set(j, i, &block.transpose());
        }
        self
    }

    pub fn build(self) -> Mat {
        self.data
    }
}

/// Vertical stack of equally wide matrices.
pub fn vstack(parts: &[&Mat]) -> Mat {
    let cols = parts.first().map_or(0, |m| m.ncols());
    let rows: Vec<usize> = parts.iter().map(|m| m.nrows()).collect();
    let mut b = BlockMatrix::new(&rows, &[cols]);
    for (i, p) in parts.iter().enumerate() {
        b.set(i, 0, p);
    }
    b.build()
}

/// Horizontal concatenation of equally tall matrices.
pub fn hstack(parts: &[&Mat]) -> Mat {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols: Vec<usize> = parts.iter().map(|m| m.ncols()).collect();
    let mut b = BlockMatrix::new(&[rows], &cols);
    for (j, p) in parts.iter().enumerate() {
        b.set(0, j, p);
    }
    b.build()
}

/// Block-diagonal matrix.
pub fn block_diag(parts: &[&Mat]) -> Mat {
    let sizes_r: Vec<usize> = parts.iter().map(|m| m.nrows()).collect();
    let sizes_c: Vec<usize> = parts.iter().map(|m| m.ncols()).collect();
    let mut b = BlockMatrix::new(&sizes_r, &sizes_c);
    for (i, p) in parts.iter().enumerate() {
        b.set(i, i, p);
    }
    b.build()
}

/// Uniform sample from the unit simplex in `R^n`.
pub fn simplex_sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Row-major nested-array (de)serialization for dense matrices.
pub mod rowmajor {
    use super::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat, String> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err("ragged matrix rows".into());
        }
        Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    /// Same format for `Vec<Mat>`.
    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
            let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
            all.iter()
                .map(|r| from_rows(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Plain-list (de)serialization for vectors.
pub mod flat {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
