//! Minimal dense matrix and vector helpers shared by the LP kernel and the
//! set types. Column-major storage so the simplex can borrow constraint
//! columns contiguously.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    // data[c * rows + r]
    data: Vec<f64>,
}

/// Serializes as nested row-major arrays, the JSON shape of every matrix in
/// the file formats.
impl serde::Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for r in 0..self.rows {
            seq.serialize_element(&self.row(r))?;
        }
        seq.end()
    }
}

impl<'de> serde::Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let nested: Vec<Vec<f64>> = serde::Deserialize::deserialize(d)?;
        let rows = nested.len();
        let cols = nested.first().map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(rows * cols);
        for row in &nested {
            if row.len() != cols {
                return Err(serde::de::Error::custom("ragged matrix rows"));
            }
            flat.extend_from_slice(row);
        }
        Ok(Mat::from_row_major(rows, cols, &flat))
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds from row-major data (the serialization order of HPolytope).
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Mat {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[c * rows + r] = data[r * cols + c];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r] = v;
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for c in 0..self.cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            let col = self.col(c);
            for r in 0..self.rows {
                y[r] += col[r] * xc;
            }
        }
        y
    }

    /// y = A^T x
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for c in 0..self.cols {
            y[c] = dot(self.col(c), x);
        }
        y
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.cols);
        let mut acc = 0.0;
        for c in 0..self.cols {
            acc += self.data[c * self.rows + r] * x[c];
        }
        acc
    }

    /// Elementwise absolute value.
    pub fn abs(&self) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v.abs()).collect() }
    }

    /// C = A B
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dims");
        let mut out = Mat::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            let y = self.matvec(other.col(c));
            out.col_mut(c).copy_from_slice(&y);
        }
        out
    }

    /// Gram matrix A A^T.
    pub fn matmul_transpose_rhs(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.rows);
        for c in 0..self.cols {
            let col = self.col(c);
            for i in 0..self.rows {
                if col[i] == 0.0 {
                    continue;
                }
                for j in 0..self.rows {
                    let v = out.get(i, j) + col[i] * col[j];
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// A^T B without materializing the transpose.
    pub fn tr_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "tr_matmul inner dims");
        let mut out = Mat::zeros(self.cols, other.cols);
        for c in 0..other.cols {
            let oc = other.col(c);
            for r in 0..self.cols {
                out.set(r, c, dot(self.col(r), oc));
            }
        }
        out
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// Stacks rows of `other` below `self`.
    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "vstack column counts");
        let rows = self.rows + other.rows;
        let mut out = Mat::zeros(rows, self.cols);
        for c in 0..self.cols {
            let (top, bot) = (self.col(c), other.col(c));
            let dst = out.col_mut(c);
            dst[..top.len()].copy_from_slice(top);
            dst[top.len()..].copy_from_slice(bot);
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = Mat::from_row_major(2, 3, &data);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 2), 6.0);
        assert_eq!(m.to_row_major(), data);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = Mat::from_row_major(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 1.0]);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(m.tr_matvec(&[1.0, 2.0]), vec![-1.0, 6.0, 4.0]);
    }

    #[test]
    fn matmul_small() {
        let a = Mat::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Mat::from_row_major(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = a.matmul(&b);
        assert_eq!(c.to_row_major(), vec![2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn vstack_preserves_rows() {
        let a = Mat::from_row_major(1, 2, &[1.0, 2.0]);
        let b = Mat::from_row_major(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let s = a.vstack(&b);
        assert_eq!(s.rows(), 3);
        assert_eq!(s.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}
