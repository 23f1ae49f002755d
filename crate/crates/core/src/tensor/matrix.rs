use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "matrix",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if !max.is_finite() {
        return;
    }
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    if out.cols > 0 {
        for row in out.data.chunks_exact_mut(out.cols) {
            softmax_in_place(row);
        }
    }
    out
}

/// `a · b`; increments `mults` by the number of scalar multiplications performed.
pub fn matmul_counted(a: &Matrix, b: &Matrix, mults: &mut u64) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dim(
            "matrix",
            format!("cannot multiply {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let av = a.data[i * a.cols + k];
            for (o, bv) in orow.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
            *mults += b.cols as u64;
        }
    }
    Ok(out)
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut sink = 0;
    matmul_counted(a, b, &mut sink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_closed_forms() {
        let m = Matrix::from_vec(2, 2, vec![0.0, 0.0, 2f32.ln(), 0.0]).unwrap();
        let s = softmax_rows(&m);
        assert!((s.get(0, 0) - 0.5).abs() < 1e-7);
        assert!((s.get(1, 0) - 2.0 / 3.0).abs() < 1e-6);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_shift_invariant() {
        let base = vec![0.3, -1.2, 2.0, 0.0];
        let shifted: Vec<f32> = base.iter().map(|v| v + 17.5).collect();
        let a = softmax_rows(&Matrix::from_vec(1, 4, base).unwrap());
        let b = softmax_rows(&Matrix::from_vec(1, 4, shifted).unwrap());
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn matmul_counts_and_multiplies() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let mut n = 0;
        let c = matmul_counted(&a, &b, &mut n).unwrap();
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
        assert_eq!(n, 12);
        assert_eq!(a.transpose().transpose(), a);
        assert!(matmul(&a, &a).is_err());
    }
}
