//! Row-major dense matrix used for mini-batches, plus the three GEMM shapes
//! that forward and backward passes need.

/// A row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps `data` as a `rows × cols` matrix. Panics if the length disagrees.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Stacks equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// A single-row matrix.
    pub fn row_vector(values: &[f64]) -> Self {
        Self::from_vec(1, values.len(), values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-column matrix has no row payload anyway
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// Concatenates the columns of `self` and `other` row by row.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Matrix::from_vec(self.rows, cols, data)
    }

    /// Copies columns `start..end` into a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        assert!(
            start <= end && end <= self.cols,
            "column range out of bounds"
        );
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix::from_vec(self.rows, cols, data)
    }
}

/// `out = x · wᵀ`, where `x` is `batch × n_in` and `w` is row-major `n_out × n_in`.
pub(crate) fn matmul_xwt(x: &Matrix, w: &[f64], n_out: usize, out: &mut Matrix) {
    let (batch, n_in) = (x.rows, x.cols);
    assert_eq!(w.len(), n_out * n_in);
    assert_eq!((out.rows, out.cols), (batch, n_out));
    if batch == 0 || n_out == 0 {
        return;
    }
    // SAFETY: all strides describe in-bounds accesses of the three buffers,
    // whose lengths are asserted above.
    unsafe {
        matrixmultiply::dgemm(
            batch,
            n_in,
            n_out,
            1.0,
            x.data.as_ptr(),
            n_in as isize,
            1,
            w.as_ptr(),
            1,
            n_in as isize,
            0.0,
            out.data.as_mut_ptr(),
            n_out as isize,
            1,
        );
    }
}

/// `dw += dzᵀ · x`, where `dz` is `batch × n_out` and `x` is `batch × n_in`.
pub(crate) fn accumulate_dzt_x(dz: &Matrix, x: &Matrix, dw: &mut [f64]) {
    let (batch, n_out) = (dz.rows, dz.cols);
    let n_in = x.cols;
    assert_eq!(x.rows, batch);
    assert_eq!(dw.len(), n_out * n_in);
    if batch == 0 {
        return;
    }
    // SAFETY: see matmul_xwt.
    unsafe {
        matrixmultiply::dgemm(
            n_out,
            batch,
            n_in,
            1.0,
            dz.data.as_ptr(),
            1,
            n_out as isize,
            x.data.as_ptr(),
            n_in as isize,
            1,
            1.0,
            dw.as_mut_ptr(),
            n_in as isize,
            1,
        );
    }
}

/// `dx = dz · w`, where `dz` is `batch × n_out` and `w` is `n_out × n_in`.
pub(crate) fn matmul_dz_w(dz: &Matrix, w: &[f64], n_in: usize) -> Matrix {
    let (batch, n_out) = (dz.rows, dz.cols);
    assert_eq!(w.len(), n_out * n_in);
    let mut dx = Matrix::zeros(batch, n_in);
    if batch == 0 {
        return dx;
    }
    // SAFETY: see matmul_xwt.
    unsafe {
        matrixmultiply::dgemm(
            batch,
            n_out,
            n_in,
            1.0,
            dz.data.as_ptr(),
            n_out as isize,
            1,
            w.as_ptr(),
            n_in as isize,
            1,
            0.0,
            dx.data.as_mut_ptr(),
            n_in as isize,
            1,
        );
    }
    dx
}
