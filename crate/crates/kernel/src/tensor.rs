use crate::error::{shape_err, KernelError, Result};

/// Dense row-major `f32` array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || n != data.len() {
            return Err(shape_err("from_vec", shape, &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// A `rows x cols` matrix from row slices of equal length.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(KernelError::InvalidArgument("ragged rows".into()));
        }
        Self::from_vec(&[rows.len(), cols], rows.concat())
    }

    pub fn with_grad(mut self) -> Self {
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f32]> {
        self.grad.as_deref_mut()
    }

    pub(crate) fn value_and_grad_mut(&mut self) -> (&mut [f32], Option<&mut [f32]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(shape_err("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn expect_matrix(&self, op: &'static str, cols: usize) -> Result<()> {
        if self.shape.len() != 2 || self.shape[1] != cols {
            return Err(shape_err(op, &self.shape, &[usize::MAX, cols]));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err(op, &self.shape, &other.shape));
        }
        Ok(())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(KernelError::NonFinite(what.to_string()))
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }
}

/// `a[n,k] @ b[k,m]`
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = (a.rows(), a.cols());
    if b.rows() != k || a.shape.len() != 2 || b.shape.len() != 2 {
        return Err(shape_err("matmul", a.shape(), b.shape()));
    }
    let m = b.cols();
    let mut out = Tensor::zeros(&[n, m]);
    for i in 0..n {
        let arow = a.row(i);
        let orow = &mut out.data[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `a[n,k]^T @ b[n,m]` accumulated into `out[k,m]`.
pub fn matmul_at_b_into(a: &Tensor, b: &Tensor, out: &mut [f32]) -> Result<()> {
    let (n, k) = (a.rows(), a.cols());
    let m = b.cols();
    if b.rows() != n || out.len() != k * m {
        return Err(shape_err("matmul_at_b", a.shape(), b.shape()));
    }
    for i in 0..n {
        let arow = a.row(i);
        let brow = b.row(i);
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(())
}

/// `a[n,k] @ b[m,k]^T`
pub fn matmul_a_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = (a.rows(), a.cols());
    if b.cols() != k {
        return Err(shape_err("matmul_a_bt", a.shape(), b.shape()));
    }
    let m = b.rows();
    let mut out = Tensor::zeros(&[n, m]);
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            out.data[i * m + j] = dot(arow, b.row(j));
        }
    }
    Ok(out)
}

/// Eight independent partial sums so the loop vectorizes; the summation
/// order is fixed, so results are still deterministic.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
