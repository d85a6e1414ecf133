//! Minimal dense linear algebra and activation primitives.
//!
//! Everything downstream works on 64-bit floats. Matrices are tiny
//! (hidden widths around 20), so the kernels here are plain loops with
//! partial-pivoting Gaussian elimination for the one inner solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}

/// Pivot magnitudes below this are treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-13;

/// Dense row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.shape[1] + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Standard matrix-vector product `A x`.
pub fn matvec(a: &Tensor, x: &Tensor) -> Result<Tensor, LinalgError> {
    if a.shape.len() != 2 || x.shape.len() != 1 || a.cols() != x.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matvec: A is {:?}, x is {:?}",
            a.shape, x.shape
        )));
    }
    let mut out = vec![0.0; a.rows()];
    for (r, slot) in out.iter_mut().enumerate() {
        let row = &a.data[r * a.cols()..(r + 1) * a.cols()];
        *slot = row.iter().zip(&x.data).map(|(w, v)| w * v).sum();
    }
    Ok(Tensor::vector(out))
}

/// `Aᵀ x` without materializing the transpose.
pub fn matvec_t(a: &Tensor, x: &Tensor) -> Result<Tensor, LinalgError> {
    if a.shape.len() != 2 || x.shape.len() != 1 || a.rows() != x.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matvec_t: A is {:?}, x is {:?}",
            a.shape, x.shape
        )));
    }
    let mut out = vec![0.0; a.cols()];
    for r in 0..a.rows() {
        let xr = x.data[r];
        for c in 0..a.cols() {
            out[c] += a.at(r, c) * xr;
        }
    }
    Ok(Tensor::vector(out))
}

/// Matrix-matrix product, only needed by the pseudo-inverse kernel.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, LinalgError> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.cols() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matmul: A is {:?}, B is {:?}",
            a.shape, b.shape
        )));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        for p in 0..k {
            let aip = a.at(i, p);
            for j in 0..n {
                *out.at_mut(i, j) += aip * b.at(p, j);
            }
        }
    }
    Ok(out)
}

/// Solve `M x = rhs` by Gaussian elimination with partial pivoting.
/// `M` must be square; consumed as working storage.
pub fn solve(mut m: Tensor, mut rhs: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = m.rows();
    if m.cols() != n || rhs.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve: M is {:?}, rhs len {}",
            m.shape,
            rhs.len()
        )));
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| m.at(a, col).abs().total_cmp(&m.at(b, col).abs()))
            .unwrap();
        if m.at(pivot_row, col).abs() < SINGULARITY_THRESHOLD {
            return Err(LinalgError::Singular(format!("pivot {col} below threshold")));
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m.at(col, c);
                *m.at_mut(col, c) = m.at(pivot_row, c);
                *m.at_mut(pivot_row, c) = tmp;
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m.at(col, col);
        for r in col + 1..n {
            let factor = m.at(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                *m.at_mut(r, c) -= factor * m.at(col, c);
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m.at(r, c) * x[c];
        }
        x[r] = acc / m.at(r, r);
    }
    Ok(x)
}

/// Left pseudo-inverse `(AᵀA + ridge·I)⁻¹ Aᵀ` of an m×n matrix with m ≥ n.
///
/// With `ridge = 0` and full column rank this is the Moore–Penrose left
/// inverse, so `pinv_left(A) · A = I`.
pub fn pinv_left(a: &Tensor, ridge: f64) -> Result<Tensor, LinalgError> {
    if a.shape.len() != 2 || a.rows() < a.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "pinv_left needs m >= n, got {:?}",
            a.shape
        )));
    }
    let n = a.cols();
    // Gram matrix AᵀA + ridge·I
    let mut gram = Tensor::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..a.rows() {
                s += a.at(r, i) * a.at(r, j);
            }
            *gram.at_mut(i, j) = s + if i == j { ridge } else { 0.0 };
        }
    }
    // Solve gram · X = Aᵀ column by column.
    let mut out = Tensor::zeros(vec![n, a.rows()]);
    for col in 0..a.rows() {
        let rhs: Vec<f64> = (0..n).map(|i| a.at(col, i)).collect();
        let x = solve(gram.clone(), rhs)?;
        for (i, xi) in x.iter().enumerate() {
            *out.at_mut(i, col) = *xi;
        }
    }
    Ok(out)
}

pub fn elu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

pub fn elu_grad_scalar(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub fn tanh_grad_scalar(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

pub fn elu(x: &Tensor) -> Tensor {
    x.map(elu_scalar)
}

pub fn elu_grad(x: &Tensor) -> Tensor {
    x.map(elu_grad_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

pub fn tanh_grad(x: &Tensor) -> Tensor {
    x.map(tanh_grad_scalar)
}

/// Euclidean norm of a slice; shared by solvers and engines.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest relative component error between two equally long slices,
/// with an absolute floor so near-zero entries compare sanely.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (x.abs().max(y.abs()).max(floor)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn matvec_identity_and_zero() {
        let id = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::vector(vec![3.0, 4.0]);
        assert_eq!(matvec(&id, &x).unwrap().data, vec![3.0, 4.0]);
        let z = Tensor::matrix(2, 2, vec![0.0; 4]);
        assert_eq!(matvec(&z, &x).unwrap().data, vec![0.0, 0.0]);
    }

    #[test]
    fn matvec_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_tensor(&mut rng, vec![4, 3]);
        let x = rand_tensor(&mut rng, vec![3]);
        // Independent brute-force oracle.
        let mut expect = vec![0.0; 4];
        for i in 0..4 {
            for j in 0..3 {
                expect[i] += a.data[i * 3 + j] * x.data[j];
            }
        }
        let got = matvec(&a, &x).unwrap();
        for (g, e) in got.data.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn matvec_shape_mismatch_errors() {
        let a = Tensor::matrix(2, 3, vec![0.0; 6]);
        let x = Tensor::vector(vec![1.0, 2.0]);
        assert!(matches!(matvec(&a, &x), Err(LinalgError::DimensionMismatch(_))));
    }

    #[test]
    fn pinv_left_scalar_and_column() {
        let a = Tensor::matrix(1, 1, vec![2.0]);
        let p = pinv_left(&a, 0.0).unwrap();
        assert!((p.data[0] - 0.5).abs() < 1e-15);

        let a = Tensor::matrix(2, 1, vec![1.0, 1.0]);
        let p = pinv_left(&a, 0.0).unwrap();
        assert!((p.data[0] - 0.5).abs() < 1e-15);
        assert!((p.data[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pinv_left_times_a_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = rand_tensor(&mut rng, vec![3, 2]);
        let p = pinv_left(&a, 0.0).unwrap();
        let prod = matmul(&p, &a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.at(i, j) - expect).abs() < 1e-10, "got {:?}", prod);
            }
        }
    }

    #[test]
    fn pinv_left_singular_reports() {
        // Rank-deficient column pair with no ridge.
        let a = Tensor::matrix(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(matches!(pinv_left(&a, 0.0), Err(LinalgError::Singular(_))));
        // A ridge regularizes it.
        assert!(pinv_left(&a, 1e-6).is_ok());
    }

    #[test]
    fn activations_at_origin() {
        assert_eq!(elu_scalar(0.0), 0.0);
        assert_eq!(elu_grad_scalar(0.0), 1.0);
        assert_eq!(0.0f64.tanh(), 0.0);
        assert_eq!(tanh_grad_scalar(0.0), 1.0);
    }

    #[test]
    fn activation_grads_match_finite_differences() {
        let h = 1e-5;
        for &x in &[-0.3, 0.3, -1.7, 0.9] {
            let fd_elu = (elu_scalar(x + h) - elu_scalar(x - h)) / (2.0 * h);
            assert!(
                (fd_elu - elu_grad_scalar(x)).abs() / fd_elu.abs().max(1e-12) < 1e-6,
                "elu grad mismatch at {x}"
            );
            let fd_tanh = ((x + h).tanh() - (x - h).tanh()) / (2.0 * h);
            assert!((fd_tanh - tanh_grad_scalar(x)).abs() / fd_tanh.abs().max(1e-12) < 1e-6);
        }
        // The spec'd spot check at ±0.3 with a tighter absolute bar.
        for &x in &[0.3, -0.3] {
            let fd = (elu_scalar(x + h) - elu_scalar(x - h)) / (2.0 * h);
            assert!((fd - elu_grad_scalar(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn solve_recovers_known_system() {
        let m = Tensor::matrix(2, 2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = solve(m, vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn matvec_is_linear(seed in 0u64..200, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rand_tensor(&mut rng, vec![3, 4]);
            let x = rand_tensor(&mut rng, vec![4]);
            let y = rand_tensor(&mut rng, vec![4]);
            let combo = Tensor::vector(
                x.data.iter().zip(&y.data).map(|(xi, yi)| alpha * xi + beta * yi).collect(),
            );
            let lhs = matvec(&a, &combo).unwrap();
            let ax = matvec(&a, &x).unwrap();
            let ay = matvec(&a, &y).unwrap();
            for i in 0..3 {
                let rhs = alpha * ax.data[i] + beta * ay.data[i];
                proptest::prop_assert!((lhs.data[i] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn pinv_left_identity_property(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Shifted away from zero so the Gram matrix stays well conditioned.
            let mut a = rand_tensor(&mut rng, vec![4, 2]);
            a.data[0] += 2.0;
            a.data[3] += 2.0;
            let p = pinv_left(&a, 0.0).unwrap();
            let prod = matmul(&p, &a).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    proptest::prop_assert!((prod.at(i, j) - expect).abs() < 1e-8);
                }
            }
        }
    }
}
