//! Dense f64 linear algebra, activations and the parameter store.
//!
//! Every learnable tensor lives in a [`ParamStore`] next to a gradient slot of
//! the same shape. Gradients are computed by hand per operation and checked
//! against central finite differences with [`check_gradients`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major matrix. Vectors are stored as `n x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length does not match shape");
        Tensor2 { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor2 {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`, accumulated into `out`.
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "matvec_t dimension mismatch");
        assert_eq!(out.len(), self.cols, "matvec_t output mismatch");
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            axpy(yr, self.row(r), out);
        }
    }

    /// `self += scale · u vᵀ`.
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            let s = scale * ur;
            if s == 0.0 {
                continue;
            }
            axpy(s, v, self.row_mut(r));
        }
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self · other` for `self` of shape `n x k` and `other` of shape `k x m`.
    ///
    /// Each output row is accumulated as `Σ_k self[i,k] · other[k,:]` in
    /// increasing `k`, the same order [`row_times`] uses.
    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Tensor2::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            row_times_into(self.row(i), other, out.row_mut(i));
        }
        out
    }

    /// `selfᵀ · other` for `self` of shape `k x n` and `other` of shape `k x m`.
    pub fn t_matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let mut out = Tensor2::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (i, &aki) in a.iter().enumerate() {
                if aki != 0.0 {
                    axpy(aki, b, out.row_mut(i));
                }
            }
        }
        out
    }

    /// `self · otherᵀ` for `self` of shape `n x k` and `other` of shape `m x k`.
    pub fn matmul_t(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.cols, "matmul_t dimension mismatch");
        let mut out = Tensor2::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(self.row(i), other.row(j));
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn row_times_into(u: &[f64], b: &Tensor2, out: &mut [f64]) {
    for (a, &ua) in u.iter().enumerate() {
        axpy(ua, b.row(a), out);
    }
}

/// `uᵀ · B` as a vector of length `B.cols`.
pub fn row_times(u: &[f64], b: &Tensor2) -> Vec<f64> {
    assert_eq!(u.len(), b.rows, "bilinear dimension mismatch");
    let mut out = vec![0.0; b.cols];
    row_times_into(u, b, &mut out);
    out
}

/// `uᵀ B v`, evaluated as `(uᵀB)·v`.
pub fn bilinear(u: &[f64], b: &Tensor2, v: &[f64]) -> f64 {
    assert_eq!(v.len(), b.cols, "bilinear dimension mismatch");
    dot(&row_times(u, b), v)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Exact (erf-based) GeLU: `x · Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    x * std_normal_cdf(x)
}

/// `d/dx gelu(x) = Φ(x) + x φ(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    std_normal_cdf(x) + x * pdf
}

/// Numerically stable log-softmax. `-inf` entries act as masks and stay `-inf`.
pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || scores.is_empty() {
        return Err(Error::NoValidCandidate);
    }
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let log_z = max + sum.ln();
    Ok(scores.iter().map(|s| s - log_z).collect())
}

/// `log Σ exp(scores)`, stable; `-inf` for an empty or fully masked input.
pub fn log_sum_exp(scores: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = scores.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = scores.into_iter().map(|s| (s - max).exp()).sum();
    max + sum.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
}

/// Named parameters with parallel gradient slots, iterated in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

/// Gradient buffers shaped like a [`ParamStore`], used for per-document
/// accumulation before a deterministic merge.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(Vec<Tensor2>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor2 {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.0[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor2> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor2> {
        self.0.iter_mut()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics on duplicate names.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> ParamId {
        let name = name.into();
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name `{name}`"
        );
        let grad = Tensor2::zeros(value.rows(), value.cols());
        self.params.push(Param { name, value, grad });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor2 {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor2 {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.params[id.0].grad
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients(
            self.params
                .iter()
                .map(|p| Tensor2::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        )
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            p.grad.add_assign(g);
        }
    }
}

/// Seeded generator for one parameter group; `stream` separates groups that
/// share a base seed.
pub fn init_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `[-1/√fan_in, 1/√fan_in]`.
pub fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Tensor2 {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor2::from_vec(rows, cols, data)
}

/// Compares analytic gradients with central finite differences over every
/// parameter entry and returns the largest relative error
/// `|a - n| / max(1e-8, |a| + |n|)`.
///
/// `loss_fn` must return the loss and accumulate its gradient into the
/// store's gradient slots.
pub fn check_gradients<F>(params: &mut ParamStore, eps: f64, mut loss_fn: F) -> Result<f64>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Config(format!("finite-difference step {eps} outside (0, 1e-3]")));
    }
    let mut eval = |params: &mut ParamStore, context: &str| -> Result<f64> {
        params.zero_grad();
        let loss = loss_fn(params)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                value: loss,
                context: context.to_string(),
            });
        }
        Ok(loss)
    };

    eval(params, "analytic pass")?;
    let analytic: Vec<Tensor2> = params.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst: f64 = 0.0;
    for (pi, analytic) in analytic.iter().enumerate() {
        for k in 0..analytic.data().len() {
            let original = params.params()[pi].value.data()[k];
            params.params_mut()[pi].value.data_mut()[k] = original + eps;
            let plus = eval(params, "perturbed pass")?;
            params.params_mut()[pi].value.data_mut()[k] = original - eps;
            let minus = eval(params, "perturbed pass")?;
            params.params_mut()[pi].value.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    params.zero_grad();
    Ok(worst)
}
