//! Dense complex operator algebra over composite finite-dimensional spaces.
//!
//! Basis convention: computational basis in row-major subsystem order, so the
//! first listed subsystem is the most significant digit of a basis index.
//! Every partial trace and relabeling below follows that convention.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default ceiling on the ambient dimension of any operator the simulator builds.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Maximum tolerated `|a - a^dagger|` entry before an operator is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOL` reject an operator as not positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Ordered local dimensions of a composite space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("no subsystems".into()));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidShape(format!(
                "local dimension {bad} < 2 in {dims:?}"
            )));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(format!("dimension overflow for {dims:?}")))?;
        // a dense operator of this size could never be allocated anyway
        if total > (1 << 20) {
            return Err(Error::CapExceeded {
                requested: total as u128,
                cap: 1 << 20,
            });
        }
        Ok(Self { dims })
    }

    /// `n` copies of a `d`-dimensional subsystem.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Ambient dimension, the product of the local dimensions.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SubsystemShape) -> SubsystemShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SubsystemShape { dims }
    }

    /// Row-major strides: the last subsystem varies fastest.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    fn digits(&self, mut index: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
    }
}

impl fmt::Display for SubsystemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

/// `d^n` without overflow, for cap checks on sizes that may never be built.
pub fn ambient_dimension(d: usize, n: usize) -> u128 {
    (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX)
}

/// Dense square operator tagged with its subsystem structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    shape: SubsystemShape,
    mat: CMatrix,
}

impl Operator {
    pub fn new(shape: SubsystemShape, mat: CMatrix) -> Result<Self> {
        let n = shape.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::InvalidShape(format!(
                "matrix is {}x{} but shape {} needs {n}x{n}",
                mat.nrows(),
                mat.ncols(),
                shape
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, mat })
    }

    /// Build without validation; callers guarantee the dimension matches.
    pub(crate) fn from_parts(shape: SubsystemShape, mat: CMatrix) -> Self {
        debug_assert_eq!(shape.dim(), mat.nrows());
        Self { shape, mat }
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            mat: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(shape: SubsystemShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            mat: CMatrix::zeros(n, n),
        }
    }

    /// `|k><k|` for a (not necessarily normalized) ket.
    pub fn projector(ket: &Ket) -> Self {
        Self {
            shape: ket.shape.clone(),
            mat: &ket.amps * ket.amps.adjoint(),
        }
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: &self.mat * c(s, 0.0),
        }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        assert_eq!(self.dim(), other.dim(), "trace_product dimension mismatch");
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        acc
    }

    /// `u * self * u^dagger` for an operator `u` on the same space.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: u * &self.mat * u.adjoint(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff dimension mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|a - a^dagger|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(a + a^dagger) / 2`.
    pub fn symmetrized(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            mat: (&self.mat + self.mat.adjoint()) * c(0.5, 0.0),
        }
    }

    /// Reinterpret the same matrix under a different subsystem split.
    pub fn reshaped(self, shape: SubsystemShape) -> Result<Self> {
        Self::new(shape, self.mat)
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.shape, rhs.shape, "operator shape mismatch in add");
        Operator {
            shape: self.shape.clone(),
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.shape, rhs.shape, "operator shape mismatch in sub");
        Operator {
            shape: self.shape.clone(),
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.shape, rhs.shape, "operator shape mismatch in mul");
        Operator {
            shape: self.shape.clone(),
            mat: &self.mat * &rhs.mat,
        }
    }
}

/// Pure state vector tagged with its subsystem structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    shape: SubsystemShape,
    amps: CVector,
}

impl Ket {
    pub fn new(shape: SubsystemShape, amps: CVector) -> Result<Self> {
        if amps.len() != shape.dim() {
            return Err(Error::InvalidShape(format!(
                "ket has {} amplitudes but shape {} needs {}",
                amps.len(),
                shape,
                shape.dim()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, amps })
    }

    /// Computational basis vector `|index>`.
    pub fn basis(shape: SubsystemShape, index: usize) -> Result<Self> {
        let n = shape.dim();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        let mut amps = CVector::zeros(n);
        amps[index] = c(1.0, 0.0);
        Ok(Self { shape, amps })
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidState(
                "cannot normalize the zero vector".into(),
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            amps: &self.amps / c(n, 0.0),
        })
    }

    pub fn is_normalized(&self) -> bool {
        (self.amps.norm_squared() - 1.0).abs() <= 1e-12
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket {
            shape: self.shape.concat(&other.shape),
            amps: self.amps.kronecker(&other.amps),
        }
    }
}

/// Kronecker product in subsystem order.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator {
        shape: a.shape.concat(&b.shape),
        mat: a.mat.kronecker(&b.mat),
    }
}

/// Trace out every subsystem not listed in `keep`. Kept subsystems stay in
/// their original order regardless of the order given.
pub fn partial_trace(a: &Operator, keep: &[usize]) -> Result<Operator> {
    let n_sub = a.shape.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= n_sub) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: n_sub,
        });
    }
    if kept.is_empty() {
        return Err(Error::InvalidShape(
            "partial trace must keep at least one subsystem".into(),
        ));
    }
    if kept.len() == n_sub {
        return Ok(a.clone());
    }
    let traced: Vec<usize> = (0..n_sub).filter(|k| !kept.contains(k)).collect();
    let dims = a.shape.dims();
    let strides = a.shape.strides();
    let kept_shape = SubsystemShape {
        dims: kept.iter().map(|&k| dims[k]).collect(),
    };
    let traced_shape = SubsystemShape {
        dims: traced.iter().map(|&k| dims[k]).collect(),
    };
    let offsets = |subs: &[usize], shape: &SubsystemShape| -> Vec<usize> {
        let mut digits = vec![0; subs.len()];
        (0..shape.dim())
            .map(|i| {
                shape.digits(i, &mut digits);
                subs.iter()
                    .zip(&digits)
                    .map(|(&s, &x)| strides[s] * x)
                    .sum()
            })
            .collect()
    };
    let kept_off = offsets(&kept, &kept_shape);
    let traced_off = offsets(&traced, &traced_shape);

    let nk = kept_shape.dim();
    let mut out = CMatrix::zeros(nk, nk);
    for j in 0..nk {
        for i in 0..nk {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += a.mat[(kept_off[i] + t, kept_off[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(Operator {
        shape: kept_shape,
        mat: out,
    })
}

/// Index map for reordering subsystems: new position `q` holds old subsystem `perm[q]`.
fn permutation_index_map(
    shape: &SubsystemShape,
    perm: &[usize],
) -> Result<(SubsystemShape, Vec<usize>)> {
    let n_sub = shape.len();
    let mut seen = vec![false; n_sub];
    if perm.len() != n_sub {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n_sub || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    let new_shape = SubsystemShape {
        dims: perm.iter().map(|&p| shape.dims[p]).collect(),
    };
    let new_strides = new_shape.strides();
    // old subsystem s lands at new position q where perm[q] == s
    let mut position = vec![0; n_sub];
    for (q, &p) in perm.iter().enumerate() {
        position[p] = q;
    }
    let mut digits = vec![0; n_sub];
    let map = (0..shape.dim())
        .map(|i| {
            shape.digits(i, &mut digits);
            digits
                .iter()
                .enumerate()
                .map(|(s, &x)| new_strides[position[s]] * x)
                .sum()
        })
        .collect();
    Ok((new_shape, map))
}

/// Relabel subsystems; new position `q` holds old subsystem `perm[q]`.
pub fn permute_subsystems(a: &Operator, perm: &[usize]) -> Result<Operator> {
    let (shape, map) = permutation_index_map(&a.shape, perm)?;
    let n = a.dim();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(map[i], map[j])] = a.mat[(i, j)];
        }
    }
    Ok(Operator { shape, mat: out })
}

/// Same relabeling as [`permute_subsystems`], applied to a ket.
pub fn permute_ket(k: &Ket, perm: &[usize]) -> Result<Ket> {
    let (shape, map) = permutation_index_map(&k.shape, perm)?;
    let mut amps = CVector::zeros(k.amps.len());
    for (i, &m) in map.iter().enumerate() {
        amps[m] = k.amps[i];
    }
    Ok(Ket { shape, amps })
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: CMatrix,
    shape: SubsystemShape,
}

impl Eigh {
    pub fn ket(&self, i: usize) -> Ket {
        Ket {
            shape: self.shape.clone(),
            amps: self.vectors.column(i).into_owned(),
        }
    }

    pub fn kets(&self) -> Vec<Ket> {
        (0..self.values.len()).map(|i| self.ket(i)).collect()
    }

    /// `V f(Lambda) V^dagger`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> Operator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        Operator {
            shape: self.shape.clone(),
            mat: scaled * self.vectors.adjoint(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn eigh(a: &Operator) -> Result<Eigh> {
    let deviation = a.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = a.symmetrized();
    let decomposition = sym.mat.symmetric_eigen();
    let mut order: Vec<usize> = (0..decomposition.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| decomposition.eigenvalues[i].total_cmp(&decomposition.eigenvalues[j]));
    let values = order
        .iter()
        .map(|&i| decomposition.eigenvalues[i])
        .collect();
    let n = a.dim();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &decomposition.eigenvectors.column(src));
    }
    Ok(Eigh {
        values,
        vectors,
        shape: a.shape.clone(),
    })
}

/// Default rank threshold: `dim * 1e-12 * largest eigenvalue`.
pub fn default_kernel_tol(dim: usize, largest: f64) -> f64 {
    dim as f64 * 1e-12 * largest.max(0.0)
}

/// Pseudo-inverse square root together with the projector onto the support.
#[derive(Clone, Debug)]
pub struct SupportRoot {
    pub inv_sqrt: Operator,
    pub support: Operator,
    pub rank: usize,
}

pub fn pinv_sqrt_with_support(a: &Operator, kernel_tol: Option<f64>) -> Result<SupportRoot> {
    let e = eigh(a)?;
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let tol = kernel_tol.unwrap_or_else(|| default_kernel_tol(a.dim(), e.max_value()));
    let inv_sqrt = e.apply(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 });
    let support = e.apply(|l| if l > tol { 1.0 } else { 0.0 });
    let rank = e.values.iter().filter(|&&l| l > tol).count();
    Ok(SupportRoot {
        inv_sqrt,
        support,
        rank,
    })
}

/// `a^{-1/2}` on the support of a PSD operator, zero on its kernel.
pub fn op_pinv_sqrt(a: &Operator, kernel_tol: Option<f64>) -> Result<Operator> {
    pinv_sqrt_with_support(a, kernel_tol).map(|r| r.inv_sqrt)
}

/// Principal square root of a PSD operator.
pub fn op_sqrt(a: &Operator) -> Result<Operator> {
    let e = eigh(a)?;
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(e.apply(|l| l.max(0.0).sqrt()))
}

/// Polar factor `W V^dagger` of `g = W S V^dagger`; the closest unitary to `g`.
pub fn polar_unitary(g: &CMatrix) -> CMatrix {
    let svd = g.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    u * v_t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(dims: &[usize]) -> SubsystemShape {
        SubsystemShape::new(dims.to_vec()).unwrap()
    }

    fn diag(values: &[f64]) -> Operator {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        Operator::new(shape(&[n]), m).unwrap()
    }

    fn bell(d: usize) -> Operator {
        let s = SubsystemShape::uniform(d, 2).unwrap();
        let mut amps = CVector::zeros(d * d);
        for i in 0..d {
            amps[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        Operator::projector(&Ket::new(s, amps).unwrap())
    }

    #[test]
    fn shape_rejects_small_dims() {
        assert!(SubsystemShape::new(vec![2, 1]).is_err());
        assert!(SubsystemShape::new(vec![]).is_err());
        assert_eq!(shape(&[2, 3, 2]).dim(), 12);
    }

    #[test]
    fn tensor_identity_and_basis() {
        let i2 = Operator::identity(shape(&[2]));
        let i4 = tensor(&i2, &i2);
        assert_eq!(i4.shape().dims(), &[2, 2]);
        assert_eq!(i4.max_abs_diff(&Operator::identity(shape(&[2, 2]))), 0.0);

        let out = tensor(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]));
        let expected = diag(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(out.matrix(), expected.matrix());
    }

    #[test]
    fn tensor_of_pure_states_is_rank_one() {
        let pp = tensor(&bell(2), &bell(2));
        assert!((pp.trace().re - 1.0).abs() < 1e-14);
        let e = eigh(&pp).unwrap();
        let rank = e.values.iter().filter(|&&l| l > 1e-12).count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn reduced_state_of_max_entangled_is_maximally_mixed() {
        for d in 2..=4 {
            for keep in [0usize, 1] {
                let r = partial_trace(&bell(d), &[keep]).unwrap();
                let expected = Operator::identity(shape(&[d])).scale(1.0 / d as f64);
                assert!(r.max_abs_diff(&expected) < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        assert_eq!(
            partial_trace(&bell(2), &[2]),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn permute_swap_keeps_bell_state() {
        let b = bell(3);
        let swapped = permute_subsystems(&b, &[1, 0]).unwrap();
        assert!(swapped.max_abs_diff(&b) < 1e-15);
        assert!(permute_subsystems(&b, &[0, 0]).is_err());
        assert!(permute_subsystems(&b, &[0]).is_err());
    }

    #[test]
    fn permute_moves_product_factors() {
        let a = diag(&[1.0, 0.0]);
        let b = Operator::new(
            shape(&[3]),
            CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64)),
        )
        .unwrap();
        let ab = tensor(&a, &b);
        let ba = tensor(&b, &a);
        let moved = permute_subsystems(&ab, &[1, 0]).unwrap();
        assert_eq!(moved.shape().dims(), &[3, 2]);
        assert!(moved.max_abs_diff(&ba) < 1e-15);
    }

    #[test]
    fn eigh_small_cases() {
        let e = eigh(&Operator::identity(shape(&[2]))).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);

        let e = eigh(&diag(&[3.0, 1.0])).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);

        let e = eigh(&bell(2)).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (v, x) in e.values.iter().zip(expected) {
            assert!((v - x).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        let op = Operator::new(shape(&[2]), m).unwrap();
        assert!(matches!(eigh(&op), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn pinv_sqrt_small_cases() {
        let r = op_pinv_sqrt(&Operator::identity(shape(&[3])), None).unwrap();
        assert!(r.max_abs_diff(&Operator::identity(shape(&[3]))) < 1e-14);

        let r = op_pinv_sqrt(&diag(&[4.0, 0.0]), None).unwrap();
        assert!(r.max_abs_diff(&diag(&[0.5, 0.0])) < 1e-14);

        assert!(matches!(
            op_pinv_sqrt(&diag(&[1.0, -1e-3]), None),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut m = CMatrix::identity(2, 2);
        m[(1, 1)] = c(f64::NAN, 0.0);
        assert_eq!(Operator::new(shape(&[2]), m), Err(Error::NonFinite));
    }

    #[test]
    fn polar_of_scaled_unitary() {
        let u =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let p = polar_unitary(&(&u * c(3.0, 0.0)));
        assert!((p - u).iter().all(|z| z.norm() < 1e-14));
    }
}
