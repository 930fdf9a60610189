//! Continuous piecewise-linear finite elements on a uniform interval with
//! homogeneous Dirichlet boundary conditions.
//!
//! Only interior nodes carry degrees of freedom, so every vector here has
//! length `m - 1` for a mesh of `m` subintervals. The mass matrix is the
//! consistent (non-lumped) one.

use std::collections::HashMap;
use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

/// Uniform partition of `[a, b]` into `m` subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    a: f64,
    b: f64,
    m: usize,
}

impl SpatialMesh {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidMesh(format!("need a < b, got a={a}, b={b}")));
        }
        if m < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 subintervals, got {m}"
            )));
        }
        Ok(Self { a, b, m })
    }

    pub fn left(&self) -> f64 {
        self.a
    }

    pub fn right(&self) -> f64 {
        self.b
    }

    pub fn subintervals(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    /// Number of degrees of freedom.
    pub fn interior_nodes(&self) -> usize {
        self.m - 1
    }

    /// Coordinate of node `j`, where `j = 0` and `j = m` are the boundary.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.m {
            self.b
        } else {
            self.a + j as f64 * self.spacing()
        }
    }

    /// Coordinate of the `i`-th degree of freedom (`0 <= i < m - 1`).
    pub fn interior_node(&self, i: usize) -> f64 {
        self.node(i + 1)
    }
}

/// Nodal coefficients of a finite element function at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Unit coordinate vector, i.e. the hat function of interior node `i`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut f = Self::zeros(len);
        f.0[i] = 1.0;
        f
    }

    /// Nodal interpolant of `f` at the interior nodes.
    pub fn interpolate(mesh: &SpatialMesh, f: impl Fn(f64) -> f64) -> Self {
        Self(
            (0..mesh.interior_nodes())
                .map(|i| f(mesh.interior_node(i)))
                .collect(),
        )
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Applies a scalar function to every nodal value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&x| f(x)).collect())
    }

    /// `self + alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += alpha * y;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|x| alpha * x)
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(x, y)| x - y).collect())
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.0.iter().zip(&other.0).map(|(x, y)| x * y).sum()
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    /// Dense entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn mul(&self, x: &[f64]) -> Field {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        Field(y)
    }

    /// `x^T S y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[i] * self.diag[i] * y[i];
            if i + 1 < n {
                acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        acc
    }

    /// `self + alpha * other`.
    pub fn shifted(&self, alpha: f64, other: &SymTridiagonal) -> SymTridiagonal {
        SymTridiagonal {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }
}

/// `L D L^T` factorization of a symmetric positive-definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl LdlFactor {
    /// Fails with the offending row if a pivot is not strictly positive.
    pub fn factor(mat: &SymTridiagonal) -> std::result::Result<Self, usize> {
        let n = mat.dim();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let pivot = if i == 0 {
                mat.diag[0]
            } else {
                let li = mat.off[i - 1] / d[i - 1];
                l.push(li);
                mat.diag[i] - li * mat.off[i - 1]
            };
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(i);
            }
            d.push(pivot);
        }
        Ok(Self { d, l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Field {
        let n = self.d.len();
        let mut x = rhs.to_vec();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        Field(x)
    }
}

/// Mass and stiffness matrices plus a cache of `M + alpha A` factorizations.
///
/// The cache is populate-once per `alpha` and safe to share between threads.
#[derive(Debug)]
pub struct FemOperators {
    mesh: SpatialMesh,
    mass: SymTridiagonal,
    stiffness: SymTridiagonal,
    factors: RwLock<HashMap<u64, Arc<LdlFactor>>>,
    factorizations: AtomicUsize,
}

// 3-point Gauss-Legendre rule on [0, 1].
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

impl FemOperators {
    pub fn assemble(mesh: SpatialMesh) -> Self {
        let n = mesh.interior_nodes();
        let h = mesh.spacing();
        let mass = SymTridiagonal::new(vec![2.0 * h / 3.0; n], vec![h / 6.0; n - 1]);
        let stiffness = SymTridiagonal::new(vec![2.0 / h; n], vec![-1.0 / h; n - 1]);
        Self {
            mesh,
            mass,
            stiffness,
            factors: RwLock::new(HashMap::new()),
            factorizations: AtomicUsize::new(0),
        }
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.interior_nodes()
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTridiagonal {
        &self.stiffness
    }

    /// Number of distinct factorizations computed so far.
    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            })
        }
    }

    pub fn mass_mul(&self, u: &[f64]) -> Field {
        self.mass.mul(u)
    }

    pub fn stiffness_mul(&self, u: &[f64]) -> Field {
        self.stiffness.mul(u)
    }

    /// Load vector `(f, phi_i)` by 3-point Gauss quadrature on every element.
    pub fn load_vector(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        let n = self.dim();
        let h = self.mesh.spacing();
        let mut load = vec![0.0; n];
        for e in 0..self.mesh.subintervals() {
            let x0 = self.mesh.node(e);
            let (mut left, mut right) = (0.0, 0.0);
            for &(s, w) in &GAUSS3 {
                let fx = f(x0 + s * h);
                if !fx.is_finite() {
                    return Err(Error::NonFinite("integrand of the L2 projection"));
                }
                left += w * fx * (1.0 - s);
                right += w * fx * s;
            }
            // element e spans nodes e and e+1, i.e. interior dofs e-1 and e
            if e >= 1 {
                load[e - 1] += h * left;
            }
            if e < n {
                load[e] += h * right;
            }
        }
        Ok(Field(load))
    }

    /// L2 projection `Q_h f` onto the finite element space.
    pub fn l2_project(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        let load = self.load_vector(f)?;
        self.solve_shifted(0.0, &load)
    }

    pub fn norm_l2(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        Ok(self.mass.bilinear(u, u).max(0.0).sqrt())
    }

    pub fn norm_h1_semi(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        Ok(self.stiffness.bilinear(u, u).max(0.0).sqrt())
    }

    fn factor_for(&self, alpha: f64) -> Result<Arc<LdlFactor>> {
        let key = alpha.to_bits();
        if let Some(f) = self.factors.read().unwrap().get(&key) {
            return Ok(Arc::clone(f));
        }
        let mut cache = self.factors.write().unwrap();
        if let Some(f) = cache.get(&key) {
            return Ok(Arc::clone(f));
        }
        let shifted = self.mass.shifted(alpha, &self.stiffness);
        let factor = LdlFactor::factor(&shifted)
            .map(Arc::new)
            .map_err(|row| Error::Factorization { alpha, row })?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        cache.insert(key, Arc::clone(&factor));
        Ok(factor)
    }

    /// Solves `(M + alpha A) x = rhs`, where `rhs` is already in load form.
    pub fn solve_shifted(&self, alpha: f64, rhs: &[f64]) -> Result<Field> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidScheme(format!(
                "shift must be finite and nonnegative, got {alpha}"
            )));
        }
        self.check_dim(rhs)?;
        Ok(self.factor_for(alpha)?.solve(rhs))
    }

    /// Discrete Laplacian `-M^{-1} A u`.
    pub fn apply_discrete_laplacian(&self, u: &[f64]) -> Result<Field> {
        self.check_dim(u)?;
        let mut x = self.solve_shifted(0.0, &self.stiffness.mul(u))?;
        x.iter_mut().for_each(|v| *v = -*v);
        Ok(x)
    }
}
