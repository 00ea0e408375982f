//! Toeplitz operators with atomic symbols.
//!
//! For `mu = sum_j c_j delta_{w_j}` the operator is
//! `T_mu = sum_j c_j <., K_{w_j}> K_{w_j}`, whose nonzero spectrum is that of
//! the Gram matrix `G_ij = sqrt(c_i c_j) K(w_i, w_j)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{kernel_unchecked, SiegelPoint};
use crate::measures::AtomicMeasure;
use crate::quadrature::QuadratureSpec;
use crate::transforms::{lp_lambda_norm, ScalarField};

/// Relative threshold under which eigenvalues are treated as zero.
pub const PSD_CLAMP: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ToeplitzGram {
    matrix: DMatrix<Complex64>,
    measure: AtomicMeasure,
}

pub fn gram_matrix(mu: &AtomicMeasure) -> Result<ToeplitzGram> {
    if mu.is_empty() {
        return Err(Error::InvalidArgument("the Gram matrix needs at least one atom".into()));
    }
    let atoms = mu.atoms();
    let m = atoms.len();
    let sqrt_w: Vec<f64> = atoms.iter().map(|a| a.weight.sqrt()).collect();
    let rows: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| kernel_unchecked(&atoms[i].point, &atoms[j].point) * (sqrt_w[i] * sqrt_w[j]))
                .collect()
        })
        .collect();
    let mut matrix = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    // exact Hermitian symmetry; the kernel formula agrees to rounding
    for i in 0..m {
        matrix[(i, i)] = Complex64::new(matrix[(i, i)].re, 0.0);
        for j in (i + 1)..m {
            let avg = 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj());
            matrix[(i, j)] = avg;
            matrix[(j, i)] = avg.conj();
        }
    }
    Ok(ToeplitzGram {
        matrix,
        measure: mu.clone(),
    })
}

impl ToeplitzGram {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn measure(&self) -> &AtomicMeasure {
        &self.measure
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|G_ij - conj(G_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn eigen(&self) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
        eigen(&self.matrix)
    }
}

fn eigen(matrix: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let eig = SymmetricEigen::try_new(matrix.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Eigenvalues of a Gram matrix, descending and clamped at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues set to zero by the clamp.
    pub clamped: usize,
    /// Most negative raw eigenvalue.
    pub min_raw: f64,
    /// `||G V - V diag(lambda)||_F / ||G||_F` before clamping.
    pub backward_error: f64,
}

impl Spectrum {
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `lambda_max / lambda_min` over the nonzero eigenvalues.
    pub fn condition(&self) -> f64 {
        let nz: Vec<f64> = self.eigenvalues.iter().copied().filter(|&l| l > 0.0).collect();
        match (nz.first(), nz.last()) {
            (Some(a), Some(b)) => a / b,
            _ => f64::NAN,
        }
    }
}

pub fn spectrum(g: &ToeplitzGram) -> Result<Spectrum> {
    hermitian_spectrum(g.matrix())
}

/// Clamped, sorted spectrum of a Hermitian positive semidefinite matrix.
pub fn hermitian_spectrum(matrix: &DMatrix<Complex64>) -> Result<Spectrum> {
    if !matrix.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let (values, vectors) = eigen(matrix)?;
    let norm = matrix.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let residual = {
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        let diff = matrix * &vectors - &vectors * lam;
        diff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    };
    let radius = values.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let threshold = PSD_CLAMP * radius;
    let min_raw = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min_raw < -threshold {
        return Err(Error::Numerical(format!(
            "Gram matrix has eigenvalue {min_raw} below the clamp threshold -{threshold}"
        )));
    }
    let mut clamped = 0;
    let mut eigenvalues: Vec<f64> = values
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clamped += 1;
                0.0
            } else {
                l
            }
        })
        .collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(Spectrum {
        eigenvalues,
        clamped,
        min_raw,
        backward_error: if norm > 0.0 { residual / norm } else { 0.0 },
    })
}

/// `sum_k lambda_k^p`, zeros skipped.
pub fn schatten_power(s: &Spectrum, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    Ok(s.eigenvalues.iter().filter(|&&l| l > 0.0).map(|l| l.powf(p)).sum())
}

/// `(sum_k lambda_k^p)^{1/p}`.
pub fn schatten_norm(s: &Spectrum, p: f64) -> Result<f64> {
    Ok(schatten_power(s, p)?.powf(1.0 / p))
}

/// `<T_mu k_z, k_z>`, read off the Gram representation as `||v||^2` with
/// `v_j = sqrt(c_j) K(w_j, z) / sqrt(K(z, z))`.
pub fn operator_berezin(g: &ToeplitzGram, z: &SiegelPoint) -> Result<f64> {
    let mu = g.measure();
    if z.dim() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: z.dim(),
        });
    }
    let kzz = kernel_unchecked(z, z).re;
    let v = DVector::from_iterator(
        mu.len(),
        mu.atoms()
            .iter()
            .map(|a| kernel_unchecked(&a.point, z) * (a.weight.sqrt() / kzz.sqrt())),
    );
    Ok(v.norm_squared())
}

/// Both sides of `tr(T_mu) = integral mu_tilde dlambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    /// `sum_k lambda_k`.
    pub lhs: f64,
    /// Truncated integral plus tail estimate.
    pub rhs: f64,
    pub truncated: f64,
    pub tail_estimate: Option<f64>,
    pub error_estimate: f64,
    pub rel_diff: f64,
}

pub fn trace_identity_check(mu: &AtomicMeasure, spec: &QuadratureSpec) -> Result<TraceCheck> {
    let lhs = spectrum(&gram_matrix(mu)?)?.trace();
    let est = lp_lambda_norm(&ScalarField::berezin(mu), 1.0, spec)?;
    Ok(TraceCheck {
        lhs,
        rhs: est.integral,
        truncated: est.truncated,
        tail_estimate: est.tail_estimate,
        error_estimate: est.error_estimate,
        rel_diff: (est.integral - lhs).abs() / lhs,
    })
}

/// Both sides of `<G^p x, x> >= <G x, x>^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Slack allowed in [`power_inequality_check`].
pub const POWER_SLACK: f64 = 1e-10;

pub fn power_inequality_check(g: &ToeplitzGram, p: f64, x: &[Complex64]) -> Result<PowerCheck> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: x.len(),
        });
    }
    let norm: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("x must be a unit vector, |x| = {norm}")));
    }
    let (values, vectors) = g.eigen()?;
    let xv = DVector::from_column_slice(x);
    let coeffs = vectors.adjoint() * xv;
    let mut lhs = 0.0;
    let mut quad = 0.0;
    for (l, c) in values.iter().zip(coeffs.iter()) {
        let l = l.max(0.0);
        let w = c.norm_sqr();
        lhs += l.powf(p) * w;
        quad += l * w;
    }
    let rhs = quad.powf(p);
    Ok(PowerCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - POWER_SLACK,
    })
}
