#pragma once

#include "mslds/types.hpp"

namespace mslds::linalg {

/// Cholesky solve of m x = b for symmetric positive definite m.
/// Throws NotSpdError when a pivot falls below 1e-14 * trace(m) / rows.
Vector solve_spd(const Matrix& m, const Vector& b);

/// Cholesky factor L (lower) with the same pivot guard as solve_spd.
Matrix cholesky(const Matrix& m);

/// Inverse of an SPD matrix via Cholesky.
Matrix invert_spd(const Matrix& m);

/// Sherman-Morrison: given p = sigma^{-1} for SPD sigma, returns
/// (sigma + x x^T)^{-1} = p - (p x)(p x)^T / (1 + x^T p x).
Matrix rank_one_inverse_update(const Matrix& p, const Vector& x);

/// Largest singular value by power iteration on m^T m with a deterministic
/// start vector; relative error <= 1e-8.
double operator_norm(const Matrix& m);

struct SymEig {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // columns; m = V diag(lambda) V^T
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Throws NotSymmetricError when asymmetry exceeds 1e-10 relative.
SymEig sym_eig(const Matrix& m);

/// Estimate of the spectral radius as ||m^k||_2^{1/k} by repeated squaring
/// with norm scaling (k is rounded up to a power of two). Upper-biased.
/// Throws OverflowError when the implied ||m^k|| exceeds 1e300.
double spectral_radius_estimate(const Matrix& m, int k);

}  // namespace mslds::linalg
