#pragma once

#include "fedhb/types.hpp"

namespace fedhb {

/// Point on the Stiefel manifold St(d, r): a d×r matrix with orthonormal
/// columns. Construction through make_stiefel checks the invariant; raw
/// aggregate construction is allowed for intermediate arithmetic.
struct StiefelPoint {
  Matrix mat;

  int d() const { return static_cast<int>(mat.rows()); }
  int r() const { return static_cast<int>(mat.cols()); }

  /// ||M^T M - I||_F, zero for an exact point.
  double orthonormality_error() const {
    const Matrix gram = mat.transpose() * mat;
    return (gram - Matrix::Identity(r(), r())).norm();
  }
};

StiefelPoint make_stiefel(Matrix m, double tol = 1e-10);

/// Element of the tangent space at `base`: base^T mat + mat^T base = 0.
struct TangentVector {
  Matrix base;
  Matrix mat;

  double norm() const { return mat.norm(); }
  double skew_error() const {
    const Matrix s = base.transpose() * mat + mat.transpose() * base;
    return s.norm();
  }
};

/// P_T_V(U) = U - V (V^T U + U^T V) / 2.
TangentVector tangent_project(const StiefelPoint& v, const Matrix& u);

/// Polar retraction R_U(xi) = (U + xi) (I + xi^T xi)^{-1/2}. The inverse
/// square root is taken by symmetric eigendecomposition of the r×r Gram
/// matrix. The formula is evaluated for arbitrary xi; the result lies on
/// the manifold whenever xi is tangent at base.
StiefelPoint polar_retract(const StiefelPoint& base, const Matrix& xi);

/// Projected distance d(V, U) = ||P_T_V(U)||_F. Not symmetric in general
/// and used exactly as written.
double stiefel_distance(const StiefelPoint& v, const StiefelPoint& u);

/// Haar-uniform sample: orthonormalize a d×r standard Gaussian matrix by
/// QR with the R-diagonal sign fixed positive.
StiefelPoint sample_stiefel_uniform(int d, int r, Rng& rng);

/// (G)^{-1/2} for symmetric positive definite G.
Matrix inv_sqrt_spd(const Matrix& g);

}  // namespace fedhb
