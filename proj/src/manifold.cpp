#include "fedhb/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace fedhb {

StiefelPoint make_stiefel(Matrix m, double tol) {
  require(m.rows() >= m.cols() && m.cols() >= 1, "make_stiefel: need d >= r >= 1");
  StiefelPoint p{std::move(m)};
  require(p.orthonormality_error() <= tol, "make_stiefel: columns not orthonormal");
  return p;
}

TangentVector tangent_project(const StiefelPoint& v, const Matrix& u) {
  require(u.rows() == v.mat.rows() && u.cols() == v.mat.cols(),
          "tangent_project: shape mismatch");
  const Matrix vtu = v.mat.transpose() * u;
  const Matrix sym = vtu + vtu.transpose();
  return TangentVector{v.mat, u - 0.5 * v.mat * sym};
}

Matrix inv_sqrt_spd(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  Vector inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

StiefelPoint polar_retract(const StiefelPoint& base, const Matrix& xi) {
  require(xi.rows() == base.mat.rows() && xi.cols() == base.mat.cols(),
          "polar_retract: shape mismatch");
  const Matrix y = base.mat + xi;
  const Matrix gram = Matrix::Identity(base.r(), base.r()) + xi.transpose() * xi;
  return StiefelPoint{y * inv_sqrt_spd(gram)};
}

double stiefel_distance(const StiefelPoint& v, const StiefelPoint& u) {
  require(u.mat.rows() == v.mat.rows() && u.mat.cols() == v.mat.cols(),
          "stiefel_distance: shape mismatch");
  return tangent_project(v, u.mat).norm();
}

StiefelPoint sample_stiefel_uniform(int d, int r, Rng& rng) {
  require(d >= r && r >= 1, "sample_stiefel_uniform: need d >= r >= 1");
  const Matrix g = rng.gaussian_matrix(d, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  const Matrix rmat = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (int j = 0; j < r; ++j)
    if (rmat(j, j) < 0) q.col(j) = -q.col(j);
  return StiefelPoint{std::move(q)};
}

}  // namespace fedhb
