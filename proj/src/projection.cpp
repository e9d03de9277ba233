#include <cmath>
#include <limits>

#include "dcattack/dc_model.hpp"
#include "dcattack/errors.hpp"
#include "dcattack/lin_solve.hpp"

namespace dcattack {

ProjectionResult project_onto_row(double offset, const Eigen::VectorXd& direction, int row,
                                  double zero_tol) {
  ProjectionResult out;
  out.constraint_index = row;
  const double v2 = direction.squaredNorm();
  if (std::sqrt(v2) <= zero_tol) {
    out.delta = Eigen::VectorXd::Zero(direction.size());
    out.norm_sq = offset < -zero_tol ? std::numeric_limits<double>::infinity() : 0.0;
    return out;
  }
  out.delta = (-offset / v2) * direction;
  out.norm_sq = offset * offset / v2;
  return out;
}

ProjectionResult project_fixed(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                               int row, double zero_tol) {
  if (row < 0 || row >= mats.rows()) throw PreconditionError("row index out of range");
  const double offset = mats.A.row(row).dot(p0) + mats.c(row);
  ProjectionResult out = project_onto_row(offset, mats.B.row(row).transpose(), row, zero_tol);
  if (mats.B.row(row).norm() <= zero_tol) out.norm_sq = std::numeric_limits<double>::infinity();
  return out;
}

ProjectionResult project_policy(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                                const Eigen::MatrixXd& G, int row, double zero_tol) {
  if (row < 0 || row >= mats.rows()) throw PreconditionError("row index out of range");
  const double offset = mats.A.row(row).dot(p0) + mats.c(row);
  Eigen::VectorXd v = G.transpose() * mats.A.row(row).transpose() + mats.B.row(row).transpose();
  return project_onto_row(offset, v, row, zero_tol);
}

}  // namespace dcattack
