#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace optolever {

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 at the solution
  double cost = 0;             // 0.5 |r|^2
  double reduced_chi2 = 0;     // |r|^2 / (m - n)
  int iterations = 0;
};

/// Levenberg-Marquardt with caller-supplied residuals and analytic Jacobian.
/// `project` maps a trial step back into the feasible set (e.g. clamps
/// non-negative parameters); identity by default.
class DampedLeastSquares {
 public:
  using Residual = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  using Projection = std::function<void(Eigen::VectorXd&)>;

  int max_iterations = 200;
  double tolerance = 1e-12;

  LeastSquaresResult solve(const Residual& residual, const Jacobian& jacobian,
                           Eigen::VectorXd p, const Projection& project = nullptr) const {
    Eigen::VectorXd r = residual(p);
    double cost = 0.5 * r.squaredNorm();
    if (!std::isfinite(cost)) throw FitError("non-finite residual at the initial guess");
    double lambda = 1e-3;
    int it = 0;
    for (; it < max_iterations; ++it) {
      const Eigen::MatrixXd J = jacobian(p);
      const Eigen::MatrixXd A = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * r;
      bool improved = false;
      for (int inner = 0; inner < 30 && !improved; ++inner) {
        Eigen::MatrixXd Ad = A;
        Ad.diagonal() += lambda * A.diagonal().cwiseMax(1e-300);
        Eigen::VectorXd step = Ad.ldlt().solve(-g);
        Eigen::VectorXd trial = p + step;
        if (project) {
          project(trial);
          // Parameters held at a bound by the projection are frozen and the
          // step is re-solved for the rest, so the free ones still move
          // along the true constrained descent direction.
          std::vector<Eigen::Index> pinned;
          for (Eigen::Index j = 0; j < p.size(); ++j)
            if (trial[j] != p[j] + step[j] && trial[j] == p[j]) pinned.push_back(j);
          if (!pinned.empty()) {
            Eigen::MatrixXd Af = Ad;
            Eigen::VectorXd gf = g;
            for (Eigen::Index j : pinned) {
              Af.row(j).setZero();
              Af.col(j).setZero();
              Af(j, j) = 1.0;
              gf[j] = 0.0;
            }
            step = Af.ldlt().solve(-gf);
            trial = p + step;
            project(trial);
          }
        }
        const Eigen::VectorXd rt = residual(trial);
        const double ct = 0.5 * rt.squaredNorm();
        if (std::isfinite(ct) && ct < cost) {
          const double rel = (cost - ct) / std::max(cost, 1e-300);
          const double dp = (trial - p).norm() / std::max(p.norm(), 1e-300);
          p = trial;
          r = rt;
          cost = ct;
          lambda = std::max(lambda / 3.0, 1e-12);
          improved = true;
          if (rel < tolerance || dp < tolerance) {
            ++it;
            return finish(residual, jacobian, p, r, it);
          }
        } else {
          lambda *= 4.0;
        }
      }
      if (!improved) break;  // no downhill step left: converged to machine precision
    }
    if (it >= max_iterations)
      throw FitError("least squares did not converge in " + std::to_string(max_iterations) +
                     " iterations; cost " + std::to_string(cost));
    return finish(residual, jacobian, p, r, it);
  }

 private:
  static LeastSquaresResult finish(const Residual&, const Jacobian& jacobian,
                                   const Eigen::VectorXd& p, const Eigen::VectorXd& r, int it) {
    LeastSquaresResult out;
    out.params = p;
    out.cost = 0.5 * r.squaredNorm();
    out.iterations = it;
    const Eigen::MatrixXd J = jacobian(p);
    const auto m = static_cast<double>(r.size());
    const auto n = static_cast<double>(p.size());
    out.reduced_chi2 = m > n ? r.squaredNorm() / (m - n) : 0.0;
    const Eigen::MatrixXd A = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw FitError("degenerate fit: normal matrix is singular");
    out.covariance = out.reduced_chi2 * lu.inverse();
    return out;
  }
};

}  // namespace optolever
