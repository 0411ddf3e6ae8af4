#include "altproj/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "altproj/error.hpp"

namespace altproj {

const char* status_name(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::Converged: return "converged";
    case OptimizerStatus::MaxIterations: return "max-iterations";
    case OptimizerStatus::LineSearchExhausted: return "line-search-exhausted";
  }
  return "?";
}

namespace {

// Overflowing trial points surface as NumericError from inference; they are
// rejected like any other non-decreasing step.
double safe_eval(const ObjectiveFn& fn, const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  try {
    return fn(x, g);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Two-loop recursion: returns -H g for the stored pairs.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& ss,
                                const std::deque<Eigen::VectorXd>& ys) {
  Eigen::VectorXd q = g;
  std::vector<double> a(ss.size());
  for (std::size_t i = ss.size(); i-- > 0;) {
    a[i] = ss[i].dot(q) / ys[i].dot(ss[i]);
    q -= a[i] * ys[i];
  }
  if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const double b = ys[i].dot(q) / ys[i].dot(ss[i]);
    q += (a[i] - b) * ss[i];
  }
  return -q;
}

}  // namespace

OptimizerResult minimize(const ObjectiveFn& fn, Eigen::VectorXd x0, const OptimizerOptions& options,
                         const ProjectionFn& project) {
  OptimizerResult r;
  r.x = std::move(x0);
  Eigen::VectorXd g(r.x.size());
  r.value = fn(r.x, g);
  if (!std::isfinite(r.value) || !g.allFinite()) throw OptimizationError("objective is not finite at the starting point");
  r.trace.push_back(r.value);

  const double gmax0 = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  double step = gmax0 > 1.0 ? 1.0 / gmax0 : 1.0;
  const bool quasi_newton = !project && options.memory > 0;
  std::deque<Eigen::VectorXd> ss, ys;
  Eigen::VectorXd xn(r.x.size());
  Eigen::VectorXd gn(r.x.size());
  Eigen::VectorXd dir(r.x.size());

  for (r.iterations = 0;; ++r.iterations) {
    r.gradient_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    if (r.gradient_norm <= options.tolerance) {
      r.status = OptimizerStatus::Converged;
      break;
    }
    if (r.iterations >= options.max_iterations) {
      r.status = OptimizerStatus::MaxIterations;
      break;
    }
    double s = step;
    if (quasi_newton) {
      dir = lbfgs_direction(g, ss, ys);
      if (!(dir.dot(g) < 0)) {
        ss.clear();
        ys.clear();
        dir = -g;
      } else if (!ss.empty()) {
        s = 1.0;
      }
    } else {
      dir = -g;
    }
    bool accepted = false;
    bool resolvable = true;
    double fn_value = 0.0;
    // Below this predicted decrease, rounding in f hides any progress.
    const double noise = 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r.value));
    for (int bt = 0; bt < options.max_backtracks; ++bt, s *= 0.5) {
      xn = r.x + s * dir;
      if (project) project(r.x, xn);
      const double decrease = g.dot(xn - r.x);  // < 0 for a descent step
      if (-decrease < noise) {
        resolvable = false;
        break;
      }
      fn_value = safe_eval(fn, xn, gn);
      if (std::isfinite(fn_value) && gn.allFinite() && fn_value <= r.value + options.armijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted && quasi_newton && !ss.empty() && resolvable) {
      // Stale curvature pairs: restart from steepest descent next round.
      ss.clear();
      ys.clear();
      step = std::min(1.0, 1.0 / r.gradient_norm);
      continue;
    }
    if (!accepted) {
      r.status = OptimizerStatus::LineSearchExhausted;
      break;
    }
    Eigen::VectorXd sx = xn - r.x;
    Eigen::VectorXd sy = gn - g;
    const double sty = sx.dot(sy);
    if (quasi_newton) {
      if (sty > 1e-12 * sy.squaredNorm()) {
        ss.push_back(std::move(sx));
        ys.push_back(std::move(sy));
        if (static_cast<int>(ss.size()) > options.memory) {
          ss.pop_front();
          ys.pop_front();
        }
      }
      step = 1.0;
    } else {
      step = sty > 0 ? sx.squaredNorm() / sty : 2.0 * s;
      step = std::clamp(step, 1e-12, 1e12);
    }
    r.x.swap(xn);
    g.swap(gn);
    r.value = fn_value;
    r.trace.push_back(r.value);
  }
  return r;
}

}  // namespace altproj
