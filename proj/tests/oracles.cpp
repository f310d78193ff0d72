#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

ComplexZ eq6_complex(double a_s, double a_r, double dphi, double r0) {
  const std::complex<double> ratio =
      (a_s / a_r) * std::exp(std::complex<double>(0.0, dphi));
  const std::complex<double> z = (ratio - 1.0) * r0;
  return {z.real(), z.imag(), std::abs(z)};
}

namespace {

bool cheb_match(const Vector& x, int i, int j, int m, double r) {
  for (int k = 0; k < m; ++k) {
    if (std::abs(x(i + k) - x(j + k)) > r) return false;
  }
  return true;
}

}  // namespace

double apen_direct(const Vector& x, int m, double r) {
  const int n = static_cast<int>(x.size());
  auto phi = [&](int mm) {
    const int count = n - mm + 1;
    double acc = 0.0;
    for (int i = 0; i < count; ++i) {
      int c = 0;
      for (int j = 0; j < count; ++j) {
        if (cheb_match(x, i, j, mm, r)) ++c;  // j == i matches itself
      }
      acc += std::log(static_cast<double>(c) / count);
    }
    return acc / count;
  };
  return phi(m) - phi(m + 1);
}

double sampen_direct(const Vector& x, int m, double r) {
  const int n = static_cast<int>(x.size());
  const int count = n - m;  // templates with an (m+1)-extension
  long long a = 0, b = 0;
  for (int i = 0; i < count; ++i) {
    for (int j = i + 1; j < count; ++j) {
      if (cheb_match(x, i, j, m, r)) {
        ++b;
        if (std::abs(x(i + m) - x(j + m)) <= r) ++a;
      }
    }
  }
  if (a == 0 || b == 0) return std::numeric_limits<double>::quiet_NaN();
  return -std::log(static_cast<double>(a) / static_cast<double>(b));
}

LrFit lr_normal_equations(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Matrix design(n, p + 1);
  design.leftCols(p) = x;
  design.col(p).setOnes();
  const Matrix gram = design.transpose() * design;
  const Vector rhs = design.transpose() * y;
  const Vector beta = gram.fullPivLu().solve(rhs);
  LrFit fit;
  fit.coef = beta.head(p);
  fit.intercept = beta(p);
  return fit;
}

RootSplit cart_root_exhaustive(const Matrix& x, const Vector& y,
                               int min_samples_leaf) {
  const Eigen::Index n = x.rows(), p = x.cols();
  RootSplit best;
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> vals(n);
    for (Eigen::Index i = 0; i < n; ++i) vals[i] = x(i, j);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
      const double thr = vals[t] + 0.5 * (vals[t + 1] - vals[t]);
      double nl = 0, nr = 0, ml = 0, mr = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x(i, j) <= thr) {
          nl += 1;
          ml += y(i);
        } else {
          nr += 1;
          mr += y(i);
        }
      }
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      ml /= nl;
      mr /= nr;
      double cost = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double c = x(i, j) <= thr ? ml : mr;
        cost += (y(i) - c) * (y(i) - c);
      }
      if (!best.found || cost < best.cost - 1e-12 * std::abs(best.cost)) {
        best.found = true;
        best.cost = cost;
        best.feature = static_cast<int>(j);
        best.threshold = thr;
      }
    }
  }
  return best;
}

namespace {

// Exact projection of (alpha, alpha*) onto [0, C]^2n intersect
// {sum(alpha) - sum(alpha*) = 0}: clip(v - lambda * sign) with lambda found
// by bisection on the monotone constraint function.
void project_box_hyperplane(Vector& a, Vector& as, double c) {
  const Eigen::Index n = a.size();
  auto constraint = [&](double lam) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      s += std::clamp(a(i) - lam, 0.0, c);
      s -= std::clamp(as(i) + lam, 0.0, c);
    }
    return s;
  };
  double lo = -2.0 * c, hi = 2.0 * c;
  for (Eigen::Index i = 0; i < n; ++i) {
    lo = std::min({lo, a(i) - c, -as(i) - c});
    hi = std::max({hi, a(i), as(i) + c});
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (constraint(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double lam = 0.5 * (lo + hi);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i) = std::clamp(a(i) - lam, 0.0, c);
    as(i) = std::clamp(as(i) + lam, 0.0, c);
  }
}

}  // namespace

double svr_dual_objective(const Matrix& kernel, const Vector& y, double eps,
                          const Vector& beta) {
  return 0.5 * beta.dot(kernel * beta) + eps * beta.array().abs().sum() -
         y.dot(beta);
}

double svr_dual_pg(const Matrix& kernel, const Vector& y, double c, double eps,
                   int iters) {
  const Eigen::Index n = kernel.rows();
  Vector a = Vector::Zero(n), as = Vector::Zero(n);
  const double lip = 2.0 * kernel.norm() + 1.0;
  const double step = 1.0 / lip;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const Vector beta = a - as;
    const Vector kb = kernel * beta;
    const Vector ga = kb.array() + eps - y.array();
    const Vector gas = -kb.array() + eps + y.array();
    a -= step * ga;
    as -= step * gas;
    project_box_hyperplane(a, as, c);
    if ((it & 63) == 63 || it + 1 == iters) {
      // Canonicalize the overlap (min(a, a*) > 0 only raises the objective).
      const Vector bb = a - as;
      best = std::min(best, svr_dual_objective(kernel, y, eps, bb));
    }
  }
  return best;
}

MomentStats moments_direct(const Vector& x) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = x(i) - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  MomentStats s;
  s.sd = std::sqrt(m2 / static_cast<double>(n - 1));
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  s.skew = m3 / std::pow(m2, 1.5);
  s.kurt = m4 / (m2 * m2);
  return s;
}

double pcc_direct(const Vector& x, const Vector& y) {
  const Eigen::Index n = x.size();
  const double mx = x.mean(), my = y.mean();
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num += (x(i) - mx) * (y(i) - my);
    dx += (x(i) - mx) * (x(i) - mx);
    dy += (y(i) - my) * (y(i) - my);
  }
  return num / (std::sqrt(dx) * std::sqrt(dy));
}

}  // namespace oracles
