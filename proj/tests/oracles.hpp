#pragma once

// Reference computations that share no code with the library: scalar loops,
// brute-force searches and closed forms.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double xlogx_neg(double z) { return z > 0 ? -z * std::log(z) : 0.0; }

inline double entropy(const Eigen::MatrixXd& Z) {
  double h = 0;
  for (int k = 0; k < Z.rows(); ++k)
    for (int v = 0; v < Z.cols(); ++v) h += xlogx_neg(Z(k, v));
  return h;
}

inline double objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Z, double kappa) {
  double t = 0;
  for (int k = 0; k < S.rows(); ++k)
    for (int v = 0; v < S.cols(); ++v) t += S(k, v) * Z(k, v);
  return t + kappa * entropy(Z);
}

// Maximizer of a concave function on [lo, hi] by ternary search.
template <typename F>
std::pair<double, double> ternary_max(F&& f, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2)) lo = m1;
    else hi = m2;
  }
  const double x = (lo + hi) / 2;
  return {x, f(x)};
}

// Entropic objective maximizer over the 2 x V feasible set (columns sum to 1,
// rows sum to V/2) for V in {2, 3}. Row 0 is parameterized by x; row 1 = 1 - x.
inline Eigen::MatrixXd brute_force_transport_k2(const Eigen::MatrixXd& S, double kappa) {
  const int V = static_cast<int>(S.cols());
  auto value = [&](const std::vector<double>& x) {
    double f = 0;
    for (int v = 0; v < V; ++v)
      f += x[v] * S(0, v) + (1 - x[v]) * S(1, v) + kappa * (xlogx_neg(x[v]) + xlogx_neg(1 - x[v]));
    return f;
  };
  std::vector<double> best(V);
  if (V == 2) {
    auto f = [&](double x0) { return value({x0, 1 - x0}); };
    const double x0 = ternary_max(f, 0, 1).first;
    best = {x0, 1 - x0};
  } else if (V == 3) {
    auto inner = [&](double x0) {
      const double lo = std::max(0.0, 0.5 - x0), hi = std::min(1.0, 1.5 - x0);
      return ternary_max([&](double x1) { return value({x0, x1, 1.5 - x0 - x1}); }, lo, hi);
    };
    const double x0 = ternary_max([&](double x0) { return inner(x0).second; }, 0, 1).first;
    const double x1 = inner(x0).first;
    best = {x0, x1, 1.5 - x0 - x1};
  } else {
    return {};
  }
  Eigen::MatrixXd Z(2, V);
  for (int v = 0; v < V; ++v) {
    Z(0, v) = best[v];
    Z(1, v) = 1 - best[v];
  }
  return Z;
}

// Plain alternating row/column projections of exp(S / kappa) in long double.
inline Eigen::MatrixXd alternating_projection(const Eigen::MatrixXd& S, double kappa, int iters) {
  const int K = static_cast<int>(S.rows()), V = static_cast<int>(S.cols());
  std::vector<long double> Z(std::size_t(K) * V);
  for (int k = 0; k < K; ++k)
    for (int v = 0; v < V; ++v) Z[k * V + v] = std::exp((long double)S(k, v) / kappa);
  const long double row_target = (long double)V / K;
  for (int it = 0; it < iters; ++it) {
    for (int k = 0; k < K; ++k) {
      long double s = 0;
      for (int v = 0; v < V; ++v) s += Z[k * V + v];
      for (int v = 0; v < V; ++v) Z[k * V + v] *= row_target / s;
    }
    for (int v = 0; v < V; ++v) {
      long double s = 0;
      for (int k = 0; k < K; ++k) s += Z[k * V + v];
      for (int k = 0; k < K; ++k) Z[k * V + v] /= s;
    }
  }
  Eigen::MatrixXd out(K, V);
  for (int k = 0; k < K; ++k)
    for (int v = 0; v < V; ++v) out(k, v) = double(Z[k * V + v]);
  return out;
}

// q_t = eta^t q_0 + (1 - eta) sum_{i=1..t} eta^{t-i} m, constant mean m.
inline Eigen::RowVectorXd ema_closed_form(const Eigen::RowVectorXd& q0, const Eigen::RowVectorXd& m, double eta,
                                          int t) {
  double geometric = 0;
  for (int i = 1; i <= t; ++i) geometric += std::pow(eta, t - i);
  return std::pow(eta, t) * q0 + (1 - eta) * geometric * m;
}

inline double log_sum_exp(const std::vector<double>& x) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : x) hi = std::max(hi, v);
  double s = 0;
  for (double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

// min_k (1 - h.q_k) over one class's prototype rows.
inline double class_distance(const Eigen::RowVectorXd& h, const Eigen::MatrixXd& protos) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < protos.rows(); ++k) {
    double dot = 0;
    for (int j = 0; j < h.size(); ++j) dot += h(j) * protos(k, j);
    best = std::min(best, 1 - dot);
  }
  return best;
}

// Nearest prototype over all (view, class, k), strict improvement scan.
struct ScanResult {
  int cls = -1;
  double distance = std::numeric_limits<double>::infinity();
};

inline ScanResult exhaustive_scan(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& prototypes, int K) {
  ScanResult r;
  for (int v = 0; v < embeddings.rows(); ++v)
    for (int row = 0; row < prototypes.rows(); ++row) {
      double dot = 0;
      for (int j = 0; j < embeddings.cols(); ++j) dot += embeddings(v, j) * prototypes(row, j);
      if (1 - dot < r.distance) {
        r.distance = 1 - dot;
        r.cls = row / K;
      }
    }
  return r;
}

inline Eigen::MatrixXd random_unit_rows(int rows, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd m(rows, dim);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < dim; ++j) m(r, j) = n(rng);
    m.row(r).normalize();
  }
  return m;
}

inline Eigen::MatrixXd random_similarity(int K, int V, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd S(K, V);
  for (int k = 0; k < K; ++k)
    for (int v = 0; v < V; ++v) S(k, v) = u(rng);
  return S;
}

}  // namespace oracle
