#include "sibdep/moments.hpp"

#include <algorithm>

namespace sibdep {

Eigen::MatrixXd mean_matrix(const Environment& env) {
  const int n = env.order();
  Eigen::MatrixXd m(n, n);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) m(i - 1, j - 1) = j * env.marginal(i, j);
  return m;
}

std::vector<Eigen::MatrixXd> hessians(const Environment& env) {
  const int n = env.order();
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k <= n; ++k) b(k - 1, k - 1) = k * (k - 1) * env.marginal(i, k);
    out.push_back(std::move(b));
  }
  return out;
}

Curvature curvature_stats(const Environment& env) {
  const double m_norm = l1_norm(mean_matrix(env));
  if (!(m_norm > 0.0)) {
    throw DegenerateError("curvature_stats: mean matrix is zero");
  }
  Curvature c;
  for (const auto& b : hessians(env)) c.total += l1_norm(b);
  c.ratio = c.total / (m_norm * m_norm);
  return c;
}

MacroMoments macro_moments(const Environment& env) {
  const int n = env.order();
  MacroMoments out;
  out.mean.resize(n, n);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) out.mean(i - 1, j - 1) = i * env.marginal(i, j);
  for (int i = 1; i <= n; ++i) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    if (i >= 2) {
      for (int j = 1; j <= n; ++j)
        for (int k = 1; k <= n; ++k)
          b(j - 1, k - 1) = i * (i - 1) * env.pair_marginal(i, j, k);
    }
    out.hessians.push_back(std::move(b));
  }
  return out;
}

double eta_variance(const Environment& env, int i, int j) {
  env.check_group_size(i);
  if (j < 1 || j > env.order()) {
    throw IndexError("eta_variance: child type outside 1.." + std::to_string(env.order()));
  }
  const double mean = i * env.marginal(i, j);
  const double pairs = i >= 2 ? i * (i - 1) * env.pair_marginal(i, j, j) : 0.0;
  return pairs + mean - mean * mean;
}

double delta_max(const Environment& env) {
  double best = 0.0;
  for (int i = 1; i <= env.order(); ++i)
    for (int j = 1; j <= env.order(); ++j) best = std::max(best, eta_variance(env, i, j));
  return best;
}

MomentSet compute_moments(const Environment& env) {
  MomentSet out;
  out.mean = mean_matrix(env);
  out.hessians = hessians(env);
  out.macro = macro_moments(env);
  out.curvature = curvature_stats(env);
  out.perron = perron(out.mean);
  out.macro_vector = macro_eigenvector(out.perron.vector);
  out.macro_residual =
      (out.macro.mean * out.macro_vector - out.perron.root * out.macro_vector)
          .cwiseAbs()
          .maxCoeff();
  out.delta = delta_max(env);
  return out;
}

Eigen::MatrixXd ensemble_mean_matrix(const EnvironmentEnsemble& ens) {
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(ens.order(), ens.order());
  for (std::size_t m = 0; m < ens.size(); ++m)
    total += ens.weights()[m] * mean_matrix(ens.member(m));
  return total;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < v.size(); ++r) out.push_back(v(r));
  return out;
}

nlohmann::json to_json(const MomentSet& moments) {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& h : moments.hessians) b.push_back(matrix_to_json(h));
  nlohmann::json bm = nlohmann::json::array();
  for (const auto& h : moments.macro.hessians) bm.push_back(matrix_to_json(h));
  return {
      {"M", matrix_to_json(moments.mean)},
      {"B", b},
      {"M_macro", matrix_to_json(moments.macro.mean)},
      {"B_macro", bm},
      {"curvature", {{"B", moments.curvature.total}, {"T", moments.curvature.ratio}}},
      {"perron",
       {{"rho", moments.perron.root},
        {"u", vector_to_json(moments.perron.vector)},
        {"U", vector_to_json(moments.macro_vector)},
        {"residual", moments.perron.residual},
        {"macro_residual", moments.macro_residual},
        {"iterations", moments.perron.iterations},
        {"primitive", moments.perron.primitive}}},
      {"delta", moments.delta},
  };
}

}  // namespace sibdep
