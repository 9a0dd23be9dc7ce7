#include "mutare/mip.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>

namespace mutare {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kTieTol = 1e-12;

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

int sign_of(double v) { return (v > 0) - (v < 0); }

std::vector<int> columns_for(std::span<const int> active, int k) {
  std::vector<int> cols{0};
  for (int j : active) {
    if (j < 1 || j > k) throw ArgumentError("active index " + std::to_string(j) + " outside 1..k");
    cols.push_back(j);
  }
  std::sort(cols.begin(), cols.end());
  if (std::adjacent_find(cols.begin(), cols.end()) != cols.end())
    throw ArgumentError("duplicate active index");
  return cols;
}

}  // namespace

double WhitenedProblem::residual_norm2(const Eigen::VectorXd& beta) const {
  return (response - design * beta).squaredNorm();
}

double WhitenedProblem::two_loglik(const Eigen::VectorXd& beta) const {
  return -(n_obs() * kLog2Pi + log_det_w + residual_norm2(beta));
}

WhitenedProblem whiten(const LaggedDesign& design, double tau, const CovarianceSpec& cov) {
  cov.validate();
  const int per = design.rows_per_subject();
  const int p = design.k() + 1;
  const double gamma = cov.ratio();
  const double shrink = 1.0 - 1.0 / std::sqrt(1.0 + per * gamma);
  const double sd = std::sqrt(cov.sigma2_eps);

  WhitenedProblem out;
  out.design.resize(design.n_rows(), p);
  out.response.resize(design.n_rows());
  for (int i = 0; i < design.n_subjects(); ++i) {
    const int first = i * per;
    Eigen::MatrixXd block(per, p);
    Eigen::VectorXd y(per);
    for (int r = 0; r < per; ++r) {
      block.row(r) = design.regressor(first + r, tau).transpose();
      y(r) = design.response(first + r);
    }
    const Eigen::RowVectorXd col_means = block.colwise().mean();
    out.design.middleRows(first, per) = (block.rowwise() - shrink * col_means) / sd;
    out.response.segment(first, per) = (y.array() - shrink * y.mean()).matrix() / sd;
  }
  out.tau = tau;
  out.sigma2_alpha = cov.sigma2_alpha;
  out.sigma2_eps = cov.sigma2_eps;
  out.log_det_w = design.n_subjects() * (per * std::log(cov.sigma2_eps) + std::log1p(per * gamma));
  return out;
}

WhitenedProblem make_whitened_problem(Eigen::MatrixXd design, Eigen::VectorXd response) {
  if (design.rows() != response.size() || design.cols() < 1)
    throw ArgumentError("design and response sizes do not match");
  WhitenedProblem out;
  out.design = std::move(design);
  out.response = std::move(response);
  return out;
}

WeightedLasso::WeightedLasso(const WhitenedProblem& problem)
    : problem_(problem),
      gram_(problem.design.transpose() * problem.design),
      cross_(problem.design.transpose() * problem.response) {}

double WeightedLasso::kkt_violation(const Eigen::VectorXd& beta, const PenaltyConfig& cfg,
                                    std::span<const int> active) const {
  const auto cols = columns_for(active, problem_.k());
  double worst = 0.0;
  for (int j : cols) {
    // Gradient of 2 log L in beta_j.
    const double g = 2.0 * (cross_(j) - gram_.row(j).dot(beta));
    const double pen = j == 0 ? 0.0 : cfg.lambda1 * cfg.weight(j);
    double v;
    if (pen == 0.0) {
      v = std::abs(g);
    } else if (beta(j) == 0.0) {
      v = std::max(0.0, std::abs(g) - pen);
    } else {
      v = std::abs(g - pen * sign_of(beta(j)));
    }
    worst = std::max(worst, v);
  }
  for (Eigen::Index j = 1; j < beta.size(); ++j)
    if (std::find(cols.begin(), cols.end(), j) == cols.end() && beta(j) != 0.0)
      return std::numeric_limits<double>::infinity();
  return worst;
}

Eigen::VectorXd WeightedLasso::solve(const PenaltyConfig& cfg, std::span<const int> active) const {
  const int p = problem_.k() + 1;
  const auto cols = columns_for(active, problem_.k());
  // Half-penalties: the objective is minimized as ||r||^2 + sum pen_j |beta_j|.
  Eigen::VectorXd half(p);
  for (int j = 0; j < p; ++j) half(j) = j == 0 ? 0.0 : 0.5 * cfg.lambda1 * cfg.weight(j);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad = cross_;  // X' r with r = Y - X beta

  auto try_exact = [&]() -> bool {
    std::vector<int> set;
    for (int j : cols)
      if (j == 0 || beta(j) != 0.0) set.push_back(j);
    const Eigen::Index s = static_cast<Eigen::Index>(set.size());
    Eigen::MatrixXd g(s, s);
    Eigen::VectorXd rhs(s);
    for (Eigen::Index a = 0; a < s; ++a) {
      rhs(a) = cross_(set[a]) - half(set[a]) * sign_of(beta(set[a]));
      for (Eigen::Index b = 0; b < s; ++b) g(a, b) = gram_(set[a], set[b]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (!x.allFinite()) return false;
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(p);
    for (Eigen::Index a = 0; a < s; ++a) {
      const int j = set[a];
      if (j != 0 && half(j) > 0.0 && sign_of(x(a)) != sign_of(beta(j))) return false;
      candidate(j) = x(a);
    }
    if (kkt_violation(candidate, cfg, active) > kKktTol) return false;
    beta = candidate;
    return true;
  };

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (int j : cols) {
      const double gjj = gram_(j, j);
      if (gjj <= 0.0) continue;
      const double old = beta(j);
      const double fresh = soft_threshold(grad(j) + gjj * old, half(j)) / gjj;
      if (fresh != old) {
        grad -= gram_.col(j) * (fresh - old);
        beta(j) = fresh;
      }
    }
    grad = cross_ - gram_ * beta;
    if (kkt_violation(beta, cfg, active) <= kKktTol) return beta;
    if (try_exact()) return beta;
  }
  throw ConvergenceError("coordinate descent did not converge in " +
                             std::to_string(kMaxSweeps) + " sweeps",
                         std::vector<double>(beta.data(), beta.data() + beta.size()));
}

Eigen::VectorXd lasso_subproblem(const WhitenedProblem& problem, const PenaltyConfig& cfg,
                                 std::span<const int> active) {
  cfg.validate();
  return WeightedLasso(problem).solve(cfg, active);
}

namespace {

double penalized(const WhitenedProblem& problem, const Eigen::VectorXd& beta,
                 const PenaltyConfig& cfg) {
  return double_penalized_objective(0.5 * problem.two_loglik(beta), beta, cfg);
}

bool better(double value, int order, double best_value, int best_order) {
  if (value > best_value + kTieTol) return true;
  return std::abs(value - best_value) <= kTieTol && order < best_order;
}

void check_k(const WhitenedProblem& problem, const PenaltyConfig& cfg, int k) {
  cfg.validate();
  if (k != problem.k()) throw ArgumentError("k does not match the problem's number of lags");
  if (k > 30) throw ArgumentError("branch and bound supports at most 30 lags");
  if (cfg.weights.size() != 0 && cfg.weights.size() != k)
    throw ArgumentError("weight vector length does not match k");
}

void flag_big_m(MipSolution& sol, const PenaltyConfig& cfg) {
  const double mass = sol.beta.size() > 1 ? sol.beta.tail(sol.beta.size() - 1).cwiseAbs().sum() : 0.0;
  sol.big_m_binding = mass > 0.99 * cfg.big_m;
}

}  // namespace

MipSolution solve_order_enumeration(const WhitenedProblem& problem, const PenaltyConfig& cfg,
                                    int k) {
  check_k(problem, cfg, k);
  const WeightedLasso lasso(problem);
  MipSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  best.order = k + 1;
  std::vector<int> active;
  for (int q = 0; q <= k; ++q) {
    if (q > 0) active.push_back(q);
    Eigen::VectorXd beta = lasso.solve(cfg, active);
    const double value = penalized(problem, beta, cfg);
    const int order = order_of(beta);
    ++best.node_count;
    if (better(value, order, best.objective, best.order)) {
      best.beta = std::move(beta);
      best.objective = value;
      best.order = order;
    }
  }
  flag_big_m(best, cfg);
  return best;
}

namespace {

struct Node {
  std::uint32_t fixed_zero = 0;  // bit j set: z_j = 0
  std::uint32_t fixed_one = 0;   // bit j set: z_j = 1
  double bound = 0.0;
  double fit = 0.0;              // 2 log L - lambda1 penalty at the relaxation optimum
  Eigen::VectorXd beta;
  std::uint64_t id = 0;
};

bool zero_set_less(std::uint32_t a, std::uint32_t b) {
  // Lexicographic comparison of the sorted index lists.
  while (a != 0 && b != 0) {
    const int ia = std::countr_zero(a);
    const int ib = std::countr_zero(b);
    if (ia != ib) return ia < ib;
    a &= a - 1;
    b &= b - 1;
  }
  return a == 0 && b != 0;
}

struct NodeOrder {
  bool operator()(const Node& x, const Node& y) const {
    // priority_queue pops the "largest": highest bound first.
    if (x.bound != y.bound) return x.bound < y.bound;
    if (x.fixed_zero != y.fixed_zero) return zero_set_less(y.fixed_zero, x.fixed_zero);
    return x.id > y.id;
  }
};

std::string index_list(std::uint32_t mask) {
  std::string s = "{";
  bool first = true;
  for (int j = 1; j < 32; ++j)
    if (mask & (1u << j)) {
      s += (first ? "" : ",") + std::to_string(j);
      first = false;
    }
  return s + "}";
}

}  // namespace

MipSolution solve_branch_and_bound(const WhitenedProblem& problem, const PenaltyConfig& cfg, int k,
                                   const SolverOptions& options) {
  check_k(problem, cfg, k);
  const WeightedLasso lasso(problem);
  const auto start = std::chrono::steady_clock::now();

  MipSolution incumbent;
  incumbent.objective = -std::numeric_limits<double>::infinity();
  incumbent.order = k + 1;
  std::size_t nodes = 0;
  std::uint64_t next_id = 0;

  auto l1_fit = [&](const Eigen::VectorXd& beta) {
    double pen = 0.0;
    for (int j = 1; j <= k; ++j) pen += cfg.weight(j) * std::abs(beta(j));
    return problem.two_loglik(beta) - cfg.lambda1 * pen;
  };

  auto offer = [&](const Node& node) {
    const int order = order_of(node.beta);
    const double value = node.fit - cfg.lambda2 * order;
    if (better(value, order, incumbent.objective, incumbent.order)) {
      incumbent.beta = node.beta;
      incumbent.objective = value;
      incumbent.order = order;
    }
  };

  auto trace = [&](const Node& node) {
    if (!options.trace) return;
    *options.trace << "node " << node.id << " bound " << format_number(node.bound) << " zero "
                   << index_list(node.fixed_zero) << " one " << index_list(node.fixed_one)
                   << " incumbent " << format_number(incumbent.objective) << '\n';
  };

  auto make_node = [&](std::uint32_t zero, std::uint32_t one, const Node* same_relaxation) {
    Node node;
    node.fixed_zero = zero;
    node.fixed_one = one;
    node.id = next_id++;
    if (same_relaxation) {
      node.beta = same_relaxation->beta;
      node.fit = same_relaxation->fit;
    } else {
      const int first_zero = zero == 0 ? k + 1 : std::countr_zero(zero);
      std::vector<int> active;
      for (int j = 1; j < first_zero; ++j) active.push_back(j);
      node.beta = lasso.solve(cfg, active);
      node.fit = l1_fit(node.beta);
    }
    node.bound = node.fit - cfg.lambda2 * std::popcount(one);
    ++nodes;
    offer(node);
    trace(node);
    return node;
  };

  auto finish = [&](bool optimal) {
    incumbent.node_count = nodes;
    incumbent.optimal = optimal;
    flag_big_m(incumbent, cfg);
    return incumbent;
  };

  const std::uint32_t all_lags = k == 0 ? 0u : (((1u << k) - 1u) << 1);
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  open.push(make_node(0, 0, nullptr));

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.bound <= incumbent.objective + kTieTol) continue;

    // Branch on the deepest unfixed indicator that the relaxation needs.
    const int order = order_of(node.beta);
    int branch = 0;
    for (int j = order; j >= 1; --j) {
      const std::uint32_t bit = 1u << j;
      if (!(node.fixed_one & bit) && !(node.fixed_zero & bit)) {
        branch = j;
        break;
      }
    }
    if (branch == 0) continue;  // relaxation is feasible with its own bound

    if (options.time_limit_seconds) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() > *options.time_limit_seconds) return finish(false);
    }
    if (nodes + 2 > options.node_budget)
      throw NodeBudgetError("branch-and-bound node budget of " +
                                std::to_string(options.node_budget) + " exhausted",
                            finish(false));

    // z_branch = 0 closes every later indicator as well.
    const std::uint32_t closure = all_lags & ~((1u << branch) - 1u);
    Node off = make_node(node.fixed_zero | closure, node.fixed_one & ~closure, nullptr);
    Node on = make_node(node.fixed_zero, node.fixed_one | (1u << branch), &node);
    if (off.bound > incumbent.objective + kTieTol) open.push(std::move(off));
    if (on.bound > incumbent.objective + kTieTol) open.push(std::move(on));
  }
  return finish(true);
}

}  // namespace mutare
