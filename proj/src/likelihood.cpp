#include "mutare/likelihood.hpp"

#include "mutare/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

namespace mutare {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
constexpr double kRankTol = 1e-10;
constexpr std::size_t kChunk = 32;
constexpr double kLogRatioLow = -14.0;
constexpr double kLogRatioHigh = 14.0;
constexpr std::uintmax_t kBrentMaxIter = 200;

double rank_one_coefficient(double gamma, int rows) { return gamma / (1.0 + rows * gamma); }

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
  Eigen::MatrixXd out(cols.size(), cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(cols[a], cols[b]);
  return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& cols) {
  Eigen::VectorXd out(cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a) out(a) = v(cols[a]);
  return out;
}

[[noreturn]] void throw_singular(const Eigen::MatrixXd& scaled, const std::vector<int>& cols,
                                 const std::vector<int>& zero_cols) {
  std::vector<int> bad = zero_cols;
  if (bad.empty()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(kRankTol);
    const auto rank = qr.rank();
    for (Eigen::Index i = rank; i < scaled.cols(); ++i)
      bad.push_back(cols[qr.colsPermutation().indices()(i)]);
    std::sort(bad.begin(), bad.end());
  }
  std::string list;
  for (int j : bad) list += (list.empty() ? "" : ", ") + std::to_string(j);
  throw SingularityError("rank-deficient whitened design; dependent columns: " + list, bad);
}

/// Solves P x = q for symmetric positive definite P after unit-diagonal scaling.
/// `cols` names the coefficient index of each column for error messages.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                          const std::vector<int>& cols, Eigen::MatrixXd* inverse = nullptr) {
  const Eigen::Index dim = p.rows();
  Eigen::VectorXd scale(dim);
  std::vector<int> zero_cols;
  const double max_diag = p.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (!(p(j, j) > 1e-14 * std::max(max_diag, 1.0))) zero_cols.push_back(cols[j]);
    scale(j) = p(j, j) > 0 ? 1.0 / std::sqrt(p(j, j)) : 1.0;
  }
  const Eigen::MatrixXd scaled = scale.asDiagonal() * p * scale.asDiagonal();
  if (!zero_cols.empty()) throw_singular(scaled, cols, zero_cols);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > kRankTol))
    throw_singular(scaled, cols, {});
  const Eigen::VectorXd x = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * q);
  if (inverse) {
    *inverse = scale.asDiagonal() *
               ldlt.solve(Eigen::MatrixXd::Identity(dim, dim)) * scale.asDiagonal();
  }
  return x;
}

struct GlsEval {
  Eigen::VectorXd beta_sub;
  double quad = 0.0;  // (Y - H beta)' V^-1 (Y - H beta), V = W / sigma2_eps
};

GlsEval gls_at_ratio(const DesignStats& s, const std::vector<int>& cols, double gamma) {
  const double c = rank_one_coefficient(gamma, s.rows_per_subject);
  const Eigen::MatrixXd p = submatrix(s.gram, cols) - c * submatrix(s.subject_outer, cols);
  const Eigen::VectorXd q = subvector(s.cross, cols) - c * subvector(s.subject_cross, cols);
  GlsEval out;
  out.beta_sub = solve_spd(p, q, cols);
  out.quad = std::max(0.0, (s.yy - c * s.subject_yy) - q.dot(out.beta_sub));
  return out;
}

Eigen::VectorXd expand(const Eigen::VectorXd& sub, const std::vector<int>& cols, int p) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
  for (std::size_t a = 0; a < cols.size(); ++a) full(cols[a]) = sub(a);
  return full;
}

void check_support(const Support& support, int k) {
  for (std::size_t a = 0; a < support.size(); ++a) {
    if (support[a] < 1 || support[a] > k)
      throw ArgumentError("support index " + std::to_string(support[a]) + " outside 1.." +
                          std::to_string(k));
    if (a > 0 && support[a] <= support[a - 1])
      throw ArgumentError("support must be strictly increasing");
  }
}

std::vector<double> sorted_candidates(std::span<const double> candidates) {
  std::vector<double> c(candidates.begin(), candidates.end());
  if (c.empty()) throw ArgumentError("no candidate thresholds");
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

ProfiledFit assemble(const LaggedDesign& design, double tau, const Support& support,
                     const VarianceOptions& options, std::size_t grid, std::size_t skipped) {
  const VarianceFit vf =
      fit_variance_components(design.stats(tau), support, options, design.response_variance());
  ProfiledFit out;
  out.beta_hat = vf.beta;
  out.tau_hat = tau;
  out.sigma2_alpha_hat = vf.sigma2_alpha;
  out.sigma2_eps_hat = vf.sigma2_eps;
  out.loglik = vf.loglik;
  out.support = support;
  out.grid_size = grid;
  out.skipped = skipped;
  return out;
}

std::size_t best_index(const std::vector<double>& loglik, const std::vector<char>& ok) {
  std::size_t best = loglik.size();
  for (std::size_t i = 0; i < loglik.size(); ++i)
    if (ok[i] && (best == loglik.size() || loglik[i] > loglik[best])) best = i;
  if (best == loglik.size())
    throw SingularityError("no candidate threshold gives a full-rank design", {});
  return best;
}

}  // namespace

void CovarianceSpec::validate() const {
  if (!(sigma2_alpha >= 0.0) || !std::isfinite(sigma2_alpha))
    throw ArgumentError("sigma2_alpha must be nonnegative");
  if (!(sigma2_eps > 0.0) || !std::isfinite(sigma2_eps))
    throw ArgumentError("sigma2_eps must be positive");
}

Support full_support(int k) {
  Support s(std::max(k, 0));
  for (int j = 0; j < k; ++j) s[j] = j + 1;
  return s;
}

std::vector<int> design_columns(const Support& support) {
  std::vector<int> cols{0};
  cols.insert(cols.end(), support.begin(), support.end());
  return cols;
}

double SupportCovariance::standard_error(int j) const {
  for (std::size_t a = 0; a < columns.size(); ++a)
    if (columns[a] == j) return std::sqrt(cov(a, a));
  return std::numeric_limits<double>::quiet_NaN();
}

double log_likelihood(const LaggedDesign& design, const MutareParams& params) {
  params.validate();
  if (params.k() != design.k())
    throw ArgumentError("parameter order does not match the design order");
  const int per = design.rows_per_subject();
  const double s2a = params.sigma2_alpha;
  const double s2e = params.sigma2_eps;
  const double c = s2a / (s2e + per * s2a);
  const double logdet = per * std::log(s2e) + std::log1p(per * s2a / s2e);
  double total = 0.0;
  for (int i = 0; i < design.n_subjects(); ++i) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (int r = i * per; r < (i + 1) * per; ++r) {
      const double resid =
          design.response(r) - conditional_mean(params, 0.0, design.history(r));
      sum += resid;
      sumsq += resid * resid;
    }
    total += logdet + (sumsq - c * sum * sum) / s2e;
  }
  const double ll = -0.5 * (design.n_rows() * kLog2Pi + total);
  if (!std::isfinite(ll)) throw NumericError("log likelihood is not finite");
  return ll;
}

double log_likelihood(const PanelSeries& panel, const MutareParams& params) {
  params.validate();
  return log_likelihood(LaggedDesign(panel, params.k()), params);
}

double log_likelihood(const DesignStats& s, const Eigen::VectorXd& beta,
                      const CovarianceSpec& cov) {
  cov.validate();
  const double gamma = cov.ratio();
  const double c = rank_one_coefficient(gamma, s.rows_per_subject);
  const Eigen::MatrixXd p = s.gram - c * s.subject_outer;
  const Eigen::VectorXd q = s.cross - c * s.subject_cross;
  const double quad = (s.yy - c * s.subject_yy) - 2.0 * q.dot(beta) + beta.dot(p * beta);
  const int n_obs = s.n_obs();
  const double ll = -0.5 * (n_obs * kLog2Pi + n_obs * std::log(cov.sigma2_eps) +
                            s.n_subjects * std::log1p(s.rows_per_subject * gamma) +
                            quad / cov.sigma2_eps);
  if (!std::isfinite(ll)) throw NumericError("log likelihood is not finite");
  return ll;
}

Eigen::VectorXd gls_beta(const DesignStats& stats, const CovarianceSpec& cov,
                         const Support& support) {
  cov.validate();
  const int p = static_cast<int>(stats.gram.rows());
  check_support(support, p - 1);
  const auto cols = design_columns(support);
  return expand(gls_at_ratio(stats, cols, cov.ratio()).beta_sub, cols, p);
}

Eigen::VectorXd gls_beta(const LaggedDesign& design, double tau, const CovarianceSpec& cov,
                         const Support& support) {
  return gls_beta(design.stats(tau), cov, support);
}

Eigen::VectorXd gls_beta(const PanelSeries& panel, int k, double tau,
                         const CovarianceSpec& cov, const Support& support) {
  return gls_beta(LaggedDesign(panel, k), tau, cov, support);
}

std::vector<double> candidate_thresholds(std::span<const double> values, double trim) {
  if (!(trim >= 0.0 && trim < 0.5)) throw ArgumentError("trim must lie in [0, 0.5)");
  if (values.empty()) throw ArgumentError("no values to build thresholds from");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double prob) {
    const double h = (v.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
  };
  const double lo = quantile(trim);
  const double hi = quantile(1.0 - trim);
  std::vector<double> out;
  for (double x : v)
    if (x >= lo && x <= hi && (out.empty() || x != out.back())) out.push_back(x);
  if (out.empty()) throw ArgumentError("no candidate thresholds left after trimming");
  return out;
}

std::vector<double> candidate_thresholds(const PanelSeries& panel, double trim) {
  const auto& v = panel.values();
  return candidate_thresholds(std::span<const double>(v.data(), v.size()), trim);
}

VarianceFit fit_variance_components(const DesignStats& stats, const Support& support,
                                    const VarianceOptions& options, double response_variance) {
  const int p = static_cast<int>(stats.gram.rows());
  check_support(support, p - 1);
  const auto cols = design_columns(support);
  const int n_obs = stats.n_obs();
  const int n = stats.n_subjects;
  const int per = stats.rows_per_subject;
  const double cap = std::max(10.0 * response_variance, kMinSigma2Eps);
  if (options.fix_eps && !(*options.fix_eps > 0.0))
    throw ArgumentError("fixed sigma2_eps must be positive");

  struct Point {
    double gamma;
    double loglik;
    double sigma2_eps;
    Eigen::VectorXd beta_sub;
  };
  auto evaluate = [&](double gamma) {
    GlsEval g = gls_at_ratio(stats, cols, gamma);
    const double s2e =
        options.fix_eps ? *options.fix_eps : std::clamp(g.quad / n_obs, kMinSigma2Eps, cap);
    const double ll = -0.5 * (n_obs * kLog2Pi + n_obs * std::log(s2e) +
                              n * std::log1p(per * gamma) + g.quad / s2e);
    return Point{gamma, ll, s2e, std::move(g.beta_sub)};
  };

  Point best = evaluate(0.0);
  if (!options.pin_alpha_zero) {
    const double high =
        options.fix_eps ? std::log(cap / *options.fix_eps) : kLogRatioHigh;
    if (high > kLogRatioLow) {
      const int steps = std::max(2, static_cast<int>(std::ceil(high - kLogRatioLow)));
      std::vector<double> grid(steps + 1);
      int arg = -1;
      double arg_ll = -std::numeric_limits<double>::infinity();
      for (int g = 0; g <= steps; ++g) {
        grid[g] = kLogRatioLow + (high - kLogRatioLow) * g / steps;
        const double ll = evaluate(std::exp(grid[g])).loglik;
        if (ll > arg_ll) {
          arg_ll = ll;
          arg = g;
        }
      }
      const double a = grid[std::max(arg - 1, 0)];
      const double b = grid[std::min(arg + 1, steps)];
      std::uintmax_t iters = kBrentMaxIter;
      const auto [u, neg] = boost::math::tools::brent_find_minima(
          [&](double u) { return -evaluate(std::exp(u)).loglik; }, a, b,
          std::numeric_limits<double>::digits / 2, iters);
      (void)neg;
      Point refined = evaluate(std::exp(u));
      if (iters >= kBrentMaxIter) {
        throw ConvergenceError("variance component search did not converge",
                               {refined.gamma * refined.sigma2_eps, refined.sigma2_eps});
      }
      if (refined.loglik > best.loglik) best = std::move(refined);
    }
  }
  if (!std::isfinite(best.loglik)) throw NumericError("profiled log likelihood is not finite");

  VarianceFit out;
  out.sigma2_eps = best.sigma2_eps;
  out.sigma2_alpha = std::min(best.gamma * best.sigma2_eps, cap);
  out.loglik = best.loglik;
  out.beta = expand(best.beta_sub, cols, p);
  return out;
}

std::pair<double, double> estimate_variance_components(const PanelSeries& panel, double tau,
                                                       int k, std::optional<double> fix_eps) {
  const LaggedDesign design(panel, k);
  VarianceOptions options;
  options.fix_eps = fix_eps;
  options.pin_alpha_zero = panel.n_subjects() == 1;
  const auto vf = fit_variance_components(design.stats(tau), full_support(k), options,
                                          design.response_variance());
  return {vf.sigma2_alpha, vf.sigma2_eps};
}

ProfiledFit profile_tau(const LaggedDesign& design, std::span<const double> candidates,
                        const Support& support, const VarianceOptions& options) {
  check_support(support, design.k());
  const auto cand = sorted_candidates(candidates);
  if (support.empty()) return assemble(design, cand.front(), support, options, cand.size(), 0);

  const ThresholdEvents events(design);
  const std::size_t count = cand.size();
  const long chunks = static_cast<long>((count + kChunk - 1) / kChunk);
  std::vector<double> loglik(count, -std::numeric_limits<double>::infinity());
  std::vector<char> ok(count, 0);
  std::vector<std::exception_ptr> errors(chunks);
  const double s2 = design.response_variance();

#pragma omp parallel for schedule(dynamic, 1)
  for (long c = 0; c < chunks; ++c) {
    try {
      const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
      const std::size_t end = std::min(count, begin + kChunk);
      StatsSweep sweep(design, events, cand[begin]);
      for (std::size_t idx = begin; idx < end; ++idx) {
        sweep.advance_to(cand[idx]);
        try {
          loglik[idx] = fit_variance_components(sweep.stats(), support, options, s2).loglik;
          ok[idx] = 1;
        } catch (const SingularityError&) {
        }
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::size_t best = best_index(loglik, ok);
  const std::size_t skipped = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  return assemble(design, cand[best], support, options, count, skipped);
}

ProfiledFit profile_tau_reference(const LaggedDesign& design, std::span<const double> candidates,
                                  const Support& support, const VarianceOptions& options) {
  check_support(support, design.k());
  const auto cand = sorted_candidates(candidates);
  std::vector<double> loglik(cand.size(), -std::numeric_limits<double>::infinity());
  std::vector<char> ok(cand.size(), 0);
  for (std::size_t idx = 0; idx < cand.size(); ++idx) {
    try {
      loglik[idx] = fit_variance_components(design.stats(cand[idx]), support, options,
                                            design.response_variance())
                        .loglik;
      ok[idx] = 1;
    } catch (const SingularityError&) {
    }
  }
  const std::size_t best = best_index(loglik, ok);
  const std::size_t skipped = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  return assemble(design, cand[best], support, options, cand.size(), skipped);
}

ProfiledFit profile_tau(const PanelSeries& panel, int k, double trim) {
  const LaggedDesign design(panel, k);
  VarianceOptions options;
  options.pin_alpha_zero = panel.n_subjects() == 1;
  return profile_tau(design, candidate_thresholds(panel, trim), full_support(k), options);
}

SupportCovariance asymptotic_covariance(const DesignStats& stats, const CovarianceSpec& cov,
                                        const Support& support) {
  cov.validate();
  const int p = static_cast<int>(stats.gram.rows());
  check_support(support, p - 1);
  const auto cols = design_columns(support);
  const double c = rank_one_coefficient(cov.ratio(), stats.rows_per_subject);
  const Eigen::MatrixXd info =
      submatrix(stats.gram, cols) - c * submatrix(stats.subject_outer, cols);
  Eigen::MatrixXd inverse;
  solve_spd(info, Eigen::VectorXd::Zero(cols.size()), cols, &inverse);
  SupportCovariance out;
  out.columns = cols;
  out.cov = cov.sigma2_eps * inverse;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

SupportCovariance asymptotic_covariance(const LaggedDesign& design, const ProfiledFit& fit) {
  return asymptotic_covariance(design.stats(fit.tau_hat),
                               CovarianceSpec{fit.sigma2_alpha_hat, fit.sigma2_eps_hat},
                               fit.support);
}

SupportCovariance asymptotic_covariance(const PanelSeries& panel, const ProfiledFit& fit) {
  return asymptotic_covariance(LaggedDesign(panel, static_cast<int>(fit.beta_hat.size()) - 1),
                               fit);
}

}  // namespace mutare
