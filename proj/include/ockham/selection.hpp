#pragma once

// Choosing one model from a finite set: maximum evidence, maximum posterior
// model probability, zero-one risk by simulation, the polynomial-degree
// family, and the scalar-observation crossover between a stiff and a flexible
// model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ockham/decomposition.hpp"
#include "ockham/errors.hpp"
#include "ockham/evidence.hpp"
#include "ockham/generic_model.hpp"
#include "ockham/glm.hpp"
#include "ockham/random.hpp"

namespace ockham {

using ModelMember = std::variant<GaussianLinearSpec, GenericModelSpec>;

struct ModelSet {
  std::vector<ModelMember> members;
  /// Prior model probabilities w_i.
  std::vector<double> weights;

  std::size_t size() const noexcept { return members.size(); }
};

inline constexpr double kWeightSumTolerance = 1e-12;

inline void validate(const ModelSet& set) {
  if (set.members.empty()) throw InvalidArgument("model set must have at least one member");
  if (set.weights.size() != set.members.size()) {
    throw InvalidArgument("model set needs one weight per member");
  }
  double total = 0.0;
  for (const double w : set.weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("model weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw InvalidArgument("model weights must sum to 1");
  }
}

/// Uniform weights unless `weights` is given.
inline ModelSet make_model_set(std::vector<ModelMember> members,
                               std::optional<std::vector<double>> weights = std::nullopt) {
  ModelSet set;
  const std::size_t m = members.size();
  set.members = std::move(members);
  set.weights = weights ? std::move(*weights)
                        : std::vector<double>(m, m == 0 ? 0.0 : 1.0 / static_cast<double>(m));
  validate(set);
  return set;
}

/// How evidence is obtained for black-box members. Gaussian linear members
/// always use the closed form.
struct EvidenceConfig {
  Estimator estimator = Estimator::Laplace;
  int grid_points = 2001;
  int prior_grid_points = 2001;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

inline EvidenceDecomposition member_evidence(const ModelMember& member, const ObservationSet& obs,
                                             const EvidenceConfig& config = {}) {
  if (const auto* glm = std::get_if<GaussianLinearSpec>(&member)) {
    return glm_log_evidence(*glm, obs);
  }
  const auto& model = std::get<GenericModelSpec>(member);
  const NormalizedPrior prior = normalize_prior(model, config.prior_grid_points);
  switch (config.estimator) {
    case Estimator::Quadrature: return evidence_quadrature(model, prior, config.grid_points);
    case Estimator::ImportanceSampling:
      return evidence_importance(model, prior, config.samples, config.seed);
    case Estimator::Laplace:
    case Estimator::GlmExact: return evidence_laplace(model, prior);
  }
  return evidence_laplace(model, prior);
}

enum class SelectionRule { MaxEvidence, MaxPosterior };

inline std::string_view to_string(SelectionRule r) noexcept {
  return r == SelectionRule::MaxEvidence ? "max-evidence" : "max-posterior";
}

inline SelectionRule parse_rule(std::string_view name) {
  if (name == "max-evidence") return SelectionRule::MaxEvidence;
  if (name == "max-posterior") return SelectionRule::MaxPosterior;
  throw InvalidArgument("unknown selection rule '" + std::string(name) + "'");
}

struct SelectionOutcome {
  std::size_t chosen = 0;
  std::vector<double> log_scores;
  SelectionRule rule = SelectionRule::MaxEvidence;
  bool tie_broken = false;
  std::vector<EvidenceDecomposition> evidence;
};

inline constexpr double kTieTolerance = 1e-12;

struct ArgmaxResult {
  std::size_t index = 0;
  bool tie_broken = false;
};

/// Lowest index among the scores within 1e-12 of the maximum.
inline ArgmaxResult argmax_lowest(const std::vector<double>& scores) {
  if (scores.empty()) throw InvalidArgument("argmax of an empty score list");
  const double best = *std::max_element(scores.begin(), scores.end());
  ArgmaxResult out;
  std::size_t ties = 0;
  for (std::size_t i = scores.size(); i-- > 0;) {
    if (scores[i] >= best - kTieTolerance) {
      out.index = i;
      ++ties;
    }
  }
  out.tie_broken = ties > 1;
  return out;
}

inline SelectionOutcome select_from_evidence(const ModelSet& set,
                                             std::vector<EvidenceDecomposition> evidence,
                                             SelectionRule rule) {
  SelectionOutcome out;
  out.rule = rule;
  out.log_scores.reserve(evidence.size());
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    double score = evidence[i].log_evidence;
    if (rule == SelectionRule::MaxPosterior) score += std::log(set.weights[i]);
    out.log_scores.push_back(score);
  }
  const ArgmaxResult best = argmax_lowest(out.log_scores);
  out.chosen = best.index;
  out.tie_broken = best.tie_broken;
  out.evidence = std::move(evidence);
  return out;
}

inline std::vector<EvidenceDecomposition> model_set_evidence(const ModelSet& set,
                                                             const ObservationSet& obs,
                                                             const EvidenceConfig& config = {}) {
  std::vector<EvidenceDecomposition> evidence;
  evidence.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    try {
      evidence.push_back(member_evidence(set.members[i], obs, config));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "evidence for model " << i << " failed: " << e.what();
      throw SelectionFailure(msg.str(), i);
    }
  }
  return evidence;
}

/// i* = argmax log E_i (max-evidence) or argmax log w_i + log E_i
/// (max-posterior, the Bayes rule under zero-one loss).
inline SelectionOutcome select(const ModelSet& set, const ObservationSet& obs, SelectionRule rule,
                               const EvidenceConfig& config = {}) {
  validate(set);
  return select_from_evidence(set, model_set_evidence(set, obs, config), rule);
}

// ---------------------------------------------------------------------------
// Zero-one risk by simulation

struct Replicate {
  std::size_t true_index = 0;
  ObservationSet obs;
};

/// Draws the true model index and a data set from a replicate seed.
using ReplicateGenerator = std::function<Replicate(const ModelSet&, std::uint64_t seed)>;

namespace detail {

inline std::size_t draw_index(const std::vector<double>& weights, CounterRng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

inline ObservationSet simulate_from_prior(const GaussianLinearSpec& spec, CounterRng& rng) {
  const Eigen::VectorXd theta = standard_normal_vector(rng, spec.d()) / spec.lambda;
  const Eigen::VectorXd noise = standard_normal_vector(rng, spec.n()) * spec.sigma;
  return ObservationSet{spec.G * theta + noise, std::nullopt};
}

}  // namespace detail

/// j ~ weights, θ ~ π_j, y = G_jθ + σ_jε. Gaussian linear members only.
inline ReplicateGenerator prior_predictive_generator() {
  return [](const ModelSet& set, std::uint64_t seed) {
    CounterRng rng(seed);
    const std::size_t j = detail::draw_index(set.weights, rng);
    const auto* spec = std::get_if<GaussianLinearSpec>(&set.members[j]);
    if (spec == nullptr) {
      throw InvalidArgument("prior-predictive simulation needs Gaussian linear members");
    }
    return Replicate{j, detail::simulate_from_prior(*spec, rng)};
  };
}

/// Always simulates from member `index`.
inline ReplicateGenerator fixed_truth_generator(std::size_t index) {
  return [index](const ModelSet& set, std::uint64_t seed) {
    CounterRng rng(seed);
    const auto* spec = std::get_if<GaussianLinearSpec>(&set.members.at(index));
    if (spec == nullptr) {
      throw InvalidArgument("prior-predictive simulation needs Gaussian linear members");
    }
    return Replicate{index, detail::simulate_from_prior(*spec, rng)};
  };
}

struct RiskReport {
  std::vector<std::string> rule_names;
  /// Mean zero-one loss per rule.
  std::vector<double> risks;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  /// Row j, column r: risk of rule r over replicates whose true model is j
  /// (NaN when model j was never drawn).
  Eigen::MatrixXd per_true_model;
  std::vector<std::size_t> true_counts;
  /// Chosen index per replicate and rule, row-major by replicate.
  std::vector<std::vector<std::size_t>> choices;
};

/// Replicate r uses seed derive_seed(seed, r), so replicates can run in any
/// order with identical results.
inline RiskReport risk_mc(const ModelSet& set, const ReplicateGenerator& generator,
                          std::size_t reps, const std::vector<SelectionRule>& rules,
                          std::uint64_t seed, const EvidenceConfig& config = {}) {
  validate(set);
  if (reps < 1) throw InvalidArgument("risk estimation needs at least one replicate");
  if (rules.empty()) throw InvalidArgument("risk estimation needs at least one rule");

  const std::size_t m = set.size();
  RiskReport out;
  out.reps = reps;
  out.seed = seed;
  for (const SelectionRule r : rules) out.rule_names.emplace_back(to_string(r));
  std::vector<double> losses(rules.size(), 0.0);
  Eigen::MatrixXd per_true = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                   static_cast<Eigen::Index>(rules.size()));
  out.true_counts.assign(m, 0);

  for (std::size_t rep = 0; rep < reps; ++rep) {
    try {
      const Replicate draw = generator(set, derive_seed(seed, rep));
      if (draw.true_index >= m) throw InvalidArgument("generator returned an out-of-range model index");
      const auto evidence = model_set_evidence(set, draw.obs, config);
      ++out.true_counts[draw.true_index];
      std::vector<std::size_t> picked;
      for (std::size_t r = 0; r < rules.size(); ++r) {
        const SelectionOutcome sel = select_from_evidence(set, evidence, rules[r]);
        const double loss = sel.chosen == draw.true_index ? 0.0 : 1.0;
        losses[r] += loss;
        per_true(static_cast<Eigen::Index>(draw.true_index), static_cast<Eigen::Index>(r)) += loss;
        picked.push_back(sel.chosen);
      }
      out.choices.push_back(std::move(picked));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "replicate " << rep << " failed: " << e.what();
      throw ReplicateFailure(msg.str(), rep);
    }
  }

  for (const double l : losses) out.risks.push_back(l / static_cast<double>(reps));
  for (std::size_t j = 0; j < m; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    if (out.true_counts[j] == 0) {
      per_true.row(row).setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      per_true.row(row) /= static_cast<double>(out.true_counts[j]);
    }
  }
  out.per_true_model = std::move(per_true);
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial regression family

/// Columns x^k / scale^k for k = 0..degree.
inline Eigen::MatrixXd polynomial_design(const Eigen::VectorXd& x, unsigned degree, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("polynomial column scale must be positive");
  const Eigen::VectorXd u = x / scale;
  Eigen::MatrixXd G(x.size(), static_cast<Eigen::Index>(degree) + 1);
  G.col(0).setOnes();
  for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(degree); ++k) {
    G.col(k) = G.col(k - 1).cwiseProduct(u);
  }
  if (!G.allFinite()) {
    std::ostringstream msg;
    msg << "polynomial design of degree " << degree << " has non-finite entries";
    throw NumericFailure(msg.str());
  }
  return G;
}

struct PolynomialFamily {
  ModelSet set;
  std::vector<unsigned> degrees;
  /// Column k of every design is divided by scale^k; scale = sd(x).
  double scale = 1.0;
  std::vector<std::string> warnings;
};

/// Sample standard deviation, or 1 when it is zero or undefined.
inline double column_scale(const Eigen::VectorXd& x) {
  if (x.size() < 2) return 1.0;
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

inline PolynomialFamily polynomial_family(const Eigen::VectorXd& x,
                                          const std::vector<unsigned>& degrees, double sigma,
                                          double lambda) {
  if (x.size() < 1) throw InvalidArgument("polynomial family needs at least one covariate value");
  if (!x.allFinite()) throw InvalidArgument("covariates must be finite");
  if (degrees.empty()) throw InvalidArgument("polynomial family needs at least one degree");
  std::vector<unsigned> sorted = degrees;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("polynomial degrees must be distinct");
  }

  PolynomialFamily fam;
  fam.degrees = degrees;
  fam.scale = column_scale(x);
  if (fam.scale == 1.0 && x.size() >= 2 && (x.array() == x(0)).all()) {
    fam.warnings.emplace_back("covariate has zero spread; columns left unscaled");
  }
  if (static_cast<Eigen::Index>(sorted.back()) + 1 > x.size()) {
    fam.warnings.emplace_back("highest degree has more coefficients than observations");
  }
  std::vector<ModelMember> members;
  for (const unsigned p : degrees) {
    GaussianLinearSpec spec{polynomial_design(x, p, fam.scale), sigma, lambda};
    validate(spec);
    members.emplace_back(std::move(spec));
  }
  fam.set = make_model_set(std::move(members));
  return fam;
}

// ---------------------------------------------------------------------------
// Degree selection for prediction

struct SweetSpotReport {
  std::vector<unsigned> degrees;
  std::vector<std::size_t> chosen_counts;
  std::vector<double> chosen_frequency;
  unsigned modal_degree = 0;
  /// Mean out-of-sample RMSE per candidate degree.
  std::vector<double> mean_rmse;
  /// Mean of rmse(chosen)/rmse(best) − 1 over replicates.
  double mean_relative_regret = 0.0;
  double mean_chosen_rmse = 0.0;
  double mean_best_rmse = 0.0;
  std::size_t reps = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
};

/// Per replicate: x ~ N(0, 1) of size n, coefficients of the true degree
/// drawn from its prior, y simulated, degree chosen by maximum evidence, and
/// every candidate's MAP fit scored by RMSE on a fresh test set of size 10n.
inline SweetSpotReport sweet_spot_experiment(unsigned true_degree,
                                             const std::vector<unsigned>& degrees, std::size_t n,
                                             double sigma, double lambda, std::size_t reps,
                                             std::uint64_t seed) {
  if (std::find(degrees.begin(), degrees.end(), true_degree) == degrees.end()) {
    throw InvalidArgument("true degree must be one of the candidate degrees");
  }
  if (n < 1 || reps < 1) throw InvalidArgument("sample size and replicate count must be positive");

  const std::size_t k = degrees.size();
  const std::size_t test_n = 10 * n;
  SweetSpotReport out;
  out.degrees = degrees;
  out.chosen_counts.assign(k, 0);
  out.mean_rmse.assign(k, 0.0);
  out.reps = reps;
  out.test_size = test_n;
  out.seed = seed;

  for (std::size_t rep = 0; rep < reps; ++rep) {
    try {
      CounterRng rng(seed, rep);
      const Eigen::VectorXd x = standard_normal_vector(rng, static_cast<Eigen::Index>(n));
      const PolynomialFamily fam = polynomial_family(x, degrees, sigma, lambda);
      const Eigen::VectorXd theta =
          standard_normal_vector(rng, static_cast<Eigen::Index>(true_degree) + 1) / lambda;
      const Eigen::VectorXd y = polynomial_design(x, true_degree, fam.scale) * theta +
                                sigma * standard_normal_vector(rng, static_cast<Eigen::Index>(n));
      const ObservationSet obs{y, x};

      const SelectionOutcome sel = select(fam.set, obs, SelectionRule::MaxEvidence);
      ++out.chosen_counts[sel.chosen];

      const Eigen::VectorXd x_test = standard_normal_vector(rng, static_cast<Eigen::Index>(test_n));
      const Eigen::VectorXd y_test =
          polynomial_design(x_test, true_degree, fam.scale) * theta +
          sigma * standard_normal_vector(rng, static_cast<Eigen::Index>(test_n));

      std::vector<double> rmse(k);
      for (std::size_t i = 0; i < k; ++i) {
        const Eigen::VectorXd pred =
            polynomial_design(x_test, degrees[i], fam.scale) * sel.evidence[i].theta_hat;
        rmse[i] = std::sqrt((y_test - pred).squaredNorm() / static_cast<double>(test_n));
        out.mean_rmse[i] += rmse[i];
      }
      const double best = *std::min_element(rmse.begin(), rmse.end());
      out.mean_relative_regret += rmse[sel.chosen] / best - 1.0;
      out.mean_chosen_rmse += rmse[sel.chosen];
      out.mean_best_rmse += best;
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "replicate " << rep << " failed: " << e.what();
      throw ReplicateFailure(msg.str(), rep);
    }
  }

  const double r = static_cast<double>(reps);
  for (std::size_t i = 0; i < k; ++i) {
    out.mean_rmse[i] /= r;
    out.chosen_frequency.push_back(static_cast<double>(out.chosen_counts[i]) / r);
  }
  out.mean_relative_regret /= r;
  out.mean_chosen_rmse /= r;
  out.mean_best_rmse /= r;
  const auto modal = std::max_element(out.chosen_counts.begin(), out.chosen_counts.end());
  out.modal_degree = degrees[static_cast<std::size_t>(modal - out.chosen_counts.begin())];
  return out;
}

// ---------------------------------------------------------------------------
// Scalar-observation crossover

struct CrossoverReport {
  std::vector<double> y_grid;
  std::vector<double> log_evidence_simple;
  std::vector<double> log_evidence_complex;
  /// Points where log E_simple = log E_complex, located by bisection.
  std::vector<double> crossovers;
  std::vector<double> residuals;
  double marginal_variance_simple = 0.0;
  double marginal_variance_complex = 0.0;
  /// The grid contains points where each model wins.
  bool simple_wins_somewhere = false;
  bool complex_wins_somewhere = false;
  std::vector<std::string> notes;
};

inline constexpr double kCrossoverResidual = 1e-8;

/// Evaluates both models' log-evidence at each scalar observation on the
/// grid and brackets every sign change of log E_simple − log E_complex.
inline CrossoverReport mackay_crossover(const GaussianLinearSpec& simple,
                                        const GaussianLinearSpec& complex,
                                        const std::vector<double>& y_grid) {
  validate(simple);
  validate(complex);
  if (simple.n() != 1 || complex.n() != 1) {
    throw InvalidArgument("crossover demonstration needs scalar observations (n = 1)");
  }
  if (y_grid.size() < 2) throw InvalidArgument("crossover grid needs at least two points");
  for (std::size_t i = 1; i < y_grid.size(); ++i) {
    if (!(y_grid[i] > y_grid[i - 1])) throw InvalidArgument("crossover grid must be increasing");
  }

  const auto log_e = [](const GaussianLinearSpec& spec, double y) {
    return glm_log_evidence(spec, ObservationSet{Eigen::VectorXd::Constant(1, y), std::nullopt})
        .log_evidence;
  };
  const auto diff = [&](double y) { return log_e(simple, y) - log_e(complex, y); };
  const auto marginal_variance = [](const GaussianLinearSpec& spec) {
    return spec.sigma * spec.sigma + spec.G.row(0).squaredNorm() / (spec.lambda * spec.lambda);
  };

  CrossoverReport out;
  out.y_grid = y_grid;
  out.marginal_variance_simple = marginal_variance(simple);
  out.marginal_variance_complex = marginal_variance(complex);

  std::vector<double> d(y_grid.size());
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    out.log_evidence_simple.push_back(log_e(simple, y_grid[i]));
    out.log_evidence_complex.push_back(log_e(complex, y_grid[i]));
    d[i] = out.log_evidence_simple.back() - out.log_evidence_complex.back();
    out.simple_wins_somewhere = out.simple_wins_somewhere || d[i] > 0.0;
    out.complex_wins_somewhere = out.complex_wins_somewhere || d[i] < 0.0;
  }

  // Sign changes between consecutive nonzero differences.
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    if (prev && (d[*prev] > 0.0) != (d[i] > 0.0)) {
      double a = y_grid[*prev];
      double b = y_grid[i];
      double fa = d[*prev];
      double mid = 0.5 * (a + b);
      double fm = diff(mid);
      for (int it = 0; it < 200 && fm != 0.0; ++it) {
        if ((fm > 0.0) == (fa > 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
        const double next = 0.5 * (a + b);
        if (next == mid) break;
        mid = next;
        fm = diff(mid);
      }
      if (std::abs(fm) >= kCrossoverResidual) {
        out.notes.emplace_back("bisection stalled above the residual target");
      }
      out.crossovers.push_back(mid);
      out.residuals.push_back(std::abs(fm));
    }
    prev = i;
  }

  if (out.marginal_variance_complex != out.marginal_variance_simple &&
      !(out.simple_wins_somewhere && out.complex_wins_somewhere)) {
    out.notes.emplace_back(
        "marginal variances differ but the grid does not reach both winning regions");
  }
  return out;
}

}  // namespace ockham
