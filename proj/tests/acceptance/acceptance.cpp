// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ockham/ockham.hpp"
#include "support/oracles.hpp"

namespace {

using namespace ockham;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds; <= 0 means none
  std::function<Verdict()> check;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

struct RandomInstance {
  testing::GlmInstance glm;
  Eigen::Index n;
  Eigen::Index d;
};

RandomInstance random_instance(std::mt19937_64& rng, Eigen::Index max_n, Eigen::Index max_d) {
  std::uniform_int_distribution<Eigen::Index> dims(1, max_d);
  std::uniform_real_distribution<double> sigma(0.2, 2.0);
  std::uniform_real_distribution<double> log_lambda(std::log(0.1), std::log(10.0));
  const Eigen::Index d = dims(rng);
  std::uniform_int_distribution<Eigen::Index> sizes(1, max_n);
  const Eigen::Index n = sizes(rng);
  const double s = sigma(rng);
  const double l = std::exp(log_lambda(rng));
  return RandomInstance{testing::random_glm(rng, n, d, s, l), n, d};
}

Verdict exact_decomposition() {
  std::mt19937_64 rng(0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng, 50, 8);
    const auto& g = inst.glm;
    const double lib = glm_log_evidence(g.spec, g.obs).log_evidence;
    const double ref =
        testing::marginal_gaussian_log_evidence(g.spec.G, g.obs.y, g.spec.sigma, g.spec.lambda);
    worst = std::max(worst, std::abs(lib - ref));
  }
  return {worst < 1e-8, fmt("max |glm - marginal oracle| = %.3g over 100 instances", worst)};
}

Verdict candidate_invariance() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto inst = random_instance(rng, 50, 8);
    const auto& g = inst.glm;
    const Eigen::VectorXd center = map_estimate(g.spec, g.obs);
    double lo = INFINITY;
    double hi = -INFINITY;
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd theta0(inst.d);
      for (Eigen::Index j = 0; j < inst.d; ++j) theta0(j) = center(j) + normal(rng);
      const double v = evidence_via_candidate(g.spec, g.obs, theta0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    worst = std::max(worst, hi - lo);
  }
  return {worst < 1e-9, fmt("max spread over 10 points = %.3g on 20 instances", worst)};
}

Verdict laplace_exactness() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto inst = random_instance(rng, 40, 4);
    const auto& g = inst.glm;
    const GenericModelSpec model = wrap_glm(g.spec, g.obs);
    const NormalizedPrior prior = glm_prior(g.spec, model);
    LaplaceOptions opts;
    opts.check_points = -1;
    const double lap = evidence_laplace(model, prior, opts).log_evidence;
    worst = std::max(worst, std::abs(lap - glm_log_evidence(g.spec, g.obs).log_evidence));
  }
  return {worst < 1e-6, fmt("max |laplace - exact| = %.3g on 20 instances", worst)};
}

Verdict quadrature_oracle() {
  double worst = 0.0;
  int count = 0;
  for (const Eigen::Index d : {1, 2}) {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      const auto g = testing::random_glm(100 * static_cast<std::uint64_t>(d) + seed, 12, d, 0.8, 1.2);
      const GenericModelSpec model = wrap_glm(g.spec, g.obs);
      const NormalizedPrior prior = glm_prior(g.spec, model);
      QuadratureOptions opts;
      opts.tolerance = 1e-4;
      const double q = evidence_quadrature(model, prior, 2001, opts).log_evidence;
      worst = std::max(worst, std::abs(q - glm_log_evidence(g.spec, g.obs).log_evidence));
      ++count;
    }
  }
  return {worst < 1e-4, fmt("max |quadrature - exact| = %.3g on %.0f instances (d = 1, 2)", worst, count)};
}

Verdict importance_sampling() {
  double worst = 0.0;
  double min_ess = INFINITY;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(i % 4);
    const auto g = testing::random_glm(500 + i, 25, d, 0.7, 1.0);
    const GenericModelSpec model = wrap_glm(g.spec, g.obs);
    const NormalizedPrior prior = glm_prior(g.spec, model);
    const EvidenceDecomposition is = evidence_importance(model, prior, 100000, i);
    worst = std::max(worst, std::abs(is.log_evidence - glm_log_evidence(g.spec, g.obs).log_evidence));
    min_ess = std::min(min_ess, is.diagnostics.at("effective_sample_size") / 100000.0);
  }
  return {worst < 0.05 && min_ess > 0.2,
          fmt("max |is - exact| = %.3g nats, min ESS/draws = %.3f", worst, min_ess)};
}

Verdict flexibility_limits() {
  std::mt19937_64 rng(0);
  double lowest = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng, 50, 8);
    lowest = std::min(lowest, flexibility_exact(inst.glm.spec, inst.glm.obs));
  }
  std::mt19937_64 data_rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd G(20, 2);
  Eigen::VectorXd y(20);
  for (Eigen::Index r = 0; r < 20; ++r) {
    G(r, 0) = normal(data_rng);
    G(r, 1) = normal(data_rng);
    y(r) = normal(data_rng);
  }
  const ObservationSet obs{y, std::nullopt};
  const double tight = flexibility_exact(GaussianLinearSpec{G, 1.0, 1e3}, obs);
  const double medium = flexibility_exact(GaussianLinearSpec{G, 1.0, 10.0}, obs);
  return {lowest >= 0.0 && tight < 1e-2 && tight < medium,
          fmt("min flexibility = %.3g; lambda=1e3: %.3g; lambda=10: %.3g", lowest, tight, medium)};
}

Verdict bic_asymptotics() {
  const std::vector<std::size_t> ns{100, 1000, 10000, 100000};
  const AsymptoticSweepResult line =
      bic_sweep(linear_gaussian_generator(Eigen::Vector2d(1.0, -0.5), 1.0, 1.0), ns, 13);
  bool decreasing = true;
  for (std::size_t k = 0; k + 2 < line.gaps.size(); ++k) {
    decreasing = decreasing && std::abs(line.gaps[k + 2] - line.gaps[k + 1]) <
                                   std::abs(line.gaps[k + 1] - line.gaps[k]);
  }
  const double distance = std::abs(line.gaps.back() - line.predicted_constant);
  const AsymptoticSweepResult ones = bic_sweep(all_ones_generator(), ns, 13);
  double closed_form = 0.0;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double n = static_cast<double>(ns[k]);
    closed_form = std::max(closed_form, std::abs(ones.gaps[k] - (0.5 * std::log1p(n) - 0.5 * std::log(n))));
  }
  const double final_gap = ones.gaps.back();
  return {distance < 0.1 && decreasing && final_gap < 5e-6 && closed_form < 1e-12,
          fmt("|gap - limit| = %.3g; all-ones final gap = %.6g (closed-form dev %.2g)", distance,
              final_gap, closed_form) +
              (decreasing ? "; differences decreasing" : "; differences NOT decreasing")};
}

Verdict mackay_crossover_check() {
  const GaussianLinearSpec simple{Eigen::MatrixXd::Ones(1, 1), 1.0, 10.0};
  const GaussianLinearSpec complex{Eigen::MatrixXd::Ones(1, 1), 1.0, 0.1};
  std::vector<double> grid(501);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = -25.0 + 0.1 * static_cast<double>(i);
  grid.back() = 25.0;
  const CrossoverReport r = mackay_crossover(simple, complex, grid);
  const auto log_e = [](const GaussianLinearSpec& s, double y) {
    return glm_log_evidence(s, ObservationSet{Eigen::VectorXd::Constant(1, y), std::nullopt}).log_evidence;
  };
  const bool wins_at_zero = log_e(simple, 0.0) > log_e(complex, 0.0);
  const bool loses_at_20 = log_e(simple, 20.0) < log_e(complex, 20.0) &&
                           log_e(simple, -20.0) < log_e(complex, -20.0);
  double residual = 0.0;
  for (const double res : r.residuals) residual = std::max(residual, res);
  return {r.crossovers.size() == 2 && wins_at_zero && loses_at_20 && residual < 1e-8,
          fmt("%.0f crossovers, max residual %.3g, |y*| = %.6f", static_cast<double>(r.crossovers.size()),
              residual, r.crossovers.empty() ? NAN : std::abs(r.crossovers.front()))};
}

Verdict sweet_spot() {
  std::vector<unsigned> degrees(10);
  std::iota(degrees.begin(), degrees.end(), 0u);
  const SweetSpotReport r = sweet_spot_experiment(3, degrees, 100, 1.0, 1.0, 200, 8);
  const double freq = r.chosen_frequency[3];
  return {r.modal_degree == 3 && freq >= 0.6 && r.mean_relative_regret <= 0.10,
          fmt("modal degree %.0f, frequency(3) = %.3f, mean regret = %.4f", r.modal_degree, freq,
              r.mean_relative_regret)};
}

Verdict selection_identities() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 1.0);
  int agree_fit = 0;
  int agree_posterior = 0;
  for (int s = 0; s < 50; ++s) {
    const Eigen::Index n = 30;
    Eigen::MatrixXd G(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) G(i, j) = normal(rng);
    }
    std::vector<ModelMember> members;
    for (Eigen::Index d = 1; d <= 5; ++d) {
      members.emplace_back(GaussianLinearSpec{G.leftCols(d), 0.5 + 0.1 * static_cast<double>(s % 5), 1.0});
    }
    const Eigen::Index true_d = 1 + s % 5;
    Eigen::VectorXd y = G.leftCols(true_d) * Eigen::VectorXd::Ones(true_d) * 0.7;
    for (Eigen::Index i = 0; i < n; ++i) y(i) += normal(rng);
    const ModelSet set = make_model_set(std::move(members));
    const ObservationSet obs{y, std::nullopt};
    const SelectionOutcome ev = select(set, obs, SelectionRule::MaxEvidence);
    const SelectionOutcome post = select(set, obs, SelectionRule::MaxPosterior);
    std::vector<double> fit_minus_flex;
    for (const auto& e : ev.evidence) fit_minus_flex.push_back(e.log_fit - e.flexibility);
    agree_fit += argmax_lowest(fit_minus_flex).index == ev.chosen ? 1 : 0;
    agree_posterior += post.chosen == ev.chosen ? 1 : 0;
  }
  return {agree_fit == 50 && agree_posterior == 50,
          fmt("fit-flexibility argmax agrees on %.0f/50, uniform max-posterior on %.0f/50", agree_fit,
              agree_posterior)};
}

Verdict risk_harness() {
  CounterRng design(2, 0);
  const Eigen::VectorXd flat = standard_normal_vector(design, 100 * 5);
  const Eigen::MatrixXd G = Eigen::Map<const Eigen::MatrixXd>(flat.data(), 100, 5);
  const ModelSet set = make_model_set(
      {GaussianLinearSpec{G.leftCols(1), 0.3, 1.0}, GaussianLinearSpec{G, 0.3, 1.0}});
  const std::vector<SelectionRule> rules{SelectionRule::MaxEvidence, SelectionRule::MaxPosterior};
  const RiskReport a = risk_mc(set, prior_predictive_generator(), 500, rules, 2);
  const RiskReport b = risk_mc(set, prior_predictive_generator(), 500, rules, 2);
  const bool identical = a.risks == b.risks && a.choices == b.choices && a.true_counts == b.true_counts;
  return {a.risks[0] < 0.5 && identical,
          fmt("max-evidence risk = %.3f over 500 reps", a.risks[0]) +
              (identical ? "; rerun bit-identical" : "; rerun DIFFERS")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "exact decomposition vs marginal oracle", 5.0, exact_decomposition},
      {2, "candidate-formula invariance", 1.0, candidate_invariance},
      {3, "laplace exact on gaussian models", 5.0, laplace_exactness},
      {4, "quadrature vs closed form", 10.0, quadrature_oracle},
      {5, "importance sampling accuracy and ess", 30.0, importance_sampling},
      {6, "flexibility limits", 0.0, flexibility_limits},
      {7, "bic asymptotics", 10.0, bic_asymptotics},
      {8, "scalar crossover", 1.0, mackay_crossover_check},
      {9, "polynomial sweet spot", 60.0, sweet_spot},
      {10, "selection identities", 0.0, selection_identities},
      {11, "risk harness sanity", 30.0, risk_harness},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit <= 0.0 || secs < c.time_limit;
    const bool pass = v.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %2d: %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                v.detail.c_str(), secs,
                c.time_limit > 0.0 ? (in_time ? fmt(", limit %.0f s", c.time_limit).c_str()
                                              : fmt(", OVER limit %.0f s", c.time_limit).c_str())
                                   : "");
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
