#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "crowd/em.hpp"
#include "crowd/simulate.hpp"
#include "property_checks.hpp"

using namespace crowd;

namespace {

SimOutput hds(std::vector<double> w, int n, int l, double q, std::uint64_t seed) {
  SimConfig c;
  c.num_workers = static_cast<int>(w.size());
  c.num_items = n;
  c.num_classes = l;
  c.prior = Prior::uniform(l);
  c.assignment = AssignmentModel::constant(q);
  c.workers = WorkerModel::homogeneous(l, std::move(w));
  c.seed = seed;
  return simulate_dataset(c);
}

EmConfig homogeneous() {
  EmConfig c;
  c.model = EmConfig::Model::Homogeneous;
  return c;
}

}  // namespace

TEST_SUITE("em") {
  TEST_CASE("noiseless data is a fixed point") {
    const auto out = hds({1.0, 1.0, 1.0, 1.0, 1.0}, 100, 3, 1.0, 1);
    for (const auto& config : {EmConfig{}, homogeneous()}) {
      const auto r = em_fit(out.labels, config);
      CHECK(r.converged);
      CHECK(r.iterations <= 3);
      CHECK(em_map_predict(r) == out.truth);
      for (int i = 0; i < 5; ++i) {
        for (int k = 0; k < 3; ++k) CHECK(r.model.prob(i, k, k) == doctest::Approx(1.0));
      }
    }
  }

  TEST_CASE("a worker without labels keeps uninformative parameters") {
    const auto z = validate_label_matrix({{1, 2, 2, 1}, {1, 2, 1, 1}, {0, 0, 0, 0}}, LabelSet(2));
    const auto general = em_fit(z);
    CHECK(general.model.prob(2, 0, 0) == 0.5);
    CHECK(general.model.prob(2, 1, 0) == 0.5);
    const auto hom = em_fit(z, homogeneous());
    CHECK(hom.model.accuracies()[2] == 0.5);
  }

  TEST_CASE("MAP of the posterior") {
    EmResult r{WorkerModel::homogeneous(2, {0.5}), Prior::uniform(2),
               PosteriorMatrix(2, 2, {0.7, 0.3, 0.5, 0.5}), {}, 1, true};
    CHECK(em_map_predict(r) == Predictions{1, 1});
  }

  TEST_CASE("likelihood is recorded after every E-step") {
    const auto out = hds({0.8, 0.7, 0.6, 0.75, 0.55, 0.9}, 200, 3, 0.6, 2);
    const auto r = em_fit(out.labels);
    CHECK(r.log_likelihood.size() == static_cast<std::size_t>(r.iterations));
    for (std::size_t s = 1; s < r.log_likelihood.size(); ++s) CHECK(r.log_likelihood[s] >= r.log_likelihood[s - 1] - 1e-9);
    if (r.converged) {
      const double a = r.log_likelihood[r.log_likelihood.size() - 1];
      const double b = r.log_likelihood[r.log_likelihood.size() - 2];
      CHECK(std::abs(a - b) <= 1e-8 * std::abs(b));
    }
  }

  TEST_CASE("iteration cap and fixed iterations") {
    const auto out = hds({0.8, 0.7, 0.6, 0.75, 0.55}, 100, 2, 0.8, 3);
    EmConfig c;
    c.max_iters = 2;
    const auto r = em_fit(out.labels, c);
    CHECK(r.iterations <= 2);
    c.max_iters = 40;
    c.fixed_iterations = true;
    CHECK(em_fit(out.labels, c).iterations == 40);
    c.tolerance = 0.0;
    CHECK_THROWS_AS(em_fit(out.labels, c), DomainError);
  }

  TEST_CASE("initial posterior is honoured") {
    const auto out = hds({0.9, 0.9, 0.9}, 30, 2, 1.0, 4);
    EmConfig c;
    c.initial_posterior = one_hot_posterior(out.truth, 2);
    c.max_iters = 1;
    const auto r = em_fit(out.labels, c);
    CHECK(em_map_predict(r) == oracle_map_predict(out.labels, r.model, r.prior));
    c.initial_posterior = PosteriorMatrix(1, 2, {0.5, 0.5});
    CHECK_THROWS_AS(em_fit(out.labels, c), DimensionMismatch);
    CHECK_THROWS_AS(one_hot_posterior(std::vector<int>{3}, 2), DomainError);
  }

  TEST_CASE("relabeling workers permutes the fit") {
    const auto out = hds({0.85, 0.6, 0.7, 0.55, 0.8, 0.65}, 150, 3, 0.7, 5);
    const std::vector<int> perm{3, 0, 5, 1, 4, 2};
    std::vector<LabelEntry> moved;
    for (const auto& e : out.labels.entries()) moved.push_back({perm[static_cast<std::size_t>(e.worker)], e.item, e.label});
    const LabelMatrix permuted(6, 150, 3, moved);
    const auto a = em_fit(out.labels);
    const auto b = em_fit(permuted);
    CHECK(em_map_predict(a) == em_map_predict(b));
    CHECK(a.iterations == b.iterations);
    for (int i = 0; i < 6; ++i) {
      for (int k = 0; k < 3; ++k) {
        for (int h = 0; h < 3; ++h) CHECK(a.model.prob(i, k, h) == doctest::Approx(b.model.prob(perm[i], k, h)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("homogeneous and general fits agree on homogeneous data") {
    double agree = 0.0;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto w = sample_workers_beta(31, 2.3, 2.0, 2.3 / 4.3, 0.01, seed);
      const auto out = hds(w, 1000, 3, 0.3, 1000 + seed);
      const auto a = em_map_predict(em_fit(out.labels));
      const auto b = em_map_predict(em_fit(out.labels, homogeneous()));
      for (std::size_t j = 0; j < a.size(); ++j) agree += a[j] == b[j];
      total += static_cast<double>(a.size());
    }
    CHECK(agree / total >= 0.95);
  }

  TEST_CASE("homogeneous EM recovers worker accuracies") {
    double deviation = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto w = sample_workers_beta(31, 2.3, 2.0, 2.3 / 4.3, 0.01, 77 + seed);
      const auto out = hds(w, 2000, 3, 0.3, seed);
      const auto fit = em_fit(out.labels, homogeneous());
      const auto est = fit.model.accuracies();
      for (std::size_t i = 0; i < w.size(); ++i) {
        deviation += std::abs(est[i] - w[i]);
        ++count;
      }
    }
    CHECK(deviation / count <= 0.05);
  }

  TEST_CASE("property: likelihood monotone, posteriors normalized") {
    for (const auto& r : {testing::check_em_monotone(200, 41), testing::check_posterior(200, 42)}) {
      INFO(r.name << " " << r.first_failure);
      CHECK(r.ok());
    }
  }
}
