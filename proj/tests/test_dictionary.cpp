#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

using namespace slicedict;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<Needle> code(const LocalDictionary& d, const MatrixXd& targets, double lambda) {
  PursuitConfig cfg;
  cfg.lambda = lambda;
  std::vector<Needle> out;
  for (Eigen::Index i = 0; i < targets.cols(); ++i) out.push_back(lasso_solve(d, targets.col(i), cfg).needle);
  return out;
}

Needle single(int j, double v) {
  Needle n;
  n.index = {j};
  n.value = {v};
  return n;
}

} // namespace

TEST_CASE("initialization") {
  for (auto [n, m, seed] : {std::tuple{9, 4, 1ULL}, {25, 8, 7ULL}, {121, 100, 0ULL}}) {
    const LocalDictionary d = init_dictionary(n, m, seed);
    CHECK(d.patch_size() == n);
    CHECK(d.atom_count() == m);
    CHECK((d.atoms().colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(init_dictionary(n, m, seed) == d);
  }
  CHECK_FALSE(init_dictionary(9, 4, 1) == init_dictionary(9, 4, 2));
  CHECK(init_dictionary(121, 100, 3).filter_side() == 11);
  CHECK_THROWS_AS(init_dictionary(0, 3, 1), std::invalid_argument);
}

TEST_CASE("construction checks unit norm") {
  CHECK_THROWS_AS(LocalDictionary(MatrixXd::Constant(4, 1, 1.0)), std::invalid_argument);
  CHECK_NOTHROW(LocalDictionary(MatrixXd::Constant(4, 1, 0.5)));
  CHECK_THROWS_AS(LocalDictionary::normalized(MatrixXd::Zero(4, 1)), std::invalid_argument);
  CHECK_THROWS_AS(LocalDictionary(MatrixXd::Identity(3, 2)).filter_side(), std::logic_error);
}

TEST_CASE("single atom converges to the common direction in one sweep") {
  // targets c_k * v with v = (1, 2, 2) / 3
  const VectorXd v = (VectorXd(3) << 1.0, 2.0, 2.0).finished() / 3.0;
  const double scale[] = {2.0, -1.0, 0.5, 3.0};
  MatrixXd targets(3, 4);
  std::vector<Needle> needles;
  for (int k = 0; k < 4; ++k) {
    targets.col(k) = scale[k] * v;
    needles.push_back(single(0, 0.3 + 0.1 * k));
  }
  const LocalDictionary d0 = LocalDictionary::normalized((MatrixXd(3, 1) << 1.0, -0.2, 0.4).finished());
  const auto res = dictionary_update(d0, targets, needles, 1);
  CHECK((res.dictionary.atom(0) - v).cwiseAbs().maxCoeff() < 1e-10);
  for (int k = 0; k < 4; ++k) CHECK(needles[k].value[0] == doctest::Approx(scale[k]).epsilon(1e-10));
  CHECK(res.fit_per_sweep.front() < 1e-20);
}

TEST_CASE("exactly represented targets are a fixed point") {
  std::mt19937_64 rng(1);
  MatrixXd atoms = oracle::random_matrix(9, 3, rng);
  atoms.colwise().normalize();
  canonical_signs(atoms);
  std::vector<Needle> needles;
  MatrixXd targets(9, 12);
  for (int i = 0; i < 12; ++i) {
    VectorXd a = VectorXd::Zero(3);
    a[i % 3] = 1.0 + i;
    if (i % 2 == 0) a[(i + 2) % 3] = -0.7;
    needles.push_back(Needle::from_dense(a));
    targets.col(i) = atoms * a;
  }
  const LocalDictionary d(atoms);
  for (bool refit : {true, false}) {
    std::vector<Needle> work = needles;
    DictionaryUpdateOptions opts;
    opts.sweeps = 4;
    opts.refit_coefficients = refit;
    const auto res = dictionary_update(d, targets, work, opts);
    CHECK((res.dictionary.atoms() - atoms).cwiseAbs().maxCoeff() < 1e-10);
    for (double fit : res.fit_per_sweep) CHECK(fit < 1e-20);
  }
}

TEST_CASE("unused atom is replaced by the worst represented target") {
  const LocalDictionary d(MatrixXd::Identity(3, 2));
  MatrixXd targets(3, 3);
  targets << 1.0, 0.0, 2.0,
             0.0, 0.0, 0.0,
             0.0, 3.0, 0.0;
  // only atom 0 is used; targets 1 (residual 9) and 2 (residual 0 after the refit) compete
  std::vector<Needle> needles{single(0, 1.0), Needle{}, single(0, 2.0)};
  const auto res = dictionary_update(d, targets, needles, 1);
  CHECK(res.replaced_atoms == 1);
  CHECK(res.dictionary.atom(1) == VectorXd::Unit(3, 2));
  CHECK(needles[1].empty());

  SUBCASE("ties go to the lowest index") {
    MatrixXd tied(3, 2);
    tied << 0.0, 0.0,
            2.0, 0.0,
            0.0, -2.0;
    std::vector<Needle> none(2);
    const auto r = dictionary_update(LocalDictionary(MatrixXd::Identity(3, 1)), tied, none, 1);
    CHECK(r.dictionary.atom(0) == VectorXd::Unit(3, 1));
  }

  SUBCASE("excluded targets are skipped") {
    MatrixXd t(3, 3);
    t << 3.0, 2.9, 0.0,
         0.0, 0.1, 0.0,
         0.0, 0.0, 1.0;
    std::vector<Needle> none(3);
    DictionaryUpdateOptions opts;
    opts.exclude = [](Eigen::Index taken, std::vector<char>& excluded) {
      if (taken == 0) excluded[1] = 1;
    };
    const auto r = dictionary_update(LocalDictionary(MatrixXd::Identity(3, 2)), t, none, opts);
    CHECK(r.dictionary.atom(0) == VectorXd::Unit(3, 0));
    CHECK(r.dictionary.atom(1) == VectorXd::Unit(3, 2));
  }
}

TEST_CASE("fit never increases and supports never grow") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const LocalDictionary d = oracle::random_dictionary(16, 8, rng);
    const MatrixXd targets = oracle::random_matrix(16, 50, rng);
    const std::vector<Needle> start = code(d, targets, 0.4);
    for (bool refit : {true, false}) {
      std::vector<Needle> needles = start;
      DictionaryUpdateOptions opts;
      opts.sweeps = 10;
      opts.refit_coefficients = refit;
      const auto res = dictionary_update(d, targets, needles, opts);
      REQUIRE(res.fit_per_sweep.size() == 10);
      double prev = representation_error(d, targets, start);
      for (double fit : res.fit_per_sweep) {
        CHECK(fit <= prev * (1.0 + 1e-12));
        prev = fit;
      }
      CHECK(representation_error(res.dictionary, targets, needles) == doctest::Approx(prev).epsilon(1e-10));
      CHECK((res.dictionary.atoms().colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-10);
      for (std::size_t i = 0; i < needles.size(); ++i) {
        for (int j : needles[i].index) {
          CHECK(std::find(start[i].index.begin(), start[i].index.end(), j) != start[i].index.end());
        }
        if (!refit) CHECK(needles[i].l1_norm() == doctest::Approx(start[i].l1_norm()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("atom signs are canonical after an update") {
  std::mt19937_64 rng(3);
  const LocalDictionary d = oracle::random_dictionary(9, 5, rng);
  const MatrixXd targets = oracle::random_matrix(9, 30, rng);
  std::vector<Needle> needles = code(d, targets, 0.3);
  const auto res = dictionary_update(d, targets, needles, 2);
  for (int j = 0; j < 5; ++j) {
    const auto col = res.dictionary.atom(j);
    Eigen::Index first = 0;
    while (col[first] == 0.0) ++first;
    CHECK(col[first] > 0.0);
  }
  // flipping keeps D a unchanged
  CHECK(representation_error(res.dictionary, targets, needles) == doctest::Approx(res.fit_per_sweep.back()));

  MatrixXd m(2, 2);
  m << 0.0, 1.0,
       -1.0, 0.0;
  CHECK(canonical_signs(m) == std::vector<int>{0});
  CHECK(m(1, 0) == 1.0);
}

TEST_CASE("invalid updates") {
  const LocalDictionary d(MatrixXd::Identity(3, 2));
  std::vector<Needle> none;
  CHECK_THROWS_AS(dictionary_update(d, MatrixXd(3, 0), none, 1), std::invalid_argument);
  std::vector<Needle> two(2);
  CHECK_THROWS_AS(dictionary_update(d, MatrixXd::Zero(3, 3), two, 1), std::invalid_argument);
  CHECK_THROWS_AS(dictionary_update(d, MatrixXd::Zero(4, 2), two, 1), std::invalid_argument);
  CHECK_THROWS_AS(dictionary_update(d, MatrixXd::Zero(3, 2), two, 0), std::invalid_argument);
  std::vector<Needle> bad{single(5, 1.0), Needle{}};
  CHECK_THROWS_AS(dictionary_update(d, MatrixXd::Zero(3, 2), bad, 1), std::invalid_argument);
}
