#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "arcstab/errors.hpp"
#include "arcstab/eval.hpp"
#include "arcstab/rng.hpp"
#include "oracles.hpp"

using namespace arcstab;

namespace {

Dataset labelled(const std::array<std::size_t, 3>& counts, std::size_t dims = 2, std::uint64_t seed = 1) {
  Rng rng(seed);
  Dataset ds;
  for (std::size_t d = 0; d < dims; ++d) ds.feature_names.push_back("f" + std::to_string(d));
  for (auto r : kRegimes) {
    for (std::size_t i = 0; i < counts[regime_index(r)]; ++i) {
      std::vector<double> v(dims);
      for (std::size_t d = 0; d < dims; ++d) v[d] = rng.normal((d == regime_index(r)) * 3.0, 1.0);
      ds.x.push_back(v);
      ds.y.push_back(r);
    }
  }
  return ds;
}

Dataset synthetic() {
  const auto trace = synthesize_dataset({});
  return dataset_from_rows(FeaturePipeline({}, trace.sample_rate).extract_trace(trace));
}

// Looks every row up in the full dataset, so it is right on any fold.
Learner perfect_stub(const Dataset& full) {
  return [&full](const Dataset&, std::uint64_t) -> Predictor {
    return [&full](std::span<const double> v) {
      Prediction p;
      for (std::size_t i = 0; i < full.size(); ++i) {
        if (std::ranges::equal(full.x[i], v)) p.label = full.y[i];
      }
      return p;
    };
  };
}

}  // namespace

TEST_CASE("stratified holdout") {
  const auto ds = labelled({49, 49, 49});
  const auto s = split_holdout(ds, 0.25, 42);
  CHECK(s.test.size() == 36);
  CHECK(s.train.size() == 111);
  std::array<int, 3> per{};
  for (auto i : s.test) ++per[regime_index(ds.y[i])];
  CHECK(per == std::array<int, 3>{12, 12, 12});
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 147);

  const auto again = split_holdout(ds, 0.25, 42);
  CHECK(again.test == s.test);
  CHECK(again.train == s.train);

  const auto pair = labelled({0, 2, 0});
  const auto half = split_holdout(pair, 0.5, 1);
  CHECK(half.test.size() == 1);
  CHECK(half.train.size() == 1);
  CHECK_THROWS_AS(split_holdout(labelled({49, 1, 49}), 0.25, 1), InvalidArgument);
}

TEST_CASE("fold enumeration") {
  const auto ds = labelled({49, 49, 49});
  const auto folds = make_folds(ds, {CvScheme::KFold, 10}, 42);
  REQUIRE(folds.size() == 10);
  std::vector<int> seen(147, 0);
  for (const auto& f : folds) {
    CHECK((f.size() == 14 || f.size() == 15));
    for (auto i : f) ++seen[i];
  }
  CHECK(std::ranges::all_of(seen, [](int c) { return c == 1; }));

  const auto loo = make_folds(labelled({3, 4, 5}), {CvScheme::Loo}, 1);
  CHECK(loo.size() == 12);
  CHECK_THROWS_AS(make_folds(ds, {CvScheme::KFold, 1}, 1), InvalidArgument);
}

TEST_CASE("cross validation of a perfect stub") {
  const auto ds = labelled({10, 10, 10});
  for (const CvSpec spec : {CvSpec{CvScheme::KFold, 5}, CvSpec{CvScheme::Loo}}) {
    const auto cv = cross_validate(ds, spec, perfect_stub(ds), 3);
    CHECK(cv.mean == 1.0);
    CHECK(cv.std == 0.0);
    CHECK(std::accumulate(cv.fold_sizes.begin(), cv.fold_sizes.end(), std::size_t{0}) == 30);
  }
}

TEST_CASE("confusion and metrics") {
  std::vector<Regime> truth, pred;
  for (auto r : kRegimes) {
    for (int i = 0; i < 12; ++i) truth.push_back(r);
  }
  pred = truth;
  auto m = confusion_and_metrics(truth, pred);
  CHECK(m.accuracy == 1.0);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(m.confusion[c][c] == 12);
    CHECK(m.per_class[c].f1 == 1.0);
  }

  pred[0] = Regime::Stable;
  pred[13] = Regime::Extinction;
  m = confusion_and_metrics(truth, pred);
  CHECK(m.accuracy == doctest::Approx(34.0 / 36.0));
  CHECK(m.confusion[0][1] == 1);

  const std::vector<Regime> all_a(5, Regime::Transient), all_b(5, Regime::Stable);
  m = confusion_and_metrics(all_a, all_b);
  CHECK(m.per_class[0].recall == 0.0);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[0].f1 == 0.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK_THROWS_AS(confusion_and_metrics(all_a, std::vector<Regime>(4)), InvalidArgument);
}

TEST_CASE("ROC AUC equals the Mann-Whitney estimator") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(1000);
    std::unique_ptr<bool[]> pos(new bool[1000]);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      pos[i] = rng.uniform() < 0.3;
      // Coarse rounding forces tied scores.
      scores[i] = std::round((rng.normal() + (pos[i] ? 0.8 : 0.0)) * 20.0) / 20.0;
    }
    const std::span<const bool> positive(pos.get(), 1000);
    const auto roc = roc_curve(scores, positive);
    REQUIRE(roc.auc);
    CHECK(std::abs(*roc.auc - oracle::mann_whitney(scores, positive)) <= 1e-9);
    CHECK(roc.points.front() == std::pair{0.0, 0.0});
    CHECK(roc.points.back() == std::pair{1.0, 1.0});
  }
}

TEST_CASE("ROC edge cases") {
  const std::vector<double> scores{0.9, 0.8, 0.3, 0.1};
  const bool sep[] = {true, true, false, false};
  CHECK(*roc_curve(scores, sep).auc == 1.0);
  const std::vector<double> same(4, 0.5);
  CHECK(*roc_curve(same, sep).auc == 0.5);
  const bool none[] = {false, false, false, false};
  CHECK_FALSE(roc_curve(scores, none).auc);
}

TEST_CASE("PR curve") {
  const std::vector<double> scores{0.9, 0.8, 0.3, 0.1};
  const bool sep[] = {true, true, false, false};
  const auto perfect = pr_curve(scores, sep);
  CHECK(perfect.points.front() == std::pair{0.0, 1.0});
  for (const auto& [r, p] : perfect.points) {
    if (r < 1.0) CHECK(p == 1.0);
  }
  CHECK(std::ranges::count(perfect.points, std::pair{1.0, 1.0}) == 1);

  const bool inverted[] = {false, false, true, true};
  const auto worst = pr_curve(scores, inverted);
  CHECK(worst.points.back() == std::pair{1.0, 0.5});

  Rng rng(9);
  std::vector<double> s(200);
  std::unique_ptr<bool[]> pos(new bool[200]);
  for (std::size_t i = 0; i < 200; ++i) {
    pos[i] = rng.uniform() < 0.4;
    s[i] = std::round(rng.uniform() * 50.0);
  }
  const std::span<const bool> positive(pos.get(), 200);
  const auto curve = pr_curve(s, positive);
  REQUIRE(curve.thresholds.size() + 1 == curve.points.size());
  std::size_t total_pos = 0;
  for (bool b : positive) total_pos += b;
  for (std::size_t t = 0; t < curve.thresholds.size(); ++t) {
    std::size_t tp = 0, predicted = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      if (s[i] >= curve.thresholds[t]) {
        ++predicted;
        tp += positive[i];
      }
    }
    CHECK(curve.points[t + 1].first == doctest::Approx(double(tp) / total_pos).epsilon(1e-12));
    CHECK(curve.points[t + 1].second == doctest::Approx(double(tp) / predicted).epsilon(1e-12));
  }
}

TEST_CASE("binomial confidence interval") {
  const auto ci = binomial_ci(0.8707, 147, 0.95);
  CHECK(std::abs(ci.low - 0.8165) <= 0.0005);
  CHECK(std::abs(ci.high - 0.9250) <= 0.0005);
  const auto one = binomial_ci(1.0, 100, 0.95);
  CHECK(one.low == 1.0);
  CHECK(one.high == 1.0);
  const auto half = binomial_ci(0.5, 4, 0.95);
  CHECK(half.low == doctest::Approx(0.01).epsilon(0.05));
  CHECK(half.high == doctest::Approx(0.99).epsilon(0.001));
  const auto wide = binomial_ci(0.7, 100, 0.95);
  const auto narrow = binomial_ci(0.7, 400, 0.95);
  CHECK((narrow.high - narrow.low) == doctest::Approx((wide.high - wide.low) / 2).epsilon(1e-12));

  const auto wilson = binomial_ci(1.0, 100, 0.95, CiMethod::Wilson);
  CHECK(wilson.low < 1.0);
  CHECK(wilson.high == doctest::Approx(1.0));
  CHECK_THROWS_AS(binomial_ci(1.2, 10, 0.95), InvalidArgument);
  CHECK_THROWS_AS(binomial_ci(0.5, 0, 0.95), InvalidArgument);
}

TEST_CASE("Fisher criterion") {
  Dataset ds;
  ds.feature_names = {"x"};
  ds.x = {{-1}, {1}, {3}, {5}};
  ds.y = {Regime::Stable, Regime::Stable, Regime::Extinction, Regime::Extinction};
  CHECK(fisher_criterion(ds, Regime::Stable, Regime::Extinction) == doctest::Approx(16.0 / 2.0));
  ds.x = {{-1}, {1}, {4}, {6}};
  CHECK(fisher_criterion(ds, Regime::Stable, Regime::Extinction) == doctest::Approx(12.5));
  CHECK(fisher_criterion(ds, Regime::Stable, Regime::Extinction, 0) == doctest::Approx(12.5));

  Dataset same = ds;
  same.x = {{-1}, {1}, {-1}, {1}};
  CHECK(fisher_criterion(same, Regime::Stable, Regime::Extinction) == 0.0);

  Dataset flat = ds;
  flat.x = {{0}, {0}, {0}, {0}};
  CHECK_THROWS_AS(fisher_criterion(flat, Regime::Stable, Regime::Extinction), InvalidArgument);
}

TEST_CASE("permutation importance") {
  auto ds = synthetic();
  Rng rng(77);
  ds.feature_names.push_back("noise");
  for (auto& row : ds.x) row.push_back(rng.normal());
  const auto split = split_holdout(ds, 0.25, 42);
  const auto train_set = ds.subset(split.train);
  const auto test_set = ds.subset(split.test);
  const auto model = train(train_set, ModelKind::SvmRbf);
  const Predictor predictor = [&](std::span<const double> v) { return model.predict(v); };
  const auto scores = permutation_importance(predictor, test_set, 10, 42);
  REQUIRE(scores.size() == 11);
  CHECK(std::ranges::is_sorted(scores, std::greater<>{}, &Importance::score));
  for (const auto& s : scores) {
    if (s.feature == "noise") CHECK(std::abs(s.score) <= 0.05);
  }

  const Predictor constant = [](std::span<const double>) { return Prediction{}; };
  for (const auto& s : permutation_importance(constant, test_set, 5, 1)) CHECK(s.score == 0.0);

  // Duplicating the strongest column shares its importance between copies.
  const auto top = scores.front();
  auto dup = ds;
  dup.feature_names.push_back(top.feature + "_copy");
  for (auto& row : dup.x) row.push_back(row[top.index]);
  const auto dup_model = train(dup.subset(split.train), ModelKind::SvmRbf);
  const Predictor dup_predictor = [&](std::span<const double> v) { return dup_model.predict(v); };
  for (const auto& s : permutation_importance(dup_predictor, dup.subset(split.test), 10, 42)) {
    if (s.index == top.index || s.index == dup.dims() - 1) CHECK(s.score <= top.score + 0.05);
  }
}

TEST_CASE("grid search picks a grid point") {
  const auto ds = labelled({15, 15, 15}, 3, 5);
  std::vector<GridPoint> trace;
  const auto hp = grid_search_svm(ds, {}, 42, &trace);
  CHECK(trace.size() == 9);
  const auto best = std::ranges::max_element(trace, {}, &GridPoint::score);
  CHECK(hp.svm.c == best->c);
  CHECK(hp.svm.gamma == best->gamma);
}

TEST_CASE("evaluation report") {
  const auto ds = synthetic();
  EvalOptions opt;
  opt.importance_repeats = 2;
  const auto report = evaluate(ds, ModelKind::SvmRbf, {}, opt);
  CHECK(report.samples == 147);
  CHECK(report.class_counts == std::array<std::size_t, 3>{49, 49, 49});
  REQUIRE(report.holdout);
  CHECK(report.holdout->total == 36);
  CHECK(report.train_size == 111);
  REQUIRE(report.kfold);
  CHECK(report.kfold->fold_accuracy.size() == 10);
  REQUIRE(report.ci);
  CHECK(report.ci->low <= report.holdout->accuracy);
  CHECK(report.fisher.size() == 3);

  auto a = report_to_json(report);
  auto b = report_to_json(evaluate(ds, ModelKind::SvmRbf, {}, opt));
  CHECK(a.contains("timing"));
  a.erase("timing");
  b.erase("timing");
  CHECK(a.dump() == b.dump());

  opt.min_accuracy = 1.01;
  CHECK_FALSE(evaluate(ds, ModelKind::Knn, {}, opt).violations.empty());
}
