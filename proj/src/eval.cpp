#include "arcstab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "arcstab/errors.hpp"
#include "arcstab/rng.hpp"
#include "arcstab/trace_io.hpp"

namespace arcstab {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::array<std::vector<std::size_t>, kRegimeCount> by_class(const Dataset& ds) {
  std::array<std::vector<std::size_t>, kRegimeCount> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out[regime_index(ds.y[i])].push_back(i);
  return out;
}

double accuracy_of(const Predictor& predict, const Dataset& ds) {
  if (ds.size() == 0) throw EmptyInput("accuracy on an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (predict(ds.x[i]).label == ds.y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

template <typename Point>
Curve sweep(std::span<const double> scores, std::span<const bool> positive, Point point,
            std::pair<double, double> anchor) {
  if (scores.size() != positive.size()) {
    throw InvalidArgument("curve: scores and labels differ in length");
  }
  Curve curve;
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = positive.size() - pos;
  if (pos == 0 || neg == 0) return curve;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  curve.points.push_back(anchor);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back(point(tp, fp, pos, neg));
    curve.thresholds.push_back(threshold);
  }
  return curve;
}

std::string pair_key(Regime a, Regime b) {
  return std::string(regime_name(a)) + "|" + std::string(regime_name(b));
}

json metrics_json(const Metrics& m) {
  json per_class = json::object();
  for (auto r : kRegimes) {
    const auto& c = m.per_class[regime_index(r)];
    per_class[std::string(regime_name(r))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  }
  return {{"confusion", m.confusion},
          {"accuracy", m.accuracy},
          {"macro_f1", m.macro_f1},
          {"total", m.total},
          {"per_class", per_class}};
}

json curve_json(const Curve& c) {
  json points = json::array();
  for (const auto& [x, y] : c.points) points.push_back({x, y});
  json j = {{"points", points}, {"thresholds", c.thresholds}};
  j["auc"] = c.auc ? json(*c.auc) : json(nullptr);
  return j;
}

json cv_json(const CvSummary& cv) {
  return {{"mean", cv.mean}, {"std", cv.std}, {"folds", cv.fold_accuracy},
          {"fold_sizes", cv.fold_sizes}};
}

}  // namespace

Split split_holdout(const Dataset& ds, double test_fraction, std::uint64_t seed, bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test fraction must lie in (0, 1)");
  }
  if (ds.size() == 0) throw EmptyInput("holdout split of an empty dataset");
  Split split;
  Rng rng(seed);
  if (stratified) {
    for (auto& members : by_class(ds)) {
      if (members.empty()) continue;
      rng.shuffle(std::span<std::size_t>(members));
      const auto n_test = static_cast<std::size_t>(
          std::lround(test_fraction * static_cast<double>(members.size())));
      split.test.insert(split.test.end(), members.begin(),
                        members.begin() + static_cast<std::ptrdiff_t>(n_test));
      split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test),
                         members.end());
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(all));
    const auto n_test =
        static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(all.size())));
    split.test.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_test), all.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());

  const auto total = ds.class_counts();
  std::array<std::size_t, kRegimeCount> in_test{};
  for (auto i : split.test) ++in_test[regime_index(ds.y[i])];
  for (std::size_t c = 0; c < kRegimeCount; ++c) {
    if (total[c] == 0) continue;
    if (in_test[c] == 0 || in_test[c] == total[c]) {
      throw InvalidArgument("holdout split leaves class " + std::string(regime_name(kRegimes[c])) +
                            " empty on one side");
    }
  }
  return split;
}

std::vector<std::vector<std::size_t>> make_folds(const Dataset& ds, const CvSpec& spec,
                                                 std::uint64_t seed) {
  if (ds.size() == 0) throw EmptyInput("cross-validation of an empty dataset");
  if (spec.scheme == CvScheme::Loo) {
    std::vector<std::vector<std::size_t>> folds(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) folds[i] = {i};
    return folds;
  }
  if (spec.k < 2) throw InvalidArgument("k-fold needs k >= 2");
  auto members = by_class(ds);
  std::size_t min_count = ds.size();
  for (const auto& m : members) {
    if (!m.empty()) min_count = std::min(min_count, m.size());
  }
  if (spec.k > min_count) {
    throw InvalidArgument("k-fold: k exceeds the smallest class count " + std::to_string(min_count));
  }
  std::vector<std::size_t> dealt;
  dealt.reserve(ds.size());
  for (std::size_t c = 0; c < kRegimeCount; ++c) {
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members[c]));
    dealt.insert(dealt.end(), members[c].begin(), members[c].end());
  }
  std::vector<std::vector<std::size_t>> folds(spec.k);
  for (std::size_t p = 0; p < dealt.size(); ++p) folds[p % spec.k].push_back(dealt[p]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Learner model_learner(ModelKind kind, const Hyperparams& hp) {
  return [kind, hp](const Dataset& train_set, std::uint64_t seed) -> Predictor {
    Hyperparams local = hp;
    local.seed = seed;
    auto model = std::make_shared<TrainedModel>(train(train_set, kind, local));
    return [model](std::span<const double> v) { return model->predict(v); };
  };
}

CvSummary cross_validate(const Dataset& ds, const CvSpec& spec, const Learner& learner,
                         std::uint64_t seed) {
  const auto folds = make_folds(ds, spec, seed);
  std::vector<std::size_t> in_fold(ds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (auto i : folds[f]) in_fold[i] = f;
  }
  CvSummary cv;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (in_fold[i] != f) train_idx.push_back(i);
    }
    const Predictor predict = learner(ds.subset(train_idx), derive_seed(seed, f));
    cv.fold_accuracy.push_back(accuracy_of(predict, ds.subset(folds[f])));
    cv.fold_sizes.push_back(folds[f].size());
  }
  const double k = static_cast<double>(cv.fold_accuracy.size());
  cv.mean = std::accumulate(cv.fold_accuracy.begin(), cv.fold_accuracy.end(), 0.0) / k;
  double var = 0.0;
  for (double a : cv.fold_accuracy) var += (a - cv.mean) * (a - cv.mean);
  cv.std = std::sqrt(var / k);
  return cv;
}

Metrics confusion_and_metrics(std::span<const Regime> truth, std::span<const Regime> pred) {
  if (truth.size() != pred.size()) throw InvalidArgument("truth and prediction lengths differ");
  if (truth.empty()) throw EmptyInput("no predictions to score");
  Metrics m;
  m.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.confusion[regime_index(truth[i])][regime_index(pred[i])];
  }
  std::size_t trace = 0;
  for (std::size_t c = 0; c < kRegimeCount; ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t o = 0; o < kRegimeCount; ++o) {
      row += m.confusion[c][o];
      col += m.confusion[o][c];
    }
    const double tp = static_cast<double>(m.confusion[c][c]);
    auto& pc = m.per_class[c];
    pc.support = row;
    pc.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    pc.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    const double s = pc.precision + pc.recall;
    pc.f1 = s > 0.0 ? 2.0 * pc.precision * pc.recall / s : 0.0;
    m.macro_f1 += pc.f1 / static_cast<double>(kRegimeCount);
    trace += m.confusion[c][c];
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(m.total);
  return m;
}

Curve roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  Curve c = sweep(
      scores, positive,
      [](std::size_t tp, std::size_t fp, std::size_t pos, std::size_t neg) {
        return std::pair{static_cast<double>(fp) / static_cast<double>(neg),
                         static_cast<double>(tp) / static_cast<double>(pos)};
      },
      {0.0, 0.0});
  if (c.points.empty()) return c;
  double auc = 0.0;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const auto [x0, y0] = c.points[i - 1];
    const auto [x1, y1] = c.points[i];
    auc += (x1 - x0) * (y0 + y1) * 0.5;
  }
  c.auc = auc;
  return c;
}

Curve pr_curve(std::span<const double> scores, std::span<const bool> positive) {
  return sweep(
      scores, positive,
      [](std::size_t tp, std::size_t fp, std::size_t pos, std::size_t) {
        return std::pair{static_cast<double>(tp) / static_cast<double>(pos),
                         static_cast<double>(tp) / static_cast<double>(tp + fp)};
      },
      {0.0, 1.0});
}

Interval binomial_ci(double accuracy, std::size_t n, double level, CiMethod method) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InvalidArgument("accuracy must lie in [0, 1]");
  if (n == 0) throw InvalidArgument("interval needs n >= 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  const double nn = static_cast<double>(n);
  Interval ci;
  ci.level = level;
  if (method == CiMethod::Wald) {
    const double half = z * std::sqrt(accuracy * (1.0 - accuracy) / nn);
    ci.low = accuracy - half;
    ci.high = accuracy + half;
  } else {
    const double z2 = z * z;
    const double centre = (accuracy + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    const double half =
        z * std::sqrt(accuracy * (1.0 - accuracy) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
    ci.low = centre - half;
    ci.high = centre + half;
  }
  ci.low = std::clamp(ci.low, 0.0, 1.0);
  ci.high = std::clamp(ci.high, 0.0, 1.0);
  return ci;
}

double fisher_criterion(const Dataset& ds, Regime a, Regime b, std::optional<std::size_t> feature) {
  ds.validate();
  const auto members = by_class(ds);
  const auto& ia = members[regime_index(a)];
  const auto& ib = members[regime_index(b)];
  if (ia.size() < 2 || ib.size() < 2) {
    throw InvalidArgument("fisher criterion needs at least two samples per class");
  }
  const std::size_t d = ds.dims();
  if (feature && *feature >= d) throw InvalidArgument("fisher criterion: feature out of range");
  const std::size_t lo = feature ? *feature : 0;
  const std::size_t hi = feature ? *feature + 1 : d;

  double between = 0.0;
  double trace = 0.0;
  for (std::size_t f = lo; f < hi; ++f) {
    auto moments = [&](const std::vector<std::size_t>& idx) {
      double mean = 0.0;
      for (auto i : idx) mean += ds.x[i][f];
      mean /= static_cast<double>(idx.size());
      double var = 0.0;
      for (auto i : idx) var += (ds.x[i][f] - mean) * (ds.x[i][f] - mean);
      return std::pair{mean, var / static_cast<double>(idx.size())};
    };
    const auto [ma, va] = moments(ia);
    const auto [mb, vb] = moments(ib);
    between += (ma - mb) * (ma - mb);
    trace += va + vb;
  }
  if (!(trace > 0.0)) throw InvalidArgument("fisher criterion: both classes are constant");
  return between / trace;
}

std::vector<Importance> permutation_importance(const Predictor& predictor, const Dataset& test,
                                               std::size_t repeats, std::uint64_t seed) {
  test.validate();
  if (test.size() == 0) throw EmptyInput("permutation importance on an empty set");
  if (repeats == 0) throw InvalidArgument("permutation importance needs repeats >= 1");
  const double baseline = accuracy_of(predictor, test);
  std::vector<Importance> out;
  Dataset shuffled = test;
  for (std::size_t f = 0; f < test.dims(); ++f) {
    double drop = 0.0;
    std::vector<double> column(test.size());
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t i = 0; i < test.size(); ++i) column[i] = test.x[i][f];
      Rng rng(derive_seed(derive_seed(seed, f), r));
      rng.shuffle(std::span<double>(column));
      for (std::size_t i = 0; i < test.size(); ++i) shuffled.x[i][f] = column[i];
      drop += baseline - accuracy_of(predictor, shuffled);
    }
    for (std::size_t i = 0; i < test.size(); ++i) shuffled.x[i][f] = test.x[i][f];
    Importance imp;
    imp.index = f;
    imp.feature = f < test.feature_names.size() ? test.feature_names[f] : "f" + std::to_string(f);
    imp.score = drop / static_cast<double>(repeats);
    out.push_back(std::move(imp));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Importance& a, const Importance& b) { return a.score > b.score; });
  return out;
}

Hyperparams grid_search_svm(const Dataset& ds, const Hyperparams& base, std::uint64_t seed,
                            std::vector<GridPoint>* trace, std::span<const double> cs,
                            std::span<const double> gammas, std::size_t inner_k) {
  static constexpr std::array<double, 3> kDefaultC{1.0, 10.0, 100.0};
  static constexpr std::array<double, 3> kDefaultGamma{0.05, 0.1, 0.5};
  if (cs.empty()) cs = kDefaultC;
  if (gammas.empty()) gammas = kDefaultGamma;
  Hyperparams best = base;
  double best_score = -1.0;
  for (double c : cs) {
    for (double g : gammas) {
      Hyperparams hp = base;
      hp.svm.c = c;
      hp.svm.gamma = g;
      const auto cv = cross_validate(ds, {CvScheme::KFold, inner_k},
                                     model_learner(ModelKind::SvmRbf, hp), seed);
      if (trace) trace->push_back({c, g, cv.mean});
      if (cv.mean > best_score) {
        best_score = cv.mean;
        best = hp;
      }
    }
  }
  return best;
}

void EvalOptions::validate() const {
  if (!holdout && !kfold && !loo) throw InvalidArgument("eval: no protocol selected");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("eval: test_fraction must lie in (0, 1)");
  }
  if (kfold && k < 2) throw InvalidArgument("eval: k must be >= 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidArgument("eval: ci_level must lie in (0, 1)");
}

EvalReport evaluate(const Dataset& ds, ModelKind kind, const Hyperparams& hp,
                    const EvalOptions& options) {
  options.validate();
  ds.validate();
  if (ds.size() == 0) throw EmptyInput();
  EvalReport report;
  report.kind = kind;
  report.hyperparams = hp;
  report.samples = ds.size();
  report.dims = ds.dims();
  report.class_counts = ds.class_counts();

  std::optional<Split> split;
  if (options.holdout) split = split_holdout(ds, options.test_fraction, options.seed);

  if (options.grid_search && kind == ModelKind::SvmRbf) {
    const Dataset tune = split ? ds.subset(split->train) : ds;
    report.hyperparams =
        grid_search_svm(tune, hp, derive_seed(options.seed, 101), &report.grid);
  }

  if (split) {
    const Dataset train_set = ds.subset(split->train);
    const Dataset test_set = ds.subset(split->test);
    report.train_size = train_set.size();

    auto t0 = Clock::now();
    const TrainedModel model = train(train_set, kind, report.hyperparams);
    report.timing.train_s = seconds_since(t0);

    std::vector<Prediction> preds;
    preds.reserve(test_set.size());
    t0 = Clock::now();
    for (const auto& v : test_set.x) preds.push_back(model.predict(v));
    report.timing.infer_s_per_sample = seconds_since(t0) / static_cast<double>(test_set.size());

    std::vector<Regime> predicted;
    for (const auto& p : preds) predicted.push_back(p.label);
    report.holdout = confusion_and_metrics(test_set.y, predicted);

    std::vector<double> scores(test_set.size());
    for (auto r : kRegimes) {
      const std::size_t c = regime_index(r);
      std::unique_ptr<bool[]> positive(new bool[test_set.size()]);
      for (std::size_t i = 0; i < test_set.size(); ++i) {
        scores[i] = preds[i].scores[c];
        positive[i] = test_set.y[i] == r;
      }
      const std::span<const bool> pos(positive.get(), test_set.size());
      report.roc[c] = roc_curve(scores, pos);
      report.pr[c] = pr_curve(scores, pos);
    }
    report.ci = binomial_ci(report.holdout->accuracy, test_set.size(), options.ci_level,
                            options.ci_method);
    if (options.importance_repeats > 0) {
      const Predictor predictor = [&model](std::span<const double> v) { return model.predict(v); };
      report.importance = permutation_importance(predictor, test_set, options.importance_repeats,
                                                 derive_seed(options.seed, 102));
    }
  }

  const Learner learner = model_learner(kind, report.hyperparams);
  if (options.kfold) {
    report.kfold = cross_validate(ds, {CvScheme::KFold, options.k}, learner,
                                  derive_seed(options.seed, 103));
  }
  if (options.loo) {
    report.loo = cross_validate(ds, {CvScheme::Loo, 0}, learner, derive_seed(options.seed, 104));
  }

  for (std::size_t a = 0; a < kRegimeCount; ++a) {
    for (std::size_t b = a + 1; b < kRegimeCount; ++b) {
      try {
        report.fisher.emplace_back(pair_key(kRegimes[a], kRegimes[b]),
                                   fisher_criterion(ds, kRegimes[a], kRegimes[b]));
      } catch (const InvalidArgument&) {
        // Undefined for this pair (missing or constant classes).
      }
    }
  }

  auto check = [&](const std::optional<double>& limit, std::optional<double> value,
                   const char* name) {
    if (limit && value && *value < *limit) {
      report.violations.push_back(std::string(name) + " " + format_double(*value) + " < " +
                                  format_double(*limit));
    }
  };
  check(options.min_accuracy,
        report.holdout ? std::optional(report.holdout->accuracy) : std::nullopt, "accuracy");
  check(options.min_macro_f1,
        report.holdout ? std::optional(report.holdout->macro_f1) : std::nullopt, "macro_f1");
  check(options.min_cv_mean, report.kfold ? std::optional(report.kfold->mean) : std::nullopt,
        "cv_mean");
  return report;
}

json report_to_json(const EvalReport& r) {
  json counts = json::object();
  for (auto c : kRegimes) counts[std::string(regime_name(c))] = r.class_counts[regime_index(c)];
  json j;
  j["format"] = "arcstab-report";
  j["version"] = 1;
  j["model"] = {{"kind", std::string(model_kind_name(r.kind))},
                {"hyperparams", hyperparams_to_json(r.hyperparams)}};
  j["dataset"] = {{"windows", r.samples}, {"features", r.dims}, {"per_class", counts}};
  if (r.holdout) {
    json roc = json::object();
    json pr = json::object();
    for (auto c : kRegimes) {
      roc[std::string(regime_name(c))] = curve_json(r.roc[regime_index(c)]);
      pr[std::string(regime_name(c))] = curve_json(r.pr[regime_index(c)]);
    }
    json imp = json::array();
    for (const auto& i : r.importance) {
      imp.push_back({{"feature", i.feature}, {"index", i.index}, {"score", i.score}});
    }
    j["holdout"] = metrics_json(*r.holdout);
    j["holdout"]["train_size"] = r.train_size;
    j["holdout"]["ci"] = {{"low", r.ci->low}, {"high", r.ci->high}, {"level", r.ci->level}};
    j["holdout"]["roc"] = roc;
    j["holdout"]["pr"] = pr;
    j["holdout"]["importance"] = imp;
  }
  if (r.kfold) j["kfold"] = cv_json(*r.kfold);
  if (r.loo) j["loo"] = cv_json(*r.loo);
  json fisher = json::object();
  for (const auto& [k, v] : r.fisher) fisher[k] = v;
  j["fisher"] = fisher;
  if (!r.grid.empty()) {
    json grid = json::array();
    for (const auto& g : r.grid) grid.push_back({{"c", g.c}, {"gamma", g.gamma}, {"score", g.score}});
    j["grid_search"] = grid;
  }
  j["violations"] = r.violations;
  j["timing"] = {{"train_s", r.timing.train_s}, {"infer_s_per_sample", r.timing.infer_s_per_sample}};
  return j;
}

void write_curve_csvs(const std::string& dir, const EvalReport& report, const std::string& comment) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const Curve& c, const char* header) {
    std::ofstream out(std::filesystem::path(dir) / name);
    if (!out) throw InvalidArgument("cannot write " + name);
    if (!comment.empty()) out << "# " << comment << '\n';
    out << header << '\n';
    for (const auto& [x, y] : c.points) out << format_double(x) << ',' << format_double(y) << '\n';
  };
  for (auto r : kRegimes) {
    const std::string cls(regime_name(r));
    write("roc_" + cls + ".csv", report.roc[regime_index(r)], "fpr,tpr");
    write("pr_" + cls + ".csv", report.pr[regime_index(r)], "recall,precision");
  }
}

}  // namespace arcstab
