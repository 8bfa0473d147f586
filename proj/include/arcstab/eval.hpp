#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arcstab/classify.hpp"

namespace arcstab {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified: round(fraction * class count) test samples per class, drawn
/// with the seeded generator. Both sides must keep every class non-empty.
Split split_holdout(const Dataset& ds, double test_fraction, std::uint64_t seed,
                    bool stratified = true);

enum class CvScheme { KFold, Loo };

struct CvSpec {
  CvScheme scheme = CvScheme::KFold;
  std::size_t k = 10;
};

/// Test-index sets, disjoint and covering. k-fold is stratified: each class
/// is shuffled, the classes are concatenated in class order and dealt
/// round-robin.
std::vector<std::vector<std::size_t>> make_folds(const Dataset& ds, const CvSpec& spec,
                                                 std::uint64_t seed);

using Predictor = std::function<Prediction(std::span<const double>)>;
using Learner = std::function<Predictor(const Dataset&, std::uint64_t seed)>;

Learner model_learner(ModelKind kind, const Hyperparams& hp);

struct CvSummary {
  std::vector<double> fold_accuracy;
  std::vector<std::size_t> fold_sizes;
  double mean = 0.0;
  double std = 0.0;  // population
};

/// Fold f trains with seed derive_seed(seed, f).
CvSummary cross_validate(const Dataset& ds, const CvSpec& spec, const Learner& learner,
                         std::uint64_t seed);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  std::array<std::array<std::size_t, kRegimeCount>, kRegimeCount> confusion{};  // [truth][pred]
  std::array<ClassMetrics, kRegimeCount> per_class{};
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t total = 0;
};

Metrics confusion_and_metrics(std::span<const Regime> truth, std::span<const Regime> pred);

struct Curve {
  std::vector<std::pair<double, double>> points;  // (FPR, TPR) or (recall, precision)
  std::vector<double> thresholds;                 // one per point after the anchor
  std::optional<double> auc;                      // ROC only; null when one class is missing
};

/// Threshold sweep over the sorted unique scores (descending), anchored at
/// (0, 0); trapezoid AUC.
Curve roc_curve(std::span<const double> scores, std::span<const bool> positive);

/// Same sweep; the first point is (0, 1).
Curve pr_curve(std::span<const double> scores, std::span<const bool> positive);

enum class CiMethod { Wald, Wilson };

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
};

Interval binomial_ci(double accuracy, std::size_t n, double level, CiMethod method = CiMethod::Wald);

/// ||mu_a - mu_b||^2 / Tr(S_a + S_b) with population covariances; restricted
/// to one column when `feature` is set.
double fisher_criterion(const Dataset& ds, Regime a, Regime b,
                        std::optional<std::size_t> feature = std::nullopt);

struct Importance {
  std::size_t index = 0;
  std::string feature;
  double score = 0.0;
};

/// Mean accuracy drop over `repeats` seeded column permutations, sorted by
/// descending score (ties by column index).
std::vector<Importance> permutation_importance(const Predictor& predictor, const Dataset& test,
                                               std::size_t repeats, std::uint64_t seed);

struct GridPoint {
  double c = 0.0;
  double gamma = 0.0;
  double score = 0.0;
};

/// SVM C x gamma grid scored by stratified inner k-fold accuracy. Returns the
/// best hyperparameters (first best in grid order) and fills `trace`.
Hyperparams grid_search_svm(const Dataset& ds, const Hyperparams& base, std::uint64_t seed,
                            std::vector<GridPoint>* trace = nullptr,
                            std::span<const double> cs = {}, std::span<const double> gammas = {},
                            std::size_t inner_k = 5);

struct EvalOptions {
  bool holdout = true;
  bool kfold = true;
  bool loo = false;
  double test_fraction = 0.25;
  std::size_t k = 10;
  std::uint64_t seed = 42;
  double ci_level = 0.95;
  CiMethod ci_method = CiMethod::Wald;
  std::size_t importance_repeats = 10;
  bool grid_search = false;
  std::optional<double> min_accuracy;
  std::optional<double> min_macro_f1;
  std::optional<double> min_cv_mean;

  void validate() const;
};

struct Timing {
  double train_s = 0.0;
  double infer_s_per_sample = 0.0;
};

struct EvalReport {
  ModelKind kind = ModelKind::SvmRbf;
  Hyperparams hyperparams;
  std::size_t samples = 0;
  std::size_t dims = 0;
  std::array<std::size_t, kRegimeCount> class_counts{};

  std::optional<Metrics> holdout;
  std::size_t train_size = 0;
  std::array<Curve, kRegimeCount> roc{};
  std::array<Curve, kRegimeCount> pr{};
  std::optional<Interval> ci;
  std::vector<Importance> importance;
  std::optional<CvSummary> kfold;
  std::optional<CvSummary> loo;
  std::vector<std::pair<std::string, double>> fisher;  // "A|B" -> J
  std::vector<GridPoint> grid;
  std::vector<std::string> violations;

  Timing timing;
};

EvalReport evaluate(const Dataset& ds, ModelKind kind, const Hyperparams& hp,
                    const EvalOptions& options);

/// Timing lives under the top-level "timing" key only.
nlohmann::json report_to_json(const EvalReport& report);

/// Writes <dir>/roc_<class>.csv and <dir>/pr_<class>.csv.
void write_curve_csvs(const std::string& dir, const EvalReport& report,
                      const std::string& comment = {});

}  // namespace arcstab
