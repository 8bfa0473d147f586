#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "arcstab/features.hpp"
#include "arcstab/signal.hpp"

namespace arcstab {

/// Labeled feature matrix. Rows are raw (unstandardized) feature vectors.
struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<Regime> y;
  std::vector<std::string> feature_names;

  std::size_t size() const { return y.size(); }
  std::size_t dims() const { return x.empty() ? feature_names.size() : x.front().size(); }
  std::array<std::size_t, kRegimeCount> class_counts() const;
  std::size_t classes_present() const;

  Dataset subset(std::span<const std::size_t> indices) const;

  /// Equal lengths, consistent dimension, finite values.
  void validate() const;
};

/// Rows must all carry a label.
Dataset dataset_from_rows(const std::vector<FeatureRow>& rows);

class Standardizer {
 public:
  Standardizer() = default;

  /// Zero-variance columns are dropped and recorded in the mask.
  static Standardizer fit(const Dataset& train);

  std::vector<double> apply(std::span<const double> v) const;

  std::size_t input_dims() const { return mask_.size(); }
  std::size_t output_dims() const { return mean_.size(); }
  const std::vector<bool>& mask() const { return mask_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

 private:
  std::vector<bool> mask_;     // per input column: kept?
  std::vector<double> mean_;   // per kept column
  std::vector<double> scale_;  // population std per kept column
};

enum class ModelKind { SvmRbf, Knn, Tree, Bagged };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct SvmParams {
  double c = 10.0;
  double gamma = 0.0;  // 0 selects 1 / (standardized dimension)
  double tol = 1e-3;
  std::size_t max_iter = 10'000'000;
};

struct KnnParams {
  std::size_t k = 3;
};

struct TreeParams {
  std::size_t max_depth = 8;  // 0 = unlimited
  std::size_t min_leaf = 1;
};

struct BaggedParams {
  std::size_t n_trees = 30;
  double sample_fraction = 1.0;  // bootstrap size relative to the training set
};

struct Hyperparams {
  SvmParams svm;
  KnnParams knn;
  TreeParams tree;
  BaggedParams bagged;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Unknown keys are rejected; missing keys keep their defaults.
nlohmann::json hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Binary soft-margin machine over its support vectors; labels are +1/-1.
struct BinarySvm {
  std::vector<std::vector<double>> support;
  std::vector<double> alpha;
  std::vector<int> y;
  double bias = 0.0;

  double decision(std::span<const double> v, double gamma) const;
};

struct SmoResult {
  BinarySvm machine;
  std::vector<double> alpha;  // one per training point
  std::size_t iterations = 0;
  double gap = 0.0;           // final maximal KKT violation m(a) - M(a)
  bool converged = false;
};

/// Dual SMO with maximal-violating-pair selection on a precomputed RBF
/// kernel. Stops when the violating-pair gap drops below params.tol.
SmoResult smo_train(const std::vector<std::vector<double>>& x, std::span<const int> y,
                    const SvmParams& params, double gamma);

struct SvmModel {
  double gamma = 0.0;
  double c = 0.0;
  // One machine per class in `TrainedModel::classes` order.
  std::vector<BinarySvm> machines;
};

struct KnnModel {
  std::size_t k = 3;
  std::vector<std::vector<double>> points;  // standardized
  std::vector<Regime> labels;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::array<double, kRegimeCount> freq{};  // leaf class frequencies
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // root at index 0

  std::array<double, kRegimeCount> leaf(std::span<const double> v) const;
};

struct BaggedModel {
  std::vector<TreeModel> trees;
};

struct Prediction {
  Regime label = Regime::Stable;
  // Indexed by regime; classes absent from training score -infinity.
  std::array<double, kRegimeCount> scores{};
};

struct TrainedModel {
  ModelKind kind = ModelKind::SvmRbf;
  Standardizer standardizer;
  std::vector<Regime> classes;  // present classes in fixed order
  std::vector<std::string> feature_names;
  Hyperparams hyperparams;
  std::variant<SvmModel, KnnModel, TreeModel, BaggedModel> params;
  // Early-warning ASI threshold calibrated on the training set, if any.
  std::optional<double> asi_threshold;

  Prediction predict(std::span<const double> v) const;
};

TrainedModel train(const Dataset& train_set, ModelKind kind, const Hyperparams& hp = {});

/// CART tree on standardized data; `indices` may repeat (bootstrap).
TreeModel grow_tree(const std::vector<std::vector<double>>& x, std::span<const Regime> y,
                    std::span<const std::size_t> indices, const TreeParams& params);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace arcstab
