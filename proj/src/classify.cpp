#include "arcstab/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "arcstab/errors.hpp"
#include "arcstab/rng.hpp"
#include "json_util.hpp"

namespace arcstab {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kModelVersion = 1;

// Highest score wins; ties go to the earlier class.
Regime argmax(const std::array<double, kRegimeCount>& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kRegimeCount; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return kRegimes[best];
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double gini(const std::array<std::size_t, kRegimeCount>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double g = 1.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    g -= p * p;
  }
  return g;
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  std::span<const Regime> y;
  const TreeParams& params;
  std::vector<TreeNode> nodes;

  std::size_t grow(std::vector<std::size_t> idx, std::size_t depth) {
    const std::size_t id = nodes.size();
    nodes.emplace_back();
    const std::size_t n = idx.size();
    std::array<std::size_t, kRegimeCount> counts{};
    for (auto i : idx) ++counts[regime_index(y[i])];
    for (std::size_t c = 0; c < kRegimeCount; ++c) {
      nodes[id].freq[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    }
    const double parent = gini(counts, n);
    const bool depth_cap = params.max_depth != 0 && depth >= params.max_depth;
    if (parent == 0.0 || depth_cap || n < 2 * params.min_leaf) return id;

    double best = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    const std::size_t dims = x[idx.front()].size();
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < dims; ++f) {
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
      std::array<std::size_t, kRegimeCount> left{};
      // Candidate thresholds ascend, so strict improvement keeps the lowest.
      for (std::size_t p = 0; p + 1 < n; ++p) {
        ++left[regime_index(y[order[p]])];
        const double a = x[order[p]][f];
        const double b = x[order[p + 1]][f];
        const std::size_t nl = p + 1;
        const std::size_t nr = n - nl;
        if (!(a < b) || nl < params.min_leaf || nr < params.min_leaf) continue;
        std::array<std::size_t, kRegimeCount> right{};
        for (std::size_t c = 0; c < kRegimeCount; ++c) right[c] = counts[c] - left[c];
        const double g = (static_cast<double>(nl) * gini(left, nl) +
                          static_cast<double>(nr) * gini(right, nr)) /
                         static_cast<double>(n);
        if (g < best) {
          best = g;
          best_feature = static_cast<int>(f);
          double t = 0.5 * (a + b);
          if (!(t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<std::size_t>(best_feature);
    std::vector<std::size_t> lo;
    std::vector<std::size_t> hi;
    for (auto i : idx) (x[i][f] <= best_threshold ? lo : hi).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const std::size_t l = grow(std::move(lo), depth + 1);
    const std::size_t r = grow(std::move(hi), depth + 1);
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

json tree_to_json(const TreeModel& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"freq", n.freq}});
  }
  return {{"nodes", nodes}};
}

TreeModel tree_from_json(const json& j) {
  TreeModel tree;
  for (const auto& n : detail::read_req<json>(j, "nodes", "model.tree")) {
    TreeNode node;
    node.feature = detail::read_req<int>(n, "feature", "model.tree");
    node.threshold = detail::read_req<double>(n, "threshold", "model.tree");
    node.left = detail::read_req<std::size_t>(n, "left", "model.tree");
    node.right = detail::read_req<std::size_t>(n, "right", "model.tree");
    node.freq = detail::read_req<std::array<double, kRegimeCount>>(n, "freq", "model.tree");
    tree.nodes.push_back(node);
  }
  const std::size_t count = tree.nodes.size();
  if (count == 0) throw FormatError("model.tree: empty tree");
  for (const auto& n : tree.nodes) {
    if (n.feature >= 0 && (n.left >= count || n.right >= count)) {
      throw FormatError("model.tree: child index out of range");
    }
  }
  return tree;
}

std::vector<std::string> regime_names(const std::vector<Regime>& labels) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (auto r : labels) out.emplace_back(regime_name(r));
  return out;
}

std::vector<Regime> parse_regimes(const std::vector<std::string>& names) {
  std::vector<Regime> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(parse_regime(n));
  return out;
}

}  // namespace

std::array<std::size_t, kRegimeCount> Dataset::class_counts() const {
  std::array<std::size_t, kRegimeCount> counts{};
  for (auto r : y) ++counts[regime_index(r)];
  return counts;
}

std::size_t Dataset::classes_present() const {
  const auto counts = class_counts();
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                [](std::size_t c) { return c > 0; }));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.feature_names = feature_names;
  out.x.reserve(indices.size());
  out.y.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw InvalidArgument("dataset subset index out of range");
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (x.size() != y.size()) throw InvalidArgument("dataset: vectors and labels differ in length");
  if (!feature_names.empty() && !x.empty() && feature_names.size() != x.front().size()) {
    throw InvalidArgument("dataset: feature name count does not match dimension");
  }
  const std::size_t d = dims();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw InvalidArgument("dataset: ragged feature rows");
    for (double v : x[i]) {
      if (!std::isfinite(v)) {
        throw InvalidArgument("dataset: non-finite feature in row " + std::to_string(i));
      }
    }
  }
}

Dataset dataset_from_rows(const std::vector<FeatureRow>& rows) {
  Dataset ds;
  for (auto name : kFeatureNames) ds.feature_names.emplace_back(name);
  for (const auto& row : rows) {
    if (!row.label) {
      throw InvalidArgument("feature row " + std::to_string(row.frame) + " has no label");
    }
    const auto a = row.features.to_array();
    ds.x.emplace_back(a.begin(), a.end());
    ds.y.push_back(*row.label);
  }
  ds.validate();
  return ds;
}

Standardizer Standardizer::fit(const Dataset& train) {
  train.validate();
  if (train.size() == 0) throw EmptyInput("standardizer: empty training set");
  const std::size_t d = train.dims();
  const double n = static_cast<double>(train.size());
  Standardizer s;
  s.mask_.assign(d, false);
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0;
    for (const auto& row : train.x) mean += row[f];
    mean /= n;
    double var = 0.0;
    for (const auto& row : train.x) var += (row[f] - mean) * (row[f] - mean);
    const double sd = std::sqrt(var / n);
    const double floor = 1e-12 * std::max(std::abs(mean), std::numeric_limits<double>::min());
    if (!(sd > floor)) continue;
    s.mask_[f] = true;
    s.mean_.push_back(mean);
    s.scale_.push_back(sd);
  }
  if (s.mean_.empty()) throw InvalidArgument("standardizer: every feature is constant");
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> v) const {
  if (v.size() != mask_.size()) {
    throw InvalidArgument("feature dimension " + std::to_string(v.size()) + " does not match " +
                          std::to_string(mask_.size()));
  }
  std::vector<double> out;
  out.reserve(mean_.size());
  for (std::size_t f = 0, k = 0; f < v.size(); ++f) {
    if (!mask_[f]) continue;
    if (!std::isfinite(v[f])) throw InvalidArgument("non-finite feature value");
    out.push_back((v[f] - mean_[k]) / scale_[k]);
    ++k;
  }
  return out;
}

json Standardizer::to_json() const {
  return {{"mask", mask_}, {"mean", mean_}, {"scale", scale_}};
}

Standardizer Standardizer::from_json(const json& j) {
  Standardizer s;
  s.mask_ = detail::read_req<std::vector<bool>>(j, "mask", "model.standardizer");
  s.mean_ = detail::read_req<std::vector<double>>(j, "mean", "model.standardizer");
  s.scale_ = detail::read_req<std::vector<double>>(j, "scale", "model.standardizer");
  const auto kept = static_cast<std::size_t>(std::count(s.mask_.begin(), s.mask_.end(), true));
  if (kept != s.mean_.size() || kept != s.scale_.size()) {
    throw FormatError("model.standardizer: mask does not match statistics");
  }
  return s;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::SvmRbf: return "svm_rbf";
    case ModelKind::Knn: return "knn";
    case ModelKind::Tree: return "tree";
    case ModelKind::Bagged: return "bagged";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "svm_rbf" || name == "svm") return ModelKind::SvmRbf;
  if (name == "knn") return ModelKind::Knn;
  if (name == "tree") return ModelKind::Tree;
  if (name == "bagged") return ModelKind::Bagged;
  throw InvalidArgument("unknown model kind '" + std::string(name) + "'");
}

void Hyperparams::validate() const {
  if (!(std::isfinite(svm.c) && svm.c > 0.0)) throw InvalidArgument("svm C must be > 0");
  if (!(std::isfinite(svm.gamma) && svm.gamma >= 0.0)) {
    throw InvalidArgument("svm gamma must be > 0 (or 0 for automatic)");
  }
  if (!(std::isfinite(svm.tol) && svm.tol > 0.0)) throw InvalidArgument("svm tol must be > 0");
  if (svm.max_iter == 0) throw InvalidArgument("svm max_iter must be > 0");
  if (knn.k == 0 || knn.k % 2 == 0) throw InvalidArgument("knn k must be odd and >= 1");
  if (tree.min_leaf == 0) throw InvalidArgument("tree min_leaf must be >= 1");
  if (bagged.n_trees == 0) throw InvalidArgument("bagged n_trees must be >= 1");
  if (!(bagged.sample_fraction > 0.0 && bagged.sample_fraction <= 1.0)) {
    throw InvalidArgument("bagged sample_fraction must lie in (0, 1]");
  }
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {{"svm", {{"c", hp.svm.c}, {"gamma", hp.svm.gamma}, {"tol", hp.svm.tol},
                   {"max_iter", hp.svm.max_iter}}},
          {"knn", {{"k", hp.knn.k}}},
          {"tree", {{"max_depth", hp.tree.max_depth}, {"min_leaf", hp.tree.min_leaf}}},
          {"bagged", {{"n_trees", hp.bagged.n_trees},
                      {"sample_fraction", hp.bagged.sample_fraction}}},
          {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
  using detail::check_keys;
  using detail::read_opt;
  Hyperparams hp;
  check_keys(j, {"svm", "knn", "tree", "bagged", "seed"}, "hyperparams");
  if (auto it = j.find("svm"); it != j.end()) {
    check_keys(*it, {"c", "gamma", "tol", "max_iter"}, "hyperparams.svm");
    read_opt(*it, "c", hp.svm.c, "hyperparams.svm");
    read_opt(*it, "gamma", hp.svm.gamma, "hyperparams.svm");
    read_opt(*it, "tol", hp.svm.tol, "hyperparams.svm");
    read_opt(*it, "max_iter", hp.svm.max_iter, "hyperparams.svm");
  }
  if (auto it = j.find("knn"); it != j.end()) {
    check_keys(*it, {"k"}, "hyperparams.knn");
    read_opt(*it, "k", hp.knn.k, "hyperparams.knn");
  }
  if (auto it = j.find("tree"); it != j.end()) {
    check_keys(*it, {"max_depth", "min_leaf"}, "hyperparams.tree");
    read_opt(*it, "max_depth", hp.tree.max_depth, "hyperparams.tree");
    read_opt(*it, "min_leaf", hp.tree.min_leaf, "hyperparams.tree");
  }
  if (auto it = j.find("bagged"); it != j.end()) {
    check_keys(*it, {"n_trees", "sample_fraction"}, "hyperparams.bagged");
    read_opt(*it, "n_trees", hp.bagged.n_trees, "hyperparams.bagged");
    read_opt(*it, "sample_fraction", hp.bagged.sample_fraction, "hyperparams.bagged");
  }
  read_opt(j, "seed", hp.seed, "hyperparams");
  try {
    hp.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return hp;
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

double BinarySvm::decision(std::span<const double> v, double gamma) const {
  double f = bias;
  for (std::size_t i = 0; i < support.size(); ++i) {
    f += alpha[i] * y[i] * rbf_kernel(support[i], v, gamma);
  }
  return f;
}

SmoResult smo_train(const std::vector<std::vector<double>>& x, std::span<const int> y,
                    const SvmParams& params, double gamma) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InvalidArgument("smo: vectors and labels differ in length");
  if (n == 0) throw EmptyInput("smo: empty training set");
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y) {
    if (v != 1 && v != -1) throw InvalidArgument("smo: labels must be +1 or -1");
    (v > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw InvalidArgument("smo: both labels must be present");
  if (!(gamma > 0.0)) throw InvalidArgument("smo: gamma must be > 0");

  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = rbf_kernel(x[i], x[j], gamma);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }

  const double c = params.c;
  std::vector<double> alpha(n, 0.0);
  // g[t] = (Q alpha)_t - 1 with Q_ij = y_i y_j K_ij.
  std::vector<double> g(n, -1.0);
  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0.0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] < 0 && alpha[t] < c) || (y[t] > 0 && alpha[t] > 0.0);
  };

  SmoResult result;
  double m_up = 0.0;
  double m_low = 0.0;
  for (;;) {
    std::size_t i = n;
    std::size_t j = n;
    m_up = kNegInf;
    m_low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * g[t];
      if (in_up(t) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(t) && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    if (i == n || j == n || m_up - m_low < params.tol) {
      result.converged = true;
      break;
    }
    if (result.iterations >= params.max_iter) break;
    ++result.iterations;

    // Move along d_i = y_i, d_j = -y_j; curvature K_ii + K_jj - 2 K_ij.
    const double curv = std::max(2.0 - 2.0 * k[i * n + j], 1e-12);
    double t = (m_up - m_low) / curv;
    const double cap_i = y[i] > 0 ? c - alpha[i] : alpha[i];
    const double cap_j = y[j] > 0 ? alpha[j] : c - alpha[j];
    t = std::min({t, cap_i, cap_j});

    const double ai = alpha[i] + y[i] * t;
    const double aj = alpha[j] - y[j] * t;
    alpha[i] = t == cap_i ? (y[i] > 0 ? c : 0.0) : std::clamp(ai, 0.0, c);
    alpha[j] = t == cap_j ? (y[j] > 0 ? 0.0 : c) : std::clamp(aj, 0.0, c);
    for (std::size_t s = 0; s < n; ++s) {
      g[s] += y[s] * t * (k[s * n + i] - k[s * n + j]);
    }
  }
  result.gap = m_up - m_low;

  // Bias from free vectors, else the middle of the feasible interval.
  double sum = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < c) {
      sum += -y[t] * g[t];
      ++free;
    }
  }
  double bias = 0.0;
  if (free > 0) {
    bias = sum / static_cast<double>(free);
  } else if (std::isfinite(m_up) && std::isfinite(m_low)) {
    bias = 0.5 * (m_up + m_low);
  }

  result.machine.bias = bias;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      result.machine.support.push_back(x[t]);
      result.machine.alpha.push_back(alpha[t]);
      result.machine.y.push_back(y[t]);
    }
  }
  result.alpha = std::move(alpha);
  return result;
}

std::array<double, kRegimeCount> TreeModel::leaf(std::span<const double> v) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& n = nodes[at];
    at = v[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[at].freq;
}

TreeModel grow_tree(const std::vector<std::vector<double>>& x, std::span<const Regime> y,
                    std::span<const std::size_t> indices, const TreeParams& params) {
  if (indices.empty()) throw EmptyInput("tree: empty training set");
  TreeBuilder b{x, y, params, {}};
  b.grow(std::vector<std::size_t>(indices.begin(), indices.end()), 0);
  return TreeModel{std::move(b.nodes)};
}

Prediction TrainedModel::predict(std::span<const double> v) const {
  const std::vector<double> z = standardizer.apply(v);
  Prediction p;
  p.scores.fill(0.0);
  switch (kind) {
    case ModelKind::SvmRbf: {
      const auto& svm = std::get<SvmModel>(params);
      p.scores.fill(kNegInf);
      for (std::size_t m = 0; m < classes.size(); ++m) {
        p.scores[regime_index(classes[m])] = svm.machines[m].decision(z, svm.gamma);
      }
      break;
    }
    case ModelKind::Knn: {
      const auto& knn = std::get<KnnModel>(params);
      std::vector<std::size_t> order(knn.points.size());
      std::vector<double> dist(knn.points.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = squared_distance(knn.points[i], z);
      const std::size_t k = std::min(knn.k, order.size());
      // Ties by (distance, class order, stored vector) keep the result
      // independent of training order.
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          if (dist[a] != dist[b]) return dist[a] < dist[b];
                          if (knn.labels[a] != knn.labels[b]) return knn.labels[a] < knn.labels[b];
                          return knn.points[a] < knn.points[b];
                        });
      for (std::size_t i = 0; i < k; ++i) {
        p.scores[regime_index(knn.labels[order[i]])] += 1.0 / static_cast<double>(k);
      }
      break;
    }
    case ModelKind::Tree:
      p.scores = std::get<TreeModel>(params).leaf(z);
      break;
    case ModelKind::Bagged: {
      const auto& bag = std::get<BaggedModel>(params);
      for (const auto& tree : bag.trees) {
        const auto f = tree.leaf(z);
        for (std::size_t c = 0; c < kRegimeCount; ++c) p.scores[c] += f[c];
      }
      for (double& s : p.scores) s /= static_cast<double>(bag.trees.size());
      break;
    }
  }
  p.label = argmax(p.scores);
  return p;
}

TrainedModel train(const Dataset& train_set, ModelKind kind, const Hyperparams& hp) {
  hp.validate();
  train_set.validate();
  if (train_set.size() == 0) throw EmptyInput("training set is empty");
  if (train_set.classes_present() < 2) {
    throw InvalidArgument("training set needs at least two classes");
  }

  TrainedModel model;
  model.kind = kind;
  model.hyperparams = hp;
  model.feature_names = train_set.feature_names;
  model.standardizer = Standardizer::fit(train_set);
  const auto counts = train_set.class_counts();
  for (auto r : kRegimes) {
    if (counts[regime_index(r)] > 0) model.classes.push_back(r);
  }

  std::vector<std::vector<double>> z;
  z.reserve(train_set.size());
  for (const auto& row : train_set.x) z.push_back(model.standardizer.apply(row));

  switch (kind) {
    case ModelKind::SvmRbf: {
      SvmModel svm;
      svm.c = hp.svm.c;
      svm.gamma = hp.svm.gamma > 0.0
                      ? hp.svm.gamma
                      : 1.0 / static_cast<double>(model.standardizer.output_dims());
      std::vector<int> y(train_set.size());
      for (auto cls : model.classes) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = train_set.y[i] == cls ? 1 : -1;
        SvmParams sp = hp.svm;
        sp.gamma = svm.gamma;
        svm.machines.push_back(smo_train(z, y, sp, svm.gamma).machine);
      }
      model.params = std::move(svm);
      break;
    }
    case ModelKind::Knn:
      model.params = KnnModel{hp.knn.k, std::move(z), train_set.y};
      break;
    case ModelKind::Tree: {
      std::vector<std::size_t> idx(train_set.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      model.params = grow_tree(z, train_set.y, idx, hp.tree);
      break;
    }
    case ModelKind::Bagged: {
      BaggedModel bag;
      const std::size_t n = train_set.size();
      const auto draws = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(hp.bagged.sample_fraction * static_cast<double>(n))));
      std::vector<std::size_t> idx(draws);
      for (std::size_t t = 0; t < hp.bagged.n_trees; ++t) {
        Rng rng(derive_seed(hp.seed, t));
        for (auto& i : idx) i = rng.below(n);
        bag.trees.push_back(grow_tree(z, train_set.y, idx, hp.tree));
      }
      model.params = std::move(bag);
      break;
    }
  }
  return model;
}

json model_to_json(const TrainedModel& model) {
  json j = {{"format", "arcstab-model"},
            {"version", kModelVersion},
            {"kind", std::string(model_kind_name(model.kind))},
            {"classes", regime_names(model.classes)},
            {"feature_names", model.feature_names},
            {"standardizer", model.standardizer.to_json()},
            {"hyperparams", hyperparams_to_json(model.hyperparams)},
            {"asi_threshold", nullptr}};
  if (model.asi_threshold) j["asi_threshold"] = *model.asi_threshold;
  switch (model.kind) {
    case ModelKind::SvmRbf: {
      const auto& svm = std::get<SvmModel>(model.params);
      json machines = json::array();
      for (const auto& m : svm.machines) {
        machines.push_back({{"bias", m.bias}, {"alpha", m.alpha}, {"y", m.y}, {"support", m.support}});
      }
      j["svm"] = {{"gamma", svm.gamma}, {"c", svm.c}, {"machines", machines}};
      break;
    }
    case ModelKind::Knn: {
      const auto& knn = std::get<KnnModel>(model.params);
      j["knn"] = {{"k", knn.k}, {"points", knn.points}, {"labels", regime_names(knn.labels)}};
      break;
    }
    case ModelKind::Tree:
      j["tree"] = tree_to_json(std::get<TreeModel>(model.params));
      break;
    case ModelKind::Bagged: {
      json trees = json::array();
      for (const auto& t : std::get<BaggedModel>(model.params).trees) trees.push_back(tree_to_json(t));
      j["bagged"] = {{"trees", trees}};
      break;
    }
  }
  return j;
}

TrainedModel model_from_json(const json& j) {
  using detail::read_req;
  if (!j.is_object() || j.value("format", "") != "arcstab-model") {
    throw FormatError("not an arcstab model document");
  }
  const int version = read_req<int>(j, "version", "model");
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  TrainedModel model;
  try {
    model.kind = parse_model_kind(read_req<std::string>(j, "kind", "model"));
    model.classes = parse_regimes(read_req<std::vector<std::string>>(j, "classes", "model"));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  model.feature_names = read_req<std::vector<std::string>>(j, "feature_names", "model");
  model.standardizer = Standardizer::from_json(read_req<json>(j, "standardizer", "model"));
  try {
    model.hyperparams = hyperparams_from_json(read_req<json>(j, "hyperparams", "model"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  if (j.contains("asi_threshold") && !j["asi_threshold"].is_null()) {
    model.asi_threshold = read_req<double>(j, "asi_threshold", "model");
  }
  const std::size_t dims = model.standardizer.output_dims();
  switch (model.kind) {
    case ModelKind::SvmRbf: {
      const json s = read_req<json>(j, "svm", "model");
      SvmModel svm;
      svm.gamma = read_req<double>(s, "gamma", "model.svm");
      svm.c = read_req<double>(s, "c", "model.svm");
      for (const auto& m : read_req<json>(s, "machines", "model.svm")) {
        BinarySvm b;
        b.bias = read_req<double>(m, "bias", "model.svm");
        b.alpha = read_req<std::vector<double>>(m, "alpha", "model.svm");
        b.y = read_req<std::vector<int>>(m, "y", "model.svm");
        b.support = read_req<std::vector<std::vector<double>>>(m, "support", "model.svm");
        if (b.alpha.size() != b.support.size() || b.y.size() != b.support.size()) {
          throw FormatError("model.svm: machine arrays differ in length");
        }
        for (const auto& sv : b.support) {
          if (sv.size() != dims) throw FormatError("model.svm: support vector dimension mismatch");
        }
        svm.machines.push_back(std::move(b));
      }
      if (svm.machines.size() != model.classes.size()) {
        throw FormatError("model.svm: one machine per class expected");
      }
      model.params = std::move(svm);
      break;
    }
    case ModelKind::Knn: {
      const json s = read_req<json>(j, "knn", "model");
      KnnModel knn;
      knn.k = read_req<std::size_t>(s, "k", "model.knn");
      knn.points = read_req<std::vector<std::vector<double>>>(s, "points", "model.knn");
      knn.labels = parse_regimes(read_req<std::vector<std::string>>(s, "labels", "model.knn"));
      if (knn.points.size() != knn.labels.size() || knn.points.empty()) {
        throw FormatError("model.knn: points and labels differ in length");
      }
      model.params = std::move(knn);
      break;
    }
    case ModelKind::Tree:
      model.params = tree_from_json(read_req<json>(j, "tree", "model"));
      break;
    case ModelKind::Bagged: {
      BaggedModel bag;
      for (const auto& t : read_req<json>(read_req<json>(j, "bagged", "model"), "trees", "model.bagged")) {
        bag.trees.push_back(tree_from_json(t));
      }
      if (bag.trees.empty()) throw FormatError("model.bagged: no trees");
      model.params = std::move(bag);
      break;
    }
  }
  return model;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << model_to_json(model).dump(2) << '\n';
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace arcstab
