#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wfbench/features.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

enum class ClassifierKind { LL, HA, PA };

inline const char* classifier_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::LL: return "ll";
    case ClassifierKind::HA: return "ha";
    case ClassifierKind::PA: return "pa";
  }
  return "?";
}

inline ClassifierKind classifier_from_name(std::string_view s) {
  if (s == "ll") return ClassifierKind::LL;
  if (s == "ha") return ClassifierKind::HA;
  if (s == "pa") return ClassifierKind::PA;
  throw DataError("unknown classifier: " + std::string(s));
}

struct LabeledTrace {
  Trace trace;
  std::string label;
};

/// Multinomial naive Bayes with add-one smoothing over the union vocabulary.
/// Keys never seen in training fall back to the per-class default
/// likelihood.
struct NaiveBayesModel {
  std::vector<std::string> classes;  // sorted
  std::vector<FeatureKey> vocab;     // sorted
  std::vector<double> log_prior;
  std::vector<std::vector<double>> log_lik;  // class x vocab
  std::vector<double> log_default;           // class: log(1 / (mass + |vocab|))
};

/// One-vs-rest linear classifiers over standardized features.
struct LinearModel {
  std::vector<std::string> classes;  // sorted
  std::vector<FeatureKey> features;  // sorted
  std::vector<double> mean;
  std::vector<double> inv_std;
  std::vector<std::vector<double>> weights;  // class x dim
  std::vector<double> bias;
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::LL;
  NaiveBayesModel nb;
  LinearModel linear;

  const std::vector<std::string>& classes() const {
    return kind == ClassifierKind::PA ? linear.classes : nb.classes;
  }
};

struct Prediction {
  std::string site_id;
  double score = 0.0;
};

namespace detail {

/// HA frequencies scaled to pseudo-counts for the multinomial model.
inline std::map<FeatureKey, double> classifier_counts(ClassifierKind kind, const Trace& trace) {
  if (kind == ClassifierKind::LL) return ll_features(trace).entries;
  std::map<FeatureKey, double> counts;
  for (const auto& [key, freq] : ha_features(trace).entries) {
    counts[key] = std::round(freq * 1000.0);
  }
  return counts;
}

inline TrainedModel train_naive_bayes(ClassifierKind kind, const std::vector<LabeledTrace>& data) {
  std::map<std::string, std::map<FeatureKey, double>> class_counts;
  std::map<std::string, double> class_mass;
  std::map<std::string, std::size_t> class_traces;
  std::set<FeatureKey> vocab_set;
  std::size_t total_traces = 0;
  for (const auto& item : data) {
    if (item.trace.packets.empty()) continue;
    const auto counts = classifier_counts(kind, item.trace);
    auto& agg = class_counts[item.label];
    for (const auto& [key, cnt] : counts) {
      agg[key] += cnt;
      class_mass[item.label] += cnt;
      vocab_set.insert(key);
    }
    ++class_traces[item.label];
    ++total_traces;
  }
  if (class_counts.size() < 2) throw DataError("train: need at least 2 classes");

  TrainedModel model;
  model.kind = kind;
  NaiveBayesModel& nb = model.nb;
  nb.vocab.assign(vocab_set.begin(), vocab_set.end());
  const double v = static_cast<double>(nb.vocab.size());
  for (const auto& [label, counts] : class_counts) {
    nb.classes.push_back(label);
    nb.log_prior.push_back(std::log(static_cast<double>(class_traces[label]) /
                                    static_cast<double>(total_traces)));
    const double denom = class_mass[label] + v;
    nb.log_default.push_back(std::log(1.0 / denom));
    std::vector<double> row;
    row.reserve(nb.vocab.size());
    for (const FeatureKey key : nb.vocab) {
      const auto it = counts.find(key);
      const double cnt = it == counts.end() ? 0.0 : it->second;
      row.push_back(std::log((cnt + 1.0) / denom));
    }
    nb.log_lik.push_back(std::move(row));
  }
  return model;
}

inline TrainedModel train_linear(const std::vector<LabeledTrace>& data, std::uint64_t seed) {
  std::vector<std::map<FeatureKey, double>> rows;
  std::vector<std::string> labels;
  std::set<std::string> class_set;
  std::set<FeatureKey> feature_set;
  for (const auto& item : data) {
    if (item.trace.packets.empty()) continue;
    rows.push_back(pa_features(item.trace).entries);
    labels.push_back(item.label);
    class_set.insert(item.label);
    for (const auto& [key, value] : rows.back()) feature_set.insert(key);
  }
  if (class_set.size() < 2) throw DataError("train: need at least 2 classes");

  TrainedModel model;
  model.kind = ClassifierKind::PA;
  LinearModel& lm = model.linear;
  lm.classes.assign(class_set.begin(), class_set.end());
  lm.features.assign(feature_set.begin(), feature_set.end());
  const std::size_t n = rows.size();
  const std::size_t dim = lm.features.size();
  const std::size_t n_classes = lm.classes.size();

  std::map<FeatureKey, std::size_t> index;
  for (std::size_t j = 0; j < dim; ++j) index[lm.features[j]] = j;
  std::vector<std::vector<double>> x(n, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [key, value] : rows[i]) x[i][index[key]] = value;
  }

  lm.mean.assign(dim, 0.0);
  lm.inv_std.assign(dim, 1.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = x[i][j] - mean;
      var += diff * diff;
    }
    var /= static_cast<double>(n);
    lm.mean[j] = mean;
    lm.inv_std[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) x[i][j] = (x[i][j] - lm.mean[j]) * lm.inv_std[j];
  }

  std::vector<int> y(n * n_classes, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(
        std::lower_bound(lm.classes.begin(), lm.classes.end(), labels[i]) - lm.classes.begin());
    y[i * n_classes + c] = 1;
  }

  // Pegasos subgradient descent, one binary problem per class with a shared
  // sample schedule. Weight vectors are kept as scale * w to make the
  // no-violation shrink O(1).
  constexpr int kEpochs = 200;
  constexpr double kLambda = 1e-4;
  std::vector<std::vector<double>> w(n_classes, std::vector<double>(dim, 0.0));
  std::vector<double> scale(n_classes, 1.0);
  std::vector<double> bias(n_classes, 0.0);
  Rng rng(mix_seed(seed, 0x9e6a));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::uint64_t t = 0;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    rng.shuffle(order);
    for (const std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (kLambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * kLambda;  // = 1 - 1/t
      for (std::size_t c = 0; c < n_classes; ++c) {
        double margin = bias[c];
        const auto& wc = w[c];
        const auto& xi = x[i];
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += wc[j] * xi[j];
        margin += scale[c] * dot;
        const double yc = y[i * n_classes + c];
        scale[c] *= shrink;
        if (scale[c] < 1e-9) {  // refold to keep the factor well-scaled
          for (double& wj : w[c]) wj *= scale[c];
          scale[c] = 1.0;
        }
        if (yc * margin < 1.0) {
          const double step = eta * yc / scale[c];
          for (std::size_t j = 0; j < dim; ++j) w[c][j] += step * xi[j];
          bias[c] += eta * yc;
        }
      }
    }
  }
  lm.weights.assign(n_classes, std::vector<double>(dim, 0.0));
  lm.bias = bias;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) lm.weights[c][j] = scale[c] * w[c][j];
  }
  return model;
}

}  // namespace detail

/// Trains the requested classifier on labeled traces. LL and HA are
/// multinomial naive Bayes; PA is one-vs-rest linear max-margin trained by
/// seeded epoch-based subgradient descent. Traces with no packets are
/// skipped.
inline TrainedModel train(ClassifierKind kind, const std::vector<LabeledTrace>& data,
                          std::uint64_t seed = 0) {
  if (kind == ClassifierKind::PA) return detail::train_linear(data, seed);
  return detail::train_naive_bayes(kind, data);
}

inline Prediction predict(const TrainedModel& model, const Trace& trace) {
  if (model.kind == ClassifierKind::PA) {
    const LinearModel& lm = model.linear;
    const auto fv = pa_features(trace).entries;
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < lm.classes.size(); ++c) {
      double score = lm.bias[c];
      for (std::size_t j = 0; j < lm.features.size(); ++j) {
        const auto it = fv.find(lm.features[j]);
        const double raw = it == fv.end() ? 0.0 : it->second;
        score += lm.weights[c][j] * (raw - lm.mean[j]) * lm.inv_std[j];
      }
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return Prediction{lm.classes[best], best_score};
  }

  const NaiveBayesModel& nb = model.nb;
  const auto counts = detail::classifier_counts(model.kind, trace);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < nb.classes.size(); ++c) {
    double score = nb.log_prior[c];
    for (const auto& [key, cnt] : counts) {
      const auto it = std::lower_bound(nb.vocab.begin(), nb.vocab.end(), key);
      if (it != nb.vocab.end() && *it == key) {
        score += cnt * nb.log_lik[c][static_cast<std::size_t>(it - nb.vocab.begin())];
      } else {
        score += cnt * nb.log_default[c];
      }
    }
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return Prediction{nb.classes[best], best_score};
}

// --- model file format (versioned key/value text) ---

inline void save_model(const TrainedModel& model, std::ostream& out) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "wfbench-model 1\n";
  out << "kind " << classifier_name(model.kind) << "\n";
  if (model.kind == ClassifierKind::PA) {
    const LinearModel& lm = model.linear;
    out << "features " << lm.features.size() << "\n";
    for (std::size_t j = 0; j < lm.features.size(); ++j) {
      out << "feature " << fkey::name(lm.features[j]) << " " << num(lm.mean[j]) << " "
          << num(lm.inv_std[j]) << "\n";
    }
    out << "classes " << lm.classes.size() << "\n";
    for (std::size_t c = 0; c < lm.classes.size(); ++c) {
      out << "class " << lm.classes[c] << "\n";
      out << "bias " << num(lm.bias[c]) << "\n";
      out << "weights";
      for (const double wj : lm.weights[c]) out << " " << num(wj);
      out << "\n";
    }
    return;
  }
  const NaiveBayesModel& nb = model.nb;
  out << "vocab " << nb.vocab.size() << "\n";
  for (const FeatureKey key : nb.vocab) out << "key " << fkey::name(key) << "\n";
  out << "classes " << nb.classes.size() << "\n";
  for (std::size_t c = 0; c < nb.classes.size(); ++c) {
    out << "class " << nb.classes[c] << "\n";
    out << "prior " << num(nb.log_prior[c]) << "\n";
    out << "default " << num(nb.log_default[c]) << "\n";
    out << "lik";
    for (const double l : nb.log_lik[c]) out << " " << num(l);
    out << "\n";
  }
}

inline TrainedModel load_model(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "wfbench-model" || version != 1) {
    throw DataError("model file: bad header");
  }
  std::string word, kind_name;
  if (!(in >> word >> kind_name) || word != "kind") throw DataError("model file: missing kind");
  TrainedModel model;
  model.kind = classifier_from_name(kind_name);

  auto expect = [&](const char* key) {
    if (!(in >> word) || word != key) {
      throw DataError(std::string("model file: expected '") + key + "'");
    }
  };

  if (model.kind == ClassifierKind::PA) {
    LinearModel& lm = model.linear;
    std::size_t n_features = 0, n_classes = 0;
    expect("features");
    in >> n_features;
    for (std::size_t j = 0; j < n_features; ++j) {
      std::string key;
      double mean = 0.0, inv_std = 1.0;
      expect("feature");
      in >> key >> mean >> inv_std;
      lm.features.push_back(fkey::parse(key));
      lm.mean.push_back(mean);
      lm.inv_std.push_back(inv_std);
    }
    expect("classes");
    in >> n_classes;
    for (std::size_t c = 0; c < n_classes; ++c) {
      expect("class");
      std::string label;
      in >> label;
      lm.classes.push_back(label);
      expect("bias");
      double b = 0.0;
      in >> b;
      lm.bias.push_back(b);
      expect("weights");
      std::vector<double> row(n_features, 0.0);
      for (double& wj : row) in >> wj;
      lm.weights.push_back(std::move(row));
    }
    if (!in) throw DataError("model file: truncated");
    return model;
  }

  NaiveBayesModel& nb = model.nb;
  std::size_t n_vocab = 0, n_classes = 0;
  expect("vocab");
  in >> n_vocab;
  for (std::size_t j = 0; j < n_vocab; ++j) {
    expect("key");
    std::string key;
    in >> key;
    nb.vocab.push_back(fkey::parse(key));
  }
  expect("classes");
  in >> n_classes;
  for (std::size_t c = 0; c < n_classes; ++c) {
    expect("class");
    std::string label;
    in >> label;
    nb.classes.push_back(label);
    expect("prior");
    double prior = 0.0;
    in >> prior;
    nb.log_prior.push_back(prior);
    expect("default");
    double dflt = 0.0;
    in >> dflt;
    nb.log_default.push_back(dflt);
    expect("lik");
    std::vector<double> row(n_vocab, 0.0);
    for (double& l : row) in >> l;
    nb.log_lik.push_back(std::move(row));
  }
  if (!in) throw DataError("model file: truncated");
  return model;
}

}  // namespace wfbench
