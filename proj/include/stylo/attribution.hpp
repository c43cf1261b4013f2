#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

// Softmax classification head over frozen chunk embeddings. Documents are
// predicted by summing chunk logits, then argmax.

struct AttributionTrainConfig {
  std::size_t epochs = 100;
  double lr = 0.5;
  std::size_t batch = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  }
};

struct AttributionModel {
  std::size_t dim = 0;
  std::vector<std::string> class_names;  // order = first seen in training
  std::vector<double> weights;           // row-major n_classes x dim
  std::vector<double> bias;              // n_classes
  AttributionTrainConfig train_config;
  std::vector<double> loss_history;  // full-train loss; [0] is pre-training

  std::size_t n_classes() const { return class_names.size(); }

  int class_index(const std::string& name) const {
    for (std::size_t c = 0; c < class_names.size(); ++c)
      if (class_names[c] == name) return static_cast<int>(c);
    return -1;
  }
};

namespace detail {

inline void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace detail

// Mean cross-entropy over the given rows, with gradients accumulated into
// grad_w/grad_b when non-null. Exposed so the gradient can be checked against
// finite differences.
inline double attribution_loss_and_grad(const EmbeddingMatrix& X, const std::vector<int>& classes,
                                        std::size_t n_classes, std::span<const std::size_t> rows,
                                        const std::vector<double>& weights,
                                        const std::vector<double>& bias,
                                        std::vector<double>* grad_w, std::vector<double>* grad_b) {
  const std::size_t dim = X.dim;
  if (grad_w) std::fill(grad_w->begin(), grad_w->end(), 0.0);
  if (grad_b) std::fill(grad_b->begin(), grad_b->end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> z(n_classes);
  for (const std::size_t r : rows) {
    const auto x = X.row(r);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double s = bias[c];
      const double* w = weights.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
      z[c] = s;
    }
    detail::softmax_inplace(z);
    const std::size_t y = static_cast<std::size_t>(classes[r]);
    loss -= std::log(std::max(z[y], 1e-300)) * inv_n;
    if (!grad_w) continue;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double g = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
      (*grad_b)[c] += g;
      double* gw = grad_w->data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) gw[d] += g * x[d];
    }
  }
  return loss;
}

// Labels per chunk row, parallel to X. Class order is first-seen; parameters
// start at zero, so the initial loss is exactly ln(n_classes).
inline AttributionModel train_attribution(const EmbeddingMatrix& X,
                                          const std::vector<std::string>& authors,
                                          const AttributionTrainConfig& cfg) {
  cfg.validate();
  if (authors.size() != X.rows()) throw std::invalid_argument("author labels size mismatch");
  if (X.rows() == 0) throw InputError("no training chunks");

  AttributionModel model;
  model.dim = X.dim;
  model.train_config = cfg;
  std::vector<int> classes(X.rows());
  {
    std::map<std::string, int> index;
    for (std::size_t r = 0; r < X.rows(); ++r) {
      auto it = index.find(authors[r]);
      if (it == index.end()) {
        it = index.emplace(authors[r], static_cast<int>(model.class_names.size())).first;
        model.class_names.push_back(authors[r]);
      }
      classes[r] = it->second;
    }
  }
  const std::size_t C = model.n_classes();
  if (C < 2) throw InputError("attribution needs at least 2 author classes");

  model.weights.assign(C * X.dim, 0.0);
  model.bias.assign(C, 0.0);

  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), 0);
  model.loss_history.push_back(attribution_loss_and_grad(
      X, classes, C, all, model.weights, model.bias, nullptr, nullptr));

  Rng rng(derive_seed(cfg.seed, "attribution.train"));
  std::vector<std::size_t> order = all;
  std::vector<double> gw(C * X.dim), gb(C);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t len = std::min(cfg.batch, order.size() - start);
      attribution_loss_and_grad(X, classes, C,
                                std::span<const std::size_t>(order.data() + start, len),
                                model.weights, model.bias, &gw, &gb);
      for (std::size_t i = 0; i < model.weights.size(); ++i) model.weights[i] -= cfg.lr * gw[i];
      for (std::size_t c = 0; c < C; ++c) model.bias[c] -= cfg.lr * gb[c];
    }
    const double loss = attribution_loss_and_grad(X, classes, C, all, model.weights, model.bias,
                                                  nullptr, nullptr);
    if (!std::isfinite(loss))
      throw std::runtime_error("attribution training diverged: non-finite loss at epoch " +
                               std::to_string(epoch + 1) + " (lr " + format_double(cfg.lr) + ")");
    model.loss_history.push_back(loss);
  }
  return model;
}

// Raw affine scores, no softmax. Row-major n_chunks x n_classes.
inline std::vector<double> predict_chunk_logits(const AttributionModel& model,
                                                const EmbeddingMatrix& X) {
  if (X.dim != model.dim) throw std::invalid_argument("chunk dim does not match model");
  const std::size_t C = model.n_classes();
  std::vector<double> logits(X.rows() * C);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto x = X.row(r);
    for (std::size_t c = 0; c < C; ++c) {
      double s = model.bias[c];
      const double* w = model.weights.data() + c * model.dim;
      for (std::size_t d = 0; d < model.dim; ++d) s += w[d] * x[d];
      logits[r * C + c] = s;
    }
  }
  return logits;
}

enum class AggregateRule { sum_logits, mean_logits };

struct DocPrediction {
  std::string doc_id;
  int predicted_class = 0;
  std::vector<double> aggregated;  // n_classes, after the rule
};

// doc_chunk_map: ordered (doc_id, chunk row indices). Every logits row must
// be claimed by exactly one document.
inline std::vector<DocPrediction> aggregate_documents(
    const std::vector<double>& chunk_logits, std::size_t n_classes,
    const std::vector<std::pair<std::string, std::vector<std::size_t>>>& doc_chunk_map,
    AggregateRule rule = AggregateRule::sum_logits) {
  const std::size_t n_chunks = n_classes == 0 ? 0 : chunk_logits.size() / n_classes;
  std::vector<bool> claimed(n_chunks, false);
  std::vector<DocPrediction> out;
  out.reserve(doc_chunk_map.size());
  for (const auto& [doc, rows] : doc_chunk_map) {
    if (rows.empty()) throw std::invalid_argument("document without chunks: " + doc);
    DocPrediction p;
    p.doc_id = doc;
    p.aggregated.assign(n_classes, 0.0);
    for (const std::size_t r : rows) {
      if (r >= n_chunks) throw std::invalid_argument("chunk row out of range for " + doc);
      if (claimed[r]) throw std::invalid_argument("chunk row claimed twice: " + std::to_string(r));
      claimed[r] = true;
      for (std::size_t c = 0; c < n_classes; ++c)
        p.aggregated[c] += chunk_logits[r * n_classes + c];
    }
    if (rule == AggregateRule::mean_logits)
      for (double& v : p.aggregated) v /= static_cast<double>(rows.size());
    p.predicted_class = static_cast<int>(
        std::max_element(p.aggregated.begin(), p.aggregated.end()) - p.aggregated.begin());
    out.push_back(std::move(p));
  }
  for (std::size_t r = 0; r < n_chunks; ++r)
    if (!claimed[r])
      throw std::invalid_argument("chunk row " + std::to_string(r) + " not mapped to a document");
  return out;
}

struct EvalReport {
  double per_chunk_accuracy = 0.0;
  double per_document_accuracy = 0.0;
  std::vector<std::size_t> confusion;  // n_classes x n_classes, true x predicted, doc counts
  std::size_t n_docs = 0;
  std::size_t n_chunks = 0;
  std::size_t n_unknown_class_docs = 0;       // true author absent from the model
  std::vector<std::string> unknown_authors;   // sorted, deduplicated
  std::vector<DocPrediction> doc_predictions;
  std::vector<std::string> doc_true_authors;  // parallel to doc_predictions
};

// chunk_doc_ids/chunk_authors are parallel to X rows. Documents whose author
// the model never saw count as errors and are reported, not silently dropped.
inline EvalReport evaluate_attribution(const AttributionModel& model, const EmbeddingMatrix& X,
                                       const std::vector<std::string>& chunk_doc_ids,
                                       const std::vector<std::string>& chunk_authors) {
  if (chunk_doc_ids.size() != X.rows() || chunk_authors.size() != X.rows())
    throw std::invalid_argument("chunk label vectors must parallel the embedding rows");
  if (X.rows() == 0) throw InputError("empty evaluation set");
  const std::size_t C = model.n_classes();
  const auto logits = predict_chunk_logits(model, X);

  EvalReport rep;
  rep.n_chunks = X.rows();
  std::size_t chunk_hits = 0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto* row = logits.data() + r * C;
    const int pred = static_cast<int>(std::max_element(row, row + C) - row);
    if (model.class_index(chunk_authors[r]) == pred) ++chunk_hits;
  }
  rep.per_chunk_accuracy = static_cast<double>(chunk_hits) / static_cast<double>(X.rows());

  const auto groups = group_chunks_by_doc(chunk_doc_ids);
  rep.doc_predictions = aggregate_documents(logits, C, groups);
  rep.n_docs = groups.size();
  rep.confusion.assign(C * C, 0);
  std::set<std::string> unknown;
  std::size_t doc_hits = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::string& author = chunk_authors[groups[g].second.front()];
    rep.doc_true_authors.push_back(author);
    const int truth = model.class_index(author);
    if (truth < 0) {
      ++rep.n_unknown_class_docs;
      unknown.insert(author);
      continue;
    }
    const int pred = rep.doc_predictions[g].predicted_class;
    ++rep.confusion[static_cast<std::size_t>(truth) * C + static_cast<std::size_t>(pred)];
    if (pred == truth) ++doc_hits;
  }
  rep.per_document_accuracy = static_cast<double>(doc_hits) / static_cast<double>(rep.n_docs);
  rep.unknown_authors.assign(unknown.begin(), unknown.end());
  return rep;
}

}  // namespace stylo
