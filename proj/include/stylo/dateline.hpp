#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

// Year-of-writing regression: dense layers with GELU activations over chunk
// embeddings, trained with an L_p loss; a document's year is the mean of its
// chunk predictions.

// Exact x * Phi(x); the tanh approximation is off by up to ~1e-3, which would
// drown the finite-difference gradient checks.
inline double gelu(double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double gelu_deriv(double x) {
  const double phi_cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
  const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  return phi_cdf + x * phi_pdf;
}

// loss = mean |pred - target|^p, gradient d loss / d pred. The gradient at a
// zero residual is 0 (the subgradient choice at p = 1).
inline std::pair<double, std::vector<double>> lp_loss(std::span<const double> predictions,
                                                      std::span<const double> targets, double p) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("lp_loss: length mismatch");
  if (p < 1.0) throw std::invalid_argument("lp_loss: p must be >= 1");
  if (predictions.empty()) throw std::invalid_argument("lp_loss: empty input");
  const double inv_n = 1.0 / static_cast<double>(predictions.size());
  double loss = 0.0;
  std::vector<double> grad(predictions.size(), 0.0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - targets[i];
    const double ae = std::abs(e);
    loss += std::pow(ae, p) * inv_n;
    if (e != 0.0) grad[i] = p * std::pow(ae, p - 1.0) * (e > 0.0 ? 1.0 : -1.0) * inv_n;
  }
  return {loss, std::move(grad)};
}

struct DatelineConfig {
  std::vector<std::size_t> hidden_dims = {256, 64};
  double p = 3.0;
  std::size_t epochs = 200;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_dims.empty()) throw std::invalid_argument("hidden_dims must be nonempty");
    for (std::size_t h : hidden_dims)
      if (h == 0) throw std::invalid_argument("hidden dims must be positive");
    if (p < 1.0 || p > 5.0) throw std::invalid_argument("p must lie in [1, 5]");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  }
};

// All weights and biases live in one flat parameter vector (layer by layer:
// W row-major out x in, then b), which keeps finite-difference checks and
// serialization straightforward.
struct DatelineModel {
  DatelineConfig config;
  std::vector<std::size_t> layer_dims;  // [input, hidden..., 1]
  std::vector<double> params;
  int year_min = 0;  // training year range; targets map to [0, 1]
  int year_max = 0;
  std::vector<double> loss_history;  // normalized-scale train loss; [0] pre-training

  std::size_t n_layers() const { return layer_dims.size() - 1; }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
      off += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    return off;
  }
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
  }
  std::size_t param_count() const { return weight_offset(n_layers()); }

  double denormalize(double t) const { return year_min + t * (year_max - year_min); }
  double normalize_year(double y) const {
    return (y - year_min) / static_cast<double>(year_max - year_min);
  }
};

namespace detail {

// Forward pass for one input row; keeps pre-activations and activations when
// caches are provided (needed by backprop).
inline double dateline_forward(const DatelineModel& m, std::span<const float> x,
                               std::vector<std::vector<double>>* zs = nullptr,
                               std::vector<std::vector<double>>* as = nullptr) {
  std::vector<double> h(x.begin(), x.end());
  if (as) as->push_back(h);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
    const double* W = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* w = W + o * in;
      for (std::size_t i = 0; i < in; ++i) s += w[i] * h[i];
      z[o] = s;
    }
    if (zs) zs->push_back(z);
    if (l + 1 == m.n_layers()) {
      h = z;  // linear output
    } else {
      std::vector<double> a(out);
      for (std::size_t o = 0; o < out; ++o) a[o] = gelu(z[o]);
      h = std::move(a);
    }
    if (as) as->push_back(h);
  }
  return h[0];
}

}  // namespace detail

// Mean L_p loss over the given rows (normalized targets) and its gradient
// with respect to every parameter. Exposed for finite-difference checks.
inline double dateline_loss_and_grad(const DatelineModel& m, const EmbeddingMatrix& X,
                                     const std::vector<double>& targets,
                                     std::span<const std::size_t> rows,
                                     std::vector<double>* grad) {
  if (grad) {
    grad->assign(m.param_count(), 0.0);
  }
  std::vector<double> preds(rows.size()), tgt(rows.size());
  std::vector<std::vector<std::vector<double>>> all_zs, all_as;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (grad) {
      all_zs.emplace_back();
      all_as.emplace_back();
      preds[i] = detail::dateline_forward(m, X.row(rows[i]), &all_zs.back(), &all_as.back());
    } else {
      preds[i] = detail::dateline_forward(m, X.row(rows[i]));
    }
    tgt[i] = targets[rows[i]];
  }
  auto [loss, dpred] = lp_loss(preds, tgt, m.config.p);
  if (!grad) return loss;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    // Backprop one sample: delta starts at the scalar output.
    std::vector<double> delta{dpred[i]};
    for (std::size_t l = m.n_layers(); l-- > 0;) {
      const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
      const double* W = m.params.data() + m.weight_offset(l);
      double* gW = grad->data() + m.weight_offset(l);
      double* gb = grad->data() + m.bias_offset(l);
      const auto& a_in = all_as[i][l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t c = 0; c < in; ++c) gW[o * in + c] += delta[o] * a_in[c];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t c = 0; c < in; ++c) {
        double s = 0.0;
        for (std::size_t o = 0; o < out; ++o) s += W[o * in + c] * delta[o];
        prev[c] = s * gelu_deriv(all_zs[i][l - 1][c]);
      }
      delta = std::move(prev);
    }
  }
  return loss;
}

// Chunk year labels are parallel to X rows. Targets are years mapped affinely
// onto [0, 1] by the training range, inverted at prediction time.
inline DatelineModel train_dateline(const EmbeddingMatrix& X, const std::vector<int>& years,
                                    const DatelineConfig& cfg) {
  cfg.validate();
  if (years.size() != X.rows()) throw std::invalid_argument("year labels size mismatch");
  if (X.rows() == 0) throw InputError("no training chunks");
  const auto [mn, mx] = std::minmax_element(years.begin(), years.end());
  if (*mn == *mx) throw InputError("dateline training needs at least 2 distinct years");

  DatelineModel m;
  m.config = cfg;
  m.year_min = *mn;
  m.year_max = *mx;
  m.layer_dims.push_back(X.dim);
  for (std::size_t h : cfg.hidden_dims) m.layer_dims.push_back(h);
  m.layer_dims.push_back(1);

  Rng init_rng(derive_seed(cfg.seed, "dateline.init"));
  m.params.resize(m.param_count());
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    double* W = m.params.data() + m.weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) W[i] = init_rng.normal() * scale;
    double* b = m.params.data() + m.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) b[o] = 0.0;
  }

  std::vector<double> targets(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) targets[r] = m.normalize_year(years[r]);

  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), 0);
  m.loss_history.push_back(dateline_loss_and_grad(m, X, targets, all, nullptr));

  Rng rng(derive_seed(cfg.seed, "dateline.train"));
  std::vector<std::size_t> order = all;
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t len = std::min(cfg.batch, order.size() - start);
      dateline_loss_and_grad(m, X, targets,
                             std::span<const std::size_t>(order.data() + start, len), &grad);
      for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i] -= cfg.lr * grad[i];
    }
    const double loss = dateline_loss_and_grad(m, X, targets, all, nullptr);
    if (!std::isfinite(loss) || loss > 1e6)
      throw std::runtime_error("dateline training diverged: loss " + format_double(loss) +
                               " at epoch " + std::to_string(epoch + 1) + " (lr " +
                               format_double(cfg.lr) + ", p " + format_double(cfg.p) + ")");
    m.loss_history.push_back(loss);
  }
  return m;
}

struct YearPrediction {
  double doc_year = 0.0;
  std::vector<double> chunk_years;
  bool out_of_range = false;  // any chunk prediction outside the training range
};

inline YearPrediction predict_year(const DatelineModel& m, const EmbeddingMatrix& chunks) {
  if (chunks.rows() == 0) throw InputError("predict_year: no chunks");
  if (chunks.dim != m.layer_dims.front())
    throw std::invalid_argument("chunk dim does not match model");
  YearPrediction out;
  double sum = 0.0;
  for (std::size_t r = 0; r < chunks.rows(); ++r) {
    const double y = m.denormalize(detail::dateline_forward(m, chunks.row(r)));
    out.chunk_years.push_back(y);
    sum += y;
    if (y < m.year_min || y > m.year_max) out.out_of_range = true;
  }
  out.doc_year = sum / static_cast<double>(chunks.rows());
  return out;
}

struct DatelineEval {
  double chunk_rmse = 0.0;
  double doc_rmse = 0.0;
  std::size_t n_docs = 0;
  std::size_t n_chunks = 0;
  std::size_t n_out_of_range_chunks = 0;
  std::vector<std::string> doc_ids;
  std::vector<double> doc_predicted;  // parallel to doc_ids
  std::vector<int> doc_actual;
  std::vector<double> doc_residuals;  // predicted - actual
};

// chunk_doc_ids and chunk_years parallel X rows; doc truth = the year shared
// by its chunks. Documents are ordered by first appearance.
inline DatelineEval evaluate_dateline(const DatelineModel& m, const EmbeddingMatrix& X,
                                      const std::vector<std::string>& chunk_doc_ids,
                                      const std::vector<int>& chunk_years) {
  if (chunk_doc_ids.size() != X.rows() || chunk_years.size() != X.rows())
    throw std::invalid_argument("chunk label vectors must parallel the embedding rows");
  if (X.rows() == 0) throw InputError("empty evaluation set");

  DatelineEval ev;
  ev.n_chunks = X.rows();
  double chunk_sq = 0.0;
  std::vector<double> chunk_pred(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double y = m.denormalize(detail::dateline_forward(m, X.row(r)));
    chunk_pred[r] = y;
    const double e = y - chunk_years[r];
    chunk_sq += e * e;
    if (y < m.year_min || y > m.year_max) ++ev.n_out_of_range_chunks;
  }
  ev.chunk_rmse = std::sqrt(chunk_sq / static_cast<double>(X.rows()));

  double doc_sq = 0.0;
  for (const auto& [doc, rows] : group_chunks_by_doc(chunk_doc_ids)) {
    double sum = 0.0;
    for (std::size_t r : rows) sum += chunk_pred[r];
    const double pred = sum / static_cast<double>(rows.size());
    const int actual = chunk_years[rows.front()];
    ev.doc_ids.push_back(doc);
    ev.doc_predicted.push_back(pred);
    ev.doc_actual.push_back(actual);
    ev.doc_residuals.push_back(pred - actual);
    doc_sq += (pred - actual) * (pred - actual);
  }
  ev.n_docs = ev.doc_ids.size();
  ev.doc_rmse = std::sqrt(doc_sq / static_cast<double>(ev.n_docs));
  return ev;
}

struct PSweepRow {
  double p = 0.0;
  double chunk_rmse = 0.0;
  double doc_rmse = 0.0;
  double final_train_loss = 0.0;
};

// Trains one model per p value and evaluates each on the same test set.
inline std::vector<PSweepRow> p_sweep(const EmbeddingMatrix& train_x,
                                      const std::vector<int>& train_years,
                                      const EmbeddingMatrix& test_x,
                                      const std::vector<std::string>& test_doc_ids,
                                      const std::vector<int>& test_years,
                                      const DatelineConfig& base,
                                      std::span<const double> ps) {
  std::vector<PSweepRow> rows;
  for (double p : ps) {
    DatelineConfig cfg = base;
    cfg.p = p;
    const DatelineModel m = train_dateline(train_x, train_years, cfg);
    const DatelineEval ev = evaluate_dateline(m, test_x, test_doc_ids, test_years);
    rows.push_back({p, ev.chunk_rmse, ev.doc_rmse, m.loss_history.back()});
  }
  return rows;
}

}  // namespace stylo
