#pragma once

// Two-layer feed-forward probe: softmax(W2 relu(W1 x + b1) + b2), trained
// with Adam on mean cross-entropy (nats), with validation-driven learning-rate
// halving and early stopping.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "socioprobe/embstore.hpp"

namespace socioprobe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One encoder layer of a dataset as a dense feature matrix (one row per
/// record) with class indices.
struct ProbeData {
  Matrix features;
  std::vector<std::uint32_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  ProbeData rows(std::span<const std::size_t> indices) const;
  ProbeData head(std::size_t n) const;
  ProbeData slice(std::size_t begin, std::size_t end) const;
};

/// 1-based layer index.
ProbeData layer_data(const EmbeddingDataset& dataset, std::size_t layer);
/// Only the given records, in the given order.
ProbeData layer_data(const EmbeddingDataset& dataset, std::size_t layer,
                     std::span<const std::size_t> records);

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbeConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 256;
  std::size_t num_classes = 2;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double lr_decay_factor = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeParams {
  Matrix w1;  // h x d
  Vector b1;  // h
  Matrix w2;  // K x h
  Vector b2;  // K

  static ProbeParams zeros(std::size_t d, std::size_t h, std::size_t k);
  bool all_finite() const;
  bool operator==(const ProbeParams& o) const;
};

/// Same shape as the parameters; reused for gradients and Adam moments.
using ProbeGradients = ProbeParams;

struct ProbeNetwork {
  ProbeParams params;
  ProbeParams first_moment;
  ProbeParams second_moment;
  std::uint64_t step = 0;

  /// Zero parameters and fresh optimizer state.
  static ProbeNetwork zeros(std::size_t d, std::size_t h, std::size_t k);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias of
  /// each layer, drawn in the order W1, b1, W2, b2 (row-major) from config.seed.
  static ProbeNetwork initialize(const ProbeConfig& config);

  std::size_t input_dim() const { return params.w1.cols(); }
  std::size_t hidden_dim() const { return params.w1.rows(); }
  std::size_t num_classes() const { return params.w2.rows(); }
};

Vector forward(const ProbeNetwork& net, const Eigen::Ref<const Vector>& x);
/// Row-wise class probabilities for a batch.
Matrix forward_batch(const ProbeNetwork& net, const Matrix& x);
/// Row-wise natural-log class probabilities, computed stably.
Matrix log_probabilities(const ProbeNetwork& net, const Matrix& x);

struct LossAndGrads {
  double loss = 0.0;  // mean cross-entropy, nats
  ProbeGradients grads;
};

LossAndGrads loss_and_grads(const ProbeNetwork& net, const ProbeData& batch);
/// Mean cross-entropy in nats without gradients.
double mean_loss(const ProbeNetwork& net, const ProbeData& data);

void adam_step(ProbeNetwork& net, const ProbeGradients& grads, double lr,
               const ProbeConfig& config);

struct TrainReport {
  std::size_t epochs_run = 0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;        // empty when trained without validation
  std::vector<double> learning_rate;   // rate used during each epoch
  double final_learning_rate = 0.0;
  std::optional<double> best_val_loss;
  std::size_t best_epoch = 0;          // 1-based; 0 without validation
  bool stopped_early = false;
};

struct TrainedProbe {
  ProbeNetwork network;
  TrainReport report;
};

/// Trains a freshly initialized probe on shuffled mini-batches (the last,
/// possibly smaller, batch is kept). After every epoch that does not
/// strictly improve on the best validation loss the rate is multiplied by
/// lr_decay_factor; `patience` such epochs in a row stop training. The
/// network from the best-validation epoch is returned.
///
/// Initialization draws from Rng(config.seed); batch order from
/// Rng(derive_seed(config.seed, 1)).
TrainedProbe train_probe(const ProbeData& train, const ProbeData& val,
                         const ProbeConfig& config);

/// Runs exactly config.max_epochs epochs with a constant rate and returns the
/// final network. Used when there is too little data for a holdout.
TrainedProbe train_probe_fixed_epochs(const ProbeData& train,
                                      const ProbeConfig& config);

}  // namespace socioprobe
