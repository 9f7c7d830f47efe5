#include "socioprobe/probe.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "socioprobe/rng.hpp"

namespace socioprobe {

namespace {

void check_shape(const ProbeNetwork& net, std::size_t dim) {
  if (dim != net.input_dim()) {
    throw std::invalid_argument("input dimension " + std::to_string(dim) +
                                " does not match probe input dimension " +
                                std::to_string(net.input_dim()));
  }
}

struct Activations {
  Matrix hidden;  // B x h, post-ReLU
  Matrix log_probs;
};

Activations run_forward(const ProbeNetwork& net, const Matrix& x) {
  check_shape(net, static_cast<std::size_t>(x.cols()));
  const auto& p = net.params;
  Activations a;
  a.hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  Matrix logits = (a.hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  const Vector log_norm = logits.array().exp().rowwise().sum().log().matrix();
  logits.colwise() -= log_norm;
  a.log_probs = std::move(logits);
  return a;
}

double batch_loss(const Matrix& log_probs, std::span<const std::uint32_t> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= log_probs(static_cast<Eigen::Index>(i), labels[i]);
  }
  return total / static_cast<double>(labels.size());
}

template <typename Fn>
void for_each_tensor(ProbeParams& a, const ProbeParams& b, Fn&& fn) {
  fn(a.w1, b.w1);
  fn(a.b1, b.b1);
  fn(a.w2, b.w2);
  fn(a.b2, b.b2);
}

void check_finite_loss(double loss) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss during probe training");
  }
}

}  // namespace

ProbeData ProbeData::rows(std::span<const std::size_t> indices) const {
  ProbeData out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

ProbeData ProbeData::slice(std::size_t begin, std::size_t end) const {
  ProbeData out;
  out.num_classes = num_classes;
  out.features = features.middleRows(static_cast<Eigen::Index>(begin),
                                     static_cast<Eigen::Index>(end - begin));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

ProbeData ProbeData::head(std::size_t n) const { return slice(0, n); }

ProbeData layer_data(const EmbeddingDataset& dataset, std::size_t layer,
                     std::span<const std::size_t> records) {
  if (layer < 1 || layer > dataset.num_layers) {
    throw std::out_of_range("layer " + std::to_string(layer) +
                            " outside [1, " +
                            std::to_string(dataset.num_layers) + "]");
  }
  ProbeData out;
  out.num_classes = dataset.schema.num_classes();
  out.features.resize(static_cast<Eigen::Index>(records.size()), dataset.dim);
  out.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = dataset.records.at(records[i]);
    const auto v = rec.layer(layer, dataset.dim);
    for (std::size_t j = 0; j < v.size(); ++j) {
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
    out.labels.push_back(rec.label);
  }
  return out;
}

ProbeData layer_data(const EmbeddingDataset& dataset, std::size_t layer) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return layer_data(dataset, layer, all);
}

void ProbeConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || num_classes < 2) {
    throw std::invalid_argument("probe dimensions must be positive and K >= 2");
  }
  if (batch_size == 0 || max_epochs == 0) {
    throw std::invalid_argument("batch_size and max_epochs must be positive");
  }
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw std::invalid_argument("lr_decay_factor must be in (0, 1)");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
}

ProbeParams ProbeParams::zeros(std::size_t d, std::size_t h, std::size_t k) {
  const auto hd = static_cast<Eigen::Index>(h);
  const auto kd = static_cast<Eigen::Index>(k);
  return {Matrix::Zero(hd, static_cast<Eigen::Index>(d)), Vector::Zero(hd),
          Matrix::Zero(kd, hd), Vector::Zero(kd)};
}

bool ProbeParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

bool ProbeParams::operator==(const ProbeParams& o) const {
  return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
}

ProbeNetwork ProbeNetwork::zeros(std::size_t d, std::size_t h, std::size_t k) {
  ProbeNetwork net;
  net.params = ProbeParams::zeros(d, h, k);
  net.first_moment = net.params;
  net.second_moment = net.params;
  return net;
}

ProbeNetwork ProbeNetwork::initialize(const ProbeConfig& config) {
  config.validate();
  ProbeNetwork net =
      zeros(config.input_dim, config.hidden_dim, config.num_classes);
  Rng rng(config.seed);
  auto fill = [&rng](auto& tensor, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      tensor.data()[i] = rng.uniform(-bound, bound);
    }
  };
  fill(net.params.w1, config.input_dim);
  fill(net.params.b1, config.input_dim);
  fill(net.params.w2, config.hidden_dim);
  fill(net.params.b2, config.hidden_dim);
  return net;
}

Matrix log_probabilities(const ProbeNetwork& net, const Matrix& x) {
  return run_forward(net, x).log_probs;
}

Matrix forward_batch(const ProbeNetwork& net, const Matrix& x) {
  return log_probabilities(net, x).array().exp().matrix();
}

Vector forward(const ProbeNetwork& net, const Eigen::Ref<const Vector>& x) {
  check_shape(net, static_cast<std::size_t>(x.size()));
  Matrix row = x.transpose();
  return forward_batch(net, row).row(0).transpose();
}

LossAndGrads loss_and_grads(const ProbeNetwork& net, const ProbeData& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  const auto a = run_forward(net, batch.features);
  const auto n = static_cast<double>(batch.size());

  LossAndGrads out;
  out.loss = batch_loss(a.log_probs, batch.labels);
  check_finite_loss(out.loss);

  // d(mean CE)/d(logits) = (softmax - onehot) / n
  Matrix d_logits = a.log_probs.array().exp().matrix();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    d_logits(static_cast<Eigen::Index>(i), batch.labels[i]) -= 1.0;
  }
  d_logits /= n;

  auto& g = out.grads;
  g.w2 = d_logits.transpose() * a.hidden;
  g.b2 = d_logits.colwise().sum().transpose();
  Matrix d_hidden = d_logits * net.params.w2;
  d_hidden = d_hidden.cwiseProduct((a.hidden.array() > 0.0).cast<double>().matrix());
  g.w1 = d_hidden.transpose() * batch.features;
  g.b1 = d_hidden.colwise().sum().transpose();

  if (!g.all_finite()) throw NumericalError("non-finite gradient");
  return out;
}

double mean_loss(const ProbeNetwork& net, const ProbeData& data) {
  if (data.size() == 0) throw std::invalid_argument("empty data");
  return batch_loss(log_probabilities(net, data.features), data.labels);
}

void adam_step(ProbeNetwork& net, const ProbeGradients& grads, double lr,
               const ProbeConfig& config) {
  auto same_shape = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
  };
  const auto& p = net.params;
  if (!same_shape(p.w1, grads.w1) || !same_shape(p.b1, grads.b1) ||
      !same_shape(p.w2, grads.w2) || !same_shape(p.b2, grads.b2)) {
    throw std::invalid_argument("gradient shape does not match parameters");
  }

  net.step += 1;
  const double t = static_cast<double>(net.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double eps = config.epsilon;

  for_each_tensor(net.first_moment, grads, [&](auto& m, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
  });
  for_each_tensor(net.second_moment, grads, [&](auto& v, const auto& g) {
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  });

  auto update = [&](auto& param, const auto& m, const auto& v) {
    param.array() -= lr * (m.array() / bias1) /
                     ((v.array() / bias2).sqrt() + eps);
  };
  update(net.params.w1, net.first_moment.w1, net.second_moment.w1);
  update(net.params.b1, net.first_moment.b1, net.second_moment.b1);
  update(net.params.w2, net.first_moment.w2, net.second_moment.w2);
  update(net.params.b2, net.first_moment.b2, net.second_moment.b2);
}

namespace {

void check_compatible(const ProbeData& data, const ProbeConfig& config,
                      const char* part) {
  if (data.size() == 0) {
    throw std::invalid_argument(std::string(part) + " data is empty");
  }
  if (data.dim() != config.input_dim) {
    throw std::invalid_argument(std::string(part) + " dimension mismatch");
  }
  if (data.num_classes != config.num_classes) {
    throw std::invalid_argument(std::string(part) + " class count mismatch");
  }
}

// One pass over shuffled mini-batches; returns the sample-weighted mean of
// the pre-update batch losses.
double run_epoch(ProbeNetwork& net, const ProbeData& train,
                 std::vector<std::size_t>& order, Rng& rng, double lr,
                 const ProbeConfig& config) {
  rng.shuffle(std::span(order));
  double weighted = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    const auto batch = train.rows(std::span(order).subspan(start, end - start));
    auto lg = loss_and_grads(net, batch);
    weighted += lg.loss * static_cast<double>(end - start);
    adam_step(net, lg.grads, lr, config);
  }
  return weighted / static_cast<double>(order.size());
}

}  // namespace

TrainedProbe train_probe(const ProbeData& train, const ProbeData& val,
                         const ProbeConfig& config) {
  config.validate();
  check_compatible(train, config, "train");
  check_compatible(val, config, "validation");

  ProbeNetwork net = ProbeNetwork::initialize(config);
  Rng order_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainedProbe best{net, {}};
  TrainReport& report = best.report;
  double best_loss = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    report.learning_rate.push_back(lr);
    report.train_loss.push_back(run_epoch(net, train, order, order_rng, lr, config));
    const double val_loss = mean_loss(net, val);
    check_finite_loss(val_loss);
    report.val_loss.push_back(val_loss);
    report.epochs_run = epoch;

    if (val_loss < best_loss) {
      best_loss = val_loss;
      best.network = net;
      report.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      lr *= config.lr_decay_factor;
      if (++epochs_without_improvement >= config.patience) {
        report.stopped_early = true;
        break;
      }
    }
  }
  report.final_learning_rate = lr;
  report.best_val_loss = best_loss;
  return best;
}

TrainedProbe train_probe_fixed_epochs(const ProbeData& train,
                                      const ProbeConfig& config) {
  config.validate();
  check_compatible(train, config, "train");

  TrainedProbe out{ProbeNetwork::initialize(config), {}};
  Rng order_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    out.report.learning_rate.push_back(config.learning_rate);
    out.report.train_loss.push_back(run_epoch(out.network, train, order, order_rng,
                                              config.learning_rate, config));
    out.report.epochs_run = epoch;
  }
  out.report.final_learning_rate = config.learning_rate;
  return out;
}

}  // namespace socioprobe
