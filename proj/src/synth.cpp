#include "socioprobe/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "socioprobe/rng.hpp"

namespace socioprobe {

std::size_t SynthSpec::num_noise_dims() const {
  return static_cast<std::size_t>(std::floor(noise_fraction * static_cast<double>(dim)));
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (n < num_classes) throw std::invalid_argument("n must be at least K");
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  if (layer_deltas.empty()) throw std::invalid_argument("need at least one layer");
  for (double d : layer_deltas) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("layer separations must be finite and >= 0");
    }
  }
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) {
    throw std::invalid_argument("noise fraction must be in [0, 1)");
  }
  if (num_signal_dims() < num_classes) {
    throw std::invalid_argument(
        "dimension too small: " + std::to_string(num_signal_dims()) +
        " signal dimensions cannot hold " + std::to_string(num_classes) +
        " orthogonal class directions");
  }
}

EmbeddingDataset generate(const SynthSpec& spec) {
  spec.validate();
  EmbeddingDataset ds;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    ds.schema.class_names.push_back("class" + std::to_string(c));
  }
  ds.num_layers = static_cast<std::uint32_t>(spec.layer_deltas.size());
  ds.dim = static_cast<std::uint32_t>(spec.dim);
  ds.records.resize(spec.n);

  const double scale = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < spec.n; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    auto& rec = ds.records[i];
    rec.id = "synth-" + std::to_string(i);
    rec.label = static_cast<std::uint32_t>(rng.bounded(spec.num_classes));
    rec.values.resize(ds.num_layers * spec.dim);
    for (std::size_t l = 0; l < ds.num_layers; ++l) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        double v = rng.normal();
        if (j == rec.label) v += spec.layer_deltas[l] * scale;
        rec.values[l * spec.dim + j] = static_cast<float>(v);
      }
    }
  }
  return ds;
}

double bayes_accuracy(double delta) {
  return 0.5 * std::erfc(-delta / (2.0 * std::numbers::sqrt2));
}

}  // namespace socioprobe
