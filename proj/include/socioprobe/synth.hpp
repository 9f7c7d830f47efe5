#pragma once

// Synthetic per-layer embeddings with known class separability.
//
// Labels are uniform over K. At layer l, a record of class c is drawn from
// N(delta_l * mu_c, I), where mu_c = e_c / sqrt(2) on the signal dimensions
// and 0 on the trailing noise dimensions. The class means are therefore
// pairwise exactly delta_l apart, so for K = 2 the optimal accuracy is
// Phi(delta_l / 2).
//
// Record i draws its label and all of its components from
// Rng(derive_seed(seed, i)), so output does not depend on generation order.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "socioprobe/embstore.hpp"

namespace socioprobe {

struct SynthSpec {
  std::size_t n = 1000;
  std::size_t dim = 16;
  std::size_t num_classes = 2;
  std::vector<double> layer_deltas = {0.0};  // one entry per layer
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_noise_dims() const;
  std::size_t num_signal_dims() const { return dim - num_noise_dims(); }
  void validate() const;
};

EmbeddingDataset generate(const SynthSpec& spec);

/// Optimal accuracy for two equiprobable unit-variance isotropic Gaussians
/// whose means are `delta` apart.
double bayes_accuracy(double delta);

}  // namespace socioprobe
