#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "delaymatch/geometry.hpp"

namespace delaymatch {

enum class OutputHead : std::uint32_t { linear = 0, softmax = 1 };

/// Dense ReLU stack: input → hidden... → output (linear or row-wise softmax).
struct MlpSpec {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden{512, 256, 128};
  Eigen::Index output_dim = 2;
  OutputHead head = OutputHead::linear;

  std::vector<Eigen::Index> layer_dims() const;
  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// weights[l] is fan_in × fan_out, so a batch X (rows = samples) maps to X·W + b.
/// Instantiated for double (checks, checkpoints) and float (training).
template <typename T>
struct BasicMlpParams {
  std::vector<MatrixX<T>> weights;
  std::vector<VectorX<T>> biases;

  static BasicMlpParams zeros_like(const MlpSpec& spec);
  double squared_norm() const;
  bool all_finite() const;
  std::size_t parameter_count() const;
  BasicMlpParams& operator+=(const BasicMlpParams& other);
  BasicMlpParams& operator*=(double s);

  template <typename U>
  BasicMlpParams<U> cast() const {
    BasicMlpParams<U> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<U>());
    return out;
  }
};

using MlpParams = BasicMlpParams<double>;
using MlpGradients = MlpParams;

/// Uniform fan-in initialisation, ±sqrt(6 / fan_in) on hidden layers. The
/// output layer is additionally multiplied by `output_scale`.
MlpParams init_params(const MlpSpec& spec, Rng& rng, double output_scale = 1.0);

template <typename T>
struct BasicForwardCache {
  std::vector<MatrixX<T>> inputs;  // input to layer l (post-activation of l−1)
  MatrixX<T> logits;               // final pre-head values
  MatrixX<T> output;               // logits, or softmax(logits)
};

using ForwardCache = BasicForwardCache<double>;

/// Throws std::invalid_argument on width mismatch or non-finite input.
template <typename T>
BasicForwardCache<T> forward(const BasicMlpParams<T>& params, const MlpSpec& spec, const std::type_identity_t<MatrixX<T>>& batch);

/// Convenience: forward(...).output.
template <typename T>
MatrixX<T> predict(const BasicMlpParams<T>& params, const MlpSpec& spec, const std::type_identity_t<MatrixX<T>>& batch);

enum class GradientAt { output, logits };

/// Reverse-mode gradient of Σ_rows <grad, output> (or logits) w.r.t. every parameter.
template <typename T>
BasicMlpParams<T> backward(const BasicMlpParams<T>& params, const MlpSpec& spec, const BasicForwardCache<T>& cache,
                           const std::type_identity_t<MatrixX<T>>& grad, GradientAt at = GradientAt::output);

/// Row-wise softmax with max subtraction.
template <typename T>
MatrixX<T> softmax_rows(const MatrixX<T>& logits);

/// Rescales `grads` in place so that its global L2 norm is at most max_norm;
/// returns the norm before clipping.
template <typename T>
double clip_global_norm(BasicMlpParams<T>& grads, double max_norm);

template <typename T>
struct BasicAdamOptimizer {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  BasicMlpParams<T> first_moment;
  BasicMlpParams<T> second_moment;

  BasicAdamOptimizer() = default;
  BasicAdamOptimizer(const MlpSpec& spec, double lr);
};

using AdamOptimizer = BasicAdamOptimizer<double>;

enum class UpdateStatus { applied, rejected_non_finite };

/// One bias-corrected Adam descent step: params −= lr · m̂ / (sqrt(v̂) + ε).
template <typename T>
UpdateStatus apply_update(BasicMlpParams<T>& params, const BasicMlpParams<T>& grads, BasicAdamOptimizer<T>& opt);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
};

/// Compares backward() with central differences of Σ <G, output> for a random
/// network of `spec` (biases randomised too, so no unit sits on its kink), a
/// random batch and a random G. The relative error of a
/// coordinate is |analytic − numeric| / max(|analytic| + |numeric|, floor).
GradientCheckReport gradient_check(const MlpSpec& spec, Rng& rng, Eigen::Index batch = 4,
                                   double step = 1e-6, double floor = 1e-7);

}  // namespace delaymatch
