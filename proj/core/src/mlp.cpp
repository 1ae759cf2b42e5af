#include "delaymatch/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace delaymatch {

std::vector<Eigen::Index> MlpSpec::layer_dims() const {
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

void MlpSpec::validate() const {
  for (auto d : layer_dims())
    if (d < 1) throw std::invalid_argument("MlpSpec: every layer width must be >= 1");
}

template <typename T>
BasicMlpParams<T> BasicMlpParams<T>::zeros_like(const MlpSpec& spec) {
  const auto dims = spec.layer_dims();
  BasicMlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.push_back(MatrixX<T>::Zero(dims[l], dims[l + 1]));
    p.biases.push_back(VectorX<T>::Zero(dims[l + 1]));
  }
  return p;
}

template <typename T>
double BasicMlpParams<T>::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.template cast<double>().squaredNorm();
  for (const auto& b : biases) s += b.template cast<double>().squaredNorm();
  return s;
}

template <typename T>
bool BasicMlpParams<T>::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

template <typename T>
std::size_t BasicMlpParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

template <typename T>
BasicMlpParams<T>& BasicMlpParams<T>::operator+=(const BasicMlpParams& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

template <typename T>
BasicMlpParams<T>& BasicMlpParams<T>::operator*=(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= static_cast<T>(s);
    biases[l] *= static_cast<T>(s);
  }
  return *this;
}

MlpParams init_params(const MlpSpec& spec, Rng& rng, double output_scale) {
  spec.validate();
  MlpParams p = MlpParams::zeros_like(spec);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    double limit = std::sqrt(6.0 / static_cast<double>(w.rows()));
    if (l + 1 == p.weights.size()) limit *= output_scale;
    std::uniform_real_distribution<double> u(-limit, limit);
    // Column-major fill order keeps the draw sequence independent of Eigen internals.
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
  }
  return p;
}

template <typename T>
MatrixX<T> softmax_rows(const MatrixX<T>& logits) {
  MatrixX<T> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

namespace {

template <typename T>
void check_shapes(const BasicMlpParams<T>& params, const MlpSpec& spec) {
  const auto dims = spec.layer_dims();
  if (params.weights.size() + 1 != dims.size() || params.biases.size() != params.weights.size())
    throw std::invalid_argument("mlp: parameter layer count does not match spec");
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (params.weights[l].rows() != dims[l] || params.weights[l].cols() != dims[l + 1] ||
        params.biases[l].size() != dims[l + 1])
      throw std::invalid_argument("mlp: layer " + std::to_string(l) + " shape does not match spec");
  }
}

}  // namespace

template <typename T>
BasicForwardCache<T> forward(const BasicMlpParams<T>& params, const MlpSpec& spec, const std::type_identity_t<MatrixX<T>>& batch) {
  check_shapes(params, spec);
  if (batch.cols() != spec.input_dim)
    throw std::invalid_argument("mlp forward: input width " + std::to_string(batch.cols()) +
                                " != input_dim " + std::to_string(spec.input_dim));
  if (!batch.allFinite()) throw std::invalid_argument("mlp forward: non-finite input");

  BasicForwardCache<T> cache;
  const std::size_t layers = params.weights.size();
  cache.inputs.reserve(layers);
  cache.inputs.push_back(batch);
  for (std::size_t l = 0; l < layers; ++l) {
    MatrixX<T> z(cache.inputs[l].rows(), params.weights[l].cols());
    z.noalias() = cache.inputs[l] * params.weights[l];
    z.rowwise() += params.biases[l].transpose();
    if (l + 1 < layers) {
      cache.inputs.push_back(z.cwiseMax(T(0)));
    } else {
      cache.logits = std::move(z);
    }
  }
  cache.output = spec.head == OutputHead::softmax ? softmax_rows<T>(cache.logits) : cache.logits;
  return cache;
}

template <typename T>
MatrixX<T> predict(const BasicMlpParams<T>& params, const MlpSpec& spec, const std::type_identity_t<MatrixX<T>>& batch) {
  return forward(params, spec, batch).output;
}

template <typename T>
BasicMlpParams<T> backward(const BasicMlpParams<T>& params, const MlpSpec& spec, const BasicForwardCache<T>& cache,
                           const std::type_identity_t<MatrixX<T>>& grad, GradientAt at) {
  check_shapes(params, spec);
  const std::size_t layers = params.weights.size();
  if (cache.inputs.size() != layers || grad.rows() != cache.logits.rows() ||
      grad.cols() != cache.logits.cols())
    throw std::invalid_argument("mlp backward: gradient or cache does not match the forward pass");

  MatrixX<T> dz;
  if (spec.head == OutputHead::softmax && at == GradientAt::output) {
    const MatrixX<T>& p = cache.output;
    const VectorX<T> inner = (grad.array() * p.array()).rowwise().sum();
    dz = p.array() * (grad.colwise() - inner).array();
  } else {
    dz = grad;
  }

  BasicMlpParams<T> g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l].noalias() = cache.inputs[l].transpose() * dz;
    g.biases[l] = dz.colwise().sum().transpose();
    if (l == 0) break;
    MatrixX<T> da(dz.rows(), params.weights[l].rows());
    da.noalias() = dz * params.weights[l].transpose();
    dz = (cache.inputs[l].array() > T(0)).select(da.array(), T(0)).matrix();
  }
  return g;
}

template <typename T>
double clip_global_norm(BasicMlpParams<T>& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

template <typename T>
BasicAdamOptimizer<T>::BasicAdamOptimizer(const MlpSpec& spec, double lr)
    : learning_rate(lr), first_moment(BasicMlpParams<T>::zeros_like(spec)),
      second_moment(BasicMlpParams<T>::zeros_like(spec)) {
  if (!(lr > 0.0)) throw std::invalid_argument("AdamOptimizer: learning rate must be positive");
}

template <typename T>
UpdateStatus apply_update(BasicMlpParams<T>& params, const BasicMlpParams<T>& grads, BasicAdamOptimizer<T>& opt) {
  if (!grads.all_finite()) return UpdateStatus::rejected_non_finite;
  if (opt.first_moment.weights.size() != params.weights.size())
    throw std::invalid_argument("apply_update: optimizer state does not match parameters");
  ++opt.step;
  const T b1 = static_cast<T>(opt.beta1);
  const T b2 = static_cast<T>(opt.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(opt.beta1, static_cast<double>(opt.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(opt.beta2, static_cast<double>(opt.step)));
  const T lr = static_cast<T>(opt.learning_rate);
  const T eps = static_cast<T>(opt.epsilon);
  auto step = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    step(params.weights[l], grads.weights[l], opt.first_moment.weights[l], opt.second_moment.weights[l]);
    step(params.biases[l], grads.biases[l], opt.first_moment.biases[l], opt.second_moment.biases[l]);
  }
  return UpdateStatus::applied;
}

#define DELAYMATCH_INSTANTIATE_MLP(T)                                                                          \
  template struct BasicMlpParams<T>;                                                                         \
  template struct BasicAdamOptimizer<T>;                                                                     \
  template MatrixX<T> softmax_rows<T>(const MatrixX<T>&);                                                    \
  template BasicForwardCache<T> forward<T>(const BasicMlpParams<T>&, const MlpSpec&, const MatrixX<T>&);     \
  template MatrixX<T> predict<T>(const BasicMlpParams<T>&, const MlpSpec&, const MatrixX<T>&);               \
  template BasicMlpParams<T> backward<T>(const BasicMlpParams<T>&, const MlpSpec&, const BasicForwardCache<T>&, \
                                         const MatrixX<T>&, GradientAt);                                     \
  template double clip_global_norm<T>(BasicMlpParams<T>&, double);                                           \
  template UpdateStatus apply_update<T>(BasicMlpParams<T>&, const BasicMlpParams<T>&, BasicAdamOptimizer<T>&);

DELAYMATCH_INSTANTIATE_MLP(double)
DELAYMATCH_INSTANTIATE_MLP(float)

#undef DELAYMATCH_INSTANTIATE_MLP

GradientCheckReport gradient_check(const MlpSpec& spec, Rng& rng, Eigen::Index batch, double step, double floor) {
  spec.validate();
  MlpParams params = init_params(spec, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& b : params.biases)
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = 0.1 * normal(rng);
  Eigen::MatrixXd x(batch, spec.input_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  Eigen::MatrixXd g(batch, spec.output_dim);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);

  const auto loss = [&](const MlpParams& p) { return (predict(p, spec, x).array() * g.array()).sum(); };
  const MlpGradients analytic = backward(params, spec, forward(params, spec, x), g);

  GradientCheckReport report;
  const auto compare = [&](double& slot, double a) {
    const double saved = slot;
    slot = saved + step;
    const double up = loss(params);
    slot = saved - step;
    const double down = loss(params);
    slot = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
    report.max_relative_error = std::max(report.max_relative_error, rel);
    ++report.parameters_checked;
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index k = 0; k < params.weights[l].size(); ++k)
      compare(params.weights[l].data()[k], analytic.weights[l].data()[k]);
    for (Eigen::Index k = 0; k < params.biases[l].size(); ++k)
      compare(params.biases[l].data()[k], analytic.biases[l].data()[k]);
  }
  return report;
}

}  // namespace delaymatch
