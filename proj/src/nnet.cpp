#include "fedhb/nnet.hpp"

#include <cmath>

namespace fedhb {

namespace {

double activation_derivative_from_output(Activation act, double y) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace

double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid:
      // branch form keeps exp bounded
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return x;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "DenseNet: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    require(layer.b.size() == layer.W.rows(), "DenseNet: bias width mismatch");
    if (l > 0)
      require(layer.W.cols() == layers_[l - 1].W.rows(), "DenseNet: layer shapes do not compose");
    param_count_ += static_cast<int>(layer.W.size() + layer.b.size());
  }
}

Vector DenseNet::flat() const {
  Vector theta(param_count_);
  int offset = 0;
  for (const DenseLayer& layer : layers_) {
    const int wn = static_cast<int>(layer.W.size());
    theta.segment(offset, wn) = Eigen::Map<const Vector>(layer.W.data(), wn);
    offset += wn;
    theta.segment(offset, layer.b.size()) = layer.b;
    offset += static_cast<int>(layer.b.size());
  }
  return theta;
}

void DenseNet::set_flat(const Vector& theta) {
  require(theta.size() == param_count_, "DenseNet::set_flat: size mismatch");
  int offset = 0;
  for (DenseLayer& layer : layers_) {
    const int wn = static_cast<int>(layer.W.size());
    Eigen::Map<Vector>(layer.W.data(), wn) = theta.segment(offset, wn);
    offset += wn;
    layer.b = theta.segment(offset, layer.b.size());
    offset += static_cast<int>(layer.b.size());
  }
}

Vector DenseNet::forward(const Vector& x) const {
  Cache cache;
  return forward(x, cache);
}

Vector DenseNet::forward(const Vector& x, Cache& cache) const {
  require(x.size() == input_dim(), "DenseNet::forward: input width mismatch");
  cache.inputs.clear();
  cache.activations.clear();
  Vector h = x;
  for (const DenseLayer& layer : layers_) {
    cache.inputs.push_back(h);
    Vector pre = layer.W * h + layer.b;
    for (int i = 0; i < pre.size(); ++i) pre(i) = apply_activation(layer.act, pre(i));
    cache.activations.push_back(pre);
    h = std::move(pre);
  }
  return h;
}

Vector DenseNet::backward(const Cache& cache, const Vector& grad_output) const {
  require(cache.inputs.size() == layers_.size() && cache.activations.size() == layers_.size(),
          "DenseNet::backward: stale cache");
  require(grad_output.size() == output_dim(), "DenseNet::backward: output grad width");

  Vector grad(param_count_);
  Vector delta = grad_output;
  int offset = param_count_;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const DenseLayer& layer = layers_[l];
    const Vector& y = cache.activations[l];
    for (int i = 0; i < delta.size(); ++i)
      delta(i) *= activation_derivative_from_output(layer.act, y(i));

    offset -= static_cast<int>(layer.b.size());
    grad.segment(offset, layer.b.size()) = delta;
    const int wn = static_cast<int>(layer.W.size());
    offset -= wn;
    const Matrix gw = delta * cache.inputs[l].transpose();
    grad.segment(offset, wn) = Eigen::Map<const Vector>(gw.data(), wn);

    if (l > 0) delta = layer.W.transpose() * delta;
  }
  return grad;
}

DenseNet make_mlp(const std::vector<int>& widths, const std::vector<Activation>& acts,
                  Rng& rng) {
  require(widths.size() >= 2 && acts.size() == widths.size() - 1,
          "make_mlp: need one activation per layer");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    layer.W = rng.gaussian_matrix(widths[l + 1], widths[l]) * scale;
    layer.b = Vector::Zero(widths[l + 1]);
    layer.act = acts[l];
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

OptimState OptimState::with_momentum(double beta) {
  OptimState s;
  s.kind = Kind::Momentum;
  s.momentum = beta;
  return s;
}

OptimState OptimState::adam(double b1, double b2, double eps) {
  OptimState s;
  s.kind = Kind::Adam;
  s.beta1 = b1;
  s.beta2 = b2;
  s.eps = eps;
  return s;
}

void OptimState::reset() {
  velocity_.resize(0);
  second_moment_.resize(0);
  step_count_ = 0;
}

void OptimState::step(Vector& theta, const Vector& grad, double lr) {
  require(lr > 0.0, "OptimState::step: lr must be positive");
  require(grad.size() == theta.size(), "OptimState::step: shape mismatch");
  switch (kind) {
    case Kind::Sgd:
      theta -= lr * grad;
      return;
    case Kind::Momentum: {
      if (velocity_.size() != theta.size()) velocity_ = Vector::Zero(theta.size());
      velocity_ = momentum * velocity_ + grad;
      theta -= lr * velocity_;
      return;
    }
    case Kind::Adam: {
      if (velocity_.size() != theta.size()) {
        velocity_ = Vector::Zero(theta.size());
        second_moment_ = Vector::Zero(theta.size());
      }
      ++step_count_;
      velocity_ = beta1 * velocity_ + (1.0 - beta1) * grad;
      second_moment_ =
          beta2 * second_moment_.array() + (1.0 - beta2) * grad.array().square();
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
      theta.array() -= lr * (velocity_.array() / bc1) /
                       ((second_moment_.array() / bc2).sqrt() + eps);
      return;
    }
  }
}

Vector clip_inf(Vector g, double c) {
  require(c > 0.0, "clip_inf: cap must be positive");
  for (int i = 0; i < g.size(); ++i) {
    if (g(i) > c) g(i) = c;
    else if (g(i) < -c) g(i) = -c;
  }
  return g;
}

}  // namespace fedhb
