#pragma once

#include "fedhb/types.hpp"

#include <vector>

namespace fedhb {

enum class Activation { Identity, Relu, Sigmoid };

struct DenseLayer {
  Matrix W;
  Vector b;
  Activation act = Activation::Identity;
};

/// Small dense network with exact reverse-mode gradients. Parameters are
/// addressable both layerwise and as one flat vector (layer order, W
/// column-major then b); the two views round-trip losslessly.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  int input_dim() const { return static_cast<int>(layers_.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().W.rows()); }
  int param_count() const { return param_count_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector flat() const;
  void set_flat(const Vector& theta);

  Vector forward(const Vector& x) const;

  struct Cache {
    std::vector<Vector> inputs;       // input to each layer
    std::vector<Vector> activations;  // output of each layer
  };
  Vector forward(const Vector& x, Cache& cache) const;

  /// Flat gradient of a scalar loss given d(loss)/d(output) and the cache
  /// from the matching forward pass.
  Vector backward(const Cache& cache, const Vector& grad_output) const;

 private:
  std::vector<DenseLayer> layers_;
  int param_count_ = 0;
};

/// widths = {in, h1, ..., out}; Gaussian init with std 1/sqrt(fan_in), zero bias.
DenseNet make_mlp(const std::vector<int>& widths, const std::vector<Activation>& acts,
                  Rng& rng);

double apply_activation(Activation act, double x);

struct OptimState {
  enum class Kind { Sgd, Momentum, Adam };

  Kind kind = Kind::Sgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimState sgd() { return {}; }
  static OptimState with_momentum(double beta = 0.9);
  static OptimState adam(double b1 = 0.9, double b2 = 0.999, double eps = 1e-8);

  void step(Vector& theta, const Vector& grad, double lr);
  void reset();

 private:
  Vector velocity_;
  Vector second_moment_;
  long step_count_ = 0;
};

/// Caps each coordinate at magnitude c.
Vector clip_inf(Vector g, double c);

}  // namespace fedhb
