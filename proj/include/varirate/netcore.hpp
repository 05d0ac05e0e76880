// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The varirate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARIRATE_NETCORE_HPP
#define VARIRATE_NETCORE_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace varirate::netcore {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { train, eval };

// NCHW. Fully connected activations use h = w = 1.
struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::size_t sample_size() const { return c * h * w; }
  std::size_t size() const { return n * c * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(s.size(), T{0}) {}
  Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) throw NetError("tensor data does not match shape " + to_string(shape));
  }

  T* sample(std::size_t i) { return data.data() + i * shape.sample_size(); }
  const T* sample(std::size_t i) const { return data.data() + i * shape.sample_size(); }
};

// --- declarative descriptors -----------------------------------------------

enum class LayerKind { conv2d, fully_connected, batch_norm, activation, reshape };
enum class Activation { linear, sigmoid, leaky_relu };

std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);
LayerKind layer_kind_from_string(std::string_view s);
Activation activation_from_string(std::string_view s);

struct LayerSpec {
  LayerKind kind = LayerKind::activation;
  // conv2d: in/out channels and odd kernel; batch_norm: out_channels only.
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  // fully_connected
  int in_features = 0;
  int out_features = 0;
  Activation activation = Activation::linear;
  // reshape target per sample
  int channels = 0, height = 0, width = 0;

  static LayerSpec conv(int cin, int cout, int k);
  static LayerSpec dense(int fin, int fout);
  static LayerSpec batch_norm(int channels);
  static LayerSpec act(Activation a);
  static LayerSpec reshape(int c, int h, int w);

  void validate() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkConfig {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  int M = 0;
  bool auxiliary_input = false;
  // Per-sample input shape.
  int input_channels = 0, height = 0, width = 0;

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Trainable parameters charged to a batch-norm layer by the accounting rule,
// independent of its channel count.
inline constexpr std::int64_t kBatchNormAccountedParams = 64;

struct LayerCount {
  LayerSpec spec;
  std::int64_t params = 0;
};

struct ParamBreakdown {
  std::vector<LayerCount> encoder;
  std::vector<LayerCount> decoder;
  std::int64_t encoder_total = 0;  // UE side
  std::int64_t decoder_total = 0;  // BS side
  std::int64_t total = 0;
};

std::int64_t count_params(const LayerSpec& spec);
ParamBreakdown count_params(const NetworkConfig& config);
std::int64_t count_fc_flops(std::int64_t in, std::int64_t out);

// --- layers -----------------------------------------------------------------

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  // Overwrites parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual void initialize(std::mt19937_64& /*rng*/) {}
  virtual std::span<T> parameters() { return {}; }
  virtual std::span<T> gradients() { return {}; }
  // Non-trainable state that still belongs in a checkpoint.
  virtual std::span<T> buffers() { return {}; }
  virtual bool differentiable() const { return true; }
  virtual std::string name() const { return std::string(to_string(spec().kind)); }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel);

  LayerSpec spec() const override { return LayerSpec::conv(cin_, cout_, k_); }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  void initialize(std::mt19937_64& rng) override;
  std::span<T> parameters() override { return params_; }
  std::span<T> gradients() override { return grads_; }

  // Weights are [out][in][ky][kx], followed by out_channels biases.
  T& weight(int co, int ci, int ky, int kx) { return params_[((co * cin_ + ci) * k_ + ky) * k_ + kx]; }
  T& bias(int co) { return params_[static_cast<std::size_t>(cout_) * cin_ * k_ * k_ + co]; }

 private:
  void pad_input(const Tensor<T>& x);
  const T* padded_plane(std::size_t n, int ci) const { return padded_.data() + (n * cin_ + ci) * plane_stride_; }

  int cin_, cout_, k_;
  std::vector<T> params_, grads_;
  std::vector<T> padded_;
  std::size_t plane_stride_ = 0;
  Shape in_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features);

  LayerSpec spec() const override { return LayerSpec::dense(in_, out_); }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  void initialize(std::mt19937_64& rng) override;
  std::span<T> parameters() override { return params_; }
  std::span<T> gradients() override { return grads_; }

  // Row-major [out][in] weights followed by out biases.
  T& weight(int o, int i) { return params_[static_cast<std::size_t>(o) * in_ + i]; }
  T& bias(int o) { return params_[static_cast<std::size_t>(out_) * in_ + o]; }

 private:
  int in_, out_;
  std::vector<T> params_, grads_;
  Tensor<T> input_;
};

// Per-channel batch normalization. Batch statistics in train mode, running
// statistics in eval mode.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(int channels, double momentum = 0.99, double epsilon = 1e-3);

  LayerSpec spec() const override { return LayerSpec::batch_norm(channels_); }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  void initialize(std::mt19937_64& rng) override;
  std::span<T> parameters() override { return params_; }
  std::span<T> gradients() override { return grads_; }
  std::span<T> buffers() override { return running_; }

 private:
  void reset();

  int channels_;
  double momentum_, epsilon_;
  std::vector<T> params_, grads_;  // gamma then beta
  std::vector<T> running_;         // mean then variance
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
  Mode last_mode_ = Mode::eval;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation kind, double slope = 0.3) : kind_(kind), slope_(slope) {}

  LayerSpec spec() const override { return LayerSpec::act(kind_); }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ActivationLayer>(*this); }
  std::string name() const override { return std::string(to_string(kind_)); }

 private:
  Activation kind_;
  double slope_;
  Tensor<T> input_, output_;
};

template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}

  LayerSpec spec() const override { return LayerSpec::reshape(c_, h_, w_); }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  int c_, h_, w_;
  Shape in_shape_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

// Ordered stack of layers with value semantics (copies are deep).
template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(const std::vector<LayerSpec>& specs);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  void initialize(std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
  std::vector<LayerSpec> specs() const;

  std::size_t parameter_count() const;
  // Trainable parameters followed by buffers, layer by layer.
  std::vector<T> state() const;
  void load_state(std::span<const T> values);
  std::size_t state_size() const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  bool forward_done_ = false;
};

// --- optimizer --------------------------------------------------------------

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed list of parameter/gradient spans.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}

  void attach(std::span<T> params, std::span<T> grads);
  void attach(Network<T>& net) {
    for (std::size_t i = 0; i < net.size(); ++i) attach(net.layer(i).parameters(), net.layer(i).gradients());
  }
  void step();
  long steps() const { return t_; }

 private:
  struct Slot {
    std::span<T> params, grads;
    std::vector<double> m, v;
  };
  AdamOptions opt_;
  std::vector<Slot> slots_;
  long t_ = 0;
};

// --- gradient checking ------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::vector<std::string> skipped;  // non-differentiable layers left out
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_coordinates = 400;  // checked at random when more exist
  std::uint64_t seed = 7;
};

// Central differences of L = <r, f(x)> for a fixed random r, in train mode.
GradCheckReport gradient_check(Layer<double>& layer, const Tensor<double>& input, const GradCheckOptions& opt = {});
GradCheckReport gradient_check(Network<double>& net, const Tensor<double>& input, const GradCheckOptions& opt = {});

double relative_error(double analytic, double numeric);

}  // namespace varirate::netcore

#endif  // VARIRATE_NETCORE_HPP
