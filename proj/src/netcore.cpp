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

#include "varirate/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace varirate::netcore {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::activation: return "activation";
    case LayerKind::reshape: return "reshape";
  }
  return "?";
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::conv2d, LayerKind::fully_connected, LayerKind::batch_norm, LayerKind::activation,
                 LayerKind::reshape}) {
    if (to_string(k) == s) return k;
  }
  throw NetError("unknown layer kind '" + std::string(s) + "'");
}

Activation activation_from_string(std::string_view s) {
  for (auto a : {Activation::linear, Activation::sigmoid, Activation::leaky_relu}) {
    if (to_string(a) == s) return a;
  }
  throw NetError("unknown activation '" + std::string(s) + "'");
}

LayerSpec LayerSpec::conv(int cin, int cout, int k) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = cin;
  s.out_channels = cout;
  s.kernel = k;
  return s;
}

LayerSpec LayerSpec::dense(int fin, int fout) {
  LayerSpec s;
  s.kind = LayerKind::fully_connected;
  s.in_features = fin;
  s.out_features = fout;
  return s;
}

LayerSpec LayerSpec::batch_norm(int channels) {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

LayerSpec LayerSpec::reshape(int c, int h, int w) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.channels = c;
  s.height = h;
  s.width = w;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::conv2d:
      if (in_channels < 1 || out_channels < 1) throw NetError("conv channel counts must be >= 1");
      if (kernel < 1 || kernel % 2 == 0) throw NetError("conv kernel size must be odd");
      break;
    case LayerKind::fully_connected:
      if (in_features < 1 || out_features < 1) throw NetError("fully connected feature counts must be >= 1");
      break;
    case LayerKind::batch_norm:
      if (out_channels < 1) throw NetError("batch norm needs >= 1 channel");
      break;
    case LayerKind::reshape:
      if (channels < 1 || height < 1 || width < 1) throw NetError("reshape dims must be >= 1");
      break;
    case LayerKind::activation: break;
  }
}

void NetworkConfig::validate() const {
  if (M < 1) throw NetError("codeword length M must be >= 1");
  for (const auto& s : encoder) s.validate();
  for (const auto& s : decoder) s.validate();
  const auto fc_out = std::find_if(encoder.rbegin(), encoder.rend(),
                                   [](const LayerSpec& s) { return s.kind == LayerKind::fully_connected; });
  if (fc_out == encoder.rend() || fc_out->out_features != M)
    throw NetError("encoder must end in a fully connected layer producing M outputs");
  const auto fc_in = std::find_if(decoder.begin(), decoder.end(),
                                  [](const LayerSpec& s) { return s.kind == LayerKind::fully_connected; });
  if (fc_in == decoder.end() || fc_in->in_features != M)
    throw NetError("decoder must start from a fully connected layer consuming M inputs");
}

std::int64_t count_params(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::conv2d:
      return (static_cast<std::int64_t>(spec.in_channels) * spec.kernel * spec.kernel + 1) * spec.out_channels;
    case LayerKind::fully_connected:
      return static_cast<std::int64_t>(spec.out_features) * (spec.in_features + 1);
    case LayerKind::batch_norm: return kBatchNormAccountedParams;
    case LayerKind::activation:
    case LayerKind::reshape: return 0;
  }
  return 0;
}

ParamBreakdown count_params(const NetworkConfig& config) {
  ParamBreakdown out;
  for (const auto& s : config.encoder) {
    out.encoder.push_back({s, count_params(s)});
    out.encoder_total += out.encoder.back().params;
  }
  for (const auto& s : config.decoder) {
    out.decoder.push_back({s, count_params(s)});
    out.decoder_total += out.decoder.back().params;
  }
  out.total = out.encoder_total + out.decoder_total;
  return out;
}

std::int64_t count_fc_flops(std::int64_t in, std::int64_t out) {
  if (in < 0 || out < 0) throw NetError("FC sizes must be non-negative");
  return 2 * in * out;
}

namespace {

template <typename T>
void glorot_uniform(std::span<T> w, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w) v = static_cast<T>(dist(rng));
}

template <typename T>
void require_cache(const Tensor<T>& cached, const char* layer) {
  if (cached.data.empty()) throw NetError(std::string(layer) + ": backward called without a forward cache");
}

}  // namespace

// --- Conv2d -----------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel)
    : cin_(in_channels), cout_(out_channels), k_(kernel) {
  LayerSpec::conv(cin_, cout_, k_).validate();
  params_.assign(static_cast<std::size_t>(cout_) * cin_ * k_ * k_ + cout_, T{0});
  grads_.assign(params_.size(), T{0});
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  if (in.c != static_cast<std::size_t>(cin_))
    throw NetError("conv2d expects " + std::to_string(cin_) + " input channels, got " + to_string(in));
  return {in.n, static_cast<std::size_t>(cout_), in.h, in.w};
}

template <typename T>
void Conv2d<T>::initialize(std::mt19937_64& rng) {
  const std::size_t nw = static_cast<std::size_t>(cout_) * cin_ * k_ * k_;
  glorot_uniform(std::span<T>(params_).first(nw), cin_ * k_ * k_, cout_ * k_ * k_, rng);
  std::fill(params_.begin() + nw, params_.end(), T{0});
}

// Same-padded convolution over a zero-padded copy of the input. The output is
// accumulated in a padded-width layout (H rows of W + 2p) so every kernel tap
// becomes one contiguous multiply-add over the plane; the extra columns are
// cropped afterwards.
template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape));
  const std::size_t H = x.shape.h, W = x.shape.w;
  const std::size_t pad = static_cast<std::size_t>(k_ / 2);
  const std::size_t Wp = W + 2 * pad;
  const std::size_t span = H * Wp;
  const std::size_t plane = H * W;
  pad_input(x);

  std::vector<T> acc(span);
  for (std::size_t n = 0; n < x.shape.n; ++n) {
    for (int co = 0; co < cout_; ++co) {
      std::fill(acc.begin(), acc.end(), bias(co));
      for (int ci = 0; ci < cin_; ++ci) {
        const T* in = padded_plane(n, ci);
        for (int ky = 0; ky < k_; ++ky) {
          for (int kx = 0; kx < k_; ++kx) {
            const T w = weight(co, ci, ky, kx);
            const T* src = in + ky * Wp + kx;
            T* dst = acc.data();
#pragma omp simd
            for (std::size_t i = 0; i < span; ++i) dst[i] += w * src[i];
          }
        }
      }
      T* out = y.sample(n) + co * plane;
      for (std::size_t r = 0; r < H; ++r) std::copy_n(acc.data() + r * Wp, W, out + r * W);
    }
  }
  return y;
}

template <typename T>
void Conv2d<T>::pad_input(const Tensor<T>& x) {
  const std::size_t H = x.shape.h, W = x.shape.w;
  const std::size_t pad = static_cast<std::size_t>(k_ / 2);
  const std::size_t Wp = W + 2 * pad;
  in_shape_ = x.shape;
  // Slack at the end keeps the shifted reads of the last padded-width row in bounds.
  plane_stride_ = (H + 2 * pad) * Wp + 2 * pad;
  padded_.assign(x.shape.n * cin_ * plane_stride_, T{0});
  for (std::size_t n = 0; n < x.shape.n; ++n) {
    for (int ci = 0; ci < cin_; ++ci) {
      const T* src = x.sample(n) + ci * H * W;
      T* dst = padded_.data() + (n * cin_ + ci) * plane_stride_;
      for (std::size_t r = 0; r < H; ++r) std::copy_n(src + r * W, W, dst + (r + pad) * Wp + pad);
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& g) {
  if (padded_.empty()) throw NetError("conv2d: backward called without a forward cache");
  const Shape& s = in_shape_;
  if (g.shape != output_shape(s)) throw NetError("conv2d: gradient shape mismatch");
  const std::size_t H = s.h, W = s.w;
  const std::size_t pad = static_cast<std::size_t>(k_ / 2);
  const std::size_t Wp = W + 2 * pad;
  const std::size_t span = H * Wp;
  const std::size_t plane = H * W;

  std::fill(grads_.begin(), grads_.end(), T{0});
  std::vector<T> gin_padded(cin_ * plane_stride_);
  std::vector<T> go(span, T{0});  // padded-width gradient; extra columns stay 0
  Tensor<T> gx(s);
  T* bias_grad = grads_.data() + static_cast<std::size_t>(cout_) * cin_ * k_ * k_;

  for (std::size_t n = 0; n < s.n; ++n) {
    std::fill(gin_padded.begin(), gin_padded.end(), T{0});
    for (int co = 0; co < cout_; ++co) {
      const T* src = g.sample(n) + co * plane;
      T b = 0;
      for (std::size_t r = 0; r < H; ++r) {
        std::copy_n(src + r * W, W, go.data() + r * Wp);
        for (std::size_t c = 0; c < W; ++c) b += src[r * W + c];
      }
      bias_grad[co] += b;
      for (int ci = 0; ci < cin_; ++ci) {
        const T* in = padded_plane(n, ci);
        T* gin = gin_padded.data() + ci * plane_stride_;
        for (int ky = 0; ky < k_; ++ky) {
          for (int kx = 0; kx < k_; ++kx) {
            const std::size_t shift = ky * Wp + kx;
            const T w = weight(co, ci, ky, kx);
            const T* a = in + shift;
            T* d = gin + shift;
            const T* o = go.data();
            T dot = 0;
#pragma omp simd reduction(+ : dot)
            for (std::size_t i = 0; i < span; ++i) {
              dot += o[i] * a[i];
              d[i] += w * o[i];
            }
            grads_[((co * cin_ + ci) * k_ + ky) * k_ + kx] += dot;
          }
        }
      }
    }
    for (int ci = 0; ci < cin_; ++ci) {
      const T* src = gin_padded.data() + ci * plane_stride_;
      T* dst = gx.sample(n) + ci * plane;
      for (std::size_t r = 0; r < H; ++r) std::copy_n(src + (r + pad) * Wp + pad, W, dst + r * W);
    }
  }
  return gx;
}

// --- Dense ------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {
  LayerSpec::dense(in_, out_).validate();
  params_.assign(static_cast<std::size_t>(out_) * in_ + out_, T{0});
  grads_.assign(params_.size(), T{0});
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  if (in.sample_size() != static_cast<std::size_t>(in_))
    throw NetError("fully_connected expects " + std::to_string(in_) + " features, got " + to_string(in));
  return {in.n, static_cast<std::size_t>(out_), 1, 1};
}

template <typename T>
void Dense<T>::initialize(std::mt19937_64& rng) {
  const std::size_t nw = static_cast<std::size_t>(out_) * in_;
  glorot_uniform(std::span<T>(params_).first(nw), in_, out_, rng);
  std::fill(params_.begin() + nw, params_.end(), T{0});
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape));
  input_ = x;
  for (std::size_t n = 0; n < x.shape.n; ++n) {
    const T* in = x.sample(n);
    T* out = y.sample(n);
    for (int o = 0; o < out_; ++o) {
      const T* wrow = params_.data() + static_cast<std::size_t>(o) * in_;
      T sum = 0;
#pragma omp simd reduction(+ : sum)
      for (int i = 0; i < in_; ++i) sum += wrow[i] * in[i];
      out[o] = sum + bias(o);
    }
  }
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& g) {
  require_cache(input_, "fully_connected");
  if (g.shape != output_shape(input_.shape)) throw NetError("fully_connected: gradient shape mismatch");
  Tensor<T> gx(input_.shape);
  std::fill(grads_.begin(), grads_.end(), T{0});
  T* gb = grads_.data() + static_cast<std::size_t>(out_) * in_;
  for (std::size_t n = 0; n < input_.shape.n; ++n) {
    const T* in = input_.sample(n);
    const T* go = g.sample(n);
    T* gi = gx.sample(n);
    for (int o = 0; o < out_; ++o) {
      const T d = go[o];
      gb[o] += d;
      if (d == T{0}) continue;
      const T* wrow = params_.data() + static_cast<std::size_t>(o) * in_;
      T* gw = grads_.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        gw[i] += d * in[i];
        gi[i] += d * wrow[i];
      }
    }
  }
  return gx;
}

// --- BatchNorm --------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(int channels, double momentum, double epsilon)
    : channels_(channels), momentum_(momentum), epsilon_(epsilon) {
  LayerSpec::batch_norm(channels).validate();
  params_.assign(2 * static_cast<std::size_t>(channels_), T{0});
  grads_.assign(params_.size(), T{0});
  running_.assign(2 * static_cast<std::size_t>(channels_), T{0});
  reset();
}

template <typename T>
void BatchNorm<T>::initialize(std::mt19937_64&) { reset(); }

template <typename T>
void BatchNorm<T>::reset() {
  for (int c = 0; c < channels_; ++c) {
    params_[c] = T{1};
    params_[channels_ + c] = T{0};
    running_[c] = T{0};
    running_[channels_ + c] = T{1};
  }
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.shape.c != static_cast<std::size_t>(channels_))
    throw NetError("batch_norm expects " + std::to_string(channels_) + " channels, got " + to_string(x.shape));
  const std::size_t plane = x.shape.h * x.shape.w;
  const std::size_t count = x.shape.n * plane;
  Tensor<T> y(x.shape);
  normalized_ = Tensor<T>(x.shape);
  inv_std_.assign(channels_, T{0});
  last_mode_ = mode;
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (std::size_t n = 0; n < x.shape.n; ++n) {
        const T* in = x.sample(n) + c * plane;
        for (std::size_t p = 0; p < plane; ++p) sum += in[p];
      }
      mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < x.shape.n; ++n) {
        const T* in = x.sample(n) + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = in[p] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      running_[c] = static_cast<T>(momentum_ * running_[c] + (1.0 - momentum_) * mean);
      running_[channels_ + c] = static_cast<T>(momentum_ * running_[channels_ + c] + (1.0 - momentum_) * var);
    } else {
      mean = running_[c];
      var = running_[channels_ + c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + epsilon_));
    const T m = static_cast<T>(mean);
    inv_std_[c] = inv;
    const T gamma = params_[c], beta = params_[channels_ + c];
    for (std::size_t n = 0; n < x.shape.n; ++n) {
      const T* in = x.sample(n) + c * plane;
      T* xh = normalized_.sample(n) + c * plane;
      T* out = y.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        xh[p] = (in[p] - m) * inv;
        out[p] = gamma * xh[p] + beta;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& g) {
  require_cache(normalized_, "batch_norm");
  if (g.shape != normalized_.shape) throw NetError("batch_norm: gradient shape mismatch");
  const Shape& s = g.shape;
  const std::size_t plane = s.h * s.w;
  const double count = static_cast<double>(s.n * plane);
  Tensor<T> gx(s);
  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* go = g.sample(n) + c * plane;
      const T* xh = normalized_.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum_g += go[p];
        sum_gx += static_cast<double>(go[p]) * xh[p];
      }
    }
    grads_[c] = static_cast<T>(sum_gx);
    grads_[channels_ + c] = static_cast<T>(sum_g);
    const T scale = params_[c] * inv_std_[c];
    const T mean_g = static_cast<T>(sum_g / count);
    const T mean_gx = static_cast<T>(sum_gx / count);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* go = g.sample(n) + c * plane;
      const T* xh = normalized_.sample(n) + c * plane;
      T* gi = gx.sample(n) + c * plane;
      if (last_mode_ == Mode::train) {
        for (std::size_t p = 0; p < plane; ++p) gi[p] = scale * (go[p] - mean_g - xh[p] * mean_gx);
      } else {
        for (std::size_t p = 0; p < plane; ++p) gi[p] = scale * go[p];
      }
    }
  }
  return gx;
}

// --- activations ------------------------------------------------------------

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x, Mode) {
  input_ = x;
  Tensor<T> y(x.shape);
  switch (kind_) {
    case Activation::linear: y.data = x.data; break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
        y.data[i] = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
      }
      break;
    case Activation::leaky_relu: {
      const T slope = static_cast<T>(slope_);
      for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > T{0} ? x.data[i] : slope * x.data[i];
      break;
    }
  }
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& g) {
  require_cache(input_, "activation");
  if (g.shape != input_.shape) throw NetError("activation: gradient shape mismatch");
  Tensor<T> gx(g.shape);
  switch (kind_) {
    case Activation::linear: gx.data = g.data; break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] = g.data[i] * output_.data[i] * (T{1} - output_.data[i]);
      break;
    case Activation::leaky_relu: {
      const T slope = static_cast<T>(slope_);
      for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] = input_.data[i] > T{0} ? g.data[i] : slope * g.data[i];
      break;
    }
  }
  return gx;
}

// --- reshape ----------------------------------------------------------------

template <typename T>
Shape Reshape<T>::output_shape(const Shape& in) const {
  const Shape out{in.n, static_cast<std::size_t>(c_), static_cast<std::size_t>(h_), static_cast<std::size_t>(w_)};
  if (out.sample_size() != in.sample_size())
    throw NetError("reshape of " + to_string(in) + " to " + to_string(out) + " changes the element count");
  return out;
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape;
  return Tensor<T>(output_shape(x.shape), x.data);
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& g) {
  if (in_shape_.size() == 0 && g.shape.size() != 0) throw NetError("reshape: backward called without a forward cache");
  if (g.shape.sample_size() != in_shape_.sample_size()) throw NetError("reshape: gradient shape mismatch");
  return Tensor<T>(in_shape_, g.data);
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::conv2d: return std::make_unique<Conv2d<T>>(spec.in_channels, spec.out_channels, spec.kernel);
    case LayerKind::fully_connected: return std::make_unique<Dense<T>>(spec.in_features, spec.out_features);
    case LayerKind::batch_norm: return std::make_unique<BatchNorm<T>>(spec.out_channels);
    case LayerKind::activation: return std::make_unique<ActivationLayer<T>>(spec.activation);
    case LayerKind::reshape: return std::make_unique<Reshape<T>>(spec.channels, spec.height, spec.width);
  }
  throw NetError("unsupported layer kind");
}

// --- Network ----------------------------------------------------------------

template <typename T>
Network<T>::Network(const std::vector<LayerSpec>& specs) {
  for (const auto& s : specs) layers_.push_back(make_layer<T>(s));
}

template <typename T>
Network<T>::Network(const Network& other) : forward_done_(other.forward_done_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Network<T>::initialize(std::mt19937_64& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h, mode);
  forward_done_ = true;
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_out) {
  if (!forward_done_) throw NetError("network backward called before forward");
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<LayerSpec> Network<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->parameters().size();
  return n;
}

template <typename T>
std::size_t Network<T>::state_size() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->parameters().size() + l->buffers().size();
  return n;
}

template <typename T>
std::vector<T> Network<T>::state() const {
  std::vector<T> out;
  out.reserve(state_size());
  for (const auto& l : layers_) {
    const auto p = l->parameters();
    const auto b = l->buffers();
    out.insert(out.end(), p.begin(), p.end());
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

template <typename T>
void Network<T>::load_state(std::span<const T> values) {
  if (values.size() != state_size())
    throw NetError("state has " + std::to_string(values.size()) + " values, network needs " +
                   std::to_string(state_size()));
  std::size_t pos = 0;
  for (auto& l : layers_) {
    for (auto span : {l->parameters(), l->buffers()}) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), span.size(), span.begin());
      pos += span.size();
    }
  }
}

// --- Adam -------------------------------------------------------------------

template <typename T>
void Adam<T>::attach(std::span<T> params, std::span<T> grads) {
  if (params.size() != grads.size()) throw NetError("adam: parameter/gradient size mismatch");
  if (params.empty()) return;
  slots_.push_back({params, grads, std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0)});
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const double lr = opt_.learning_rate;
  for (auto& slot : slots_) {
    for (std::size_t i = 0; i < slot.params.size(); ++i) {
      const double g = slot.grads[i];
      slot.m[i] = opt_.beta1 * slot.m[i] + (1.0 - opt_.beta1) * g;
      slot.v[i] = opt_.beta2 * slot.v[i] + (1.0 - opt_.beta2) * g * g;
      const double update = lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + opt_.epsilon);
      slot.params[i] = static_cast<T>(slot.params[i] - update);
    }
  }
}

// --- gradient check ---------------------------------------------------------

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

struct Probe {
  std::vector<double>* values;  // owning storage of the coordinate
  std::size_t index;
  double analytic;
};

double projected(const Tensor<double>& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += r[i] * y.data[i];
  return s;
}

template <typename Forward>
GradCheckReport run_check(Forward&& forward, std::vector<Probe> probes, const GradCheckOptions& opt,
                          const std::vector<double>& r) {
  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  if (probes.size() > opt.max_coordinates) {
    std::shuffle(probes.begin(), probes.end(), rng);
    probes.resize(opt.max_coordinates);
  }
  for (const auto& p : probes) {
    double& v = (*p.values)[p.index];
    const double saved = v;
    v = saved + opt.epsilon;
    const double up = projected(forward(), r);
    v = saved - opt.epsilon;
    const double down = projected(forward(), r);
    v = saved;
    const double numeric = (up - down) / (2.0 * opt.epsilon);
    if (!std::isfinite(numeric) || !std::isfinite(p.analytic))
      throw NetError("gradient check produced a non-finite gradient");
    report.max_rel_error = std::max(report.max_rel_error, relative_error(p.analytic, numeric));
    ++report.coordinates_checked;
  }
  return report;
}

// Parameters are addressed through a mirror vector copied back before each
// forward, so the same probing loop serves inputs and weights.
struct ParamMirror {
  Layer<double>* layer;
  std::vector<double> values;
  void sync() const { std::copy(values.begin(), values.end(), layer->parameters().begin()); }
};

std::vector<double> random_projection(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> r(n);
  for (auto& v : r) v = dist(rng);
  return r;
}

}  // namespace

GradCheckReport gradient_check(Layer<double>& layer, const Tensor<double>& input, const GradCheckOptions& opt) {
  if (opt.epsilon < 1e-6 || opt.epsilon > 1e-3) throw NetError("gradient check epsilon must lie in [1e-6, 1e-3]");
  if (!layer.differentiable()) {
    GradCheckReport skipped;
    skipped.skipped.push_back(layer.name());
    return skipped;
  }
  const std::vector<double> saved_buffers(layer.buffers().begin(), layer.buffers().end());
  Tensor<double> x = input;
  const auto y = layer.forward(x, Mode::train);
  const auto r = random_projection(y.data.size(), opt.seed);
  const auto gx = layer.backward(Tensor<double>(y.shape, r));

  ParamMirror mirror{&layer, {layer.parameters().begin(), layer.parameters().end()}};
  const std::vector<double> grads(layer.gradients().begin(), layer.gradients().end());
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < x.data.size(); ++i) probes.push_back({&x.data, i, gx.data[i]});
  for (std::size_t i = 0; i < mirror.values.size(); ++i) probes.push_back({&mirror.values, i, grads[i]});

  auto forward = [&] {
    mirror.sync();
    return layer.forward(x, Mode::train);
  };
  auto report = run_check(forward, std::move(probes), opt, r);
  mirror.sync();
  std::copy(saved_buffers.begin(), saved_buffers.end(), layer.buffers().begin());
  return report;
}

GradCheckReport gradient_check(Network<double>& net, const Tensor<double>& input, const GradCheckOptions& opt) {
  if (opt.epsilon < 1e-6 || opt.epsilon > 1e-3) throw NetError("gradient check epsilon must lie in [1e-6, 1e-3]");
  bool all_smooth = true;
  for (std::size_t i = 0; i < net.size(); ++i) all_smooth = all_smooth && net.layer(i).differentiable();

  if (!all_smooth) {
    // Check each smooth layer in isolation at the input it sees in the
    // composed forward pass; non-differentiable layers are reported.
    GradCheckReport report;
    Tensor<double> h = input;
    for (std::size_t i = 0; i < net.size(); ++i) {
      auto& layer = net.layer(i);
      const auto next = layer.forward(h, Mode::train);
      auto local = gradient_check(layer, h, opt);
      report.max_rel_error = std::max(report.max_rel_error, local.max_rel_error);
      report.coordinates_checked += local.coordinates_checked;
      report.skipped.insert(report.skipped.end(), local.skipped.begin(), local.skipped.end());
      h = next;
    }
    return report;
  }

  const auto saved_state = net.state();
  Tensor<double> x = input;
  const auto y = net.forward(x, Mode::train);
  const auto r = random_projection(y.data.size(), opt.seed);
  const auto gx = net.backward(Tensor<double>(y.shape, r));

  std::vector<ParamMirror> mirrors;
  mirrors.reserve(net.size());
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < x.data.size(); ++i) probes.push_back({&x.data, i, gx.data[i]});
  for (std::size_t l = 0; l < net.size(); ++l) {
    auto& layer = net.layer(l);
    if (layer.parameters().empty()) continue;
    mirrors.push_back({&layer, {layer.parameters().begin(), layer.parameters().end()}});
  }
  for (auto& m : mirrors) {
    const auto g = m.layer->gradients();
    for (std::size_t i = 0; i < m.values.size(); ++i) probes.push_back({&m.values, i, g[i]});
  }
  auto forward = [&] {
    for (const auto& m : mirrors) m.sync();
    return net.forward(x, Mode::train);
  };
  auto report = run_check(forward, std::move(probes), opt, r);
  net.load_state(saved_state);
  return report;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Dense<float>;
template class Dense<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class ActivationLayer<float>;
template class ActivationLayer<double>;
template class Reshape<float>;
template class Reshape<double>;
template class Network<float>;
template class Network<double>;
template class Adam<float>;
template class Adam<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&);

}  // namespace varirate::netcore
