// Copyright 2026 The fsct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Test-side reference implementations. Nothing here calls into the library's
// numerical code; each function recomputes its quantity from the definition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fsct/autograd.hpp"
#include "fsct/model.hpp"

namespace fsct::testing {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : t.data) x = static_cast<T>(u(rng));
  return t;
}

/// Per-channel normalization over the spatial dims of a [C, H, W] array.
inline std::vector<double> naive_instance_norm(const std::vector<double>& x, int c, int h, int w,
                                               double eps = 1e-5) {
  std::vector<double> out(x.size());
  const int n = h * w;
  for (int ch = 0; ch < c; ++ch) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += x[ch * n + i];
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (x[ch * n + i] - mu) * (x[ch * n + i] - mu);
    var /= n;
    for (int i = 0; i < n; ++i) out[ch * n + i] = (x[ch * n + i] - mu) / std::sqrt(var + eps);
  }
  return out;
}

/// Normalization over all channels and spatial positions.
inline std::vector<double> naive_layer_norm(const std::vector<double>& x, double eps = 1e-5) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / std::sqrt(var + eps);
  return out;
}

/// Direct-loop valid convolution of a [C, H, W] input with [O, C, K, K]
/// weights, no padding.
inline std::vector<double> naive_conv(const std::vector<double>& x, int c, int h, int w,
                                      const std::vector<double>& k, int o, int ks, int stride,
                                      const std::vector<double>* bias, int* out_h, int* out_w) {
  const int oh = (h - ks) / stride + 1, ow = (w - ks) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(o) * oh * ow, 0.0);
  for (int oc = 0; oc < o; ++oc) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias ? (*bias)[oc] : 0.0;
        for (int ic = 0; ic < c; ++ic) {
          for (int a = 0; a < ks; ++a) {
            for (int b = 0; b < ks; ++b) {
              acc += k[((oc * c + ic) * ks + a) * ks + b] * x[(ic * h + i * stride + a) * w + j * stride + b];
            }
          }
        }
        y[(oc * oh + i) * ow + j] = acc;
      }
    }
  }
  *out_h = oh;
  *out_w = ow;
  return y;
}

inline double softmax_cross_entropy(const std::vector<double>& logits, int target) {
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return -(logits[target] - m - std::log(z));
}

/// Spatial size after a stride-s convolution with kernel k and padding p.
inline int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

struct FdResult {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates where both derivatives are negligible
};

/// Central-difference check of d loss / d p.value[i] for the given
/// coordinates. `loss` must rebuild the graph from the current parameter
/// values each call; `analytic` holds the gradient computed beforehand.
/// `floor` bounds the denominator from below, turning the metric into a mixed
/// absolute/relative error for coordinates with small derivatives.
inline void fd_check_coordinate(Parameter<double>& p, std::size_t i, double analytic,
                                const std::function<double()>& loss, double h, FdResult& r,
                                double floor = 0.0) {
  const double saved = p.value[i];
  p.value[i] = saved + h;
  const double up = loss();
  p.value[i] = saved - h;
  const double down = loss();
  p.value[i] = saved;
  const double numeric = (up - down) / (2.0 * h);
  const double scale = std::max(std::abs(numeric), std::abs(analytic));
  if (scale < 1e-9) {
    ++r.skipped;
    return;
  }
  r.max_rel_error =
      std::max(r.max_rel_error, std::abs(numeric - analytic) / std::max(scale, floor));
  ++r.checked;
}

/// Fresh temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fsct_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Miniature architecture used throughout the tests.
inline ModelConfig tiny_config(int image_size = 16, int channels = 4, int n_res = 2) {
  ModelConfig c;
  c.generator.image_size = image_size;
  c.generator.channels = channels;
  c.generator.n_down = 2;
  c.generator.n_res = n_res;
  c.discriminator.channels = channels;
  c.discriminator.n_layers = 2;
  return c;
}

/// Every parameter drawn uniformly from [-scale, scale] except mixing ratios,
/// which stay inside [0, 1].
template <typename T>
void randomize(TranslationModel<T>& m, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale), r(0.1, 0.9);
  m.visit_all([&](const std::string&, Parameter<T>& p) {
    for (auto& v : p.value.data) {
      v = static_cast<T>(p.kind == ParamKind::kMixRatio ? r(rng) : u(rng));
    }
  });
}

}  // namespace fsct::testing
