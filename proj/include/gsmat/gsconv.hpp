#pragma once

// GS orthogonal convolutions:
//   Y = GrExpConv_2(ChShuffle_2(GrExpConv_1(ChShuffle_1(X))))
// with skew-parametrized grouped kernels, 'same' zero padding and stride 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gsmat/error.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/perm.hpp"

namespace gsmat {

/// c x h x w feature map, row-major.
struct Tensor3 {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), data(c_ * h_ * w_, fill) {}

  double& at(std::size_t ch, std::size_t y, std::size_t x) noexcept { return data[(ch * h + y) * w + x]; }
  double at(std::size_t ch, std::size_t y, std::size_t x) const noexcept { return data[(ch * h + y) * w + x]; }
  std::size_t size() const noexcept { return data.size(); }
  bool operator==(const Tensor3&) const = default;
};

/// Grouped kernel, stored as c_out x (c_in / groups) x kh x kw.
struct ConvKernel {
  std::size_t c_out = 0, c_in = 0, kh = 0, kw = 0, groups = 1;
  std::vector<double> w;

  ConvKernel() = default;
  ConvKernel(std::size_t c_out_, std::size_t c_in_, std::size_t kh_, std::size_t kw_, std::size_t groups_)
      : c_out(c_out_), c_in(c_in_), kh(kh_), kw(kw_), groups(groups_) {
    if (groups == 0 || c_out % groups != 0 || c_in % groups != 0) {
      throw dimension_error("ConvKernel: groups=" + std::to_string(groups) + " must divide c_in=" +
                            std::to_string(c_in) + " and c_out=" + std::to_string(c_out));
    }
    if (kh % 2 == 0 || kw % 2 == 0) throw dimension_error("ConvKernel: kernel sides must be odd");
    w.assign(c_out * in_per_group() * kh * kw, 0.0);
  }

  std::size_t in_per_group() const noexcept { return c_in / groups; }
  std::size_t out_per_group() const noexcept { return c_out / groups; }

  double& at(std::size_t o, std::size_t i_local, std::size_t ky, std::size_t kx) noexcept {
    return w[((o * in_per_group() + i_local) * kh + ky) * kw + kx];
  }
  double at(std::size_t o, std::size_t i_local, std::size_t ky, std::size_t kx) const noexcept {
    return w[((o * in_per_group() + i_local) * kh + ky) * kw + kx];
  }
};

/// Y[o, y, x] = sum over the group's inputs i and taps (ky, kx) of
/// K[o, i, ky, kx] * X[i, y + ky - kh/2, x + kx - kw/2], zero outside.
inline Tensor3 grouped_conv(const ConvKernel& k, const Tensor3& x) {
  if (x.c != k.c_in) {
    throw dimension_error("grouped_conv: input has " + std::to_string(x.c) + " channels, kernel expects " +
                          std::to_string(k.c_in));
  }
  Tensor3 y(k.c_out, x.h, x.w);
  const long ph = static_cast<long>(k.kh / 2), pw = static_cast<long>(k.kw / 2);
  const long H = static_cast<long>(x.h), W = static_cast<long>(x.w);
  for (std::size_t o = 0; o < k.c_out; ++o) {
    const std::size_t g = o / k.out_per_group();
    for (std::size_t il = 0; il < k.in_per_group(); ++il) {
      const std::size_t i = g * k.in_per_group() + il;
      for (std::size_t ky = 0; ky < k.kh; ++ky) {
        for (std::size_t kx = 0; kx < k.kw; ++kx) {
          const double wv = k.at(o, il, ky, kx);
          if (wv == 0.0) continue;
          const long dy = static_cast<long>(ky) - ph, dx = static_cast<long>(kx) - pw;
          for (long yy = std::max(0L, -dy); yy < std::min(H, H - dy); ++yy)
            for (long xx = std::max(0L, -dx); xx < std::min(W, W - dx); ++xx)
              y.at(o, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                  wv * x.at(i, static_cast<std::size_t>(yy + dy), static_cast<std::size_t>(xx + dx));
        }
      }
    }
  }
  return y;
}

inline constexpr std::size_t kConvMatrixCap = 2048;

/// Dense (c_out h w) x (c_in h w) matrix of the convolution on row-major vec(X).
inline Matrix conv_as_matrix(const ConvKernel& k, std::size_t h, std::size_t w) {
  if (k.c_out * h * w > kConvMatrixCap || k.c_in * h * w > kConvMatrixCap) {
    throw dimension_error("conv_as_matrix: c*h*w exceeds " + std::to_string(kConvMatrixCap));
  }
  Matrix m(k.c_out * h * w, k.c_in * h * w);
  const long ph = static_cast<long>(k.kh / 2), pw = static_cast<long>(k.kw / 2);
  for (std::size_t o = 0; o < k.c_out; ++o) {
    const std::size_t g = o / k.out_per_group();
    for (std::size_t il = 0; il < k.in_per_group(); ++il) {
      const std::size_t i = g * k.in_per_group() + il;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          for (std::size_t ky = 0; ky < k.kh; ++ky) {
            for (std::size_t kx = 0; kx < k.kw; ++kx) {
              const long sy = static_cast<long>(y) + static_cast<long>(ky) - ph;
              const long sx = static_cast<long>(x) + static_cast<long>(kx) - pw;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
              m((o * h + y) * w + x, (i * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)) +=
                  k.at(o, il, ky, kx);
            }
          }
        }
      }
    }
  }
  return m;
}

/// L = M - ConvTranspose(M), ConvTranspose(M)[i, j, ky, kx] = M[j, i, kh-1-ky, kw-1-kx]
/// (indices local to each group). The induced Jacobian is exactly skew.
inline ConvKernel skew_kernel(const ConvKernel& m) {
  if (m.c_in != m.c_out) {
    throw dimension_error("skew_kernel: kernel must have c_in == c_out, got " + std::to_string(m.c_in) + " and " +
                          std::to_string(m.c_out));
  }
  ConvKernel l(m.c_out, m.c_in, m.kh, m.kw, m.groups);
  const std::size_t gs = m.in_per_group();
  for (std::size_t o = 0; o < m.c_out; ++o) {
    const std::size_t g = o / gs;
    const std::size_t ol = o - g * gs;
    for (std::size_t il = 0; il < gs; ++il) {
      const std::size_t i = g * gs + il;
      for (std::size_t ky = 0; ky < m.kh; ++ky)
        for (std::size_t kx = 0; kx < m.kw; ++kx)
          l.at(o, il, ky, kx) = m.at(o, il, ky, kx) - m.at(i, ol, m.kh - 1 - ky, m.kw - 1 - kx);
    }
  }
  return l;
}

/// X + L*X/1! + L*^2 X/2! + ... through the term of order `terms`.
inline Tensor3 conv_exponential(const ConvKernel& l, const Tensor3& x, std::size_t terms) {
  if (terms < 1) throw std::invalid_argument("conv_exponential: at least one series term is required");
  if (l.c_in != l.c_out) throw dimension_error("conv_exponential: kernel must have c_in == c_out");
  Tensor3 out = x;
  Tensor3 term = x;
  for (std::size_t t = 1; t <= terms; ++t) {
    term = grouped_conv(l, term);
    const double inv = 1.0 / static_cast<double>(t);
    for (double& v : term.data) v *= inv;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += term.data[i];
  }
  return out;
}

/// Channel c of x moves to channel sigma[c].
inline Tensor3 channel_shuffle(const Permutation& p, const Tensor3& x) {
  if (p.size() != x.c) throw dimension_error("channel_shuffle: permutation size differs from channel count");
  Tensor3 y(x.c, x.h, x.w);
  const std::size_t plane = x.h * x.w;
  for (std::size_t c = 0; c < x.c; ++c)
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                y.data.begin() + static_cast<std::ptrdiff_t>(p[c] * plane));
  return y;
}

/// Pairs channel i with i + c/2.
inline Tensor3 maxmin(const Tensor3& x) {
  if (x.c % 2 != 0) throw dimension_error("maxmin: channel count must be even");
  Tensor3 y(x.c, x.h, x.w);
  const std::size_t half = x.c / 2, plane = x.h * x.w;
  for (std::size_t c = 0; c < half; ++c) {
    for (std::size_t t = 0; t < plane; ++t) {
      const double a = x.data[c * plane + t], b = x.data[(c + half) * plane + t];
      y.data[c * plane + t] = std::max(a, b);
      y.data[(c + half) * plane + t] = std::min(a, b);
    }
  }
  return y;
}

/// Pairs channel 2t with 2t + 1.
inline Tensor3 maxmin_permuted(const Tensor3& x) {
  if (x.c % 2 != 0) throw dimension_error("maxmin_permuted: channel count must be even");
  Tensor3 y(x.c, x.h, x.w);
  const std::size_t plane = x.h * x.w;
  for (std::size_t c = 0; c < x.c; c += 2) {
    for (std::size_t t = 0; t < plane; ++t) {
      const double a = x.data[c * plane + t], b = x.data[(c + 1) * plane + t];
      y.data[c * plane + t] = std::max(a, b);
      y.data[(c + 1) * plane + t] = std::min(a, b);
    }
  }
  return y;
}

enum class ShuffleKind { paired, plain };
enum class Activation { maxmin, maxmin_permuted };

inline Tensor3 activate(Activation a, const Tensor3& x) {
  return a == Activation::maxmin ? maxmin(x) : maxmin_permuted(x);
}

/// True when every activation pair (2t, 2t+1) lands, after `shuffle`, on an
/// adjacent even/odd pair inside one group of a `groups`-way grouped conv.
inline bool pairs_aligned(const Permutation& shuffle, std::size_t groups) {
  const std::size_t c = shuffle.size();
  if (groups == 0 || c % groups != 0 || c % 2 != 0) return false;
  const std::size_t gs = c / groups;
  for (std::size_t t = 0; 2 * t + 1 < c; ++t) {
    const std::size_t a = shuffle[2 * t], b = shuffle[2 * t + 1];
    if (a % 2 != 0 || b != a + 1 || a / gs != b / gs) return false;
  }
  return true;
}

struct GSConvConfig {
  std::size_t channels = 0;
  std::size_t groups1 = 1;
  std::optional<std::size_t> groups2;  // second stage (1x1 kernel) when present
  std::size_t exp_terms = 6;
  ShuffleKind shuffle = ShuffleKind::paired;
  Activation activation = Activation::maxmin_permuted;
  std::size_t stride = 1;
};

struct GSConvLayer {
  GSConvConfig config;
  Permutation shuffle1, shuffle2;
  ConvKernel kernel1;                 // 3x3, skew
  std::optional<ConvKernel> kernel2;  // 1x1, skew
};

inline Permutation make_channel_shuffle(ShuffleKind kind, std::size_t groups, std::size_t channels) {
  return kind == ShuffleKind::paired ? paired_stride_perm(groups, channels) : stride_perm(groups, channels);
}

/// Builds the layer from raw (unconstrained) kernels; both are passed through skew_kernel.
inline GSConvLayer make_gs_conv_layer(const GSConvConfig& cfg, const ConvKernel& raw1,
                                      const std::optional<ConvKernel>& raw2 = std::nullopt) {
  if (cfg.stride != 1) throw std::invalid_argument("GSConvLayer: only stride 1 is supported");
  if (cfg.exp_terms < 1) throw std::invalid_argument("GSConvLayer: exp_terms must be at least 1");
  auto check_groups = [&](std::size_t g, const char* name) {
    const std::size_t need = cfg.shuffle == ShuffleKind::paired ? 2 * g : g;
    if (g == 0 || cfg.channels % need != 0) {
      throw dimension_error(std::string("GSConvLayer: ") + name + "=" + std::to_string(g) + " requires channels divisible by " +
                            std::to_string(need));
    }
  };
  check_groups(cfg.groups1, "groups1");
  if (raw1.c_in != cfg.channels || raw1.c_out != cfg.channels || raw1.groups != cfg.groups1 || raw1.kh != 3 || raw1.kw != 3) {
    throw dimension_error("GSConvLayer: first kernel must be channels x channels/groups1 x 3 x 3");
  }
  GSConvLayer layer{cfg, make_channel_shuffle(cfg.shuffle, cfg.groups1, cfg.channels), Permutation::identity(cfg.channels),
                    skew_kernel(raw1), std::nullopt};
  if (cfg.groups2) {
    check_groups(*cfg.groups2, "groups2");
    if (!raw2 || raw2->c_in != cfg.channels || raw2->c_out != cfg.channels || raw2->groups != *cfg.groups2 ||
        raw2->kh != 1 || raw2->kw != 1) {
      throw dimension_error("GSConvLayer: second kernel must be channels x channels/groups2 x 1 x 1");
    }
    layer.shuffle2 = make_channel_shuffle(cfg.shuffle, *cfg.groups2, cfg.channels);
    layer.kernel2 = skew_kernel(*raw2);
  }
  return layer;
}

inline ConvKernel random_kernel(std::mt19937_64& rng, std::size_t channels, std::size_t groups, std::size_t k,
                                double scale) {
  ConvKernel kern(channels, channels, k, k, groups);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : kern.w) v = dist(rng);
  return kern;
}

inline GSConvLayer random_gs_conv_layer(const GSConvConfig& cfg, std::mt19937_64& rng, double scale) {
  ConvKernel raw1 = random_kernel(rng, cfg.channels, cfg.groups1, 3, scale);
  std::optional<ConvKernel> raw2;
  if (cfg.groups2) raw2 = random_kernel(rng, cfg.channels, *cfg.groups2, 1, scale);
  return make_gs_conv_layer(cfg, raw1, raw2);
}

/// The linear layer map; `terms` overrides the configured series length.
inline Tensor3 gs_conv_forward(const GSConvLayer& layer, const Tensor3& x, std::optional<std::size_t> terms = std::nullopt) {
  if (x.c != layer.config.channels) throw dimension_error("gs_conv_forward: channel count mismatch");
  const std::size_t t = terms.value_or(layer.config.exp_terms);
  Tensor3 y = conv_exponential(layer.kernel1, channel_shuffle(layer.shuffle1, x), t);
  if (layer.kernel2) y = conv_exponential(*layer.kernel2, channel_shuffle(layer.shuffle2, y), t);
  return y;
}

/// Layer followed by its configured activation.
inline Tensor3 gs_conv_block_forward(const GSConvLayer& layer, const Tensor3& x) {
  return activate(layer.config.activation, gs_conv_forward(layer, x));
}

/// Jacobian of a linear map on c x h x w tensors, one basis tensor per column.
inline Matrix linear_map_jacobian(const std::function<Tensor3(const Tensor3&)>& f, std::size_t c, std::size_t h,
                                  std::size_t w) {
  const std::size_t n = c * h * w;
  if (n > kConvMatrixCap) throw dimension_error("linear_map_jacobian: c*h*w exceeds " + std::to_string(kConvMatrixCap));
  Matrix j;
  for (std::size_t col = 0; col < n; ++col) {
    Tensor3 e(c, h, w);
    e.data[col] = 1.0;
    const Tensor3 y = f(e);
    if (col == 0) j = Matrix(y.size(), n);
    for (std::size_t r = 0; r < y.size(); ++r) j(r, col) = y.data[r];
  }
  return j;
}

/// Power-iteration estimate of the spectral norm of the convolution's
/// Jacobian on h x w inputs (uses L^T = -L, valid for skew kernels only).
inline double skew_conv_spectral_norm(const ConvKernel& l, std::size_t h, std::size_t w, std::size_t iters = 200,
                                      std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Tensor3 v(l.c_in, h, w);
  for (double& x : v.data) x = nd(rng);
  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const double nv = norm2(v.data);
    if (nv == 0.0) return 0.0;
    for (double& x : v.data) x /= nv;
    Tensor3 u = grouped_conv(l, grouped_conv(l, v));  // L^2 v = -(L^T L) v
    for (double& x : u.data) x = -x;
    lambda = dot(u.data, v.data);
    v = std::move(u);
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// Multiplies every kernel entry by `factor`.
inline ConvKernel scaled(ConvKernel k, double factor) {
  for (double& v : k.w) v *= factor;
  return k;
}

}  // namespace gsmat
