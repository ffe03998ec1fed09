#pragma once

// Forward and backward kernels over (batch, height, width, channels) tensors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "afpseg/error.hpp"
#include "afpseg/tensor.hpp"

namespace afpseg::nn {

namespace detail {

template <class T>
void require_rank4(const Tensor<T>& t, const char* what) {
  if (t.rank() != 4) throw ShapeError(std::string(what) + ": expected (n,h,w,c), got " + to_string(t.shape()));
}

// Output-channel count as a compile-time constant (0 = runtime) so the
// accumulators stay in registers.
template <int Fixed>
struct Channels {
  int runtime;
  constexpr int operator()() const noexcept { return Fixed ? Fixed : runtime; }
};

template <class T, int Fixed>
void conv2d_pixel(const Tensor<T>& input, const T* wdata, const T* bias, int kh, int kw, int pad,
                  Channels<Fixed> cout, int b, int y, int x, T* acc, T* dst) {
  const int h = input.extent(1), w = input.extent(2), cin = input.extent(3);
  for (int co = 0; co < cout(); ++co) acc[co] = bias[co];
  const int ky0 = std::max(0, pad - y), ky1 = std::min(kh, h + pad - y);
  const int kx0 = std::max(0, pad - x), kx1 = std::min(kw, w + pad - x);
  for (int ky = ky0; ky < ky1; ++ky) {
    const T* in_row = &input.at(b, y + ky - pad, 0, 0);
    for (int kx = kx0; kx < kx1; ++kx) {
      const T* in = in_row + static_cast<std::size_t>(x + kx - pad) * cin;
      const T* wk = wdata + (static_cast<std::size_t>(ky) * kw + kx) * cin * cout();
      for (int ci = 0; ci < cin; ++ci) {
        const T v = in[ci];
        const T* wrow = wk + static_cast<std::size_t>(ci) * cout();
        for (int co = 0; co < cout(); ++co) acc[co] += v * wrow[co];
      }
    }
  }
  std::copy(acc, acc + cout(), dst);
}

template <class T, int Fixed>
void conv2d_kernel(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int pad, Tensor<T>& out) {
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), cin = input.extent(3);
  const int kh = kernel.extent(0), kw = kernel.extent(1);
  const Channels<Fixed> cout{kernel.extent(3)};
  const int oh = out.extent(1), ow = out.extent(2);
  const T* wdata = kernel.data();
  constexpr int kBlock = 4;  // output pixels per step: independent add chains
  constexpr int kAcc = Fixed ? Fixed : 1;
  std::vector<T> heap_acc(Fixed ? 0 : static_cast<std::size_t>(kBlock) * cout());
  T stack_acc[kBlock][kAcc];
  auto acc_row = [&](int j) { return Fixed ? stack_acc[j] : heap_acc.data() + static_cast<std::size_t>(j) * cout(); };

  // Columns whose kernel window lies fully inside the input.
  const int x_full0 = std::max(0, pad);
  const int x_full1 = std::max(x_full0, std::min(ow, w + pad - kw + 1));
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y) {
      int x = 0;
      for (; x < x_full0 && x < ow; ++x)
        conv2d_pixel(input, wdata, bias.data(), kh, kw, pad, cout, b, y, x, acc_row(0), &out.at(b, y, x, 0));
      const int ky0 = std::max(0, pad - y), ky1 = std::min(kh, h + pad - y);
      for (; x + kBlock <= x_full1; x += kBlock) {
        T* a0 = acc_row(0);
        T* a1 = acc_row(1);
        T* a2 = acc_row(2);
        T* a3 = acc_row(3);
        for (int co = 0; co < cout(); ++co) a0[co] = a1[co] = a2[co] = a3[co] = bias[co];
        for (int ky = ky0; ky < ky1; ++ky) {
          const T* in_row = &input.at(b, y + ky - pad, 0, 0);
          for (int kx = 0; kx < kw; ++kx) {
            const T* in = in_row + static_cast<std::size_t>(x + kx - pad) * cin;
            const T* wk = wdata + (static_cast<std::size_t>(ky) * kw + kx) * cin * cout();
            for (int ci = 0; ci < cin; ++ci) {
              const T v0 = in[ci], v1 = in[cin + ci], v2 = in[2 * cin + ci], v3 = in[3 * cin + ci];
              const T* wrow = wk + static_cast<std::size_t>(ci) * cout();
              for (int co = 0; co < cout(); ++co) {
                const T wv = wrow[co];
                a0[co] += v0 * wv;
                a1[co] += v1 * wv;
                a2[co] += v2 * wv;
                a3[co] += v3 * wv;
              }
            }
          }
        }
        for (int j = 0; j < kBlock; ++j) std::copy(acc_row(j), acc_row(j) + cout(), &out.at(b, y, x + j, 0));
      }
      for (; x < ow; ++x)
        conv2d_pixel(input, wdata, bias.data(), kh, kw, pad, cout, b, y, x, acc_row(0), &out.at(b, y, x, 0));
    }
}

// d_kernel[ky,kx,ci,:] += sum over pixels of input[p + k, ci] * d_out[p, :]
template <class T, int Fixed>
void conv2d_weight_grad(const Tensor<T>& input, const Tensor<T>& d_out, int kh, int kw, int pad, Tensor<T>& d_kernel) {
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), cin = input.extent(3);
  const Channels<Fixed> cout{d_out.extent(3)};
  const int oh = d_out.extent(1), ow = d_out.extent(2);
  constexpr int kBlock = 4;  // input channels per pass
  constexpr int kAcc = Fixed ? Fixed : 1;
  std::vector<T> heap_acc(Fixed ? 0 : static_cast<std::size_t>(kBlock) * cout());
  T stack_acc[kBlock][kAcc];
  auto acc_row = [&](int j) { return Fixed ? stack_acc[j] : heap_acc.data() + static_cast<std::size_t>(j) * cout(); };
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx) {
      const int y0 = std::max(0, pad - ky), y1 = std::min(oh, h + pad - ky);
      const int x0 = std::max(0, pad - kx), x1 = std::min(ow, w + pad - kx);
      int ci = 0;
      for (; ci + kBlock <= cin; ci += kBlock) {
        T* a0 = acc_row(0);
        T* a1 = acc_row(1);
        T* a2 = acc_row(2);
        T* a3 = acc_row(3);
        for (int co = 0; co < cout(); ++co) a0[co] = a1[co] = a2[co] = a3[co] = T{0};
        for (int b = 0; b < n; ++b)
          for (int y = y0; y < y1; ++y) {
            const T* in = &input.at(b, y + ky - pad, 0, ci);
            const T* g = &d_out.at(b, y, 0, 0);
            for (int x = x0; x < x1; ++x) {
              const T* vx = in + static_cast<std::size_t>(x + kx - pad) * cin;
              const T v0 = vx[0], v1 = vx[1], v2 = vx[2], v3 = vx[3];
              const T* gx = g + static_cast<std::size_t>(x) * cout();
              for (int co = 0; co < cout(); ++co) {
                const T gv = gx[co];
                a0[co] += v0 * gv;
                a1[co] += v1 * gv;
                a2[co] += v2 * gv;
                a3[co] += v3 * gv;
              }
            }
          }
        for (int j = 0; j < kBlock; ++j) {
          T* row = d_kernel.data() + ((static_cast<std::size_t>(ky) * kw + kx) * cin + ci + j) * cout();
          const T* a = acc_row(j);
          for (int co = 0; co < cout(); ++co) row[co] += a[co];
        }
      }
      for (; ci < cin; ++ci) {
        T* acc = acc_row(0);
        std::fill(acc, acc + cout(), T{0});
        for (int b = 0; b < n; ++b)
          for (int y = y0; y < y1; ++y) {
            const T* in = &input.at(b, y + ky - pad, 0, ci);
            const T* g = &d_out.at(b, y, 0, 0);
            for (int x = x0; x < x1; ++x) {
              const T v = in[static_cast<std::size_t>(x + kx - pad) * cin];
              const T* gx = g + static_cast<std::size_t>(x) * cout();
              for (int co = 0; co < cout(); ++co) acc[co] += v * gx[co];
            }
          }
        T* row = d_kernel.data() + ((static_cast<std::size_t>(ky) * kw + kx) * cin + ci) * cout();
        for (int co = 0; co < cout(); ++co) row[co] += acc[co];
      }
    }
}

template <template <class, int> class Kernel, class T, class... Args>
void dispatch_channels(int channels, Args&&... args) {
  switch (channels) {
    case 2: Kernel<T, 2>::run(std::forward<Args>(args)...); break;
    case 4: Kernel<T, 4>::run(std::forward<Args>(args)...); break;
    case 8: Kernel<T, 8>::run(std::forward<Args>(args)...); break;
    case 16: Kernel<T, 16>::run(std::forward<Args>(args)...); break;
    case 32: Kernel<T, 32>::run(std::forward<Args>(args)...); break;
    case 64: Kernel<T, 64>::run(std::forward<Args>(args)...); break;
    default: Kernel<T, 0>::run(std::forward<Args>(args)...); break;
  }
}

template <class T, int Fixed>
struct ConvForward {
  template <class... Args>
  static void run(Args&&... args) {
    conv2d_kernel<T, Fixed>(std::forward<Args>(args)...);
  }
};

template <class T, int Fixed>
struct ConvWeightGrad {
  template <class... Args>
  static void run(Args&&... args) {
    conv2d_weight_grad<T, Fixed>(std::forward<Args>(args)...);
  }
};

}  // namespace detail

/// Cross-correlation with zero padding. kernel is (kh, kw, in, out), bias (out).
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int zero_pad) {
  detail::require_rank4(input, "conv2d input");
  if (kernel.rank() != 4 || bias.rank() != 1) throw ShapeError("conv2d: kernel must be rank 4 and bias rank 1");
  if (zero_pad < 0) throw ShapeError("conv2d: negative padding");
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), cin = input.extent(3);
  const int kh = kernel.extent(0), kw = kernel.extent(1), cout = kernel.extent(3);
  if (kernel.extent(2) != cin)
    throw ShapeError("conv2d: kernel " + to_string(kernel.shape()) + " does not match input " + to_string(input.shape()));
  if (bias.extent(0) != cout) throw ShapeError("conv2d: bias length does not match kernel");
  const int oh = h + 2 * zero_pad - kh + 1;
  const int ow = w + 2 * zero_pad - kw + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");

  Tensor<T> out({n, oh, ow, cout});
  detail::dispatch_channels<detail::ConvForward, T>(cout, input, kernel, bias, zero_pad, out);
  return out;
}

/// Gradients of conv2d. d_kernel and d_bias are accumulated into (they must
/// already have the kernel/bias shapes); d_input is overwritten unless null.
template <class T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& d_out, int zero_pad,
                     Tensor<T>* d_input, Tensor<T>& d_kernel, Tensor<T>& d_bias) {
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), cin = input.extent(3);
  const int kh = kernel.extent(0), kw = kernel.extent(1), cout = kernel.extent(3);
  const int oh = d_out.extent(1), ow = d_out.extent(2);
  if (d_out.extent(0) != n || d_out.extent(3) != cout || oh != h + 2 * zero_pad - kh + 1 ||
      ow != w + 2 * zero_pad - kw + 1)
    throw ShapeError("conv2d_backward: upstream gradient shape " + to_string(d_out.shape()));
  if (d_kernel.shape() != kernel.shape() || d_bias.size() != static_cast<std::size_t>(cout))
    throw ShapeError("conv2d_backward: gradient buffers do not match parameters");

  const std::size_t pixels = d_out.size() / cout;
  for (std::size_t p = 0; p < pixels; ++p)
    for (int co = 0; co < cout; ++co) d_bias[co] += d_out[p * cout + co];

  detail::dispatch_channels<detail::ConvWeightGrad, T>(cout, input, d_out, kh, kw, zero_pad, d_kernel);

  if (!d_input) return;
  // The input gradient is a correlation of d_out with the spatially flipped,
  // in/out-transposed kernel.
  if (zero_pad > kh - 1 || zero_pad > kw - 1) {
    // Rare layout (padding wider than the kernel): scatter directly.
    *d_input = Tensor<T>(input.shape());
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = y + ky - zero_pad, ix = x + kx - zero_pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int ci = 0; ci < cin; ++ci)
                for (int co = 0; co < cout; ++co)
                  d_input->at(b, iy, ix, ci) += d_out.at(b, y, x, co) * kernel.at(ky, kx, ci, co);
            }
    return;
  }
  Tensor<T> flipped({kh, kw, cout, cin});
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx)
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co) flipped.at(kh - 1 - ky, kw - 1 - kx, co, ci) = kernel.at(ky, kx, ci, co);
  const Tensor<T> no_bias({cin});
  Tensor<T> d_in({n, h, w, cin});
  // Output extents equal the input's: oh + 2 * pad' - kh + 1 = h with pad' = kh - 1 - pad.
  if (kh - 1 - zero_pad != kw - 1 - zero_pad) throw ShapeError("conv2d_backward: non-square kernel");
  detail::dispatch_channels<detail::ConvForward, T>(cin, d_out, flipped, no_bias, kh - 1 - zero_pad, d_in);
  *d_input = std::move(d_in);
}

template <class T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.values()) v = v > T{0} ? v : T{0};
}

/// Masks the upstream gradient by the (post-activation) output being positive.
template <class T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activated[i] > T{0})) grad[i] = T{0};
}

template <class T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint8_t> argmax;  // row-major window index 0..3 per output element
};

/// 2x2 max pooling with stride 2; ties go to the first element in window order.
template <class T>
PoolResult<T> maxpool2(const Tensor<T>& input) {
  detail::require_rank4(input, "maxpool2");
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), c = input.extent(3);
  if (h % 2 || w % 2) throw ShapeError("maxpool2: odd spatial extent in " + to_string(input.shape()));
  PoolResult<T> r{Tensor<T>({n, h / 2, w / 2, c}), {}};
  r.argmax.resize(r.output.size());
  std::size_t idx = 0;
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x)
        for (int ch = 0; ch < c; ++ch, ++idx) {
          T best = input.at(b, 2 * y, 2 * x, ch);
          std::uint8_t arg = 0;
          for (std::uint8_t k = 1; k < 4; ++k) {
            const T v = input.at(b, 2 * y + k / 2, 2 * x + k % 2, ch);
            if (v > best) {
              best = v;
              arg = k;
            }
          }
          r.output[idx] = best;
          r.argmax[idx] = arg;
        }
  return r;
}

template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& d_out, const std::vector<std::uint8_t>& argmax, const Shape& input_shape) {
  Tensor<T> d_in(input_shape);
  const int n = d_out.extent(0), oh = d_out.extent(1), ow = d_out.extent(2), c = d_out.extent(3);
  if (argmax.size() != d_out.size() || input_shape[1] != 2 * oh || input_shape[2] != 2 * ow)
    throw ShapeError("maxpool2_backward: shape mismatch");
  std::size_t idx = 0;
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int ch = 0; ch < c; ++ch, ++idx) {
          const int k = argmax[idx];
          d_in.at(b, 2 * y + k / 2, 2 * x + k % 2, ch) += d_out[idx];
        }
  return d_in;
}

/// Nearest-neighbour 2x upscaling.
template <class T>
Tensor<T> upsample2(const Tensor<T>& input) {
  detail::require_rank4(input, "upsample2");
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), c = input.extent(3);
  Tensor<T> out({n, 2 * h, 2 * w, c});
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) {
        const T* src = &input.at(b, y / 2, x / 2, 0);
        std::copy(src, src + c, &out.at(b, y, x, 0));
      }
  return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& d_out) {
  const int n = d_out.extent(0), h = d_out.extent(1) / 2, w = d_out.extent(2) / 2, c = d_out.extent(3);
  Tensor<T> d_in({n, h, w, c});
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) {
        const T* g = &d_out.at(b, y, x, 0);
        T* dst = &d_in.at(b, y / 2, x / 2, 0);
        for (int ch = 0; ch < c; ++ch) dst[ch] += g[ch];
      }
  return d_in;
}

/// Zero-pads bottom/right up to (target_h, target_w).
template <class T>
Tensor<T> pad_to(const Tensor<T>& input, int target_h, int target_w) {
  detail::require_rank4(input, "pad_to");
  const int n = input.extent(0), h = input.extent(1), w = input.extent(2), c = input.extent(3);
  if (target_h < h || target_w < w)
    throw ShapeError("pad_to: target (" + std::to_string(target_h) + "," + std::to_string(target_w) +
                     ") smaller than " + to_string(input.shape()));
  if (target_h == h && target_w == w) return input;
  Tensor<T> out({n, target_h, target_w, c});
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < h; ++y) std::copy_n(&input.at(b, y, 0, 0), static_cast<std::size_t>(w) * c, &out.at(b, y, 0, 0));
  return out;
}

/// Top-left (h, w) window; the backward of pad_to.
template <class T>
Tensor<T> crop_to(const Tensor<T>& input, int h, int w) {
  detail::require_rank4(input, "crop_to");
  const int n = input.extent(0), c = input.extent(3);
  if (h > input.extent(1) || w > input.extent(2)) throw ShapeError("crop_to: window larger than input");
  if (h == input.extent(1) && w == input.extent(2)) return input;
  Tensor<T> out({n, h, w, c});
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < h; ++y) std::copy_n(&input.at(b, y, 0, 0), static_cast<std::size_t>(w) * c, &out.at(b, y, 0, 0));
  return out;
}

/// Channel concatenation [a, b].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank4(a, "concat a");
  detail::require_rank4(b, "concat b");
  if (a.extent(0) != b.extent(0) || a.extent(1) != b.extent(1) || a.extent(2) != b.extent(2))
    throw ShapeError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const int ca = a.extent(3), cb = b.extent(3);
  Tensor<T> out({a.extent(0), a.extent(1), a.extent(2), ca + cb});
  const std::size_t pixels = a.size() / ca;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(a.data() + p * ca, ca, out.data() + p * (ca + cb));
    std::copy_n(b.data() + p * cb, cb, out.data() + p * (ca + cb) + ca);
  }
  return out;
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& t, int first) {
  const int c = t.extent(3);
  Tensor<T> a({t.extent(0), t.extent(1), t.extent(2), first});
  Tensor<T> b({t.extent(0), t.extent(1), t.extent(2), c - first});
  const std::size_t pixels = t.size() / c;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(t.data() + p * c, first, a.data() + p * first);
    std::copy_n(t.data() + p * c + first, c - first, b.data() + p * (c - first));
  }
  return {std::move(a), std::move(b)};
}

/// Softmax over the channel axis, max-shifted for stability.
template <class T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  const int c = logits.shape().back();
  const std::size_t pixels = logits.size() / c;
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* in = logits.data() + p * c;
    T* o = out.data() + p * c;
    const T m = *std::max_element(in, in + c);
    T sum{0};
    for (int k = 0; k < c; ++k) sum += (o[k] = std::exp(in[k] - m));
    for (int k = 0; k < c; ++k) o[k] /= sum;
  }
  return out;
}

}  // namespace afpseg::nn
