#include "skipclip/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skipclip/errors.hpp"

namespace skipclip::numerics {

namespace {

constexpr const char* kAxisNames3[] = {"depth", "height", "width"};
constexpr const char* kAxisNames2[] = {"height", "width"};

// Convolution problem viewed as 3D; 2D problems get depth 1.
struct ConvGeom {
  std::size_t cin, d, h, w;
  std::size_t cout, kd, kh, kw;
  std::size_t sd, sh, sw, pd, ph, pw;
  std::size_t od, oh, ow;
};

ConvGeom make_conv_geom(const Shape& in, const Shape& k, const Shape* bias, const ConvSpec& spec) {
  if (spec.dims != 2 && spec.dims != 3) throw ShapeError("conv: dims must be 2 or 3");
  const auto dims = static_cast<std::size_t>(spec.dims);
  if (in.size() != dims + 1)
    throw ShapeError("conv: input " + shape_string(in) + " must have rank " + std::to_string(dims + 1));
  if (k.size() != dims + 2)
    throw ShapeError("conv: kernel " + shape_string(k) + " must have rank " + std::to_string(dims + 2));
  if (spec.stride.size() != dims || spec.padding.size() != dims)
    throw ShapeError("conv: stride and padding need one entry per spatial axis");
  if (k[1] != in[0])
    throw ShapeError("conv: channel axis mismatch, kernel expects " + std::to_string(k[1]) +
                     " input channels, input has " + std::to_string(in[0]));
  if (bias && (bias->size() != 1 || (*bias)[0] != k[0]))
    throw ShapeError("conv: bias shape " + shape_string(*bias) + " must be (" + std::to_string(k[0]) + ")");
  const auto& names = dims == 3 ? kAxisNames3 : kAxisNames2;
  for (std::size_t a = 0; a < dims; ++a) {
    if (spec.stride[a] == 0) throw ShapeError(std::string("conv: zero stride on ") + names[a] + " axis");
    if (in[1 + a] + 2 * spec.padding[a] < k[2 + a])
      throw ShapeError(std::string("conv: ") + names[a] + " axis extent " + std::to_string(in[1 + a]) +
                       " with padding " + std::to_string(spec.padding[a]) + " is smaller than kernel " +
                       std::to_string(k[2 + a]));
  }
  ConvGeom g{};
  g.cin = in[0];
  g.cout = k[0];
  const std::size_t off = dims == 3 ? 0 : 1;  // index shift for 2D
  auto pick = [&](const std::vector<std::size_t>& v, std::size_t axis, std::size_t fallback) {
    return axis < off ? fallback : v[axis - off];
  };
  g.d = dims == 3 ? in[1] : 1;
  g.h = in[dims - 1];
  g.w = in[dims];
  g.kd = dims == 3 ? k[2] : 1;
  g.kh = k[dims];
  g.kw = k[dims + 1];
  g.sd = pick(spec.stride, 0, 1);
  g.sh = pick(spec.stride, 1, 1);
  g.sw = pick(spec.stride, 2, 1);
  g.pd = pick(spec.padding, 0, 0);
  g.ph = pick(spec.padding, 1, 0);
  g.pw = pick(spec.padding, 2, 0);
  g.od = conv_output_extent(g.d, g.kd, g.sd, g.pd);
  g.oh = conv_output_extent(g.h, g.kh, g.sh, g.ph);
  g.ow = conv_output_extent(g.w, g.kw, g.sw, g.pw);
  return g;
}

Shape conv_output_shape(const ConvGeom& g, int dims) {
  if (dims == 3) return {g.cout, g.od, g.oh, g.ow};
  return {g.cout, g.oh, g.ow};
}

// Valid kernel offsets [lo, hi) for output position o along one axis.
inline void kernel_range(std::size_t o, std::size_t stride, std::size_t pad, std::size_t k,
                         std::size_t n, std::size_t& lo, std::size_t& hi) {
  const long start = static_cast<long>(o * stride) - static_cast<long>(pad);
  lo = start < 0 ? static_cast<std::size_t>(-start) : 0;
  const long end = static_cast<long>(n) - start;  // first invalid offset
  hi = std::min<long>(static_cast<long>(k), end) < 0 ? 0 : static_cast<std::size_t>(std::min<long>(static_cast<long>(k), end));
}

// Visits every (output, input, kernel) triple in a fixed order:
// oc, od, oh, ow, then ic, kd, kh, kw. `begin(oc, out_index)` runs before the
// inner loops, `tap(out_index, in_index, k_index)` per contributing term.
template <typename Begin, typename Tap, typename End>
void for_each_conv_term(const ConvGeom& g, Begin&& begin, Tap&& tap, End&& end) {
  const std::size_t in_plane = g.h * g.w, in_chan = g.d * in_plane;
  const std::size_t k_plane = g.kh * g.kw, k_vol = g.kd * k_plane, k_oc = g.cin * k_vol;
  std::size_t out_index = 0;
  for (std::size_t oc = 0; oc < g.cout; ++oc) {
    for (std::size_t od = 0; od < g.od; ++od) {
      std::size_t d_lo, d_hi;
      kernel_range(od, g.sd, g.pd, g.kd, g.d, d_lo, d_hi);
      const long id0 = static_cast<long>(od * g.sd) - static_cast<long>(g.pd);
      for (std::size_t oh = 0; oh < g.oh; ++oh) {
        std::size_t h_lo, h_hi;
        kernel_range(oh, g.sh, g.ph, g.kh, g.h, h_lo, h_hi);
        const long ih0 = static_cast<long>(oh * g.sh) - static_cast<long>(g.ph);
        for (std::size_t ow = 0; ow < g.ow; ++ow, ++out_index) {
          std::size_t w_lo, w_hi;
          kernel_range(ow, g.sw, g.pw, g.kw, g.w, w_lo, w_hi);
          const long iw0 = static_cast<long>(ow * g.sw) - static_cast<long>(g.pw);
          begin(oc, out_index);
          for (std::size_t ic = 0; ic < g.cin; ++ic) {
            const std::size_t k_base = oc * k_oc + ic * k_vol;
            const std::size_t in_base = ic * in_chan;
            for (std::size_t kd = d_lo; kd < d_hi; ++kd) {
              const std::size_t id = static_cast<std::size_t>(id0 + static_cast<long>(kd));
              for (std::size_t kh = h_lo; kh < h_hi; ++kh) {
                const std::size_t ih = static_cast<std::size_t>(ih0 + static_cast<long>(kh));
                const std::size_t in_row = in_base + id * in_plane + ih * g.w;
                const std::size_t k_row = k_base + kd * k_plane + kh * g.kw;
                for (std::size_t kw = w_lo; kw < w_hi; ++kw) {
                  const std::size_t iw = static_cast<std::size_t>(iw0 + static_cast<long>(kw));
                  tap(out_index, in_row + iw, k_row + kw);
                }
              }
            }
          }
          end(out_index);
        }
      }
    }
  }
}

// Pooling viewed as (C, D, H, W).
struct PoolGeom {
  std::size_t c, d, h, w;
  std::size_t wd, wh, ww, sd, sh, sw;
  std::size_t od, oh, ow;
  Shape out_shape;
};

PoolGeom make_pool_geom(const Shape& in, std::span<const std::size_t> window,
                        std::span<const std::size_t> stride) {
  if (in.size() < 2 || in.size() > 4)
    throw ShapeError("pool: input " + shape_string(in) + " must be (C, spatial...) with 1-3 spatial axes");
  const std::size_t k = in.size() - 1;
  if (window.size() != k || stride.size() != k)
    throw ShapeError("pool: window and stride need one entry per spatial axis");
  std::size_t ext[3] = {1, 1, 1}, win[3] = {1, 1, 1}, str[3] = {1, 1, 1};
  for (std::size_t a = 0; a < k; ++a) {
    if (window[a] == 0 || stride[a] == 0) throw ShapeError("pool: zero window or stride");
    if (window[a] > in[1 + a])
      throw ShapeError("pool: window " + std::to_string(window[a]) + " exceeds extent " +
                       std::to_string(in[1 + a]) + " on spatial axis " + std::to_string(a));
    ext[3 - k + a] = in[1 + a];
    win[3 - k + a] = window[a];
    str[3 - k + a] = stride[a];
  }
  PoolGeom g{in[0], ext[0], ext[1], ext[2], win[0], win[1], win[2], str[0], str[1], str[2], 0, 0, 0, {}};
  g.od = (g.d - g.wd) / g.sd + 1;
  g.oh = (g.h - g.wh) / g.sh + 1;
  g.ow = (g.w - g.ww) / g.sw + 1;
  g.out_shape = {g.c};
  const std::size_t outs[3] = {g.od, g.oh, g.ow};
  for (std::size_t a = 0; a < k; ++a) g.out_shape.push_back(outs[3 - k + a]);
  return g;
}

// Calls visit(out_index, in_index, first_in_window) over every window element.
template <typename Visit>
void for_each_pool_term(const PoolGeom& g, Visit&& visit) {
  std::size_t out = 0;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t od = 0; od < g.od; ++od)
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow, ++out) {
          bool first = true;
          for (std::size_t a = 0; a < g.wd; ++a)
            for (std::size_t b = 0; b < g.wh; ++b)
              for (std::size_t e = 0; e < g.ww; ++e) {
                const std::size_t idx =
                    ((c * g.d + od * g.sd + a) * g.h + oh * g.sh + b) * g.w + ow * g.sw + e;
                visit(out, idx, first);
                first = false;
              }
        }
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": shape " + shape_string(a) + " does not match " + shape_string(b));
}

}  // namespace

std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  return (n + 2 * pad - k) / stride + 1;
}

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                            const BasicTensor<T>& bias, const ConvSpec& spec) {
  const ConvGeom g = make_conv_geom(input.shape(), kernel.shape(), &bias.shape(), spec);
  BasicTensor<T> out(conv_output_shape(g, spec.dims));
  const T* x = input.data().data();
  const T* k = kernel.data().data();
  T* y = out.data().data();
  T acc{};
  for_each_conv_term(
      g, [&](std::size_t oc, std::size_t) { acc = bias[oc]; },
      [&](std::size_t, std::size_t xi, std::size_t ki) { acc += k[ki] * x[xi]; },
      [&](std::size_t oi) { y[oi] = acc; });
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                           const BasicTensor<T>& out_grad, const ConvSpec& spec) {
  const ConvGeom g = make_conv_geom(input.shape(), kernel.shape(), nullptr, spec);
  require_same_shape(out_grad.shape(), conv_output_shape(g, spec.dims), "conv_backward");
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape()),
                     BasicTensor<T>(Shape{g.cout})};
  const T* x = input.data().data();
  const T* k = kernel.data().data();
  const T* gy = out_grad.data().data();
  T* gx = grads.input.data().data();
  T* gk = grads.kernel.data().data();
  T* gb = grads.bias.data().data();
  T gout{};
  for_each_conv_term(
      g,
      [&](std::size_t oc, std::size_t oi) {
        gout = gy[oi];
        gb[oc] += gout;
      },
      [&](std::size_t, std::size_t xi, std::size_t ki) {
        gx[xi] += k[ki] * gout;
        gk[ki] += x[xi] * gout;
      },
      [](std::size_t) {});
  return grads;
}

template <typename T>
BasicTensor<T> pool_forward(const BasicTensor<T>& input, PoolKind kind,
                            std::span<const std::size_t> window, std::span<const std::size_t> stride) {
  const PoolGeom g = make_pool_geom(input.shape(), window, stride);
  BasicTensor<T> out(g.out_shape);
  const T count = static_cast<T>(g.wd * g.wh * g.ww);
  const auto x = input.data();
  auto y = out.data();
  for_each_pool_term(g, [&](std::size_t o, std::size_t i, bool first) {
    if (kind == PoolKind::kMax)
      y[o] = first ? x[i] : std::max(y[o], x[i]);
    else
      y[o] = first ? x[i] : y[o] + x[i];
  });
  if (kind == PoolKind::kMean)
    for (auto& v : y) v /= count;
  return out;
}

template <typename T>
BasicTensor<T> affine_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias) {
  if (input.rank() != 1) throw ShapeError("affine: input must be a vector, got " + shape_string(input.shape()));
  if (weight.rank() != 2 || weight.dim(1) != input.size())
    throw ShapeError("affine: weight " + shape_string(weight.shape()) + " does not accept input of length " +
                     std::to_string(input.size()));
  if (bias.rank() != 1 || bias.size() != weight.dim(0))
    throw ShapeError("affine: bias " + shape_string(bias.shape()) + " must have length " +
                     std::to_string(weight.dim(0)));
  const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
  BasicTensor<T> out(Shape{out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    T acc = bias[o];
    for (std::size_t i = 0; i < in_n; ++i) acc += weight[o * in_n + i] * input[i];
    out[o] = acc;
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 1) throw ShapeError("softmax: logits must be a vector");
  const T m = *std::max_element(logits.data().begin(), logits.data().end());
  BasicTensor<T> p(logits.shape());
  T s{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p.data()) v /= s;
  return p;
}

template <typename T>
std::pair<T, BasicTensor<T>> softmax_cross_entropy_forward(const BasicTensor<T>& logits,
                                                           std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("softmax_cross_entropy: logits must be a vector");
  if (label >= logits.size())
    throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  const T m = *std::max_element(logits.data().begin(), logits.data().end());
  T s{0};
  for (T v : logits.data()) s += std::exp(v - m);
  const T loss = std::log(s) - (logits[label] - m);
  return {loss, softmax(logits)};
}

template <typename T>
BasicTensor<T> cell_cosines(const BasicTensor<T>& h, const BasicTensor<T>& z, std::size_t* zero_cells) {
  require_same_shape(h.shape(), z.shape(), "cell_cosines");
  if (h.rank() != 3) throw ShapeError("cell_cosines: latent grids must be (C, H, W), got " + shape_string(h.shape()));
  const std::size_t c = h.dim(0), cells = h.dim(1) * h.dim(2);
  BasicTensor<T> grid(Shape{h.dim(1), h.dim(2)});
  for (std::size_t cell = 0; cell < cells; ++cell) {
    T dot{0}, hh{0}, zz{0};
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T a = h[ch * cells + cell], b = z[ch * cells + cell];
      dot += a * b;
      hh += a * a;
      zz += b * b;
    }
    if (hh == T{0} || zz == T{0}) {
      grid[cell] = T{0};
      if (zero_cells) ++*zero_cells;
    } else {
      grid[cell] = dot / (std::sqrt(hh) * std::sqrt(zz));
    }
  }
  return grid;
}

template <typename T>
T grid_mean(const BasicTensor<T>& grid) {
  T s{0};
  for (T v : grid.data()) s += v;
  return s / static_cast<T>(grid.size());
}

// ---- taped operators -------------------------------------------------------

template <typename T>
Var conv(Tape<T>& tape, Var input, Var kernel, Var bias, const ConvSpec& spec) {
  BasicTensor<T> y = conv_forward(tape.value(input), tape.value(kernel), tape.value(bias), spec);
  return tape.record(std::move(y), {input, kernel, bias}, [input, kernel, bias, spec](Tape<T>& t, std::size_t self) {
    ConvGrads<T> g = conv_backward(t.value(input), t.value(kernel), t.output_grad(self), spec);
    if (t.requires_grad(input)) accumulate(t.grad_buffer(input), g.input);
    if (t.requires_grad(kernel)) accumulate(t.grad_buffer(kernel), g.kernel);
    if (t.requires_grad(bias)) accumulate(t.grad_buffer(bias), g.bias);
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  const BasicTensor<T>& in = tape.value(x);
  BasicTensor<T> y(in.shape());
  T kink = std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < in.size(); ++i) {
    y[i] = in[i] > T{0} ? in[i] : T{0};
    kink = std::min(kink, std::abs(in[i]));
  }
  tape.note_kink(kink);
  return tape.record(std::move(y), {x}, [x](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& in = t.value(x);
    const BasicTensor<T>& gy = t.output_grad(self);
    BasicTensor<T>& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in[i] > T{0}) gx[i] += gy[i];
  });
}

template <typename T>
Var pool(Tape<T>& tape, Var x, PoolKind kind, std::vector<std::size_t> window, std::vector<std::size_t> stride) {
  BasicTensor<T> y = pool_forward(tape.value(x), kind, window, stride);
  return tape.record(std::move(y), {x}, [x, kind, window, stride](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& in = t.value(x);
    const PoolGeom g = make_pool_geom(in.shape(), window, stride);
    const BasicTensor<T>& gy = t.output_grad(self);
    BasicTensor<T>& gx = t.grad_buffer(x);
    if (kind == PoolKind::kMean) {
      const T count = static_cast<T>(g.wd * g.wh * g.ww);
      for_each_pool_term(g, [&](std::size_t o, std::size_t i, bool) { gx[i] += gy[o] / count; });
    } else {
      // Route to the first maximum in scan order.
      std::vector<std::size_t> arg(gy.size());
      for_each_pool_term(g, [&](std::size_t o, std::size_t i, bool first) {
        if (first || in[i] > in[arg[o]]) arg[o] = i;
      });
      for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += gy[o];
    }
  });
}

template <typename T>
Var global_mean_pool(Tape<T>& tape, Var x) {
  const Shape& s = tape.value(x).shape();
  if (s.size() < 2) throw ShapeError("global_mean_pool: input needs spatial axes, got " + shape_string(s));
  std::vector<std::size_t> window(s.begin() + 1, s.end());
  std::vector<std::size_t> stride(window.size(), 1);
  const std::size_t channels = s[0];
  return reshape(tape, pool(tape, x, PoolKind::kMean, std::move(window), std::move(stride)), Shape{channels});
}

template <typename T>
Var affine(Tape<T>& tape, Var x, Var weight, Var bias) {
  BasicTensor<T> y = affine_forward(tape.value(x), tape.value(weight), tape.value(bias));
  return tape.record(std::move(y), {x, weight, bias}, [x, weight, bias](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& in = t.value(x);
    const BasicTensor<T>& w = t.value(weight);
    const BasicTensor<T>& gy = t.output_grad(self);
    const std::size_t out_n = w.dim(0), in_n = w.dim(1);
    if (t.requires_grad(x)) {
      BasicTensor<T>& gx = t.grad_buffer(x);
      for (std::size_t o = 0; o < out_n; ++o)
        for (std::size_t i = 0; i < in_n; ++i) gx[i] += w[o * in_n + i] * gy[o];
    }
    if (t.requires_grad(weight)) {
      BasicTensor<T>& gw = t.grad_buffer(weight);
      for (std::size_t o = 0; o < out_n; ++o)
        for (std::size_t i = 0; i < in_n; ++i) gw[o * in_n + i] += gy[o] * in[i];
    }
    if (t.requires_grad(bias)) accumulate(t.grad_buffer(bias), gy);
  });
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::size_t label) {
  auto [loss, probs] = softmax_cross_entropy_forward(tape.value(logits), label);
  return tape.record(BasicTensor<T>::scalar(loss), {logits},
                     [logits, label, probs = std::move(probs)](Tape<T>& t, std::size_t self) {
                       const T g = t.output_grad(self)[0];
                       BasicTensor<T>& gl = t.grad_buffer(logits);
                       for (std::size_t i = 0; i < probs.size(); ++i)
                         gl[i] += g * (probs[i] - (i == label ? T{1} : T{0}));
                     });
}

template <typename T>
Var cosine_score(Tape<T>& tape, Var h, Var z) {
  std::size_t zero_cells = 0;
  const BasicTensor<T> grid = cell_cosines(tape.value(h), tape.value(z), &zero_cells);
  for (std::size_t i = 0; i < zero_cells; ++i) tape.note_zero_norm_cell();
  {
    const BasicTensor<T>& hv = tape.value(h);
    const BasicTensor<T>& zv = tape.value(z);
    const std::size_t c = hv.dim(0), cells = hv.dim(1) * hv.dim(2);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      T hh{0}, zz{0};
      for (std::size_t ch = 0; ch < c; ++ch) {
        hh += hv[ch * cells + cell] * hv[ch * cells + cell];
        zz += zv[ch * cells + cell] * zv[ch * cells + cell];
      }
      tape.note_cell_norm(std::sqrt(std::min(hh, zz)));
    }
  }
  return tape.record(BasicTensor<T>::scalar(grid_mean(grid)), {h, z}, [h, z](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& hv = t.value(h);
    const BasicTensor<T>& zv = t.value(z);
    const std::size_t c = hv.dim(0), cells = hv.dim(1) * hv.dim(2);
    const T g = t.output_grad(self)[0] / static_cast<T>(cells);
    BasicTensor<T>* gh = t.requires_grad(h) ? &t.grad_buffer(h) : nullptr;
    BasicTensor<T>* gz = t.requires_grad(z) ? &t.grad_buffer(z) : nullptr;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      T dot{0}, hh{0}, zz{0};
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T a = hv[ch * cells + cell], b = zv[ch * cells + cell];
        dot += a * b;
        hh += a * a;
        zz += b * b;
      }
      if (hh == T{0} || zz == T{0}) continue;  // cosine pinned to 0
      const T nh = std::sqrt(hh), nz = std::sqrt(zz);
      const T cos = dot / (nh * nz);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t i = ch * cells + cell;
        if (gh) (*gh)[i] += g * (zv[i] / (nh * nz) - cos * hv[i] / hh);
        if (gz) (*gz)[i] += g * (hv[i] / (nh * nz) - cos * zv[i] / zz);
      }
    }
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a).shape(), tape.value(b).shape(), "add");
  BasicTensor<T> y = tape.value(a);
  accumulate(y, tape.value(b));
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    if (t.requires_grad(a)) accumulate(t.grad_buffer(a), t.output_grad(self));
    if (t.requires_grad(b)) accumulate(t.grad_buffer(b), t.output_grad(self));
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a).shape(), tape.value(b).shape(), "mul");
  BasicTensor<T> y = tape.value(a);
  const BasicTensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& gy = t.output_grad(self);
    if (t.requires_grad(a)) {
      BasicTensor<T>& ga = t.grad_buffer(a);
      const BasicTensor<T>& bv = t.value(b);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      BasicTensor<T>& gb = t.grad_buffer(b);
      const BasicTensor<T>& av = t.value(a);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor) {
  BasicTensor<T> y = tape.value(a);
  for (auto& v : y.data()) v *= factor;
  return tape.record(std::move(y), {a}, [a, factor](Tape<T>& t, std::size_t self) {
    const BasicTensor<T>& gy = t.output_grad(self);
    BasicTensor<T>& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += factor * gy[i];
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  T s{0};
  for (T v : tape.value(a).data()) s += v;
  return tape.record(BasicTensor<T>::scalar(s), {a}, [a](Tape<T>& t, std::size_t self) {
    const T g = t.output_grad(self)[0];
    for (auto& v : t.grad_buffer(a).data()) v += g;
  });
}

template <typename T>
Var mean(Tape<T>& tape, std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("mean of zero scalars");
  T s{0};
  for (const Var& v : scalars) s += tape.value(v).item();
  const T n = static_cast<T>(scalars.size());
  std::vector<Var> parents(scalars.begin(), scalars.end());
  return tape.record(BasicTensor<T>::scalar(s / n), parents, [parents, n](Tape<T>& t, std::size_t self) {
    const T g = t.output_grad(self)[0] / n;
    for (const Var& v : parents)
      if (t.requires_grad(v)) t.grad_buffer(v)[0] += g;
  });
}

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape) {
  BasicTensor<T> y = tape.value(a).reshaped(std::move(shape));
  return tape.record(std::move(y), {a}, [a](Tape<T>& t, std::size_t self) {
    BasicTensor<T>& ga = t.grad_buffer(a);
    const BasicTensor<T>& gy = t.output_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  });
}

#define SKIPCLIP_INSTANTIATE_OPS(T)                                                                     \
  template BasicTensor<T> conv_forward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                       const BasicTensor<T>&, const ConvSpec&);                        \
  template ConvGrads<T> conv_backward(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                      const BasicTensor<T>&, const ConvSpec&);                         \
  template BasicTensor<T> pool_forward(const BasicTensor<T>&, PoolKind, std::span<const std::size_t>,  \
                                       std::span<const std::size_t>);                                  \
  template BasicTensor<T> affine_forward(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                         const BasicTensor<T>&);                                       \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                              \
  template std::pair<T, BasicTensor<T>> softmax_cross_entropy_forward(const BasicTensor<T>&,           \
                                                                      std::size_t);                    \
  template BasicTensor<T> cell_cosines(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t*);    \
  template T grid_mean(const BasicTensor<T>&);                                                         \
  template Var conv(Tape<T>&, Var, Var, Var, const ConvSpec&);                                         \
  template Var relu(Tape<T>&, Var);                                                                    \
  template Var pool(Tape<T>&, Var, PoolKind, std::vector<std::size_t>, std::vector<std::size_t>);      \
  template Var global_mean_pool(Tape<T>&, Var);                                                        \
  template Var affine(Tape<T>&, Var, Var, Var);                                                        \
  template Var softmax_cross_entropy(Tape<T>&, Var, std::size_t);                                      \
  template Var cosine_score(Tape<T>&, Var, Var);                                                       \
  template Var add(Tape<T>&, Var, Var);                                                                \
  template Var mul(Tape<T>&, Var, Var);                                                                \
  template Var scale(Tape<T>&, Var, T);                                                                \
  template Var sum(Tape<T>&, Var);                                                                     \
  template Var mean(Tape<T>&, std::span<const Var>);                                                   \
  template Var reshape(Tape<T>&, Var, Shape);

SKIPCLIP_INSTANTIATE_OPS(float)
SKIPCLIP_INSTANTIATE_OPS(double)

}  // namespace skipclip::numerics
