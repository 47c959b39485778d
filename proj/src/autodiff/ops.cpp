#include "pyrexpose/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "pyrexpose/error.hpp"

namespace pyrexpose::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& x, const Tensor<T>& y) {
  require(x.shape() == y.shape(), std::string(op) + ": shape mismatch " + x.shape().str() + " vs " + y.shape().str());
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

struct ConvGeom {
  int ci, h, w, k, stride, pad, ho, wo;
  std::size_t rows() const { return static_cast<std::size_t>(ci) * k * k; }
  std::size_t cols() const { return static_cast<std::size_t>(ho) * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::size_t P = g.cols();
  for (int c = 0; c < g.ci; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * P;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* x) {
  const std::size_t P = g.cols();
  for (int c = 0; c < g.ci; ++c) {
    T* xc = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * P;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = xc + static_cast<std::size_t>(iy) * g.w;
          const T* src = row + static_cast<std::size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> make_output(Shape s) {
  return Tensor<T>(s, T(0));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int padding) {
  const Shape xs = x.shape(), ws = w.shape();
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");
  require(ws.h == ws.w, "conv2d: kernel must be square, got " + ws.str());
  require(xs.c == ws.c, "conv2d: input has " + std::to_string(xs.c) + " channels, kernel " + ws.str() + " expects " +
                            std::to_string(ws.c));
  require(b.numel() == static_cast<std::size_t>(ws.n),
          "conv2d: bias has " + std::to_string(b.numel()) + " elements for " + std::to_string(ws.n) + " output channels");
  const int k = ws.h;
  const int ho_num = xs.h + 2 * padding - k, wo_num = xs.w + 2 * padding - k;
  require(ho_num >= 0 && wo_num >= 0, "conv2d: input " + xs.str() + " smaller than kernel " + ws.str());
  const ConvGeom geo{xs.c, xs.h, xs.w, k, stride, padding, ho_num / stride + 1, wo_num / stride + 1};
  const int co = ws.n;
  const std::size_t K = geo.rows(), P = geo.cols();
  const bool pointwise = k == 1 && stride == 1 && padding == 0;

  Tensor<T> out = make_output<T>({xs.n, co, geo.ho, geo.wo});
  std::vector<T> col(pointwise ? 0 : K * P);
  ConstMatMap<T> W(w.data(), co, static_cast<Eigen::Index>(K));
  for (int n = 0; n < xs.n; ++n) {
    const T* xn = x.data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
    const T* cp = xn;
    if (!pointwise) {
      im2col(xn, geo, col.data());
      cp = col.data();
    }
    MatMap<T> O(out.data() + static_cast<std::size_t>(n) * co * P, co, static_cast<Eigen::Index>(P));
    O.noalias() = W * ConstMatMap<T>(cp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    for (int o = 0; o < co; ++o) O.row(o).array() += b.data()[o];
  }

  if (g.tracks({&x, &w, &b})) {
    g.record("conv2d", {x, w, b}, out, [x, w, b, out, geo, pointwise]() mutable {
      const Shape xs = x.shape();
      const int co = w.shape().n;
      const std::size_t K = geo.rows(), P = geo.cols();
      std::vector<T> col(pointwise ? 0 : K * P), dcol(K * P);
      ConstMatMap<T> W(w.data(), co, static_cast<Eigen::Index>(K));
      for (int n = 0; n < xs.n; ++n) {
        ConstMatMap<T> dO(out.grad().data() + static_cast<std::size_t>(n) * co * P, co, static_cast<Eigen::Index>(P));
        const T* xn = x.data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
        if (w.requires_grad()) {
          const T* cp = xn;
          if (!pointwise) {
            im2col(xn, geo, col.data());
            cp = col.data();
          }
          MatMap<T> dW(w.grad().data(), co, static_cast<Eigen::Index>(K));
          dW.noalias() += dO * ConstMatMap<T>(cp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P)).transpose();
        }
        if (b.requires_grad()) {
          auto db = b.grad();
          for (int o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += dO(o, static_cast<Eigen::Index>(p));
            db[o] += static_cast<T>(s);
          }
        }
        if (x.requires_grad()) {
          T* dxn = x.grad().data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
          if (pointwise) {
            MatMap<T> dX(dxn, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
            dX.noalias() += W.transpose() * dO;
          } else {
            MatMap<T> dC(dcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
            dC.noalias() = W.transpose() * dO;
            col2im_add(dcol.data(), geo, dxn);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride) {
  const Shape xs = x.shape(), ws = w.shape();
  require(stride >= 1, "conv_transpose2d: stride must be >= 1");
  require(ws.h == ws.w, "conv_transpose2d: kernel must be square, got " + ws.str());
  require(xs.c == ws.n, "conv_transpose2d: input has " + std::to_string(xs.c) + " channels, kernel " + ws.str() +
                            " expects " + std::to_string(ws.n));
  require(b.numel() == static_cast<std::size_t>(ws.c), "conv_transpose2d: bias size does not match output channels");
  const int k = ws.h, ci = ws.n, co = ws.c;
  const int ho = (xs.h - 1) * stride + k, wo = (xs.w - 1) * stride + k;
  const std::size_t HW = xs.plane(), R = static_cast<std::size_t>(co) * k * k, OP = static_cast<std::size_t>(ho) * wo;

  // cols[(o*k+ky)*k+kx][iy*W+ix] scatters to out[o][iy*s+ky][ix*s+kx].
  auto scatter = [=](const T* cols, T* o_n) {
    for (int o = 0; o < co; ++o)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const T* row = cols + ((static_cast<std::size_t>(o) * k + ky) * k + kx) * HW;
          T* oc = o_n + static_cast<std::size_t>(o) * OP;
          for (int iy = 0; iy < xs.h; ++iy)
            for (int ix = 0; ix < xs.w; ++ix)
              oc[static_cast<std::size_t>(iy * stride + ky) * wo + ix * stride + kx] += row[static_cast<std::size_t>(iy) * xs.w + ix];
        }
  };
  auto gather = [=](const T* o_n, T* cols) {
    for (int o = 0; o < co; ++o)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          T* row = cols + ((static_cast<std::size_t>(o) * k + ky) * k + kx) * HW;
          const T* oc = o_n + static_cast<std::size_t>(o) * OP;
          for (int iy = 0; iy < xs.h; ++iy)
            for (int ix = 0; ix < xs.w; ++ix)
              row[static_cast<std::size_t>(iy) * xs.w + ix] = oc[static_cast<std::size_t>(iy * stride + ky) * wo + ix * stride + kx];
        }
  };

  Tensor<T> out = make_output<T>({xs.n, co, ho, wo});
  std::vector<T> cols(R * HW);
  ConstMatMap<T> W(w.data(), ci, static_cast<Eigen::Index>(R));
  for (int n = 0; n < xs.n; ++n) {
    ConstMatMap<T> X(x.data() + static_cast<std::size_t>(n) * ci * HW, ci, static_cast<Eigen::Index>(HW));
    MatMap<T> C(cols.data(), static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(HW));
    C.noalias() = W.transpose() * X;
    T* on = out.data() + static_cast<std::size_t>(n) * co * OP;
    for (int o = 0; o < co; ++o) std::fill_n(on + static_cast<std::size_t>(o) * OP, OP, b.data()[o]);
    scatter(cols.data(), on);
  }

  if (g.tracks({&x, &w, &b})) {
    g.record("conv_transpose2d", {x, w, b}, out, [x, w, b, out, gather, ci, co, HW, R, OP]() mutable {
      std::vector<T> dcols(R * HW);
      ConstMatMap<T> W(w.data(), ci, static_cast<Eigen::Index>(R));
      for (int n = 0; n < x.shape().n; ++n) {
        const T* don = out.grad().data() + static_cast<std::size_t>(n) * co * OP;
        gather(don, dcols.data());
        ConstMatMap<T> dC(dcols.data(), static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(HW));
        ConstMatMap<T> X(x.data() + static_cast<std::size_t>(n) * ci * HW, ci, static_cast<Eigen::Index>(HW));
        if (x.requires_grad()) {
          MatMap<T> dX(x.grad().data() + static_cast<std::size_t>(n) * ci * HW, ci, static_cast<Eigen::Index>(HW));
          dX.noalias() += W * dC;
        }
        if (w.requires_grad()) {
          MatMap<T> dW(w.grad().data(), ci, static_cast<Eigen::Index>(R));
          dW.noalias() += X * dC.transpose();
        }
        if (b.requires_grad()) {
          auto db = b.grad();
          for (int o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::size_t p = 0; p < OP; ++p) s += don[static_cast<std::size_t>(o) * OP + p];
            db[o] += static_cast<T>(s);
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Elementwise unary op with derivative expressed via input and output.
template <typename T, typename F, typename D>
Tensor<T> unary(Graph<T>& g, const char* kind, const Tensor<T>& x, F f, D df) {
  Tensor<T> out = make_output<T>(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  if (g.tracks({&x})) {
    g.record(kind, {x}, out, [x, out, df]() mutable {
      auto xv = x.values();
      auto ov = out.values();
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += go[i] * df(xv[i], ov[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> leaky_relu(Graph<T>& g, const Tensor<T>& x, T slope) {
  return unary(
      g, "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& x) {
  return unary(
      g, "sigmoid", x, [](T v) { return stable_sigmoid(v); }, [](T, T s) { return s * (T(1) - s); });
}

template <typename T>
Tensor<T> log_sigmoid(Graph<T>& g, const Tensor<T>& x) {
  return unary(
      g, "log_sigmoid", x, [](T v) { return std::min(v, T(0)) - std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return stable_sigmoid(-v); });
}

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& x, T factor) {
  return unary(
      g, "scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape("add", x, y);
  Tensor<T> out = make_output<T>(x.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] + y.data()[i];
  if (g.tracks({&x, &y})) {
    g.record("add", {x, y}, out, [x, y, out]() mutable {
      auto go = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gy[i] += go[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape("sub", x, y);
  Tensor<T> out = make_output<T>(x.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] - y.data()[i];
  if (g.tracks({&x, &y})) {
    g.record("sub", {x, y}, out, [x, y, out]() mutable {
      auto go = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gy[i] -= go[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape("mul", x, y);
  Tensor<T> out = make_output<T>(x.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] * y.data()[i];
  if (g.tracks({&x, &y})) {
    g.record("mul", {x, y}, out, [x, y, out]() mutable {
      auto go = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y.data()[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gy[i] += go[i] * x.data()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y) {
  const Shape a = x.shape(), b = y.shape();
  require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: incompatible shapes " + a.str() + " and " + b.str());
  const Shape os{a.n, a.c + b.c, a.h, a.w};
  Tensor<T> out = make_output<T>(os);
  const std::size_t xa = static_cast<std::size_t>(a.c) * a.plane(), yb = static_cast<std::size_t>(b.c) * b.plane();
  for (int n = 0; n < a.n; ++n) {
    T* o = out.data() + n * (xa + yb);
    std::copy_n(x.data() + n * xa, xa, o);
    std::copy_n(y.data() + n * yb, yb, o + xa);
  }
  if (g.tracks({&x, &y})) {
    g.record("concat_channels", {x, y}, out, [x, y, out, xa, yb]() mutable {
      auto go = out.grad();
      for (int n = 0; n < x.shape().n; ++n) {
        const T* o = go.data() + n * (xa + yb);
        if (x.requires_grad()) {
          T* gx = x.grad().data() + n * xa;
          for (std::size_t i = 0; i < xa; ++i) gx[i] += o[i];
        }
        if (y.requires_grad()) {
          T* gy = y.grad().data() + n * yb;
          for (std::size_t i = 0; i < yb; ++i) gy[i] += o[xa + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2x(Graph<T>& g, const Tensor<T>& x) {
  const Shape s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, "maxpool2x: spatial dims of " + s.str() + " must be even");
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor<T> out = make_output<T>(os);
  std::vector<std::size_t> arg(os.numel());
  std::size_t idx = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xo = 0; xo < os.w; ++xo, ++idx) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * s.w + 2 * xo;
        const std::size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
        for (std::size_t c : cand)
          if (x.data()[c] > x.data()[best]) best = c;
        arg[idx] = best;
        out.data()[idx] = x.data()[best];
      }
    }
  }
  if (g.tracks({&x})) {
    g.record("maxpool2x", {x}, out, [x, out, arg = std::move(arg)]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += go[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> pad_replicate(Graph<T>& g, const Tensor<T>& x, int bottom, int right) {
  require(bottom >= 0 && right >= 0, "pad_replicate: negative padding");
  const Shape s = x.shape();
  require(s.h > 0 && s.w > 0, "pad_replicate: empty input");
  const Shape os{s.n, s.c, s.h + bottom, s.w + right};
  Tensor<T> out = make_output<T>(os);
  auto src_index = [s, os](std::size_t nc, int y, int xx) {
    return nc * s.plane() + static_cast<std::size_t>(std::min(y, s.h - 1)) * s.w + std::min(xx, s.w - 1);
  };
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc)
    for (int y = 0; y < os.h; ++y)
      for (int xx = 0; xx < os.w; ++xx) out.data()[nc * os.plane() + static_cast<std::size_t>(y) * os.w + xx] = x.data()[src_index(nc, y, xx)];
  if (g.tracks({&x})) {
    g.record("pad_replicate", {x}, out, [x, out, os, s, src_index]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc)
        for (int y = 0; y < os.h; ++y)
          for (int xx = 0; xx < os.w; ++xx) gx[src_index(nc, y, xx)] += go[nc * os.plane() + static_cast<std::size_t>(y) * os.w + xx];
    });
  }
  return out;
}

template <typename T>
Tensor<T> crop(Graph<T>& g, const Tensor<T>& x, int h, int w) {
  const Shape s = x.shape();
  require(h >= 1 && w >= 1 && h <= s.h && w <= s.w, "crop: window " + std::to_string(h) + "x" + std::to_string(w) +
                                                        " exceeds input " + s.str());
  const Shape os{s.n, s.c, h, w};
  Tensor<T> out = make_output<T>(os);
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc)
    for (int y = 0; y < h; ++y)
      std::copy_n(x.data() + nc * s.plane() + static_cast<std::size_t>(y) * s.w, w, out.data() + nc * os.plane() + static_cast<std::size_t>(y) * w);
  if (g.tracks({&x})) {
    g.record("crop", {x}, out, [x, out, s, os]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc)
        for (int y = 0; y < os.h; ++y)
          for (int xx = 0; xx < os.w; ++xx)
            gx[nc * s.plane() + static_cast<std::size_t>(y) * s.w + xx] += go[nc * os.plane() + static_cast<std::size_t>(y) * os.w + xx];
    });
  }
  return out;
}

namespace {

struct Tap {
  int i0, i1;
  double f;
};

std::vector<Tap> bilinear_taps(int n_out, int n_in) {
  const double scale = static_cast<double>(n_in) / n_out;
  std::vector<Tap> t(static_cast<std::size_t>(n_out));
  for (int o = 0; o < n_out; ++o) {
    const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    t[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, n_in - 1), src - i0};
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(Graph<T>& g, const Tensor<T>& x, int h, int w) {
  require(h >= 1 && w >= 1, "resize_bilinear: target dims must be positive");
  const Shape s = x.shape();
  require(s.h >= 1 && s.w >= 1, "resize_bilinear: empty input");
  const Shape os{s.n, s.c, h, w};
  Tensor<T> out = make_output<T>(os);
  auto ty = bilinear_taps(h, s.h), tx = bilinear_taps(w, s.w);
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const T* in = x.data() + nc * s.plane();
    T* o = out.data() + nc * os.plane();
    for (int y = 0; y < h; ++y) {
      const Tap a = ty[static_cast<std::size_t>(y)];
      for (int xx = 0; xx < w; ++xx) {
        const Tap b = tx[static_cast<std::size_t>(xx)];
        const double top = in[a.i0 * s.w + b.i0] * (1 - b.f) + in[a.i0 * s.w + b.i1] * b.f;
        const double bot = in[a.i1 * s.w + b.i0] * (1 - b.f) + in[a.i1 * s.w + b.i1] * b.f;
        o[y * w + xx] = static_cast<T>(top * (1 - a.f) + bot * a.f);
      }
    }
  }
  if (g.tracks({&x})) {
    g.record("resize_bilinear", {x}, out, [x, out, s, os, ty = std::move(ty), tx = std::move(tx)]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
        T* gi = gx.data() + nc * s.plane();
        const T* o = go.data() + nc * os.plane();
        for (int y = 0; y < os.h; ++y) {
          const Tap a = ty[static_cast<std::size_t>(y)];
          for (int xx = 0; xx < os.w; ++xx) {
            const Tap b = tx[static_cast<std::size_t>(xx)];
            const double v = o[y * os.w + xx];
            gi[a.i0 * s.w + b.i0] += static_cast<T>(v * (1 - a.f) * (1 - b.f));
            gi[a.i0 * s.w + b.i1] += static_cast<T>(v * (1 - a.f) * b.f);
            gi[a.i1 * s.w + b.i0] += static_cast<T>(v * a.f * (1 - b.f));
            gi[a.i1 * s.w + b.i1] += static_cast<T>(v * a.f * b.f);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(Graph<T>& g, const Tensor<T>& x) {
  const Shape s = x.shape();
  require(s.plane() > 0, "global_avg_pool: empty spatial extent");
  Tensor<T> out = make_output<T>({s.n, s.c, 1, 1});
  const std::size_t P = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    double acc = 0.0;
    for (std::size_t p = 0; p < P; ++p) acc += x.data()[nc * P + p];
    out.data()[nc] = static_cast<T>(acc / static_cast<double>(P));
  }
  if (g.tracks({&x})) {
    g.record("global_avg_pool", {x}, out, [x, out, P]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t nc = 0; nc < go.size(); ++nc) {
        const T v = go[nc] / static_cast<T>(P);
        for (std::size_t p = 0; p < P; ++p) gx[nc * P + p] += v;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.values()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  if (g.tracks({&x})) {
    g.record("sum", {x}, out, [x, out]() mutable {
      const T go = out.grad()[0];
      for (T& v : x.grad()) v += go;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Graph<T>& g, const Tensor<T>& x) {
  require(x.numel() > 0, "mean: empty tensor");
  return scale(g, sum(g, x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> l1_distance(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y) {
  require_same_shape("l1_distance", x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += std::abs(static_cast<double>(x.data()[i]) - y.data()[i]);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  if (g.tracks({&x, &y})) {
    g.record("l1_distance", {x, y}, out, [x, y, out]() mutable {
      const T go = out.grad()[0];
      const std::size_t n = x.numel();
      auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < n; ++i) gx[i] += go * sign(x.data()[i] - y.data()[i]);
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < n; ++i) gy[i] -= go * sign(x.data()[i] - y.data()[i]);
      }
    });
  }
  return out;
}

#define PYREXPOSE_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> conv2d(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);     \
  template Tensor<T> conv_transpose2d(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int); \
  template Tensor<T> leaky_relu(Graph<T>&, const Tensor<T>&, T);                                            \
  template Tensor<T> sigmoid(Graph<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> log_sigmoid(Graph<T>&, const Tensor<T>&);                                              \
  template Tensor<T> add(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(Graph<T>&, const Tensor<T>&, T);                                                 \
  template Tensor<T> concat_channels(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> maxpool2x(Graph<T>&, const Tensor<T>&);                                                \
  template Tensor<T> pad_replicate(Graph<T>&, const Tensor<T>&, int, int);                                  \
  template Tensor<T> crop(Graph<T>&, const Tensor<T>&, int, int);                                           \
  template Tensor<T> resize_bilinear(Graph<T>&, const Tensor<T>&, int, int);                                \
  template Tensor<T> global_avg_pool(Graph<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sum(Graph<T>&, const Tensor<T>&);                                                      \
  template Tensor<T> mean(Graph<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> l1_distance(Graph<T>&, const Tensor<T>&, const Tensor<T>&);

PYREXPOSE_INSTANTIATE_OPS(float)
PYREXPOSE_INSTANTIATE_OPS(double)

}  // namespace pyrexpose::ad
