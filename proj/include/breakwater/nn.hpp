#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "breakwater/rng.hpp"

namespace breakwater::nn {

// Dense NCHW tensor. Parameters and activations are stored in T (float in
// production, double in the finite-difference tests); losses and metrics
// always accumulate in double.
template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, T(0)) {}

  size_t size() const { return v.size(); }
  int plane_size() const { return h * w; }

  T* plane(int in, int ic) {
    return v.data() + (size_t(in) * c + ic) * size_t(h) * w;
  }
  const T* plane(int in, int ic) const {
    return v.data() + (size_t(in) * c + ic) * size_t(h) * w;
  }
  T& at(int in, int ic, int iy, int ix) {
    return v[((size_t(in) * c + ic) * h + iy) * w + ix];
  }
  const T& at(int in, int ic, int iy, int ix) const {
    return v[((size_t(in) * c + ic) * h + iy) * w + ix];
  }

  void zero() { std::fill(v.begin(), v.end(), T(0)); }

  bool finite() const {
    for (T x : v)
      if (!std::isfinite(double(x))) return false;
    return true;
  }
};

enum class Act : uint8_t { none = 0, relu = 1 };

struct LayerSpec {
  enum class Kind : uint8_t {
    conv3x3 = 0,        // 3x3, stride 1, zero padding (same size)
    conv1x1 = 1,
    maxpool2 = 2,       // 2x2, stride 2
    upsample2 = 3,      // nearest neighbour x2
    skip_concat = 4,    // concatenate the output of layer `from` channelwise
    global_avg_pool = 5,
    dense = 6,          // applied to the flattened input
  };
  Kind kind = Kind::conv3x3;
  int in_ch = 0;   // conv/dense input size (dense: flattened)
  int out_ch = 0;  // conv/dense output size
  Act act = Act::none;
  int from = -1;   // skip_concat source layer index

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv3(int in_c, int out_c, Act a) {
    return {Kind::conv3x3, in_c, out_c, a, -1};
  }
  static LayerSpec conv1(int in_c, int out_c, Act a) {
    return {Kind::conv1x1, in_c, out_c, a, -1};
  }
  static LayerSpec maxpool() { return {Kind::maxpool2, 0, 0, Act::none, -1}; }
  static LayerSpec upsample() { return {Kind::upsample2, 0, 0, Act::none, -1}; }
  static LayerSpec skip(int from) {
    return {Kind::skip_concat, 0, 0, Act::none, from};
  }
  static LayerSpec gap() {
    return {Kind::global_avg_pool, 0, 0, Act::none, -1};
  }
  static LayerSpec fc(int in_c, int out_c, Act a) {
    return {Kind::dense, in_c, out_c, a, -1};
  }
};

struct Shape {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
  int in_channels = 0, in_h = 0, in_w = 0;
  std::vector<LayerSpec> layers;

  // Output shape of every layer; throws std::runtime_error when the
  // channel/shape chain is inconsistent.
  std::vector<Shape> infer_shapes() const;
  Shape output_shape() const;
  bool operator==(const NetworkSpec&) const = default;
};

// ---------------------------------------------------------------------------
// layer kernels
// ---------------------------------------------------------------------------

template <class T>
void conv3x3_forward(const Tensor4<T>& in, const Tensor4<T>& w,
                     const std::vector<T>& bias, Act act, Tensor4<T>& out) {
  const int N = in.n, C = in.c, H = in.h, W = in.w, OC = w.n;
  constexpr int kBlock = 4;  // output channels sharing one input stream
  for (int nn_ = 0; nn_ < N; ++nn_) {
    for (int cb = 0; cb < OC; cb += kBlock) {
      const int nb = std::min(kBlock, OC - cb);
      T* planes[kBlock] = {};
      for (int b = 0; b < nb; ++b) {
        planes[b] = out.plane(nn_, cb + b);
        std::fill(planes[b], planes[b] + size_t(H) * W, bias[cb + b]);
      }
      for (int ci = 0; ci < C; ++ci) {
        const T* const ip = in.plane(nn_, ci);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = ky - 1;
          const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
          T wk[kBlock][3];
          for (int b = 0; b < nb; ++b)
            for (int t = 0; t < 3; ++t)
              wk[b][t] = w.at(cb + b, ci, ky, t);
          for (int y = y0; y < y1; ++y) {
            const T* __restrict irow = ip + size_t(y + sy) * W;
            for (int b = 0; b < nb; ++b) {
              T* __restrict orow = planes[b] + size_t(y) * W;
              const T w0 = wk[b][0], w1 = wk[b][1], w2 = wk[b][2];
              orow[0] += w1 * irow[0];
              if (W > 1) orow[0] += w2 * irow[1];
              for (int x = 1; x < W - 1; ++x)
                orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
              if (W > 1) orow[W - 1] += w0 * irow[W - 2] + w1 * irow[W - 1];
            }
          }
        }
      }
      if (act == Act::relu) {
        for (int b = 0; b < nb; ++b)
          for (size_t i = 0; i < size_t(H) * W; ++i)
            if (planes[b][i] < T(0)) planes[b][i] = T(0);
      }
    }
  }
}

namespace detail {

// Dot product over 8 fixed lanes: vectorizes without reassociation and the
// summation order stays the same on every run.
template <class T>
double lane_dot(const T* __restrict a, const T* __restrict b, int n) {
  T lanes[8] = {};
  int x = 0;
  for (; x + 8 <= n; x += 8)
    for (int j = 0; j < 8; ++j) lanes[j] += a[x + j] * b[x + j];
  double total = 0;
  for (int j = 0; j < 8; ++j) total += double(lanes[j]);
  for (; x < n; ++x) total += double(a[x]) * double(b[x]);
  return total;
}

template <class T>
double lane_sum(const T* __restrict a, int n) {
  T lanes[8] = {};
  int x = 0;
  for (; x + 8 <= n; x += 8)
    for (int j = 0; j < 8; ++j) lanes[j] += a[x + j];
  double total = 0;
  for (int j = 0; j < 8; ++j) total += double(lanes[j]);
  for (; x < n; ++x) total += double(a[x]);
  return total;
}

// out[x] += s * in[x]
template <class T>
void axpy(T* __restrict out, const T* __restrict in, T s, int n) {
  for (int x = 0; x < n; ++x) out[x] += s * in[x];
}

}  // namespace detail

// g is the gradient w.r.t. the layer's pre-activation output (relu already
// applied by the caller). Accumulates into dw/db and din.
template <class T>
void conv3x3_backward(const Tensor4<T>& in, const Tensor4<T>& w,
                      const Tensor4<T>& g, Tensor4<T>& dw, std::vector<T>& db,
                      Tensor4<T>* din) {
  const int N = in.n, C = in.c, H = in.h, W = in.w, OC = w.n;
  for (int nn_ = 0; nn_ < N; ++nn_) {
    for (int co = 0; co < OC; ++co) {
      const T* const gp = g.plane(nn_, co);
      db[co] += T(detail::lane_sum(gp, H * W));
      for (int ci = 0; ci < C; ++ci) {
        const T* const ip = in.plane(nn_, ci);
        T* const dip = din ? din->plane(nn_, ci) : nullptr;
        T* const dwp = &dw.at(co, ci, 0, 0);
        const T* const wp = &w.at(co, ci, 0, 0);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = ky - 1;
          const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
          double acc0 = 0, acc1 = 0, acc2 = 0;
          const T w0 = wp[ky * 3 + 0], w1 = wp[ky * 3 + 1], w2 = wp[ky * 3 + 2];
          for (int y = y0; y < y1; ++y) {
            const T* const grow = gp + size_t(y) * W;
            const T* const irow = ip + size_t(y + sy) * W;
            acc0 += detail::lane_dot(grow + 1, irow, W - 1);
            acc1 += detail::lane_dot(grow, irow, W);
            acc2 += detail::lane_dot(grow, irow + 1, W - 1);
            if (dip) {
              T* const dirow = dip + size_t(y + sy) * W;
              detail::axpy(dirow, grow + 1, w0, W - 1);
              detail::axpy(dirow, grow, w1, W);
              detail::axpy(dirow + 1, grow, w2, W - 1);
            }
          }
          dwp[ky * 3 + 0] += T(acc0);
          dwp[ky * 3 + 1] += T(acc1);
          dwp[ky * 3 + 2] += T(acc2);
        }
      }
    }
  }
}

template <class T>
void conv1x1_forward(const Tensor4<T>& in, const Tensor4<T>& w,
                     const std::vector<T>& bias, Act act, Tensor4<T>& out) {
  const int N = in.n, C = in.c, HW = in.h * in.w, OC = w.n;
  for (int nn_ = 0; nn_ < N; ++nn_) {
    for (int co = 0; co < OC; ++co) {
      T* const op = out.plane(nn_, co);
      std::fill(op, op + HW, bias[co]);
      for (int ci = 0; ci < C; ++ci)
        detail::axpy(op, in.plane(nn_, ci), w.at(co, ci, 0, 0), HW);
      if (act == Act::relu)
        for (int i = 0; i < HW; ++i)
          if (op[i] < T(0)) op[i] = T(0);
    }
  }
}

template <class T>
void conv1x1_backward(const Tensor4<T>& in, const Tensor4<T>& w,
                      const Tensor4<T>& g, Tensor4<T>& dw, std::vector<T>& db,
                      Tensor4<T>* din) {
  const int N = in.n, C = in.c, HW = in.h * in.w, OC = w.n;
  for (int nn_ = 0; nn_ < N; ++nn_) {
    for (int co = 0; co < OC; ++co) {
      const T* const gp = g.plane(nn_, co);
      db[co] += T(detail::lane_sum(gp, HW));
      for (int ci = 0; ci < C; ++ci) {
        dw.at(co, ci, 0, 0) += T(detail::lane_dot(gp, in.plane(nn_, ci), HW));
        if (din)
          detail::axpy(din->plane(nn_, ci), gp, w.at(co, ci, 0, 0), HW);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

template <class T>
struct Grads {
  std::vector<Tensor4<T>> w;
  std::vector<std::vector<T>> b;
};

template <class T>
class Network {
 public:
  NetworkSpec spec;
  std::vector<Tensor4<T>> weights;       // empty tensors for non-param layers
  std::vector<std::vector<T>> biases;

  struct Tape {
    Tensor4<T> input;
    std::vector<Tensor4<T>> outs;
    std::vector<std::vector<int32_t>> pool_idx;  // argmax per maxpool output
  };

  Network() = default;
  explicit Network(NetworkSpec s) : spec(std::move(s)) { allocate(); }

  void allocate();
  void init_params(uint64_t seed);  // He-uniform weights, zero biases
  size_t param_count() const;

  // Inference forward; returns the last layer's output.
  Tensor4<T> forward(const Tensor4<T>& x) const {
    Tape tape;
    run_forward(x, tape);
    return std::move(tape.outs.back());
  }

  // Training forward: records every activation needed by backward().
  const Tensor4<T>& forward(const Tensor4<T>& x, Tape& tape) const {
    run_forward(x, tape);
    return tape.outs.back();
  }

  // dlast = dL/d(last output). Throws when no forward was recorded.
  Grads<T> backward(const Tape& tape, const Tensor4<T>& dlast,
                    Tensor4<T>* dinput = nullptr) const;

  Grads<T> zero_grads() const;

 private:
  void run_forward(const Tensor4<T>& x, Tape& tape) const;
};

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

template <class T>
struct AdamState {
  std::vector<Tensor4<T>> mw, vw;
  std::vector<std::vector<T>> mb, vb;
  long t = 0;
};

template <class T>
AdamState<T> make_adam_state(const Network<T>& net) {
  AdamState<T> st;
  for (const auto& w : net.weights) {
    st.mw.emplace_back(w.n, w.c, w.h, w.w);
    st.vw.emplace_back(w.n, w.c, w.h, w.w);
  }
  for (const auto& b : net.biases) {
    st.mb.emplace_back(b.size(), T(0));
    st.vb.emplace_back(b.size(), T(0));
  }
  return st;
}

// Standard ADAM with bias correction; per-element math in double.
template <class T>
void adam_step(Network<T>& net, const Grads<T>& g, AdamState<T>& st, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(beta2, double(st.t));
  auto update = [&](T& p, T& m, T& v, T grad) {
    const double gd = double(grad);
    const double md = beta1 * double(m) + (1 - beta1) * gd;
    const double vd = beta2 * double(v) + (1 - beta2) * gd * gd;
    m = T(md);
    v = T(vd);
    const double mhat = md / bc1, vhat = vd / bc2;
    p = T(double(p) - lr * mhat / (std::sqrt(vhat) + eps));
  };
  for (size_t li = 0; li < net.weights.size(); ++li) {
    auto& w = net.weights[li];
    for (size_t i = 0; i < w.v.size(); ++i)
      update(w.v[i], st.mw[li].v[i], st.vw[li].v[i], g.w[li].v[i]);
    auto& b = net.biases[li];
    for (size_t i = 0; i < b.size(); ++i)
      update(b[i], st.mb[li][i], st.vb[li][i], g.b[li][i]);
  }
}

// Learning rate decayed by `factor` every `every` epochs.
double lr_schedule(int epoch, double base = 1e-3, double factor = 0.95,
                   int every = 5);

// ---------------------------------------------------------------------------
// losses (double accumulation)
// ---------------------------------------------------------------------------

// Mean weighted cross-entropy over pixels: logits (n,K,h,w), classes and
// weights flat (n*h*w). Pixels with weight 0 are skipped. When dlogits is
// given it receives d(loss)/d(logits).
template <class T>
double pixel_cross_entropy(const Tensor4<T>& logits,
                           const std::vector<int32_t>& classes,
                           const std::vector<T>& weights,
                           Tensor4<T>* dlogits = nullptr);

struct ScalarLoss {
  double loss = 0;
  std::vector<double> dpred;
};

// Weighted mean absolute error over a flat prediction vector.
ScalarLoss weighted_mae(std::span<const double> pred,
                        std::span<const double> truth,
                        std::span<const double> weights, bool want_grad = true);

// Numerically stable binary cross-entropy on a single logit.
struct BceResult {
  double loss = 0;
  double dlogit = 0;
};
BceResult binary_cross_entropy_with_logit(double logit, double label,
                                          double weight = 1.0);

double sigmoid(double x);

// Per-pixel softmax over the channel dimension; result sums to 1 per pixel.
template <class T>
void softmax_channels(const Tensor4<T>& logits, Tensor4<T>& probs);

// ---------------------------------------------------------------------------
// checkpoint io (exact round-trip)
// ---------------------------------------------------------------------------

void save_network(const Network<float>& net, const std::string& path);
Network<float> load_network(const std::string& path);

std::string network_to_bytes(const Network<float>& net);
Network<float> network_from_bytes(const std::string& bytes, size_t* offset);

// ---------------------------------------------------------------------------
// template implementations
// ---------------------------------------------------------------------------

template <class T>
void Network<T>::allocate() {
  const auto shapes = spec.infer_shapes();
  (void)shapes;
  weights.assign(spec.layers.size(), {});
  biases.assign(spec.layers.size(), {});
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::conv3x3:
        weights[i] = Tensor4<T>(l.out_ch, l.in_ch, 3, 3);
        biases[i].assign(l.out_ch, T(0));
        break;
      case LayerSpec::Kind::conv1x1:
      case LayerSpec::Kind::dense:
        weights[i] = Tensor4<T>(l.out_ch, l.in_ch, 1, 1);
        biases[i].assign(l.out_ch, T(0));
        break;
      default:
        break;
    }
  }
}

template <class T>
void Network<T>::init_params(uint64_t seed) {
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (weights[i].size() == 0) continue;
    const auto& l = spec.layers[i];
    const int fan_in =
        l.kind == LayerSpec::Kind::conv3x3 ? l.in_ch * 9 : l.in_ch;
    const double limit = std::sqrt(6.0 / double(fan_in));
    Rng rng(Rng::derive(seed, 0x6e657400ULL, i));
    for (auto& wv : weights[i].v) wv = T(rng.uniform(-limit, limit));
    for (auto& bv : biases[i]) bv = T(0);
  }
}

template <class T>
size_t Network<T>::param_count() const {
  size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

namespace detail {

// Reuse the buffer when the shape already matches; every layer fully
// overwrites its output, so stale content never leaks through.
template <class T>
void ensure_shape(Tensor4<T>& t, int n, int c, int h, int w) {
  if (t.n == n && t.c == c && t.h == h && t.w == w) return;
  t.n = n;
  t.c = c;
  t.h = h;
  t.w = w;
  t.v.assign(size_t(n) * c * size_t(h) * w, T(0));
}

}  // namespace detail

template <class T>
void Network<T>::run_forward(const Tensor4<T>& x, Tape& tape) const {
  if (x.c != spec.in_channels || x.h != spec.in_h || x.w != spec.in_w)
    throw std::runtime_error("network forward: input shape mismatch");
  const auto shapes = spec.infer_shapes();
  tape.input = x;
  tape.outs.resize(spec.layers.size());
  tape.pool_idx.resize(spec.layers.size());

  const Tensor4<T>* cur = &tape.input;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& os = shapes[i];
    Tensor4<T>& out = tape.outs[i];
    detail::ensure_shape(out, x.n, os.c, os.h, os.w);
    switch (l.kind) {
      case LayerSpec::Kind::conv3x3:
        conv3x3_forward(*cur, weights[i], biases[i], l.act, out);
        break;
      case LayerSpec::Kind::conv1x1:
        conv1x1_forward(*cur, weights[i], biases[i], l.act, out);
        break;
      case LayerSpec::Kind::maxpool2: {
        auto& idxs = tape.pool_idx[i];
        idxs.resize(out.size());
        size_t oi = 0;
        for (int nn_ = 0; nn_ < x.n; ++nn_) {
          for (int cc = 0; cc < cur->c; ++cc) {
            const T* ip = cur->plane(nn_, cc);
            T* op = out.plane(nn_, cc);
            for (int y = 0; y < os.h; ++y) {
              for (int xx = 0; xx < os.w; ++xx) {
                const int base = (2 * y) * cur->w + 2 * xx;
                const T c0 = ip[base], c1 = ip[base + 1],
                        c2 = ip[base + cur->w], c3 = ip[base + cur->w + 1];
                int best = 0;
                T bv = c0;
                if (c1 > bv) { bv = c1; best = 1; }
                if (c2 > bv) { bv = c2; best = 2; }
                if (c3 > bv) { bv = c3; best = 3; }
                op[size_t(y) * os.w + xx] = bv;
                idxs[oi++] = best;
              }
            }
          }
        }
        break;
      }
      case LayerSpec::Kind::upsample2:
        for (int nn_ = 0; nn_ < x.n; ++nn_) {
          for (int cc = 0; cc < cur->c; ++cc) {
            const T* ip = cur->plane(nn_, cc);
            T* op = out.plane(nn_, cc);
            for (int y = 0; y < os.h; ++y) {
              const T* irow = ip + size_t(y / 2) * cur->w;
              T* orow = op + size_t(y) * os.w;
              for (int xx = 0; xx < os.w; ++xx) orow[xx] = irow[xx / 2];
            }
          }
        }
        break;
      case LayerSpec::Kind::skip_concat: {
        const Tensor4<T>& src = tape.outs[l.from];
        for (int nn_ = 0; nn_ < x.n; ++nn_) {
          for (int cc = 0; cc < cur->c; ++cc)
            std::copy_n(cur->plane(nn_, cc), cur->plane_size(),
                        out.plane(nn_, cc));
          for (int cc = 0; cc < src.c; ++cc)
            std::copy_n(src.plane(nn_, cc), src.plane_size(),
                        out.plane(nn_, cur->c + cc));
        }
        break;
      }
      case LayerSpec::Kind::global_avg_pool:
        for (int nn_ = 0; nn_ < x.n; ++nn_) {
          for (int cc = 0; cc < cur->c; ++cc) {
            const T* ip = cur->plane(nn_, cc);
            double acc = 0;
            for (int k = 0; k < cur->plane_size(); ++k) acc += double(ip[k]);
            out.at(nn_, cc, 0, 0) = T(acc / double(cur->plane_size()));
          }
        }
        break;
      case LayerSpec::Kind::dense:
        for (int nn_ = 0; nn_ < x.n; ++nn_) {
          const T* ip = cur->plane(nn_, 0);
          for (int o = 0; o < l.out_ch; ++o) {
            double acc = double(biases[i][o]);
            const T* wrow = weights[i].v.data() + size_t(o) * l.in_ch;
            for (int k = 0; k < l.in_ch; ++k) acc += double(wrow[k]) * ip[k];
            T val = T(acc);
            if (l.act == Act::relu && val < T(0)) val = T(0);
            out.at(nn_, o, 0, 0) = val;
          }
        }
        break;
    }
    cur = &tape.outs[i];
  }
}

template <class T>
Grads<T> Network<T>::zero_grads() const {
  Grads<T> g;
  for (const auto& w : weights) g.w.emplace_back(w.n, w.c, w.h, w.w);
  for (const auto& b : biases) g.b.emplace_back(b.size(), T(0));
  return g;
}

template <class T>
Grads<T> Network<T>::backward(const Tape& tape, const Tensor4<T>& dlast,
                              Tensor4<T>* dinput) const {
  if (tape.outs.size() != spec.layers.size() || tape.outs.empty())
    throw std::runtime_error("network backward: no recorded forward pass");
  Grads<T> grads = zero_grads();

  std::vector<Tensor4<T>> douts(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& o = tape.outs[i];
    douts[i] = Tensor4<T>(o.n, o.c, o.h, o.w);
  }
  douts.back().v = dlast.v;

  Tensor4<T> dinput_acc(tape.input.n, tape.input.c, tape.input.h,
                        tape.input.w);

  for (int i = int(spec.layers.size()) - 1; i >= 0; --i) {
    const auto& l = spec.layers[i];
    const Tensor4<T>& out = tape.outs[i];
    const Tensor4<T>& in = (i == 0) ? tape.input : tape.outs[i - 1];
    Tensor4<T>* din = (i == 0) ? &dinput_acc : &douts[i - 1];
    Tensor4<T>& g = douts[i];

    if ((l.kind == LayerSpec::Kind::conv3x3 ||
         l.kind == LayerSpec::Kind::conv1x1 ||
         l.kind == LayerSpec::Kind::dense) &&
        l.act == Act::relu) {
      for (size_t k = 0; k < g.v.size(); ++k)
        if (out.v[k] <= T(0)) g.v[k] = T(0);
    }

    switch (l.kind) {
      case LayerSpec::Kind::conv3x3:
        conv3x3_backward(in, weights[i], g, grads.w[i], grads.b[i], din);
        break;
      case LayerSpec::Kind::conv1x1:
        conv1x1_backward(in, weights[i], g, grads.w[i], grads.b[i], din);
        break;
      case LayerSpec::Kind::maxpool2: {
        const auto& idxs = tape.pool_idx[i];
        size_t oi = 0;
        for (int nn_ = 0; nn_ < out.n; ++nn_) {
          for (int cc = 0; cc < out.c; ++cc) {
            T* dip = din->plane(nn_, cc);
            const T* gp = g.plane(nn_, cc);
            for (int y = 0; y < out.h; ++y) {
              for (int xx = 0; xx < out.w; ++xx) {
                const int best = idxs[oi];
                const int base = (2 * y + best / 2) * in.w + 2 * xx + best % 2;
                dip[base] += gp[size_t(y) * out.w + xx];
                ++oi;
              }
            }
          }
        }
        break;
      }
      case LayerSpec::Kind::upsample2:
        for (int nn_ = 0; nn_ < out.n; ++nn_) {
          for (int cc = 0; cc < out.c; ++cc) {
            T* dip = din->plane(nn_, cc);
            const T* gp = g.plane(nn_, cc);
            for (int y = 0; y < out.h; ++y)
              for (int xx = 0; xx < out.w; ++xx)
                dip[size_t(y / 2) * in.w + xx / 2] +=
                    gp[size_t(y) * out.w + xx];
          }
        }
        break;
      case LayerSpec::Kind::skip_concat: {
        Tensor4<T>& dfrom = douts[l.from];
        for (int nn_ = 0; nn_ < out.n; ++nn_) {
          for (int cc = 0; cc < in.c; ++cc) {
            const T* gp = g.plane(nn_, cc);
            T* dp = din->plane(nn_, cc);
            for (int k = 0; k < in.plane_size(); ++k) dp[k] += gp[k];
          }
          for (int cc = 0; cc < dfrom.c; ++cc) {
            const T* gp = g.plane(nn_, in.c + cc);
            T* dp = dfrom.plane(nn_, cc);
            for (int k = 0; k < dfrom.plane_size(); ++k) dp[k] += gp[k];
          }
        }
        break;
      }
      case LayerSpec::Kind::global_avg_pool:
        for (int nn_ = 0; nn_ < out.n; ++nn_) {
          for (int cc = 0; cc < out.c; ++cc) {
            const T gv = g.at(nn_, cc, 0, 0) / T(in.plane_size());
            T* dip = din->plane(nn_, cc);
            for (int k = 0; k < in.plane_size(); ++k) dip[k] += gv;
          }
        }
        break;
      case LayerSpec::Kind::dense:
        for (int nn_ = 0; nn_ < out.n; ++nn_) {
          const T* ip = in.plane(nn_, 0);
          T* dip = din->plane(nn_, 0);
          for (int o = 0; o < l.out_ch; ++o) {
            const T gv = g.at(nn_, o, 0, 0);
            grads.b[i][o] += gv;
            T* dwrow = grads.w[i].v.data() + size_t(o) * l.in_ch;
            const T* wrow = weights[i].v.data() + size_t(o) * l.in_ch;
            for (int k = 0; k < l.in_ch; ++k) {
              dwrow[k] += gv * ip[k];
              dip[k] += gv * wrow[k];
            }
          }
        }
        break;
    }
  }
  if (dinput) *dinput = std::move(dinput_acc);
  return grads;
}

template <class T>
double pixel_cross_entropy(const Tensor4<T>& logits,
                           const std::vector<int32_t>& classes,
                           const std::vector<T>& weights, Tensor4<T>* dlogits) {
  const int N = logits.n, K = logits.c, HW = logits.h * logits.w;
  if (int(classes.size()) != N * HW || int(weights.size()) != N * HW)
    throw std::runtime_error("pixel_cross_entropy: size mismatch");
  double wsum = 0;
  for (T w : weights) wsum += double(w);
  if (wsum <= 0) throw std::runtime_error("pixel_cross_entropy: zero weight");
  if (dlogits) {
    *dlogits = Tensor4<T>(N, K, logits.h, logits.w);
  }
  double loss = 0;
  std::vector<double> probs(K);
  for (int nn_ = 0; nn_ < N; ++nn_) {
    const T* base = logits.plane(nn_, 0);
    for (int p = 0; p < HW; ++p) {
      const double wgt = double(weights[size_t(nn_) * HW + p]);
      if (wgt == 0) continue;
      const int32_t cls = classes[size_t(nn_) * HW + p];
      if (cls < 0 || cls >= K)
        throw std::runtime_error("pixel_cross_entropy: class out of range");
      double mx = -1e300;
      for (int k = 0; k < K; ++k)
        mx = std::max(mx, double(base[size_t(k) * HW + p]));
      double z = 0;
      for (int k = 0; k < K; ++k) {
        probs[k] = std::exp(double(base[size_t(k) * HW + p]) - mx);
        z += probs[k];
      }
      loss += -wgt * std::log(probs[cls] / z);
      if (dlogits) {
        T* dbase = dlogits->plane(nn_, 0);
        for (int k = 0; k < K; ++k) {
          const double soft = probs[k] / z;
          dbase[size_t(k) * HW + p] =
              T(wgt * (soft - (k == cls ? 1.0 : 0.0)) / wsum);
        }
      }
    }
  }
  return loss / wsum;
}

template <class T>
void softmax_channels(const Tensor4<T>& logits, Tensor4<T>& probs) {
  probs = Tensor4<T>(logits.n, logits.c, logits.h, logits.w);
  const int K = logits.c, HW = logits.h * logits.w;
  for (int nn_ = 0; nn_ < logits.n; ++nn_) {
    const T* base = logits.plane(nn_, 0);
    T* pb = probs.plane(nn_, 0);
    for (int p = 0; p < HW; ++p) {
      double mx = -1e300;
      for (int k = 0; k < K; ++k)
        mx = std::max(mx, double(base[size_t(k) * HW + p]));
      double z = 0;
      for (int k = 0; k < K; ++k)
        z += std::exp(double(base[size_t(k) * HW + p]) - mx);
      for (int k = 0; k < K; ++k)
        pb[size_t(k) * HW + p] =
            T(std::exp(double(base[size_t(k) * HW + p]) - mx) / z);
    }
  }
}

}  // namespace breakwater::nn
