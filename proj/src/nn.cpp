#include "breakwater/nn.hpp"

#include <cstring>
#include <fstream>

namespace breakwater::nn {

std::vector<Shape> NetworkSpec::infer_shapes() const {
  if (in_channels <= 0 || in_h <= 0 || in_w <= 0)
    throw std::runtime_error("network spec: bad input shape");
  std::vector<Shape> shapes;
  Shape cur{in_channels, in_h, in_w};
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string at = "layer " + std::to_string(i);
    switch (l.kind) {
      case LayerSpec::Kind::conv3x3:
      case LayerSpec::Kind::conv1x1:
        if (l.in_ch != cur.c)
          throw std::runtime_error("network spec: " + at +
                                   " conv in_ch mismatch");
        if (l.out_ch <= 0)
          throw std::runtime_error("network spec: " + at + " conv out_ch <= 0");
        cur = {l.out_ch, cur.h, cur.w};
        break;
      case LayerSpec::Kind::maxpool2:
        if (cur.h % 2 || cur.w % 2)
          throw std::runtime_error("network spec: " + at +
                                   " maxpool on odd dimensions");
        cur = {cur.c, cur.h / 2, cur.w / 2};
        break;
      case LayerSpec::Kind::upsample2:
        cur = {cur.c, cur.h * 2, cur.w * 2};
        break;
      case LayerSpec::Kind::skip_concat: {
        if (l.from < 0 || l.from >= int(i))
          throw std::runtime_error("network spec: " + at +
                                   " skip source must precede the sink");
        const Shape& src = shapes[l.from];
        if (src.h != cur.h || src.w != cur.w)
          throw std::runtime_error("network spec: " + at +
                                   " skip source spatial dims mismatch");
        cur = {cur.c + src.c, cur.h, cur.w};
        break;
      }
      case LayerSpec::Kind::global_avg_pool:
        cur = {cur.c, 1, 1};
        break;
      case LayerSpec::Kind::dense:
        if (l.in_ch != cur.c * cur.h * cur.w)
          throw std::runtime_error("network spec: " + at +
                                   " dense in_ch mismatch");
        cur = {l.out_ch, 1, 1};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Shape NetworkSpec::output_shape() const {
  auto shapes = infer_shapes();
  if (shapes.empty()) return {in_channels, in_h, in_w};
  return shapes.back();
}

double lr_schedule(int epoch, double base, double factor, int every) {
  if (epoch < 0) throw std::runtime_error("lr_schedule: negative epoch");
  return base * std::pow(factor, double(epoch / every));
}

ScalarLoss weighted_mae(std::span<const double> pred,
                        std::span<const double> truth,
                        std::span<const double> weights, bool want_grad) {
  if (pred.size() != truth.size() || pred.size() != weights.size())
    throw std::runtime_error("weighted_mae: size mismatch");
  double wsum = 0;
  for (double w : weights) wsum += w;
  if (wsum <= 0) throw std::runtime_error("weighted_mae: zero weight");
  ScalarLoss out;
  if (want_grad) out.dpred.assign(pred.size(), 0.0);
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    out.loss += weights[i] * std::abs(d);
    if (want_grad)
      out.dpred[i] = weights[i] * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / wsum;
  }
  out.loss /= wsum;
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BceResult binary_cross_entropy_with_logit(double logit, double label,
                                          double weight) {
  BceResult r;
  // log(1+exp(x)) without overflow
  const double softplus =
      logit > 0 ? logit + std::log1p(std::exp(-logit))
                : std::log1p(std::exp(logit));
  r.loss = weight * (softplus - label * logit);
  r.dlogit = weight * (sigmoid(logit) - label);
  return r;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

template <class T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(const std::string& in, size_t& off) {
  if (off + sizeof(T) > in.size())
    throw std::runtime_error("network checkpoint: truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

constexpr uint32_t kMagic = 0x4e4e5742;  // "BWNN"

}  // namespace

std::string network_to_bytes(const Network<float>& net) {
  std::string out;
  put(out, kMagic);
  put(out, uint32_t(1));
  put(out, int32_t(net.spec.in_channels));
  put(out, int32_t(net.spec.in_h));
  put(out, int32_t(net.spec.in_w));
  put(out, uint32_t(net.spec.layers.size()));
  for (const auto& l : net.spec.layers) {
    put(out, uint8_t(l.kind));
    put(out, uint8_t(l.act));
    put(out, int32_t(l.in_ch));
    put(out, int32_t(l.out_ch));
    put(out, int32_t(l.from));
  }
  for (size_t i = 0; i < net.weights.size(); ++i) {
    put(out, uint64_t(net.weights[i].size()));
    out.append(reinterpret_cast<const char*>(net.weights[i].v.data()),
               net.weights[i].size() * sizeof(float));
    put(out, uint64_t(net.biases[i].size()));
    out.append(reinterpret_cast<const char*>(net.biases[i].data()),
               net.biases[i].size() * sizeof(float));
  }
  return out;
}

Network<float> network_from_bytes(const std::string& bytes, size_t* offset) {
  size_t off = offset ? *offset : 0;
  if (take<uint32_t>(bytes, off) != kMagic)
    throw std::runtime_error("network checkpoint: bad magic");
  if (take<uint32_t>(bytes, off) != 1)
    throw std::runtime_error("network checkpoint: unsupported version");
  NetworkSpec spec;
  spec.in_channels = take<int32_t>(bytes, off);
  spec.in_h = take<int32_t>(bytes, off);
  spec.in_w = take<int32_t>(bytes, off);
  const uint32_t n_layers = take<uint32_t>(bytes, off);
  for (uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    l.kind = LayerSpec::Kind(take<uint8_t>(bytes, off));
    l.act = Act(take<uint8_t>(bytes, off));
    l.in_ch = take<int32_t>(bytes, off);
    l.out_ch = take<int32_t>(bytes, off);
    l.from = take<int32_t>(bytes, off);
    spec.layers.push_back(l);
  }
  Network<float> net(spec);
  for (size_t i = 0; i < net.weights.size(); ++i) {
    const uint64_t wn = take<uint64_t>(bytes, off);
    if (wn != net.weights[i].size())
      throw std::runtime_error("network checkpoint: weight count mismatch");
    if (off + wn * sizeof(float) > bytes.size())
      throw std::runtime_error("network checkpoint: truncated weights");
    std::memcpy(net.weights[i].v.data(), bytes.data() + off,
                wn * sizeof(float));
    off += wn * sizeof(float);
    const uint64_t bn = take<uint64_t>(bytes, off);
    if (bn != net.biases[i].size())
      throw std::runtime_error("network checkpoint: bias count mismatch");
    if (off + bn * sizeof(float) > bytes.size())
      throw std::runtime_error("network checkpoint: truncated biases");
    std::memcpy(net.biases[i].data(), bytes.data() + off, bn * sizeof(float));
    off += bn * sizeof(float);
  }
  if (offset) *offset = off;
  return net;
}

void save_network(const Network<float>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const std::string bytes = network_to_bytes(net);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

Network<float> load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return network_from_bytes(bytes, nullptr);
}

}  // namespace breakwater::nn
