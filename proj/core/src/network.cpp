#include "agepim/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "agepim/common.hpp"
#include "agepim/rng.hpp"

namespace agepim {

std::vector<std::size_t> Network::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers[0].in);
  for (const auto& l : layers) w.push_back(l.out);
  return w;
}

std::vector<LayerShape> Network::layer_shapes() const {
  std::vector<LayerShape> s;
  for (const auto& l : layers) s.push_back({l.out, l.in});
  return s;
}

Network make_network(const std::vector<std::size_t>& widths, int q, int n,
                     std::uint64_t seed) {
  if (widths.size() < 2) fail(ErrorCategory::kConfig, "need at least one layer");
  for (std::size_t w : widths)
    if (w == 0) fail(ErrorCategory::kConfig, "zero-width layer");
  Network net;
  net.q = q;
  net.n = n;
  net.seed = seed;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.act =
        (l + 2 == widths.size()) ? Activation::kIdentity : Activation::kRelu;
    Rng rng(derive_seed(seed, "init-layer", l));
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    Matd w(layer.out, layer.in);
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c)
        w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    layer.bits = quantize_weights(w, q);
    // Shadow planes start at the sign planes; the top plane additionally
    // keeps the real init magnitudes so early training preserves the
    // random ordering instead of a flat +/-1 landscape.
    layer.w_fp.reserve(q);
    for (int i = 0; i < q; ++i) {
      Matd plane(layer.out, layer.in);
      for (std::size_t k = 0; k < plane.size(); ++k)
        plane.data()[k] = layer.bits.planes[i].data()[k];
      layer.w_fp.push_back(std::move(plane));
    }
    const double wmax = layer.bits.scale * max_code(q);
    if (wmax > 0.0) {
      Matd& top = layer.w_fp[q - 1];
      for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) {
          const double u = w(r, c) / wmax;
          top(r, c) = u != 0.0 ? u : 1.0;
        }
    }
    layer.bias.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  binarize_step(net);
  return net;
}

void binarize_step(Network& net) {
  for (auto& layer : net.layers) {
    for (int i = 0; i < net.q; ++i) {
      const Matd& fp = layer.w_fp[i];
      Matf& plane = layer.bits.planes[i];
      for (std::size_t k = 0; k < fp.size(); ++k)
        plane.data()[k] = fp.data()[k] >= 0.0 ? 1.0f : -1.0f;
    }
  }
}

namespace {

constexpr char kCkptMagic[] = "AGEPIM-CKPT";

void write_f32(std::ostream& os, const double* src, std::size_t n) {
  static_assert(std::endian::native == std::endian::little,
                "serialization assumes a little-endian host");
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(src[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
}

void read_f32(std::istream& is, double* dst, std::size_t n) {
  std::vector<float> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) fail(ErrorCategory::kIo, "checkpoint truncated in weight payload");
  for (std::size_t i = 0; i < n; ++i) dst[i] = buf[i];
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  os << kCkptMagic << " v1\n";
  os << "arch";
  for (std::size_t w : net.widths()) os << " " << w;
  os << "\n";
  os << "q " << net.q << "\n";
  os << "n " << net.n << "\n";
  os << "seed " << net.seed << "\n";
  os << "epoch " << net.epoch << "\n";
  os.precision(17);
  os << "w_scales";
  for (const auto& l : net.layers) os << " " << l.bits.scale;
  os << "\n";
  os << "act_scales";
  for (const auto& l : net.layers) os << " " << l.act_scale;
  os << "\n";
  os << "data\n";
  for (const auto& l : net.layers) {
    for (const auto& plane : l.w_fp) write_f32(os, plane.data(), plane.size());
    write_f32(os, l.bias.data(), l.bias.size());
  }
  if (!os) fail(ErrorCategory::kIo, "short write to " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != std::string(kCkptMagic) + " v1")
    fail(ErrorCategory::kIo, "not a v1 checkpoint: bad magic");

  std::vector<std::size_t> widths;
  Network net;
  std::vector<double> w_scales, act_scales;
  try {
    auto expect = [&](const char* key) -> std::istringstream {
      if (!std::getline(is, line))
        fail(ErrorCategory::kIo, "checkpoint header truncated");
      std::istringstream ss(line);
      std::string k;
      ss >> k;
      if (k != key)
        fail(ErrorCategory::kIo,
             std::string("checkpoint header: expected '") + key + "'");
      return ss;
    };
    {
      auto ss = expect("arch");
      std::size_t w;
      while (ss >> w) widths.push_back(w);
    }
    if (widths.size() < 2) fail(ErrorCategory::kIo, "checkpoint: bad arch");
    expect("q") >> net.q;
    expect("n") >> net.n;
    expect("seed") >> net.seed;
    expect("epoch") >> net.epoch;
    {
      auto ss = expect("w_scales");
      double s;
      while (ss >> s) w_scales.push_back(s);
    }
    {
      auto ss = expect("act_scales");
      double s;
      while (ss >> s) act_scales.push_back(s);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCategory::kIo, "checkpoint header: malformed field");
  }
  if (!std::getline(is, line) || line != "data")
    fail(ErrorCategory::kIo, "checkpoint header: missing data marker");
  if (w_scales.size() != widths.size() - 1 ||
      act_scales.size() != widths.size() - 1)
    fail(ErrorCategory::kIo, "checkpoint header: scale count mismatch");

  net.layers.clear();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.act =
        (l + 2 == widths.size()) ? Activation::kIdentity : Activation::kRelu;
    layer.act_scale = act_scales[l];
    layer.bits.q = net.q;
    layer.bits.scale = w_scales[l];
    layer.bits.planes.assign(net.q, Matf(layer.out, layer.in));
    for (int i = 0; i < net.q; ++i) {
      Matd plane(layer.out, layer.in);
      read_f32(is, plane.data(), plane.size());
      layer.w_fp.push_back(std::move(plane));
    }
    layer.bias.assign(layer.out, 0.0);
    read_f32(is, layer.bias.data(), layer.bias.size());
    net.layers.push_back(std::move(layer));
  }
  is.peek();
  if (!is.eof()) fail(ErrorCategory::kIo, "checkpoint has trailing bytes");
  binarize_step(net);
  return net;
}

}  // namespace agepim
