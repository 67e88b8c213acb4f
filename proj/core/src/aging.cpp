#include "agepim/aging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "agepim/common.hpp"
#include "agepim/rng.hpp"

namespace agepim {

namespace {

void check_sigma_alpha(double sigma, double alpha) {
  if (sigma < 0.0 || sigma > 1.0)
    fail(ErrorCategory::kConfig, "aging ratio sigma must lie in [0,1]");
  if (alpha <= 0.0 || alpha > 1.0)
    fail(ErrorCategory::kConfig, "aging degree alpha must lie in (0,1]");
}

Matf aged_plane(std::size_t rows, std::size_t cols, double sigma, double alpha,
                std::uint64_t seed) {
  Matf plane(rows, cols, 1.0f);
  const std::size_t n = rows * cols;
  const std::size_t aged =
      static_cast<std::size_t>(std::lround(sigma * static_cast<double>(n)));
  Rng rng(seed);
  for (std::uint32_t pos : sample_without_replacement(rng, n, aged))
    plane.data()[pos] = static_cast<float>(alpha);
  return plane;
}

constexpr float kDegreeFloor = 1e-6f;

}  // namespace

AgingMask generate_mask(const std::vector<LayerShape>& shapes, int q,
                        const std::vector<double>& sigma_per_layer,
                        double alpha, std::uint64_t seed) {
  if (shapes.size() != sigma_per_layer.size())
    fail(ErrorCategory::kShape, "one sigma per layer required");
  for (double s : sigma_per_layer) check_sigma_alpha(s, alpha);
  AgingMask mask;
  mask.q = q;
  mask.sigma = sigma_per_layer.empty() ? 0.0 : sigma_per_layer[0];
  mask.alpha = alpha;
  mask.seed = seed;
  mask.layers.resize(shapes.size());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    mask.layers[l].reserve(q);
    for (int i = 0; i < q; ++i) {
      const std::uint64_t plane_seed =
          derive_seed(seed, "aging-plane", (static_cast<std::uint64_t>(l) << 8) | i);
      mask.layers[l].push_back(aged_plane(shapes[l].rows, shapes[l].cols,
                                          sigma_per_layer[l], alpha, plane_seed));
    }
  }
  return mask;
}

AgingMask generate_mask(const std::vector<LayerShape>& shapes, int q,
                        double sigma, double alpha, std::uint64_t seed) {
  return generate_mask(shapes, q, std::vector<double>(shapes.size(), sigma),
                       alpha, seed);
}

Matf subset_mask(const Matf& prototype, std::size_t rows, std::size_t cols) {
  if (rows > prototype.rows() || cols > prototype.cols())
    fail(ErrorCategory::kShape,
         "subset larger than prototype; build the prototype from the largest layer");
  Matf out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = prototype(r, c);
  return out;
}

AgingMask build_reused_mask(const std::vector<LayerShape>& shapes, int q,
                            double sigma, double alpha, std::uint64_t seed) {
  if (shapes.empty()) fail(ErrorCategory::kShape, "no layers");
  LayerShape proto{0, 0};
  for (const auto& s : shapes) {
    proto.rows = std::max(proto.rows, s.rows);
    proto.cols = std::max(proto.cols, s.cols);
  }
  AgingMask prototype = generate_mask({proto}, q, sigma, alpha, seed);
  AgingMask mask;
  mask.q = q;
  mask.sigma = sigma;
  mask.alpha = alpha;
  mask.seed = seed;
  mask.layers.resize(shapes.size());
  for (std::size_t l = 0; l < shapes.size(); ++l)
    for (int i = 0; i < q; ++i)
      mask.layers[l].push_back(
          subset_mask(prototype.layers[0][i], shapes[l].rows, shapes[l].cols));
  return mask;
}

AgingMask apply_process_variation(const AgingMask& mask, double rel_std,
                                  std::uint64_t seed) {
  if (rel_std < 0.0) fail(ErrorCategory::kConfig, "pv std must be >= 0");
  AgingMask out = mask;
  if (rel_std == 0.0) return out;
  const float top = std::nextafter(1.0f, 0.0f);  // keep aged cells below 1
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    for (std::size_t i = 0; i < out.layers[l].size(); ++i) {
      Rng rng(derive_seed(seed, "aging-pv",
                          (static_cast<std::uint64_t>(l) << 8) | i));
      Matf& plane = out.layers[l][i];
      for (std::size_t k = 0; k < plane.size(); ++k) {
        float& d = plane.data()[k];
        if (d == 1.0f) continue;
        const double sample = d * (1.0 + rel_std * rng.normal());
        d = std::clamp(static_cast<float>(sample), kDegreeFloor, top);
      }
    }
  }
  return out;
}

AgingMask natural_drift(const AgingMask& mask, double rel_degree_shrink) {
  if (rel_degree_shrink < 0.0 || rel_degree_shrink >= 1.0)
    fail(ErrorCategory::kConfig, "degree shrink must lie in [0,1)");
  AgingMask out = mask;
  const double keep = 1.0 - rel_degree_shrink;
  for (auto& layer : out.layers)
    for (auto& plane : layer)
      for (std::size_t k = 0; k < plane.size(); ++k) {
        float& d = plane.data()[k];
        d = std::max(static_cast<float>(d * keep), kDegreeFloor);
      }
  return out;
}

double vth_drift(const NaturalAgingParams& params, double years) {
  if (years <= 0.0) fail(ErrorCategory::kConfig, "stress time must be positive");
  return params.zeta * std::pow(years, params.chi);
}

NaturalAgingParams fit_power_law(double t1, double v1, double t2, double v2) {
  if (t1 <= 0.0 || t2 <= 0.0 || v1 <= 0.0 || v2 <= 0.0 || t1 == t2)
    fail(ErrorCategory::kNumeric, "power-law fit needs two distinct positive points");
  NaturalAgingParams p;
  p.chi = std::log(v2 / v1) / std::log(t2 / t1);
  p.zeta = v1 / std::pow(t1, p.chi);
  if (p.chi <= 0.0 || p.chi >= 1.0)
    fail(ErrorCategory::kNumeric, "fitted exponent outside (0,1)");
  return p;
}

namespace {

constexpr char kMaskMagic[] = "AGEPIM-MASK";
constexpr int kMaskVersion = 1;

void write_f32_le(std::ostream& os, const float* data, std::size_t n) {
  static_assert(std::endian::native == std::endian::little,
                "serialization assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * sizeof(float)));
}

void read_f32_le(std::istream& is, float* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) fail(ErrorCategory::kIo, "mask file truncated in degree payload");
}

}  // namespace

void save_mask(const AgingMask& mask, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  os << kMaskMagic << " v" << kMaskVersion << "\n";
  os << "q " << mask.q << "\n";
  os.precision(17);
  os << "sigma " << mask.sigma << "\n";
  os << "alpha " << mask.alpha << "\n";
  os << "seed " << mask.seed << "\n";
  os << "layers " << mask.layers.size() << "\n";
  for (const auto& layer : mask.layers) {
    if (static_cast<int>(layer.size()) != mask.q)
      fail(ErrorCategory::kShape, "mask layer missing bit planes");
    os << "layer " << layer[0].rows() << " " << layer[0].cols() << "\n";
  }
  os << "data\n";
  for (const auto& layer : mask.layers)
    for (const auto& plane : layer) write_f32_le(os, plane.data(), plane.size());
  if (!os) fail(ErrorCategory::kIo, "short write to " + path.string());
}

AgingMask load_mask(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || !line.starts_with(kMaskMagic))
    fail(ErrorCategory::kIo, "not a mask file: bad magic");
  if (line != std::string(kMaskMagic) + " v1")
    fail(ErrorCategory::kIo, "unsupported mask version: " + line);

  AgingMask mask;
  std::size_t layer_count = 0;
  std::vector<LayerShape> shapes;
  auto next_kv = [&](const char* key) -> std::string {
    if (!std::getline(is, line))
      fail(ErrorCategory::kIo, "mask header truncated");
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key)
      fail(ErrorCategory::kIo, std::string("mask header: expected '") + key +
                                   "', got '" + k + "'");
    std::string rest;
    std::getline(ss, rest);
    return rest;
  };
  try {
    mask.q = std::stoi(next_kv("q"));
    if (mask.q < 1 || mask.q > 24) fail(ErrorCategory::kIo, "mask header: bad q");
    mask.sigma = std::stod(next_kv("sigma"));
    mask.alpha = std::stod(next_kv("alpha"));
    mask.seed = std::stoull(next_kv("seed"));
    layer_count = std::stoul(next_kv("layers"));
    for (std::size_t l = 0; l < layer_count; ++l) {
      std::istringstream ss(next_kv("layer"));
      LayerShape s;
      ss >> s.rows >> s.cols;
      if (!ss || s.rows == 0 || s.cols == 0)
        fail(ErrorCategory::kIo, "mask header: bad layer shape");
      shapes.push_back(s);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCategory::kIo, "mask header: malformed field");
  }
  if (!std::getline(is, line) || line != "data")
    fail(ErrorCategory::kIo, "mask header: missing data marker");

  mask.layers.resize(layer_count);
  for (std::size_t l = 0; l < layer_count; ++l) {
    for (int i = 0; i < mask.q; ++i) {
      Matf plane(shapes[l].rows, shapes[l].cols);
      read_f32_le(is, plane.data(), plane.size());
      mask.layers[l].push_back(std::move(plane));
    }
  }
  is.peek();
  if (!is.eof()) fail(ErrorCategory::kIo, "mask file has trailing bytes");
  return mask;
}

}  // namespace agepim
