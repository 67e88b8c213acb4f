#ifndef AGEPIM_NETWORK_HPP_
#define AGEPIM_NETWORK_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "agepim/aging.hpp"
#include "agepim/matrix.hpp"
#include "agepim/quantize.hpp"

namespace agepim {

enum class Activation { kIdentity, kRelu };

// One fully-connected layer. The deployable weights are the q sign
// planes in `bits`; `w_fp` are the full-precision shadow planes the
// optimizer moves. Outside an update step, bits == sign(w_fp).
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<Matd> w_fp;    // q planes, out x in
  BitPlanes bits;            // current binarization of w_fp
  std::vector<double> bias;  // digital domain, never aged
  double act_scale = 1.0;    // running max of real post-activation (pretrain)
  Activation act = Activation::kRelu;
};

struct Network {
  int q = 1;  // weight bits
  int n = 8;  // input bits
  std::uint64_t seed = 0;
  int epoch = 0;
  std::vector<Layer> layers;

  std::vector<std::size_t> widths() const;
  std::vector<LayerShape> layer_shapes() const;  // weight bit-matrix shapes
};

// He-uniform init at `seed`, weights quantized to q planes, hidden
// activations relu, output identity. Biases start at zero.
Network make_network(const std::vector<std::size_t>& widths, int q, int n,
                     std::uint64_t seed);

// bits <- sign(w_fp), with sign(0) = +1.
void binarize_step(Network& net);

// .ckpt container: text header, then raw little-endian float32 for all
// w_fp planes and biases, layer-major with bit index inner.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace agepim

#endif  // AGEPIM_NETWORK_HPP_
