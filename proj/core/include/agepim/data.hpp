#ifndef AGEPIM_DATA_HPP_
#define AGEPIM_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agepim/matrix.hpp"

namespace agepim {

// Images stay as raw bytes; pixel/255 normalization happens on batch
// assembly so a full split costs count x dim bytes, not doubles.
struct Dataset {
  Matu8 images;                      // count x (rows*cols)
  std::vector<std::uint8_t> labels;  // class ids 0..9
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::string split;  // "train" or "test"

  std::size_t count() const { return labels.size(); }
  std::size_t dim() const { return images.cols(); }
};

// Big-endian IDX containers: magic 0x00000803 for images (3 dims),
// 0x00000801 for labels (1 dim). Image/label counts must match.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 const std::string& split = "");

// Deterministic subset of k items. Stratified sampling keeps per-class
// counts within one of each other.
Dataset subsample(const Dataset& data, std::size_t k, std::uint64_t seed,
                  bool stratified);

// Rows of `out` get images[idx]/255.
void fill_batch(const Dataset& data, std::span<const std::uint32_t> idx,
                Matd& out);

}  // namespace agepim

#endif  // AGEPIM_DATA_HPP_
