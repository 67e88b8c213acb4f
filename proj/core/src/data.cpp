#include "agepim/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "agepim/common.hpp"
#include "agepim/rng.hpp"

namespace agepim {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) fail(ErrorCategory::kData, std::string("IDX truncated reading ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void read_payload(std::istream& is, std::uint8_t* dst, std::size_t n,
                  const std::filesystem::path& path) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    fail(ErrorCategory::kData, "IDX payload truncated: " + path.string());
  is.peek();
  if (!is.eof())
    fail(ErrorCategory::kData, "IDX trailing bytes: " + path.string());
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 const std::string& split) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) fail(ErrorCategory::kIo, "cannot open " + images_path.string());
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) fail(ErrorCategory::kIo, "cannot open " + labels_path.string());

  Dataset d;
  d.split = split;

  const std::uint32_t img_magic = read_be_u32(imgs, "images magic");
  if (img_magic != kImagesMagic)
    fail(ErrorCategory::kData, "bad images magic in " + images_path.string());
  const std::uint32_t img_count = read_be_u32(imgs, "image count");
  d.image_rows = read_be_u32(imgs, "image rows");
  d.image_cols = read_be_u32(imgs, "image cols");
  if (d.image_rows == 0 || d.image_cols == 0)
    fail(ErrorCategory::kData, "zero image dims in " + images_path.string());

  const std::uint32_t lab_magic = read_be_u32(labs, "labels magic");
  if (lab_magic != kLabelsMagic)
    fail(ErrorCategory::kData, "bad labels magic in " + labels_path.string());
  const std::uint32_t lab_count = read_be_u32(labs, "label count");
  if (img_count != lab_count)
    fail(ErrorCategory::kData, "image/label count mismatch: " +
                                   std::to_string(img_count) + " vs " +
                                   std::to_string(lab_count));

  d.images = Matu8(img_count, d.image_rows * d.image_cols);
  read_payload(imgs, d.images.data(), d.images.size(), images_path);
  d.labels.resize(lab_count);
  read_payload(labs, d.labels.data(), d.labels.size(), labels_path);
  for (std::uint8_t y : d.labels)
    if (y > 9) fail(ErrorCategory::kData, "label outside 0..9");
  return d;
}

Dataset subsample(const Dataset& data, std::size_t k, std::uint64_t seed,
                  bool stratified) {
  if (k > data.count())
    fail(ErrorCategory::kData, "subsample larger than dataset");
  std::vector<std::uint32_t> chosen;
  Rng rng(derive_seed(seed, "subsample"));
  if (!stratified) {
    chosen = sample_without_replacement(rng, data.count(), k);
  } else {
    std::array<std::vector<std::uint32_t>, 10> per_class;
    for (std::size_t i = 0; i < data.count(); ++i)
      per_class[data.labels[i]].push_back(static_cast<std::uint32_t>(i));
    // floor(k/10) each, remainder to the lowest class ids
    for (int c = 0; c < 10; ++c) {
      std::size_t want = k / 10 + (static_cast<std::size_t>(c) < k % 10 ? 1 : 0);
      if (want > per_class[c].size())
        fail(ErrorCategory::kData, "class " + std::to_string(c) +
                                       " too small for stratified subsample");
      shuffle_indices(rng, per_class[c]);
      chosen.insert(chosen.end(), per_class[c].begin(),
                    per_class[c].begin() + want);
    }
    std::sort(chosen.begin(), chosen.end());
  }
  Dataset out;
  out.split = data.split;
  out.image_rows = data.image_rows;
  out.image_cols = data.image_cols;
  out.images = Matu8(chosen.size(), data.dim());
  out.labels.resize(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto src = data.images.row(chosen[i]);
    std::copy(src.begin(), src.end(), out.images.row(i).begin());
    out.labels[i] = data.labels[chosen[i]];
  }
  return out;
}

void fill_batch(const Dataset& data, std::span<const std::uint32_t> idx,
                Matd& out) {
  out = Matd(idx.size(), data.dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= data.count()) fail(ErrorCategory::kInternal, "batch index");
    const auto src = data.images.row(idx[i]);
    double* dst = out.data() + i * data.dim();
    for (std::size_t j = 0; j < src.size(); ++j)
      dst[j] = static_cast<double>(src[j]) / 255.0;
  }
}

}  // namespace agepim
