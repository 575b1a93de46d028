// IDX reader. Layout (big-endian):
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <vector>

#include "brdsgd/error.hpp"
#include "brdsgd/learner.hpp"

namespace brdsgd {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw Error(ErrorCode::LengthMismatch, path.string() + " is truncated");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = slurp(images);
  const auto lab = slurp(labels);
  if (read_be32(img, 0, images) != kImageMagic) {
    throw Error(ErrorCode::BadMagic, images.string() + " is not an IDX image file");
  }
  if (read_be32(lab, 0, labels) != kLabelMagic) {
    throw Error(ErrorCode::BadMagic, labels.string() + " is not an IDX label file");
  }
  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(count) + " images but " +
                                               std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() != 16 + count * pixels) {
    throw Error(ErrorCode::LengthMismatch, images.string() + " payload size does not match header");
  }
  if (lab.size() != 8 + count) {
    throw Error(ErrorCode::LengthMismatch, labels.string() + " payload size does not match header");
  }

  int classes = 0;
  for (std::size_t i = 0; i < count; ++i) classes = std::max(classes, int{lab[8 + i]} + 1);
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.label = lab[8 + i];
    s.features.resize(static_cast<Eigen::Index>(pixels));
    for (std::size_t p = 0; p < pixels; ++p) {
      s.features[static_cast<Eigen::Index>(p)] = img[16 + i * pixels + p] / 255.0;
    }
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples), classes);
}

}  // namespace brdsgd
