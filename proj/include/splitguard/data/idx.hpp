#pragma once

// Reader/writer for the IDX binary format used by MNIST:
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes
// All header integers are big-endian uint32.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/error.hpp"

namespace splitguard::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off,
                               const std::string& what) {
  if (off + 4 > buf.size()) throw IngestionError(what + ": truncated header", buf.size());
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& buf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace detail

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
};

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& buf) {
  const std::uint32_t magic = detail::read_be32(buf, 0, "images");
  if (magic != kIdxImagesMagic) throw IngestionError("images: bad magic number", 0);
  const std::size_t count = detail::read_be32(buf, 4, "images");
  IdxImages img;
  img.rows = detail::read_be32(buf, 8, "images");
  img.cols = detail::read_be32(buf, 12, "images");
  const std::size_t need = count * img.rows * img.cols;
  if (buf.size() < 16 + need) throw IngestionError("images: truncated pixel data", buf.size());
  img.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& buf) {
  const std::uint32_t magic = detail::read_be32(buf, 0, "labels");
  if (magic != kIdxLabelsMagic) throw IngestionError("labels: bad magic number", 0);
  const std::size_t count = detail::read_be32(buf, 4, "labels");
  if (buf.size() < 8 + count) throw IngestionError("labels: truncated label data", buf.size());
  return {buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

// Block-averages one rows x cols image down to side x side. The block stride is
// ceil(rows / side) (resp. cols); the image is padded at the bottom/right by
// repeating its last row/column so every block is full.
inline std::vector<double> downsample_image(const double* img, std::size_t rows, std::size_t cols,
                                            std::size_t side) {
  const std::size_t sr = (rows + side - 1) / side;
  const std::size_t sc = (cols + side - 1) / side;
  std::vector<double> out(side * side, 0.0);
  for (std::size_t br = 0; br < side; ++br) {
    for (std::size_t bc = 0; bc < side; ++bc) {
      double acc = 0.0;
      for (std::size_t r = br * sr; r < (br + 1) * sr; ++r) {
        const std::size_t rr = std::min(r, rows - 1);
        for (std::size_t c = bc * sc; c < (bc + 1) * sc; ++c) {
          acc += img[rr * cols + std::min(c, cols - 1)];
        }
      }
      out[br * side + bc] = acc / static_cast<double>(sr * sc);
    }
  }
  return out;
}

// Loads an IDX image/label pair. Pixels are scaled to [0, 1]. With
// `downsample_to`, each image is block-averaged to that side length.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::optional<std::size_t> downsample_to = std::nullopt,
                        int num_classes = 10) {
  const IdxImages img = parse_idx_images(detail::read_file(images_path));
  const std::vector<std::uint8_t> lab = parse_idx_labels(detail::read_file(labels_path));
  const std::size_t per = img.rows * img.cols;
  const std::size_t count = per == 0 ? 0 : img.pixels.size() / per;
  if (count != lab.size()) {
    throw IngestionError("label count " + std::to_string(lab.size()) +
                             " does not match image count " + std::to_string(count),
                         4);
  }
  if (count == 0) throw IngestionError("empty IDX files", 4);

  const std::size_t dim = downsample_to ? *downsample_to * *downsample_to : per;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.examples = nn::Matrix(count, dim);
  ds.labels.resize(count);
  std::vector<double> scaled(per);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < per; ++p) scaled[p] = img.pixels[i * per + p] / 255.0;
    auto row = ds.examples.row(i);
    if (downsample_to) {
      auto small = downsample_image(scaled.data(), img.rows, img.cols, *downsample_to);
      std::copy(small.begin(), small.end(), row.begin());
    } else {
      std::copy(scaled.begin(), scaled.end(), row.begin());
    }
    if (lab[i] >= num_classes) {
      throw IngestionError("label " + std::to_string(lab[i]) + " out of range", 8 + i);
    }
    ds.labels[i] = lab[i];
  }
  return ds;
}

// Writes a dataset back to IDX. Values are expected in [0, 1] and are rounded
// to bytes; `rows * cols` must equal the example dimension.
inline void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
                      const std::string& images_path, const std::string& labels_path) {
  if (rows * cols != ds.dim()) throw ConfigError("write_idx: rows*cols != dim");
  std::vector<std::uint8_t> ibuf;
  detail::put_be32(ibuf, kIdxImagesMagic);
  detail::put_be32(ibuf, static_cast<std::uint32_t>(ds.size()));
  detail::put_be32(ibuf, static_cast<std::uint32_t>(rows));
  detail::put_be32(ibuf, static_cast<std::uint32_t>(cols));
  for (double v : ds.examples.data()) {
    ibuf.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  std::vector<std::uint8_t> lbuf;
  detail::put_be32(lbuf, kIdxLabelsMagic);
  detail::put_be32(lbuf, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) lbuf.push_back(static_cast<std::uint8_t>(y));
  detail::write_file(images_path, ibuf);
  detail::write_file(labels_path, lbuf);
}

}  // namespace splitguard::data
