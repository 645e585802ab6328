#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scaletrain/error.hpp"
#include "scaletrain/tensor.hpp"

namespace scaletrain {

enum class DatasetFormat { Idx, CifarBinary };
enum class Split { Train, Test };

inline const char* split_name(Split s) { return s == Split::Train ? "train" : "test"; }

/// Images (N, C, H, W) scaled to [0, 1] with integer labels in [0, classes).
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  Split split = Split::Train;
  int classes = 10;

  std::size_t size() const { return labels.size(); }

  void validate() const {
    if (images.rank() != 4 || images.dim(0) != labels.size()) {
      throw RecordCountMismatchError("dataset has " + std::to_string(labels.size()) + " labels for images " +
                                     shape_string(images.shape()));
    }
    for (int l : labels) {
      if (l < 0 || l >= classes) {
        throw RecordCountMismatchError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
      }
    }
  }

  /// First `n` records (all when n == 0 or n >= size()).
  Dataset head(std::size_t n) const {
    if (n == 0 || n >= size()) return *this;
    const std::size_t per = images.size() / size();
    Shape shape = images.shape();
    shape[0] = n;
    return {Tensor<float>(shape, std::vector<float>(images.values().begin(),
                                                    images.values().begin() + static_cast<std::ptrdiff_t>(n * per))),
            std::vector<int>(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n)), split, classes};
  }
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::uint32_t be32(const std::string& bytes, std::size_t off) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3]));
}

inline void check_length(const std::string& path, std::size_t actual, std::size_t expected) {
  if (actual < expected) {
    throw TruncatedFileError(path + ": truncated file, " + std::to_string(actual) + " bytes, header declares " +
                             std::to_string(expected));
  }
  if (actual > expected) {
    throw RecordCountMismatchError(path + ": " + std::to_string(actual) + " bytes but header declares " +
                                   std::to_string(expected));
  }
}

}  // namespace detail

/// idx3 image file: magic 0x00000803, big-endian N, rows, cols, then bytes.
inline Tensor<float> load_idx_images(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 16) throw TruncatedFileError(path + ": truncated file (" + std::to_string(bytes.size()) + " bytes)");
  if (detail::be32(bytes, 0) != 0x00000803u) throw BadMagicError(path + ": bad idx image magic");
  const std::size_t n = detail::be32(bytes, 4), rows = detail::be32(bytes, 8), cols = detail::be32(bytes, 12);
  if (n == 0 || rows == 0 || cols == 0) throw RecordCountMismatchError(path + ": idx header declares an empty dimension");
  detail::check_length(path, bytes.size(), 16 + n * rows * cols);
  Tensor<float> images({n, 1, rows, cols});
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i] = static_cast<float>(static_cast<unsigned char>(bytes[16 + i])) / 255.0f;
  }
  return images;
}

/// idx1 label file: magic 0x00000801, big-endian N, then one byte per label.
inline std::vector<int> load_idx_labels(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 8) throw TruncatedFileError(path + ": truncated file (" + std::to_string(bytes.size()) + " bytes)");
  if (detail::be32(bytes, 0) != 0x00000801u) throw BadMagicError(path + ": bad idx label magic");
  const std::size_t n = detail::be32(bytes, 4);
  detail::check_length(path, bytes.size(), 8 + n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<unsigned char>(bytes[8 + i]);
  return labels;
}

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path, Split split,
                        int classes = 10) {
  Dataset d{load_idx_images(images_path), load_idx_labels(labels_path), split, classes};
  if (d.images.dim(0) != d.labels.size()) {
    throw RecordCountMismatchError(images_path + " has " + std::to_string(d.images.dim(0)) + " images but " +
                                   labels_path + " has " + std::to_string(d.labels.size()) + " labels");
  }
  d.validate();
  return d;
}

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;

/// Concatenated 3073-byte records: label byte then R, G, B planes.
inline Dataset load_cifar_files(const std::vector<std::string>& paths, Split split, int classes = 10) {
  std::vector<std::string> blobs;
  std::size_t records = 0;
  for (const auto& p : paths) {
    auto bytes = detail::read_file(p);
    if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
      throw TruncatedFileError(p + ": truncated file, " + std::to_string(bytes.size()) +
                               " bytes is not a whole number of " + std::to_string(kCifarRecord) + "-byte records");
    }
    records += bytes.size() / kCifarRecord;
    blobs.push_back(std::move(bytes));
  }
  if (records == 0) throw TruncatedFileError("no CIFAR records found");
  Dataset d{Tensor<float>({records, 3, kCifarSide, kCifarSide}), std::vector<int>(records), split, classes};
  std::size_t r = 0;
  constexpr std::size_t pixels = kCifarRecord - 1;
  for (const auto& bytes : blobs) {
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord, ++r) {
      d.labels[r] = static_cast<unsigned char>(bytes[off]);
      float* dst = d.images.raw() + r * pixels;
      for (std::size_t i = 0; i < pixels; ++i) dst[i] = static_cast<float>(static_cast<unsigned char>(bytes[off + 1 + i])) / 255.0f;
    }
  }
  d.validate();
  return d;
}

/// `path` is a directory. idx: {train,t10k}-{images-idx3,labels-idx1}-ubyte.
/// cifar-binary: data_batch_*.bin for train, test_batch.bin for test.
inline Dataset load_dataset(const std::string& path, DatasetFormat format, Split split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) throw IoError("dataset directory '" + path + "' does not exist");
  if (format == DatasetFormat::Idx) {
    const std::string prefix = split == Split::Train ? "train" : "t10k";
    return load_idx((fs::path(path) / (prefix + "-images-idx3-ubyte")).string(),
                    (fs::path(path) / (prefix + "-labels-idx1-ubyte")).string(), split);
  }
  std::vector<std::string> files;
  if (split == Split::Test) {
    files.push_back((fs::path(path) / "test_batch.bin").string());
  } else {
    for (const auto& entry : fs::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("data_batch_", 0) == 0 && entry.path().extension() == ".bin") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no data_batch_*.bin files in '" + path + "'");
  }
  return load_cifar_files(files, split);
}

inline DatasetFormat parse_dataset_format(const std::string& s) {
  if (s == "idx") return DatasetFormat::Idx;
  if (s == "cifar-binary") return DatasetFormat::CifarBinary;
  throw UsageError("unknown dataset format '" + s + "' (expected idx or cifar-binary)");
}

}  // namespace scaletrain
