#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adnet/image.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

inline constexpr std::size_t kImageSide = 100;

struct ManifestEntry {
    std::string path;
    int label = 0;
    std::string split; // "train" or "test"
};

// Self-describing dataset index: the header records the split seed, the
// train fraction, and the class-name table the labels index into.
struct Manifest {
    std::uint64_t seed = 0;
    double fraction = 0.0;
    std::vector<std::string> class_names;
    std::vector<ManifestEntry> entries;

    std::vector<std::size_t> split_counts(const std::string& split) const;
    std::vector<std::size_t> class_totals() const;
};

// Scans one directory per class (class name = directory name, alphabetical
// index order) and returns (path, label) pairs, paths sorted within class.
std::vector<std::pair<std::string, int>> scan_class_dirs(
    const std::string& data_dir, std::vector<std::string>& class_names_out);

// Per class: shuffle, take floor(fraction * n_class) for train, then hand the
// remaining slots to the largest fractional remainders (ties to the lower
// class index) until the train total reaches round-half-up(fraction * n).
Manifest stratified_split(const std::vector<std::pair<std::string, int>>& items,
                          const std::vector<std::string>& class_names,
                          double train_fraction, std::uint64_t seed);

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

// Decodes one file into [3,100,100] planes in [0,1]. Off-size inputs are an
// error unless `resize` is set, which bilinearly resamples to 100x100.
template <typename T>
Tensor<T> load_image_tensor(const std::string& path, bool resize);

// Decode-once cache keyed by path, storing the raw 8-bit raster.
class ImageCache {
public:
    const ImageU8& get(const std::string& path);

private:
    std::map<std::string, ImageU8> cache_;
};

template <typename T>
struct Batch {
    Tensor<T> x; // [b,3,100,100]
    std::vector<int> labels;
    std::vector<const ManifestEntry*> entries;
};

// One epoch over a split in a seed-and-epoch-keyed shuffle order. Every
// entry appears exactly once; the final batch may be short.
template <typename T>
class BatchStream {
public:
    BatchStream(const Manifest& manifest, const std::string& split,
                std::size_t batch_size, std::uint64_t epoch, std::uint64_t base_seed,
                bool resize = false, ImageCache* cache = nullptr);

    std::optional<Batch<T>> next();
    std::size_t total() const { return order_.size(); }

private:
    const Manifest& manifest_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t batch_size_;
    bool resize_;
    ImageCache* cache_;
};

} // namespace adnet
