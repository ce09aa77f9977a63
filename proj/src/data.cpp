#include "adnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adnet/errors.hpp"
#include "adnet/rng.hpp"

namespace fs = std::filesystem;

namespace adnet {

std::vector<std::size_t> Manifest::split_counts(const std::string& split) const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& e : entries) {
        if (e.split == split) ++counts[static_cast<std::size_t>(e.label)];
    }
    return counts;
}

std::vector<std::size_t> Manifest::class_totals() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& e : entries) {
        ++counts[static_cast<std::size_t>(e.label)];
    }
    return counts;
}

std::vector<std::pair<std::string, int>> scan_class_dirs(
    const std::string& data_dir, std::vector<std::string>& class_names_out) {
    if (!fs::is_directory(data_dir)) {
        throw DataError("data directory '" + data_dir + "' does not exist");
    }
    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_directory()) {
            classes.push_back(entry.path().filename().string());
        }
    }
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) {
        throw DataError("no class directories under '" + data_dir + "'");
    }

    std::vector<std::pair<std::string, int>> items;
    for (std::size_t label = 0; label < classes.size(); ++label) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(data_dir) / classes[label])) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw DataError("class '" + classes[label] + "' has no images");
        }
        for (auto& f : files) {
            items.emplace_back(std::move(f), static_cast<int>(label));
        }
    }
    class_names_out = std::move(classes);
    return items;
}

Manifest stratified_split(const std::vector<std::pair<std::string, int>>& items,
                          const std::vector<std::string>& class_names,
                          double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ConfigError("train fraction must be in (0,1), got " +
                          std::to_string(train_fraction));
    }
    const std::size_t k = class_names.size();
    std::vector<std::vector<std::string>> per_class(k);
    for (const auto& [path, label] : items) {
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw DataError("label " + std::to_string(label) + " outside class table");
        }
        per_class[static_cast<std::size_t>(label)].push_back(path);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (per_class[c].empty()) {
            throw DataError("class '" + class_names[c] + "' is empty");
        }
    }

    // Deduplicate check: paths must be unique across the dataset.
    {
        std::vector<std::string> all;
        all.reserve(items.size());
        for (const auto& [path, label] : items) all.push_back(path);
        std::sort(all.begin(), all.end());
        if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
            throw DataError("duplicate paths in dataset listing");
        }
    }

    const std::size_t total = items.size();
    const std::size_t target_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(total) + 0.5));

    std::vector<std::size_t> train_count(k);
    std::vector<double> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double exact = train_fraction * static_cast<double>(per_class[c].size());
        train_count[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - std::floor(exact);
        assigned += train_count[c];
    }
    std::vector<std::size_t> by_remainder(k);
    for (std::size_t c = 0; c < k; ++c) by_remainder[c] = c;
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < target_train && i < k; ++i) {
        const std::size_t c = by_remainder[i];
        if (train_count[c] < per_class[c].size()) {
            ++train_count[c];
            ++assigned;
        }
    }

    Manifest manifest;
    manifest.seed = seed;
    manifest.fraction = train_fraction;
    manifest.class_names = class_names;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> idx(per_class[c].size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(Rng::derive(seed, c));
        rng.shuffle(idx);
        std::vector<bool> in_train(per_class[c].size(), false);
        for (std::size_t i = 0; i < train_count[c]; ++i) in_train[idx[i]] = true;
        // Rows stay in sorted-path order; only the assignment is random.
        for (std::size_t i = 0; i < per_class[c].size(); ++i) {
            manifest.entries.push_back(ManifestEntry{
                per_class[c][i], static_cast<int>(c), in_train[i] ? "train" : "test"});
        }
    }
    return manifest;
}

namespace {

std::string format_fraction(double fraction) {
    std::ostringstream os;
    os.precision(17);
    os << fraction;
    return os.str();
}

} // namespace

void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: LF endings everywhere
    if (!out) {
        throw IoError("cannot write manifest '" + path + "'");
    }
    out << "# seed=" << manifest.seed << " fraction=" << format_fraction(manifest.fraction)
        << "\n";
    out << "# classes=";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
        if (i) out << ",";
        out << manifest.class_names[i];
    }
    out << "\n";
    for (const auto& e : manifest.entries) {
        out << e.path << "," << e.label << "," << e.split << "\n";
    }
    if (!out) {
        throw IoError("short write on manifest '" + path + "'");
    }
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read manifest '" + path + "'");
    }
    Manifest manifest;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string token;
            while (ls >> token) {
                if (token.rfind("seed=", 0) == 0) {
                    manifest.seed = std::stoull(token.substr(5));
                    have_header = true;
                } else if (token.rfind("fraction=", 0) == 0) {
                    manifest.fraction = std::stod(token.substr(9));
                } else if (token.rfind("classes=", 0) == 0) {
                    std::istringstream cs(token.substr(8));
                    std::string name;
                    while (std::getline(cs, name, ',')) {
                        manifest.class_names.push_back(name);
                    }
                }
            }
            continue;
        }
        const auto c1 = line.rfind(',');
        const auto c0 = c1 == std::string::npos ? std::string::npos : line.rfind(',', c1 - 1);
        if (c0 == std::string::npos) {
            throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                            ": expected path,label,split");
        }
        ManifestEntry e;
        e.path = line.substr(0, c0);
        try {
            e.label = std::stoi(line.substr(c0 + 1, c1 - c0 - 1));
        } catch (const std::exception&) {
            throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                            ": bad label");
        }
        e.split = line.substr(c1 + 1);
        if (e.split != "train" && e.split != "test") {
            throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                            ": split must be train or test");
        }
        if (e.label < 0 ||
            (!manifest.class_names.empty() &&
             static_cast<std::size_t>(e.label) >= manifest.class_names.size())) {
            throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                            ": label outside class table");
        }
        manifest.entries.push_back(std::move(e));
    }
    if (!have_header || manifest.class_names.empty() || manifest.entries.empty()) {
        throw DataError("manifest '" + path + "' is missing header or rows");
    }
    return manifest;
}

namespace {

template <typename T>
Tensor<T> planes_from_raster(const ImageU8& raster, const std::string& path, bool resize) {
    if (raster.width == kImageSide && raster.height == kImageSide) {
        return image_to_planes<T>(raster);
    }
    if (!resize) {
        throw DataError("'" + path + "' is " + std::to_string(raster.width) + "x" +
                        std::to_string(raster.height) + ", expected 100x100 (use resize)");
    }
    return bilinear_resize(image_to_planes<T>(raster), kImageSide, kImageSide);
}

} // namespace

template <typename T>
Tensor<T> load_image_tensor(const std::string& path, bool resize) {
    return planes_from_raster<T>(decode_image(path), path, resize);
}

const ImageU8& ImageCache::get(const std::string& path) {
    auto it = cache_.find(path);
    if (it == cache_.end()) {
        it = cache_.emplace(path, decode_image(path)).first;
    }
    return it->second;
}

template <typename T>
BatchStream<T>::BatchStream(const Manifest& manifest, const std::string& split,
                            std::size_t batch_size, std::uint64_t epoch,
                            std::uint64_t base_seed, bool resize, ImageCache* cache)
    : manifest_(manifest), batch_size_(batch_size), resize_(resize), cache_(cache) {
    if (batch_size_ == 0) {
        throw ConfigError("batch size must be >= 1");
    }
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (manifest.entries[i].split == split) order_.push_back(i);
    }
    Rng rng(Rng::derive(base_seed, 0xba7cULL ^ epoch));
    rng.shuffle(order_);
}

template <typename T>
std::optional<Batch<T>> BatchStream<T>::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t b = std::min(batch_size_, order_.size() - cursor_);
    Batch<T> batch;
    batch.x = Tensor<T>(Shape{b, 3, kImageSide, kImageSide});
    batch.labels.reserve(b);
    batch.entries.reserve(b);
    const std::size_t plane = 3 * kImageSide * kImageSide;
    for (std::size_t i = 0; i < b; ++i) {
        const ManifestEntry& e = manifest_.entries[order_[cursor_ + i]];
        Tensor<T> img =
            cache_ ? planes_from_raster<T>(cache_->get(e.path), e.path, resize_)
                   : load_image_tensor<T>(e.path, resize_);
        std::memcpy(batch.x.data() + i * plane, img.data(), plane * sizeof(T));
        batch.labels.push_back(e.label);
        batch.entries.push_back(&e);
    }
    cursor_ += b;
    return batch;
}

template Tensor<float> load_image_tensor<float>(const std::string&, bool);
template Tensor<double> load_image_tensor<double>(const std::string&, bool);
template class BatchStream<float>;
template class BatchStream<double>;

} // namespace adnet
