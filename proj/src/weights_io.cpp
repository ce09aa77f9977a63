#include "adnet/weights_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>
#include <vector>

namespace adnet {

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t size) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int bit = 0; bit < 8; ++bit) {
                c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            }
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i) {
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'A', 'D', 'N', 'W'};

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 0 : 1;
}

struct Writer {
    std::vector<std::uint8_t> bytes;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct Reader {
    const std::uint8_t* p;
    std::size_t left;
    const std::string& path;

    void need(std::size_t n) const {
        if (left < n) {
            throw FormatError("weights file '" + path + "' ends unexpectedly");
        }
    }
    void raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }
    std::uint8_t u8() {
        need(1);
        const std::uint8_t v = *p;
        ++p;
        --left;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
};

template <typename T>
void write_record(Writer& w, const std::string& name, const Tensor<T>& t) {
    w.str(name);
    w.u8(dtype_code<T>());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    static_assert(std::endian::native == std::endian::little,
                  "payload is written as native little-endian words");
    w.raw(t.data(), t.size() * sizeof(T));
}

bool is_moving_stat(const std::string& name) {
    return name.ends_with(".moving_mean") || name.ends_with(".moving_var");
}

} // namespace

template <typename T>
void save_weights(const std::string& path, const ParamStore<T>& store,
                  const std::string& fingerprint, bool checkpoint,
                  std::uint64_t adam_steps) {
    Writer w;
    w.raw(kMagic, 4);
    w.u32(kWeightsVersion);
    w.u8(checkpoint ? 1 : 0);
    w.str(fingerprint);

    std::uint32_t records = 0;
    for (const auto& name : store.names()) {
        records += 1;
        if (checkpoint && store.at(name).trainable) records += 2;
    }
    if (checkpoint) records += 1; // optim.step
    w.u32(records);

    for (const auto& name : store.names()) {
        const auto& e = store.at(name);
        write_record(w, name, e.value);
        if (checkpoint && e.trainable) {
            write_record(w, name + ".adam_m", e.m);
            write_record(w, name + ".adam_v", e.v);
        }
    }
    if (checkpoint) {
        // Step counter is binary64 regardless of the parameter precision so
        // large counts stay exact.
        Tensor<double> step(Shape{1});
        step[0] = static_cast<double>(adam_steps);
        write_record(w, "optim.step", step);
    }

    w.u32(crc32_ieee(w.bytes.data(), w.bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write weights '" + path + "'");
    }
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) {
        throw IoError("short write on weights '" + path + "'");
    }
}

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot read weights '" + path + "'");
    }
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) {
        throw IoError("short read on weights '" + path + "'");
    }
    return bytes;
}

WeightsMeta parse_header(Reader& r, const std::string& path) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "' is not a weights file (bad magic)");
    }
    WeightsMeta meta;
    meta.version = r.u32();
    if (meta.version != kWeightsVersion) {
        throw FormatError("'" + path + "' has unsupported version " +
                          std::to_string(meta.version));
    }
    meta.checkpoint = (r.u8() & 1) != 0;
    meta.fingerprint = r.str();
    return meta;
}

} // namespace

WeightsMeta peek_weights(const std::string& path) {
    const auto bytes = read_all(path);
    Reader r{bytes.data(), bytes.size(), path};
    return parse_header(r, path);
}

template <typename T>
LoadedWeights<T> load_weights(const std::string& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < 4) {
        throw FormatError("weights file '" + path + "' ends unexpectedly");
    }
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) {
        stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)])
                  << (8 * i);
    }
    if (crc32_ieee(bytes.data(), body) != stored) {
        throw FormatError("weights file '" + path + "' fails its checksum");
    }

    Reader r{bytes.data(), body, path};
    LoadedWeights<T> loaded;
    loaded.meta = parse_header(r, path);

    const std::uint32_t records = r.u32();
    for (std::uint32_t rec = 0; rec < records; ++rec) {
        const std::string name = r.str();
        const std::uint8_t dtype = r.u8();
        const std::uint8_t rank = r.u8();
        Shape shape(rank);
        for (std::uint8_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<std::size_t>(r.u64());
        }
        if (name == "optim.step") {
            if (dtype != 1 || shape != Shape{1}) {
                throw FormatError("'" + path + "' has a malformed optim.step record");
            }
            double steps = 0.0;
            r.raw(&steps, sizeof(steps));
            loaded.adam_steps = static_cast<std::uint64_t>(steps);
            continue;
        }
        if (dtype != dtype_code<T>()) {
            throw CompatError("'" + path + "' stores record '" + name +
                              "' as binary" + (dtype == 0 ? "32" : "64") +
                              ", caller expects binary" + (dtype_code<T>() == 0 ? "32" : "64"));
        }
        Tensor<T> t(shape);
        r.raw(t.data(), t.size() * sizeof(T));

        if (name.ends_with(".adam_m")) {
            loaded.store.at(name.substr(0, name.size() - 7)).m = std::move(t);
        } else if (name.ends_with(".adam_v")) {
            loaded.store.at(name.substr(0, name.size() - 7)).v = std::move(t);
        } else {
            loaded.store.add(name, std::move(t), !is_moving_stat(name));
        }
    }
    if (r.left != 0) {
        throw FormatError("weights file '" + path + "' has trailing bytes");
    }
    return loaded;
}

int fingerprint_precision(const std::string& fingerprint) {
    const auto pos = fingerprint.rfind("precision=");
    if (pos == std::string::npos) return 0;
    try {
        return std::stoi(fingerprint.substr(pos + 10));
    } catch (const std::exception&) {
        return 0;
    }
}

template void save_weights<float>(const std::string&, const ParamStore<float>&,
                                  const std::string&, bool, std::uint64_t);
template void save_weights<double>(const std::string&, const ParamStore<double>&,
                                   const std::string&, bool, std::uint64_t);
template LoadedWeights<float> load_weights<float>(const std::string&);
template LoadedWeights<double> load_weights<double>(const std::string&);

} // namespace adnet
