#include "dataio.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "prng.hpp"

namespace fs = std::filesystem;

namespace glim {

uint32_t crc32_ieee(const void* data, size_t len) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kTensorMagic[4] = {'G', 'L', 'T', 'N'};
constexpr char kCkptMagic[4] = {'G', 'L', 'C', 'K'};

void put_u16(std::string& buf, uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16(const std::string& buf, size_t off) {
    return static_cast<uint16_t>(static_cast<unsigned char>(buf[off]) |
                                 static_cast<unsigned char>(buf[off + 1]) << 8);
}

uint32_t get_u32(const std::string& buf, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

void need(const std::string& buf, size_t off, size_t n, const char* what) {
    if (off + n > buf.size())
        fail(ErrCode::io, std::string(what) + ": truncated at byte " + std::to_string(off));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrCode::io, "cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

void write_file(const std::string& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrCode::io, "cannot create " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) fail(ErrCode::io, "short write to " + path);
}

template <typename T>
struct WireTraits;
template <>
struct WireTraits<float> {
    using Bits = uint32_t;
};
template <>
struct WireTraits<double> {
    using Bits = uint64_t;
};

}  // namespace

template <typename T>
void append_tensor(std::string& buf, const Tensor<T>& t) {
    buf.append(kTensorMagic, 4);
    buf.push_back(1);  // version
    buf.push_back(static_cast<char>(dtype_of<T>()));
    buf.push_back(4);  // ndim
    const Dims d = t.dims();
    for (int64_t v : {d.n, d.c, d.h, d.w}) {
        if (v > UINT32_MAX) fail(ErrCode::invalid_argument, "tensor dim exceeds u32");
        put_u32(buf, static_cast<uint32_t>(v));
    }
    using Bits = typename WireTraits<T>::Bits;
    for (int64_t i = 0; i < t.numel(); ++i) {
        const auto bits = std::bit_cast<Bits>(t.data()[i]);
        for (size_t b = 0; b < sizeof(Bits); ++b)
            buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
}

template <typename T>
Tensor<T> parse_tensor(const std::string& buf, size_t& off) {
    need(buf, off, 7 + 16, "tensor record");
    if (std::memcmp(buf.data() + off, kTensorMagic, 4) != 0)
        fail(ErrCode::io, "tensor record: bad magic at byte " + std::to_string(off));
    const auto version = static_cast<unsigned char>(buf[off + 4]);
    if (version != 1)
        fail(ErrCode::io, "tensor record: unsupported version " + std::to_string(version));
    const auto dtype = static_cast<unsigned char>(buf[off + 5]);
    if (dtype != 0 && dtype != 1)
        fail(ErrCode::io, "tensor record: unknown dtype " + std::to_string(dtype));
    if (dtype != static_cast<unsigned char>(dtype_of<T>()))
        fail(ErrCode::io, std::string("tensor record: dtype is ") +
                              (dtype == 0 ? "float32" : "float64") + ", expected " +
                              (dtype_of<T>() == DType::f32 ? "float32" : "float64"));
    if (static_cast<unsigned char>(buf[off + 6]) != 4)
        fail(ErrCode::io, "tensor record: ndim must be 4");
    Dims d;
    d.n = get_u32(buf, off + 7);
    d.c = get_u32(buf, off + 11);
    d.h = get_u32(buf, off + 15);
    d.w = get_u32(buf, off + 19);
    off += 23;
    if (d.n <= 0 || d.c <= 0 || d.h <= 0 || d.w <= 0)
        fail(ErrCode::io, "tensor record: non-positive dims " + d.str());
    Tensor<T> t(d);
    using Bits = typename WireTraits<T>::Bits;
    need(buf, off, static_cast<size_t>(t.numel()) * sizeof(Bits), "tensor payload");
    for (int64_t i = 0; i < t.numel(); ++i) {
        Bits bits = 0;
        for (size_t b = 0; b < sizeof(Bits); ++b)
            bits |= static_cast<Bits>(static_cast<unsigned char>(buf[off + b])) << (8 * b);
        t.data()[i] = std::bit_cast<T>(bits);
        off += sizeof(Bits);
    }
    return t;
}

template <typename T>
void write_tensor_file(const std::string& path, const Tensor<T>& t) {
    std::string buf;
    append_tensor(buf, t);
    write_file(path, buf);
}

template <typename T>
Tensor<T> read_tensor_file(const std::string& path) {
    const std::string buf = read_file(path);
    size_t off = 0;
    Tensor<T> t = parse_tensor<T>(buf, off);
    if (off != buf.size())
        fail(ErrCode::io, path + ": " + std::to_string(buf.size() - off) + " trailing bytes");
    return t;
}

DType tensor_file_dtype(const std::string& path) {
    const std::string buf = read_file(path);
    need(buf, 0, 6, "tensor record");
    if (std::memcmp(buf.data(), kTensorMagic, 4) != 0)
        fail(ErrCode::io, path + ": bad magic");
    const auto dtype = static_cast<unsigned char>(buf[5]);
    if (dtype > 1) fail(ErrCode::io, path + ": unknown dtype");
    return static_cast<DType>(dtype);
}

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::string& path) {
    std::string buf;
    buf.append(kCkptMagic, 4);
    buf.push_back(1);
    put_u32(buf, static_cast<uint32_t>(store.entries.size()));
    for (const auto& e : store.entries) {
        if (e.name.size() > UINT16_MAX) fail(ErrCode::invalid_argument, "param name too long");
        put_u16(buf, static_cast<uint16_t>(e.name.size()));
        buf.append(e.name);
        append_tensor(buf, e.value);
    }
    put_u32(buf, crc32_ieee(buf.data(), buf.size()));
    write_file(path, buf);
}

template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 13 || std::memcmp(buf.data(), kCkptMagic, 4) != 0)
        fail(ErrCode::io, path + ": not a checkpoint");
    if (static_cast<unsigned char>(buf[4]) != 1)
        fail(ErrCode::io, path + ": unsupported checkpoint version");
    const uint32_t stored_crc = get_u32(buf, buf.size() - 4);
    const uint32_t actual_crc = crc32_ieee(buf.data(), buf.size() - 4);
    if (stored_crc != actual_crc)
        fail(ErrCode::io, path + ": CRC mismatch (corrupt checkpoint)");
    const uint32_t count = get_u32(buf, 5);
    if (count != store.entries.size())
        fail(ErrCode::data, path + ": holds " + std::to_string(count) + " entries, model has " +
                                std::to_string(store.entries.size()));
    size_t off = 9;
    const size_t end = buf.size() - 4;
    std::vector<char> seen(store.entries.size(), 0);
    for (uint32_t i = 0; i < count; ++i) {
        need(buf, off, 2, "checkpoint entry");
        const uint16_t name_len = get_u16(buf, off);
        off += 2;
        need(buf, off, name_len, "checkpoint entry name");
        const std::string name = buf.substr(off, name_len);
        off += name_len;
        Tensor<T> t = parse_tensor<T>(buf, off);
        const int idx = store.find(name);
        if (idx < 0) fail(ErrCode::data, path + ": unexpected entry '" + name + "'");
        if (seen[static_cast<size_t>(idx)])
            fail(ErrCode::data, path + ": duplicate entry '" + name + "'");
        seen[static_cast<size_t>(idx)] = 1;
        auto& e = store.entries[static_cast<size_t>(idx)];
        if (!(t.dims() == e.value.dims()))
            fail(ErrCode::data, path + ": entry '" + name + "' has dims " + t.dims().str() +
                                    ", model expects " + e.value.dims().str());
        e.value = std::move(t);
    }
    if (off != end) fail(ErrCode::io, path + ": trailing bytes before CRC");
    for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) fail(ErrCode::data, path + ": missing entry '" + store.entries[i].name + "'");
}

namespace {

// PPM/PGM header token reader: skips whitespace and '#' comments.
struct PnmReader {
    const std::string& buf;
    size_t off = 0;
    const std::string& path;

    void skip_space() {
        while (off < buf.size()) {
            const char c = buf[off];
            if (c == '#') {
                while (off < buf.size() && buf[off] != '\n') ++off;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++off;
            } else {
                break;
            }
        }
    }
    std::string token() {
        skip_space();
        const size_t start = off;
        while (off < buf.size() && !std::isspace(static_cast<unsigned char>(buf[off]))) ++off;
        if (start == off) fail(ErrCode::io, path + ": truncated header");
        return buf.substr(start, off - start);
    }
    int number() {
        const std::string t = token();
        try {
            return std::stoi(t);
        } catch (...) {
            fail(ErrCode::io, path + ": bad header number '" + t + "'");
        }
    }
};

}  // namespace

TensorF read_ppm(const std::string& path) {
    const std::string buf = read_file(path);
    PnmReader r{buf, 0, path};
    if (r.token() != "P6") fail(ErrCode::io, path + ": unsupported PPM variant (want binary P6)");
    const int w = r.number();
    const int h = r.number();
    const int maxval = r.number();
    if (w < 1 || h < 1) fail(ErrCode::io, path + ": bad dimensions");
    if (maxval != 255) fail(ErrCode::io, path + ": maxval must be 255, got " + std::to_string(maxval));
    r.off += 1;  // single whitespace after maxval
    const size_t expect = static_cast<size_t>(w) * h * 3;
    if (buf.size() - r.off != expect)
        fail(ErrCode::io, path + ": expected " + std::to_string(expect) + " pixel bytes, found " +
                              std::to_string(buf.size() - r.off));
    TensorF t({1, 3, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                t.at(0, c, y, x) =
                    static_cast<float>(static_cast<unsigned char>(buf[r.off + (y * w + x) * 3 + c])) /
                    255.0f;
    return t;
}

void write_pgm(const std::string& path, const TensorF& plane) {
    const Dims d = plane.dims();
    if (d.n != 1 || d.c != 1)
        fail(ErrCode::invalid_argument, "write_pgm: expected (1,1,H,W), got " + d.str());
    float lo = plane.data()[0], hi = plane.data()[0];
    for (int64_t i = 0; i < plane.numel(); ++i) {
        lo = std::min(lo, plane.data()[i]);
        hi = std::max(hi, plane.data()[i]);
    }
    std::string buf = "P5\n" + std::to_string(d.w) + " " + std::to_string(d.h) + "\n255\n";
    for (int64_t i = 0; i < plane.numel(); ++i) {
        int v = 128;  // constant input -> uniform gray
        if (hi > lo)
            v = static_cast<int>(std::lround((plane.data()[i] - lo) / (hi - lo) * 255.0f));
        buf.push_back(static_cast<char>(std::clamp(v, 0, 255)));
    }
    write_file(path, buf);
}

Dataset load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrCode::io, "cannot open " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    Dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrCode::data,
                 manifest_path + " line " + std::to_string(lineno) + ": bad JSON: " + e.what());
        }
        if (lineno == 1) {
            if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty())
                fail(ErrCode::data, manifest_path + " line 1: expected {\"classes\": [...]} header");
            for (const auto& c : j["classes"]) ds.class_names.push_back(c.get<std::string>());
            continue;
        }
        if (!j.contains("path") || !j.contains("label"))
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) +
                                    ": row needs \"path\" and \"label\"");
        const std::string rel = j["path"].get<std::string>();
        if (rel.empty())
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) + ": empty path");
        const int label = j["label"].get<int>();
        if (label < 0 || label >= static_cast<int>(ds.class_names.size()))
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) + ": label " +
                                    std::to_string(label) + " out of range for " +
                                    std::to_string(ds.class_names.size()) + " classes");
        const fs::path p = rel[0] == '/' ? fs::path(rel) : base / rel;
        if (!fs::exists(p))
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) +
                                    ": missing file " + p.string());
        TensorF img;
        if (p.extension() == ".gltn")
            img = read_tensor_file<float>(p.string());
        else if (p.extension() == ".ppm")
            img = read_ppm(p.string());
        else
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) +
                                    ": unsupported image type " + p.extension().string());
        const Dims d = img.dims();
        if (d.n != 1 || d.c != 3)
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) +
                                    ": image must be (1,3,H,W), got " + d.str());
        if (!ds.images.empty() && !(d == ds.images.front().dims()))
            fail(ErrCode::data, manifest_path + " line " + std::to_string(lineno) + ": image dims " +
                                    d.str() + " differ from first image " +
                                    ds.images.front().dims().str());
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
        ds.paths.push_back(p.string());
    }
    if (ds.class_names.empty()) fail(ErrCode::data, manifest_path + ": empty manifest");
    if (ds.images.empty()) fail(ErrCode::data, manifest_path + ": no samples");
    return ds;
}

std::string generate_synth(const std::string& dir, int classes, int per_class, int h, int w,
                           uint64_t seed) {
    if (classes < 2 || classes > 8)
        fail(ErrCode::invalid_argument, "generate_synth: classes must be in [2,8]");
    if (per_class < 1) fail(ErrCode::invalid_argument, "generate_synth: per_class must be >= 1");
    if (h < 8 || w < 8) fail(ErrCode::invalid_argument, "generate_synth: images must be >= 8x8");
    fs::create_directories(dir);
    SplitMix64 rng(seed);
    // Class identity = (orientation, stripe period); both survive horizontal flips.
    const auto period_of = [](int k) { return 4 + 4 * (k / 2); };
    std::string manifest = "{\"classes\":[";
    for (int k = 0; k < classes; ++k) {
        manifest += std::string(k ? "," : "") + "\"stripes_" + (k % 2 ? "v" : "h") +
                    std::to_string(period_of(k)) + "\"";
    }
    manifest += "]}\n";
    int idx = 0;
    for (int k = 0; k < classes; ++k) {
        const bool vertical = k % 2;
        const double period = period_of(k);
        for (int j = 0; j < per_class; ++j, ++idx) {
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            TensorF img({1, 3, h, w});
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x) {
                    const double coord = vertical ? static_cast<double>(x) : static_cast<double>(y);
                    const double noise = rng.uniform(-0.08, 0.08);
                    const double v = 0.5 + 0.35 * std::sin(2.0 * M_PI * coord / period + phase) +
                                     noise;
                    const auto pix = static_cast<float>(std::clamp(v, 0.0, 1.0));
                    for (int64_t c = 0; c < 3; ++c) img.at(0, c, y, x) = pix;
                }
            char name[32];
            std::snprintf(name, sizeof(name), "img_%04d.gltn", idx);
            write_tensor_file((fs::path(dir) / name).string(), img);
            manifest += std::string("{\"path\":\"") + name + "\",\"label\":" + std::to_string(k) +
                        "}\n";
        }
    }
    const std::string mpath = (fs::path(dir) / "manifest.jsonl").string();
    write_file(mpath, manifest);
    return mpath;
}

#define GLIM_INSTANTIATE(T)                                                                        \
    template void append_tensor(std::string&, const Tensor<T>&);                                   \
    template Tensor<T> parse_tensor(const std::string&, size_t&);                                  \
    template void write_tensor_file(const std::string&, const Tensor<T>&);                         \
    template Tensor<T> read_tensor_file(const std::string&);                                       \
    template void save_checkpoint(const ParamStore<T>&, const std::string&);                       \
    template void load_checkpoint(ParamStore<T>&, const std::string&);

GLIM_INSTANTIATE(float)
GLIM_INSTANTIATE(double)
#undef GLIM_INSTANTIATE

}  // namespace glim
