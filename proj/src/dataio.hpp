#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace glim {

uint32_t crc32_ieee(const void* data, size_t len);

// Tensor record: "GLTN" | u8 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim=4 |
// 4x u32 dims | payload. All integers and floats little-endian.
template <typename T>
void append_tensor(std::string& buf, const Tensor<T>& t);
template <typename T>
Tensor<T> parse_tensor(const std::string& buf, size_t& off);

template <typename T>
void write_tensor_file(const std::string& path, const Tensor<T>& t);
// Rejects wrong dtype and trailing bytes.
template <typename T>
Tensor<T> read_tensor_file(const std::string& path);
DType tensor_file_dtype(const std::string& path);

// Checkpoint: "GLCK" | u8 version=1 | u32 entry count |
// entries { u16 name length | name | tensor record } | u32 CRC32 of all prior
// bytes. Carries parameters and BN running stats, not optimizer state.
template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::string& path);
// The store must already hold the exact same entry names/shapes (i.e. a model
// built from the matching config).
template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::string& path);

// Binary PPM (P6, maxval 255) -> (1,3,H,W) scaled to [0,1].
TensorF read_ppm(const std::string& path);
// (1,1,H,W) plane, min-max scaled to 0..255; a constant plane maps to mid-gray.
void write_pgm(const std::string& path, const TensorF& plane);

struct Dataset {
    std::vector<std::string> class_names;
    std::vector<TensorF> images;  // each (1,3,H,W), identical dims
    std::vector<int> labels;
    std::vector<std::string> paths;
};

// JSON lines: {"classes":[...]} header, then {"path":..., "label":...} rows.
// Paths resolve relative to the manifest. Accepts .gltn and .ppm images.
Dataset load_manifest(const std::string& manifest_path);

// Class-dependent stripe gratings (orientation and period) with per-sample
// phase jitter and pixel noise. Writes .gltn images plus manifest.jsonl into
// dir and returns the manifest path.
std::string generate_synth(const std::string& dir, int classes, int per_class, int h, int w,
                           uint64_t seed);

}  // namespace glim
