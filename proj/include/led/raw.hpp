#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "led/error.hpp"
#include "led/tensor.hpp"

namespace led {

/// Black/white level pair defining the ADU <-> normalized boundary.
/// Defaults describe a common 14-bit sensor layout.
struct SensorLevels {
    double black = 512.0;
    double white = 16383.0;

    double span() const { return white - black; }
    void validate() const {
        if (!(white > black) || black < 0.0) throw DataError("SensorLevels: need white > black >= 0");
    }
};

namespace raw {

/// RGGB plane [H,W] -> packed [4,H/2,W/2]; channel order (R,G1,G2,B) from
/// 2x2 tile offsets (0,0),(0,1),(1,0),(1,1).
template <class T>
Tensor<T> pack_bayer(const Tensor<T>& plane) {
    if (plane.ndim() != 2) throw ShapeError("pack_bayer: plane must be [H,W]");
    const int h = plane.dim(0), w = plane.dim(1);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("pack_bayer: odd dimensions");
    Tensor<T> out = Tensor<T>::zeros({4, h / 2, w / 2});
    const T* src = plane.data().data();
    T* dst = out.data().data();
    const std::int64_t cp = static_cast<std::int64_t>(h / 2) * (w / 2);
    for (int r = 0; r < h / 2; ++r) {
        for (int c = 0; c < w / 2; ++c) {
            const std::int64_t base = static_cast<std::int64_t>(2 * r) * w + 2 * c;
            const std::int64_t o = static_cast<std::int64_t>(r) * (w / 2) + c;
            dst[o] = src[base];
            dst[cp + o] = src[base + 1];
            dst[2 * cp + o] = src[base + w];
            dst[3 * cp + o] = src[base + w + 1];
        }
    }
    return out;
}

/// Exact inverse of pack_bayer.
template <class T>
Tensor<T> unpack_bayer(const Tensor<T>& packed) {
    if (packed.ndim() != 3 || packed.dim(0) != 4)
        throw ShapeError("unpack_bayer: input must be [4,H/2,W/2]");
    const int hh = packed.dim(1), hw = packed.dim(2);
    Tensor<T> out = Tensor<T>::zeros({2 * hh, 2 * hw});
    const T* src = packed.data().data();
    T* dst = out.data().data();
    const std::int64_t cp = static_cast<std::int64_t>(hh) * hw;
    const int w = 2 * hw;
    for (int r = 0; r < hh; ++r) {
        for (int c = 0; c < hw; ++c) {
            const std::int64_t base = static_cast<std::int64_t>(2 * r) * w + 2 * c;
            const std::int64_t o = static_cast<std::int64_t>(r) * hw + c;
            dst[base] = src[o];
            dst[base + 1] = src[cp + o];
            dst[base + w] = src[2 * cp + o];
            dst[base + w + 1] = src[3 * cp + o];
        }
    }
    return out;
}

/// Disjoint patch x patch tiles, row-major, remainder discarded.
template <class T>
std::vector<Tensor<T>> crop_patches(const Tensor<T>& plane, int patch) {
    if (plane.ndim() != 2) throw ShapeError("crop_patches: plane must be [H,W]");
    const int h = plane.dim(0), w = plane.dim(1);
    if (patch < 1 || patch > h || patch > w) throw ShapeError("crop_patches: patch exceeds frame");
    std::vector<Tensor<T>> out;
    const T* src = plane.data().data();
    for (int r = 0; r + patch <= h; r += patch) {
        for (int c = 0; c + patch <= w; c += patch) {
            Tensor<T> t = Tensor<T>::zeros({patch, patch});
            T* dst = t.data().data();
            for (int i = 0; i < patch; ++i) {
                std::copy_n(src + static_cast<std::int64_t>(r + i) * w + c, patch,
                            dst + static_cast<std::int64_t>(i) * patch);
            }
            out.push_back(std::move(t));
        }
    }
    return out;
}

/// (adu - black) / (white - black); no clamping.
template <class T>
Tensor<T> normalize(const Tensor<T>& adu, const SensorLevels& levels) {
    levels.validate();
    Tensor<T> out = Tensor<T>::zeros(adu.dims());
    const T* src = adu.data().data();
    T* dst = out.data().data();
    const double inv = 1.0 / levels.span();
    for (std::int64_t i = 0; i < adu.numel(); ++i)
        dst[i] = static_cast<T>((static_cast<double>(src[i]) - levels.black) * inv);
    return out;
}

template <class T>
Tensor<T> denormalize(const Tensor<T>& norm, const SensorLevels& levels) {
    levels.validate();
    Tensor<T> out = Tensor<T>::zeros(norm.dims());
    const T* src = norm.data().data();
    T* dst = out.data().data();
    for (std::int64_t i = 0; i < norm.numel(); ++i)
        dst[i] = static_cast<T>(static_cast<double>(src[i]) * levels.span() + levels.black);
    return out;
}

// ---------------------------------------------------------------------------
// Named-tensor container. Byte layout (all integers little-endian):
//   magic "LEDC" | u8 version=1 | u32 tensor count
//   per tensor (lexicographic name order):
//     u16 name length | name | u8 dtype (0=f32,1=f64) | u8 ndim | ndim x u32 dims
//     row-major payload
//   u32 metadata count
//   per pair (lexicographic key order): u16 key len | key | u16 value len | value
//   u64 FNV-1a checksum over all preceding bytes
// ---------------------------------------------------------------------------

struct TensorBlob {
    DType dtype = DType::f32;
    std::vector<int> dims;
    std::vector<std::byte> payload;

    std::int64_t numel() const { return shape_numel(dims); }

    template <class T>
    static TensorBlob from(const Tensor<T>& t);

    template <class T>
    Tensor<T> to() const;
};

struct Container {
    std::map<std::string, TensorBlob> tensors;
    std::map<std::string, std::string> meta;
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

std::uint64_t fnv1a64(const std::byte* data, std::size_t n);

// Atomic file helpers (write temp then rename).
void write_bytes_atomic(const std::string& path, const std::vector<std::byte>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

// Image payloads reuse the container: single tensor "image" plus level
// metadata. Planes are stored normalized.
struct Image {
    Tensor<float> plane;
    SensorLevels levels;
};

void write_image(const std::string& path, const Tensor<float>& plane, const SensorLevels& levels);
Image read_image(const std::string& path);

// ---------------------------------------------------------------------------
// Dataset manifest: UTF-8 JSON lines, one entry per line. Paths are resolved
// relative to the manifest location and checked at load.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string clean_path;
    std::optional<std::string> noisy_path;
    double ratio = 1.0;
    std::string camera_id;
    std::optional<double> k;        // synthetic provenance: overall system gain
    std::optional<double> sigma_tl; // synthetic provenance: read-noise std
    std::string scene_id;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// --- TensorBlob templates ---------------------------------------------------

template <class T>
TensorBlob TensorBlob::from(const Tensor<T>& t) {
    TensorBlob b;
    b.dtype = dtype_of<T>::value;
    b.dims = t.dims();
    b.payload.resize(t.data().size() * sizeof(T));
    std::memcpy(b.payload.data(), t.data().data(), b.payload.size());
    return b;
}

template <class T>
Tensor<T> TensorBlob::to() const {
    if (dtype != dtype_of<T>::value) throw DataError("TensorBlob: dtype mismatch");
    std::vector<T> data(static_cast<std::size_t>(numel()));
    if (payload.size() != data.size() * sizeof(T)) throw CorruptError("TensorBlob: payload size");
    std::memcpy(data.data(), payload.data(), payload.size());
    return Tensor<T>::from_data(dims, std::move(data));
}

} // namespace raw
} // namespace led
