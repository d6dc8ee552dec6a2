#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "led/raw.hpp"

// Binary container IO. The format is normative and bit-exact: identical
// inputs produce identical files, and every read verifies the FNV-1a
// trailer before trusting the payload.

namespace led::raw {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container IO assumes a little-endian host");

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
    out.push_back(static_cast<std::byte>(v & 0xFF));
    out.push_back(static_cast<std::byte>((v >> 8) & 0xFF));
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

void put_bytes(std::vector<std::byte>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
}

struct Reader {
    const std::byte* p;
    std::size_t left;

    void need(std::size_t n) const {
        if (left < n) throw CorruptError("container: truncated");
    }
    std::uint8_t u8() {
        need(1);
        std::uint8_t v = std::to_integer<std::uint8_t>(*p);
        ++p;
        --left;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        std::memcpy(&v, p, 2);
        p += 2;
        left -= 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        std::memcpy(&v, p, 4);
        p += 4;
        left -= 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
    std::vector<std::byte> bytes(std::size_t n) {
        need(n);
        std::vector<std::byte> b(p, p + n);
        p += n;
        left -= n;
        return b;
    }
};

} // namespace

std::uint64_t fnv1a64(const std::byte* data, std::size_t n) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= std::to_integer<std::uint64_t>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

void write_bytes_atomic(const std::string& path, const std::vector<std::byte>& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    // unique temp in the same directory so rename stays atomic
    static std::atomic<std::uint64_t> counter{0};
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open for writing: " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) throw DataError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("rename failed: " + target.string() + ": " + ec.message());
    }
}

void write_text_atomic(const std::string& path, const std::string& text) {
    std::vector<std::byte> b(text.size());
    std::memcpy(b.data(), text.data(), text.size());
    write_bytes_atomic(path, b);
}

void write_container(const std::string& path, const Container& c) {
    std::vector<std::byte> out;
    put_bytes(out, "LEDC", 4);
    out.push_back(static_cast<std::byte>(1)); // version
    put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, blob] : c.tensors) { // std::map: lexicographic
        if (name.size() > 0xFFFF) throw DataError("container: tensor name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        put_bytes(out, name.data(), name.size());
        out.push_back(static_cast<std::byte>(blob.dtype));
        out.push_back(static_cast<std::byte>(blob.dims.size()));
        for (int d : blob.dims) {
            if (d < 1) throw DataError("container: invalid extent");
            put_u32(out, static_cast<std::uint32_t>(d));
        }
        const std::size_t esize = blob.dtype == DType::f32 ? 4 : 8;
        if (blob.payload.size() != static_cast<std::size_t>(blob.numel()) * esize)
            throw DataError("container: payload size does not match dims");
        put_bytes(out, blob.payload.data(), blob.payload.size());
    }
    put_u32(out, static_cast<std::uint32_t>(c.meta.size()));
    for (const auto& [k, v] : c.meta) {
        if (k.size() > 0xFFFF || v.size() > 0xFFFF) throw DataError("container: metadata too long");
        put_u16(out, static_cast<std::uint16_t>(k.size()));
        put_bytes(out, k.data(), k.size());
        put_u16(out, static_cast<std::uint16_t>(v.size()));
        put_bytes(out, v.data(), v.size());
    }
    put_u64(out, fnv1a64(out.data(), out.size()));
    write_bytes_atomic(path, out);
}

Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<std::byte> buf;
    {
        f.seekg(0, std::ios::end);
        const auto n = f.tellg();
        if (n < 0) throw DataError("cannot read: " + path);
        buf.resize(static_cast<std::size_t>(n));
        f.seekg(0);
        f.read(reinterpret_cast<char*>(buf.data()), n);
        if (!f) throw DataError("read failed: " + path);
    }
    if (buf.size() < 4 + 1 + 4 + 4 + 8) throw CorruptError("container: file too small");

    // checksum trailer first
    std::uint64_t stored = 0;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        throw CorruptError("container: checksum mismatch");

    Reader r{buf.data(), buf.size() - 8};
    if (r.str(4) != "LEDC") throw CorruptError("container: bad magic");
    if (r.u8() != 1) throw CorruptError("container: unsupported version");

    Container c;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u16());
        TensorBlob blob;
        const std::uint8_t dt = r.u8();
        if (dt > 1) throw CorruptError("container: unknown dtype");
        blob.dtype = static_cast<DType>(dt);
        const std::uint8_t nd = r.u8();
        if (nd == 0) throw CorruptError("container: zero-rank tensor");
        for (std::uint8_t d = 0; d < nd; ++d) {
            const std::uint32_t e = r.u32();
            if (e == 0) throw CorruptError("container: zero extent");
            blob.dims.push_back(static_cast<int>(e));
        }
        const std::size_t esize = blob.dtype == DType::f32 ? 4 : 8;
        blob.payload = r.bytes(static_cast<std::size_t>(blob.numel()) * esize);
        if (!c.tensors.emplace(name, std::move(blob)).second)
            throw CorruptError("container: duplicate tensor name");
    }
    const std::uint32_t mcount = r.u32();
    for (std::uint32_t i = 0; i < mcount; ++i) {
        std::string k = r.str(r.u16());
        std::string v = r.str(r.u16());
        c.meta.emplace(std::move(k), std::move(v));
    }
    if (r.left != 0) throw CorruptError("container: trailing bytes");
    return c;
}

void write_image(const std::string& path, const Tensor<float>& plane, const SensorLevels& levels) {
    levels.validate();
    Container c;
    c.tensors.emplace("image", TensorBlob::from(plane));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", levels.black);
    c.meta["black_level"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", levels.white);
    c.meta["white_level"] = buf;
    write_container(path, c);
}

Image read_image(const std::string& path) {
    Container c = read_container(path);
    auto it = c.tensors.find("image");
    if (it == c.tensors.end()) throw DataError("image container missing 'image': " + path);
    Image img;
    img.plane = it->second.to<float>();
    try {
        if (auto b = c.meta.find("black_level"); b != c.meta.end())
            img.levels.black = std::stod(b->second);
        if (auto w = c.meta.find("white_level"); w != c.meta.end())
            img.levels.white = std::stod(w->second);
    } catch (const std::exception&) {
        throw DataError("image container has malformed level metadata: " + path);
    }
    img.levels.validate();
    return img;
}

} // namespace led::raw
