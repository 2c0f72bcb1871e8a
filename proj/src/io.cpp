#include "scsa/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

#include "scsa/error.hpp"

namespace scsa {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'S', 'T'};

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

void put_u16le(std::ostream& os, std::uint16_t v) {
    os.put(static_cast<char>(v & 0xff));
    os.put(static_cast<char>((v >> 8) & 0xff));
}

void put_u32le(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64le(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint8_t get_u8(std::istream& is) {
    int c = is.get();
    if (c < 0) throw IoError("tensor load: unexpected end of stream");
    return static_cast<std::uint8_t>(c);
}

std::uint16_t get_u16le(std::istream& is) {
    std::uint16_t v = get_u8(is);
    v |= static_cast<std::uint16_t>(get_u8(is)) << 8;
    return v;
}

std::uint32_t get_u32le(std::istream& is) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(get_u8(is)) << (8 * i);
    return v;
}

std::uint64_t get_u64le(std::istream& is) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(get_u8(is)) << (8 * i);
    return v;
}

}  // namespace

void save_tensor(std::ostream& os, const Tensor& t) {
    os.write(kMagic, 4);
    put_u8(os, static_cast<std::uint8_t>(t.rank()));
    put_u8(os, static_cast<std::uint8_t>(DType::F64));
    for (std::size_t i = 0; i < t.rank(); ++i) put_u32le(os, static_cast<std::uint32_t>(t.shape[i]));
    for (double v : t.data) put_u64le(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw IoError("tensor save: write failed");
}

void save_tensor_f32(std::ostream& os, const TensorF& t) {
    os.write(kMagic, 4);
    put_u8(os, static_cast<std::uint8_t>(t.rank()));
    put_u8(os, static_cast<std::uint8_t>(DType::F32));
    for (std::size_t i = 0; i < t.rank(); ++i) put_u32le(os, static_cast<std::uint32_t>(t.shape[i]));
    for (float v : t.data) put_u32le(os, std::bit_cast<std::uint32_t>(v));
    if (!os) throw IoError("tensor save: write failed");
}

LoadedTensor load_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("tensor load: bad magic");
    const std::uint8_t rank = get_u8(is);
    if (rank < 1 || rank > 4) throw IoError("tensor load: rank out of range");
    const std::uint8_t dtype_code = get_u8(is);
    if (dtype_code > 1) throw IoError("tensor load: unknown dtype code");
    std::vector<std::size_t> extents(rank);
    for (auto& e : extents) e = get_u32le(is);
    Shape shape = [&] {
        switch (rank) {
            case 1: return Shape{extents[0]};
            case 2: return Shape{extents[0], extents[1]};
            case 3: return Shape{extents[0], extents[1], extents[2]};
            default: return Shape{extents[0], extents[1], extents[2], extents[3]};
        }
    }();
    LoadedTensor lt;
    lt.shape = shape;
    lt.stored_dtype = static_cast<DType>(dtype_code);
    lt.values = Tensor(shape);
    for (auto& v : lt.values.data) {
        if (lt.stored_dtype == DType::F64) {
            v = std::bit_cast<double>(get_u64le(is));
        } else {
            v = static_cast<double>(std::bit_cast<float>(get_u32le(is)));
        }
    }
    return lt;
}

void save_checkpoint(const std::string& path, const ParamStore& store) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint save: cannot open " + path);
    const auto params = store.ordered();
    const auto buffers = store.ordered_buffers();
    put_u32le(os, static_cast<std::uint32_t>(params.size() + buffers.size()));
    auto put_entry = [&](const std::string& name, const Tensor& t) {
        if (name.size() > 0xffff) throw IoError("checkpoint save: name too long");
        put_u16le(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        save_tensor(os, t);
    };
    for (const Parameter* p : params) put_entry(p->name, p->value);
    for (const auto& [name, buf] : buffers) put_entry(name, *buf);
    if (!os) throw IoError("checkpoint save: write failed");
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint load: cannot open " + path);
    const std::uint32_t count = get_u32le(is);
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = get_u16le(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw IoError("checkpoint load: truncated name");
        entries.push_back({std::move(name), load_tensor(is)});
    }
    return entries;
}

void restore_checkpoint(const std::string& path, ParamStore& store) {
    auto entries = load_checkpoint(path);
    std::size_t restored = 0;
    for (auto& e : entries) {
        Parameter* p = store.find(e.name);
        if (p) {
            if (p->value.shape != e.tensor.shape) {
                throw IoError("checkpoint restore: shape mismatch for " + e.name);
            }
            p->value = e.tensor.values;
            ++restored;
            continue;
        }
        Tensor* buf = store.find_buffer(e.name);
        if (!buf) throw IoError("checkpoint restore: unknown tensor " + e.name);
        if (buf->shape != e.tensor.shape) {
            throw IoError("checkpoint restore: shape mismatch for " + e.name);
        }
        *buf = e.tensor.values;
        ++restored;
    }
    if (restored != store.size() + store.ordered_buffers().size()) {
        throw IoError("checkpoint restore: file does not cover every parameter");
    }
}

}  // namespace scsa
