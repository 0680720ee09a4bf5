#include "xseg/serialize.hpp"

#include <cstring>
#include <fstream>

#include "xseg/field.hpp"

namespace xseg {

namespace {

void put_u32(std::string& buf, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    buf.append(b, 4);
}

uint64_t dim_product(const std::vector<uint32_t>& d) {
    uint64_t n = 1;
    for (uint32_t v : d) n *= v;
    return n;
}

}  // namespace

void write_blob(const std::string& path, const char magic[4],
                const std::vector<const Tensor*>& tensors,
                const std::vector<std::vector<uint32_t>>& dims) {
    if (tensors.size() != dims.size())
        throw std::invalid_argument("write_blob: tensor/dims count mismatch");
    std::string buf(magic, 4);
    put_u32(buf, uint32_t(tensors.size()));
    for (size_t t = 0; t < tensors.size(); ++t) {
        if (dim_product(dims[t]) != tensors[t]->size())
            throw std::invalid_argument("write_blob: dims do not match tensor size");
        put_u32(buf, uint32_t(dims[t].size()));
        for (uint32_t d : dims[t]) put_u32(buf, d);
        for (double v : tensors[t]->v) {
            float f = float(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(buf, bits);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void read_blob(const std::string& path, const char magic[4],
               const std::vector<Tensor*>& tensors,
               const std::vector<std::vector<uint32_t>>& dims) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    size_t pos = 0;
    auto u32 = [&]() {
        if (bytes.size() < pos + 4) throw FormatError(path + ": truncated", pos);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    };
    if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
        throw FormatError(path + ": bad magic, expected " + std::string(magic, 4), 0);
    pos = 4;
    uint32_t count = u32();
    if (count != tensors.size())
        throw FormatError(path + ": expected " + std::to_string(tensors.size()) + " tensors, file has " +
                              std::to_string(count),
                          4);
    for (size_t t = 0; t < tensors.size(); ++t) {
        uint32_t ndims = u32();
        if (ndims != dims[t].size())
            throw FormatError(path + ": tensor " + std::to_string(t) + " rank mismatch", pos - 4);
        for (uint32_t k = 0; k < ndims; ++k) {
            uint32_t d = u32();
            if (d != dims[t][k])
                throw FormatError(path + ": tensor " + std::to_string(t) + " dim mismatch", pos - 4);
        }
        for (size_t i = 0; i < tensors[t]->size(); ++i) {
            uint32_t bits = u32();
            float f;
            std::memcpy(&f, &bits, 4);
            tensors[t]->v[i] = double(f);
        }
    }
    if (pos != bytes.size()) throw FormatError(path + ": trailing bytes", pos);
}

}  // namespace xseg
