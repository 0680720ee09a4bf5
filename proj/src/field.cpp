#include "xseg/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace xseg {

size_t Mask2D::count() const {
    return size_t(std::accumulate(data.begin(), data.end(), uint64_t(0)));
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    buf.append(b, 4);
}

void put_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    std::string bytes;
    size_t pos = 0;
    std::string path;

    explicit Reader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open file: " + p);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void expect_magic(const char* magic) {
        if (bytes.size() < pos + 4 || std::memcmp(bytes.data() + pos, magic, 4) != 0)
            throw FormatError(path + ": bad magic, expected " + magic, pos);
        pos += 4;
    }

    uint32_t u32() {
        if (bytes.size() < pos + 4) throw FormatError(path + ": truncated header", pos);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }

    void read_floats(std::vector<float>& out, size_t n) {
        if (bytes.size() < pos + 4 * n)
            throw FormatError(path + ": payload size mismatch, need " + std::to_string(4 * n) +
                                  " bytes, have " + std::to_string(bytes.size() - pos),
                              pos);
        out.resize(n);
        for (size_t i = 0; i < n; ++i) {
            uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= uint32_t(uint8_t(bytes[pos + k])) << (8 * k);
            std::memcpy(&out[i], &bits, 4);
            pos += 4;
        }
    }

    void expect_end() {
        if (pos != bytes.size())
            throw FormatError(path + ": trailing bytes after payload", pos);
    }
};

void write_bytes(const std::string& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void check_finite(const std::vector<float>& v, const std::string& path) {
    for (float x : v)
        if (!std::isfinite(x)) throw std::runtime_error(path + ": non-finite value in field");
}

Mask2D field_to_mask(const Field2D& f, const std::string& path) {
    Mask2D m(f.height, f.width);
    for (size_t i = 0; i < f.data.size(); ++i) {
        if (f.data[i] == 0.0f)
            m.data[i] = 0;
        else if (f.data[i] == 1.0f)
            m.data[i] = 1;
        else
            throw std::runtime_error(path + ": mask value not in {0,1}: " + std::to_string(f.data[i]));
    }
    return m;
}

Field2D mask_to_field(const Mask2D& m) {
    Field2D f(m.height, m.width);
    for (size_t i = 0; i < m.data.size(); ++i) f.data[i] = m.data[i] ? 1.0f : 0.0f;
    return f;
}

}  // namespace

Field2D read_field(const std::string& path) {
    Reader r(path);
    r.expect_magic("F2D1");
    uint32_t h = r.u32(), w = r.u32();
    Field2D f;
    f.height = int(h);
    f.width = int(w);
    r.read_floats(f.data, size_t(h) * size_t(w));
    r.expect_end();
    check_finite(f.data, path);
    return f;
}

void write_field(const Field2D& f, const std::string& path) {
    if (f.data.size() != size_t(f.height) * size_t(f.width))
        throw std::invalid_argument("field data length does not match dimensions");
    check_finite(f.data, path);
    std::string buf;
    buf.reserve(12 + 4 * f.data.size());
    buf.append("F2D1", 4);
    put_u32(buf, uint32_t(f.height));
    put_u32(buf, uint32_t(f.width));
    for (float v : f.data) put_f32(buf, v);
    write_bytes(path, buf);
}

FieldStack read_field_stack(const std::string& path) {
    Reader r(path);
    r.expect_magic("F3D1");
    uint32_t d = r.u32(), h = r.u32(), w = r.u32();
    if (d == 0) throw FormatError(path + ": stack depth must be >= 1", 4);
    FieldStack s;
    for (uint32_t k = 0; k < d; ++k) {
        Field2D f;
        f.height = int(h);
        f.width = int(w);
        r.read_floats(f.data, size_t(h) * size_t(w));
        check_finite(f.data, path);
        s.slices.push_back(std::move(f));
    }
    r.expect_end();
    return s;
}

void write_field_stack(const FieldStack& s, const std::string& path) {
    if (s.slices.empty()) throw std::invalid_argument("stack depth must be >= 1");
    int h = s.slices[0].height, w = s.slices[0].width;
    std::string buf;
    buf.append("F3D1", 4);
    put_u32(buf, uint32_t(s.slices.size()));
    put_u32(buf, uint32_t(h));
    put_u32(buf, uint32_t(w));
    for (const Field2D& f : s.slices) {
        if (f.height != h || f.width != w)
            throw std::invalid_argument("stack slices must share (H, W)");
        check_finite(f.data, path);
        for (float v : f.data) put_f32(buf, v);
    }
    write_bytes(path, buf);
}

Mask2D read_mask(const std::string& path) { return field_to_mask(read_field(path), path); }

void write_mask(const Mask2D& m, const std::string& path) { write_field(mask_to_field(m), path); }

MaskStack read_mask_stack(const std::string& path) {
    FieldStack fs = read_field_stack(path);
    MaskStack ms;
    for (const Field2D& f : fs.slices) ms.slices.push_back(field_to_mask(f, path));
    return ms;
}

void write_mask_stack(const MaskStack& s, const std::string& path) {
    FieldStack fs;
    for (const Mask2D& m : s.slices) fs.slices.push_back(mask_to_field(m));
    write_field_stack(fs, path);
}

void write_pgm(const Field2D& f, const std::string& path, float lo, float hi) {
    char header[64];
    int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", f.width, f.height);
    std::string buf(header, size_t(n));
    float span = (hi > lo) ? (hi - lo) : 1.0f;
    for (float v : f.data) {
        float t = (v - lo) / span;
        t = std::clamp(t, 0.0f, 1.0f);
        buf.push_back(char(uint8_t(std::lround(t * 255.0f))));
    }
    write_bytes(path, buf);
}

void write_pgm(const Mask2D& m, const std::string& path) {
    char header[64];
    int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", m.width, m.height);
    std::string buf(header, size_t(n));
    for (uint8_t v : m.data) buf.push_back(char(v ? 255 : 0));
    write_bytes(path, buf);
}

Mask2D read_pgm_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError(path + ": not a P5 PGM", 0);
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw FormatError(path + ": unsupported PGM dimensions or maxval", size_t(in.tellg()));
    in.get();  // single whitespace after header
    Mask2D m(h, w);
    std::vector<char> raw(size_t(h) * size_t(w));
    in.read(raw.data(), std::streamsize(raw.size()));
    if (!in) throw FormatError(path + ": truncated PGM payload", size_t(in.gcount()));
    for (size_t i = 0; i < raw.size(); ++i) m.data[i] = uint8_t(raw[i]) >= 128 ? 1 : 0;
    return m;
}

void write_ppm_overlay(const Field2D& base, const Field2D& heat, const std::string& path) {
    if (base.height != heat.height || base.width != heat.width)
        throw std::invalid_argument("overlay shapes differ");
    float peak = 0.0f;
    for (float v : heat.data) peak = std::max(peak, v);
    if (peak <= 0.0f) peak = 1.0f;
    char header[64];
    int n = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", base.width, base.height);
    std::string buf(header, size_t(n));
    for (size_t i = 0; i < base.data.size(); ++i) {
        float g = std::clamp(base.data[i], 0.0f, 1.0f);
        float t = std::clamp(heat.data[i] / peak, 0.0f, 1.0f);
        // black-body style ramp: gray -> red -> yellow
        float r = g + t * (1.0f - g);
        float gr = g + std::max(0.0f, t - 0.5f) * 2.0f * (1.0f - g);
        float b = g * (1.0f - t);
        buf.push_back(char(uint8_t(std::lround(std::clamp(r, 0.0f, 1.0f) * 255.0f))));
        buf.push_back(char(uint8_t(std::lround(std::clamp(gr, 0.0f, 1.0f) * 255.0f))));
        buf.push_back(char(uint8_t(std::lround(std::clamp(b, 0.0f, 1.0f) * 255.0f))));
    }
    write_bytes(path, buf);
}

}  // namespace xseg
