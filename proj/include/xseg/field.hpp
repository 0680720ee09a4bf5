#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace xseg {

// Raised on malformed container files; offset is the byte position of the
// first inconsistency.
struct FormatError : std::runtime_error {
    size_t offset;
    FormatError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

// Dense row-major 2-D scalar field, float32 storage. Immutable by convention
// once handed to another module.
struct Field2D {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Field2D() = default;
    Field2D(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(size_t(h) * size_t(w), fill) {}

    float& at(int i, int j) { return data[size_t(i) * width + j]; }
    float at(int i, int j) const { return data[size_t(i) * width + j]; }
    size_t size() const { return data.size(); }
};

// Binary field; every value is exactly 0 or 1.
struct Mask2D {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    Mask2D() = default;
    Mask2D(int h, int w, uint8_t fill = 0)
        : height(h), width(w), data(size_t(h) * size_t(w), fill) {}

    uint8_t& at(int i, int j) { return data[size_t(i) * width + j]; }
    uint8_t at(int i, int j) const { return data[size_t(i) * width + j]; }
    size_t size() const { return data.size(); }
    size_t count() const;  // number of 1-pixels
    bool empty_mask() const { return count() == 0; }
};

// Z-indexed stacks; slice order is anatomical order. All slices share (H, W).
struct FieldStack {
    std::vector<Field2D> slices;
    int depth() const { return int(slices.size()); }
};

struct MaskStack {
    std::vector<Mask2D> slices;
    int depth() const { return int(slices.size()); }
};

// ---------------------------------------------------------------------------
// F2D1 container: 4-byte ASCII magic "F2D1", u32-le height, u32-le width,
// then height*width float32-le, row-major. Round trips are bit-exact.
// F3D1 stacks: magic "F3D1", u32-le depth, then height/width and payload.
// Masks use the same container with values constrained to {0.0, 1.0}.
// ---------------------------------------------------------------------------
Field2D read_field(const std::string& path);
void write_field(const Field2D& f, const std::string& path);

FieldStack read_field_stack(const std::string& path);
void write_field_stack(const FieldStack& s, const std::string& path);

Mask2D read_mask(const std::string& path);
void write_mask(const Mask2D& m, const std::string& path);

MaskStack read_mask_stack(const std::string& path);
void write_mask_stack(const MaskStack& s, const std::string& path);

// PGM P5 (maxval 255) for visual inspection. Mask import thresholds at >=128.
// Field export maps [lo, hi] to [0, 255], clamping.
void write_pgm(const Field2D& f, const std::string& path, float lo = 0.0f, float hi = 1.0f);
void write_pgm(const Mask2D& m, const std::string& path);
Mask2D read_pgm_mask(const std::string& path);

// PPM overlay: grayscale base with a heat palette for the (max-normalized)
// overlay field.
void write_ppm_overlay(const Field2D& base, const Field2D& heat, const std::string& path);

}  // namespace xseg
