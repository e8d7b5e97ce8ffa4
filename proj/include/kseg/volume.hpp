#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kseg/errors.hpp"

namespace kseg {

// All grids use (z, y, x) axis order. Memory is row-major with x varying
// fastest, which matches the on-disk voxel order of the files we read.
using Index3 = std::array<long, 3>;
using Vec3 = std::array<double, 3>;

inline long volume_of(const Index3& shape) {
    return shape[0] * shape[1] * shape[2];
}

struct GridGeometry {
    Index3 shape{0, 0, 0};       // (nz, ny, nx)
    Vec3 spacing{1.0, 1.0, 1.0}; // mm per voxel, (sz, sy, sx)
    Vec3 origin{0.0, 0.0, 0.0};  // mm position of voxel (0,0,0)

    long num_voxels() const { return volume_of(shape); }
    long index(long z, long y, long x) const {
        return (z * shape[1] + y) * shape[2] + x;
    }
    bool same_grid(const GridGeometry& o, double tol = 1e-5) const {
        if (shape != o.shape) return false;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(spacing[a] - o.spacing[a]) > tol) return false;
            if (std::abs(origin[a] - o.origin[a]) > tol) return false;
        }
        return true;
    }
    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (shape[a] < 1) throw ArgumentError("grid shape components must be >= 1");
            if (!(spacing[a] > 0.0)) throw ArgumentError("grid spacing components must be > 0");
        }
    }
};

// Scalar CT volume. Values are Hounsfield units until normalization maps
// them into [-1, 1] and sets the flag.
struct CtVolume {
    GridGeometry geom;
    std::vector<float> voxels;
    bool normalized = false;

    const Index3& shape() const { return geom.shape; }
    long num_voxels() const { return geom.num_voxels(); }
    float& at(long z, long y, long x) { return voxels[geom.index(z, y, x)]; }
    float at(long z, long y, long x) const { return voxels[geom.index(z, y, x)]; }
};

inline CtVolume make_volume(const Index3& shape, const Vec3& spacing = {1, 1, 1},
                            const Vec3& origin = {0, 0, 0}, float fill = 0.f) {
    CtVolume v;
    v.geom.shape = shape;
    v.geom.spacing = spacing;
    v.geom.origin = origin;
    v.geom.validate();
    v.voxels.assign(v.num_voxels(), fill);
    return v;
}

// Per-voxel class labels aligned to a CtVolume.
// 0 = background, 1 = kidney, 2 = tumor, 3 = cyst.
struct LabelMask {
    GridGeometry geom;
    std::vector<std::uint8_t> labels;

    static constexpr std::uint8_t kBackground = 0;
    static constexpr std::uint8_t kKidney = 1;
    static constexpr std::uint8_t kTumor = 2;
    static constexpr std::uint8_t kCyst = 3;
    static constexpr std::uint8_t kNumClasses = 4;

    const Index3& shape() const { return geom.shape; }
    long num_voxels() const { return geom.num_voxels(); }
    std::uint8_t& at(long z, long y, long x) { return labels[geom.index(z, y, x)]; }
    std::uint8_t at(long z, long y, long x) const { return labels[geom.index(z, y, x)]; }
};

inline LabelMask make_mask(const Index3& shape, const Vec3& spacing = {1, 1, 1},
                           const Vec3& origin = {0, 0, 0}, std::uint8_t fill = 0) {
    LabelMask m;
    m.geom.shape = shape;
    m.geom.spacing = spacing;
    m.geom.origin = origin;
    m.geom.validate();
    m.labels.assign(m.num_voxels(), fill);
    return m;
}

// Axis-aligned voxel box, half-open per axis: [z0,z1) x [y0,y1) x [x0,x1).
struct RoiBox {
    long z0 = 0, z1 = 0, y0 = 0, y1 = 0, x0 = 0, x1 = 0;

    Index3 extents() const { return {z1 - z0, y1 - y0, x1 - x0}; }
    long num_voxels() const { return (z1 - z0) * (y1 - y0) * (x1 - x0); }
    bool valid_within(const Index3& shape) const {
        return 0 <= z0 && z0 < z1 && z1 <= shape[0] &&
               0 <= y0 && y0 < y1 && y1 <= shape[1] &&
               0 <= x0 && x0 < x1 && x1 <= shape[2];
    }
};

inline bool operator==(const RoiBox& a, const RoiBox& b) {
    return a.z0 == b.z0 && a.z1 == b.z1 && a.y0 == b.y0 && a.y1 == b.y1 &&
           a.x0 == b.x0 && a.x1 == b.x1;
}

}  // namespace kseg
