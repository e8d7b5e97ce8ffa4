#include "kseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace kseg {
namespace {

// Half-pixel-center mapping: source coordinate of output index i when an
// axis goes from src extent S to dst extent D. Exactly the identity when
// S == D.
inline double src_coord(long i, long src_len, long dst_len) {
    return (static_cast<double>(i) + 0.5) * (static_cast<double>(src_len) / dst_len) - 0.5;
}

inline long clamp_index(long i, long len) {
    return std::clamp(i, 0L, len - 1);
}

// Trilinear sample with border replication. Pure coordinate version used by
// both resampling and elastic warping.
float sample_trilinear(const std::vector<float>& v, const Index3& s, double z, double y,
                       double x) {
    long z0 = static_cast<long>(std::floor(z)), y0 = static_cast<long>(std::floor(y)),
         x0 = static_cast<long>(std::floor(x));
    double wz = z - z0, wy = y - y0, wx = x - x0;
    long z1 = clamp_index(z0 + 1, s[0]), y1 = clamp_index(y0 + 1, s[1]),
         x1 = clamp_index(x0 + 1, s[2]);
    z0 = clamp_index(z0, s[0]);
    y0 = clamp_index(y0, s[1]);
    x0 = clamp_index(x0, s[2]);
    auto at = [&](long zz, long yy, long xx) -> double {
        return v[(zz * s[1] + yy) * s[2] + xx];
    };
    double c00 = at(z0, y0, x0) * (1 - wx) + at(z0, y0, x1) * wx;
    double c01 = at(z0, y1, x0) * (1 - wx) + at(z0, y1, x1) * wx;
    double c10 = at(z1, y0, x0) * (1 - wx) + at(z1, y0, x1) * wx;
    double c11 = at(z1, y1, x0) * (1 - wx) + at(z1, y1, x1) * wx;
    double c0 = c00 * (1 - wy) + c01 * wy;
    double c1 = c10 * (1 - wy) + c11 * wy;
    return static_cast<float>(c0 * (1 - wz) + c1 * wz);
}

inline long nearest_index(double c, long len) {
    return clamp_index(static_cast<long>(std::lround(c)), len);
}

template <class T>
std::vector<T> resample_grid(const std::vector<T>& src, const Index3& ss, const Index3& ds,
                             bool trilinear) {
    std::vector<T> dst(static_cast<size_t>(volume_of(ds)));
#pragma omp parallel for schedule(static)
    for (long z = 0; z < ds[0]; ++z) {
        double sz = src_coord(z, ss[0], ds[0]);
        for (long y = 0; y < ds[1]; ++y) {
            double sy = src_coord(y, ss[1], ds[1]);
            for (long x = 0; x < ds[2]; ++x) {
                double sx = src_coord(x, ss[2], ds[2]);
                T& out = dst[(z * ds[1] + y) * ds[2] + x];
                if (trilinear) {
                    if constexpr (std::is_same_v<T, float>)
                        out = sample_trilinear(src, ss, sz, sy, sx);
                } else {
                    long iz = nearest_index(sz, ss[0]), iy = nearest_index(sy, ss[1]),
                         ix = nearest_index(sx, ss[2]);
                    out = src[(iz * ss[1] + iy) * ss[2] + ix];
                }
            }
        }
    }
    return dst;
}

Vec3 rescaled_spacing(const Vec3& spacing, const Index3& src, const Index3& dst) {
    return {spacing[0] * static_cast<double>(src[0]) / dst[0],
            spacing[1] * static_cast<double>(src[1]) / dst[1],
            spacing[2] * static_cast<double>(src[2]) / dst[2]};
}

void check_target(const Index3& t) {
    for (int a = 0; a < 3; ++a)
        if (t[a] < 1) throw ArgumentError("resample target shape components must be >= 1");
}

}  // namespace

CtVolume clip_and_normalize(const CtVolume& vol) {
    if (vol.normalized)
        throw ArgumentError("clip_and_normalize: volume is already normalized");
    CtVolume out;
    out.geom = vol.geom;
    out.normalized = true;
    out.voxels.resize(vol.voxels.size());
    const float mid = 0.5f * (kHuClipLow + kHuClipHigh);       // 100
    const float half = 0.5f * (kHuClipHigh - kHuClipLow);      // 300
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(vol.voxels.size()); ++i) {
        float x = std::clamp(vol.voxels[i], kHuClipLow, kHuClipHigh);
        out.voxels[i] = (x - mid) / half;
    }
    return out;
}

CtVolume resample_volume(const CtVolume& vol, const Index3& target_shape,
                         Interpolation interpolation) {
    check_target(target_shape);
    CtVolume out;
    out.geom.shape = target_shape;
    out.geom.spacing = rescaled_spacing(vol.geom.spacing, vol.shape(), target_shape);
    out.geom.origin = vol.geom.origin;
    out.normalized = vol.normalized;
    out.voxels = resample_grid(vol.voxels, vol.shape(), target_shape,
                               interpolation == Interpolation::trilinear);
    return out;
}

LabelMask resample_mask(const LabelMask& mask, const Index3& target_shape) {
    check_target(target_shape);
    LabelMask out;
    out.geom.shape = target_shape;
    out.geom.spacing = rescaled_spacing(mask.geom.spacing, mask.shape(), target_shape);
    out.geom.origin = mask.geom.origin;
    out.labels = resample_grid(mask.labels, mask.shape(), target_shape, false);
    return out;
}

RoiBox compute_roi(const LabelMask& mask, const std::set<std::uint8_t>& foreground_labels,
                   long margin_voxels) {
    const Index3& s = mask.shape();
    RoiBox box{s[0], -1, s[1], -1, s[2], -1};
    bool found = false;
    for (long z = 0; z < s[0]; ++z)
        for (long y = 0; y < s[1]; ++y)
            for (long x = 0; x < s[2]; ++x) {
                if (!foreground_labels.count(mask.at(z, y, x))) continue;
                found = true;
                box.z0 = std::min(box.z0, z);
                box.z1 = std::max(box.z1, z);
                box.y0 = std::min(box.y0, y);
                box.y1 = std::max(box.y1, y);
                box.x0 = std::min(box.x0, x);
                box.x1 = std::max(box.x1, x);
            }
    if (!found) throw NoKidneyError("compute_roi: no foreground voxels");
    box.z0 = std::max(0L, box.z0 - margin_voxels);
    box.y0 = std::max(0L, box.y0 - margin_voxels);
    box.x0 = std::max(0L, box.x0 - margin_voxels);
    box.z1 = std::min(s[0], box.z1 + 1 + margin_voxels);
    box.y1 = std::min(s[1], box.y1 + 1 + margin_voxels);
    box.x1 = std::min(s[2], box.x1 + 1 + margin_voxels);
    return box;
}

namespace {

template <class T>
std::vector<T> crop_grid(const std::vector<T>& src, const Index3& s, const RoiBox& box) {
    Index3 e = box.extents();
    std::vector<T> dst(static_cast<size_t>(volume_of(e)));
    for (long z = 0; z < e[0]; ++z)
        for (long y = 0; y < e[1]; ++y) {
            const T* row = &src[((box.z0 + z) * s[1] + box.y0 + y) * s[2] + box.x0];
            std::copy(row, row + e[2], &dst[(z * e[1] + y) * e[2]]);
        }
    return dst;
}

template <class T>
void paste_grid(std::vector<T>& dst, const Index3& s, const std::vector<T>& part,
                const RoiBox& box) {
    Index3 e = box.extents();
    for (long z = 0; z < e[0]; ++z)
        for (long y = 0; y < e[1]; ++y) {
            const T* row = &part[(z * e[1] + y) * e[2]];
            std::copy(row, row + e[2], &dst[((box.z0 + z) * s[1] + box.y0 + y) * s[2] + box.x0]);
        }
}

GridGeometry cropped_geometry(const GridGeometry& g, const RoiBox& box) {
    GridGeometry out = g;
    out.shape = box.extents();
    out.origin = {g.origin[0] + box.z0 * g.spacing[0], g.origin[1] + box.y0 * g.spacing[1],
                  g.origin[2] + box.x0 * g.spacing[2]};
    return out;
}

void check_box(const RoiBox& box, const Index3& shape, const char* what) {
    if (!box.valid_within(shape)) throw ArgumentError(std::string(what) + ": box out of bounds");
}

}  // namespace

CtVolume crop_roi(const CtVolume& vol, const RoiBox& box) {
    check_box(box, vol.shape(), "crop_roi");
    CtVolume out;
    out.geom = cropped_geometry(vol.geom, box);
    out.normalized = vol.normalized;
    out.voxels = crop_grid(vol.voxels, vol.shape(), box);
    return out;
}

LabelMask crop_roi(const LabelMask& mask, const RoiBox& box) {
    check_box(box, mask.shape(), "crop_roi");
    LabelMask out;
    out.geom = cropped_geometry(mask.geom, box);
    out.labels = crop_grid(mask.labels, mask.shape(), box);
    return out;
}

void paste_roi(CtVolume& whole, const CtVolume& part, const RoiBox& box) {
    check_box(box, whole.shape(), "paste_roi");
    if (part.shape() != box.extents()) throw ArgumentError("paste_roi: part does not fit box");
    paste_grid(whole.voxels, whole.shape(), part.voxels, box);
}

void paste_roi(LabelMask& whole, const LabelMask& part, const RoiBox& box) {
    check_box(box, whole.shape(), "paste_roi");
    if (part.shape() != box.extents()) throw ArgumentError("paste_roi: part does not fit box");
    paste_grid(whole.labels, whole.shape(), part.labels, box);
}

namespace {

constexpr float kImagePad = -1.f;  // normalized air level
constexpr double kForegroundWindowProb = 0.9;

template <class T>
std::vector<T> pad_z_symmetric(const std::vector<T>& src, const Index3& s, long depth, T fill) {
    long before = (depth - s[0]) / 2;
    std::vector<T> dst(static_cast<size_t>(depth * s[1] * s[2]), fill);
    std::copy(src.begin(), src.end(), dst.begin() + before * s[1] * s[2]);
    return dst;
}

}  // namespace

std::pair<CtVolume, LabelMask> sample_z_cube(const CtVolume& vol, const LabelMask& mask,
                                             long depth, std::mt19937_64& rng) {
    if (vol.shape() != mask.shape()) throw AlignmentError("sample_z_cube: shape mismatch");
    if (depth < 1) throw ArgumentError("sample_z_cube: depth must be >= 1");
    const Index3& s = vol.shape();

    if (s[0] < depth) {
        CtVolume v;
        v.geom = vol.geom;
        v.geom.shape[0] = depth;
        v.normalized = vol.normalized;
        v.voxels = pad_z_symmetric(vol.voxels, s, depth, kImagePad);
        LabelMask m;
        m.geom = v.geom;
        m.labels = pad_z_symmetric(mask.labels, s, depth, std::uint8_t{0});
        return {std::move(v), std::move(m)};
    }

    // Foreground z extent; used to bias the window choice toward slices
    // that actually contain labels.
    long fg_lo = -1, fg_hi = -1;
    const long plane = s[1] * s[2];
    for (long z = 0; z < s[0]; ++z) {
        const std::uint8_t* p = &mask.labels[z * plane];
        bool any = std::any_of(p, p + plane, [](std::uint8_t l) { return l > 0; });
        if (any) {
            if (fg_lo < 0) fg_lo = z;
            fg_hi = z;
        }
    }

    const long max_offset = s[0] - depth;
    long offset = 0;
    if (max_offset > 0) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (fg_lo >= 0 && coin(rng) < kForegroundWindowProb) {
            // Offsets whose window [o, o+depth) intersects [fg_lo, fg_hi].
            long lo = std::max(0L, fg_lo - depth + 1);
            long hi = std::min(max_offset, fg_hi);
            std::uniform_int_distribution<long> pick(lo, hi);
            offset = pick(rng);
        } else {
            std::uniform_int_distribution<long> pick(0, max_offset);
            offset = pick(rng);
        }
    }

    RoiBox window{offset, offset + depth, 0, s[1], 0, s[2]};
    return {crop_roi(vol, window), crop_roi(mask, window)};
}

void AugmentConfig::validate() const {
    auto check_range = [](const std::pair<double, double>& r, const char* name) {
        if (!(r.first > 0.0) || r.first > r.second)
            throw ArgumentError(std::string("augment config: bad range for ") + name);
    };
    check_range(scale_range, "scale_range");
    check_range(photometric_range, "photometric_range");
    check_range(elastic_sigma, "elastic_sigma");
    check_range(elastic_magnitude, "elastic_magnitude");
    if (elastic_prob < 0.0 || elastic_prob > 1.0)
        throw ArgumentError("augment config: elastic_prob outside [0,1]");
}

bool AugmentConfig::is_identity() const {
    return scale_range == std::pair<double, double>{1.0, 1.0} &&
           photometric_range == std::pair<double, double>{1.0, 1.0} && elastic_prob == 0.0;
}

namespace {

// Separable Gaussian blur along each axis, used to smooth the elastic
// displacement noise fields.
void gaussian_blur_inplace(std::vector<float>& f, const Index3& s, double sigma) {
    long radius = std::max(1L, static_cast<long>(std::lround(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(w);
        sum += w;
    }
    for (float& w : kernel) w = static_cast<float>(w / sum);

    std::vector<float> tmp(f.size());
    const long nz = s[0], ny = s[1], nx = s[2];
    auto idx = [&](long z, long y, long x) { return (z * ny + y) * nx + x; };

    // x axis
#pragma omp parallel for schedule(static)
    for (long z = 0; z < nz; ++z)
        for (long y = 0; y < ny; ++y)
            for (long x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (long k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * f[idx(z, y, clamp_index(x + k, nx))];
                tmp[idx(z, y, x)] = static_cast<float>(acc);
            }
    f.swap(tmp);
    // y axis
#pragma omp parallel for schedule(static)
    for (long z = 0; z < nz; ++z)
        for (long y = 0; y < ny; ++y)
            for (long x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (long k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * f[idx(z, clamp_index(y + k, ny), x)];
                tmp[idx(z, y, x)] = static_cast<float>(acc);
            }
    f.swap(tmp);
    // z axis
#pragma omp parallel for schedule(static)
    for (long z = 0; z < nz; ++z)
        for (long y = 0; y < ny; ++y)
            for (long x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (long k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * f[idx(clamp_index(z + k, nz), y, x)];
                tmp[idx(z, y, x)] = static_cast<float>(acc);
            }
    f.swap(tmp);
}

}  // namespace

std::pair<CtVolume, LabelMask> augment(const CtVolume& vol, const LabelMask& mask,
                                       const AugmentConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    if (!vol.normalized) throw ArgumentError("augment: image must be normalized");
    if (vol.shape() != mask.shape()) throw AlignmentError("augment: shape mismatch");

    const Index3 s = vol.shape();
    const long nz = s[0], ny = s[1], nx = s[2];
    const long n = volume_of(s);

    CtVolume img = vol;
    LabelMask lab = mask;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const std::pair<double, double>& r) {
        return r.first + (r.second - r.first) * unit(rng);
    };

    // Zoom-crop: sample a window of size shape/scale at a random position
    // (centered jitter when the window exceeds the volume) and resample it
    // back to the original shape. scale > 1 magnifies.
    {
        double scale = draw(cfg.scale_range);
        if (std::abs(scale - 1.0) > 1e-12) {
            std::array<double, 3> win, off;
            for (int a = 0; a < 3; ++a) {
                win[a] = static_cast<double>(s[a]) / scale;
                double lo = std::min(0.0, s[a] - win[a]);
                double hi = std::max(0.0, s[a] - win[a]);
                off[a] = lo + (hi - lo) * unit(rng);
            }
            std::vector<float> new_img(n);
            std::vector<std::uint8_t> new_lab(n);
#pragma omp parallel for schedule(static)
            for (long z = 0; z < nz; ++z)
                for (long y = 0; y < ny; ++y)
                    for (long x = 0; x < nx; ++x) {
                        double cz = off[0] + (z + 0.5) * win[0] / nz - 0.5;
                        double cy = off[1] + (y + 0.5) * win[1] / ny - 0.5;
                        double cx = off[2] + (x + 0.5) * win[2] / nx - 0.5;
                        long i = (z * ny + y) * nx + x;
                        bool inside = cz >= -0.5 && cz <= nz - 0.5 && cy >= -0.5 &&
                                      cy <= ny - 0.5 && cx >= -0.5 && cx <= nx - 0.5;
                        if (inside) {
                            new_img[i] = sample_trilinear(img.voxels, s, cz, cy, cx);
                            long iz = nearest_index(cz, nz), iy = nearest_index(cy, ny),
                                 ix = nearest_index(cx, nx);
                            new_lab[i] = lab.labels[(iz * ny + iy) * nx + ix];
                        } else {
                            new_img[i] = kImagePad;
                            new_lab[i] = 0;
                        }
                    }
            img.voxels.swap(new_img);
            lab.labels.swap(new_lab);
        }
    }

    // Photometric chain: multiplicative brightness, contrast about the
    // mean, gamma on the [0,1]-remapped range.
    {
        double fb = draw(cfg.photometric_range);
        double fc = draw(cfg.photometric_range);
        double fg = draw(cfg.photometric_range);

        double mean = 0.0;
        for (float x : img.voxels) mean += x;
        mean /= static_cast<double>(n);

        float lo = *std::min_element(img.voxels.begin(), img.voxels.end());
        float hi = *std::max_element(img.voxels.begin(), img.voxels.end());
        double span = static_cast<double>(hi) - lo;

#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) {
            double x = img.voxels[i];
            x *= fb;
            double m = mean * fb;
            x = m + (x - m) * fc;
            if (span > 1e-12) {
                double lo2 = lo * fb, span2 = span * fb;  // range after brightness
                double u = (x - lo2) / span2;
                u = std::clamp(u, 0.0, 1.0);
                x = lo2 + span2 * std::pow(u, fg);
            }
            img.voxels[i] = static_cast<float>(x);
        }
    }

    // Elastic warp: smoothed noise displacement fields, one per axis, the
    // same field applied trilinearly to the image and nearest to the mask.
    if (cfg.elastic_prob > 0.0 && unit(rng) < cfg.elastic_prob) {
        double sigma = draw(cfg.elastic_sigma);
        double magnitude = draw(cfg.elastic_magnitude);

        std::array<std::vector<float>, 3> disp;
        std::uniform_real_distribution<float> noise(-1.f, 1.f);
        for (int a = 0; a < 3; ++a) {
            disp[a].resize(static_cast<size_t>(n));
            for (long i = 0; i < n; ++i) disp[a][i] = noise(rng);
            gaussian_blur_inplace(disp[a], s, sigma);
            // Rescale so the peak displacement is magnitude/50 voxels
            // (magnitude 100 -> 2 voxels, 200 -> 4).
            float maxabs = 1e-12f;
            for (float d : disp[a]) maxabs = std::max(maxabs, std::abs(d));
            float k = static_cast<float>(magnitude / 50.0) / maxabs;
            for (float& d : disp[a]) d *= k;
        }

        std::vector<float> new_img(n);
        std::vector<std::uint8_t> new_lab(n);
#pragma omp parallel for schedule(static)
        for (long z = 0; z < nz; ++z)
            for (long y = 0; y < ny; ++y)
                for (long x = 0; x < nx; ++x) {
                    long i = (z * ny + y) * nx + x;
                    double cz = z + disp[0][i], cy = y + disp[1][i], cx = x + disp[2][i];
                    new_img[i] = sample_trilinear(img.voxels, s, cz, cy, cx);
                    long iz = nearest_index(cz, nz), iy = nearest_index(cy, ny),
                         ix = nearest_index(cx, nx);
                    new_lab[i] = lab.labels[(iz * ny + iy) * nx + ix];
                }
        img.voxels.swap(new_img);
        lab.labels.swap(new_lab);
    }

    for (float& x : img.voxels) x = std::clamp(x, -1.f, 1.f);
    return {std::move(img), std::move(lab)};
}

}  // namespace kseg
