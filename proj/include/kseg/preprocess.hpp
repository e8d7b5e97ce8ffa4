#pragma once

#include <random>
#include <set>

#include "kseg/volume.hpp"

namespace kseg {

// Intensity window applied before training/inference: HU clipped to
// [-200, 400], then mapped affinely onto [-1, 1] via (x - 100) / 300.
constexpr float kHuClipLow = -200.f;
constexpr float kHuClipHigh = 400.f;

// Returns the normalized copy; throws ArgumentError if already normalized
// so the window cannot be applied twice.
CtVolume clip_and_normalize(const CtVolume& vol);

enum class Interpolation { trilinear, nearest };

// Resamples onto target_shape with half-pixel-center coordinate mapping;
// an axis whose extent is unchanged maps onto itself exactly. Spacing is
// rescaled by the shape ratio so physical extent is preserved.
CtVolume resample_volume(const CtVolume& vol, const Index3& target_shape,
                         Interpolation interpolation);
LabelMask resample_mask(const LabelMask& mask, const Index3& target_shape);

// Tight bounding box of all voxels whose label is in foreground_labels,
// dilated by margin_voxels per side and clamped to the volume. Throws
// NoKidneyError when nothing is found.
RoiBox compute_roi(const LabelMask& mask, const std::set<std::uint8_t>& foreground_labels,
                   long margin_voxels);

CtVolume crop_roi(const CtVolume& vol, const RoiBox& box);
LabelMask crop_roi(const LabelMask& mask, const RoiBox& box);

// Inverse of crop_roi: writes `part` into `whole` at the box offset.
void paste_roi(CtVolume& whole, const CtVolume& part, const RoiBox& box);
void paste_roi(LabelMask& whole, const LabelMask& part, const RoiBox& box);

// Training-time cube extraction: keeps the full in-plane extent and picks a
// z window of `depth` slices. Windows containing foreground are preferred
// with probability 0.9. Volumes shorter than `depth` are padded
// symmetrically (-1 in the image, 0 in the mask).
std::pair<CtVolume, LabelMask> sample_z_cube(const CtVolume& vol, const LabelMask& mask,
                                             long depth, std::mt19937_64& rng);

struct AugmentConfig {
    std::pair<double, double> scale_range{0.6, 1.3};        // isotropic zoom factor
    std::pair<double, double> photometric_range{0.6, 1.5};  // brightness/contrast/gamma
    double elastic_prob = 0.5;
    std::pair<double, double> elastic_sigma{3.0, 5.0};
    std::pair<double, double> elastic_magnitude{100.0, 200.0};
    std::uint64_t seed = 0;

    void validate() const;
    bool is_identity() const;
};

// Order: zoom-crop, brightness, contrast, gamma, optional elastic warp,
// final clamp of the image to [-1, 1]. Shapes are never changed and mask
// values stay in {0..3}.
std::pair<CtVolume, LabelMask> augment(const CtVolume& vol, const LabelMask& mask,
                                       const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace kseg
