#pragma once

#include <filesystem>

#include "kseg/volume.hpp"

namespace kseg {

// Minimal NIfTI-1 reader/writer for 3D scalar volumes (.nii and .nii.gz).
// Spacing comes from pixdim, origin from the q-offset; orientation matrices
// beyond axis order are not interpreted. Little-endian files only.

// Reads a scalar 3D volume. Integer or float payloads are converted to
// float, applying scl_slope/scl_inter when set. Throws IoError on missing
// files and FormatError on non-3D or non-scalar data.
CtVolume load_volume(const std::filesystem::path& path);

// Reads an integer-typed mask and validates it against `reference`:
// shape must match (AlignmentError) and every value must be one of
// {0,1,2,3} (FormatError).
LabelMask load_mask(const std::filesystem::path& path, const CtVolume& reference);

// Reads a mask without a reference volume; values are still validated.
LabelMask load_mask(const std::filesystem::path& path);

// Writers. Masks are stored as uint8, volumes as float32. A volume saved
// with normalized=true is marked in the header notes so a later load
// restores the flag. Files ending in .gz are gzip-compressed.
void save_mask(const LabelMask& mask, const std::filesystem::path& path);
void save_volume(const CtVolume& vol, const std::filesystem::path& path);

}  // namespace kseg
