#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kseg/errors.hpp"

namespace kseg {

// One case directory: <root>/<case_id>/imaging.nii.gz plus an optional
// segmentation.nii.gz next to it.
struct CaseRecord {
    std::string case_id;
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> mask_path;
};

// Scans a dataset root laid out as case directories and returns the records
// sorted by case_id. Directories without an imaging file are skipped. An
// empty root yields an empty list.
std::vector<CaseRecord> build_manifest(const std::filesystem::path& root);

// One cross-validation split: indices into the originating manifest.
struct FoldSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
};

// Seeded case-level shuffling into k folds. Validation sets are disjoint,
// cover the manifest, and differ in size by at most one (the first
// len % k folds take the extra case). Throws ArgumentError when k < 2 or
// k exceeds the number of cases.
std::vector<FoldSplit> split_folds(const std::vector<CaseRecord>& manifest, int k,
                                   std::uint64_t seed);

// Fold-file round trip: {"folds":[{"train":[ids],"val":[ids]}]}.
void save_folds(const std::vector<FoldSplit>& folds, const std::filesystem::path& path);
std::vector<FoldSplit> load_folds(const std::filesystem::path& path);

}  // namespace kseg
