#include "kseg/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace kseg {

std::vector<CaseRecord> build_manifest(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("manifest root is not a directory: " + root.string());

    std::vector<CaseRecord> records;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        fs::path image = entry.path() / "imaging.nii.gz";
        if (!fs::exists(image)) {
            image = entry.path() / "imaging.nii";
            if (!fs::exists(image)) continue;
        }
        CaseRecord rec;
        rec.case_id = entry.path().filename().string();
        rec.image_path = image;
        for (const char* name : {"segmentation.nii.gz", "segmentation.nii"}) {
            fs::path mask = entry.path() / name;
            if (fs::exists(mask)) {
                rec.mask_path = mask;
                break;
            }
        }
        records.push_back(std::move(rec));
    }
    std::sort(records.begin(), records.end(),
              [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
    return records;
}

std::vector<FoldSplit> split_folds(const std::vector<CaseRecord>& manifest, int k,
                                   std::uint64_t seed) {
    const long n = static_cast<long>(manifest.size());
    if (k < 2) throw ArgumentError("split_folds: k must be >= 2");
    if (n < k) throw ArgumentError("split_folds: more folds than cases");

    std::vector<long> order(n);
    for (long i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // First n % k folds get one extra validation case.
    std::vector<FoldSplit> folds(k);
    long base = n / k, extra = n % k, pos = 0;
    for (int f = 0; f < k; ++f) {
        long take = base + (f < extra ? 1 : 0);
        std::vector<bool> in_val(n, false);
        for (long i = 0; i < take; ++i) in_val[order[pos + i]] = true;
        pos += take;
        for (long i = 0; i < n; ++i) {
            (in_val[i] ? folds[f].val_ids : folds[f].train_ids).push_back(manifest[i].case_id);
        }
    }
    return folds;
}

void save_folds(const std::vector<FoldSplit>& folds, const fs::path& path) {
    json doc;
    doc["folds"] = json::array();
    for (const auto& f : folds) doc["folds"].push_back({{"train", f.train_ids}, {"val", f.val_ids}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write folds file: " + path.string());
    out << doc.dump(2) << "\n";
}

std::vector<FoldSplit> load_folds(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read folds file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("bad folds file " + path.string() + ": " + e.what());
    }
    if (!doc.contains("folds") || !doc["folds"].is_array())
        throw FormatError("folds file missing \"folds\" array: " + path.string());
    std::vector<FoldSplit> folds;
    for (const auto& f : doc["folds"]) {
        FoldSplit split;
        split.train_ids = f.at("train").get<std::vector<std::string>>();
        split.val_ids = f.at("val").get<std::vector<std::string>>();
        folds.push_back(std::move(split));
    }
    return folds;
}

}  // namespace kseg
