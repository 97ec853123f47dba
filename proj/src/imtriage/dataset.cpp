#include "imtriage/dataset.hpp"

#include "imtriage/error.hpp"
#include "imtriage/image.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

namespace imtriage {

namespace fs = std::filesystem;

IngestReport ingest_dataset(const fs::path& root, const ExtractorSpec& extractor) {
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw Error(ErrorCode::NotFound, "dataset directory not found: " + root.string());

    std::map<std::string, std::vector<fs::path>> by_class;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied);
         it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file() || !is_image_file(it->path()))
            continue;
        const fs::path parent = it->path().parent_path();
        if (parent == root)
            continue; // loose files have no class
        by_class[fs::relative(parent, root).generic_string()].push_back(it->path());
    }

    IngestReport report;
    for (auto& [name, files] : by_class) {
        std::sort(files.begin(), files.end());
        std::vector<FeatureVector> feats;
        for (const auto& f : files) {
            try {
                feats.push_back(extract_features(load_image(f, f.filename().string()), extractor));
                report.files.push_back(f);
            } catch (const Error& e) {
                spdlog::warn("skipping {}: {}", f.string(), e.what());
                ++report.skipped;
            }
        }
        if (feats.empty())
            continue;
        report.data.class_names.push_back(name);
        report.data.classes.push_back(std::move(feats));
    }
    if (report.data.classes.empty())
        throw_invalid("dataset " + root.string() + " contains no class directories with images");
    return report;
}

} // namespace imtriage
