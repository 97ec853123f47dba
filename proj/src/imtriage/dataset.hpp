#pragma once

#include "imtriage/episodes.hpp"
#include "imtriage/features.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace imtriage {

struct IngestReport {
    LabeledFeatures data;
    std::size_t skipped = 0; // unreadable files
    std::vector<std::filesystem::path> files; // accepted files, ingestion order
};

/// Every directory under `root` that directly holds PNG/JPEG files is a class,
/// named by its path relative to `root` (so alphabet/character layouts work).
/// Classes and files are visited in lexicographic order.
IngestReport ingest_dataset(const std::filesystem::path& root, const ExtractorSpec& extractor = {});

} // namespace imtriage
