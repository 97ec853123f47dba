#pragma once

#include "imtriage/features.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace imtriage {

class RelationModel;

/// Feature vectors grouped by class, classes in a fixed order.
struct LabeledFeatures {
    std::vector<std::string> class_names;
    std::vector<std::vector<FeatureVector>> classes;

    std::size_t dim() const noexcept { return classes.empty() || classes.front().empty() ? 0 : classes.front().front().size(); }
    std::size_t total() const noexcept;
};

/// Throws Precondition unless at least two classes hold two or more examples
/// and all vectors share one dimension.
void validate_for_episodes(const LabeledFeatures& dataset);

struct PairSample {
    std::size_t class_a = 0;
    std::size_t index_a = 0;
    std::size_t class_b = 0;
    std::size_t index_b = 0;
    int label = 0;
};

/// batch_size / 2 same-class pairs followed by batch_size / 2 cross-class pairs.
/// Positive pairs never reuse one element twice.
std::vector<PairSample> sample_episode(const LabeledFeatures& dataset, std::size_t batch_size, std::mt19937_64& rng);

struct EpisodeEvalConfig {
    int ways = 5;
    int shots = 1;
    int queries_per_class = 1;
    int episodes = 500;
    std::uint64_t seed = 11;
};

/// N-way K-shot accuracy: each query is labelled with the support class whose
/// mean relation probability is highest.
double episodic_accuracy(const RelationModel& model, const LabeledFeatures& dataset, const EpisodeEvalConfig& config);

} // namespace imtriage
