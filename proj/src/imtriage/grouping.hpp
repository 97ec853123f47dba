#pragma once

#include "imtriage/features.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace imtriage {

class RelationModel;

using PairScorer = std::function<double(const FeatureVector&, const FeatureVector&)>;

PairScorer scorer_for(const RelationModel& model);

/// Mean pairwise membership probability of `f` against every member.
double group_probability(const PairScorer& score, const FeatureVector& f, const std::vector<FeatureVector>& members);
double group_probability(const RelationModel& model, const FeatureVector& f, const std::vector<FeatureVector>& members);

inline constexpr double kDefaultThreshold = 0.6;

struct Assignment {
    std::string image_id;
    std::optional<std::string> chosen_group;
    /// One entry per group, in group creation order.
    std::vector<std::pair<std::string, double>> probabilities;

    bool operator==(const Assignment&) const = default;
};

/// A group as seen by the learner: creation-ordered, confirmed members only.
struct GroupExamples {
    std::string id;
    std::vector<std::string> member_ids;
    std::vector<FeatureVector> members;
};

struct Candidate {
    std::string image_id;
    FeatureVector features;
};

/// Argmax over `probabilities` (earliest entry wins ties); abstains when the
/// maximum is below `threshold`.
Assignment decide_assignment(std::string image_id, std::vector<std::pair<std::string, double>> probabilities,
                             double threshold);

/// Scores every candidate against every group and applies decide_assignment.
/// Candidates already listed as a group member are skipped.
std::vector<Assignment> auto_group(const PairScorer& score, const std::vector<Candidate>& candidates,
                                   const std::vector<GroupExamples>& groups, double threshold);
std::vector<Assignment> auto_group(const RelationModel& model, const std::vector<Candidate>& candidates,
                                   const std::vector<GroupExamples>& groups, double threshold);

} // namespace imtriage
