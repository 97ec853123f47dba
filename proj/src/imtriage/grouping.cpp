#include "imtriage/grouping.hpp"

#include "imtriage/error.hpp"
#include "imtriage/relation_model.hpp"

#include <algorithm>
#include <unordered_set>

namespace imtriage {

PairScorer scorer_for(const RelationModel& model) {
    return [&model](const FeatureVector& a, const FeatureVector& b) { return model.forward(a, b); };
}

double group_probability(const PairScorer& score, const FeatureVector& f, const std::vector<FeatureVector>& members) {
    if (members.empty())
        throw_invalid("group has no members");
    double sum = 0.0;
    for (const auto& m : members)
        sum += score(f, m);
    return sum / static_cast<double>(members.size());
}

double group_probability(const RelationModel& model, const FeatureVector& f, const std::vector<FeatureVector>& members) {
    return group_probability(scorer_for(model), f, members);
}

Assignment decide_assignment(std::string image_id, std::vector<std::pair<std::string, double>> probabilities,
                             double threshold) {
    Assignment out{std::move(image_id), std::nullopt, std::move(probabilities)};
    const std::pair<std::string, double>* best = nullptr;
    for (const auto& entry : out.probabilities)
        if (best == nullptr || entry.second > best->second)
            best = &entry;
    if (best != nullptr && best->second >= threshold)
        out.chosen_group = best->first;
    return out;
}

std::vector<Assignment> auto_group(const PairScorer& score, const std::vector<Candidate>& candidates,
                                   const std::vector<GroupExamples>& groups, double threshold) {
    if (groups.empty())
        throw_precondition("nothing to learn from yet: create a group first");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw_invalid("threshold must lie in (0, 1)");
    std::unordered_set<std::string> grouped;
    for (const auto& g : groups) {
        if (g.members.empty())
            throw_invalid("group '" + g.id + "' has no members");
        grouped.insert(g.member_ids.begin(), g.member_ids.end());
    }

    std::vector<Assignment> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (grouped.contains(c.image_id))
            continue;
        std::vector<std::pair<std::string, double>> probs;
        probs.reserve(groups.size());
        for (const auto& g : groups)
            probs.emplace_back(g.id, group_probability(score, c.features, g.members));
        out.push_back(decide_assignment(c.image_id, std::move(probs), threshold));
    }
    return out;
}

std::vector<Assignment> auto_group(const RelationModel& model, const std::vector<Candidate>& candidates,
                                   const std::vector<GroupExamples>& groups, double threshold) {
    return auto_group(scorer_for(model), candidates, groups, threshold);
}

} // namespace imtriage
