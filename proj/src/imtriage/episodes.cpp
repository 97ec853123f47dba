#include "imtriage/episodes.hpp"

#include "imtriage/error.hpp"
#include "imtriage/grouping.hpp"
#include "imtriage/relation_model.hpp"

#include <algorithm>
#include <numeric>

namespace imtriage {

std::size_t LabeledFeatures::total() const noexcept {
    std::size_t n = 0;
    for (const auto& c : classes)
        n += c.size();
    return n;
}

void validate_for_episodes(const LabeledFeatures& dataset) {
    std::size_t rich = 0;
    std::size_t nonempty = 0;
    const std::size_t d = dataset.dim();
    for (const auto& c : dataset.classes) {
        if (c.size() >= 2)
            ++rich;
        if (!c.empty())
            ++nonempty;
        for (const auto& f : c)
            if (f.size() != d)
                throw_invalid("dataset feature vectors have mismatched lengths");
    }
    if (rich < 2 || nonempty < 2)
        throw_precondition("dataset needs at least two classes with two or more examples each");
}

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace

std::vector<PairSample> sample_episode(const LabeledFeatures& dataset, std::size_t batch_size, std::mt19937_64& rng) {
    validate_for_episodes(dataset);
    if (batch_size == 0 || batch_size % 2 != 0)
        throw_invalid("episode batch size must be positive and even");

    std::vector<std::size_t> rich;
    std::vector<std::size_t> nonempty;
    for (std::size_t c = 0; c < dataset.classes.size(); ++c) {
        if (dataset.classes[c].size() >= 2)
            rich.push_back(c);
        if (!dataset.classes[c].empty())
            nonempty.push_back(c);
    }

    std::vector<PairSample> out;
    out.reserve(batch_size);
    const std::size_t half = batch_size / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const std::size_t c = rich[uniform_index(rng, rich.size())];
        const std::size_t size = dataset.classes[c].size();
        const std::size_t i = uniform_index(rng, size);
        std::size_t j = uniform_index(rng, size - 1);
        if (j >= i)
            ++j;
        out.push_back({c, i, c, j, 1});
    }
    for (std::size_t k = 0; k < half; ++k) {
        const std::size_t ia = uniform_index(rng, nonempty.size());
        std::size_t ib = uniform_index(rng, nonempty.size() - 1);
        if (ib >= ia)
            ++ib;
        const std::size_t ca = nonempty[ia];
        const std::size_t cb = nonempty[ib];
        out.push_back({ca, uniform_index(rng, dataset.classes[ca].size()), cb,
                       uniform_index(rng, dataset.classes[cb].size()), 0});
    }
    return out;
}

double episodic_accuracy(const RelationModel& model, const LabeledFeatures& dataset, const EpisodeEvalConfig& config) {
    if (config.ways < 2 || config.shots < 1 || config.queries_per_class < 1 || config.episodes < 1)
        throw_invalid("invalid episode evaluation config");
    const std::size_t need = static_cast<std::size_t>(config.shots + config.queries_per_class);
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < dataset.classes.size(); ++c)
        if (dataset.classes[c].size() >= need)
            eligible.push_back(c);
    if (eligible.size() < static_cast<std::size_t>(config.ways))
        throw_precondition("not enough classes with " + std::to_string(need) + " examples for " +
                           std::to_string(config.ways) + "-way evaluation");

    std::mt19937_64 rng(config.seed);
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<std::vector<FeatureVector>> support(static_cast<std::size_t>(config.ways));
    for (int e = 0; e < config.episodes; ++e) {
        std::vector<std::size_t> chosen = eligible;
        std::shuffle(chosen.begin(), chosen.end(), rng);
        chosen.resize(static_cast<std::size_t>(config.ways));

        std::vector<std::pair<std::size_t, const FeatureVector*>> queries;
        for (int w = 0; w < config.ways; ++w) {
            const auto& examples = dataset.classes[chosen[static_cast<std::size_t>(w)]];
            std::vector<std::size_t> order(examples.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            auto& s = support[static_cast<std::size_t>(w)];
            s.clear();
            for (int k = 0; k < config.shots; ++k)
                s.push_back(examples[order[static_cast<std::size_t>(k)]]);
            for (int q = 0; q < config.queries_per_class; ++q)
                queries.emplace_back(static_cast<std::size_t>(w),
                                     &examples[order[static_cast<std::size_t>(config.shots + q)]]);
        }
        for (const auto& [truth, query] : queries) {
            std::size_t best = 0;
            double best_p = -1.0;
            for (std::size_t w = 0; w < support.size(); ++w) {
                const double p = group_probability(model, *query, support[w]);
                if (p > best_p) {
                    best_p = p;
                    best = w;
                }
            }
            correct += (best == truth);
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace imtriage
