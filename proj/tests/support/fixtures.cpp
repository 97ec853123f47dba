#include "fixtures.hpp"

#include "imtriage/error.hpp"
#include "synthetic.hpp"

#include <cmath>

namespace imt_test {

using namespace imtriage;

SessionConfig quick_config(std::uint64_t seed) {
    SessionConfig c;
    c.seed = seed;
    c.tsne.iterations = 300;
    return c;
}

SessionInput blob_input(int n, int dim, std::uint64_t seed) {
    const int per = (n + 2) / 3;
    auto rows = gaussian_blobs(per, 3, dim, 10.0, 1.0, seed);
    rows.resize(static_cast<std::size_t>(n));
    SessionInput in;
    for (int i = 0; i < n; ++i)
        in.ids.push_back("img" + std::to_string(i));
    in.features = std::move(rows);
    return in;
}

Session blob_session(int n, int dim, std::uint64_t seed, const std::string& id) {
    return Session(build_snapshot(id, blob_input(n, dim, seed), quick_config(seed)));
}

PairScorer distance_scorer() {
    return [](const FeatureVector& a, const FeatureVector& b) {
        double d2 = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            d2 += (a[i] - b[i]) * (a[i] - b[i]);
        return 0.02 + 0.96 * std::exp(-d2 / (4.0 * static_cast<double>(a.size())));
    };
}

std::string random_operation(Session& s, std::mt19937_64& rng) {
    const auto& st = s.state();
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const auto& items = st.items;
    auto any_item = [&]() -> const std::string& { return items[pick(items.size())].image_id; };
    auto any_group = [&]() -> std::string {
        if (st.groups.empty())
            return "g999";
        return st.groups[pick(st.groups.size())].id;
    };
    std::uniform_real_distribution<double> coord(-100.0, 1100.0);
    const int op = std::uniform_int_distribution<int>(0, 11)(rng);
    try {
        switch (op) {
        case 0:
        case 1: s.move_image(any_item(), {coord(rng), coord(rng)}); return "move";
        case 2: s.create_group("label" + std::to_string(pick(5))); return "create";
        case 3: s.rename_group(any_group(), "renamed" + std::to_string(pick(5))); return "rename";
        case 4: s.delete_group(any_group()); return "delete";
        case 5:
        case 6: s.assign_to_group(any_item(), any_group(), Actor::User); return "assign";
        case 7: s.unassign(any_item()); return "unassign";
        case 8: s.set_threshold(std::uniform_real_distribution<double>(0.05, 0.95)(rng)); return "threshold";
        case 9: s.run_auto_group(distance_scorer()); return "auto_group";
        case 10: s.run_auto_position(); return "auto_position";
        default: s.undo(); return "undo";
        }
    } catch (const Error&) {
        return "rejected";
    }
}

} // namespace imt_test
