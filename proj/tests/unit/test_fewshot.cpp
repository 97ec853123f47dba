#include "imtriage/episodes.hpp"
#include "imtriage/error.hpp"
#include "imtriage/grouping.hpp"
#include "imtriage/heatmap.hpp"
#include "imtriage/relation_model.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace imtriage;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an imtriage::Error");
    return ErrorCode::InvalidInput;
}

FeatureVector random_vector(std::size_t d, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    FeatureVector v(d);
    for (auto& x : v)
        x = n(rng);
    return v;
}

RelationModel hand_model() {
    auto m = RelationModel::zeros(1, 1);
    auto p = m.parameters();
    // W1 = [1, 1], b1 = -0.5, w2 = 1, b2 = 0
    p[0] = 1.0;
    p[1] = 1.0;
    p[2] = -0.5;
    p[3] = 1.0;
    p[4] = 0.0;
    return m;
}

LabeledFeatures two_gaussians(std::uint64_t seed, int per_class = 50) {
    std::mt19937_64 rng(seed);
    LabeledFeatures ds;
    ds.class_names = {"a", "b"};
    ds.classes.resize(2);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < per_class; ++i) {
            auto v = random_vector(4, rng, 0.3);
            for (auto& x : v)
                x += c == 0 ? -2.0 : 2.0;
            ds.classes[static_cast<std::size_t>(c)].push_back(v);
        }
    return ds;
}

// Scorer that looks up a table keyed by the first coordinates of the pair.
struct TableScorer {
    std::vector<std::vector<double>> table; // [candidate][group]
    double operator()(const FeatureVector& f, const FeatureVector& m) const {
        return table[static_cast<std::size_t>(f[0])][static_cast<std::size_t>(m[0])];
    }
};

std::vector<GroupExamples> stub_groups(int n) {
    std::vector<GroupExamples> gs;
    for (int g = 0; g < n; ++g)
        gs.push_back({"g" + std::to_string(g + 1), {"m" + std::to_string(g)}, {{static_cast<double>(g)}}});
    return gs;
}

std::vector<Candidate> stub_candidates(int n) {
    std::vector<Candidate> cs;
    for (int i = 0; i < n; ++i)
        cs.push_back({"img" + std::to_string(i), {static_cast<double>(i)}});
    return cs;
}

} // namespace

TEST_SUITE("fewshot") {

TEST_CASE("pair features: identical pair and hand arithmetic") {
    const std::vector<double> v{0.5, -2.0, 3.0};
    CHECK(pair_features(v, v) == std::vector<double>{0, 0, 0, 0.25, 4.0, 9.0});
    const std::vector<double> a{1, 0}, b{0, 1};
    CHECK(pair_features(a, b) == std::vector<double>{1, 1, 0, 0});
    CHECK(code_of([&] { pair_features(a, v); }) == ErrorCode::InvalidInput);
}

TEST_CASE("pair features and forward are symmetric bitwise") {
    std::mt19937_64 rng(1);
    const RelationModel model(6, 16, 3);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_vector(6, rng), b = random_vector(6, rng);
        CHECK(pair_features(a, b) == pair_features(b, a));
        CHECK(model.forward(a, b) == model.forward(b, a));
    }
}

TEST_CASE("forward: zero model gives exactly one half") {
    const auto m = RelationModel::zeros(5, 8);
    std::mt19937_64 rng(2);
    CHECK(m.forward(random_vector(5, rng), random_vector(5, rng)) == 0.5);
}

TEST_CASE("forward: hand-set closed form") {
    const std::vector<double> a{1.0}, b{0.0};
    CHECK(hand_model().forward(a, b) == doctest::Approx(0.62245933).epsilon(1e-8));
    CHECK(hand_model().forward(a, b) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-15));
}

TEST_CASE("forward: strictly inside (0,1) even when saturated, and dimension checked") {
    auto m = RelationModel::zeros(1, 1);
    m.parameters().back() = 1e6;
    CHECK(m.forward(std::vector<double>{0.0}, std::vector<double>{0.0}) < 1.0);
    m.parameters().back() = -1e6;
    CHECK(m.forward(std::vector<double>{0.0}, std::vector<double>{0.0}) > 0.0);
    CHECK(code_of([&] { m.forward(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}); }) ==
          ErrorCode::InvalidInput);
}

TEST_CASE("model gradient: zero model and label 1 give loss ln 2") {
    const auto m = RelationModel::zeros(3, 4);
    const FeatureVector a{1, 2, 3}, b{3, 2, 1};
    const std::vector<LabeledPair> batch{{&a, &b, 1.0}};
    CHECK(model_gradient(m, batch).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(model_loss(m, batch) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("model gradient matches central differences on random tiny models") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        RelationModel m(4, 8, 100 + static_cast<std::uint64_t>(trial));
        std::normal_distribution<double> bias(0.0, 0.3);
        for (std::size_t i = 4 * 8 * 2; i < m.parameter_count(); ++i)
            m.parameters()[i] += bias(rng);
        std::vector<FeatureVector> feats;
        for (int i = 0; i < 12; ++i)
            feats.push_back(random_vector(4, rng));
        std::vector<LabeledPair> batch;
        for (int i = 0; i < 6; ++i)
            batch.push_back({&feats[static_cast<std::size_t>(2 * i)], &feats[static_cast<std::size_t>(2 * i + 1)],
                             static_cast<double>(i % 2)});
        const auto g = model_gradient(m, batch);
        const std::vector<double> theta(m.parameters().begin(), m.parameters().end());
        const auto fd = imt_test::central_differences(
            [&](const std::vector<double>& t) {
                RelationModel probe = m;
                std::copy(t.begin(), t.end(), probe.parameters().begin());
                return model_loss(probe, batch);
            },
            theta, 1e-5);
        CHECK(imt_test::max_relative_error(g.gradient, fd) < 1e-4);
        CHECK(g.loss == doctest::Approx(model_loss(m, batch)).epsilon(1e-14));
    }
}

TEST_CASE("model gradient: duplicated batch gives the same gradient, empty batch is rejected") {
    std::mt19937_64 rng(6);
    const RelationModel m(3, 5, 9);
    std::vector<FeatureVector> f;
    for (int i = 0; i < 6; ++i)
        f.push_back(random_vector(3, rng));
    const std::vector<LabeledPair> once{{&f[0], &f[1], 1.0}, {&f[2], &f[3], 0.0}, {&f[4], &f[5], 1.0}};
    std::vector<LabeledPair> twice = once;
    twice.insert(twice.end(), once.begin(), once.end());
    const auto g1 = model_gradient(m, once);
    const auto g2 = model_gradient(m, twice);
    CHECK(imt_test::max_relative_error(g1.gradient, g2.gradient, 1e-300) < 1e-14);
    CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-15));
    CHECK(code_of([&] { model_gradient(m, std::vector<LabeledPair>{}); }) == ErrorCode::InvalidInput);
    const std::vector<LabeledPair> bad{{&f[0], &f[1], 0.5}};
    CHECK(code_of([&] { model_gradient(m, bad); }) == ErrorCode::InvalidInput);
}

TEST_CASE("sample_episode: forced composition") {
    LabeledFeatures ds{{"a", "b"}, {{{0.0}, {1.0}}, {{2.0}, {3.0}}}};
    std::mt19937_64 rng(1);
    const auto batch = sample_episode(ds, 4, rng);
    REQUIRE(batch.size() == 4);
    int pos = 0, neg = 0;
    for (const auto& s : batch) {
        if (s.label == 1) {
            ++pos;
            CHECK(s.class_a == s.class_b);
            CHECK(s.index_a != s.index_b);
        } else {
            ++neg;
            CHECK(s.class_a != s.class_b);
        }
    }
    CHECK(pos == 2);
    CHECK(neg == 2);
}

TEST_CASE("sample_episode: exact label balance and no repeated element") {
    auto ds = two_gaussians(3, 5);
    ds.class_names.push_back("c");
    ds.classes.push_back({{0, 0, 0, 0}, {1, 1, 1, 1}, {2, 2, 2, 2}});
    std::mt19937_64 rng(4);
    int pos = 0, total = 0;
    for (int e = 0; e < 10000 / 32 + 1; ++e) {
        for (const auto& s : sample_episode(ds, 32, rng)) {
            pos += s.label;
            ++total;
            if (s.label == 1)
                CHECK(s.index_a != s.index_b);
        }
    }
    CHECK(2 * pos == total);
}

TEST_CASE("sample_episode: positive class frequency is uniform within 3 sigma") {
    LabeledFeatures ds;
    for (int c = 0; c < 5; ++c) {
        ds.class_names.push_back("c" + std::to_string(c));
        ds.classes.emplace_back();
        for (int i = 0; i < 2 + 3 * c; ++i) // unequal class sizes must not bias the class draw
            ds.classes.back().push_back({static_cast<double>(c), static_cast<double>(i)});
    }
    std::mt19937_64 rng(99);
    std::vector<int> counts(5, 0);
    const int episodes = 10000;
    for (int e = 0; e < episodes; ++e)
        for (const auto& s : sample_episode(ds, 2, rng))
            if (s.label == 1)
                ++counts[s.class_a];
    const double expect = episodes / 5.0;
    const double sigma = std::sqrt(episodes * 0.2 * 0.8);
    for (int c : counts)
        CHECK(std::abs(c - expect) <= 3 * sigma);
}

TEST_CASE("sample_episode: insufficient data and odd batch") {
    std::mt19937_64 rng(1);
    LabeledFeatures one{{"a"}, {{{0.0}, {1.0}}}};
    CHECK(code_of([&] { sample_episode(one, 4, rng); }) == ErrorCode::Precondition);
    LabeledFeatures thin{{"a", "b"}, {{{0.0}}, {{1.0}}}};
    CHECK(code_of([&] { sample_episode(thin, 4, rng); }) == ErrorCode::Precondition);
    auto ok = two_gaussians(1, 3);
    CHECK(code_of([&] { sample_episode(ok, 3, rng); }) == ErrorCode::InvalidInput);
}

TEST_CASE("train: separable toy data converges") {
    const auto ds = two_gaussians(11);
    TrainConfig cfg;
    cfg.steps = 2000;
    const auto r = train(RelationModel(4, 64, 1), ds, cfg);
    REQUIRE(r.loss_history.size() == 2000);
    const double tail = std::accumulate(r.loss_history.end() - 100, r.loss_history.end(), 0.0) / 100.0;
    CHECK(tail < 0.1);
}

TEST_CASE("train: zero steps leave the model unchanged, same seed repeats bitwise") {
    const auto ds = two_gaussians(12, 10);
    const RelationModel init(4, 8, 2);
    TrainConfig cfg;
    cfg.steps = 0;
    CHECK(train(init, ds, cfg).model == init);
    cfg.steps = 50;
    const auto a = train(init, ds, cfg);
    const auto b = train(init, ds, cfg);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.model == b.model);
    cfg.seed = 8;
    CHECK(train(init, ds, cfg).loss_history != a.loss_history);
}

TEST_CASE("train: non-finite loss aborts with the step") {
    auto ds = two_gaussians(13, 4);
    for (auto& cls : ds.classes)
        for (auto& v : cls)
            for (auto& x : v)
                x *= 1e200;
    TrainConfig cfg;
    cfg.steps = 10;
    try {
        train(RelationModel(4, 8, 3), ds, cfg);
        FAIL("expected an optimizer error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Optimizer);
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("train: cancellation and invalid config") {
    const auto ds = two_gaussians(14, 5);
    std::stop_source src;
    TrainConfig cfg;
    cfg.steps = 100;
    CHECK(code_of([&] {
              train(RelationModel(4, 8, 3), ds, cfg, src.get_token(), [&](int done, int, double) {
                  if (done == 10)
                      src.request_stop();
              });
          }) == ErrorCode::Cancelled);
    cfg.batch_size = 7;
    CHECK(code_of([&] { train(RelationModel(4, 8, 3), ds, cfg); }) == ErrorCode::InvalidInput);
    cfg.batch_size = 8;
    CHECK(code_of([&] { train(RelationModel(5, 8, 3), ds, cfg); }) == ErrorCode::InvalidInput);
}

TEST_CASE("model snapshot round-trips exactly and rejects corruption") {
    RelationModel m(7, 5, 1234);
    m.extractor_id = "rgbhist32+gray16";
    std::stringstream buf;
    write_model(buf, m);
    const std::string bytes = buf.str();
    std::istringstream in(bytes);
    const auto back = read_model(in);
    CHECK(back == m);
    CHECK(back.seed == 1234);
    CHECK(back.extractor_id == "rgbhist32+gray16");

    imt_test::TempDir dir;
    save_model(m, dir / "m.bin");
    CHECK(load_model(dir / "m.bin") == m);

    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream bad_in(bad);
    CHECK(code_of([&] { read_model(bad_in); }) == ErrorCode::Parse);
    std::istringstream cut(bytes.substr(0, bytes.size() - 3));
    CHECK(code_of([&] { read_model(cut); }) == ErrorCode::Parse);
    CHECK(code_of([] { load_model("/nonexistent/model.bin"); }) == ErrorCode::Io);
}

TEST_CASE("group probability: single member, stubbed mean, permutation invariance") {
    std::mt19937_64 rng(21);
    const RelationModel m(3, 6, 4);
    const auto f = random_vector(3, rng);
    const auto g = random_vector(3, rng);
    CHECK(group_probability(m, f, {g}) == m.forward(f, g));

    const PairScorer stub = [](const FeatureVector&, const FeatureVector& x) { return x[0]; };
    CHECK(group_probability(stub, {0.0}, {{0.2}, {0.8}}) == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<FeatureVector> members;
    for (int i = 0; i < 9; ++i)
        members.push_back(random_vector(3, rng));
    const double base = group_probability(m, f, members);
    for (int t = 0; t < 20; ++t) {
        std::shuffle(members.begin(), members.end(), rng);
        CHECK(std::abs(group_probability(m, f, members) - base) < 1e-12);
    }
    CHECK(code_of([&] { group_probability(m, f, {}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("auto group: argmax and abstention examples") {
    const auto a = decide_assignment("x", {{"A", 0.7}, {"B", 0.4}}, 0.6);
    REQUIRE(a.chosen_group);
    CHECK(*a.chosen_group == "A");
    CHECK_FALSE(decide_assignment("x", {{"A", 0.55}, {"B", 0.55}}, 0.6).chosen_group);
    const auto tie = decide_assignment("x", {{"A", 0.8}, {"B", 0.8}}, 0.6);
    CHECK(*tie.chosen_group == "A");
    CHECK(*decide_assignment("x", {{"A", 0.6}}, 0.6).chosen_group == "A");
}

TEST_CASE("auto group: exhaustive 3-image 2-group instances match the brute-force rule") {
    const std::vector<double> levels{0.2, 0.59, 0.6, 0.61, 0.9};
    const int cells = 6;
    std::vector<int> idx(cells, 0);
    int checked = 0;
    while (true) {
        TableScorer t;
        t.table.assign(3, std::vector<double>(2));
        for (int c = 0; c < cells; ++c)
            t.table[static_cast<std::size_t>(c / 2)][static_cast<std::size_t>(c % 2)] = levels[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
        const auto got = auto_group(PairScorer(t), stub_candidates(3), stub_groups(2), 0.6);
        const auto want = imt_test::auto_group_rule(t.table, 0.6);
        REQUIRE(got.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(got[i].chosen_group.has_value() == want[i].has_value());
            if (want[i])
                CHECK(*got[i].chosen_group == "g" + std::to_string(*want[i] + 1));
        }
        ++checked;
        int k = 0;
        while (k < cells && ++idx[static_cast<std::size_t>(k)] == static_cast<int>(levels.size()))
            idx[static_cast<std::size_t>(k++)] = 0;
        if (k == cells)
            break;
    }
    CHECK(checked == 15625);
}

TEST_CASE("auto group: invariants over random tables") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int trial = 0; trial < 200; ++trial) {
        TableScorer t;
        t.table.assign(6, std::vector<double>(3));
        for (auto& r : t.table)
            for (auto& v : r)
                v = u(rng);
        const double thr = u(rng);
        auto cands = stub_candidates(6);
        const auto groups = stub_groups(3);
        const auto got = auto_group(PairScorer(t), cands, groups, thr);
        for (const auto& a : got) {
            REQUIRE(a.probabilities.size() == 3);
            if (a.chosen_group) {
                double best = 0;
                for (const auto& [g, p] : a.probabilities)
                    best = std::max(best, p);
                const auto it = std::find_if(a.probabilities.begin(), a.probabilities.end(),
                                             [&](const auto& gp) { return gp.first == *a.chosen_group; });
                CHECK(it->second == best);
                CHECK(best >= thr);
            }
        }
        std::shuffle(cands.begin(), cands.end(), rng);
        auto shuffled = auto_group(PairScorer(t), cands, groups, thr);
        auto key = [](const std::vector<Assignment>& v) {
            std::set<std::pair<std::string, std::string>> s;
            for (const auto& a : v)
                s.insert({a.image_id, a.chosen_group.value_or("")});
            return s;
        };
        CHECK(key(got) == key(shuffled));
    }
}

TEST_CASE("auto group: preconditions, members skipped, single two-member group") {
    const PairScorer half = [](const FeatureVector&, const FeatureVector&) { return 0.5; };
    try {
        auto_group(half, stub_candidates(2), {}, 0.6);
        FAIL("expected precondition");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Precondition);
        CHECK(std::string(e.what()).find("nothing to learn from yet") != std::string::npos);
    }
    CHECK(code_of([&] { auto_group(half, stub_candidates(2), stub_groups(1), 0.0); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { auto_group(half, stub_candidates(2), stub_groups(1), 1.0); }) == ErrorCode::InvalidInput);

    auto groups = stub_groups(1);
    groups[0].member_ids = {"img0", "img1"};
    groups[0].members = {{0.0}, {1.0}};
    const PairScorer close = [](const FeatureVector& a, const FeatureVector& b) {
        return std::abs(a[0] - b[0]) < 2.5 ? 0.9 : 0.1;
    };
    const auto out = auto_group(close, stub_candidates(5), groups, 0.6);
    REQUIRE(out.size() == 3);
    CHECK(out[0].image_id == "img2");
    CHECK(out[0].chosen_group);
    CHECK_FALSE(out[2].chosen_group);
}

TEST_CASE("episodic accuracy: zero model picks the first support class") {
    const auto ds = imt_test::to_labeled_features(imt_test::make_glyph_dataset(6, 3, 20, 3));
    EpisodeEvalConfig cfg;
    cfg.episodes = 50;
    CHECK(episodic_accuracy(RelationModel::zeros(256, 4), ds, cfg) == doctest::Approx(0.2));
    cfg.ways = 7;
    CHECK(code_of([&] { episodic_accuracy(RelationModel::zeros(256, 4), ds, cfg); }) == ErrorCode::Precondition);
}

TEST_CASE("episodic accuracy: a model trained on glyph classes beats chance on new classes") {
    const auto train_ds = imt_test::to_labeled_features(imt_test::make_glyph_dataset(20, 8, 24, 100, "t"));
    const auto test_ds = imt_test::to_labeled_features(imt_test::make_glyph_dataset(10, 6, 24, 200, "e"));
    TrainConfig cfg;
    cfg.steps = 800;
    const auto r = train(RelationModel(256, 64, 1), train_ds, cfg);
    EpisodeEvalConfig ev;
    ev.episodes = 100;
    CHECK(episodic_accuracy(r.model, test_ds, ev) > 0.5);
}

TEST_CASE("heatmap: grid size arithmetic and argument checks") {
    ImageRecord img("x", 64, 64);
    img.fill(30, 60, 90);
    const RelationModel m(256, 8, 2);
    const std::vector<FeatureVector> members{extract_features(img)};
    const auto h = occlusion_heatmap(m, img, members, 16, 16);
    CHECK(h.rows == 4);
    CHECK(h.cols == 4);
    CHECK(h.values.size() == 16);
    ImageRecord wide("w", 50, 30);
    wide.fill(0, 0, 0);
    const auto h2 = occlusion_heatmap(m, wide, members, 10, 8);
    CHECK(h2.rows == (30 - 10) / 8 + 1);
    CHECK(h2.cols == (50 - 10) / 8 + 1);
    CHECK(code_of([&] { occlusion_heatmap(m, wide, members, 31, 8); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { occlusion_heatmap(m, wide, members, 8, 0); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { occlusion_heatmap(m, wide, {}, 8, 8); }) == ErrorCode::InvalidInput);
}

TEST_CASE("heatmap: occluding mid-gray pixels changes nothing") {
    ImageRecord img("g", 48, 48);
    img.fill(kOcclusionFill, kOcclusionFill, kOcclusionFill);
    img.fill_rect(0, 0, 16, 16, 250, 10, 10);
    const RelationModel m(256, 16, 3);
    std::mt19937_64 rng(2);
    std::vector<FeatureVector> members{random_vector(256, rng, 0.3)};
    const auto h = occlusion_heatmap(m, img, members, 16, 16);
    for (int r = 0; r < h.rows; ++r)
        for (int c = 0; c < h.cols; ++c)
            if (r > 0 || c > 0)
                CHECK(std::abs(h.at(r, c)) < 1e-9);
    CHECK(h.baseline == doctest::Approx(group_probability(m, extract_features(img), members)).epsilon(1e-15));
}

TEST_CASE("heatmap: full-image occlusion equals the directly recomputed drop") {
    std::mt19937_64 rng(3);
    ImageRecord img("f", 32, 32);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : img.rgb)
        v = static_cast<std::uint8_t>(byte(rng));
    ImageRecord gray("gray", 32, 32);
    gray.fill(kOcclusionFill, kOcclusionFill, kOcclusionFill);
    const RelationModel m(256, 16, 4);
    const std::vector<FeatureVector> members{random_vector(256, rng, 0.3), random_vector(256, rng, 0.3)};
    const auto h = occlusion_heatmap(m, img, members, 32, 5);
    REQUIRE(h.rows == 1);
    REQUIRE(h.cols == 1);
    const double expected =
        group_probability(m, extract_features(img), members) - group_probability(m, extract_features(gray), members);
    CHECK(h.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

} // TEST_SUITE
