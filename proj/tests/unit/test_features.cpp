#include "imtriage/error.hpp"
#include "imtriage/features.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace imtriage;

namespace {

ImageRecord random_image(int w, int h, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> byte(0, 255);
    ImageRecord img("r", w, h);
    for (auto& v : img.rgb)
        v = static_cast<std::uint8_t>(byte(rng));
    return img;
}

imt_test::Matrix luma_plane(const ImageRecord& img) {
    imt_test::Matrix g(static_cast<std::size_t>(img.height), std::vector<double>(static_cast<std::size_t>(img.width)));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.pixel(x, y);
            g[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
        }
    return g;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an imtriage::Error");
    return ErrorCode::InvalidInput;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("black and white images give zero and one vectors") {
    ImageRecord black("b", 64, 64);
    black.fill(0, 0, 0);
    ImageRecord white("w", 64, 64);
    white.fill(255, 255, 255);
    const auto fb = extract_features(black);
    const auto fw = extract_features(white);
    REQUIRE(fb.size() == 256);
    REQUIRE(fw.size() == 256);
    for (double v : fb)
        CHECK(v == 0.0);
    for (double v : fw)
        CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("checkerboard pools to the brute-force block averages") {
    ImageRecord img("cb", 32, 32);
    for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
            const std::uint8_t v = (bx + by) % 2 ? 255 : 0;
            img.fill_rect(bx * 16, by * 16, 16, 16, v, v, v);
        }
    const auto got = extract_features(img);
    const auto want = imt_test::pool_by_supersampling(luma_plane(img), 16);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    // Direct 2x2 block average for one cell in each quadrant.
    CHECK(got[0] == 0.0);
    CHECK(got[8] == doctest::Approx(1.0));
}

TEST_CASE("pooling matches the supersampling oracle for arbitrary sizes") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> side(16, 53);
    for (int trial = 0; trial < 40; ++trial) {
        const auto img = random_image(side(rng), side(rng), rng);
        const auto plane = luma_plane(img);
        const auto got = pool_gray(img);
        const auto want = imt_test::pool_by_supersampling(plane, 16);
        REQUIRE(got.size() == 256);
        double worst = 0;
        for (std::size_t i = 0; i < got.size(); ++i)
            worst = std::max(worst, std::abs(got[i] - want[i]));
        CHECK(worst < 1e-12);

        double src_mean = 0;
        for (const auto& r : plane)
            for (double v : r)
                src_mean += v;
        src_mean /= static_cast<double>(img.width) * img.height;
        const double out_mean = std::accumulate(got.begin(), got.end(), 0.0) / 256.0;
        CHECK(std::abs(out_mean - src_mean) < 1e-6);
    }
}

TEST_CASE("small images are upsampled and keep a fixed length") {
    std::mt19937_64 rng(5);
    for (auto [w, h] : {std::pair{1, 1}, {3, 7}, {15, 16}, {40, 2}}) {
        const auto img = random_image(w, h, rng);
        CHECK(extract_features(img).size() == 256);
    }
    ImageRecord one("one", 1, 1);
    one.fill(10, 20, 30);
    const double l = (0.299 * 10 + 0.587 * 20 + 0.114 * 30) / 255.0;
    for (double v : extract_features(one))
        CHECK(v == doctest::Approx(l).epsilon(1e-12));
}

TEST_CASE("extraction is deterministic bitwise") {
    std::mt19937_64 rng(8);
    const auto img = random_image(37, 29, rng);
    auto copy = img;
    CHECK(extract_features(img) == extract_features(copy));
    const ExtractorSpec color{ExtractorKind::ColorHistGray};
    CHECK(extract_features(img, color) == extract_features(copy, color));
}

TEST_CASE("color extractor is histograms followed by the gray block") {
    std::mt19937_64 rng(9);
    const auto img = random_image(20, 30, rng);
    const ExtractorSpec color{ExtractorKind::ColorHistGray};
    const auto f = extract_features(img, color);
    REQUIRE(f.size() == 352);
    CHECK(color.dim() == 352);
    for (int c = 0; c < 3; ++c) {
        double sum = 0;
        for (int b = 0; b < 32; ++b)
            sum += f[static_cast<std::size_t>(c * 32 + b)];
        CHECK(sum == doctest::Approx(1.0));
    }
    const auto gray = pool_gray(img);
    CHECK(std::equal(gray.begin(), gray.end(), f.begin() + 96));
    CHECK(ExtractorSpec::from_id(color.id()) == color);
    CHECK(ExtractorSpec::from_id("gray16").dim() == 256);
    CHECK(code_of([] { ExtractorSpec::from_id("sift"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("zero-area and malformed images are rejected") {
    ImageRecord empty;
    empty.id = "e";
    CHECK(code_of([&] { extract_features(empty); }) == ErrorCode::InvalidInput);
    ImageRecord bad("bad", 4, 4);
    bad.rgb.resize(5);
    CHECK(code_of([&] { extract_features(bad); }) == ErrorCode::InvalidInput);
}

TEST_CASE("standardize: two-point symmetry and constant dimensions") {
    const auto s = standardize_collection({{0.0}, {2.0}});
    CHECK(s.standardized[0][0] == -1.0);
    CHECK(s.standardized[1][0] == 1.0);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.stddev[0] == 1.0);

    const auto c = standardize_collection({{5.0}, {5.0}, {5.0}});
    for (const auto& r : c.standardized)
        CHECK(r[0] == 0.0);
    CHECK(c.stddev[0] == 1.0);
}

TEST_CASE("standardize: recomputed statistics and inverse map") {
    const auto m = imt_test::random_matrix(10, 4, 21, -3, 7);
    const auto s = standardize_collection(m);
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0, var = 0;
        for (const auto& r : s.standardized)
            mean += r[j] / 10.0;
        for (const auto& r : s.standardized)
            var += (r[j] - mean) * (r[j] - mean) / 10.0;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-12);
    }
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(s.standardized[i][j] * s.stddev[j] + s.mean[j] - m[i][j]) < 1e-9);
    const auto again = apply_standardization(m[3], s.mean, s.stddev);
    CHECK(again == s.standardized[3]);
}

TEST_CASE("standardize rejects mismatched or too few vectors") {
    CHECK(code_of([] { standardize_collection({{1.0, 2.0}, {1.0}}); }) == ErrorCode::InvalidInput);
    CHECK(code_of([] { standardize_collection({{1.0}}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("feature file: single row") {
    std::istringstream in("#dim=3\nimg1,0.1,0.2,0.3\n");
    const auto t = read_feature_table(in);
    REQUIRE(t.dim == 3);
    REQUIRE(t.ids.size() == 1);
    CHECK(t.ids[0] == "img1");
    CHECK(t.rows[0] == std::vector<double>{0.1, 0.2, 0.3});
}

TEST_CASE("feature file: errors name the line") {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_feature_table(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("#dim=3\nimg1,0.1,0.2\n") == 2);
    CHECK(line_of("#dim=2\n# comment\na,1,2\na,3,4\n") == 4);
    CHECK(line_of("#dim=2\na,1,nan\n") == 2);
    CHECK(line_of("#dim=2\na,1,inf\n") == 2);
    CHECK(line_of("#dim=2\na,1,2,3\n") == 2);
    CHECK(line_of("#dim=2\na,1,x\n") == 2);
    CHECK(line_of("a,1,2\n") == 1);
    CHECK(line_of("#dim=0\n") == 1);
}

TEST_CASE("feature file: comments and blank lines are skipped") {
    std::istringstream in("#dim=2\n# note\n\na,1,2\n#b,3,4\nc,5,6\n");
    const auto t = read_feature_table(in);
    CHECK(t.ids == std::vector<std::string>{"a", "c"});
    const auto m = t.to_map();
    CHECK(m.at("c") == std::vector<double>{5, 6});
}

TEST_CASE("feature file: 1000 rows round-trip bitwise") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0.0, 1e3);
    FeatureTable t;
    t.dim = 7;
    for (int i = 0; i < 1000; ++i) {
        t.ids.push_back("id" + std::to_string(i));
        auto& r = t.rows.emplace_back();
        for (int j = 0; j < 7; ++j)
            r.push_back(n(rng) * std::pow(10.0, (i % 40) - 20));
    }
    imt_test::TempDir dir;
    save_feature_table(dir / "f.txt", t);
    const auto back = load_feature_table(dir / "f.txt");
    CHECK(back.ids == t.ids);
    CHECK(back.rows == t.rows);
    const auto map = load_precomputed_features(dir / "f.txt");
    CHECK(map.size() == 1000);
    CHECK(map.at("id5") == t.rows[5]);
}

TEST_CASE("feature file: missing file is an I/O error") {
    CHECK(code_of([] { load_feature_table("/nonexistent/features.txt"); }) == ErrorCode::Io);
}

} // TEST_SUITE
