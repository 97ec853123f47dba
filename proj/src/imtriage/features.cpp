#include "imtriage/features.hpp"

#include "imtriage/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace imtriage {

std::size_t ExtractorSpec::dim() const noexcept {
    switch (kind) {
    case ExtractorKind::GrayPool16: return kPoolSide * kPoolSide;
    case ExtractorKind::ColorHistGray: return 3 * kHistogramBins + kPoolSide * kPoolSide;
    }
    return 0;
}

std::string ExtractorSpec::id() const {
    return kind == ExtractorKind::GrayPool16 ? "gray16" : "rgbhist32+gray16";
}

ExtractorSpec ExtractorSpec::from_id(std::string_view id) {
    if (id == "gray16" || id.empty())
        return {ExtractorKind::GrayPool16};
    if (id == "rgbhist32+gray16" || id == "color")
        return {ExtractorKind::ColorHistGray};
    throw_invalid("unknown extractor '" + std::string(id) + "'");
}

double luma(const std::uint8_t* rgb) noexcept {
    return (0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]) / 255.0;
}

namespace {

// Row i of the result holds the overlap weights of output cell i with each
// source index, normalised so every row sums to one.
std::vector<double> area_weights(int src, int dst) {
    std::vector<double> w(static_cast<std::size_t>(dst) * src, 0.0);
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        const double lo = i * scale;
        const double hi = (i + 1) * scale;
        for (int s = static_cast<int>(std::floor(lo)); s < src && s < hi; ++s) {
            const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
            if (overlap > 0)
                w[static_cast<std::size_t>(i) * src + s] = overlap / scale;
        }
    }
    return w;
}

} // namespace

std::vector<double> pool_gray(const ImageRecord& image) {
    validate(image);
    const int w = std::max(image.width, kPoolSide);
    const int h = std::max(image.height, kPoolSide);

    std::vector<double> gray(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const int sy = static_cast<int>(static_cast<long>(y) * image.height / h);
        for (int x = 0; x < w; ++x) {
            const int sx = static_cast<int>(static_cast<long>(x) * image.width / w);
            gray[static_cast<std::size_t>(y) * w + x] = luma(image.pixel(sx, sy));
        }
    }

    const auto wy = area_weights(h, kPoolSide);
    const auto wx = area_weights(w, kPoolSide);

    // rows first: kPoolSide x w
    std::vector<double> tmp(static_cast<std::size_t>(kPoolSide) * w, 0.0);
    for (int i = 0; i < kPoolSide; ++i) {
        for (int y = 0; y < h; ++y) {
            const double a = wy[static_cast<std::size_t>(i) * h + y];
            if (a == 0.0)
                continue;
            for (int x = 0; x < w; ++x)
                tmp[static_cast<std::size_t>(i) * w + x] += a * gray[static_cast<std::size_t>(y) * w + x];
        }
    }
    std::vector<double> out(kPoolSide * kPoolSide, 0.0);
    for (int i = 0; i < kPoolSide; ++i) {
        for (int j = 0; j < kPoolSide; ++j) {
            double acc = 0.0;
            for (int x = 0; x < w; ++x)
                acc += wx[static_cast<std::size_t>(j) * w + x] * tmp[static_cast<std::size_t>(i) * w + x];
            out[static_cast<std::size_t>(i) * kPoolSide + j] = acc;
        }
    }
    return out;
}

FeatureVector extract_features(const ImageRecord& image, const ExtractorSpec& extractor) {
    validate(image);
    if (extractor.kind == ExtractorKind::GrayPool16)
        return pool_gray(image);

    FeatureVector out(3 * kHistogramBins, 0.0);
    const double n = static_cast<double>(image.width) * image.height;
    for (std::size_t i = 0; i < image.rgb.size(); i += 3) {
        for (int c = 0; c < 3; ++c)
            out[c * kHistogramBins + image.rgb[i + c] * kHistogramBins / 256] += 1.0;
    }
    for (auto& v : out)
        v /= n;
    const auto pooled = pool_gray(image);
    out.insert(out.end(), pooled.begin(), pooled.end());
    return out;
}

Standardization standardize_collection(const std::vector<FeatureVector>& features) {
    if (features.size() < 2)
        throw_invalid("standardization needs at least two vectors");
    const std::size_t d = features.front().size();
    for (const auto& f : features)
        if (f.size() != d)
            throw_invalid("feature vectors have mismatched lengths");

    const double n = static_cast<double>(features.size());
    Standardization s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (const auto& f : features)
        for (std::size_t j = 0; j < d; ++j)
            s.mean[j] += f[j];
    for (auto& m : s.mean)
        m /= n;
    for (const auto& f : features)
        for (std::size_t j = 0; j < d; ++j)
            s.stddev[j] += (f[j] - s.mean[j]) * (f[j] - s.mean[j]);
    for (auto& sd : s.stddev) {
        sd = std::sqrt(sd / n);
        if (sd < 1e-12)
            sd = 1.0;
    }
    s.standardized.reserve(features.size());
    for (const auto& f : features)
        s.standardized.push_back(apply_standardization(f, s.mean, s.stddev));
    return s;
}

FeatureVector apply_standardization(const FeatureVector& x, const FeatureVector& mean, const FeatureVector& stddev) {
    if (x.size() != mean.size() || x.size() != stddev.size())
        throw_invalid("feature length does not match standardization statistics");
    FeatureVector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = (x[j] - mean[j]) / stddev[j];
    return out;
}

std::map<std::string, FeatureVector> FeatureTable::to_map() const {
    std::map<std::string, FeatureVector> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.emplace(ids[i], rows[i]);
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    return s;
}

double parse_double(std::string_view token, std::size_t line) {
    token = trim(token);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ParseError(line, "not a number: '" + std::string(token) + "'");
    if (!std::isfinite(v))
        throw ParseError(line, "non-finite value");
    return v;
}

} // namespace

FeatureTable read_feature_table(std::istream& in) {
    FeatureTable table;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (!have_header) {
            constexpr std::string_view prefix = "#dim=";
            if (line.substr(0, prefix.size()) != prefix)
                throw ParseError(line_no, "expected '#dim=<D>' header");
            const auto digits = line.substr(prefix.size());
            std::size_t d = 0;
            const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
            if (ec != std::errc() || ptr != digits.data() + digits.size() || d == 0)
                throw ParseError(line_no, "invalid dimension in header");
            table.dim = d;
            have_header = true;
            continue;
        }
        if (line.empty() || line.front() == '#')
            continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        const std::string id(trim(fields.front()));
        if (id.empty())
            throw ParseError(line_no, "empty id");
        if (fields.size() - 1 != table.dim)
            throw ParseError(line_no, "expected " + std::to_string(table.dim) + " values, found " +
                                          std::to_string(fields.size() - 1));
        if (!seen.insert(id).second)
            throw ParseError(line_no, "duplicate id '" + id + "'");
        FeatureVector row;
        row.reserve(table.dim);
        for (std::size_t k = 1; k < fields.size(); ++k)
            row.push_back(parse_double(fields[k], line_no));
        table.ids.push_back(id);
        table.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw ParseError(line_no + 1, "missing '#dim=<D>' header");
    return table;
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_feature_table(in);
}

std::map<std::string, FeatureVector> load_precomputed_features(const std::filesystem::path& path) {
    return load_feature_table(path).to_map();
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
    out << "#dim=" << table.dim << '\n';
    char buf[32];
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        if (table.rows[i].size() != table.dim)
            throw_invalid("row '" + table.ids[i] + "' does not match table dimension");
        out << table.ids[i];
        for (double v : table.rows[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_feature_table(out, table);
}

} // namespace imtriage
