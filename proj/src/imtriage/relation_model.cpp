#include "imtriage/relation_model.hpp"

#include "imtriage/episodes.hpp"
#include "imtriage/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

namespace imtriage {

std::vector<double> pair_features(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw_invalid("pair features need equal-length vectors");
    const std::size_t d = a.size();
    std::vector<double> out(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = std::abs(a[i] - b[i]);
        out[d + i] = a[i] * b[i];
    }
    return out;
}

RelationModel::RelationModel(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed_)
    : seed(seed_), feature_dim_(feature_dim), hidden_(hidden) {
    if (feature_dim == 0 || hidden == 0)
        throw_invalid("relation model dimensions must be positive");
    params_.assign(hidden * (pair_dim() + 2) + 1, 0.0);
    std::mt19937_64 rng(seed_);
    std::normal_distribution<double> first(0.0, std::sqrt(2.0 / static_cast<double>(pair_dim())));
    std::normal_distribution<double> second(0.0, std::sqrt(1.0 / static_cast<double>(hidden)));
    for (std::size_t i = 0; i < hidden * pair_dim(); ++i)
        params_[i] = first(rng);
    for (std::size_t i = 0; i < hidden; ++i)
        params_[hidden * (pair_dim() + 1) + i] = second(rng);
}

RelationModel RelationModel::zeros(std::size_t feature_dim, std::size_t hidden) {
    RelationModel m(feature_dim, hidden, 0);
    std::fill(m.params_.begin(), m.params_.end(), 0.0);
    return m;
}

double RelationModel::logit(std::span<const double> pair) const {
    if (pair.size() != pair_dim())
        throw_invalid("pair has dimension " + std::to_string(pair.size()) + ", model expects " +
                      std::to_string(pair_dim()));
    const auto weights = w1();
    const auto bias = b1();
    const auto out_w = w2();
    const std::size_t p = pair_dim();
    double o = b2();
    for (std::size_t j = 0; j < hidden_; ++j) {
        double z = bias[j];
        const double* row = weights.data() + j * p;
        for (std::size_t i = 0; i < p; ++i)
            z += row[i] * pair[i];
        if (z > 0)
            o += out_w[j] * z;
    }
    return o;
}

namespace {

constexpr double kOutputEps = 1e-15;

double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

} // namespace

double RelationModel::forward(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != feature_dim_ || b.size() != feature_dim_)
        throw_invalid("feature dimension does not match the relation model");
    const double o = logit(pair_features(a, b));
    if (!std::isfinite(o))
        throw Error(ErrorCode::InvalidInput, "relation model produced a non-finite logit");
    return std::clamp(sigmoid(o), kOutputEps, 1.0 - kOutputEps);
}

GradientResult model_gradient(const RelationModel& model, std::span<const LabeledPair> batch) {
    if (batch.empty())
        throw_invalid("gradient needs a non-empty batch");
    const std::size_t p = model.pair_dim();
    const std::size_t h = model.hidden();
    const auto w1 = model.w1();
    const auto b1 = model.b1();
    const auto w2 = model.w2();

    GradientResult out;
    out.gradient.assign(model.parameter_count(), 0.0);
    double* g_w1 = out.gradient.data();
    double* g_b1 = g_w1 + h * p;
    double* g_w2 = g_b1 + h;
    double& g_b2 = out.gradient.back();

    std::vector<double> hidden(h);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        if (ex.label != 0.0 && ex.label != 1.0)
            throw_invalid("labels must be 0 or 1");
        const auto pair = pair_features(*ex.a, *ex.b);
        if (pair.size() != p)
            throw_invalid("feature dimension does not match the relation model");
        double o = model.b2();
        for (std::size_t j = 0; j < h; ++j) {
            double z = b1[j];
            const double* row = w1.data() + j * p;
            for (std::size_t i = 0; i < p; ++i)
                z += row[i] * pair[i];
            hidden[j] = z > 0 ? z : 0.0;
            o += w2[j] * hidden[j];
        }
        out.loss += softplus(o) - ex.label * o;

        const double d_o = (sigmoid(o) - ex.label) * scale;
        g_b2 += d_o;
        for (std::size_t j = 0; j < h; ++j) {
            g_w2[j] += d_o * hidden[j];
            if (hidden[j] <= 0)
                continue;
            const double d_z = d_o * w2[j];
            g_b1[j] += d_z;
            double* grow = g_w1 + j * p;
            for (std::size_t i = 0; i < p; ++i)
                grow[i] += d_z * pair[i];
        }
    }
    out.loss *= scale;
    return out;
}

double model_loss(const RelationModel& model, std::span<const LabeledPair> batch) {
    if (batch.empty())
        throw_invalid("loss needs a non-empty batch");
    double loss = 0.0;
    for (const auto& ex : batch) {
        const double o = model.logit(pair_features(*ex.a, *ex.b));
        loss += softplus(o) - ex.label * o;
    }
    return loss / static_cast<double>(batch.size());
}

AdamOptimizer::AdamOptimizer(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

void TrainConfig::validate() const {
    if (steps < 0 || batch_size <= 0 || batch_size % 2 != 0)
        throw_invalid("train config needs steps >= 0 and a positive even batch size");
    if (!(learning_rate > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) || !(epsilon > 0))
        throw_invalid("invalid optimizer hyperparameters");
}

TrainResult train(const RelationModel& initial, const LabeledFeatures& dataset, const TrainConfig& config,
                  std::stop_token stop, const TrainProgressFn& progress) {
    config.validate();
    validate_for_episodes(dataset);
    if (dataset.dim() != initial.feature_dim())
        throw_invalid("dataset feature dimension does not match the relation model");

    TrainResult result{initial, {}};
    result.loss_history.reserve(static_cast<std::size_t>(config.steps));
    AdamOptimizer adam(initial.parameter_count(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
    std::mt19937_64 rng(config.seed);
    std::vector<LabeledPair> batch;
    for (int step = 0; step < config.steps; ++step) {
        if (stop.stop_requested())
            throw Error(ErrorCode::Cancelled, "training cancelled at step " + std::to_string(step));
        const auto samples = sample_episode(dataset, static_cast<std::size_t>(config.batch_size), rng);
        batch.clear();
        for (const auto& s : samples)
            batch.push_back({&dataset.classes[s.class_a][s.index_a], &dataset.classes[s.class_b][s.index_b],
                             static_cast<double>(s.label)});
        const GradientResult g = model_gradient(result.model, batch);
        if (!std::isfinite(g.loss))
            throw Error(ErrorCode::Optimizer,
                        "non-finite loss at step " + std::to_string(step) + ": " + std::to_string(g.loss));
        adam.step(result.model.parameters(), g.gradient);
        result.loss_history.push_back(g.loss);
        if (progress)
            progress(step + 1, config.steps, g.loss);
    }
    return result;
}

namespace {

constexpr char kMagic[8] = {'I', 'M', 'T', 'R', 'E', 'L', 'M', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw Error(ErrorCode::Parse, "truncated model snapshot");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw Error(ErrorCode::Parse, "truncated model snapshot");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

} // namespace

void write_model(std::ostream& out, const RelationModel& model) {
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kFormatVersion);
    put_u64(out, model.feature_dim());
    put_u64(out, model.hidden());
    put_u64(out, model.seed);
    put_u32(out, static_cast<std::uint32_t>(model.extractor_id.size()));
    out.write(model.extractor_id.data(), static_cast<std::streamsize>(model.extractor_id.size()));
    put_u64(out, model.parameter_count());
    for (double v : model.parameters())
        put_u64(out, std::bit_cast<std::uint64_t>(v));
    if (!out)
        throw Error(ErrorCode::Io, "failed writing model snapshot");
}

RelationModel read_model(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic))
        throw Error(ErrorCode::Parse, "not a relation model snapshot");
    const auto version = get_u32(in);
    if (version != kFormatVersion)
        throw Error(ErrorCode::Parse, "unsupported model snapshot version " + std::to_string(version));
    const auto d = get_u64(in);
    const auto h = get_u64(in);
    const auto seed = get_u64(in);
    const auto id_len = get_u32(in);
    if (d == 0 || h == 0 || d > (1u << 20) || h > (1u << 20) || id_len > 256)
        throw Error(ErrorCode::Parse, "corrupt model snapshot header");
    std::string extractor(id_len, '\0');
    if (!in.read(extractor.data(), id_len))
        throw Error(ErrorCode::Parse, "truncated model snapshot");
    RelationModel model = RelationModel::zeros(d, h);
    const auto count = get_u64(in);
    if (count != model.parameter_count())
        throw Error(ErrorCode::Parse, "parameter count does not match layer sizes");
    for (double& v : model.parameters()) {
        v = std::bit_cast<double>(get_u64(in));
        if (!std::isfinite(v))
            throw Error(ErrorCode::Parse, "model snapshot contains non-finite parameters");
    }
    model.extractor_id = std::move(extractor);
    model.seed = seed;
    return model;
}

void save_model(const RelationModel& model, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        write_model(out, model);
    }
    std::filesystem::rename(tmp, path);
}

RelationModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open model " + path.string());
    return read_model(in);
}

} // namespace imtriage
