#pragma once

#include "imtriage/features.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

namespace imtriage {

/// [|a - b|, a * b], symmetric in its arguments bit for bit.
std::vector<double> pair_features(std::span<const double> a, std::span<const double> b);

/// Two-layer perceptron scoring whether two feature vectors belong together:
/// pair_features -> ReLU(H) -> sigmoid.
///
/// Parameters are stored flat as [W1 (H x 2D, row-major) | b1 (H) | w2 (H) | b2].
class RelationModel {
public:
    RelationModel() = default;
    /// He-initialised weights, zero biases.
    RelationModel(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed);

    static RelationModel zeros(std::size_t feature_dim, std::size_t hidden);

    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t pair_dim() const noexcept { return 2 * feature_dim_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    // Views into the flat parameter block.
    std::span<const double> w1() const noexcept { return {params_.data(), hidden_ * pair_dim()}; }
    std::span<const double> b1() const noexcept { return {params_.data() + hidden_ * pair_dim(), hidden_}; }
    std::span<const double> w2() const noexcept { return {params_.data() + hidden_ * (pair_dim() + 1), hidden_}; }
    double b2() const noexcept { return params_.back(); }

    double logit(std::span<const double> pair) const;
    /// Membership probability, strictly inside (0, 1).
    double forward(std::span<const double> a, std::span<const double> b) const;

    std::string extractor_id = "gray16";
    std::uint64_t seed = 0;

    bool operator==(const RelationModel&) const = default;

private:
    std::size_t feature_dim_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> params_;
};

struct LabeledPair {
    const FeatureVector* a = nullptr;
    const FeatureVector* b = nullptr;
    double label = 0.0; // 0 or 1
};

struct GradientResult {
    std::vector<double> gradient; // same layout as RelationModel::parameters()
    double loss = 0.0;            // mean binary cross-entropy
};

GradientResult model_gradient(const RelationModel& model, std::span<const LabeledPair> batch);

/// Mean binary cross-entropy without gradients.
double model_loss(const RelationModel& model, std::span<const LabeledPair> batch);

class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

struct TrainConfig {
    int steps = 2000;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 7;

    void validate() const;
};

struct LabeledFeatures;

struct TrainResult {
    RelationModel model;
    std::vector<double> loss_history;
};

/// Called after each optimizer step with (completed, total, loss).
using TrainProgressFn = std::function<void(int, int, double)>;

TrainResult train(const RelationModel& initial, const LabeledFeatures& dataset, const TrainConfig& config,
                  std::stop_token stop = {}, const TrainProgressFn& progress = {});

void save_model(const RelationModel& model, const std::filesystem::path& path);
RelationModel load_model(const std::filesystem::path& path);
void write_model(std::ostream& out, const RelationModel& model);
RelationModel read_model(std::istream& in);

} // namespace imtriage
