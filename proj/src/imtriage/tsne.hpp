#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <stop_token>
#include <vector>

namespace imtriage {

struct TsneParams {
    double perplexity = 30.0; // clamped to (n - 1) / 3 at run time
    int iterations = 1000;
    double learning_rate = 200.0; // clamped to n / 4 at run time
    double early_exaggeration = 12.0;
    int early_exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    std::uint64_t seed = 42;

    void validate() const;
    bool operator==(const TsneParams&) const = default;
};

struct KlCheckpoint {
    int iteration = 0; // number of completed updates
    double kl = 0.0;
    bool operator==(const KlCheckpoint&) const = default;
};

struct TsneResult {
    Eigen::MatrixXd coords; // n x 2
    std::vector<KlCheckpoint> kl_trace;
    TsneParams params_used;
};

struct CalibratedRow {
    double sigma = 0.0;
    std::vector<double> p;
    double perplexity = 0.0; // achieved
    bool degenerate = false; // every distance was zero
};

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr int kKlCheckpointEvery = 50;

/// Finds the Gaussian bandwidth whose conditional distribution over the given
/// squared distances has the requested perplexity (bisection in log-precision).
CalibratedRow perplexity_calibrate(std::span<const double> sq_distances, double target_perplexity);

/// Symmetrised joint affinities p_ij = (p_j|i + p_i|j) / 2n; zero diagonal.
Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& data, double perplexity);

/// KL(P || Q) for the Student-t kernel Q induced by `coords`.
double tsne_kl(const Eigen::MatrixXd& P, const Eigen::MatrixXd& coords);

/// 4 sum_j (e p_ij - q_ij) w_ij (y_i - y_j): the KL gradient for e = 1, and
/// the exaggerated update used during early exaggeration otherwise.
Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& P, const Eigen::MatrixXd& coords, double exaggeration = 1.0);

/// Called after every iteration with (completed, total).
using ProgressFn = std::function<void(int, int)>;

/// Exact O(n^2) t-SNE into two dimensions. Honours `stop` between iterations
/// by throwing Error(Cancelled).
TsneResult tsne_embed(const Eigen::MatrixXd& data, TsneParams params, std::stop_token stop = {},
                      const ProgressFn& progress = {});

} // namespace imtriage
