#include "imtriage/tsne.hpp"

#include "imtriage/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace imtriage {

void TsneParams::validate() const {
    if (!(perplexity > 0) || iterations <= 0 || !(learning_rate > 0) || !(early_exaggeration > 0) ||
        early_exaggeration_iters <= 0 || !(initial_momentum > 0) || !(final_momentum > 0) ||
        momentum_switch_iter <= 0)
        throw_invalid("t-SNE parameters must be positive");
    if (early_exaggeration_iters >= iterations)
        throw_invalid("early exaggeration must end before the last iteration");
}

namespace {

struct RowEval {
    std::vector<double> p;
    double perplexity;
};

// p_j proportional to exp(-beta * (d_j - d_min)).
RowEval evaluate_row(std::span<const double> shifted, double beta) {
    RowEval out{std::vector<double>(shifted.size()), 0.0};
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < shifted.size(); ++j) {
        const double w = std::exp(-beta * shifted[j]);
        out.p[j] = w;
        sum += w;
        weighted += w * shifted[j];
    }
    for (auto& v : out.p)
        v /= sum;
    const double entropy = std::log(sum) + beta * weighted / sum;
    out.perplexity = std::exp(entropy);
    return out;
}

} // namespace

CalibratedRow perplexity_calibrate(std::span<const double> sq_distances, double target_perplexity) {
    if (sq_distances.empty())
        throw_invalid("perplexity calibration needs at least one neighbour");
    if (!(target_perplexity > 0))
        throw_invalid("target perplexity must be positive");
    for (double d : sq_distances)
        if (!(d >= 0) || !std::isfinite(d))
            throw_invalid("squared distances must be finite and non-negative");

    const auto [min_it, max_it] = std::minmax_element(sq_distances.begin(), sq_distances.end());
    const double dmin = *min_it;
    const double spread = *max_it - dmin;
    const std::size_t m = sq_distances.size();

    CalibratedRow row;
    if (spread == 0.0) {
        row.p.assign(m, 1.0 / static_cast<double>(m));
        row.perplexity = static_cast<double>(m);
        row.degenerate = (*max_it == 0.0);
        row.sigma = row.degenerate ? std::numeric_limits<double>::infinity() : std::sqrt(0.5);
        return row;
    }

    std::vector<double> shifted(m);
    double gap = spread;
    for (std::size_t j = 0; j < m; ++j) {
        shifted[j] = sq_distances[j] - dmin;
        if (shifted[j] > 0)
            gap = std::min(gap, shifted[j]);
    }

    // log(beta) bracket: at lo the row is uniform to ~1e-10, at hi every
    // non-minimal neighbour underflows to zero.
    double lo = std::log(1e-10 / spread);
    double hi = std::log(800.0 / gap);
    auto finish = [&](double log_beta, RowEval eval) {
        row.p = std::move(eval.p);
        row.perplexity = eval.perplexity;
        row.sigma = std::sqrt(0.5 / std::exp(log_beta));
        return row;
    };

    RowEval at_lo = evaluate_row(shifted, std::exp(lo));
    if (target_perplexity >= at_lo.perplexity)
        return finish(lo, std::move(at_lo));
    RowEval at_hi = evaluate_row(shifted, std::exp(hi));
    if (target_perplexity <= at_hi.perplexity)
        return finish(hi, std::move(at_hi));

    double mid = 0.5 * (lo + hi);
    RowEval eval = evaluate_row(shifted, std::exp(mid));
    for (int it = 0; it < 64; ++it) {
        mid = 0.5 * (lo + hi);
        eval = evaluate_row(shifted, std::exp(mid));
        const double diff = eval.perplexity - target_perplexity;
        if (std::abs(diff) < 1e-5)
            break;
        // perplexity decreases as beta grows
        if (diff > 0)
            lo = mid;
        else
            hi = mid;
    }
    return finish(mid, std::move(eval));
}

Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& data, double perplexity) {
    const Eigen::Index n = data.rows();
    Eigen::MatrixXd conditional = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> dist(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                dist[k++] = (data.row(i) - data.row(j)).squaredNorm();
        const CalibratedRow row = perplexity_calibrate(dist, perplexity);
        k = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                conditional(i, j) = row.p[k++];
    }
    return (conditional + conditional.transpose()) / (2.0 * static_cast<double>(n));
}

namespace {

// Unnormalised Student-t kernel 1 / (1 + |y_i - y_j|^2), zero diagonal.
Eigen::MatrixXd student_kernel(const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd num(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        num(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            num(i, j) = v;
            num(j, i) = v;
        }
    }
    return num;
}

} // namespace

double tsne_kl(const Eigen::MatrixXd& P, const Eigen::MatrixXd& coords) {
    const Eigen::MatrixXd num = student_kernel(coords);
    const double z = num.sum();
    const Eigen::Index n = P.rows();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double p = P(i, j);
            if (i == j || p <= 0.0)
                continue;
            const double q = num(i, j) / z;
            kl += p * std::log(std::max(p, kProbabilityFloor) / std::max(q, kProbabilityFloor));
        }
    }
    return kl;
}

Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& P, const Eigen::MatrixXd& coords, double exaggeration) {
    const Eigen::Index n = coords.rows();
    const Eigen::MatrixXd num = student_kernel(coords);
    const double z = num.sum();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        double gx = 0.0;
        double gy = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double mult = (exaggeration * P(i, j) - num(i, j) / z) * num(i, j);
            gx += mult * (coords(i, 0) - coords(j, 0));
            gy += mult * (coords(i, 1) - coords(j, 1));
        }
        grad(i, 0) = 4.0 * gx;
        grad(i, 1) = 4.0 * gy;
    }
    return grad;
}

TsneResult tsne_embed(const Eigen::MatrixXd& data, TsneParams params, std::stop_token stop,
                      const ProgressFn& progress) {
    const Eigen::Index n = data.rows();
    if (n < 2)
        throw_invalid("t-SNE needs at least two points");
    if (!data.allFinite())
        throw_invalid("t-SNE input contains non-finite values");
    params.validate();
    params.perplexity = std::min(params.perplexity, static_cast<double>(n - 1) / 3.0);
    // Without adaptive gains a fixed step overshoots on small inputs, where
    // the affinities (and so the gradient) are larger.
    params.learning_rate = std::min(params.learning_rate, static_cast<double>(n) / 4.0);

    const Eigen::MatrixXd P = joint_probabilities(data, params.perplexity);

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1e-4);
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = normal(rng);
        y(i, 1) = normal(rng);
    }
    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);

    TsneResult result;
    for (int iter = 0; iter < params.iterations; ++iter) {
        if (stop.stop_requested())
            throw Error(ErrorCode::Cancelled, "t-SNE cancelled at iteration " + std::to_string(iter));

        const double exaggeration = iter < params.early_exaggeration_iters ? params.early_exaggeration : 1.0;
        const double momentum = iter < params.momentum_switch_iter ? params.initial_momentum : params.final_momentum;
        const Eigen::MatrixXd grad = tsne_gradient(P, y, exaggeration);
        velocity = momentum * velocity - params.learning_rate * grad;
        y += velocity;
        y.rowwise() -= y.colwise().mean();

        if (!y.allFinite())
            throw Error(ErrorCode::Optimizer, "t-SNE diverged at iteration " + std::to_string(iter + 1));

        const int done = iter + 1;
        if (done % kKlCheckpointEvery == 0 || done == params.iterations)
            result.kl_trace.push_back({done, tsne_kl(P, y)});
        if (progress)
            progress(done, params.iterations);
    }

    result.coords = std::move(y);
    result.params_used = params;
    return result;
}

} // namespace imtriage
