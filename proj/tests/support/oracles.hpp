#pragma once

// Reference computations written independently of the library under test.
// They favour directness over speed.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace imt_test {

using Matrix = std::vector<std::vector<double>>;

/// Area-average pooling by supersampling: every source pixel is split into
/// out x out sub-pixels, then each output cell averages one block.
std::vector<double> pool_by_supersampling(const Matrix& gray, int out);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues sorted
/// descending; eigenvectors returned as rows.
struct EigenPairs {
    std::vector<double> values;
    Matrix vectors;
};
EigenPairs jacobi_eigen(Matrix a, int max_sweeps = 100);

/// Sample covariance (n - 1) of the rows of x.
Matrix covariance(const Matrix& x);

/// Upper bound on the largest principal angle between the row spaces of two
/// orthonormal row bases: asin of the Frobenius residual of projecting A onto B.
double max_principal_angle(const Matrix& a, const Matrix& b);

/// Perplexity calibration by plain bisection on sigma (not precision).
struct BisectionRow {
    double sigma = 0;
    std::vector<double> p;
    double perplexity = 0;
};
BisectionRow bisect_sigma(const std::vector<double>& sq_distances, double target);

/// Trustworthiness of a low-dimensional embedding with k neighbours.
double trustworthiness(const Matrix& high, const Matrix& low, int k);

/// The auto-group rule on a probability table: argmax (first wins) if >= threshold.
std::vector<std::optional<int>> auto_group_rule(const Matrix& probabilities, double threshold);

/// Nearest-group proximity scan by enumeration.
struct ProxGroup {
    std::string id;
    std::vector<std::pair<double, double>> members;
};
struct ProxImage {
    std::string id;
    double x = 0, y = 0;
};
struct ProxHit {
    std::string image_id, group_id;
    double distance = 0;
};
std::vector<ProxHit> proximity_scan(const std::vector<ProxGroup>& groups, const std::vector<ProxImage>& images,
                                    double min_radius, double factor);

/// Central differences of f at x, step h.
std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6);

} // namespace imt_test
