#pragma once

#include <Eigen/Dense>

namespace imtriage {

struct PCAModel {
    Eigen::VectorXd mean;               // D
    Eigen::MatrixXd components;         // k' x D, orthonormal rows
    Eigen::VectorXd explained_variance; // k', non-increasing

    Eigen::Index input_dim() const { return mean.size(); }
    Eigen::Index output_dim() const { return components.rows(); }
};

/// Fits k' = min(k, D, n-1) principal directions of the rows of `data`.
/// Each component is oriented so its largest-magnitude entry is positive
/// (first such index on ties).
PCAModel pca_fit(const Eigen::MatrixXd& data, int k = 8);

Eigen::VectorXd pca_transform(const PCAModel& model, const Eigen::VectorXd& x);

/// Row-wise transform of an n x D matrix.
Eigen::MatrixXd pca_transform_rows(const PCAModel& model, const Eigen::MatrixXd& data);

} // namespace imtriage
