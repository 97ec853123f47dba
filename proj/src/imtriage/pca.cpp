#include "imtriage/pca.hpp"

#include "imtriage/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace imtriage {

PCAModel pca_fit(const Eigen::MatrixXd& data, int k) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (n < 2)
        throw_invalid("PCA needs at least two samples");
    if (k < 1)
        throw_invalid("PCA needs k >= 1");
    if (d < 1)
        throw_invalid("PCA needs at least one input dimension");
    if (!data.allFinite())
        throw_invalid("PCA input contains non-finite values");

    PCAModel model;
    model.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

    const Eigen::Index kept = std::min<Eigen::Index>({static_cast<Eigen::Index>(k), d, n - 1});
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();

    model.components.resize(kept, d);
    model.explained_variance.resize(kept);
    for (Eigen::Index i = 0; i < kept; ++i) {
        Eigen::VectorXd v = svd.matrixV().col(i);
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(v(j)) > best) {
                best = std::abs(v(j));
                arg = j;
            }
        }
        if (v(arg) < 0)
            v = -v;
        model.components.row(i) = v.transpose();
        model.explained_variance(i) = s(i) * s(i) / static_cast<double>(n - 1);
    }
    return model;
}

Eigen::VectorXd pca_transform(const PCAModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim())
        throw_invalid("PCA input has length " + std::to_string(x.size()) + ", model expects " +
                      std::to_string(model.input_dim()));
    return model.components * (x - model.mean);
}

Eigen::MatrixXd pca_transform_rows(const PCAModel& model, const Eigen::MatrixXd& data) {
    if (data.cols() != model.input_dim())
        throw_invalid("PCA input has wrong column count");
    return (data.rowwise() - model.mean.transpose()) * model.components.transpose();
}

} // namespace imtriage
