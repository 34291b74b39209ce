#pragma once

// Turns a labeled image set (d x n sample matrix, one vectorized image per
// column) into its two manifold representations: a regularized covariance
// matrix with cached logarithm, and the linear subspace spanned by the
// leading eigenvectors of that covariance.

#include <string>
#include <utility>

#include <Eigen/Dense>

namespace mmml {

struct ImageSet {
    Eigen::MatrixXd samples;  // d x n, n >= 2
    std::string label;
    std::string set_id;

    Eigen::Index dim() const { return samples.rows(); }
    Eigen::Index size() const { return samples.cols(); }
};

// SPD manifold point: regularized covariance plus its matrix logarithm,
// computed once at construction. Immutable after construction.
struct SpdPoint {
    Eigen::MatrixXd c_star;
    Eigen::MatrixXd log_c;

    Eigen::Index dim() const { return c_star.rows(); }
};

// Grassmann manifold point: d x q orthonormal basis of a q-dimensional
// subspace of R^d.
struct GrassmannPoint {
    Eigen::MatrixXd basis;

    Eigen::Index dim() const { return basis.rows(); }
    Eigen::Index q() const { return basis.cols(); }
};

Eigen::VectorXd mean_vector(const ImageSet& set);

// Sample covariance, 1/(n-1) normalization, mean-centered.
Eigen::MatrixXd covariance(const ImageSet& set);

// C* = C + tr(C)/alpha * I. Rejects tr(C) <= 0 (all-constant set): the
// shift is proportional to tr(C), so no regularization is possible.
Eigen::MatrixXd regularize_spd(const Eigen::MatrixXd& c, double alpha);

GrassmannPoint grassmann_basis(const Eigen::MatrixXd& c_star, int q);

SpdPoint make_spd_point(const Eigen::MatrixXd& c_star);

// Full set-modeling pipeline: covariance -> regularize -> (log, subspace).
// q must satisfy q <= min(d, n-1); beyond the covariance rank the leading
// eigenvectors are regularization noise.
std::pair<SpdPoint, GrassmannPoint> model_set(const ImageSet& set, int q, double alpha);

}  // namespace mmml
