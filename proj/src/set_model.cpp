#include "mmml/set_model.hpp"

#include <sstream>

#include "mmml/errors.hpp"
#include "mmml/spectral.hpp"

namespace mmml {

namespace {

void require_modelable(const ImageSet& set) {
    if (set.size() < 2) {
        std::ostringstream msg;
        msg << "image set '" << set.set_id << "' has " << set.size()
            << " samples, need at least 2";
        throw DegenerateSetError(msg.str());
    }
}

}  // namespace

Eigen::VectorXd mean_vector(const ImageSet& set) {
    if (set.size() < 1) {
        throw DegenerateSetError("mean_vector: empty image set '" + set.set_id + "'");
    }
    return set.samples.rowwise().mean();
}

Eigen::MatrixXd covariance(const ImageSet& set) {
    require_modelable(set);
    const Eigen::VectorXd m = mean_vector(set);
    const Eigen::MatrixXd centered = set.samples.colwise() - m;
    Eigen::MatrixXd c = centered * centered.transpose() /
                        static_cast<double>(set.size() - 1);
    return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd regularize_spd(const Eigen::MatrixXd& c, double alpha) {
    require_symmetric(c, "regularize_spd");
    if (alpha <= 0.0) {
        throw NumericalError("regularize_spd: alpha must be positive");
    }
    const double trace = c.trace();
    if (trace <= 0.0) {
        throw DegenerateSetError(
            "regularize_spd: tr(C) <= 0 (all-constant set cannot be regularized)");
    }
    Eigen::MatrixXd out = c;
    out.diagonal().array() += trace / alpha;
    return out;
}

GrassmannPoint grassmann_basis(const Eigen::MatrixXd& c_star, int q) {
    return GrassmannPoint{top_q_eigvecs(c_star, q)};
}

SpdPoint make_spd_point(const Eigen::MatrixXd& c_star) {
    return SpdPoint{c_star, matrix_log_spd(c_star)};
}

std::pair<SpdPoint, GrassmannPoint> model_set(const ImageSet& set, int q, double alpha) {
    require_modelable(set);
    const auto rank_bound =
        std::min(set.dim(), set.size() - 1);
    if (q < 1 || q > rank_bound) {
        std::ostringstream msg;
        msg << "model_set: q = " << q << " exceeds min(d, n-1) = " << rank_bound
            << " for set '" << set.set_id << "' (d = " << set.dim()
            << ", n = " << set.size() << ")";
        throw DimensionError(msg.str());
    }
    const Eigen::MatrixXd c_star = regularize_spd(covariance(set), alpha);
    SpdPoint spd = make_spd_point(c_star);
    GrassmannPoint subspace = grassmann_basis(c_star, q);
    return {std::move(spd), std::move(subspace)};
}

}  // namespace mmml
