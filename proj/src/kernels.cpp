#include "mmml/kernels.hpp"

#include <cmath>
#include <sstream>

#include "mmml/errors.hpp"
#include "mmml/spectral.hpp"

namespace mmml {

const char* kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::LogEuclidean: return "log_euclidean";
        case KernelKind::Projection: return "projection";
    }
    throw Error("unknown kernel kind");
}

KernelKind kernel_kind_from_name(const std::string& name) {
    if (name == "log_euclidean") return KernelKind::LogEuclidean;
    if (name == "projection") return KernelKind::Projection;
    throw FormatError("unknown kernel kind '" + name + "'");
}

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << who << ": operands are " << a.rows() << "x" << a.cols() << " and "
            << b.rows() << "x" << b.cols();
        throw DimensionError(msg.str());
    }
}

}  // namespace

double log_euclidean_kernel_logs(const Eigen::MatrixXd& log_a,
                                 const Eigen::MatrixXd& log_b) {
    require_same_shape(log_a, log_b, "log_euclidean_kernel");
    // tr(AB) for symmetric A, B as an elementwise product; the reduction
    // order depends only on the shape, so the value is argument-symmetric
    // down to the last bit.
    return log_a.cwiseProduct(log_b).sum();
}

double led_distance_logs(const Eigen::MatrixXd& log_a, const Eigen::MatrixXd& log_b) {
    require_same_shape(log_a, log_b, "led_distance");
    return (log_a - log_b).norm();
}

double projection_kernel_bases(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yb) {
    require_same_shape(ya, yb, "projection_kernel");
    const Eigen::Index q = ya.cols();
    // ||Ya^T Yb||_F^2 accumulated in a canonical order: diagonal first, then
    // each unordered entry pair (i, j) as m_ij^2 + m_ji^2. Swapping the
    // arguments transposes M and leaves every partial sum bitwise unchanged.
    Eigen::MatrixXd m(q, q);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) {
            m(i, j) = ya.col(i).dot(yb.col(j));
        }
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        total += m(i, i) * m(i, i);
    }
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = i + 1; j < q; ++j) {
            total += m(i, j) * m(i, j) + m(j, i) * m(j, i);
        }
    }
    return total;
}

double projection_distance_bases(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yb) {
    require_same_shape(ya, yb, "projection_distance");
    // The cancellation in q - ||.||^2 leaves a sqrt(eps) floor, so equal
    // bases are answered exactly rather than at ~1e-8.
    if (ya == yb) return 0.0;
    const double q = static_cast<double>(ya.cols());
    // sqrt(q - ||Ya^T Yb||^2) equals 2^-1/2 ||Ya Ya^T - Yb Yb^T||_F: both
    // projectors have trace q, and the cross term is the kernel.
    return std::sqrt(std::max(0.0, q - projection_kernel_bases(ya, yb)));
}

double led_distance(const SpdPoint& a, const SpdPoint& b) {
    return led_distance_logs(a.log_c, b.log_c);
}

double log_euclidean_kernel(const SpdPoint& a, const SpdPoint& b) {
    return log_euclidean_kernel_logs(a.log_c, b.log_c);
}

double projection_distance(const GrassmannPoint& a, const GrassmannPoint& b) {
    return projection_distance_bases(a.basis, b.basis);
}

double projection_kernel(const GrassmannPoint& a, const GrassmannPoint& b) {
    return projection_kernel_bases(a.basis, b.basis);
}

namespace {

void check_gram_psd(const Eigen::MatrixXd& gram, const char* kernel_name) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram,
                                                          Eigen::EigenvaluesOnly);
    const double min_eig = solver.eigenvalues().minCoeff();
    const double max_eig = solver.eigenvalues().maxCoeff();
    if (min_eig < -1e-8 * std::max(max_eig, 0.0)) {
        std::ostringstream msg;
        msg << kernel_name << " Gram matrix not PSD: min eigenvalue " << min_eig
            << " vs max " << max_eig << " (upstream modeling bug?)";
        throw NumericalError(msg.str());
    }
}

template <typename Point, typename Kernel>
Eigen::MatrixXd build_gram(const std::vector<Point>& points, Kernel&& kernel,
                           const char* kernel_name) {
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double value = kernel(points[i], points[j]);
            gram(i, j) = value;
            gram(j, i) = value;
        }
    }
    gram = 0.5 * (gram + gram.transpose()).eval();
    check_gram_psd(gram, kernel_name);
    return gram;
}

}  // namespace

Eigen::MatrixXd gram_matrix(const std::vector<SpdPoint>& points) {
    return build_gram(points, [](const SpdPoint& a, const SpdPoint& b) {
        return log_euclidean_kernel(a, b);
    }, "log_euclidean");
}

Eigen::MatrixXd gram_matrix(const std::vector<GrassmannPoint>& points) {
    return build_gram(points, [](const GrassmannPoint& a, const GrassmannPoint& b) {
        return projection_kernel(a, b);
    }, "projection");
}

Eigen::VectorXd kernel_vector(const SpdPoint& probe, const std::vector<SpdPoint>& gallery) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(gallery.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out(i) = log_euclidean_kernel(probe, gallery[static_cast<std::size_t>(i)]);
    }
    return out;
}

Eigen::VectorXd kernel_vector(const GrassmannPoint& probe,
                              const std::vector<GrassmannPoint>& gallery) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(gallery.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out(i) = projection_kernel(probe, gallery[static_cast<std::size_t>(i)]);
    }
    return out;
}

double trace_normalize(Eigen::MatrixXd& gram) {
    const double mean_diag = gram.diagonal().mean();
    if (mean_diag <= 0.0) {
        throw NumericalError("trace_normalize: mean diagonal is not positive");
    }
    gram /= mean_diag;
    return mean_diag;
}

}  // namespace mmml
