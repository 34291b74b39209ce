#pragma once

// Shared test fixtures: random matrix generators and brute-force oracles
// kept deliberately independent of the library's computation paths.

#include <vector>

#include <Eigen/Dense>

#include "mmml/kernels.hpp"
#include "mmml/metric_learning.hpp"
#include "mmml/rng.hpp"
#include "mmml/set_model.hpp"

namespace testsupport {

inline Eigen::MatrixXd random_matrix(mmml::Rng& rng, Eigen::Index rows,
                                     Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = rng.gaussian();
        }
    }
    return m;
}

inline Eigen::MatrixXd random_symmetric(mmml::Rng& rng, Eigen::Index d) {
    const Eigen::MatrixXd a = random_matrix(rng, d, d);
    return 0.5 * (a + a.transpose());
}

inline Eigen::MatrixXd random_spd(mmml::Rng& rng, Eigen::Index d, double ridge = 0.1) {
    const Eigen::MatrixXd a = random_matrix(rng, d, d);
    Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(d);
    s.diagonal().array() += ridge;
    return 0.5 * (s + s.transpose()).eval();
}

inline mmml::SpdPoint random_spd_point(mmml::Rng& rng, Eigen::Index d) {
    return mmml::make_spd_point(random_spd(rng, d));
}

inline Eigen::MatrixXd random_orthonormal(mmml::Rng& rng, Eigen::Index d,
                                          Eigen::Index q) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, d, q));
    Eigen::MatrixXd full = qr.householderQ();
    return full.leftCols(q);
}

inline mmml::GrassmannPoint random_grassmann(mmml::Rng& rng, Eigen::Index d,
                                             Eigen::Index q) {
    return mmml::GrassmannPoint{random_orthonormal(rng, d, q)};
}

// Eq-literal projection distance through the full d x d projectors.
inline double projection_distance_literal(const mmml::GrassmannPoint& a,
                                          const mmml::GrassmannPoint& b) {
    const Eigen::MatrixXd pa = a.basis * a.basis.transpose();
    const Eigen::MatrixXd pb = b.basis * b.basis.transpose();
    return (pa - pb).norm() / std::sqrt(2.0);
}

// Matrix exponential of a symmetric matrix by eigen reconstruction;
// inverse route for log round-trip checks.
inline Eigen::MatrixXd sym_exp(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
           eig.eigenvectors().transpose();
}

// Scatter matrices straight from their definition: an explicit loop over
// ordered index pairs, one outer product at a time.
inline mmml::ScatterPair scatter_bruteforce(const mmml::KernelStack& stack,
                                            const std::vector<std::string>& labels,
                                            const std::vector<double>& u) {
    const Eigen::Index n = stack.size();
    mmml::ScatterPair out;
    out.r_w = Eigen::MatrixXd::Zero(n, n);
    out.r_b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const bool same = labels[static_cast<std::size_t>(i)] ==
                              labels[static_cast<std::size_t>(j)];
            (same ? out.m_w : out.m_b) += 1;
            for (std::size_t q = 0; q < stack.grams.size(); ++q) {
                const Eigen::VectorXd diff =
                    stack.grams[q].col(i) - stack.grams[q].col(j);
                const Eigen::MatrixXd outer = (u[q] * u[q]) * (diff * diff.transpose());
                (same ? out.r_w : out.r_b) += outer;
            }
        }
    }
    out.r_w /= static_cast<double>(out.m_w);
    out.r_b /= static_cast<double>(out.m_b);
    return out;
}

// Learned squared distance between gallery members i and j evaluated as the
// trace form tr[E^T (sum_q u_q (K_i - K_j)(K_i - K_j)^T u_q) E].
inline double trace_distance_oracle(const Eigen::MatrixXd& e_mat,
                                    const mmml::KernelStack& stack,
                                    const std::vector<double>& u, Eigen::Index i,
                                    Eigen::Index j) {
    const Eigen::Index n = stack.size();
    Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < stack.grams.size(); ++q) {
        const Eigen::VectorXd diff = stack.grams[q].col(i) - stack.grams[q].col(j);
        accum += (u[q] * u[q]) * (diff * diff.transpose());
    }
    return (e_mat.transpose() * accum * e_mat).trace();
}

// Gram-Schmidt in the W inner product: returns E with E^T W E = I.
inline Eigen::MatrixXd w_orthonormalize(const Eigen::MatrixXd& x,
                                        const Eigen::MatrixXd& w) {
    Eigen::MatrixXd e = x;
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k) {
            const double proj = e.col(k).dot(w * e.col(j));
            e.col(j) -= proj * e.col(k);
        }
        const double norm = std::sqrt(e.col(j).dot(w * e.col(j)));
        e.col(j) /= norm;
    }
    return e;
}

// A small random training problem over both kernels; labels alternate over
// `classes` values.
struct RandomInstance {
    mmml::KernelStack stack;
    std::vector<std::string> labels;
    std::vector<double> u;
    mmml::GalleryAnchors anchors;
    std::vector<mmml::SpdPoint> spd;
    std::vector<mmml::GrassmannPoint> grass;
};

inline RandomInstance random_instance(mmml::Rng& rng, Eigen::Index n, Eigen::Index d,
                                      Eigen::Index q, int classes) {
    RandomInstance inst;
    for (Eigen::Index i = 0; i < n; ++i) {
        inst.spd.push_back(random_spd_point(rng, d));
        inst.grass.push_back(random_grassmann(rng, d, q));
        inst.labels.push_back("class" + std::to_string(i % classes));
        inst.stack.set_ids.push_back("set" + std::to_string(i));
        inst.anchors.spd_logs.push_back(inst.spd.back().log_c);
        inst.anchors.bases.push_back(inst.grass.back().basis);
    }
    inst.anchors.q = static_cast<int>(q);
    inst.anchors.alpha = 1000.0;
    inst.stack.grams.push_back(mmml::gram_matrix(inst.spd));
    inst.stack.grams.push_back(mmml::gram_matrix(inst.grass));
    inst.stack.kinds = {mmml::KernelKind::LogEuclidean, mmml::KernelKind::Projection};
    inst.stack.scales = {1.0, 1.0};
    inst.u = {0.8, 0.2};
    return inst;
}

}  // namespace testsupport
