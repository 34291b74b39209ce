#pragma once

// Distances and kernels on the SPD manifold (log-Euclidean) and the
// Grassmann manifold (projection metric), plus Gram-matrix and probe
// kernel-vector assembly.
//
// Every kernel here is evaluated so that swapping the two arguments yields
// a bitwise-identical double: reductions run in an argument-independent
// order. Gram matrices are therefore exactly symmetric, and the kernel
// vector of a gallery member reproduces its Gram column exactly.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmml/set_model.hpp"

namespace mmml {

enum class KernelKind {
    LogEuclidean,  // on SPD points, tr[log(C_i) log(C_j)]
    Projection,    // on subspaces, ||Y_i^T Y_j||_F^2
};

const char* kernel_kind_name(KernelKind kind);
KernelKind kernel_kind_from_name(const std::string& name);

// Low-level forms on the cached representations. The *_logs functions take
// matrix logarithms, the *_bases functions orthonormal bases.
double log_euclidean_kernel_logs(const Eigen::MatrixXd& log_a, const Eigen::MatrixXd& log_b);
double led_distance_logs(const Eigen::MatrixXd& log_a, const Eigen::MatrixXd& log_b);
double projection_kernel_bases(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yb);
double projection_distance_bases(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yb);

double led_distance(const SpdPoint& a, const SpdPoint& b);
double log_euclidean_kernel(const SpdPoint& a, const SpdPoint& b);
double projection_distance(const GrassmannPoint& a, const GrassmannPoint& b);
double projection_kernel(const GrassmannPoint& a, const GrassmannPoint& b);

// N x N Gram matrix over a gallery; symmetrized, PSD-checked (smallest
// eigenvalue >= -1e-8 * largest). A PSD violation beyond tolerance throws
// NumericalError, since it signals an upstream modeling bug.
Eigen::MatrixXd gram_matrix(const std::vector<SpdPoint>& points);
Eigen::MatrixXd gram_matrix(const std::vector<GrassmannPoint>& points);

// Kernel values of one probe against every gallery point.
Eigen::VectorXd kernel_vector(const SpdPoint& probe, const std::vector<SpdPoint>& gallery);
Eigen::VectorXd kernel_vector(const GrassmannPoint& probe,
                              const std::vector<GrassmannPoint>& gallery);

// In-place trace normalization: divide by the mean diagonal entry. Returns
// the divisor so probe kernel vectors can be scaled consistently.
// Experimentation aid; the default pipeline applies kernels raw.
double trace_normalize(Eigen::MatrixXd& gram);

// The per-model training Gram matrices sharing one gallery ordering.
struct KernelStack {
    std::vector<Eigen::MatrixXd> grams;
    std::vector<KernelKind> kinds;
    std::vector<double> scales;  // trace-normalization divisors, 1.0 when raw
    std::vector<std::string> set_ids;

    Eigen::Index models() const { return static_cast<Eigen::Index>(grams.size()); }
    Eigen::Index size() const { return grams.empty() ? 0 : grams.front().rows(); }
};

}  // namespace mmml
