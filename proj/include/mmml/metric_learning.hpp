#pragma once

// Kernelized discriminant metric learning across multiple manifold models:
// within/between-class scatter assembly from per-model Gram matrices, the
// trace-quotient eigenproblem for the coefficient matrix E, embedding of
// probes through kernel vectors, and nearest-neighbor classification under
// the learned distance.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmml/kernels.hpp"
#include "mmml/set_model.hpp"

namespace mmml {

struct ScatterPair {
    Eigen::MatrixXd r_w;   // within-class scatter, N x N PSD
    Eigen::MatrixXd r_b;   // between-class scatter, N x N PSD
    std::int64_t m_w = 0;  // ordered same-class pair count, self-pairs excluded
    std::int64_t m_b = 0;  // ordered different-class pair count
};

// Gallery-side manifold representations needed to evaluate probe kernel
// vectors later: matrix logarithms for the log-Euclidean model, orthonormal
// bases for the projection model. A vector is empty when the corresponding
// model is absent from the stack.
struct GalleryAnchors {
    std::vector<Eigen::MatrixXd> spd_logs;
    std::vector<Eigen::MatrixXd> bases;
    int q = 0;
    double alpha = 0.0;
};

struct EmbeddingModel {
    Eigen::MatrixXd e_mat;                 // N x d_z coefficients, columns W-normalized
    Eigen::VectorXd gen_eigenvalues;       // generalized eigenvalues behind e_mat
    std::vector<double> u;                 // connection weights, strictly positive
    std::vector<KernelKind> kinds;         // model q -> kernel kind
    std::vector<double> gram_scales;       // trace-normalization divisors (1.0 = raw)
    std::vector<std::string> gallery_labels;
    std::vector<std::string> gallery_set_ids;
    GalleryAnchors anchors;
    Eigen::MatrixXd gallery_embeddings;    // (Q * d_z) x N, cached at training
    int d_z = 0;

    Eigen::Index size() const { return e_mat.rows(); }
    Eigen::Index models() const { return static_cast<Eigen::Index>(kinds.size()); }
};

struct Neighbor {
    int gallery_index;
    std::string label;
    double distance;  // squared distance in the learned embedding
};

struct Classification {
    std::string label;
    std::vector<Neighbor> neighbors;  // ascending distance, ties by gallery index
};

// Within/between scatters over ordered index pairs, weights entering
// squared. Throws ProtocolError when no same-class or no different-class
// pair exists.
ScatterPair scatter_matrices(const KernelStack& stack,
                             const std::vector<std::string>& labels,
                             const std::vector<double>& u);

// r_w <- r_w + eps * (tr(r_w)/N) * I; scale-relative ridge making the
// within scatter safely positive definite.
ScatterPair regularize_scatter(ScatterPair scatter, double eps);

EmbeddingModel train(const KernelStack& stack, const std::vector<std::string>& labels,
                     const std::vector<double>& u, int d_z, double eps,
                     GalleryAnchors anchors);

// Probe embedding from its per-model raw kernel vectors against the gallery
// anchors: concatenation over models of u_q * E^T k^q (after undoing any
// recorded Gram normalization). Length Q * d_z.
Eigen::VectorXd embed(const EmbeddingModel& model,
                      const std::vector<Eigen::VectorXd>& kvecs);

// Squared Euclidean distance between the two embeddings.
double learned_distance(const EmbeddingModel& model,
                        const std::vector<Eigen::VectorXd>& kvecs_a,
                        const std::vector<Eigen::VectorXd>& kvecs_b);

// Nearest gallery neighbor of a probe modeled with the same d, q, alpha as
// the gallery. Unused probe representations are ignored for single-model
// stacks.
Classification classify(const EmbeddingModel& model, const SpdPoint& probe_spd,
                        const GrassmannPoint& probe_grass);

// Trace quotient tr(E^T r_b E) / tr(E^T r_w E).
double objective_value(const Eigen::MatrixXd& e_mat, const ScatterPair& scatter);

}  // namespace mmml
