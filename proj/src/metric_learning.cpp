#include "mmml/metric_learning.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "mmml/errors.hpp"
#include "mmml/spectral.hpp"

namespace mmml {

namespace {

std::map<std::string, std::vector<Eigen::Index>> group_by_label(
    const std::vector<std::string>& labels) {
    std::map<std::string, std::vector<Eigen::Index>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        classes[labels[i]].push_back(static_cast<Eigen::Index>(i));
    }
    return classes;
}

void require_weights(const std::vector<double>& u, std::size_t models) {
    if (u.size() != models) {
        throw DimensionError("connection weight count does not match model count");
    }
    for (double w : u) {
        if (!(w > 0.0)) {
            throw NumericalError("connection weights must be strictly positive");
        }
    }
}

namespace detail {

// Embedding from kernel vectors already on the (possibly normalized) scale
// of the training Grams. Both the gallery cache and the probe path funnel
// through here so equal inputs give bitwise-equal embeddings.
Eigen::VectorXd embed_scaled(const EmbeddingModel& model,
                             const std::vector<Eigen::VectorXd>& kvecs) {
    Eigen::VectorXd out(model.models() * model.d_z);
    for (std::size_t q = 0; q < kvecs.size(); ++q) {
        out.segment(static_cast<Eigen::Index>(q) * model.d_z, model.d_z) =
            model.u[q] * (model.e_mat.transpose() * kvecs[q]);
    }
    return out;
}

}  // namespace detail

}  // namespace

ScatterPair scatter_matrices(const KernelStack& stack,
                             const std::vector<std::string>& labels,
                             const std::vector<double>& u) {
    const Eigen::Index n = stack.size();
    if (n == 0 || stack.grams.empty()) {
        throw DimensionError("scatter_matrices: empty kernel stack");
    }
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw DimensionError("scatter_matrices: label count does not match Gram size");
    }
    for (const auto& gram : stack.grams) {
        if (gram.rows() != n || gram.cols() != n) {
            throw DimensionError("scatter_matrices: Gram matrices disagree on size");
        }
    }
    require_weights(u, stack.grams.size());

    const auto classes = group_by_label(labels);
    std::int64_t m_w = 0;
    for (const auto& [label, members] : classes) {
        const auto c = static_cast<std::int64_t>(members.size());
        m_w += c * (c - 1);
    }
    const std::int64_t m_b = static_cast<std::int64_t>(n) * (n - 1) - m_w;
    if (m_w == 0) {
        throw ProtocolError("scatter_matrices: no same-class pair (all labels distinct)");
    }
    if (m_b == 0) {
        throw ProtocolError("scatter_matrices: no different-class pair (single class)");
    }

    // Sum over ordered pairs of (K_i - K_j)(K_i - K_j)^T restricted to an
    // index group G collapses to 2 * (|G| * K_G K_G^T - s_G s_G^T) with
    // s_G the column sum; the pair loop itself is kept as a test oracle.
    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < stack.grams.size(); ++q) {
        const Eigen::MatrixXd& k = stack.grams[q];
        const double w2 = u[q] * u[q];

        for (const auto& [label, members] : classes) {
            const Eigen::Index c = static_cast<Eigen::Index>(members.size());
            if (c < 2) continue;
            Eigen::MatrixXd k_c(n, c);
            for (Eigen::Index j = 0; j < c; ++j) {
                k_c.col(j) = k.col(members[static_cast<std::size_t>(j)]);
            }
            const Eigen::VectorXd s_c = k_c.rowwise().sum();
            within.noalias() +=
                (2.0 * w2) * (static_cast<double>(c) * (k_c * k_c.transpose()) -
                              s_c * s_c.transpose());
        }

        const Eigen::VectorXd s = k.rowwise().sum();
        total.noalias() += (2.0 * w2) * (static_cast<double>(n) * (k * k.transpose()) -
                                         s * s.transpose());
    }

    ScatterPair out;
    out.m_w = m_w;
    out.m_b = m_b;
    out.r_w = within / static_cast<double>(m_w);
    out.r_b = (total - within) / static_cast<double>(m_b);
    out.r_w = 0.5 * (out.r_w + out.r_w.transpose()).eval();
    out.r_b = 0.5 * (out.r_b + out.r_b.transpose()).eval();
    return out;
}

ScatterPair regularize_scatter(ScatterPair scatter, double eps) {
    if (eps < 0.0) {
        throw NumericalError("regularize_scatter: eps must be non-negative");
    }
    const Eigen::Index n = scatter.r_w.rows();
    scatter.r_w.diagonal().array() +=
        eps * scatter.r_w.trace() / static_cast<double>(n);
    return scatter;
}

EmbeddingModel train(const KernelStack& stack, const std::vector<std::string>& labels,
                     const std::vector<double>& u, int d_z, double eps,
                     GalleryAnchors anchors) {
    const Eigen::Index n = stack.size();
    if (d_z < 1 || d_z > n) {
        std::ostringstream msg;
        msg << "train: d_z = " << d_z << " out of range for gallery size " << n;
        throw DimensionError(msg.str());
    }
    for (std::size_t q = 0; q < stack.kinds.size(); ++q) {
        const auto& anchor = stack.kinds[q] == KernelKind::LogEuclidean
                                 ? anchors.spd_logs
                                 : anchors.bases;
        if (static_cast<Eigen::Index>(anchor.size()) != n) {
            throw DimensionError(std::string("train: anchor count for model '") +
                                 kernel_kind_name(stack.kinds[q]) +
                                 "' does not match gallery size");
        }
    }

    ScatterPair scatter = scatter_matrices(stack, labels, u);
    const ScatterPair reg = regularize_scatter(std::move(scatter), eps);

    GenEigen solution;
    try {
        solution = solve_gen_eig(reg.r_b, reg.r_w, d_z);
    } catch (const NumericalError& err) {
        std::ostringstream msg;
        msg << "train: generalized eigensolve failed (" << err.what()
            << "); within-scatter trace = " << reg.r_w.trace() << ", eps = " << eps;
        throw NumericalError(msg.str());
    }

    EmbeddingModel model;
    model.e_mat = std::move(solution.vectors);
    model.gen_eigenvalues = std::move(solution.values);
    model.u = u;
    model.kinds = stack.kinds;
    model.gram_scales = stack.scales.empty()
                            ? std::vector<double>(stack.kinds.size(), 1.0)
                            : stack.scales;
    model.gallery_labels = labels;
    model.gallery_set_ids = stack.set_ids;
    model.anchors = std::move(anchors);
    model.d_z = d_z;

    // Cache gallery embeddings through the same code path probes take, so a
    // probe equal to gallery member i lands on the identical vector.
    model.gallery_embeddings.resize(static_cast<Eigen::Index>(stack.grams.size()) * d_z, n);
    std::vector<Eigen::VectorXd> kvecs(stack.grams.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < stack.grams.size(); ++q) {
            kvecs[q] = stack.grams[q].col(i);
        }
        model.gallery_embeddings.col(i) = detail::embed_scaled(model, kvecs);
    }
    return model;
}

Eigen::VectorXd embed(const EmbeddingModel& model,
                      const std::vector<Eigen::VectorXd>& kvecs) {
    const Eigen::Index n = model.size();
    if (kvecs.size() != model.kinds.size()) {
        throw DimensionError("embed: expected one kernel vector per model");
    }
    std::vector<Eigen::VectorXd> scaled(kvecs.size());
    for (std::size_t q = 0; q < kvecs.size(); ++q) {
        if (kvecs[q].size() != n) {
            std::ostringstream msg;
            msg << "embed: kernel vector " << q << " has length " << kvecs[q].size()
                << ", expected " << n;
            throw DimensionError(msg.str());
        }
        scaled[q] = kvecs[q] / model.gram_scales[q];
    }
    return detail::embed_scaled(model, scaled);
}

double learned_distance(const EmbeddingModel& model,
                        const std::vector<Eigen::VectorXd>& kvecs_a,
                        const std::vector<Eigen::VectorXd>& kvecs_b) {
    return (embed(model, kvecs_a) - embed(model, kvecs_b)).squaredNorm();
}

Classification classify(const EmbeddingModel& model, const SpdPoint& probe_spd,
                        const GrassmannPoint& probe_grass) {
    const Eigen::Index n = model.size();
    std::vector<Eigen::VectorXd> kvecs(model.kinds.size());
    for (std::size_t q = 0; q < model.kinds.size(); ++q) {
        Eigen::VectorXd kv(n);
        if (model.kinds[q] == KernelKind::LogEuclidean) {
            for (Eigen::Index i = 0; i < n; ++i) {
                kv(i) = log_euclidean_kernel_logs(
                    probe_spd.log_c, model.anchors.spd_logs[static_cast<std::size_t>(i)]);
            }
        } else {
            if (probe_grass.q() != model.anchors.q) {
                std::ostringstream msg;
                msg << "classify: probe subspace dimension " << probe_grass.q()
                    << " does not match model q = " << model.anchors.q;
                throw DimensionError(msg.str());
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                kv(i) = projection_kernel_bases(
                    probe_grass.basis, model.anchors.bases[static_cast<std::size_t>(i)]);
            }
        }
        kvecs[q] = std::move(kv);
    }

    const Eigen::VectorXd probe_embedding = embed(model, kvecs);
    Classification result;
    result.neighbors.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dist =
            (probe_embedding - model.gallery_embeddings.col(i)).squaredNorm();
        result.neighbors.push_back(Neighbor{static_cast<int>(i),
                                            model.gallery_labels[static_cast<std::size_t>(i)],
                                            dist});
    }
    std::sort(result.neighbors.begin(), result.neighbors.end(),
              [](const Neighbor& a, const Neighbor& b) {
                  if (a.distance != b.distance) return a.distance < b.distance;
                  return a.gallery_index < b.gallery_index;
              });
    result.label = result.neighbors.front().label;
    return result;
}

double objective_value(const Eigen::MatrixXd& e_mat, const ScatterPair& scatter) {
    const double numer = (e_mat.transpose() * scatter.r_b * e_mat).trace();
    const double denom = (e_mat.transpose() * scatter.r_w * e_mat).trace();
    if (!(denom > 0.0)) {
        throw NumericalError("objective_value: within-scatter trace at E is not positive");
    }
    return numer / denom;
}

}  // namespace mmml
