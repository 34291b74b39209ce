#include <doctest.h>

#include <cmath>

#include "mmml/errors.hpp"
#include "mmml/metric_learning.hpp"
#include "mmml/spectral.hpp"
#include "support.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace mmml;

namespace {

KernelStack identity_stack(Eigen::Index n) {
    KernelStack stack;
    stack.grams.push_back(MatrixXd::Identity(n, n));
    stack.kinds.push_back(KernelKind::LogEuclidean);
    stack.scales.push_back(1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        stack.set_ids.push_back("s" + std::to_string(i));
    }
    return stack;
}

struct ClusteredData {
    testsupport::RandomInstance inst;
    // one held-out probe per class, drawn from the same cluster law
    std::vector<SpdPoint> probe_spd;
    std::vector<GrassmannPoint> probe_grass;
};

// Gallery whose per-class points cluster tightly around well-separated
// centers on both manifolds.
ClusteredData clustered_instance(mmml::Rng& rng, int classes, int per_class,
                                 Eigen::Index d, Eigen::Index q, double spread) {
    ClusteredData data;
    testsupport::RandomInstance& inst = data.inst;
    std::vector<MatrixXd> centers, center_bases;
    for (int c = 0; c < classes; ++c) {
        centers.push_back(testsupport::random_spd(rng, d, 0.2 + c));
        center_bases.push_back(testsupport::random_orthonormal(rng, d, q));
    }
    auto draw_spd = [&](int c) {
        MatrixXd cov = centers[static_cast<std::size_t>(c)] +
                       spread * testsupport::random_spd(rng, d, 0.0);
        return make_spd_point(0.5 * (cov + cov.transpose()));
    };
    auto draw_grass = [&](int c) {
        MatrixXd basis = center_bases[static_cast<std::size_t>(c)] +
                         spread * testsupport::random_matrix(rng, d, q);
        Eigen::HouseholderQR<MatrixXd> qr(basis);
        MatrixXd full = qr.householderQ();
        return GrassmannPoint{full.leftCols(q)};
    };
    for (int c = 0; c < classes; ++c) {
        for (int s = 0; s < per_class; ++s) {
            inst.spd.push_back(draw_spd(c));
            inst.grass.push_back(draw_grass(c));
            inst.labels.push_back("class" + std::to_string(c));
            inst.stack.set_ids.push_back("c" + std::to_string(c) + "s" +
                                         std::to_string(s));
        }
        data.probe_spd.push_back(draw_spd(c));
        data.probe_grass.push_back(draw_grass(c));
    }
    for (const auto& p : inst.spd) inst.anchors.spd_logs.push_back(p.log_c);
    for (const auto& g : inst.grass) inst.anchors.bases.push_back(g.basis);
    inst.anchors.q = static_cast<int>(q);
    inst.anchors.alpha = 1000.0;
    inst.stack.grams.push_back(gram_matrix(inst.spd));
    inst.stack.grams.push_back(gram_matrix(inst.grass));
    inst.stack.kinds = {KernelKind::LogEuclidean, KernelKind::Projection};
    inst.stack.scales = {1.0, 1.0};
    inst.u = {0.8, 0.2};
    return data;
}

std::vector<VectorXd> gallery_kvecs(const KernelStack& stack, Eigen::Index i) {
    std::vector<VectorXd> kvecs;
    for (const auto& gram : stack.grams) kvecs.push_back(gram.col(i));
    return kvecs;
}

}  // namespace

TEST_SUITE("metric_learning") {

TEST_CASE("scatter_matrices hand-evaluated three-point case") {
    const KernelStack stack = identity_stack(3);
    const std::vector<std::string> labels{"A", "A", "B"};
    const ScatterPair scatter = scatter_matrices(stack, labels, {1.0});
    CHECK(scatter.m_w == 2);
    CHECK(scatter.m_b == 4);
    MatrixXd expected(3, 3);
    expected << 1, -1, 0, -1, 1, 0, 0, 0, 0;
    CHECK((scatter.r_w - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(scatter.m_w + scatter.m_b == 3 * 2);
}

TEST_CASE("scatter_matrices degenerate inputs") {
    KernelStack stack;
    stack.grams.push_back(MatrixXd::Ones(4, 4));  // identical columns
    stack.kinds.push_back(KernelKind::LogEuclidean);
    stack.scales.push_back(1.0);
    stack.set_ids = {"a", "b", "c", "d"};
    const std::vector<std::string> labels{"A", "A", "B", "B"};
    const ScatterPair scatter = scatter_matrices(stack, labels, {1.0});
    CHECK(scatter.r_w.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(scatter.r_b.cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(scatter_matrices(stack, {"A", "B", "C", "D"}, {1.0}), ProtocolError);
    CHECK_THROWS_AS(scatter_matrices(stack, {"A", "A", "A", "A"}, {1.0}), ProtocolError);
}

TEST_CASE("scatter weights enter squared") {
    mmml::Rng rng(501);
    const testsupport::RandomInstance inst = testsupport::random_instance(rng, 8, 5, 2, 2);
    KernelStack one_model;
    one_model.grams.push_back(inst.stack.grams[0]);
    one_model.kinds.push_back(KernelKind::LogEuclidean);
    one_model.scales.push_back(1.0);
    one_model.set_ids = inst.stack.set_ids;
    const ScatterPair base = scatter_matrices(one_model, inst.labels, {1.0});
    const ScatterPair doubled = scatter_matrices(one_model, inst.labels, {2.0});
    CHECK((doubled.r_w - 4.0 * base.r_w).cwiseAbs().maxCoeff() <
          1e-10 * base.r_w.cwiseAbs().maxCoeff());
    CHECK((doubled.r_b - 4.0 * base.r_b).cwiseAbs().maxCoeff() <
          1e-10 * base.r_b.cwiseAbs().maxCoeff());
}

TEST_CASE("scatter_matrices matches the ordered-pair oracle") {
    mmml::Rng rng(503);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.below(8));
        const testsupport::RandomInstance inst =
            testsupport::random_instance(rng, n, 4, 2, 2 + static_cast<int>(rng.below(2)));
        const ScatterPair fast = scatter_matrices(inst.stack, inst.labels, inst.u);
        const ScatterPair slow =
            testsupport::scatter_bruteforce(inst.stack, inst.labels, inst.u);
        CHECK(fast.m_w == slow.m_w);
        CHECK(fast.m_b == slow.m_b);
        const double scale = std::max(1.0, slow.r_w.cwiseAbs().maxCoeff());
        CHECK((fast.r_w - slow.r_w).cwiseAbs().maxCoeff() < 1e-9 * scale);
        CHECK((fast.r_b - slow.r_b).cwiseAbs().maxCoeff() <
              1e-9 * std::max(1.0, slow.r_b.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("scatters are PSD on random instances") {
    mmml::Rng rng(509);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.below(10));
        const testsupport::RandomInstance inst =
            testsupport::random_instance(rng, n, 4, 2, 2);
        const ScatterPair scatter = scatter_matrices(inst.stack, inst.labels, inst.u);
        for (const MatrixXd* r : {&scatter.r_w, &scatter.r_b}) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(*r, Eigen::EigenvaluesOnly);
            CHECK(eig.eigenvalues().minCoeff() >=
                  -1e-8 * std::max(eig.eigenvalues().maxCoeff(), 0.0));
        }
    }
}

TEST_CASE("train on separated classes dominates random embeddings") {
    mmml::Rng rng(521);
    const testsupport::RandomInstance inst =
        clustered_instance(rng, 2, 5, 6, 2, 0.01).inst;
    const EmbeddingModel model = train(inst.stack, inst.labels, inst.u, 3, 1e-4,
                                       inst.anchors);
    CHECK(model.gen_eigenvalues(0) > 10.0);

    const ScatterPair reg =
        regularize_scatter(scatter_matrices(inst.stack, inst.labels, inst.u), 1e-4);
    const double trained_objective = objective_value(model.e_mat, reg);
    for (int i = 0; i < 100; ++i) {
        const MatrixXd random = testsupport::w_orthonormalize(
            testsupport::random_matrix(rng, model.e_mat.rows(), 3), reg.r_w);
        CHECK(trained_objective >= objective_value(random, reg) - 1e-9);
    }
}

TEST_CASE("train error paths") {
    const KernelStack stack = identity_stack(3);
    CHECK_THROWS_AS(train(stack, {"A", "B", "C"}, {1.0}, 2, 1e-4, GalleryAnchors{}),
                    ProtocolError);
    CHECK_THROWS_AS(train(stack, {"A", "A", "B"}, {1.0}, 4, 1e-4, GalleryAnchors{}),
                    DimensionError);
}

TEST_CASE("full-rank embedding matches the trace identity") {
    mmml::Rng rng(523);
    const Eigen::Index n = 8;
    const testsupport::RandomInstance inst = testsupport::random_instance(rng, n, 4, 2, 2);
    const EmbeddingModel model = train(inst.stack, inst.labels, inst.u,
                                       static_cast<int>(n), 1e-4, inst.anchors);
    const ScatterPair reg =
        regularize_scatter(scatter_matrices(inst.stack, inst.labels, inst.u), 1e-4);
    const MatrixXd& e = model.e_mat;
    const double ratio_of_trace =
        ((e.transpose() * reg.r_w * e).inverse() * (e.transpose() * reg.r_b * e)).trace();
    const double direct = (reg.r_w.inverse() * reg.r_b).trace();
    CHECK(ratio_of_trace == doctest::Approx(direct).epsilon(1e-6));
    CHECK(objective_value(e, reg) ==
          doctest::Approx(direct / static_cast<double>(n)).epsilon(1e-6));
}

TEST_CASE("embed and learned_distance definitional cases") {
    mmml::Rng rng(541);
    const testsupport::RandomInstance inst = testsupport::random_instance(rng, 10, 5, 2, 2);
    const EmbeddingModel model = train(inst.stack, inst.labels, inst.u, 4, 1e-4,
                                       inst.anchors);

    // gallery member embedding equals the cached column
    for (Eigen::Index i = 0; i < 10; ++i) {
        const VectorXd e = embed(model, gallery_kvecs(inst.stack, i));
        CHECK(e == model.gallery_embeddings.col(i));
    }

    // zero kernel vectors embed to zero
    const std::vector<VectorXd> zeros{VectorXd::Zero(10), VectorXd::Zero(10)};
    CHECK(embed(model, zeros).norm() == 0.0);
    CHECK(learned_distance(model, zeros, zeros) == 0.0);

    std::vector<VectorXd> wrong{VectorXd::Zero(9), VectorXd::Zero(10)};
    CHECK_THROWS_AS(embed(model, wrong), DimensionError);
}

TEST_CASE("learned_distance equals the trace-form oracle on gallery pairs") {
    mmml::Rng rng(547);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 6 + static_cast<Eigen::Index>(rng.below(8));
        const int d_z = 1 + static_cast<int>(rng.below(4));
        const testsupport::RandomInstance inst =
            testsupport::random_instance(rng, n, 5, 2, 2);
        const EmbeddingModel model =
            train(inst.stack, inst.labels, inst.u, d_z, 1e-4, inst.anchors);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double via_embedding = learned_distance(
                    model, gallery_kvecs(inst.stack, i), gallery_kvecs(inst.stack, j));
                const double via_trace = testsupport::trace_distance_oracle(
                    model.e_mat, inst.stack, inst.u, i, j);
                CHECK(via_embedding ==
                      doctest::Approx(via_trace)
                          .epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("classify returns the gallery's own label at distance zero") {
    mmml::Rng rng(557);
    const testsupport::RandomInstance inst = testsupport::random_instance(rng, 9, 5, 2, 3);
    const EmbeddingModel model = train(inst.stack, inst.labels, inst.u, 4, 1e-4,
                                       inst.anchors);
    for (std::size_t i = 0; i < 9; ++i) {
        const Classification cls = classify(model, inst.spd[i], inst.grass[i]);
        CHECK(cls.label == inst.labels[i]);
        CHECK(cls.neighbors.front().gallery_index == static_cast<int>(i));
        CHECK(cls.neighbors.front().distance == 0.0);
    }
}

TEST_CASE("classify separates clustered classes with a margin") {
    mmml::Rng rng(563);
    const ClusteredData data = clustered_instance(rng, 2, 5, 6, 2, 0.02);
    const EmbeddingModel model = train(data.inst.stack, data.inst.labels, data.inst.u, 3,
                                       1e-4, data.inst.anchors);
    for (int c = 0; c < 2; ++c) {
        const Classification cls =
            classify(model, data.probe_spd[static_cast<std::size_t>(c)],
                     data.probe_grass[static_cast<std::size_t>(c)]);
        const std::string expected = "class" + std::to_string(c);
        CHECK(cls.label == expected);
        double best_same = -1.0, best_other = -1.0;
        for (const auto& nb : cls.neighbors) {
            if (nb.label == expected && best_same < 0) best_same = nb.distance;
            if (nb.label != expected && best_other < 0) best_other = nb.distance;
        }
        CHECK(best_other > best_same);
    }
}

TEST_CASE("classify breaks exact ties by lowest gallery index") {
    mmml::Rng rng(569);
    // duplicate gallery members: probing with the duplicated point yields
    // two exact zero distances
    std::vector<SpdPoint> spd;
    std::vector<GrassmannPoint> grass;
    std::vector<std::string> labels;
    const SpdPoint shared_spd = testsupport::random_spd_point(rng, 4);
    const GrassmannPoint shared_grass = testsupport::random_grassmann(rng, 4, 2);
    for (int i = 0; i < 2; ++i) {
        spd.push_back(shared_spd);
        grass.push_back(shared_grass);
        labels.push_back("dup");
    }
    for (int i = 0; i < 2; ++i) {
        spd.push_back(testsupport::random_spd_point(rng, 4));
        grass.push_back(testsupport::random_grassmann(rng, 4, 2));
        labels.push_back("other");
    }
    KernelStack stack;
    stack.grams.push_back(gram_matrix(spd));
    stack.grams.push_back(gram_matrix(grass));
    stack.kinds = {KernelKind::LogEuclidean, KernelKind::Projection};
    stack.scales = {1.0, 1.0};
    stack.set_ids = {"d0", "d1", "o0", "o1"};
    GalleryAnchors anchors;
    for (const auto& p : spd) anchors.spd_logs.push_back(p.log_c);
    for (const auto& g : grass) anchors.bases.push_back(g.basis);
    anchors.q = 2;
    anchors.alpha = 1000.0;
    const EmbeddingModel model = train(stack, labels, {0.8, 0.2}, 2, 1e-4, anchors);
    const Classification cls = classify(model, shared_spd, shared_grass);
    CHECK(cls.neighbors[0].gallery_index == 0);
    CHECK(cls.neighbors[0].distance == 0.0);
    CHECK(cls.neighbors[1].gallery_index == 1);
    CHECK(cls.neighbors[1].distance == 0.0);
}

TEST_CASE("objective_value basics") {
    mmml::Rng rng(571);
    const MatrixXd r = testsupport::random_spd(rng, 5, 0.3);
    ScatterPair scatter;
    scatter.r_w = r;
    scatter.r_b = r;
    scatter.m_w = scatter.m_b = 1;
    const MatrixXd e = testsupport::random_matrix(rng, 5, 5);
    CHECK(objective_value(e, scatter) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(objective_value(3.7 * e, scatter) ==
          doctest::Approx(objective_value(e, scatter)).epsilon(1e-12));

    ScatterPair zero;
    zero.r_w = MatrixXd::Zero(5, 5);
    zero.r_b = r;
    CHECK_THROWS_AS(objective_value(e, zero), NumericalError);
}

TEST_CASE("permuting the gallery permutes E rows and preserves decisions") {
    mmml::Rng rng(577);
    const Eigen::Index n = 10;
    testsupport::RandomInstance inst = testsupport::random_instance(rng, n, 5, 2, 2);
    const EmbeddingModel model = train(inst.stack, inst.labels, inst.u, 3, 1e-4,
                                       inst.anchors);

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);

    testsupport::RandomInstance permuted = inst;
    for (std::size_t q = 0; q < inst.stack.grams.size(); ++q) {
        MatrixXd& k = permuted.stack.grams[q];
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                k(i, j) = inst.stack.grams[q](perm[static_cast<std::size_t>(i)],
                                              perm[static_cast<std::size_t>(j)]);
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
        permuted.labels[static_cast<std::size_t>(i)] = inst.labels[p];
        permuted.stack.set_ids[static_cast<std::size_t>(i)] = inst.stack.set_ids[p];
        permuted.anchors.spd_logs[static_cast<std::size_t>(i)] = inst.anchors.spd_logs[p];
        permuted.anchors.bases[static_cast<std::size_t>(i)] = inst.anchors.bases[p];
        permuted.spd[static_cast<std::size_t>(i)] = inst.spd[p];
        permuted.grass[static_cast<std::size_t>(i)] = inst.grass[p];
    }

    const EmbeddingModel model_p = train(permuted.stack, permuted.labels, permuted.u, 3,
                                         1e-4, permuted.anchors);
    MatrixXd permuted_e(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        permuted_e.row(i) = model.e_mat.row(perm[static_cast<std::size_t>(i)]);
    }
    CHECK((model_p.e_mat - permuted_e).cwiseAbs().maxCoeff() <
          1e-6 * std::max(1.0, permuted_e.cwiseAbs().maxCoeff()));

    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        const Classification a = classify(model, inst.spd[i], inst.grass[i]);
        const Classification b = classify(model_p, inst.spd[i], inst.grass[i]);
        CHECK(a.label == b.label);
    }
}

TEST_CASE("common weight scaling leaves NN decisions unchanged") {
    mmml::Rng rng(587);
    const testsupport::RandomInstance inst = testsupport::random_instance(rng, 10, 5, 2, 3);
    const EmbeddingModel base = train(inst.stack, inst.labels, inst.u, 3, 1e-4,
                                      inst.anchors);
    std::vector<double> scaled_u = inst.u;
    for (double& w : scaled_u) w *= 3.0;
    const EmbeddingModel scaled = train(inst.stack, inst.labels, scaled_u, 3, 1e-4,
                                        inst.anchors);

    // Pairwise distance ratios stay constant, so every argmin is preserved.
    double ratio = -1.0;
    for (Eigen::Index i = 0; i < 10; ++i) {
        for (Eigen::Index j = i + 1; j < 10; ++j) {
            const double d0 = learned_distance(base, gallery_kvecs(inst.stack, i),
                                               gallery_kvecs(inst.stack, j));
            const double d1 = learned_distance(scaled, gallery_kvecs(inst.stack, i),
                                               gallery_kvecs(inst.stack, j));
            if (d0 > 1e-12) {
                if (ratio < 0) ratio = d1 / d0;
                CHECK(d1 / d0 == doctest::Approx(ratio).epsilon(1e-6));
            }
        }
    }
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(classify(base, inst.spd[i], inst.grass[i]).label ==
              classify(scaled, inst.spd[i], inst.grass[i]).label);
    }
}

}  // TEST_SUITE
