#include "mmml/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>

#include "mmml/errors.hpp"
#include "mmml/rng.hpp"

namespace mmml {

namespace {

struct ModelChoice {
    bool use_log = false;
    bool use_proj = false;
    std::vector<double> u;  // weights of the active models, log first
};

ModelChoice resolve_models(const HyperParams& hyper) {
    if (hyper.u_log < 0.0 || hyper.u_proj < 0.0) {
        throw ProtocolError("model weights must be non-negative");
    }
    ModelChoice choice;
    // A zero weight removes its model entirely: the surviving pipeline is
    // exactly the single-manifold ablation.
    if (hyper.u_log > 0.0) {
        choice.use_log = true;
        choice.u.push_back(hyper.u_log);
    }
    if (hyper.u_proj > 0.0) {
        choice.use_proj = true;
        choice.u.push_back(hyper.u_proj);
    }
    if (choice.u.empty()) {
        throw ProtocolError("at least one model weight must be positive");
    }
    return choice;
}

// All manifold representations, computed once and shared across folds.
struct ModelCache {
    std::vector<SpdPoint> spd;          // empty when the log model is off
    std::vector<GrassmannPoint> grass;  // empty when the projection model is off
};

ModelCache build_cache(const std::vector<ImageSet>& data, const HyperParams& hyper,
                       const ModelChoice& choice) {
    ModelCache cache;
    for (const auto& set : data) {
        try {
            const Eigen::MatrixXd c_star = regularize_spd(covariance(set), hyper.alpha);
            if (choice.use_log) {
                cache.spd.push_back(make_spd_point(c_star));
            }
            if (choice.use_proj) {
                const auto rank_bound = std::min(set.dim(), set.size() - 1);
                if (hyper.q < 1 || hyper.q > rank_bound) {
                    std::ostringstream msg;
                    msg << "q = " << hyper.q << " exceeds min(d, n-1) = " << rank_bound
                        << " for set '" << set.set_id << "'";
                    throw DimensionError(msg.str());
                }
                cache.grass.push_back(grassmann_basis(c_star, hyper.q));
            }
        } catch (const Error& err) {
            throw Error("modeling set '" + set.set_id + "': " + err.what());
        }
    }
    return cache;
}

struct GalleryBundle {
    KernelStack stack;
    GalleryAnchors anchors;
    std::vector<std::string> labels;
};

GalleryBundle build_gallery(const std::vector<ImageSet>& data, const ModelCache& cache,
                            const std::vector<Eigen::Index>& indices,
                            const HyperParams& hyper, const ModelChoice& choice) {
    GalleryBundle bundle;
    bundle.anchors.q = hyper.q;
    bundle.anchors.alpha = hyper.alpha;
    for (Eigen::Index i : indices) {
        bundle.labels.push_back(data[static_cast<std::size_t>(i)].label);
        bundle.stack.set_ids.push_back(data[static_cast<std::size_t>(i)].set_id);
    }
    if (choice.use_log) {
        std::vector<SpdPoint> points;
        points.reserve(indices.size());
        for (Eigen::Index i : indices) {
            points.push_back(cache.spd[static_cast<std::size_t>(i)]);
            bundle.anchors.spd_logs.push_back(points.back().log_c);
        }
        Eigen::MatrixXd gram = gram_matrix(points);
        double scale = 1.0;
        if (hyper.normalize_kernels) scale = trace_normalize(gram);
        bundle.stack.grams.push_back(std::move(gram));
        bundle.stack.kinds.push_back(KernelKind::LogEuclidean);
        bundle.stack.scales.push_back(scale);
    }
    if (choice.use_proj) {
        std::vector<GrassmannPoint> points;
        points.reserve(indices.size());
        for (Eigen::Index i : indices) {
            points.push_back(cache.grass[static_cast<std::size_t>(i)]);
            bundle.anchors.bases.push_back(points.back().basis);
        }
        Eigen::MatrixXd gram = gram_matrix(points);
        double scale = 1.0;
        if (hyper.normalize_kernels) scale = trace_normalize(gram);
        bundle.stack.grams.push_back(std::move(gram));
        bundle.stack.kinds.push_back(KernelKind::Projection);
        bundle.stack.scales.push_back(scale);
    }
    return bundle;
}

std::map<std::string, std::vector<Eigen::Index>> class_index(
    const std::vector<ImageSet>& data) {
    std::map<std::string, std::vector<Eigen::Index>> classes;
    for (std::size_t i = 0; i < data.size(); ++i) {
        classes[data[i].label].push_back(static_cast<Eigen::Index>(i));
    }
    return classes;
}

void check_split_feasible(const std::map<std::string, std::vector<Eigen::Index>>& classes,
                          const SplitConfig& split) {
    if (classes.size() < 2) {
        throw ProtocolError("evaluation needs at least two classes");
    }
    if (split.gallery_per_class < 1 || split.folds < 1) {
        throw ProtocolError("gallery_per_class and folds must be positive");
    }
    if (split.probe_per_class && *split.probe_per_class < 1) {
        throw ProtocolError("probe_per_class must be positive (or 'rest')");
    }
    for (const auto& [label, members] : classes) {
        const std::size_t need =
            static_cast<std::size_t>(split.gallery_per_class) +
            static_cast<std::size_t>(split.probe_per_class ? *split.probe_per_class : 1);
        if (members.size() < need) {
            std::ostringstream msg;
            msg << "class '" << label << "' has " << members.size()
                << " sets, split needs " << need;
            throw ProtocolError(msg.str());
        }
    }
}

struct FoldResult {
    double accuracy = 0.0;
    std::map<std::pair<std::string, std::string>, std::int64_t> confusion;
};

FoldPlan plan_fold_impl(const std::map<std::string, std::vector<Eigen::Index>>& classes,
                        const SplitConfig& split, int fold) {
    Rng rng(substream_seed(split.seed, static_cast<std::uint64_t>(fold)));
    FoldPlan plan;
    for (const auto& [label, members] : classes) {
        std::vector<Eigen::Index> order = members;
        rng.shuffle(order);
        const std::size_t g = static_cast<std::size_t>(split.gallery_per_class);
        const std::size_t p = split.probe_per_class
                                  ? static_cast<std::size_t>(*split.probe_per_class)
                                  : order.size() - g;
        for (std::size_t i = 0; i < g; ++i) plan.gallery.push_back(order[i]);
        for (std::size_t i = g; i < g + p; ++i) plan.probe.push_back(order[i]);
    }
    return plan;
}

FoldResult run_fold(const std::vector<ImageSet>& data, const ModelCache& cache,
                    const std::map<std::string, std::vector<Eigen::Index>>& classes,
                    const SplitConfig& split, const HyperParams& hyper,
                    const ModelChoice& choice, int fold) {
    const FoldPlan plan = plan_fold_impl(classes, split, fold);
    const std::vector<Eigen::Index>& gallery = plan.gallery;
    const std::vector<Eigen::Index>& probes = plan.probe;

    const GalleryBundle bundle = build_gallery(data, cache, gallery, hyper, choice);
    const EmbeddingModel model =
        train(bundle.stack, bundle.labels, choice.u, hyper.d_z, hyper.eps, bundle.anchors);

    static const SpdPoint no_spd{};
    static const GrassmannPoint no_grass{};
    FoldResult result;
    std::int64_t correct = 0;
    for (Eigen::Index i : probes) {
        const auto idx = static_cast<std::size_t>(i);
        const Classification cls =
            classify(model, choice.use_log ? cache.spd[idx] : no_spd,
                     choice.use_proj ? cache.grass[idx] : no_grass);
        const std::string& truth = data[idx].label;
        if (cls.label == truth) ++correct;
        result.confusion[{truth, cls.label}] += 1;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(probes.size());
    return result;
}

void aggregate(ExperimentReport& report, const std::vector<FoldResult>& folds) {
    report.per_fold_accuracy.clear();
    report.confusion.clear();
    for (const auto& fold : folds) {
        report.per_fold_accuracy.push_back(fold.accuracy);
        for (const auto& [key, count] : fold.confusion) {
            report.confusion[key] += count;
        }
    }
    const auto f = static_cast<double>(folds.size());
    double sum = 0.0;
    for (double a : report.per_fold_accuracy) sum += a;
    report.mean = sum / f;
    if (folds.size() > 1) {
        double ss = 0.0;
        for (double a : report.per_fold_accuracy) {
            ss += (a - report.mean) * (a - report.mean);
        }
        report.stddev = std::sqrt(ss / (f - 1.0));
    } else {
        report.stddev = 0.0;
    }
}

}  // namespace

FoldPlan plan_fold(const std::vector<ImageSet>& data, const SplitConfig& split,
                   int fold) {
    const auto classes = class_index(data);
    check_split_feasible(classes, split);
    return plan_fold_impl(classes, split, fold);
}

bool ExperimentReport::consistent() const {
    if (per_fold_accuracy.empty()) return false;
    const auto f = static_cast<double>(per_fold_accuracy.size());
    double sum = 0.0;
    for (double a : per_fold_accuracy) sum += a;
    const double m = sum / f;
    double s = 0.0;
    if (per_fold_accuracy.size() > 1) {
        double ss = 0.0;
        for (double a : per_fold_accuracy) ss += (a - m) * (a - m);
        s = std::sqrt(ss / (f - 1.0));
    }
    return m == mean && s == stddev;
}

ExperimentReport run_experiment(const std::vector<ImageSet>& data,
                                const SplitConfig& split, const HyperParams& hyper,
                                int threads) {
    const ModelChoice choice = resolve_models(hyper);
    const auto classes = class_index(data);
    check_split_feasible(classes, split);
    const ModelCache cache = build_cache(data, hyper, choice);

    std::vector<FoldResult> results(static_cast<std::size_t>(split.folds));
    const int workers = std::max(1, threads);
    for (int start = 0; start < split.folds; start += workers) {
        const int stop = std::min(split.folds, start + workers);
        std::vector<std::future<FoldResult>> batch;
        for (int fold = start; fold < stop; ++fold) {
            batch.push_back(std::async(
                workers > 1 ? std::launch::async : std::launch::deferred,
                [&, fold]() -> FoldResult {
                    try {
                        return run_fold(data, cache, classes, split, hyper, choice, fold);
                    } catch (const Error& err) {
                        throw Error("fold " + std::to_string(fold) + ": " + err.what());
                    }
                }));
        }
        for (int fold = start; fold < stop; ++fold) {
            results[static_cast<std::size_t>(fold)] =
                batch[static_cast<std::size_t>(fold - start)].get();
        }
    }

    ExperimentReport report;
    report.split = split;
    report.hyper = hyper;
    report.dataset_sets = data.size();
    report.dataset_classes = classes.size();
    report.dataset_dim = data.empty() ? 0 : static_cast<int>(data.front().dim());
    aggregate(report, results);
    return report;
}

EmbeddingModel fit_all(const std::vector<ImageSet>& data, const HyperParams& hyper) {
    const ModelChoice choice = resolve_models(hyper);
    if (data.empty()) {
        throw ProtocolError("fit_all: empty dataset");
    }
    const ModelCache cache = build_cache(data, hyper, choice);
    std::vector<Eigen::Index> all(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
    const GalleryBundle bundle = build_gallery(data, cache, all, hyper, choice);
    return train(bundle.stack, bundle.labels, choice.u, hyper.d_z, hyper.eps,
                 bundle.anchors);
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::ProjWeight: return "u2";
        case SweepAxis::LogWeight: return "u1";
        case SweepAxis::EmbeddingDim: return "dz";
        case SweepAxis::SubspaceDim: return "q";
    }
    throw Error("unknown sweep axis");
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "u2") return SweepAxis::ProjWeight;
    if (name == "u1") return SweepAxis::LogWeight;
    if (name == "dz") return SweepAxis::EmbeddingDim;
    if (name == "q") return SweepAxis::SubspaceDim;
    throw FormatError("unknown sweep axis '" + name + "' (expected u1, u2, dz, or q)");
}

std::vector<SweepRow> sweep(const std::vector<ImageSet>& data, const SplitConfig& split,
                            const HyperParams& base, SweepAxis axis,
                            const std::vector<double>& grid, int threads) {
    if (grid.empty()) {
        throw ProtocolError("sweep: empty grid");
    }
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double value : grid) {
        HyperParams hyper = base;
        switch (axis) {
            case SweepAxis::ProjWeight: hyper.u_proj = value; break;
            case SweepAxis::LogWeight: hyper.u_log = value; break;
            case SweepAxis::EmbeddingDim: hyper.d_z = static_cast<int>(std::lround(value)); break;
            case SweepAxis::SubspaceDim: hyper.q = static_cast<int>(std::lround(value)); break;
        }
        const ExperimentReport report = run_experiment(data, split, hyper, threads);
        rows.push_back(SweepRow{value, report.mean, report.stddev});
    }
    return rows;
}

namespace {

std::string fmt_double(const char* format, double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), format, value);
    return buffer;
}

void echo_config(std::ostream& out, const SplitConfig& split, const HyperParams& hyper) {
    out << "split.gallery_per_class " << split.gallery_per_class << '\n';
    out << "split.probe_per_class "
        << (split.probe_per_class ? std::to_string(*split.probe_per_class)
                                  : std::string("rest"))
        << '\n';
    out << "split.folds " << split.folds << '\n';
    out << "split.seed " << split.seed << '\n';
    out << "hyper.q " << hyper.q << '\n';
    out << "hyper.alpha " << fmt_double("%.10g", hyper.alpha) << '\n';
    out << "hyper.u1 " << fmt_double("%.10g", hyper.u_log) << '\n';
    out << "hyper.u2 " << fmt_double("%.10g", hyper.u_proj) << '\n';
    out << "hyper.dz " << hyper.d_z << '\n';
    out << "hyper.eps " << fmt_double("%.10g", hyper.eps) << '\n';
    out << "hyper.normalize_kernels " << (hyper.normalize_kernels ? 1 : 0) << '\n';
}

}  // namespace

std::string report_text(const ExperimentReport& report) {
    std::ostringstream out;
    out << "mmml-report 1\n";
    out << "kind eval\n";
    out << "dataset.sets " << report.dataset_sets << '\n';
    out << "dataset.classes " << report.dataset_classes << '\n';
    out << "dataset.dim " << report.dataset_dim << '\n';
    echo_config(out, report.split, report.hyper);
    out << "folds.csv fold,accuracy\n";
    for (std::size_t i = 0; i < report.per_fold_accuracy.size(); ++i) {
        out << i << ',' << fmt_double("%.6f", report.per_fold_accuracy[i]) << '\n';
    }
    out << "summary.mean " << fmt_double("%.6f", report.mean) << '\n';
    out << "summary.std " << fmt_double("%.6f", report.stddev) << '\n';
    out << "confusion.csv true,predicted,count\n";
    for (const auto& [key, count] : report.confusion) {
        out << key.first << ',' << key.second << ',' << count << '\n';
    }
    return out.str();
}

std::string sweep_text(SweepAxis axis, const std::vector<SweepRow>& rows,
                       const SplitConfig& split, const HyperParams& base) {
    std::ostringstream out;
    out << "mmml-sweep 1\n";
    out << "axis " << sweep_axis_name(axis) << '\n';
    echo_config(out, split, base);
    out << "table.csv value,mean,std\n";
    for (const auto& row : rows) {
        out << fmt_double("%.10g", row.value) << ',' << fmt_double("%.6f", row.mean)
            << ',' << fmt_double("%.6f", row.stddev) << '\n';
    }
    return out.str();
}

}  // namespace mmml
