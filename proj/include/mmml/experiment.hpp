#pragma once

// The evaluation protocol: seeded random gallery/probe splits, per-fold
// training and nearest-neighbor classification, mean +/- sample-std
// aggregation, paired hyperparameter sweeps, and the plain-text report
// format. Output is a pure function of (dataset, split, hyper): fold
// sub-seeds come from a counter scheme and folds may run on any number of
// threads without changing a byte of the report.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmml/dataset.hpp"
#include "mmml/metric_learning.hpp"

namespace mmml {

struct SplitConfig {
    int gallery_per_class = 1;
    std::optional<int> probe_per_class;  // nullopt: all remaining sets
    int folds = 10;
    std::uint64_t seed = 0;
};

struct HyperParams {
    int q = 10;            // subspace dimension per set
    double alpha = 1000.0; // covariance regularization divisor
    double u_log = 0.8;    // log-Euclidean model weight; 0 removes the model
    double u_proj = 0.2;   // projection model weight; 0 removes the model
    int d_z = 10;          // embedding dimension
    double eps = 1e-4;     // within-scatter ridge factor
    bool normalize_kernels = false;
};

struct ExperimentReport {
    std::vector<double> per_fold_accuracy;
    double mean = 0.0;
    double stddev = 0.0;  // sample std over folds; 0 for a single fold
    std::map<std::pair<std::string, std::string>, std::int64_t> confusion;

    // resolved configuration echo
    SplitConfig split;
    HyperParams hyper;
    std::size_t dataset_sets = 0;
    std::size_t dataset_classes = 0;
    int dataset_dim = 0;

    // Recomputes mean/std from per_fold_accuracy and compares exactly.
    bool consistent() const;
};

struct FoldPlan {
    std::vector<Eigen::Index> gallery;
    std::vector<Eigen::Index> probe;
};

// The gallery/probe partition of one fold, drawn from sub-seed
// substream_seed(split.seed, fold). Classes are visited in sorted label
// order; members of each class are shuffled, the first gallery_per_class go
// to the gallery and the next probe_per_class (or all remaining) to the
// probe side.
FoldPlan plan_fold(const std::vector<ImageSet>& data, const SplitConfig& split,
                   int fold);

// Runs `split.folds` independent random gallery/probe combinations; threads
// only bounds how many folds run concurrently.
ExperimentReport run_experiment(const std::vector<ImageSet>& data,
                                const SplitConfig& split, const HyperParams& hyper,
                                int threads = 1);

// Trains one model on every set in `data` as the gallery.
EmbeddingModel fit_all(const std::vector<ImageSet>& data, const HyperParams& hyper);

enum class SweepAxis {
    ProjWeight,     // u2 given fixed u1
    LogWeight,      // u1 given fixed u2
    EmbeddingDim,   // d_z
    SubspaceDim,    // q
};

const char* sweep_axis_name(SweepAxis axis);
SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepRow {
    double value;
    double mean;
    double stddev;
};

// One run_experiment per grid point with identical fold seeds across
// points, so every comparison along the axis is paired.
std::vector<SweepRow> sweep(const std::vector<ImageSet>& data, const SplitConfig& split,
                            const HyperParams& base, SweepAxis axis,
                            const std::vector<double>& grid, int threads = 1);

std::string report_text(const ExperimentReport& report);
std::string sweep_text(SweepAxis axis, const std::vector<SweepRow>& rows,
                       const SplitConfig& split, const HyperParams& base);

}  // namespace mmml
