// Command-line front end: dataset synthesis and validation, model training
// and persistence, probe classification, protocol evaluation, and
// hyperparameter sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmml/dataset.hpp"
#include "mmml/errors.hpp"
#include "mmml/experiment.hpp"
#include "mmml/model_io.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string manifest;
    bool normalize_pixels = false;
    mmml::HyperParams hyper;
    int threads = 1;
};

void add_hyper_flags(CLI::App* cmd, mmml::HyperParams& hyper) {
    cmd->add_option("--q", hyper.q, "Subspace dimension per set");
    cmd->add_option("--alpha", hyper.alpha, "Covariance regularization divisor");
    cmd->add_option("--u1", hyper.u_log, "Log-Euclidean model weight (0 disables)");
    cmd->add_option("--u2", hyper.u_proj, "Projection model weight (0 disables)");
    cmd->add_option("--dz", hyper.d_z, "Embedding dimension");
    cmd->add_option("--eps", hyper.eps, "Within-scatter ridge factor");
    cmd->add_flag("--normalize-kernels", hyper.normalize_kernels,
                  "Divide each Gram matrix by its mean diagonal");
}

std::vector<mmml::ImageSet> load_sets(const CommonOpts& opts) {
    const fs::path manifest_file = opts.manifest;
    const mmml::DatasetManifest manifest = mmml::load_manifest(manifest_file);
    return mmml::ingest(manifest_file.parent_path(), manifest, opts.normalize_pixels);
}

void emit(const std::string& text, const std::string& out_file) {
    if (out_file.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_file);
    if (!out) {
        throw mmml::FormatError("cannot write output file '" + out_file + "'");
    }
    out << text;
}

std::optional<int> parse_probe_count(const std::string& text) {
    if (text == "rest") return std::nullopt;
    try {
        return std::stoi(text);
    } catch (const std::exception&) {
        throw mmml::FormatError("--probe expects a positive integer or 'rest'");
    }
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string token =
            text.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!token.empty()) {
            try {
                grid.push_back(std::stod(token));
            } catch (const std::exception&) {
                throw mmml::FormatError("bad grid value '" + token + "'");
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (grid.empty()) {
        throw mmml::FormatError("--grid expects comma-separated numbers");
    }
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-manifold metric learning for image-set classification"};
    app.require_subcommand(1);

    // synth
    mmml::SynthSpec synth_spec;
    std::string synth_out;
    std::string synth_preset = "gaussian";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--classes", synth_spec.classes, "Number of classes");
    synth->add_option("--sets-per-class", synth_spec.sets_per_class, "Sets per class");
    synth->add_option("--images-per-set", synth_spec.images_per_set, "Images per set");
    synth->add_option("--dim", synth_spec.d, "Feature dimension d");
    synth->add_option("--separation", synth_spec.separation, "Class separation strength");
    synth->add_option("--seed", synth_spec.seed, "Generator seed");
    synth->add_option("--preset", synth_preset, "gaussian | mixed");

    // ingest-check
    CommonOpts check_opts;
    auto* check = app.add_subcommand("ingest-check", "Validate a dataset manifest");
    check->add_option("--manifest", check_opts.manifest, "Manifest file")->required();
    check->add_flag("--normalize", check_opts.normalize_pixels,
                    "Scale pixel intensities by 1/255");

    // train
    CommonOpts train_opts;
    std::string train_out;
    auto* train_cmd = app.add_subcommand("train", "Fit a model on every listed set");
    train_cmd->add_option("--manifest", train_opts.manifest, "Manifest file")->required();
    train_cmd->add_option("--out", train_out, "Model file to write")->required();
    train_cmd->add_flag("--normalize", train_opts.normalize_pixels,
                        "Scale pixel intensities by 1/255");
    add_hyper_flags(train_cmd, train_opts.hyper);

    // predict
    std::string predict_model;
    std::vector<std::string> predict_files;
    bool predict_normalize = false;
    int predict_top = 3;
    auto* predict = app.add_subcommand("predict", "Classify probe set files");
    predict->add_option("--model", predict_model, "Model file")->required();
    predict->add_option("files", predict_files, "Probe set files")->required();
    predict->add_flag("--normalize", predict_normalize,
                      "Scale pixel intensities by 1/255");
    predict->add_option("--top", predict_top, "Neighbors to print per probe");

    // eval
    CommonOpts eval_opts;
    mmml::SplitConfig eval_split;
    std::string eval_probe = "rest";
    std::string eval_out;
    auto* eval = app.add_subcommand("eval", "Run the gallery/probe evaluation protocol");
    eval->add_option("--manifest", eval_opts.manifest, "Manifest file")->required();
    eval->add_option("--gallery", eval_split.gallery_per_class, "Gallery sets per class")
        ->required();
    eval->add_option("--probe", eval_probe, "Probe sets per class, or 'rest'");
    eval->add_option("--folds", eval_split.folds, "Random gallery/probe combinations");
    eval->add_option("--seed", eval_split.seed, "Experiment seed");
    eval->add_option("--threads", eval_opts.threads, "Concurrent folds");
    eval->add_option("--out", eval_out, "Write report here instead of stdout");
    eval->add_flag("--normalize", eval_opts.normalize_pixels,
                   "Scale pixel intensities by 1/255");
    add_hyper_flags(eval, eval_opts.hyper);

    // sweep
    CommonOpts sweep_opts;
    mmml::SplitConfig sweep_split;
    std::string sweep_probe = "rest";
    std::string sweep_axis_str;
    std::string sweep_grid_str;
    std::string sweep_out;
    auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate along a hyperparameter grid");
    sweep_cmd->add_option("--manifest", sweep_opts.manifest, "Manifest file")->required();
    sweep_cmd->add_option("--axis", sweep_axis_str, "u1 | u2 | dz | q")->required();
    sweep_cmd->add_option("--grid", sweep_grid_str, "Comma-separated grid values")
        ->required();
    sweep_cmd->add_option("--gallery", sweep_split.gallery_per_class,
                          "Gallery sets per class")
        ->required();
    sweep_cmd->add_option("--probe", sweep_probe, "Probe sets per class, or 'rest'");
    sweep_cmd->add_option("--folds", sweep_split.folds, "Random combinations per point");
    sweep_cmd->add_option("--seed", sweep_split.seed, "Experiment seed");
    sweep_cmd->add_option("--threads", sweep_opts.threads, "Concurrent folds");
    sweep_cmd->add_option("--out", sweep_out, "Write table here instead of stdout");
    sweep_cmd->add_flag("--normalize", sweep_opts.normalize_pixels,
                        "Scale pixel intensities by 1/255");
    add_hyper_flags(sweep_cmd, sweep_opts.hyper);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (synth_preset == "gaussian") {
                synth_spec.preset = mmml::SynthPreset::Gaussian;
            } else if (synth_preset == "mixed") {
                synth_spec.preset = mmml::SynthPreset::Mixed;
            } else {
                throw mmml::FormatError("unknown preset '" + synth_preset + "'");
            }
            const auto sets = mmml::synth_generate(synth_spec);
            mmml::write_dataset(synth_out, sets,
                                "synthetic preset=" + synth_preset + " separation=" +
                                    std::to_string(synth_spec.separation) +
                                    " seed=" + std::to_string(synth_spec.seed));
            std::cout << "wrote " << sets.size() << " sets under " << synth_out << '\n';
        } else if (check->parsed()) {
            const auto sets = load_sets(check_opts);
            std::map<std::string, int> per_class;
            for (const auto& set : sets) per_class[set.label] += 1;
            std::cout << "manifest-ok 1\n";
            std::cout << "sets " << sets.size() << '\n';
            std::cout << "classes " << per_class.size() << '\n';
            std::cout << "dim " << sets.front().dim() << '\n';
            for (const auto& [label, count] : per_class) {
                std::cout << "class." << label << ' ' << count << '\n';
            }
        } else if (train_cmd->parsed()) {
            const auto sets = load_sets(train_opts);
            const mmml::EmbeddingModel model = mmml::fit_all(sets, train_opts.hyper);
            mmml::save_model(model, train_out);
            std::cout << "trained on " << sets.size() << " sets, wrote " << train_out
                      << '\n';
        } else if (predict->parsed()) {
            const mmml::EmbeddingModel model = mmml::load_model(predict_model);
            for (const auto& file : predict_files) {
                mmml::ImageSet probe;
                probe.samples = mmml::read_set_file(file, 0);
                probe.set_id = file;
                if (predict_normalize) probe.samples /= 255.0;
                const auto [spd, grass] =
                    mmml::model_set(probe, model.anchors.q, model.anchors.alpha);
                const mmml::Classification cls = mmml::classify(model, spd, grass);
                std::cout << file << " -> " << cls.label << '\n';
                const int top = std::min<int>(predict_top,
                                              static_cast<int>(cls.neighbors.size()));
                for (int i = 0; i < top; ++i) {
                    const auto& nb = cls.neighbors[static_cast<std::size_t>(i)];
                    std::cout << "  " << nb.label << " ("
                              << model.gallery_set_ids[static_cast<std::size_t>(
                                     nb.gallery_index)]
                              << ") distance " << nb.distance << '\n';
                }
            }
        } else if (eval->parsed()) {
            eval_split.probe_per_class = parse_probe_count(eval_probe);
            const auto sets = load_sets(eval_opts);
            const mmml::ExperimentReport report =
                mmml::run_experiment(sets, eval_split, eval_opts.hyper, eval_opts.threads);
            emit(mmml::report_text(report), eval_out);
        } else if (sweep_cmd->parsed()) {
            sweep_split.probe_per_class = parse_probe_count(sweep_probe);
            const auto sets = load_sets(sweep_opts);
            const mmml::SweepAxis axis = mmml::sweep_axis_from_name(sweep_axis_str);
            const auto rows = mmml::sweep(sets, sweep_split, sweep_opts.hyper, axis,
                                          parse_grid(sweep_grid_str), sweep_opts.threads);
            emit(mmml::sweep_text(axis, rows, sweep_split, sweep_opts.hyper), sweep_out);
        }
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
