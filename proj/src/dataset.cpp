#include "mmml/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmml/errors.hpp"
#include "mmml/rng.hpp"

namespace mmml {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetManifest load_manifest(const fs::path& manifest_file) {
    std::ifstream in(manifest_file);
    if (!in) {
        throw FormatError("cannot open manifest '" + manifest_file.string() + "'");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& err) {
        throw FormatError("manifest '" + manifest_file.string() +
                          "' is not valid JSON: " + err.what());
    }
    if (doc.value("format", "") != "mmml-dataset") {
        throw FormatError("manifest '" + manifest_file.string() +
                          "' missing format tag 'mmml-dataset'");
    }
    DatasetManifest manifest;
    try {
        manifest.d = doc.at("d").get<int>();
        manifest.source_note = doc.value("note", "");
        for (const auto& item : doc.at("sets")) {
            ManifestEntry entry;
            entry.path = item.at("path").get<std::string>();
            entry.label = item.at("label").get<std::string>();
            entry.set_id = item.value("id", entry.path);
            manifest.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& err) {
        throw FormatError("manifest '" + manifest_file.string() +
                          "' malformed: " + err.what());
    }
    if (manifest.d < 1) {
        throw FormatError("manifest feature dimension d must be positive");
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& manifest_file) {
    json doc;
    doc["format"] = "mmml-dataset";
    doc["version"] = 1;
    doc["d"] = manifest.d;
    doc["note"] = manifest.source_note;
    json sets = json::array();
    for (const auto& entry : manifest.entries) {
        sets.push_back({{"path", entry.path}, {"label", entry.label}, {"id", entry.set_id}});
    }
    doc["sets"] = std::move(sets);
    std::ofstream out(manifest_file);
    if (!out) {
        throw FormatError("cannot write manifest '" + manifest_file.string() + "'");
    }
    out << doc.dump(2) << '\n';
}

Eigen::MatrixXd read_set_file(const fs::path& file, int expected_d) {
    std::ifstream in(file);
    if (!in) {
        throw FormatError("cannot open set file '" + file.string() + "'");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<double> row;
        const char* cursor = line.c_str();
        while (*cursor != '\0') {
            char* end = nullptr;
            const double value = std::strtod(cursor, &end);
            if (end == cursor) {
                if (std::isspace(static_cast<unsigned char>(*cursor))) {
                    ++cursor;
                    continue;
                }
                std::ostringstream msg;
                msg << "set file '" << file.string() << "' line " << line_no
                    << ": unparseable token starting at '" << cursor << "'";
                throw FormatError(msg.str());
            }
            row.push_back(value);
            cursor = end;
        }
        if (row.empty()) continue;  // blank line
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream msg;
            msg << "set file '" << file.string() << "' line " << line_no << ": row has "
                << row.size() << " values, previous rows have " << rows.front().size();
            throw FormatError(msg.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw FormatError("set file '" + file.string() + "' contains no samples");
    }
    const int d = static_cast<int>(rows.front().size());
    if (expected_d > 0 && d != expected_d) {
        std::ostringstream msg;
        msg << "set file '" << file.string() << "': feature dimension " << d
            << " does not match manifest d = " << expected_d;
        throw FormatError(msg.str());
    }
    Eigen::MatrixXd samples(d, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < d; ++j) {
            samples(j, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(j)];
        }
    }
    return samples;
}

void write_set_file(const fs::path& file, const Eigen::MatrixXd& samples) {
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write set file '" + file.string() + "'");
    }
    char buffer[64];
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        for (Eigen::Index j = 0; j < samples.rows(); ++j) {
            // 17 significant digits round-trip an IEEE double exactly.
            std::snprintf(buffer, sizeof(buffer), "%.17g", samples(j, i));
            out << buffer << (j + 1 == samples.rows() ? '\n' : ' ');
        }
    }
    if (!out) {
        throw FormatError("short write to set file '" + file.string() + "'");
    }
}

namespace {

int pgm_next_int(std::istream& in, const fs::path& file) {
    // Skips whitespace and '#' comment lines between header tokens.
    for (;;) {
        const int c = in.peek();
        if (c == EOF) {
            throw FormatError("unexpected end of PGM header in '" + file.string() + "'");
        }
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) {
        throw FormatError("malformed PGM header in '" + file.string() + "'");
    }
    return value;
}

Eigen::MatrixXd read_pgm(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open image '" + file.string() + "'");
    }
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P2" && magic != "P5") {
        throw FormatError("'" + file.string() + "' is not a PGM image (P2/P5)");
    }
    const int width = pgm_next_int(in, file);
    const int height = pgm_next_int(in, file);
    const int maxval = pgm_next_int(in, file);
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
        throw FormatError("bad PGM geometry in '" + file.string() + "'");
    }
    Eigen::MatrixXd img(height, width);
    if (magic == "P2") {
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                img(r, c) = pgm_next_int(in, file);
            }
        }
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
            throw FormatError("truncated PGM pixel data in '" + file.string() + "'");
        }
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const std::size_t k = (static_cast<std::size_t>(r) * width + c) * bytes;
                img(r, c) = bytes == 1 ? raw[k] : raw[k] * 256.0 + raw[k + 1];
            }
        }
    }
    return img;
}

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& src, int out_h, int out_w) {
    Eigen::MatrixXd dst(out_h, out_w);
    const double sy = static_cast<double>(src.rows()) / out_h;
    const double sx = static_cast<double>(src.cols()) / out_w;
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0,
                                        static_cast<double>(src.rows() - 1));
            const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0,
                                        static_cast<double>(src.cols() - 1));
            const int y0 = static_cast<int>(y);
            const int x0 = static_cast<int>(x);
            const int y1 = std::min<int>(y0 + 1, static_cast<int>(src.rows()) - 1);
            const int x1 = std::min<int>(x0 + 1, static_cast<int>(src.cols()) - 1);
            const double fy = y - y0;
            const double fx = x - x0;
            dst(r, c) = (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) +
                        fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
        }
    }
    return dst;
}

}  // namespace

Eigen::MatrixXd read_pgm_set_dir(const fs::path& dir, int side) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            frames.push_back(entry.path());
        }
    }
    std::sort(frames.begin(), frames.end());
    if (frames.empty()) {
        throw FormatError("set directory '" + dir.string() + "' holds no .pgm frames");
    }
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(side) * side,
                            static_cast<Eigen::Index>(frames.size()));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Eigen::MatrixXd img = resize_bilinear(read_pgm(frames[i]), side, side);
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                samples(static_cast<Eigen::Index>(r) * side + c,
                        static_cast<Eigen::Index>(i)) = img(r, c);
            }
        }
    }
    return samples;
}

std::vector<ImageSet> ingest(const fs::path& root, const DatasetManifest& manifest,
                             bool normalize_pixels) {
    if (manifest.entries.empty()) {
        throw FormatError("manifest lists no image sets");
    }
    std::vector<ImageSet> sets;
    sets.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        const fs::path target = root / entry.path;
        ImageSet set;
        set.label = entry.label;
        set.set_id = entry.set_id;
        if (fs::is_directory(target)) {
            const int side = static_cast<int>(std::lround(std::sqrt(manifest.d)));
            if (side * side != manifest.d) {
                std::ostringstream msg;
                msg << "image-directory ingestion needs a square d, got " << manifest.d;
                throw FormatError(msg.str());
            }
            set.samples = read_pgm_set_dir(target, side);
        } else {
            set.samples = read_set_file(target, manifest.d);
        }
        if (set.size() < 2) {
            throw DegenerateSetError("set '" + entry.set_id + "' in '" + target.string() +
                                     "' has fewer than 2 images");
        }
        if (normalize_pixels) {
            set.samples /= 255.0;
        }
        sets.push_back(std::move(set));
    }
    std::vector<std::string> labels;
    for (const auto& s : sets) labels.push_back(s.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.size() < 2) {
        throw ProtocolError("dataset must contain at least two classes");
    }
    return sets;
}

namespace {

// Substream layout for synthesis: stream 0 drives shared structure, stream
// 1+c the parameters of class c, stream 1+classes+g the samples of the
// g-th set overall.
constexpr std::uint64_t kSharedStream = 0;

Eigen::MatrixXd random_gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = rng.gaussian();
        }
    }
    return m;
}

Eigen::MatrixXd random_orthonormal(Rng& rng, Eigen::Index d, Eigen::Index q) {
    const Eigen::MatrixXd g = random_gaussian_matrix(rng, d, q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd full = qr.householderQ();
    return full.leftCols(q);
}

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index d, double ridge) {
    const Eigen::MatrixXd a = random_gaussian_matrix(rng, d, d);
    Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(d);
    s.diagonal().array() += ridge;
    return 0.5 * (s + s.transpose()).eval();
}

struct ClassLaw {
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;  // lower factor of the class covariance
};

std::vector<ImageSet> sample_sets(const SynthSpec& spec, const std::vector<ClassLaw>& laws,
                                  double offset_sigma, double log_scale_sigma) {
    std::vector<ImageSet> sets;
    sets.reserve(static_cast<std::size_t>(spec.classes) * spec.sets_per_class);
    std::uint64_t set_counter = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int s = 0; s < spec.sets_per_class; ++s, ++set_counter) {
            Rng rng(substream_seed(spec.seed,
                                   1 + static_cast<std::uint64_t>(spec.classes) + set_counter));
            const Eigen::VectorXd offset =
                offset_sigma * random_gaussian_matrix(rng, spec.d, 1).col(0);
            const double scale =
                log_scale_sigma > 0.0 ? std::exp(log_scale_sigma * rng.gaussian()) : 1.0;
            Eigen::MatrixXd z = random_gaussian_matrix(rng, spec.d, spec.images_per_set);
            ImageSet set;
            set.samples = scale * (laws[static_cast<std::size_t>(c)].chol * z);
            set.samples.colwise() += laws[static_cast<std::size_t>(c)].mean + offset;
            set.label = "class" + std::to_string(c);
            set.set_id = "c" + std::to_string(c) + "_s" + std::to_string(s);
            sets.push_back(std::move(set));
        }
    }
    return sets;
}

std::vector<ImageSet> synth_gaussian(const SynthSpec& spec) {
    Rng shared(substream_seed(spec.seed, kSharedStream));
    const Eigen::MatrixXd base_cov = random_spd(shared, spec.d, 0.5);

    // Class identity must live in the covariance: set modeling centers each
    // set, so class means alone are invisible downstream. Each class owns a
    // rank-2 variance spike along its own random directions, with strength
    // `separation`; at 0 every class samples the same law.
    const Eigen::Index spike_rank = std::min<Eigen::Index>(2, spec.d);
    std::vector<ClassLaw> laws(static_cast<std::size_t>(spec.classes));
    for (int c = 0; c < spec.classes; ++c) {
        Rng rng(substream_seed(spec.seed, 1 + static_cast<std::uint64_t>(c)));
        ClassLaw law;
        law.mean = (spec.separation / std::sqrt(static_cast<double>(spec.d))) *
                   random_gaussian_matrix(rng, spec.d, 1).col(0);
        const Eigen::MatrixXd spike = random_orthonormal(rng, spec.d, spike_rank);
        Eigen::MatrixXd cov = base_cov + spec.separation * (spike * spike.transpose());
        cov = 0.5 * (cov + cov.transpose()).eval();
        law.chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
        laws[static_cast<std::size_t>(c)] = std::move(law);
    }
    return sample_sets(spec, laws, /*offset_sigma=*/0.1, /*log_scale_sigma=*/0.0);
}

// Mixed preset: the first half of the classes share one signal subspace and
// differ only in their variance profile along it (invisible to the
// projection kernel); the second half share one variance profile and differ
// only in subspace orientation. A per-set global scale jitter further blurs
// the log-Euclidean view without touching subspaces.
struct MixedConstants {
    int q_sig = 3;                 // signal subspace dimension (model with q = 3)
    double noise_sigma2 = 0.5;     // isotropic floor
    double shape_base = 2.0;       // first shape class variance level
    double shape_ratio = 3.0;      // level ratio between consecutive shape classes
    double orient_variance = 1.0;  // shared signal variance of orientation classes
    double offset_sigma = 0.05;
    double log_scale_sigma = 0.25;
};

std::vector<ImageSet> synth_mixed(const SynthSpec& spec) {
    const MixedConstants k;
    if (spec.classes < 2 || spec.classes % 2 != 0) {
        throw ProtocolError("mixed preset needs an even class count >= 2");
    }
    if (spec.d < 2 * k.q_sig) {
        throw ProtocolError("mixed preset needs d >= " + std::to_string(2 * k.q_sig));
    }
    Rng shared(substream_seed(spec.seed, kSharedStream));
    const Eigen::MatrixXd shape_basis = random_orthonormal(shared, spec.d, k.q_sig);

    std::vector<ClassLaw> laws(static_cast<std::size_t>(spec.classes));
    const int half = spec.classes / 2;
    for (int c = 0; c < spec.classes; ++c) {
        Rng rng(substream_seed(spec.seed, 1 + static_cast<std::uint64_t>(c)));
        Eigen::MatrixXd basis;
        Eigen::VectorXd variances(k.q_sig);
        if (c < half) {
            basis = shape_basis;
            const double level = k.shape_base * std::pow(k.shape_ratio, c);
            for (int i = 0; i < k.q_sig; ++i) {
                variances(i) = level * std::pow(0.8, i);
            }
        } else {
            basis = random_orthonormal(rng, spec.d, k.q_sig);
            variances.setConstant(k.orient_variance);
        }
        Eigen::MatrixXd cov = basis * variances.asDiagonal() * basis.transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
        cov.diagonal().array() += k.noise_sigma2;
        ClassLaw law;
        law.mean = Eigen::VectorXd::Zero(spec.d);
        law.chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
        laws[static_cast<std::size_t>(c)] = std::move(law);
    }
    return sample_sets(spec, laws, k.offset_sigma, k.log_scale_sigma);
}

}  // namespace

std::vector<ImageSet> synth_generate(const SynthSpec& spec) {
    if (spec.classes < 1 || spec.sets_per_class < 1 || spec.images_per_set < 2 ||
        spec.d < 1) {
        throw ProtocolError(
            "synth_generate: classes/sets_per_class >= 1, images_per_set >= 2, d >= 1");
    }
    switch (spec.preset) {
        case SynthPreset::Gaussian: return synth_gaussian(spec);
        case SynthPreset::Mixed: return synth_mixed(spec);
    }
    throw Error("unknown synthesis preset");
}

void write_dataset(const fs::path& dir, const std::vector<ImageSet>& sets,
                   const std::string& note) {
    if (sets.empty()) {
        throw ProtocolError("write_dataset: no sets to write");
    }
    fs::create_directories(dir / "sets");
    DatasetManifest manifest;
    manifest.d = static_cast<int>(sets.front().dim());
    manifest.source_note = note;
    for (const auto& set : sets) {
        const std::string rel = "sets/" + set.set_id + ".txt";
        write_set_file(dir / rel, set.samples);
        manifest.entries.push_back(ManifestEntry{rel, set.label, set.set_id});
    }
    save_manifest(manifest, dir / "manifest.json");
}

}  // namespace mmml
