#include "mmml/model_io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mmml/errors.hpp"

namespace mmml {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'M', 'L', 'M', 'D', 'L', '\n'};

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
    put_string(out, name);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError(std::string("model file truncated reading ") + what);
    return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError(std::string("model file truncated reading ") + what);
    return v;
}

std::string get_string(std::istream& in, const char* what) {
    const std::uint32_t len = get_u32(in, what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError(std::string("model file truncated reading ") + what);
    return s;
}

Eigen::MatrixXd get_matrix_body(std::istream& in, const std::string& name) {
    const std::uint64_t rows = get_u64(in, name.c_str());
    const std::uint64_t cols = get_u64(in, name.c_str());
    if (rows > (1u << 24) || cols > (1u << 24)) {
        throw FormatError("model file declares an implausible matrix size for '" + name +
                          "'");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw FormatError("model file truncated reading matrix '" + name + "'");
    return m;
}

Eigen::VectorXd to_vector(const Eigen::MatrixXd& m, const std::string& name) {
    if (m.cols() != 1) {
        throw FormatError("model entry '" + name + "' is not a column vector");
    }
    return m.col(0);
}

}  // namespace

void save_model(const EmbeddingModel& model, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write model file '" + file.string() + "'");
    }
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kModelFormatVersion);

    std::uint32_t matrices =
        6 + static_cast<std::uint32_t>(model.anchors.spd_logs.size()) +
        static_cast<std::uint32_t>(model.anchors.bases.size());
    put_u32(out, matrices);
    put_matrix(out, "e_mat", model.e_mat);
    put_matrix(out, "gen_eigenvalues", model.gen_eigenvalues);
    Eigen::VectorXd u(model.u.size());
    for (std::size_t i = 0; i < model.u.size(); ++i) u(static_cast<Eigen::Index>(i)) = model.u[i];
    put_matrix(out, "u", u);
    Eigen::VectorXd scales(model.gram_scales.size());
    for (std::size_t i = 0; i < model.gram_scales.size(); ++i) {
        scales(static_cast<Eigen::Index>(i)) = model.gram_scales[i];
    }
    put_matrix(out, "gram_scales", scales);
    Eigen::Vector3d hyper(static_cast<double>(model.d_z),
                          static_cast<double>(model.anchors.q), model.anchors.alpha);
    put_matrix(out, "hyper", hyper);
    put_matrix(out, "gallery_embeddings", model.gallery_embeddings);
    for (std::size_t i = 0; i < model.anchors.spd_logs.size(); ++i) {
        put_matrix(out, "spd_log/" + std::to_string(i), model.anchors.spd_logs[i]);
    }
    for (std::size_t i = 0; i < model.anchors.bases.size(); ++i) {
        put_matrix(out, "basis/" + std::to_string(i), model.anchors.bases[i]);
    }

    put_u32(out, 3);  // string lists
    put_string(out, "kinds");
    put_u64(out, model.kinds.size());
    for (KernelKind kind : model.kinds) put_string(out, kernel_kind_name(kind));
    put_string(out, "gallery_labels");
    put_u64(out, model.gallery_labels.size());
    for (const auto& label : model.gallery_labels) put_string(out, label);
    put_string(out, "gallery_set_ids");
    put_u64(out, model.gallery_set_ids.size());
    for (const auto& id : model.gallery_set_ids) put_string(out, id);

    if (!out) {
        throw FormatError("short write to model file '" + file.string() + "'");
    }
}

EmbeddingModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open model file '" + file.string() + "'");
    }
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw FormatError("'" + file.string() + "' is not an mmml model file");
    }
    const std::uint32_t version = get_u32(in, "version");
    if (version > kModelFormatVersion) {
        std::ostringstream msg;
        msg << "model file version " << version << " is newer than supported version "
            << kModelFormatVersion;
        throw FormatError(msg.str());
    }

    std::map<std::string, Eigen::MatrixXd> matrices;
    const std::uint32_t matrix_count = get_u32(in, "matrix count");
    for (std::uint32_t i = 0; i < matrix_count; ++i) {
        std::string name = get_string(in, "matrix name");
        matrices[name] = get_matrix_body(in, name);
    }
    std::map<std::string, std::vector<std::string>> lists;
    const std::uint32_t list_count = get_u32(in, "string-list count");
    for (std::uint32_t i = 0; i < list_count; ++i) {
        std::string name = get_string(in, "list name");
        const std::uint64_t items = get_u64(in, "list length");
        std::vector<std::string> list;
        list.reserve(items);
        for (std::uint64_t j = 0; j < items; ++j) {
            list.push_back(get_string(in, "list item"));
        }
        lists[name] = std::move(list);
    }

    auto need_matrix = [&](const std::string& name) -> const Eigen::MatrixXd& {
        auto it = matrices.find(name);
        if (it == matrices.end()) {
            throw FormatError("model file is missing entry '" + name + "'");
        }
        return it->second;
    };
    auto need_list = [&](const std::string& name) -> const std::vector<std::string>& {
        auto it = lists.find(name);
        if (it == lists.end()) {
            throw FormatError("model file is missing list '" + name + "'");
        }
        return it->second;
    };

    EmbeddingModel model;
    model.e_mat = need_matrix("e_mat");
    model.gen_eigenvalues = to_vector(need_matrix("gen_eigenvalues"), "gen_eigenvalues");
    const Eigen::VectorXd u = to_vector(need_matrix("u"), "u");
    model.u.assign(u.data(), u.data() + u.size());
    const Eigen::VectorXd scales = to_vector(need_matrix("gram_scales"), "gram_scales");
    model.gram_scales.assign(scales.data(), scales.data() + scales.size());
    const Eigen::VectorXd hyper = to_vector(need_matrix("hyper"), "hyper");
    if (hyper.size() != 3) throw FormatError("model entry 'hyper' has wrong length");
    model.d_z = static_cast<int>(hyper(0));
    model.anchors.q = static_cast<int>(hyper(1));
    model.anchors.alpha = hyper(2);
    model.gallery_embeddings = need_matrix("gallery_embeddings");
    for (const auto& name : need_list("kinds")) {
        model.kinds.push_back(kernel_kind_from_name(name));
    }
    model.gallery_labels = need_list("gallery_labels");
    model.gallery_set_ids = need_list("gallery_set_ids");

    const auto n = static_cast<std::size_t>(model.e_mat.rows());
    for (KernelKind kind : model.kinds) {
        auto& anchor = kind == KernelKind::LogEuclidean ? model.anchors.spd_logs
                                                        : model.anchors.bases;
        const char* prefix = kind == KernelKind::LogEuclidean ? "spd_log/" : "basis/";
        for (std::size_t i = 0; i < n; ++i) {
            anchor.push_back(need_matrix(prefix + std::to_string(i)));
        }
    }
    if (model.u.size() != model.kinds.size() ||
        model.gram_scales.size() != model.kinds.size() ||
        model.gallery_labels.size() != n) {
        throw FormatError("model file sections disagree on model or gallery counts");
    }
    return model;
}

}  // namespace mmml
