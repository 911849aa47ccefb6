#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lotnet/cli.hpp"
#include "lotnet/errors.hpp"

namespace lotnet {

std::string encode_doubles(const double* data, std::size_t n) {
    std::string out(n * 16, '0');
    static const char* digits = "0123456789abcdef";
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
        for (int k = 15; k >= 0; --k) {
            out[i * 16 + static_cast<std::size_t>(k)] = digits[bits & 0xf];
            bits >>= 4;
        }
    }
    return out;
}

std::vector<double> decode_doubles(const std::string& hex) {
    if (hex.size() % 16 != 0) throw FormatError("hex array length is not a multiple of 16");
    std::vector<double> out(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < 16; ++k) {
            const char c = hex[i * 16 + k];
            unsigned v;
            if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
            else throw FormatError("invalid hex digit in array");
            bits = (bits << 4) | v;
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

Json matrix_to_json(const Matrix& m) {
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_doubles(m.data(), static_cast<std::size_t>(m.size()))}};
}

Matrix matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw FormatError("negative matrix shape");
    const std::vector<double> v = decode_doubles(j.at("data").get<std::string>());
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw FormatError("matrix data does not match its shape");
    Matrix m(rows, cols);
    if (!v.empty()) std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
    return m;
}

namespace {

Json vector_to_json(const Vector& v) { return matrix_to_json(Matrix(v)); }

Vector vector_from_json(const Json& j) {
    const Matrix m = matrix_from_json(j);
    if (m.cols() != 1 && m.size() != 0) throw FormatError("expected a column vector");
    return m.size() == 0 ? Vector() : Vector(m.col(0));
}

Json double_json(double x) { return encode_doubles(&x, 1); }

double double_from(const Json& j) {
    const std::vector<double> v = decode_doubles(j.get<std::string>());
    if (v.size() != 1) throw FormatError("expected a single encoded double");
    return v[0];
}

Json activation_json(const Activation& a) {
    return Json{{"kind", to_string(a.kind)}, {"sharpness", double_json(a.sharpness)}};
}

Activation activation_from(const Json& j) {
    Activation a;
    a.kind = activation_from_string(j.at("kind").get<std::string>());
    a.sharpness = double_from(j.at("sharpness"));
    return a;
}

Json pair_to_json(const std::string& id, const DualPair& p) {
    return Json{{"id", id},
                {"iterations", p.meta.iterations},
                {"final_loss", double_json(p.meta.final_loss)},
                {"seed", p.meta.seed},
                {"psi", icnn_to_json(p.psi)},
                {"phi", icnn_to_json(p.phi)}};
}

DualPair pair_from_json(const Json& j) {
    DualPair p;
    p.meta.iterations = j.at("iterations").get<std::int64_t>();
    p.meta.final_loss = double_from(j.at("final_loss"));
    p.meta.seed = j.at("seed").get<std::uint64_t>();
    p.psi = icnn_from_json(j.at("psi"));
    p.phi = icnn_from_json(j.at("phi"));
    return p;
}

}  // namespace

Json icnn_to_json(const Icnn& net) {
    Json layers = Json::array();
    for (const auto& L : net.params.layers)
        layers.push_back(Json{{"Wx", matrix_to_json(L.Wx)}, {"Wz", matrix_to_json(L.Wz)}, {"b", vector_to_json(L.b)}});
    return Json{{"dim", net.cfg.dim},
                {"widths", net.cfg.widths},
                {"activation", activation_json(net.cfg.activation)},
                {"quadratic", double_json(net.cfg.quadratic)},
                {"layers", layers}};
}

Icnn icnn_from_json(const Json& j) {
    Icnn net;
    net.cfg.dim = j.at("dim").get<int>();
    net.cfg.widths = j.at("widths").get<std::vector<int>>();
    net.cfg.activation = activation_from(j.at("activation"));
    net.cfg.quadratic = double_from(j.at("quadratic"));
    net.cfg.validate();
    const IcnnParams shape = IcnnParams::zeros(net.cfg);
    const Json& layers = j.at("layers");
    if (layers.size() != shape.layers.size()) throw FormatError("ICNN layer count does not match its widths");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        IcnnLayer L{matrix_from_json(layers[i].at("Wx")), matrix_from_json(layers[i].at("Wz")),
                    vector_from_json(layers[i].at("b"))};
        const IcnnLayer& ref = shape.layers[i];
        if (L.Wx.rows() != ref.Wx.rows() || L.Wx.cols() != ref.Wx.cols() || L.Wz.rows() != ref.Wz.rows() ||
            L.Wz.cols() != ref.Wz.cols() || L.b.size() != ref.b.size())
            throw FormatError("ICNN layer " + std::to_string(i) + " has the wrong shape");
        net.params.layers.push_back(std::move(L));
    }
    return net;
}

Json mlp_to_json(const Mlp& net) {
    return Json{{"sizes", net.sizes()}, {"activation", activation_json(net.activation())}, {"params", vector_to_json(net.pack())}};
}

Mlp mlp_from_json(const Json& j) {
    const auto sizes = j.at("sizes").get<std::vector<int>>();
    if (sizes.size() < 2) throw FormatError("MLP needs at least input and output sizes");
    for (int s : sizes)
        if (s < 1) throw FormatError("MLP sizes must be positive");
    Rng rng(0);
    Mlp net(sizes, activation_from(j.at("activation")), rng);
    const Vector flat = vector_from_json(j.at("params"));
    if (flat.size() != net.num_params()) throw FormatError("MLP parameter count does not match its sizes");
    net.unpack(flat);
    return net;
}

Json reference_to_json(const ReferenceMeasure& r) {
    return Json{{"kind", to_string(r.kind)},
                {"dim", r.dim},
                {"mean", vector_to_json(r.mean)},
                {"scale", vector_to_json(r.scale)},
                {"seed", r.seed}};
}

ReferenceMeasure reference_from_json(const Json& j) {
    ReferenceMeasure r;
    r.kind = reference_kind_from_string(j.at("kind").get<std::string>());
    r.dim = j.at("dim").get<int>();
    r.mean = vector_from_json(j.at("mean"));
    r.scale = vector_from_json(j.at("scale"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.validate();
    return r;
}

EmbeddingSet ModelBundle::embedding() const {
    return EmbeddingSet::build(reference, ids, pairs, sample_size, sample_seed);
}

Json bundle_to_json(const ModelBundle& b) {
    Json j;
    j["format_version"] = b.format_version;
    j["build_version"] = kBuildVersion;
    j["config_hash"] = config_hash(b.config);
    j["config"] = to_json(b.config);
    j["reference"] = reference_to_json(b.reference);
    j["sample_seed"] = b.sample_seed;
    j["sample_size"] = b.sample_size;
    j["train_count"] = b.train_count;
    j["ot_iterations"] = b.ot_iterations;
    Json pairs = Json::array();
    for (std::size_t i = 0; i < b.pairs.size(); ++i) pairs.push_back(pair_to_json(b.ids[i], b.pairs[i]));
    j["pairs"] = pairs;
    j["classifier"] = Json{{"output", b.classifier.rho == OutputActivation::Sigmoid ? "sigmoid" : "softmax"},
                           {"threshold", double_json(b.classifier.threshold)},
                           {"weightnet", mlp_to_json(b.classifier.weightnet)}};
    Json ds = Json::array();
    for (const auto& m : b.deepsets) ds.push_back(Json{{"phi", mlp_to_json(m.phi)}, {"rho", mlp_to_json(m.rho)}});
    j["deepsets"] = ds;
    j["split"] = Json{{"train", b.split_train}, {"val", b.split_val}, {"test", b.split_test}};
    j["history_digest"] = b.history_digest;
    return j;
}

ModelBundle bundle_from_json(const Json& j) {
    if (!j.is_object() || j.empty() || j.begin().key() != "format_version")
        throw FormatError("bundle: format_version must be the first field");
    const Json& ver = j.begin().value();
    if (!ver.is_string() || ver.get<std::string>() != kBundleFormat)
        throw FormatError("bundle: unsupported format version " + ver.dump() + " (expected \"" + kBundleFormat + "\")");
    try {
        ModelBundle b;
        b.config = run_config_from_json(j.at("config"));
        b.reference = reference_from_json(j.at("reference"));
        b.sample_seed = j.at("sample_seed").get<std::uint64_t>();
        b.sample_size = j.at("sample_size").get<int>();
        b.train_count = j.at("train_count").get<std::size_t>();
        b.ot_iterations = j.at("ot_iterations").get<std::int64_t>();
        for (const auto& p : j.at("pairs")) {
            b.ids.push_back(p.at("id").get<std::string>());
            b.pairs.push_back(pair_from_json(p));
            b.pairs.back().validate();
        }
        if (b.train_count > b.pairs.size()) throw FormatError("bundle: train_count exceeds the number of maps");
        const Json& c = j.at("classifier");
        const std::string out = c.at("output").get<std::string>();
        if (out != "sigmoid" && out != "softmax") throw FormatError("bundle: unknown classifier output '" + out + "'");
        b.classifier.rho = out == "sigmoid" ? OutputActivation::Sigmoid : OutputActivation::Softmax;
        b.classifier.threshold = double_from(c.at("threshold"));
        b.classifier.weightnet = mlp_from_json(c.at("weightnet"));
        for (const auto& m : j.at("deepsets")) b.deepsets.push_back({mlp_from_json(m.at("phi")), mlp_from_json(m.at("rho"))});
        const Json& s = j.at("split");
        b.split_train = s.at("train").get<std::vector<std::string>>();
        b.split_val = s.at("val").get<std::vector<std::string>>();
        b.split_test = s.at("test").get<std::vector<std::string>>();
        b.history_digest = j.at("history_digest").get<std::string>();
        for (const auto& p : b.pairs)
            if (p.dim() != b.reference.dim) throw FormatError("bundle: map dimension differs from the reference");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bundle: malformed document: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("bundle: ") + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(std::string("bundle: ") + e.what());
    }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write bundle " + file.string());
    out << bundle_to_json(b).dump(1) << '\n';
    if (!out) throw DataError("failed writing bundle " + file.string());
}

ModelBundle load_bundle(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open bundle " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("bundle " + file.string() + " is not valid JSON: " + e.what());
    }
    return bundle_from_json(j);
}

}  // namespace lotnet
