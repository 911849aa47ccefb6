#include "lotnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace lotnet {

namespace fs = std::filesystem;

void require_nonempty(const PointCloud& cloud, const std::string& context) {
    if (cloud.empty()) throw DataError(context + ": point cloud '" + cloud.id + "' is empty");
}

Matrix canonical_order(const Matrix& points) {
    std::vector<Eigen::Index> order(points.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index r = 0; r < points.rows(); ++r) {
            if (points(r, a) < points(r, b)) return true;
            if (points(r, b) < points(r, a)) return false;
        }
        return false;
    });
    Matrix out(points.rows(), points.cols());
    for (Eigen::Index k = 0; k < points.cols(); ++k) out.col(k) = points.col(order[k]);
    return out;
}

std::size_t LabeledDataset::count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledDataset::validate() const {
    if (clouds.size() != labels.size()) throw DataError("dataset: clouds and labels differ in length");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError("dataset: label of '" + clouds[i].id + "' is not 0 or 1");
        if (clouds[i].dim() != dim)
            throw DimensionError("dataset: cloud '" + clouds[i].id + "' has dim " +
                                 std::to_string(clouds[i].dim()) + ", expected " + std::to_string(dim));
        if (!ids.insert(clouds[i].id).second) throw DataError("dataset: duplicate id '" + clouds[i].id + "'");
    }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    out.dim = dim;
    for (std::size_t i : indices) {
        out.clouds.push_back(clouds.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

LabeledDataset LabeledDataset::with_swapped_labels() const {
    LabeledDataset out = *this;
    for (int& y : out.labels) y = 1 - y;
    return out;
}

// ---------------------------------------------------------------------------

TransformMap TransformMap::scale(double c) {
    if (!(c > 0.0)) throw ConfigError("Scale factor must be > 0");
    return {Scale{c}};
}

TransformMap TransformMap::affine(Matrix A, Vector b) {
    if (A.rows() != A.cols() || A.rows() != b.size()) throw DimensionError("Affine: A must be d x d and b length d");
    if (std::abs(A.determinant()) < 1e-12) throw ConfigError("Affine: matrix is singular");
    return {Affine{std::move(A), std::move(b)}};
}

Matrix TransformMap::apply(const Matrix& X) const {
    return std::visit(
        [&](const auto& g) -> Matrix {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Shift>) {
                require_dims(g.offset.size() == X.rows(), "Shift offset vs cloud dim");
                return X.colwise() + g.offset;
            } else if constexpr (std::is_same_v<T, Scale>) {
                if (!(g.factor > 0.0)) throw ConfigError("Scale factor must be > 0");
                return g.factor * X;
            } else {
                require_dims(g.A.rows() == g.A.cols() && g.A.cols() == X.rows() && g.b.size() == X.rows(),
                             "Affine matrix/offset vs cloud dim");
                if (Eigen::FullPivLU<Matrix>(g.A).rank() < g.A.rows()) throw ConfigError("Affine matrix is singular");
                Matrix Y = g.A * X;
                Y.colwise() += g.b;
                return Y;
            }
        },
        map);
}

double TransformMap::norm_on(const PointCloud& base) const {
    require_nonempty(base, "TransformMap::norm_on");
    return std::sqrt(apply(base.points).colwise().squaredNorm().mean());
}

namespace {

std::string vec_str(const Vector& v) {
    std::ostringstream os;
    os.precision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

}  // namespace

std::string TransformMap::describe() const {
    return std::visit(
        [](const auto& g) -> std::string {
            using T = std::decay_t<decltype(g)>;
            std::ostringstream os;
            os.precision(17);
            if constexpr (std::is_same_v<T, Shift>) {
                os << "shift(" << vec_str(g.offset) << ")";
            } else if constexpr (std::is_same_v<T, Scale>) {
                os << "scale(" << g.factor << ")";
            } else {
                os << "affine(A=" << vec_str(Eigen::Map<const Vector>(g.A.data(), g.A.size())) << "; b=" << vec_str(g.b)
                   << ")";
            }
            return os.str();
        },
        map);
}

PointCloud apply_transform(const TransformMap& g, const PointCloud& X) {
    PointCloud out;
    out.id = X.id + "~" + g.describe();
    out.points = g.apply(X.points);
    out.meta = X.meta;
    out.meta["transform"] = g.describe();
    return out;
}

// ---------------------------------------------------------------------------

SyntheticSpec SyntheticSpec::default_spec(int dim) {
    if (dim < 2) throw ConfigError("default synthetic spec needs dim >= 2");
    SyntheticSpec s;
    s.dim = dim;
    for (int k = 0; k < 2; ++k) {
        s.base[k].kind = BaseKind::Gaussian;
        s.base[k].mean = Vector::Zero(dim);
        s.base[k].stddev = Vector::Constant(dim, 0.3);
    }
    s.base[0].mean[0] = -1.5;
    s.base[1].mean[0] = 1.5;
    s.base[0].stddev[0] = 1.0;
    s.base[1].stddev[1] = 1.0;
    return s;
}

void SyntheticSpec::validate() const {
    if (dim < 1) throw ConfigError("synthetic dim must be >= 1");
    if (!(R > 0.0)) throw ConfigError("synthetic R must be > 0");
    if (shift_max < 0.0) throw ConfigError("shift_max must be >= 0");
    if (!(scale_min > 0.0) || scale_max < scale_min) throw ConfigError("scale range must satisfy 0 < min <= max");
    if (shear_max < 0.0) throw ConfigError("shear_max must be >= 0");
    for (const auto& b : base) {
        switch (b.kind) {
            case BaseKind::Gaussian:
                if (b.mean.size() != dim || b.stddev.size() != dim) throw ConfigError("Gaussian base: mean/stddev must have length dim");
                if (b.stddev.minCoeff() <= 0.0) throw ConfigError("Gaussian base: stddev must be > 0");
                break;
            case BaseKind::Mixture:
                if (b.centers.rows() != dim || b.centers.cols() < 1) throw ConfigError("Mixture base: centers must be dim x k, k >= 1");
                if (b.stddev.size() != dim || b.stddev.minCoeff() <= 0.0) throw ConfigError("Mixture base: stddev must be positive, length dim");
                break;
            case BaseKind::Ring:
                if (dim < 2) throw ConfigError("Ring base needs dim >= 2");
                if (b.mean.size() != dim) throw ConfigError("Ring base: mean must have length dim");
                if (!(b.radius > 0.0) || b.ring_width < 0.0) throw ConfigError("Ring base: radius > 0, width >= 0");
                break;
        }
    }
}

PointCloud sample_base(const BaseMeasureSpec& spec, int dim, int n, Rng& rng, const std::string& id) {
    PointCloud c;
    c.id = id;
    c.points.resize(dim, n);
    for (int k = 0; k < n; ++k) {
        switch (spec.kind) {
            case BaseKind::Gaussian:
                for (int i = 0; i < dim; ++i) c.points(i, k) = spec.mean[i] + spec.stddev[i] * rng.normal();
                break;
            case BaseKind::Mixture: {
                const auto comp = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(spec.centers.cols())));
                for (int i = 0; i < dim; ++i) c.points(i, k) = spec.centers(i, comp) + spec.stddev[i] * rng.normal();
                break;
            }
            case BaseKind::Ring: {
                const double t = 2.0 * std::numbers::pi * rng.uniform();
                const double r = spec.radius + spec.ring_width * rng.normal();
                for (int i = 0; i < dim; ++i) c.points(i, k) = spec.mean[i];
                c.points(0, k) += r * std::cos(t);
                c.points(1, k) += r * std::sin(t);
                for (int i = 2; i < dim; ++i) c.points(i, k) += spec.ring_width * rng.normal();
                break;
            }
        }
    }
    return c;
}

namespace {

TransformMap draw_transform(const SyntheticSpec& spec, Rng& rng, double& scale_out, Vector& shift_out, double& shear_out) {
    const int d = spec.dim;
    const double radius = std::min(spec.shift_max, spec.R);
    // Uniform in the d-ball: Gaussian direction, radius ~ U^(1/d).
    Vector dir(d);
    for (int i = 0; i < d; ++i) dir[i] = rng.normal();
    const double nrm = dir.norm();
    if (nrm > 0) dir /= nrm;
    shift_out = dir * radius * std::pow(rng.uniform(), 1.0 / d);
    scale_out = rng.uniform(spec.scale_min, spec.scale_max);
    shear_out = spec.shear_max > 0.0 ? rng.uniform(-spec.shear_max, spec.shear_max) : 0.0;
    Matrix A = scale_out * Matrix::Identity(d, d);
    if (d >= 2) A(0, 1) = shear_out;
    return TransformMap::affine(A, shift_out);
}

}  // namespace

LabeledDataset gen_synthetic(const SyntheticSpec& spec, int n_clouds_per_class, int n_points, std::uint64_t seed) {
    spec.validate();
    if (n_clouds_per_class < 1 || n_points < 1) throw ConfigError("gen_synthetic: counts must be >= 1");
    Rng rng(seed);
    LabeledDataset ds;
    ds.dim = spec.dim;
    PointCloud bases[2];
    for (int k = 0; k < 2; ++k) bases[k] = sample_base(spec.base[k], spec.dim, n_points, rng, "base" + std::to_string(k));

    constexpr int kMaxAttempts = 1000;
    int serial = 0;
    for (int j = 0; j < n_clouds_per_class; ++j) {
        for (int k = 0; k < 2; ++k) {
            PointCloud base = (spec.fresh_samples && j > 0) ? sample_base(spec.base[k], spec.dim, n_points, rng) : bases[k];
            double c = 1.0, shear = 0.0;
            Vector a;
            TransformMap g;
            int attempt = 0;
            for (; attempt < kMaxAttempts; ++attempt) {
                g = draw_transform(spec, rng, c, a, shear);
                if (g.within_bound(base, spec.R)) break;
            }
            if (attempt == kMaxAttempts)
                throw ConfigError("gen_synthetic: could not draw a transform with |g|_mu <= R; increase R or shrink ranges");
            PointCloud cloud;
            char buf[16];
            std::snprintf(buf, sizeof buf, "c%04d", serial++);
            cloud.id = buf;
            cloud.points = g.apply(base.points);
            cloud.meta["class"] = std::to_string(k);
            std::ostringstream sc, sh;
            sc.precision(17);
            sc << c;
            sh.precision(17);
            sh << shear;
            cloud.meta["scale"] = sc.str();
            cloud.meta["shift"] = vec_str(a);
            cloud.meta["shear"] = sh.str();
            ds.clouds.push_back(std::move(cloud));
            ds.labels.push_back(k);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

PointCloud read_cloud_csv(const fs::path& file, const std::string& id, int* dropped) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    int declared = -1;
    int width = -1;
    int bad = 0;
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            first = false;
            const std::string t = trim(line);
            if (t.rfind("#dim=", 0) == 0) {
                try {
                    declared = std::stoi(t.substr(5));
                } catch (const std::exception&) {
                    throw DataError(file.string() + ": malformed header '" + t + "'");
                }
                if (declared < 1) throw DataError(file.string() + ": declared dim must be >= 1");
                width = declared;
                continue;
            }
        }
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool ok = true;
        for (std::size_t i = 0; i < fields.size() && ok; ++i) ok = parse_double(fields[i], row[i]);
        if (ok && width < 0) width = static_cast<int>(row.size());
        if (!ok || static_cast<int>(row.size()) != width) {
            ++bad;
            continue;
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    PointCloud c;
    c.id = id;
    const int d = std::max(width, 0);
    const Eigen::Index n = d > 0 ? static_cast<Eigen::Index>(values.size()) / d : 0;
    c.points = d > 0 ? Matrix(Eigen::Map<Matrix>(values.data(), d, n)) : Matrix(0, 0);
    c.meta["source"] = file.string();
    c.meta["dropped_rows"] = std::to_string(bad);
    if (dropped) *dropped = bad;
    return c;
}

LabeledDataset load_csv_dir(const fs::path& dir, int subsample_n, std::uint64_t seed) {
    if (subsample_n < 1) throw ConfigError("subsample size must be >= 1");
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    const fs::path labels_path = dir / "labels.csv";
    if (!fs::exists(labels_path)) throw DataError("missing labels file " + labels_path.string());

    std::map<std::string, int> labels;
    {
        std::ifstream in(labels_path);
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            if (header) {
                header = false;
                if (trim(line) != "id,label") throw DataError("labels.csv: expected header 'id,label'");
                continue;
            }
            const auto f = split_fields(line);
            if (f.size() != 2 || (f[1] != "0" && f[1] != "1"))
                throw DataError("labels.csv: malformed row '" + line + "'");
            if (!labels.emplace(f[0], f[1] == "1").second) throw DataError("labels.csv: duplicate id '" + f[0] + "'");
        }
    }

    std::map<std::string, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("cloud_", 0) == 0 && entry.path().extension() == ".csv")
            files.emplace(name.substr(6, name.size() - 10), entry.path());
    }
    for (const auto& [id, _] : files)
        if (!labels.count(id)) throw DataError("cloud '" + id + "' has no entry in labels.csv");
    for (const auto& [id, _] : labels)
        if (!files.count(id)) throw DataError("labels.csv lists '" + id + "' but cloud_" + id + ".csv is missing");
    if (files.empty()) throw DataError("no cloud_<id>.csv files in " + dir.string());

    LabeledDataset ds;
    ds.dim = -1;
    for (const auto& [id, path] : files) {
        PointCloud c = read_cloud_csv(path, id);
        if (c.empty()) throw DataError("cloud '" + id + "' has no complete rows");
        if (ds.dim < 0) ds.dim = c.dim();
        if (c.dim() != ds.dim)
            throw DimensionError("cloud '" + id + "' has dim " + std::to_string(c.dim()) + ", earlier clouds have " +
                                 std::to_string(ds.dim));
        if (c.size() > subsample_n) {
            Rng rng(mix_seed(seed, fnv1a64(id)));
            std::vector<Eigen::Index> idx(c.size());
            std::iota(idx.begin(), idx.end(), 0);
            for (int k = 0; k < subsample_n; ++k)
                std::swap(idx[k], idx[k + rng.index(idx.size() - k)]);
            idx.resize(subsample_n);
            std::sort(idx.begin(), idx.end());
            Matrix sub(c.dim(), subsample_n);
            for (int k = 0; k < subsample_n; ++k) sub.col(k) = c.points.col(idx[k]);
            c.points = std::move(sub);
        } else if (c.size() < subsample_n) {
            c.meta["undersized"] = "1";
        }
        ds.clouds.push_back(std::move(c));
        ds.labels.push_back(labels.at(id));
    }
    ds.validate();
    return ds;
}

void write_csv_dir(const LabeledDataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir);
    char buf[64];
    for (const auto& c : ds.clouds) {
        std::ofstream out(dir / ("cloud_" + c.id + ".csv"), std::ios::binary);
        if (!out) throw DataError("cannot write into " + dir.string());
        out << "#dim=" << c.dim() << '\n';
        for (int k = 0; k < c.size(); ++k) {
            for (int i = 0; i < c.dim(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", c.points(i, k));
                out << (i ? "," : "") << buf;
            }
            out << '\n';
        }
    }
    std::ofstream lab(dir / "labels.csv", std::ios::binary);
    lab << "id,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) lab << ds.clouds[i].id << ',' << ds.labels[i] << '\n';
}

// ---------------------------------------------------------------------------

DataSplit split(const LabeledDataset& ds, std::uint64_t seed) {
    ds.validate();
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] == 1 ? pos : neg).push_back(i);
    const std::size_t train_pos = pos.size() / 2;
    const std::size_t train_neg = 2 * train_pos;
    if (train_pos < 1)
        throw DataError("split: need at least 2 positive clouds, have " + std::to_string(pos.size()));
    if (neg.size() < train_neg)
        throw DataError("split: need " + std::to_string(train_neg) + " negative clouds for training, have " +
                        std::to_string(neg.size()));
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    std::vector<std::size_t> tr, va, te;
    auto assign = [&](const std::vector<std::size_t>& cls, std::size_t n_train) {
        const std::size_t rest = cls.size() - n_train;
        const std::size_t n_val = rest / 10;
        for (std::size_t k = 0; k < cls.size(); ++k) {
            if (k < n_train)
                tr.push_back(cls[k]);
            else if (k < n_train + n_val)
                va.push_back(cls[k]);
            else
                te.push_back(cls[k]);
        }
    };
    assign(pos, train_pos);
    assign(neg, train_neg);
    for (auto* v : {&tr, &va, &te}) std::sort(v->begin(), v->end());
    return {ds.subset(tr), ds.subset(va), ds.subset(te)};
}

}  // namespace lotnet
