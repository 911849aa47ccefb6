#include "lotnet/reference.hpp"

#include <cmath>

namespace lotnet {

std::string to_string(ReferenceKind k) {
    switch (k) {
        case ReferenceKind::StandardGaussian: return "standard_gaussian";
        case ReferenceKind::FittedGaussian: return "fitted_gaussian";
        case ReferenceKind::UniformBox: return "uniform_box";
    }
    return "?";
}

ReferenceKind reference_kind_from_string(const std::string& s) {
    if (s == "standard_gaussian") return ReferenceKind::StandardGaussian;
    if (s == "fitted_gaussian") return ReferenceKind::FittedGaussian;
    if (s == "uniform_box") return ReferenceKind::UniformBox;
    throw ConfigError("unknown reference measure '" + s + "'");
}

ReferenceMeasure ReferenceMeasure::standard_gaussian(int dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("reference dim must be >= 1");
    return {ReferenceKind::StandardGaussian, dim, Vector::Zero(dim), Vector::Ones(dim), seed};
}

ReferenceMeasure ReferenceMeasure::uniform_box(const Vector& center, const Vector& half_width, std::uint64_t seed) {
    ReferenceMeasure r{ReferenceKind::UniformBox, static_cast<int>(center.size()), center, half_width, seed};
    r.validate();
    return r;
}

ReferenceMeasure ReferenceMeasure::fitted_gaussian(const std::vector<PointCloud>& clouds, std::uint64_t seed) {
    if (clouds.empty()) throw DataError("cannot fit a reference measure to zero clouds");
    const int d = clouds.front().dim();
    Vector sum = Vector::Zero(d);
    Vector sumsq = Vector::Zero(d);
    double n = 0;
    for (const auto& c : clouds) {
        require_dims(c.dim() == d, "fitted reference: cloud '" + c.id + "'");
        sum += c.points.rowwise().sum();
        sumsq += c.points.cwiseAbs2().rowwise().sum();
        n += c.size();
    }
    if (n < 2) throw DataError("fitted reference needs at least two pooled points");
    Vector mean = sum / n;
    Vector var = (sumsq / n - mean.cwiseAbs2()).cwiseMax(0.0) * (n / (n - 1));
    Vector sd = var.cwiseSqrt();
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(sd[i] > 1e-12)) throw DataError("fitted reference: pooled data has zero variance in coordinate " + std::to_string(i));
    ReferenceMeasure r{ReferenceKind::FittedGaussian, d, mean, sd, seed};
    return r;
}

void ReferenceMeasure::validate() const {
    if (dim < 1) throw ConfigError("reference dim must be >= 1");
    if (mean.size() != dim || scale.size() != dim) throw DimensionError("reference mean/scale must have length dim");
    if (!(scale.minCoeff() > 0.0) || !scale.allFinite() || !mean.allFinite())
        throw ConfigError("reference scales must be finite and > 0");
}

Matrix ReferenceMeasure::sample(int n, Rng& rng) const {
    if (n < 1) throw ConfigError("reference sample size must be >= 1");
    Matrix X(dim, n);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < dim; ++i) {
            const double u = kind == ReferenceKind::UniformBox ? rng.uniform(-1.0, 1.0) : rng.normal();
            X(i, k) = mean[i] + scale[i] * u;
        }
    }
    return X;
}

PointCloud ReferenceMeasure::sample(int n, std::uint64_t sample_seed) const {
    Rng rng(sample_seed);
    PointCloud c;
    c.id = "sigma";
    c.points = sample(n, rng);
    c.meta["seed"] = std::to_string(sample_seed);
    return c;
}

}  // namespace lotnet
