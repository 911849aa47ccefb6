#include "lotnet/lot.hpp"

#include <cmath>
#include <cstdio>

namespace lotnet {

EmbeddingSet EmbeddingSet::build(ReferenceMeasure reference, std::vector<std::string> ids, std::vector<DualPair> pairs,
                                 int n, std::uint64_t sample_seed) {
    EmbeddingSet s;
    s.reference = std::move(reference);
    s.ids = std::move(ids);
    s.pairs = std::move(pairs);
    s.sample_seed = sample_seed;
    s.sample = s.reference.sample(n, sample_seed);
    s.sample.points = canonical_order(s.sample.points);
    s.validate();
    return s;
}

void EmbeddingSet::validate() const {
    reference.validate();
    if (ids.size() != pairs.size()) throw DataError("EmbeddingSet: ids and pairs differ in length");
    for (const auto& p : pairs) require_dims(p.dim() == reference.dim, "EmbeddingSet: pair dim vs reference dim");
    require_dims(sample.dim() == reference.dim || sample.empty(), "EmbeddingSet: sample dim");
}

double lot_distance_empirical(const DualPair& pair_i, const DualPair& pair_j, const PointCloud& sample) {
    if (sample.empty()) throw DataError("lot distance: empty reference sample");
    require_dims(pair_i.dim() == pair_j.dim() && sample.dim() == pair_i.dim(), "lot distance: map and sample dims");
    const Matrix diff = pair_i.transport(sample.points) - pair_j.transport(sample.points);
    return std::sqrt(diff.colwise().squaredNorm().mean());
}

double lot_distance_resampled(const DualPair& pair_i, const DualPair& pair_j, const ReferenceMeasure& reference, int n,
                              std::uint64_t seed) {
    if (n < 1) throw ConfigError("resample size must be >= 1");
    return lot_distance_empirical(pair_i, pair_j, reference.sample(n, seed));
}

Matrix pairwise_matrix(const EmbeddingSet& set) {
    if (set.size() == 0) throw DataError("pairwise_matrix: empty embedding set");
    const auto n = static_cast<Eigen::Index>(set.size());
    std::vector<Matrix> images;
    images.reserve(set.size());
    for (const auto& p : set.pairs) images.push_back(p.transport(set.sample.points));
    Matrix D = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            D(i, j) = std::sqrt((images[i] - images[j]).colwise().squaredNorm().mean());
            D(j, i) = D(i, j);
        }
    }
    return D;
}

void write_pairwise_csv(std::ostream& out, const Matrix& distances, const std::vector<std::string>& ids) {
    require_dims(distances.rows() == distances.cols() && static_cast<std::size_t>(distances.rows()) == ids.size(),
                 "pairwise CSV: matrix vs ids");
    out << "id";
    for (const auto& id : ids) out << ',' << id;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i];
        for (std::size_t j = 0; j < ids.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            out << ',' << buf;
        }
        out << '\n';
    }
}

void BoundParams::validate() const {
    if (!(beta > 0.0) || !(eps > 0.0) || !(R > 0.0) || !(n > 0.0)) throw ConfigError("bound: beta, eps, R, n must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bound: delta must lie in (0, 1)");
}

double theorem_bound(const BoundParams& p) {
    p.validate();
    const double a = 4.0 * p.beta * p.eps + p.R;
    return 8.0 * p.beta * p.eps + (a * a / p.R) * std::sqrt(std::log(2.0 / p.delta) / (2.0 * p.n));
}

}  // namespace lotnet
