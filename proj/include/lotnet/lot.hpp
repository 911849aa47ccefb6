#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "lotnet/otsolve.hpp"
#include "lotnet/reference.hpp"

namespace lotnet {

/// Trained transport maps for a collection of clouds over one reference
/// measure, plus the shared reference sample they are compared on.
struct EmbeddingSet {
    ReferenceMeasure reference;
    std::vector<std::string> ids;
    std::vector<DualPair> pairs;
    PointCloud sample;  // canonical (sorted) order
    std::uint64_t sample_seed = 0;

    /// Draws the shared evaluation sample of size n from the reference.
    static EmbeddingSet build(ReferenceMeasure reference, std::vector<std::string> ids, std::vector<DualPair> pairs,
                              int n, std::uint64_t sample_seed);
    std::size_t size() const { return pairs.size(); }
    void validate() const;
};

/// ((1/n) sum_k |T_i(X_k) - T_j(X_k)|^2)^(1/2) with T = grad psi.
double lot_distance_empirical(const DualPair& pair_i, const DualPair& pair_j, const PointCloud& sample);

/// Same distance on a fresh reference sample of size n drawn with `seed`.
double lot_distance_resampled(const DualPair& pair_i, const DualPair& pair_j, const ReferenceMeasure& reference, int n,
                              std::uint64_t seed);

/// Symmetric matrix of empirical LOT distances on the set's shared sample.
Matrix pairwise_matrix(const EmbeddingSet& set);

/// CSV with a header row "id,<id_0>,...", then one row per cloud.
void write_pairwise_csv(std::ostream& out, const Matrix& distances, const std::vector<std::string>& ids);

struct BoundParams {
    double beta = 1.0;   // Lipschitz constant of the reference-to-base transport map
    double eps = 0.1;    // ICNN approximation level
    double R = 1.0;      // bound on transform norms
    double n = 1000;     // reference sample size
    double delta = 0.05; // failure probability

    void validate() const;
};

/// 8 beta eps + ((4 beta eps + R)^2 / R) sqrt(log(2/delta) / (2n)): high-probability
/// bound on |empirical LOT distance - distance between the true transforms|.
double theorem_bound(const BoundParams& p);

}  // namespace lotnet
