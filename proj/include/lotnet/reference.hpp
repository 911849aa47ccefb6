#pragma once

#include <string>
#include <vector>

#include "lotnet/data.hpp"
#include "lotnet/nncore.hpp"

namespace lotnet {

enum class ReferenceKind { StandardGaussian, FittedGaussian, UniformBox };

std::string to_string(ReferenceKind k);
ReferenceKind reference_kind_from_string(const std::string& s);

/// The shared source measure sigma every cloud is transported from.
///
/// Gaussian kinds use `mean` and per-coordinate `scale` (standard deviation);
/// the box is uniform on mean + [-scale, scale].
struct ReferenceMeasure {
    ReferenceKind kind = ReferenceKind::StandardGaussian;
    int dim = 2;
    Vector mean;
    Vector scale;
    std::uint64_t seed = 0;

    static ReferenceMeasure standard_gaussian(int dim, std::uint64_t seed = 0);
    static ReferenceMeasure uniform_box(const Vector& center, const Vector& half_width, std::uint64_t seed = 0);
    /// Gaussian with the pooled mean and per-coordinate variance of the clouds.
    static ReferenceMeasure fitted_gaussian(const std::vector<PointCloud>& clouds, std::uint64_t seed = 0);

    void validate() const;
    /// n points as columns, drawn from `rng`.
    Matrix sample(int n, Rng& rng) const;
    /// n points drawn from a generator seeded with `sample_seed`.
    PointCloud sample(int n, std::uint64_t sample_seed) const;
    bool operator==(const ReferenceMeasure&) const = default;
};

}  // namespace lotnet
