#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "lotnet/nncore.hpp"

namespace lotnet {

/// An empirical measure: columns of `points` are the samples (d x n).
struct PointCloud {
    std::string id;
    Matrix points;
    std::map<std::string, std::string> meta;

    int dim() const { return static_cast<int>(points.rows()); }
    int size() const { return static_cast<int>(points.cols()); }
    bool empty() const { return points.cols() == 0; }
};

/// Throws DataError when the cloud has no points.
void require_nonempty(const PointCloud& cloud, const std::string& context);

/// Returns a copy with points sorted lexicographically; the canonical order
/// used wherever a result must not depend on point order.
Matrix canonical_order(const Matrix& points);

struct LabeledDataset {
    std::vector<PointCloud> clouds;
    std::vector<int> labels;  // 0 or 1, aligned with clouds
    int dim = 0;

    std::size_t size() const { return clouds.size(); }
    std::size_t count(int label) const;
    /// Checks alignment, binary labels, and shared dimension.
    void validate() const;
    LabeledDataset subset(const std::vector<std::size_t>& indices) const;
    LabeledDataset with_swapped_labels() const;
};

// ---------------------------------------------------------------------------
// Transforms

struct Shift {
    Vector offset;
};
struct Scale {
    double factor = 1.0;
};
/// x -> A x + b with A = diag + strictly upper shear; must be nonsingular.
struct Affine {
    Matrix A;
    Vector b;
};

struct TransformMap {
    std::variant<Shift, Scale, Affine> map;

    static TransformMap shift(Vector a) { return {Shift{std::move(a)}}; }
    static TransformMap scale(double c);
    static TransformMap affine(Matrix A, Vector b);

    Matrix apply(const Matrix& X) const;
    /// Empirical L2(mu) norm of the map, (mean_k |g(x_k)|^2)^(1/2).
    double norm_on(const PointCloud& base) const;
    bool within_bound(const PointCloud& base, double R) const { return norm_on(base) <= R; }
    std::string describe() const;
};

/// Pointwise image of the cloud; order preserved, id suffixed.
PointCloud apply_transform(const TransformMap& g, const PointCloud& X);

// ---------------------------------------------------------------------------
// Synthetic data

enum class BaseKind { Gaussian, Mixture, Ring };

struct BaseMeasureSpec {
    BaseKind kind = BaseKind::Gaussian;
    Vector mean;     // d; Gaussian centre, or ring centre
    Vector stddev;   // d; Gaussian per-axis spread, or per-component spread for mixtures
    Matrix centers;  // d x k mixture centres
    double radius = 1.0;      // ring
    double ring_width = 0.1;  // ring radial noise
};

struct SyntheticSpec {
    int dim = 2;
    BaseMeasureSpec base[2];
    double R = 4.0;          // bound on |g|_mu for every generated transform
    double shift_max = 1.0;  // shifts drawn uniformly in the ball of this radius (capped at R)
    double scale_min = 0.75;
    double scale_max = 1.25;
    double shear_max = 0.0;  // > 0 draws Affine maps with an upper shear in [-shear_max, shear_max]
    bool fresh_samples = true;  // each cloud draws its own base sample

    /// Gaussians centred at -1.5 and +1.5 on the first axis, elongated along
    /// orthogonal axes.
    static SyntheticSpec default_spec(int dim = 2);
    void validate() const;
};

PointCloud sample_base(const BaseMeasureSpec& spec, int dim, int n, Rng& rng, const std::string& id = "base");

/// Two classes of transformed copies of the base measures; label = base index.
/// Each cloud records its transform in meta ("scale", "shift", "shear").
LabeledDataset gen_synthetic(const SyntheticSpec& spec, int n_clouds_per_class, int n_points,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV directory layout

/// Loads `cloud_<id>.csv` files plus `labels.csv`. Rows with empty or
/// non-numeric fields are dropped; each cloud is subsampled without
/// replacement to min(subsample_n, rows). Clouds are ordered by id.
LabeledDataset load_csv_dir(const std::filesystem::path& dir, int subsample_n, std::uint64_t seed);

/// Writes the same layout; floats use 17 significant digits.
void write_csv_dir(const LabeledDataset& ds, const std::filesystem::path& dir);

/// Reads a single point file; returns the cloud and the number of dropped rows.
PointCloud read_cloud_csv(const std::filesystem::path& file, const std::string& id, int* dropped = nullptr);

// ---------------------------------------------------------------------------

struct DataSplit {
    LabeledDataset train, val, test;
};

/// Train gets floor(P/2) positives and twice as many negatives; floor(10%)
/// of each class's remainder goes to validation; the rest is test.
DataSplit split(const LabeledDataset& ds, std::uint64_t seed);

}  // namespace lotnet
