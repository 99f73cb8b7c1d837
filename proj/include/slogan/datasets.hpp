#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "slogan/numerics.hpp"

namespace slogan {

enum class ScaleMode { None, MinMaxPm1, MinMax01, Log2p1_01 };

std::string to_string(ScaleMode m);
ScaleMode scale_mode_from_string(const std::string& s);

/// Per-column transform applied at load time, kept for the inverse map.
struct Scaling {
    ScaleMode mode = ScaleMode::None;
    Vec lo, hi;  // raw per-column min / max (log of x+1 max for Log2p1_01 in hi)

    static Scaling fit(const Mat& raw, ScaleMode mode);
    Mat apply(const Mat& raw) const;
    Mat invert(const Mat& scaled) const;
};

struct LabeledDataset {
    Mat x;                    // N x d, scaled
    std::vector<int> labels;  // empty when unlabeled
    Scaling scaling;

    int size() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }
    bool has_labels() const { return !labels.empty(); }
    /// 1 + largest label (0 when unlabeled).
    int num_classes() const;
    /// Rows carrying `label`.
    Mat rows_with_label(int label) const;
};

inline constexpr std::array<int, 8> kImbalancedCounts{5000, 5000, 5000, 5000, 15000, 15000, 15000, 15000};

/// Mode centers on the circle of `radius`, starting at (0, r) and moving clockwise.
std::vector<Vec> synthetic_8gauss_centers(double radius = 2.0);

/// Eight isotropic 2-d Gaussians (std 0.1) on a circle of radius 2, labels =
/// mode index, then per-dimension min-max scaling to [-1, 1].
LabeledDataset make_synthetic_8gauss(std::uint64_t seed, const std::array<int, 8>& counts = kImbalancedCounts,
                                     double std_dev = 0.1, double radius = 2.0);

/// counts normalized to proportions.
Vec mode_weights(const std::array<int, 8>& counts);

/// Parses a rectangular numeric CSV. The header row is optional (detected by
/// a non-numeric first row); the label column, when present, is last.
/// Throws ParseError (1-based row/col), RaggedRows, EmptyDataset.
LabeledDataset parse_csv(std::istream& in, bool has_labels, ScaleMode mode);
LabeledDataset load_csv(const std::string& path, bool has_labels, ScaleMode mode);

/// Header x0..x{d-1}[,label]; values are written in the dataset's scaled space
/// unless `raw` is set.
void write_csv(std::ostream& out, const LabeledDataset& ds, bool raw = false);
void save_csv(const std::string& path, const LabeledDataset& ds, bool raw = false);

/// b uniform with-replacement draws. Throws EmptyDataset.
Mat sample_batch(const LabeledDataset& ds, int b, Rng& rng);

}  // namespace slogan
