#include "slogan/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace slogan {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

std::string to_string(ScaleMode m) {
    switch (m) {
        case ScaleMode::None: return "none";
        case ScaleMode::MinMaxPm1: return "minmax_pm1";
        case ScaleMode::MinMax01: return "minmax_01";
        case ScaleMode::Log2p1_01: return "log2p1_01";
    }
    return "none";
}

ScaleMode scale_mode_from_string(const std::string& s) {
    if (s == "none") return ScaleMode::None;
    if (s == "minmax_pm1") return ScaleMode::MinMaxPm1;
    if (s == "minmax_01") return ScaleMode::MinMax01;
    if (s == "log2p1_01") return ScaleMode::Log2p1_01;
    throw ConfigError("unknown scale mode '" + s + "'");
}

Scaling Scaling::fit(const Mat& raw, ScaleMode mode) {
    Scaling s;
    s.mode = mode;
    if (mode == ScaleMode::None || raw.rows() == 0) return s;
    if (mode == ScaleMode::Log2p1_01) {
        if (raw.minCoeff() < 0.0) throw ConfigError("log2p1_01 scaling needs nonnegative values");
        s.lo = Vec::Zero(raw.cols());
        s.hi = (raw.array() + 1.0).log2().colwise().maxCoeff().transpose();
        return s;
    }
    s.lo = raw.colwise().minCoeff().transpose();
    s.hi = raw.colwise().maxCoeff().transpose();
    return s;
}

Mat Scaling::apply(const Mat& raw) const {
    if (mode == ScaleMode::None) return raw;
    if (raw.cols() != lo.size()) throw ShapeMismatch("Scaling::apply: column count mismatch");
    Mat out(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double range = hi(j) - lo(j);
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double v = raw(i, j);
            switch (mode) {
                case ScaleMode::MinMaxPm1: out(i, j) = range > 0.0 ? 2.0 * (v - lo(j)) / range - 1.0 : 0.0; break;
                case ScaleMode::MinMax01: out(i, j) = range > 0.0 ? (v - lo(j)) / range : 0.0; break;
                case ScaleMode::Log2p1_01: out(i, j) = hi(j) > 0.0 ? std::log2(v + 1.0) / hi(j) : 0.0; break;
                case ScaleMode::None: break;
            }
        }
    }
    return out;
}

Mat Scaling::invert(const Mat& scaled) const {
    if (mode == ScaleMode::None) return scaled;
    if (scaled.cols() != lo.size()) throw ShapeMismatch("Scaling::invert: column count mismatch");
    Mat out(scaled.rows(), scaled.cols());
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        const double range = hi(j) - lo(j);
        for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
            const double v = scaled(i, j);
            switch (mode) {
                case ScaleMode::MinMaxPm1: out(i, j) = lo(j) + 0.5 * (v + 1.0) * range; break;
                case ScaleMode::MinMax01: out(i, j) = lo(j) + v * range; break;
                case ScaleMode::Log2p1_01: out(i, j) = std::exp2(v * hi(j)) - 1.0; break;
                case ScaleMode::None: break;
            }
        }
    }
    return out;
}

int LabeledDataset::num_classes() const {
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    return k;
}

Mat LabeledDataset::rows_with_label(int label) const {
    if (!has_labels()) throw ConfigError("dataset has no labels");
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
    Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    return out;
}

std::vector<Vec> synthetic_8gauss_centers(double radius) {
    const double r = radius / std::numbers::sqrt2;
    const double pts[8][2] = {{0, radius}, {r, r},   {radius, 0}, {r, -r},
                              {0, -radius}, {-r, -r}, {-radius, 0}, {-r, r}};
    std::vector<Vec> out;
    for (const auto& p : pts) out.push_back((Vec(2) << p[0], p[1]).finished());
    return out;
}

LabeledDataset make_synthetic_8gauss(std::uint64_t seed, const std::array<int, 8>& counts, double std_dev,
                                     double radius) {
    long total = 0;
    for (int c : counts) {
        if (c < 1) throw ConfigError("synthetic mode counts must be positive");
        total += c;
    }
    Rng rng(seed);
    const auto centers = synthetic_8gauss_centers(radius);
    Mat raw(total, 2);
    LabeledDataset ds;
    ds.labels.reserve(static_cast<std::size_t>(total));
    Eigen::Index row = 0;
    for (int m = 0; m < 8; ++m) {
        for (int i = 0; i < counts[static_cast<std::size_t>(m)]; ++i, ++row) {
            raw(row, 0) = centers[m](0) + std_dev * rng.normal();
            raw(row, 1) = centers[m](1) + std_dev * rng.normal();
            ds.labels.push_back(m);
        }
    }
    ds.scaling = Scaling::fit(raw, ScaleMode::MinMaxPm1);
    ds.x = ds.scaling.apply(raw);
    return ds;
}

Vec mode_weights(const std::array<int, 8>& counts) {
    Vec w(8);
    for (int i = 0; i < 8; ++i) w(i) = counts[static_cast<std::size_t>(i)];
    return w / w.sum();
}

LabeledDataset parse_csv(std::istream& in, bool has_labels, ScaleMode mode) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t row_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        std::vector<double> vals(fields.size());
        std::size_t bad = 0;
        for (std::size_t j = 0; j < fields.size(); ++j)
            if (!parse_double(fields[j], vals[j]) && bad == 0) bad = j + 1;
        if (first) {
            first = false;
            width = fields.size();
            if (bad != 0) continue;  // header row
        }
        if (fields.size() != width)
            throw RaggedRows("row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(width));
        if (bad != 0) throw ParseError("non-numeric field '" + std::string(trim(fields[bad - 1])) + "'", row_no, bad);
        if (has_labels) {
            const double l = vals.back();
            if (l < 0.0 || l != std::floor(l) || l > std::numeric_limits<int>::max())
                throw ParseError("label must be a nonnegative integer", row_no, width);
            labels.push_back(static_cast<int>(l));
            vals.pop_back();
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw EmptyDataset("CSV contains no data rows");
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    if (d == 0) throw EmptyDataset("CSV rows have no feature columns");
    Mat raw(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < d; ++j) raw(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];

    LabeledDataset ds;
    ds.labels = std::move(labels);
    ds.scaling = Scaling::fit(raw, mode);
    ds.x = ds.scaling.apply(raw);
    return ds;
}

LabeledDataset load_csv(const std::string& path, bool has_labels, ScaleMode mode) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset '" + path + "'");
    return parse_csv(in, has_labels, mode);
}

void write_csv(std::ostream& out, const LabeledDataset& ds, bool raw) {
    const Mat x = raw ? ds.scaling.invert(ds.x) : ds.x;
    for (int j = 0; j < ds.dim(); ++j) out << (j ? "," : "") << 'x' << j;
    if (ds.has_labels()) out << ",label";
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
        if (ds.has_labels()) out << ',' << ds.labels[static_cast<std::size_t>(i)];
        out << '\n';
    }
}

void save_csv(const std::string& path, const LabeledDataset& ds, bool raw) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_csv(out, ds, raw);
}

Mat sample_batch(const LabeledDataset& ds, int b, Rng& rng) {
    if (ds.size() == 0) throw EmptyDataset("sample_batch: dataset is empty");
    if (b < 1) throw EmptyBatch("sample_batch: batch size must be positive");
    Mat out(b, ds.dim());
    for (int i = 0; i < b; ++i) out.row(i) = ds.x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(ds.size()))));
    return out;
}

}  // namespace slogan
