#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slogan/error.hpp"

namespace slogan {

// Row-major so that a batch stored as B x d keeps each sample contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline constexpr double kPivotFloor = 1e-12;

/// Symmetric positive-definite matrix kept together with its lower Cholesky
/// factor and log-determinant. Only constructible through factorization, so
/// the three views are always consistent.
class SpdMat {
public:
    SpdMat() = default;

    /// Factorizes `m`. Throws NotPositiveDefinite when a pivot is <= 1e-12.
    static SpdMat factor(const Mat& m);
    static SpdMat identity(int dim);

    int dim() const { return static_cast<int>(full_.rows()); }
    const Mat& full() const { return full_; }
    const Mat& chol() const { return chol_; }
    double log_det() const { return log_det_; }

    /// Sigma^{-1} x
    Vec solve(const Vec& x) const;
    /// Sigma^{-1} X for a dim x n right-hand side.
    Mat solve(const Mat& x) const;
    /// L^{-1} x (forward substitution).
    Vec solve_lower(const Vec& x) const;
    Mat inverse() const;

private:
    Mat full_;
    Mat chol_;
    double log_det_ = 0.0;
};

SpdMat cholesky(const Mat& m);

struct SymEigen {
    Vec values;   // ascending
    Mat vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymEigen sym_eigen(const Mat& m, int max_sweeps = 100);

/// Principal square root of an SPD matrix.
Mat sqrt_spd(const SpdMat& m);

double log_sum_exp(std::span<const double> v);
inline double log_sum_exp(const Vec& v) { return log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

/// Seeded generator. The engine is std::mt19937_64 (fully specified by the
/// standard); all distribution transforms are implemented here so streams are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    double normal();
    double gumbel();
    double gamma(double shape);
    double beta(double a, double b);
    /// Index drawn from a categorical distribution with probabilities p.
    std::size_t categorical(std::span<const double> p);

    void fill_normal(std::span<double> out);
    std::vector<double> normal_vector(std::size_t n);

    std::string state() const;
    void set_state(const std::string& s);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::vector<double> sample_normal(Rng& rng, std::size_t n);
std::vector<double> sample_uniform(Rng& rng, std::size_t n);
std::vector<double> sample_gumbel(Rng& rng, std::size_t n);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr,
               const AdamHyper& hyper = {});
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

inline std::span<double> as_span(Mat& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<const double> as_span(const Mat& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);

/// (m + m^T) / 2, exactly symmetric.
Mat symmetrize(const Mat& m);

/// Number of worker threads: SLOGAN_THREADS if set, else hardware concurrency.
int worker_threads();

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker and
/// results are expected to be written to index-owned slots, so the outcome does
/// not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace slogan
