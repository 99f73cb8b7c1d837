#include "slogan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace slogan {

SpdMat SpdMat::factor(const Mat& m) {
    if (m.rows() != m.cols()) throw ShapeMismatch("cholesky: matrix is not square");
    const Eigen::Index n = m.rows();
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale)
                throw NotPositiveDefinite("cholesky: matrix is not symmetric");

    SpdMat out;
    out.full_ = symmetrize(m);
    out.chol_ = Mat::Zero(n, n);
    Mat& l = out.chol_;
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = out.full_(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > kPivotFloor))
            throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) + " is " + std::to_string(d));
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        log_det += 2.0 * std::log(ljj);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = out.full_(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    out.log_det_ = log_det;
    return out;
}

SpdMat SpdMat::identity(int dim) {
    SpdMat out;
    out.full_ = Mat::Identity(dim, dim);
    out.chol_ = Mat::Identity(dim, dim);
    out.log_det_ = 0.0;
    return out;
}

Vec SpdMat::solve_lower(const Vec& x) const {
    return chol_.triangularView<Eigen::Lower>().solve(x);
}

Vec SpdMat::solve(const Vec& x) const {
    Vec y = chol_.triangularView<Eigen::Lower>().solve(x);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Mat SpdMat::solve(const Mat& x) const {
    Mat y = chol_.triangularView<Eigen::Lower>().solve(x);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Mat SpdMat::inverse() const {
    return symmetrize(solve(Mat(Mat::Identity(dim(), dim()))));
}

SpdMat cholesky(const Mat& m) { return SpdMat::factor(m); }

SymEigen sym_eigen(const Mat& m, int max_sweeps) {
    if (m.rows() != m.cols()) throw ShapeMismatch("sym_eigen: matrix is not square");
    const Eigen::Index n = m.rows();
    Mat a = symmetrize(m);
    Mat v = Mat::Identity(n, n);

    const double total = a.squaredNorm();
    bool converged = n <= 1;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * std::max(total, 1e-300) || off == 0.0) {
            converged = true;
            break;
        }
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off > 1e-24 * std::max(total, 1e-300))
            throw NoConvergence("sym_eigen: no convergence after " + std::to_string(max_sweeps) + " sweeps");
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
    SymEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

Mat sqrt_spd(const SpdMat& m) {
    const SymEigen e = sym_eigen(m.full());
    if (e.values.size() > 0 && !(e.values(0) > 0.0))
        throw NotPositiveDefinite("sqrt_spd: non-positive eigenvalue");
    const Vec root = e.values.array().sqrt();
    return symmetrize(e.vectors * root.asDiagonal() * e.vectors.transpose());
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw ShapeMismatch("log_sum_exp: empty input");
    const double mx = *std::max_element(v.begin(), v.end());
    if (std::isinf(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw ShapeMismatch("Rng::below: n must be positive");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::gumbel() {
    const double u = std::clamp(uniform(), 1e-12, 1.0 - 1e-12);
    return -std::log(-std::log(u));
}

// Marsaglia & Tsang.
double Rng::gamma(double shape) {
    if (!(shape > 0.0)) throw ShapeMismatch("Rng::gamma: shape must be positive");
    if (shape < 1.0) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::beta(double a, double b) {
    if (a == 1.0 && b == 1.0) return uniform();
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
}

std::size_t Rng::categorical(std::span<const double> p) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    // Rounding left a sliver above the cumulative sum; give it to the last
    // component with nonzero mass.
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return i;
    return p.size() - 1;
}

void Rng::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

std::vector<double> Rng::normal_vector(std::size_t n) {
    std::vector<double> v(n);
    fill_normal(v);
    return v;
}

std::string Rng::state() const {
    std::ostringstream os;
    os << seed_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << spare_ << ' ' << engine_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    is >> seed_ >> spare_flag >> spare_ >> engine_;
    if (!is) throw ParseError("Rng::set_state: malformed state", 0, 0);
    has_spare_ = spare_flag != 0;
}

std::vector<double> sample_normal(Rng& rng, std::size_t n) { return rng.normal_vector(n); }

std::vector<double> sample_uniform(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform();
    return v;
}

std::vector<double> sample_gumbel(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.gumbel();
    return v;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr,
               const AdamHyper& hyper) {
    if (params.size() != grads.size()) throw ShapeMismatch("adam_step: params/grads size mismatch");
    if (state.m.empty() && state.v.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeMismatch("adam_step: optimizer state size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size()) throw ShapeMismatch("sgd_step: params/grads size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

Mat symmetrize(const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out(i, i) = m(i, i);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double s = 0.5 * (m(i, j) + m(j, i));
            out(i, j) = s;
            out(j, i) = s;
        }
    }
    return out;
}

int worker_threads() {
    if (const char* env = std::getenv("SLOGAN_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(worker_threads()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace slogan
