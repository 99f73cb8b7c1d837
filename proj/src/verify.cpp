#include "slogan/verify.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace slogan {

namespace {

// Running mean / standard error of a stream of equally weighted batch means.
struct Accum {
    Mat sum, sq;
    long n = 0;

    void add(const Mat& x) {
        if (n == 0) {
            sum = Mat::Zero(x.rows(), x.cols());
            sq = Mat::Zero(x.rows(), x.cols());
        }
        sum += x;
        sq += x.cwiseProduct(x);
        ++n;
    }
    Mat mean() const { return sum / static_cast<double>(n); }
    Mat se() const {
        const double nn = static_cast<double>(n);
        const Mat var = ((sq - sum.cwiseProduct(sum) / nn) / std::max(1.0, nn - 1.0)).cwiseMax(0.0);
        return (var / nn).cwiseSqrt();
    }
};

Mat as_col(const Vec& v) { return Mat(Eigen::Map<const Mat>(v.data(), v.size(), 1)); }

double rel_err(const Mat& est, const Mat& truth) {
    const double denom = truth.norm();
    return denom > 0.0 ? (est - truth).norm() / denom : (est - truth).norm();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

LatentLoss Quadratic::as_loss() const {
    return [q = *this](const Vec& z, Vec& g) {
        g = q.grad(z);
        return q.value(z);
    };
}

Quadratic random_quadratic(int dim, Rng& rng) {
    Quadratic q;
    Mat r(dim, dim);
    rng.fill_normal(as_span(r));
    q.a = symmetrize(r) / std::sqrt(static_cast<double>(dim));
    q.b.resize(dim);
    for (int i = 0; i < dim; ++i) q.b(i) = rng.normal();
    return q;
}

MixturePrior random_prior(int k, int dim, Rng& rng, double spread) {
    MixturePrior p;
    for (int c = 0; c < k; ++c) {
        Vec m(dim);
        for (int i = 0; i < dim; ++i) m(i) = spread * rng.normal();
        p.mu.push_back(m);
        Mat r(dim, dim);
        rng.fill_normal(as_span(r));
        Mat s = r * r.transpose() / static_cast<double>(dim);
        s.diagonal().array() += 0.5;
        p.sigma.push_back(SpdMat::factor(symmetrize(s)));
    }
    p.rho.resize(k);
    for (int c = 0; c < k; ++c) p.rho(c) = 0.5 * rng.normal();
    return p;
}

QuadraticOracle quadratic_oracle(const MixturePrior& prior, const Quadratic& q) {
    const int k = prior.k();
    const Vec pi = prior.pi();
    QuadraticOracle o;
    o.f.resize(k);
    for (int c = 0; c < k; ++c) {
        const Vec& m = prior.mu[c];
        o.f(c) = (q.a * prior.sigma[c].full()).trace() + m.dot(q.a * m) + q.b.dot(m);
        o.d_mu.push_back(pi(c) * (2.0 * (q.a * m) + q.b));
        o.d_sigma.push_back(pi(c) * q.a);
    }
    o.expected_loss = pi.dot(o.f);
    o.d_rho = (pi.array() * (o.f.array() - o.expected_loss)).matrix();
    return o;
}

McEstimate mc_stein_estimate(const MixturePrior& prior, const Quadratic& q, long n, Rng& rng, int batch_size,
                             Fault fault) {
    if (n < 2L * batch_size) throw EmptyBatch("mc_stein_estimate: need at least two batches");
    const int k = prior.k();
    const int d = prior.dim();
    std::vector<Accum> acc_mu(static_cast<std::size_t>(k)), acc_sigma(static_cast<std::size_t>(k));
    Accum acc_rho;
    McEstimate est;
    Vec loss(batch_size);
    Mat dz(batch_size, d);
    for (long done = 0; done + batch_size <= n; done += batch_size) {
        const LatentBatch lb = sample(prior, batch_size, rng);
        for (int i = 0; i < batch_size; ++i) {
            const Vec z = lb.z.row(i).transpose();
            loss(i) = q.value(z);
            dz.row(i) = q.grad(z).transpose();
        }
        const auto per = make_per_sample(prior, lb, loss, loss, dz);
        for (int c = 0; c < k; ++c) {
            Vec gm = grad_mu(per, c);
            Mat gs = grad_sigma(per, c, prior);
            est.max_sigma_asymmetry = std::max(est.max_sigma_asymmetry, (gs - gs.transpose()).cwiseAbs().maxCoeff());
            gs = -gs;
            if (fault == Fault::FlipMuSign) gm = -gm;
            if (fault == Fault::FlipSigmaSign) gs = -gs;
            acc_mu[c].add(as_col(gm));
            acc_sigma[c].add(gs);
        }
        Vec gr = grad_rho(per);
        est.max_rho_sum = std::max(est.max_rho_sum, std::abs(gr.sum()));
        if (fault == Fault::FlipRhoSign) gr = -gr;
        acc_rho.add(as_col(gr));
        est.samples += batch_size;
    }
    for (int c = 0; c < k; ++c) {
        est.d_mu.push_back(acc_mu[c].mean().col(0));
        est.se_mu.push_back(acc_mu[c].se().col(0));
        est.d_sigma.push_back(acc_sigma[c].mean());
        est.se_sigma.push_back(acc_sigma[c].se());
    }
    est.d_rho = acc_rho.mean().col(0);
    est.se_rho = acc_rho.se().col(0);
    return est;
}

bool VerifyReport::all_pass() const {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return !rows.empty();
}

std::string VerifyReport::table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-44s %12s %12s %12s  %s\n", "check", "value", "tolerance", "se", "result");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-44s %12.4e %12.4e %12.4e  %s\n", r.name.c_str(), r.value, r.tolerance,
                      r.se, r.pass ? "PASS" : "FAIL");
        os << line;
    }
    return os.str();
}

int variance_wins(int trials, int batch, std::uint64_t seed, int dim) {
    int wins = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed + static_cast<std::uint64_t>(t));
        // Overlapping components: means close relative to the unit-scale covariances.
        const MixturePrior prior = random_prior(4, dim, rng, 0.5);
        const Quadratic q = random_quadratic(dim, rng);
        const VarianceComparison v = compare_mu_estimator_variance(prior, batch, q.as_loss(), rng);
        if (v.implicit_variance <= v.explicit_variance) ++wins;
    }
    return wins;
}

VerifyReport verify_gradients(const VerifyOptions& opts) {
    VerifyReport rep;
    std::uint64_t seed = opts.seed;
    for (int k : opts.ks) {
        for (int d : opts.dims) {
            Rng rng(seed++);
            const MixturePrior prior = random_prior(k, d, rng, 1.0);
            const Quadratic q = random_quadratic(d, rng);
            const QuadraticOracle o = quadratic_oracle(prior, q);
            const McEstimate big = mc_stein_estimate(prior, q, opts.n_large, rng, 1000, opts.fault);
            const McEstimate small = mc_stein_estimate(prior, q, opts.n_small, rng, 1000, opts.fault);
            const std::string tag = "K=" + std::to_string(k) + " d=" + std::to_string(d);

            double mu_err = 0.0, mu_se = 0.0, se_big = 0.0, se_small = 0.0;
            double sig_err = 0.0, sig_se = 0.0;
            for (int c = 0; c < k; ++c) {
                const double e = rel_err(big.d_mu[c], o.d_mu[c]);
                if (e >= mu_err) {
                    mu_err = e;
                    mu_se = big.se_mu[c].norm() / o.d_mu[c].norm();
                }
                se_big += big.se_mu[c].squaredNorm();
                se_small += small.se_mu[c].squaredNorm();
                const double es = rel_err(big.d_sigma[c], o.d_sigma[c]);
                if (es >= sig_err) {
                    sig_err = es;
                    sig_se = big.se_sigma[c].norm() / o.d_sigma[c].norm();
                }
            }
            rep.rows.push_back({"mean grad rel err " + tag, mu_err, opts.rel_tolerance, mu_se, mu_err <= opts.rel_tolerance});
            const double ratio = std::sqrt(se_small / se_big);
            const double expect = std::sqrt(static_cast<double>(opts.n_large) / static_cast<double>(opts.n_small));
            rep.rows.push_back({"mean grad SE ratio (expect " + fmt("%.2f", expect) + ") " + tag, ratio, expect, 0.0,
                                ratio > expect / 1.3 && ratio < expect * 1.3});
            rep.rows.push_back({"cov grad rel err " + tag, sig_err, opts.rel_tolerance, sig_se, sig_err <= opts.rel_tolerance});
            rep.rows.push_back({"cov grad asymmetry " + tag, big.max_sigma_asymmetry, 0.0, 0.0, big.max_sigma_asymmetry == 0.0});

            if (k == 1) {
                const double mx = big.d_rho.cwiseAbs().maxCoeff();
                rep.rows.push_back({"mixing grad abs (K=1 exact zero) " + tag, mx, 0.0, 0.0, mx == 0.0});
            } else {
                const double er = rel_err(big.d_rho, o.d_rho);
                rep.rows.push_back({"mixing grad rel err " + tag, er, opts.rel_tolerance,
                                    big.se_rho.norm() / o.d_rho.norm(), er <= opts.rel_tolerance});
            }
            rep.rows.push_back({"mixing grad sum per batch " + tag, big.max_rho_sum, 1e-9, 0.0, big.max_rho_sum <= 1e-9});
        }
    }
    const int wins = variance_wins(opts.variance_trials, opts.variance_batch, opts.seed + 7919);
    rep.rows.push_back({"implicit <= explicit variance (wins of " + std::to_string(opts.variance_trials) + ")",
                        static_cast<double>(wins), static_cast<double>(opts.variance_required), 0.0,
                        wins >= opts.variance_required});
    return rep;
}

}  // namespace slogan
