#include "slogan/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace slogan {

namespace {

constexpr double kCovFloor = 1e-10;

// Dense relabeling of arbitrary integer labels.
std::vector<int> densify(const std::vector<int>& labels, int& k) {
    std::map<int, int> ids;
    for (int l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    k = next;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
    return out;
}

struct Contingency {
    Mat n;  // ka x kb counts
    Vec a, b;
    double total = 0.0;
};

Contingency contingency(const std::vector<int>& la, const std::vector<int>& lb) {
    if (la.size() != lb.size()) throw LengthMismatch("partitions have different lengths");
    if (la.empty()) throw LengthMismatch("partitions are empty");
    int ka = 0, kb = 0;
    const auto da = densify(la, ka);
    const auto db = densify(lb, kb);
    Contingency c;
    c.n = Mat::Zero(ka, kb);
    for (std::size_t i = 0; i < da.size(); ++i) c.n(da[i], db[i]) += 1.0;
    c.a = c.n.rowwise().sum();
    c.b = c.n.colwise().sum().transpose();
    c.total = static_cast<double>(la.size());
    return c;
}

double comb2(double x) { return 0.5 * x * (x - 1.0); }

// Square root of a symmetric positive semidefinite matrix; tiny negative
// eigenvalues from rounding are clamped, clearly negative ones are rejected.
Mat sqrt_psd(const Mat& m) {
    const SymEigen e = sym_eigen(symmetrize(m));
    const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
    if (e.values(0) < -1e-8 * scale) throw NotPositiveDefinite("covariance is not positive semidefinite");
    const Vec root = e.values.cwiseMax(0.0).cwiseSqrt();
    return e.vectors * root.asDiagonal() * e.vectors.transpose();
}

double trace_sqrt_psd(const Mat& m) {
    const SymEigen e = sym_eigen(symmetrize(m));
    const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
    if (e.values(0) < -1e-8 * scale) throw NotPositiveDefinite("covariance product is not positive semidefinite");
    return e.values.cwiseMax(0.0).cwiseSqrt().sum();
}

// Minimum-cost assignment of rows to distinct columns (rows <= cols).
std::vector<int> hungarian(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) out[p[j] - 1] = j - 1;
    return out;
}

Mat generate(Mlp& generator, const Mat& z) { return generator.forward(z, Mode::Eval); }

}  // namespace

std::vector<int> optimal_assignment(const Mat& cost) {
    if (cost.rows() > cost.cols()) throw ShapeMismatch("optimal_assignment: more rows than columns");
    if (cost.rows() == 0) return {};
    return hungarian(cost);
}

ModeCoverage mode_coverage(const Mat& gen_means, const std::vector<Vec>& centers) {
    const auto m = static_cast<Eigen::Index>(centers.size());
    Mat cost(m, gen_means.rows());
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index c = 0; c < gen_means.rows(); ++c) cost(i, c) = (gen_means.row(c).transpose() - centers[static_cast<std::size_t>(i)]).norm();
    ModeCoverage out;
    out.component = optimal_assignment(cost);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.distance.push_back(cost(i, out.component[static_cast<std::size_t>(i)]));
        out.max_distance = std::max(out.max_distance, out.distance.back());
    }
    return out;
}

ClusterProbs assign_cluster(const Vec& encoded, const MixturePrior& prior) {
    const double ne = encoded.norm();
    if (ne < 1e-12) throw DegenerateVector("assign_cluster: encoder output has zero norm");
    const int k = prior.k();
    Vec logits(k);
    for (int c = 0; c < k; ++c) {
        const double nm = prior.mu[c].norm();
        if (nm < 1e-12) throw DegenerateVector("assign_cluster: mean vector has zero norm");
        logits(c) = encoded.dot(prior.mu[c]) / (ne * nm);
    }
    ClusterProbs out;
    const double lse = log_sum_exp(logits);
    out.probs = (logits.array() - lse).exp();
    out.hard = 0;
    for (int c = 1; c < k; ++c)
        if (logits(c) > logits(out.hard)) out.hard = c;
    return out;
}

std::vector<int> assign_clusters(Mlp& encoder, const Mat& x, const MixturePrior& prior) {
    const Mat e = encoder.forward(x, Mode::Eval);
    const int k = prior.k();
    Mat mh(k, prior.dim());
    for (int c = 0; c < k; ++c) {
        const double nm = prior.mu[c].norm();
        if (nm < 1e-12) throw DegenerateVector("assign_clusters: mean vector has zero norm");
        mh.row(c) = prior.mu[c].transpose() / nm;
    }
    const Mat cos = e * mh.transpose();  // row scaling by |e| does not change the argmax
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < cos.rows(); ++i) {
        if (e.row(i).norm() < 1e-12) throw DegenerateVector("assign_clusters: encoder output has zero norm");
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (cos(i, c) > cos(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
    const Contingency c = contingency(a, b);
    double index = 0.0;
    for (Eigen::Index i = 0; i < c.n.size(); ++i) index += comb2(c.n.data()[i]);
    double sa = 0.0, sb = 0.0;
    for (Eigen::Index i = 0; i < c.a.size(); ++i) sa += comb2(c.a(i));
    for (Eigen::Index j = 0; j < c.b.size(); ++j) sb += comb2(c.b(j));
    const double pairs = comb2(c.total);
    const double expected = pairs > 0.0 ? sa * sb / pairs : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;  // both trivial (one cluster or all singletons)
    return (index - expected) / (max_index - expected);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b, NmiNorm norm) {
    const Contingency c = contingency(a, b);
    const double n = c.total;
    auto entropy = [n](const Vec& counts) {
        double h = 0.0;
        for (Eigen::Index i = 0; i < counts.size(); ++i)
            if (counts(i) > 0.0) h -= counts(i) / n * std::log(counts(i) / n);
        return h;
    };
    const double ha = entropy(c.a);
    const double hb = entropy(c.b);
    if (ha == 0.0 || hb == 0.0) return (ha == 0.0 && hb == 0.0) ? 1.0 : 0.0;
    double mi = 0.0;
    for (Eigen::Index i = 0; i < c.n.rows(); ++i)
        for (Eigen::Index j = 0; j < c.n.cols(); ++j) {
            const double nij = c.n(i, j);
            if (nij > 0.0) mi += nij / n * std::log(n * nij / (c.a(i) * c.b(j)));
        }
    const double denom = norm == NmiNorm::Geometric ? std::sqrt(ha * hb) : 0.5 * (ha + hb);
    return std::clamp(mi / denom, 0.0, 1.0);
}

Moments moments(const Mat& x) {
    if (x.rows() < 2) throw GroupTooSmall("moments: need at least two samples");
    Moments m;
    m.mean = x.colwise().mean().transpose();
    const Mat centered = x.rowwise() - m.mean.transpose();
    m.cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    m.cov = symmetrize(m.cov);
    m.cov.diagonal().array() += kCovFloor;
    return m;
}

double frechet_distance(const Vec& m1, const Mat& c1, const Vec& m2, const Mat& c2) {
    const auto d = m1.size();
    if (m2.size() != d || c1.rows() != d || c1.cols() != d || c2.rows() != d || c2.cols() != d)
        throw ShapeMismatch("frechet_distance: dimension mismatch");
    const Mat s1 = sqrt_psd(c1);
    const Mat inner = s1 * c2 * s1;
    const double value = (m1 - m2).squaredNorm() + c1.trace() + c2.trace() - 2.0 * trace_sqrt_psd(inner);
    return std::max(0.0, value);
}

double frechet_distance(const Moments& a, const Moments& b) { return frechet_distance(a.mean, a.cov, b.mean, b.cov); }

IcfidReport icfid(const std::vector<Mat>& real_by_class, const std::vector<Mat>& gen_by_cluster,
                  const FeatureMap& features, Matching matching) {
    const auto ny = real_by_class.size();
    const auto nc = gen_by_cluster.size();
    if (ny == 0) throw GroupTooSmall("icfid: no classes");
    if (ny > nc) throw ShapeMismatch("icfid: more classes than clusters");
    auto feat = [&](const Mat& x) { return features ? features(x) : x; };
    std::vector<Moments> real(ny), gen(nc);
    for (std::size_t y = 0; y < ny; ++y) {
        if (real_by_class[y].rows() < 2) throw GroupTooSmall("icfid: class " + std::to_string(y) + " has < 2 samples");
        real[y] = moments(feat(real_by_class[y]));
    }
    for (std::size_t c = 0; c < nc; ++c) {
        if (gen_by_cluster[c].rows() < 2)
            throw GroupTooSmall("icfid: cluster " + std::to_string(c) + " has < 2 samples");
        gen[c] = moments(feat(gen_by_cluster[c]));
    }
    IcfidReport rep;
    rep.distances.resize(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(nc));
    parallel_for(ny * nc, [&](std::size_t idx) {
        const std::size_t y = idx / nc, c = idx % nc;
        rep.distances(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(c)) = frechet_distance(real[y], gen[c]);
    });

    if (matching == Matching::Optimal) {
        rep.assignment = optimal_assignment(rep.distances);
    } else {
        std::vector<char> taken(nc, 0);
        for (std::size_t y = 0; y < ny; ++y) {
            int best = -1;
            for (std::size_t c = 0; c < nc; ++c) {
                if (taken[c]) continue;
                if (best < 0 || rep.distances(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(c)) <
                                    rep.distances(static_cast<Eigen::Index>(y), best))
                    best = static_cast<int>(c);
            }
            taken[static_cast<std::size_t>(best)] = 1;
            rep.assignment.push_back(best);
        }
    }
    double total = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
        const double dy = rep.distances(static_cast<Eigen::Index>(y), rep.assignment[y]);
        rep.per_class.push_back(dy);
        total += dy;
    }
    rep.icfid = total / static_cast<double>(ny);
    return rep;
}

Mat generate_component(const MixturePrior& prior, Mlp& generator, int c, int n, Rng& rng) {
    return generate(generator, sample_component(prior, c, n, rng));
}

Mat generate_means(const MixturePrior& prior, Mlp& generator) {
    Mat z(prior.k(), prior.dim());
    for (int c = 0; c < prior.k(); ++c) z.row(c) = prior.mu[c].transpose();
    return generate(generator, z);
}

EvalReport evaluate(const MixturePrior& prior, Mlp& generator, Mlp& encoder, const LabeledDataset& data,
                    const EvalOptions& opts, Rng& rng) {
    if (!data.has_labels()) throw ConfigError("evaluation needs a labeled dataset");
    if (data.dim() != generator.output_dim() || data.dim() != encoder.input_dim())
        throw ShapeMismatch("dataset dimension does not match the model");
    if (opts.n_gen_per_cluster < 2) throw GroupTooSmall("n_gen_per_cluster must be >= 2");
    EvalReport rep;
    rep.pi = prior.pi();

    const auto pred = assign_clusters(encoder, data.x, prior);
    rep.ari = ari(data.labels, pred);
    rep.nmi = nmi(data.labels, pred, opts.nmi_norm);

    auto feat = [&](const Mat& x) { return opts.features ? opts.features(x) : x; };
    const int k = prior.k();
    const Vec pi = prior.pi();
    const int n_mix = opts.n_gen_per_cluster * k;
    Mat z(n_mix, prior.dim());
    for (int i = 0; i < n_mix; ++i) {
        const auto c = static_cast<int>(rng.categorical(as_span(pi)));
        z.row(i) = sample_component(prior, c, 1, rng).row(0);
    }
    rep.fid = frechet_distance(moments(feat(data.x)), moments(feat(generate(generator, z))));

    std::vector<Mat> real, gen;
    for (int y = 0; y < data.num_classes(); ++y) real.push_back(data.rows_with_label(y));
    for (int c = 0; c < k; ++c) gen.push_back(generate_component(prior, generator, c, opts.n_gen_per_cluster, rng));
    rep.icfid_detail = icfid(real, gen, opts.features, opts.matching);
    rep.icfid = rep.icfid_detail.icfid;
    return rep;
}

}  // namespace slogan
