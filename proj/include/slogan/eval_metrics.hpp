#pragma once

#include <functional>
#include <vector>

#include "slogan/datasets.hpp"
#include "slogan/mixture_prior.hpp"
#include "slogan/neural.hpp"

namespace slogan {

struct ClusterProbs {
    Vec probs;
    int hard = 0;
};

/// softmax_k cos(e, mu_k); argmax with ties to the lowest index.
ClusterProbs assign_cluster(const Vec& encoded, const MixturePrior& prior);

/// Hard assignments of every row of x through the encoder (eval mode).
std::vector<int> assign_clusters(Mlp& encoder, const Mat& x, const MixturePrior& prior);

double ari(const std::vector<int>& a, const std::vector<int>& b);

enum class NmiNorm { Geometric, Arithmetic };
double nmi(const std::vector<int>& a, const std::vector<int>& b, NmiNorm norm = NmiNorm::Geometric);

struct Moments {
    Vec mean;
    Mat cov;  // unbiased, with a 1e-10 diagonal floor
};

/// Throws GroupTooSmall for fewer than two rows.
Moments moments(const Mat& x);

/// |m1 - m2|^2 + tr(C1 + C2 - 2 (C1^{1/2} C2 C1^{1/2})^{1/2}).
double frechet_distance(const Vec& m1, const Mat& c1, const Vec& m2, const Mat& c2);
double frechet_distance(const Moments& a, const Moments& b);

using FeatureMap = std::function<Mat(const Mat&)>;

enum class Matching { Greedy, Optimal };

struct IcfidReport {
    double icfid = 0.0;
    std::vector<int> assignment;     // class -> cluster
    std::vector<double> per_class;   // matched distance per class
    Mat distances;                   // classes x clusters
};

/// Matches every class to a distinct cluster. Greedy visits classes in
/// ascending order and takes the closest remaining cluster; Optimal minimizes
/// the total distance. Throws GroupTooSmall, ShapeMismatch (more classes than
/// clusters).
IcfidReport icfid(const std::vector<Mat>& real_by_class, const std::vector<Mat>& gen_by_cluster,
                  const FeatureMap& features = nullptr, Matching matching = Matching::Greedy);

/// Minimum-cost assignment of rows to distinct columns (rows <= cols).
std::vector<int> optimal_assignment(const Mat& cost);

struct ModeCoverage {
    std::vector<int> component;   // mode -> matched component
    std::vector<double> distance;  // |G(mu_c) - center|
    double max_distance = 0.0;
};

/// Matches every mode center to a distinct generated mean (rows of
/// gen_means) minimizing total Euclidean distance.
ModeCoverage mode_coverage(const Mat& gen_means, const std::vector<Vec>& centers);

struct EvalOptions {
    int n_gen_per_cluster = 2000;
    NmiNorm nmi_norm = NmiNorm::Geometric;
    Matching matching = Matching::Greedy;
    FeatureMap features;  // identity when empty
};

struct EvalReport {
    double ari = 0.0;
    double nmi = 0.0;
    double fid = 0.0;
    double icfid = 0.0;
    IcfidReport icfid_detail;
    Vec pi;
};

/// Cluster metrics from encoder assignments of the real data, Frechet distance
/// between all real data and mixture samples, and ICFID with per-component
/// generation. Requires labels.
EvalReport evaluate(const MixturePrior& prior, Mlp& generator, Mlp& encoder, const LabeledDataset& data,
                    const EvalOptions& opts, Rng& rng);

/// G(z) for z ~ q(z|c), n rows, eval mode.
Mat generate_component(const MixturePrior& prior, Mlp& generator, int c, int n, Rng& rng);

/// G(mu_c) for every component, eval mode (K x data_dim).
Mat generate_means(const MixturePrior& prior, Mlp& generator);

}  // namespace slogan
