#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slogan/numerics.hpp"

namespace slogan {

enum class Activation { Relu, LeakyRelu, Tanh, Sigmoid, Linear };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
    int units = 0;
    Activation activation = Activation::Linear;
    bool batch_norm = false;
    bool spectral_norm = false;
};

struct NetSpec {
    int input_dim = 0;
    std::vector<LayerSpec> layers;

    int output_dim() const { return layers.empty() ? input_dim : layers.back().units; }
};

/// Table-7 style architectures for two-dimensional toy data.
NetSpec synthetic_generator_spec(int latent_dim = 64, int data_dim = 2);
NetSpec synthetic_discriminator_spec(int data_dim = 2);
NetSpec synthetic_encoder_spec(int data_dim = 2, int latent_dim = 64);

struct Layer {
    LayerSpec spec;
    int in = 0;
    Mat w;  // units x in
    Vec b;
    Vec gamma, beta;                   // batch norm affine
    Vec running_mean, running_var;     // batch norm statistics
    Vec sn_u, sn_v;                    // spectral-norm power iteration vectors
};

enum class Mode { Train, Eval };

struct LayerCache {
    Mat input;
    Mat w_eff;
    double sn_sigma = 1.0;
    Vec sn_u, sn_v;
    Mat xhat;          // batch norm normalized values
    Vec inv_std;       // batch norm 1/sqrt(var + eps) actually used
    Mat pre_act;       // input to the activation
    Mat out;
};

struct ForwardTape {
    Mode mode = Mode::Eval;
    std::vector<LayerCache> layers;
};

struct LayerGrads {
    Mat w;
    Vec b;
    Vec gamma, beta;
};

struct ParamGrads {
    std::vector<LayerGrads> layers;

    std::vector<std::span<const double>> blocks() const;
    void add(const ParamGrads& other, double scale = 1.0);
    void scale(double s);
    double squared_norm() const;
};

class Mlp {
public:
    Mlp() = default;

    /// He-uniform (fan-in) weights, zero biases. Throws BadSpec.
    static Mlp build(const NetSpec& spec, Rng& rng);
    /// Reassembles a network from stored layers. Throws BadSpec on inconsistent shapes.
    static Mlp from_layers(const NetSpec& spec, std::vector<Layer> layers);

    const NetSpec& spec() const { return spec_; }
    int input_dim() const { return spec_.input_dim; }
    int output_dim() const { return spec_.output_dim(); }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    /// Train mode normalizes with batch statistics; with update_state it also
    /// advances the batch-norm running statistics and one power iteration per
    /// spectral-normalized layer. Eval mode is a pure function of the
    /// parameters.
    Mat forward(const Mat& x, Mode mode, ForwardTape* tape = nullptr, bool update_state = true);

    /// Reverse pass for output gradient dy. Returns parameter gradients and the
    /// input gradient.
    std::pair<ParamGrads, Mat> backward(const ForwardTape& tape, const Mat& dy) const;

    /// Per-sample gradient of a scalar-output network w.r.t. its input.
    Mat input_gradient(const ForwardTape& tape) const;

    /// Parameter gradient of sum_i <r_i, dD(x_i)/dx_i> for a scalar-output
    /// network built only from piecewise-linear activations without batch or
    /// spectral normalization (the activation pattern is locally constant, so
    /// only weight matrices receive gradient). Throws BadSpec otherwise.
    ParamGrads input_gradient_param_grads(const ForwardTape& tape, const Mat& r) const;

    std::vector<std::span<double>> parameter_blocks();
    std::size_t parameter_count() const;
    ParamGrads zero_grads() const;

    /// Largest singular value of the weight actually applied in layer i.
    double effective_spectral_norm(std::size_t i) const;

private:
    NetSpec spec_;
    std::vector<Layer> layers_;
};

Mat forward(Mlp& net, const Mat& x, Mode mode, ForwardTape* tape = nullptr);
std::pair<ParamGrads, Mat> backward(const Mlp& net, const ForwardTape& tape, const Mat& dy);
Mlp build_from_spec(const NetSpec& spec, Rng& rng);

/// One Adam state per parameter block of a network.
class NetOptimizer {
public:
    NetOptimizer() = default;
    explicit NetOptimizer(const AdamHyper& hyper) : hyper_(hyper) {}

    void step(Mlp& net, const ParamGrads& grads, double lr);
    std::vector<AdamState>& states() { return states_; }
    const std::vector<AdamState>& states() const { return states_; }

private:
    AdamHyper hyper_;
    std::vector<AdamState> states_;
};

}  // namespace slogan
