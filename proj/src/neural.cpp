#include "slogan/neural.hpp"

#include <cmath>

namespace slogan {

namespace {

Vec normalized(const Vec& v) {
    const double n = v.norm();
    return n > 0.0 ? Vec(v / n) : v;
}

void apply_activation(Activation a, const Mat& pre, Mat& out) {
    switch (a) {
        case Activation::Relu: out = pre.cwiseMax(0.0); break;
        case Activation::LeakyRelu: out = pre.unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; }); break;
        case Activation::Tanh: out = pre.array().tanh().matrix(); break;
        case Activation::Sigmoid: out = pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }); break;
        case Activation::Linear: out = pre; break;
    }
}

// d out / d pre, elementwise.
Mat activation_derivative(Activation a, const Mat& pre, const Mat& out) {
    switch (a) {
        case Activation::Relu: return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
        case Activation::LeakyRelu: return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : kLeakySlope; });
        case Activation::Tanh: return (1.0 - out.array().square()).matrix();
        case Activation::Sigmoid: return (out.array() * (1.0 - out.array())).matrix();
        case Activation::Linear: return Mat::Ones(pre.rows(), pre.cols());
    }
    return Mat::Ones(pre.rows(), pre.cols());
}

bool piecewise_linear(Activation a) {
    return a == Activation::Relu || a == Activation::LeakyRelu || a == Activation::Linear;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "lrelu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "linear";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "lrelu" || s == "leaky_relu") return Activation::LeakyRelu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw BadSpec("unknown activation '" + s + "'");
}

NetSpec synthetic_generator_spec(int latent_dim, int data_dim) {
    return {latent_dim,
            {{128, Activation::Relu, true, false},
             {128, Activation::Relu, true, false},
             {data_dim, Activation::Tanh, false, false}}};
}

NetSpec synthetic_discriminator_spec(int data_dim) {
    return {data_dim,
            {{128, Activation::LeakyRelu, false, false},
             {128, Activation::LeakyRelu, false, false},
             {1, Activation::Linear, false, false}}};
}

NetSpec synthetic_encoder_spec(int data_dim, int latent_dim) {
    return {data_dim,
            {{128, Activation::LeakyRelu, false, true},
             {128, Activation::LeakyRelu, false, true},
             {latent_dim, Activation::Linear, false, true}}};
}

std::vector<std::span<const double>> ParamGrads::blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers) {
        out.push_back(as_span(l.w));
        out.push_back(as_span(l.b));
        if (l.gamma.size() > 0) {
            out.push_back(as_span(l.gamma));
            out.push_back(as_span(l.beta));
        }
    }
    return out;
}

void ParamGrads::add(const ParamGrads& other, double s) {
    if (other.layers.size() != layers.size()) throw ShapeMismatch("ParamGrads::add: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].w += s * other.layers[i].w;
        layers[i].b += s * other.layers[i].b;
        if (layers[i].gamma.size() > 0) {
            layers[i].gamma += s * other.layers[i].gamma;
            layers[i].beta += s * other.layers[i].beta;
        }
    }
}

void ParamGrads::scale(double s) {
    for (auto& l : layers) {
        l.w *= s;
        l.b *= s;
        l.gamma *= s;
        l.beta *= s;
    }
}

double ParamGrads::squared_norm() const {
    double acc = 0.0;
    for (const auto& l : layers)
        acc += l.w.squaredNorm() + l.b.squaredNorm() + l.gamma.squaredNorm() + l.beta.squaredNorm();
    return acc;
}

Mlp Mlp::build(const NetSpec& spec, Rng& rng) {
    if (spec.input_dim < 1) throw BadSpec("network input dimension must be positive");
    Mlp net;
    net.spec_ = spec;
    if (spec.layers.empty()) {
        // A bare affine map input -> input so "no hidden layers" still has parameters.
        net.spec_.layers.push_back({spec.input_dim, Activation::Linear, false, false});
    }
    int in = spec.input_dim;
    for (const auto& ls : net.spec_.layers) {
        if (ls.units < 1) throw BadSpec("layer width must be positive");
        Layer l;
        l.spec = ls;
        l.in = in;
        const double bound = std::sqrt(6.0 / in);
        l.w.resize(ls.units, in);
        for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
        l.b = Vec::Zero(ls.units);
        if (ls.batch_norm) {
            l.gamma = Vec::Ones(ls.units);
            l.beta = Vec::Zero(ls.units);
            l.running_mean = Vec::Zero(ls.units);
            l.running_var = Vec::Ones(ls.units);
        }
        if (ls.spectral_norm) {
            Vec u(ls.units);
            for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
            l.sn_u = normalized(u);
            l.sn_v = normalized(Vec(l.w.transpose() * l.sn_u));
        }
        net.layers_.push_back(std::move(l));
        in = ls.units;
    }
    return net;
}

Mlp Mlp::from_layers(const NetSpec& spec, std::vector<Layer> layers) {
    if (spec.layers.size() != layers.size() || layers.empty()) throw BadSpec("layer count does not match spec");
    int in = spec.input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        const LayerSpec& ls = spec.layers[i];
        if (l.in != in || l.w.rows() != ls.units || l.w.cols() != in || l.b.size() != ls.units)
            throw BadSpec("layer " + std::to_string(i) + " has inconsistent shapes");
        if (ls.batch_norm && (l.gamma.size() != ls.units || l.beta.size() != ls.units ||
                              l.running_mean.size() != ls.units || l.running_var.size() != ls.units))
            throw BadSpec("layer " + std::to_string(i) + " batch-norm parameters missing");
        if (ls.spectral_norm && (l.sn_u.size() != ls.units || l.sn_v.size() != in))
            throw BadSpec("layer " + std::to_string(i) + " spectral-norm vectors missing");
        in = ls.units;
    }
    Mlp net;
    net.spec_ = spec;
    net.layers_ = std::move(layers);
    return net;
}

Mat Mlp::forward(const Mat& x, Mode mode, ForwardTape* tape, bool update_state) {
    if (x.cols() != spec_.input_dim)
        throw ShapeMismatch("forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(spec_.input_dim));
    const bool advance = mode == Mode::Train && update_state;
    if (tape) {
        tape->mode = mode;
        tape->layers.assign(layers_.size(), {});
    }
    Mat h = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        Layer& l = layers_[li];
        LayerCache local;
        LayerCache& cache = tape ? tape->layers[li] : local;
        cache.input = h;

        if (l.spec.spectral_norm) {
            if (advance) {
                l.sn_v = normalized(Vec(l.w.transpose() * l.sn_u));
                l.sn_u = normalized(Vec(l.w * l.sn_v));
            }
            cache.sn_u = l.sn_u;
            cache.sn_v = l.sn_v;
            cache.sn_sigma = l.sn_u.dot(l.w * l.sn_v);
            cache.w_eff = l.w / cache.sn_sigma;
        } else {
            cache.w_eff = l.w;
        }

        Mat a = h * cache.w_eff.transpose();
        a.rowwise() += l.b.transpose();

        if (l.spec.batch_norm) {
            const double n = static_cast<double>(a.rows());
            Vec mean, var;
            if (mode == Mode::Train) {
                mean = a.colwise().mean().transpose();
                var = ((a.rowwise() - mean.transpose()).array().square().colwise().sum() / n).transpose();
                if (advance) {
                    l.running_mean = kBatchNormMomentum * l.running_mean + (1.0 - kBatchNormMomentum) * mean;
                    l.running_var = kBatchNormMomentum * l.running_var + (1.0 - kBatchNormMomentum) * var;
                }
            } else {
                mean = l.running_mean;
                var = l.running_var;
            }
            cache.inv_std = (var.array() + kBatchNormEps).rsqrt();
            cache.xhat = (a.rowwise() - mean.transpose()) * cache.inv_std.asDiagonal();
            cache.pre_act = cache.xhat * l.gamma.asDiagonal();
            cache.pre_act.rowwise() += l.beta.transpose();
        } else {
            cache.pre_act = std::move(a);
        }
        apply_activation(l.spec.activation, cache.pre_act, cache.out);
        h = cache.out;
    }
    return h;
}

std::pair<ParamGrads, Mat> Mlp::backward(const ForwardTape& tape, const Mat& dy) const {
    if (tape.layers.size() != layers_.size()) throw ShapeMismatch("backward: tape does not match network");
    if (dy.cols() != output_dim() || dy.rows() != tape.layers.back().out.rows())
        throw ShapeMismatch("backward: output gradient has wrong shape");
    ParamGrads grads;
    grads.layers.resize(layers_.size());
    Mat dout = dy;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const LayerCache& cache = tape.layers[li];
        LayerGrads& g = grads.layers[li];

        Mat dpre = dout.cwiseProduct(activation_derivative(l.spec.activation, cache.pre_act, cache.out));
        Mat da;
        if (l.spec.batch_norm) {
            g.gamma = dpre.cwiseProduct(cache.xhat).colwise().sum().transpose();
            g.beta = dpre.colwise().sum().transpose();
            const Mat dxhat = dpre * l.gamma.asDiagonal();
            if (tape.mode == Mode::Train) {
                const double n = static_cast<double>(dpre.rows());
                const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
                const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).colwise().sum();
                Mat centered = (n * dxhat).rowwise() - sum_dxhat;
                centered -= cache.xhat * sum_dxhat_xhat.asDiagonal();
                da = centered * (cache.inv_std / n).asDiagonal();
            } else {
                da = dxhat * cache.inv_std.asDiagonal();
            }
        } else {
            da = std::move(dpre);
        }

        g.b = da.colwise().sum().transpose();
        const Mat dw_eff = da.transpose() * cache.input;
        if (l.spec.spectral_norm) {
            const double s = cache.sn_sigma;
            const double inner = dw_eff.cwiseProduct(l.w).sum();
            g.w = dw_eff / s - (inner / (s * s)) * (cache.sn_u * cache.sn_v.transpose());
        } else {
            g.w = dw_eff;
        }
        dout = da * cache.w_eff;
    }
    return {std::move(grads), std::move(dout)};
}

Mat Mlp::input_gradient(const ForwardTape& tape) const {
    if (output_dim() != 1) throw ShapeMismatch("input_gradient: network output must be scalar");
    const Mat ones = Mat::Ones(tape.layers.back().out.rows(), 1);
    return backward(tape, ones).second;
}

ParamGrads Mlp::input_gradient_param_grads(const ForwardTape& tape, const Mat& r) const {
    if (output_dim() != 1) throw BadSpec("input_gradient_param_grads: network output must be scalar");
    for (const auto& l : layers_)
        if (l.spec.batch_norm || l.spec.spectral_norm || !piecewise_linear(l.spec.activation))
            throw BadSpec("input_gradient_param_grads: only piecewise-linear layers without normalization");
    const std::size_t nl = layers_.size();
    const Eigen::Index b = tape.layers.back().out.rows();
    if (r.rows() != b || r.cols() != input_dim()) throw ShapeMismatch("input_gradient_param_grads: bad r shape");

    // Forward-mode replay of the reverse pass: g[l] = d y / d pre_act of layer l.
    std::vector<Mat> g(nl);
    std::vector<Mat> mask(nl);
    for (std::size_t li = 0; li < nl; ++li)
        mask[li] = activation_derivative(layers_[li].spec.activation, tape.layers[li].pre_act, tape.layers[li].out);
    g[nl - 1] = mask[nl - 1];  // dy = 1
    for (std::size_t li = nl - 1; li-- > 0;) {
        g[li] = (g[li + 1] * layers_[li + 1].w).cwiseProduct(mask[li]);
    }

    ParamGrads grads = zero_grads();
    // Reverse over the reverse pass: u = g[0] W_0; dh_{l} = g[l+1] W_{l+1}.
    Mat rh = r;  // gradient w.r.t. dh_{l-1}
    for (std::size_t li = 0; li < nl; ++li) {
        grads.layers[li].w = g[li].transpose() * rh;
        if (li + 1 < nl) {
            const Mat dg = rh * layers_[li].w.transpose();
            rh = dg.cwiseProduct(mask[li]);
        }
    }
    return grads;
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
        out.push_back(as_span(l.w));
        out.push_back(as_span(l.b));
        if (l.spec.batch_norm) {
            out.push_back(as_span(l.gamma));
            out.push_back(as_span(l.beta));
        }
    }
    return out;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size() + l.gamma.size() + l.beta.size();
    return n;
}

ParamGrads Mlp::zero_grads() const {
    ParamGrads g;
    for (const auto& l : layers_) {
        LayerGrads lg;
        lg.w = Mat::Zero(l.w.rows(), l.w.cols());
        lg.b = Vec::Zero(l.b.size());
        if (l.spec.batch_norm) {
            lg.gamma = Vec::Zero(l.gamma.size());
            lg.beta = Vec::Zero(l.beta.size());
        }
        g.layers.push_back(std::move(lg));
    }
    return g;
}

double Mlp::effective_spectral_norm(std::size_t i) const {
    const Layer& l = layers_.at(i);
    Mat w = l.w;
    if (l.spec.spectral_norm) w /= l.sn_u.dot(l.w * l.sn_v);
    const SymEigen e = sym_eigen(Mat(w.transpose() * w));
    return std::sqrt(std::max(0.0, e.values(e.values.size() - 1)));
}

Mat forward(Mlp& net, const Mat& x, Mode mode, ForwardTape* tape) { return net.forward(x, mode, tape); }

std::pair<ParamGrads, Mat> backward(const Mlp& net, const ForwardTape& tape, const Mat& dy) {
    return net.backward(tape, dy);
}

Mlp build_from_spec(const NetSpec& spec, Rng& rng) { return Mlp::build(spec, rng); }

void NetOptimizer::step(Mlp& net, const ParamGrads& grads, double lr) {
    auto params = net.parameter_blocks();
    const auto g = grads.blocks();
    if (params.size() != g.size()) throw ShapeMismatch("NetOptimizer::step: block count mismatch");
    if (states_.empty()) states_.resize(params.size());
    if (states_.size() != params.size()) throw ShapeMismatch("NetOptimizer::step: optimizer state mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) adam_step(states_[i], params[i], g[i], lr, hyper_);
}

}  // namespace slogan
