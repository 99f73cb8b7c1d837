// Python bindings: metrics, datasets, gradient verification, and a Model
// wrapper around a training state. JSON crosses the boundary as text.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commands.hpp"
#include "run_config.hpp"
#include "slogan/io.hpp"
#include "slogan/verify.hpp"

namespace py = pybind11;
using namespace slogan;

namespace {

NmiNorm nmi_norm_from_string(const std::string& s) {
    if (s == "geometric") return NmiNorm::Geometric;
    if (s == "arithmetic") return NmiNorm::Arithmetic;
    throw ConfigError("unknown NMI normalization \"" + s + "\"");
}

class Model {
public:
    explicit Model(TrainState s) : state_(std::move(s)) {}

    static Model load(const std::string& path) { return Model(state_from_checkpoint(read_json_file(path))); }

    static Model from_json(const std::string& text) { return Model(state_from_checkpoint(Json::parse(text))); }

    // Trains from a RunConfig document (validated against the shipped schema).
    // Nothing is written to disk.
    static Model train_config(const std::string& config_text, std::optional<long> steps) {
        cli::RunConfig cfg = cli::parse_run_config(Json::parse(config_text));
        if (steps) cfg.train.steps = *steps;
        const LabeledDataset ds = cli::resolve(cfg);
        py::gil_scoped_release release;
        return Model(train(cfg.train, ds).state);
    }

    void save(const std::string& path) const { write_json_file(path, checkpoint_to_json(state_)); }
    std::string to_json() const { return checkpoint_to_json(state_).dump(); }

    int k() const { return state_.prior.k(); }
    int latent_dim() const { return static_cast<int>(state_.prior.mu[0].size()); }
    int data_dim() const { return state_.g.output_dim(); }
    long step() const { return state_.step; }
    Vec pi() const { return state_.prior.pi(); }

    Mat mu() const {
        Mat m(k(), latent_dim());
        for (int c = 0; c < k(); ++c) m.row(c) = state_.prior.mu[c].transpose();
        return m;
    }

    Mat sigma(int c) const {
        check_component(c);
        return state_.prior.sigma[c].full();
    }

    Mat generate(int component, int n, std::uint64_t seed) {
        check_component(component);
        if (n < 1) throw ConfigError("n must be >= 1");
        Rng rng(seed);
        return generate_component(state_.prior, state_.g, component, n, rng);
    }

    Mat means() { return generate_means(state_.prior, state_.g); }

    std::vector<int> assign(const Mat& x) {
        check_dim(x);
        return assign_clusters(state_.e, x, state_.prior);
    }

    std::string evaluate(const Mat& x, const std::vector<int>& labels, std::uint64_t seed, int n_gen) {
        check_dim(x);
        if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw LengthMismatch("labels and rows differ in length");
        LabeledDataset ds;
        ds.x = x;
        ds.labels = labels;
        EvalOptions opts;
        opts.n_gen_per_cluster = n_gen;
        Rng rng(seed);
        return slogan::to_json(evaluate_model(ds, opts, rng)).dump();
    }

private:
    EvalReport evaluate_model(const LabeledDataset& ds, const EvalOptions& opts, Rng& rng) {
        return slogan::evaluate(state_.prior, state_.g, state_.e, ds, opts, rng);
    }

    void check_component(int c) const {
        if (c < 0 || c >= k()) throw ConfigError("component " + std::to_string(c) + " out of range [0, " +
                                                 std::to_string(k()) + ")");
    }

    void check_dim(const Mat& x) const {
        if (x.cols() != data_dim())
            throw ShapeMismatch("data has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(data_dim()));
    }

    TrainState state_;
};

py::dict verify(std::optional<long> samples, std::uint64_t seed, const std::string& fault) {
    VerifyOptions opts;
    if (samples) {
        opts.n_large = *samples;
        opts.n_small = std::max(1L, *samples / 10);
    }
    opts.seed = seed;
    opts.fault = cli::fault_from_string(fault);
    VerifyReport rep;
    {
        py::gil_scoped_release release;
        rep = verify_gradients(opts);
    }
    py::list rows;
    for (const auto& r : rep.rows) {
        py::dict d;
        d["name"] = r.name;
        d["value"] = r.value;
        d["tolerance"] = r.tolerance;
        d["se"] = r.se;
        d["pass"] = r.pass;
        rows.append(d);
    }
    py::dict out;
    out["rows"] = rows;
    out["all_pass"] = rep.all_pass();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian-mixture-prior GAN with Stein latent optimization";

    auto base = py::register_exception<Error>(m, "SloganError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());

    m.def("ari", &ari, py::arg("a"), py::arg("b"), "Adjusted Rand index of two partitions.");
    m.def(
        "nmi",
        [](const std::vector<int>& a, const std::vector<int>& b, const std::string& norm) {
            return nmi(a, b, nmi_norm_from_string(norm));
        },
        py::arg("a"), py::arg("b"), py::arg("norm") = "geometric", "Normalized mutual information.");
    m.def("frechet_distance", py::overload_cast<const Vec&, const Mat&, const Vec&, const Mat&>(&frechet_distance),
          py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"),
          "Frechet distance between two Gaussians.");

    m.def(
        "synthetic_8gauss",
        [](std::uint64_t seed, std::array<int, 8> counts, double std_dev, double radius) {
            LabeledDataset ds = make_synthetic_8gauss(seed, counts, std_dev, radius);
            return py::make_tuple(ds.x, ds.labels);
        },
        py::arg("seed"), py::arg("counts") = kImbalancedCounts, py::arg("std") = 0.1, py::arg("radius") = 2.0,
        "Eight Gaussians on a circle, scaled to [-1, 1]; returns (x, labels).");

    m.def("verify_gradients", &verify, py::arg("samples") = py::none(), py::arg("seed") = 20240607,
          py::arg("fault") = "none", "Quadratic-oracle checks of the latent gradient estimators.");

    m.def(
        "run_config_schema", [] { return cli::run_config_schema().dump(); }, "The RunConfig JSON schema as text.");
    m.def(
        "validate_config",
        [](const std::string& text) {
            try {
                cli::parse_run_config(Json::parse(text));
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string();
        },
        py::arg("config_json"), "Empty string when valid, else one \"pointer: message\" per line.");

    py::class_<Model>(m, "Model")
        .def_static("load", &Model::load, py::arg("path"))
        .def_static("from_json", &Model::from_json, py::arg("checkpoint_json"))
        .def_static("train_config", &Model::train_config, py::arg("config_json"), py::arg("steps") = py::none())
        .def("save", &Model::save, py::arg("path"))
        .def("to_json", &Model::to_json)
        .def_property_readonly("k", &Model::k)
        .def_property_readonly("latent_dim", &Model::latent_dim)
        .def_property_readonly("data_dim", &Model::data_dim)
        .def_property_readonly("step", &Model::step)
        .def_property_readonly("pi", &Model::pi)
        .def_property_readonly("mu", &Model::mu)
        .def("sigma", &Model::sigma, py::arg("component"))
        .def("generate", &Model::generate, py::arg("component"), py::arg("n"), py::arg("seed") = 0)
        .def("means", &Model::means)
        .def("assign", &Model::assign, py::arg("x"))
        .def("evaluate", &Model::evaluate, py::arg("x"), py::arg("labels"), py::arg("seed") = 0,
             py::arg("n_gen") = 2000);
}
