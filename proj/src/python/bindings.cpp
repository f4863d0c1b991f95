// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python surface: configs and reports cross as JSON strings, matrices as
// float64 numpy arrays.

#include "et2m/config.hpp"
#include "et2m/diffusion.hpp"
#include "et2m/errors.hpp"
#include "et2m/evaluation.hpp"
#include "et2m/pipeline.hpp"
#include "et2m/segmentation.hpp"
#include "et2m/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace et2m;

namespace {

ConditioningBundle bundle_of(const Mat& events, const Mat& global) {
    if (global.rows() != 1) throw ShapeMismatch("global must be a single row");
    ConditioningBundle b;
    b.events = events;
    b.global = global.row(0);
    return b;
}

RunConfig config_of(const std::string& json_text) {
    if (json_text.empty()) return RunConfig::toy();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not JSON: ") + e.what());
    }
    auto c = RunConfig::from_json(j, RunConfig::toy());
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Event-level text-to-motion diffusion core";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());
    py::register_exception<TimestepOutOfRange>(m, "TimestepOutOfRange", base.ptr());

    m.def("toy_config", [] { return RunConfig::toy().to_json().dump(); }, "Toy run configuration as JSON.");
    m.def("default_config", [] { return RunConfig{}.to_json().dump(); });
    m.def("config_help", &config_help);
    m.def("validate_config", [](const std::string& j) { return config_of(j).to_json().dump(); },
          py::arg("config_json"), "Layers a partial config on the toy config, validates it and returns the result.");

    m.def(
        "decompose_rule",
        [](const std::string& prompt) {
            std::vector<std::string> out;
            for (const auto& e : decompose_rule(prompt).events) out.push_back(e.text);
            return out;
        },
        py::arg("prompt"), "Offline rule-based event decomposition.");

    py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
        .def_static("linear", &DiffusionSchedule::linear, py::arg("T") = 1000, py::arg("beta_1") = 1e-4,
                    py::arg("beta_T") = 2e-2, py::arg("n_steps") = 10)
        .def("beta", &DiffusionSchedule::beta)
        .def("alpha_bar", &DiffusionSchedule::alpha_bar);
    m.def("select_inference_steps", &select_inference_steps, py::arg("T"), py::arg("n"));
    m.def("forward_noise", &forward_noise, py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));
    m.def("recover_x0", &recover_x0, py::arg("x_t"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

    py::class_<Denoiser>(m, "Denoiser")
        .def(py::init([](int motion_dim, int cond_dim, const std::string& model_json) {
                 DenoiserConfig c = model_json.empty() ? RunConfig::toy().model
                                                       : denoiser_config_from_json(nlohmann::json::parse(model_json));
                 c.motion_dim = motion_dim;
                 c.cond_dim = cond_dim;
                 return Denoiser(c);
             }),
             py::arg("motion_dim"), py::arg("cond_dim"), py::arg("model_json") = "")
        .def_static("from_checkpoint", [](const std::filesystem::path& p) { return model_from_checkpoint(load_checkpoint(p)); })
        .def("predict",
             [](const Denoiser& d, const Mat& x_t, int t, const Mat& events, const Mat& global) {
                 return d.predict(x_t, t, bundle_of(events, global));
             },
             py::arg("x_t"), py::arg("t"), py::arg("events"), py::arg("global_"))
        .def("parameter_count", [](const Denoiser& d) { return d.parameters()->scalar_count(); })
        .def("parameter_hash", [](const Denoiser& d) { return d.parameters()->content_hash(); })
        .def_property_readonly("motion_dim", &Denoiser::motion_dim);

    m.def(
        "sample",
        [](const Denoiser& model, const Mat& events, const Mat& global, int length, uint64_t seed, int steps,
           double scale) {
            const auto& cfg = model.config();
            const auto sched = DiffusionSchedule::linear(cfg.timesteps, 1e-4, 2e-2, steps);
            GuidanceConfig g;
            g.scale = scale;
            py::gil_scoped_release release;
            return sample(model, bundle_of(events, global), length, sched, g, seed).frames;
        },
        py::arg("model"), py::arg("events"), py::arg("global_"), py::arg("length"), py::arg("seed") = 0,
        py::arg("steps") = 10, py::arg("scale") = 4.0, "Guided ancestral sampling; returns normalized frames.");

    m.def("fid", &fid, py::arg("real"), py::arg("gen"));
    m.def("r_precision", &r_precision, py::arg("gen"), py::arg("text"), py::arg("pool_size"), py::arg("k"),
          py::arg("seed") = 0);
    m.def("mm_dist", &mm_dist, py::arg("gen"), py::arg("text"));

    m.def(
        "run_pipeline",
        [](const std::string& config_json, const std::filesystem::path& run_dir) {
            Pipeline p(config_of(config_json), run_dir);
            py::gil_scoped_release release;
            return p.report().to_json().dump();
        },
        py::arg("config_json"), py::arg("run_dir"), "Runs every stage (cached) and returns the report as JSON.");
}
