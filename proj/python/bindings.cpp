#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "inslen/analysis.hpp"
#include "inslen/cli.hpp"
#include "inslen/config.hpp"
#include "inslen/error.hpp"
#include "inslen/lens.hpp"
#include "inslen/metrics.hpp"
#include "inslen/pipeline.hpp"
#include "inslen/synth.hpp"
#include "inslen/trace.hpp"

namespace py = pybind11;
using namespace inslen;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
    if (a.ndim() != 2) throw InputError("expected a 2-d array");
    const auto* p = a.data();
    return Tensor(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  std::vector<float>(p, p + a.size()));
}

py::array_t<float> to_array(const Tensor& t) {
    py::array_t<float> out({t.rows(), t.cols()});
    const auto d = t.data();
    std::copy(d.begin(), d.end(), out.mutable_data());
    return out;
}

py::object optional_value(const baselines::Measurement& m) {
    return m.value ? py::object(py::float_(*m.value)) : py::object(py::none());
}

py::dict record_dict(const ScoreRecord& r) {
    py::dict d;
    d["sample_id"] = r.sample_id;
    d["position"] = r.position;
    d["token_id"] = r.token_id;
    d["surface"] = r.surface;
    d["label"] = std::string(to_string(r.label));
    if (r.scores) {
        const auto& s = *r.scores;
        d["s_lss"] = s.s_lss;
        d["s_cafe"] = s.s_cafe;
        d["s_cls"] = s.s_cls;
        d["s_con"] = s.s_con;
        d["mean_conf"] = s.mean_conf;
        d["s_ccs"] = s.s_ccs;
        d["s_inslen"] = s.s_inslen;
    } else {
        for (const char* k : {"s_lss", "s_cafe", "s_cls", "s_con", "mean_conf", "s_ccs", "s_inslen"}) d[k] = py::none();
    }
    d["nll"] = optional_value(r.baselines.nll);
    d["entropy"] = optional_value(r.baselines.entropy);
    d["internal_conf"] = optional_value(r.baselines.internal_conf);
    d["svar"] = optional_value(r.baselines.svar);
    d["contextual_lens"] = optional_value(r.baselines.contextual_lens);
    d["error"] = r.error;
    return d;
}

scores::ScoreConfig score_config(const py::dict& overrides) {
    scores::ScoreConfig cfg;
    if (!overrides.empty()) {
        const auto json = py::module_::import("json").attr("dumps")(overrides).cast<std::string>();
        apply_score_config(cfg, json);
    }
    cfg.check();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Object hallucination scoring from model-internal traces";

    py::register_exception<Error>(m, "InslenError", PyExc_RuntimeError);

    py::class_<TraceContainer>(m, "TraceContainer")
        .def_property_readonly("model_id", [](const TraceContainer& c) { return c.card.model_id; })
        .def_property_readonly("vocab_size", [](const TraceContainer& c) { return c.card.vocab_size; })
        .def_property_readonly("hidden_dim", [](const TraceContainer& c) { return c.card.hidden_dim; })
        .def_property_readonly("num_layers", [](const TraceContainer& c) { return c.card.num_layers; })
        .def_property_readonly("unembedding", [](const TraceContainer& c) { return to_array(c.unembedding); })
        .def_property_readonly("sample_ids",
                               [](const TraceContainer& c) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : c.samples) ids.push_back(s.sample_id);
                                   return ids;
                               })
        .def("__len__", [](const TraceContainer& c) { return c.samples.size(); })
        .def("bytes_read", &TraceContainer::bytes_read)
        .def("validate",
             [](const TraceContainer& c) {
                 std::vector<py::dict> out;
                 for (const auto& v : validate(c)) {
                     py::dict d;
                     d["sample_id"] = v.sample_id;
                     d["field"] = v.field;
                     d["rule"] = v.rule;
                     out.push_back(d);
                 }
                 return out;
             })
        .def("write", [](const TraceContainer& c, const std::filesystem::path& p) { write_container(c, p); });

    m.def("open_container", &open_container, py::arg("path"));

    m.def(
        "synthesize",
        [](const py::dict& overrides) {
            synth::SynthConfig cfg;
            if (!overrides.empty()) {
                apply_synth_config(cfg, py::module_::import("json").attr("dumps")(overrides).cast<std::string>());
            }
            return synth::generate(cfg);
        },
        py::arg("config") = py::dict(), "Generate a synthetic container; keys override SynthConfig fields.");

    m.def(
        "score",
        [](const TraceContainer& c, const py::dict& config, unsigned jobs) {
            const auto cfg = score_config(config);
            ScoreRun run;
            {
                py::gil_scoped_release release;
                run = score_container(c, cfg, jobs);
            }
            std::vector<py::dict> out;
            out.reserve(run.records.size());
            for (const auto& r : run.records) out.push_back(record_dict(r));
            return out;
        },
        py::arg("container"), py::arg("config") = py::dict(), py::arg("jobs") = 1,
        "Score every object token; returns one dict per object token.");

    m.def(
        "logit_lens",
        [](const FloatArray& z, const FloatArray& unembedding, double tau) {
            if (z.ndim() != 1) throw InputError("expected a 1-d embedding");
            return lens::logit_lens(std::span<const float>(z.data(), static_cast<std::size_t>(z.size())),
                                    to_tensor(unembedding), tau);
        },
        py::arg("embedding"), py::arg("unembedding"), py::arg("tau") = 1.0);

    m.def(
        "auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return eval::auroc(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "aupr", [](const std::vector<double>& s, const std::vector<int>& y) { return eval::aupr(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "calibrate_threshold",
        [](const std::vector<double>& s, const std::vector<int>& y, const std::string& objective, double max_fpr) {
            const auto obj = objective == "fixed_fpr" ? eval::CalibrationObjective::fixed_fpr(max_fpr)
                                                      : eval::CalibrationObjective::youden();
            if (objective != "fixed_fpr" && objective != "youden_j") throw ConfigError("unknown objective " + objective);
            return eval::calibrate_threshold(s, y, obj);
        },
        py::arg("scores"), py::arg("labels"), py::arg("objective") = "youden_j", py::arg("max_fpr") = 0.05);
    m.def(
        "is_hallucination", [](double score, double mu) { return eval::detect(score, mu) == eval::Decision::Hallucination; },
        py::arg("score"), py::arg("threshold"));

    m.def("detector_names", &detector_names);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
