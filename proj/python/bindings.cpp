#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "echoprint/config.hpp"
#include "echoprint/decomposition.hpp"
#include "echoprint/error.hpp"
#include "echoprint/harness.hpp"

namespace py = pybind11;
using namespace echoprint;

namespace {

AudioTrace to_trace(const std::vector<double>& samples, int rate) {
  AudioTrace t;
  t.samples = samples;
  t.sample_rate = rate;
  return t;
}

PipelineConfig pipeline_from(const std::string& config_json) {
  return config_json.empty() ? PipelineConfig{} : parse_config(config_json).pipeline;
}

py::dict layer_dict(const NmfLayer& l) {
  py::dict d;
  d["H"] = l.H;
  d["W"] = l.W;
  d["rank"] = l.rank;
  d["residual"] = l.residual;
  d["objective"] = l.objective;
  d["iterations"] = l.iterations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = "0.1.0";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  // Order matters: pybind11 tries translators newest first, so the
  // subclasses are registered after the base.
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", error.ptr());

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const AudioTrace t = read_wav(path);
        return py::make_tuple(py::array_t<double>(t.samples.size(), t.samples.data()), t.sample_rate);
      },
      py::arg("path"), "Returns (samples in [-1, 1], sample_rate).");

  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const std::vector<double>& samples, int rate) {
        write_wav(path, to_trace(samples, rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  m.def(
      "segment",
      [](const std::vector<double>& samples, int rate) {
        py::list out;
        for (const auto& u : segment(to_trace(samples, rate))) {
          py::dict d;
          d["start"] = u.start_offset;
          d["duration"] = u.duration;
          d["samples"] = py::array_t<double>(u.samples.size(), u.samples.data());
          out.append(d);
        }
        return out;
      },
      py::arg("samples"), py::arg("sample_rate"));

  m.def(
      "cqt",
      [](const std::vector<double>& samples, int rate, double f_min, double f_max, int bins_per_octave) {
        const CqtSpectrum s = cqt(to_trace(samples, rate), f_min, f_max, bins_per_octave);
        py::dict d;
        d["bins"] = s.bins;
        d["center_freqs"] = s.center_freqs;
        d["bandwidths"] = s.bandwidths;
        return d;
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("f_min") = 50.0, py::arg("f_max") = 2000.0,
      py::arg("bins_per_octave") = 24);

  m.def(
      "nmf",
      [](const Eigen::MatrixXd& O, int rank, double tol, int max_iter, std::uint64_t seed) {
        NmfOptions opts;
        opts.tol = tol;
        opts.max_iter = max_iter;
        opts.seed = seed;
        return layer_dict(nmf_layer(O, rank, opts));
      },
      py::arg("O"), py::arg("rank"), py::arg("tol") = 0.05, py::arg("max_iter") = 500, py::arg("seed") = 0);

  m.def("max_pool", &max_pool, py::arg("W"), py::arg("half_window"));

  m.def(
      "deep_decompose",
      [](const Eigen::MatrixXd& O, const std::vector<int>& ranks, int pool_half_window, double direct_threshold) {
        DecompositionConfig cfg;
        cfg.ranks = ranks;
        cfg.layers = static_cast<int>(ranks.size());
        cfg.pool_half_window = pool_half_window;
        cfg.direct_threshold = direct_threshold;
        const DecompositionResult r = deep_decompose(O, cfg);
        py::list layers;
        for (const auto& l : r.layers) layers.append(layer_dict(l));
        py::dict d;
        d["layers"] = layers;
        d["WX"] = r.WX;
        d["direct_mask"] = r.direct_mask;
        d["row_share"] = r.row_share;
        d["direct"] = r.direct;
        d["reverberant"] = r.reverberant;
        return d;
      },
      py::arg("O"), py::arg("ranks") = std::vector<int>{100, 50, 25}, py::arg("pool_half_window") = 20,
      py::arg("direct_threshold") = 0.9);

  m.def(
      "fingerprint",
      [](const std::vector<double>& samples, int rate, const std::string& label,
         const std::string& config_json) -> py::object {
        ManifestEntry entry;
        entry.label = label;
        const FingerprintedTrace f = fingerprint_trace(entry, to_trace(samples, rate), pipeline_from(config_json));
        if (!f.fingerprint) return py::none();
        py::dict d;
        d["label"] = f.fingerprint->label;
        d["p"] = f.fingerprint->p;
        d["band_mask"] = f.fingerprint->band_mask;
        d["n_segments"] = f.fingerprint->n_segments;
        return d;
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("label") = "", py::arg("config_json") = "",
      "Fingerprint of one trace, or None when no utterance yields one. config_json takes the CLI config format.");

  m.def(
      "image_source_ir",
      [](const Vec3& dims, const std::array<double, 6>& coeffs, const Vec3& source, const Vec3& mic, int max_order,
         int rate) {
        RoomSpec room;
        room.dims = dims;
        room.surface_coeffs = coeffs;
        room.source_pos = source;
        room.mic_pos = mic;
        room.max_order = max_order;
        const ImpulseResponse ir = image_source_ir(room, rate);
        return py::array_t<double>(ir.taps.size(), ir.taps.data());
      },
      py::arg("dims"), py::arg("coeffs"), py::arg("source"), py::arg("mic"), py::arg("max_order") = 10,
      py::arg("sample_rate") = kCanonicalRate);
}
