#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "typegan/checkpoint.hpp"
#include "typegan/cli.hpp"
#include "typegan/errors.hpp"
#include "typegan/evalkit.hpp"
#include "typegan/font.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/losses.hpp"
#include "typegan/netarch.hpp"
#include "typegan/pairset.hpp"
#include "typegan/trainkit.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace typegan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

double scalar(const Var& v) { return v.value()[0]; }

py::dict report_dict(const LossReport& r) {
  py::dict d;
  d["step"] = r.step;
  d["gan_d"] = r.gan_d;
  d["gan_g"] = r.gan_g;
  d["const"] = r.const_;
  d["tid"] = r.tid;
  d["tv"] = r.tv;
  d["l2"] = r.l2;
  d["total_g"] = r.total_g;
  d["total_d"] = r.total_d;
  return d;
}

}  // namespace

PYBIND11_MODULE(_typegan, m) {
  m.doc() = "Unsupervised typography style transfer";
  m.attr("__version__") = cli::kVersion;

  static py::exception<Error> error(m, "TypeganError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      PyErr_SetObject(exc.ptr(), py::make_tuple(std::string(to_string(e.kind())), e.detail()).ptr());
    }
  });

  // Fonts and rendering.
  py::class_<FontHandle>(m, "Font")
      .def_property_readonly("path", &FontHandle::path)
      .def_property_readonly("units_per_em", &FontHandle::units_per_em)
      .def_property_readonly("font_id", &FontHandle::font_id)
      .def_property_readonly("outline_format", &FontHandle::outline_format)
      .def("maps", [](const FontHandle& f, std::uint32_t cp) { return f.maps(static_cast<char32_t>(cp)); })
      .def("codepoints", [](const FontHandle& f) {
        return std::vector<std::uint32_t>(f.codepoint_set().begin(), f.codepoint_set().end());
      });
  m.def("open_font", &open_font, py::arg("path"), py::arg("face_index") = 0);
  m.def("shared_codepoints", [](const FontHandle& a, const FontHandle& b) {
    const auto cps = shared_codepoints(a, b);
    return std::vector<std::uint32_t>(cps.begin(), cps.end());
  });
  m.def(
      "rasterize",
      [](const FontHandle& f, std::uint32_t cp, int canvas) {
        return to_array(rasterize(f, static_cast<char32_t>(cp), RenderConfig::for_canvas(canvas)).pixels);
      },
      py::arg("font"), py::arg("codepoint"), py::arg("canvas") = 256, "Glyph image in [-1, 1], shape (canvas, canvas, 3)");
  m.def(
      "render_corpus",
      [](const FontHandle& src, const FontHandle& tgt, const std::vector<std::uint32_t>& cps, int canvas,
         const fs::path& out_dir) {
        return render_corpus(src, tgt, std::vector<char32_t>(cps.begin(), cps.end()), RenderConfig::for_canvas(canvas),
                             out_dir);
      },
      py::arg("src"), py::arg("tgt"), py::arg("codepoints"), py::arg("canvas"), py::arg("out_dir"));
  m.def(
      "sample_codepoints",
      [](const std::vector<std::uint32_t>& pool, std::size_t n, std::uint64_t seed) {
        const auto s = sample_codepoints(std::vector<char32_t>(pool.begin(), pool.end()), n, seed);
        return std::vector<std::uint32_t>(s.begin(), s.end());
      },
      py::arg("pool"), py::arg("n"), py::arg("seed"));

  // Pairing.
  m.def("round_half_even", &round_half_even);
  m.def(
      "build_pairs",
      [](const fs::path& corpus_manifest, const std::vector<std::uint32_t>& cps, const std::string& policy,
         std::uint64_t seed, double overlap_ratio, const std::vector<std::uint32_t>& exclude) {
        PairPolicy p;
        p.kind = parse_pair_kind(policy);
        p.seed = seed;
        p.overlap_ratio = overlap_ratio;
        const PairManifest pm = build_pairs(std::vector<char32_t>(cps.begin(), cps.end()), p,
                                            read_corpus_manifest(corpus_manifest),
                                            std::set<char32_t>(exclude.begin(), exclude.end()));
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        for (const auto& r : pm.pairs) out.emplace_back(r.src_cp, r.tgt_cp);
        return out;
      },
      py::arg("corpus_manifest"), py::arg("codepoints"), py::arg("policy"), py::arg("seed") = 0,
      py::arg("overlap_ratio") = 1.0, py::arg("exclude") = std::vector<std::uint32_t>{},
      "List of (source, target) codepoint pairs");
  m.def("measure_overlap", [](const fs::path& pair_manifest) { return measure_overlap(read_pair_manifest(pair_manifest)); });

  // Architecture.
  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_static("full", &ModelSpec::full)
      .def_static("micro", &ModelSpec::micro, py::arg("canvas") = 32, py::arg("base_channels") = 4)
      .def_readwrite("canvas", &ModelSpec::canvas)
      .def_readwrite("base_channels", &ModelSpec::base_channels)
      .def_readwrite("style_embed_dim", &ModelSpec::style_embed_dim)
      .def_readwrite("num_styles", &ModelSpec::num_styles)
      .def("stages", &ModelSpec::stages)
      .def("to_json", [](const ModelSpec& s) { return s.to_json().dump(); })
      .def("__eq__", [](const ModelSpec& a, const ModelSpec& b) { return a == b; });
  m.def(
      "planned_shapes",
      [](const ModelSpec& spec, std::int64_t batch) {
        std::vector<std::tuple<std::string, Shape, Shape>> out;
        for (const auto& r : planned_shapes(spec, batch)) out.emplace_back(r.layer, r.input, r.output);
        return out;
      },
      py::arg("spec"), py::arg("batch"), "List of (layer, input shape, output shape)");
  m.def("generator_parameter_count", &generator_parameter_count);
  m.def("discriminator_parameter_count", &discriminator_parameter_count);

  // Losses on plain arrays.
  m.def("gan_losses", [](const Array& real_t, const Array& gen_s, const Array& gen_t) {
    const auto g = losses::gan_losses(Var(to_tensor(real_t)), Var(to_tensor(gen_s)), Var(to_tensor(gen_t)));
    return py::make_tuple(scalar(g.d), scalar(g.g));
  });
  m.def("const_loss", [](const Array& a, const Array& b) {
    return scalar(losses::const_loss(Var(to_tensor(a)), Var(to_tensor(b))));
  });
  m.def("tid_loss", [](const Array& a, const Array& b) {
    return scalar(losses::tid_loss(Var(to_tensor(a)), Var(to_tensor(b))));
  });
  m.def("tv_loss", [](const Array& a) { return scalar(losses::tv_loss(Var(to_tensor(a)))); });
  m.def("pixel_l2", [](const Array& a, const Array& b) {
    return scalar(losses::pixel_l2(Var(to_tensor(a)), Var(to_tensor(b))));
  });

  // Training and evaluation. Configs cross the boundary as JSON text.
  m.def(
      "micro_config", [](int canvas, int base) { return TrainConfig::micro(canvas, base).to_json().dump(); },
      py::arg("canvas") = 32, py::arg("base_channels") = 4);
  m.def("config_hash", [](const std::string& config) {
    return TrainConfig::from_json(nlohmann::json::parse(config)).config_hash();
  });
  m.def(
      "fit",
      [](const std::string& config, const fs::path& pair_manifest, int epochs, std::optional<fs::path> out_dir,
         std::int64_t stop_after_step) {
        FitOptions opt;
        if (out_dir) opt.out_dir = *out_dir;
        opt.stop_after_step = stop_after_step;
        TrainConfig c = TrainConfig::from_json(nlohmann::json::parse(config));
        c.epochs = epochs;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(c, read_pair_manifest(pair_manifest), opt);
        }
        py::list log;
        for (const auto& rep : r.log) log.append(report_dict(rep));
        return py::make_tuple(py::bytes(serialize_checkpoint(r.final_checkpoint)), log);
      },
      py::arg("config"), py::arg("pair_manifest"), py::arg("epochs"), py::arg("out_dir") = std::nullopt,
      py::arg("stop_after_step") = -1, "Returns (checkpoint bytes, list of per-step loss dicts)");
  m.def(
      "generate",
      [](const fs::path& checkpoint, const Array& images, const std::string& phase, std::uint64_t seed) {
        Generator g = load_generator(load_checkpoint(checkpoint));
        EvalOptions opt;
        opt.seed = seed;
        return to_array(run_generator(g, to_tensor(images), parse_phase(phase), opt));
      },
      py::arg("checkpoint"), py::arg("images"), py::arg("phase") = "infer", py::arg("seed") = 0);
  m.def(
      "evaluate",
      [](const fs::path& checkpoint, const fs::path& pair_manifest, const std::string& phase) {
        const EvalReport r = evaluate(load_checkpoint(checkpoint), read_pair_manifest(pair_manifest), parse_phase(phase));
        return py::make_tuple(r.mean_l2, r.n);
      },
      py::arg("checkpoint"), py::arg("pair_manifest"), py::arg("phase") = "infer", "Returns (mean pixel L2, n)");
  m.def("checkpoint_tensor_names", [](const fs::path& checkpoint) {
    std::vector<std::string> names;
    for (const auto& [name, t] : load_checkpoint(checkpoint).tensors) names.push_back(name);
    return names;
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line interface; returns (exit code, stdout, stderr)");
}
