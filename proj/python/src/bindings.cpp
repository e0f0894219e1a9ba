#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tep/cli.hpp"
#include "tep/errors.hpp"
#include "tep/fusion.hpp"
#include "tep/geometry.hpp"
#include "tep/metrics.hpp"
#include "tep/protocol.hpp"
#include "tep/simulator.hpp"

namespace py = pybind11;
using namespace tep;

namespace {

py::dict scores_dict(const Scores& s) {
  py::dict d;
  d["jf_dot"] = s.jf_dot;
  d["j"] = s.j;
  d["f_dot"] = s.f_dot;
  d["jf_disappear"] = s.jf_disappear ? py::cast(*s.jf_disappear) : py::none();
  d["jf_reappear"] = s.jf_reappear ? py::cast(*s.jf_reappear) : py::none();
  d["f"] = s.f;
  d["jf"] = s.jf;
  return d;
}

std::vector<std::uint8_t> to_grid(const Mask& m) { return m.to_grid(); }

}  // namespace

PYBIND11_MODULE(_tep, m) {
  m.doc() = "Bindings for the tep segmentation pipeline core";

  // Messages start with the error kind, e.g. "UnknownSuite: ...".
  py::register_exception<Error>(m, "TepError", PyExc_RuntimeError);

  py::class_<BBox>(m, "BBox")
      .def(py::init<int, int, int, int>(), py::arg("x0"), py::arg("y0"), py::arg("x1"), py::arg("y1"))
      .def_property_readonly("x0", &BBox::x0)
      .def_property_readonly("y0", &BBox::y0)
      .def_property_readonly("x1", &BBox::x1)
      .def_property_readonly("y1", &BBox::y1)
      .def("area", &BBox::area)
      .def("__eq__", [](const BBox& a, const BBox& b) { return a == b; })
      .def("__repr__", [](const BBox& b) {
        return "BBox(" + std::to_string(b.x0()) + ", " + std::to_string(b.y0()) + ", " +
               std::to_string(b.x1()) + ", " + std::to_string(b.y1()) + ")";
      });

  py::class_<Mask>(m, "Mask")
      .def_static("parse", &Mask::parse)
      .def_static("empty", [](int w, int h) { return Mask::empty({w, h}); })
      .def_static("from_grid",
                  [](int w, int h, const std::vector<std::uint8_t>& g) { return Mask::from_grid({w, h}, g); })
      .def_static("from_bbox", [](int w, int h, const BBox& b) { return Mask::from_bbox({w, h}, b); })
      .def_property_readonly("width", [](const Mask& mk) { return mk.dims().width; })
      .def_property_readonly("height", [](const Mask& mk) { return mk.dims().height; })
      .def("is_empty", &Mask::is_empty)
      .def("area", [](const Mask& mk) { return mask_area(mk); })
      .def("bbox", [](const Mask& mk) { return mask_to_bbox(mk); })
      .def("to_grid", &to_grid)
      .def("__str__", &Mask::to_string)
      .def("__eq__", [](const Mask& a, const Mask& b) { return a == b; });

  m.def("mask_iou", &mask_iou);
  m.def("bbox_iou", &bbox_iou);
  m.def("boundary_f", &boundary_f, py::arg("pred"), py::arg("gt"), py::arg("tolerance"));
  m.def("classify_phases", [](const std::vector<bool>& present) {
    std::vector<std::string> out;
    for (const FrameStatus& s : classify_phases(present)) out.emplace_back(to_string(s.phase));
    return out;
  });
  m.def(
      "evaluate",
      [](const std::map<std::string, std::vector<Mask>>& pred, const std::map<std::string, std::vector<Mask>>& gt,
         int f_dot_tolerance) {
        const EvalReport r = evaluate(pred, gt, EvalConfig{f_dot_tolerance, {}});
        py::dict per_object;
        for (const auto& o : r.per_object) per_object[py::str(o.object_id)] = scores_dict(o.scores);
        py::dict d;
        d["overall"] = scores_dict(r.overall);
        d["per_object"] = per_object;
        return d;
      },
      py::arg("pred"), py::arg("gt"), py::arg("f_dot_tolerance") = 1);

  m.def("fuse_tiny", [](const Mask& sam, std::optional<BBox> box, double confidence, double iou_threshold,
                        double confidence_threshold) {
    FusionConfig cfg;
    cfg.iou_threshold = iou_threshold;
    cfg.confidence_threshold = confidence_threshold;
    cfg.validate();
    const FusionDecision d = fuse_tiny(sam, TrackOutput{box, confidence}, cfg);
    py::dict out;
    out["action"] = std::string(to_string(d.action));
    out["reason"] = std::string(to_string(d.reason));
    out["bbox"] = d.chosen_bbox ? py::cast(*d.chosen_bbox) : py::none();
    out["iou"] = d.iou_observed ? py::cast(*d.iou_observed) : py::none();
    return out;
  }, py::arg("sam_mask"), py::arg("bbox"), py::arg("confidence"), py::arg("iou_threshold") = 0.5,
     py::arg("confidence_threshold") = 0.5);

  m.def("suite_names", [] {
    std::vector<std::string> out;
    for (auto n : suite_names()) out.emplace_back(n);
    return out;
  });
  m.def("simulate", [](const std::string& suite, std::uint64_t seed, const std::string& out) {
    return cli::simulate(suite, seed, out).string();
  });
  m.def("cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "tep");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    py::gil_scoped_release release;
    return cli::main(static_cast<int>(argv.size()), argv.data());
  }, "Runs the command-line entry point and returns its exit code.");

  m.attr("PROTOCOL_VERSION") = protocol::kProtocolVersion;
  m.def("wire_methods", [] {
    std::vector<std::string> out;
    for (auto meth : protocol::all_methods()) out.emplace_back(protocol::to_string(meth));
    return out;
  });
}
