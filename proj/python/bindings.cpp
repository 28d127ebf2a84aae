// Thin Python surface over the C++ core. Structured results cross as JSON
// text and are decoded in plancad/__init__.py.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "plancad/annotator.hpp"
#include "plancad/chunker.hpp"
#include "plancad/errors.hpp"
#include "plancad/ingest.hpp"
#include "plancad/jsonio.hpp"
#include "plancad/metrics.hpp"
#include "plancad/modelprep.hpp"
#include "plancad/screening.hpp"
#include "plancad/synthgen.hpp"

namespace py = pybind11;
using namespace plancad;
using jsonio::Json;

namespace {

screening::ReferenceTable table_of(const std::optional<std::string>& text) {
    return text ? screening::load_reference_table(*text) : screening::default_reference_table();
}

std::shared_ptr<const ingest::FlatDrawing> flat_of(const std::string& dxf) {
    return std::make_shared<const ingest::FlatDrawing>(ingest::flatten_blocks(ingest::parse_document(dxf)));
}

void raise_plancad(const std::string& kind, const char* message) {
    const py::object cls = py::module_::import("plancad.errors").attr("PlancadError");
    const py::object err = cls(kind, message);
    PyErr_SetObject(cls.ptr(), err.ptr());
}

std::string screen(const std::string& dxf, const std::optional<std::string>& table, double max_deviation,
                   const std::string& mode) {
    const auto report = screening::screen_drawing(table_of(table), *flat_of(dxf), max_deviation,
                                                  mode == "primitives" ? screening::DeviationMode::Primitives
                                                                       : screening::DeviationMode::Layers);
    return jsonio::screening_json(report).dump();
}

std::string annotate(const std::string& dxf, const std::optional<std::string>& table) {
    const auto ann = annotator::annotate(flat_of(dxf), table_of(table));
    Json j;
    j["instances"] = ann.instance_count();
    j["labels"] = jsonio::labels_json(ann);
    j["flags"] = jsonio::flags_json(ann.flags);
    return j.dump();
}

std::vector<std::string> chunk(const std::string& dxf, const std::string& drawing_id, double size_m,
                               const std::optional<std::string>& table) {
    const auto ann = annotator::annotate(flat_of(dxf), table_of(table));
    std::vector<std::string> out;
    for (const auto& c : chunker::chunk_drawing(ann, drawing_id, size_m)) out.push_back(chunker::export_chunk(c));
    return out;
}

std::string read_chunk(const std::string& markup) {
    const auto c = chunker::import_chunk(markup);
    Json j;
    j["id"] = c.id.str();
    j["origin"] = {c.origin.x, c.origin.y};
    j["sizeM"] = c.size_m;
    Json prims = Json::array();
    for (const auto& p : c.primitives) {
        Json e;
        e["sourceId"] = p.source_id();
        e["class"] = c.catalog.name(p.label.cls);
        e["instance"] = p.label.instance;
        e["length"] = geometry::primitive_length(p.primitive);
        if (p.score) e["score"] = *p.score;
        prims.push_back(std::move(e));
    }
    j["primitives"] = std::move(prims);
    return j.dump();
}

std::string evaluate(const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& weight,
                     double default_score) {
    std::vector<metrics::EvalUnit> units;
    std::optional<screening::ClassCatalog> catalog;
    for (const auto& [pred_text, gt_text] : pairs) {
        const auto pred = chunker::import_chunk(pred_text);
        const auto gt = chunker::import_chunk(gt_text);
        if (!(pred.catalog == gt.catalog) || (catalog && !(*catalog == gt.catalog))) {
            throw CoverageError("chunks disagree on the class catalog");
        }
        catalog = gt.catalog;
        metrics::EvalUnit u;
        u.name = gt.id.str();
        for (const auto& p : gt.primitives) {
            u.gt[p.source_id()] = p.label;
            u.lengths[p.source_id()] = geometry::primitive_length(p.primitive);
        }
        for (const auto& p : pred.primitives) {
            u.pred[p.source_id()] = p.label;
            if (p.score) u.scores[p.source_id()] = *p.score;
        }
        units.push_back(std::move(u));
    }
    const auto& cat = catalog ? *catalog : screening::default_reference_table().catalog;
    const auto report = metrics::evaluate(
        units, cat, weight == "count" ? metrics::Weighting::Count : metrics::Weighting::Length, default_score);
    return metrics::report_to_json(report, cat);
}

std::pair<std::string, std::string> generate(std::uint64_t seed, const std::optional<std::string>& spec_json,
                                             double perturb, std::uint64_t perturb_seed) {
    auto spec = spec_json ? synthgen::spec_from_json(*spec_json) : synthgen::GenSpec{};
    spec.seed = seed;
    const auto gen = synthgen::generate_drawing(spec);
    const auto& cat = screening::default_reference_table().catalog;
    const auto truth = perturb > 0.0 ? synthgen::perturb_labels(gen.truth, perturb, perturb_seed, cat) : gen.truth;
    Json labels = Json::object();
    for (const auto& [id, l] : truth.labels) labels[id] = {cat.name(l.cls), l.instance};
    return {ingest::serialize_document(gen.document), labels.dump()};
}

std::vector<std::string> truth_chunks(std::uint64_t seed, const std::optional<std::string>& spec_json,
                                      double size_m, double perturb, std::uint64_t perturb_seed) {
    auto spec = spec_json ? synthgen::spec_from_json(*spec_json) : synthgen::GenSpec{};
    spec.seed = seed;
    const auto gen = synthgen::generate_drawing(spec);
    const auto& cat = screening::default_reference_table().catalog;
    const auto truth = perturb > 0.0 ? synthgen::perturb_labels(gen.truth, perturb, perturb_seed, cat) : gen.truth;
    const auto ann = synthgen::with_labels(
        std::make_shared<const ingest::FlatDrawing>(ingest::flatten_blocks(gen.document)), cat, truth.labels);
    std::vector<std::string> out;
    for (const auto& c : chunker::chunk_drawing(ann, "synth-" + std::to_string(seed), size_m)) {
        out.push_back(chunker::export_chunk(c));
    }
    return out;
}

py::array_t<float> render(const std::string& markup, int width, int height, double stroke) {
    const auto grid = chunker::render_chunk(chunker::import_chunk(markup), width, height, stroke);
    py::array_t<float> out({grid.height, grid.width});
    auto view = out.mutable_unchecked<2>();
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c) view(r, c) = grid.at(c, r);
    return out;
}

Eigen::MatrixXd sample(const py::array_t<double, py::array::c_style | py::array::forcecast>& grid, double size_m,
                       const std::vector<std::pair<double, double>>& points) {
    if (grid.ndim() != 3) throw ShapeError("grid must be H x W x C");
    modelprep::FeatureGrid g(static_cast<int>(grid.shape(0)), static_cast<int>(grid.shape(1)),
                             static_cast<int>(grid.shape(2)), size_m);
    std::copy(grid.data(), grid.data() + grid.size(), g.values.begin());
    std::vector<geometry::Vec2> pts;
    for (const auto& [x, y] : points) pts.push_back({x, y});
    return modelprep::sample_features(g, pts);
}

py::tuple fuse(const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2, const Eigen::MatrixXd& w3,
               const Eigen::VectorXd& x, const Eigen::VectorXd& v, bool per_channel) {
    modelprep::FusionParams p{w1, w2, w3, per_channel ? modelprep::GateMode::PerChannel : modelprep::GateMode::Scalar};
    const auto r = modelprep::adaptive_fuse_full(p, x, v);
    return py::make_tuple(r.u, r.gate);
}

}  // namespace

PYBIND11_MODULE(_plancad, m) {
    m.doc() = "plancad core";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const FormatError& e) {
            raise_plancad(std::string("FormatError.") + to_string(e.format_kind()), e.what());
        } catch (const Error& e) {
            raise_plancad(e.kind(), e.what());
        }
    });

    m.def("screen", &screen, py::arg("dxf"), py::arg("table") = std::nullopt,
          py::arg("max_deviation") = screening::kDefaultMaxDeviation, py::arg("mode") = "layers");
    m.def("annotate", &annotate, py::arg("dxf"), py::arg("table") = std::nullopt);
    m.def("chunk", &chunk, py::arg("dxf"), py::arg("drawing_id"), py::arg("size_m") = chunker::kDefaultChunkSizeM,
          py::arg("table") = std::nullopt);
    m.def("read_chunk", &read_chunk, py::arg("markup"));
    m.def("evaluate", &evaluate, py::arg("pairs"), py::arg("weight") = "length", py::arg("default_score") = 1.0);
    m.def("generate", &generate, py::arg("seed"), py::arg("spec") = std::nullopt, py::arg("perturb") = 0.0,
          py::arg("perturb_seed") = 0);
    m.def("truth_chunks", &truth_chunks, py::arg("seed"), py::arg("spec") = std::nullopt,
          py::arg("size_m") = chunker::kDefaultChunkSizeM, py::arg("perturb") = 0.0, py::arg("perturb_seed") = 0);
    m.def("render", &render, py::arg("markup"), py::arg("width") = chunker::kDefaultRenderSize,
          py::arg("height") = chunker::kDefaultRenderSize, py::arg("stroke") = 1.0);
    m.def("sample_features", &sample, py::arg("grid"), py::arg("size_m"), py::arg("points"));
    m.def("adaptive_fuse", &fuse, py::arg("w1"), py::arg("w2"), py::arg("w3"), py::arg("x"), py::arg("v"),
          py::arg("per_channel") = false);
}
