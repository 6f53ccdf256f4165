#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "clickmask/engines.hpp"
#include "clickmask/geometry.hpp"
#include "clickmask/io.hpp"
#include "clickmask/sequence.hpp"
#include "clickmask/simclick.hpp"

namespace py = pybind11;
using namespace clickmask;

namespace {

// (H, W) or (H, W, C) uint8/uint16 array -> RasterImage.
RasterImage to_image(const py::array& arr) {
    if (arr.ndim() != 2 && arr.ndim() != 3) throw Error(ErrorCode::InvalidArgument, "image must be (H, W) or (H, W, C)");
    const int h = static_cast<int>(arr.shape(0)), w = static_cast<int>(arr.shape(1));
    const int c = arr.ndim() == 3 ? static_cast<int>(arr.shape(2)) : 1;
    std::vector<std::uint16_t> samples;
    int depth = 8;
    if (py::isinstance<py::array_t<std::uint8_t>>(arr)) {
        const auto a = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(arr);
        samples.assign(a.data(), a.data() + a.size());
    } else if (py::isinstance<py::array_t<std::uint16_t>>(arr)) {
        const auto a = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>::ensure(arr);
        samples.assign(a.data(), a.data() + a.size());
        depth = 16;
    } else {
        throw Error(ErrorCode::InvalidArgument, "image dtype must be uint8 or uint16");
    }
    return RasterImage(w, h, c, depth, std::move(samples));
}

py::array from_image(const RasterImage& img) {
    std::vector<py::ssize_t> shape{img.height(), img.width()};
    if (img.channels() > 1) shape.push_back(img.channels());
    if (img.bit_depth() == 16) {
        py::array_t<std::uint16_t> out(shape);
        std::copy(img.samples().begin(), img.samples().end(), out.mutable_data());
        return out;
    }
    py::array_t<std::uint8_t> out(shape);
    std::copy(img.samples().begin(), img.samples().end(), out.mutable_data());
    return out;
}

LabelMask to_mask(const py::array& arr) {
    if (arr.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "mask must be 2-D");
    const auto a = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>::ensure(arr);
    return LabelMask(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                     std::vector<std::uint16_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint16_t> from_mask(const LabelMask& m) {
    py::array_t<std::uint16_t> out({m.height(), m.width()});
    std::copy(m.labels().begin(), m.labels().end(), out.mutable_data());
    return out;
}

py::array_t<double> plane(std::span<const double> values, int w, int h) {
    py::array_t<double> out({h, w});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

ClickSet to_clicks(const std::vector<std::tuple<int, int, bool>>& clicks) {
    ClickSet set;
    for (const auto& [x, y, positive] : clicks) set.add(x, y, positive ? Polarity::Positive : Polarity::Negative);
    return set;
}

EngineParams engine_params(const std::string& engine, int seed_radius, double lambda, double beta,
                           double edge_prior_weight) {
    EngineParams p;
    const auto id = parse_engine_id(engine);
    if (!id) throw Error(ErrorCode::InvalidArgument, "unknown engine '" + engine + "'");
    p.engine_id = *id;
    p.seed_radius = seed_radius;
    p.lambda = lambda;
    p.beta = beta;
    p.edge_prior_weight = edge_prior_weight;
    p.validate();
    return p;
}

py::dict polygon_dict(const Polygon& p) {
    py::list vertices;
    for (const auto& v : p.vertices) vertices.append(py::make_tuple(v.x, v.y));
    py::dict d;
    d["vertices"] = vertices;
    d["category_id"] = p.category_id;
    d["hole"] = p.hole;
    return d;
}

Polygon polygon_from(const py::dict& d) {
    Polygon p;
    for (const auto& v : d["vertices"]) {
        const auto xy = v.cast<std::pair<double, double>>();
        p.vertices.push_back({xy.first, xy.second});
    }
    if (d.contains("category_id")) p.category_id = d["category_id"].cast<int>();
    if (d.contains("hole")) p.hole = d["hole"].cast<bool>();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Interactive click-based segmentation core";
    py::register_exception<Error>(m, "ClickmaskError", PyExc_RuntimeError);

    m.def("engines", &engine_id_names, "Valid engine ids.");

    m.def(
        "segment",
        [](const py::array& image, const std::vector<std::tuple<int, int, bool>>& clicks, const std::string& engine,
           std::optional<py::array_t<double>> prior, int seed_radius, double lambda, double beta, double edge_prior_weight) {
            const RasterImage img = to_image(image);
            const EngineParams p = engine_params(engine, seed_radius, lambda, beta, edge_prior_weight);
            EdgeMap edge(img.width(), img.height());
            if (prior) {
                const auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(*prior);
                if (a.ndim() != 2 || a.shape(0) != img.height() || a.shape(1) != img.width())
                    throw Error(ErrorCode::DimensionMismatch, "prior must match the image size");
                edge = EdgeMap(img.width(), img.height(), std::vector<double>(a.data(), a.data() + a.size()));
            }
            EngineOutput out;
            {
                py::gil_scoped_release release;
                out = segment(p, img, to_clicks(clicks), edge);
            }
            return py::make_tuple(from_mask(out.mask), plane(out.confidence, img.width(), img.height()),
                                  plane(out.edge.values(), img.width(), img.height()));
        },
        py::arg("image"), py::arg("clicks"), py::arg("engine") = "graphcut", py::arg("prior") = py::none(),
        py::arg("seed_radius") = 5, py::arg("lambda_") = 50.0, py::arg("beta") = 90.0, py::arg("edge_prior_weight") = 0.3,
        "Segment from clicks [(x, y, positive), ...]. Returns (mask, confidence, edge prior).");

    m.def("iou", [](const py::array& a, const py::array& b) { return iou(to_mask(a), to_mask(b)); });

    m.def("first_click", [](const py::array& gt) {
        const Click c = first_click(to_mask(gt));
        return py::make_tuple(c.x, c.y, c.positive());
    });
    m.def("next_click", [](const py::array& pred, const py::array& gt) {
        const Click c = next_click(to_mask(pred), to_mask(gt));
        return py::make_tuple(c.x, c.y, c.positive());
    });

    m.def(
        "run_session",
        [](const py::array& image, const py::array& gt, const std::string& engine, int max_clicks,
           const std::vector<double>& thresholds, int seed_radius) {
            const EngineParams p = engine_params(engine, seed_radius, 50.0, 90.0, 0.3);
            ProtocolParams protocol;
            protocol.max_clicks = max_clicks;
            protocol.thresholds = thresholds;
            const RasterImage img = to_image(image);
            const LabelMask mask = to_mask(gt);
            SessionTrace t;
            {
                py::gil_scoped_release release;
                t = run_session(p, img, mask, protocol);
            }
            py::dict d;
            d["iou"] = t.iou_after_click;
            d["noc"] = t.noc;
            d["reached"] = t.reached;
            py::list clicks;
            for (const auto& c : t.clicks.clicks()) clicks.append(py::make_tuple(c.x, c.y, c.positive()));
            d["clicks"] = clicks;
            return d;
        },
        py::arg("image"), py::arg("gt"), py::arg("engine") = "graphcut", py::arg("max_clicks") = 20,
        py::arg("thresholds") = std::vector<double>{0.85, 0.90}, py::arg("seed_radius") = 5,
        "Simulated-click session against a ground-truth mask.");

    m.def(
        "extract_polygons",
        [](const py::array& mask, double epsilon, int category_id) {
            py::list out;
            for (const auto& p : extract_polygons(to_mask(mask), epsilon, category_id)) out.append(polygon_dict(p));
            return out;
        },
        py::arg("mask"), py::arg("epsilon") = kDefaultEpsilon, py::arg("category_id") = 1);
    m.def("rasterize", [](const std::vector<py::dict>& polygons, int width, int height) {
        std::vector<Polygon> polys;
        for (const auto& d : polygons) polys.push_back(polygon_from(d));
        return from_mask(rasterize(polys, width, height));
    });

    m.def("load_image", [](const std::filesystem::path& p) { return from_image(load_image(p)); });
    m.def("save_png", [](const py::array& image, const std::filesystem::path& p) { save_png(to_image(image), p); });
    m.def("read_mask", [](const std::filesystem::path& p) { return from_mask(read_mask(p)); });
    m.def(
        "write_mask",
        [](const py::array& mask, const std::filesystem::path& p, bool pseudocolor) {
            write_mask(to_mask(mask), pseudocolor ? MaskMode::Pseudocolor : MaskMode::Grayscale, p);
        },
        py::arg("mask"), py::arg("path"), py::arg("pseudocolor") = false);
    m.def("apply_window", [](const py::array& image, double level, double width) {
        return from_image(apply_window(to_image(image), level, width));
    });
    m.def("grid_layout", [](int width, int height, int patch_size, int overlap) {
        const GridLayout g = grid_layout(width, height, patch_size, overlap);
        py::list patches;
        for (const auto& p : g.patches) patches.append(py::make_tuple(p.x, p.y, p.width, p.height));
        return patches;
    }, py::arg("width"), py::arg("height"), py::arg("patch_size") = 1024, py::arg("overlap") = 128);

    m.def(
        "propagate",
        [](const std::vector<py::array>& frames, const std::map<int, py::array>& references, int grid_stride,
           double tau, bool refine) {
            FrameSequence seq;
            for (const auto& f : frames) seq.frames.push_back(to_image(f));
            ReferenceSet refs;
            for (const auto& [k, mask] : references) refs[k] = to_mask(mask);
            PropagationParams p;
            p.grid_stride = grid_stride;
            p.tau = tau;
            p.refine_with_graphcut = refine;
            std::vector<FusedFrame> out;
            {
                py::gil_scoped_release release;
                out = propagate(seq, refs, p);
            }
            py::list masks;
            for (const auto& f : out) masks.append(from_mask(f.mask));
            return masks;
        },
        py::arg("frames"), py::arg("references"), py::arg("grid_stride") = 4, py::arg("tau") = 10.0,
        py::arg("refine") = true, "Propagate reference masks {frame: mask} through the frames.");
}
