#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "goldspot/dataset.hpp"
#include "goldspot/error.hpp"
#include "goldspot/eval.hpp"
#include "goldspot/image.hpp"
#include "goldspot/logdetect.hpp"
#include "goldspot/sda.hpp"
#include "goldspot/synth.hpp"
#include "goldspot/transfer.hpp"

namespace py = pybind11;
namespace gs = goldspot;

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

namespace {

gs::GrayImage to_image(const Array& a) {
    if (a.ndim() != 2) throw gs::DimensionError("image must be a 2-D array (height, width)");
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    return gs::GrayImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(std::size_t w, std::size_t h, std::span<const double> values) {
    Array out({h, w});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Array to_array(const gs::GrayImage& img) { return to_array(img.width(), img.height(), img.data()); }

// Rows of (x, y, ...) as annotations; extra columns are ignored.
std::vector<gs::Annotation> to_annotations(const Array& a) {
    if (a.size() == 0) return {};
    if (a.ndim() != 2 || a.shape(1) < 2) throw gs::DimensionError("points must be an (n, 2) array");
    std::vector<gs::Annotation> out(static_cast<std::size_t>(a.shape(0)));
    const auto cols = a.shape(1);
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        out[i].x = a.data()[i * cols];
        out[i].y = a.data()[i * cols + 1];
    }
    return out;
}

Array points_array(const std::vector<gs::Annotation>& anns) {
    Array out({anns.size(), std::size_t{2}});
    double* p = out.mutable_data();
    for (const auto& a : anns) {
        *p++ = a.x;
        *p++ = a.y;
    }
    return out;
}

std::vector<gs::Patch> to_patches(const Array& a, const std::optional<IntArray>& labels) {
    if (a.ndim() != 3 || a.shape(1) != a.shape(2))
        throw gs::DimensionError("patches must be an (n, side, side) array");
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto side = static_cast<std::size_t>(a.shape(1));
    if (labels && static_cast<std::size_t>(labels->size()) != n)
        throw gs::DimensionError("label count does not match patch count");
    std::vector<gs::Patch> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].side = side;
        out[i].values.assign(a.data() + i * side * side, a.data() + (i + 1) * side * side);
        if (labels) {
            const int l = labels->data()[i];
            if (l != 0 && l != 1) throw gs::InvalidArgument("labels must be 0 or 1");
            out[i].label = static_cast<gs::Label>(l);
        }
    }
    return out;
}

gs::TrainConfig train_config(double lr, std::size_t epochs, std::size_t batch, std::uint64_t seed) {
    gs::TrainConfig c;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.batch_size = batch;
    c.seed = seed;
    return c;
}

}  // namespace

PYBIND11_MODULE(_goldspot, m) {
    m.doc() = "LoG particle detection with a stacked denoising autoencoder filter";

    static py::exception<gs::Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception<gs::IoError>(m, "IoError", error);
    py::register_exception<gs::FormatError>(m, "FormatError", error);
    py::register_exception<gs::DimensionError>(m, "DimensionError", error);
    py::register_exception<gs::InvalidArgument>(m, "InvalidArgument", error);

    m.def("load_image", [](const std::filesystem::path& p) { return to_array(gs::load_image(p)); }, py::arg("path"),
          "Read a binary PGM as a float (height, width) array on the 0..255 scale.");
    m.def("save_image", [](const Array& img, const std::filesystem::path& p) { gs::save_image(to_image(img), p); },
          py::arg("image"), py::arg("path"));
    m.def("downscale_half", [](const Array& img) { return to_array(gs::downscale_half(to_image(img))); },
          py::arg("image"));

    m.def(
        "synth",
        [](std::size_t width, std::size_t height, std::size_t particles, double radius, double particle_intensity,
           double background_intensity, double noise, std::size_t distractors, std::optional<double> min_separation,
           std::uint64_t seed) {
            gs::SynthSpec spec;
            spec.width = width;
            spec.height = height;
            spec.n_particles = particles;
            spec.particle_radius = radius;
            spec.particle_intensity = particle_intensity;
            spec.background_intensity = background_intensity;
            spec.noise_sigma = noise;
            spec.n_distractors = distractors;
            spec.min_separation = min_separation;
            spec.seed = seed;
            const gs::SynthImage s = gs::generate(spec);
            return py::make_tuple(to_array(s.image), points_array(s.annotations));
        },
        py::arg("width") = 512, py::arg("height") = 512, py::arg("particles") = 50, py::arg("radius") = 4.0,
        py::arg("particle_intensity") = 30.0, py::arg("background_intensity") = 180.0, py::arg("noise") = 10.0,
        py::arg("distractors") = 0, py::arg("min_separation") = py::none(), py::arg("seed") = 0,
        "Synthetic micrograph. Returns (image, centers) with centers an (n, 2) array of x, y.");

    m.def(
        "log_response",
        [](const Array& img, double t) {
            const gs::Plane r = gs::log_response(to_image(img), t);
            return to_array(r.width, r.height, r.values);
        },
        py::arg("image"), py::arg("t"));

    m.def(
        "detect",
        [](const Array& img, double radius, double delta, double threshold) {
            const gs::GrayImage image = to_image(img);
            std::vector<gs::Detection> dets;
            {
                py::gil_scoped_release release;
                dets = gs::detect(image, gs::build_bank(radius, delta), threshold);
            }
            Array out({dets.size(), std::size_t{4}});
            double* p = out.mutable_data();
            for (const auto& d : dets) {
                *p++ = d.x;
                *p++ = d.y;
                *p++ = d.radius;
                *p++ = d.response;
            }
            return out;
        },
        py::arg("image"), py::arg("radius") = 4.0, py::arg("delta") = 1.0, py::arg("threshold") = 10.0,
        "LoG candidates as an (n, 4) array of x, y, radius, response.");

    m.def(
        "extract_patches",
        [](const Array& img, const Array& centers, std::size_t side) {
            const gs::GrayImage image = to_image(img);
            const auto pts = to_annotations(centers);
            Array out({pts.size(), side, side});
            double* p = out.mutable_data();
            for (const auto& c : pts) {
                const gs::Patch patch = gs::extract_patch(image, c.x, c.y, side);
                p = std::copy(patch.values.begin(), patch.values.end(), p);
            }
            return out;
        },
        py::arg("image"), py::arg("centers"), py::arg("side") = 20,
        "Patches around (x, y) centers, scaled to [0, 1], shape (n, side, side).");

    m.def(
        "label_patches",
        [](const Array& centers, const Array& annotations, double radius) {
            const auto pts = to_annotations(centers);
            const auto truth = to_annotations(annotations);
            IntArray out(static_cast<py::ssize_t>(pts.size()));
            for (std::size_t i = 0; i < pts.size(); ++i)
                out.mutable_data()[i] = static_cast<int>(gs::label_patch(pts[i].x, pts[i].y, truth, radius));
            return out;
        },
        py::arg("centers"), py::arg("annotations"), py::arg("radius") = 20.0,
        "1 where an annotation lies strictly closer than radius, else 0.");

    py::class_<gs::SdaModel>(m, "Model")
        .def_static(
            "initialize",
            [](std::size_t patch_side, const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
                return gs::SdaModel::initialize(patch_side, layer_sizes, seed);
            },
            py::arg("patch_side"), py::arg("layer_sizes"), py::arg("seed") = 0)
        .def_static("load", &gs::load_model, py::arg("path"))
        .def_static("from_json", &gs::model_from_json, py::arg("text"))
        .def("save", [](const gs::SdaModel& self, const std::filesystem::path& p) { gs::save_model(self, p); },
             py::arg("path"))
        .def("to_json", [](const gs::SdaModel& self) { return gs::to_json(self); })
        .def_readonly("patch_side", &gs::SdaModel::patch_side)
        .def_property_readonly("layer_sizes", &gs::SdaModel::layer_sizes)
        .def_property_readonly("pretrain_loss",
                               [](const gs::SdaModel& self) { return self.metadata.history.pretrain_loss; })
        .def_property_readonly("finetune_loss",
                               [](const gs::SdaModel& self) { return self.metadata.history.finetune_loss; })
        .def(
            "predict",
            [](const gs::SdaModel& self, const Array& patches) {
                const auto ps = to_patches(patches, std::nullopt);
                std::vector<gs::Prediction> preds;
                {
                    py::gil_scoped_release release;
                    preds = gs::predict_batch(self, ps);
                }
                Array out(static_cast<py::ssize_t>(preds.size()));
                for (std::size_t i = 0; i < preds.size(); ++i) out.mutable_data()[i] = preds[i].p_particle;
                return out;
            },
            py::arg("patches"), "Particle probability for each (side, side) patch.")
        .def(
            "classify",
            [](const gs::SdaModel& self, const Array& patches) {
                const auto preds = gs::predict_batch(self, to_patches(patches, std::nullopt));
                IntArray out(static_cast<py::ssize_t>(preds.size()));
                for (std::size_t i = 0; i < preds.size(); ++i)
                    out.mutable_data()[i] = static_cast<int>(preds[i].label);
                return out;
            },
            py::arg("patches"), "1 for particle, 0 for background.")
        .def("same_parameters", &gs::SdaModel::same_parameters, py::arg("other"));

    m.def(
        "train",
        [](const Array& patches, const IntArray& labels, const std::vector<std::size_t>& layer_sizes,
           double corruption, double pretrain_lr, std::size_t pretrain_epochs, double finetune_lr,
           std::size_t finetune_epochs, std::size_t batch_size, std::uint64_t seed) {
            const auto ps = to_patches(patches, labels);
            py::gil_scoped_release release;
            return gs::train_sda(ps, train_config(pretrain_lr, pretrain_epochs, batch_size, seed),
                                 train_config(finetune_lr, finetune_epochs, batch_size, seed), {corruption, seed},
                                 layer_sizes);
        },
        py::arg("patches"), py::arg("labels"), py::arg("layer_sizes") = std::vector<std::size_t>{100, 100, 100},
        py::arg("corruption") = 0.1, py::arg("pretrain_lr") = 0.01, py::arg("pretrain_epochs") = 50,
        py::arg("finetune_lr") = 0.1, py::arg("finetune_epochs") = 100, py::arg("batch_size") = 100,
        py::arg("seed") = 0, "Pre-train and fine-tune an SDA on labeled patches.");

    m.def(
        "transfer",
        [](const gs::SdaModel& source, const Array& patches, const IntArray& labels, const std::string& setting,
           double lr, std::size_t epochs, std::size_t batch_size, std::uint64_t seed, bool freeze_output) {
            const auto ps = to_patches(patches, labels);
            const auto s = gs::TlSetting::parse(setting);
            py::gil_scoped_release release;
            return gs::transfer(source, ps, s, train_config(lr, epochs, batch_size, seed), {freeze_output});
        },
        py::arg("source"), py::arg("patches"), py::arg("labels"), py::arg("setting"), py::arg("lr") = 0.1,
        py::arg("epochs") = 100, py::arg("batch_size") = 100, py::arg("seed") = 0, py::arg("freeze_output") = false,
        "Fine-tune a copy of source; setting marks re-learned layers with 1, e.g. '011'.");

    m.def(
        "accuracy",
        [](const gs::SdaModel& model, const Array& patches, const IntArray& labels) {
            return gs::classification_accuracy(model, to_patches(patches, labels));
        },
        py::arg("model"), py::arg("patches"), py::arg("labels"));

    m.def(
        "match",
        [](const Array& detections, const Array& annotations, double radius) {
            const auto pts = to_annotations(detections);
            std::vector<gs::Detection> dets(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) dets[i] = {pts[i].x, pts[i].y, 0.0, 0.0};
            const gs::MatchResult r = gs::match_detections(dets, to_annotations(annotations), radius);
            py::list pairs;
            for (const auto& p : r.pairs) pairs.append(py::make_tuple(p.detection, p.annotation, p.distance));
            py::dict out;
            out["tp"] = r.tp;
            out["fp"] = r.fp;
            out["fn"] = r.fn;
            out["pairs"] = pairs;
            return out;
        },
        py::arg("detections"), py::arg("annotations"), py::arg("radius") = 4.0,
        "Greedy one-to-one matching by ascending distance. Returns tp, fp, fn and (det, ann, dist) pairs.");

    m.def(
        "precision_recall",
        [](std::size_t tp, std::size_t fp, std::size_t fn) {
            const auto pr = gs::precision_recall(tp, fp, fn);
            return py::make_tuple(pr.precision, pr.recall);
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"));
    m.def("f_measure", &gs::f_measure, py::arg("precision"), py::arg("recall"));
}
