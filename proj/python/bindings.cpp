#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "illumflow/convert.hpp"
#include "illumflow/denoise.hpp"
#include "illumflow/flow.hpp"
#include "illumflow/fusion.hpp"
#include "illumflow/integrate.hpp"
#include "illumflow/metrics.hpp"
#include "illumflow/retinex.hpp"
#include "illumflow/synth.hpp"

namespace py = pybind11;
using namespace illumflow;

namespace {

Image image_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    auto buf = arr.request();
    int channels = 1;
    if (buf.ndim == 3)
        channels = static_cast<int>(buf.shape[2]);
    else if (buf.ndim != 2)
        throw std::invalid_argument("expected a HxW or HxWxC array");
    Image img(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]), channels);
    const double* p = static_cast<const double*>(buf.ptr);
    std::copy(p, p + img.size(), img.data.begin());
    return img;
}

py::array image_to_array(const Image& img) {
    if (img.channels == 1) {
        py::array_t<double> arr({img.height, img.width});
        std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
        return arr;
    }
    py::array_t<double> arr({img.height, img.width, img.channels});
    std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
    return arr;
}

FlowDataset dataset_from_list(const std::vector<std::pair<py::array, py::array>>& pairs) {
    FlowDataset ds;
    for (const auto& [x, y] : pairs)
        ds.pairs.emplace_back(image_from_array(x), image_from_array(y));
    return ds;
}

CrfiTrainConfig make_config(int batch_size, int iterations, double lr, int d_levels,
                            uint64_t seed, int patch_size, int workers) {
    CrfiTrainConfig cfg;
    cfg.batch_size = batch_size;
    cfg.iterations = iterations;
    cfg.lr = lr;
    cfg.d_levels = d_levels;
    cfg.seed = seed;
    cfg.patch_size = patch_size;
    cfg.workers = workers;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "IllumFlow core operations";

    py::class_<Network>(m, "Network")
        .def_property_readonly("in_channels", [](const Network& n) { return n.spec.in_channels; })
        .def_property_readonly("hidden_channels",
                               [](const Network& n) { return n.spec.hidden_channels; })
        .def_property_readonly("depth", [](const Network& n) { return n.spec.depth; })
        .def_property_readonly("param_count", &Network::param_count)
        .def_static(
            "create",
            [](int in_channels, int hidden, int depth, int embed, uint64_t seed) {
                return Network::create({in_channels, hidden, depth, embed}, seed);
            },
            py::arg("in_channels") = 1, py::arg("hidden") = 16, py::arg("depth") = 2,
            py::arg("embed") = 8, py::arg("seed") = 0)
        .def("save", &save_checkpoint, py::arg("path"))
        .def_static("load", &load_checkpoint, py::arg("path"));

    m.def("load_image", [](const std::string& p) { return image_to_array(load_image(p)); });
    m.def("save_image",
          [](py::array arr, const std::string& p) { save_image(image_from_array(arr), p); });
    m.def("recompose", [](py::array L, py::array R) {
        return image_to_array(recompose(image_from_array(L), image_from_array(R)));
    });

    m.def(
        "render_scene",
        [](uint64_t seed, int height, int width) {
            GroundTruthScene s = render_scene(seed, height, width);
            return py::make_tuple(image_to_array(s.true_illumination),
                                  image_to_array(s.true_reflectance),
                                  image_to_array(s.irradiance));
        },
        py::arg("seed"), py::arg("height") = 64, py::arg("width") = 64,
        "Returns (illumination, reflectance, irradiance).");
    m.def(
        "make_pair",
        [](uint64_t seed, int height, int width, double low_delta, double gaussian_sigma,
           double speckle_sigma, double chroma_shift) {
            GroundTruthScene s = render_scene(seed, height, width);
            TrainingPair p =
                make_pair(s, low_delta, {gaussian_sigma, speckle_sigma, chroma_shift}, seed + 1);
            py::dict d;
            d["low"] = image_to_array(p.low);
            d["normal"] = image_to_array(p.normal);
            d["low_L"] = image_to_array(p.low_illum);
            d["normal_L"] = image_to_array(p.normal_illum);
            d["low_R"] = image_to_array(p.low_refl);
            d["normal_R"] = image_to_array(p.normal_refl);
            return d;
        },
        py::arg("seed"), py::arg("height") = 64, py::arg("width") = 64,
        py::arg("low_delta") = 0.25, py::arg("gaussian_sigma") = 0.1,
        py::arg("speckle_sigma") = 0.0, py::arg("chroma_shift") = 0.0);

    m.def(
        "decompose",
        [](py::array img, double lambda1, double lambda2, int max_iters, double tol) {
            DecompParams p;
            p.lambda1 = lambda1;
            p.lambda2 = lambda2;
            p.max_iters = max_iters;
            p.tol = tol;
            DecompResult r = decompose(image_from_array(img), p);
            return py::make_tuple(image_to_array(r.L), image_to_array(r.R), r.objective_trace,
                                  r.iters_used);
        },
        py::arg("image"), py::arg("lambda1") = 0.1, py::arg("lambda2") = 0.01,
        py::arg("max_iters") = 200, py::arg("tol") = 1e-6,
        "Returns (L, R, objective_trace, iters_used).");

    m.def("psnr",
          [](py::array a, py::array b) { return psnr(image_from_array(a), image_from_array(b)); });
    m.def("ssim",
          [](py::array a, py::array b) { return ssim(image_from_array(a), image_from_array(b)); });

    m.def(
        "train_crfi",
        [](const std::vector<std::pair<py::array, py::array>>& pairs, int batch_size,
           int iterations, double lr, int d_levels, uint64_t seed, int patch_size, int workers,
           int hidden, int depth, int embed) {
            TrainOutput out = train_crfi(dataset_from_list(pairs),
                                         make_config(batch_size, iterations, lr, d_levels, seed,
                                                     patch_size, workers),
                                         {1, hidden, depth, embed});
            return py::make_tuple(out.net, out.trace.cfm, out.trace.consistency);
        },
        py::arg("pairs"), py::arg("batch_size") = 16, py::arg("iterations") = 200,
        py::arg("lr") = 1e-4, py::arg("d_levels") = 6, py::arg("seed") = 0,
        py::arg("patch_size") = 16, py::arg("workers") = 1, py::arg("hidden") = 16,
        py::arg("depth") = 2, py::arg("embed") = 8);
    m.def(
        "train_crfr",
        [](const std::vector<std::pair<py::array, py::array>>& pairs, int batch_size,
           int iterations, double lr, int d_levels, uint64_t seed, int patch_size, int workers,
           int hidden, int depth, int embed) {
            std::vector<ReflectancePair> rp;
            for (const auto& [noisy, clean] : pairs)
                rp.push_back({image_from_array(noisy), image_from_array(clean)});
            TrainOutput out = train_crfr(rp,
                                         make_config(batch_size, iterations, lr, d_levels, seed,
                                                     patch_size, workers),
                                         {3, hidden, depth, embed});
            return py::make_tuple(out.net, out.trace.cfm, out.trace.consistency);
        },
        py::arg("pairs"), py::arg("batch_size") = 16, py::arg("iterations") = 200,
        py::arg("lr") = 1e-4, py::arg("d_levels") = 6, py::arg("seed") = 0,
        py::arg("patch_size") = 16, py::arg("workers") = 1, py::arg("hidden") = 16,
        py::arg("depth") = 2, py::arg("embed") = 8);

    m.def("denoise", [](const Network& net, py::array r) {
        return image_to_array(denoise(net, image_from_array(r)));
    });
    m.def("enhance_onestep", [](const Network& net, py::array L) {
        return image_to_array(enhance_onestep(net, image_from_array(L)));
    });
    m.def(
        "integrate",
        [](const Network& net, py::array L0, double t_start, double t_end, int steps) {
            IlluminationSequence seq =
                integrate(network_field(net), image_from_array(L0), {t_start, t_end, steps});
            std::vector<py::array> levels;
            for (const auto& L : seq.levels) levels.push_back(image_to_array(L));
            return py::make_tuple(levels, seq.times);
        },
        py::arg("net"), py::arg("L0"), py::arg("t_start") = 0.0, py::arg("t_end") = 1.0,
        py::arg("steps") = 1);
    m.def(
        "enhance_image",
        [](const Network& crfi, const Network& crfr, py::array low, double t_start, double t_end,
           int steps, bool emit_all) {
            EnhanceOptions opts;
            opts.trajectory = {t_start, t_end, steps};
            opts.emit_all = emit_all;
            std::vector<py::array> out;
            for (const Image& img : enhance_image(crfi, crfr, image_from_array(low), opts))
                out.push_back(image_to_array(img));
            return out;
        },
        py::arg("crfi"), py::arg("crfr"), py::arg("low"), py::arg("t_start") = 0.0,
        py::arg("t_end") = 1.0, py::arg("steps") = 1, py::arg("emit_all") = false);

    m.def(
        "fuse",
        [](const std::vector<py::array>& seq, double sigma_e, int levels) {
            std::vector<Image> imgs;
            for (const auto& a : seq) imgs.push_back(image_from_array(a));
            FusionParams p;
            p.sigma_e = sigma_e;
            p.pyramid_levels = levels;
            return image_to_array(fuse(imgs, p));
        },
        py::arg("sequence"), py::arg("sigma_e") = 0.2, py::arg("levels") = 4);
    m.def(
        "well_exposedness",
        [](py::array img, double sigma_e) {
            return image_to_array(well_exposedness(image_from_array(img), sigma_e));
        },
        py::arg("image"), py::arg("sigma_e") = 0.2);

    m.def(
        "gradient_check",
        [](uint64_t seed, int in_channels, int hidden, int depth, int embed) {
            return gradient_check(Network::create({in_channels, hidden, depth, embed}, seed), seed);
        },
        py::arg("seed") = 0, py::arg("in_channels") = 1, py::arg("hidden") = 6,
        py::arg("depth") = 2, py::arg("embed") = 4);

    m.attr("__all__") = py::make_tuple(
        "Network", "load_image", "save_image", "recompose", "render_scene", "make_pair",
        "decompose", "psnr", "ssim", "train_crfi", "train_crfr", "denoise", "enhance_onestep",
        "integrate", "enhance_image", "fuse", "well_exposedness", "gradient_check");
}
