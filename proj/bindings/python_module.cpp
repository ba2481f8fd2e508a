#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "ega/attention.hpp"
#include "ega/costmodel.hpp"
#include "ega/errors.hpp"
#include "ega/gradcheck.hpp"
#include "ega/io.hpp"
#include "ega/losses.hpp"
#include "ega/metrics.hpp"
#include "ega/rig.hpp"

namespace py = pybind11;

namespace {

ega::Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
    if (array.ndim() != 2) throw ega::ShapeError("expected a 2-D array");
    ega::Matrix m(static_cast<std::size_t>(array.shape(0)),
                  static_cast<std::size_t>(array.shape(1)));
    std::copy(array.data(), array.data() + array.size(), m.data().begin());
    return m;
}

py::array_t<double> array_from_matrix(const ega::Matrix& m) {
    py::array_t<double> array({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), array.mutable_data());
    return array;
}

ega::ImagePlane image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
    if (array.ndim() == 2) {
        ega::ImagePlane image{static_cast<std::size_t>(array.shape(0)),
                              static_cast<std::size_t>(array.shape(1)), 1, {}};
        image.values.assign(array.data(), array.data() + array.size());
        return image;
    }
    if (array.ndim() == 3) {
        ega::ImagePlane image{static_cast<std::size_t>(array.shape(0)),
                              static_cast<std::size_t>(array.shape(1)),
                              static_cast<std::size_t>(array.shape(2)), {}};
        image.values.assign(array.data(), array.data() + array.size());
        return image;
    }
    throw ega::ShapeError("expected an image array of shape (H, W) or (H, W, C)");
}

ega::DepthMap depth_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
    if (array.ndim() != 2) throw ega::ShapeError("expected a depth array of shape (H, W)");
    ega::DepthMap depth{static_cast<std::size_t>(array.shape(0)),
                        static_cast<std::size_t>(array.shape(1)), {}};
    depth.values.assign(array.data(), array.data() + array.size());
    return depth;
}

py::array_t<double> array_from_depth(const ega::DepthMap& depth) {
    py::array_t<double> array({depth.height, depth.width});
    std::copy(depth.values.begin(), depth.values.end(), array.mutable_data());
    return array;
}

ega::AttentionOptions options_from_kwargs(std::size_t heads, bool use_norm, bool literal_sqrt_c,
                                          bool keep_weights) {
    return {heads, use_norm, literal_sqrt_c, keep_weights};
}

py::dict report_to_dict(const ega::CostReport& report) {
    py::dict d;
    d["qkv"] = report.flops.qkv;
    d["reduce"] = report.flops.reduce;
    d["attnmap"] = report.flops.attnmap;
    d["softmax"] = report.flops.softmax;
    d["weighted_sum"] = report.flops.weighted_sum;
    d["headmix"] = report.flops.headmix;
    d["total"] = report.flops_total;
    d["peak_activation_elements"] = report.peak_activation_elements;
    py::list breakdown;
    for (const ega::CostEntry& entry : report.breakdown) {
        py::dict row;
        row["view"] = entry.view;
        row["scale"] = entry.scale;
        row["flops"] = entry.flops.total();
        row["attnmap"] = entry.flops.attnmap;
        row["activation_elements"] = entry.activation_elements;
        breakdown.append(row);
    }
    d["breakdown"] = breakdown;
    return d;
}

}  // namespace

PYBIND11_MODULE(egadepth, m) {
    m.doc() = "Guided cross-view attention kernels with gradients, losses, depth metrics "
              "and an analytic cost model";

    py::register_exception<ega::ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ega::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ega::InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ega::UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ega::EvalError>(m, "EvalError", PyExc_ValueError);

    // --- tensor core ---
    m.def("seeded_init",
          [](std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
              return array_from_matrix(ega::seeded_init(rows, cols, seed, scale));
          },
          py::arg("rows"), py::arg("cols"), py::arg("seed"), py::arg("scale") = 1.0);
    m.def("matmul", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return array_from_matrix(ega::matmul(matrix_from_array(a), matrix_from_array(b)));
    });
    m.def("softmax_rows", [](const py::array_t<double>& a) {
        return array_from_matrix(ega::softmax_rows(matrix_from_array(a)));
    });
    m.def("concat_rows", [](const std::vector<py::array_t<double>>& parts) {
        std::vector<ega::Matrix> matrices;
        matrices.reserve(parts.size());
        for (const auto& p : parts) matrices.push_back(matrix_from_array(p));
        return array_from_matrix(ega::concat_rows(matrices));
    });

    // --- rig ---
    py::class_<ega::ScaleConfig>(m, "ScaleConfig")
        .def(py::init([](std::size_t height, std::size_t width,
                         std::optional<std::size_t> k) {
                 return ega::ScaleConfig{height, width, k};
             }),
             py::arg("height"), py::arg("width"), py::arg("k") = py::none())
        .def_readonly("height", &ega::ScaleConfig::height)
        .def_readonly("width", &ega::ScaleConfig::width)
        .def_readonly("projection_dim", &ega::ScaleConfig::projection_dim)
        .def_property_readonly("spatial", &ega::ScaleConfig::spatial);

    py::class_<ega::RigConfig>(m, "RigConfig")
        .def(py::init<>())
        .def_readwrite("num_cameras", &ega::RigConfig::num_cameras)
        .def_readwrite("neighbors", &ega::RigConfig::neighbors)
        .def_readwrite("scales", &ega::RigConfig::scales)
        .def_readwrite("heads", &ega::RigConfig::heads)
        .def_readwrite("channels", &ega::RigConfig::channels)
        .def_readwrite("temporal_frames", &ega::RigConfig::temporal_frames)
        .def_readwrite("seed", &ega::RigConfig::seed)
        .def_readwrite("use_norm", &ega::RigConfig::use_norm)
        .def_readwrite("literal_sqrt_c", &ega::RigConfig::literal_sqrt_c)
        .def_property_readonly("neighbor_count", &ega::RigConfig::neighbor_count)
        .def("reference_len", &ega::RigConfig::reference_len)
        .def("validate", [](const ega::RigConfig& config) { ega::validate(config); })
        .def("to_json", &ega::config_to_json);

    m.def("preset", &ega::preset, py::arg("name"));
    m.def("load_config", &ega::load_config, py::arg("path"));

    py::class_<ega::FeatureSet>(m, "FeatureSet")
        .def(py::init<>())
        .def("insert",
             [](ega::FeatureSet& set, std::size_t view, std::size_t scale, int time_offset,
                const py::array_t<double>& data) {
                 set.insert({view, scale, time_offset, matrix_from_array(data)});
             },
             py::arg("view"), py::arg("scale"), py::arg("time_offset"), py::arg("data"))
        .def("at",
             [](const ega::FeatureSet& set, std::size_t view, std::size_t scale,
                int time_offset) { return array_from_matrix(set.at(view, scale, time_offset)); },
             py::arg("view"), py::arg("scale"), py::arg("time_offset") = 0)
        .def("contains", &ega::FeatureSet::contains, py::arg("view"), py::arg("scale"),
             py::arg("time_offset") = 0)
        .def("__len__", &ega::FeatureSet::size);

    m.def("random_features", &ega::random_features, py::arg("config"), py::arg("seed"),
          py::arg("scale") = 1.0);
    m.def("neighbor_stack",
          [](const ega::FeatureSet& features, std::size_t view, std::size_t scale,
             const ega::RigConfig& config, int time_offset) {
              return array_from_matrix(
                  ega::neighbor_stack(features, view, scale, config, time_offset));
          },
          py::arg("features"), py::arg("view"), py::arg("scale"), py::arg("config"),
          py::arg("time_offset") = 0);
    m.def("temporal_stack",
          [](const ega::FeatureSet& features, std::size_t view, std::size_t scale,
             const ega::RigConfig& config) {
              return array_from_matrix(ega::temporal_stack(features, view, scale, config));
          });

    // --- attention ---
    py::class_<ega::EgaParams>(m, "EgaParams")
        .def_property("w_q", [](const ega::EgaParams& p) { return array_from_matrix(p.w_q); },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.w_q = matrix_from_array(a);
                      })
        .def_property("w_k", [](const ega::EgaParams& p) { return array_from_matrix(p.w_k); },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.w_k = matrix_from_array(a);
                      })
        .def_property("w_v", [](const ega::EgaParams& p) { return array_from_matrix(p.w_v); },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.w_v = matrix_from_array(a);
                      })
        .def_property("w_o", [](const ega::EgaParams& p) { return array_from_matrix(p.w_o); },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.w_o = matrix_from_array(a);
                      })
        .def_property("p_k",
                      [](const ega::EgaParams& p) -> py::object {
                          return p.p_k ? py::object(array_from_matrix(*p.p_k)) : py::none();
                      },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.p_k = matrix_from_array(a);
                      })
        .def_property("p_v",
                      [](const ega::EgaParams& p) -> py::object {
                          return p.p_v ? py::object(array_from_matrix(*p.p_v)) : py::none();
                      },
                      [](ega::EgaParams& p, const py::array_t<double>& a) {
                          p.p_v = matrix_from_array(a);
                      });

    m.def("init_ega_params", &ega::init_ega_params, py::arg("channels"),
          py::arg("projection_dim"), py::arg("reference_len"), py::arg("seed"));

    py::class_<ega::RigParams>(m, "RigParams")
        .def("at", [](ega::RigParams& params, std::size_t view,
                      std::size_t scale) -> ega::EgaParams& { return params.at(view, scale); },
             py::return_value_policy::reference_internal)
        .def_property_readonly("views", &ega::RigParams::views)
        .def_property_readonly("scales", &ega::RigParams::scales)
        .def("parameter_count", &ega::RigParams::parameter_count);

    m.def("init_rig_params", &ega::init_rig_params, py::arg("config"), py::arg("seed"));

    m.def("project_qkv",
          [](const py::array_t<double>& query, const py::array_t<double>& reference,
             const ega::EgaParams& params) {
              auto [q, k, v] =
                  ega::project_qkv(matrix_from_array(query), matrix_from_array(reference), params);
              return py::make_tuple(array_from_matrix(q), array_from_matrix(k),
                                    array_from_matrix(v));
          });
    m.def("reduce_kv",
          [](const py::array_t<double>& k, const py::array_t<double>& v,
             const ega::EgaParams& params) {
              auto [rk, rv] = ega::reduce_kv(matrix_from_array(k), matrix_from_array(v), params);
              return py::make_tuple(array_from_matrix(rk), array_from_matrix(rv));
          });
    m.def("guided_attention",
          [](const py::array_t<double>& q, const py::array_t<double>& k,
             const py::array_t<double>& v, std::size_t scale_dim) {
              return array_from_matrix(ega::guided_attention(
                  matrix_from_array(q), matrix_from_array(k), matrix_from_array(v), scale_dim));
          },
          py::arg("q"), py::arg("k"), py::arg("v"), py::arg("scale_dim"));

    m.def("ega_block",
          [](const py::array_t<double>& query, const py::array_t<double>& reference,
             const ega::EgaParams& params, std::size_t heads, bool use_norm,
             bool literal_sqrt_c, bool keep_weights) {
              const ega::AttentionOutput out =
                  ega::ega_block(matrix_from_array(query), matrix_from_array(reference), params,
                                 options_from_kwargs(heads, use_norm, literal_sqrt_c,
                                                     keep_weights));
              py::list weights;
              for (const ega::Matrix& head : out.weights) weights.append(array_from_matrix(head));
              return py::make_tuple(array_from_matrix(out.refined), weights);
          },
          py::arg("query"), py::arg("reference"), py::arg("params"), py::arg("heads") = 1,
          py::arg("use_norm") = true, py::arg("literal_sqrt_c") = false,
          py::arg("keep_weights") = false);

    m.def("forward_rig", &ega::forward_rig, py::arg("features"), py::arg("params"),
          py::arg("config"));

    // --- gradcheck ---
    py::class_<ega::GradCheckCase>(m, "GradCheckCase")
        .def(py::init<>())
        .def_readwrite("spatial", &ega::GradCheckCase::spatial)
        .def_readwrite("channels", &ega::GradCheckCase::channels)
        .def_readwrite("heads", &ega::GradCheckCase::heads)
        .def_readwrite("neighbor_count", &ega::GradCheckCase::neighbor_count)
        .def_readwrite("temporal_frames", &ega::GradCheckCase::temporal_frames)
        .def_readwrite("projected", &ega::GradCheckCase::projected)
        .def_readwrite("use_norm", &ega::GradCheckCase::use_norm)
        .def_readwrite("seed", &ega::GradCheckCase::seed);

    m.def("gradcheck_ega_block",
          [](const ega::GradCheckCase& check, double eps) {
              const ega::GradCheckReport report = ega::gradcheck_ega_block(check, eps);
              py::list entries;
              for (const ega::GradCheckEntry& entry : report.entries) {
                  py::dict d;
                  d["param"] = entry.param;
                  d["max_rel_err"] = entry.max_rel_err;
                  d["mean_rel_err"] = entry.mean_rel_err;
                  entries.append(d);
              }
              py::dict result;
              result["entries"] = entries;
              result["max_rel_err"] = report.max_rel_err;
              return result;
          },
          py::arg("case"), py::arg("eps") = 1e-5);

    // --- losses ---
    m.def("ssim", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return array_from_matrix(ega::ssim(image_from_array(a), image_from_array(b)));
    });
    m.def("photometric_loss",
          [](const py::array_t<double>& target, const std::vector<py::array_t<double>>& cands) {
              std::vector<ega::ImagePlane> images;
              images.reserve(cands.size());
              for (const auto& c : cands) images.push_back(image_from_array(c));
              const ega::PhotometricResult result =
                  ega::photometric_loss(image_from_array(target), images);
              return py::make_tuple(result.mean, array_from_matrix(result.per_pixel));
          });
    m.def("smoothness_loss",
          [](const py::array_t<double>& depth, const py::array_t<double>& image) {
              return ega::smoothness_loss(depth_from_array(depth), image_from_array(image));
          });
    m.def("total_loss", &ega::total_loss, py::arg("photometric"), py::arg("smoothness"));

    // --- metrics ---
    py::class_<ega::EvalReport>(m, "EvalReport")
        .def_readonly("abs_rel", &ega::EvalReport::abs_rel)
        .def_readonly("sq_rel", &ega::EvalReport::sq_rel)
        .def_readonly("rmse", &ega::EvalReport::rmse)
        .def_readonly("rmse_log", &ega::EvalReport::rmse_log)
        .def_readonly("delta1", &ega::EvalReport::delta1)
        .def_readonly("delta2", &ega::EvalReport::delta2)
        .def_readonly("delta3", &ega::EvalReport::delta3)
        .def_readonly("pixel_count", &ega::EvalReport::pixel_count);

    m.def("median_scale", [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
        return array_from_depth(ega::median_scale(depth_from_array(pred), depth_from_array(gt)));
    });
    m.def("evaluate",
          [](const py::array_t<double>& pred, const py::array_t<double>& gt, double max_depth) {
              return ega::evaluate(depth_from_array(pred), depth_from_array(gt), max_depth);
          },
          py::arg("pred"), py::arg("gt"), py::arg("max_depth") = 80.0);

    // --- cost model ---
    m.def("cost_ega", [](const ega::RigConfig& config) {
        return report_to_dict(ega::cost_ega(config));
    });
    m.def("cost_joint_selfattn", [](const ega::RigConfig& config) {
        return report_to_dict(ega::cost_joint_selfattn(config));
    });
    m.def("measured_rig_flops", &ega::measured_rig_flops, py::arg("config"),
          py::arg("seed") = 1);
    m.def("scaling_curve",
          [](const ega::RigConfig& config, const std::string& var,
             const std::vector<std::size_t>& points) {
              const ega::SweepResult sweep =
                  ega::scaling_curve(config, ega::sweep_var_from_name(var), points);
              py::dict result;
              py::list rows;
              for (const ega::SweepPoint& point : sweep.points) {
                  py::dict row;
                  row["value"] = point.value;
                  row["attnmap"] = point.report.flops.attnmap;
                  row["total"] = point.report.flops_total;
                  rows.append(row);
              }
              result["points"] = rows;
              py::dict degrees;
              for (const auto& [stage, degree] : sweep.degrees)
                  degrees[py::str(stage)] = degree;
              result["degrees"] = degrees;
              return result;
          },
          py::arg("config"), py::arg("var"), py::arg("points"));
}
