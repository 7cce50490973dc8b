#include "tnfeat/cp.hpp"
#include "tnfeat/error.hpp"
#include "tnfeat/eval.hpp"
#include "tnfeat/feature_matrix.hpp"
#include "tnfeat/flops.hpp"
#include "tnfeat/pipeline.hpp"
#include "tnfeat/preprocess.hpp"
#include "tnfeat/tensor.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace tnfeat;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

tensor::DenseTensor to_tensor(const DoubleArray& a) {
  tensor::Shape shape(a.shape(), a.shape() + a.ndim());
  return tensor::DenseTensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_tensor(const tensor::DenseTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

tensor::CPModel to_model(const std::vector<double>& weights, const std::vector<tensor::Matrix>& factors) {
  tensor::CPModel m;
  m.weights = weights;
  m.factors = factors;
  return m;
}

py::dict metrics_dict(const eval::MetricsRecord& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["macro_precision"] = m.macro_precision;
  d["macro_recall"] = m.macro_recall;
  d["macro_f1"] = m.macro_f1;
  d["weighted_precision"] = m.weighted_precision;
  d["weighted_recall"] = m.weighted_recall;
  d["weighted_f1"] = m.weighted_f1;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

preprocess::RawImage to_raw(const ByteArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(Errc::InvalidInput, "image must be HxW or HxWxC");
  preprocess::RawImage img;
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  img.pixels.assign(a.data(), a.data() + a.size());
  img.validate();
  return img;
}

py::dict outcome_dict(const preprocess::Outcome& o) {
  py::dict d;
  if (o.image) {
    py::array_t<std::uint8_t> img({preprocess::kSide, preprocess::kSide});
    std::copy(o.image->pixels.begin(), o.image->pixels.end(), img.mutable_data());
    d["image"] = img;
  } else {
    d["image"] = py::none();
  }
  d["rejection"] = o.rejection ? py::object(py::str(preprocess::to_string(*o.rejection))) : py::object(py::none());
  d["warnings"] = o.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tnfeat, m) {
  m.doc() = "Tensor-decomposition image features, cross-validated forests and cost model";

  static py::exception<Error> error(m, "TnfeatError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("unfold", [](const DoubleArray& t, std::size_t mode) { return tensor::unfold(to_tensor(t), mode); },
        py::arg("tensor"), py::arg("mode"));
  m.def("fold",
        [](const tensor::Matrix& mat, std::size_t mode, const tensor::Shape& shape) {
          return from_tensor(tensor::fold(mat, mode, shape));
        },
        py::arg("matrix"), py::arg("mode"), py::arg("shape"));
  m.def("khatri_rao", &tensor::khatri_rao, py::arg("a"), py::arg("b"));

  m.def(
      "cp_als",
      [](const DoubleArray& t, std::size_t rank, int max_sweeps, double tolerance, std::uint64_t seed,
         const std::string& init, bool line_search, bool canonical) {
        tensor::AlsOptions opts;
        opts.max_sweeps = max_sweeps;
        opts.rel_fit_tolerance = tolerance;
        opts.init_seed = seed;
        if (init == "svd") {
          opts.init = tensor::AlsInit::Svd;
        } else if (init == "uniform") {
          opts.init = tensor::AlsInit::Uniform;
        } else {
          throw Error(Errc::InvalidConfig, "init must be 'svd' or 'uniform' (got '" + init + "')");
        }
        opts.line_search = line_search;
        tensor::AlsResult res;
        {
          py::gil_scoped_release release;
          res = tensor::cp_als(to_tensor(t), rank, opts);
        }
        const tensor::CPModel model = canonical ? tensor::canonicalize(res.model) : res.model;
        py::dict d;
        d["weights"] = model.weights;
        d["factors"] = model.factors;
        d["errors"] = res.errors;
        d["sweeps"] = res.sweeps;
        d["converged"] = res.converged;
        d["degenerate"] = model.degenerate;
        return d;
      },
      py::arg("tensor"), py::arg("rank"), py::arg("max_sweeps") = 100, py::arg("tolerance") = 1e-6,
      py::arg("seed") = 0, py::arg("init") = "svd", py::arg("line_search") = true, py::arg("canonical") = true);
  m.def(
      "reconstruct",
      [](const std::vector<double>& weights, const std::vector<tensor::Matrix>& factors) {
        return from_tensor(tensor::reconstruct(to_model(weights, factors)));
      },
      py::arg("weights"), py::arg("factors"));
  m.def(
      "fit_score",
      [](const std::vector<double>& weights, const std::vector<tensor::Matrix>& factors, const DoubleArray& t) {
        return tensor::fit_score(to_model(weights, factors), to_tensor(t));
      },
      py::arg("weights"), py::arg("factors"), py::arg("tensor"));

  m.def(
      "grayscale",
      [](const ByteArray& img) {
        const preprocess::RawImage g = preprocess::to_grayscale(to_raw(img));
        py::array_t<std::uint8_t> out({g.height, g.width});
        std::copy(g.pixels.begin(), g.pixels.end(), out.mutable_data());
        return out;
      },
      py::arg("image"));
  m.def("preprocess", [](const ByteArray& img) { return outcome_dict(preprocess::run(to_raw(img))); },
        py::arg("image"));
  m.def("preprocess_file", [](const std::filesystem::path& p) { return outcome_dict(preprocess::run_file(p)); },
        py::arg("path"));

  m.def(
      "compute_metrics",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t num_classes) {
        return metrics_dict(eval::compute_metrics(eval::confusion_matrix(y_true, y_pred, num_classes)));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes"));

  m.def(
      "cost_cp_als",
      [](const std::vector<std::uint64_t>& shape, std::uint64_t rank, std::uint64_t sweeps) {
        return flops::cost_cp_als(shape, rank, sweeps);
      },
      py::arg("shape"), py::arg("rank"), py::arg("sweeps"));

  m.def(
      "read_fmx1",
      [](const std::filesystem::path& p) {
        const features::FeatureMatrix fm = features::read_fmx1(p);
        py::array_t<float> out({fm.rows, fm.cols});
        std::copy(fm.data.begin(), fm.data.end(), out.mutable_data());
        return out;
      },
      py::arg("path"));

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int status = 0;
        {
          py::gil_scoped_release release;
          status = pipeline::cli_main(args, out, err);
        }
        return py::make_tuple(status, out.str(), err.str());
      },
      py::arg("args"));
}
