#include "slicedict/cli.hpp"
#include "slicedict/engine.hpp"
#include "slicedict/io.hpp"
#include "slicedict/separation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace slicedict;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array2& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return Image(h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

Array2 to_array(const Image& x) {
  Array2 out({x.height(), x.width()});
  std::copy(x.pixels().begin(), x.pixels().end(), out.mutable_data());
  return out;
}

py::dict metrics_dict(const MetricsRow& row) {
  py::dict d;
  d["iter"] = row.iteration;
  d["data_term"] = row.data_term;
  d["l1_term"] = row.l1_term;
  d["objective"] = row.objective;
  d["slice_data_term"] = row.slice_data_term;
  d["max_primal_residual"] = row.max_primal_residual;
  d["time_ms"] = row.time_ms;
  return d;
}

py::list metrics_list(const std::vector<MetricsRow>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(metrics_dict(r));
  return out;
}

} // namespace

PYBIND11_MODULE(_slicedict, m) {
  m.doc() = "Slice-based convolutional dictionary learning";
  m.attr("__version__") = kVersion;

  m.def("init_dictionary",
        [](int n, int atoms, std::uint64_t seed) { return init_dictionary(n, atoms, seed).atoms(); },
        py::arg("n"), py::arg("atoms"), py::arg("seed") = 0);

  m.def("preprocess", [](const Array2& x) { return to_array(preprocess(to_image(x))); }, py::arg("image"));
  m.def("psnr", [](const Array2& x, const Array2& y) { return psnr(to_image(x), to_image(y)); });

  m.def(
      "lasso_solve",
      [](const Eigen::MatrixXd& atoms, const Eigen::VectorXd& b, double lam, int max_sweeps, double tol) {
        PursuitConfig cfg;
        cfg.lambda = lam;
        cfg.max_sweeps = max_sweeps;
        cfg.tolerance = tol;
        const PursuitResult res = lasso_solve(LocalDictionary(atoms), b, cfg);
        return py::make_tuple(res.needle.to_dense(static_cast<int>(atoms.cols())), res.converged);
      },
      py::arg("atoms"), py::arg("b"), py::arg("lam"), py::arg("max_sweeps") = 200, py::arg("tol") = 1e-6);

  m.def(
      "train",
      [](const std::vector<Array2>& images, const Eigen::MatrixXd& d0, double lam, double rho, int iterations,
         double subsample, std::uint64_t seed, bool refit) {
        std::vector<Image> imgs;
        for (const auto& a : images) imgs.push_back(to_image(a));
        TrainConfig cfg;
        cfg.lambda = lam;
        cfg.rho = rho;
        cfg.iterations = iterations;
        cfg.subsample = subsample;
        cfg.seed = seed;
        cfg.refit_coefficients = refit;
        TrainResult res;
        {
          py::gil_scoped_release release;
          res = train(imgs, cfg, LocalDictionary(d0));
        }
        return py::make_tuple(res.dictionary.atoms(), metrics_list(res.metrics));
      },
      py::arg("images"), py::arg("dictionary"), py::arg("lam") = 1.0, py::arg("rho") = 1.0,
      py::arg("iterations") = 300, py::arg("subsample") = 1.0, py::arg("seed") = 0,
      py::arg("refit_coefficients") = false);

  m.def(
      "inpaint",
      [](const Array2& y, const Array2& mask, const Eigen::MatrixXd& d, double lam, double rho, int iterations,
         bool learn, bool refit) {
        TrainConfig cfg;
        cfg.lambda = lam;
        cfg.rho = rho;
        cfg.iterations = iterations;
        cfg.refit_coefficients = refit;
        const Image yi = to_image(y), mi = to_image(mask);
        InpaintResult res;
        {
          py::gil_scoped_release release;
          res = inpaint(yi, mi, LocalDictionary(d), cfg, learn);
        }
        return py::make_tuple(to_array(res.reconstruction), res.dictionary.atoms());
      },
      py::arg("observed"), py::arg("mask"), py::arg("dictionary"), py::arg("lam") = 0.1, py::arg("rho") = 1.0,
      py::arg("iterations") = 100, py::arg("learn_on_corrupted") = false,
      py::arg("refit_coefficients") = false);

  m.def(
      "tv_denoise", [](const Array2& z, double weight) { return to_array(tv_denoise(to_image(z), weight)); },
      py::arg("image"), py::arg("weight"));

  auto separation_config = [](double lam, double rho, double eta, double xi, int iterations) {
    SeparationConfig cfg;
    cfg.lambda = lam;
    cfg.rho = rho;
    cfg.eta = eta;
    cfg.xi = xi;
    cfg.iterations = iterations;
    return cfg;
  };

  m.def(
      "separate",
      [=](const Array2& x, const Eigen::MatrixXd& d0, double lam, double rho, double eta, double xi, int iterations) {
        const SeparationConfig cfg = separation_config(lam, rho, eta, xi, iterations);
        const Image xi_img = to_image(x);
        SeparationResult res;
        {
          py::gil_scoped_release release;
          res = separate(xi_img, LocalDictionary(d0), cfg);
        }
        return py::make_tuple(to_array(res.cartoon), to_array(res.texture), res.dictionary.atoms());
      },
      py::arg("image"), py::arg("dictionary"), py::arg("lam") = 0.1, py::arg("rho") = 1.0, py::arg("eta") = 1.0,
      py::arg("xi") = 0.1, py::arg("iterations") = 100);

  m.def(
      "enhance",
      [=](const Array2& x, const Eigen::MatrixXd& d0, double factor, double lam, double rho, double eta, double xi,
          int iterations) {
        const SeparationConfig cfg = separation_config(lam, rho, eta, xi, iterations);
        return to_array(enhance(to_image(x), LocalDictionary(d0), cfg, factor));
      },
      py::arg("image"), py::arg("dictionary"), py::arg("factor"), py::arg("lam") = 0.1, py::arg("rho") = 1.0,
      py::arg("eta") = 1.0, py::arg("xi") = 0.1, py::arg("iterations") = 100);

  m.def("read_dictionary", [](const std::string& path) { return read_dictionary(path).atoms(); });
  m.def("write_dictionary",
        [](const std::string& path, const Eigen::MatrixXd& atoms) { write_dictionary(path, LocalDictionary(atoms)); });
  m.def("srgb_to_lab", [](double r, double g, double b) {
    const Lab lab = srgb_to_lab(r, g, b);
    return py::make_tuple(lab.l, lab.a, lab.b);
  });

  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return slicedict::cli::run(args); }, py::arg("args"));
}
