#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gle/density.hpp"
#include "gle/integrator.hpp"
#include "gle/linalg.hpp"
#include "gle/malliavin.hpp"
#include "gle/model.hpp"
#include "gle/montecarlo.hpp"
#include "gle/observables.hpp"

namespace py = pybind11;
using namespace gle;

namespace {

std::vector<std::vector<double>> mat_to_list(const Mat& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

Mat mat_from_list(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw std::invalid_argument("matrix rows must have equal length");
        for (size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return m;
}

}  // namespace

PYBIND11_MODULE(_gleavf, m) {
    m.doc() = "Splitting averaged-vector-field integrator for memory-kernel Langevin models";

    py::class_<PotentialSpec>(m, "PotentialSpec")
        .def_readonly("coefficients", &PotentialSpec::coefficients)
        .def_readonly("hessian_lower_bound", &PotentialSpec::hessian_lower_bound)
        .def_property_readonly("degree", &PotentialSpec::degree);
    m.def("make_potential", &make_potential, py::arg("coefficients"),
          py::arg("hessian_lower_bound"), py::arg("allow_quadratic") = false);
    m.def("double_well", &double_well);

    py::class_<PotentialEval>(m, "PotentialEval")
        .def_readonly("value", &PotentialEval::value)
        .def_readonly("grad", &PotentialEval::grad)
        .def_readonly("hess", &PotentialEval::hess);
    m.def("potential_eval", &potential_eval);
    m.def("discrete_gradient", &discrete_gradient);
    m.def("chord_hessian_moments", [](const PotentialSpec& p, double a, double b) {
        const auto r = chord_hessian_moments(p, a, b);
        return std::make_pair(r.f1, r.f2);
    });

    py::class_<ModelParams>(m, "ModelParams")
        .def_readonly("gamma", &ModelParams::gamma)
        .def_readonly("k", &ModelParams::k)
        .def_readonly("alpha", &ModelParams::alpha)
        .def_readonly("lambda_", &ModelParams::lambda)
        .def_readonly("potential", &ModelParams::potential)
        .def_property_readonly("dim", &ModelParams::dim);
    m.def("make_model", &make_model, py::arg("gamma"), py::arg("alpha"), py::arg("lambda_"),
          py::arg("potential"));

    py::class_<State>(m, "State")
        .def(py::init([](const std::vector<double>& y) {
                 if (y.size() < 3) throw std::invalid_argument("state needs k+2 >= 3 entries");
                 State s(static_cast<int>(y.size()) - 2);
                 s.y = y;
                 return s;
             }),
             py::arg("components"))
        .def_readwrite("y", &State::y)
        .def_property_readonly("v", [](const State& s) { return s.v(); })
        .def_property_readonly("x", [](const State& s) { return s.x(); })
        .def("z", [](const State& s, int l) { return s.z(l); });

    m.def("hamiltonian_H0", &hamiltonian_H0);
    m.def("hamiltonian_H", &hamiltonian_H);
    m.def("h_star", &h_star);

    py::class_<GibbsReference>(m, "GibbsReference")
        .def_readonly("normalizer", &GibbsReference::normalizer)
        .def_readonly("tail_bound", &GibbsReference::tail_bound)
        .def_readonly("truncation", &GibbsReference::truncation)
        .def("sample_x", &GibbsReference::sample_x);
    m.def("make_gibbs_reference", &make_gibbs_reference);

    py::class_<RngStream>(m, "RngStream")
        .def(py::init<uint64_t, uint32_t>(), py::arg("seed"), py::arg("stream") = 0)
        .def("next_uniform", &RngStream::next_uniform)
        .def("next_normal", &RngStream::next_normal);

    m.def("gibbs_sample", &gibbs_sample);
    m.def(
        "gibbs_expectation",
        [](const GibbsReference& ref, const ModelParams& p,
           const std::function<double(const State&)>& g, int64_t n, RngStream& rng) {
            const auto e = gibbs_expectation(ref, p, g, n, rng);
            return std::make_tuple(e.mean, e.std_error, e.n);
        },
        py::arg("reference"), py::arg("model"), py::arg("g"), py::arg("n_samples"),
        py::arg("rng"));

    py::class_<StepperOptions>(m, "StepperOptions")
        .def(py::init<>())
        .def_readwrite("newton_tol", &StepperOptions::newton_tol)
        .def_readwrite("newton_max_iter", &StepperOptions::newton_max_iter)
        .def_readwrite("fixed_point_max_iter", &StepperOptions::fixed_point_max_iter)
        .def_readwrite("allow_large_h", &StepperOptions::allow_large_h);

    py::class_<StepperConfig>(m, "StepperConfig")
        .def_readonly("h", &StepperConfig::h)
        .def_readonly("decay_v", &StepperConfig::decay_v)
        .def_readonly("decay_z", &StepperConfig::decay_z)
        .def_readonly("couple_zx", &StepperConfig::couple_zx)
        .def_readonly("sigma_v", &StepperConfig::sigma_v)
        .def_readonly("sigma_z", &StepperConfig::sigma_z)
        .def_readonly("hstar_warning", &StepperConfig::hstar_warning);
    m.def("make_stepper", &make_stepper, py::arg("model"), py::arg("h"),
          py::arg("options") = StepperOptions{});

    py::class_<NoiseBlock>(m, "NoiseBlock").def_readwrite("g", &NoiseBlock::g);
    m.def("zero_noise", &zero_noise);
    m.def("sample_noise", &sample_noise);
    m.def("coarsen_noise", &coarsen_noise);

    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("y_bar", &StepRecord::y_bar)
        .def_readonly("y_next", &StepRecord::y_next)
        .def_readonly("newton_iters", &StepRecord::newton_iters)
        .def_readonly("residual", &StepRecord::residual)
        .def_readonly("ok", &StepRecord::ok);

    m.def("avf_residual", &avf_residual);
    m.def("avf_substep", &avf_substep);
    m.def("ou_substep", &ou_substep);
    m.def("split_step", &split_step);
    m.def("em_step", &em_step);
    m.def("state_diverged", &state_diverged);

    py::class_<StepJacobians>(m, "StepJacobians")
        .def_property_readonly("dG_dYbar",
                               [](const StepJacobians& j) { return mat_to_list(j.dG_dYbar); })
        .def_property_readonly("dG_dYn",
                               [](const StepJacobians& j) { return mat_to_list(j.dG_dYn); })
        .def_property_readonly("M", [](const StepJacobians& j) { return mat_to_list(j.M); })
        .def_property_readonly("A", [](const StepJacobians& j) { return mat_to_list(j.A); })
        .def_readonly("det_dG_dYbar", &StepJacobians::det_dG_dYbar)
        .def_readonly("f1", &StepJacobians::f1)
        .def_readonly("f2", &StepJacobians::f2);
    m.def("jacobians", &jacobians);
    m.def("fresh_derivative",
          [](const StepperConfig& cfg) { return mat_to_list(fresh_derivative(cfg)); });
    m.def("min_eigenvalue", [](const std::vector<std::vector<double>>& rows) {
        return min_eigenvalue(mat_from_list(rows));
    });

    py::class_<MalliavinCovariance>(m, "MalliavinCovariance")
        .def_property_readonly("gamma",
                               [](const MalliavinCovariance& c) { return mat_to_list(c.gamma); })
        .def_readonly("n", &MalliavinCovariance::n);
    m.def("covariance_init", &covariance_init);
    m.def("covariance_step", &covariance_step);

    py::class_<EnsembleConfig>(m, "EnsembleConfig")
        .def(py::init<>())
        .def_readwrite("n_paths", &EnsembleConfig::n_paths)
        .def_readwrite("T", &EnsembleConfig::T)
        .def_readwrite("levels", &EnsembleConfig::levels)
        .def_readwrite("master_seed", &EnsembleConfig::master_seed)
        .def_readwrite("initial_state", &EnsembleConfig::initial_state)
        .def_readwrite("zero_noise", &EnsembleConfig::zero_noise)
        .def_readwrite("workers", &EnsembleConfig::workers);

    py::class_<PathResult>(m, "PathResult")
        .def_readonly("terminal", &PathResult::terminal)
        .def_readonly("diverged", &PathResult::diverged);
    m.def("run_coupled_paths", &run_coupled_paths, py::arg("model"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<ErrorRow>(m, "ErrorRow")
        .def_readonly("h", &ErrorRow::h)
        .def_readonly("strong_error", &ErrorRow::strong_error)
        .def_readonly("strong_order", &ErrorRow::strong_order)
        .def_readonly("weak_error", &ErrorRow::weak_error)
        .def_readonly("weak_order", &ErrorRow::weak_order)
        .def_readonly("n_effective", &ErrorRow::n_effective);
    py::class_<ErrorTable>(m, "ErrorTable")
        .def_readonly("rows", &ErrorTable::rows)
        .def_readonly("strong_ls_slope", &ErrorTable::strong_ls_slope)
        .def_readonly("weak_ls_slope", &ErrorTable::weak_ls_slope);
    m.def("build_error_table",
          [](const std::vector<PathResult>& results, const std::vector<double>& levels,
             const std::string& weak_observable, const ModelParams& model, uint64_t seed) {
              return build_error_table(results, levels, make_observable(weak_observable, model),
                                       seed);
          });

    m.def("observable_names", &observable_names);
    m.def("make_observable",
          [](const std::string& name, const ModelParams& model) {
              Observable g = make_observable(name, model);
              return std::function<double(const State&)>(g);
          });

    m.def("temporal_average", &temporal_average);
}
