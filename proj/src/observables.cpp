#include "gle/observables.hpp"

#include <cmath>
#include <stdexcept>

namespace gle {

namespace {

double norm2(const State& s) {
    double r = 0.0;
    for (double c : s.y) r += c * c;
    return r;
}

}  // namespace

Observable make_observable(const std::string& name, const ModelParams& params) {
    if (name == "one") return [](const State&) { return 1.0; };
    if (name == "v") return [](const State& s) { return s.v(); };
    if (name == "x") return [](const State& s) { return s.x(); };
    if (name == "v2") return [](const State& s) { return s.v() * s.v(); };
    if (name == "x2") return [](const State& s) { return s.x() * s.x(); };
    if (name == "cos_norm2") return [](const State& s) { return std::cos(norm2(s)); };
    if (name == "sin_norm2") return [](const State& s) { return std::sin(norm2(s)); };
    if (name == "exp_neg_half_norm2")
        return [](const State& s) { return std::exp(-0.5 * norm2(s)); };
    if (name == "sin_vx_radius")
        return [](const State& s) { return std::sin(std::hypot(s.v(), s.x())); };
    if (name == "H") return [params](const State& s) { return hamiltonian_H(params, s); };
    if (name == "H0") return [params](const State& s) { return hamiltonian_H0(params, s); };
    std::string known;
    for (const auto& n : observable_names()) known += " " + n;
    throw std::invalid_argument("unknown observable '" + name + "'; known:" + known);
}

std::vector<std::string> observable_names() {
    return {"one", "v", "x", "v2", "x2", "cos_norm2", "sin_norm2", "exp_neg_half_norm2",
            "sin_vx_radius", "H", "H0"};
}

}  // namespace gle
