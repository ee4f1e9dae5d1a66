#include "gle/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace gle {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

std::vector<double> state_vector(const json& j, const std::string& where, int dim) {
    if (!j.is_array()) throw std::invalid_argument(where + " must be an array");
    std::vector<double> v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != dim)
        throw std::invalid_argument(where + " must have k+2 = " + std::to_string(dim) +
                                    " entries");
    return v;
}

ModelParams parse_model(const json& m) {
    reject_unknown(m, "model", {"gamma", "alpha", "lambda", "potential", "hessian_lower_bound"});
    if (!m.contains("gamma") || !m.contains("alpha") || !m.contains("lambda") ||
        !m.contains("potential"))
        throw std::invalid_argument("model requires gamma, alpha, lambda, potential");
    PotentialSpec pot;
    const json& pj = m.at("potential");
    if (pj.is_string()) {
        const std::string name = pj.get<std::string>();
        if (name != "double_well")
            throw std::invalid_argument("unknown potential preset '" + name + "'");
        if (m.contains("hessian_lower_bound"))
            pot = make_potential(double_well().coefficients, m.at("hessian_lower_bound"));
        else
            pot = double_well();
    } else if (pj.is_array()) {
        if (!m.contains("hessian_lower_bound"))
            throw std::invalid_argument(
                "model.hessian_lower_bound is required with coefficient potentials");
        pot = make_potential(pj.get<std::vector<double>>(), m.at("hessian_lower_bound"));
    } else {
        throw std::invalid_argument("model.potential must be a preset name or coefficients");
    }
    return make_model(m.at("gamma").get<double>(), m.at("alpha").get<std::vector<double>>(),
                      m.at("lambda").get<std::vector<double>>(), std::move(pot));
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    json root;
    {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config file " + path);
        try {
            root = json::parse(in, nullptr, true, true);  // allow comments
        } catch (const json::parse_error& e) {
            throw std::invalid_argument("config parse error in " + path + ": " + e.what());
        }
    }
    reject_unknown(root, "config",
                   {"experiment", "model", "seed", "workers", "out_dir", "override_hstar",
                    "zero_noise", "converge", "ergodic", "distribution", "malliavin",
                    "simulate"});
    RunConfig cfg;
    if (!root.contains("experiment") || !root.contains("model"))
        throw std::invalid_argument("config requires 'experiment' and 'model'");
    cfg.experiment = root.at("experiment").get<std::string>();
    const std::set<std::string> experiments = {"converge", "ergodic", "distribution",
                                               "malliavin", "simulate"};
    if (!experiments.count(cfg.experiment))
        throw std::invalid_argument("experiment must be one of converge, ergodic, distribution, "
                                    "malliavin, simulate");
    for (const auto& e : experiments)
        if (e != cfg.experiment && root.contains(e))
            throw std::invalid_argument("config section '" + e + "' does not match experiment '" +
                                        cfg.experiment + "'");
    cfg.model = parse_model(root.at("model"));
    const int dim = cfg.model.dim();
    if (root.contains("seed")) cfg.seed = root.at("seed").get<uint64_t>();
    if (root.contains("workers")) cfg.workers = root.at("workers").get<int>();
    if (root.contains("out_dir")) cfg.out_dir = root.at("out_dir").get<std::string>();
    if (root.contains("override_hstar")) cfg.override_hstar = root.at("override_hstar").get<bool>();
    if (root.contains("zero_noise")) cfg.zero_noise = root.at("zero_noise").get<bool>();

    const std::vector<double> ones(static_cast<size_t>(dim), 1.0);
    cfg.converge.initial = ones;
    cfg.distribution.initial = ones;
    cfg.malliavin.initial = ones;
    cfg.simulate.initial = ones;
    if (dim == 5) {
        cfg.ergodic.initials = {{-10, 2, 3, 4, 1}, {2, 1, 1, 1, -10}, {1, -1, -1, -1, 3},
                                {4, 2, 3, 4, 2}};
    } else {
        cfg.ergodic.initials = {ones};
    }

    if (cfg.experiment == "converge" && root.contains("converge")) {
        const json& c = root.at("converge");
        reject_unknown(c, "converge", {"T", "n_paths", "levels", "initial", "weak_observable"});
        if (c.contains("T")) cfg.converge.T = c.at("T").get<double>();
        if (c.contains("n_paths")) cfg.converge.n_paths = c.at("n_paths").get<int>();
        if (c.contains("levels")) cfg.converge.levels = c.at("levels").get<std::vector<double>>();
        if (c.contains("initial"))
            cfg.converge.initial = state_vector(c.at("initial"), "converge.initial", dim);
        if (c.contains("weak_observable"))
            cfg.converge.weak_observable = c.at("weak_observable").get<std::string>();
    }
    if (cfg.experiment == "ergodic" && root.contains("ergodic")) {
        const json& c = root.at("ergodic");
        reject_unknown(c, "ergodic",
                       {"T", "h", "n_paths", "initials", "labels", "observables",
                        "oracle_samples", "burn_in", "stride"});
        if (c.contains("T")) cfg.ergodic.T = c.at("T").get<double>();
        if (c.contains("h")) cfg.ergodic.h = c.at("h").get<double>();
        if (c.contains("n_paths")) cfg.ergodic.n_paths = c.at("n_paths").get<int>();
        if (c.contains("initials")) {
            cfg.ergodic.initials.clear();
            for (const auto& row : c.at("initials"))
                cfg.ergodic.initials.push_back(state_vector(row, "ergodic.initials", dim));
        }
        if (c.contains("labels"))
            cfg.ergodic.labels = c.at("labels").get<std::vector<std::string>>();
        if (c.contains("observables"))
            cfg.ergodic.observables = c.at("observables").get<std::vector<std::string>>();
        if (c.contains("oracle_samples"))
            cfg.ergodic.oracle_samples = c.at("oracle_samples").get<int64_t>();
        if (c.contains("burn_in")) cfg.ergodic.burn_in = c.at("burn_in").get<int>();
        if (c.contains("stride")) cfg.ergodic.stride = c.at("stride").get<int>();
    }
    if (cfg.ergodic.labels.empty())
        for (size_t i = 0; i < cfg.ergodic.initials.size(); ++i)
            cfg.ergodic.labels.push_back("Y" + std::to_string(i + 1));
    if (cfg.ergodic.labels.size() != cfg.ergodic.initials.size())
        throw std::invalid_argument("ergodic.labels must match ergodic.initials");

    if (cfg.experiment == "distribution" && root.contains("distribution")) {
        const json& c = root.at("distribution");
        reject_unknown(c, "distribution",
                       {"T", "h", "n_paths", "times", "initial", "bins", "range",
                        "baseline_replicates"});
        if (c.contains("T")) cfg.distribution.T = c.at("T").get<double>();
        if (c.contains("h")) cfg.distribution.h = c.at("h").get<double>();
        if (c.contains("n_paths")) cfg.distribution.n_paths = c.at("n_paths").get<int>();
        if (c.contains("times"))
            cfg.distribution.times = c.at("times").get<std::vector<double>>();
        if (c.contains("initial"))
            cfg.distribution.initial = state_vector(c.at("initial"), "distribution.initial", dim);
        if (c.contains("bins")) cfg.distribution.bins = c.at("bins").get<int>();
        if (c.contains("range")) {
            const auto r = c.at("range").get<std::vector<double>>();
            if (r.size() != 4)
                throw std::invalid_argument("distribution.range must be [vmin,vmax,xmin,xmax]");
            cfg.distribution.vmin = r[0];
            cfg.distribution.vmax = r[1];
            cfg.distribution.xmin = r[2];
            cfg.distribution.xmax = r[3];
        }
        if (c.contains("baseline_replicates"))
            cfg.distribution.baseline_replicates = c.at("baseline_replicates").get<int>();
        if (cfg.distribution.times.empty())
            throw std::invalid_argument("distribution.times must be nonempty");
    }
    if (cfg.experiment == "malliavin" && root.contains("malliavin")) {
        const json& c = root.at("malliavin");
        reject_unknown(c, "malliavin",
                       {"T", "h_list", "n_paths", "initial", "fd_states", "det_draws"});
        if (c.contains("T")) cfg.malliavin.T = c.at("T").get<double>();
        if (c.contains("h_list"))
            cfg.malliavin.h_list = c.at("h_list").get<std::vector<double>>();
        if (c.contains("n_paths")) cfg.malliavin.n_paths = c.at("n_paths").get<int>();
        if (c.contains("initial"))
            cfg.malliavin.initial = state_vector(c.at("initial"), "malliavin.initial", dim);
        if (c.contains("fd_states")) cfg.malliavin.fd_states = c.at("fd_states").get<int>();
        if (c.contains("det_draws")) cfg.malliavin.det_draws = c.at("det_draws").get<int>();
    }
    if (cfg.experiment == "simulate" && root.contains("simulate")) {
        const json& c = root.at("simulate");
        reject_unknown(c, "simulate", {"T", "h", "n_paths", "stride", "initial", "method"});
        if (c.contains("T")) cfg.simulate.T = c.at("T").get<double>();
        if (c.contains("h")) cfg.simulate.h = c.at("h").get<double>();
        if (c.contains("n_paths")) cfg.simulate.n_paths = c.at("n_paths").get<int>();
        if (c.contains("stride")) cfg.simulate.stride = c.at("stride").get<int>();
        if (c.contains("initial"))
            cfg.simulate.initial = state_vector(c.at("initial"), "simulate.initial", dim);
        if (c.contains("method")) cfg.simulate.method = c.at("method").get<std::string>();
        if (cfg.simulate.method != "avf" && cfg.simulate.method != "em")
            throw std::invalid_argument("simulate.method must be 'avf' or 'em'");
    }
    return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
    json root;
    root["experiment"] = cfg.experiment;
    root["model"]["gamma"] = cfg.model.gamma;
    root["model"]["alpha"] = cfg.model.alpha;
    root["model"]["lambda"] = cfg.model.lambda;
    root["model"]["potential"] = cfg.model.potential.coefficients;
    root["model"]["hessian_lower_bound"] = cfg.model.potential.hessian_lower_bound;
    root["seed"] = cfg.seed;
    root["workers"] = cfg.workers;
    root["out_dir"] = cfg.out_dir;
    root["override_hstar"] = cfg.override_hstar;
    root["zero_noise"] = cfg.zero_noise;
    if (cfg.experiment == "converge") {
        json& c = root["converge"];
        c["T"] = cfg.converge.T;
        c["n_paths"] = cfg.converge.n_paths;
        c["levels"] = cfg.converge.levels;
        c["initial"] = cfg.converge.initial;
        c["weak_observable"] = cfg.converge.weak_observable;
    } else if (cfg.experiment == "ergodic") {
        json& c = root["ergodic"];
        c["T"] = cfg.ergodic.T;
        c["h"] = cfg.ergodic.h;
        c["n_paths"] = cfg.ergodic.n_paths;
        c["initials"] = cfg.ergodic.initials;
        c["labels"] = cfg.ergodic.labels;
        c["observables"] = cfg.ergodic.observables;
        c["oracle_samples"] = cfg.ergodic.oracle_samples;
        c["burn_in"] = cfg.ergodic.burn_in;
        c["stride"] = cfg.ergodic.stride;
    } else if (cfg.experiment == "distribution") {
        json& c = root["distribution"];
        c["T"] = cfg.distribution.T;
        c["h"] = cfg.distribution.h;
        c["n_paths"] = cfg.distribution.n_paths;
        c["times"] = cfg.distribution.times;
        c["initial"] = cfg.distribution.initial;
        c["bins"] = cfg.distribution.bins;
        c["range"] = {cfg.distribution.vmin, cfg.distribution.vmax, cfg.distribution.xmin,
                      cfg.distribution.xmax};
        c["baseline_replicates"] = cfg.distribution.baseline_replicates;
    } else if (cfg.experiment == "malliavin") {
        json& c = root["malliavin"];
        c["T"] = cfg.malliavin.T;
        c["h_list"] = cfg.malliavin.h_list;
        c["n_paths"] = cfg.malliavin.n_paths;
        c["initial"] = cfg.malliavin.initial;
        c["fd_states"] = cfg.malliavin.fd_states;
        c["det_draws"] = cfg.malliavin.det_draws;
    } else if (cfg.experiment == "simulate") {
        json& c = root["simulate"];
        c["T"] = cfg.simulate.T;
        c["h"] = cfg.simulate.h;
        c["n_paths"] = cfg.simulate.n_paths;
        c["stride"] = cfg.simulate.stride;
        c["initial"] = cfg.simulate.initial;
        c["method"] = cfg.simulate.method;
    }
    return root.dump(2) + "\n";
}

}  // namespace gle
