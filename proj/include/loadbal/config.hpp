#pragma once

// Scenario files: one JSON document holding the network, optional solver
// tolerance overrides and optional simulation settings.
//
//   {
//     "nodes": [ {"id": "a", "arrival_rate": 1.5, "service_rate": 4.0}, ... ],
//     "comm":  {"model": "constant", "params": {"t": 0.05}},
//     "solver": {"alpha_tol": 1e-10, "lambda_tol": 1e-9, "max_outer": 200, "verify_tol": 1e-8},
//     "sim":    {"total_jobs": 100000, "seed": 1, "warmup_fraction": 0.1, "policy": "static_optimal"}
//   }
//
// comm models: constant {t}, mm1_channel {t, capacity}, polynomial {coefficients: [a0, a1, ...]}.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loadbal/delay_models.hpp"
#include "loadbal/errors.hpp"
#include "loadbal/kkt_solver.hpp"
#include "loadbal/network.hpp"
#include "loadbal/simulator.hpp"

namespace loadbal {

/// Schema violation; `path()` is a JSON pointer to the offending value.
class ConfigError : public InputError {
public:
    ConfigError(std::string path, const std::string& what)
        : InputError(path + ": " + what), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct Scenario {
    Network network;
    SolverConfig solver;
    SimConfig sim;
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(path + "/" + key, "missing required field");
    return *it;
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) throw ConfigError(path + "/" + it.key(), "unknown field");
    }
}

inline const json& require_object(const json& v, const std::string& path) {
    if (!v.is_object()) throw ConfigError(path, "expected an object");
    return v;
}

inline double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline double nonnegative_at(const json& v, const std::string& path) {
    const double x = number_at(v, path);
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(path, "expected a non-negative finite number");
    return x;
}

inline double positive_at(const json& v, const std::string& path) {
    const double x = number_at(v, path);
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path, "expected a positive finite number");
    return x;
}

inline CommDelayModel parse_comm(const json& comm) {
    require_object(comm, "/comm");
    reject_unknown(comm, {"model", "params"}, "/comm");
    const json& model = require(comm, "model", "/comm");
    if (!model.is_string()) throw ConfigError("/comm/model", "expected a string");
    const json& params = require_object(require(comm, "params", "/comm"), "/comm/params");
    const std::string kind = model.get<std::string>();
    if (kind == "constant") {
        reject_unknown(params, {"t"}, "/comm/params");
        return ConstantDelay{nonnegative_at(require(params, "t", "/comm/params"), "/comm/params/t")};
    }
    if (kind == "mm1_channel") {
        reject_unknown(params, {"t", "capacity"}, "/comm/params");
        return ChannelDelay{nonnegative_at(require(params, "t", "/comm/params"), "/comm/params/t"),
                            positive_at(require(params, "capacity", "/comm/params"), "/comm/params/capacity")};
    }
    if (kind == "polynomial") {
        reject_unknown(params, {"coefficients"}, "/comm/params");
        const json& coeffs = require(params, "coefficients", "/comm/params");
        if (!coeffs.is_array()) throw ConfigError("/comm/params/coefficients", "expected an array");
        PolynomialDelay p;
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            p.coefficients.push_back(nonnegative_at(coeffs[k], "/comm/params/coefficients/" + std::to_string(k)));
        }
        return p;
    }
    throw ConfigError("/comm/model", "unknown model '" + kind + "' (expected constant, mm1_channel or polynomial)");
}

inline json comm_to_json(const CommDelayModel& comm) {
    json out;
    out["model"] = std::string(comm_model_name(comm));
    std::visit(
        [&out](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ConstantDelay>) out["params"] = {{"t", m.t}};
            else if constexpr (std::is_same_v<M, ChannelDelay>) out["params"] = {{"t", m.t}, {"capacity", m.capacity}};
            else out["params"] = {{"coefficients", m.coefficients}};
        },
        comm);
    return out;
}

inline std::uint64_t count_at(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& doc) {
    using detail::require;
    detail::require_object(doc, "");
    detail::reject_unknown(doc, {"nodes", "comm", "solver", "sim"}, "");

    const auto& nodes_json = require(doc, "nodes", "");
    if (!nodes_json.is_array() || nodes_json.empty()) throw ConfigError("/nodes", "expected a non-empty array");
    std::vector<Node> nodes;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < nodes_json.size(); ++i) {
        const std::string path = "/nodes/" + std::to_string(i);
        const auto& nj = detail::require_object(nodes_json[i], path);
        detail::reject_unknown(nj, {"id", "arrival_rate", "service_rate"}, path);
        const auto& id = require(nj, "id", path);
        if (!id.is_string() || id.get<std::string>().empty()) throw ConfigError(path + "/id", "expected a non-empty string");
        if (!ids.insert(id.get<std::string>()).second) throw ConfigError(path + "/id", "duplicate node id");
        const double phi = detail::nonnegative_at(require(nj, "arrival_rate", path), path + "/arrival_rate");
        const double mu = detail::positive_at(require(nj, "service_rate", path), path + "/service_rate");
        nodes.push_back(Node{id.get<std::string>(), phi, NodeDelayModel::mm1(mu)});
    }
    CommDelayModel comm = detail::parse_comm(require(doc, "comm", ""));

    SolverConfig solver;
    if (auto it = doc.find("solver"); it != doc.end()) {
        detail::require_object(*it, "/solver");
        detail::reject_unknown(*it, {"alpha_tol", "lambda_tol", "max_outer", "verify_tol"}, "/solver");
        if (it->contains("alpha_tol")) solver.alpha_tol = detail::positive_at((*it)["alpha_tol"], "/solver/alpha_tol");
        if (it->contains("lambda_tol")) solver.lambda_tol = detail::positive_at((*it)["lambda_tol"], "/solver/lambda_tol");
        if (it->contains("verify_tol")) solver.verify_tol = detail::positive_at((*it)["verify_tol"], "/solver/verify_tol");
        if (it->contains("max_outer")) {
            const auto v = detail::count_at((*it)["max_outer"], "/solver/max_outer");
            if (v < 1) throw ConfigError("/solver/max_outer", "must be >= 1");
            solver.max_outer = static_cast<int>(v);
        }
    }

    SimConfig sim;
    if (auto it = doc.find("sim"); it != doc.end()) {
        detail::require_object(*it, "/sim");
        detail::reject_unknown(*it, {"total_jobs", "seed", "warmup_fraction", "policy"}, "/sim");
        if (it->contains("total_jobs")) {
            sim.total_jobs = detail::count_at((*it)["total_jobs"], "/sim/total_jobs");
            if (sim.total_jobs < 1) throw ConfigError("/sim/total_jobs", "must be >= 1");
        }
        if (it->contains("seed")) sim.seed = detail::count_at((*it)["seed"], "/sim/seed");
        if (it->contains("warmup_fraction")) {
            sim.warmup_fraction = detail::nonnegative_at((*it)["warmup_fraction"], "/sim/warmup_fraction");
            if (!(sim.warmup_fraction < 1.0)) throw ConfigError("/sim/warmup_fraction", "must be < 1");
        }
        if (it->contains("policy")) {
            const auto& p = (*it)["policy"];
            if (!p.is_string()) throw ConfigError("/sim/policy", "expected a string");
            try {
                sim.policy = parse_policy(p.get<std::string>());
            } catch (const InputError& e) {
                throw ConfigError("/sim/policy", e.what());
            }
        }
    }

    return Scenario{Network(std::move(nodes), std::move(comm)), solver, sim};
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json doc;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& node : s.network.nodes()) {
        doc["nodes"].push_back(
            {{"id", node.id}, {"arrival_rate", node.arrival_rate}, {"service_rate", node.delay.service_rate}});
    }
    doc["comm"] = detail::comm_to_json(s.network.comm());
    doc["solver"] = {{"alpha_tol", s.solver.alpha_tol},
                     {"lambda_tol", s.solver.lambda_tol},
                     {"max_outer", s.solver.max_outer},
                     {"verify_tol", s.solver.verify_tol}};
    doc["sim"] = {{"total_jobs", s.sim.total_jobs},
                  {"seed", s.sim.seed},
                  {"warmup_fraction", s.sim.warmup_fraction},
                  {"policy", std::string(policy_name(s.sim.policy))}};
    return doc;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("not valid JSON: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_json_file(path)); }

/// Converts "comm.params.t", "nodes.0.arrival_rate", "nodes[0].arrival_rate"
/// or "nodes.<id>.arrival_rate" to a JSON pointer into `doc`. Throws
/// ConfigError unless the path addresses an existing number.
inline nlohmann::json::json_pointer resolve_param_path(const nlohmann::json& doc, const std::string& dotted) {
    std::string normalized;
    for (char c : dotted) {
        if (c == '[') normalized += '.';
        else if (c != ']') normalized += c;
    }
    std::vector<std::string> parts;
    std::stringstream ss(normalized);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) throw ConfigError(dotted, "malformed parameter path");
        parts.push_back(part);
    }
    if (parts.empty()) throw ConfigError(dotted, "empty parameter path");
    if (parts.size() >= 2 && parts[0] == "nodes" && doc.contains("nodes") &&
        parts[1].find_first_not_of("0123456789") != std::string::npos) {
        const auto& nodes = doc["nodes"];
        bool found = false;
        for (std::size_t i = 0; i < nodes.size() && !found; ++i) {
            if (nodes[i].value("id", "") == parts[1]) {
                parts[1] = std::to_string(i);
                found = true;
            }
        }
        if (!found) throw ConfigError(dotted, "no node with id '" + parts[1] + "'");
    }
    std::string pointer;
    for (const auto& p : parts) pointer += "/" + p;
    nlohmann::json::json_pointer ptr(pointer);
    if (!doc.contains(ptr) || !doc.at(ptr).is_number()) {
        throw ConfigError(pointer, "parameter path does not address a numeric field");
    }
    return ptr;
}

}  // namespace loadbal
