#include "tlrl/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tlrl/error.hpp"

namespace tlrl {

using nlohmann::json;

namespace {

template <class T, class Pred>
std::optional<std::size_t> index_where(const std::vector<T>& items, Pred pred) {
    const auto it = std::find_if(items.begin(), items.end(), pred);
    if (it == items.end()) return std::nullopt;
    return static_cast<std::size_t>(it - items.begin());
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// --- document access helpers; every failure is a ParseError naming the path

const json& member(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + ": missing key '" + key + "'");
    return *it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path + ": expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ParseError(path + ": expected an integer");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ParseError(path + ": expected a string");
    return v.get<std::string>();
}

std::vector<std::string> as_string_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ParseError(path + ": expected an array");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_string(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
    const auto it = obj.find(key);
    return it == obj.end() ? fallback : as_number(*it, path + "." + key);
}

int int_or(const json& obj, const char* key, int fallback, const std::string& path) {
    const auto it = obj.find(key);
    return it == obj.end() ? fallback : as_int(*it, path + "." + key);
}

const json& array_member(const json& obj, const char* key, const std::string& path) {
    const json& v = member(obj, key, path);
    if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
    return v;
}

FixedTimePlan parse_plan(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path + ": expected an object");
    FixedTimePlan p;
    p.green_a = int_or(j, "green_a", p.green_a, path);
    p.yellow = int_or(j, "yellow", p.yellow, path);
    p.green_b = int_or(j, "green_b", p.green_b, path);
    return p;
}

Junction parse_junction(const json& j, const std::string& path) {
    Junction out;
    out.id = as_string(member(j, "id", path), path + ".id");
    if (const auto it = j.find("signalized"); it != j.end()) {
        if (!it->is_boolean()) throw ParseError(path + ".signalized: expected a boolean");
        out.signalized = it->get<bool>();
    }
    if (const auto it = j.find("axis_a"); it != j.end()) out.axis_a = as_string_list(*it, path + ".axis_a");
    if (const auto it = j.find("axis_b"); it != j.end()) out.axis_b = as_string_list(*it, path + ".axis_b");
    out.yellow = int_or(j, "yellow", out.yellow, path);
    out.min_green = int_or(j, "min_green", out.min_green, path);
    if (const auto it = j.find("fixed_plan"); it != j.end())
        out.fixed_plan = parse_plan(*it, path + ".fixed_plan");
    return out;
}

Edge parse_edge(const json& j, const std::string& path) {
    Edge e;
    e.id = as_string(member(j, "id", path), path + ".id");
    e.from = as_string(member(j, "from", path), path + ".from");
    e.to = as_string(member(j, "to", path), path + ".to");
    e.length = as_number(member(j, "length", path), path + ".length");
    e.speed_limit = as_number(member(j, "speed", path), path + ".speed");
    return e;
}

Scenario parse_scenario(const json& doc, std::string_view default_id) {
    if (!doc.is_object()) throw ParseError("$: expected an object");
    Scenario s;
    s.id = doc.contains("id") ? as_string(doc["id"], "$.id") : std::string(default_id);

    const json& net = member(doc, "network", "$");
    const json& junctions = array_member(net, "junctions", "$.network");
    for (std::size_t i = 0; i < junctions.size(); ++i)
        s.network.junctions.push_back(
            parse_junction(junctions[i], "$.network.junctions[" + std::to_string(i) + "]"));
    const json& edges = array_member(net, "edges", "$.network");
    for (std::size_t i = 0; i < edges.size(); ++i)
        s.network.edges.push_back(parse_edge(edges[i], "$.network.edges[" + std::to_string(i) + "]"));

    const json& routes = array_member(doc, "routes", "$");
    for (std::size_t i = 0; i < routes.size(); ++i) {
        const std::string path = "$.routes[" + std::to_string(i) + "]";
        Route r;
        r.edges = as_string_list(member(routes[i], "edges", path), path + ".edges");
        r.rate = as_number(member(routes[i], "rate", path), path + ".rate");
        s.routes.push_back(std::move(r));
    }

    s.duration = as_number(member(doc, "duration", "$"), "$.duration");

    if (const auto it = doc.find("vehicle"); it != doc.end()) {
        const json& v = *it;
        if (!v.is_object()) throw ParseError("$.vehicle: expected an object");
        s.vehicle.accel = number_or(v, "a", s.vehicle.accel, "$.vehicle");
        s.vehicle.decel = number_or(v, "b", s.vehicle.decel, "$.vehicle");
        s.vehicle.emergency_decel = number_or(v, "b_emergency", s.vehicle.emergency_decel, "$.vehicle");
        s.vehicle.length = number_or(v, "length", s.vehicle.length, "$.vehicle");
        s.vehicle.min_gap = number_or(v, "min_gap", s.vehicle.min_gap, "$.vehicle");
        s.vehicle.tau = number_or(v, "tau", s.vehicle.tau, "$.vehicle");
    }

    if (const auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_unsigned()) throw ParseError("$.seed: expected a non-negative integer");
        s.seed = it->get<std::uint64_t>();
    }

    if (const auto it = doc.find("train"); it != doc.end()) {
        if (!it->is_object()) throw ParseError("$.train: expected an object");
        s.train = *it;
    }
    return s;
}

}  // namespace

int lane_capacity(const Edge& edge, const VehicleParams& vehicle) {
    const double slot = vehicle.length + vehicle.min_gap;
    if (!(slot > 0.0)) return 1;
    return std::max(1, static_cast<int>(std::floor(edge.length / slot + 1e-9)));
}

const Edge* Network::find_edge(std::string_view id) const {
    const auto i = edge_index(id);
    return i ? &edges[*i] : nullptr;
}

const Junction* Network::find_junction(std::string_view id) const {
    const auto i = junction_index(id);
    return i ? &junctions[*i] : nullptr;
}

std::optional<std::size_t> Network::edge_index(std::string_view id) const {
    return index_where(edges, [&](const Edge& e) { return e.id == id; });
}

std::optional<std::size_t> Network::junction_index(std::string_view id) const {
    return index_where(junctions, [&](const Junction& j) { return j.id == id; });
}

std::vector<std::size_t> Network::signalized_junctions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < junctions.size(); ++i)
        if (junctions[i].signalized) out.push_back(i);
    return out;
}

std::vector<std::string> validate(const Network& network) {
    std::vector<std::string> v;

    std::map<std::string, int> junction_ids;
    for (const auto& j : network.junctions)
        if (++junction_ids[j.id] == 2) v.push_back("junction '" + j.id + "': duplicate id");

    std::map<std::string, const Edge*> edge_by_id;
    for (const auto& e : network.edges) {
        const std::string tag = "edge '" + e.id + "'";
        if (!edge_by_id.emplace(e.id, &e).second) v.push_back(tag + ": duplicate id");
        if (!junction_ids.count(e.from)) v.push_back(tag + ": from-junction '" + e.from + "' does not exist");
        if (!junction_ids.count(e.to)) v.push_back(tag + ": to-junction '" + e.to + "' does not exist");
        if (e.from == e.to) v.push_back(tag + ": starts and ends at the same junction");
        if (!(e.length >= 10.0)) v.push_back(tag + ": length " + fmt_num(e.length) + " violates length ≥ 10");
        if (!(e.speed_limit > 0.0 && e.speed_limit <= 50.0))
            v.push_back(tag + ": speed-limit " + fmt_num(e.speed_limit) + " violates 0 < speed-limit ≤ 50");
    }

    for (const auto& j : network.junctions) {
        const std::string tag = "junction '" + j.id + "'";
        if (!j.signalized) continue;
        if (j.axis_a.empty()) v.push_back(tag + ": axis-A is empty");
        if (j.axis_b.empty()) v.push_back(tag + ": axis-B is empty");
        for (const auto* axis : {&j.axis_a, &j.axis_b}) {
            const char* name = axis == &j.axis_a ? "A" : "B";
            for (const auto& id : *axis) {
                const auto it = edge_by_id.find(id);
                if (it == edge_by_id.end())
                    v.push_back(tag + ": axis-" + name + " edge '" + id + "' does not exist");
                else if (it->second->to != j.id)
                    v.push_back(tag + ": axis-" + name + " edge '" + id + "' does not end at this junction");
            }
        }
        for (const auto& id : j.axis_a)
            if (std::find(j.axis_b.begin(), j.axis_b.end(), id) != j.axis_b.end())
                v.push_back(tag + ": edge '" + id + "' is on both axes");
        if (j.yellow < 1) v.push_back(tag + ": yellow " + std::to_string(j.yellow) + " violates yellow ≥ 1");
        if (j.min_green < 1)
            v.push_back(tag + ": min-green " + std::to_string(j.min_green) + " violates min-green ≥ 1");
        if (j.fixed_plan) {
            const auto& p = *j.fixed_plan;
            if (p.green_a < 1 || p.yellow < 1 || p.green_b < 1)
                v.push_back(tag + ": fixed_plan durations must all be ≥ 1");
            if (p.yellow != j.yellow) v.push_back(tag + ": fixed_plan yellow differs from junction yellow");
            if (p.green_a < j.min_green || p.green_b < j.min_green)
                v.push_back(tag + ": fixed_plan green shorter than min-green");
        }
    }
    return v;
}

std::vector<std::string> validate(const Scenario& s) {
    std::vector<std::string> v = validate(s.network);

    for (std::size_t i = 0; i < s.routes.size(); ++i) {
        const auto& r = s.routes[i];
        const std::string tag = "route " + std::to_string(i);
        if (r.edges.empty()) v.push_back(tag + ": edge list is empty");
        const Edge* prev = nullptr;
        for (const auto& id : r.edges) {
            const Edge* e = s.network.find_edge(id);
            if (!e) {
                v.push_back(tag + ": unknown edge '" + id + "'");
                prev = nullptr;
                continue;
            }
            if (prev && prev->to != e->from)
                v.push_back(tag + ": edges '" + prev->id + "' and '" + e->id + "' are not contiguous");
            prev = e;
        }
        if (!(r.rate >= 0.0)) v.push_back(tag + ": rate " + fmt_num(r.rate) + " violates rate ≥ 0");
    }

    if (!(s.duration > 0.0)) v.push_back("duration " + fmt_num(s.duration) + " violates duration > 0");

    const auto& p = s.vehicle;
    if (!(p.accel > 0.0)) v.push_back("vehicle: a must be > 0");
    if (!(p.decel > 0.0)) v.push_back("vehicle: b must be > 0");
    if (!(p.emergency_decel > p.decel)) v.push_back("vehicle: b_emergency must exceed b");
    if (!(p.length > 0.0)) v.push_back("vehicle: length must be > 0");
    if (!(p.min_gap >= 0.0)) v.push_back("vehicle: min_gap must be ≥ 0");
    if (!(p.tau > 0.0)) v.push_back("vehicle: tau must be > 0");
    return v;
}

std::set<std::pair<std::string, std::string>> conflicting_pairs(const Junction& junction) {
    if (!junction.signalized)
        throw ContractError("junction '" + junction.id + "' is not signalized");
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& a : junction.axis_a)
        for (const auto& b : junction.axis_b) out.emplace(a, b);
    return out;
}

Scenario load_scenario(std::string_view text, std::string_view default_id) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed scenario document: ") + e.what());
    }
    Scenario s = parse_scenario(doc, default_id);
    if (auto violations = validate(s); !violations.empty()) throw ValidationError(std::move(violations));
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str(), std::filesystem::path(path).stem().string());
}

std::string serialize(const Scenario& s) {
    json junctions = json::array();
    for (const auto& j : s.network.junctions) {
        json o = {{"id", j.id}, {"signalized", j.signalized}};
        if (j.signalized || !j.axis_a.empty() || !j.axis_b.empty()) {
            o["axis_a"] = j.axis_a;
            o["axis_b"] = j.axis_b;
        }
        o["yellow"] = j.yellow;
        o["min_green"] = j.min_green;
        if (j.fixed_plan)
            o["fixed_plan"] = {{"green_a", j.fixed_plan->green_a},
                               {"yellow", j.fixed_plan->yellow},
                               {"green_b", j.fixed_plan->green_b}};
        junctions.push_back(std::move(o));
    }
    json edges = json::array();
    for (const auto& e : s.network.edges)
        edges.push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {"length", e.length}, {"speed", e.speed_limit}});
    json routes = json::array();
    for (const auto& r : s.routes) routes.push_back({{"edges", r.edges}, {"rate", r.rate}});

    json doc = {
        {"id", s.id},
        {"network", {{"junctions", junctions}, {"edges", edges}}},
        {"routes", routes},
        {"duration", s.duration},
        {"vehicle",
         {{"a", s.vehicle.accel},
          {"b", s.vehicle.decel},
          {"b_emergency", s.vehicle.emergency_decel},
          {"length", s.vehicle.length},
          {"min_gap", s.vehicle.min_gap},
          {"tau", s.vehicle.tau}}},
        {"seed", s.seed},
    };
    if (!s.train.empty()) doc["train"] = s.train;
    return doc.dump(2) + "\n";
}

}  // namespace tlrl
