#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace schedlab {

// One workflow task: total work in machine instructions, a (cpu, mem)
// demand vector and an optional compatibility restriction. An empty
// compat set means "runs on every VM".
struct TaskSpec {
    int id = 0;
    double length = 0.0;  // work units (MI)
    int cpu = 1;          // cores demanded
    double mem = 0.0;     // memory units demanded
    std::vector<int> compat;

    bool compatible_with(int vm_id) const {
        if (compat.empty()) return true;
        return std::find(compat.begin(), compat.end(), vm_id) != compat.end();
    }
};

struct WorkflowDag {
    std::vector<TaskSpec> tasks;
    std::vector<std::pair<int, int>> edges;  // parent -> child

    int size() const { return static_cast<int>(tasks.size()); }

    std::vector<std::vector<int>> parents() const {
        std::vector<std::vector<int>> p(tasks.size());
        for (auto [a, b] : edges) p[b].push_back(a);
        return p;
    }
    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> c(tasks.size());
        for (auto [a, b] : edges) c[a].push_back(b);
        return c;
    }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

struct DagMetrics {
    double total_work = 0.0;  // W
    double cp_length = 0.0;   // work-weighted longest path
    int depth = 0;            // number of levels
    std::vector<int> level_widths;
    double phi = 0.0;  // total_work / cp_length
};

namespace detail {

// Kahn topological order; empty optional if a cycle exists.
inline std::optional<std::vector<int>> topo_order(const WorkflowDag& dag) {
    const int n = dag.size();
    std::vector<int> indeg(n, 0);
    auto children = dag.children();
    for (auto [a, b] : dag.edges) {
        (void)a;
        ++indeg[b];
    }
    std::vector<int> queue, order;
    for (int i = 0; i < n; ++i)
        if (indeg[i] == 0) queue.push_back(i);
    while (!queue.empty()) {
        int u = queue.back();
        queue.pop_back();
        order.push_back(u);
        for (int v : children[u])
            if (--indeg[v] == 0) queue.push_back(v);
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

}  // namespace detail

// Report-style validation: collects every violation instead of throwing
// on the first one, so generator bugs surface with full context.
inline ValidationReport validate_dag(const WorkflowDag& dag) {
    ValidationReport rep;
    const int n = dag.size();
    if (n == 0) {
        rep.violations.push_back("empty workflow");
        return rep;
    }
    for (int i = 0; i < n; ++i) {
        const TaskSpec& t = dag.tasks[i];
        if (t.id != i)
            rep.violations.push_back("task ids must be dense 0..n-1, slot " +
                                     std::to_string(i) + " holds id " + std::to_string(t.id));
        if (!(t.length > 0.0))
            rep.violations.push_back("nonpositive work on task " + std::to_string(t.id));
        if (t.cpu < 1)
            rep.violations.push_back("cpu demand < 1 on task " + std::to_string(t.id));
        if (!(t.mem > 0.0))
            rep.violations.push_back("nonpositive mem on task " + std::to_string(t.id));
    }
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : dag.edges) {
        if (a < 0 || a >= n || b < 0 || b >= n) {
            rep.violations.push_back("dangling edge (" + std::to_string(a) + "," +
                                     std::to_string(b) + ")");
            continue;
        }
        if (!seen.insert({a, b}).second)
            rep.violations.push_back("duplicate edge (" + std::to_string(a) + "," +
                                     std::to_string(b) + ")");
        if (a == b) rep.violations.push_back("self loop on task " + std::to_string(a));
    }
    if (!rep.violations.empty()) return rep;  // id/edge errors make the rest unreliable

    if (!detail::topo_order(dag)) rep.violations.push_back("cycle");
    return rep;
}

// Longest-path levelization: sources at level 0, every other task one
// past its deepest parent.
inline std::vector<int> task_levels(const WorkflowDag& dag) {
    auto order = detail::topo_order(dag);
    if (!order) throw std::invalid_argument("task_levels: cyclic dag");
    auto parents = dag.parents();
    std::vector<int> level(dag.size(), 0);
    for (int u : *order)
        for (int p : parents[u]) level[u] = std::max(level[u], level[p] + 1);
    return level;
}

inline DagMetrics dag_metrics(const WorkflowDag& dag) {
    ValidationReport rep = validate_dag(dag);
    if (!rep.ok()) throw std::invalid_argument("dag_metrics: invalid dag: " + rep.violations[0]);

    DagMetrics m;
    auto order = *detail::topo_order(dag);
    auto parents = dag.parents();
    std::vector<int> level = task_levels(dag);
    std::vector<double> cp(dag.size(), 0.0);  // heaviest path ending at i
    for (int u : order) {
        double best = 0.0;
        for (int p : parents[u]) best = std::max(best, cp[p]);
        cp[u] = best + dag.tasks[u].length;
        m.total_work += dag.tasks[u].length;
        m.cp_length = std::max(m.cp_length, cp[u]);
    }
    m.depth = 1 + *std::max_element(level.begin(), level.end());
    m.level_widths.assign(m.depth, 0);
    for (int l : level) ++m.level_widths[l];
    m.phi = m.total_work / m.cp_length;
    return m;
}

inline nlohmann::json to_json(const WorkflowDag& dag) {
    nlohmann::json j;
    j["tasks"] = nlohmann::json::array();
    for (const TaskSpec& t : dag.tasks) {
        nlohmann::json jt;
        jt["id"] = t.id;
        jt["length"] = t.length;
        jt["cpu"] = t.cpu;
        jt["mem"] = t.mem;
        jt["compat"] = t.compat;
        j["tasks"].push_back(jt);
    }
    j["edges"] = nlohmann::json::array();
    for (auto [a, b] : dag.edges) j["edges"].push_back({a, b});
    return j;
}

inline WorkflowDag workflow_from_json(const nlohmann::json& j) {
    WorkflowDag dag;
    for (const auto& jt : j.at("tasks")) {
        TaskSpec t;
        t.id = jt.at("id").get<int>();
        t.length = jt.at("length").get<double>();
        t.cpu = jt.at("cpu").get<int>();
        t.mem = jt.at("mem").get<double>();
        if (jt.contains("compat")) t.compat = jt.at("compat").get<std::vector<int>>();
        dag.tasks.push_back(std::move(t));
    }
    for (const auto& je : j.at("edges"))
        dag.edges.emplace_back(je.at(0).get<int>(), je.at(1).get<int>());
    ValidationReport rep = validate_dag(dag);
    if (!rep.ok())
        throw std::invalid_argument("workflow_from_json: " + rep.violations[0]);
    return dag;
}

}  // namespace schedlab
