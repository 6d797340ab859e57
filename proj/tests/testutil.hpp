#pragma once

#include <memory>
#include <vector>

#include "schedlab/cluster.hpp"
#include "schedlab/workflow.hpp"

namespace testutil {

inline schedlab::TaskSpec task(int id, double length, int cpu = 1, double mem = 1.0) {
    schedlab::TaskSpec t;
    t.id = id;
    t.length = length;
    t.cpu = cpu;
    t.mem = mem;
    return t;
}

inline schedlab::VmSpec vm(int id, double speed, int cores = 4, double mem = 32.0,
                           double p_idle = 100.0, double p_peak = 200.0) {
    schedlab::VmSpec v;
    v.id = id;
    v.speed = speed;
    v.cores = cores;
    v.mem = mem;
    v.p_idle = p_idle;
    v.p_peak = p_peak;
    return v;
}

inline schedlab::WorkflowDag chain(const std::vector<double>& lengths, int cpu = 1,
                                   double mem = 1.0) {
    schedlab::WorkflowDag dag;
    for (std::size_t i = 0; i < lengths.size(); ++i) dag.tasks.push_back(task(int(i), lengths[i], cpu, mem));
    for (std::size_t i = 0; i + 1 < lengths.size(); ++i)
        dag.edges.emplace_back(int(i), int(i + 1));
    return dag;
}

// A -> {B, C} -> D
inline schedlab::WorkflowDag diamond(double l = 1.0) {
    schedlab::WorkflowDag dag;
    for (int i = 0; i < 4; ++i) dag.tasks.push_back(task(i, l));
    dag.edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    return dag;
}

inline std::shared_ptr<const schedlab::Cluster> cluster(std::vector<schedlab::VmSpec> vms,
                                                        schedlab::HostRegime regime =
                                                            schedlab::HostRegime::HS) {
    auto c = std::make_shared<schedlab::Cluster>();
    c->regime = regime;
    c->vms = std::move(vms);
    return c;
}

inline std::shared_ptr<const schedlab::WorkflowDag> share(schedlab::WorkflowDag dag) {
    return std::make_shared<const schedlab::WorkflowDag>(std::move(dag));
}

}  // namespace testutil
