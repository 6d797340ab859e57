#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace schedlab {

// One evaluated episode, as consumed by the benchmark matrix, EAF and
// report tooling.
struct RunRecord {
    std::string train_topology;  // "wide", "longcp", or "-" for baselines
    std::string eval_topology;
    std::string regime;
    std::string policy_id;
    std::uint64_t workflow_seed = 0;
    double makespan = 0.0;
    double active_energy = 0.0;
    double total_energy = 0.0;
    int n_decisions = 0;
    int delayed_decisions = 0;  // placements that could not start at their ready time
    double total_reward = 0.0;
};

inline std::string run_records_csv(const std::vector<RunRecord>& records) {
    std::string out = "regime,train_topo,eval_topo,seed,makespan,active_energy,total_energy\n";
    char buf[256];
    for (const RunRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%llu,%.17g,%.17g,%.17g\n", r.regime.c_str(),
                      r.train_topology.c_str(), r.eval_topology.c_str(),
                      static_cast<unsigned long long>(r.workflow_seed), r.makespan,
                      r.active_energy, r.total_energy);
        out += buf;
    }
    return out;
}

}  // namespace schedlab
