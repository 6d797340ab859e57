#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "schedlab/cluster.hpp"
#include "schedlab/workflow.hpp"

namespace schedlab {

// Absolute tolerance for time comparisons throughout the simulator.
inline constexpr double kTimeTol = 1e-9;

struct Placement {
    int task = -1;
    double start = 0.0;
    double end = 0.0;
    int cpu = 0;
    double mem = 0.0;
};

// Resource delta at one instant. Releases sort before acquires at equal
// timestamps so a task can start the moment its predecessor frees the VM.
struct TimelineEvent {
    double t = 0.0;
    double dmem = 0.0;
    int dcores = 0;
    bool release = false;
};

struct VmTimeline {
    VmSpec vm;
    std::vector<TimelineEvent> events;  // kept sorted by (t, release-first)
    std::vector<Placement> placements;

    explicit VmTimeline(VmSpec v = {}) : vm(v) {}
};

struct EnergyReport {
    std::vector<double> per_vm_total;
    std::vector<double> per_vm_active;
    double total = 0.0;
    double active_total = 0.0;
    double horizon = 0.0;
};

namespace detail {

inline bool event_before(const TimelineEvent& a, const TimelineEvent& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.release && !b.release;
}

// Piecewise-constant usage profile: segment i covers [t[i], t[i+1]), the
// last segment extends to infinity with zero usage.
struct UsageProfile {
    std::vector<double> t;
    std::vector<int> cores;
    std::vector<double> mem;
};

inline UsageProfile usage_profile(const VmTimeline& tl) {
    UsageProfile p;
    p.t.push_back(0.0);
    p.cores.push_back(0);
    p.mem.push_back(0.0);
    int cores = 0;
    double mem = 0.0;
    for (std::size_t i = 0; i < tl.events.size();) {
        double t = tl.events[i].t;
        while (i < tl.events.size() && tl.events[i].t == t) {
            cores += tl.events[i].dcores;
            mem += tl.events[i].dmem;
            ++i;
        }
        p.t.push_back(t);
        p.cores.push_back(cores);
        p.mem.push_back(mem);
    }
    return p;
}

inline bool window_fits(const UsageProfile& p, const VmSpec& vm, int cpu, double mem,
                        double t_start, double duration) {
    double t_end = t_start + duration;
    for (std::size_t i = 0; i < p.t.size(); ++i) {
        double seg_a = p.t[i];
        double seg_b = i + 1 < p.t.size() ? p.t[i + 1] : std::numeric_limits<double>::infinity();
        if (seg_a >= t_end - kTimeTol) break;
        if (seg_b <= t_start + kTimeTol) continue;
        if (p.cores[i] + cpu > vm.cores) return false;
        if (p.mem[i] + mem > vm.mem + kTimeTol) return false;
    }
    return true;
}

}  // namespace detail

// Least t >= t_ready at which (cpu, mem) fits on the VM for the whole
// window [t, t + duration). Candidate starts are t_ready and later event
// times; usage is zero after the last event so the search always ends.
inline double earliest_feasible_start(const VmTimeline& tl, int cpu, double mem,
                                      double duration, double t_ready) {
    if (cpu > tl.vm.cores || mem > tl.vm.mem + kTimeTol)
        throw std::invalid_argument("earliest_feasible_start: demand incompatible with VM " +
                                    std::to_string(tl.vm.id));
    auto profile = detail::usage_profile(tl);
    if (detail::window_fits(profile, tl.vm, cpu, mem, t_ready, duration)) return t_ready;
    for (std::size_t i = 0; i < profile.t.size(); ++i) {
        double t = profile.t[i];
        if (t <= t_ready + kTimeTol) continue;
        if (detail::window_fits(profile, tl.vm, cpu, mem, t, duration)) return t;
    }
    throw std::logic_error("earliest_feasible_start: no feasible start found");
}

inline double earliest_feasible_start(const VmTimeline& tl, const TaskSpec& task,
                                      double t_ready) {
    return earliest_feasible_start(tl, task.cpu, task.mem, task.length / tl.vm.speed, t_ready);
}

// Commits a task at t_start (which must be feasible) and returns its
// completion time t_start + L / s.
inline double place_task(VmTimeline& tl, const TaskSpec& task, double t_start) {
    double duration = task.length / tl.vm.speed;
    auto profile = detail::usage_profile(tl);
    if (task.cpu > tl.vm.cores || task.mem > tl.vm.mem + kTimeTol ||
        !detail::window_fits(profile, tl.vm, task.cpu, task.mem, t_start, duration))
        throw std::invalid_argument("place_task: infeasible start for task " +
                                    std::to_string(task.id));
    double t_end = t_start + duration;

    TimelineEvent acquire{t_start, task.mem, task.cpu, false};
    TimelineEvent release{t_end, -task.mem, -task.cpu, true};
    tl.events.insert(
        std::upper_bound(tl.events.begin(), tl.events.end(), acquire, detail::event_before),
        acquire);
    tl.events.insert(
        std::upper_bound(tl.events.begin(), tl.events.end(), release, detail::event_before),
        release);
    tl.placements.push_back({task.id, t_start, t_end, task.cpu, task.mem});
    return t_end;
}

// Fractional CPU utilization, right-continuous: a task contributes on
// [start, end).
inline double utilization_at(const VmTimeline& tl, double t) {
    int used = 0;
    for (const Placement& p : tl.placements)
        if (p.start <= t && t < p.end) used += p.cpu;
    return std::min(1.0, static_cast<double>(used) / tl.vm.cores);
}

inline double power_at(const VmTimeline& tl, double t) {
    return tl.vm.p_idle + (tl.vm.p_peak - tl.vm.p_idle) * utilization_at(tl, t);
}

// Exact piecewise-constant integral of P_m(t) = P_idle + (P_peak -
// P_idle) * U_m(t) over [0, horizon] per VM; "active" is the above-idle
// part.
inline EnergyReport integrate_energy(const std::vector<VmTimeline>& tls, double horizon) {
    EnergyReport rep;
    rep.horizon = horizon;
    for (const VmTimeline& tl : tls) {
        for (const Placement& p : tl.placements)
            if (p.end > horizon + kTimeTol)
                throw std::invalid_argument(
                    "integrate_energy: horizon precedes completion of task " +
                    std::to_string(p.task));
        std::vector<double> cuts{0.0, horizon};
        for (const Placement& p : tl.placements) {
            if (p.start > 0.0 && p.start < horizon) cuts.push_back(p.start);
            if (p.end > 0.0 && p.end < horizon) cuts.push_back(p.end);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        double total = 0.0, active = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double len = cuts[i + 1] - cuts[i];
            double u = utilization_at(tl, cuts[i] + 0.5 * len);
            total += (tl.vm.p_idle + (tl.vm.p_peak - tl.vm.p_idle) * u) * len;
            active += (tl.vm.p_peak - tl.vm.p_idle) * u * len;
        }
        rep.per_vm_total.push_back(total);
        rep.per_vm_active.push_back(active);
        rep.total += total;
        rep.active_total += active;
    }
    return rep;
}

// Audits a timeline: prefix usage within [0, capacity] at every event and
// every placement spanning exactly length / speed. Used by tests and the
// feasibility suite.
inline bool timeline_within_capacity(const VmTimeline& tl, std::string* why = nullptr) {
    int cores = 0;
    double mem = 0.0;
    for (const TimelineEvent& e : tl.events) {
        cores += e.dcores;
        mem += e.dmem;
        if (cores < 0 || cores > tl.vm.cores || mem < -kTimeTol || mem > tl.vm.mem + kTimeTol) {
            if (why)
                *why = "capacity violated on vm " + std::to_string(tl.vm.id) + " at t=" +
                       std::to_string(e.t);
            return false;
        }
    }
    if (cores != 0 || std::abs(mem) > kTimeTol) {
        if (why) *why = "unbalanced events on vm " + std::to_string(tl.vm.id);
        return false;
    }
    return true;
}

inline std::string schedule_csv(const std::vector<VmTimeline>& tls) {
    std::string out = "task_id,vm_id,start,end,cpu,mem\n";
    std::vector<std::pair<const Placement*, int>> rows;
    for (const VmTimeline& tl : tls)
        for (const Placement& p : tl.placements) rows.push_back({&p, tl.vm.id});
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) {
        if (a.first->start != b.first->start) return a.first->start < b.first->start;
        return a.first->task < b.first->task;
    });
    char buf[160];
    for (auto [p, vm] : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%d,%.12g\n", p->task, vm, p->start,
                      p->end, p->cpu, p->mem);
        out += buf;
    }
    return out;
}

}  // namespace schedlab
