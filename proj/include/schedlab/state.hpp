#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "schedlab/generator.hpp"
#include "schedlab/simengine.hpp"

namespace schedlab {

// Task lifecycle. Completion times are fixed at assignment (the simulator
// plans the whole execution window), so Running only means the window
// spans the current clock; at termination every task reports Done even if
// its planned completion lies past the final clock.
enum class TaskStatus { NotReady, Ready, Running, Done };

struct ActionMask {
    int n_tasks = 0;
    int n_vms = 0;
    std::vector<std::uint8_t> bits;  // row-major task x vm

    int index(int task, int vm) const { return task * n_vms + vm; }
    bool at(int task, int vm) const { return bits[index(task, vm)] != 0; }
    int count() const {
        int c = 0;
        for (auto b : bits) c += b != 0;
        return c;
    }
};

constexpr double kNeverReady = std::numeric_limits<double>::infinity();

// The MDP state: simulation clock, per-task bookkeeping and per-VM
// timelines. Copyable by value; the DAG and cluster are shared read-only.
struct SchedState {
    std::shared_ptr<const WorkflowDag> dag;
    std::shared_ptr<const Cluster> cluster;

    double clock = 0.0;
    int step_index = 0;
    std::vector<TaskStatus> status;
    std::vector<int> assignment;       // vm id or -1
    std::vector<double> start;         // NaN until assigned
    std::vector<double> completion;    // NaN until assigned
    std::vector<double> parent_ready;  // max parent completion; +inf until known
    std::vector<VmTimeline> timelines;

    // cost-to-go caches maintained by the environment
    double t_hat = std::numeric_limits<double>::quiet_NaN();
    double e_hat = std::numeric_limits<double>::quiet_NaN();
    double t_hat0 = std::numeric_limits<double>::quiet_NaN();  // feature scale

    int n_tasks() const { return dag->size(); }
    int n_vms() const { return cluster->size(); }

    bool assigned(int task) const { return assignment[task] >= 0; }
    bool terminal() const { return step_index >= n_tasks(); }

    bool executing(int task) const {
        return assigned(task) && start[task] <= clock && clock < completion[task];
    }

    int unassigned_count() const { return n_tasks() - step_index; }
};

namespace detail {

inline void sweep_statuses(SchedState& s) {
    for (int i = 0; i < s.n_tasks(); ++i)
        if (s.status[i] == TaskStatus::Running && s.completion[i] <= s.clock + kTimeTol)
            s.status[i] = TaskStatus::Done;
}

// Marks tasks Ready whose parents are all assigned and whose unlock time
// has been reached; returns whether any task is ready.
inline bool refresh_readiness(SchedState& s, const std::vector<std::vector<int>>& parents) {
    bool any_ready = false;
    for (int i = 0; i < s.n_tasks(); ++i) {
        if (s.assigned(i)) continue;
        if (s.status[i] == TaskStatus::Ready) {
            any_ready = true;
            continue;
        }
        bool all_parents_assigned = true;
        double pr = 0.0;
        for (int p : parents[i]) {
            if (!s.assigned(p)) {
                all_parents_assigned = false;
                break;
            }
            pr = std::max(pr, s.completion[p]);
        }
        if (!all_parents_assigned) continue;
        s.parent_ready[i] = pr;
        if (pr <= s.clock + kTimeTol) {
            s.status[i] = TaskStatus::Ready;
            any_ready = true;
        }
    }
    return any_ready;
}

}  // namespace detail

inline SchedState reset_state(std::shared_ptr<const WorkflowDag> dag,
                              std::shared_ptr<const Cluster> cluster,
                              bool require_queue_free = true) {
    ValidationReport rep = validate_dag(*dag);
    if (!rep.ok()) throw std::invalid_argument("reset_state: invalid dag: " + rep.violations[0]);
    if (auto why = queue_free_violation(*dag, cluster->vms)) {
        if (require_queue_free)
            throw std::invalid_argument("reset_state: instance is not queue-free: " + *why);
    }

    SchedState s;
    s.dag = std::move(dag);
    s.cluster = std::move(cluster);
    const int n = s.n_tasks();
    s.status.assign(n, TaskStatus::NotReady);
    s.assignment.assign(n, -1);
    s.start.assign(n, std::numeric_limits<double>::quiet_NaN());
    s.completion.assign(n, std::numeric_limits<double>::quiet_NaN());
    s.parent_ready.assign(n, kNeverReady);
    for (const VmSpec& v : s.cluster->vms) s.timelines.emplace_back(v);

    auto parents = s.dag->parents();
    for (int i = 0; i < n; ++i)
        if (parents[i].empty()) {
            s.parent_ready[i] = 0.0;
            s.status[i] = TaskStatus::Ready;
        }
    return s;
}

// Exactly the feasible set F(s): ready, compatible, and the demand fits
// the VM outright (a feasible start always exists once placed tasks
// release their resources).
inline ActionMask feasible_actions(const SchedState& s) {
    ActionMask mask;
    mask.n_tasks = s.n_tasks();
    mask.n_vms = s.n_vms();
    mask.bits.assign(static_cast<std::size_t>(mask.n_tasks) * mask.n_vms, 0);
    for (int i = 0; i < mask.n_tasks; ++i) {
        if (s.status[i] != TaskStatus::Ready) continue;
        const TaskSpec& t = s.dag->tasks[i];
        for (int m = 0; m < mask.n_vms; ++m) {
            const VmSpec& v = s.cluster->vms[m];
            if (t.compatible_with(v.id) && t.cpu <= v.cores && t.mem <= v.mem + kTimeTol)
                mask.bits[mask.index(i, m)] = 1;
        }
    }
    return mask;
}

// Applies (task, vm): schedules at the earliest feasible start, then
// updates readiness; if nothing is ready and tasks remain, the clock
// jumps to the earliest completion that unlocks a task. Reward shaping
// lives in env.hpp.
inline void apply_action(SchedState& s, int task, int vm) {
    ActionMask mask = feasible_actions(s);
    if (task < 0 || task >= s.n_tasks() || vm < 0 || vm >= s.n_vms() || !mask.at(task, vm))
        throw std::logic_error("apply_action: masked action (" + std::to_string(task) + "," +
                               std::to_string(vm) + ")");

    const TaskSpec& t = s.dag->tasks[task];
    VmTimeline& tl = s.timelines[vm];
    double t_ready = std::max(s.parent_ready[task], s.clock);
    double t_start = earliest_feasible_start(tl, t, t_ready);
    double t_end = place_task(tl, t, t_start);

    s.assignment[task] = vm;
    s.start[task] = t_start;
    s.completion[task] = t_end;
    s.status[task] = TaskStatus::Running;
    ++s.step_index;

    detail::sweep_statuses(s);
    auto parents = s.dag->parents();
    bool any_ready = detail::refresh_readiness(s, parents);

    if (s.terminal()) {
        for (auto& st : s.status) st = TaskStatus::Done;
        return;
    }
    if (!any_ready) {
        // the earliest unlock time among frontier tasks is a completion time
        double next = kNeverReady;
        for (int i = 0; i < s.n_tasks(); ++i)
            if (!s.assigned(i) && s.parent_ready[i] < kNeverReady)
                next = std::min(next, s.parent_ready[i]);
        if (next == kNeverReady)
            throw std::logic_error("apply_action: no task can become ready");
        s.clock = next;
        detail::sweep_statuses(s);
        detail::refresh_readiness(s, parents);
    }
}

inline double realized_makespan(const SchedState& s) {
    if (!s.terminal()) throw std::logic_error("realized_makespan: episode not finished");
    double mk = 0.0;
    for (double c : s.completion) mk = std::max(mk, c);
    return mk;
}

}  // namespace schedlab
