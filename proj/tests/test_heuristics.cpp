#include <catch2/catch_amalgamated.hpp>

#include "schedlab/baselines.hpp"
#include "schedlab/heuristics.hpp"

#include "oracles.hpp"
#include "testutil.hpp"

using namespace schedlab;

namespace {

std::shared_ptr<const Cluster> fast_slow() {
    return testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                              testutil::vm(1, 100.0, 4, 32.0, 100.0, 500.0)});
}

// Precedence + capacity audit of a simulated completion.
void require_feasible(const SchedState& s, const Estimate& est) {
    std::vector<VmTimeline> sim = s.timelines;
    std::vector<double> done_at(s.n_tasks(), -1.0);
    for (int i = 0; i < s.n_tasks(); ++i)
        if (s.assigned(i)) done_at[i] = s.completion[i];
    for (const SimPlacement& p : est.schedule) {
        place_task(sim[p.vm], s.dag->tasks[p.task], p.start);  // throws if infeasible
        done_at[p.task] = p.end;
    }
    for (auto& tl : sim) REQUIRE(timeline_within_capacity(tl));
    auto parents = s.dag->parents();
    for (int i = 0; i < s.n_tasks(); ++i) {
        REQUIRE(done_at[i] >= 0.0);
        for (int p : parents[i]) {
            double start_i = done_at[i] - s.dag->tasks[i].length /
                                              sim[0].vm.speed;  // only valid for equal speeds
            (void)start_i;
        }
    }
    for (const SimPlacement& p : est.schedule)
        for (int parent : parents[p.task]) REQUIRE(p.start >= done_at[parent] - kTimeTol);
}

}  // namespace

TEST_CASE("single remaining task lands on the fast VM") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 100.0)};
    Env env(testutil::share(dag), fast_slow());
    Estimate est = estimate_makespan(env.state());
    REQUIRE(est.value == Catch::Approx(1.0));
    REQUIRE(est.schedule.size() == 1);
    REQUIRE(est.schedule[0].vm == 1);
}

TEST_CASE("terminal estimates equal the realized objectives") {
    GenParams p;
    p.n_tasks = 6;
    auto vms = sample_regime(HostRegime::NA, 3, 8);
    auto dag = testutil::share(make_instance("wide", p, 2, vms));
    Env env(dag, testutil::cluster(vms, HostRegime::NA));
    run_episode(env, make_baseline("random", 3));
    auto [mk, energy] = env.final_metrics();
    REQUIRE(estimate_makespan(env.state()).value == mk);
    REQUIRE(estimate_energy(env.state()).value == energy.active_total);
    REQUIRE(estimate_makespan(env.state()).schedule.empty());
}

TEST_CASE("marginal-energy rule picks the efficient VM") {
    // task cpu=2, L=100; A: 4 cores, s=50, dp=100 -> 100; B: 4 cores,
    // s=100, dp=400 -> 200
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 100.0, 2, 1.0)};
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                                      testutil::vm(1, 100.0, 4, 32.0, 100.0, 500.0)});
    Env env(testutil::share(dag), cluster);
    Estimate est = estimate_energy(env.state());
    REQUIRE(est.schedule[0].vm == 0);
    REQUIRE(est.value == Catch::Approx(100.0));
}

TEST_CASE("estimates upper-bound the exhaustive optimum on small instances") {
    GenParams p;
    p.n_tasks = 5;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto vms = sample_regime(seed % 2 ? HostRegime::NA : HostRegime::AL, 2, seed + 40);
        auto dag = testutil::share(make_instance(seed % 2 ? "longcp" : "wide", p, seed, vms));
        auto cluster = testutil::cluster(vms);
        auto brute = oracle::brute_force_schedules(dag, cluster);
        Env env(dag, cluster);
        INFO("seed=" << seed << " sequences=" << brute.outcomes.size());
        REQUIRE(env.state().t_hat >= brute.min_makespan - 1e-9);
        REQUIRE(env.state().e_hat >= brute.min_active_energy - 1e-9);
    }
}

TEST_CASE("estimates are tight on a single-VM chain") {
    auto dag = testutil::share(testutil::chain({100.0, 150.0, 50.0}));
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                                      testutil::vm(1, 50.0, 4, 32.0, 100.0, 200.0)});
    auto brute = oracle::brute_force_schedules(dag, cluster);
    Env env(dag, cluster);
    REQUIRE(env.state().t_hat == Catch::Approx(brute.min_makespan));
    REQUIRE(env.state().e_hat == Catch::Approx(brute.min_active_energy));
}

TEST_CASE("estimate schedules are feasible completions") {
    GenParams p;
    p.n_tasks = 9;
    auto vms = sample_regime(HostRegime::HP, 3, 14);
    auto dag = testutil::share(make_instance("wide", p, 6, vms));
    Env env(dag, testutil::cluster(vms, HostRegime::HP));
    Rng rng(2);
    while (!env.state().terminal()) {
        require_feasible(env.state(), estimate_makespan(env.state()));
        require_feasible(env.state(), estimate_energy(env.state()));
        env.step_flat(random_action(env.mask(), rng));
    }
}

TEST_CASE("makespan estimate never drops below committed completions") {
    GenParams p;
    p.n_tasks = 8;
    auto vms = sample_regime(HostRegime::NA, 2, 31);
    auto dag = testutil::share(make_instance("longcp", p, 4, vms));
    Env env(dag, testutil::cluster(vms, HostRegime::NA));
    Rng rng(4);
    while (!env.state().terminal()) {
        env.step_flat(random_action(env.mask(), rng));
        double committed = 0.0;
        for (int i = 0; i < env.state().n_tasks(); ++i)
            if (env.state().assigned(i)) committed = std::max(committed, env.state().completion[i]);
        REQUIRE(env.state().t_hat >= committed - 1e-12);
    }
}

TEST_CASE("ect baseline on an HS chain hits L_CP over s") {
    auto dag = testutil::chain({120.0, 300.0, 80.0});
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 150.0),
                                      testutil::vm(1, 50.0, 4, 32.0, 100.0, 300.0)});
    RunRecord rec = run_baseline(testutil::share(dag), cluster, "ect");
    REQUIRE(rec.makespan == Catch::Approx(500.0 / 50.0).margin(1e-9));
}

TEST_CASE("random baseline is reproducible, trace included") {
    GenParams p;
    p.n_tasks = 7;
    auto vms = sample_regime(HostRegime::AL, 3, 5);
    auto dag = testutil::share(make_instance("wide", p, 8, vms));
    auto cluster = testutil::cluster(vms, HostRegime::AL);
    std::vector<DecisionRecord> trace_a, trace_b;
    RunRecord a = run_baseline(dag, cluster, "random", 123, {}, &trace_a);
    RunRecord b = run_baseline(dag, cluster, "random", 123, {}, &trace_b);
    REQUIRE(a.makespan == b.makespan);
    REQUIRE(a.active_energy == b.active_energy);
    REQUIRE(a.total_reward == b.total_reward);
    REQUIRE(trace_a.size() == 7);
    for (std::size_t k = 0; k < trace_a.size(); ++k) {
        REQUIRE(trace_a[k].task == trace_b[k].task);
        REQUIRE(trace_a[k].vm == trace_b[k].vm);
        REQUIRE(trace_a[k].start == trace_b[k].start);
    }
}

TEST_CASE("energy-greedy beats ect on energy when the fast VM is inefficient") {
    // NA-style pair: fast VM draws far more power per unit work
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 100.0, 2, 1.0), testutil::task(1, 100.0, 2, 1.0)};
    dag.edges = {{0, 1}};
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                                      testutil::vm(1, 100.0, 4, 32.0, 100.0, 500.0)},
                                     HostRegime::NA);
    auto d = testutil::share(dag);
    RunRecord ect = run_baseline(d, cluster, "ect");
    RunRecord greedy = run_baseline(d, cluster, "energy_greedy");
    REQUIRE(greedy.active_energy < ect.active_energy);
    REQUIRE(ect.makespan < greedy.makespan);
}
