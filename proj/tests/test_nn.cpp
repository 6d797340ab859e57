#include <catch2/catch_amalgamated.hpp>

#include "schedlab/baselines.hpp"
#include "schedlab/nn/policy.hpp"

#include "oracles.hpp"
#include "testutil.hpp"

using namespace schedlab;
using namespace schedlab::nn;

namespace {

ObsGraph random_obs(std::uint64_t seed, int n_tasks, int n_vms) {
    GenParams p;
    p.n_tasks = n_tasks;
    auto vms = sample_regime(HostRegime::NA, n_vms, seed);
    auto dag = testutil::share(make_instance(n_tasks >= 6 ? "wide" : "longcp", p, seed, vms));
    Env env(dag, testutil::cluster(vms, HostRegime::NA));
    Rng rng(seed);
    int hops = int(seed % std::max(1, n_tasks / 2));
    for (int i = 0; i < hops && !env.state().terminal(); ++i)
        env.step_flat(random_action(env.mask(), rng));
    return extract_obs(env.state());
}

// Scalar probe objective exercising actor and critic heads:
//   L = cv * value + sum over valid actions of coef_a * logp_a
double probe_loss(PolicyNet& net, const ObsGraph& obs, const std::vector<double>& coef,
                  double cv, Workspace& ws) {
    PolicyOutput out = net.forward(obs, ws);
    double loss = cv * out.value;
    for (std::size_t a = 0; a < out.probs.size(); ++a)
        if (obs.mask.bits[a]) loss += coef[a] * out.log_probs[a];
    return loss;
}

void probe_backward(PolicyNet& net, const ObsGraph& obs, const std::vector<double>& coef,
                    double cv, Workspace& ws, GradVec& grad) {
    PolicyOutput out = net.forward(obs, ws);
    double coef_sum = 0.0;
    for (std::size_t a = 0; a < coef.size(); ++a)
        if (obs.mask.bits[a]) coef_sum += coef[a];
    std::vector<double> dlogits(coef.size(), 0.0);
    for (std::size_t a = 0; a < coef.size(); ++a)
        if (obs.mask.bits[a]) dlogits[a] = coef[a] - out.probs[a] * coef_sum;
    net.backward(obs, ws, dlogits, cv, grad);
}

}  // namespace

TEST_CASE("fresh-state task features") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 100.0, 2, 4.0)};
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                                      testutil::vm(1, 50.0, 4, 32.0, 100.0, 300.0)});
    Env env(testutil::share(dag), cluster);
    ObsGraph obs = extract_obs(env.state());
    const double* f = obs.task_feats.row(0);
    REQUIRE(f[0] == 0.0);  // not scheduled
    REQUIRE(f[1] == 1.0);  // ready
    // remaining work = L scaled by mean speed and the reset ECT estimate (2.0)
    REQUIRE(f[2] == Catch::Approx(100.0 / 50.0 / 2.0));
    REQUIRE(f[3] == 0.0);  // no completion yet
    REQUIRE(f[4] == 0.5);  // 2 of 4 cores
    REQUIRE(f[5] == Catch::Approx(4.0 / 32.0));
}

TEST_CASE("idle VM features") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 100.0)};
    auto cluster = testutil::cluster({testutil::vm(0, 50.0, 4, 32.0, 100.0, 200.0),
                                      testutil::vm(1, 25.0, 8, 64.0, 50.0, 400.0)});
    Env env(testutil::share(dag), cluster);
    ObsGraph obs = extract_obs(env.state());
    const double* f = obs.vm_feats.row(1);
    REQUIRE(f[0] == 0.0);                         // no completions
    REQUIRE(f[1] == 0.0);                         // utilization
    REQUIRE(f[2] == Catch::Approx(25.0 / 50.0));  // speed / max speed
    REQUIRE(f[3] == 1.0);                         // cores / max cores
    REQUIRE(f[4] == 1.0);                         // all cores available
    REQUIRE(f[6] == 1.0);                         // all memory free
    REQUIRE(f[8] == 1.0);                         // p_peak / max p_peak
    REQUIRE(f[9] == 0.0);                         // nothing running
    REQUIRE(f[11] == 0.0);                        // no pending release
}

TEST_CASE("mid-episode features match an independent walker") {
    GenParams p;
    p.n_tasks = 8;
    auto vms = sample_regime(HostRegime::AL, 3, 17);
    auto dag = testutil::share(make_instance("wide", p, 3, vms));
    Env env(dag, testutil::cluster(vms, HostRegime::AL));
    Rng rng(5);
    for (int i = 0; i < 4; ++i) env.step_flat(random_action(env.mask(), rng));

    const SchedState& s = env.state();
    ObsGraph obs = extract_obs(s);
    double mean_speed = 0.0, max_speed = 0.0, max_mem = 0.0, max_peak = 0.0;
    int max_cores = 1;
    for (const VmSpec& v : s.cluster->vms) {
        mean_speed += v.speed;
        max_speed = std::max(max_speed, v.speed);
        max_mem = std::max(max_mem, v.mem);
        max_peak = std::max(max_peak, v.p_peak);
        max_cores = std::max(max_cores, v.cores);
    }
    mean_speed /= s.n_vms();

    for (int i = 0; i < s.n_tasks(); ++i) {
        const TaskSpec& t = dag->tasks[i];
        const double* f = obs.task_feats.row(i);
        REQUIRE(f[0] == (s.assigned(i) ? 1.0 : 0.0));
        REQUIRE(f[1] == (s.status[i] == TaskStatus::Ready ? 1.0 : 0.0));
        double remaining = t.length;
        if (s.assigned(i)) {
            double frac = (s.completion[i] - s.clock) / (s.completion[i] - s.start[i]);
            remaining = t.length * std::clamp(frac, 0.0, 1.0);
        }
        REQUIRE(f[2] == Catch::Approx(remaining / mean_speed / s.t_hat0));
        REQUIRE(f[4] == Catch::Approx(double(t.cpu) / max_cores));
    }
    for (int m = 0; m < s.n_vms(); ++m) {
        const double* f = obs.vm_feats.row(m);
        const VmTimeline& tl = s.timelines[m];
        int used = 0, running = 0;
        double mem_used = 0.0, last = 0.0;
        for (const Placement& pl : tl.placements) {
            last = std::max(last, pl.end);
            if (pl.start <= s.clock && s.clock < pl.end) {
                used += pl.cpu;
                mem_used += pl.mem;
                ++running;
            }
        }
        REQUIRE(f[0] == Catch::Approx(last / s.t_hat0));
        REQUIRE(f[1] == Catch::Approx(std::min(1.0, double(used) / tl.vm.cores)));
        REQUIRE(f[4] == Catch::Approx(double(tl.vm.cores - used) / max_cores));
        REQUIRE(f[6] == Catch::Approx((tl.vm.mem - mem_used) / max_mem));
        REQUIRE(f[9] == Catch::Approx(double(running) / tl.vm.cores));
        REQUIRE(f[10] == Catch::Approx(double(used) / tl.vm.cores));
    }
}

TEST_CASE("masked softmax splits mass over valid entries only") {
    PolicyOutput out;
    out.logits = {1.0, 1.0, 1.0};
    ActionMask mask;
    mask.n_tasks = 3;
    mask.n_vms = 1;
    mask.bits = {1, 0, 1};
    apply_masked_softmax(out, mask);
    REQUIRE(out.probs[0] == 0.5);
    REQUIRE(out.probs[1] == 0.0);
    REQUIRE(out.probs[2] == 0.5);
}

TEST_CASE("masked probabilities: exact zeros, unit sum, 1000 random draws") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = rng.uniform_int(2, 24);
        PolicyOutput out;
        ActionMask mask;
        mask.n_tasks = n;
        mask.n_vms = 1;
        mask.bits.assign(n, 0);
        out.logits.resize(n);
        bool any = false;
        for (int i = 0; i < n; ++i) {
            out.logits[i] = rng.normal(0.0, 3.0);
            mask.bits[i] = rng.uniform(0.0, 1.0) < 0.6;
            any |= mask.bits[i] != 0;
        }
        if (!any) mask.bits[0] = 1;
        apply_masked_softmax(out, mask);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!mask.bits[i]) REQUIRE(out.probs[i] == 0.0);
            sum += out.probs[i];
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("all-masked input is an explicit error") {
    PolicyOutput out;
    out.logits = {1.0, 2.0};
    ActionMask mask;
    mask.n_tasks = 2;
    mask.n_vms = 1;
    mask.bits = {0, 0};
    REQUIRE_THROWS_AS(apply_masked_softmax(out, mask), std::runtime_error);
}

TEST_CASE("forward is deterministic and permutation-equivariant") {
    ObsGraph obs = random_obs(11, 7, 3);
    PolicyNet net(16, 4);
    Workspace ws;
    PolicyOutput a = net.forward(obs, ws);
    PolicyOutput b = net.forward(obs, ws);
    REQUIRE(a.logits == b.logits);
    REQUIRE(a.value == b.value);

    // reverse task order everywhere
    int v = obs.n_tasks;
    auto perm = [&](int i) { return v - 1 - i; };
    ObsGraph shuffled = obs;
    for (int i = 0; i < v; ++i)
        std::copy(obs.task_feats.row(i), obs.task_feats.row(i) + kTaskFeatures,
                  shuffled.task_feats.row(perm(i)));
    for (auto& [p, c] : shuffled.dep_edges) {
        p = perm(p);
        c = perm(c);
    }
    for (auto& [t, m] : shuffled.compat_edges) t = perm(t);
    for (int i = 0; i < v; ++i)
        for (int m = 0; m < obs.n_vms; ++m)
            shuffled.mask.bits[shuffled.mask.index(perm(i), m)] =
                obs.mask.bits[obs.mask.index(i, m)];

    PolicyOutput c = net.forward(shuffled, ws);
    REQUIRE(c.value == Catch::Approx(a.value).epsilon(1e-10));
    for (int i = 0; i < v; ++i)
        for (int m = 0; m < obs.n_vms; ++m)
            REQUIRE(c.probs[shuffled.mask.index(perm(i), m)] ==
                    Catch::Approx(a.probs[obs.mask.index(i, m)]).margin(1e-10));
}

TEST_CASE("zero head gradients give exactly zero parameter gradients") {
    ObsGraph obs = random_obs(2, 6, 2);
    PolicyNet net(8, 1);
    Workspace ws;
    net.forward(obs, ws);
    GradVec grad(net.param_count(), 0.0);
    std::vector<double> dlogits(obs.mask.bits.size(), 0.0);
    net.backward(obs, ws, dlogits, 0.0, grad);
    for (double g : grad) REQUIRE(g == 0.0);
}

TEST_CASE("critic-only gradients leave the scorer head untouched") {
    ObsGraph obs = random_obs(3, 6, 2);
    PolicyNet net(8, 2);
    Workspace ws;
    net.forward(obs, ws);
    GradVec grad(net.param_count(), 0.0);
    std::vector<double> dlogits(obs.mask.bits.size(), 0.0);
    net.backward(obs, ws, dlogits, 1.0, grad);
    bool critic_nonzero = false;
    for (const Slice& s : net.params().layout()) {
        bool scorer = s.name.rfind("scorer.", 0) == 0;
        bool critic = s.name.rfind("critic.", 0) == 0;
        for (int i = 0; i < s.size(); ++i) {
            if (scorer) REQUIRE(grad[s.offset + i] == 0.0);
            if (critic && grad[s.offset + i] != 0.0) critic_nonzero = true;
        }
    }
    REQUIRE(critic_nonzero);
}

TEST_CASE("analytic gradients match central finite differences") {
    for (std::uint64_t cfg = 0; cfg < 4; ++cfg) {
        ObsGraph obs = random_obs(cfg + 20, 3 + int(cfg % 3), 2);
        PolicyNet net(8, cfg + 1);
        Workspace ws;
        Rng rng(cfg);
        std::vector<double> coef(obs.mask.bits.size(), 0.0);
        for (auto& c : coef) c = rng.normal(0.0, 1.0);
        double cv = rng.normal(0.0, 1.0);

        GradVec analytic(net.param_count(), 0.0);
        probe_backward(net, obs, coef, cv, ws, analytic);

        const double step = 1e-5;
        GradVec fd(net.param_count(), 0.0);
        auto& params = net.params().values();
        for (int i = 0; i < net.param_count(); ++i) {
            double keep = params[i];
            params[i] = keep + step;
            double up = probe_loss(net, obs, coef, cv, ws);
            params[i] = keep - step;
            double down = probe_loss(net, obs, coef, cv, ws);
            params[i] = keep;
            fd[i] = (up - down) / (2.0 * step);
        }
        INFO("cfg=" << cfg << " max rel err=" << oracle::max_rel_error(analytic, fd));
        REQUIRE(oracle::max_rel_error(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("sampling avoids zero-mass entries and matches frequencies") {
    PolicyOutput out;
    out.logits = {0.0, 0.0, std::log(4.0)};
    ActionMask mask;
    mask.n_tasks = 3;
    mask.n_vms = 1;
    mask.bits = {1, 0, 1};
    apply_masked_softmax(out, mask);
    REQUIRE(out.probs[0] == Catch::Approx(0.2));
    REQUIRE(out.probs[2] == Catch::Approx(0.8));

    Rng rng(7);
    int counts[3] = {0, 0, 0};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        auto [a, logp] = sample_action(out, rng);
        ++counts[a];
        REQUIRE(logp == out.log_probs[a]);
    }
    REQUIRE(counts[1] == 0);
    // 3 sigma of binomial(draws, 0.2)
    double sigma = std::sqrt(draws * 0.2 * 0.8);
    REQUIRE(std::abs(counts[0] - draws * 0.2) <= 3.0 * sigma);
    REQUIRE(greedy_action(out) == 2);
}

TEST_CASE("greedy tie-break picks the lowest index") {
    PolicyOutput out;
    out.logits = {1.0, 1.0};
    ActionMask mask;
    mask.n_tasks = 2;
    mask.n_vms = 1;
    mask.bits = {1, 1};
    apply_masked_softmax(out, mask);
    REQUIRE(greedy_action(out) == 0);
}

TEST_CASE("parameter count is a pure function of the hidden width") {
    PolicyNet a(16, 1), b(16, 999);
    REQUIRE(a.param_count() == b.param_count());
    int h = 16;
    int task_enc = h * kTaskFeatures + h + 2 * h + h * h + h;
    int vm_enc = h * kVmFeatures + h + 2 * h + h * h + h;
    int gin = 3 * (1 + 2 * (h * h + h));
    int scorer = h * 3 * h + h + h + 1;
    int critic = h * h + h + h + 1;
    REQUIRE(a.param_count() == task_enc + vm_enc + gin + scorer + critic);
}

TEST_CASE("checkpoint round trip preserves behaviour") {
    ObsGraph obs = random_obs(41, 6, 2);
    PolicyNet net(8, 9);
    net.task_stats.mean[2] = 0.7;
    net.vm_stats.var[3] = 2.5;
    Workspace ws;
    PolicyOutput before = net.forward(obs, ws);

    long step = -1;
    PolicyNet restored = PolicyNet::from_checkpoint(net.checkpoint(1234), &step);
    REQUIRE(step == 1234);
    PolicyOutput after = restored.forward(obs, ws);
    REQUIRE(before.logits == after.logits);
    REQUIRE(before.value == after.value);
}
