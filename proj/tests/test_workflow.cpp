#include <catch2/catch_amalgamated.hpp>

#include "schedlab/rng.hpp"
#include "schedlab/workflow.hpp"

#include "oracles.hpp"
#include "testutil.hpp"

using namespace schedlab;

namespace {

WorkflowDag random_dag(std::uint64_t seed, int n) {
    Rng rng(seed);
    WorkflowDag dag;
    for (int i = 0; i < n; ++i)
        dag.tasks.push_back(testutil::task(i, rng.uniform(1.0, 10.0)));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform(0.0, 1.0) < 0.3) dag.edges.emplace_back(i, j);
    return dag;
}

}  // namespace

TEST_CASE("validate_dag accepts a chain") {
    auto dag = testutil::chain({1.0, 2.0, 3.0});
    REQUIRE(validate_dag(dag).ok());
}

TEST_CASE("validate_dag reports a 2-cycle") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 1.0), testutil::task(1, 1.0)};
    dag.edges = {{0, 1}, {1, 0}};
    auto rep = validate_dag(dag);
    REQUIRE_FALSE(rep.ok());
    REQUIRE(rep.violations[0] == "cycle");
}

TEST_CASE("validate_dag reports dangling edges and bad demands") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 1.0), testutil::task(1, -1.0)};
    dag.edges = {{0, 99}};
    auto rep = validate_dag(dag);
    REQUIRE_FALSE(rep.ok());
    bool dangling = false, nonpositive = false;
    for (const auto& v : rep.violations) {
        if (v.find("dangling") != std::string::npos) dangling = true;
        if (v.find("nonpositive work") != std::string::npos) nonpositive = true;
    }
    REQUIRE(dangling);
    REQUIRE(nonpositive);
}

TEST_CASE("validate_dag rejects duplicate edges") {
    auto dag = testutil::chain({1.0, 1.0});
    dag.edges.push_back({0, 1});
    REQUIRE_FALSE(validate_dag(dag).ok());
}

TEST_CASE("metrics of a 3-chain") {
    auto m = dag_metrics(testutil::chain({1.0, 2.0, 3.0}));
    REQUIRE(m.total_work == 6.0);
    REQUIRE(m.cp_length == 6.0);
    REQUIRE(m.depth == 3);
    REQUIRE(m.level_widths == std::vector<int>{1, 1, 1});
    REQUIRE(m.phi == 1.0);
}

TEST_CASE("metrics of the unit diamond") {
    auto m = dag_metrics(testutil::diamond());
    REQUIRE(m.total_work == 4.0);
    REQUIRE(m.cp_length == 3.0);
    REQUIRE(m.depth == 3);
    REQUIRE(m.level_widths == std::vector<int>{1, 2, 1});
    REQUIRE(m.phi == Catch::Approx(4.0 / 3.0));
}

TEST_CASE("critical path matches path enumeration on a random 10-task dag") {
    auto dag = random_dag(7, 10);
    REQUIRE(validate_dag(dag).ok());
    REQUIRE(dag_metrics(dag).cp_length == Catch::Approx(oracle::cp_by_path_enumeration(dag)));
}

TEST_CASE("critical path matches enumeration on all small random dags") {
    for (int n = 2; n <= 12; ++n)
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto dag = random_dag(seed * 131 + n, n);
            if (!validate_dag(dag).ok()) continue;
            auto m = dag_metrics(dag);
            INFO("n=" << n << " seed=" << seed);
            REQUIRE(m.cp_length == Catch::Approx(oracle::cp_by_path_enumeration(dag)));
            REQUIRE(m.phi >= 1.0);
            int width_sum = 0;
            for (int w : m.level_widths) width_sum += w;
            REQUIRE(width_sum == dag.size());
            REQUIRE(int(m.level_widths.size()) == m.depth);
        }
}

TEST_CASE("levelization is strictly deeper than parents") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto dag = random_dag(seed + 1000, 9);
        if (!validate_dag(dag).ok()) continue;
        auto level = task_levels(dag);
        for (auto [p, c] : dag.edges) REQUIRE(level[c] > level[p]);
    }
}

TEST_CASE("workflow json round trip") {
    auto dag = random_dag(42, 8);
    dag.tasks[3].compat = {0, 2};
    auto j = to_json(dag);
    auto back = workflow_from_json(j);
    REQUIRE(to_json(back) == j);
    REQUIRE(back.tasks[3].compat == std::vector<int>{0, 2});
}

TEST_CASE("invalid dag rejected by dag_metrics") {
    WorkflowDag dag;
    dag.tasks = {testutil::task(0, 1.0), testutil::task(1, 1.0)};
    dag.edges = {{0, 1}, {1, 0}};
    REQUIRE_THROWS_AS(dag_metrics(dag), std::invalid_argument);
}
