#include <benchmark/benchmark.h>

#include "catbn/evaluation.hpp"
#include "catbn/learning.hpp"
#include "catbn/random.hpp"

using namespace catbn;

namespace {

struct EStepFixture {
    Network start;
    JunctionTree tree;
    Dataset data;
    ColumnBinding binding;

    static EStepFixture make(std::size_t rows) {
        const TestBlueprint bp = paper_blueprint();
        const Network truth = make_ground_truth(bp, {.skill_states = 3, .scale = Scale::points, .seed = 5});
        const Network start = random_parameters(build_model(spec_by_id("n3"), bp), 17);
        Dataset data = generate_synthetic(truth, bp, rows, 6).data;
        const ColumnBinding b = bind_columns(start, data);
        return {start, JunctionTree(start), std::move(data), b};
    }
};

void estep(benchmark::State& state, Execution exec) {
    static const EStepFixture f = EStepFixture::make(2000);
    for (auto _ : state) benchmark::DoNotOptimize(expected_counts(f.tree, f.data, f.binding, exec));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.rows()));
}

void cross_validation(benchmark::State& state, Execution exec) {
    const TestBlueprint bp = paper_blueprint();
    const Network truth = make_ground_truth(bp, {.skill_states = 3, .scale = Scale::boolean, .seed = 2});
    static const Dataset data = generate_synthetic(truth, bp, 300, 3).data;
    EvalConfig cfg;
    cfg.specs = {"b2", "b3"};
    cfg.max_steps = 25;
    cfg.execution = exec;
    for (auto _ : state) benchmark::DoNotOptimize(cross_validate(data, bp, cfg));
}

}  // namespace

BENCHMARK_CAPTURE(estep, serial, Execution::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(estep, parallel, Execution::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(cross_validation, serial, Execution::serial)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK_CAPTURE(cross_validation, parallel, Execution::parallel)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
