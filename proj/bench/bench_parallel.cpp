// Serial reference vs OpenMP per-text parallelism for the batch kernels.

#include <benchmark/benchmark.h>

#include "reat/evaluator.hpp"
#include "reat/toy_corpus.hpp"

namespace {

using namespace reat;

struct Workload {
    RnnModel model;
    std::vector<EvalText> texts;
};

const Workload& workload() {
    static const Workload w = [] {
        const ToyCorpus corpus = generate_toy_corpus(0, 10, 400);
        std::vector<std::vector<std::string>> lists;
        for (const auto& t : corpus.test) lists.push_back(t.tokens);
        const Vocabulary vocab = Vocabulary::build(lists);
        return Workload{init_model(Architecture::gru, {vocab.size(), 16, 32, 2}, 0, 0.5),
                        make_eval_texts(vocab, corpus.test)};
    }();
    return w;
}

Execution execution(const benchmark::State& state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void BM_AttributeBatch(benchmark::State& state, Method method) {
    const Workload& w = workload();
    for (auto _ : state) benchmark::DoNotOptimize(attribute_batch(w.model, w.texts, method, execution(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.texts.size()));
}

void BM_Faithfulness(benchmark::State& state) {
    const Workload& w = workload();
    const Attributor reat = method_attributor(Method::reat);
    for (auto _ : state)
        benchmark::DoNotOptimize(faithfulness(w.model, w.texts, reat, DeletionUnit::clause, execution(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.texts.size()));
}

}  // namespace

// Arg 0 = serial, 1 = parallel.
BENCHMARK_CAPTURE(BM_AttributeBatch, reat, reat::Method::reat)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_AttributeBatch, integrated_grad, reat::Method::integrated_grad)
    ->Arg(0)
    ->Arg(1)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Faithfulness)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
