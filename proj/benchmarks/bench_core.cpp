#include <benchmark/benchmark.h>

#include <random>

#include "glora/adapters.hpp"
#include "glora/flops.hpp"
#include "glora/model.hpp"
#include "glora/ops.hpp"

namespace {

using namespace glora;

void BM_Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    Tensor a = Tensor::randn(Shape{n, n}, rng, 1.0);
    Tensor b = Tensor::randn(Shape{n, n}, rng, 1.0);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.ptr());
    }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_GatedForward(benchmark::State& state) {
    const bool on = state.range(0) != 0;
    std::mt19937_64 rng(1);
    Tensor x = Tensor::randn(Shape{17, 64}, rng, 1.0);
    Tensor w0 = Tensor::randn(Shape{64, 64}, rng, 0.02);
    AdapterBlock blk = AdapterBlock::make({0, SiteKind::q}, AdapterKind::LoRA, w0, 8, 8.0, 0.1, on ? 0.5 : 0.0, rng);
    for (auto _ : state) {
        Tensor y = gated_forward(x, w0, blk);
        benchmark::DoNotOptimize(y.ptr());
    }
}
BENCHMARK(BM_GatedForward)->Arg(0)->Arg(1);

void BM_ModelForwardBackward(benchmark::State& state) {
    ModelConfig cfg;
    TinyViT model(cfg, 1);
    model.attach_adapters(AdapterSpec{}, 2);
    model.set_trainable_finetune();
    std::mt19937_64 rng(3);
    Tensor images = Tensor::randn(Shape{8, 1, 16, 16}, rng, 1.0);
    std::vector<int> labels(8, 2);
    for (auto _ : state) {
        Tape tape;
        auto out = model.forward(images);
        Tensor loss = cross_entropy(out.logits, labels);
        backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
}
BENCHMARK(BM_ModelForwardBackward);

void BM_FlopsReport(benchmark::State& state) {
    ModelConfig cfg;
    std::vector<GateSnapshot> gates;
    for (const SiteId& site : enumerate_sites(cfg.layers)) gates.push_back({site, 0.5, true});
    for (auto _ : state) {
        FlopsReport rep = model_flops_report(cfg, gates, AdapterKind::LoRA, 8, FlopsMode::unmerged, 17);
        benchmark::DoNotOptimize(rep.total);
    }
}
BENCHMARK(BM_FlopsReport);

}  // namespace

BENCHMARK_MAIN();
