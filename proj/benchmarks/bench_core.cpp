#include <benchmark/benchmark.h>

#include "rlihf/decoder.hpp"
#include "rlihf/envsim.hpp"
#include "rlihf/sac.hpp"
#include "rlihf/signal.hpp"

using namespace rlihf;

namespace {

SubjectProfile mid_subject() { return default_subject_profiles()[5]; }

void BM_GenerateEpoch(benchmark::State& state) {
    const auto p = mid_subject();
    Rng rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(generate_epoch(p, EpochLabel::Error, rng));
}
BENCHMARK(BM_GenerateEpoch);

// resample 1000 -> 256, band-pass, CAR, binning
void BM_Preprocess(benchmark::State& state) {
    Rng rng(2);
    const auto epoch = generate_epoch(mid_subject(), EpochLabel::Error, rng);
    const Preprocessor pre;
    for (auto _ : state) benchmark::DoNotOptimize(pre.features(epoch));
}
BENCHMARK(BM_Preprocess);

void BM_DecodeEpoch(benchmark::State& state) {
    Rng rng(3);
    const auto epoch = generate_epoch(mid_subject(), EpochLabel::NonError, rng);
    const Preprocessor pre;
    auto model = std::make_shared<const DecoderModel>(DecoderModel::zeros(pre.features(epoch).size()));
    const LinearErrorDecoder dec(model);
    for (auto _ : state) benchmark::DoNotOptimize(dec.error_probability(epoch));
}
BENCHMARK(BM_DecodeEpoch);

void BM_EnvStep(benchmark::State& state) {
    const Environment env(Layout::standard());
    auto s = env.reset(0);
    Rng rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto _ : state) {
        EnvEvents ev;
        s = env.step(std::move(s), Vec2(u(rng), u(rng)), ev);
        if (s.phase == Phase::Done || s.step_index == env.config().episode_length) s = env.reset(0);
        benchmark::DoNotOptimize(env.observe(s));
    }
}
BENCHMARK(BM_EnvStep);

void BM_IdealPath(benchmark::State& state) {
    const auto layout = Layout::standard();
    for (auto _ : state) benchmark::DoNotOptimize(ideal_path(layout));
}
BENCHMARK(BM_IdealPath)->Unit(benchmark::kMillisecond);

// One gradient step of both critics, the actor and the temperature.
void BM_SacUpdate(benchmark::State& state) {
    SacConfig cfg;
    cfg.batch = static_cast<int>(state.range(0));
    SacAgent agent(kObservationDim, 2, cfg, 5);
    ReplayBuffer buffer(4096, kObservationDim, 2);
    Rng rng(6);
    std::normal_distribution<double> n;
    std::array<double, kObservationDim> obs{}, next{};
    std::array<double, 2> act{};
    for (int i = 0; i < 4096; ++i) {
        for (auto& v : obs) v = n(rng);
        for (auto& v : next) v = n(rng);
        for (auto& v : act) v = std::tanh(n(rng));
        buffer.push(obs, act, n(rng), next, false);
    }
    for (auto _ : state) benchmark::DoNotOptimize(agent.update(buffer, rng));
}
BENCHMARK(BM_SacUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
