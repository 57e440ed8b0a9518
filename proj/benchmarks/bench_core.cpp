#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "fullcc/analysis.hpp"
#include "fullcc/cc_equations.hpp"
#include "fullcc/integrals.hpp"

using namespace fullcc;

namespace {

struct Loaded {
  std::shared_ptr<const SpinOrbitalIntegrals> ints;
  std::shared_ptr<const DeterminantSpace> space;
  std::shared_ptr<const FciHamiltonian> hmat;
};

Loaded load(const std::string& stem) {
  const auto t = parse_fcidump(std::filesystem::path(FULLCC_FIXTURE_DIR) / (stem + ".fcidump"));
  auto so = std::make_shared<const SpinOrbitalIntegrals>(t);
  auto sp = std::make_shared<const DeterminantSpace>(so->spin_orbitals(), t.nelec(), t.ms2());
  auto h = std::make_shared<const FciHamiltonian>(assemble(sp, *so));
  return {so, sp, h};
}

const char* kStems[] = {"h2o_sto6g", "beh2_sto6g"};

void bm_assemble(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  for (auto _ : st) benchmark::DoNotOptimize(assemble(l.space, *l.ints));
  st.SetLabel(kStems[st.range(0)]);
}

void bm_eigenpair(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  for (auto _ : st) benchmark::DoNotOptimize(solve_eigenpair(*l.hmat, 0));
  st.SetLabel(kStems[st.range(0)]);
}

void bm_residual(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  const ExcitationAlgebra alg(l.space, PhaseConvention::second_quantized);
  const auto set = std::make_shared<const ExcitationSet>(l.space);
  const auto eig = solve_eigenpair(*l.hmat, 0);
  const auto t = ci_to_cc(alg, eig.vector, set);
  for (auto _ : st) benchmark::DoNotOptimize(cc_residual(alg, *l.hmat, t));
  st.SetLabel(kStems[st.range(0)]);
}

void bm_jacobian_apply(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  const ExcitationAlgebra alg(l.space, PhaseConvention::second_quantized);
  const auto set = std::make_shared<const ExcitationSet>(l.space);
  const auto eig = solve_eigenpair(*l.hmat, 0);
  const auto op = jacobian_operator(alg, *l.hmat, ci_to_cc(alg, eig.vector, set));
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(op.cols);
  for (auto _ : st) benchmark::DoNotOptimize(op.apply(v));
  st.SetLabel(kStems[st.range(0)]);
}

void bm_full_cc_newton(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  const ExcitationAlgebra alg(l.space, PhaseConvention::second_quantized);
  const auto set = std::make_shared<const ExcitationSet>(l.space);
  const auto eig = solve_eigenpair(*l.hmat, 0);
  const auto metric = build_norm_metric(*l.hmat, eig.energy);
  for (auto _ : st)
    benchmark::DoNotOptimize(newton_solve(alg, *l.hmat, AmplitudeVector::zero(set), metric));
  st.SetLabel(kStems[st.range(0)]);
}

void bm_infsup(benchmark::State& st) {
  const auto l = load(kStems[st.range(0)]);
  const auto eig = solve_eigenpair(*l.hmat, 0);
  const auto metric = build_norm_metric(*l.hmat, eig.energy);
  for (auto _ : st) benchmark::DoNotOptimize(infsup_gamma(*l.hmat, eig, metric));
  st.SetLabel(kStems[st.range(0)]);
}

}  // namespace

BENCHMARK(bm_assemble)->DenseRange(0, 1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_eigenpair)->DenseRange(0, 1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_residual)->DenseRange(0, 1)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_jacobian_apply)->DenseRange(0, 1)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_full_cc_newton)->DenseRange(0, 1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_infsup)->DenseRange(0, 1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
