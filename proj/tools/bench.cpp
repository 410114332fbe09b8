// Compares the OpenMP worker pool against the serial reference loop on the
// two replicate-level kernels (tempered-posterior lambda and prior-volume
// sweep) and verifies that both paths produce identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "slt/model.hpp"
#include "slt/parallel.hpp"
#include "slt/rlct.hpp"
#include "slt/sampler.hpp"

using namespace slt;

namespace {

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
double timed(Fn&& fn) {
  double t0 = now_ms();
  fn();
  return now_ms() - t0;
}

std::vector<double> lambda_batch(const ModelSpec& model, int replicates,
                                 bool serial) {
  McmcConfig cfg;
  cfg.chains = 2;
  cfg.draws_per_chain = 400;
  cfg.seed = 7;
  std::vector<double> out(replicates, 0.0);
  auto body = [&](std::size_t r) {
    Dataset data = sample_true(model, 200, mix_seed(cfg.seed, r));
    McmcConfig c = cfg;
    c.seed = mix_seed(cfg.seed, 1000 + r);
    out[r] = two_temperature_lambda(model, data, c);
  };
  if (serial)
    parallel_for_serial(replicates, body);
  else
    parallel_for(replicates, body);
  return out;
}

LambdaEstimate volume_sweep(const ModelSpec& model, bool serial) {
  std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4};
  if (serial) {
    int saved = jobs();
    set_jobs(1);
    LambdaEstimate e = estimate_rlct_volume(model, grid, 2000000, 11);
    set_jobs(saved);
    return e;
  }
  return estimate_rlct_volume(model, grid, 2000000, 11);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 2;
  int replicates = 24;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--jobs") && i + 1 < argc)
      threads = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--replicates") && i + 1 < argc)
      replicates = std::atoi(argv[++i]);
  }
  ModelSpec model = product_mean();

  set_jobs(1);
  std::vector<double> ref;
  double t_serial = timed([&] { ref = lambda_batch(model, replicates, true); });
  set_jobs(threads);
  std::vector<double> par;
  double t_par = timed([&] { par = lambda_batch(model, replicates, false); });
  bool same = ref == par;
  std::printf("lambda batch (%d replicates): serial %.0f ms, %d jobs %.0f ms, "
              "speedup %.2fx, identical=%s\n",
              replicates, t_serial, threads, t_par, t_serial / t_par,
              same ? "yes" : "NO");

  set_jobs(1);
  LambdaEstimate vref;
  double v_serial = timed([&] { vref = volume_sweep(model, true); });
  set_jobs(threads);
  LambdaEstimate vpar;
  double v_par = timed([&] { vpar = volume_sweep(model, false); });
  bool vsame = vref.lambda == vpar.lambda && vref.stderr_ == vpar.stderr_;
  std::printf("volume sweep (2e6 draws): serial %.0f ms, %d jobs %.0f ms, "
              "speedup %.2fx, identical=%s\n",
              v_serial, threads, v_par, v_serial / v_par,
              vsame ? "yes" : "NO");
  return same && vsame ? 0 : 1;
}
