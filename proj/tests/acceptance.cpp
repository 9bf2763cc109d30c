// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>
#include <sys/wait.h>

#include <boost/math/special_functions/gamma.hpp>

#include "fso/atmosphere.hpp"
#include "fso/channel_trace.hpp"
#include "fso/config.hpp"
#include "fso/linkbudget.hpp"
#include "fso/modem.hpp"
#include "fso/numerics.hpp"
#include "fso/pat.hpp"
#include "fso/pipeline.hpp"
#include "fso/spatial_filter.hpp"
#include "support.hpp"

using namespace fso;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Optical loss at eta_t * eta_r = 0.65.
Outcome optical_loss() {
  const double l = optical_loss_db(0.65, 1.0);
  return {std::abs(l - 1.87) <= 0.01, fmt("L_o = %.4f dB (target 1.87 +/- 0.01)", l)};
}

// 2. Kruse attenuation against an independent evaluation.
double kruse_reference(double v_km, double lambda_nm) {
  const double q = v_km > 50.0 ? 1.6 : v_km >= 6.0 ? 1.3 : 0.585 * std::pow(v_km, 1.0 / 3.0);
  return 4.343 * (3.91 / v_km) * std::pow(lambda_nm / 550.0, -q);
}

Outcome kruse() {
  double worst = 0.0;
  for (double v : {10.0, 3.0}) {
    worst = std::max(worst, testing::rel_diff(fog_attenuation_db_per_km(v, 1550e-9),
                                               kruse_reference(v, 1550.0)));
  }
  // Exponent recovered from the attenuation ratio at two wavelengths.
  double exponent_err = 0.0;
  for (double v : {1.0, 3.0, 5.9, 5.999999, 6.0, 6.5, 10.0, 30.0}) {
    const double a1 = fog_attenuation_db_per_km(v, 850e-9);
    const double a2 = fog_attenuation_db_per_km(v, 1550e-9);
    const double q = -std::log(a2 / a1) / std::log(1550.0 / 850.0);
    const double expected = v >= 6.0 ? 1.3 : 0.585 * std::cbrt(v);
    exponent_err = std::max(exponent_err, std::abs(q - expected) / expected);
  }
  return {worst <= 1e-9 && exponent_err <= 1e-9,
          fmt("max rel err %.2e (V=10,3 km); exponent rel err %.2e across V=6 km", worst,
              exponent_err)};
}

// 3. Amplitude-SNR gain of m-sample averaging.
Outcome sqrt_m_gain() {
  const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
  const QdReading clean = qd_overlap(Eigen::Vector2d(10e-6, -5e-6), g, 1.0);
  const double sigma = 0.05;
  const int trials = 100'000;
  auto measured_snr = [&](int m, std::uint64_t seed) {
    Engine engine(seed);
    std::vector<QdReading> readings(m);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int t = 0; t < trials; ++t) {
      for (auto& r : readings) r = add_quadrant_noise(clean, sigma, engine);
      const double s = multisample_snr(readings, sigma).averaged.sum();
      sum += s;
      sum_sq += s * s;
    }
    const double mean = sum / trials;
    return mean / std::sqrt(sum_sq / trials - mean * mean);
  };
  const double base = measured_snr(1, 101);
  bool ok = true;
  std::string detail = "ratio/sqrt(m):";
  for (int m : {2, 4, 10, 25}) {
    const double fit = measured_snr(m, 101 + m) / base / std::sqrt(m);
    ok = ok && std::abs(fit - 1.0) <= 0.05;
    detail += fmt(" m=%d %.4f", m, fit);
  }
  return {ok, detail};
}

// 4. Paired-seed tracking comparison, m = 1 against m = 10.
Outcome tracking_residual() {
  int wins = 0;
  double worst_m10 = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    TrackingConfig cfg;
    cfg.seed = seed;
    cfg.samples_per_correction = 1;
    const double r1 = run_tracking_loop(cfg).rms_m;
    cfg.samples_per_correction = 10;
    const double r10 = run_tracking_loop(cfg).rms_m;
    wins += r10 < r1;
    worst_m10 = std::max(worst_m10, r10);
  }
  // One-sided sign test at 5%: P(X >= 32 | n = 50, p = 1/2) = 0.032.
  const bool ok = wins >= 32 && worst_m10 < 1e-3;
  return {ok, fmt("m=10 better in %d/50 pairs (need >= 32); worst m=10 rms %.3e m", wins,
                  worst_m10)};
}

// 5. Spatial filtering BER demo and the gain formula on random grids.
Outcome spatial_filter() {
  const FilterDemoConfig cfg;  // 2x2, concentrated spot, 1e7 symbols
  const FilterDemoResult r = filtering_ber_demo(cfg, Pam4Config{}, 5);
  const double unf = r.unfiltered.ber_counted;
  const double fil = r.filtered.ber_counted;
  const bool demo_ok = unf >= 5e-4 && unf <= 5e-3 && fil <= unf / 10.0;

  testing::Gen gen(55);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = gen.integer(1, 8);
    ApertureGrid grid{Eigen::MatrixXd(n, n), gen.log_uniform(1e-3, 1e3)};
    double best = 0.0;
    double total = 0.0;
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        const double v = gen.log_uniform(1e-6, 1.0);
        grid.signal(row, col) = v;
        best = std::max(best, v);
        total += v;
      }
    }
    const double expected = n * n * best / total;
    if (testing::rel_diff(filtered_snr(grid).gain, expected) > 1e-12) ++mismatches;
  }
  return {demo_ok && mismatches == 0,
          fmt("unfiltered BER %.3e, filtered %.3e (%zu vs %zu errors, gain %.3f); "
              "%d/1000 grid mismatches",
              unf, fil, r.unfiltered.bit_errors, r.filtered.bit_errors, r.snr.gain, mismatches)};
}

// 6. End-to-end clear preset.
Outcome end_to_end() {
  const RunConfig cfg = resolve_config(std::string("clear"), std::nullopt, {});
  const RunReport r = run_endtoend(cfg, {0, false});
  const double ber = r.ber.ber_counted;
  const bool ok = ber >= 2e-5 && ber <= 5e-4 && r.ber.bit_errors >= 200 &&
                  r.ber.bits_tx >= 20'000'000 && r.fading.model == "log_normal";
  return {ok, fmt("BER %.3e from %zu errors over %zu bits, fading %s", ber, r.ber.bit_errors,
                  r.ber.bits_tx, r.fading.model.c_str())};
}

// 7. Eye-statistics BER estimate against counting on AWGN.
Outcome estimator_vs_counting() {
  const Pam4Config cfg;
  bool ok = true;
  std::string detail;
  for (double q : {2.3, 2.5, 3.0, 3.5, 4.0}) {
    const BerReport r = simulate_static_link(cfg, 5'000'000, 1.0, noise_std_for_q(cfg, q), 70,
                                             AdaptiveThresholds{});
    const double truth = 0.75 * numerics::q_function(q);
    const double d = std::abs(std::log10(r.ber_estimated) - std::log10(r.ber_counted));
    ok = ok && truth >= 1e-5 && truth <= 1e-2 && r.bit_errors > 0 && d <= 0.3;
    detail += fmt("q=%.1f est %.2e cnt %.2e |dlog| %.3f; ", q, r.ber_estimated, r.ber_counted, d);
  }
  return {ok, detail};
}

// 8. Trace marginals and correlation time.
double lognormal_cdf(double x, double sigma_i2) {
  const double s = std::sqrt(std::log1p(sigma_i2));
  return 0.5 * std::erfc(-(std::log(x) + 0.5 * s * s) / (s * std::sqrt(2.0)));
}

// Product of unit-mean Gamma(a) and Gamma(b): F(x) = int_0^1 P(a, a x / Qb(u)) du.
struct GammaGammaCdf {
  double a;
  std::vector<double> y_quantiles;

  GammaGammaCdf(double alpha, double beta, int nodes = 4000) : a(alpha) {
    for (int j = 0; j < nodes; ++j) {
      const double u = (j + 0.5) / nodes;
      y_quantiles.push_back(boost::math::gamma_p_inv(beta, u) / beta);
    }
  }
  double operator()(double x) const {
    double s = 0.0;
    for (double y : y_quantiles) s += boost::math::gamma_p(a, a * x / y);
    return s / static_cast<double>(y_quantiles.size());
  }
};

Outcome trace_statistics() {
  const double tau0_samples = 10.0;
  const double rate = 1000.0;
  const double tau0 = tau0_samples / rate;
  const RunConfig clear = preset("clear");
  const RunConfig hazy = preset("hazy");
  const double s2_clear = rytov_variance(clear.geometry, clear.weather);
  const double s2_hazy = rytov_variance(hazy.geometry, hazy.weather);
  const FadingModel ln = FadingModel::log_normal(scintillation_index(s2_clear));
  const GammaGammaParams gg_params = gamma_gamma_params(s2_hazy);
  const FadingModel gg = FadingModel::gamma_gamma(gg_params);
  const GammaGammaCdf gg_cdf(gg_params.alpha, gg_params.beta);

  bool ok = true;
  std::string detail;
  for (const auto& [name, model] : {std::pair{"log_normal", ln}, std::pair{"gamma_gamma", gg}}) {
    const ChannelTrace t = generate_trace(model, tau0, rate, 1000.0, 808);
    const TraceStats s = trace_stats(t);
    std::vector<double> sorted(t.gains.data(), t.gains.data() + t.gains.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    double ks = 0.0;
    const std::size_t stride = 500;
    for (std::size_t i = 0; i < sorted.size(); i += stride) {
      const double f = model.kind == FadingKind::log_normal ? lognormal_cdf(sorted[i], model.sigma_i2)
                                                            : gg_cdf(sorted[i]);
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                     std::abs(f - static_cast<double>(i + 1) / n)});
    }
    // Between evaluated points both CDFs move by at most one stride.
    ks += static_cast<double>(stride) / n;
    const double tau_err = std::abs(s.coherence_time_s - tau0) / tau0;
    const bool this_ok = std::abs(s.mean - 1.0) < 0.02 && ks < 0.01 && tau_err <= 0.15 &&
                         t.size() >= 1'000'000;
    ok = ok && this_ok;
    detail += fmt("%s: mean %.4f, KS <= %.4f, half-power %.4g s (tau0 err %.1f%%); ", name, s.mean,
                  ks, s.half_power_time_s, 100.0 * tau_err);
  }
  return {ok, detail};
}

// 9. Noiseless 10 MiB payload round trip.
Outcome payload_roundtrip_10mib() {
  const auto in = testing::temp_path("acceptance_payload.bin");
  const auto out = testing::temp_path("acceptance_payload.out");
  const auto bytes = testing::random_bytes(10u << 20, 909);
  testing::write_bytes(in, bytes);
  RunConfig cfg = preset("clear");
  cfg.noise.mode = NoiseMode::fixed;
  cfg.noise.noise_std = 0.0;
  const RunReport r = payload_roundtrip(in.string(), cfg, out.string(), {0, false});
  const auto back = testing::read_bytes(out);
  const bool ok = back == bytes && testing::fnv1a(back) == testing::fnv1a(bytes) &&
                  r.ber.bit_errors == 0;
  return {ok, fmt("%zu bytes, fnv1a %016llx vs %016llx, %zu bit errors", back.size(),
                  static_cast<unsigned long long>(testing::fnv1a(bytes)),
                  static_cast<unsigned long long>(testing::fnv1a(back)), r.ber.bit_errors)};
}

// 10. CLI reports are byte-identical across repeats and worker counts.
Outcome cli_determinism() {
  const std::vector<std::pair<std::string, std::string>> commands{
      {"budget", "budget --scenario hazy --format json"},
      {"transmit", "transmit --scenario hazy --set run.symbols=1000000 --format json"},
      {"trace", "trace --scenario clear --duration 30"},
      {"pat-sim", "pat-sim --set pat.samples_per_correction=4"},
      {"filter-sim", "filter-sim --set filter.symbols=1000000"},
      {"sweep", "sweep --scenario clear --axis weather.visibility_km --values 4,10 "
                "--set run.symbols=200000"},
  };
  int mismatched = 0;
  std::string detail;
  for (const auto& [name, args] : commands) {
    std::vector<std::vector<std::uint8_t>> outputs;
    int index = 0;
    for (unsigned workers : {1u, 4u, 4u, 1u}) {
      const auto path = testing::temp_path("acceptance_cli_" + name + std::to_string(index++) +
                                           (name == "trace" ? ".bin" : ".out"));
      std::filesystem::remove(path);
      const std::string cmd = std::string(FSO_SIM_BINARY) + " " + args + " --seed 31 --workers " +
                              std::to_string(workers) + " --no-timestamp -o " + path.string() +
                              " >/dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        return {false, name + " exited abnormally"};
      }
      outputs.push_back(testing::read_bytes(path));
    }
    const bool same = !outputs[0].empty() &&
                      std::all_of(outputs.begin(), outputs.end(),
                                  [&](const auto& o) { return o == outputs[0]; });
    mismatched += !same;
    detail += name + (same ? " ok; " : " DIFFERS; ");
  }
  return {mismatched == 0, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"optical loss", optical_loss},
      {"Kruse presets and regimes", kruse},
      {"sqrt(m) SNR gain", sqrt_m_gain},
      {"tracking residual m=1 vs m=10", tracking_residual},
      {"spatial filtering", spatial_filter},
      {"end-to-end clear preset", end_to_end},
      {"BER estimator vs counting", estimator_vs_counting},
      {"trace statistics", trace_statistics},
      {"10 MiB payload round trip", payload_roundtrip_10mib},
      {"CLI determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s  %2zu  %-32s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
