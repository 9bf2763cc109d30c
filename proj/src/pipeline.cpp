#include "fso/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fso/errors.hpp"
#include "fso/numerics.hpp"
#include "fso/parallel.hpp"
#include "fso/pat.hpp"
#include "fso/random.hpp"

namespace fso {

namespace {

// Whitening key; fixed so that a payload maps to the same line symbols in
// every run.
constexpr std::uint64_t kWhiteningKey = 0x5eedf00dULL;

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Channel {
  FadingSummary summary;
  ChannelTrace trace;
  std::optional<TraceStats> stats;
};

Channel build_channel(const RunConfig& c, unsigned workers) {
  Channel ch;
  FadingSummary& f = ch.summary;
  f.rytov_variance = rytov_variance(c.geometry, c.weather);
  f.scintillation_index = scintillation_index(f.rytov_variance);
  f.coherence_time_s = coherence_time(c.geometry, c.weather.wind_speed_ground);

  FadingSelection selection = c.channel.fading;
  if (selection == FadingSelection::automatic) {
    selection = f.rytov_variance < c.channel.gamma_gamma_threshold ? FadingSelection::log_normal
                                                                  : FadingSelection::gamma_gamma;
  }
  const double duration = c.channel.emulated_duration_s;
  f.trace_sample_rate_hz =
      std::max(c.channel.trace_samples_per_coherence / f.coherence_time_s, 100.0 / duration);
  const double trace_duration = duration + 2.0 / f.trace_sample_rate_hz;

  if (selection == FadingSelection::none) {
    f.model = "none";
    ch.trace.sample_rate_hz = f.trace_sample_rate_hz;
    ch.trace.duration_s = trace_duration;
    ch.trace.seed = c.run.seed;
    ch.trace.coherence_time_s = f.coherence_time_s;
    ch.trace.gains = Eigen::ArrayXd::Ones(
        static_cast<Eigen::Index>(std::round(f.trace_sample_rate_hz * trace_duration)));
  } else {
    FadingModel model;
    if (selection == FadingSelection::log_normal) {
      model = FadingModel::log_normal(f.scintillation_index);
    } else {
      const GammaGammaParams shape = gamma_gamma_params(f.rytov_variance);
      model = FadingModel::gamma_gamma(shape);
      f.shape = shape;
    }
    f.model = to_string(model.kind);
    TraceOptions options;
    options.workers = workers;
    ch.trace = generate_trace(model, f.coherence_time_s, f.trace_sample_rate_hz, trace_duration,
                              c.run.seed, options);
    ch.stats = trace_stats(ch.trace);
  }
  f.trace_samples = static_cast<std::size_t>(ch.trace.size());
  return ch;
}

double block_start_time(std::size_t block, std::size_t blocks, double duration) {
  return static_cast<double>(block) * duration / static_cast<double>(blocks);
}

double gain_at(const ChannelTrace& trace, double t) {
  const auto i = static_cast<Eigen::Index>(std::floor(t * trace.sample_rate_hz));
  return trace.gains[std::clamp<Eigen::Index>(i, 0, trace.size() - 1)];
}

void unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t first_bit,
                 std::size_t payload_bits, std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t bit = first_bit + i;
    out[i] = bit < payload_bits ? (bytes[bit / 8] >> (7 - bit % 8)) & 1u : 0;
  }
}

void fill_pseudorandom(std::uint64_t seed, std::size_t block, std::size_t first_bit,
                       std::size_t payload_bits, std::span<std::uint8_t> out) {
  Engine engine = make_engine(seed, streams::kPayload, block);
  for (std::size_t i = 0; i < out.size(); i += 64) {
    const std::uint64_t word = engine();
    for (std::size_t j = 0; j < 64 && i + j < out.size(); ++j) {
      out[i + j] = first_bit + i + j < payload_bits ? (word >> j) & 1u : 0;
    }
  }
}

void whiten(std::size_t block, std::span<std::uint8_t> bits) {
  Engine engine = make_engine(kWhiteningKey, streams::kScrambler, block);
  for (std::size_t i = 0; i < bits.size(); i += 64) {
    const std::uint64_t word = engine();
    for (std::size_t j = 0; j < 64 && i + j < bits.size(); ++j) bits[i + j] ^= (word >> j) & 1u;
  }
}

double physical_noise_std(const RunConfig& c, const LinkBudget& budget) {
  double noise_mw = std::pow(10.0, c.optics.noise_floor_dbm / 10.0);
  if (c.filter.noise_from_solar) noise_mw += 1e3 * solar_noise_power(c.filter.solar);
  const double snr_db = budget.p_r_dbm - 10.0 * std::log10(noise_mw);
  const double peak = *std::max_element(c.modem.levels.begin(), c.modem.levels.end());
  return peak * std::pow(10.0, -snr_db / 10.0);
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open payload for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path, "read failed");
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open output for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

struct BlockResult {
  std::size_t payload_errors = 0;
  double ber_estimated = 0.0;
  double signal_energy = 0.0;
  std::size_t symbols = 0;
  LevelAccumulator levels;
};

RunReport run_link(const RunConfig& c, const ExecutionOptions& exec,
                   const std::vector<std::uint8_t>* payload, std::vector<std::uint8_t>* recovered) {
  const auto started = std::chrono::steady_clock::now();
  stage("config", [&] { c.validate(); });

  RunReport report;
  report.config = to_json(c);
  if (exec.timestamps) report.started_at = utc_now();

  AtmosphereOptions atmosphere;
  atmosphere.outage_probability = c.channel.outage_probability;
  atmosphere.rain = c.channel.rain;
  atmosphere.include_geometric_loss = c.channel.include_geometric_loss;
  report.losses =
      stage("atmosphere", [&] { return total_atmospheric_loss(c.weather, c.geometry, atmosphere); });
  report.budget = stage("linkbudget", [&] {
    return received_power_dbm(c.optics, report.losses, c.geometry.beam_divergence_rad);
  });
  if (!kruse_wavelength_validated(c.geometry.wavelength_m)) {
    report.warnings.push_back("wavelength outside the 500-2000 nm range of the visibility model");
  }

  Channel channel = stage("trace", [&] { return build_channel(c, exec.workers); });
  report.fading = channel.summary;
  report.trace = channel.stats;
  if (report.fading.model == "log_normal" && report.fading.rytov_variance > 1.0) {
    report.warnings.push_back("log-normal fading forced outside weak turbulence");
  }

  const std::size_t block_bits = 2 * c.run.block_symbols;
  const std::size_t payload_bits = payload ? 8 * payload->size() : 2 * c.run.symbols;
  const std::size_t blocks = std::max<std::size_t>(1, (payload_bits + block_bits - 1) / block_bits);
  report.blocks = blocks;
  const double duration = c.channel.emulated_duration_s;

  std::vector<double> gains(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    gains[b] = gain_at(channel.trace, block_start_time(b, blocks, duration));
  }

  NoiseSummary& noise = report.noise;
  noise.mode = report.config["noise"]["mode"].get<std::string>();
  noise.noise_std = stage("noise", [&] {
    switch (c.noise.mode) {
      case NoiseMode::q_factor:
        noise.target_q = c.noise.target_q;
        return calibrate_noise_std(c.modem, gains, c.noise.target_q);
      case NoiseMode::physical:
        return physical_noise_std(c, report.budget);
      case NoiseMode::fixed:
        break;
    }
    return c.noise.noise_std;
  });

  const ThresholdSpec thresholds = c.run.thresholds == ThresholdMode::adaptive
                                       ? ThresholdSpec{AdaptiveThresholds{}}
                                       : ThresholdSpec{c.modem.midpoint_thresholds()};
  if (recovered) recovered->assign(payload->size(), 0);

  std::vector<BlockResult> results(blocks);
  stage("modem", [&] {
    parallel_chunks(blocks, exec.workers, [&](std::size_t b) {
      const std::size_t first = b * block_bits;
      BitVector bits(block_bits);
      if (payload) {
        unpack_bits(*payload, first, payload_bits, bits);
      } else {
        fill_pseudorandom(c.run.seed, b, first, payload_bits, bits);
      }
      BitVector line = bits;
      whiten(b, line);
      BlockOutcome out = transmit_block(line, channel.trace, block_start_time(b, blocks, duration),
                                        noise.noise_std,
                                        derive_seed(c.run.seed, streams::kChannelNoise, b),
                                        c.modem, thresholds);
      whiten(b, out.rx_bits);
      const std::size_t valid = std::min(block_bits, payload_bits - std::min(payload_bits, first));
      BlockResult& r = results[b];
      for (std::size_t i = 0; i < valid; ++i) r.payload_errors += bits[i] != out.rx_bits[i];
      if (recovered) {
        for (std::size_t i = 0; i < valid; i += 8) {
          std::uint8_t byte = 0;
          for (std::size_t j = 0; j < 8; ++j) byte = static_cast<std::uint8_t>(byte << 1 | out.rx_bits[i + j]);
          (*recovered)[(first + i) / 8] = byte;
        }
      }
      r.ber_estimated = out.ber_estimated;
      r.signal_energy = out.signal_energy;
      r.symbols = out.symbols;
      r.levels = out.levels;
    });
  });

  BerReport& ber = report.ber;
  LevelAccumulator pooled;
  double energy = 0.0;
  double estimate = 0.0;
  std::size_t symbols = 0;
  for (const BlockResult& r : results) {
    ber.bit_errors += r.payload_errors;
    estimate += r.ber_estimated;
    energy += r.signal_energy;
    symbols += r.symbols;
    pooled.merge(r.levels);
  }
  ber.bits_tx = payload_bits;
  ber.padded_bits = blocks * block_bits - payload_bits;
  ber.ber_counted =
      payload_bits ? static_cast<double>(ber.bit_errors) / static_cast<double>(payload_bits) : 0.0;
  ber.ber_estimated = estimate / static_cast<double>(blocks);
  ber.level_stats = stage("statistics", [&] { return pooled.stats(); });
  const double effective_noise = noise.noise_std / std::sqrt(c.modem.samples_per_symbol);
  if (effective_noise > 0.0) {
    ber.snr_db = 10.0 * std::log10(energy / static_cast<double>(symbols) /
                                   (effective_noise * effective_noise));
  }
  if (effective_noise > 0.0 && ber.bit_errors < 100) {
    report.warnings.push_back("fewer than 100 bit errors counted; the counted BER is coarse");
  }

  report.payload.source = payload ? "file" : "pseudorandom";
  report.payload.payload_bits = payload_bits;
  if (payload) {
    report.payload.bytes = payload->size();
    std::size_t byte_errors = 0;
    if (recovered) {
      for (std::size_t i = 0; i < payload->size(); ++i) byte_errors += (*payload)[i] != (*recovered)[i];
      report.payload.byte_errors = byte_errors;
    }
  }
  if (exec.timestamps) {
    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return report;
}

Json level_stats_json(const LevelStats& s) {
  Json q = Json::array();
  for (double v : s.q) q.push_back(std::isfinite(v) ? Json(v) : Json("inf"));
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}, {"q", q}};
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

double calibrate_noise_std(const Pam4Config& modem, std::span<const double> block_gains, double q) {
  modem.validate();
  if (!(q > 0.0)) throw DomainError("calibrate_noise_std: Q-factor must be > 0");
  if (block_gains.empty()) throw LengthError("calibrate_noise_std: no blocks");
  const auto& lv = modem.levels;
  const double root_sps = std::sqrt(static_cast<double>(modem.samples_per_symbol));
  const double unit = noise_std_for_q(modem, q);
  // Unit-gain estimate at the target Q, using every eye.
  double target = 0.0;
  for (int i = 1; i < 4; ++i) {
    target += numerics::q_function((lv[i] - lv[i - 1]) * root_sps / (2.0 * unit));
  }
  target *= 0.25;
  auto mean_estimate = [&](double sigma) {
    const double sigma_eff = sigma / root_sps;
    double sum = 0.0;
    for (double g : block_gains) {
      for (int i = 1; i < 4; ++i) {
        sum += numerics::q_function(g * (lv[i] - lv[i - 1]) / (2.0 * sigma_eff));
      }
    }
    return 0.25 * sum / static_cast<double>(block_gains.size()) - target;
  };
  return numerics::bisect(mean_estimate, unit * 1e-9, unit * 1e3, 1e-4);
}

RunReport run_endtoend(const RunConfig& config, const ExecutionOptions& exec) {
  if (config.run.payload_path.empty()) return run_link(config, exec, nullptr, nullptr);
  const auto bytes = stage("payload", [&] { return read_file(config.run.payload_path); });
  RunReport report = run_link(config, exec, &bytes, nullptr);
  report.payload.source = config.run.payload_path;
  return report;
}

RunReport payload_roundtrip(const std::string& path_in, const RunConfig& config,
                            const std::string& path_out, const ExecutionOptions& exec) {
  const auto bytes = stage("payload", [&] { return read_file(path_in); });
  std::vector<std::uint8_t> recovered;
  RunReport report = run_link(config, exec, &bytes, &recovered);
  stage("payload", [&] { write_file(path_out, recovered); });
  report.payload.source = path_in;
  report.payload.output_path = path_out;
  return report;
}

std::string scenario_sweep(const RunConfig& base, const std::string& axis,
                           const std::vector<double>& values, const ExecutionOptions& exec) {
  const Json base_json = to_json(base);
  const std::vector<std::string> valid = numeric_keys(base_json);
  if (std::find(valid.begin(), valid.end(), axis) == valid.end()) {
    std::string names;
    for (const auto& k : valid) names += (names.empty() ? "" : ", ") + k;
    throw ConfigError("unknown sweep axis '" + axis + "' (valid: " + names + ")");
  }
  const bool pat_axis = axis.rfind("pat.", 0) == 0;
  std::ostringstream csv;
  if (pat_axis) {
    csv << "axis,value,rms_m,rms_x_m,rms_y_m,max_m,corrections\n";
  } else {
    csv << "axis,value,l_total_db,p_r_dbm,snr_db,rytov_variance,scintillation_index,"
           "fading_model,noise_std,bits,bit_errors,ber_counted,ber_estimated\n";
  }
  for (double v : values) {
    Json j = base_json;
    apply_override(j, axis + "=" + format_number(v));
    const RunConfig c = config_from_json(j);
    csv << axis << ',' << format_number(v);
    if (pat_axis) {
      const TrackingResult t = stage("pat", [&] { return run_tracking_loop(c.pat); });
      csv << ',' << format_number(t.rms_m) << ',' << format_number(t.rms_x_m) << ','
          << format_number(t.rms_y_m) << ',' << format_number(t.max_m) << ',' << t.corrections
          << '\n';
    } else {
      ExecutionOptions quiet = exec;
      quiet.timestamps = false;
      const RunReport r = run_endtoend(c, quiet);
      csv << ',' << format_number(r.losses.l_total_db) << ',' << format_number(r.budget.p_r_dbm)
          << ',' << format_number(r.budget.snr_db) << ',' << format_number(r.fading.rytov_variance)
          << ',' << format_number(r.fading.scintillation_index) << ',' << r.fading.model << ','
          << format_number(r.noise.noise_std) << ',' << r.ber.bits_tx << ',' << r.ber.bit_errors
          << ',' << format_number(r.ber.ber_counted) << ',' << format_number(r.ber.ber_estimated)
          << '\n';
    }
  }
  return csv.str();
}

Json report_to_json(const RunReport& r) {
  Json j;
  j["config"] = r.config;
  j["losses"] = {{"l_sci_db", r.losses.l_sci_db},       {"l_fog_db", r.losses.l_fog_db},
                 {"l_rain_db", r.losses.l_rain_db},     {"l_cloud_db", r.losses.l_cloud_db},
                 {"l_geometric_db", r.losses.l_geometric_db}, {"l_total_db", r.losses.l_total_db}};
  j["budget"] = {{"p_r_dbm", r.budget.p_r_dbm}, {"l_l_db", r.budget.l_l_db},
                 {"l_p_db", r.budget.l_p_db},   {"l_o_db", r.budget.l_o_db},
                 {"snr_db", r.budget.snr_db}};
  Json fading = {{"model", r.fading.model},
                 {"rytov_variance", r.fading.rytov_variance},
                 {"scintillation_index", r.fading.scintillation_index},
                 {"coherence_time_s", r.fading.coherence_time_s},
                 {"trace_sample_rate_hz", r.fading.trace_sample_rate_hz},
                 {"trace_samples", r.fading.trace_samples}};
  if (r.fading.shape) {
    fading["alpha"] = r.fading.shape->alpha;
    fading["beta"] = r.fading.shape->beta;
  }
  j["fading"] = fading;
  if (r.trace) {
    j["trace_stats"] = {{"mean", r.trace->mean},
                        {"scintillation_index", r.trace->scintillation_index},
                        {"half_power_time_s", r.trace->half_power_time_s},
                        {"coherence_time_s", r.trace->coherence_time_s}};
  } else {
    j["trace_stats"] = nullptr;
  }
  j["noise"] = {{"mode", r.noise.mode}, {"noise_std", r.noise.noise_std}};
  if (r.noise.target_q) j["noise"]["target_q"] = *r.noise.target_q;
  j["ber"] = {{"bits_tx", r.ber.bits_tx},
              {"bit_errors", r.ber.bit_errors},
              {"ber_counted", r.ber.ber_counted},
              {"ber_estimated", r.ber.ber_estimated},
              {"snr_db", r.ber.snr_db ? Json(*r.ber.snr_db) : Json(nullptr)},
              {"padded_bits", r.ber.padded_bits},
              {"level_stats", level_stats_json(r.ber.level_stats)}};
  Json payload = {{"source", r.payload.source}, {"payload_bits", r.payload.payload_bits}};
  if (r.payload.bytes) payload["bytes"] = *r.payload.bytes;
  if (r.payload.byte_errors) payload["byte_errors"] = *r.payload.byte_errors;
  if (!r.payload.output_path.empty()) payload["output_path"] = r.payload.output_path;
  j["payload"] = payload;
  j["blocks"] = r.blocks;
  j["warnings"] = r.warnings;
  if (r.started_at) j["started_at"] = *r.started_at;
  if (r.wall_clock_s) j["wall_clock_s"] = *r.wall_clock_s;
  return j;
}

}  // namespace fso
