#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"

#include "fso/config.hpp"
#include "fso/errors.hpp"
#include "fso/pat.hpp"
#include "fso/pipeline.hpp"
#include "fso/spatial_filter.hpp"
#include "fso/trace_io.hpp"

namespace {

/// Standard input copied to a temporary file, removed on destruction.
struct SpooledInput {
  std::filesystem::path path;

  SpooledInput()
      : path(std::filesystem::temp_directory_path() /
             ("fso_sim_stdin_" + std::to_string(::getpid()) + ".bin")) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw fso::IoError(path.string(), "cannot open for writing");
    out << std::cin.rdbuf();
  }
  ~SpooledInput() {
    std::error_code ignored;
    std::filesystem::remove(path, ignored);
  }
  SpooledInput(const SpooledInput&) = delete;
  SpooledInput& operator=(const SpooledInput&) = delete;
};

struct CommonOptions {
  std::string scenario;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format;
  unsigned workers = 0;
  bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& formats) {
  cmd->add_option("--scenario", o.scenario, "Preset name (see `scenarios`)");
  cmd->add_option("--config", o.config_path,
                  "JSON config file; falls back to $FSO_SIM_CONFIG when omitted");
  cmd->add_option("--set", o.overrides, "Override a config value, e.g. --set weather.visibility_km=3")
      ->take_all();
  cmd->add_option("--seed", o.seed, "Master seed (same as --set run.seed=N)");
  cmd->add_option("--output,-o", o.output, "Write the result to this file instead of stdout");
  if (!formats.empty()) {
    cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember(
        [&] {
          std::vector<std::string> v;
          std::stringstream ss(formats);
          for (std::string f; std::getline(ss, f, ',');) v.push_back(f);
          return v;
        }()));
  }
  cmd->add_option("--workers", o.workers, "Worker threads, 0 for one per core; results do not depend on it");
  cmd->add_flag("--no-timestamp", o.no_timestamp, "Omit wall-clock fields for reproducible reports");
}

fso::RunConfig resolve(const CommonOptions& o) {
  std::optional<std::string> preset;
  if (!o.scenario.empty()) preset = o.scenario;
  std::optional<std::string> path;
  if (!o.config_path.empty()) {
    path = o.config_path;
  } else if (const char* env = std::getenv("FSO_SIM_CONFIG"); env && *env) {
    path = std::string(env);
  }
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("run.seed=" + std::to_string(*o.seed));
  return fso::resolve_config(preset, path, overrides);
}

fso::ExecutionOptions execution(const CommonOptions& o) {
  return {o.workers, !o.no_timestamp};
}

void emit(const CommonOptions& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output, std::ios::binary | std::ios::trunc);
  if (!out) throw fso::IoError(o.output, "cannot open for writing");
  out << text;
  if (!out) throw fso::IoError(o.output, "write failed");
}

std::string json_text(const fso::Json& j) { return j.dump(2) + "\n"; }

std::string report_csv(const fso::RunReport& r) {
  std::ostringstream s;
  s.precision(17);
  s << "field,value\n"
    << "scenario," << r.config["scenario"].get<std::string>() << '\n'
    << "l_total_db," << r.losses.l_total_db << '\n'
    << "p_r_dbm," << r.budget.p_r_dbm << '\n'
    << "fading_model," << r.fading.model << '\n'
    << "rytov_variance," << r.fading.rytov_variance << '\n'
    << "noise_std," << r.noise.noise_std << '\n'
    << "bits_tx," << r.ber.bits_tx << '\n'
    << "bit_errors," << r.ber.bit_errors << '\n'
    << "ber_counted," << r.ber.ber_counted << '\n'
    << "ber_estimated," << r.ber.ber_estimated << '\n'
    << "padded_bits," << r.ber.padded_bits << '\n';
  return s.str();
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw fso::ConfigError("--values: '" + item + "' is not a number");
    values.push_back(v);
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-space optical link simulator: budgets, fading traces, PAM-4 links, "
               "beam tracking and spatial filtering"};
  app.require_subcommand(1, 1);

  CommonOptions budget_opts, trace_opts, transmit_opts, pat_opts, filter_opts, sweep_opts,
      scenario_opts;

  auto* budget = app.add_subcommand("budget", "Atmospheric losses and received power");
  add_common(budget, budget_opts, "table,csv,json");

  auto* trace = app.add_subcommand("trace", "Generate a fading trace (binary, or CSV for *.csv)");
  add_common(trace, trace_opts, "");
  double trace_duration = 0.0;
  double trace_rate = 0.0;
  std::string stats_path;
  trace->add_option("--duration", trace_duration, "Trace length in seconds (default: channel.emulated_duration_s)");
  trace->add_option("--rate", trace_rate, "Sample rate in Hz (default: channel.trace_samples_per_coherence / tau0)");
  trace->add_option("--stats", stats_path, "Also write trace statistics as JSON to this file");

  auto* transmit = app.add_subcommand("transmit", "End-to-end PAM-4 transmission over the emulated channel");
  add_common(transmit, transmit_opts, "json,csv");
  std::string payload_in, payload_out;
  transmit->add_option("--payload", payload_in,
                       "File to send instead of pseudorandom bits; - reads standard input");
  transmit->add_option("--payload-out", payload_out, "Where to write the recovered payload")
      ->needs(transmit->get_option("--payload"));

  auto* pat = app.add_subcommand("pat-sim", "Closed-loop quadrant-detector tracking");
  add_common(pat, pat_opts, "json");
  std::string residual_path;
  pat->add_option("--residual", residual_path, "Write the residual trajectory as CSV");

  auto* filter = app.add_subcommand("filter-sim", "Spatial-filter SNR gain and BER demonstration");
  add_common(filter, filter_opts, "json");
  std::string grid_path;
  filter->add_option("--grid", grid_path, "CSV grid of per-cell signal power; reports its SNR gain only");

  auto* sweep = app.add_subcommand("sweep", "One run per value of a numeric config key, as CSV");
  add_common(sweep, sweep_opts, "");
  std::string axis, values_text;
  sweep->add_option("--axis", axis, "Dotted config key, e.g. weather.visibility_km")->required();
  sweep->add_option("--values", values_text, "Comma-separated values (may be empty)")->required();

  auto* scenarios = app.add_subcommand("scenarios", "List scenario presets");
  add_common(scenarios, scenario_opts, "table,json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*budget) {
      const fso::RunConfig c = resolve(budget_opts);
      fso::AtmosphereOptions atmosphere;
      atmosphere.outage_probability = c.channel.outage_probability;
      atmosphere.rain = c.channel.rain;
      atmosphere.include_geometric_loss = c.channel.include_geometric_loss;
      const auto losses = fso::total_atmospheric_loss(c.weather, c.geometry, atmosphere);
      const auto link = fso::received_power_dbm(c.optics, losses, c.geometry.beam_divergence_rad);
      if (budget_opts.format == "csv") {
        emit(budget_opts, fso::format_budget_csv(losses, link));
      } else if (budget_opts.format == "json") {
        fso::RunReport r;
        r.config = fso::to_json(c);
        r.losses = losses;
        r.budget = link;
        const fso::Json full = fso::report_to_json(r);
        emit(budget_opts, json_text({{"config", full["config"]},
                                     {"losses", full["losses"]},
                                     {"budget", full["budget"]}}));
      } else {
        emit(budget_opts, fso::format_budget_table(losses, link));
      }
    } else if (*trace) {
      if (trace_opts.output.empty()) throw fso::ConfigError("trace: --output is required");
      const fso::RunConfig c = resolve(trace_opts);
      const double rytov = fso::rytov_variance(c.geometry, c.weather);
      const double tau0 = fso::coherence_time(c.geometry, c.weather.wind_speed_ground);
      fso::FadingModel model;
      const bool gamma = c.channel.fading == fso::FadingSelection::gamma_gamma ||
                         (c.channel.fading == fso::FadingSelection::automatic &&
                          rytov >= c.channel.gamma_gamma_threshold);
      if (c.channel.fading == fso::FadingSelection::none) {
        throw fso::ConfigError("trace: channel.fading=none has no trace to generate");
      }
      model = gamma ? fso::FadingModel::gamma_gamma(fso::gamma_gamma_params(rytov))
                    : fso::FadingModel::log_normal(fso::scintillation_index(rytov));
      const double rate = trace_rate > 0.0 ? trace_rate : c.channel.trace_samples_per_coherence / tau0;
      const double duration = trace_duration > 0.0 ? trace_duration : c.channel.emulated_duration_s;
      fso::TraceOptions options;
      options.workers = trace_opts.workers;
      const auto t = fso::generate_trace(model, tau0, rate, duration, c.run.seed, options);
      fso::save_trace(trace_opts.output, t);
      fso::Json summary = {{"model", fso::to_string(model.kind)},
                           {"rytov_variance", rytov},
                           {"target_scintillation_index", model.sigma_i2},
                           {"coherence_time_s", tau0},
                           {"sample_rate_hz", rate},
                           {"samples", t.size()},
                           {"seed", c.run.seed}};
      if (t.size() >= 100) {
        const auto s = fso::trace_stats(t);
        summary["stats"] = {{"mean", s.mean},
                            {"scintillation_index", s.scintillation_index},
                            {"half_power_time_s", s.half_power_time_s},
                            {"coherence_time_s", s.coherence_time_s}};
      }
      if (!stats_path.empty()) {
        std::ofstream out(stats_path);
        if (!out) throw fso::IoError(stats_path, "cannot open for writing");
        out << json_text(summary);
      } else {
        std::cout << json_text(summary);
      }
    } else if (*transmit) {
      const fso::RunConfig c = resolve(transmit_opts);
      const bool from_stdin = payload_in == "-";
      std::optional<SpooledInput> spool;
      if (from_stdin) {
        spool.emplace();
        payload_in = spool->path.string();
      }
      fso::RunReport r;
      if (!payload_out.empty()) {
        r = fso::payload_roundtrip(payload_in, c, payload_out, execution(transmit_opts));
      } else {
        fso::RunConfig with_payload = c;
        if (!payload_in.empty()) with_payload.run.payload_path = payload_in;
        r = fso::run_endtoend(with_payload, execution(transmit_opts));
      }
      if (from_stdin) {
        r.payload.source = "-";
        r.config["run"]["payload_path"] = "-";
      }
      emit(transmit_opts, transmit_opts.format == "csv" ? report_csv(r)
                                                         : json_text(fso::report_to_json(r)));
    } else if (*pat) {
      fso::RunConfig c = resolve(pat_opts);
      const auto result = fso::run_tracking_loop(c.pat);
      if (!residual_path.empty()) {
        std::ofstream out(residual_path);
        if (!out) throw fso::IoError(residual_path, "cannot open for writing");
        fso::write_residual_csv(out, result);
      }
      emit(pat_opts, json_text({{"config", fso::to_json(c)["pat"]},
                                {"seed", c.pat.seed},
                                {"corrections", result.corrections},
                                {"rms_m", result.rms_m},
                                {"rms_x_m", result.rms_x_m},
                                {"rms_y_m", result.rms_y_m},
                                {"max_m", result.max_m},
                                {"disturbance_rms_x_m", result.disturbance_rms_x_m},
                                {"disturbance_rms_y_m", result.disturbance_rms_y_m}}));
    } else if (*filter) {
      const fso::RunConfig c = resolve(filter_opts);
      if (!grid_path.empty()) {
        std::ifstream in(grid_path);
        if (!in) throw fso::IoError(grid_path, "cannot open grid");
        const auto grid = fso::read_grid_csv(in, c.filter.demo.noise_power_total);
        const auto s = fso::filtered_snr(grid);
        emit(filter_opts, json_text({{"n", grid.order()},
                                     {"snr_unfiltered", s.snr_unfiltered},
                                     {"snr_filtered", s.snr_filtered},
                                     {"gain", s.gain},
                                     {"gain_db", s.gain_db},
                                     {"selected_row", s.selected.row},
                                     {"selected_col", s.selected.col}}));
      } else {
        const auto d =
            fso::filtering_ber_demo(c.filter.demo, c.modem, c.run.seed, filter_opts.workers);
        auto ber = [](const fso::BerReport& b) {
          return fso::Json{{"bits_tx", b.bits_tx},
                           {"bit_errors", b.bit_errors},
                           {"ber_counted", b.ber_counted},
                           {"ber_estimated", b.ber_estimated}};
        };
        emit(filter_opts, json_text({{"config", fso::to_json(c)["filter"]},
                                     {"seed", c.run.seed},
                                     {"snr_unfiltered", d.snr.snr_unfiltered},
                                     {"snr_filtered", d.snr.snr_filtered},
                                     {"gain", d.snr.gain},
                                     {"gain_db", d.snr.gain_db},
                                     {"selected_row", d.snr.selected.row},
                                     {"selected_col", d.snr.selected.col},
                                     {"noise_std_unfiltered", d.noise_std_unfiltered},
                                     {"noise_std_filtered", d.noise_std_filtered},
                                     {"unfiltered", ber(d.unfiltered)},
                                     {"filtered", ber(d.filtered)}}));
      }
    } else if (*sweep) {
      const fso::RunConfig c = resolve(sweep_opts);
      emit(sweep_opts,
           fso::scenario_sweep(c, axis, parse_values(values_text), execution(sweep_opts)));
    } else if (*scenarios) {
      const auto presets = fso::list_presets();
      if (scenario_opts.format == "json") {
        fso::Json list = fso::Json::array();
        for (const auto& p : presets) {
          list.push_back({{"name", p.name},
                          {"description", p.description},
                          {"provenance", p.provenance},
                          {"config", fso::to_json(fso::preset(p.name))}});
        }
        emit(scenario_opts, json_text(list));
      } else {
        std::ostringstream s;
        for (const auto& p : presets) {
          s << p.name << "\n  " << p.description << "\n  source: " << p.provenance << "\n";
        }
        emit(scenario_opts, s.str());
      }
    }
  } catch (const fso::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
