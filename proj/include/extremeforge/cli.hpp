#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "extremeforge/classical.hpp"
#include "extremeforge/dataset.hpp"
#include "extremeforge/eval.hpp"
#include "extremeforge/image_io.hpp"
#include "extremeforge/parallel.hpp"
#include "extremeforge/planner.hpp"
#include "extremeforge/report.hpp"
#include "extremeforge/server.hpp"
#include "extremeforge/style.hpp"

namespace extremeforge {

namespace fs = std::filesystem;

inline const std::vector<double>& default_alphas() {
  static const std::vector<double> alphas = {0.0, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  return alphas;
}

// Shared settings, loadable with --config. Explicit flags win.
struct Config {
  std::vector<std::string> class_names = default_class_names();
  std::vector<double> alphas = default_alphas();
  Seed seed{0};
  fs::path output_root = "out";
  int server_port = kDefaultPort;
};

inline Config config_from_json(const nlohmann::json& j) {
  Config c;
  try {
    c.class_names = j.value("class_names", c.class_names);
    c.alphas = j.value("alphas", c.alphas);
    c.seed.value = j.value<std::uint64_t>("seed", 0);
    c.output_root = j.value("output_root", c.output_root.string());
    c.server_port = j.value("server_port", c.server_port);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  if (c.class_names.empty()) throw Error(ErrorCode::ParseError, "config: class_names is empty");
  for (double a : c.alphas) StrengthFactor{a};
  if (c.server_port < 0 || c.server_port > 65535) {
    throw Error(ErrorCode::ParamOutOfRange, "config: server_port outside 0..65535");
  }
  return c;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cli {

inline std::atomic<bool> g_interrupted{false};

inline void on_signal(int) { g_interrupted = true; }

inline StyleVector load_style_arg(const fs::path& path) {
  if (path.extension() == ".json") return style_from_json(read_json_file(path));
  return extract_style(load_image(path), path.stem().string());
}

inline std::vector<std::pair<std::string, std::string>> parse_pairs(const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : raw) {
    const auto colon = p.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == p.size()) {
      throw UsageError("--pair expects MINUEND:SUBTRAHEND, got '" + p + "'");
    }
    pairs.emplace_back(p.substr(0, colon), p.substr(colon + 1));
  }
  return pairs;
}

inline TaJob parse_ta(const std::string& spec, Seed default_seed) {
  // KIND[:SEED]
  const auto colon = spec.find(':');
  const auto name = spec.substr(0, colon);
  auto kind = parse_condition(name);
  if (!kind) throw UsageError("unknown condition '" + name + "' in --ta");
  Seed seed = default_seed;
  if (colon != std::string::npos) {
    try {
      seed.value = std::stoull(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("bad seed in --ta '" + spec + "'");
    }
  }
  return {default_params(*kind), seed};
}

inline void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
}

}  // namespace cli

// Entry point for the extremeforge binary. Returns 0 on success, 2 on usage
// errors and 1 on runtime errors; diagnostics go to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"extremeforge: extreme-condition image synthesis and detector robustness evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config (class_names, alphas, seed, output_root, server_port)")
      ->check(CLI::ExistingFile);

  Config config;
  std::function<void()> action;
  std::vector<std::string> classes_flag;
  auto add_classes = [&](CLI::App* sub) {
    sub->add_option("--classes", classes_flag, "class names in id order")->delimiter(',');
  };
  auto class_names = [&] { return classes_flag.empty() ? config.class_names : classes_flag; };

  // extract-style
  auto* extract = app.add_subcommand("extract-style", "write the style vector of an image as JSON");
  fs::path extract_in, extract_out;
  std::string extract_id;
  extract->add_option("image", extract_in, "style image")->required();
  extract->add_option("-o,--output", extract_out, "output JSON")->required();
  extract->add_option("--id", extract_id, "source id (default: file stem)");
  extract->callback([&] {
    action = [&] {
      auto style = extract_style(load_image(extract_in),
                                 extract_id.empty() ? extract_in.stem().string() : extract_id);
      cli::ensure_parent(extract_out);
      write_file_atomic(extract_out, to_json(style).dump(2) + "\n");
    };
  });

  // stylize
  auto* stylize = app.add_subcommand("stylize", "render a content image under a style");
  fs::path stylize_content, stylize_style, stylize_out;
  double stylize_alpha = 1.0;
  stylize->add_option("content", stylize_content, "content image")->required();
  stylize->add_option("style", stylize_style, "style image or style-vector JSON")->required();
  stylize->add_option("--alpha", stylize_alpha, "strength factor (0 = no stylization)");
  stylize->add_option("-o,--output", stylize_out, "output image (.png or .ppm)")->required();
  stylize->callback([&] {
    action = [&] {
      const StrengthFactor alpha(stylize_alpha);
      const auto format = format_from_extension(stylize_out);
      const auto content = load_image(stylize_content);
      const auto style = cli::load_style_arg(stylize_style);
      cli::ensure_parent(stylize_out);
      if (format == ImageFormat::png) {
        write_file_atomic(stylize_out, render_stylized_png(content, style, alpha));
      } else {
        save_image(apply_style(content, style, alpha), stylize_out, format);
      }
    };
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "apply a classical condition simulator");
  fs::path sim_in, sim_out, sim_params;
  std::string sim_kind;
  std::uint64_t sim_seed = 0;
  std::size_t sim_threads = 1;
  sim->add_option("input", sim_in, "image file, or dataset root (images/, labels/)")->required();
  sim->add_option("--kind", sim_kind, "low_light|intense_light|sand_dust|fog|rain")->required();
  sim->add_option("--params", sim_params, "params JSON; omitted fields take defaults");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "PRNG seed");
  sim->add_option("-o,--output", sim_out, "output image, or output dataset root")->required();
  sim->add_option("--threads", sim_threads, "worker threads for dataset input")->check(CLI::PositiveNumber);
  sim->callback([&] {
    action = [&] {
      auto kind = parse_condition(sim_kind);
      if (!kind) throw UsageError("unknown --kind '" + sim_kind + "'");
      const auto params = sim_params.empty() ? default_params(*kind)
                                             : params_from_json(*kind, read_json_file(sim_params));
      const Seed seed = sim_seed_opt->count() ? Seed{sim_seed} : config.seed;
      std::error_code ec;
      if (!fs::is_directory(sim_in, ec)) {
        const auto format = format_from_extension(sim_out);
        cli::ensure_parent(sim_out);
        if (format == ImageFormat::png) {
          write_file_atomic(sim_out, render_simulated_png(load_image(sim_in), params, seed));
        } else {
          save_image(simulate(load_image(sim_in), params, seed), sim_out, format);
        }
        return;
      }
      // dataset mode: per-image seeds derived from (seed, image id)
      const auto ds = dataset_scan(sim_in, class_names());
      fs::create_directories(sim_out / "images");
      fs::create_directories(sim_out / "labels");
      parallel_for(ds.items.size(), sim_threads, [&](std::size_t i) {
        const auto& item = ds.items[i];
        auto img = simulate(item.load(), params, derive_seed(seed, item.image_id));
        save_image(img, sim_out / "images" / (item.image_id + ".png"), ImageFormat::png);
        bool has_label = false;
        detail::copy_label(sim_in / "labels" / (item.image_id + ".txt"),
                           sim_out / "labels" / (item.image_id + ".txt"), has_label);
      });
      out << "simulated " << ds.items.size() << " images (" << to_string(*kind) << ")\n";
    };
  });

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "build a synthesis plan and print its cardinality");
  fs::path plan_contents, plan_styles, plan_out, plan_output_root;
  std::vector<double> plan_alphas;
  std::vector<std::string> plan_ta;
  bool plan_no_dedup = false, plan_no_originals = false;
  std::string plan_format = "png";
  plan_cmd->add_option("--contents", plan_contents, "content dataset root")->required();
  plan_cmd->add_option("--styles", plan_styles, "style library root (one subdir per condition)")->required();
  plan_cmd->add_option("--alphas", plan_alphas, "strength factors, strictly increasing")->delimiter(',');
  plan_cmd->add_option("--output-root", plan_output_root, "where synthesize writes outputs");
  plan_cmd->add_option("--ta", plan_ta, "classical job KIND[:SEED] with default params (repeatable)");
  plan_cmd->add_flag("--no-dedup", plan_no_dedup, "keep one alpha=0 copy per style");
  plan_cmd->add_flag("--no-originals", plan_no_originals, "do not mix originals into the output");
  plan_cmd->add_option("--format", plan_format, "output image format")->check(CLI::IsMember({"png", "ppm"}));
  plan_cmd->add_option("-o,--output", plan_out, "write the plan JSON here");
  add_classes(plan_cmd);
  plan_cmd->callback([&] {
    action = [&] {
      PlanOptions opts;
      opts.output_root = plan_output_root.empty() ? config.output_root : plan_output_root;
      opts.dedup_alpha_zero = !plan_no_dedup;
      opts.mix_in_originals = !plan_no_originals;
      opts.image_format = plan_format == "ppm" ? ImageFormat::ppm : ImageFormat::png;
      for (const auto& t : plan_ta) opts.ta_jobs.push_back(cli::parse_ta(t, config.seed));
      const auto plan = build_plan(dataset_scan(plan_contents, class_names()), scan_styles(plan_styles),
                                   plan_alphas.empty() ? config.alphas : plan_alphas, std::move(opts));
      const auto c = plan_cardinality(plan);
      out << "n_c=" << c.n_c << " n_s=" << c.n_s << " n_alpha=" << c.n_alpha << " raw=" << c.n_e_raw
          << " unique=" << c.n_unique << "\n";
      if (!plan_out.empty()) {
        cli::ensure_parent(plan_out);
        write_file_atomic(plan_out, to_json(plan).dump(2) + "\n");
      }
    };
  });

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "execute a synthesis plan");
  fs::path synth_plan, synth_contents, synth_styles, synth_output_root;
  std::size_t synth_threads = 1;
  bool synth_quiet = false;
  synth->add_option("plan", synth_plan, "plan JSON")->required();
  synth->add_option("--contents", synth_contents, "content root (overrides the plan)");
  synth->add_option("--styles", synth_styles, "style root (overrides the plan)");
  synth->add_option("--output-root", synth_output_root, "output root (overrides the plan)");
  synth->add_option("--threads", synth_threads, "worker threads")->check(CLI::PositiveNumber);
  synth->add_flag("-q,--quiet", synth_quiet, "no progress output");
  synth->callback([&] {
    action = [&] {
      auto plan = plan_from_json(read_json_file(synth_plan));
      if (!synth_contents.empty()) plan.content_root = synth_contents;
      if (!synth_styles.empty()) plan.style_root = synth_styles;
      if (!synth_output_root.empty()) plan.output_root = synth_output_root;
      ExecuteOptions opts;
      opts.threads = synth_threads;
      if (!synth_quiet) {
        opts.progress = [&err](std::size_t done, std::size_t total) {
          if (done == total || done % 50 == 0) err << "\r" << done << "/" << total << std::flush;
          if (done == total) err << "\n";
        };
      }
      const auto m = execute_plan(plan, opts);
      out << "n_c=" << m.counts.n_c << " n_s=" << m.counts.n_s << " n_alpha=" << m.counts.n_alpha
          << " raw=" << m.counts.n_e_raw << " unique=" << m.counts.n_unique << " ta=" << m.n_ta
          << " originals=" << m.n_originals << " written=" << m.entries.size() << "\n";
    };
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score detections against a dataset");
  fs::path eval_dataset, eval_dets, eval_out;
  std::string eval_model;
  std::vector<double> eval_thresholds;
  eval_cmd->add_option("--dataset", eval_dataset, "dataset root (images/, labels/)")->required();
  eval_cmd->add_option("--detections", eval_dets, "directory of <stem>.txt detection files");
  eval_cmd->add_option("--model", eval_model, "use <dataset>/detections/<model>");
  eval_cmd->add_option("--thresholds", eval_thresholds, "IoU thresholds for AP50:95")->delimiter(',');
  eval_cmd->add_option("-o,--output", eval_out, "write the EvalReport JSON here");
  add_classes(eval_cmd);
  eval_cmd->callback([&] {
    action = [&] {
      if (eval_dets.empty() == eval_model.empty()) {
        throw UsageError("give exactly one of --detections or --model");
      }
      const auto names = class_names();
      const auto ds = dataset_scan(eval_dataset, names);
      const auto dir = eval_dets.empty() ? eval_dataset / "detections" / eval_model : eval_dets;
      const auto report = evaluate(ds, load_detection_dir(dir, names.size()),
                                   eval_thresholds.empty() ? coco_thresholds() : eval_thresholds);
      if (!eval_out.empty()) {
        cli::ensure_parent(eval_out);
        write_file_atomic(eval_out, to_json(report).dump(2) + "\n");
      }
      out << render_table(robustness_report({{eval_dataset.filename().string(), report}}, {}));
    };
  });

  // report
  auto* report_cmd = app.add_subcommand("report", "combine labeled reports into a robustness table");
  std::vector<std::string> report_inputs, report_pairs;
  fs::path report_out;
  report_cmd->add_option("reports", report_inputs, "LABEL=report.json")->required();
  report_cmd->add_option("--pair", report_pairs, "MINUEND:SUBTRAHEND (repeatable)");
  report_cmd->add_option("-o,--output", report_out, "write the RobustnessReport JSON here");
  report_cmd->callback([&] {
    action = [&] {
      std::vector<LabeledReport> reports;
      for (const auto& spec : report_inputs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("expected LABEL=path, got '" + spec + "'");
        reports.push_back({spec.substr(0, eq), report_from_json(read_json_file(spec.substr(eq + 1)))});
      }
      const auto pairs = cli::parse_pairs(report_pairs);
      const auto rr = robustness_report(std::move(reports), pairs);
      if (!report_out.empty()) {
        cli::ensure_parent(report_out);
        write_file_atomic(report_out, to_json(rr).dump(2) + "\n");
      }
      out << render_table(rr);
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "run the preview HTTP server for the tuning UI");
  fs::path serve_root;
  int serve_port = kDefaultPort;
  std::string serve_host = "127.0.0.1";
  auto* port_opt = serve->add_option("--port", serve_port, "listen port")->check(CLI::Range(0, 65535));
  serve->add_option("--root", serve_root, "dataset root (default: $EXTREMEFORGE_ROOT or .)");
  serve->add_option("--host", serve_host, "bind address");
  add_classes(serve);
  serve->callback([&] {
    action = [&] {
      fs::path root = serve_root;
      if (root.empty()) {
        const char* env = std::getenv("EXTREMEFORGE_ROOT");
        root = env && *env ? fs::path(env) : fs::path(".");
      }
      PreviewServer server({root, class_names()});
      const int port = server.bind(serve_host, port_opt->count() ? serve_port : config.server_port);
      if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + serve_host);
      out << "serving " << root.string() << " on http://" << serve_host << ":" << port << "/api\n"
          << std::flush;
      cli::g_interrupted = false;
      auto prev_int = std::signal(SIGINT, cli::on_signal);
      auto prev_term = std::signal(SIGTERM, cli::on_signal);
      std::jthread watcher([&](std::stop_token st) {
        while (!st.stop_requested() && !cli::g_interrupted) {
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        server.stop();
      });
      server.listen_after_bind();
      watcher.request_stop();
      watcher.join();
      std::signal(SIGINT, prev_int);
      std::signal(SIGTERM, prev_term);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) config = config_from_json(read_json_file(config_path));
    if (action) action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace extremeforge
