// c3sl: batch-wise activation compression for split learning.
//
// Subcommands: keygen, bench, train, serve-cloud, run-edge, report.
// Exit codes: 0 success, 2 usage, 3 protocol, 4 numeric, 5 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "c3sl/accounting.hpp"
#include "c3sl/bench.hpp"
#include "c3sl/codec.hpp"
#include "c3sl/errors.hpp"
#include "c3sl/keyfile.hpp"
#include "c3sl/pipeline.hpp"
#include "c3sl/session.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

struct CommonTrainFlags {
  c3sl::TrainConfig cfg;
  std::string dataset = "blobs";
  std::size_t train_samples = 2000;
  std::size_t test_samples = 500;
  double blob_sep = 8.0;
  std::uint64_t data_seed = 1;
  bool delta_keys = false;
  std::string codec = "c3sl";
  std::string path = "auto";
  std::string out_dir = ".";
  bool quiet = false;
};

void add_model_flags(CLI::App* cmd, CommonTrainFlags& f, bool with_dataset) {
  cmd->add_option("--ratio", f.cfg.ratio, "Compression ratio R (features per group)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--dim", f.cfg.cut_dim, "Cut-layer dimension D")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.cfg.batch, "Batch size B")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--seed", f.cfg.key_seed, "Binding-key seed");
  cmd->add_option("--model-seed", f.cfg.model_seed, "Weight initialization seed");
  cmd->add_option("--classes", f.cfg.num_classes, "Number of classes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--input-dim", f.cfg.input_dim, "Input feature width (blobs)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--edge-hidden", f.cfg.edge_hidden, "Edge hidden layer widths");
  cmd->add_option("--cloud-hidden", f.cfg.cloud_hidden, "Cloud hidden layer widths");
  cmd->add_flag("--strict", f.cfg.strict_grouping, "Require B divisible by R");
  cmd->add_flag("--delta-keys", f.delta_keys, "Use coordinate-delta debug keys");
  cmd->add_option("--path", f.path, "Convolution path")
      ->check(CLI::IsMember({"auto", "naive", "fft"}));
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_flag("--quiet", f.quiet, "Suppress progress output");
  if (with_dataset) {
    cmd->add_option("--dataset", f.dataset, "Dataset: 'blobs' or 'idx:DIR'");
    cmd->add_option("--train-samples", f.train_samples, "Blob training samples")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--test-samples", f.test_samples, "Blob test samples");
    cmd->add_option("--blob-sep", f.blob_sep, "Blob cluster separation");
    cmd->add_option("--data-seed", f.data_seed, "Blob sampling seed");
    cmd->add_flag("--eval-each-epoch", f.cfg.eval_each_epoch,
                  "Record test accuracy after each epoch");
    cmd->add_option("--codec", f.codec, "Compression: 'c3sl' or 'none'")
        ->check(CLI::IsMember({"c3sl", "none"}));
  }
}

c3sl::TrainConfig finalize_config(CommonTrainFlags& f) {
  f.cfg.key_mode = f.delta_keys ? c3sl::KeySet::Mode::Delta : c3sl::KeySet::Mode::Random;
  f.cfg.compression =
      f.codec == "none" ? c3sl::Compression::None : c3sl::Compression::C3sl;
  if (f.path == "naive") {
    f.cfg.conv_path = c3sl::ConvPath::Naive;
  } else if (f.path == "fft") {
    f.cfg.conv_path = c3sl::ConvPath::Fft;
  } else {
    f.cfg.conv_path = c3sl::ConvPath::Auto;
  }
  f.cfg.validate();
  return f.cfg;
}

struct LoadedData {
  c3sl::Dataset train;
  std::optional<c3sl::Dataset> test;
};

LoadedData load_data(CommonTrainFlags& f) {
  LoadedData out;
  if (f.dataset.rfind("idx:", 0) == 0) {
    const std::string dir = f.dataset.substr(4);
    out.train = c3sl::load_idx_dataset(dir, "train");
    if (std::filesystem::exists(dir + "/t10k-images-idx3-ubyte")) {
      out.test = c3sl::load_idx_dataset(dir, "t10k");
    }
    f.cfg.input_dim = out.train.input_dim;
    if (out.train.num_classes > f.cfg.num_classes) {
      f.cfg.num_classes = out.train.num_classes;
    }
  } else if (f.dataset == "blobs") {
    c3sl::BlobSpec spec;
    spec.train_samples = f.train_samples;
    spec.test_samples = f.test_samples;
    spec.input_dim = f.cfg.input_dim;
    spec.num_classes = f.cfg.num_classes;
    spec.separation = f.blob_sep;
    spec.seed = f.data_seed;
    auto blobs = c3sl::make_blobs(spec);
    out.train = std::move(blobs.train);
    if (spec.test_samples > 0) out.test = std::move(blobs.test);
  } else {
    throw CLI::ValidationError("--dataset", "expected 'blobs' or 'idx:DIR'");
  }
  return out;
}

std::pair<std::string, std::uint16_t> split_addr(const std::string& addr) {
  const auto pos = addr.rfind(':');
  if (pos == std::string::npos || pos + 1 == addr.size()) {
    throw CLI::ValidationError("address", "expected host:port");
  }
  const int port = std::stoi(addr.substr(pos + 1));
  if (port < 0 || port > 0xFFFF) {
    throw CLI::ValidationError("address", "port out of range");
  }
  return {addr.substr(0, pos), static_cast<std::uint16_t>(port)};
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw c3sl::IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw c3sl::IoError("short write: " + path);
}

// --- keygen ------------------------------------------------------------------

int cmd_keygen(std::size_t dim, std::size_t count, std::uint64_t seed,
               const std::string& out_file, bool quiet) {
  const c3sl::KeySet keys = c3sl::KeySet::generate(dim, count, seed);
  c3sl::write_keyset(out_file, keys);
  if (!quiet) std::cout << "params: " << keys.param_count() << "\n";
  return kExitOk;
}

// --- bench -------------------------------------------------------------------

int cmd_bench(std::size_t dim, std::vector<std::size_t> ratios, std::size_t trials,
              std::uint64_t seed, bool delta_keys, const std::string& out_dir,
              const std::string& format, bool quiet) {
  std::vector<c3sl::BenchRow> rows;
  rows.reserve(ratios.size());
  for (std::size_t r : ratios) {
    rows.push_back(c3sl::run_retrieval_bench(dim, r, trials, seed, delta_keys));
  }

  std::string csv = "dim,ratio,trials,mean_cosine,std_cosine,signal_energy,cross_energy\n";
  nlohmann::json j = nlohmann::json::array();
  char line[256];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", row.dim,
                  row.ratio, row.trials, row.mean_cosine, row.std_cosine,
                  row.signal_energy, row.cross_energy);
    csv += line;
    j.push_back({{"dim", row.dim},
                 {"ratio", row.ratio},
                 {"trials", row.trials},
                 {"mean_cosine", row.mean_cosine},
                 {"std_cosine", row.std_cosine},
                 {"signal_energy", row.signal_energy},
                 {"cross_energy", row.cross_energy}});
  }

  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/bench.csv", csv);
  if (!quiet) {
    if (format == "json") {
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << csv;
    }
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------------

int cmd_train(CommonTrainFlags& flags) {
  const c3sl::TrainConfig cfg = finalize_config(flags);
  const LoadedData data = load_data(flags);

  c3sl::Trainer trainer(c3sl::make_model(cfg), c3sl::make_keys(cfg), cfg);
  std::vector<c3sl::StepRecord> records;
  const c3sl::RunSummary summary =
      trainer.run(data.train, data.test ? &*data.test : nullptr, &records);

  std::filesystem::create_directories(flags.out_dir);
  c3sl::write_steps_csv(flags.out_dir + "/steps.csv", records);
  write_text_file(flags.out_dir + "/summary.json", c3sl::summary_json(cfg, summary));
  c3sl::write_checkpoint(flags.out_dir + "/model_edge.c3md", trainer.edge_half().layers());
  c3sl::write_checkpoint(flags.out_dir + "/model_cloud.c3md",
                         trainer.cloud_half().layers());

  if (!flags.quiet) {
    std::cout << "steps: " << summary.steps << "  final loss: " << summary.final_loss;
    if (summary.final_accuracy) std::cout << "  test accuracy: " << *summary.final_accuracy;
    std::cout << "  comm ratio: " << summary.achieved_ratio << "\n";
  }
  return kExitOk;
}

// --- serve-cloud / run-edge ----------------------------------------------------

int cmd_serve_cloud(CommonTrainFlags& flags, const std::string& listen,
                    std::size_t sessions) {
  const c3sl::TrainConfig cfg = finalize_config(flags);
  const auto [host, port] = split_addr(listen);
  c3sl::TcpListener listener(host, port);
  if (!flags.quiet) {
    std::cout << "listening on " << host << ":" << listener.port() << std::endl;
  }
  std::filesystem::create_directories(flags.out_dir);
  for (std::size_t s = 0; s < sessions; ++s) {
    c3sl::FrameChannel channel(listener.accept());
    const c3sl::CloudResult result = c3sl::run_cloud(channel, cfg);
    c3sl::write_checkpoint(flags.out_dir + "/model_cloud.c3md", result.cloud_layers);

    nlohmann::json j;
    j["batches"] = result.counters.batches;
    j["feature_block_bytes"] = result.counters.feature_block_bytes;
    j["label_bytes"] = result.counters.label_bytes;
    j["gradient_block_bytes"] = result.counters.gradient_block_bytes;
    j["frame_bytes_sent"] = result.counters.frame_bytes_sent;
    j["frame_bytes_received"] = result.counters.frame_bytes_received;
    j["final_loss"] = result.losses.empty() ? nullptr : nlohmann::json(result.losses.back());
    write_text_file(flags.out_dir + "/cloud_summary.json", j.dump(2));
    if (!flags.quiet) {
      std::cout << "session " << s + 1 << ": " << result.counters.batches << " batches\n";
    }
  }
  return kExitOk;
}

int cmd_run_edge(CommonTrainFlags& flags, const std::string& connect) {
  const c3sl::TrainConfig cfg = finalize_config(flags);
  const LoadedData data = load_data(flags);
  const auto [host, port] = split_addr(connect);

  c3sl::FrameChannel channel(c3sl::TcpStream::connect(host, port));
  const c3sl::EdgeResult result = c3sl::run_edge(channel, cfg, data.train);

  std::filesystem::create_directories(flags.out_dir);
  c3sl::write_steps_csv(flags.out_dir + "/steps.csv", result.records);
  write_text_file(flags.out_dir + "/summary.json", c3sl::summary_json(cfg, result.summary));
  c3sl::write_checkpoint(flags.out_dir + "/model_edge.c3md", result.edge_layers);

  if (!flags.quiet) {
    std::cout << "steps: " << result.summary.steps
              << "  final loss: " << result.summary.final_loss
              << "  comm ratio: " << result.summary.achieved_ratio << "\n";
  }
  return kExitOk;
}

// --- report --------------------------------------------------------------------

int cmd_report(std::uint64_t batch, std::vector<std::uint64_t> ratios,
               const std::string& out_dir, bool quiet) {
  const auto grid = c3sl::cost_grid(c3sl::reference_split_shapes(), ratios, batch);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : grid) {
    j.push_back({{"method", row.method},
                 {"model", row.model},
                 {"ratio", row.ratio},
                 {"params", row.params},
                 {"flops", row.flops},
                 {"forward_payload_bytes", row.forward_payload_bytes},
                 {"backward_payload_bytes", row.backward_payload_bytes},
                 {"floored_division", row.floored_division}});
  }
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/report.json", j.dump(2));

  if (!quiet) {
    std::printf("%-12s %-18s %4s %14s %16s %16s\n", "method", "model", "R", "params",
                "flops", "fwd_bytes");
    for (const auto& row : grid) {
      std::printf("%-12s %-18s %4llu %14llu %16llu %16llu%s\n", row.method.c_str(),
                  row.model.c_str(), static_cast<unsigned long long>(row.ratio),
                  static_cast<unsigned long long>(row.params),
                  static_cast<unsigned long long>(row.flops),
                  static_cast<unsigned long long>(row.forward_payload_bytes),
                  row.floored_division ? "  (floored 4C/R)" : "");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"circular-convolution batch-wise compression for split learning"};
  app.require_subcommand(1);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "Generate a binding key file");
  std::size_t kg_dim = 0, kg_count = 0;
  std::uint64_t kg_seed = 1;
  std::string kg_out = "keys.c3ks";
  bool kg_quiet = false;
  keygen->add_option("--dim", kg_dim, "Key dimension D")->required()->check(CLI::PositiveNumber);
  keygen->add_option("--count", kg_count, "Number of keys R")
      ->required()
      ->check(CLI::PositiveNumber);
  keygen->add_option("--seed", kg_seed, "Generator seed");
  keygen->add_option("--out", kg_out, "Output key file");
  keygen->add_flag("--quiet", kg_quiet, "Suppress output");

  // bench
  auto* bench = app.add_subcommand("bench", "Measure retrieval quality per ratio");
  std::size_t b_dim = 2048, b_trials = 100;
  std::uint64_t b_seed = 1;
  std::vector<std::size_t> b_ratios = {1, 2, 4, 8, 16};
  bool b_delta = false, b_quiet = false;
  std::string b_out = ".", b_format = "csv";
  bench->add_option("--dim", b_dim, "Feature dimension D")->check(CLI::PositiveNumber);
  bench->add_option("--ratio", b_ratios, "Compression ratios to sweep")
      ->check(CLI::PositiveNumber);
  bench->add_option("--trials", b_trials, "Monte-Carlo trials per ratio")
      ->check(CLI::PositiveNumber);
  bench->add_option("--seed", b_seed, "Sampling seed");
  bench->add_flag("--delta-keys", b_delta, "Use coordinate-delta debug keys");
  bench->add_option("--out", b_out, "Output directory");
  bench->add_option("--format", b_format, "Stdout format")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_flag("--quiet", b_quiet, "Suppress output");

  // train
  auto* train = app.add_subcommand("train", "Train locally through the codec");
  CommonTrainFlags train_flags;
  train_flags.cfg.epochs = 10;
  add_model_flags(train, train_flags, /*with_dataset=*/true);

  // serve-cloud
  auto* serve = app.add_subcommand("serve-cloud", "Run the cloud half of a session");
  CommonTrainFlags serve_flags;
  serve_flags.cfg.epochs = 10;
  std::string listen_addr = "127.0.0.1:7717";
  std::size_t sessions = 1;
  serve->add_option("--listen", listen_addr, "host:port to listen on");
  serve->add_option("--sessions", sessions, "Sessions to serve before exiting")
      ->check(CLI::PositiveNumber);
  add_model_flags(serve, serve_flags, /*with_dataset=*/false);

  // run-edge
  auto* edge = app.add_subcommand("run-edge", "Run the edge half against a cloud");
  CommonTrainFlags edge_flags;
  edge_flags.cfg.epochs = 10;
  std::string connect_addr = "127.0.0.1:7717";
  edge->add_option("--connect", connect_addr, "host:port of the cloud");
  add_model_flags(edge, edge_flags, /*with_dataset=*/true);

  // report
  auto* report = app.add_subcommand("report", "Cost model comparison table");
  std::uint64_t r_batch = 64;
  std::vector<std::uint64_t> r_ratios = {2, 4, 8, 16};
  std::string r_out = ".";
  bool r_quiet = false;
  report->add_option("--batch", r_batch, "Batch size B")->check(CLI::PositiveNumber);
  report->add_option("--ratio", r_ratios, "Ratios to tabulate")->check(CLI::PositiveNumber);
  report->add_option("--out", r_out, "Output directory");
  report->add_flag("--quiet", r_quiet, "Suppress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(keygen)) {
      return cmd_keygen(kg_dim, kg_count, kg_seed, kg_out, kg_quiet);
    }
    if (app.got_subcommand(bench)) {
      return cmd_bench(b_dim, b_ratios, b_trials, b_seed, b_delta, b_out, b_format,
                       b_quiet);
    }
    if (app.got_subcommand(train)) return cmd_train(train_flags);
    if (app.got_subcommand(serve)) return cmd_serve_cloud(serve_flags, listen_addr, sessions);
    if (app.got_subcommand(edge)) return cmd_run_edge(edge_flags, connect_addr);
    if (app.got_subcommand(report)) return cmd_report(r_batch, r_ratios, r_out, r_quiet);
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const c3sl::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const c3sl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const c3sl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
