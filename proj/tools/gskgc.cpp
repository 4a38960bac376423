// Command-line driver for the subgraph-prompt KGC pipeline.

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "gskgc/error.hpp"
#include "gskgc/eval.hpp"
#include "gskgc/inference.hpp"
#include "gskgc/io.hpp"
#include "gskgc/kg.hpp"
#include "gskgc/manifest.hpp"
#include "gskgc/prompt.hpp"

namespace fs = std::filesystem;
using namespace gskgc;

namespace {

struct DatasetArgs {
  std::string name;
  std::string dir;
  std::string format;  // "", "static" or "temporal"
  std::string names_file;

  TripleFormat resolve_format() const {
    if (format == "static") return TripleFormat::Static;
    if (format == "temporal") return TripleFormat::Temporal;
    if (!format.empty()) throw ValidationError("--format must be static or temporal");
    if (!published_stats(name)) {
      throw ValidationError("unknown dataset name '" + name + "'; pass --format static|temporal for custom data");
    }
    return is_temporal_dataset(name) ? TripleFormat::Temporal : TripleFormat::Static;
  }

  KnowledgeGraph load(std::vector<LoadReport>* reports = nullptr) const {
    std::optional<fs::path> names;
    if (!names_file.empty()) names = names_file;
    return load_dataset(dir, resolve_format(), reports, names);
  }
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& args, bool required = true) {
  cmd->add_option("--dataset", args.name, "Dataset name (WN18RR, FB15k-237, FB15k-237N, ICEWS14, ICEWS05-15)")
      ->required(required);
  cmd->add_option("--dir", args.dir, "Directory holding train/valid/test files")->required(required);
  cmd->add_option("--format", args.format, "static or temporal (required for unknown dataset names)");
  cmd->add_option("--names", args.names_file, "Optional `entity \\t display name` file");
}

struct GenArgs {
  DatasetArgs data;
  std::string split = "test";
  std::string config_file;
  std::optional<int> depth;
  std::optional<std::size_t> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_chars;
  bool no_negatives = false;
  bool no_neighbors = false;
  std::string descriptions;
  std::string out;
  std::string trainer_out;
  std::string dump;
  unsigned concurrency = std::max(1u, std::thread::hardware_concurrency());
};

void add_gen_options(CLI::App* cmd, GenArgs& args, bool with_budget) {
  add_dataset_options(cmd, args.data);
  cmd->add_option("--split", args.split, "train, valid or test")->capture_default_str();
  cmd->add_option("--config", args.config_file, "key=value prompt config file");
  cmd->add_option("--p", args.depth, "Context path depth (default 1)");
  if (with_budget) cmd->add_option("--M", args.budget, "Negatives + neighbors budget (default 100)");
  cmd->add_option("--seed", args.seed, "Sampling seed (default 0)");
  cmd->add_option("--max-chars", args.max_chars, "Prompt character cap (default 8000)");
  cmd->add_flag("--no-negatives", args.no_negatives, "Drop the negatives part");
  cmd->add_flag("--no-neighbors", args.no_neighbors, "Drop the neighbors part");
  cmd->add_option("--descriptions", args.descriptions, "`entity \\t description` file; enables descriptions");
  cmd->add_option("--concurrency", args.concurrency, "Worker threads");
}

PromptConfig resolve_config(const GenArgs& args) {
  PromptConfig cfg;
  if (!args.config_file.empty()) cfg = PromptConfig::from_file(args.config_file);
  if (args.depth) cfg.depth = *args.depth;
  if (args.budget) cfg.budget = *args.budget;
  if (args.seed) cfg.seed = *args.seed;
  if (args.max_chars) cfg.max_chars = *args.max_chars;
  if (args.no_negatives) cfg.use_negatives = false;
  if (args.no_neighbors) cfg.use_neighbors = false;
  if (!args.descriptions.empty()) cfg.use_descriptions = true;
  cfg.validate();
  return cfg;
}

void add_input_files(RunManifest& manifest, const DatasetArgs& data) {
  for (const auto* name : {"train.txt", "train.tsv", "valid.txt", "dev.txt", "valid.tsv", "dev.tsv", "test.txt", "test.tsv"}) {
    const auto p = fs::path(data.dir) / name;
    if (fs::exists(p)) manifest.add_file("input", p);
  }
  if (!data.names_file.empty()) manifest.add_file("input", data.names_file);
}

std::string dataset_summary_json(const std::vector<PromptRecord>& records, const PromptConfig& cfg) {
  std::size_t negs = 0, neighbors = 0, truncated = 0, with_neg = 0, with_nb = 0;
  for (const auto& r : records) {
    negs += r.context.negatives.size();
    neighbors += r.context.neighbors.size();
    truncated += r.truncated ? 1 : 0;
    with_neg += r.context.negatives.empty() ? 0 : 1;
    with_nb += r.context.neighbors.empty() ? 0 : 1;
  }
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  nlohmann::ordered_json j;
  j["records"] = records.size();
  j["M"] = cfg.budget;
  j["p"] = cfg.depth;
  j["config_hash"] = cfg.hash();
  j["mean_negatives"] = static_cast<double>(negs) / n;
  j["mean_neighbors"] = static_cast<double>(neighbors) / n;
  j["records_with_negatives"] = with_neg;
  j["records_with_neighbors"] = with_nb;
  j["truncated"] = truncated;
  return j.dump(2) + "\n";
}

/// Builds, writes and manifests one prompt dataset. Returns the records.
std::vector<PromptRecord> generate_dataset(const GenArgs& args, const KnowledgeGraph& kg, const PromptConfig& cfg,
                                           const fs::path& out, RunManifest& manifest) {
  const auto split = parse_split(args.split);
  std::optional<DescriptionTable> descriptions;
  if (!args.descriptions.empty()) descriptions = DescriptionTable::load(args.descriptions);

  manifest.begin_stage("build");
  const auto records = build_dataset(kg, split, cfg, descriptions ? &*descriptions : nullptr, args.concurrency);
  manifest.end_stage();

  manifest.begin_stage("write");
  std::ostringstream buf;
  write_pipeline_jsonl(buf, DatasetHeader{args.data.name, split, cfg.hash(), cfg.seed, records.size()}, records);
  write_file_atomic(out, buf.str());
  manifest.add_file("output", out);
  if (!args.trainer_out.empty()) {
    std::ostringstream tb;
    write_trainer_jsonl(tb, records);
    write_file_atomic(args.trainer_out, tb.str());
    manifest.add_file("output", args.trainer_out);
  }
  if (!args.dump.empty()) {
    std::ostringstream db;
    write_subgraph_dump(db, kg, records, cfg);
    write_file_atomic(args.dump, db.str());
    manifest.add_file("output", args.dump);
  }
  manifest.end_stage();
  if (!args.descriptions.empty()) manifest.add_file("input", args.descriptions);
  return records;
}

struct InferArgs {
  std::string in;
  std::string endpoint;
  std::string mock;
  std::string model = "default";
  std::string token_env = "GSKGC_API_KEY";
  int k = 1;
  unsigned concurrency = 4;
  int num_return_sequences = 1;
  double top_p = 0.95;
  int top_k = 20;
  double temperature = 1.0;
  int max_new_tokens = 64;
  int retries = 4;
  bool send_top_k = false;
  std::size_t limit = 0;
  std::string ranking = "first";
  std::string out;
};

void add_infer_options(CLI::App* cmd, InferArgs& args, bool with_io) {
  if (with_io) {
    cmd->add_option("--in", args.in, "Pipeline JSONL")->required();
    cmd->add_option("--out", args.out, "Prediction JSONL (resumed if present)")->required();
    cmd->add_option("--limit", args.limit, "Process at most N missing records");
  }
  auto* endpoint = cmd->add_option("--endpoint", args.endpoint, "OpenAI-compatible base URL, e.g. http://host:8000/v1");
  auto* mock = cmd->add_option("--mock", args.mock, "Mock oracle: perfect | corrupt=<rate>,seed=<n>");
  endpoint->excludes(mock);
  mock->excludes(endpoint);
  cmd->add_option("--model", args.model, "Model name sent to the endpoint");
  cmd->add_option("--token-env", args.token_env, "Environment variable holding the bearer token");
  cmd->add_option("--k", args.k, "Answers per query (1 = greedy)")->capture_default_str();
  // sweep shares the worker count of its prompt build
  if (with_io) cmd->add_option("--concurrency", args.concurrency, "In-flight requests")->capture_default_str();
  cmd->add_option("--num-return-sequences", args.num_return_sequences, "Sequences per sampling request");
  cmd->add_option("--top-p", args.top_p)->capture_default_str();
  cmd->add_option("--top-k", args.top_k)->capture_default_str();
  cmd->add_option("--temperature", args.temperature)->capture_default_str();
  cmd->add_option("--max-new-tokens", args.max_new_tokens)->capture_default_str();
  cmd->add_option("--retries", args.retries, "HTTP retries before a record is marked failed");
  cmd->add_flag("--send-top-k", args.send_top_k, "Include top_k in request bodies");
  cmd->add_option("--ranking", args.ranking, "first | frequency");
}

std::unique_ptr<Generator> make_generator(const InferArgs& args, const std::vector<PipelineRow>& rows) {
  if (!args.mock.empty()) {
    std::unordered_map<std::uint64_t, std::string> gold;
    for (const auto& r : rows) gold.emplace(r.id, r.answer);
    return std::make_unique<MockOracle>(std::move(gold), MockOracle::parse_spec(args.mock));
  }
  if (args.endpoint.empty()) throw ValidationError("one of --endpoint or --mock is required");
  HttpOptions opts;
  opts.base_url = args.endpoint;
  opts.model = args.model;
  opts.token_env = args.token_env;
  opts.max_retries = args.retries;
  opts.send_top_k = args.send_top_k;
  return std::make_unique<HttpGenerator>(opts);
}

BatchOptions batch_options(const InferArgs& args) {
  BatchOptions opts;
  opts.k = args.k;
  opts.concurrency = args.concurrency;
  opts.limit = args.limit;
  opts.config.top_p = args.top_p;
  opts.config.top_k = args.top_k;
  opts.config.temperature = args.temperature;
  opts.config.max_new_tokens = args.max_new_tokens;
  opts.config.num_return_sequences = args.num_return_sequences;
  opts.config.validate();
  if (args.ranking == "frequency") opts.ranking = Ranking::Frequency;
  else if (args.ranking != "first") throw ValidationError("--ranking must be first or frequency");
  return opts;
}

BatchSummary run_inference(const InferArgs& args, const std::vector<PipelineRow>& rows, const fs::path& out) {
  auto generator = make_generator(args, rows);
  std::vector<PromptInput> inputs;
  inputs.reserve(rows.size());
  for (const auto& r : rows) inputs.push_back({r.id, r.prompt});
  return run_batch(inputs, *generator, batch_options(args), out);
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("bad --ks value '" + item + "'");
    }
  }
  return ks;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(static_cast<T>(std::stoull(item)));
    } catch (const std::exception&) {
      throw ValidationError("bad list value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgraph-prompt knowledge graph completion pipeline"};
  app.require_subcommand(1);

  // ingest
  DatasetArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Load a dataset and print its statistics");
  add_dataset_options(ingest, ingest_args);

  // gen-dataset
  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-dataset", "Build QA prompts for one split");
  add_gen_options(gen, gen_args, true);
  gen->add_option("--out", gen_args.out, "Pipeline JSONL output")->required();
  gen->add_option("--trainer-out", gen_args.trainer_out, "Also write instruction/input/output JSONL");
  gen->add_option("--dump-subgraph", gen_args.dump, "Also write per-query negatives/paths JSONL");

  // infer
  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Generate answers for a prompt file");
  add_infer_options(infer, infer_args, true);

  // score
  std::string score_preds, score_gold, score_ks = "1,3,10", score_out;
  DatasetArgs score_data;
  auto* score = app.add_subcommand("score", "Hits@k and hallucination statistics");
  score->add_option("--preds", score_preds, "Prediction JSONL")->required();
  score->add_option("--gold", score_gold, "Pipeline JSONL with gold answers")->required();
  score->add_option("--ks", score_ks, "Comma-separated k values")->capture_default_str();
  score->add_option("--out", score_out, "Write the JSON report here");
  add_dataset_options(score, score_data, false);

  // reevaluate
  auto* reeval = app.add_subcommand("reevaluate", "Export failures for judging and apply judgments");
  reeval->require_subcommand(1);
  std::string rx_preds, rx_gold, rx_out;
  DatasetArgs rx_data;
  auto* rx_export = reeval->add_subcommand("export", "Write rank-1 misses for external judges");
  rx_export->add_option("--preds", rx_preds)->required();
  rx_export->add_option("--gold", rx_gold)->required();
  rx_export->add_option("--out", rx_out)->required();
  add_dataset_options(rx_export, rx_data);
  std::string ra_preds, ra_gold, ra_failures, ra_judgments, ra_out;
  auto* rx_adjust = reeval->add_subcommand("adjust", "Compute raw and adjusted accuracy from judgments");
  rx_adjust->add_option("--preds", ra_preds)->required();
  rx_adjust->add_option("--gold", ra_gold)->required();
  rx_adjust->add_option("--failures", ra_failures)->required();
  rx_adjust->add_option("--judgments", ra_judgments)->required();
  rx_adjust->add_option("--out", ra_out, "Write the JSON ledger here");

  // sweep
  GenArgs sweep_gen;
  InferArgs sweep_infer;
  std::string sweep_values = "0,20,40,60,80,100", sweep_dir, sweep_ks = "1,3,10";
  auto* sweep = app.add_subcommand("sweep", "One dataset and report per budget M");
  add_gen_options(sweep, sweep_gen, false);
  sweep->add_option("--M", sweep_values, "Comma-separated budgets")->capture_default_str();
  sweep->add_option("--out-dir", sweep_dir, "Output directory")->required();
  sweep->add_option("--ks", sweep_ks, "Comma-separated k values")->capture_default_str();
  add_infer_options(sweep, sweep_infer, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::Validation);
  }

  try {
    if (*ingest) {
      std::vector<LoadReport> reports;
      const auto start = std::chrono::steady_clock::now();
      const auto kg = ingest_args.load(&reports);
      const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (const auto& r : reports) {
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      }
      std::cout << format_stats_table(ingest_args.name, stats(kg), published_stats(ingest_args.name));
      std::printf("loaded in %.2f s\n", secs);
      return 0;
    }

    if (*gen) {
      const auto cfg = resolve_config(gen_args);
      RunManifest manifest;
      manifest.command = "gen-dataset";
      manifest.dataset = gen_args.data.name;
      manifest.config_hash = cfg.hash();
      manifest.seed = cfg.seed;
      manifest.begin_stage("load");
      const auto kg = gen_args.data.load();
      manifest.end_stage();
      add_input_files(manifest, gen_args.data);
      if (!gen_args.config_file.empty()) manifest.add_file("input", gen_args.config_file);
      const auto records = generate_dataset(gen_args, kg, cfg, gen_args.out, manifest);
      manifest.write(manifest_path_for(gen_args.out));
      std::size_t truncated = 0;
      for (const auto& r : records) truncated += r.truncated ? 1 : 0;
      std::cerr << "wrote " << records.size() << " records (" << truncated << " truncated) to " << gen_args.out
                << "\n";
      return 0;
    }

    if (*infer) {
      const auto rows = read_pipeline_jsonl(infer_args.in);
      RunManifest manifest;
      manifest.command = "infer";
      manifest.add_file("input", infer_args.in);
      manifest.begin_stage("infer");
      const auto summary = run_inference(infer_args, rows, infer_args.out);
      manifest.end_stage();
      manifest.add_file("output", infer_args.out);
      manifest.write(manifest_path_for(infer_args.out));
      std::cerr << "processed " << summary.processed << ", skipped " << summary.skipped << ", errors "
                << summary.errors << ", short lists " << summary.short_lists << "\n";
      return summary.errors > 0 ? exit_code(ErrorKind::Endpoint) : 0;
    }

    if (*score) {
      const auto preds = read_predictions(score_preds);
      const auto gold = gold_from_rows(read_pipeline_jsonl(score_gold));
      const auto ks = parse_ks(score_ks);
      const auto report = hits_at_k(preds, gold, ks);
      std::cout << report.to_text();
      std::string hallucination_json;
      if (!score_data.dir.empty()) {
        const auto kg = score_data.load();
        const auto hall = hallucination_stats(preds, gold, EntityLexicon::from_graph(kg));
        std::cout << hall.to_text();
        hallucination_json = hall.to_json();
      }
      if (!score_out.empty()) {
        auto j = nlohmann::ordered_json::parse(report.to_json());
        if (!hallucination_json.empty()) j["hallucination"] = nlohmann::ordered_json::parse(hallucination_json);
        write_file_atomic(score_out, j.dump(2) + "\n");
      }
      return 0;
    }

    if (*rx_export) {
      const auto preds = read_predictions(rx_preds);
      const auto gold = gold_from_rows(read_pipeline_jsonl(rx_gold));
      const auto kg = rx_data.load();
      const auto rows = export_failures(preds, gold, EntityLexicon::from_graph(kg));
      std::ostringstream buf;
      write_failures_jsonl(buf, rows);
      write_file_atomic(rx_out, buf.str());
      std::cerr << "exported " << rows.size() << " failures\n";
      return 0;
    }

    if (*rx_adjust) {
      const auto preds = read_predictions(ra_preds);
      const auto gold = gold_from_rows(read_pipeline_jsonl(ra_gold));
      const auto ledger =
          reevaluate(preds, gold, read_failures_jsonl(ra_failures), read_judgments_jsonl(ra_judgments));
      std::cout << ledger.to_text();
      if (!ra_out.empty()) write_file_atomic(ra_out, ledger.to_json() + "\n");
      return 0;
    }

    if (*sweep) {
      const auto budgets = parse_list<std::size_t>(sweep_values);
      const auto ks = parse_ks(sweep_ks);
      sweep_infer.concurrency = sweep_gen.concurrency;
      const bool with_inference = !sweep_infer.mock.empty() || !sweep_infer.endpoint.empty();
      const auto kg = sweep_gen.data.load();
      int rc = 0;
      for (const auto m : budgets) {
        auto args = sweep_gen;
        args.budget = m;
        const auto cfg = resolve_config(args);
        const fs::path dir = fs::path(sweep_dir) / ("M" + std::to_string(m));
        const auto prompts = dir / "prompts.jsonl";
        RunManifest manifest;
        manifest.command = "sweep";
        manifest.dataset = args.data.name;
        manifest.config_hash = cfg.hash();
        manifest.seed = cfg.seed;
        add_input_files(manifest, args.data);
        const auto records = generate_dataset(args, kg, cfg, prompts, manifest);
        nlohmann::ordered_json report = nlohmann::ordered_json::parse(dataset_summary_json(records, cfg));
        if (with_inference) {
          const auto preds_path = dir / "predictions.jsonl";
          const auto rows = read_pipeline_jsonl(prompts);
          manifest.begin_stage("infer");
          const auto summary = run_inference(sweep_infer, rows, preds_path);
          manifest.end_stage();
          manifest.add_file("output", preds_path);
          if (summary.errors > 0) rc = exit_code(ErrorKind::Endpoint);
          const auto score_report = hits_at_k(read_predictions(preds_path), gold_from_rows(rows), ks);
          report["scores"] = nlohmann::ordered_json::parse(score_report.to_json());
          std::cout << "M=" << m << "\n" << score_report.to_text();
        } else {
          std::cout << "M=" << m << ": " << records.size() << " records\n";
        }
        write_file_atomic(dir / "report.json", report.dump(2) + "\n");
        manifest.add_file("output", dir / "report.json");
        manifest.write(manifest_path_for(prompts));
      }
      return rc;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::Io);
  }
  return 0;
}
