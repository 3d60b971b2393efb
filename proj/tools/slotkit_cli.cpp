// slotkit command line: ingestion, augmentation, prompt building, dataset
// splitting, evaluation, an interactive tracking REPL, and the HTTP service.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <slotkit.hpp>

namespace {

using namespace slotkit;

SlotLibrary load_slots_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open slot library: " + path);
  ojson j = ojson::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::MalformedJson, path + ": invalid JSON");
  if (j.is_object() && j.contains("library")) j = j["library"];
  return library_from_json(j, path);
}

std::string flag_sidecar(const std::string& output, const char* suffix) {
  std::filesystem::path p(output);
  p.replace_extension("");
  return p.string() + suffix;
}

int run_ingest(const std::string& input, const std::string& output, std::uint64_t seed) {
  IngestResult result = ingest_sgd(input, seed);
  write_jsonl(result.records, output);
  write_slot_map(result.slot_map, flag_sidecar(output, ".slot_map.json"));

  std::map<std::string, int> by_reason;
  for (const auto& flag : result.flags) by_reason[flag.reason]++;
  std::fprintf(stderr, "wrote %zu records to %s (%zu slots mapped)\n", result.records.size(),
               output.c_str(), result.slot_map.size());
  for (const auto& [reason, n] : by_reason) std::fprintf(stderr, "  flagged %s: %d\n", reason.c_str(), n);
  return 0;
}

int run_augment(const std::string& pipeline, const std::string& input, const std::string& output,
                PipelineConfig config, const std::string& paraphrase_cfg) {
  std::shared_ptr<Backend> paraphrase;
  if (!paraphrase_cfg.empty()) {
    paraphrase = make_backend(backend_config_from_file(paraphrase_cfg));
    config.paraphrase = paraphrase.get();
  }
  std::vector<PromptRecord> in_records;
  if (!input.empty()) in_records = read_jsonl(input);
  std::vector<std::string> warnings;
  std::vector<PromptRecord> out_records = run_pipeline(pipeline, in_records, config, &warnings);
  write_jsonl(out_records, output);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::fprintf(stderr, "wrote %zu records to %s\n", out_records.size(), output.c_str());
  return 0;
}

int run_build_prompts(const std::string& input, const std::string& output, TokenBudget budget,
                      const std::string& counter_name) {
  auto counter = counter_by_name(counter_name);
  if (!counter) throw Error(ErrorKind::Config, "unknown counter: " + counter_name);
  std::vector<PromptRecord> records = read_jsonl(input);
  for (auto& record : records) {
    record.prompt = render_prompt(record.library, record.conversation, budget, *counter).prompt;
    record.gold_output = render_output(record.gold_state(), record.library, /*validate=*/false);
  }
  if (output.empty()) {
    for (const auto& record : records) std::fputs((record.prompt + "\n").c_str(), stdout);
  } else {
    write_jsonl(records, output);
    std::fprintf(stderr, "wrote %zu records to %s\n", records.size(), output.c_str());
  }
  return 0;
}

int run_split(const std::string& input, const std::string& output, const std::string& ratios_text,
              std::uint64_t seed) {
  std::array<double, 3> ratios{};
  {
    std::istringstream in(ratios_text);
    std::string part;
    size_t i = 0;
    while (std::getline(in, part, ',')) {
      if (i >= 3) throw Error(ErrorKind::Config, "--ratios needs exactly three numbers");
      try {
        ratios[i++] = std::stod(part);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "bad ratio: " + part);
      }
    }
    if (i != 3) throw Error(ErrorKind::Config, "--ratios needs exactly three numbers");
  }
  std::vector<PromptRecord> records = split_dataset(read_jsonl(input), ratios, seed);
  write_jsonl(records, output);
  std::array<size_t, 3> counts{};
  for (const auto& r : records) counts[size_t(r.split)]++;
  std::fprintf(stderr, "split %zu records: %zu train / %zu val / %zu test\n", records.size(),
               counts[0], counts[1], counts[2]);
  return 0;
}

int cmd_eval(const std::string& dataset, const std::string& backend_cfg, int parallelism,
             const std::string& report_path, bool fail_fast, const std::string& matcher,
             const std::string& average_by) {
  std::vector<PromptRecord> records = read_jsonl(dataset);
  std::shared_ptr<Backend> backend = make_backend(backend_config_from_file(backend_cfg));

  EvalOptions options;
  options.parallelism = parallelism;
  options.fail_fast = fail_fast;
  options.matcher = matcher_by_name(matcher);
  if (average_by == "example")
    options.average_by = AverageBy::Example;
  else if (average_by == "category")
    options.average_by = AverageBy::Category;
  else
    throw Error(ErrorKind::Config, "--average-by must be example or category");

  EvalRun run = run_eval(records, *backend, options);
  std::fputs(render_report_table(run.report).c_str(), stdout);
  for (const auto& message : run.error_messages)
    std::fprintf(stderr, "error: %s\n", message.c_str());
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write report: " + report_path);
    out << report_to_json(run.report).dump(2) << '\n';
  }
  return 0;
}

int run_repl(const std::string& slots_path, const std::string& backend_cfg,
             const std::string& mode_name) {
  auto mode = update_mode_from_name(mode_name);
  if (!mode) throw Error(ErrorKind::Config, "--mode must be replace or merge");
  SlotLibrary library = load_slots_file(slots_path);
  std::shared_ptr<Backend> backend = make_backend(backend_config_from_file(backend_cfg));
  SessionManager manager(backend, std::make_shared<MemoryStore>());
  Session session = manager.create(library, *mode);

  std::printf("tracking %zu slots (%s mode); /state shows all, /quit exits\n",
              library.slots.size(), update_mode_name(*mode).data());
  std::string line;
  while (true) {
    std::fputs("> ", stdout);
    std::fflush(stdout);
    if (!std::getline(std::cin, line)) break;
    if (line == "/quit" || line == "/exit") break;
    if (line == "/state") {
      Session s = manager.get(session.id);
      if (s.state.empty()) std::printf("  (empty)\n");
      for (const auto& [slot, value] : s.state.values)
        std::printf("  %s = %s\n", slot.c_str(), value.c_str());
      continue;
    }
    if (text::trim(line).empty()) continue;
    try {
      TurnResult turn = manager.track_turn(session.id, line);
      for (const auto& [slot, value] : turn.changed)
        std::printf("  %s = %s\n", slot.c_str(), value.c_str());
      for (const auto& slot : turn.removed) std::printf("  %s cleared\n", slot.c_str());
      if (turn.changed.empty() && turn.removed.empty()) std::printf("  (no change)\n");
      for (const auto& w : turn.outcome.warnings)
        std::printf("  ! %s: %s\n", w.where.c_str(),
                    std::string(warning_reason_name(w.reason)).c_str());
      if (turn.dropped_turns > 0)
        std::printf("  (dropped %zu oldest turns to fit the prompt budget)\n",
                    turn.dropped_turns);
    } catch (const Error& e) {
      std::printf("  error (%s): %s\n", e.kind_name().data(), e.what());
    }
  }
  return 0;
}

int run_serve(int port, const std::string& backend_cfg, const std::string& store_path) {
  BackendConfig config = backend_config_from_file(backend_cfg);
  std::shared_ptr<Backend> backend = make_backend(config);
  std::shared_ptr<SessionStore> store;
  if (store_path.empty())
    store = std::make_shared<MemoryStore>();
  else
    store = std::make_shared<FileStore>(store_path);
  auto manager = std::make_shared<SessionManager>(backend, store);
  Service service(backend, manager, config);
  std::fprintf(stderr, "listening on 0.0.0.0:%d (backend: %s)\n", port,
               backend->name().c_str());
  if (!service.listen("0.0.0.0", port))
    throw Error(ErrorKind::Io, "cannot bind port " + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-agnostic slot filling and dialogue state tracking toolkit"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "emit machine-readable error JSON on stderr");

  std::string input, output, pipeline, backend_cfg, report_path, slots_path, store_path;
  std::string counter_name = "whitespace";
  std::string ratios = "0.8,0.1,0.1";
  std::string matcher = "exact";
  std::string average_by = "example";
  std::string mode_name = "replace";
  std::string paraphrase_cfg;
  std::uint64_t seed = 0;
  int parallelism = 1;
  int port = 8080;
  bool fail_fast = false;
  PipelineConfig pipe_config;
  TokenBudget budget;

  auto* ingest = app.add_subcommand("ingest-sgd", "convert an SGD-format directory to JSONL");
  ingest->add_option("--input", input, "directory containing schema.json and dialogues_*.json")
      ->required();
  ingest->add_option("--output", output, "output JSONL path (slot map written alongside)")
      ->required();
  ingest->add_option("--seed", seed, "slot id assignment seed");

  auto* augment = app.add_subcommand("augment", "run one data augmentation pipeline");
  augment
      ->add_option("--pipeline", pipeline,
                   "multi-slot|long-value|categorical|name-split|id-data|address|relation")
      ->required();
  augment->add_option("--input", input, "input JSONL (unused by long-value)");
  augment->add_option("--output", output, "output JSONL path")->required();
  augment->add_option("--seed", seed, "pipeline seed");
  augment->add_option("--limit", pipe_config.limit, "cap on generated records (0 = no cap)");
  augment->add_option("--probability", pipe_config.probability,
                      "per-record selection probability (id-data)");
  augment->add_option("--data-dir", pipe_config.data_dir, "root of banks/ and lexicons/");
  augment->add_option("--paraphrase", paraphrase_cfg,
                      "backend config for paraphrasing (multi-slot)");

  auto* build = app.add_subcommand("build-prompts", "re-render prompts under a token budget");
  build->add_option("--input", input, "input JSONL")->required();
  build->add_option("--output", output, "output JSONL (omit to print prompts to stdout)");
  build->add_option("--max-prompt-tokens", budget.max_prompt_tokens, "prompt token budget");
  build->add_option("--max-output-tokens", budget.max_output_tokens, "output token budget");
  build->add_option("--counter", counter_name, "token counter: whitespace|character");

  auto* split = app.add_subcommand("split", "partition a dataset by dialogue into train/val/test");
  split->add_option("--input", input, "input JSONL")->required();
  split->add_option("--output", output, "output JSONL path")->required();
  split->add_option("--ratios", ratios, "train,val,test ratios summing to 1");
  split->add_option("--seed", seed, "shuffle seed");

  auto* eval = app.add_subcommand("eval", "score a dataset against a backend");
  eval->add_option("--dataset", input, "JSONL dataset with gold states")->required();
  eval->add_option("--backend", backend_cfg, "backend config file (TOML or JSON)")->required();
  eval->add_option("--parallelism", parallelism, "worker threads");
  eval->add_option("--report", report_path, "write the JSON report here");
  eval->add_flag("--fail-fast", fail_fast, "abort on the first backend error");
  eval->add_option("--matcher", matcher, "value matcher: exact|case_insensitive|fuzzy");
  eval->add_option("--average-by", average_by, "aggregate overall by: example|category");

  auto* repl = app.add_subcommand("repl", "interactive turn-by-turn state tracking");
  repl->add_option("--slots", slots_path, "slot library JSON file")->required();
  repl->add_option("--backend", backend_cfg, "backend config file")->required();
  repl->add_option("--mode", mode_name, "state update mode: replace|merge");

  auto* serve = app.add_subcommand("serve", "run the HTTP extraction service");
  serve->add_option("--port", port, "listen port")->required();
  serve->add_option("--backend", backend_cfg, "backend config file")->required();
  serve->add_option("--store", store_path, "session store directory (default: in-memory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) return run_ingest(input, output, seed);
    if (augment->parsed()) {
      pipe_config.seed = seed;
      return run_augment(pipeline, input, output, pipe_config, paraphrase_cfg);
    }
    if (build->parsed()) return run_build_prompts(input, output, budget, counter_name);
    if (split->parsed()) return run_split(input, output, ratios, seed);
    if (eval->parsed())
      return cmd_eval(input, backend_cfg, parallelism, report_path, fail_fast, matcher,
                      average_by);
    if (repl->parsed()) return run_repl(slots_path, backend_cfg, mode_name);
    if (serve->parsed()) return run_serve(port, backend_cfg, store_path);
  } catch (const slotkit::Error& e) {
    if (json_errors) {
      slotkit::ojson j;
      j["error"]["kind"] = std::string(e.kind_name());
      j["error"]["message"] = e.what();
      std::fprintf(stderr, "%s\n", j.dump().c_str());
    } else {
      std::fprintf(stderr, "error (%s): %s\n", e.kind_name().data(), e.what());
    }
    return slotkit::is_backend_error(e.kind()) ? 3 : 2;
  } catch (const std::exception& e) {
    if (json_errors) {
      slotkit::ojson j;
      j["error"]["kind"] = "Internal";
      j["error"]["message"] = e.what();
      std::fprintf(stderr, "%s\n", j.dump().c_str());
    } else {
      std::fprintf(stderr, "error: %s\n", e.what());
    }
    return 2;
  }
  return 0;
}
