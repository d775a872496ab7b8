// rite: command-line driver for the retrieval pipeline.
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>

#include "rite/commands.hpp"
#include "rite/toy_backend.hpp"
#include "rite/wire_server.hpp"

namespace {

struct Overrides {
  std::string method;
  std::string output_dir;
  std::string backend_url;
  std::string provided_reasoning;
  std::string variant;
  int max_tokens = 0;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--method", o.method, "echo, pr, rite-echo or rite-pr");
  cmd->add_option("--out", o.output_dir, "Output directory");
  cmd->add_option("--backend-url", o.backend_url, "Use a remote model server at this URL");
  cmd->add_option("--reasoning-file", o.provided_reasoning, "Provided reasoning JSONL (oracle mode)");
  cmd->add_option("--variant", o.variant, "Reasoning prompt variant: p1, p2 or p3");
  cmd->add_option("--max-tokens", o.max_tokens, "Reasoning length: 64, 128 or 256");
}

rite::RunConfig resolve_config(const std::string& path, const Overrides& o) {
  auto config = rite::load_run_config(path);
  rite::apply_env_overrides(config);
  if (!o.method.empty()) config.method = rite::parse_embed_method(o.method);
  if (!o.output_dir.empty()) config.output_dir = o.output_dir;
  if (!o.backend_url.empty()) {
    config.backend.kind = rite::BackendSpec::Kind::Remote;
    config.backend.url = o.backend_url;
  }
  if (!o.provided_reasoning.empty()) config.provided_reasoning = o.provided_reasoning;
  if (!o.variant.empty()) config.pipeline.reasoning_variant = rite::parse_reasoning_variant(o.variant);
  if (o.max_tokens != 0) config.pipeline.reasoning_gen.max_tokens = o.max_tokens;
  config.pipeline.validate();
  return config;
}

rite::WireServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("rite"));

  CLI::App app{"Zero-shot dense retrieval with reasoning-infused LM embeddings"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  Overrides o;
  auto with_config = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("-c,--config", config_path, "Run configuration JSON")->required()->check(CLI::ExistingFile);
    add_overrides(cmd, o);
    return cmd;
  };
  auto* reason = with_config("reason", "Generate reasoning for every query");
  auto* embed = with_config("embed-corpus", "Embed the corpus and save the index");
  auto* retrieve = with_config("retrieve", "Embed queries and write a TREC run");
  auto* run = with_config("run", "reason, embed-corpus, retrieve and eval in one go");
  auto* sweep = with_config("sweep", "Run at reasoning lengths 64, 128 and 256");

  std::string run_file, qrels_file, eval_out;
  std::size_t k = 10;
  auto* eval = app.add_subcommand("eval", "nDCG@k of a TREC run");
  eval->add_option("--run", run_file, "TREC run file")->required();
  eval->add_option("--qrels", qrels_file, "qrels TSV (qid, docid, relevance)")->required();
  eval->add_option("-k", k, "Cutoff")->check(CLI::PositiveNumber);
  eval->add_option("--json", eval_out, "Write the per-query report here");

  std::string host = "127.0.0.1";
  int port = 8080;
  rite::ToyLMConfig toy;
  auto* serve = app.add_subcommand("serve", "Serve the toy model over the /v1 wire protocol");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--seed", toy.seed);
  serve->add_option("--max-context", toy.max_context);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (eval->parsed()) {
      auto out = rite::cmd_eval(run_file, qrels_file, k,
                                eval_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(eval_out));
      std::cout << out.table;
      return 0;
    }
    if (serve->parsed()) {
      toy.validate();
      rite::WireServer server(std::make_shared<rite::ToyBackend>(toy));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("serving toy model on {}:{}", host, port);
      server.run(host, port);
      return 0;
    }

    const auto config = resolve_config(config_path, o);
    const auto backend = rite::make_backend(config.backend);
    if (reason->parsed()) {
      if (!rite::uses_reasoning(config.method)) {
        throw rite::Error(rite::ErrorCode::InvalidConfig, "reason needs a RITE method");
      }
      std::cout << rite::cmd_reason(config, *backend).file.string() << "\n";
    } else if (embed->parsed()) {
      std::cout << rite::cmd_embed_corpus(config, *backend).string() << "\n";
    } else if (retrieve->parsed()) {
      std::cout << rite::cmd_retrieve(config, *backend).string() << "\n";
    } else if (run->parsed()) {
      const auto result = rite::cmd_run(config, *backend);
      std::cout << rite::compare_runs({{std::string(rite::to_string(config.method)), result.report}}).render_text();
    } else if (sweep->parsed()) {
      std::cout << rite::cmd_sweep(config, *backend).render_text();
    }
  } catch (const rite::Error& e) {
    spdlog::error("{}", e.what());
    return rite::exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 3;
  }
  return 0;
}
