#include "commands.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwms/abtest.hpp"
#include "cwms/checkpoint_io.hpp"
#include "cwms/curriculum.hpp"
#include "cwms/error.hpp"
#include "cwms/evalsel.hpp"
#include "cwms/miner.hpp"
#include "cwms/pipeline.hpp"
#include "cwms/synthetic.hpp"
#include "cwms/text.hpp"
#include "../gateway/service.hpp"

namespace cwms::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Query files follow the benchmark layout: queries.<split>.jsonl.
fs::path split_path(const fs::path& data, const std::string& split) {
  return data / ("queries." + split + ".jsonl");
}

QuerySet load_split(const fs::path& data, const std::string& split) {
  return load_queries(split_path(data, split));
}

CheckpointRegistry open_registry(const fs::path& models) {
  const fs::path file = models / "registry.json";
  if (fs::exists(file)) return CheckpointRegistry::load(file);
  return CheckpointRegistry(models);
}

StageTag stage_arg(const std::string& text) {
  const auto s = parse_stage(text);
  if (!s) throw Error(ErrorKind::InvalidArgument, "bad stage \"" + text + "\"");
  return *s;
}

fs::path mined_file(const fs::path& models, StageTag stage, std::size_t epoch) {
  return models / ("mined-" + std::string(to_string(stage)) + "-epoch" + std::to_string(epoch) +
                   ".jsonl");
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto k = std::stoul(item, &used);
      if (used != item.size() || k == 0) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "--ks: bad budget \"" + item + "\"");
    }
  }
  if (ks.empty()) throw Error(ErrorKind::InvalidArgument, "--ks: no budgets given");
  return ks;
}

json metrics_json(const MetricReport& r) {
  json metrics(r.metrics);
  return {{"component", std::string(to_string(r.component))},
          {"stage", std::string(to_string(r.stage))},
          {"dataset", r.dataset},
          {"query_count", r.query_count},
          {"excluded_queries", r.excluded_queries},
          {"metrics", metrics}};
}

// Emits to --out when given, otherwise to stdout.
void emit(const std::string& out_path, std::ostream& out,
          const std::function<void(std::ostream&)>& write) {
  if (out_path.empty()) {
    write(out);
    return;
  }
  std::ofstream file(out_path, std::ios::trunc);
  if (!file) throw Error(ErrorKind::Io, "cannot write " + out_path);
  write(file);
}

fs::path journal_path(const fs::path& sessions, const std::string& id) {
  return sessions / (id + ".jsonl");
}

struct Options {
  std::uint64_t seed = 0;
  std::string data = "data/benchmark";
  std::string models = "models";
  std::string out;
  std::string split = "test";
  std::string spec;
  std::string corpus, train_q, validation_q, test_q, qrels;
  std::size_t count = StageSettings{}.weak_pair_count;
  int stage = 1;
  std::string stage_text = "base";
  std::string component = "embedder";
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::string ks = "20,60,100";
  std::size_t k_embed = kDefaultEmbedBudget;
  std::size_t k_rerank = kDefaultRerankDepth;
  std::string manifest, manifest_a, manifest_b, run_file, query, tag = "cwms";
  std::string id = "selected";
  std::string embedder_stage, reranker_stage;
  std::string sessions = "sessions";
  std::string dataset = "default";
  std::string manifests;
  std::string listen;
};

CurriculumConfig curriculum_config(const Options& o) {
  CurriculumConfig c;
  c.settings.seed = o.seed;
  c.settings.weak_pair_count = o.count;
  c.k_embed = o.k_embed;
  c.k_rerank = o.k_rerank;
  return c;
}

StagePlan stage_plan(const Options& o, StageTag stage) {
  StagePlan plan = StagePlan::defaults(stage);
  if (o.lr) plan.learning_rate = *o.lr;
  if (o.epochs) plan.epochs = *o.epochs;
  return plan;
}

void cmd_synth(const Options& o, bool seed_given, std::ostream& out) {
  BenchmarkSpec spec = o.spec.empty() ? BenchmarkSpec{} : load_benchmark_spec(o.spec);
  if (seed_given) spec.seed = o.seed;
  const Benchmark b = generate_benchmark(spec);
  const fs::path dir = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  save_benchmark(b, dir);
  out << "wrote " << b.corpus.size() << " documents, " << b.train.size() << "/"
      << b.validation.size() << "/" << b.test.size() << " train/validation/test queries to "
      << dir.string() << '\n';
}

void cmd_ingest(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(o.corpus);
  Qrels qrels;
  if (!o.qrels.empty()) {
    qrels = load_qrels(o.qrels);
    qrels.validate_against(corpus);
  }
  const fs::path dir = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  fs::create_directories(dir);
  save_corpus(corpus, dir / "corpus.jsonl");
  const std::pair<const char*, const std::string*> splits[] = {
      {"train", &o.train_q}, {"validation", &o.validation_q}, {"test", &o.test_q}};
  std::size_t query_total = 0;
  for (const auto& [name, src] : splits) {
    const QuerySet q = src->empty() ? QuerySet{} : load_queries(*src);
    query_total += q.size();
    save_queries(q, split_path(dir, name));
  }
  save_qrels(qrels, dir / "qrels.txt");
  out << "ingested " << corpus.size() << " documents and " << query_total << " queries into "
      << dir.string() << '\n';
}

void cmd_gen_weak(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const auto pairs = generate_weak_pairs(corpus, o.count, o.seed);
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
  save_examples(pairs, o.out);
  out << "wrote " << pairs.size() << " weak pairs to " << o.out << '\n';
}

void cmd_train(const Options& o, std::ostream& out) {
  const Benchmark b = load_benchmark(o.data);
  const fs::path models(o.models);
  fs::create_directories(models);
  const CurriculumConfig config = curriculum_config(o);
  const CurriculumData data{b.corpus, b.train, b.validation, b.qrels};
  CheckpointRegistry registry = open_registry(models);
  const StageTag stage = stage_arg(std::to_string(o.stage));
  const auto component = parse_component(o.component);
  if (!component) throw Error(ErrorKind::InvalidArgument, "bad component \"" + o.component + "\"");

  // Base entries come from the seed on first use.
  if (registry.find(ComponentKind::Embedder, StageTag::Base) == nullptr) {
    const EmbedderCheckpoint base = initial_embedder(config);
    const std::string file = checkpoint_filename(ComponentKind::Embedder, StageTag::Base);
    save_checkpoint(base, models / file);
    registry.put(describe_embedder(base, file, data, config));
  }
  if (registry.find(ComponentKind::Reranker, StageTag::Base) == nullptr) {
    const auto& e = registry.require(ComponentKind::Embedder, StageTag::Base);
    const EmbedderCheckpoint base = load_embedder(registry.resolve(e.path));
    const RerankerCheckpoint r = initial_reranker(config, base);
    const std::string file = checkpoint_filename(ComponentKind::Reranker, StageTag::Base);
    save_checkpoint(r, models / file);
    registry.put(describe_reranker(r, file, base, e.path, data, config));
  }

  const StageTag prev = *previous_stage(stage);
  const std::string file = checkpoint_filename(*component, stage);
  if (*component == ComponentKind::Embedder) {
    const auto& pe = registry.require(ComponentKind::Embedder, prev);
    const EmbedderCheckpoint prev_ckpt = load_embedder(registry.resolve(pe.path));
    EmbedderStageResult r = run_embedder_stage(
        stage_plan(o, stage), prev_ckpt, {b.corpus, b.train, b.qrels}, config.settings);
    save_checkpoint(r.checkpoint, models / file);
    for (std::size_t e = 0; e < r.mined_per_epoch.size(); ++e) {
      save_examples(r.mined_per_epoch[e], mined_file(models, stage, e));
    }
    // Drop stale mined sets from an earlier run with more epochs.
    for (std::size_t e = r.mined_per_epoch.size(); fs::exists(mined_file(models, stage, e)); ++e) {
      fs::remove(mined_file(models, stage, e));
    }
    registry.put(describe_embedder(r.checkpoint, file, data, config));
  } else {
    const auto& pr = registry.require(ComponentKind::Reranker, prev);
    const auto& fe = registry.require(ComponentKind::Embedder, stage);
    const RerankerCheckpoint prev_ckpt = load_reranker(registry.resolve(pr.path));
    const EmbedderCheckpoint feature = load_embedder(registry.resolve(fe.path));
    std::vector<std::vector<TrainingExample>> mined;
    for (std::size_t e = 0; fs::exists(mined_file(models, stage, e)); ++e) {
      mined.push_back(load_examples(mined_file(models, stage, e)));
    }
    if (mined.empty()) {
      throw Error(ErrorKind::Precondition, "no mined sets for " + std::string(to_string(stage)) +
                                               "; train the embedder stage first");
    }
    const RerankerCheckpoint r = run_reranker_stage(stage_plan(o, stage), prev_ckpt, mined,
                                                    b.corpus, feature, config.settings);
    save_checkpoint(r, models / file);
    registry.put(describe_reranker(r, file, feature, fe.path, data, config));
  }
  registry.save(models / "registry.json");
  const RegistryEntry& e = *registry.find(*component, stage);
  out << to_string(*component) << ' ' << to_string(stage) << ' ' << e.fingerprint;
  for (const auto& [k, v] : e.metrics) out << ' ' << k << '=' << v;
  out << '\n';
}

void cmd_curriculum(const Options& o, std::ostream& out) {
  const Benchmark b = load_benchmark(o.data);
  const CheckpointRegistry registry = run_curriculum(
      {b.corpus, b.train, b.validation, b.qrels}, curriculum_config(o), o.models);
  for (const auto& e : registry.entries()) {
    out << to_string(e.component) << ' ' << to_string(e.stage) << ' ' << e.fingerprint;
    for (const auto& [k, v] : e.metrics) out << ' ' << k << '=' << v;
    out << '\n';
  }
}

void cmd_mine(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const Qrels qrels = load_qrels(fs::path(o.data) / "qrels.txt");
  const QuerySet queries = load_split(o.data, o.split);
  const CheckpointRegistry registry = open_registry(o.models);
  const StageTag stage = stage_arg(o.stage_text);
  const auto& e = registry.require(ComponentKind::Embedder, stage);
  const EmbedderCheckpoint embedder = load_embedder(registry.resolve(e.path));
  const Index index = build_index(embedder, corpus, e.fingerprint);
  MiningConfig cfg;
  cfg.seed = o.seed;
  const auto mined =
      attach_negatives(supervised_examples(queries, qrels, stage), embedder, index, qrels, cfg);
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
  save_examples(mined, o.out);
  out << "mined negatives for " << mined.size() << " queries into " << o.out << '\n';
}

void cmd_eval(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const Qrels qrels = load_qrels(fs::path(o.data) / "qrels.txt");
  const QuerySet queries = load_split(o.data, o.split);
  MetricReport report;
  if (!o.run_file.empty()) {
    // External run: every query of the split is scored, missing ones as empty.
    const auto run = read_run(o.run_file);
    std::vector<QueryRanking> rankings;
    for (const auto& q : queries) {
      const auto it = run.find(q.id);
      rankings.push_back({q.id, it == run.end() ? std::vector<std::string>{} : it->second});
    }
    const std::vector<std::size_t> ks = parse_ks(o.ks);
    report = evaluate_rankings(rankings, qrels, ks, kNdcgCutoff, o.split);
  } else if (!o.manifest.empty()) {
    PipelineManifest m = load_manifest(o.manifest);
    const LoadedPipeline loaded(m, corpus);
    report = evaluate_pipeline(loaded.pipeline(), queries, qrels, o.split);
    report.stage = m.reranker_stage;
  } else {
    const CheckpointRegistry registry = open_registry(o.models);
    const StageTag stage = stage_arg(o.stage_text);
    const auto& e = registry.require(ComponentKind::Embedder, stage);
    const EmbedderCheckpoint embedder = load_embedder(registry.resolve(e.path));
    const Index index = build_index(embedder, corpus, e.fingerprint);
    report = evaluate_embedder(embedder, index, queries, qrels, parse_ks(o.ks), o.split);
  }
  emit(o.out, out, [&](std::ostream& s) { s << metrics_json(report).dump() << '\n'; });
}

void cmd_sweep(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const Qrels qrels = load_qrels(fs::path(o.data) / "qrels.txt");
  const QuerySet queries = load_split(o.data, o.split);
  const CheckpointRegistry registry = open_registry(o.models);
  const std::vector<std::size_t> ks = parse_ks(o.ks);
  std::vector<RecallBudgetCurve> curves;
  for (StageTag stage : kAllStages) {
    const RegistryEntry* e = registry.find(ComponentKind::Embedder, stage);
    if (e == nullptr) continue;
    const EmbedderCheckpoint embedder = load_embedder(registry.resolve(e->path));
    const Index index = build_index(embedder, corpus, e->fingerprint);
    curves.push_back(sweep_recall_budget(embedder, index, queries, qrels, ks, stage));
  }
  if (curves.empty()) throw Error(ErrorKind::NotFound, "registry has no embedder checkpoints");
  emit(o.out, out, [&](std::ostream& s) { write_curves_csv(curves, s); });
}

void cmd_select(const Options& o, std::ostream& out) {
  const CheckpointRegistry registry = open_registry(o.models);
  PipelineManifest m;
  if (!o.embedder_stage.empty() || !o.reranker_stage.empty()) {
    if (o.embedder_stage.empty() || o.reranker_stage.empty()) {
      throw Error(ErrorKind::InvalidArgument,
                  "--embedder-stage and --reranker-stage must be given together");
    }
    m = manifest_for(registry, stage_arg(o.embedder_stage), stage_arg(o.reranker_stage), o.id,
                     o.k_embed, o.k_rerank);
  } else {
    SelectionConfig cfg;
    cfg.k_embed = o.k_embed;
    cfg.k_rerank = o.k_rerank;
    cfg.manifest_id = o.id;
    m = select_components(registry, cfg);
  }
  const fs::path path = o.out.empty() ? fs::path(o.models) / (o.id + ".json") : fs::path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_manifest(m, path);
  out << m.id << ": embedder " << to_string(m.embedder_stage) << ", reranker "
      << to_string(m.reranker_stage) << " -> " << path.string() << '\n';
}

void cmd_run(const Options& o, bool k_embed_given, bool k_rerank_given, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const PipelineManifest m = load_manifest(o.manifest);
  const LoadedPipeline loaded(m, corpus);
  const std::size_t k_embed = k_embed_given ? o.k_embed : m.k_embed;
  const std::size_t k_rerank = k_rerank_given ? o.k_rerank : m.k_rerank;
  if (!o.query.empty()) {
    const RetrievalResult r =
        loaded.pipeline().run(Query{"adhoc", normalize_text(o.query)}, k_embed, k_rerank);
    for (std::size_t i = 0; i < r.final_list.size(); ++i) {
      out << i + 1 << '\t' << r.final_list[i].id << '\t' << r.final_list[i].score << '\t'
          << prefix_chars(corpus.at(r.final_list[i].id).text, 80) << '\n';
    }
    return;
  }
  const QuerySet queries = load_split(o.data, o.split);
  std::vector<RetrievalResult> results;
  for (const auto& q : queries) results.push_back(loaded.pipeline().run(q, k_embed, k_rerank));
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required without --query");
  write_run(results, o.tag, o.out);
  out << "wrote " << results.size() << " rankings to " << o.out << '\n';
}

void cmd_ab_build(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(fs::path(o.data) / "corpus.jsonl");
  const QuerySet queries = load_split(o.data, o.split);
  const LoadedPipeline a(load_manifest(o.manifest_a), corpus);
  const LoadedPipeline b(load_manifest(o.manifest_b), corpus);
  const ABSession session =
      build_session(a.pipeline(), a.manifest().id, b.pipeline(), b.manifest().id, queries, corpus,
                    o.seed, o.id, o.dataset);
  fs::create_directories(o.sessions);
  const fs::path path = journal_path(o.sessions, o.id);
  if (fs::exists(path)) {
    throw Error(ErrorKind::Conflict, "session journal already exists: " + path.string());
  }
  SessionJournal::create(path, session);
  out << "session " << o.id << ": " << session.pairs().size() << " pairs, "
      << session.judgeable_count() << " to judge -> " << path.string() << '\n';
}

void print_side(std::ostream& out, const char* label, const std::vector<Snippet>& side) {
  out << "  [" << label << "]\n";
  for (std::size_t i = 0; i < side.size(); ++i) {
    out << "    " << i + 1 << ". " << side[i].text << '\n';
  }
}

void cmd_ab_judge(const Options& o, std::istream& in, std::ostream& out) {
  const fs::path path = journal_path(o.sessions, o.id);
  ABSession session = SessionJournal::load(path);
  while (const ABPair* p = session.next_unjudged()) {
    const std::size_t total = session.judgeable_count();
    out << "\n(" << total - session.remaining() + 1 << "/" << total << ") " << p->query_text
        << '\n';
    print_side(out, "left", p->left);
    print_side(out, "right", p->right);
    std::optional<Choice> choice;
    std::string line;
    while (!choice) {
      out << "prefer [l]eft, [r]ight, [t]ie, or [q]uit: " << std::flush;
      if (!std::getline(in, line) || line == "q") {
        out << "\nstopped; " << session.remaining() << " pairs remain\n";
        return;
      }
      if (line == "l") choice = Choice::Left;
      if (line == "r") choice = Choice::Right;
      if (line == "t") choice = Choice::Tie;
      if (!choice) choice = parse_choice(line);
    }
    SessionJournal::append_judgment(path, session, p->pair_id, *choice);
  }
  out << "session " << o.id << " complete\n";
}

void cmd_ab_report(const Options& o, std::ostream& out) {
  const ABSession session = SessionJournal::load(journal_path(o.sessions, o.id));
  const std::string report = report_json(aggregate(session));
  emit(o.out, out, [&](std::ostream& s) { s << json::parse(report).dump(2) << '\n'; });
}

void cmd_serve(const Options& o, std::ostream& out) {
  gateway::ServiceConfig config;
  config.data_dir = o.data;
  config.apply_environment();
  if (!o.manifests.empty()) config.manifest_dir = o.manifests;
  if (!o.sessions.empty()) config.session_dir = o.sessions;
  if (!o.listen.empty()) {
    const auto colon = o.listen.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--listen: host:port");
    config.host = o.listen.substr(0, colon);
    config.port = std::stoi(o.listen.substr(colon + 1));
  }
  gateway::Service service(config);
  out << "listening on " << config.host << ':' << config.port << std::endl;
  service.listen();
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"cwms: staged retrieval training, selection and blind A/B evaluation", "cwms"};
  app.require_subcommand(1);
  Options o;

  const auto seed_opt = [&](CLI::App* sub) {
    return sub->add_option("--seed", o.seed, "Random seed");
  };
  const auto data_opt = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Dataset directory (benchmark layout)")
        ->capture_default_str();
  };
  const auto models_opt = [&](CLI::App* sub) {
    sub->add_option("--models", o.models, "Checkpoint directory with registry.json")
        ->capture_default_str();
  };
  const auto split_opt = [&](CLI::App* sub) {
    sub->add_option("--split", o.split, "Query split: train, validation or test")
        ->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "Generate the seeded synthetic benchmark");
  CLI::Option* synth_seed = seed_opt(synth);
  data_opt(synth);
  synth->add_option("--spec", o.spec, "Benchmark spec JSON");
  synth->add_option("--out", o.out, "Output directory (defaults to --data)");

  auto* ingest = app.add_subcommand("ingest", "Normalize and validate raw data into a dataset");
  seed_opt(ingest);
  data_opt(ingest);
  ingest->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  ingest->add_option("--train", o.train_q, "Training queries JSONL");
  ingest->add_option("--validation", o.validation_q, "Validation queries JSONL");
  ingest->add_option("--test", o.test_q, "Held-out queries JSONL");
  ingest->add_option("--qrels", o.qrels, "TREC qrels");
  ingest->add_option("--out", o.out, "Output directory (defaults to --data)");

  auto* gen_weak = app.add_subcommand("gen-weak", "Generate span-query weak pairs");
  seed_opt(gen_weak);
  data_opt(gen_weak);
  gen_weak->add_option("--count", o.count, "Number of pairs")->capture_default_str();
  gen_weak->add_option("--out", o.out, "Output JSONL")->required();

  auto* train = app.add_subcommand("train", "Train one stage of one component");
  seed_opt(train);
  data_opt(train);
  models_opt(train);
  train->add_option("--stage", o.stage, "Stage to train")->required()->check(CLI::Range(1, 3));
  train->add_option("--component", o.component, "embedder or reranker")
      ->required()
      ->check(CLI::IsMember({"embedder", "reranker"}));
  train->add_option("--lr", o.lr, "Override the stage learning rate");
  train->add_option("--epochs", o.epochs, "Override the stage epoch count");
  train->add_option("--weak-pairs", o.count, "Stage 1 weak pair count")->capture_default_str();

  auto* curriculum = app.add_subcommand("curriculum", "Run Base and all three stages");
  seed_opt(curriculum);
  data_opt(curriculum);
  models_opt(curriculum);
  curriculum->add_option("--weak-pairs", o.count, "Stage 1 weak pair count")
      ->capture_default_str();

  auto* mine = app.add_subcommand("mine", "Mine hard negatives with a registered embedder");
  seed_opt(mine);
  data_opt(mine);
  models_opt(mine);
  split_opt(mine);
  mine->add_option("--stage", o.stage_text, "Embedder stage")->capture_default_str();
  mine->add_option("--out", o.out, "Output JSONL")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate an embedder, a manifest or a TREC run");
  seed_opt(eval);
  data_opt(eval);
  models_opt(eval);
  split_opt(eval);
  eval->add_option("--stage", o.stage_text, "Embedder stage")->capture_default_str();
  auto* eval_manifest = eval->add_option("--manifest", o.manifest, "Pipeline manifest");
  eval->add_option("--run", o.run_file, "External TREC run file")->excludes(eval_manifest);
  eval->add_option("--ks", o.ks, "Recall budgets")->capture_default_str();
  eval->add_option("--out", o.out, "Output file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Recall-vs-budget curves for every embedder stage");
  seed_opt(sweep);
  data_opt(sweep);
  models_opt(sweep);
  split_opt(sweep);
  sweep->add_option("--ks", o.ks, "Comma-separated budgets")->capture_default_str();
  sweep->add_option("--out", o.out, "CSV output (default stdout)");

  auto* select = app.add_subcommand("select", "Pick the best stage per component");
  seed_opt(select);
  models_opt(select);
  select->add_option("--id", o.id, "Manifest id")->capture_default_str();
  select->add_option("--k-embed", o.k_embed, "Embedding budget")->capture_default_str();
  select->add_option("--k-rerank", o.k_rerank, "Rerank depth")->capture_default_str();
  select->add_option("--embedder-stage", o.embedder_stage, "Force an embedder stage");
  select->add_option("--reranker-stage", o.reranker_stage, "Force a reranker stage");
  select->add_option("--out", o.out, "Manifest path (default <models>/<id>.json)");

  auto* run_cmd = app.add_subcommand("run", "Run a manifest over a split or one query");
  seed_opt(run_cmd);
  data_opt(run_cmd);
  split_opt(run_cmd);
  run_cmd->add_option("--manifest", o.manifest, "Pipeline manifest")->required();
  auto* k_embed_opt =
      run_cmd->add_option("--k-embed", o.k_embed, "Embedding budget")->capture_default_str();
  auto* k_rerank_opt =
      run_cmd->add_option("--k-rerank", o.k_rerank, "Rerank depth")->capture_default_str();
  run_cmd->add_option("--query", o.query, "Single query text");
  run_cmd->add_option("--tag", o.tag, "Run tag")->capture_default_str();
  run_cmd->add_option("--out", o.out, "TREC run output");

  auto* ab_build = app.add_subcommand("ab-build", "Build a blinded A/B session journal");
  seed_opt(ab_build);
  data_opt(ab_build);
  split_opt(ab_build);
  ab_build->add_option("--manifest-a", o.manifest_a, "Baseline manifest")->required();
  ab_build->add_option("--manifest-b", o.manifest_b, "Candidate manifest")->required();
  ab_build->add_option("--sessions", o.sessions, "Session directory")->capture_default_str();
  ab_build->add_option("--id", o.id, "Session id")->required();
  ab_build->add_option("--dataset", o.dataset, "Dataset label")->capture_default_str();

  auto* ab_judge = app.add_subcommand("ab-judge", "Judge pending pairs in the terminal");
  seed_opt(ab_judge);
  ab_judge->add_option("--sessions", o.sessions, "Session directory")->capture_default_str();
  ab_judge->add_option("--id", o.id, "Session id")->required();

  auto* ab_report = app.add_subcommand("ab-report", "Unblind and aggregate a session");
  seed_opt(ab_report);
  ab_report->add_option("--sessions", o.sessions, "Session directory")->capture_default_str();
  ab_report->add_option("--id", o.id, "Session id")->required();
  ab_report->add_option("--out", o.out, "Report JSON output (default stdout)");

  auto* serve = app.add_subcommand("serve", "Serve retrieval and A/B judging over HTTP");
  seed_opt(serve);
  data_opt(serve);
  serve->add_option("--manifests", o.manifests, "Manifest directory (default <data>/manifests)");
  serve->add_option("--sessions", o.sessions, "Session directory (default <data>/sessions)");
  serve->add_option("--listen", o.listen, "host:port (default 127.0.0.1:8080)");

  if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
    err << "error: unknown subcommand \"" << argv[1] << "\"\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) cmd_synth(o, synth_seed->count() > 0, out);
    else if (ingest->parsed()) cmd_ingest(o, out);
    else if (gen_weak->parsed()) cmd_gen_weak(o, out);
    else if (train->parsed()) cmd_train(o, out);
    else if (curriculum->parsed()) cmd_curriculum(o, out);
    else if (mine->parsed()) cmd_mine(o, out);
    else if (eval->parsed()) cmd_eval(o, out);
    else if (sweep->parsed()) cmd_sweep(o, out);
    else if (select->parsed()) cmd_select(o, out);
    else if (run_cmd->parsed()) cmd_run(o, k_embed_opt->count() > 0, k_rerank_opt->count() > 0, out);
    else if (ab_build->parsed()) cmd_ab_build(o, out);
    else if (ab_judge->parsed()) cmd_ab_judge(o, in, out);
    else if (ab_report->parsed()) cmd_ab_report(o, out);
    else if (serve->parsed()) cmd_serve(o, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cwms::cli
