#include "cwms/synthetic.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"
#include "cwms/text.hpp"

namespace cwms {
namespace {

constexpr std::string_view kConsonants = "bcdfghjklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Generates words that are unique across the whole benchmark.
class WordFactory {
 public:
  explicit WordFactory(std::uint64_t seed) : rng_(seed) {}

  std::string latin(std::size_t min_syllables, std::size_t max_syllables) {
    for (;;) {
      std::string w;
      const auto n = rng_.between(min_syllables, max_syllables);
      for (std::uint64_t i = 0; i < n; ++i) {
        w.push_back(kConsonants[rng_.below(kConsonants.size())]);
        w.push_back(kVowels[rng_.below(kVowels.size())]);
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::string cjk(std::size_t min_chars, std::size_t max_chars) {
    for (;;) {
      std::string w;
      const auto n = rng_.between(min_chars, max_chars);
      for (std::uint64_t i = 0; i < n; ++i) {
        append_utf8(w, static_cast<char32_t>(0x4E00 + rng_.below(0x9FA5 - 0x4E00)));
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  SplitMix64 rng_;
  std::set<std::string> used_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

// Replaces one Latin letter with another, leaving CJK words untouched.
std::string typo(const std::string& word, SplitMix64& rng) {
  if (word.size() < 4 || static_cast<unsigned char>(word[0]) >= 0x80) return word;
  std::string out = word;
  const std::size_t pos = 1 + rng.below(out.size() - 2);
  const std::string_view pool = std::string_view("aeiou").find(out[pos]) != std::string_view::npos
                                    ? kVowels
                                    : kConsonants;
  char c = out[pos];
  while (c == out[pos]) c = pool[rng.below(pool.size())];
  out[pos] = c;
  return out;
}

struct Topic {
  std::vector<std::string> terms;
  std::vector<std::string> aliases;
};

struct DocPlan {
  std::size_t topic = 0;
  std::string own_entity;
  std::string shared_entity;
  std::vector<std::size_t> term_ids;
  std::string partner;  // doc sharing shared_entity
};

}  // namespace

Benchmark generate_benchmark(const BenchmarkSpec& spec) {
  if (spec.documents == 0 || spec.topics == 0 || spec.terms_per_topic < 2) {
    throw Error(ErrorKind::InvalidArgument, "benchmark needs documents, topics and >= 2 terms");
  }
  WordFactory words(mix_seed(spec.seed, "words"));
  SplitMix64 rng(mix_seed(spec.seed, "layout"));

  std::vector<std::string> background;
  for (std::size_t i = 0; i < spec.background_words; ++i) background.push_back(words.latin(1, 3));
  // Zipf-like draw: index = floor(n * u^2) favors the head of the list.
  const auto background_word = [&]() -> const std::string& {
    const double u = rng.uniform();
    return background[static_cast<std::size_t>(u * u * static_cast<double>(background.size()))];
  };

  std::vector<Topic> topics(spec.topics);
  for (auto& t : topics) {
    const bool cjk = rng.uniform() < spec.cjk_topic_fraction;
    for (std::size_t k = 0; k < spec.terms_per_topic; ++k) {
      t.terms.push_back(cjk ? words.cjk(2, 4) : words.latin(2, 4));
      t.aliases.push_back(cjk ? words.cjk(2, 4) : words.latin(2, 4));
    }
  }

  // Documents: topic = i mod topics; consecutive pairs within a topic share
  // an entity word.
  std::vector<DocPlan> plans(spec.documents);
  std::vector<Document> docs;
  std::vector<std::size_t> topic_slot(spec.topics, 0);
  std::vector<std::string> pending_shared(spec.topics);
  std::vector<std::size_t> pending_doc(spec.topics, 0);
  for (std::size_t i = 0; i < spec.documents; ++i) {
    DocPlan& p = plans[i];
    p.topic = i % spec.topics;
    p.own_entity = words.latin(3, 4);
    if (topic_slot[p.topic]++ % 2 == 0) {
      pending_shared[p.topic] = words.latin(3, 4);
      pending_doc[p.topic] = i;
      p.shared_entity = pending_shared[p.topic];
    } else {
      p.shared_entity = pending_shared[p.topic];
      p.partner = "d" + std::to_string(pending_doc[p.topic]);
      plans[pending_doc[p.topic]].partner = "d" + std::to_string(i);
    }
    std::vector<std::size_t> term_ids(spec.terms_per_topic);
    for (std::size_t k = 0; k < term_ids.size(); ++k) term_ids[k] = k;
    shuffle(term_ids, rng);
    term_ids.resize(std::max<std::size_t>(2, spec.terms_per_topic * 2 / 3));
    p.term_ids = term_ids;

    std::vector<std::string> tokens{p.own_entity, p.own_entity, p.shared_entity};
    for (std::size_t k : term_ids) tokens.push_back(topics[p.topic].terms[k]);
    const std::size_t filler = 10 + rng.below(10);
    for (std::size_t k = 0; k < filler; ++k) tokens.push_back(background_word());
    shuffle(tokens, rng);
    docs.push_back({"d" + std::to_string(i), normalize_text(join(tokens))});
  }

  Benchmark bench;
  std::vector<Query> train, validation, test;
  for (std::size_t j = 0; j < spec.queries; ++j) {
    const std::string qid = "q" + std::to_string(j);
    const double kind = rng.uniform();
    std::string text;
    if (kind < spec.unjudged_query_rate) {
      text = join({background_word(), background_word(), background_word()});
    } else {
      const std::size_t d = rng.below(spec.documents);
      const DocPlan& p = plans[d];
      const Topic& t = topics[p.topic];
      if (kind < spec.unjudged_query_rate + spec.short_query_rate) {
        text = std::string(prefix_chars(p.own_entity, 3));
        bench.qrels.add(qid, "d" + std::to_string(d));
      } else {
        const bool shared = !p.partner.empty() && rng.uniform() < spec.shared_entity_query_rate;
        std::string entity = shared ? p.shared_entity : p.own_entity;
        if (rng.uniform() < spec.typo_rate) entity = typo(entity, rng);
        std::vector<std::size_t> picks = p.term_ids;
        shuffle(picks, rng);
        std::vector<std::string> tokens{entity};
        for (std::size_t k = 0; k < 2; ++k) {
          const bool verbatim = rng.uniform() < spec.verbatim_term_rate;
          tokens.push_back(verbatim ? t.terms[picks[k]] : t.aliases[picks[k]]);
        }
        if (rng.coin()) tokens.push_back(background_word());
        shuffle(tokens, rng);
        text = join(tokens);
        bench.qrels.add(qid, "d" + std::to_string(d));
        if (shared) bench.qrels.add(qid, p.partner);
      }
    }
    Query q{qid, normalize_text(text)};
    switch (j % 5) {
      case 3: validation.push_back(std::move(q)); break;
      case 4: test.push_back(std::move(q)); break;
      default: train.push_back(std::move(q)); break;
    }
  }
  bench.corpus = Corpus(std::move(docs));
  bench.train = QuerySet(std::move(train));
  bench.validation = QuerySet(std::move(validation));
  bench.test = QuerySet(std::move(test));
  return bench;
}

void save_benchmark(const Benchmark& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(bench.corpus, dir / "corpus.jsonl");
  save_queries(bench.train, dir / "queries.train.jsonl");
  save_queries(bench.validation, dir / "queries.validation.jsonl");
  save_queries(bench.test, dir / "queries.test.jsonl");
  save_qrels(bench.qrels, dir / "qrels.txt");
}

Benchmark load_benchmark(const std::filesystem::path& dir) {
  Benchmark b;
  b.corpus = load_corpus(dir / "corpus.jsonl");
  b.train = load_queries(dir / "queries.train.jsonl");
  b.validation = load_queries(dir / "queries.validation.jsonl");
  b.test = load_queries(dir / "queries.test.jsonl");
  b.qrels = load_qrels(dir / "qrels.txt");
  b.qrels.validate_against(b.corpus);
  return b;
}

BenchmarkSpec load_benchmark_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  BenchmarkSpec s;
  try {
    const auto j = nlohmann::json::parse(in);
    s.seed = j.value("seed", s.seed);
    s.documents = j.value("documents", s.documents);
    s.queries = j.value("queries", s.queries);
    s.topics = j.value("topics", s.topics);
    s.terms_per_topic = j.value("terms_per_topic", s.terms_per_topic);
    s.background_words = j.value("background_words", s.background_words);
    s.cjk_topic_fraction = j.value("cjk_topic_fraction", s.cjk_topic_fraction);
    s.verbatim_term_rate = j.value("verbatim_term_rate", s.verbatim_term_rate);
    s.shared_entity_query_rate = j.value("shared_entity_query_rate", s.shared_entity_query_rate);
    s.typo_rate = j.value("typo_rate", s.typo_rate);
    s.unjudged_query_rate = j.value("unjudged_query_rate", s.unjudged_query_rate);
    s.short_query_rate = j.value("short_query_rate", s.short_query_rate);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return s;
}

}  // namespace cwms
