#include "i3gn/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "i3gn/baselines.hpp"
#include "i3gn/config.hpp"
#include "i3gn/corpus.hpp"
#include "i3gn/encoders.hpp"
#include "i3gn/evaluation.hpp"
#include "i3gn/graphs.hpp"
#include "i3gn/neighbor_index.hpp"
#include "i3gn/trainer.hpp"
#include "json.hpp"

namespace i3gn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kRunConfigFile = "run_config.json";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw flag values; an empty optional means the flag was not given.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  std::optional<std::string> input, output, corpus, out, checkpoint;

  std::optional<std::size_t> min_support, min_len;
  std::optional<double> test_days;
  std::optional<std::string> fraction, delimiter, session_col, time_col, item_col, event_col;
  std::optional<std::vector<std::string>> keep_events;
  std::optional<bool> header;

  std::optional<std::size_t> k, m;
  std::optional<double> threshold;
  std::optional<std::string> norm;

  std::optional<std::size_t> epochs, batch_size, dim;
  std::optional<double> lr;
  std::optional<std::string> variant, loss;

  std::string session;
  bool with_neighbors = false;
  std::vector<std::size_t> at{5, 10, 20};
  std::optional<std::string> baseline;
  std::size_t top = 10;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

template <typename T>
void set_if(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

// Defaults < `base` < config file < flags.
RunConfig resolve(const Flags& f, RunConfig rc) {
  try {
    if (f.config) rc = run_config_from_json(read_json_file(*f.config), rc);
    auto& p = rc.preprocess;
    set_if(f.min_support, p.min_support);
    set_if(f.min_len, p.min_len);
    set_if(f.test_days, p.test_days);
    set_if(f.fraction, p.fraction);
    set_if(f.delimiter, p.delimiter);
    if (p.delimiter == "tab" || p.delimiter == "\\t") p.delimiter = "\t";
    set_if(f.header, p.header);
    set_if(f.session_col, p.session_column);
    set_if(f.time_col, p.timestamp_column);
    set_if(f.item_col, p.item_column);
    set_if(f.event_col, p.event_column);
    set_if(f.keep_events, p.keep_events);
    p.validate();

    set_if(f.k, rc.retrieval.k);
    set_if(f.m, rc.retrieval.m);
    set_if(f.threshold, rc.retrieval.threshold);
    if (f.norm) rc.retrieval.norm = parse_norm(*f.norm);
    if (rc.retrieval.k == 0 || rc.retrieval.m == 0) throw std::invalid_argument("--k and --m must be positive");

    set_if(f.dim, rc.model.dim);
    if (f.variant) rc.model.variant = parse_variant(*f.variant);
    if (f.loss) rc.model.loss = parse_loss(*f.loss);
    rc.model.validate();

    set_if(f.epochs, rc.train.epochs);
    set_if(f.batch_size, rc.train.batch_size);
    set_if(f.lr, rc.train.lr);
    set_if(f.seed, rc.train.seed);
    set_if(f.threads, rc.train.threads);
    rc.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  auto set_path = [&](const char* key, const std::optional<std::string>& flag) {
    if (flag) rc.paths[key] = *flag;
  };
  set_path("input", f.input);
  set_path("output", f.output);
  set_path("corpus", f.corpus);
  set_path("out", f.out);
  set_path("checkpoint", f.checkpoint);
  if (!rc.paths.contains("corpus")) {
    if (const char* dir = std::getenv(kDataDirEnv); dir && *dir) rc.paths["corpus"] = dir;
  }
  return rc;
}

const std::string& required_path(const RunConfig& rc, const std::string& key, const char* flag) {
  auto it = rc.paths.find(key);
  if (it == rc.paths.end() || it->second.empty()) throw UsageError(std::string("missing required flag ") + flag);
  return it->second;
}

void write_run_config(const fs::path& dir, const RunConfig& rc) {
  fs::create_directories(dir);
  std::ofstream f(dir / kRunConfigFile, std::ios::trunc);
  f << to_json(rc).dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + (dir / kRunConfigFile).string());
}

std::vector<std::string> split_keys(const std::string& text) {
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string key = text.substr(start, end - start);
    const auto first = key.find_first_not_of(" \t");
    const auto last = key.find_last_not_of(" \t");
    if (first != std::string::npos) keys.push_back(key.substr(first, last - first + 1));
    start = end + 1;
  }
  return keys;
}

std::vector<std::string> session_keys(const Flags& f) {
  auto keys = split_keys(f.session);
  if (keys.empty()) throw UsageError("missing required flag --session");
  return keys;
}

// Unknown keys are dropped with a warning.
std::vector<ItemIndex> resolve_items(const ItemVocab& vocab, const std::vector<std::string>& keys, std::ostream& err) {
  std::vector<ItemIndex> items;
  for (const auto& key : keys) {
    if (auto i = vocab.find(key)) {
      items.push_back(*i);
    } else {
      err << "warning: unknown item '" << key << "' ignored\n";
    }
  }
  if (items.empty()) throw std::runtime_error("session contains no known item");
  return items;
}

ColumnRef column_ref(const std::string& text) {
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return static_cast<std::size_t>(std::stoull(text));
  }
  return text;
}

json neighbor_json(const NeighborIndex& index, const NeighborSet& set) {
  json list = json::array();
  for (const auto& n : set.entries) {
    json items = json::array();
    for (ItemIndex i : index.session(n.session).items) items.push_back(index.corpus().vocab.key(i));
    list.push_back({{"session", n.session}, {"similarity", n.similarity}, {"items", items}});
  }
  return list;
}

// ---- subcommands ---------------------------------------------------------

int run_preprocess(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const fs::path input = required_path(rc, "input", "--input");
  const fs::path output = required_path(rc, "output", "--output");
  const auto& p = rc.preprocess;
  Fraction fraction;
  try {
    fraction = parse_fraction(p.fraction);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--fraction: ") + e.what());
  }

  CsvOptions csv;
  csv.delimiter = p.delimiter[0];
  csv.has_header = p.header;
  csv.columns.session = column_ref(p.session_column);
  csv.columns.timestamp = column_ref(p.timestamp_column);
  csv.columns.item = column_ref(p.item_column);
  if (!p.event_column.empty()) csv.columns.event_type = column_ref(p.event_column);
  csv.keep_event_types = p.keep_events;

  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot read " + input.string());
  const auto raw = ingest_csv(in, csv);
  const auto filtered = filter_corpus(raw, p.min_len, p.min_support);
  const auto window = static_cast<Timestamp>(p.test_days * 86400.0);
  const auto corpus = take_recent_fraction(split_by_time(filtered, window), fraction);
  save_corpus(output, corpus);
  write_run_config(output, rc);

  std::size_t clicks = 0;
  for (const auto& s : corpus.train()) clicks += s.items.size();
  err << "preprocess: " << raw.sessions.size() << " raw sessions -> " << corpus.train_count << " train / "
      << corpus.test().size() << " test\n";
  out << json{{"output", output.string()},
              {"raw_sessions", raw.sessions.size()},
              {"train_sessions", corpus.train_count},
              {"test_sessions", corpus.test().size()},
              {"items", corpus.vocab.size()},
              {"train_clicks", clicks}}
             .dump(2)
      << '\n';
  return kExitOk;
}

int run_neighbors(const RunConfig& rc, const Flags& f, std::ostream& out, std::ostream& err) {
  const auto keys = session_keys(f);
  const auto corpus = load_corpus(required_path(rc, "corpus", "--corpus"));
  const NeighborIndex index(corpus);
  const auto prefix = resolve_items(corpus.vocab, keys, err);
  out << neighbor_json(index, index.neighbors(prefix, rc.retrieval, kNoTimeLimit)).dump(2) << '\n';
  return kExitOk;
}

int run_graph(const RunConfig& rc, const Flags& f, std::ostream& out, std::ostream& err) {
  const auto keys = session_keys(f);
  std::optional<SessionCorpus> corpus;
  ItemVocab local;
  const ItemVocab* vocab = &local;
  if (f.with_neighbors) {
    corpus = load_corpus(required_path(rc, "corpus", "--corpus"));
    vocab = &corpus->vocab;
  } else {
    for (const auto& k : keys) local.intern(k);
  }
  const auto prefix = resolve_items(*vocab, keys, err);
  auto node_keys = [&](const std::vector<ItemIndex>& nodes) {
    json list = json::array();
    for (ItemIndex i : nodes) list.push_back(vocab->key(i));
    return list;
  };
  auto square = [](const std::vector<double>& a, std::size_t n) {
    json rows = json::array();
    for (std::size_t r = 0; r < n; ++r) rows.push_back(std::vector<double>(a.begin() + r * n, a.begin() + (r + 1) * n));
    return rows;
  };

  const auto intra = build_intra_graph(prefix);
  json report;
  report["intra"] = {{"nodes", node_keys(intra.node_items)},
                     {"alias", intra.alias},
                     {"last_slot", intra.last_slot},
                     {"a_out", square(intra.a_out, intra.size())},
                     {"a_in", square(intra.a_in, intra.size())}};

  std::vector<ItemSeq> neighbor_seqs;
  if (corpus) {
    const NeighborIndex index(*corpus);
    const auto set = index.neighbors(prefix, rc.retrieval, kNoTimeLimit);
    neighbor_seqs = neighbor_items(index, set);
    report["neighbors"] = neighbor_json(index, set);
  }
  const auto inter = build_inter_graph(prefix, neighbor_seqs);
  report["inter"] = {{"nodes", node_keys(inter.node_items)},
                     {"adjacency", inter.adjacency},
                     {"session_slots", inter.session_slots},
                     {"last_slot", inter.last_slot}};
  out << report.dump(2) << '\n';
  return kExitOk;
}

json vocab_keys(const ItemVocab& vocab) {
  json keys = json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) keys.push_back(vocab.key(static_cast<ItemIndex>(i)));
  return keys;
}

int run_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const fs::path corpus_dir = required_path(rc, "corpus", "--corpus");
  const fs::path out_dir = required_path(rc, "out", "--out");
  const auto corpus = load_corpus(corpus_dir);
  write_run_config(out_dir, rc);

  TrainOptions options;
  options.out_dir = out_dir;
  options.checkpoint_extra = {{"run_config", to_json(rc)}, {"vocab", vocab_keys(corpus.vocab)}};
  options.on_epoch = [&](const EpochLog& e) { err << "train: " << e.to_json().dump() << '\n'; };
  const auto result = train(corpus, rc.model, rc.train, rc.retrieval, options);

  json epochs = json::array();
  for (const auto& e : result.epochs) epochs.push_back(e.to_json());
  out << json{{"checkpoint", (out_dir / "model.ckpt").string()}, {"best_epoch", result.best_epoch}, {"epochs", epochs}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// Retrieval settings recorded at training time act as the base layer.
RunConfig with_checkpoint_base(const Flags& f, const LoadedModel& loaded) {
  RunConfig base;
  if (loaded.extra.contains("run_config")) base = run_config_from_json(loaded.extra.at("run_config"));
  base.paths.clear();
  RunConfig rc = resolve(f, base);
  rc.model = loaded.model.config();
  return rc;
}

void check_vocab(const LoadedModel& loaded, const ItemVocab& vocab) {
  if (loaded.model.vocab_size() != vocab.size()) {
    throw std::runtime_error("checkpoint vocabulary has " + std::to_string(loaded.model.vocab_size()) +
                             " items but the corpus has " + std::to_string(vocab.size()));
  }
  if (loaded.extra.contains("vocab") && loaded.extra.at("vocab") != vocab_keys(vocab)) {
    throw std::runtime_error("checkpoint vocabulary does not match the corpus");
  }
}

int run_evaluate(const RunConfig& initial, const Flags& f, std::ostream& out, std::ostream& err) {
  if (f.at.empty() || std::find(f.at.begin(), f.at.end(), std::size_t{0}) != f.at.end()) {
    throw UsageError("--at needs positive cutoffs");
  }
  RunConfig rc = initial;
  std::optional<LoadedModel> loaded;
  if (!f.baseline) {
    loaded = load_model(required_path(initial, "checkpoint", "--checkpoint"));
    rc = with_checkpoint_base(f, *loaded);
  }
  const auto corpus = load_corpus(required_path(rc, "corpus", "--corpus"));
  if (!corpus.is_split()) throw std::runtime_error("corpus has no test partition");
  if (loaded) check_vocab(*loaded, corpus.vocab);
  const NeighborIndex index(corpus);
  const std::size_t threads = rc.train.threads;

  const bool retrieve = loaded ? loaded->model.uses_inter() : *f.baseline == "sknn";
  const auto cases = prepare_examples(index, corpus.test(), rc.retrieval, retrieve, threads);
  err << "evaluate: " << cases.size() << " test cases\n";

  EvalReport report;
  if (loaded) {
    report = evaluate_model(loaded->model, index, cases, f.at, threads);
  } else if (*f.baseline == "sknn") {
    const std::size_t vocab = corpus.vocab.size();
    report = evaluate_scorer(
        cases, [&](const PreparedExample& ex) { return std::optional(sknn_scores(index, ex.neighbors, vocab)); },
        f.at, threads);
  } else if (*f.baseline == "pop") {
    const auto scores = pop_scores(corpus);
    report = evaluate_scorer(cases, [&](const PreparedExample&) { return std::optional(scores); }, f.at, threads);
  } else {
    const ItemKnn knn(corpus);
    report = evaluate_scorer(cases, [&](const PreparedExample& ex) { return knn.scores(ex.prefix); }, f.at, threads);
  }
  out << report.to_json().dump(2) << '\n';
  return kExitOk;
}

int run_recommend(const Flags& f, const RunConfig& initial, std::ostream& out, std::ostream& err) {
  const auto keys = session_keys(f);
  if (f.top == 0) throw UsageError("--top must be positive");
  const auto loaded = load_model(required_path(initial, "checkpoint", "--checkpoint"));
  RunConfig rc = with_checkpoint_base(f, loaded);
  const I3gnModel& model = loaded.model;

  std::optional<SessionCorpus> corpus;
  if (model.uses_inter() || !loaded.extra.contains("vocab")) {
    if (!rc.paths.contains("corpus") && loaded.extra.contains("run_config")) {
      const auto& recorded = loaded.extra.at("run_config").at("paths");
      if (recorded.contains("corpus")) rc.paths["corpus"] = recorded.at("corpus").get<std::string>();
    }
    corpus = load_corpus(required_path(rc, "corpus", "--corpus"));
    check_vocab(loaded, corpus->vocab);
  }
  ItemVocab stored;
  if (!corpus) {
    for (const auto& k : loaded.extra.at("vocab")) stored.intern(k.get<std::string>());
  }
  const ItemVocab& vocab = corpus ? corpus->vocab : stored;
  const auto prefix = resolve_items(vocab, keys, err);

  std::vector<ItemSeq> neighbors;
  std::optional<NeighborIndex> index;
  if (model.uses_inter()) {
    index.emplace(*corpus);
    neighbors = neighbor_items(*index, index->neighbors(prefix, rc.retrieval, kNoTimeLimit));
  }
  const auto scores = model.predict(prefix, neighbors);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(f.top, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
  json list = json::array();
  for (std::size_t r = 0; r < n; ++r) {
    list.push_back({{"item", vocab.key(static_cast<ItemIndex>(order[r]))}, {"score", scores[order[r]]}});
  }
  out << list.dump(2) << '\n';
  return kExitOk;
}

void add_retrieval_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--k", f.k, "Neighbor sessions kept (default 120)");
  sub->add_option("--m", f.m, "Most recent candidate sessions scored (default 1000)");
  sub->add_option("--threshold", f.threshold, "Minimum cosine similarity (default 0.5)");
  sub->add_option("--norm", f.norm, "Session length in the cosine: distinct or raw");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Session-based next-item recommender with intra- and inter-session graphs", "i3gn"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; command-line flags take precedence");
  app.add_option("--seed", f.seed, "Random seed (default 42)");
  app.add_option("--threads", f.threads, "Worker threads (default 1)");

  auto* pre = app.add_subcommand("preprocess", "Ingest a click log, filter, split and save a corpus");
  pre->add_option("--input", f.input, "Click log (CSV/TSV)");
  pre->add_option("--output", f.output, "Corpus directory to write");
  pre->add_option("--min-support", f.min_support, "Minimum clicks per item (default 5)");
  pre->add_option("--min-len", f.min_len, "Minimum session length (default 2)");
  pre->add_option("--test-days", f.test_days, "Test window in days before the latest session (default 1)");
  pre->add_option("--fraction", f.fraction, "Keep the most recent p/q of training sessions (default 1)");
  pre->add_option("--delimiter", f.delimiter, "Field separator (default ',')");
  pre->add_flag("--header,!--no-header", f.header, "Input starts with a header row");
  pre->add_option("--session-col", f.session_col, "Session column: index or header name (default 0)");
  pre->add_option("--time-col", f.time_col, "Timestamp column (default 1)");
  pre->add_option("--item-col", f.item_col, "Item column (default 2)");
  pre->add_option("--event-col", f.event_col, "Event-type column; enables --keep-events");
  pre->add_option("--keep-events", f.keep_events, "Event types to keep, comma separated")->delimiter(',');

  auto* nb = app.add_subcommand("neighbors", "List the neighbor sessions of a session");
  nb->add_option("--corpus", f.corpus, "Corpus directory (default $" + std::string(kDataDirEnv) + ")");
  nb->add_option("--session", f.session, "Comma-separated item keys");
  add_retrieval_flags(nb, f);

  auto* graph = app.add_subcommand("graph", "Print the intra- and inter-session graphs of a session");
  graph->add_option("--session", f.session, "Comma-separated item keys");
  graph->add_flag("--with-neighbors", f.with_neighbors, "Retrieve neighbors from --corpus for the inter graph");
  graph->add_option("--corpus", f.corpus, "Corpus directory (default $" + std::string(kDataDirEnv) + ")");
  add_retrieval_flags(graph, f);

  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoints and log.jsonl");
  tr->add_option("--corpus", f.corpus, "Corpus directory (default $" + std::string(kDataDirEnv) + ")");
  tr->add_option("--out", f.out, "Output directory");
  tr->add_option("--epochs", f.epochs, "Maximum epochs (default 30)");
  tr->add_option("--batch-size", f.batch_size, "Examples per batch (default 128)");
  tr->add_option("--lr", f.lr, "Initial learning rate (default 0.001)");
  tr->add_option("--dim", f.dim, "Embedding size (default 100)");
  tr->add_option("--variant", f.variant, "full, intra_only, inter_only, avg_pool, mean_gat or mean_readout");
  tr->add_option("--loss", f.loss, "binary_sum or categorical");
  add_retrieval_flags(tr, f);

  auto* ev = app.add_subcommand("evaluate", "Recall@N and MRR@N on the test partition");
  ev->add_option("--checkpoint", f.checkpoint, "Model checkpoint");
  ev->add_option("--corpus", f.corpus, "Corpus directory (default $" + std::string(kDataDirEnv) + ")");
  ev->add_option("--at", f.at, "Cutoffs, comma separated (default 5,10,20)")->delimiter(',');
  ev->add_option("--baseline", f.baseline, "Score with a baseline instead of a checkpoint")
      ->check(CLI::IsMember({"sknn", "pop", "itemknn"}));
  add_retrieval_flags(ev, f);

  auto* rec = app.add_subcommand("recommend", "Top items for a session");
  rec->add_option("--checkpoint", f.checkpoint, "Model checkpoint");
  rec->add_option("--session", f.session, "Comma-separated item keys");
  rec->add_option("--top", f.top, "Items to list (default 10)");
  rec->add_option("--corpus", f.corpus, "Corpus for neighbor retrieval (default: the training corpus)");
  add_retrieval_flags(rec, f);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("i3gn");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig rc = resolve(f, {});
    if (pre->parsed()) return run_preprocess(rc, out, err);
    if (nb->parsed()) return run_neighbors(rc, f, out, err);
    if (graph->parsed()) return run_graph(rc, f, out, err);
    if (tr->parsed()) return run_train(rc, out, err);
    if (ev->parsed()) return run_evaluate(rc, f, out, err);
    return run_recommend(f, rc, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace i3gn::cli
