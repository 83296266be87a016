#pragma once

// Subcommand front end. run() never exits the process: 0 on success, 1 on an
// operational failure, 2 on a usage error.
//
// Options resolve as flag > --config (flat JSON keyed by long option name) >
// default. Every run records its resolved options under <workdir>/runs/.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "futopic/cluster.hpp"
#include "futopic/coherence.hpp"
#include "futopic/corpus.hpp"
#include "futopic/ctfidf.hpp"
#include "futopic/dynamics.hpp"
#include "futopic/embedstore.hpp"
#include "futopic/error.hpp"
#include "futopic/hierarchy.hpp"
#include "futopic/labels.hpp"
#include "futopic/lda.hpp"
#include "futopic/report.hpp"
#include "futopic/textprep.hpp"

namespace futopic::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Context {
  std::filesystem::path workdir;
  Parallelism par;
  std::uint64_t seed = 42;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  std::filesystem::path path(const std::string& p) const {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : workdir / q;
  }
};

namespace detail {

// One registered option: how to read it back and how to fill it from config.
struct Bound {
  CLI::Option* opt;
  std::string key;
  bool required;
  std::function<json()> value;
  std::function<void(const json&)> assign;
};

template <typename T>
void assign_from(T& var, const json& j, const std::string& key) {
  bool ok;
  if constexpr (std::is_same_v<T, bool>) {
    ok = j.is_boolean();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    ok = j.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    ok = j.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = j.is_number();
  } else {
    ok = j.is_string();
  }
  if (!ok) throw UsageError("config key '" + key + "' has the wrong type");
  var = j.get<T>();
}

class Registry {
 public:
  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& help, bool required = false) {
    CLI::Option* o;
    if constexpr (std::is_same_v<T, bool>) {
      o = app->add_flag(name, var, help);
    } else {
      o = app->add_option(name, var, help)->capture_default_str();
    }
    const std::string key = name.substr(2);
    bound_[app].push_back({o, key, required, [&var] { return json(var); },
                           [&var, key](const json& j) { assign_from(var, j, key); }});
    return o;
  }

  const std::vector<Bound>& of(const CLI::App* app) const {
    static const std::vector<Bound> none;
    auto it = bound_.find(app);
    return it == bound_.end() ? none : it->second;
  }

  bool knows(const std::string& key) const {
    for (const auto& [app, list] : bound_)
      for (const auto& b : list)
        if (b.key == key) return true;
    return false;
  }

 private:
  std::map<const CLI::App*, std::vector<Bound>> bound_;
};

inline json load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = report::read_text(path);
  } catch (const IoError&) {
    throw UsageError("cannot read config " + path.string());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError("config " + path.string() + " is not a flat JSON object");
  for (const auto& [k, v] : j.items()) {
    if (v.is_object() || v.is_array()) throw UsageError("config key '" + k + "' must be a scalar");
  }
  return j;
}

inline Tokenizer make_tokenizer(const Context& ctx, const std::string& stopwords) {
  return stopwords.empty() ? Tokenizer() : Tokenizer(StopwordList::load(ctx.path(stopwords)));
}

inline Vocabulary load_vocab(const Context& ctx, const std::string& path, const Tokenizer& tok) {
  auto vocab = Vocabulary::load(ctx.path(path));
  if (vocab.params().stopword_list_id != tok.stopwords().id) {
    throw Error("vocabulary " + path + " was built with stopword list '" + vocab.params().stopword_list_id +
                "' but '" + tok.stopwords().id + "' is in use");
  }
  return vocab;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  report::write_text(path, report::canonical_dump(j));
}

// Topic count for a labels file: explicit, else its summary, else max label + 1.
inline std::uint32_t label_classes(const std::filesystem::path& labels, std::uint32_t k) {
  if (k > 0) return k;
  auto summary = labels;
  summary.replace_extension(".json");
  if (std::filesystem::exists(summary)) {
    const auto j = json::parse(report::read_text(summary), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("k") && j["k"].is_number_unsigned()) {
      return j["k"].get<std::uint32_t>();
    }
  }
  std::uint32_t top = 0;
  for (const auto& e : read_labels(labels)) top = std::max(top, e.label + 1);
  if (top == 0) throw Error("labels file " + labels.string() + " is empty");
  return top;
}

inline void check_label_count(const LabelCursor& cursor, const CorpusStore& store, const std::filesystem::path& p) {
  if (cursor.size() != store.size()) {
    throw Error("labels file " + p.string() + " has " + std::to_string(cursor.size()) + " entries but the corpus has " +
                std::to_string(store.size()) + " documents");
  }
}

inline std::vector<std::vector<std::string>> word_lists(const std::vector<topics::TopicTerms>& ts) {
  std::vector<std::vector<std::string>> out;
  for (const auto& t : ts) {
    std::vector<std::string> w;
    for (const auto& [term, weight] : t.terms) w.push_back(term);
    out.push_back(std::move(w));
  }
  return out;
}

inline coherence::ModelCoherence score_topics(const Context& ctx, const CorpusStore& store, const Tokenizer& tok,
                                              const std::vector<std::vector<std::string>>& words,
                                              const coherence::CoherenceConfig& cfg, std::size_t batch) {
  CorpusTokenSource src(store, tok, batch, ctx.par);
  std::ostream* err = ctx.err;
  return coherence::cv_model(src, words, cfg, ctx.par, [err](const std::string& m) { *err << "coherence: " << m << '\n'; });
}

inline std::vector<std::vector<std::string>> lda_word_lists(const lda::LdaModel& model, const Vocabulary& vocab,
                                                            std::size_t n) {
  std::vector<std::vector<std::string>> out;
  for (std::uint32_t k = 0; k < model.num_topics(); ++k) {
    std::vector<std::string> w;
    for (const auto& tw : lda::topic_top_terms(model, k, n)) w.push_back(vocab.term(tw.term));
    out.push_back(std::move(w));
  }
  return out;
}

inline std::uint32_t argmax(const std::vector<double>& v) {
  return static_cast<std::uint32_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct LdaFlags {
  std::string corpus = "corpus";
  std::string vocab = "vocab.json";
  std::string stopwords;
  std::size_t batch = 4096;
  std::uint32_t passes = 1;
  double alpha = 0.0;
  double eta = 0.0;
  double tau0 = 64.0;
  double kappa = 0.7;
  std::size_t top_n = 10;

  void add(Registry& r, CLI::App* app) {
    r.option(app, "--corpus", corpus, "corpus store directory");
    r.option(app, "--vocab", vocab, "vocabulary JSON");
    r.option(app, "--stopwords", stopwords, "stopword list file (default: bundled en-v1)");
    r.option(app, "--batch", batch, "documents per mini-batch");
    r.option(app, "--passes", passes, "passes over the corpus");
    r.option(app, "--alpha", alpha, "document-topic prior (0 selects 1/K)");
    r.option(app, "--eta", eta, "topic-term prior (0 selects 1/K)");
    r.option(app, "--tau0", tau0, "learning-rate delay");
    r.option(app, "--kappa", kappa, "learning-rate decay in (0.5, 1]");
    r.option(app, "--top-n", top_n, "terms listed per topic");
  }

  lda::TrainOptions options(const Context& ctx, std::uint32_t k) const {
    lda::TrainOptions o;
    o.k = k;
    o.hyper = {alpha, eta, tau0, kappa};
    o.batch_size = batch;
    o.passes = passes;
    o.seed = ctx.seed;
    o.parallelism = ctx.par;
    return o;
  }
};

}  // namespace detail

// Builds the command tree; each leaf registers the action to run after parsing.
class Cli {
 public:
  Cli() : app_("Streaming topic modelling toolkit", "futopic") {
    app_.require_subcommand(1);
    app_.add_option("--config", config_, "flat JSON file of option values");
    reg_.option(&app_, "--seed", seed_, "random seed");
    reg_.option(&app_, "--threads", threads_, "worker threads (0 = all cores)");
    app_.add_option("--workdir", workdir_, "directory that relative paths resolve against")->capture_default_str();
    add_ingest();
    add_vocab();
    add_embed_validate();
    add_lda();
    add_bertopic();
    add_topics();
    add_coherence();
    add_dynamics();
    add_report();
  }

  int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
      app_.parse(rev);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        out << app_.help();
        return kExitOk;
      }
      err << "futopic: " << e.what() << "\n\n" << usage_for(nullptr);
      return kExitUsage;
    }
    const CLI::App* leaf = &app_;
    std::string command;
    while (!leaf->get_subcommands().empty()) {
      leaf = leaf->get_subcommands().front();
      command += (command.empty() ? "" : " ") + leaf->get_name();
    }
    try {
      resolve(leaf);
    } catch (const UsageError& e) {
      err << "futopic: " << e.what() << "\n\n" << usage_for(leaf);
      return kExitUsage;
    }
    try {
      Context ctx;
      ctx.workdir = workdir_;
      ctx.par = Parallelism{threads_};
      ctx.seed = seed_;
      ctx.out = &out;
      ctx.err = &err;
      std::filesystem::create_directories(ctx.workdir);
      json resolved{{"command", command}};
      for (const auto* a : {static_cast<const CLI::App*>(&app_), leaf})
        for (const auto& b : reg_.of(a)) resolved[b.key] = b.value();
      std::string stem = command;
      std::replace(stem.begin(), stem.end(), ' ', '-');
      detail::write_json(ctx.workdir / "runs" / (stem + ".json"), resolved);
      actions_.at(leaf)(ctx);
      return kExitOk;
    } catch (const UsageError& e) {
      err << "futopic: " << e.what() << "\n\n" << usage_for(leaf);
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "futopic: error: " << e.what() << '\n';
      return kExitFailure;
    }
  }

 private:
  using Action = std::function<void(const Context&)>;

  std::string usage_for(const CLI::App* leaf) const { return leaf != nullptr ? leaf->help() : app_.help(); }

  // Fills options absent from the command line from --config, then enforces
  // required options.
  void resolve(const CLI::App* leaf) {
    if (!config_.empty()) {
      const auto cfg = detail::load_config(std::filesystem::path(workdir_) / config_);
      for (const auto& [key, value] : cfg.items()) {
        if (key == "command") continue;
        if (!reg_.knows(key)) throw UsageError("unknown config key '" + key + "'");
      }
      for (const auto* a : {static_cast<const CLI::App*>(&app_), leaf}) {
        for (const auto& b : reg_.of(a)) {
          if (b.opt->count() == 0 && cfg.contains(b.key)) {
            b.assign(cfg[b.key]);
            given_.insert(b.opt);
          }
        }
      }
    }
    for (const auto& b : reg_.of(leaf)) {
      if (b.required && b.opt->count() == 0 && !given_.count(b.opt)) {
        throw UsageError("missing required option --" + b.key);
      }
    }
  }

  CLI::App* leaf(CLI::App* parent, const std::string& name, const std::string& help, Action action) {
    auto* sub = parent->add_subcommand(name, help);
    actions_[sub] = std::move(action);
    return sub;
  }

  void add_ingest() {
    struct F {
      std::string input, out = "corpus", since, until;
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "ingest", "read newline-delimited JSON into a corpus store", [f](const Context& ctx) {
      DateWindow w{parse_date(f->since), parse_date(f->until)};
      std::ostream* err = ctx.err;
      const auto stats = ingest_jsonl_file(ctx.path(f->input), w, ctx.path(f->out),
                                           [err](std::uint64_t n, const std::string& why) {
                                             *err << "ingest: line " << n << ": " << why << '\n';
                                           });
      *ctx.out << json(stats).dump(2) << '\n';
    });
    reg_.option(c, "--input", f->input, "JSONL input file", true);
    reg_.option(c, "--out", f->out, "corpus store directory");
    reg_.option(c, "--since", f->since, "first day kept, YYYY-MM-DD (UTC)", true);
    reg_.option(c, "--until", f->until, "last day kept, YYYY-MM-DD (UTC)", true);
  }

  void add_vocab() {
    struct F {
      std::string corpus = "corpus", out = "vocab.json", stopwords;
      std::uint64_t min_df = 5;
      double max_df = 0.5;
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "vocab", "build the vocabulary of a corpus store", [f](const Context& ctx) {
      const auto store = CorpusStore::open(ctx.path(f->corpus));
      const auto tok = detail::make_tokenizer(ctx, f->stopwords);
      const auto vocab = build_vocabulary(store, tok, VocabParams{f->min_df, f->max_df, {}});
      vocab.save(ctx.path(f->out));
      *ctx.out << json{{"terms", vocab.size()}, {"documents", vocab.total_docs()}}.dump() << '\n';
    });
    reg_.option(c, "--corpus", f->corpus, "corpus store directory");
    reg_.option(c, "--out", f->out, "vocabulary JSON");
    reg_.option(c, "--min-df", f->min_df, "minimum document frequency");
    reg_.option(c, "--max-df", f->max_df, "maximum document-frequency ratio");
    reg_.option(c, "--stopwords", f->stopwords, "stopword list file (default: bundled en-v1)");
  }

  void add_embed_validate() {
    struct F {
      std::string embeddings, corpus = "corpus";
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "embed-validate", "check an embedding file against the corpus", [f](const Context& ctx) {
      const auto store = CorpusStore::open(ctx.path(f->corpus));
      const auto rep = embed::validate_alignment(store, ctx.path(f->embeddings));
      *ctx.out << rep.to_json().dump(2) << '\n';
      if (!rep.aligned()) throw Error("embedding file is not aligned with the corpus");
    });
    reg_.option(c, "--embeddings", f->embeddings, "FSEM embedding file", true);
    reg_.option(c, "--corpus", f->corpus, "corpus store directory");
  }

  void add_lda() {
    auto* lda_app = app_.add_subcommand("lda", "online LDA");
    lda_app->require_subcommand(1);

    struct Train : detail::LdaFlags {
      std::uint32_t k = 15;
      std::string out = "lda.model", summary = "lda.json", topics = "topics.json";
    };
    auto t = std::make_shared<Train>();
    auto* train = leaf(lda_app, "train", "train an online LDA model", [t](const Context& ctx) {
      const auto store = CorpusStore::open(ctx.path(t->corpus));
      const auto tok = detail::make_tokenizer(ctx, t->stopwords);
      const auto vocab = detail::load_vocab(ctx, t->vocab, tok);
      const auto opts = t->options(ctx, t->k);
      CorpusBowSource src(store, tok, vocab, opts.batch_size, ctx.par);
      lda::FitReport fit;
      const auto model = lda::fit_stream(src, static_cast<std::uint32_t>(vocab.size()), store.size(), opts, &fit);
      model.save(ctx.path(t->out));

      // Topic sizes count documents by their dominant topic.
      std::vector<std::uint64_t> sizes(t->k, 0);
      lda::Inferencer inf(model, opts.estep);
      src.rewind();
      std::vector<BowDoc> batch;
      std::vector<std::uint32_t> top;
      while (src.next(batch)) {
        top.assign(batch.size(), 0);
        parallel_for(batch.size(), ctx.par, [&](std::size_t i) { top[i] = detail::argmax(inf.theta(batch[i])); });
        for (auto k : top) ++sizes[k];
      }
      std::vector<topics::TopicTerms> named;
      for (std::uint32_t k = 0; k < t->k; ++k) {
        topics::TopicTerms tt{k, sizes[k], {}};
        for (const auto& tw : lda::topic_top_terms(model, k, t->top_n)) tt.terms.emplace_back(vocab.term(tw.term), tw.weight);
        named.push_back(std::move(tt));
      }
      auto summary = lda::summary_json(model, &vocab, t->top_n);
      summary["fit"] = {{"documents_seen", fit.documents_seen},
                        {"updates", fit.updates},
                        {"model_bytes", fit.model_bytes},
                        {"peak_batch_bytes", fit.peak_batch_bytes}};
      detail::write_json(ctx.path(t->summary), summary);
      detail::write_json(ctx.path(t->topics), topics::topics_to_json(named));
      *ctx.out << "trained K=" << t->k << " on " << store.size() << " documents -> " << t->out << '\n';
    });
    t->add(reg_, train);
    reg_.option(train, "--k", t->k, "number of topics");
    reg_.option(train, "--out", t->out, "model file");
    reg_.option(train, "--summary", t->summary, "model summary JSON");
    reg_.option(train, "--topics", t->topics, "topics JSON");

    struct Sweep : detail::LdaFlags {
      std::string k_grid, metric = "c_v", out = "sweep.json";
      std::size_t window = 110;
    };
    auto s = std::make_shared<Sweep>();
    auto* sweep = leaf(lda_app, "sweep", "score LDA over a grid of topic counts", [s](const Context& ctx) {
      if (s->metric != "c_v") throw UsageError("unsupported metric '" + s->metric + "' (only c_v)");
      const auto grid = coherence::parse_k_grid(s->k_grid);
      const auto store = CorpusStore::open(ctx.path(s->corpus));
      const auto tok = detail::make_tokenizer(ctx, s->stopwords);
      const auto vocab = detail::load_vocab(ctx, s->vocab, tok);
      coherence::CoherenceConfig cfg;
      cfg.window_size = s->window;
      cfg.top_n = s->top_n;
      const auto result = coherence::sweep(
          grid,
          [&](std::uint32_t k) {
            const auto opts = s->options(ctx, k);
            CorpusBowSource src(store, tok, vocab, opts.batch_size, ctx.par);
            const auto model = lda::fit_stream(src, static_cast<std::uint32_t>(vocab.size()), store.size(), opts);
            return detail::lda_word_lists(model, vocab, s->top_n);
          },
          [&](const std::vector<std::vector<std::string>>& words) {
            return detail::score_topics(ctx, store, tok, words, cfg, s->batch).mean;
          });
      const auto j = result.to_json();
      detail::write_json(ctx.path(s->out), j);
      *ctx.out << j.dump(2) << '\n';
      if (!result.best_k) throw Error("no k in the grid could be trained and scored");
    });
    s->add(reg_, sweep);
    reg_.option(sweep, "--k-grid", s->k_grid, "topic counts, a:b[:step] or a,b,c", true);
    reg_.option(sweep, "--metric", s->metric, "coherence measure");
    reg_.option(sweep, "--window", s->window, "C_V sliding window length");
    reg_.option(sweep, "--out", s->out, "sweep JSON");
  }

  void add_bertopic() {
    auto* b_app = app_.add_subcommand("bertopic", "embedding-cluster track");
    b_app->require_subcommand(1);
    struct F {
      std::string corpus = "corpus", embeddings, model = "cluster.model", labels = "labels.bin", summary = "labels.json";
      std::uint32_t k = 100, pca_dims = 5, epochs = 1;
      std::size_t batch = 4096;
      bool normalize = false;
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(b_app, "train", "incremental PCA and mini-batch k-means over embeddings", [f](const Context& ctx) {
      const auto store = CorpusStore::open(ctx.path(f->corpus));
      cluster::PipelineOptions o;
      o.k = f->k;
      o.n_components = f->pca_dims;
      o.seed = ctx.seed;
      o.batch_size = f->batch;
      o.epochs = f->epochs;
      o.normalize = f->normalize;
      o.parallelism = ctx.par;
      LabelWriter writer(ctx.path(f->labels));
      cluster::PipelineReport rep;
      const auto model = cluster::fit_pipeline(store, ctx.path(f->embeddings), o, std::ref(writer), &rep);
      writer.close();
      model.save(ctx.path(f->model));
      detail::write_json(ctx.path(f->summary), cluster::labels_summary(model, rep));
      *ctx.out << "clustered " << rep.documents << " documents into k=" << f->k << " -> " << f->labels << '\n';
    });
    reg_.option(c, "--corpus", f->corpus, "corpus store directory");
    reg_.option(c, "--embeddings", f->embeddings, "FSEM embedding file", true);
    reg_.option(c, "--k", f->k, "number of clusters");
    reg_.option(c, "--pca-dims", f->pca_dims, "PCA components");
    reg_.option(c, "--epochs", f->epochs, "k-means passes over the embeddings");
    reg_.option(c, "--batch", f->batch, "embeddings per mini-batch");
    reg_.option(c, "--normalize", f->normalize, "L2-normalize embeddings before PCA");
    reg_.option(c, "--model", f->model, "cluster model file");
    reg_.option(c, "--labels", f->labels, "labels file");
    reg_.option(c, "--summary", f->summary, "labels summary JSON");
  }

  struct TopicFlags {
    std::string corpus = "corpus", vocab = "vocab.json", stopwords, labels = "labels.bin";
    std::uint32_t k = 0;
    std::size_t top_n = 10, batch = 4096;

    void add(detail::Registry& r, CLI::App* app) {
      r.option(app, "--corpus", corpus, "corpus store directory");
      r.option(app, "--vocab", vocab, "vocabulary JSON");
      r.option(app, "--stopwords", stopwords, "stopword list file (default: bundled en-v1)");
      r.option(app, "--labels", labels, "labels file");
      r.option(app, "--k", k, "class count (0 = from the labels summary)");
      r.option(app, "--top-n", top_n, "terms listed per topic");
      r.option(app, "--batch", batch, "documents per batch");
    }

    struct Loaded {
      CorpusStore store;
      Tokenizer tok;
      Vocabulary vocab;
      topics::ClassTermMatrix counts;
    };

    Loaded load(const Context& ctx) const {
      auto store = CorpusStore::open(ctx.path(corpus));
      auto tok = detail::make_tokenizer(ctx, stopwords);
      auto v = detail::load_vocab(ctx, vocab, tok);
      const auto lp = ctx.path(labels);
      const auto classes = detail::label_classes(lp, k);
      LabelCursor cursor(lp);
      detail::check_label_count(cursor, store, lp);
      CorpusBowSource src(store, tok, v, batch, ctx.par);
      auto m = topics::class_term_counts(src, classes, static_cast<std::uint32_t>(v.size()),
                                         [&](std::uint64_t id) { return cursor.find(id); });
      return {std::move(store), std::move(tok), std::move(v), std::move(m)};
    }
  };

  static std::vector<std::vector<double>> dense(const std::vector<topics::TopicRepresentation>& reps, std::uint32_t v) {
    std::vector<std::vector<double>> out;
    for (const auto& r : reps) out.push_back(topics::dense_vector(r, v));
    return out;
  }

  void add_topics() {
    auto* t_app = app_.add_subcommand("topics", "c-TF-IDF representations and hierarchy");
    t_app->require_subcommand(1);

    struct Rep : TopicFlags {
      std::string out = "topics.json", map = "map2d.json";
    };
    auto r = std::make_shared<Rep>();
    auto* rep = leaf(t_app, "represent", "c-TF-IDF topics from cluster labels", [r](const Context& ctx) {
      const auto in = r->load(ctx);
      const auto reps = topics::ctfidf(in.counts);
      const auto named = topics::named_topics(reps, in.vocab, r->top_n);
      detail::write_json(ctx.path(r->out), topics::topics_to_json(named));
      if (reps.size() >= 2) {
        std::vector<std::uint64_t> sizes;
        std::vector<std::string> labels;
        for (const auto& t : named) {
          sizes.push_back(t.size);
          labels.push_back(topics::topic_label(t));
        }
        const auto m = topics::intertopic_map(dense(reps, in.counts.v), sizes, labels);
        detail::write_json(ctx.path(r->map), m.to_json());
      }
      *ctx.out << "wrote " << named.size() << " topics -> " << r->out << '\n';
    });
    r->add(reg_, rep);
    reg_.option(rep, "--out", r->out, "topics JSON");
    reg_.option(rep, "--map", r->map, "inter-topic map JSON");

    struct Red : TopicFlags {
      std::uint32_t target = 0;
      std::size_t window = 110;
      std::string out = "topics_reduced.json", dendrogram = "dendrogram.json", mapping = "mapping.json";
    };
    auto d = std::make_shared<Red>();
    auto* red = leaf(t_app, "reduce", "merge topics along an average-linkage dendrogram", [d](const Context& ctx) {
      const auto in = d->load(ctx);
      const auto reps = topics::ctfidf(in.counts);
      std::ostream* err = ctx.err;
      const auto sim = topics::similarity_matrix(dense(reps, in.counts.v),
                                                 [err](const std::string& m) { *err << "topics: " << m << '\n'; });
      const auto tree = topics::build_dendrogram(sim);
      const auto reduced = topics::reduce_topics(in.counts, tree, d->target);
      const auto before = topics::named_topics(reps, in.vocab, d->top_n);
      const auto after = topics::named_topics(reduced.representations, in.vocab, d->top_n);
      detail::write_json(ctx.path(d->dendrogram), tree.to_json());
      detail::write_json(ctx.path(d->out), topics::topics_to_json(after));

      coherence::CoherenceConfig cfg;
      cfg.window_size = d->window;
      cfg.top_n = d->top_n;
      auto score = [&](const std::vector<topics::TopicTerms>& ts) -> json {
        try {
          return detail::score_topics(ctx, in.store, in.tok, detail::word_lists(ts), cfg, d->batch).mean;
        } catch (const InvalidArgument& e) {
          *ctx.err << "topics: coherence not computed: " << e.what() << '\n';
          return nullptr;
        }
      };
      const json cb = score(before), ca = score(after);
      json mapping{{"schema_version", 1},
                   {"source_topics", in.counts.k},
                   {"target", d->target},
                   {"mapping", reduced.mapping},
                   {"coherence", {{"before", cb}, {"after", ca}}}};
      mapping["coherence"]["delta"] = cb.is_number() && ca.is_number() ? json(ca.get<double>() - cb.get<double>()) : json(nullptr);
      detail::write_json(ctx.path(d->mapping), mapping);
      *ctx.out << "reduced " << in.counts.k << " topics to " << d->target << " -> " << d->out << '\n';
    });
    d->add(reg_, red);
    reg_.option(red, "--target", d->target, "number of topics after merging", true);
    reg_.option(red, "--window", d->window, "C_V sliding window length");
    reg_.option(red, "--out", d->out, "reduced topics JSON");
    reg_.option(red, "--dendrogram", d->dendrogram, "dendrogram JSON");
    reg_.option(red, "--mapping", d->mapping, "old-to-new topic mapping JSON");
  }

  void add_coherence() {
    struct F {
      std::string topics = "topics.json", corpus = "corpus", stopwords, out = "coherence.json";
      std::size_t top_n = 10, window = 110, batch = 4096;
      double epsilon = 1e-12, gamma = 1.0;
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "coherence", "C_V coherence of a topics file", [f](const Context& ctx) {
      const auto tp = ctx.path(f->topics);
      const auto ts = topics::topics_from_json(report::load_artifact(tp, report::validate_topics));
      const auto store = CorpusStore::open(ctx.path(f->corpus));
      const auto tok = detail::make_tokenizer(ctx, f->stopwords);
      coherence::CoherenceConfig cfg{f->window, f->top_n, f->epsilon, f->gamma};
      const auto result = detail::score_topics(ctx, store, tok, detail::word_lists(ts), cfg, f->batch);
      auto j = result.to_json();
      for (std::size_t i = 0; i < ts.size(); ++i) j["per_topic"][i]["topic_id"] = ts[i].topic_id;
      detail::write_json(ctx.path(f->out), j);
      *ctx.out << "mean C_V " << result.mean << " over " << ts.size() << " topics -> " << f->out << '\n';
    });
    reg_.option(c, "--topics", f->topics, "topics JSON");
    reg_.option(c, "--corpus", f->corpus, "corpus store directory");
    reg_.option(c, "--stopwords", f->stopwords, "stopword list file (default: bundled en-v1)");
    reg_.option(c, "--top-n", f->top_n, "words scored per topic");
    reg_.option(c, "--window", f->window, "sliding window length");
    reg_.option(c, "--epsilon", f->epsilon, "NPMI smoothing");
    reg_.option(c, "--gamma", f->gamma, "context-vector exponent");
    reg_.option(c, "--batch", f->batch, "documents per batch");
    reg_.option(c, "--out", f->out, "coherence JSON");
  }

  void add_dynamics() {
    struct F {
      std::string corpus = "corpus", granularity = "month", labels, model, vocab = "vocab.json", stopwords,
                  out = "dynamics.json";
      std::uint32_t k = 0;
      std::size_t batch = 4096;
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "dynamics", "topic shares per time bucket", [f](const Context& ctx) {
      if (f->labels.empty() == f->model.empty()) throw UsageError("give exactly one of --labels or --model");
      const auto store = CorpusStore::open(ctx.path(f->corpus));
      const auto g = parse_granularity(f->granularity);
      std::optional<dynamics::DynamicsAccumulator> acc;
      if (!f->labels.empty()) {
        const auto lp = ctx.path(f->labels);
        acc.emplace(dynamics::DynamicsAccumulator::for_corpus(store, g, detail::label_classes(lp, f->k)));
        LabelCursor cursor(lp);
        detail::check_label_count(cursor, store, lp);
        stream_corpus(store, f->batch, [&](const std::vector<TweetRecord>& batch) {
          for (const auto& r : batch) acc->add_label(r.created_at, cursor.require(r.id));
        });
      } else {
        const auto tok = detail::make_tokenizer(ctx, f->stopwords);
        const auto vocab = detail::load_vocab(ctx, f->vocab, tok);
        const auto model = lda::LdaModel::load(ctx.path(f->model));
        if (model.vocab_size() != vocab.size()) throw Error("model and vocabulary sizes differ");
        acc.emplace(dynamics::DynamicsAccumulator::for_corpus(store, g, model.num_topics()));
        lda::Inferencer inf(model);
        CorpusBowSource src(store, tok, vocab, f->batch, ctx.par);
        std::vector<BowDoc> batch;
        std::vector<std::vector<double>> theta;
        while (src.next(batch)) {
          theta.assign(batch.size(), {});
          parallel_for(batch.size(), ctx.par, [&](std::size_t i) { theta[i] = inf.theta(batch[i]); });
          for (std::size_t i = 0; i < batch.size(); ++i) acc->add_weights(src.last_records()[i].created_at, theta[i]);
        }
      }
      const auto m = acc->finish();
      detail::write_json(ctx.path(f->out), m.to_json());
      *ctx.out << m.buckets.size() << " buckets x " << m.topics << " topics -> " << f->out << '\n';
    });
    reg_.option(c, "--corpus", f->corpus, "corpus store directory");
    reg_.option(c, "--granularity", f->granularity, "day, week or month");
    reg_.option(c, "--labels", f->labels, "cluster labels file (hard assignments)");
    reg_.option(c, "--k", f->k, "class count for --labels (0 = from the labels summary)");
    reg_.option(c, "--model", f->model, "LDA model file (soft assignments)");
    reg_.option(c, "--vocab", f->vocab, "vocabulary JSON for --model");
    reg_.option(c, "--stopwords", f->stopwords, "stopword list file (default: bundled en-v1)");
    reg_.option(c, "--batch", f->batch, "documents per batch");
    reg_.option(c, "--out", f->out, "dynamics JSON");
  }

  void add_report() {
    struct F {
      std::string out = "report", topics = "topics.json", coherence = "coherence.json", sweep = "sweep.json",
                  dynamics = "dynamics.json", dendrogram = "dendrogram.json", map = "map2d.json";
    };
    auto f = std::make_shared<F>();
    auto* c = leaf(&app_, "report", "emit JSON results and static HTML pages", [f](const Context& ctx) {
      const std::map<std::string, std::string> inputs{{"topics", f->topics},       {"coherence", f->coherence},
                                                      {"sweep", f->sweep},         {"dynamics", f->dynamics},
                                                      {"dendrogram", f->dendrogram}, {"map2d", f->map}};
      report::Artifacts a;
      for (const auto& s : report::sections()) {
        const auto p = ctx.path(inputs.at(s.key));
        if (std::filesystem::exists(p)) a.present[s.key] = report::load_artifact(p, s.validate);
      }
      // Thread count never changes results, so it stays out of the hashed config.
      static const std::set<std::string> seeded{"lda-train", "lda-sweep", "bertopic-train"};
      const auto runs = ctx.workdir / "runs";
      std::vector<std::filesystem::path> files;
      if (std::filesystem::is_directory(runs)) {
        for (const auto& e : std::filesystem::directory_iterator(runs)) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& p : files) {
        const auto name = p.stem().string();
        if (p.extension() != ".json" || name == "report") continue;
        auto j = json::parse(report::read_text(p), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        j.erase("threads");
        if (seeded.count(name) && j.contains("seed")) a.seeds[name] = j["seed"].get<std::uint64_t>();
        a.config[name] = std::move(j);
      }
      const auto out = ctx.path(f->out);
      const auto manifest = report::emit_json(a, out);
      const auto pages = report::emit_html(out);
      *ctx.out << "wrote " << manifest["files"].size() << " JSON files and " << pages.size() << " pages -> " << f->out
               << '\n';
    });
    reg_.option(c, "--out", f->out, "report directory");
    reg_.option(c, "--topics", f->topics, "topics JSON");
    reg_.option(c, "--coherence", f->coherence, "coherence JSON");
    reg_.option(c, "--sweep", f->sweep, "sweep JSON");
    reg_.option(c, "--dynamics", f->dynamics, "dynamics JSON");
    reg_.option(c, "--dendrogram", f->dendrogram, "dendrogram JSON");
    reg_.option(c, "--map", f->map, "inter-topic map JSON");
  }

  CLI::App app_;
  detail::Registry reg_;
  std::map<const CLI::App*, Action> actions_;
  std::set<const CLI::Option*> given_;
  std::string config_;
  std::string workdir_ = ".";
  std::uint64_t seed_ = 42;
  unsigned threads_ = 0;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Cli cli;
  return cli.run(args, out, err);
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace futopic::cli
