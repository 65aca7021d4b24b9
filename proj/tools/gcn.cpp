// gcn: prepare, train, generate, classify, trace and evaluate.
//
// Exit codes:
//   0 success
//   1 usage or other error
//   2 unreadable or malformed input (corpus, vocabulary, checkpoint)
//   3 k-core left no reviews
//   4 non-finite training loss
//   5 transplant source is already conditioned
//   6 conditioning flags or task incompatible with the checkpoint schema
//   7 empty test set

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gcn/gcn.hpp"

namespace fs = std::filesystem;

namespace {

struct ExitError : std::runtime_error {
  int code;
  ExitError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

[[noreturn]] void fail(int code, const std::string& what) { throw ExitError(code, what); }

struct Conditioning {
  std::optional<double> rating;
  std::optional<std::string> category, user, item;

  gcn::AuxFields fields() const { return {rating, category, user, item}; }

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--rating", rating, "star rating");
    cmd->add_option("--category", category, "category label");
    cmd->add_option("--user", user, "user id");
    cmd->add_option("--item", item, "item id");
  }
};

// Every supplied flag must have a slot; every rating slot needs a value.
void check_conditioning(const Conditioning& c, const gcn::AuxSchema& schema, std::optional<gcn::SlotKind> varied = {}) {
  auto require_slot = [&](bool given, gcn::SlotKind k) {
    if (given && !schema.find(k))
      fail(6, std::string("checkpoint has no ") + gcn::slot_name(k) + " slot");
  };
  require_slot(c.rating.has_value(), gcn::SlotKind::Rating);
  require_slot(c.category.has_value(), gcn::SlotKind::Category);
  require_slot(c.user.has_value(), gcn::SlotKind::User);
  require_slot(c.item.has_value(), gcn::SlotKind::Item);
  if (schema.find(gcn::SlotKind::Rating) && !c.rating && varied != gcn::SlotKind::Rating)
    fail(6, "checkpoint is rating-conditioned; pass --rating");
}

gcn::AuxVector encode_or_fail(const gcn::AuxFields& f, const gcn::AuxSchema& schema) {
  try {
    return gcn::encode_aux(f, schema);
  } catch (const gcn::EncodingError& e) {
    fail(6, e.what());
  }
}

gcn::Checkpoint read_checkpoint(const std::string& path) {
  try {
    return gcn::load_checkpoint(path);
  } catch (const gcn::CheckpointError& e) {
    fail(2, path + ": " + e.what());
  }
}

std::string read_text(const std::optional<std::string>& text, const std::optional<std::string>& file) {
  if (text && file) fail(1, "pass either --text or --file, not both");
  if (text) return *text;
  if (file) {
    if (!fs::exists(*file)) fail(2, "no such file: " + *file);
    return gcn::io::read_file(*file);
  }
  fail(1, "pass --text or --file");
}

std::string escape_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

gcn::ReviewCollection read_reviews(const fs::path& path) {
  try {
    return gcn::load_reviews(path);
  } catch (const gcn::EmptyCollectionError& e) {
    throw;
  } catch (const gcn::ParseError& e) {
    fail(2, path.string() + ": " + e.what());
  }
}

// Sub-seeds for repeated draws, all derived from the invocation seed.
std::vector<std::uint64_t> sub_seeds(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& s : out) s = rng();
  return out;
}

gcn::SlotKind task_slot(const std::string& task) {
  if (task == "author") return gcn::SlotKind::User;
  if (task == "item") return gcn::SlotKind::Item;
  if (task == "category") return gcn::SlotKind::Category;
  if (task == "sentiment" || task == "rating" || task == "rating-grid") return gcn::SlotKind::Rating;
  fail(1, "unknown task '" + task + "'");
}

// Candidate aux vectors varying the one-hot slot of `kind`; other fields fixed.
std::vector<gcn::AuxVector> label_candidates(const gcn::AuxSchema& schema, gcn::SlotKind kind, gcn::AuxFields fixed) {
  const auto* slot = schema.find(kind);
  if (!slot) fail(6, std::string("checkpoint has no ") + gcn::slot_name(kind) + " slot");
  std::vector<gcn::AuxVector> out;
  for (const auto& label : slot->labels) {
    auto f = fixed;
    if (kind == gcn::SlotKind::Category) f.category = label;
    else if (kind == gcn::SlotKind::User) f.user = label;
    else f.item = label;
    out.push_back(encode_or_fail(f, schema));
  }
  return out;
}

std::vector<double> priors_from(const std::string& path, const gcn::AuxSlot& slot) {
  auto reviews = read_reviews(path);
  std::vector<double> counts(slot.labels.size(), 0.0);
  double total = 0;
  for (const auto& r : reviews.records()) {
    const std::string& label = slot.kind == gcn::SlotKind::Category ? r.category
                               : slot.kind == gcn::SlotKind::User   ? r.user_id
                                                                    : r.item_id;
    const int idx = slot.label_index(label);
    if (idx >= 0) {
      counts[static_cast<std::size_t>(idx)] += 1;
      total += 1;
    }
  }
  if (total == 0) fail(6, path + " has no reviews with labels in the checkpoint schema");
  for (double& c : counts) c /= total;
  return counts;
}

// ---- prepare ----

struct PrepareArgs {
  std::string corpus, out_dir;
  std::size_t k = 190;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

int run_prepare(const PrepareArgs& a) {
  gcn::ReviewCollection all;
  try {
    all = read_reviews(a.corpus);
  } catch (const gcn::EmptyCollectionError&) {
    fail(2, a.corpus + ": no reviews");
  }
  auto core = gcn::kcore_prune(all, a.k);
  if (core.empty()) fail(3, "k-core at k=" + std::to_string(a.k) + " is empty");
  auto [train, test] = gcn::holdout_split(core, a.test_fraction, a.seed);
  const auto vocab = gcn::build_vocabulary(train);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  gcn::save_reviews(train, dir / "train.jsonl");
  gcn::save_reviews(test, dir / "test.jsonl");
  gcn::io::write_atomic(dir / "vocab.txt", gcn::serialize_vocabulary(vocab));
  std::cout << "users=" << core.user_index().size() << "\n"
            << "items=" << core.item_index().size() << "\n"
            << "reviews=" << core.size() << "\n"
            << "train=" << train.size() << "\n"
            << "test=" << test.size() << "\n"
            << "vocabulary=" << vocab.size() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string prepared, out;
  std::string aux = "none";
  int hidden = 64, layers = 2;
  std::size_t streams = 256, seg_len = 200, steps = 1000;
  std::uint64_t seed = 0;
  double lr = 2e-3, clip = 5.0;
  double rating_lo = 0.0, rating_hi = 5.0;
  std::size_t eval_every = 0, patience = 0;
  std::optional<std::string> from_checkpoint, transplant, log_path;
};

std::string format_loss(double v) { return gcn::format_fixed(v, 6); }

int run_train(TrainArgs a, const CLI::App& cmd) {
  if (a.from_checkpoint && a.transplant) fail(1, "--from-checkpoint and --transplant are exclusive");
  const fs::path dir(a.prepared);
  auto train_set = read_reviews(dir / "train.jsonl");
  gcn::Vocabulary vocab;
  if (!fs::exists(dir / "vocab.txt")) fail(2, "no such file: " + (dir / "vocab.txt").string());
  try {
    vocab = gcn::parse_vocabulary(gcn::io::read_file(dir / "vocab.txt"));
  } catch (const gcn::ParseError& e) {
    fail(2, (dir / "vocab.txt").string() + ": " + e.what());
  }
  std::optional<gcn::ReviewCollection> heldout;
  if (fs::exists(dir / "test.jsonl")) {
    try {
      heldout = gcn::load_reviews(dir / "test.jsonl");
    } catch (const gcn::EmptyCollectionError&) {
    }
  }

  auto build_schema = [&] {
    std::vector<gcn::SlotKind> kinds;
    try {
      kinds = gcn::slot_kinds_from_name(a.aux);
    } catch (const gcn::ArgumentError& e) {
      fail(1, e.what());
    }
    auto schema = gcn::schema_from_collection(train_set, kinds);
    std::vector<gcn::AuxSlot> slots = schema.slots();
    for (auto& s : slots)
      if (s.kind == gcn::SlotKind::Rating) {
        s.rating_lo = a.rating_lo;
        s.rating_hi = a.rating_hi;
      }
    return gcn::AuxSchema(std::move(slots));
  };

  gcn::ModelParameters<float> model;
  gcn::AuxSchema schema;
  std::uint64_t prior_steps = 0;
  if (a.from_checkpoint) {
    auto ck = read_checkpoint(*a.from_checkpoint);
    if (!(ck.vocab == vocab)) fail(6, "checkpoint vocabulary differs from the prepared vocabulary");
    if (cmd.count("--aux") && !(build_schema() == ck.schema)) fail(6, "--aux disagrees with the checkpoint schema");
    model = std::move(ck.model);
    schema = std::move(ck.schema);
    prior_steps = ck.meta.steps;
  } else if (a.transplant) {
    auto src = read_checkpoint(*a.transplant);
    if (src.model.config.aux_dim != 0)
      fail(5, "transplant source is conditioned (aux dim " + std::to_string(src.model.config.aux_dim) + ")");
    if (!(src.vocab == vocab)) fail(6, "transplant source vocabulary differs from the prepared vocabulary");
    schema = build_schema();
    model = gcn::transplant(src.model, schema);
  } else {
    schema = build_schema();
    model = gcn::init_model<float>(vocab, schema, a.hidden, a.layers, a.seed);
  }

  // Held-out reviews whose labels the schema cannot encode are left out.
  gcn::ReviewCollection heldout_ok;
  if (heldout) {
    std::vector<gcn::ReviewRecord> keep;
    for (const auto& r : heldout->records()) {
      try {
        gcn::encode_aux(gcn::AuxFields::of(r), schema);
        keep.push_back(r);
      } catch (const gcn::EncodingError&) {
      }
    }
    if (!keep.empty()) heldout_ok = gcn::ReviewCollection::from_records(std::move(keep));
  }
  if (a.eval_every && heldout_ok.empty()) fail(7, "--eval-every needs a non-empty test.jsonl");

  gcn::TrainingConfig cfg;
  cfg.max_steps = a.steps;
  cfg.stream_count = a.streams;
  cfg.segment_length = a.seg_len;
  cfg.clip = a.clip;
  cfg.optimizer.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.eval_every = a.eval_every;
  cfg.patience = a.patience;

  std::string log = "kind\tstep\tvalue\n";
  gcn::TrainingLog result;
  try {
    auto stream = gcn::BatchStream::assemble(train_set, vocab, schema, a.streams, a.seg_len, a.seed);
    result = gcn::train(
        model, stream, cfg, &heldout_ok, &vocab, &schema,
        [&](const gcn::StepRecord& r) { log += "train\t" + std::to_string(r.step) + "\t" + format_loss(r.loss) + "\n"; },
        [&](const gcn::EvalRecord& r) {
          log += "heldout\t" + std::to_string(r.step) + "\t" + format_loss(r.heldout_nll) + "\n";
          std::cerr << "step " << r.step << " heldout_nll " << format_loss(r.heldout_nll) << "\n";
        });
  } catch (const gcn::NonFiniteLossError& e) {
    gcn::io::write_atomic(a.log_path.value_or(a.out + ".log"), log);
    fail(4, e.what());
  }

  gcn::Checkpoint ck{std::move(model), vocab, schema, {}};
  ck.meta.seed = a.seed;
  ck.meta.steps = prior_steps + result.steps.size();
  ck.meta.extra["aux"] = a.aux;
  ck.meta.extra["streams"] = a.streams;
  ck.meta.extra["segment_length"] = a.seg_len;
  ck.meta.extra["learning_rate"] = a.lr;
  ck.meta.extra["stopped_early"] = result.stopped_early;
  if (a.transplant) ck.meta.extra["transplanted_from"] = fs::path(*a.transplant).filename().string();
  gcn::save_checkpoint(ck, a.out);
  gcn::io::write_atomic(a.log_path.value_or(a.out + ".log"), log);
  std::cout << "steps=" << result.steps.size() << "\n";
  if (!result.steps.empty()) {
    std::cout << "first_loss=" << format_loss(result.steps.front().loss) << "\n";
    std::cout << "last_loss=" << format_loss(result.steps.back().loss) << "\n";
  }
  if (!result.evals.empty()) std::cout << "heldout_nll=" << format_loss(result.evals.back().heldout_nll) << "\n";
  std::cout << "parameters=" << ck.model.parameter_count() << "\n";
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  std::string checkpoint;
  Conditioning cond;
  double temperature = 1.0;
  std::size_t max_len = 2000, count = 1;
  std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& a) {
  auto ck = read_checkpoint(a.checkpoint);
  check_conditioning(a.cond, ck.schema);
  const auto aux = encode_or_fail(a.cond.fields(), ck.schema);
  gcn::GenerationConfig cfg;
  cfg.temperature = a.temperature;
  cfg.max_length = a.max_len;
  const auto seeds = sub_seeds(a.seed, a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    cfg.seed = seeds[i];
    auto r = gcn::generate(ck.model, ck.vocab, aux, cfg);
    if (i) std::cout << "\n";
    std::cout << r.text << "\n";
  }
  return 0;
}

// ---- classify / trace ----

struct ClassifyArgs {
  std::string checkpoint, task = "category";
  std::optional<std::string> text, file, priors_from;
  Conditioning cond;
};

int run_classify(const ClassifyArgs& a) {
  auto ck = read_checkpoint(a.checkpoint);
  const std::string text = read_text(a.text, a.file);
  const auto kind = task_slot(a.task);
  check_conditioning(a.cond, ck.schema, kind);

  if (kind == gcn::SlotKind::Rating) {
    if (!ck.schema.find(gcn::SlotKind::Rating)) fail(6, "checkpoint has no rating slot");
    const auto grid = gcn::default_rating_grid();
    const auto curve = gcn::rating_likelihood_curve(ck.model, ck.vocab, ck.schema, grid, text, a.cond.fields());
    if (a.task == "rating-grid") {
      std::cout << "rating\tloglik\n";
      for (std::size_t i = 0; i < grid.size(); ++i)
        std::cout << gcn::format_fixed(grid[i], 1) << "\t" << gcn::format_number(curve[i]) << "\n";
    } else {
      const double s = gcn::sentiment_score(grid, curve);
      std::cout << "sentiment_score=" << gcn::format_number(s) << "\n"
                << "label=" << (s > 0 ? "positive" : "negative") << "\n";
    }
    return 0;
  }

  gcn::ClassificationRequest req;
  req.candidates = label_candidates(ck.schema, kind, a.cond.fields());
  req.text = text;
  const auto& labels = ck.schema.find(kind)->labels;
  if (a.priors_from) req.priors = priors_from(*a.priors_from, *ck.schema.find(kind));
  const auto r = gcn::classify(req, ck.model, ck.vocab);
  std::vector<double> scores(labels.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = r.log_posteriors[i];
  std::cout << "rank\tlabel\tloglik\tposterior\n";
  std::size_t rank = 1;
  for (std::size_t i : gcn::rank_candidates(scores))
    std::cout << rank++ << "\t" << escape_cell(labels[i]) << "\t" << gcn::format_number(r.log_likelihoods[i]) << "\t"
              << gcn::format_number(std::exp(r.log_posteriors[i])) << "\n";
  return 0;
}

int run_trace(const ClassifyArgs& a) {
  auto ck = read_checkpoint(a.checkpoint);
  const std::string text = read_text(a.text, a.file);
  const auto kind = task_slot(a.task);
  check_conditioning(a.cond, ck.schema, kind);
  const auto chars = gcn::utf8::decode(text);
  auto char_cell = [&](std::size_t t) {
    return t == 0 ? std::string() : escape_cell(gcn::utf8::encode(chars.substr(t - 1, 1)));
  };

  if (kind == gcn::SlotKind::Rating) {
    if (!ck.schema.find(gcn::SlotKind::Rating)) fail(6, "checkpoint has no rating slot");
    const auto trace =
        gcn::rating_grid_argmax_trace(ck.model, ck.vocab, ck.schema, gcn::default_rating_grid(), text, a.cond.fields());
    std::cout << "t\tchar\targmax_rating\n";
    for (std::size_t t = 0; t < trace.size(); ++t)
      std::cout << t << "\t" << char_cell(t) << "\t" << gcn::format_fixed(trace[t], 1) << "\n";
    return 0;
  }

  gcn::ClassificationRequest req;
  req.candidates = label_candidates(ck.schema, kind, a.cond.fields());
  req.text = text;
  if (a.priors_from) req.priors = priors_from(*a.priors_from, *ck.schema.find(kind));
  const auto tm = gcn::prefix_posterior_trace(req, ck.model, ck.vocab);
  std::cout << "t\tchar";
  for (const auto& l : ck.schema.find(kind)->labels) std::cout << "\t" << escape_cell(l);
  std::cout << "\n";
  for (std::size_t t = 0; t < tm.rows.size(); ++t) {
    std::cout << t << "\t" << char_cell(t);
    for (double v : tm.rows[t]) std::cout << "\t" << gcn::format_number(v);
    std::cout << "\n";
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string checkpoint, testset, task = "perplexity";
  std::optional<std::string> report;
  std::optional<std::string> priors_from;
};

int run_evaluate(const EvaluateArgs& a) {
  auto ck = read_checkpoint(a.checkpoint);
  fs::path test_path(a.testset);
  if (fs::is_directory(test_path)) test_path /= "test.jsonl";
  gcn::ReviewCollection test;
  try {
    test = read_reviews(test_path);
  } catch (const gcn::EmptyCollectionError&) {
    fail(7, test_path.string() + ": test set is empty");
  }

  gcn::MetricsReport rep;
  rep.task = a.task;
  // Reviews whose own labels fall outside the schema cannot be scored.
  std::vector<const gcn::ReviewRecord*> usable;
  for (const auto& r : test.records()) {
    try {
      gcn::encode_aux(gcn::AuxFields::of(r), ck.schema);
      usable.push_back(&r);
    } catch (const gcn::EncodingError&) {
      ++rep.skipped_cases;
    }
  }

  if (a.task == "perplexity") {
    std::vector<gcn::ReviewRecord> keep;
    for (const auto* r : usable)
      if (!r->text.empty()) keep.push_back(*r);
    rep.skipped_cases += usable.size() - keep.size();
    if (keep.empty()) fail(7, "no scorable reviews in the test set");
    auto s = gcn::perplexity_summary(ck.model, ck.vocab, gcn::ReviewCollection::from_records(keep), ck.schema);
    rep.cases = keep.size();
    rep.mean_perplexity = s.mean;
    rep.median_perplexity = s.median;
  } else if (a.task == "sentiment") {
    if (!ck.schema.find(gcn::SlotKind::Rating)) fail(6, "checkpoint has no rating slot");
    std::vector<double> scores;
    std::vector<int> labels;
    const auto grid = gcn::default_rating_grid();
    for (const auto* r : usable) {
      if (r->rating > 2.0 + 1e-9 && r->rating < 4.0 - 1e-9) {
        ++rep.skipped_cases;
        continue;
      }
      auto fixed = gcn::AuxFields::of(*r);
      const auto curve = gcn::rating_likelihood_curve(ck.model, ck.vocab, ck.schema, grid, r->text, fixed);
      scores.push_back(gcn::sentiment_score(grid, curve));
      labels.push_back(r->rating >= 4.0 - 1e-9);
    }
    if (scores.empty()) fail(7, "no positive or negative reviews in the test set");
    std::vector<int> pred;
    for (double s : scores) pred.push_back(s > 0);
    auto conf = gcn::accuracy_confusion(pred, labels, 2);
    rep.cases = scores.size();
    rep.accuracy = conf.accuracy;
    rep.labels = {"negative", "positive"};
    rep.confusion = conf.confusion;
    try {
      rep.auc = gcn::binary_auc(scores, labels);
      rep.auc_definition = "binary";
    } catch (const gcn::UndefinedMetricError&) {
    }
  } else if (a.task == "category" || a.task == "author" || a.task == "item") {
    const auto kind = task_slot(a.task);
    const auto* slot = ck.schema.find(kind);
    if (!slot) fail(6, std::string("checkpoint has no ") + gcn::slot_name(kind) + " slot");
    std::vector<double> priors;
    if (a.priors_from) priors = priors_from(*a.priors_from, *slot);
    std::vector<std::vector<double>> score_rows;
    std::vector<int> truths, pred;
    for (const auto* r : usable) {
      gcn::AuxFields fixed = gcn::AuxFields::of(*r);
      if (kind == gcn::SlotKind::Category) fixed.category.reset();
      else if (kind == gcn::SlotKind::User) fixed.user.reset();
      else fixed.item.reset();
      gcn::ClassificationRequest req{label_candidates(ck.schema, kind, fixed), priors, r->text};
      const auto res = gcn::classify(req, ck.model, ck.vocab);
      score_rows.push_back(res.log_posteriors);
      const std::string& truth = kind == gcn::SlotKind::Category ? r->category
                                 : kind == gcn::SlotKind::User   ? r->user_id
                                                                 : r->item_id;
      truths.push_back(slot->label_index(truth));
      pred.push_back(static_cast<int>(res.argmax_index));
    }
    if (truths.empty()) fail(7, "no scorable reviews in the test set");
    const int C = static_cast<int>(slot->labels.size());
    auto conf = gcn::accuracy_confusion(pred, truths, C);
    rep.cases = truths.size();
    rep.accuracy = conf.accuracy;
    if (kind == gcn::SlotKind::Category) {
      rep.labels = slot->labels;
      rep.confusion = conf.confusion;
    } else {
      rep.recall_at_10pct = gcn::recall_at_fraction(score_rows, truths, 0.1);
    }
    if (C >= 2) {
      try {
        auto m = gcn::multiclass_auc(score_rows, truths);
        rep.auc = m.auc;
        rep.auc_skipped_classes = m.skipped_classes;
        rep.auc_definition = "macro one-vs-rest";
      } catch (const gcn::UndefinedMetricError&) {
      }
    }
  } else {
    fail(1, "unknown task '" + a.task + "'");
  }

  std::cout << rep.to_text();
  if (a.report) gcn::io::write_atomic(*a.report, rep.to_json().dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character-level review model conditioned on auxiliary metadata"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "k-core filter, split and build the vocabulary");
  p->add_option("corpus", prep.corpus, "reviews, one JSON object per line")->required();
  p->add_option("out_dir", prep.out_dir, "output directory")->required();
  p->add_option("--k", prep.k, "minimum reviews per user and per item")->capture_default_str();
  p->add_option("--test-fraction", prep.test_fraction, "held-out share")->capture_default_str();
  p->add_option("--seed", prep.seed)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on a prepared directory");
  t->add_option("prepared", tr.prepared, "directory written by prepare")->required();
  t->add_option("out", tr.out, "checkpoint path")->required();
  t->add_option("--aux", tr.aux, "rating|category|user|item|user-item|none")->capture_default_str();
  t->add_option("--hidden", tr.hidden)->capture_default_str();
  t->add_option("--layers", tr.layers)->capture_default_str();
  t->add_option("--streams", tr.streams)->capture_default_str();
  t->add_option("--seg-len", tr.seg_len)->capture_default_str();
  t->add_option("--steps", tr.steps)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--clip", tr.clip)->capture_default_str();
  t->add_option("--rating-lo", tr.rating_lo, "star value mapped to -1")->capture_default_str();
  t->add_option("--rating-hi", tr.rating_hi, "star value mapped to +1")->capture_default_str();
  t->add_option("--eval-every", tr.eval_every, "held-out NLL cadence in steps, 0 = off")->capture_default_str();
  t->add_option("--patience", tr.patience, "evaluations without improvement before stopping, 0 = off")
      ->capture_default_str();
  t->add_option("--from-checkpoint", tr.from_checkpoint, "continue from these weights");
  t->add_option("--transplant", tr.transplant, "widen an unconditioned checkpoint to --aux");
  t->add_option("--log", tr.log_path, "training log path (default: <out>.log)");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "sample reviews");
  g->add_option("checkpoint", gen.checkpoint)->required();
  gen.cond.add_flags(g);
  g->add_option("--temperature", gen.temperature)->capture_default_str();
  g->add_option("--max-len", gen.max_len)->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--count", gen.count)->capture_default_str();

  ClassifyArgs cls;
  auto* c = app.add_subcommand("classify", "rank candidate labels for a text");
  c->add_option("checkpoint", cls.checkpoint)->required();
  c->add_option("--task", cls.task, "author|item|category|sentiment|rating-grid")->capture_default_str();
  c->add_option("--text", cls.text);
  c->add_option("--file", cls.file);
  c->add_option("--priors-from", cls.priors_from, "reviews whose label frequencies become the prior");
  cls.cond.add_flags(c);

  ClassifyArgs trc;
  auto* tc = app.add_subcommand("trace", "posterior after every prefix");
  tc->add_option("checkpoint", trc.checkpoint)->required();
  tc->add_option("--task", trc.task, "category|rating|author|item")->capture_default_str();
  tc->add_option("--text", trc.text);
  tc->add_option("--file", trc.file);
  tc->add_option("--priors-from", trc.priors_from);
  trc.cond.add_flags(tc);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "metrics over a test set");
  e->add_option("checkpoint", ev.checkpoint)->required();
  e->add_option("testset", ev.testset, "test JSONL or prepared directory")->required();
  e->add_option("--task", ev.task, "perplexity|category|sentiment|author|item")->capture_default_str();
  e->add_option("--report", ev.report, "write the report as JSON");
  e->add_option("--priors-from", ev.priors_from);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*p) return run_prepare(prep);
    if (*t) return run_train(tr, *t);
    if (*g) return run_generate(gen);
    if (*c) return run_classify(cls);
    if (*tc) return run_trace(trc);
    if (*e) return run_evaluate(ev);
  } catch (const ExitError& err) {
    std::cerr << "gcn: " << err.what() << "\n";
    return err.code;
  } catch (const gcn::EmptyCollectionError& err) {
    std::cerr << "gcn: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "gcn: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
