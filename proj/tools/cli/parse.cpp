#include <filesystem>
#include <sstream>

#include "CLI11.hpp"
#include "plan.hpp"

namespace seglens::cli {

namespace fs = std::filesystem;

const char* to_string(Subcommand s) {
  switch (s) {
    case Subcommand::kStats: return "stats";
    case Subcommand::kMorph: return "morph";
    case Subcommand::kSim: return "sim";
    case Subcommand::kScore: return "score";
    case Subcommand::kTtest: return "ttest";
    case Subcommand::kFolds: return "folds";
    case Subcommand::kTrain: return "train";
    case Subcommand::kDecode: return "decode";
    case Subcommand::kGradcheck: return "gradcheck";
  }
  return "?";
}

namespace {

void add_out(CLI::App* app, RunPlan& p) {
  app->add_option("--out", p.out, "Output directory (created if missing)")->required();
  app->add_option("--seed", p.seed, "Seed for every random choice")->capture_default_str();
}

CLI::Option* add_corpus(CLI::App* app, RunPlan& p) {
  return app->add_option("--corpus", p.corpus, "Corpus JSON")->required()->check(CLI::ExistingFile);
}

void add_tokenizer(CLI::App* app, RunPlan& p) {
  auto* vocab = app->add_option("--vocab", p.tokenizer.vocab, "WordPiece vocabulary, one piece per line")
                    ->check(CLI::ExistingFile);
  auto* ext = app->add_option("--tokenization", p.tokenizer.tokenization,
                              "Pre-tokenized subwords (JSON, per sentence id)")
                  ->check(CLI::ExistingFile);
  vocab->excludes(ext);
  ext->excludes(vocab);
  app->add_option("--tokenizer-casing", p.tokenizer.casing, "Normalization before vocabulary lookup")
      ->check(CLI::IsMember({"cased", "uncased"}))
      ->capture_default_str();
  app->add_option("--tokenizer-name", p.tokenizer.name, "Label used in reports");
}

void add_specials(CLI::App* app, RunPlan& p) {
  app->add_option("--leading-specials", p.tokenizer.leading_specials,
                  "Special rows before the first word in subword tables")
      ->capture_default_str();
  app->add_option("--trailing-specials", p.tokenizer.trailing_specials,
                  "Special rows after the last word in subword tables")
      ->capture_default_str();
}

void add_folds(CLI::App* app, RunPlan& p) {
  app->add_option("--k", p.folds.k, "Number of folds")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--dev-fraction", p.folds.dev_fraction, "Share of each training portion held out")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  app->add_option("--fold-file", p.folds.fold_files,
                  "Test positions of one fold (JSON array); repeat once per fold")
      ->check(CLI::ExistingFile);
}

void add_casing(CLI::App* app, RunPlan& p) {
  app->add_option("--casing", p.casing, "Word keying for the analysis")
      ->check(CLI::IsMember({"cased", "uncased"}))
      ->capture_default_str();
}

}  // namespace

std::variant<RunPlan, ParseExit> parse_args(const std::vector<std::string>& argv) {
  RunPlan p;
  p.argv = argv;

  CLI::App app{"Subword segmentation analyses and a small joint entity/relation tagger", "seglens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SEGLENS_VERSION);

  auto* stats = app.add_subcommand("stats", "Length statistics before and after tokenization");
  add_corpus(stats, p);
  add_tokenizer(stats, p);
  add_casing(stats, p);
  add_out(stats, p);

  auto* morph = app.add_subcommand("morph", "Most frequent character n-grams per entity type");
  add_corpus(morph, p);
  add_casing(morph, p);
  morph->add_option("--n", p.ngram, "n-gram length")->check(CLI::PositiveNumber)->capture_default_str();
  morph->add_option("--k", p.k, "Top n-grams kept per type")->check(CLI::PositiveNumber)->capture_default_str();
  morph->add_option("--exclusion-top", p.exclusion_top, "Top Out n-grams excluded")->capture_default_str();
  morph->add_option("--thresholds", p.thresholds, "Count thresholds, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  add_out(morph, p);

  auto* folds = app.add_subcommand("folds", "Write the fold plan");
  add_corpus(folds, p);
  add_folds(folds, p);
  add_out(folds, p);

  auto* sim = app.add_subcommand("sim", "Cosine similarity of entity groups per test fold");
  add_corpus(sim, p);
  sim->add_option("--embeddings", p.embeddings, "Embeddings (JSON lines)")->required()->check(CLI::ExistingFile);
  add_tokenizer(sim, p);
  add_specials(sim, p);
  sim->add_option("--aggregation", p.aggregation, "Subword pooling for subword tables")
      ->check(CLI::IsMember({"sum", "average"}))
      ->capture_default_str();
  sim->add_option("--mode", p.similarity_mode, "Group score")
      ->check(CLI::IsMember({"pairwise", "centroid"}))
      ->capture_default_str();
  add_folds(sim, p);
  add_out(sim, p);

  auto* score = app.add_subcommand("score", "Strict NER and RE scores of prediction files");
  score->add_option("--gold", p.gold, "Gold corpus; once, or once per prediction file")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--pred", p.predictions, "Predictions in the corpus schema; one per fold")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--model", p.model_name, "Model label for the table")->capture_default_str();
  score->add_option("--aggregation", p.aggregation, "Aggregation label for the table")->capture_default_str();
  add_out(score, p);

  auto* ttest = app.add_subcommand("ttest", "Two-sided t-test of two score samples");
  ttest->add_option("--a", p.sample_a, "First sample, comma separated")->required()->delimiter(',');
  ttest->add_option("--b", p.sample_b, "Second sample, comma separated")->required()->delimiter(',');
  ttest->add_flag("--paired", p.paired, "Test paired differences instead of Welch");
  add_out(ttest, p);

  auto* train = app.add_subcommand("train", "Train the tagger");
  add_corpus(train, p);
  train->add_option("--embeddings", p.embeddings, "Embeddings (JSON lines)")->required()->check(CLI::ExistingFile);
  add_tokenizer(train, p);
  add_specials(train, p);
  train->add_option("--config", p.config, "Tagger configuration (JSON)")->check(CLI::ExistingFile);
  train->add_option("--fold", p.fold, "Train on this fold's train part and select on its dev part");
  add_folds(train, p);
  add_out(train, p);

  auto* decode = app.add_subcommand("decode", "Predict entities and relations with a trained model");
  add_corpus(decode, p);
  decode->add_option("--model", p.model, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  decode->add_option("--embeddings", p.embeddings, "Embeddings (JSON lines)")->required()->check(CLI::ExistingFile);
  add_tokenizer(decode, p);
  add_specials(decode, p);
  add_out(decode, p);

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric tagger gradients");
  add_corpus(grad, p);
  grad->add_option("--embeddings", p.embeddings, "Embeddings (JSON lines)")->required()->check(CLI::ExistingFile);
  add_tokenizer(grad, p);
  add_specials(grad, p);
  grad->add_option("--config", p.config, "Tagger configuration (JSON)")->check(CLI::ExistingFile);
  grad->add_option("--batch", p.batch, "Sentences in the batch")->check(CLI::PositiveNumber)->capture_default_str();
  grad->add_option("--coordinates", p.coordinates, "Coordinates to check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--tolerance", p.tolerance, "Largest accepted relative error")->capture_default_str();
  add_out(grad, p);

  std::vector<const char*> raw;
  raw.push_back("seglens");
  for (const auto& a : argv) raw.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    int code = app.exit(e, out, err);
    return ParseExit{code == 0 ? 0 : 2, out.str() + err.str()};
  }

  const std::pair<CLI::App*, Subcommand> table[] = {
      {stats, Subcommand::kStats}, {morph, Subcommand::kMorph},   {folds, Subcommand::kFolds},
      {sim, Subcommand::kSim},     {score, Subcommand::kScore},   {ttest, Subcommand::kTtest},
      {train, Subcommand::kTrain}, {decode, Subcommand::kDecode}, {grad, Subcommand::kGradcheck},
  };
  CLI::App* chosen = nullptr;
  for (auto [app_ptr, sub] : table) {
    if (app_ptr->parsed()) {
      chosen = app_ptr;
      p.subcommand = sub;
    }
  }

  auto usage = [&](const std::string& msg) {
    return ParseExit{2, "error: " + msg + "\n" + chosen->help()};
  };
  if (p.subcommand == Subcommand::kStats && !p.tokenizer.any()) {
    return usage("stats needs --vocab or --tokenization");
  }
  if (p.subcommand == Subcommand::kScore && p.gold.size() != 1 && p.gold.size() != p.predictions.size()) {
    return usage("--gold must be given once or once per --pred");
  }
  if (!p.folds.fold_files.empty() && chosen->count("--k") > 0 &&
      p.folds.fold_files.size() != p.folds.k) {
    return usage("--k disagrees with the number of --fold-file entries");
  }
  if (p.subcommand == Subcommand::kMorph && p.ngram == 0) return usage("--n must be positive");

  std::error_code ec;
  fs::create_directories(p.out, ec);
  if (ec || !fs::is_directory(p.out)) return usage("cannot create output directory " + p.out);
  auto probe = fs::path(p.out) / ".seglens-write-probe";
  {
    std::ofstream f(probe);
    if (!f) return usage("output directory " + p.out + " is not writable");
  }
  fs::remove(probe, ec);
  return p;
}

}  // namespace seglens::cli
