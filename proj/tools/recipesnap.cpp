// recipesnap: build recipe libraries, train the projection encoder, query and
// evaluate. Exit status: 0 ok, 1 empty/no result, 2 bad input, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "recipesnap/encoder.hpp"
#include "recipesnap/evaluation.hpp"
#include "recipesnap/library_io.hpp"
#include "recipesnap/retrieval.hpp"
#include "recipesnap/triplet.hpp"
#include "recipesnap/vector_text.hpp"

namespace fs = std::filesystem;
using namespace recipesnap;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::EmptyLibrary:
      return 1;
    case Errc::NonFiniteLoss:
      return 3;
    default:
      return 2;
  }
}

// Writes through a sibling temporary and renames it into place, so a failed
// write never leaves a partial target behind.
template <typename Writer>
void write_atomic(const fs::path& target, Writer&& write) {
  const fs::path tmp = fs::path(target) += ".tmp";
  try {
    write(tmp);
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error& e) {
    std::error_code ec;
    if (fs::is_regular_file(tmp, ec)) fs::remove(tmp, ec);
    throw Error(Errc::IoError, e.what());
  } catch (...) {
    std::error_code ec;
    if (fs::is_regular_file(tmp, ec)) fs::remove(tmp, ec);
    throw;
  }
}

struct LibraryPaths {
  std::string emb;
  std::string rec;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--emb", emb, "Embedding matrix (.rsnp)")->required();
    cmd->add_option("--rec", rec, "Recipe dictionary (.jsonl)")->required();
  }
};

// Targets for each feature row: by id when the file carries ids, else by row.
MatrixD targets_for(const RecipeLibrary& lib, const VectorText& text, std::vector<std::string>* ids_out) {
  const std::size_t m = text.rows.rows();
  MatrixD targets(m, lib.dim());
  std::vector<std::string> ids;
  if (text.ids.empty()) {
    if (m != lib.size())
      throw Error(Errc::DimensionMismatch, "feature file has " + std::to_string(m) + " rows without ids, library has " +
                                               std::to_string(lib.size()));
    ids = lib.ids();
  } else {
    ids = text.ids;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = lib.row_of(ids[i]);
    if (!row) throw Error(Errc::MissingTrueId, ids[i]);
    const auto src = lib.row(*row);
    for (std::size_t d = 0; d < lib.dim(); ++d) targets(i, d) = src[d];
  }
  if (ids_out != nullptr) *ids_out = std::move(ids);
  return targets;
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  throw Error(Errc::InvalidConfig, "unknown activation '" + name + "'");
}

NegativeStrategy parse_negatives(const std::string& name) {
  if (name == "all") return NegativeStrategy::InBatchAll;
  if (name == "random") return NegativeStrategy::InBatchRandom;
  throw Error(Errc::InvalidConfig, "unknown negative strategy '" + name + "'");
}

// First vector of a text file, or first row of an .rsnp file.
std::vector<double> first_vector(const std::string& path) {
  if (fs::path(path).extension() == ".rsnp") {
    const auto file = read_embedding_file(path);
    if (file.ids.empty()) throw Error(Errc::EmptyInput, path + ": no rows");
    const auto row = file.row(0);
    return {row.begin(), row.end()};
  }
  const auto text = read_vector_text(path);
  if (text.rows.empty()) throw Error(Errc::EmptyInput, path + ": no vectors");
  const auto row = text.rows.row(0);
  return {row.begin(), row.end()};
}

struct EmbeddingSource {
  std::string embedding;
  std::string features;
  std::string params;

  void add_to(CLI::App* cmd, const char* what) {
    auto* emb = cmd->add_option("--embedding", embedding, std::string("Raw ") + what + " embedding (text or .rsnp)");
    auto* feat = cmd->add_option("--features", features, "Feature vector file, encoded with --params");
    cmd->add_option("--params", params, "Encoder parameters (.rspe)");
    emb->excludes(feat);
  }

  Embedding resolve() const {
    if (!embedding.empty()) return Embedding(first_vector(embedding));
    if (features.empty()) throw Error(Errc::InvalidConfig, "one of --embedding or --features is required");
    if (params.empty()) throw Error(Errc::InvalidConfig, "--features needs --params");
    const auto encoder = load_params(params);
    const auto x = first_vector(features);
    return encode(encoder, x);
  }
};

// ---------------------------------------------------------------- build

struct BuildArgs {
  std::string recipes;
  std::string embeddings;
  std::size_t synthetic_count = 0;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t feature_dim = kDefaultEmbeddingDim;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string features_out;
  std::string out_emb;
  std::string out_rec;
};

int run_build(const BuildArgs& a) {
  RecipeLibrary lib(1);
  if (a.synthetic_count > 0) {
    const auto data = generate_synthetic_pairs(a.synthetic_count, a.feature_dim, a.dim, a.noise, a.seed);
    lib = RecipeLibrary(a.dim);
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      RecipeRecord r;
      r.id = data.ids[i];
      r.title = "Synthetic recipe " + std::to_string(i);
      lib.add_entry(std::move(r), Embedding(data.targets.row(i)));
    }
    if (!a.features_out.empty())
      write_atomic(a.features_out, [&](const fs::path& p) { write_vector_text(p, data.features, data.ids); });
  } else {
    if (a.recipes.empty() || a.embeddings.empty())
      throw Error(Errc::InvalidConfig, "build needs --recipes and --embeddings, or --synthetic-count");
    try {
      lib = assemble_library(read_embedding_file(a.embeddings), read_records(a.recipes));
    } catch (const Error& e) {
      if (e.code() != Errc::ConsistencyError) throw;
      throw Error(e.code(), a.embeddings + " vs " + a.recipes + ": " + e.what());
    }
  }
  save_atomic(lib, a.out_emb, a.out_rec);
  std::cout << "N=" << lib.size() << " D=" << lib.dim() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  LibraryPaths lib;
  std::string features;
  std::string params_out;
  std::string trace_out;
  std::string init_params;
  std::string activation = "identity";
  std::string negatives = "all";
  TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  const auto lib = load(a.lib.emb, a.lib.rec);
  const auto text = read_vector_text(a.features);
  if (text.rows.rows() < 2) throw Error(Errc::BatchTooSmall, a.features + ": need at least 2 feature rows");
  const MatrixD targets = targets_for(lib, text, nullptr);

  TrainConfig cfg = a.cfg;
  cfg.negative_strategy = parse_negatives(a.negatives);
  cfg.validate();

  EncoderParams params = a.init_params.empty()
                             ? init_params(text.rows.cols(), lib.dim(), cfg.seed, parse_activation(a.activation))
                             : load_params(a.init_params);
  if (params.feature_dim() != text.rows.cols() || params.embedding_dim() != lib.dim())
    throw Error(Errc::DimensionMismatch, "initial parameters do not match feature/library dimensions");

  auto result = train(std::move(params), text.rows, targets, cfg);
  round_to_storage(result.params);
  write_atomic(a.params_out, [&](const fs::path& p) { save_params(result.params, p); });
  if (!a.trace_out.empty())
    write_atomic(a.trace_out, [&](const fs::path& p) { write_loss_trace(p, result.loss_trace); });

  std::printf("initial_loss=%.6f final_loss=%.6f epochs=%zu\n", result.loss_trace.front(), result.loss_trace.back(),
              cfg.epochs);
  return 0;
}

// ---------------------------------------------------------------- query

struct QueryArgs {
  LibraryPaths lib;
  EmbeddingSource source;
  std::size_t k = 5;
  bool json = false;
};

int run_query(const QueryArgs& a) {
  const auto lib = load(a.lib.emb, a.lib.rec);
  if (lib.empty()) throw Error(Errc::EmptyLibrary, "library " + a.lib.emb + " has no rows");
  const auto result = query_topk(lib, a.source.resolve(), a.k);
  if (a.json) {
    nlohmann::json out;
    out["k"] = result.k;
    out["results"] = nlohmann::json::array();
    std::size_t rank = 1;
    for (const auto& hit : result.ranked)
      out["results"].push_back({{"rank", rank++},
                                {"id", hit.id},
                                {"similarity", hit.similarity},
                                {"title", lib.get_recipe(hit.id).title}});
    std::cout << out.dump(2) << "\n";
  } else {
    std::size_t rank = 1;
    for (const auto& hit : result.ranked)
      std::printf("%zu\t%s\t%.4f\t%s\n", rank++, hit.id.c_str(), hit.similarity,
                  lib.get_recipe(hit.id).title.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  LibraryPaths lib;
  std::string pairs;
  std::string params;
  std::string json_out;
  bool json = false;
  EvalConfig cfg;
};

int run_eval(const EvalArgs& a) {
  const auto lib = load(a.lib.emb, a.lib.rec);
  if (lib.empty()) throw Error(Errc::EmptyLibrary, "library " + a.lib.emb + " has no rows");
  const auto text = read_vector_text(a.pairs);
  if (text.rows.empty()) throw Error(Errc::EmptyInput, a.pairs + ": no query vectors");

  QuerySet queries;
  queries.true_ids = text.ids.empty() ? lib.ids() : text.ids;
  if (queries.true_ids.size() != text.rows.rows())
    throw Error(Errc::DimensionMismatch, a.pairs + " has no ids and its row count differs from the library");
  queries.embeddings = a.params.empty() ? text.rows : encode_batch(load_params(a.params), text.rows);

  const auto report = evaluate(queries, lib, a.cfg);
  const std::string json = report_to_json(report);
  if (!a.json_out.empty()) write_atomic(a.json_out, [&](const fs::path& p) {
      std::ofstream out(p, std::ios::binary);
      out << json << "\n";
      if (!out) throw Error(Errc::IoError, "write failed: " + p.string());
    });
  std::cout << (a.json ? json + "\n" : report_to_table(report));
  return 0;
}

// ---------------------------------------------------------------- add

struct AddArgs {
  LibraryPaths lib;
  std::string recipe;
  EmbeddingSource source;
};

int run_add(const AddArgs& a) {
  auto lib = load(a.lib.emb, a.lib.rec);
  std::ifstream in(a.recipe);
  if (!in) throw Error(Errc::IoError, "cannot open " + a.recipe);
  std::stringstream text;
  text << in.rdbuf();
  auto record = record_from_json(text.str(), a.recipe);
  const std::string id = record.id;
  lib.add_entry(std::move(record), a.source.resolve());
  save_atomic(lib, a.lib.emb, a.lib.rec);
  std::cout << "added " << id << " N=" << lib.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal recipe retrieval: library building, encoder training, query and evaluation"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Build a recipe library from files or synthetic data");
  build_cmd->add_option("--recipes", build.recipes, "Recipe dictionary (.jsonl)");
  build_cmd->add_option("--embeddings", build.embeddings, "Embedding matrix (.rsnp)");
  build_cmd->add_option("--synthetic-count", build.synthetic_count, "Generate this many synthetic pairs instead");
  build_cmd->add_option("--dim", build.dim, "Synthetic embedding dimension")->capture_default_str();
  build_cmd->add_option("--feature-dim", build.feature_dim, "Synthetic feature dimension")->capture_default_str();
  build_cmd->add_option("--noise", build.noise, "Synthetic feature noise sigma")->capture_default_str();
  build_cmd->add_option("--seed", build.seed, "Synthetic generator seed")->capture_default_str();
  build_cmd->add_option("--features-out", build.features_out, "Write synthetic features (with ids) here");
  build_cmd->add_option("--out-emb", build.out_emb, "Output embedding matrix")->required();
  build_cmd->add_option("--out-rec", build.out_rec, "Output recipe dictionary")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the projection encoder against library embeddings");
  train_args.lib.add_to(train_cmd);
  train_cmd->add_option("--features", train_args.features, "Feature vectors, optionally prefixed by ids")->required();
  train_cmd->add_option("--params-out", train_args.params_out, "Trained parameters (.rspe)")->required();
  train_cmd->add_option("--trace-out", train_args.trace_out, "Loss trace CSV");
  train_cmd->add_option("--init-params", train_args.init_params, "Start from these parameters");
  train_cmd->add_option("--activation", train_args.activation, "identity or tanh")->capture_default_str();
  train_cmd->add_option("--negatives", train_args.negatives, "all or random")->capture_default_str();
  train_cmd->add_option("--epochs", train_args.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train_args.cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", train_args.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--margin", train_args.cfg.margin)->capture_default_str();
  train_cmd->add_option("--seed", train_args.cfg.seed)->capture_default_str();

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Top-k recipes for a query embedding or feature vector");
  query.lib.add_to(query_cmd);
  query.source.add_to(query_cmd, "query");
  query_cmd->add_option("-k,--k", query.k, "Number of results")->capture_default_str();
  query_cmd->add_flag("--json", query.json, "Machine-readable output");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "MedR and Recall@K under pooled sampling");
  eval.lib.add_to(eval_cmd);
  eval_cmd->add_option("--pairs", eval.pairs, "Query vectors prefixed by their true ids")->required();
  eval_cmd->add_option("--params", eval.params, "Encode the query vectors with these parameters first");
  eval_cmd->add_option("--pool-size", eval.cfg.pool_size)->capture_default_str();
  eval_cmd->add_option("--repetitions", eval.cfg.repetitions)->capture_default_str();
  eval_cmd->add_option("--ks", eval.cfg.ks, "Recall cutoffs")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--seed", eval.cfg.seed)->capture_default_str();
  eval_cmd->add_option("--json-out", eval.json_out, "Write the report JSON here");
  eval_cmd->add_flag("--json", eval.json, "Print JSON instead of the table");

  AddArgs add;
  auto* add_cmd = app.add_subcommand("add", "Append one recipe to a library in place");
  add.lib.add_to(add_cmd);
  add_cmd->add_option("--recipe", add.recipe, "Recipe JSON object")->required();
  add.source.add_to(add_cmd, "recipe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*build_cmd) return run_build(build);
    if (*train_cmd) return run_train(train_args);
    if (*query_cmd) return run_query(query);
    if (*eval_cmd) return run_eval(eval);
    if (*add_cmd) return run_add(add);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
