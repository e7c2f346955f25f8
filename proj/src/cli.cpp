#include "recgeo/cli.hpp"

#include "recgeo/conditioning.hpp"
#include "recgeo/error.hpp"
#include "recgeo/graph.hpp"
#include "recgeo/ingest.hpp"
#include "recgeo/manifest.hpp"
#include "recgeo/recpca.hpp"
#include "recgeo/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace recgeo {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

fs::path prepare_output_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("an output directory (-o) is required");
  fs::path path(dir);
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw Error("cannot create output directory " + dir);
  return path;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " file not found: " + path);
}

// RECPCA_THREADS caps Eigen's internal parallelism. Returns the cap applied (0 = default).
int apply_thread_cap() {
  const char* env = std::getenv("RECPCA_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  int n = 0;
  const std::string_view text(env);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc{} || ptr != text.data() + text.size() || n < 1) {
    throw UsageError("RECPCA_THREADS must be a positive integer, got '" + std::string(text) + "'");
  }
  Eigen::setNbThreads(n);
  return n;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Embedding rows beyond the graph's nodes never co-occurred; treat them as isolated.
CooccurrenceGraph pad_graph(const CooccurrenceGraph& graph, Index rows) {
  if (graph.num_nodes() == rows) return graph;
  if (graph.num_nodes() > rows) {
    throw ValidationError("graph has " + std::to_string(graph.num_nodes()) +
                          " nodes but the embedding matrix has only " + std::to_string(rows) +
                          " rows");
  }
  const auto edges = graph.edges();
  return CooccurrenceGraph::from_edges(rows, edges);
}

// ---- synth ---------------------------------------------------------------

struct SynthOptions {
  SynthConfig cfg;
  std::string out_dir;
  bool csv = false;
};

int cmd_synth(const SynthOptions& opt, std::ostream& out) {
  const fs::path dir = prepare_output_dir(opt.out_dir);
  const int threads = apply_thread_cap();
  const auto& c = opt.cfg;
  RunManifest manifest("synth", {{"items", c.num_items},
                                 {"users", c.num_users},
                                 {"clusters", c.num_clusters},
                                 {"seq_min", c.seq_len_min},
                                 {"seq_max", c.seq_len_max},
                                 {"dim", c.embed_dim},
                                 {"sigma", c.norm_scale_sigma},
                                 {"distractors", c.distractor_dims},
                                 {"jump", c.jump_prob},
                                 {"spread", c.cluster_spread},
                                 {"topics", c.distractor_topics},
                                 {"distractor_scale", c.distractor_scale},
                                 {"seed", c.seed},
                                 {"threads", threads}});
  const auto data = generate_synthetic(c);

  OutputGuard guard;
  const auto tsv = guard.track(dir / "interactions.tsv");
  const auto emb = guard.track(dir / "embeddings.emb");
  save_interactions(data.log, tsv);
  save_embeddings(data.embeddings, emb);
  manifest.add_output(tsv);
  manifest.add_output(emb);
  if (opt.csv) {
    const auto csv = guard.track(dir / "embeddings.csv");
    std::ofstream f(csv);
    write_embeddings_csv(data.embeddings, f);
    if (!f) throw Error("write failed for " + csv.string());
    manifest.add_output(csv);
  }

  // Validate what landed on disk rather than the in-memory copy.
  const auto reloaded = load_embeddings(emb);
  const auto log = load_interactions(tsv);
  const Vector norms = reloaded.row_norms();
  manifest.results() = {{"num_items", reloaded.rows()},
                        {"embed_dim", reloaded.cols()},
                        {"num_users", log.sequences.size()},
                        {"num_interactions", log.num_interactions()},
                        {"norm_max", norms.maxCoeff()},
                        {"norm_min", norms.minCoeff()},
                        {"norm_ratio", norms.maxCoeff() / norms.minCoeff()}};
  const auto manifest_path = guard.track(dir / "manifest.json");
  manifest.write(manifest_path);
  guard.commit();
  out << "wrote " << tsv.string() << ", " << emb.string() << " (norm ratio "
      << norms.maxCoeff() / norms.minCoeff() << ")\n";
  return kExitOk;
}

// ---- build-graph ---------------------------------------------------------

struct GraphOptions {
  std::string interactions;
  Index topk = 0;
  std::size_t min_count = 0;
  Index num_nodes = 0;
  std::uint64_t seed = 0;  // unused
  std::string out_dir;
};

int cmd_build_graph(const GraphOptions& opt, std::ostream& out) {
  require_file(opt.interactions, "interactions");
  const fs::path dir = prepare_output_dir(opt.out_dir);
  const int threads = apply_thread_cap();
  RunManifest manifest("build-graph", {{"interactions", opt.interactions},
                                       {"topk", opt.topk},
                                       {"min_count", opt.min_count},
                                       {"num_nodes", opt.num_nodes},
                                       {"threads", threads}});
  manifest.add_input(opt.interactions);

  auto log = load_interactions(opt.interactions);
  if (opt.min_count > 1) log = filter_min_count(log, opt.min_count);
  if (opt.num_nodes > 0) {
    if (opt.num_nodes < log.num_items) {
      throw ValidationError("--nodes " + std::to_string(opt.num_nodes) +
                            " is smaller than the largest item id + 1 (" +
                            std::to_string(log.num_items) + ")");
    }
    log.num_items = opt.num_nodes;
  }
  const auto full = build_cooccurrence(log);
  const auto graph = opt.topk > 0 ? sparsify_topk(full, opt.topk) : full;

  OutputGuard guard;
  const auto path = guard.track(dir / "graph.tsv");
  save_graph(graph, path);
  const auto reloaded = load_graph(path);
  if (reloaded.num_edges() != graph.num_edges()) throw Error("graph file failed to round-trip");
  manifest.add_output(path);
  manifest.results() = {{"nodes", graph.num_nodes()},
                        {"edges", graph.num_edges()},
                        {"edges_before_sparsify", full.num_edges()},
                        {"total_weight", graph.total_weight()}};
  manifest.write(guard.track(dir / "manifest.json"));
  guard.commit();
  out << "wrote " << path.string() << " (" << graph.num_nodes() << " nodes, " << graph.num_edges()
      << " edges)\n";
  return kExitOk;
}

// ---- recpca --------------------------------------------------------------

struct RecPcaOptions {
  std::string embeddings;
  std::string graph;
  double alpha = 0.3;
  Index dim = 0;
  std::string mode = "exact";
  bool center = false;
  std::string out_dir;
};

int cmd_recpca(const RecPcaOptions& opt, std::ostream& out) {
  if (!(opt.alpha >= 0.0 && opt.alpha <= 0.5)) {
    std::ostringstream msg;
    msg << "--alpha " << opt.alpha
        << " is outside [0, 0.5]; the principal square root of I - alpha L is only guaranteed "
           "for alpha in [0, 0.5]";
    throw UsageError(msg.str());
  }
  TransformMode mode;
  try {
    mode = parse_transform_mode(opt.mode);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  require_file(opt.embeddings, "embeddings");
  require_file(opt.graph, "graph");
  const fs::path dir = prepare_output_dir(opt.out_dir);
  const int threads = apply_thread_cap();

  RecPcaConfig cfg;
  cfg.alpha = opt.alpha;
  cfg.out_dim = opt.dim;
  cfg.mode = mode;
  cfg.center = opt.center;
  RunManifest manifest("recpca", {{"embeddings", opt.embeddings},
                                  {"graph", opt.graph},
                                  {"alpha", cfg.alpha},
                                  {"dim", cfg.out_dim},
                                  {"mode", std::string(to_string(mode))},
                                  {"center", cfg.center},
                                  {"threads", threads}});
  manifest.add_input(opt.embeddings);
  manifest.add_input(opt.graph);

  const auto x = load_embeddings(opt.embeddings);
  const auto graph = pad_graph(load_graph(opt.graph), x.rows());
  const Laplacian lap(graph);
  const auto result = fit_transform(x, lap, cfg);

  OutputGuard guard;
  const auto reduced = guard.track(dir / "reduced.emb");
  const auto projection = guard.track(dir / "projection.emb");
  const auto sidecar = guard.track(dir / "model.json");
  save_embeddings(result.embeddings, reduced);
  save_embeddings(EmbeddingMatrix(result.model.projection), projection);
  write_json(sidecar, model_sidecar(result.model));
  if (load_embeddings(reduced).rows() != x.rows()) throw Error("reduced embeddings failed to round-trip");
  manifest.add_output(reduced);
  manifest.add_output(projection);
  manifest.add_output(sidecar);

  auto& res = manifest.results();
  res["eigenvalues"] = vector_json(result.model.eigenvalues);
  res["objective"] = result.model.eigenvalues.sum();
  res["total_variation"] = total_variation(result.embeddings, lap);
  res["graph_nodes"] = graph.num_nodes();
  const Vector norms = result.embeddings.row_norms();
  res["norm_ratio"] = norms.minCoeff() > 0.0 ? json(norms.maxCoeff() / norms.minCoeff())
                                             : json("infinite");
  if (mode != TransformMode::exact) {
    if (graph.num_nodes() <= kExactSqrtMaxNodes) {
      Matrix data = x.values();
      if (cfg.center) data.rowwise() -= result.model.mean.transpose();
      const Matrix exact = sqrt_apply_exact(lap, cfg.alpha, data) * result.model.projection;
      res["frobenius_gap_vs_exact"] = (result.embeddings.values() - exact).norm();
    } else {
      res["frobenius_gap_vs_exact"] = "not-computed (graph too large for the exact root)";
    }
  }
  manifest.write(guard.track(dir / "manifest.json"));
  guard.commit();
  out << "wrote " << reduced.string() << " (" << result.embeddings.rows() << "x"
      << result.embeddings.cols() << ")\n";
  return kExitOk;
}

// ---- diagnose ------------------------------------------------------------

struct DiagnoseOptions {
  std::string embeddings;
  std::string logits_from = "file";
  std::string logits;
  std::string checkpoint;
  std::string interactions;
  Index m = 10;
  Index max_examples = 512;
  std::string out_dir;
};

struct ScoredExample {
  ItemId target = 0;
  Vector logits;
};

// Logits file: one example per line, `target<TAB>s_0,s_1,...`.
std::vector<ScoredExample> read_logits_file(const std::string& path, Index num_items) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open logits file " + path);
  std::vector<ScoredExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ": expected target<TAB>logits", line_no);
    ScoredExample ex;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + tab, ex.target);
    if (ec != std::errc{} || p != line.data() + tab) throw ParseError(path + ": bad target", line_no);
    std::vector<double> values;
    const char* cur = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (cur < end) {
      double v = 0.0;
      const auto [next, err] = std::from_chars(cur, end, v);
      if (err != std::errc{} || !std::isfinite(v)) throw ParseError(path + ": bad logit", line_no);
      values.push_back(v);
      cur = next;
      if (cur < end) {
        if (*cur != ',') throw ParseError(path + ": logits must be comma separated", line_no);
        ++cur;
      }
    }
    if (static_cast<Index>(values.size()) != num_items) {
      throw ParseError(path + ": expected " + std::to_string(num_items) + " logits, got " +
                           std::to_string(values.size()),
                       line_no);
    }
    if (ex.target < 0 || ex.target >= num_items) throw ParseError(path + ": target out of range", line_no);
    ex.logits = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw ParseError(path + ": no examples", 0);
  return out;
}

json kappa_summary(const std::vector<ConditioningReport>& reports,
                   const std::function<const std::optional<ConditionNumber>&(const ConditioningReport&)>& pick) {
  double sum = 0.0;
  std::size_t finite = 0;
  std::size_t infinite = 0;
  for (const auto& r : reports) {
    const auto& k = pick(r);
    if (!k) continue;
    if (k->finite()) {
      sum += k->value;
      ++finite;
    } else {
      ++infinite;
    }
  }
  return {{"mean_finite", finite ? json(sum / static_cast<double>(finite)) : json("not-applicable")},
          {"finite", finite},
          {"infinite", infinite}};
}

json bound_summary(const std::vector<ConditioningReport>& reports,
                   const std::function<const BoundCheck&(const ConditioningReport&)>& pick) {
  std::size_t holds = 0;
  std::size_t fails = 0;
  std::size_t na = 0;
  for (const auto& r : reports) {
    const auto& check = pick(r);
    if (!check.holds) {
      ++na;
    } else if (*check.holds) {
      ++holds;
    } else {
      ++fails;
    }
  }
  return {{"holds", holds}, {"fails", fails}, {"not_applicable", na}};
}

int cmd_diagnose(const DiagnoseOptions& opt, std::ostream& out) {
  if (opt.m < 2) throw UsageError("--m must be at least 2 (condition numbers need two effective items)");
  if (opt.logits_from != "file" && opt.logits_from != "model") {
    throw UsageError("--logits-from must be 'model' or 'file'");
  }
  const fs::path dir = prepare_output_dir(opt.out_dir);
  const int threads = apply_thread_cap();
  RunManifest manifest("diagnose", {{"embeddings", opt.embeddings},
                                    {"logits_from", opt.logits_from},
                                    {"logits", opt.logits},
                                    {"checkpoint", opt.checkpoint},
                                    {"interactions", opt.interactions},
                                    {"m", opt.m},
                                    {"max_examples", opt.max_examples},
                                    {"threads", threads}});

  Matrix embeddings;
  std::vector<ScoredExample> examples;
  if (opt.logits_from == "file") {
    if (opt.embeddings.empty() || opt.logits.empty()) {
      throw UsageError("--logits-from file needs --embeddings and --logits");
    }
    require_file(opt.embeddings, "embeddings");
    require_file(opt.logits, "logits");
    manifest.add_input(opt.embeddings);
    manifest.add_input(opt.logits);
    embeddings = load_embeddings(opt.embeddings).values();
    examples = read_logits_file(opt.logits, embeddings.rows());
  } else {
    if (opt.checkpoint.empty() || opt.interactions.empty()) {
      throw UsageError("--logits-from model needs --checkpoint and --interactions");
    }
    require_file(opt.interactions, "interactions");
    manifest.add_input(opt.interactions);
    manifest.add_input(fs::path(opt.checkpoint) / "checkpoint.json");
    const auto ck = load_checkpoint(opt.checkpoint);
    embeddings = ck.model.params.embeddings;
    if (!opt.embeddings.empty()) {
      require_file(opt.embeddings, "embeddings");
      manifest.add_input(opt.embeddings);
      embeddings = load_embeddings(opt.embeddings).values();
      if (embeddings.rows() != ck.model.num_items()) {
        throw DimensionError("--embeddings rows do not match the checkpoint's item count");
      }
    }
    const auto log = load_interactions(opt.interactions);
    if (log.num_items > ck.model.num_items()) {
      throw DimensionError("interactions reference items beyond the checkpoint's embedding table");
    }
    auto split = leave_one_out(log, 50);
    for (const auto& ex : split.valid) {
      examples.push_back({ex.target, logits(ck.model.params, encode(ck.model.params, ex.prefix),
                                            ck.normalize)});
    }
    if (examples.empty()) throw ValidationError("no evaluation examples (sequences need >= 2 items)");
  }
  if (opt.m > embeddings.rows()) {
    throw UsageError("--m " + std::to_string(opt.m) + " exceeds the number of items");
  }
  if (opt.max_examples > 0 && static_cast<Index>(examples.size()) > opt.max_examples) {
    examples.resize(static_cast<std::size_t>(opt.max_examples));
  }

  std::vector<ConditioningReport> reports;
  json per_example = json::array();
  for (const auto& ex : examples) {
    reports.push_back(analyze_example(embeddings, ex.logits, ex.target, opt.m));
    json j = to_json(reports.back());
    j["target"] = ex.target;
    per_example.push_back(std::move(j));
  }

  Vector norms = embeddings.rowwise().norm();
  std::vector<double> profile(norms.data(), norms.data() + norms.size());
  std::sort(profile.begin(), profile.end(), std::greater<>());
  double rho_sum = 0.0;
  std::size_t rho_count = 0;
  std::size_t all_hold = 0;
  for (const auto& r : reports) {
    if (r.rho) {
      rho_sum += *r.rho;
      ++rho_count;
    }
    if (r.all_hold()) ++all_hold;
  }
  const double min_norm = profile.back();
  json report = {
      {"m", opt.m},
      {"num_items", embeddings.rows()},
      {"dim", embeddings.cols()},
      {"norm_profile", profile},
      {"norm_ratio", min_norm > 0.0 ? json(profile.front() / min_norm) : json("infinite")},
      {"summary",
       {{"examples", reports.size()},
        {"mean_rho", rho_count ? json(rho_sum / static_cast<double>(rho_count)) : json("not-applicable")},
        {"all_bounds_hold", all_hold},
        {"kappa_cos", kappa_summary(reports, [](const auto& r) -> const auto& { return r.kappa_cos; })},
        {"kappa_gram", kappa_summary(reports, [](const auto& r) -> const auto& { return r.kappa_gram; })},
        {"kappa_hh", kappa_summary(reports, [](const auto& r) -> const auto& { return r.kappa_hh; })},
        {"norm_disparity_upper",
         bound_summary(reports, [](const auto& r) -> const auto& { return r.norm_disparity_upper; })},
        {"gram_lower", bound_summary(reports, [](const auto& r) -> const auto& { return r.gram_lower; })},
        {"coherence_upper",
         bound_summary(reports, [](const auto& r) -> const auto& { return r.coherence_upper; })}}},
      {"examples", per_example},
  };

  OutputGuard guard;
  const auto path = guard.track(dir / "report.json");
  write_json(path, report);
  manifest.add_output(path);
  manifest.results() = report["summary"];
  manifest.write(guard.track(dir / "manifest.json"));
  guard.commit();
  out << "wrote " << path.string() << " (" << reports.size() << " examples, " << all_hold
      << " with every applicable bound satisfied)\n";
  return kExitOk;
}

// ---- train ---------------------------------------------------------------

struct TrainOptions {
  std::string interactions;
  std::string init = "random";
  std::string normalize = "on";
  TrainConfig cfg;
  std::string out_dir;
};

int cmd_train(TrainOptions opt, std::ostream& out) {
  if (opt.normalize != "on" && opt.normalize != "off") throw UsageError("--normalize must be on or off");
  opt.cfg.normalize_candidates = opt.normalize == "on";
  require_file(opt.interactions, "interactions");
  const fs::path dir = prepare_output_dir(opt.out_dir);
  const int threads = apply_thread_cap();

  const auto log = load_interactions(opt.interactions);
  EmbeddingMatrix init;
  InitMode mode = InitMode::random;
  if (opt.init == "random") {
    init = EmbeddingMatrix(log.num_items, 0);
  } else {
    require_file(opt.init, "initial embeddings");
    init = load_embeddings(opt.init);
    mode = InitMode::from_matrix;
    if (init.rows() < log.num_items) {
      throw DimensionError("initial embeddings have " + std::to_string(init.rows()) +
                           " rows but interactions reference " + std::to_string(log.num_items) +
                           " items");
    }
    opt.cfg.embed_dim = init.cols();
  }
  const auto& c = opt.cfg;
  RunManifest manifest("train", {{"interactions", opt.interactions},
                                 {"init", opt.init},
                                 {"normalize", c.normalize_candidates},
                                 {"dim", c.embed_dim},
                                 {"hidden", c.hidden_dim},
                                 {"lr", c.learning_rate},
                                 {"beta1", c.adam_beta1},
                                 {"beta2", c.adam_beta2},
                                 {"eps", c.adam_eps},
                                 {"wd", c.weight_decay},
                                 {"epochs", c.epochs},
                                 {"batch", c.batch_size},
                                 {"seed", c.seed},
                                 {"rho_sample", c.rho_sample},
                                 {"rho_m", c.rho_m},
                                 {"patience", c.early_stop_patience},
                                 {"max_history", c.max_history},
                                 {"threads", threads}});
  manifest.add_input(opt.interactions);
  if (mode == InitMode::from_matrix) manifest.add_input(opt.init);

  auto split = leave_one_out(log, c.max_history);
  split.num_items = init.rows();
  Model model = init_model(init, c, mode);

  OutputGuard guard;
  const auto csv = guard.track(dir / "trace.csv");
  const auto trace_json = guard.track(dir / "trace.json");
  const auto ckpt = guard.track(dir / "checkpoint");
  const auto trace = train(model, split, c);

  {
    std::ofstream f(csv);
    write_trace_csv(trace, f);
    if (!f) throw Error("write failed for " + csv.string());
  }
  write_json(trace_json, to_json(trace));
  save_checkpoint(model, c.normalize_candidates, ckpt);
  load_checkpoint(ckpt);
  manifest.add_output(csv);
  manifest.add_output(trace_json);
  manifest.add_output(ckpt / "checkpoint.json");
  manifest.add_output(ckpt / "embeddings.emb");
  const auto& last = trace.records.back();
  manifest.results() = {{"epochs_run", trace.records.size()},
                        {"best_epoch", trace.best_epoch},
                        {"stopped_early", trace.stopped_early},
                        {"final_loss", last.loss},
                        {"final_rho", last.rho},
                        {"final_ndcg10", last.ndcg10}};
  manifest.write(guard.track(dir / "manifest.json"));
  guard.commit();
  out << "trained " << trace.records.size() << " epochs, final loss " << last.loss << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-regularized PCA, loss-geometry diagnostics and training for sequential "
               "recommendation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic interaction log and embeddings");
  s->add_option("--items", synth.cfg.num_items, "Number of items")->capture_default_str();
  s->add_option("--users", synth.cfg.num_users, "Number of users")->capture_default_str();
  s->add_option("--clusters", synth.cfg.num_clusters, "Behavioural clusters")->capture_default_str();
  s->add_option("--seq-min", synth.cfg.seq_len_min, "Shortest sequence")->capture_default_str();
  s->add_option("--seq-max", synth.cfg.seq_len_max, "Longest sequence")->capture_default_str();
  s->add_option("--dim", synth.cfg.embed_dim, "Embedding dimension")->capture_default_str();
  s->add_option("--sigma", synth.cfg.norm_scale_sigma, "Log-normal sigma of row norms")->capture_default_str();
  s->add_option("--distractors", synth.cfg.distractor_dims, "Distractor dimensions")->capture_default_str();
  s->add_option("--jump", synth.cfg.jump_prob, "Cluster jump probability")->capture_default_str();
  s->add_option("--spread", synth.cfg.cluster_spread, "Within-cluster noise")->capture_default_str();
  s->add_option("--topics", synth.cfg.distractor_topics, "Distractor topics (0 = isotropic noise)")
      ->capture_default_str();
  s->add_option("--distractor-scale", synth.cfg.distractor_scale, "Distractor block scale")
      ->capture_default_str();
  s->add_option("--seed", synth.cfg.seed, "Random seed")->required();
  s->add_option("-o,--out", synth.out_dir, "Output directory")->required();
  s->add_flag("--csv", synth.csv, "Also write embeddings.csv");

  GraphOptions graph;
  auto* g = app.add_subcommand("build-graph", "Build the item co-occurrence graph");
  g->add_option("--interactions", graph.interactions, "Interaction TSV")->required();
  g->add_option("--topk", graph.topk, "Keep each node's K heaviest edges (0 = keep all)")
      ->check(CLI::NonNegativeNumber);
  g->add_option("--min-count", graph.min_count, "Drop items and users with fewer interactions");
  g->add_option("--nodes", graph.num_nodes, "Node count (default: largest item id + 1)");
  g->add_option("--seed", graph.seed, "Accepted for uniformity; graph building is deterministic")
      ->group("");
  g->add_option("-o,--out", graph.out_dir, "Output directory")->required();

  RecPcaOptions recpca;
  auto* r = app.add_subcommand("recpca", "Fit graph-regularized PCA and reduce embeddings");
  r->add_option("--embeddings", recpca.embeddings, "EMB1 input embeddings")->required();
  r->add_option("--graph", recpca.graph, "Edge-list TSV")->required();
  r->add_option("--alpha", recpca.alpha, "Graph regularization weight in [0, 0.5]")->capture_default_str();
  r->add_option("--dim", recpca.dim, "Output dimension")->required();
  r->add_option("--mode", recpca.mode, "exact, cheb1 or cheb2")->capture_default_str();
  r->add_flag("--center", recpca.center, "Mean-center before fitting");
  r->add_option("-o,--out", recpca.out_dir, "Output directory")->required();

  DiagnoseOptions diag;
  auto* d = app.add_subcommand("diagnose", "Conditioning diagnostics and bound checks");
  d->add_option("--embeddings", diag.embeddings, "EMB1 item embeddings");
  d->add_option("--logits-from", diag.logits_from, "model or file")->capture_default_str();
  d->add_option("--logits", diag.logits, "Logits TSV (target<TAB>comma-separated scores)");
  d->add_option("--checkpoint", diag.checkpoint, "Checkpoint directory (model mode)");
  d->add_option("--interactions", diag.interactions, "Interaction TSV (model mode)");
  d->add_option("--m", diag.m, "Effective subspace size")->capture_default_str();
  d->add_option("--max-examples", diag.max_examples, "Cap on analysed examples (0 = all)")
      ->capture_default_str();
  d->add_option("-o,--out", diag.out_dir, "Output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the sequential recommender");
  t->add_option("--interactions", tr.interactions, "Interaction TSV")->required();
  t->add_option("--init", tr.init, "'random' or an EMB1 file")->capture_default_str();
  t->add_option("--normalize", tr.normalize, "on or off")->capture_default_str();
  t->add_option("--dim", tr.cfg.embed_dim, "Embedding dimension (random init)")->capture_default_str();
  t->add_option("--hidden", tr.cfg.hidden_dim, "Encoder hidden width")->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str();
  t->add_option("--wd", tr.cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs, "Maximum epochs")->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size, "Batch size")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  t->add_option("--rho-sample", tr.cfg.rho_sample, "Examples used for the coherence curve")
      ->capture_default_str();
  t->add_option("--rho-m", tr.cfg.rho_m, "Effective subspace size for the coherence curve")
      ->capture_default_str();
  t->add_option("--patience", tr.cfg.early_stop_patience, "Early-stopping patience (0 = off)")
      ->capture_default_str();
  t->add_option("--max-history", tr.cfg.max_history, "Longest encoder prefix")->capture_default_str();
  t->add_option("-o,--out", tr.out_dir, "Output directory")->required();

  std::vector<const char*> argv{"recgeo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (g->parsed()) return cmd_build_graph(graph, out);
    if (r->parsed()) return cmd_recpca(recpca, out);
    if (d->parsed()) return cmd_diagnose(diag, out);
    if (t->parsed()) return cmd_train(tr, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << " (epoch " << e.epoch() << ", batch " << e.batch() << ")\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace recgeo
