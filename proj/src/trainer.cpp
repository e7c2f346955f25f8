#include "recgeo/trainer.hpp"

#include "recgeo/conditioning.hpp"
#include "recgeo/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

namespace recgeo {

namespace {

Matrix uniform_matrix(Index rows, Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

void check_sequence(const Parameters& params, std::span<const ItemId> sequence) {
  if (sequence.empty()) throw ValidationError("cannot encode an empty sequence");
  for (ItemId item : sequence) {
    if (item < 0 || item >= params.embeddings.rows()) {
      throw ValidationError("item id " + std::to_string(item) + " outside the embedding table");
    }
  }
}

Vector mean_embedding(const Parameters& params, std::span<const ItemId> sequence) {
  Vector x = Vector::Zero(params.embeddings.cols());
  for (ItemId item : sequence) x += params.embeddings.row(item).transpose();
  return x / static_cast<double>(sequence.size());
}

// Candidate vectors used in the logits: raw rows, or unit rows (zero rows stay zero).
Matrix candidate_matrix(const Matrix& embeddings, bool normalize, Vector* norms) {
  if (!normalize) return embeddings;
  Vector r = embeddings.rowwise().norm();
  Matrix u = embeddings;
  for (Index i = 0; i < u.rows(); ++i) {
    if (r(i) > 0.0) {
      u.row(i) /= r(i);
    } else {
      u.row(i).setZero();
    }
  }
  if (norms != nullptr) *norms = std::move(r);
  return u;
}

template <typename Derived>
void adam_update(Eigen::MatrixBase<Derived>& param, Eigen::MatrixBase<Derived>& m,
                 Eigen::MatrixBase<Derived>& v, const Eigen::MatrixBase<Derived>& g,
                 const TrainConfig& cfg, double bias1, double bias2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
  const auto step = (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.adam_eps);
  param -= (cfg.learning_rate * (step + cfg.weight_decay * param.array())).matrix();
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

void TrainConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw ValidationError("dimensions must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and non-negative");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_eps > 0.0)) {
    throw ValidationError("Adam hyperparameters out of range");
  }
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (rho_sample < 0 || rho_m < 2) throw ValidationError("need rho_sample >= 0 and rho_m >= 2");
  if (early_stop_patience < 0) throw ValidationError("early_stop_patience must be >= 0");
  if (max_history < 1) throw ValidationError("max_history must be at least 1");
}

SplitData leave_one_out(const InteractionLog& log, Index max_history) {
  log.validate();
  if (max_history < 1) throw ValidationError("max_history must be at least 1");
  SplitData out;
  out.num_items = log.num_items;
  auto window = [&](const std::vector<ItemId>& items, std::size_t end) {
    const std::size_t begin =
        end > static_cast<std::size_t>(max_history) ? end - static_cast<std::size_t>(max_history) : 0;
    return std::vector<ItemId>(items.begin() + static_cast<std::ptrdiff_t>(begin),
                               items.begin() + static_cast<std::ptrdiff_t>(end));
  };
  for (const auto& seq : log.sequences) {
    const std::size_t len = seq.items.size();
    if (len < 2) continue;
    for (std::size_t t = 1; t + 1 < len; ++t) out.train.push_back({window(seq.items, t), seq.items[t]});
    out.valid.push_back({window(seq.items, len - 1), seq.items[len - 1]});
  }
  return out;
}

Parameters Parameters::zeros_like(const Parameters& p) {
  return {Matrix::Zero(p.embeddings.rows(), p.embeddings.cols()),
          Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
          Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
}

bool Parameters::all_finite() const {
  return embeddings.allFinite() && w1.allFinite() && b1.allFinite() && w2.allFinite() &&
         b2.allFinite();
}

Model init_model(const EmbeddingMatrix& init, const TrainConfig& cfg, InitMode mode) {
  cfg.validate();
  if (mode == InitMode::from_matrix && init.cols() != cfg.embed_dim) {
    throw DimensionError("initial embeddings have " + std::to_string(init.cols()) +
                         " columns, model dimension is " + std::to_string(cfg.embed_dim));
  }
  if (init.rows() < 1) throw ValidationError("model needs at least one item");
  std::mt19937_64 rng(cfg.seed);
  const double d = static_cast<double>(cfg.embed_dim);
  const double h = static_cast<double>(cfg.hidden_dim);

  Model model;
  model.params.w1 = uniform_matrix(cfg.hidden_dim, cfg.embed_dim, 1.0 / std::sqrt(d), rng);
  model.params.b1 = Vector::Zero(cfg.hidden_dim);
  model.params.w2 = uniform_matrix(cfg.embed_dim, cfg.hidden_dim, 1.0 / std::sqrt(h), rng);
  model.params.b2 = Vector::Zero(cfg.embed_dim);
  model.params.embeddings = mode == InitMode::from_matrix
                                ? init.values()
                                : uniform_matrix(init.rows(), cfg.embed_dim, 1.0 / std::sqrt(d), rng);
  model.first_moment = Parameters::zeros_like(model.params);
  model.second_moment = Parameters::zeros_like(model.params);
  return model;
}

Vector encode(const Parameters& params, std::span<const ItemId> sequence) {
  check_sequence(params, sequence);
  const Vector x = mean_embedding(params, sequence);
  const Vector z = (params.w1 * x + params.b1).array().tanh().matrix();
  return params.w2 * z + params.b2;
}

Vector logits(const Parameters& params, const Vector& h, bool normalize) {
  if (h.size() != params.embeddings.cols()) throw DimensionError("logits: h has wrong dimension");
  return candidate_matrix(params.embeddings, normalize, nullptr) * h;
}

LossAndGrads loss_and_grads(const Parameters& params, std::span<const Example> batch,
                            bool normalize) {
  if (batch.empty()) throw ValidationError("loss_and_grads: empty batch");
  const Index b = static_cast<Index>(batch.size());
  const Index n = params.embeddings.rows();
  const Index d = params.embeddings.cols();

  Matrix pooled(b, d);
  for (Index k = 0; k < b; ++k) {
    const auto& ex = batch[static_cast<std::size_t>(k)];
    check_sequence(params, ex.prefix);
    if (ex.target < 0 || ex.target >= n) throw ValidationError("target outside the embedding table");
    pooled.row(k) = mean_embedding(params, ex.prefix).transpose();
  }
  Matrix pre = pooled * params.w1.transpose();
  pre.rowwise() += params.b1.transpose();
  const Matrix act = pre.array().tanh().matrix();
  Matrix hidden = act * params.w2.transpose();
  hidden.rowwise() += params.b2.transpose();

  Vector norms;
  const Matrix cand = candidate_matrix(params.embeddings, normalize, &norms);
  const Matrix scores = hidden * cand.transpose();  // b x n

  LossAndGrads out;
  out.grads = Parameters::zeros_like(params);
  Matrix g_scores(b, n);
  double total = 0.0;
  for (Index k = 0; k < b; ++k) {
    const Vector s = scores.row(k).transpose();
    const ItemId y = batch[static_cast<std::size_t>(k)].target;
    const double loss = log_sum_exp(s) - s(y);
    if (!std::isfinite(loss)) {
      throw NumericalError("non-finite loss at batch example " + std::to_string(k), -1, -1, k);
    }
    total += loss;
    Vector p = softmax(s);
    p(y) -= 1.0;
    g_scores.row(k) = p.transpose() / static_cast<double>(b);
  }
  out.loss = total / static_cast<double>(b);

  const Matrix g_hidden = g_scores * cand;               // b x d
  Matrix g_cand = g_scores.transpose() * hidden;         // n x d
  if (normalize) {
    for (Index i = 0; i < n; ++i) {
      if (!(norms(i) > 0.0)) {
        g_cand.row(i).setZero();
        continue;
      }
      const double radial = g_cand.row(i).dot(cand.row(i));
      g_cand.row(i) = (g_cand.row(i) - radial * cand.row(i)) / norms(i);
    }
  }
  out.grads.embeddings = std::move(g_cand);

  out.grads.w2 = g_hidden.transpose() * act;
  out.grads.b2 = g_hidden.colwise().sum().transpose();
  const Matrix g_pre = (g_hidden * params.w2).cwiseProduct((1.0 - act.array().square()).matrix());
  out.grads.w1 = g_pre.transpose() * pooled;
  out.grads.b1 = g_pre.colwise().sum().transpose();
  const Matrix g_pooled = g_pre * params.w1;  // b x d
  for (Index k = 0; k < b; ++k) {
    const auto& prefix = batch[static_cast<std::size_t>(k)].prefix;
    const double share = 1.0 / static_cast<double>(prefix.size());
    for (ItemId item : prefix) out.grads.embeddings.row(item) += share * g_pooled.row(k);
  }
  return out;
}

void adam_step(Model& model, const Parameters& grads, const TrainConfig& cfg) {
  ++model.step;
  const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(model.step));
  const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(model.step));
  adam_update(model.params.embeddings, model.first_moment.embeddings,
              model.second_moment.embeddings, grads.embeddings, cfg, bias1, bias2);
  adam_update(model.params.w1, model.first_moment.w1, model.second_moment.w1, grads.w1, cfg, bias1,
              bias2);
  adam_update(model.params.b1, model.first_moment.b1, model.second_moment.b1, grads.b1, cfg, bias1,
              bias2);
  adam_update(model.params.w2, model.first_moment.w2, model.second_moment.w2, grads.w2, cfg, bias1,
              bias2);
  adam_update(model.params.b2, model.first_moment.b2, model.second_moment.b2, grads.b2, cfg, bias1,
              bias2);
}

Index rank_of(const Vector& scores, ItemId target) {
  const double t = scores(target);
  Index rank = 1;
  for (Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > t || (scores(i) == t && i < target)) ++rank;
  }
  return rank;
}

RankingMetrics ranking_metrics(std::span<const Index> ranks, Index n) {
  RankingMetrics m;
  m.n = n;
  if (ranks.empty()) return m;
  for (Index r : ranks) {
    if (r <= n) {
      m.hit_rate += 1.0;
      m.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  const double count = static_cast<double>(ranks.size());
  m.hit_rate /= count;
  m.ndcg /= count;
  return m;
}

std::vector<RankingMetrics> evaluate(const Parameters& params, std::span<const Example> examples,
                                     bool normalize, std::span<const Index> cutoffs) {
  const Matrix cand = candidate_matrix(params.embeddings, normalize, nullptr);
  std::vector<Index> ranks;
  ranks.reserve(examples.size());
  for (const auto& ex : examples) {
    ranks.push_back(rank_of(cand * encode(params, ex.prefix), ex.target));
  }
  std::vector<RankingMetrics> out;
  for (Index n : cutoffs) out.push_back(ranking_metrics(ranks, n));
  return out;
}

double mean_coherence(const Parameters& params, std::span<const Example> examples, bool normalize,
                      Index m) {
  const Matrix cand = candidate_matrix(params.embeddings, normalize, nullptr);
  const Index size = std::min(m, params.embeddings.rows());
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& ex : examples) {
    const Vector s = cand * encode(params, ex.prefix);
    const auto subspace = effective_subspace(s, ex.target, size);
    const Matrix rows = restrict_rows(params.embeddings, subspace);
    if ((rows.rowwise().norm().array() > 0.0).all() && rows.rows() >= 2) {
      total += effective_coherence(rows);
      ++counted;
    }
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

MetricsTrace train(Model& model, const SplitData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw ValidationError("no training examples");
  if (model.embed_dim() != cfg.embed_dim) throw DimensionError("model/config dimension mismatch");

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  // Fixed sample for the coherence curve, drawn once.
  std::vector<Example> rho_examples;
  {
    std::vector<std::size_t> pick = order;
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(std::min(pick.size(), static_cast<std::size_t>(cfg.rho_sample)));
    for (auto i : pick) rho_examples.push_back(data.train[i]);
  }

  MetricsTrace trace;
  trace.metadata = {
      {"split", "leave-one-out: last item per sequence validates; each earlier position is a "
                "training target for its prefix"},
      {"max_history", cfg.max_history},
      {"rho", "mean per-example effective coherence over a fixed training sample"},
      {"rho_sample", rho_examples.size()},
      {"rho_m", cfg.rho_m},
      {"normalize_candidates", cfg.normalize_candidates},
      {"train_examples", data.train.size()},
      {"valid_examples", data.valid.size()},
  };

  const std::array<Index, 2> cutoffs{5, 10};
  double best_ndcg = -1.0;
  int since_best = 0;
  std::vector<Example> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data.train[order[k]]);
      LossAndGrads lg;
      try {
        lg = loss_and_grads(model.params, batch, cfg.normalize_candidates);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index) + ", example " +
                                 std::to_string(order[start + static_cast<std::size_t>(e.example())]),
                             epoch, batch_index,
                             static_cast<long>(order[start + static_cast<std::size_t>(e.example())]));
      }
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(model, lg.grads, cfg);
      if (!model.params.all_finite()) {
        throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index),
                             epoch, batch_index, -1);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.rho = rho_examples.empty() ? 0.0
                                   : mean_coherence(model.params, rho_examples,
                                                    cfg.normalize_candidates, cfg.rho_m);
    if (!data.valid.empty()) {
      const auto metrics = evaluate(model.params, data.valid, cfg.normalize_candidates, cutoffs);
      rec.hr5 = metrics[0].hit_rate;
      rec.ndcg5 = metrics[0].ndcg;
      rec.hr10 = metrics[1].hit_rate;
      rec.ndcg10 = metrics[1].ndcg;
    }
    trace.records.push_back(rec);

    if (rec.ndcg10 > best_ndcg) {
      best_ndcg = rec.ndcg10;
      trace.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      trace.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  return trace;
}

void write_trace_csv(const MetricsTrace& trace, std::ostream& out) {
  out << "epoch,loss,rho,hr5,ndcg5,hr10,ndcg10\n";
  for (const auto& r : trace.records) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.rho) << ','
        << format_double(r.hr5) << ',' << format_double(r.ndcg5) << ',' << format_double(r.hr10)
        << ',' << format_double(r.ndcg10) << '\n';
  }
}

nlohmann::json to_json(const MetricsTrace& trace) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"epoch", r.epoch},
                       {"loss", r.loss},
                       {"rho", r.rho},
                       {"hr5", r.hr5},
                       {"ndcg5", r.ndcg5},
                       {"hr10", r.hr10},
                       {"ndcg10", r.ndcg10}});
  }
  return {{"records", records},
          {"best_epoch", trace.best_epoch},
          {"stopped_early", trace.stopped_early},
          {"metadata", trace.metadata}};
}

std::vector<std::filesystem::path> save_checkpoint(const Model& model, bool normalize,
                                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const char* name, const Matrix& m) {
    const auto path = dir / (std::string(name) + ".emb");
    save_embeddings(EmbeddingMatrix(m), path);
    written.push_back(path);
  };
  put("embeddings", model.params.embeddings);
  put("w1", model.params.w1);
  put("b1", model.params.b1);
  put("w2", model.params.w2);
  put("b2", model.params.b2);

  const nlohmann::json manifest = {
      {"format", "recgeo-checkpoint"},
      {"normalize_candidates", normalize},
      {"num_items", model.num_items()},
      {"embed_dim", model.embed_dim()},
      {"hidden_dim", model.params.w1.rows()},
      {"step", model.step},
      {"tensors", {"embeddings", "w1", "b1", "w2", "b2"}},
  };
  const auto manifest_path = dir / "checkpoint.json";
  std::ofstream out(manifest_path);
  if (!out) throw Error("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  written.push_back(manifest_path);
  return written;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "checkpoint.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open checkpoint manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.normalize = manifest.value("normalize_candidates", true);
  auto get = [&](const char* name) { return load_embeddings(dir / (std::string(name) + ".emb")).values(); };
  ck.model.params.embeddings = get("embeddings");
  ck.model.params.w1 = get("w1");
  ck.model.params.b1 = get("b1");
  ck.model.params.w2 = get("w2");
  ck.model.params.b2 = get("b2");
  const auto& p = ck.model.params;
  const Index d = p.embeddings.cols();
  const Index h = p.w1.rows();
  if (p.w1.cols() != d || p.b1.size() != h || p.w2.rows() != d || p.w2.cols() != h ||
      p.b2.size() != d) {
    throw FormatError("checkpoint tensors in " + dir.string() + " have inconsistent shapes");
  }
  ck.model.first_moment = Parameters::zeros_like(p);
  ck.model.second_moment = Parameters::zeros_like(p);
  ck.model.step = manifest.value("step", 0L);
  return ck;
}

}  // namespace recgeo
