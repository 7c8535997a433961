// SPDX-License-Identifier: Apache-2.0
#include "fedsim/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsim {

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids = {
      "fedavg",   "fedprox", "hypcluster", "fml",        "fedme",
      "lgfedavg", "fedper",  "fedrep",     "ditto",      "pfedme",
      "local_only", "centralized"};
  return ids;
}

bool is_known_method(const std::string& method) {
  const auto& ids = method_ids();
  return std::find(ids.begin(), ids.end(), method) != ids.end();
}

void validate(const FederationConfig& cfg) {
  if (!is_known_method(cfg.method))
    throw InvalidArgument("unknown method '" + cfg.method + "'");
  if (cfg.clients < 1) throw InvalidArgument("clients must be at least 1");
  if (cfg.rounds < 0) throw InvalidArgument("rounds must be nonnegative");
  if (cfg.local_epochs < 1) throw InvalidArgument("local_epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(cfg.data_ratio > 0.0) || cfg.data_ratio > 1.0)
    throw InvalidArgument("data_ratio must be in (0, 1]");
  if (!(cfg.alpha_label > 0.0)) throw InvalidArgument("alpha_label must be positive");
  if (cfg.repeats < 1) throw InvalidArgument("repeats must be at least 1");
  if (cfg.ft_epochs < 0) throw InvalidArgument("ft_epochs must be nonnegative");
  if (cfg.threads < 1) throw InvalidArgument("threads must be at least 1");
  if (cfg.dataset != "synthetic" && cfg.dataset != "idx" && cfg.dataset != "csv")
    throw InvalidArgument("dataset must be synthetic, idx, or csv");
  if (cfg.dataset == "synthetic") {
    if (cfg.classes < 2) throw InvalidArgument("classes must be at least 2");
    if (cfg.features < 1) throw InvalidArgument("features must be at least 1");
    if (cfg.samples < static_cast<std::size_t>(cfg.classes))
      throw InvalidArgument("samples must be at least the class count");
    if (!(cfg.test_fraction > 0.0) || cfg.test_fraction >= 1.0)
      throw InvalidArgument("test_fraction must be in (0, 1)");
  }
  for (int h : cfg.hidden)
    if (h < 1) throw InvalidArgument("hidden layer sizes must be positive");
  if (cfg.split_train_part < 1 || cfg.split_val_part < 0)
    throw InvalidArgument("train_val_ratio parts must be positive");
  if (cfg.fedprox_mu < 0.0) throw InvalidArgument("fedprox_mu must be nonnegative");
  if (cfg.hypcluster_k < 1) throw InvalidArgument("hypcluster_k must be at least 1");
  if (cfg.fml_beta < 0.0 || cfg.fml_beta > 1.0)
    throw InvalidArgument("fml_beta must be in [0, 1]");
  if (cfg.fedme_beta < 0.0 || cfg.fedme_beta > 1.0)
    throw InvalidArgument("fedme_beta must be in [0, 1]");
  if (cfg.fedme_distill_weight < 0.0)
    throw InvalidArgument("fedme_distill_weight must be nonnegative");
  int prev = 0;
  for (int r : cfg.fedme_cluster_schedule) {
    if (r <= prev)
      throw InvalidArgument(
          "fedme_cluster_schedule must be strictly increasing, starting past round 0");
    if (cfg.rounds > 0 && r >= cfg.rounds)
      throw InvalidArgument("fedme_cluster_schedule rounds must be below the round count");
    prev = r;
  }
  if (cfg.ditto_lambda < 0.0) throw InvalidArgument("ditto_lambda must be nonnegative");
  if (cfg.pfedme_lambda < 0.0) throw InvalidArgument("pfedme_lambda must be nonnegative");
  if (cfg.pfedme_k < 1) throw InvalidArgument("pfedme_k must be at least 1");
  if (cfg.fedrep_head_epochs < 0 || cfg.fedrep_body_epochs < 0)
    throw InvalidArgument("fedrep epochs must be nonnegative");
}

// ---------------------------------------------------------------------------
// Local training
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    int batch_size,
                                                    RngStream& rng) {
  if (batch_size < 1) throw InvalidArgument("epoch_batches: batch_size must be positive");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<std::vector<std::size_t>> batches;
  const std::size_t b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += b) {
    std::size_t end = std::min(n, start + b);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

namespace {

// sgd_step with frozen coordinates: masked-off entries keep value and
// velocity untouched.
void masked_sgd_step(std::span<double> params, std::span<const double> grads,
                     SgdState& state, const std::vector<char>& mask) {
  if (!all_finite(grads)) throw NumericFault("sgd_step: non-finite gradient");
  if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask[i]) continue;
    double v = state.momentum * state.velocity[i] +
               (grads[i] + state.weight_decay * params[i]);
    state.velocity[i] = v;
    params[i] -= state.learning_rate * v;
  }
}

struct BatchStep {
  double ce = 0.0;
};

BatchStep train_on_batch(MlpModel& model, const Dataset& data,
                         const std::vector<std::size_t>& batch_idx,
                         SgdState& sgd, const LocalTrainOpts& opts,
                         const ExtraGrad& extra) {
  Dataset batch = take(data, batch_idx);
  ForwardCache cache;
  model.forward(batch.x, &cache);
  auto [loss, grads] = backward_ce(model, cache, batch.labels);
  if (extra) extra(model.params().span(), grads.span());
  if (opts.update_mask) {
    for (std::size_t i = 0; i < grads.size(); ++i)
      if (!(*opts.update_mask)[i]) grads.values()[i] = 0.0;
  }
  clip_global_norm_inplace(grads.span(), opts.clip_norm);
  if (opts.update_mask)
    masked_sgd_step(model.params().span(), grads.span(), sgd, *opts.update_mask);
  else
    sgd_step(model.params().span(), grads.span(), sgd);
  return {loss};
}

}  // namespace

std::vector<double> local_update_sgd(MlpModel& model, const Dataset& train,
                                     RngStream& rng, const LocalTrainOpts& opts,
                                     const ExtraGrad& extra) {
  std::vector<double> epoch_losses;
  if (train.size() == 0) return epoch_losses;  // skip empty clients
  SgdState sgd(opts.learning_rate, opts.momentum, opts.weight_decay);
  for (int e = 0; e < opts.epochs; ++e) {
    auto batches = epoch_batches(train.size(), opts.batch_size, rng);
    double sum = 0.0;
    for (const auto& b : batches)
      sum += train_on_batch(model, train, b, sgd, opts, extra).ce;
    epoch_losses.push_back(sum / static_cast<double>(batches.size()));
  }
  return epoch_losses;
}

void mutual_train(MlpModel& a, MlpModel& b, const Dataset& train,
                  RngStream& rng, const LocalTrainOpts& opts, double beta) {
  if (train.size() == 0) return;
  if (beta == 0.0) {
    // decoupled: two plain CE trajectories over the same batch sequence
    SgdState sa(opts.learning_rate, opts.momentum, opts.weight_decay);
    SgdState sb(opts.learning_rate, opts.momentum, opts.weight_decay);
    for (int e = 0; e < opts.epochs; ++e) {
      auto batches = epoch_batches(train.size(), opts.batch_size, rng);
      for (const auto& idx : batches) {
        train_on_batch(a, train, idx, sa, opts, {});
        train_on_batch(b, train, idx, sb, opts, {});
      }
    }
    return;
  }
  SgdState sa(opts.learning_rate, opts.momentum, opts.weight_decay);
  SgdState sb(opts.learning_rate, opts.momentum, opts.weight_decay);
  for (int e = 0; e < opts.epochs; ++e) {
    auto batches = epoch_batches(train.size(), opts.batch_size, rng);
    for (const auto& idx : batches) {
      Dataset batch = take(train, idx);
      ForwardCache ca, cb;
      Matrix pa = a.forward(batch.x, &ca);
      Matrix pb = b.forward(batch.x, &cb);
      // each model distills from the other's snapshot
      Matrix da = ce_dlogits(pa, batch.labels);
      Matrix db = ce_dlogits(pb, batch.labels);
      KlResult ka = kl_grad(pa, pb);  // gradient w.r.t. a's logits
      KlResult kb = kl_grad(pb, pa);
      for (std::size_t i = 0; i < da.values.size(); ++i) {
        da.values[i] = (1.0 - beta) * da.values[i] + beta * ka.dlogits_student.values[i];
        db.values[i] = (1.0 - beta) * db.values[i] + beta * kb.dlogits_student.values[i];
      }
      ParamVector ga = a.backward_from_dlogits(ca, da);
      ParamVector gb = b.backward_from_dlogits(cb, db);
      clip_global_norm_inplace(ga.span(), opts.clip_norm);
      clip_global_norm_inplace(gb.span(), opts.clip_norm);
      sgd_step(a.params().span(), ga.span(), sa);
      sgd_step(b.params().span(), gb.span(), sb);
    }
  }
}

std::vector<double> prox_inner_steps(
    std::span<const double> w, int k, double lambda, double inner_lr,
    double clip_norm,
    const std::function<void(std::span<const double>, std::span<double>)>& grad_f) {
  std::vector<double> theta(w.begin(), w.end());
  std::vector<double> grad(w.size());
  for (int step = 0; step < k; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    grad_f(theta, grad);
    for (std::size_t i = 0; i < theta.size(); ++i)
      grad[i] += lambda * (theta[i] - w[i]);
    clip_global_norm_inplace(grad, clip_norm);
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta[i] -= inner_lr * grad[i];
  }
  return theta;
}

ParamVector aggregate_weighted(std::vector<Upload> uploads) {
  if (uploads.empty()) throw InvalidArgument("aggregate_weighted: no uploads");
  std::sort(uploads.begin(), uploads.end(),
            [](const Upload& a, const Upload& b) { return a.client_id < b.client_id; });
  const std::size_t dim = uploads.front().params.size();
  double total = 0.0;
  for (const Upload& u : uploads) {
    if (u.params.size() != dim)
      throw InvalidArgument("aggregate_weighted: dimension mismatch");
    total += static_cast<double>(u.weight);
  }
  if (total <= 0.0) throw InvalidArgument("aggregate_weighted: zero total weight");
  ParamVector out = uploads.front().params.zeros_like();
  for (const Upload& u : uploads) {
    double coef = static_cast<double>(u.weight) / total;
    axpy(coef, u.params.span(), out.span());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

namespace {

ParamVector global_init(const RunEnv& env, int model_index = 0) {
  RngStream rng(env.run_seed,
                stream_id(stream::kInit, static_cast<std::uint64_t>(model_index)));
  return MlpModel::init_params(env.model_spec, rng);
}

RngStream batch_stream(const RunEnv& env, int client, int round) {
  return RngStream(env.run_seed,
                   stream_id(stream::kBatch, static_cast<std::uint64_t>(client),
                             static_cast<std::uint64_t>(round)));
}

// Single aggregated model, plain or proximal local training.
class FedAvgStrategy : public Strategy {
 public:
  explicit FedAvgStrategy(double prox_mu, std::string method)
      : prox_mu_(prox_mu), method_(std::move(method)) {}

  void setup(const RunEnv& env) override {
    global_ = global_init(env);
    local_.assign(env.clients.size(), global_);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    MlpModel model(env.model_spec, global_);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    if (prox_mu_ != 0.0) {
      const ParamVector& anchor = global_;
      double mu = prox_mu_;
      ExtraGrad prox = [&anchor, mu](std::span<const double> w, std::span<double> g) {
        const auto& a = anchor.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * (w[i] - a[i]);
      };
      local_update_sgd(model, env.clients[static_cast<std::size_t>(client)].train,
                       rng, opts, prox);
    } else {
      local_update_sgd(model, env.clients[static_cast<std::size_t>(client)].train,
                       rng, opts);
    }
    local_[static_cast<std::size_t>(client)] = model.params();
  }

  void aggregate(const RunEnv& env, int) override {
    std::vector<Upload> ups;
    for (std::size_t i = 0; i < local_.size(); ++i)
      ups.push_back({static_cast<int>(i), local_[i], env.client_weight(static_cast<int>(i))});
    global_ = aggregate_weighted(std::move(ups));
  }

  const ParamVector& validation_model(int client) const override {
    return local_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int) const override { return global_; }
  std::size_t upload_size(int client) const override {
    return local_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig& cfg) const override {
    return exchange_plan_for(method_, cfg.hypcluster_k);
  }
  const ParamVector* shared_model() const override { return &global_; }

 private:
  double prox_mu_;
  std::string method_;
  ParamVector global_;
  std::vector<ParamVector> local_;
};

// k aggregated models; each client adopts and trains the one with the lowest
// validation CE loss.
class HypClusterStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    const int k = env.cfg->hypcluster_k;
    cluster_models_.clear();
    for (int j = 0; j < k; ++j) cluster_models_.push_back(global_init(env, j));
    local_.assign(env.clients.size(), cluster_models_.front());
    chosen_.assign(env.clients.size(), 0);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const ClientData& data = env.clients[static_cast<std::size_t>(client)];
    int best = 0;
    if (cluster_models_.size() > 1 && round == 0) {
      // warm start: random assignment breaks the symmetry between the fresh
      // hypotheses; loss-based selection takes over from round 1
      RngStream rng(env.run_seed,
                    stream_id(stream::kCluster, static_cast<std::uint64_t>(client), 0));
      best = static_cast<int>(rng.next_below(cluster_models_.size()));
    } else if (cluster_models_.size() > 1 && data.validation.size() > 0) {
      double best_loss = 0.0;
      for (std::size_t j = 0; j < cluster_models_.size(); ++j) {
        MlpModel m(env.model_spec, cluster_models_[j]);
        Matrix probs = m.forward(data.validation.x);
        double loss = ce_loss(probs, data.validation.labels);
        if (j == 0 || loss < best_loss) {
          best_loss = loss;
          best = static_cast<int>(j);
        }
      }
    }
    chosen_[static_cast<std::size_t>(client)] = best;
    MlpModel model(env.model_spec, cluster_models_[static_cast<std::size_t>(best)]);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    local_update_sgd(model, data.train, rng, opts);
    local_[static_cast<std::size_t>(client)] = model.params();
  }

  void aggregate(const RunEnv& env, int) override {
    for (std::size_t j = 0; j < cluster_models_.size(); ++j) {
      std::vector<Upload> ups;
      for (std::size_t i = 0; i < local_.size(); ++i)
        if (chosen_[i] == static_cast<int>(j))
          ups.push_back({static_cast<int>(i), local_[i],
                         env.client_weight(static_cast<int>(i))});
      if (!ups.empty()) cluster_models_[j] = aggregate_weighted(std::move(ups));
      // empty clusters keep their previous parameters
    }
  }

  const ParamVector& validation_model(int client) const override {
    return local_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return cluster_models_[static_cast<std::size_t>(
        chosen_[static_cast<std::size_t>(client)])];
  }
  std::size_t upload_size(int client) const override {
    return local_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig& cfg) const override {
    return exchange_plan_for("hypcluster", cfg.hypcluster_k);
  }
  const ParamVector* shared_model() const override { return &cluster_models_.front(); }
  std::vector<int> cluster_assignments() const override { return chosen_; }

 private:
  std::vector<ParamVector> cluster_models_;
  std::vector<ParamVector> local_;
  std::vector<int> chosen_;
};

// Deep mutual learning between a persistent personalized model and the
// exchanged one.
class FmlStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    meme_global_ = global_init(env);
    personal_.assign(env.clients.size(), meme_global_);
    meme_local_.assign(env.clients.size(), meme_global_);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    MlpModel meme(env.model_spec, meme_global_);
    MlpModel personal(env.model_spec, personal_[static_cast<std::size_t>(client)]);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    mutual_train(meme, personal, env.clients[static_cast<std::size_t>(client)].train,
                 rng, opts, env.cfg->fml_beta);
    meme_local_[static_cast<std::size_t>(client)] = meme.params();
    personal_[static_cast<std::size_t>(client)] = personal.params();
  }

  void aggregate(const RunEnv& env, int) override {
    std::vector<Upload> ups;
    for (std::size_t i = 0; i < meme_local_.size(); ++i)
      ups.push_back({static_cast<int>(i), meme_local_[i],
                     env.client_weight(static_cast<int>(i))});
    meme_global_ = aggregate_weighted(std::move(ups));
  }

  const ParamVector& validation_model(int client) const override {
    return personal_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return personal_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int client) const override {
    return meme_local_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig&) const override {
    return exchange_plan_for("fml");
  }
  const ParamVector* shared_model() const override { return &meme_global_; }

 private:
  ParamVector meme_global_;
  std::vector<ParamVector> personal_;
  std::vector<ParamVector> meme_local_;
};

// k-means over flattened parameter vectors; k-means++ seeding, Lloyd
// iterations, empty clusters reseeded to the farthest point.
std::vector<int> kmeans_params(const std::vector<ParamVector>& points, int k,
                               RngStream& rng) {
  const std::size_t n = points.size();
  std::vector<int> assign(n, 0);
  if (k <= 1 || n <= static_cast<std::size_t>(k)) {
    if (n <= static_cast<std::size_t>(k)) {
      for (std::size_t i = 0; i < n; ++i) assign[i] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    if (k <= 1) std::fill(assign.begin(), assign.end(), 0);
    return assign;
  }
  auto dist2 = [&](const std::vector<double>& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  // k-means++ seeding
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.next_below(n)].values());
  std::vector<double> best(n, 0.0);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = dist2(centers.front(), points[i].span());
      for (std::size_t c = 1; c < centers.size(); ++c)
        d = std::min(d, dist2(centers[c], points[i].span()));
      best[i] = d;
      total += d;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.next_double() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (u < acc) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = rng.next_below(n);
    }
    centers.push_back(points[pick].values());
  }

  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int bi = 0;
      double bd = dist2(centers[0], points[i].span());
      for (int c = 1; c < k; ++c) {
        double d = dist2(centers[static_cast<std::size_t>(c)], points[i].span());
        if (d < bd) {
          bd = d;
          bi = c;
        }
      }
      if (assign[i] != bi) {
        assign[i] = bi;
        changed = true;
      }
    }
    // recompute centers; reseed empty clusters with the farthest point
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = centers[static_cast<std::size_t>(assign[i])];
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += points[i].values()[j];
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = dist2(centers[static_cast<std::size_t>(assign[i])], points[i].span());
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centers[static_cast<std::size_t>(c)] = points[far].values();
        assign[far] = c;
        changed = true;
      } else {
        double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        for (double& x : centers[static_cast<std::size_t>(c)]) x *= inv;
      }
    }
    if (!changed && iter > 0) break;
  }
  return assign;
}

// Cluster-and-exchange mutual learning. Each round the server clusters the
// stored personalized models, every client trains from its cluster average
// together with one same-cluster peer model, distills from its previous self
// on the shared unlabeled pool, and uploads both trained models. Peer-trained
// copies flow back into the owner's model with weight beta.
class FedMeStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    const std::size_t s = env.clients.size();
    personal_.assign(s, global_init(env));
    own_trained_.assign(s, personal_.front());
    peer_trained_.assign(s, personal_.front());
    assignment_.assign(s, 0);
    peer_.assign(s, 0);
    cluster_avgs_.assign(1, personal_.front());
  }

  void begin_round(const RunEnv& env, int round) override {
    int m = 1;
    for (int r : env.cfg->fedme_cluster_schedule)
      if (r <= round) ++m;
    m = std::min<int>(m, static_cast<int>(env.clients.size()));
    RngStream rng(env.run_seed, stream_id(stream::kCluster, 0,
                                          static_cast<std::uint64_t>(round)));
    if (m == 1) {
      std::fill(assignment_.begin(), assignment_.end(), 0);
    } else {
      assignment_ = kmeans_params(personal_, m, rng);
    }
    if (round == 0) {
      // every personalized model still holds the shared init; its average is
      // that init, exactly
      cluster_avgs_.assign(static_cast<std::size_t>(m), personal_.front());
    } else {
      cluster_avgs_.assign(static_cast<std::size_t>(m), ParamVector());
      for (int c = 0; c < m; ++c) {
        std::vector<Upload> ups;
        for (std::size_t i = 0; i < personal_.size(); ++i)
          if (assignment_[i] == c)
            ups.push_back({static_cast<int>(i), personal_[i],
                           env.client_weight(static_cast<int>(i))});
        cluster_avgs_[static_cast<std::size_t>(c)] =
            ups.empty() ? personal_.front() : aggregate_weighted(std::move(ups));
      }
    }
    // nearest same-cluster neighbour by parameter distance; alone -> self
    for (std::size_t i = 0; i < personal_.size(); ++i) {
      int best = static_cast<int>(i);
      double bd = 0.0;
      for (std::size_t j = 0; j < personal_.size(); ++j) {
        if (j == i || assignment_[j] != assignment_[i]) continue;
        double d = 0.0;
        for (std::size_t t = 0; t < personal_[i].size(); ++t) {
          double diff = personal_[i].values()[t] - personal_[j].values()[t];
          d += diff * diff;
        }
        if (best == static_cast<int>(i) || d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      peer_[i] = best;
    }
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    const ClientData& data = env.clients[ci];
    MlpModel own(env.model_spec,
                 cluster_avgs_[static_cast<std::size_t>(assignment_[ci])]);
    MlpModel peer(env.model_spec, personal_[static_cast<std::size_t>(peer_[ci])]);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    const double beta = env.cfg->fedme_beta;
    const double distill = env.cfg->fedme_distill_weight;
    MlpModel teacher(env.model_spec, personal_[ci]);

    RngStream rng = batch_stream(env, client, round);
    RngStream drng(env.run_seed,
                   stream_id(stream::kDistill, static_cast<std::uint64_t>(client),
                             static_cast<std::uint64_t>(round)));
    SgdState so(opts.learning_rate, opts.momentum, opts.weight_decay);
    SgdState sp(opts.learning_rate, opts.momentum, opts.weight_decay);
    SgdState sd(opts.learning_rate, opts.momentum, opts.weight_decay);
    for (int e = 0; e < opts.epochs; ++e) {
      auto batches = epoch_batches(data.train.size(), opts.batch_size, rng);
      for (const auto& idx : batches) {
        Dataset batch = take(data.train, idx);
        if (beta == 0.0) {
          ForwardCache co, cp;
          own.forward(batch.x, &co);
          peer.forward(batch.x, &cp);
          auto [lo, go] = backward_ce(own, co, batch.labels);
          auto [lp, gp] = backward_ce(peer, cp, batch.labels);
          (void)lo;
          (void)lp;
          clip_global_norm_inplace(go.span(), opts.clip_norm);
          clip_global_norm_inplace(gp.span(), opts.clip_norm);
          sgd_step(own.params().span(), go.span(), so);
          sgd_step(peer.params().span(), gp.span(), sp);
        } else {
          ForwardCache co, cp;
          Matrix po = own.forward(batch.x, &co);
          Matrix pp = peer.forward(batch.x, &cp);
          Matrix dlo = ce_dlogits(po, batch.labels);
          Matrix dlp = ce_dlogits(pp, batch.labels);
          KlResult ko = kl_grad(po, pp);
          KlResult kp = kl_grad(pp, po);
          for (std::size_t t = 0; t < dlo.values.size(); ++t) {
            dlo.values[t] = (1.0 - beta) * dlo.values[t] + beta * ko.dlogits_student.values[t];
            dlp.values[t] = (1.0 - beta) * dlp.values[t] + beta * kp.dlogits_student.values[t];
          }
          ParamVector go = own.backward_from_dlogits(co, dlo);
          ParamVector gp = peer.backward_from_dlogits(cp, dlp);
          clip_global_norm_inplace(go.span(), opts.clip_norm);
          clip_global_norm_inplace(gp.span(), opts.clip_norm);
          sgd_step(own.params().span(), go.span(), so);
          sgd_step(peer.params().span(), gp.span(), sp);
        }
      }
      // one distillation pass over the shared unlabeled pool per epoch;
      // teacher is the client's previous personalized model
      if (distill > 0.0 && env.unlabeled.rows > 0) {
        auto pool_batches = epoch_batches(env.unlabeled.rows, opts.batch_size, drng);
        for (const auto& idx : pool_batches) {
          Matrix px(idx.size(), env.unlabeled.cols);
          for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy_n(env.unlabeled.values.begin() +
                            static_cast<std::ptrdiff_t>(idx[r] * env.unlabeled.cols),
                        env.unlabeled.cols,
                        px.values.begin() + static_cast<std::ptrdiff_t>(r * env.unlabeled.cols));
          ForwardCache co;
          Matrix po = own.forward(px, &co);
          Matrix pt = teacher.forward(px);
          KlResult kd = kl_grad(po, pt);
          for (double& v : kd.dlogits_student.values) v *= distill;
          ParamVector go = own.backward_from_dlogits(co, kd.dlogits_student);
          clip_global_norm_inplace(go.span(), opts.clip_norm);
          sgd_step(own.params().span(), go.span(), sd);
        }
      }
    }
    own_trained_[ci] = own.params();
    peer_trained_[ci] = peer.params();
  }

  void aggregate(const RunEnv& env, int) override {
    const double beta = env.cfg->fedme_beta;
    std::vector<ParamVector> next = own_trained_;
    if (beta > 0.0) {
      for (std::size_t j = 0; j < personal_.size(); ++j) {
        std::vector<Upload> copies;
        for (std::size_t i = 0; i < personal_.size(); ++i)
          if (peer_[i] == static_cast<int>(j) && i != j)
            copies.push_back({static_cast<int>(i), peer_trained_[i], 1});
        if (copies.empty()) continue;
        ParamVector mean = aggregate_weighted(std::move(copies));
        for (std::size_t t = 0; t < next[j].size(); ++t)
          next[j].values()[t] = (1.0 - beta) * own_trained_[j].values()[t] +
                                beta * mean.values()[t];
      }
    }
    personal_ = std::move(next);
  }

  const ParamVector& validation_model(int client) const override {
    return own_trained_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return personal_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int client) const override {
    return own_trained_[static_cast<std::size_t>(client)].size() +
           peer_trained_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig&) const override {
    return exchange_plan_for("fedme");
  }
  const ParamVector* shared_model() const override { return &cluster_avgs_.front(); }
  std::vector<int> cluster_assignments() const override { return assignment_; }

 private:
  std::vector<ParamVector> personal_;
  std::vector<ParamVector> own_trained_, peer_trained_;
  std::vector<int> assignment_, peer_;
  std::vector<ParamVector> cluster_avgs_;
};

// Model splitting: the shared selector is aggregated by the server, the rest
// stays private on the client. The full model trains jointly.
class SplitStrategy : public Strategy {
 public:
  SplitStrategy(Selector shared, std::string method)
      : shared_(shared), method_(std::move(method)) {}

  void setup(const RunEnv& env) override {
    ParamVector init = global_init(env);
    full_.assign(env.clients.size(), init);
    shared_global_ = init.split_view(shared_);
    uploads_.assign(env.clients.size(), shared_global_);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    full_[ci].assign_view(shared_global_);
    MlpModel model(env.model_spec, full_[ci]);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    local_update_sgd(model, env.clients[ci].train, rng, opts);
    full_[ci] = model.params();
    uploads_[ci] = full_[ci].split_view(shared_);
  }

  void aggregate(const RunEnv& env, int) override {
    std::vector<Upload> ups;
    for (std::size_t i = 0; i < uploads_.size(); ++i)
      ups.push_back({static_cast<int>(i), uploads_[i],
                     env.client_weight(static_cast<int>(i))});
    shared_global_ = aggregate_weighted(std::move(ups));
  }

  const ParamVector& validation_model(int client) const override {
    return full_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return full_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int client) const override {
    return uploads_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig& cfg) const override {
    if (method_ == "split_all")  // test-only degenerate configuration
      return {{{Direction::kDown, Selector::kAll, 1}, {Direction::kUp, Selector::kAll, 1}}};
    return exchange_plan_for(method_, cfg.hypcluster_k);
  }
  const ParamVector* shared_model() const override { return &shared_global_; }

 protected:
  Selector shared_;
  std::string method_;
  ParamVector shared_global_;
  std::vector<ParamVector> full_;
  std::vector<ParamVector> uploads_;
};

// FedRep: HEAD trains first with BODY frozen, then BODY with HEAD frozen;
// only the BODY is exchanged.
class FedRepStrategy : public SplitStrategy {
 public:
  FedRepStrategy() : SplitStrategy(Selector::kBody, "fedrep") {}

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    full_[ci].assign_view(shared_global_);
    MlpModel model(env.model_spec, full_[ci]);

    std::vector<char> head_mask(full_[ci].size(), 0), body_mask(full_[ci].size(), 0);
    for (std::size_t s = 0; s < full_[ci].segments().size(); ++s) {
      const Segment& seg = full_[ci].segments()[s];
      std::vector<char>& m = (seg.tag == SplitTag::kHead) ? head_mask : body_mask;
      std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(seg.offset), seg.length, 1);
    }

    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    const Dataset& train = env.clients[ci].train;
    opts.epochs = env.cfg->fedrep_head_epochs;
    opts.update_mask = &head_mask;
    if (opts.epochs > 0) local_update_sgd(model, train, rng, opts);
    opts.epochs = env.cfg->fedrep_body_epochs;
    opts.update_mask = &body_mask;
    if (opts.epochs > 0) local_update_sgd(model, train, rng, opts);

    full_[ci] = model.params();
    uploads_[ci] = full_[ci].split_view(shared_);
  }
};

// Two tracks: a FedAvg-aggregated global track and a personalized track
// pulled toward the freshly downloaded global model.
class DittoStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    global_ = global_init(env);
    personal_.assign(env.clients.size(), global_);
    global_local_.assign(env.clients.size(), global_);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    const Dataset& train = env.clients[ci].train;
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);

    // global track first: the exact FedAvg update
    MlpModel g(env.model_spec, global_);
    {
      RngStream rng = batch_stream(env, client, round);
      local_update_sgd(g, train, rng, opts);
    }
    global_local_[ci] = g.params();

    // personalized track sees the same batch order
    MlpModel p(env.model_spec, personal_[ci]);
    {
      RngStream rng = batch_stream(env, client, round);
      const double lambda = env.cfg->ditto_lambda;
      if (lambda != 0.0) {
        const ParamVector& anchor = global_;
        ExtraGrad pull = [&anchor, lambda](std::span<const double> w,
                                           std::span<double> grad) {
          const auto& a = anchor.values();
          for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] += lambda * (w[i] - a[i]);
        };
        local_update_sgd(p, train, rng, opts, pull);
      } else {
        local_update_sgd(p, train, rng, opts);
      }
    }
    personal_[ci] = p.params();
  }

  void aggregate(const RunEnv& env, int) override {
    std::vector<Upload> ups;
    for (std::size_t i = 0; i < global_local_.size(); ++i)
      ups.push_back({static_cast<int>(i), global_local_[i],
                     env.client_weight(static_cast<int>(i))});
    global_ = aggregate_weighted(std::move(ups));
  }

  const ParamVector& validation_model(int client) const override {
    return personal_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return personal_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int client) const override {
    return global_local_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig&) const override {
    return exchange_plan_for("ditto");
  }
  const ParamVector* shared_model() const override { return &global_; }

 private:
  ParamVector global_;
  std::vector<ParamVector> personal_;
  std::vector<ParamVector> global_local_;
};

// Moreau-envelope personalization: per batch, K inner gradient steps solve
// the proximal subproblem; the outer iterate moves along lambda * (w - theta).
class PFedMeStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    global_ = global_init(env);
    theta_.assign(env.clients.size(), global_);
    w_local_.assign(env.clients.size(), global_);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    const Dataset& train = env.clients[ci].train;
    const FederationConfig& cfg = *env.cfg;
    const double lambda = cfg.pfedme_lambda;
    const double inner_lr = cfg.resolved_pfedme_inner_lr();
    const double outer_lr = cfg.learning_rate;

    ParamVector w = global_;
    ParamVector theta = w;
    MlpModel probe(env.model_spec, w);
    RngStream rng = batch_stream(env, client, round);
    if (train.size() > 0) {
      for (int e = 0; e < cfg.local_epochs; ++e) {
        auto batches = epoch_batches(train.size(), cfg.batch_size, rng);
        for (const auto& idx : batches) {
          Dataset batch = take(train, idx);
          auto grad_f = [&](std::span<const double> point, std::span<double> out) {
            MlpModel m(env.model_spec, ParamVector(
                std::vector<double>(point.begin(), point.end()), w.segments()));
            ForwardCache cache;
            m.forward(batch.x, &cache);
            Matrix d = ce_dlogits(cache.probabilities, batch.labels);
            ParamVector g = m.backward_from_dlogits(cache, d);
            std::copy(g.values().begin(), g.values().end(), out.begin());
          };
          std::vector<double> th = prox_inner_steps(w.span(), cfg.pfedme_k, lambda,
                                                    inner_lr, 20.0, grad_f);
          std::vector<double> envelope(w.size());
          for (std::size_t t = 0; t < w.size(); ++t)
            envelope[t] = lambda * (w.values()[t] - th[t]);
          clip_global_norm_inplace(envelope, 20.0);
          for (std::size_t t = 0; t < w.size(); ++t)
            w.values()[t] -= outer_lr * envelope[t];
          theta = ParamVector(std::move(th), w.segments());
        }
      }
    }
    w_local_[ci] = std::move(w);
    theta_[ci] = std::move(theta);
  }

  void aggregate(const RunEnv& env, int) override {
    std::vector<Upload> ups;
    for (std::size_t i = 0; i < w_local_.size(); ++i)
      ups.push_back({static_cast<int>(i), w_local_[i],
                     env.client_weight(static_cast<int>(i))});
    global_ = aggregate_weighted(std::move(ups));
  }

  const ParamVector& validation_model(int client) const override {
    return theta_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return theta_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int client) const override {
    return w_local_[static_cast<std::size_t>(client)].size();
  }
  ExchangePlan plan(const FederationConfig&) const override {
    return exchange_plan_for("pfedme");
  }
  const ParamVector* shared_model() const override { return &global_; }

 private:
  ParamVector global_;
  std::vector<ParamVector> theta_;
  std::vector<ParamVector> w_local_;
};

// Each client trains its own model; nothing is exchanged.
class LocalOnlyStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    models_.assign(env.clients.size(), global_init(env));
  }

  void client_round(const RunEnv& env, int client, int round) override {
    const std::size_t ci = static_cast<std::size_t>(client);
    MlpModel model(env.model_spec, models_[ci]);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, client, round);
    local_update_sgd(model, env.clients[ci].train, rng, opts);
    models_[ci] = model.params();
  }

  void aggregate(const RunEnv&, int) override {}

  const ParamVector& validation_model(int client) const override {
    return models_[static_cast<std::size_t>(client)];
  }
  const ParamVector& test_model(int client) const override {
    return models_[static_cast<std::size_t>(client)];
  }
  std::size_t upload_size(int) const override { return 0; }
  ExchangePlan plan(const FederationConfig&) const override { return {}; }

 private:
  std::vector<ParamVector> models_;
};

// One model trained on the pooled (pre-partition) train data, as pseudo
// client 0; ignores the partition plan entirely.
class CentralizedStrategy : public Strategy {
 public:
  void setup(const RunEnv& env) override {
    model_ = global_init(env);
    RngStream rng(env.run_seed, stream_id(stream::kSplit, 0));
    TrainValSplit split = split_train_val(env.central_train,
                                          env.cfg->split_train_part,
                                          env.cfg->split_val_part, rng);
    pooled_train_ = std::move(split.train);
  }

  void client_round(const RunEnv& env, int client, int round) override {
    if (client != 0) return;
    MlpModel model(env.model_spec, model_);
    LocalTrainOpts opts = LocalTrainOpts::from(*env.cfg);
    RngStream rng = batch_stream(env, 0, round);
    local_update_sgd(model, pooled_train_, rng, opts);
    model_ = model.params();
  }

  void aggregate(const RunEnv&, int) override {}

  const ParamVector& validation_model(int) const override { return model_; }
  const ParamVector& test_model(int) const override { return model_; }
  std::size_t upload_size(int) const override { return 0; }
  ExchangePlan plan(const FederationConfig&) const override { return {}; }
  const ParamVector* shared_model() const override { return &model_; }

 private:
  ParamVector model_;
  Dataset pooled_train_;
};

}  // namespace

std::unique_ptr<Strategy> make_strategy(const FederationConfig& cfg) {
  if (cfg.method == "fedavg") return std::make_unique<FedAvgStrategy>(0.0, "fedavg");
  if (cfg.method == "fedprox")
    return std::make_unique<FedAvgStrategy>(cfg.fedprox_mu, "fedprox");
  if (cfg.method == "hypcluster") return std::make_unique<HypClusterStrategy>();
  if (cfg.method == "fml") return std::make_unique<FmlStrategy>();
  if (cfg.method == "fedme") return std::make_unique<FedMeStrategy>();
  if (cfg.method == "lgfedavg")
    return std::make_unique<SplitStrategy>(Selector::kHead, "lgfedavg");
  if (cfg.method == "fedper")
    return std::make_unique<SplitStrategy>(Selector::kBody, "fedper");
  if (cfg.method == "fedrep") return std::make_unique<FedRepStrategy>();
  if (cfg.method == "ditto") return std::make_unique<DittoStrategy>();
  if (cfg.method == "pfedme") return std::make_unique<PFedMeStrategy>();
  if (cfg.method == "local_only") return std::make_unique<LocalOnlyStrategy>();
  if (cfg.method == "centralized") return std::make_unique<CentralizedStrategy>();
  throw InvalidArgument("make_strategy: unknown method '" + cfg.method + "'");
}

std::unique_ptr<Strategy> make_split_strategy(Selector shared) {
  return std::make_unique<SplitStrategy>(shared, "split_all");
}

ParamVector fine_tune(const MlpSpec& spec, ParamVector params,
                      const Dataset& train, const FederationConfig& cfg,
                      std::uint64_t run_seed, int client) {
  if (cfg.ft_epochs == 0) return params;
  MlpModel model(spec, std::move(params));
  LocalTrainOpts opts = LocalTrainOpts::from(cfg);
  opts.epochs = cfg.ft_epochs;
  opts.learning_rate = cfg.resolved_ft_learning_rate();
  RngStream rng(run_seed,
                stream_id(stream::kFinetune, static_cast<std::uint64_t>(client)));
  local_update_sgd(model, train, rng, opts);
  return std::move(model.params());
}

}  // namespace fedsim
