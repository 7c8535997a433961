// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>

#include "fedsim/accounting.hpp"
#include "fedsim/data.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/models.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Local training.
// ---------------------------------------------------------------------------

// Adds a term to the loss gradient before clipping (proximal and
// regularization pulls). Receives the current parameters and the gradient to
// modify.
using ExtraGrad =
    std::function<void(std::span<const double>, std::span<double>)>;

struct LocalTrainOpts {
  int epochs = 2;
  int batch_size = 20;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 20.0;
  // When set, coordinates with mask 0 are frozen: their gradient is dropped
  // and neither velocity nor value moves.
  const std::vector<char>* update_mask = nullptr;

  static LocalTrainOpts from(const FederationConfig& cfg) {
    LocalTrainOpts o;
    o.epochs = cfg.local_epochs;
    o.batch_size = cfg.batch_size;
    o.learning_rate = cfg.learning_rate;
    return o;
  }
};

// Shuffled batch index lists for one epoch (last partial batch included).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    int batch_size,
                                                    RngStream& rng);

// E epochs of mini-batch SGD (momentum, weight decay, global-norm clipping on
// the composite gradient). The batch order is drawn from `rng`; streams keyed
// per (client, round) make this independent of execution order. Returns the
// mean CE loss of each epoch.
std::vector<double> local_update_sgd(MlpModel& model, const Dataset& train,
                                     RngStream& rng, const LocalTrainOpts& opts,
                                     const ExtraGrad& extra = {});

// Deep mutual learning on a shared batch sequence. Each model's logit
// gradient is (1-beta)*dCE + beta*dKL(other's snapshot || own); both models
// step on every batch. beta = 0 decouples into two plain CE trajectories.
void mutual_train(MlpModel& a, MlpModel& b, const Dataset& train,
                  RngStream& rng, const LocalTrainOpts& opts, double beta);

// K plain gradient steps on f(theta) + (lambda/2)*||theta - w||^2 starting
// from theta = w; `grad_f` writes the gradient of f at the given point. The
// composite gradient is norm-clipped before each step.
std::vector<double> prox_inner_steps(
    std::span<const double> w, int k, double lambda, double inner_lr,
    double clip_norm,
    const std::function<void(std::span<const double>, std::span<double>)>& grad_f);

// ---------------------------------------------------------------------------
// Aggregation: sum_i (n_i / sum_j n_j) * w_i. Uploads are reduced in client-id
// order regardless of the order they arrive in, so the result is bitwise
// permutation-invariant.
// ---------------------------------------------------------------------------
struct Upload {
  int client_id = 0;
  ParamVector params;
  std::size_t weight = 1;
};

ParamVector aggregate_weighted(std::vector<Upload> uploads);

// ---------------------------------------------------------------------------
// Strategy interface: one object drives a method through T rounds.
// ---------------------------------------------------------------------------
struct RunEnv {
  const FederationConfig* cfg = nullptr;
  std::uint64_t run_seed = 0;
  MlpSpec model_spec;
  std::vector<ClientData> clients;
  Dataset central_train;  // pre-partition train data (post subsampling)
  Matrix unlabeled;       // shared unlabeled pool; rows == 0 when unused
  std::string partition_json;  // audit export, filled when cfg.dump_partition

  std::size_t client_weight(int i) const { return clients[static_cast<std::size_t>(i)].train.size(); }
};

class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual void setup(const RunEnv& env) = 0;

  // Server-side work at the start of a round (clustering and the like).
  virtual void begin_round(const RunEnv& env, int round) { (void)env; (void)round; }

  // Local training for one client. Touches only state owned by that client,
  // so distinct clients may run in parallel.
  virtual void client_round(const RunEnv& env, int client, int round) = 0;

  // Folds the staged uploads into server state; runs after every
  // client_round of the round, sequentially.
  virtual void aggregate(const RunEnv& env, int round) = 0;

  // Model the client evaluates on its validation split this round (after its
  // local training, before aggregation).
  virtual const ParamVector& validation_model(int client) const = 0;

  // Model the client tests with after the final round (before optional
  // fine-tuning).
  virtual const ParamVector& test_model(int client) const = 0;

  // Parameters actually staged for upload by this client in the last round.
  virtual std::size_t upload_size(int client) const = 0;

  virtual ExchangePlan plan(const FederationConfig& cfg) const = 0;

  // The server-side aggregated model, where the method has one (the global
  // model, the exchanged meme model, the first cluster model, the shared
  // part). Null for purely local methods.
  virtual const ParamVector* shared_model() const { return nullptr; }

  // Current client-to-cluster assignment for clustering methods.
  virtual std::vector<int> cluster_assignments() const { return {}; }
};

std::unique_ptr<Strategy> make_strategy(const FederationConfig& cfg);

// Model-splitting strategy over an explicit shared selector; exposed for the
// degenerate all-shared configuration used in tests.
std::unique_ptr<Strategy> make_split_strategy(Selector shared);

// F epochs of plain local training starting from the given parameters;
// F = 0 returns them unchanged. Used after the final round, before testing.
ParamVector fine_tune(const MlpSpec& spec, ParamVector params,
                      const Dataset& train, const FederationConfig& cfg,
                      std::uint64_t run_seed, int client);

}  // namespace fedsim
