// SPDX-License-Identifier: Apache-2.0
#include "fedsim/engine.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace fedsim {

double evaluate(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data) {
  if (data.size() == 0) return 0.0;
  MlpModel model(spec, params);
  std::size_t correct = 0;
  const std::size_t chunk = 512;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    std::size_t end = std::min(data.size(), start + chunk);
    Matrix x(end - start, data.dim());
    std::copy_n(data.x.values.begin() + static_cast<std::ptrdiff_t>(start * data.dim()),
                (end - start) * data.dim(), x.values.begin());
    Matrix probs = model.forward(x);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      const double* row = probs.values.data() + i * probs.cols;
      std::size_t arg = 0;
      for (std::size_t j = 1; j < probs.cols; ++j)
        if (row[j] > row[arg]) arg = j;  // ties keep the lowest index
      if (static_cast<int>(arg) == data.labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

std::pair<Dataset, Dataset> load_source_data(const FederationConfig& cfg,
                                             std::uint64_t run_seed) {
  Dataset train, test;
  if (cfg.dataset == "synthetic") {
    RngStream rng(run_seed, stream_id(stream::kData));
    Dataset full = generate_synthetic(cfg.classes, cfg.features, cfg.samples,
                                      cfg.class_separation, cfg.noise, rng);
    std::size_t n_test = static_cast<std::size_t>(
        std::floor(cfg.test_fraction * static_cast<double>(full.size())));
    std::size_t n_train = full.size() - n_test;
    std::vector<std::size_t> tr(n_train), te(n_test);
    for (std::size_t i = 0; i < n_train; ++i) tr[i] = i;
    for (std::size_t i = 0; i < n_test; ++i) te[i] = n_train + i;
    train = take(full, tr);
    test = take(full, te);
  } else if (cfg.dataset == "idx") {
    train = load_idx(cfg.train_images, cfg.train_labels);
    test = load_idx(cfg.test_images, cfg.test_labels);
  } else if (cfg.dataset == "csv") {
    train = load_csv(cfg.train_csv);
    test = load_csv(cfg.test_csv);
  } else {
    throw InvalidArgument("unknown dataset kind '" + cfg.dataset + "'");
  }
  int classes = std::max(train.classes, test.classes);
  train.classes = classes;
  test.classes = classes;
  return {std::move(train), std::move(test)};
}

}  // namespace

RunEnv build_run_env(const FederationConfig& cfg, std::uint64_t run_seed) {
  RunEnv env;
  env.cfg = &cfg;
  env.run_seed = run_seed;

  auto [train, test] = load_source_data(cfg, run_seed);

  if (cfg.data_ratio < 1.0) {
    RngStream tr_rng(run_seed, stream_id(stream::kSubsample, 0));
    RngStream te_rng(run_seed, stream_id(stream::kSubsample, 1));
    train = subsample_ratio(train, cfg.data_ratio, tr_rng);
    test = subsample_ratio(test, cfg.data_ratio, te_rng);
  }

  if (cfg.method == "fedme" && cfg.fedme_unlabeled > 0) {
    RngStream rng(run_seed, stream_id(stream::kUnlabeled));
    UnlabeledExtract ex = extract_unlabeled(train, cfg.fedme_unlabeled, rng);
    env.unlabeled = std::move(ex.unlabeled);
    train = std::move(ex.remaining);
  }

  RngStream part_rng(run_seed, stream_id(stream::kPartition));
  PartitionPlan plan =
      partition_dirichlet(train, test, cfg.clients, cfg.alpha_label, part_rng);
  if (cfg.dump_partition) env.partition_json = plan.to_json();

  env.model_spec.layer_sizes.push_back(static_cast<int>(train.dim()));
  for (int h : cfg.hidden) env.model_spec.layer_sizes.push_back(h);
  env.model_spec.layer_sizes.push_back(train.classes);

  env.clients.resize(static_cast<std::size_t>(cfg.clients));
  for (int i = 0; i < cfg.clients; ++i) {
    Dataset client_train = take(train, plan.train_indices[static_cast<std::size_t>(i)]);
    RngStream split_rng(run_seed,
                        stream_id(stream::kSplit, static_cast<std::uint64_t>(i)));
    TrainValSplit split = split_train_val(client_train, cfg.split_train_part,
                                          cfg.split_val_part, split_rng);
    ClientData& cd = env.clients[static_cast<std::size_t>(i)];
    cd.train = std::move(split.train);
    cd.validation = std::move(split.validation);
    cd.degenerate = split.degenerate;
    cd.test = take(test, plan.test_indices[static_cast<std::size_t>(i)]);
  }
  env.central_train = std::move(train);
  return env;
}

RunResult run_federation(const FederationConfig& cfg, std::uint64_t run_seed) {
  validate(cfg);
  RunEnv env = build_run_env(cfg, run_seed);
  std::unique_ptr<Strategy> strategy = make_strategy(cfg);
  strategy->setup(env);

  const long long traffic =
      strategy->plan(cfg).params_per_round(arch_from_mlp(env.model_spec));

  RunResult result;
  result.run_seed = run_seed;
  result.partition_json = std::move(env.partition_json);

  for (int round = 0; round < cfg.rounds; ++round) {
    auto t0 = std::chrono::steady_clock::now();
    strategy->begin_round(env, round);

    if (cfg.threads > 1) {
      std::vector<std::thread> workers;
      std::size_t per = (env.clients.size() + static_cast<std::size_t>(cfg.threads) - 1) /
                        static_cast<std::size_t>(cfg.threads);
      for (int t = 0; t < cfg.threads; ++t) {
        std::size_t lo = static_cast<std::size_t>(t) * per;
        std::size_t hi = std::min(env.clients.size(), lo + per);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi] {
          for (std::size_t i = lo; i < hi; ++i)
            strategy->client_round(env, static_cast<int>(i), round);
        });
      }
      for (auto& w : workers) w.join();
    } else {
      for (std::size_t i = 0; i < env.clients.size(); ++i)
        strategy->client_round(env, static_cast<int>(i), round);
    }

    RoundMetrics metrics;
    metrics.round = round;
    metrics.traffic_params = traffic;
    double sum = 0.0;
    for (std::size_t i = 0; i < env.clients.size(); ++i) {
      double acc = evaluate(env.model_spec,
                            strategy->validation_model(static_cast<int>(i)),
                            env.clients[i].validation);
      metrics.client_val_acc.push_back(acc);
      sum += acc;
    }
    metrics.mean_val_acc = sum / static_cast<double>(env.clients.size());

    strategy->aggregate(env, round);

    metrics.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    result.rounds.push_back(std::move(metrics));
  }

  // test evaluation: micro average over every client's test samples
  std::size_t total = 0, correct_no_ft = 0, correct_final = 0;
  for (std::size_t i = 0; i < env.clients.size(); ++i) {
    const Dataset& test = env.clients[i].test;
    const ParamVector& base = strategy->test_model(static_cast<int>(i));
    double acc_no_ft = evaluate(env.model_spec, base, test);
    double acc_final = acc_no_ft;
    if (cfg.fine_tune) {
      ParamVector tuned = fine_tune(env.model_spec, base, env.clients[i].train,
                                    cfg, run_seed, static_cast<int>(i));
      acc_final = evaluate(env.model_spec, tuned, test);
    }
    result.client_test_acc.push_back(acc_final);
    total += test.size();
    correct_no_ft += static_cast<std::size_t>(
        std::llround(acc_no_ft * static_cast<double>(test.size())));
    correct_final += static_cast<std::size_t>(
        std::llround(acc_final * static_cast<double>(test.size())));
  }
  result.test_accuracy =
      total == 0 ? 0.0 : static_cast<double>(correct_final) / static_cast<double>(total);
  result.test_accuracy_no_ft =
      total == 0 ? 0.0 : static_cast<double>(correct_no_ft) / static_cast<double>(total);
  return result;
}

RunSummary run_repeats_with_seeds(const FederationConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw InvalidArgument("run_repeats: need at least one seed");
  RunSummary summary;
  summary.config = cfg;
  summary.seeds = seeds;
  std::vector<double> accs, accs_no_ft;
  for (std::uint64_t s : seeds) {
    summary.runs.push_back(run_federation(cfg, s));
    accs.push_back(summary.runs.back().test_accuracy);
    accs_no_ft.push_back(summary.runs.back().test_accuracy_no_ft);
  }
  summary.test_stats = summarize(accs);
  summary.test_stats_no_ft = summarize(accs_no_ft);
  return summary;
}

RunSummary run_repeats(const FederationConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < cfg.repeats; ++r)
    seeds.push_back(derive_run_seed(cfg.seed, r));
  return run_repeats_with_seeds(cfg, seeds);
}

}  // namespace fedsim
