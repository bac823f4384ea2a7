#include "samif/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "samif/errors.hpp"
#include "samif/ingest.hpp"
#include "samif/oracle.hpp"
#include "samif/samtrain.hpp"

namespace samif {

Dataset ingest(const ExperimentConfig& cfg) {
  if (cfg.dataset == "csv") {
    Dataset data = read_csv(cfg.csv_path, cfg.label_column);
    if (data.indices(Split::val).empty() && data.indices(Split::test).empty()) {
      assign_splits(data, cfg.val_fraction, cfg.test_fraction, cfg.sam.seed);
    }
    return data;
  }
  if (cfg.dataset == "idx") {
    Dataset data = read_idx(cfg.idx_images, cfg.idx_labels, cfg.idx_limit);
    assign_splits(data, cfg.val_fraction, cfg.test_fraction, cfg.sam.seed);
    return data;
  }
  return make_blobs(parse_blobs(cfg.dataset), cfg.val_size, cfg.test_size);
}

ModelSpec model_for(const ExperimentConfig& cfg, const Dataset& data) {
  std::size_t classes = static_cast<std::size_t>(std::max(data.max_label() + 1, 2));
  if (cfg.dataset != "csv" && cfg.dataset != "idx") classes = std::max(classes, parse_blobs(cfg.dataset).classes);
  switch (cfg.model) {
    case ModelKind::logistic: return ModelSpec::logistic(data.dim(), classes);
    case ModelKind::least_squares: return ModelSpec::least_squares(data.dim(), classes);
    case ModelKind::mlp: {
      std::vector<std::size_t> sizes{data.dim()};
      sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
      sizes.push_back(classes);
      return ModelSpec::mlp(sizes, cfg.activation);
    }
  }
  throw InvalidConfig("unknown model kind");
}

std::vector<std::uint32_t> rank_rows(std::span<const std::uint32_t> rows, std::span<const double> scores,
                                     bool descending) {
  if (rows.size() != scores.size()) throw InvalidInput("rank_rows: rows and scores differ in length");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    return rows[a] < rows[b];
  });
  std::vector<std::uint32_t> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(rows[i]);
  return out;
}

std::vector<std::uint32_t> flip_labels(Dataset& data, std::size_t classes, double fraction, std::uint64_t seed) {
  const auto train = data.indices(Split::train);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  std::vector<std::uint32_t> flipped;
  std::mt19937_64 rng(seed);
  std::sample(train.begin(), train.end(), std::back_inserter(flipped), count, rng);
  for (std::uint32_t r : flipped) {
    data.set_label(r, static_cast<int>((static_cast<std::size_t>(data.label(r)) + 1) % classes));
  }
  return flipped;
}

std::vector<TraceEntry> trace_misclassified(const ModelSpec& spec, const Dataset& data,
                                            const ParamVector& params,
                                            std::span<const InfluenceRecord> records, std::size_t m) {
  std::vector<std::uint32_t> rows;
  for (const auto& r : records) rows.push_back(r.k);
  const std::size_t keep = std::min(m, rows.size());

  std::vector<TraceEntry> out;
  for (std::uint32_t t : data.indices(Split::test)) {
    const Prediction pred = predict(spec, params, data.row(t));
    if (pred.label == data.label(t)) continue;
    const std::uint32_t one[1] = {t};
    const ParamVector g = validation_gradient(spec, params, data, one);
    std::vector<double> scores;
    scores.reserve(records.size());
    for (const auto& r : records) scores.push_back(influence_score(g, r.influence));

    TraceEntry entry{t, pred.label, {}, {}};
    std::vector<double> by_row(data.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) by_row[rows[i]] = scores[i];
    const auto desc = rank_rows(rows, scores, true);
    const auto asc = rank_rows(rows, scores, false);
    for (std::size_t i = 0; i < keep; ++i) {
      entry.helpful.emplace_back(desc[i], by_row[desc[i]]);
      entry.harmful.emplace_back(asc[i], by_row[asc[i]]);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

namespace {

struct Session {
  ExperimentConfig cfg;
  std::string digest;
  Dataset data;
  ModelSpec spec;
  std::vector<std::uint32_t> train, val, test;
};

Session open_session(const ExperimentConfig& cfg) {
  cfg.validate();
  Session s{cfg, cfg.digest_hex(), ingest(cfg), {}, {}, {}, {}};
  s.spec = model_for(cfg, s.data);
  s.train = s.data.indices(Split::train);
  s.val = s.data.indices(Split::val);
  s.test = s.data.indices(Split::test);
  if (s.train.empty()) throw InvalidConfig("dataset has no training rows");
  if (s.val.empty()) throw InvalidConfig("dataset has no validation rows");
  return s;
}

const std::vector<std::uint32_t>& eval_rows(const Session& s) { return s.test.empty() ? s.val : s.test; }

ReportRun run(const Session& s, const char* experiment, std::string metric, std::vector<double> x,
              std::vector<double> y, std::vector<double> wall = {}) {
  return {experiment, s.digest, std::move(metric), std::move(x), std::move(y), std::move(wall)};
}

std::size_t count_for(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

std::vector<InfluenceRecord> score_all(const Session& s, const TrainResult& trained) {
  AttributionSetup setup{s.cfg.neumann, s.cfg.gif_mode};
  return attribute(s.spec, s.data, s.cfg.sam, trained.params, &trained.trajectory, s.cfg.estimator,
                   s.train, s.val, setup);
}

std::vector<double> scores_of(const std::vector<InfluenceRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.score);
  return out;
}

double retrained_accuracy(const Session& s, std::span<const std::uint32_t> removed) {
  const TrainResult r = train_sam_without(s.spec, s.data, s.cfg.sam, removed, s.cfg.removal_mode);
  return accuracy(s.spec, r.params, s.data, eval_rows(s));
}

ParamVector summed_influence(const std::vector<InfluenceRecord>& records, std::span<const std::uint32_t> rows,
                             std::size_t P) {
  ParamVector total(P);
  for (std::uint32_t r : rows) {
    const auto it = std::find_if(records.begin(), records.end(), [&](const InfluenceRecord& rec) { return rec.k == r; });
    if (it == records.end()) throw InvalidInput("no influence record for row " + std::to_string(r));
    total += it->influence;
  }
  return total;
}

std::vector<std::uint32_t> random_rows(std::span<const std::uint32_t> train, std::size_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> out;
  std::mt19937_64 rng(seed);
  std::sample(train.begin(), train.end(), std::back_inserter(out), count, rng);
  return out;
}

constexpr std::uint64_t kControlSalt = 0xc0ffee1234567ULL;

}  // namespace

Report cmd_train(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::filesystem::create_directories(cfg.out);
  const std::string stem = "train_" + s.digest.substr(0, 16);
  write_trajectory(trained.trajectory, std::filesystem::path(cfg.out) / (stem + ".samt"));

  Report report;
  std::vector<double> steps, losses;
  const double scale = 1.0 / static_cast<double>(s.train.size());
  for (const auto& c : trained.trajectory.checkpoints) {
    steps.push_back(static_cast<double>(c.step));
    losses.push_back(subset_loss(s.spec, c.params, s.data, s.train, scale));
  }
  report.add(run(s, "train", "train_loss", steps, losses, {secs}));
  std::vector<double> acc{accuracy(s.spec, trained.params, s.data, s.train),
                          accuracy(s.spec, trained.params, s.data, s.val),
                          accuracy(s.spec, trained.params, s.data, s.test)};
  report.add(run(s, "train", "accuracy", {0, 1, 2}, acc));
  const Stationarity st = stationarity(s.spec, trained.params, s.data, cfg.sam);
  report.add(run(s, "train", "stationarity", {0, 1}, {st.loss_gradient_norm, st.regularized_gradient_norm}));
  std::vector<double> idx(trained.params.size());
  std::iota(idx.begin(), idx.end(), 0.0);
  report.add(run(s, "train", "params", idx, trained.params.values()));
  return report;
}

Report cmd_attribute(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  TrainResult trained;
  if (!cfg.trajectory.empty()) {
    trained.trajectory = read_trajectory(cfg.trajectory);
    if (trained.trajectory.header.config_digest != cfg.sam.digest()) {
      throw InvalidConfig("trajectory " + cfg.trajectory + " was recorded with different training settings");
    }
    trained.params = trained.trajectory.checkpoints.back().params;
    if (trained.params.size() != s.spec.param_count()) throw InvalidConfig("trajectory does not match the model");
  } else {
    trained = train_sam(s.spec, s.data, cfg.sam);
  }
  const auto records = score_all(s, trained);
  std::vector<double> ks, scores, norms, walls;
  for (const auto& r : records) {
    ks.push_back(r.k);
    scores.push_back(r.score);
    norms.push_back(norm2(r.influence));
    walls.push_back(r.wall_time);
  }
  Report report;
  report.add(run(s, "attribute", "influence_score", ks, scores, walls));
  report.add(run(s, "attribute", "influence_norm", ks, norms));
  return report;
}

Report cmd_valuate(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  const auto records = score_all(s, trained);
  const auto ranked = rank_rows(s.train, scores_of(records), true);
  const double baseline = accuracy(s.spec, trained.params, s.data, eval_rows(s));

  std::vector<double> fr, acc_retrain, acc_edit, acc_random, walls;
  for (std::size_t i = 0; i < cfg.removal_fractions.size(); ++i) {
    const double f = cfg.removal_fractions[i];
    const std::size_t m = count_for(f, s.train.size());
    fr.push_back(f);
    if (m == 0) {
      acc_retrain.push_back(baseline);
      acc_edit.push_back(baseline);
      acc_random.push_back(baseline);
      walls.push_back(0.0);
      continue;
    }
    const std::span<const std::uint32_t> top(ranked.data(), m);
    const auto start = std::chrono::steady_clock::now();
    acc_retrain.push_back(retrained_accuracy(s, top));
    walls.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    const ParamVector edited = edit_model(trained.params, summed_influence(records, top, trained.params.size()));
    acc_edit.push_back(accuracy(s.spec, edited, s.data, eval_rows(s)));
    acc_random.push_back(retrained_accuracy(s, random_rows(s.train, m, cfg.sam.seed ^ (kControlSalt + i))));
  }
  Report report;
  report.add(run(s, "valuate", "accuracy_retrain", fr, acc_retrain, walls));
  report.add(run(s, "valuate", "accuracy_edit", fr, acc_edit));
  report.add(run(s, "valuate", "accuracy_random", fr, acc_random));
  return report;
}

Report cmd_detect_noise(const ExperimentConfig& cfg) {
  if (!(cfg.flip_fraction > 0.0)) throw InvalidConfig("detect-noise needs flip_fraction > 0");
  Session s = open_session(cfg);
  const auto flipped = flip_labels(s.data, s.spec.num_classes(), cfg.flip_fraction, cfg.sam.seed ^ 0xf11bULL);
  if (flipped.empty()) throw InvalidConfig("flip_fraction selects no training rows");
  std::vector<char> is_flipped(s.data.size(), 0);
  for (auto r : flipped) is_flipped[r] = 1;

  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  const auto records = score_all(s, trained);
  const auto ranked = rank_rows(s.train, scores_of(records), false);
  std::vector<std::vector<std::uint32_t>> shuffles;
  std::mt19937_64 rng(cfg.sam.seed ^ kControlSalt);
  for (std::size_t r = 0; r < cfg.control_repeats; ++r) {
    std::vector<std::uint32_t> order = s.train;
    std::shuffle(order.begin(), order.end(), rng);
    shuffles.push_back(std::move(order));
  }
  const std::vector<std::uint32_t>& shuffled = shuffles.front();

  auto recall = [&](const std::vector<std::uint32_t>& order, double q) {
    const std::size_t m = count_for(q, order.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m; ++i) hits += is_flipped[order[i]];
    return static_cast<double>(hits) / static_cast<double>(flipped.size());
  };
  std::vector<double> qs, rec_is, rec_random;
  for (double q : cfg.inspect_fractions) {
    qs.push_back(q);
    rec_is.push_back(recall(ranked, q));
    double mean = 0.0;
    for (const auto& order : shuffles) mean += recall(order, q);
    rec_random.push_back(mean / static_cast<double>(shuffles.size()));
  }

  std::vector<double> fr, acc_is, acc_random;
  for (double f : cfg.removal_fractions) {
    const std::size_t m = count_for(f, s.train.size());
    fr.push_back(f);
    acc_is.push_back(retrained_accuracy(s, std::span<const std::uint32_t>(ranked.data(), m)));
    acc_random.push_back(retrained_accuracy(s, std::span<const std::uint32_t>(shuffled.data(), m)));
  }
  Report report;
  report.add(run(s, "detect-noise", "recall_is", qs, rec_is));
  report.add(run(s, "detect-noise", "recall_random", qs, rec_random));
  report.add(run(s, "detect-noise", "accuracy_remove_is", fr, acc_is));
  report.add(run(s, "detect-noise", "accuracy_remove_random", fr, acc_random));
  return report;
}

Report cmd_trace(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  const auto records = score_all(s, trained);
  const auto entries = trace_misclassified(s.spec, s.data, trained.params, records, cfg.top_m);
  Report report;
  std::vector<double> rows, predicted;
  for (const auto& e : entries) {
    rows.push_back(e.test_row);
    predicted.push_back(e.predicted);
  }
  report.add(run(s, "trace", "misclassified", rows, predicted));
  for (const auto& e : entries) {
    std::vector<double> hx, hy, bx, by;
    for (auto [k, v] : e.helpful) {
      hx.push_back(k);
      hy.push_back(v);
    }
    for (auto [k, v] : e.harmful) {
      bx.push_back(k);
      by.push_back(v);
    }
    report.add(run(s, "trace", "helpful_" + std::to_string(e.test_row), hx, hy));
    report.add(run(s, "trace", "harmful_" + std::to_string(e.test_row), bx, by));
  }
  return report;
}

Report cmd_edit(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  const auto records = score_all(s, trained);
  std::vector<std::uint32_t> removed = cfg.remove;
  if (removed.empty()) {
    const auto ranked = rank_rows(s.train, scores_of(records), false);
    removed.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count_for(cfg.edit_fraction, ranked.size())));
  }
  if (removed.empty()) throw InvalidConfig("edit selects no rows to remove");
  const ParamVector edited = edit_model(trained.params, summed_influence(records, removed, trained.params.size()));
  const TrainResult retrained = train_sam_without(s.spec, s.data, cfg.sam, removed, cfg.removal_mode);

  const auto& eval = eval_rows(s);
  Report report;
  report.add(run(s, "edit", "accuracy", {0, 1, 2},
                 {accuracy(s.spec, trained.params, s.data, eval), accuracy(s.spec, edited, s.data, eval),
                  accuracy(s.spec, retrained.params, s.data, eval)}));
  report.add(run(s, "edit", "param_distance", {0},
                 {norm2(edited - retrained.params) / norm2(trained.params)}));
  std::vector<double> rows(removed.begin(), removed.end());
  report.add(run(s, "edit", "removed", rows, std::vector<double>(rows.size(), 1.0)));
  return report;
}

Report cmd_calibrate(const ExperimentConfig& cfg) {
  Session s = open_session(cfg);
  const std::size_t sample = cfg.calibrate_sample == 0 ? s.train.size() : cfg.calibrate_sample;
  const auto ks = calibration_sample(s.data, sample, cfg.sam.seed);
  const TrainResult trained = train_sam(s.spec, s.data, cfg.sam);
  AttributionSetup setup{cfg.neumann, cfg.gif_mode};
  const auto records = attribute(s.spec, s.data, cfg.sam, trained.params, &trained.trajectory, cfg.estimator,
                                 ks, s.val, setup);
  const auto predicted = scores_of(records);
  const auto actual = loo_validation_changes(s.spec, s.data, cfg.sam, trained.params, ks, cfg.removal_mode);
  const CalibrationReport cal = calibration_report(predicted, actual, to_string(cfg.estimator));
  Report report;
  report.add(run(s, "calibrate", "calibration", {0, 1, 2}, {cal.pearson, cal.spearman, cal.sign_agreement}));
  report.add(run(s, "calibrate", "scatter", predicted, actual));
  return report;
}

}  // namespace samif
