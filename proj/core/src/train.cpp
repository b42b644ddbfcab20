#include "hpsmp/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hpsmp/errors.hpp"
#include "hpsmp/log.hpp"
#include "hpsmp/optim.hpp"

namespace hpsmp {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ContractError("train: lr must be > 0");
  if (batch_size < 1) throw ContractError("train: batch size must be >= 1");
  if (epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (horizon < 1) throw ContractError("train: horizon must be >= 1");
  model.validate();
}

namespace {

std::vector<std::size_t> labeled_subset(const LabeledDataset& dataset,
                                        const std::vector<std::size_t>& indices) {
  std::vector<std::size_t> out;
  for (std::size_t i : indices) {
    if (dataset.days[i].label.has_value()) out.push_back(i);
  }
  return out;
}

struct SplitStats {
  double loss = std::numeric_limits<double>::quiet_NaN();
  double acc = std::numeric_limits<double>::quiet_NaN();
};

SplitStats infer_stats(Model& model, const std::vector<DayRecord>& days,
                       const std::vector<std::size_t>& indices) {
  SplitStats stats;
  if (indices.empty()) return stats;
  double loss_sum = 0.0;
  long correct = 0;
  for (std::size_t i : indices) {
    Graph graph;
    ForwardContext ctx;
    Tensor score = forward_day(graph, model, days[i], ctx);
    const double target = static_cast<double>(*days[i].label);
    loss_sum += graph.bce_loss(score, target).item();
    const int predicted = score.item() >= 0.5 ? 1 : 0;
    if (predicted == *days[i].label) ++correct;
  }
  stats.loss = loss_sum / static_cast<double>(indices.size());
  stats.acc = static_cast<double>(correct) / static_cast<double>(indices.size());
  return stats;
}

}  // namespace

TrainResult train(const LabeledDataset& dataset, EmbeddingTable embedding,
                  const TrainConfig& config) {
  config.validate();
  std::vector<std::size_t> train_days = labeled_subset(dataset, dataset.train_idx);
  std::vector<std::size_t> val_days = labeled_subset(dataset, dataset.val_idx);
  if (train_days.empty()) throw ContractError("train: no labeled training days");

  // Detach from the caller's storage so repeated runs from one table are
  // independent and seed-reproducible.
  embedding.matrix = embedding.matrix.clone();
  const PriceNormalizer norm = PriceNormalizer::fit(dataset.days, train_days);
  Model model = build_model(config.model, std::move(embedding), norm, config.seed);

  Rng shuffle_rng = Rng::substream(config.seed, "shuffle");
  Rng dropout_rng = Rng::substream(config.seed, "dropout");
  AdamState adam;
  AdamConfig adam_config;
  adam_config.lr = config.lr;

  TrainResult result;
  Model last_good = model.clone();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = train_days;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    long epoch_correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Graph graph;
      model.params.watch_all(graph);
      ForwardContext ctx;
      ctx.mode = Mode::Train;
      ctx.dropout_rng = &dropout_rng;
      Tensor loss_sum;
      for (std::size_t b = start; b < end; ++b) {
        const DayRecord& day = dataset.days[order[b]];
        Tensor score = forward_day(graph, model, day, ctx);
        const double target = static_cast<double>(*day.label);
        Tensor loss = graph.bce_loss(score, target);
        loss_sum = loss_sum.defined() ? graph.add(loss_sum, loss) : loss;
        if ((score.item() >= 0.5 ? 1 : 0) == *day.label) ++epoch_correct;
      }
      Tensor batch_loss = graph.scale(loss_sum, 1.0 / static_cast<double>(end - start));
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        log_warning("train: non-finite loss in epoch " + std::to_string(epoch) +
                    ", aborting with the last finite snapshot");
        result.model = std::move(last_good);
        result.aborted_non_finite = true;
        result.completed_epochs = epoch - 1;
        return result;
      }
      epoch_loss += loss_value * static_cast<double>(end - start);
      graph.backward(batch_loss);
      model.embedding.mask_frozen_rows();
      adam.step(model.params, adam_config);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(order.size());
    stats.train_acc =
        static_cast<double>(epoch_correct) / static_cast<double>(order.size());
    const SplitStats val = infer_stats(model, dataset.days, val_days);
    stats.val_loss = val.loss;
    stats.val_acc = val.acc;
    result.curves.push_back(stats);
    last_good = model.clone();
    result.completed_epochs = epoch;
  }
  result.model = std::move(model);
  return result;
}

void fill_metrics(EvalReport& report) {
  const long total = report.tp + report.fp + report.tn + report.fn;
  report.accuracy.reset();
  report.sensitivity.reset();
  report.specificity.reset();
  if (total > 0) {
    report.accuracy = static_cast<double>(report.tp + report.tn) / static_cast<double>(total);
  }
  if (report.tp + report.fn > 0) {
    report.sensitivity =
        static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn);
  }
  if (report.tn + report.fp > 0) {
    report.specificity =
        static_cast<double>(report.tn) / static_cast<double>(report.tn + report.fp);
  }
}

EvalReport evaluate(Model& model, const std::vector<DayRecord>& days,
                    const std::vector<std::size_t>& indices) {
  EvalReport report;
  for (std::size_t i : indices) {
    const DayRecord& day = days[i];
    if (!day.label.has_value()) continue;
    const double score = predict(model, day);
    report.predictions.emplace_back(day.date, score);
    const int predicted = score >= 0.5 ? 1 : 0;
    if (*day.label == 1) {
      (predicted == 1 ? report.tp : report.fn) += 1;
    } else {
      (predicted == 0 ? report.tn : report.fp) += 1;
    }
  }
  if (report.predictions.empty()) throw ContractError("evaluate: no labeled days in split");
  fill_metrics(report);
  return report;
}

double predict(Model& model, const DayRecord& day) {
  Graph graph;
  ForwardContext ctx;
  return forward_day(graph, model, day, ctx).item();
}

void write_curves_csv(const std::string& path, const std::vector<EpochStats>& curves) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write curves CSV: " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  out.precision(17);
  for (const auto& s : curves) {
    out << s.epoch << "," << s.train_loss << "," << s.train_acc << "," << s.val_loss << ","
        << s.val_acc << "\n";
  }
}

void write_report_json(const std::string& path, const EvalReport& report,
                       const TrainConfig& config) {
  nlohmann::json j;
  j["confusion"] = {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}};
  auto metric = [](const std::optional<double>& m) {
    return m ? nlohmann::json(*m) : nlohmann::json(nullptr);
  };
  j["accuracy"] = metric(report.accuracy);
  j["sensitivity"] = metric(report.sensitivity);
  j["specificity"] = metric(report.specificity);
  j["seed"] = config.seed;
  j["horizon"] = config.horizon;
  j["lr"] = config.lr;
  j["batch_size"] = config.batch_size;
  j["epochs"] = config.epochs;
  j["model"] = nlohmann::json::parse(config_to_json_string(config.model));
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& [date, score] : report.predictions) {
    preds.push_back({{"date", to_string(date)}, {"score", score}});
  }
  j["predictions"] = preds;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report JSON: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace hpsmp
