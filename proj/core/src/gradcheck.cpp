#include "hpsmp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hpsmp {

GradCheckReport compare_gradients(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric, double tol,
                                  double guard) {
  GradCheckReport report;
  report.coords_checked = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!std::isfinite(analytic[i]) || !std::isfinite(numeric[i])) {
      report.finite = false;
      report.pass = false;
      report.worst_index = i;
      report.max_rel_err = std::numeric_limits<double>::infinity();
      return report;
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), guard});
    const double rel = std::abs(analytic[i] - numeric[i]) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

namespace {

double evaluate(const LossFn& f, ParamSet& params) {
  Graph graph;
  Tensor loss = f(graph, params);
  return loss.item();
}

}  // namespace

GradCheckReport grad_check(const LossFn& f, ParamSet& params, double tol, double fd_step,
                           double guard) {
  // Reverse-mode gradients in one pass.
  std::vector<double> analytic;
  std::vector<std::pair<std::string, std::size_t>> coord_names;
  {
    Graph graph;
    params.watch_all(graph);
    Tensor loss = f(graph, params);
    if (!std::isfinite(loss.item())) {
      GradCheckReport report;
      report.finite = false;
      return report;
    }
    graph.backward(loss);
    params.for_each([&](const std::string& name, Tensor& t, bool trainable) {
      if (!trainable) return;
      for (std::size_t i = 0; i < t.size(); ++i) {
        analytic.push_back(t.has_grad() ? t.grad_at(i) : 0.0);
        coord_names.emplace_back(name, i);
      }
    });
  }

  // Central differences, one coordinate at a time.
  std::vector<double> numeric;
  numeric.reserve(analytic.size());
  bool finite = true;
  params.for_each([&](const std::string&, Tensor& t, bool trainable) {
    if (!trainable) return;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + fd_step;
      const double up = evaluate(f, params);
      t.data()[i] = saved - fd_step;
      const double down = evaluate(f, params);
      t.data()[i] = saved;
      const double d = (up - down) / (2.0 * fd_step);
      if (!std::isfinite(d)) finite = false;
      numeric.push_back(d);
    }
  });

  GradCheckReport report = compare_gradients(analytic, numeric, tol, guard);
  if (!finite) {
    report.finite = false;
    report.pass = false;
  }
  if (!report.pass && report.worst_index < coord_names.size()) {
    report.worst_param = coord_names[report.worst_index].first;
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f,
                           const Tensor& point, double tol, double fd_step) {
  ParamSet params;
  params.add("x", point.clone());
  LossFn fn = [&f](Graph& graph, ParamSet& p) { return f(graph, p.at("x")); };
  return grad_check(fn, params, tol, fd_step);
}

}  // namespace hpsmp
