#include "pcrnn/analysis.hpp"

#include <cmath>

namespace pcrnn {

namespace {

std::vector<MaskSet> masks_for_cell(const LMModel& model, std::size_t cell,
                                    std::optional<std::size_t> layer) {
  if (layer && *layer >= model.layers.size())
    throw UsageError("mask sweep layer " + std::to_string(*layer) + " out of range [0, " +
                     std::to_string(model.layers.size()) + ")");
  std::vector<MaskSet> masks(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    if (!layer || *layer == l) masks[l] = MaskSet{cell};
  return masks;
}

}  // namespace

MaskReport mask_sweep(const LMModel& model, std::span<const int32_t> ids, std::size_t steps,
                      std::optional<std::size_t> layer, const std::vector<EvalGroup>& groups,
                      int threads) {
  const std::size_t wide = model.config.wide;
  MaskReport report;
  report.row_labels.push_back("none");
  for (std::size_t i = 0; i < wide; ++i) report.row_labels.push_back("cell" + std::to_string(i));
  report.col_labels.push_back("all");
  for (const auto& g : groups) report.col_labels.push_back(g.name);
  report.values = Matrix(report.row_labels.size(), report.col_labels.size());

  for (std::size_t row = 0; row < report.row_labels.size(); ++row) {
    const std::vector<MaskSet> masks =
        row == 0 ? std::vector<MaskSet>{} : masks_for_cell(model, row - 1, layer);
    const EvalResult eval = evaluate_nll(model, ids, steps, masks, groups, threads);
    report.values.at(row, 0) = perplexity(eval.mean_nll);
    for (std::size_t g = 0; g < groups.size(); ++g)
      report.values.at(row, g + 1) = perplexity(eval.group_mean_nll[g]);
  }
  return report;
}

double ensemble_eval(const std::vector<const LMModel*>& members, std::span<const int32_t> ids,
                     std::size_t steps, int threads) {
  if (members.empty()) throw UsageError("ensemble needs at least one member");
  const std::size_t vocab = members[0]->config.vocab_size;
  for (const auto* m : members)
    if (m->config.vocab_size != vocab)
      throw ConfigError("ensemble members disagree on vocabulary size (" +
                        std::to_string(m->config.vocab_size) + " vs " + std::to_string(vocab) +
                        ")");
  if (ids.size() < 2) throw DataError("evaluation needs at least 2 tokens");

  std::vector<ModelState> states;
  states.reserve(members.size());
  for (const auto* m : members) states.push_back(zero_model_state(*m, 1));

  const double inv_members = 1.0 / static_cast<double>(members.size());
  const std::size_t total_positions = ids.size() - 1;
  std::vector<double> mixed;
  Vector probs(vocab);
  double total_nll = 0.0;
  std::size_t pos = 0;

  while (pos < total_positions) {
    const std::size_t t = std::min(steps, total_positions - pos);
    mixed.assign(t * vocab, 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      SequenceForward fwd = forward_sequence(*members[k], ids.subspan(pos, t), 1, t, states[k],
                                             {}, nullptr, nullptr, threads);
      states[k] = std::move(fwd.state);
      for (std::size_t step = 0; step < t; ++step) {
        softmax_into(probs.span(), {fwd.logits.row(step), vocab});
        axpy(mixed.data() + step * vocab, 1.0, probs.ptr(), vocab);
      }
    }
    for (std::size_t step = 0; step < t; ++step) {
      const auto target = static_cast<std::size_t>(ids[pos + step + 1]);
      total_nll += -std::log(mixed[step * vocab + target] * inv_members);
    }
    pos += t;
  }
  return perplexity(total_nll / static_cast<double>(total_positions));
}

std::vector<ParamReportRow> param_report(
    const std::vector<std::tuple<std::size_t, std::size_t, CellKind, Routing>>& configs) {
  std::vector<ParamReportRow> rows;
  rows.reserve(configs.size());
  for (const auto& [m, n, kind, routing] : configs) {
    ParamReportRow row;
    row.hidden = m;
    row.wide = n;
    row.kind = kind;
    row.routing = routing;

    if (n != 0 && m % n == 0) {
      const ParallelLayer layer = build_layer(kind, m, m, n, routing);
      row.exact = count_params(layer);
    }
    if (routing == Routing::Split) {
      try {
        if (kind.type == CellType::Lstm) row.closed_form = closed_form_lstm(m, n);
        else if (kind.literal_input) row.closed_form = closed_form_rnn(m, n);
      } catch (const ConfigError&) {
        // closed form not integral for this (m, n); leave it absent
      }
    }
    if (!row.exact && !row.closed_form)
      throw ConfigError("hidden size " + std::to_string(m) + " is not divisible by wide " +
                        std::to_string(n) + " and no closed form applies");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pcrnn
