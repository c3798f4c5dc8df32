#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcrnn/model.hpp"

namespace pcrnn {

// Perplexities of a masking sweep: one row per masked configuration ("none",
// then each cell index), one column per evaluation slice ("all", then each
// named token group).
struct MaskReport {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix values;
};

// Evaluates the model with no mask and then with each single cell masked in
// turn. `layer` restricts masking to one layer; by default the mask applies
// to every layer. Group columns aggregate NLL over positions whose target
// token is in the group.
MaskReport mask_sweep(const LMModel& model, std::span<const int32_t> ids, std::size_t steps,
                      std::optional<std::size_t> layer = std::nullopt,
                      const std::vector<EvalGroup>& groups = {}, int threads = 1);

struct EnsembleSpec {
  std::vector<std::string> checkpoint_paths;
};

// Probability-averaged ensemble perplexity: at every position the predicted
// distribution is the arithmetic mean of the members' softmax distributions.
// All members must share the vocabulary size.
double ensemble_eval(const std::vector<const LMModel*>& members, std::span<const int32_t> ids,
                     std::size_t steps, int threads = 1);

struct ParamReportRow {
  std::size_t hidden = 0;  // m
  std::size_t wide = 0;    // n
  CellKind kind;
  Routing routing = Routing::Split;
  // exact stored-entry count; absent when n does not divide m
  std::optional<unsigned long long> exact;
  // closed form (Split routing, input_dim = m); absent for configurations it
  // does not describe (Full routing, projected naive cells)
  std::optional<unsigned long long> closed_form;
};

// Builds each configuration with input_dim = m and reports exact counts next
// to the closed-form values. Throws ConfigError when a row is not computable
// at all.
std::vector<ParamReportRow> param_report(
    const std::vector<std::tuple<std::size_t, std::size_t, CellKind, Routing>>& configs);

}  // namespace pcrnn
