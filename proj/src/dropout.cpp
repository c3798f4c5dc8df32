#include "pcrnn/dropout.hpp"

#include "pcrnn/errors.hpp"

namespace pcrnn {

void DropoutPlan::regenerate(const std::vector<std::size_t>& layer_input_dims, std::size_t hidden,
                             std::size_t batch, std::size_t steps, double rate,
                             DropoutTarget target, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));

  input_on_ = rate > 0.0 && (target == DropoutTarget::Input || target == DropoutTarget::Both);
  recur_on_ = rate > 0.0 && (target == DropoutTarget::Recurrent || target == DropoutTarget::Both);
  batch_ = batch;
  steps_ = steps;
  hidden_ = hidden;
  input_dims_ = layer_input_dims;

  if (!active()) {
    input_store_.clear();
    recur_store_.clear();
    return;
  }

  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  const auto draw = [&](double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = rng.next_unit() < keep ? scale : 0.0;
  };

  const std::size_t layers = layer_input_dims.size();
  if (input_on_) {
    input_base_.assign(layers, 0);
    std::size_t total = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      input_base_[l] = total;
      total += input_dims_[l] * batch * steps;
    }
    input_store_.resize(total);
  } else {
    input_store_.clear();
  }
  if (recur_on_) recur_store_.resize(layers * batch * steps * hidden);
  else recur_store_.clear();

  // fixed draw order: layer-major, then stream, then step
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t) {
        if (input_on_)
          draw(input_store_.data() + input_base_[l] + (b * steps + t) * input_dims_[l],
               input_dims_[l]);
        if (recur_on_)
          draw(recur_store_.data() + ((l * batch + b) * steps + t) * hidden, hidden);
      }
}

std::span<const double> DropoutPlan::input_mask(std::size_t layer, std::size_t stream,
                                                std::size_t step) const {
  if (!input_on_) return {};
  return {input_store_.data() + input_base_[layer] + (stream * steps_ + step) * input_dims_[layer],
          input_dims_[layer]};
}

std::span<const double> DropoutPlan::recur_mask(std::size_t layer, std::size_t stream,
                                                std::size_t step) const {
  if (!recur_on_) return {};
  return {recur_store_.data() + ((layer * batch_ + stream) * steps_ + step) * hidden_, hidden_};
}

}  // namespace pcrnn
