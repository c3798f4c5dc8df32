#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pcrnn/rng.hpp"

namespace pcrnn {

enum class DropoutTarget {
  Input,      // masks on every layer's input vector
  Recurrent,  // masks on h_{t-1} entering each cell's transform
  Both,
};

// Pre-drawn inverted-dropout masks for one unroll window. Entries are either
// 0 or 1/(1-rate), so evaluation needs no rescaling. Masks are drawn on a
// single thread in a fixed order (layer, stream, step) before the window
// runs, which keeps multi-threaded training bit-identical to sequential.
class DropoutPlan {
public:
  DropoutPlan() = default;

  bool input_on() const { return input_on_; }
  bool recur_on() const { return recur_on_; }
  bool active() const { return input_on_ || recur_on_; }

  // layer_input_dims[l] is the width of layer l's input; hidden is the
  // per-layer total hidden size. Fresh masks for every (layer, stream, step).
  void regenerate(const std::vector<std::size_t>& layer_input_dims, std::size_t hidden,
                  std::size_t batch, std::size_t steps, double rate, DropoutTarget target,
                  Rng& rng);

  std::span<const double> input_mask(std::size_t layer, std::size_t stream,
                                     std::size_t step) const;
  std::span<const double> recur_mask(std::size_t layer, std::size_t stream,
                                     std::size_t step) const;

private:
  bool input_on_ = false;
  bool recur_on_ = false;
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  std::size_t hidden_ = 0;
  std::vector<std::size_t> input_dims_;
  std::vector<std::size_t> input_base_;  // per-layer offset into input_store_
  std::vector<double> input_store_;
  std::vector<double> recur_store_;
};

}  // namespace pcrnn
