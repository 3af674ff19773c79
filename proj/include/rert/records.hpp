#pragma once

// Line-delimited decimal-text files for models, reference sets and sample
// splits. Reals are written with 17 significant digits, which round-trips
// every double exactly.
//
//   rert-model D=<D> E=<E> C=<C>
//   expert <C*D weights> <C biases>          (E lines)
//   router <E*D weights> <E biases>
//
//   rert-refset D=<D> De=<De> E=<E> C=<C> T=<T> N=<n>
//   <task> <label> <D features> <De embedding> <E routing>     (n lines)
//
//   rert-split D=<D> De=<De> T=<T> N=<n>
//   <task> <label or -> <D features> <De embedding>            (n lines)

#include <iosfwd>
#include <vector>

#include "rert/refindex.hpp"
#include "rert/rerouting.hpp"
#include "rert/toymoe.hpp"

namespace rert {

void write_model(std::ostream& out, const ToyMoE& model);
ToyMoE read_model(std::istream& in);

void write_reference_set(std::ostream& out, const ReferenceSet& set, std::size_t class_count,
                         int task_types);
/// Every entry is re-verified against bank on load.
ReferenceSet read_reference_set(std::istream& in, const ExpertBank& bank);

void write_split(std::ostream& out, const std::vector<Sample>& samples, int task_types);
std::vector<Sample> read_split(std::istream& in);

/// Malformed record file; the message names the offending line.
struct RecordError : InvalidInput {
  using InvalidInput::InvalidInput;
};

}  // namespace rert
