#include <algorithm>

#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {

std::vector<Phase> make_schedule(int n_alternate, int total_epochs) {
  if (n_alternate < 1) throw InvalidArgument("n_alternate must be >= 1");
  if (total_epochs < 1) throw InvalidArgument("total_epochs must be >= 1");
  std::vector<Phase> phases;
  PhaseKind kind = PhaseKind::Inner;
  for (int first = 1; first <= total_epochs; first += n_alternate) {
    phases.push_back({kind, first, std::min(total_epochs, first + n_alternate - 1)});
    kind = kind == PhaseKind::Inner ? PhaseKind::Outer : PhaseKind::Inner;
  }
  return phases;
}

}  // namespace inout
