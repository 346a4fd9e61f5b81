#include "evokg/synthetic.hpp"

#include <vector>

namespace evokg {

TemporalKG period3_graph(int ticks) {
  std::vector<Quadruple> q;
  for (Tick t = 0; t < ticks; ++t) {
    q.push_back({0, 0, 1, t});
    switch (t % 3) {
      case 0:
        q.push_back({2, 1, 3, t});
        q.push_back({8, 1, 9, t});
        break;
      case 1:
        q.push_back({4, 0, 5, t});
        break;
      default:
        q.push_back({6, 1, 7, t});
        break;
    }
  }
  return TemporalKG::build(std::move(q), 10, 2);
}

Split period3_split(int ticks) {
  const Tick first = ticks * 2 / 3;
  const Tick second = first + ticks / 6;
  return chronological_split(period3_graph(ticks), first, second);
}

}  // namespace evokg
