#pragma once

// Deterministic toy graphs for overfit and sanity harnesses.

#include "evokg/tkg_store.hpp"

namespace evokg {

// 10 entities, 2 relations. Each tick's events depend only on tick mod 3:
//   (0, 0, 1) every tick
//   (2, 1, 3) and (8, 1, 9) when tick % 3 == 0
//   (4, 0, 5) when tick % 3 == 1
//   (6, 1, 7) when tick % 3 == 2
// so pair inter-event times are 1 for the first pair and 3 for the rest.
TemporalKG period3_graph(int ticks = 60);

// train: tick < 40, valid: 40..49, test: >= 50 (for the default 60 ticks).
Split period3_split(int ticks = 60);

}  // namespace evokg
