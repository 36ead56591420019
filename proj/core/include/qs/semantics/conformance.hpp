#pragma once

#include "qs/runtime/runtime.hpp"
#include "qs/semantics/checker.hpp"
#include "qs/semantics/program.hpp"

namespace qs::sem {

/// Executes `p` on a fresh runtime: every handler becomes a runtime handler
/// holding the program's registers, every client runs its statements on a
/// handler of its own. Separate blocks map to group reservations, calls to
/// async calls and queries to client-side queries.
///
/// Returns the per-handler event logs in Program::handlers() order, directly
/// comparable with handler_projections().
Projection run_on_runtime(const Program& p, const RuntimeConfig& config);

}  // namespace qs::sem
