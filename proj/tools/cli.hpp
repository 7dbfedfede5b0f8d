#pragma once

#include <iosfwd>

namespace dsm {

/// Entry point of the dsmkit tool. Returns 0 on success, 1 on runtime
/// failure and 2 on usage errors; diagnostics go to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsm
