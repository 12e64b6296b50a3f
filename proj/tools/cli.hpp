#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sepsearch::cli {

/// Runs one subcommand. Returns 0 on success, 1 on a domain error (its typed
/// name goes to `err`), 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sepsearch::cli
