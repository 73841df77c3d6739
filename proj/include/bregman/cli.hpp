#ifndef BREGMAN_CLI_HPP
#define BREGMAN_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace bregman {

/// Parses and executes one CLI invocation. Returns 0 on success, 1 on a
/// usage error (help text goes to err), 2 on a runtime failure (message names
/// the failing module). The one-line JSON summary of a successful run goes to
/// out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bregman

#endif
