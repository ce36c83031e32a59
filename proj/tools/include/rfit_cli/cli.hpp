#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfit::cli {

/// Runs one `rfit` invocation; argv[0] is the program name.  Returns the
/// process exit code (0 only when every output file was written).
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

/// Command-line tokens equivalent to a flat JSON config object: key `min_node`
/// becomes `--min-node`, arrays become comma lists, `true` becomes a bare
/// flag and `false` is dropped.
std::vector<std::string> config_to_args(const std::string& json_text);

}  // namespace rfit::cli
