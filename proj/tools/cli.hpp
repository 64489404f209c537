#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ncsmpc::cli {

/**
 * @brief Runs the command line given as argv-style tokens (tokens[0] is the
 * program name). Returns the process exit status.
 */
int run(const std::vector<std::string> & tokens, std::ostream & out, std::ostream & err);

}  // namespace ncsmpc::cli
