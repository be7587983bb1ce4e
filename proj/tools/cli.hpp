#pragma once

#include <iosfwd>

namespace sb {

// Exit codes: 0 success, 2 validation or usage error, 3 estimator error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sb
