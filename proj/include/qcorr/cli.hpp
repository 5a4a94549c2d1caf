#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qcorr {

/// Entry point behind the qcorr executable. args excludes the program name.
/// Exit codes: 0 success, 2 validation failure, 3 numerical failure,
/// 64 usage error, 66 missing input file.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qcorr
