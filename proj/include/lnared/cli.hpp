#pragma once

namespace lnared {

// Dispatches reduce | moments | sde | sweep | check. Returns the process exit
// code: 0 success, 1 validation/config problems, 2 numerical failures, 64 for
// unusable command lines. Failures print one JSON line to stderr.
int run_command(int argc, const char* const* argv);

} // namespace lnared
