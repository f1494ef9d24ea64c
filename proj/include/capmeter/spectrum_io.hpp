#pragma once

#include <filesystem>
#include <istream>

#include "capmeter/oracle.hpp"

namespace capmeter {

// Plain-text spectrum: one eigenvalue per line. '#' lines may carry
// "epsilon=<real>" (required) and "offsets=<comma-separated reals>".
HessianSpectrum read_spectrum(std::istream& in);
HessianSpectrum load_spectrum(const std::filesystem::path& path);

}  // namespace capmeter
