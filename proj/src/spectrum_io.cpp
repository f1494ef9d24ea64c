#include "capmeter/spectrum_io.hpp"

#include <fstream>
#include <string>

#include "capmeter/errors.hpp"
#include "capmeter/text.hpp"

namespace capmeter {

HessianSpectrum read_spectrum(std::istream& in) {
  std::optional<double> epsilon;
  std::optional<std::vector<double>> offsets;
  std::vector<double> eigenvalues;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      body = text::trim(body.substr(1));
      if (body.starts_with("epsilon=")) {
        epsilon = text::parse_real(body.substr(8));
        if (!epsilon) throw ParseError(ErrorCode::ParseError, line_no, 0, "malformed epsilon header");
      } else if (body.starts_with("offsets=")) {
        offsets = text::parse_real_list(body.substr(8));
        if (!offsets) throw ParseError(ErrorCode::ParseError, line_no, 0, "malformed offsets header");
      }
      continue;
    }
    auto value = text::parse_real(body);
    if (!value) throw ParseError(ErrorCode::ParseError, line_no, 1, "not a real number: '" + std::string(body) + "'");
    eigenvalues.push_back(*value);
  }
  if (!epsilon) throw ParseError(ErrorCode::ParseError, line_no, 0, "missing '# epsilon=<real>' header");
  if (eigenvalues.empty()) throw ParseError(ErrorCode::ParseError, line_no, 0, "no eigenvalues");
  return HessianSpectrum(std::move(eigenvalues), *epsilon, std::move(offsets));
}

HessianSpectrum load_spectrum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open spectrum file " + path.string());
  return read_spectrum(in);
}

}  // namespace capmeter
