#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "specopt/param_graph.hpp"
#include "specopt/spectral.hpp"

namespace specopt
{

/// Malformed input document. The message starts with the path of the offending field.
class ParseError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// {"n": int, "edges": [[i, j, w], ...]} with i < j.
nlohmann::json graph_to_json(const ParameterGraph& g);

/// Accepts edges in either orientation. `where` prefixes error messages.
ParameterGraph graph_from_json(const nlohmann::json& doc, const std::string& where = "graph");

/// {"eigenvalues": [...], "eigenvectors": [[column 0], [column 1], ...]}.
nlohmann::json basis_to_json(const SpectralBasis& basis);

/// Reads and parses a JSON file; parse failures become ParseError.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// %.17g, round-trip safe.
std::string format_double(double v);

} // namespace specopt
