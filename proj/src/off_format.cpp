#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "ptl/dataset.hpp"
#include "ptl/error.hpp"

namespace ptl {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<std::string_view> tokenize(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Non-blank lines with '#' comments removed.
std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = tokenize(line);
    if (!tokens.empty()) out.push_back(Line{number, std::move(tokens)});
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "non-numeric token '" + std::string(tok) + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

TriMesh parse_off(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty() || lines[0].tokens[0].substr(0, 3) != "OFF") {
    throw ParseError(lines.empty() ? 1 : lines[0].number, "missing OFF header");
  }

  // Header counts may follow "OFF" on the same line, even glued to it.
  std::vector<std::string_view> counts;
  std::size_t cursor = 0;
  std::size_t count_line = lines[0].number;
  std::string_view glued = lines[0].tokens[0].substr(3);
  if (!glued.empty()) counts.push_back(glued);
  counts.insert(counts.end(), lines[0].tokens.begin() + 1, lines[0].tokens.end());
  ++cursor;
  if (counts.empty()) {
    if (cursor >= lines.size()) throw ParseError(lines[0].number + 1, "missing vertex/face counts");
    counts = lines[cursor].tokens;
    count_line = lines[cursor].number;
    ++cursor;
  }
  if (counts.size() < 2) throw ParseError(count_line, "expected '<vertices> <faces> [edges]'");
  const std::size_t nv = parse_count(counts[0], count_line);
  const std::size_t nf = parse_count(counts[1], count_line);

  auto end_line = [&] { return lines.empty() ? 1 : lines.back().number + 1; };

  TriMesh mesh;
  mesh.vertices.reserve(nv);
  for (std::size_t v = 0; v < nv; ++v, ++cursor) {
    if (cursor >= lines.size()) {
      throw ParseError(end_line(), "count mismatch: header declares " + std::to_string(nv) +
                                       " vertices, found " + std::to_string(v));
    }
    const auto& l = lines[cursor];
    if (l.tokens.size() < 3) throw ParseError(l.number, "vertex needs 3 coordinates");
    mesh.vertices.push_back(
        {parse_real(l.tokens[0], l.number), parse_real(l.tokens[1], l.number),
         parse_real(l.tokens[2], l.number)});
  }

  mesh.faces.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f, ++cursor) {
    if (cursor >= lines.size()) {
      throw ParseError(end_line(), "count mismatch: header declares " + std::to_string(nf) +
                                       " faces, found " + std::to_string(f));
    }
    const auto& l = lines[cursor];
    const std::size_t arity = parse_count(l.tokens[0], l.number);
    if (arity < 3) throw ParseError(l.number, "face needs at least 3 vertices");
    if (l.tokens.size() < arity + 1) {
      throw ParseError(l.number, "face declares " + std::to_string(arity) + " vertices, lists " +
                                     std::to_string(l.tokens.size() - 1));
    }
    std::vector<std::uint32_t> poly(arity);
    for (std::size_t j = 0; j < arity; ++j) {
      const std::size_t idx = parse_count(l.tokens[j + 1], l.number);
      if (idx >= nv) {
        throw ParseError(l.number, "face index " + std::to_string(idx) + " out of range for " +
                                       std::to_string(nv) + " vertices");
      }
      poly[j] = static_cast<std::uint32_t>(idx);
    }
    // Remaining tokens (per-face colors) are ignored.
    for (std::size_t j = 1; j + 1 < arity; ++j) mesh.faces.push_back({poly[0], poly[j], poly[j + 1]});
  }

  if (cursor < lines.size()) {
    throw ParseError(lines[cursor].number,
                     "count mismatch: content beyond the declared " + std::to_string(nv) +
                         " vertices and " + std::to_string(nf) + " faces");
  }
  return mesh;
}

TriMesh read_off(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_off(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

std::string write_off(const TriMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const auto& v : mesh.vertices) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return out.str();
}

}  // namespace ptl
