#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "bbsgd/data_io.hpp"
#include "bbsgd/errors.hpp"

namespace bbsgd {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

/// Next whitespace-delimited token of `line` starting at `pos`; empty at end.
std::string_view next_token(std::string_view line, std::size_t& pos) {
  while (pos < line.size() && is_blank(line[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < line.size() && !is_blank(line[pos])) ++pos;
  return line.substr(start, pos - start);
}

bool parse_real(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') {
    token.remove_prefix(1);
    if (!token.empty() && (token.front() == '+' || token.front() == '-')) return false;
  }
  if (token.empty()) return false;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && end == token.data() + token.size() && std::isfinite(out);
}

bool parse_index(std::string_view token, long long& out) {
  if (token.empty()) return false;
  for (char c : token)
    if (c < '0' || c > '9') return false;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && end == token.data() + token.size();
}

double parse_label(std::string_view token, std::size_t line_no, const ParseOptions& options) {
  double value = 0;
  if (!parse_real(token, value))
    throw ParseError(line_no, "label '" + std::string(token) + "' is not a number");
  if (value == 1.0) return 1.0;
  if (value == -1.0) return -1.0;
  if (value == 0.0 && options.zero_one_labels) return -1.0;
  throw ParseError(line_no, "label '" + std::string(token) + "' is not in {+1, -1}" +
                                (options.zero_one_labels ? " or {0, 1}" : ""));
}

}  // namespace

ParsedDataset parse_libsvm(std::string_view text, const ParseOptions& options) {
  if (options.dim && *options.dim < 1) throw std::invalid_argument("explicit dimension must be >= 1");

  ParseReport report;
  std::vector<int> outer{0};
  std::vector<int> inner;
  std::vector<double> values;
  std::vector<double> labels;
  long long max_index = 0;

  std::size_t line_no = 0;
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(begin, end - begin);
    begin = end + 1;
    ++line_no;

    std::size_t pos = 0;
    const std::string_view label_token = next_token(line, pos);
    if (label_token.empty()) continue;
    if (label_token.front() == '#') {
      ++report.n_skipped_comments;
      continue;
    }
    labels.push_back(parse_label(label_token, line_no, options));

    long long previous = 0;
    for (std::string_view token = next_token(line, pos); !token.empty();
         token = next_token(line, pos)) {
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected <index>:<value>, got '" + std::string(token) + "'");
      long long index = 0;
      if (!parse_index(token.substr(0, colon), index) || index < 1)
        throw ParseError(line_no, "feature index in '" + std::string(token) +
                                      "' is not a positive integer");
      if (index > INT_MAX) throw ParseError(line_no, "feature index " + std::to_string(index) + " is too large");
      if (index <= previous)
        throw ParseError(line_no, "feature indices must be strictly increasing (" +
                                      std::to_string(index) + " after " + std::to_string(previous) + ")");
      if (options.dim && index > *options.dim)
        throw ParseError(line_no, "feature index " + std::to_string(index) +
                                      " exceeds dimension " + std::to_string(*options.dim));
      double value = 0;
      if (!parse_real(token.substr(colon + 1), value))
        throw ParseError(line_no, "feature value in '" + std::string(token) + "' is not a finite number");
      previous = index;
      inner.push_back(static_cast<int>(index - 1));
      values.push_back(value);
    }
    if (previous > max_index) max_index = previous;
    if (inner.size() > static_cast<std::size_t>(INT_MAX)) throw ParseError(line_no, "too many nonzeros");
    outer.push_back(static_cast<int>(inner.size()));
  }

  if (labels.empty()) throw ParseError(0, "empty dataset");
  report.n_samples = labels.size();
  report.inferred_d = static_cast<std::size_t>(max_index);
  const Index d = options.dim ? *options.dim : static_cast<Index>(max_index);
  if (d < 1) throw ParseError(0, "dataset has no features and no explicit dimension");

  const auto n = static_cast<Index>(labels.size());
  const Eigen::Map<const SparseRows<double>> view(n, d, static_cast<Index>(values.size()),
                                                  outer.data(), inner.data(), values.data());
  return {Dataset<double>(SparseRows<double>(view),
                          Eigen::Map<const Vector<double>>(labels.data(), n)),
          report};
}

ParsedDataset parse_libsvm(std::istream& in, const ParseOptions& options) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read error while parsing LIBSVM stream");
  return parse_libsvm(std::string_view(text), options);
}

namespace {

std::string read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open " + path.string());
  std::string text;
  char buffer[1 << 16];
  int got = 0;
  while ((got = gzread(file, buffer, sizeof buffer)) > 0) text.append(buffer, static_cast<std::size_t>(got));
  int errnum = Z_OK;
  const char* message = gzerror(file, &errnum);
  const bool failed = got < 0 || (errnum != Z_OK && errnum != Z_STREAM_END);
  const std::string detail = failed ? message : "";
  gzclose(file);
  if (failed) throw IoError("cannot decompress " + path.string() + ": " + detail);
  return text;
}

}  // namespace

ParsedDataset load_libsvm(const std::filesystem::path& path, const ParseOptions& options) {
  if (path.extension() == ".gz") return parse_libsvm(std::string_view(read_gzip(path)), options);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_libsvm(in, options);
}

void write_libsvm(std::ostream& out, const Dataset<double>& data) {
  char buffer[64];
  for (Index i = 0; i < data.size(); ++i) {
    out << (data.label(i) > 0 ? "+1" : "-1");
    for (auto it = data.row(i); it; ++it) {
      const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, it.value());
      out << ' ' << (it.index() + 1) << ':' << std::string_view(buffer, static_cast<std::size_t>(end - buffer));
    }
    out << '\n';
  }
}

std::uint64_t dataset_hash(const Dataset<double>& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* bytes, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t k = 0; k < size; ++k) {
      h ^= p[k];
      h *= 0x100000001b3ULL;
    }
  };
  const auto& f = data.features();
  const Index dims[2] = {f.rows(), f.cols()};
  mix(dims, sizeof dims);
  mix(f.outerIndexPtr(), sizeof(int) * static_cast<std::size_t>(f.outerSize() + 1));
  mix(f.innerIndexPtr(), sizeof(int) * static_cast<std::size_t>(f.nonZeros()));
  mix(f.valuePtr(), sizeof(double) * static_cast<std::size_t>(f.nonZeros()));
  mix(data.labels().data(), sizeof(double) * static_cast<std::size_t>(data.size()));
  return h;
}

}  // namespace bbsgd
