#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "bbsgd/dataset.hpp"

namespace bbsgd {

struct ParseOptions {
  /// Map label 0 to -1 (datasets labelled {0, 1}).
  bool zero_one_labels = false;
  /// Explicit dimension; samples with a larger index are rejected.
  std::optional<Index> dim;
};

struct ParseReport {
  std::size_t n_samples = 0;
  std::size_t inferred_d = 0;  ///< largest feature index seen (1-based)
  std::size_t n_skipped_comments = 0;
};

struct ParsedDataset {
  Dataset<double> data;
  ParseReport report;
};

/// Parses LIBSVM text: one sample per line, `<label> <idx>:<val> ...` with
/// 1-based, strictly increasing indices. Blank lines are ignored and lines
/// starting with '#' are skipped and counted. Throws ParseError.
ParsedDataset parse_libsvm(std::string_view text, const ParseOptions& options = {});
ParsedDataset parse_libsvm(std::istream& in, const ParseOptions& options = {});

/// Reads a LIBSVM file; paths ending in ".gz" are decompressed transparently.
/// Throws std::runtime_error when the file cannot be read.
ParsedDataset load_libsvm(const std::filesystem::path& path, const ParseOptions& options = {});

/// Writes the same grammar parse_libsvm accepts. Values use the shortest
/// decimal form that reads back to the identical double.
void write_libsvm(std::ostream& out, const Dataset<double>& data);

/// Seeded synthetic binary classification data: a ground-truth direction
/// w ~ N(0, I), features a_i ~ N(0, I), labels sign(a_i^T w), each flipped
/// independently with probability `noise`.
Dataset<double> synthesize_dataset(std::uint64_t seed, Index n, Index d, double noise);

/// FNV-1a hash of dimensions, sparsity pattern, values and labels.
std::uint64_t dataset_hash(const Dataset<double>& data);

}  // namespace bbsgd
