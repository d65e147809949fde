#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "timediff/data/corpus.hpp"

namespace timediff::data {

/// Corpus CSV: header `sample_id,channel,kind,t0,...,t{L-1}` and one row per
/// channel per sample, kind in {num, cat, mask}. Missing numeric cells are
/// empty. Numbers are written in shortest round-trip form.
void write_corpus(std::ostream& os, const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Throws ParseError (with line number) on malformed input. An empty file is
/// an empty corpus. Category counts are inferred as max + 1 (at least 2)
/// unless `min_categories` asks for more.
Corpus read_corpus(std::istream& is, const std::vector<int>& min_categories = {});
Corpus read_corpus(const std::filesystem::path& path, const std::vector<int>& min_categories = {});

/// Stats sidecar: `key=value` lines, `num.<p>.min|max|mean` per numerical
/// channel and `cat.<p>.categories` per categorical channel.
struct StatsSidecar {
  CorpusStats stats;
  std::vector<int> categories;
};
void write_stats(const std::filesystem::path& path, const StatsSidecar& sidecar);
StatsSidecar read_stats(const std::filesystem::path& path);

/// Flat `key=value` text, `#` comments and blank lines ignored.
std::map<std::string, std::string> read_key_values(std::istream& is);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace timediff::data
