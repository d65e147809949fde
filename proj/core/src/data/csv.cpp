#include "timediff/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "timediff/error.hpp"

namespace timediff::data {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line);
  }
  return v;
}

struct RawSample {
  std::int64_t id;
  std::vector<std::pair<int, std::vector<double>>> num;
  std::vector<std::pair<int, std::vector<int>>> cat;
  std::vector<std::pair<int, std::vector<int>>> mask;
};

}  // namespace

void write_corpus(std::ostream& os, const Corpus& corpus) {
  corpus.check();
  os << "sample_id,channel,kind";
  for (int l = 0; l < corpus.length; ++l) os << ",t" << l;
  os << '\n';
  for (const auto& s : corpus.samples) {
    for (int p = 0; p < corpus.numeric_channels; ++p) {
      os << s.id << ',' << p << ",num";
      for (int l = 0; l < corpus.length; ++l) {
        os << ',';
        const double v = s.values(p, l);
        if (s.mask(p, l) == 0 && !std::isnan(v)) os << format_double(v);
      }
      os << '\n';
    }
    for (int p = 0; p < corpus.categorical_channels(); ++p) {
      os << s.id << ',' << p << ",cat";
      for (int l = 0; l < corpus.length; ++l) os << ',' << s.categories(p, l);
      os << '\n';
    }
    for (int p = 0; p < corpus.numeric_channels; ++p) {
      os << s.id << ',' << p << ",mask";
      for (int l = 0; l < corpus.length; ++l) os << ',' << s.mask(p, l);
      os << '\n';
    }
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_corpus(os, corpus);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Corpus read_corpus(std::istream& is, const std::vector<int>& min_categories) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool have_header = false;
  std::vector<RawSample> raw;

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "sample_id" || fields[1] != "channel" || fields[2] != "kind") {
        throw ParseError("expected header 'sample_id,channel,kind,t0,...'", line_no);
      }
      for (std::size_t i = 3; i < fields.size(); ++i) {
        if (fields[i] != "t" + std::to_string(i - 3)) throw ParseError("bad time column name", line_no);
      }
      columns = fields.size();
      corpus.length = static_cast<int>(columns - 3);
      have_header = true;
      continue;
    }
    if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    const auto id = parse_number<std::int64_t>(fields[0], line_no, "sample id");
    const int channel = parse_number<int>(fields[1], line_no, "channel");
    if (channel < 0) throw ParseError("negative channel index", line_no);
    if (raw.empty() || raw.back().id != id) {
      for (const auto& r : raw) {
        if (r.id == id) throw ParseError("rows of sample " + std::to_string(id) + " are not contiguous", line_no);
      }
      raw.push_back(RawSample{id, {}, {}, {}});
    }
    RawSample& rs = raw.back();
    const std::string_view kind = fields[2];
    if (kind == "num") {
      std::vector<double> v(static_cast<std::size_t>(corpus.length));
      for (int l = 0; l < corpus.length; ++l) {
        const auto f = fields[static_cast<std::size_t>(l) + 3];
        v[static_cast<std::size_t>(l)] =
            f.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_number<double>(f, line_no, "value");
      }
      rs.num.emplace_back(channel, std::move(v));
    } else if (kind == "cat" || kind == "mask") {
      std::vector<int> v(static_cast<std::size_t>(corpus.length));
      for (int l = 0; l < corpus.length; ++l) {
        const int x = parse_number<int>(fields[static_cast<std::size_t>(l) + 3], line_no, "integer cell");
        if (x < 0) throw ParseError("negative integer cell", line_no);
        if (kind == "mask" && x > 1) throw ParseError("mask cells must be 0 or 1", line_no);
        v[static_cast<std::size_t>(l)] = x;
      }
      (kind == "cat" ? rs.cat : rs.mask).emplace_back(channel, std::move(v));
    } else {
      throw ParseError("unknown kind '" + std::string(kind) + "'", line_no);
    }
  }
  if (raw.empty()) return corpus;

  // Channel layout comes from the first sample and must repeat exactly.
  auto channel_count = [](const auto& rows, const std::string& kind, std::int64_t id) {
    int n = 0;
    for (const auto& [ch, _] : rows) n = std::max(n, ch + 1);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& [ch, _] : rows) {
      if (seen[static_cast<std::size_t>(ch)])
        throw ParseError("sample " + std::to_string(id) + " repeats " + kind + " channel " + std::to_string(ch));
      seen[static_cast<std::size_t>(ch)] = true;
    }
    if (static_cast<std::size_t>(n) != rows.size())
      throw ParseError("sample " + std::to_string(id) + " skips a " + kind + " channel");
    return n;
  };
  corpus.numeric_channels = channel_count(raw.front().num, "num", raw.front().id);
  const int p_d = channel_count(raw.front().cat, "cat", raw.front().id);
  corpus.categories.assign(static_cast<std::size_t>(p_d), 2);
  for (std::size_t p = 0; p < min_categories.size() && p < corpus.categories.size(); ++p) {
    corpus.categories[p] = std::max(corpus.categories[p], min_categories[p]);
  }

  for (const auto& rs : raw) {
    if (channel_count(rs.num, "num", rs.id) != corpus.numeric_channels ||
        channel_count(rs.cat, "cat", rs.id) != p_d) {
      throw ParseError("sample " + std::to_string(rs.id) + " has a different channel layout from the first sample");
    }
    const int mask_rows = channel_count(rs.mask, "mask", rs.id);
    if (mask_rows != 0 && mask_rows != corpus.numeric_channels) {
      throw ParseError("sample " + std::to_string(rs.id) + " has mask rows for some but not all numeric channels");
    }
    TimeSeriesSample s;
    s.id = rs.id;
    s.values.resize(corpus.numeric_channels, corpus.length);
    for (const auto& [ch, v] : rs.num) {
      for (int l = 0; l < corpus.length; ++l) s.values(ch, l) = v[static_cast<std::size_t>(l)];
    }
    s.mask = derive_mask(s.values).mask;
    for (const auto& [ch, v] : rs.mask) {
      for (int l = 0; l < corpus.length; ++l) {
        if (v[static_cast<std::size_t>(l)] != 0) {
          s.mask(ch, l) = 1;
          s.values(ch, l) = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
    s.categories.resize(p_d, corpus.length);
    for (const auto& [ch, v] : rs.cat) {
      for (int l = 0; l < corpus.length; ++l) {
        const int x = v[static_cast<std::size_t>(l)];
        s.categories(ch, l) = x;
        auto& k = corpus.categories[static_cast<std::size_t>(ch)];
        k = std::max(k, x + 1);
      }
    }
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path, const std::vector<int>& min_categories) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_corpus(is, min_categories);
}

std::map<std::string, std::string> read_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (kv.contains(key)) throw ParseError("duplicate key '" + key + "'", line_no);
    kv.emplace(std::move(key), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_key_values(is);
}

void write_stats(const std::filesystem::path& path, const StatsSidecar& sidecar) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto& st = sidecar.stats;
  os << "numeric_channels=" << st.channels() << '\n';
  os << "categorical_channels=" << sidecar.categories.size() << '\n';
  for (int p = 0; p < st.channels(); ++p) {
    const auto up = static_cast<std::size_t>(p);
    os << "num." << p << ".min=" << format_double(st.min[up]) << '\n';
    os << "num." << p << ".max=" << format_double(st.max[up]) << '\n';
    os << "num." << p << ".mean=" << format_double(st.mean[up]) << '\n';
  }
  for (std::size_t p = 0; p < sidecar.categories.size(); ++p) {
    os << "cat." << p << ".categories=" << sidecar.categories[p] << '\n';
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

StatsSidecar read_stats(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("stats file '" + path.string() + "' lacks key '" + key + "'");
    return it->second;
  };
  StatsSidecar sc;
  const int p_r = parse_number<int>(get("numeric_channels"), 0, "numeric_channels");
  const int p_d = parse_number<int>(get("categorical_channels"), 0, "categorical_channels");
  for (int p = 0; p < p_r; ++p) {
    const std::string k = "num." + std::to_string(p) + ".";
    sc.stats.min.push_back(parse_number<double>(get(k + "min"), 0, "min"));
    sc.stats.max.push_back(parse_number<double>(get(k + "max"), 0, "max"));
    sc.stats.mean.push_back(parse_number<double>(get(k + "mean"), 0, "mean"));
  }
  for (int p = 0; p < p_d; ++p) {
    sc.categories.push_back(parse_number<int>(get("cat." + std::to_string(p) + ".categories"), 0, "categories"));
  }
  return sc;
}

}  // namespace timediff::data
